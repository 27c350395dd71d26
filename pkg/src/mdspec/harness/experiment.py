"""End-to-end runs of the diffusion-based estimator and convergence studies."""

from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
import logging
import math
from pathlib import Path
import time

import numpy as np

from .. import eigen, geometry, graph, heat, spectral
from ..errors import MdspecError
from . import io

log = logging.getLogger(__name__)

STAGES = ("sample", "laplacian", "eigen", "heat", "block", "fit", "metrics")


class StageError(MdspecError):
    """A module error re-raised with the name of the failing stage."""

    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@contextmanager
def _stage(name, timings):
    start = time.perf_counter()
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc
    finally:
        timings[name] = timings.get(name, 0.0) + time.perf_counter() - start


@dataclass
class ExperimentReport:
    config: dict
    hyperparams: dict
    metrics: dict
    diagnostics: dict
    timings: dict
    predictions: dict = field(repr=False)
    estimator: object = field(default=None, repr=False)

    def to_dict(self):
        return {
            "config": self.config,
            "hyperparams": self.hyperparams,
            "metrics": self.metrics,
            "diagnostics": self.diagnostics,
            "timings": self.timings,
        }


def compute_metrics(table):
    """Sup and RMSE errors of f_hat against f_star on labeled / unlabeled rows."""
    err = table["f_hat"] - table["f_star"]
    lab = np.asarray(table["labeled"], dtype=bool)
    out = {}
    for name, mask in (("labeled", lab), ("unlabeled", ~lab)):
        e = err[mask]
        if e.size == 0:
            out[f"sup_error_{name}"] = None
            out[f"rmse_{name}"] = None
            continue
        out[f"sup_error_{name}"] = float(np.max(np.abs(e)))
        out[f"rmse_{name}"] = float(np.sqrt(np.mean(e**2)))
    f_un = table["f_star"][~lab]
    std = float(np.std(f_un)) if f_un.size else 0.0
    out["relative_rmse_unlabeled"] = (
        out["rmse_unlabeled"] / std if out["rmse_unlabeled"] is not None and std > 0 else None
    )
    out["n_labeled"] = int(lab.sum())
    out["n_unlabeled"] = int((~lab).sum())
    return out


def laplacian_eigens(cloud, config, timings=None):
    """Build L_un on all points and solve for its K smallest eigenpairs."""
    timings = {} if timings is None else timings
    with _stage("laplacian", timings):
        W = graph.gaussian_affinity(cloud, config.epsilon(), threads=config.threads)
        L = graph.unnormalized_laplacian(W, config.p(), cloud.N)
        del W
    with _stage("eigen", timings):
        eig = eigen.smallest_eigenpairs(L, config.hyper.K, method=config.method)
    return eig, L


def fit_dataset(dataset, config, eigens=None, timings=None):
    """Heat kernel, labeled block, filtered fit and metrics on an existing dataset.

    ``eigens`` may be passed in to reuse a Laplacian solve on the same cloud.
    """
    timings = {} if timings is None else timings
    cloud = dataset.cloud
    hp = config.hyperparams()
    if eigens is None:
        eigens, _ = laplacian_eigens(cloud, config, timings)
    with _stage("heat", timings):
        est = heat.heat_kernel_estimate(eigens, hp.t)
        trunc_ok, trunc_lhs, trunc_rhs = heat.truncation_check(est)
    with _stage("block", timings):
        block = heat.labeled_block_eigens(est, cloud.m)
    with _stage("fit", timings):
        model = spectral.fit_diffusion(dataset, est, block, config.filter, hp)
    with _stage("metrics", timings):
        table = {
            "index": np.arange(cloud.N),
            "labeled": np.arange(cloud.N) < cloud.m,
            "x": np.asarray(cloud.points),
            "f_star": geometry.eval_target(dataset.fn_spec, cloud.points, cloud.spec),
            "f_hat": model.values,
        }
        metrics = compute_metrics(table)
    sched = config.schedule()
    report = ExperimentReport(
        config=config.to_dict(),
        hyperparams={
            "used": {
                "epsilon": hp.epsilon,
                "t": hp.t,
                "lambda": hp.lam,
                "K": hp.K,
                "q": hp.q,
                "r": hp.r,
                "p": config.p(),
            },
            "schedule": {
                "epsilon": graph.default_epsilon(
                    max(cloud.N, 2), cloud.spec.intrinsic_dim, config.hyper.epsilon_scale
                ),
                "q": sched["q"],
                "lambda": sched["lambda"],
            },
        },
        metrics=metrics,
        diagnostics={
            "mu_head": eigens.values[:10].tolist(),
            "lambda_head": block.values[:10].tolist(),
            "q_requested": hp.q,
            "q_used": model.q_used,
            "kappa_squared": est.kappa_squared(),
            "eigen_residual_max": float(np.max(eigens.residuals)),
            "truncation_condition": {"ok": bool(trunc_ok), "lhs": trunc_lhs, "rhs": trunc_rhs},
        },
        timings=timings,
        predictions=table,
        estimator=model,
    )
    return report


def write_outputs(report, outputs):
    if outputs.get("report"):
        io.write_json(outputs["report"], report.to_dict())
    if outputs.get("predictions"):
        io.write_predictions(outputs["predictions"], report.predictions)
    if outputs.get("model"):
        Path(outputs["model"]).write_text(report.estimator.to_json() + "\n")


def run_experiment(config, write=True):
    """Sample a dataset from the config and run the full algorithm on it."""
    config.validate()
    timings = {}
    with _stage("sample", timings):
        dataset = geometry.make_dataset(
            config.manifold, config.target, config.m, config.n, config.noise_sigma, config.seed
        )
    report = fit_dataset(dataset, config, timings=timings)
    if write:
        write_outputs(report, config.outputs)
    return report


def least_squares_slope(m_grid, mean_log_errors):
    if len(m_grid) < 2:
        return None
    return float(np.polyfit(np.log(np.asarray(m_grid, dtype=float)), mean_log_errors, 1)[0])


def convergence_study(base, m_grid, seeds, filters=None, workers=1):
    """Sup unlabeled error over an (m, seed) grid at fixed N; slope of mean log error vs log m.

    The cloud for a seed does not depend on m, so each seed solves the Laplacian
    eigenproblem once and reuses it across the m grid.
    """
    m_grid = [int(m) for m in m_grid]
    if sorted(m_grid) != m_grid or len(set(m_grid)) != len(m_grid):
        raise ValueError("m_grid must be strictly ascending")
    N = base.N
    if m_grid[-1] > N - 1:
        raise ValueError(f"every m must be <= N - 1 = {N - 1}")
    filters = [base.filter] if filters is None else list(filters)
    configs = {m: base.override(m=m, n=N - m) for m in m_grid}
    for cfg in configs.values():
        cfg.validate()

    def run_seed(seed):
        cloud = geometry.sample_manifold(base.manifold, N, seed)
        eig, _ = laplacian_eigens(cloud, base.override(seed=seed))
        cells = []
        for m in m_grid:
            data = geometry.make_dataset(
                base.manifold, base.target, m, N - m, base.noise_sigma, seed
            )
            for filt in filters:
                cfg = configs[m].override(seed=seed, filter=filt)
                rep = fit_dataset(data, cfg, eigens=eig)
                cells.append(
                    {
                        "m": m,
                        "seed": seed,
                        "filter": filt.kind,
                        "sup_error_unlabeled": rep.metrics["sup_error_unlabeled"],
                        "rmse_unlabeled": rep.metrics["rmse_unlabeled"],
                        "q_used": rep.diagnostics["q_used"],
                        "lambda": rep.hyperparams["used"]["lambda"],
                    }
                )
        return cells

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_seed = list(pool.map(run_seed, seeds))
    else:
        per_seed = [run_seed(s) for s in seeds]
    cells = [c for group in per_seed for c in group]

    summary = {}
    for filt in filters:
        mean_log = []
        for m in m_grid:
            errs = [c["sup_error_unlabeled"] for c in cells if c["m"] == m and c["filter"] == filt.kind]
            mean_log.append(float(np.mean(np.log(errs))))
        summary[filt.kind] = {
            "mean_log_error": mean_log,
            "slope": least_squares_slope(m_grid, mean_log),
        }
    return {
        "config": base.to_dict(),
        "N": N,
        "m_grid": m_grid,
        "seeds": list(seeds),
        "cells": cells,
        "filters": summary,
    }
