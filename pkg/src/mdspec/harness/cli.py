"""``mdspec`` command line.

Exit codes: 0 success, 2 configuration error, 3 numerical failure (the failing
stage is named on stderr).
"""

import json
import logging
import sys

import click

from .. import geometry, graph
from ..errors import ConfigError, MdspecError, NumericalError
from ..spectral import FilterFamily
from . import io
from .config import ExperimentConfig, load_config
from .experiment import StageError, convergence_study, fit_dataset, laplacian_eigens, run_experiment, write_outputs

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _fail(code, message):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guard(fn):
    """Map package errors onto the documented exit codes."""

    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except StageError as exc:
            _fail(EXIT_NUMERICAL, f"stage {exc.stage}: {exc.cause}")
        except NumericalError as exc:
            _fail(EXIT_NUMERICAL, str(exc))
        except MdspecError as exc:
            _fail(EXIT_CONFIG, str(exc))

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _parse_floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _parse_ints(text):
    """``50,100,200`` or an inclusive range ``1..5``."""
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(v) for v in text.split(",") if v.strip()]


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log warnings and progress.")
def main(verbose):
    """Diffusion-based spectral semi-supervised regression on manifolds."""
    logging.basicConfig(level=logging.INFO if verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.option("--manifold", type=click.Choice(geometry.KINDS), required=True)
@click.option("--fn", "fn_kind", required=True,
              type=click.Choice(["circle_trig", "sphere_theta", "sphere_theta_phi", "custom_coeffs"]))
@click.option("--params", default=None, help="Comma-separated target parameters.")
@click.option("--m", type=int, required=True)
@click.option("--n", type=int, required=True)
@click.option("--sigma", type=float, default=1.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@_guard
def generate(manifold, fn_kind, params, m, n, sigma, seed, out):
    """Sample a labeled + unlabeled dataset to CSV with a JSON sidecar."""
    defaults = {"circle_trig": "1,1", "sphere_theta": "20,24", "sphere_theta_phi": "20", "custom_coeffs": "0,1,0"}
    try:
        fn_spec = geometry.TargetFnSpec(fn_kind, _parse_floats(params or defaults[fn_kind]))
        data = geometry.make_dataset(geometry.ManifoldSpec(manifold), fn_spec, m, n, sigma, seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    io.save_dataset(out, data)
    click.echo(f"wrote {data.cloud.N} points ({m} labeled) to {out}")


@main.command("eigen")
@click.option("--in", "in_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--epsilon", type=float, default=None, help="Defaults to the (ln N / N) schedule.")
@click.option("--epsilon-scale", type=float, default=1.0, show_default=True)
@click.option("--p", "p", type=float, default=None, help="Density constant; defaults to 1/vol.")
@click.option("--k", "K", type=int, required=True)
@click.option("--method", type=click.Choice(["dense", "iterative"]), default="dense", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--dump-laplacian", type=click.Path(dir_okay=False), default=None,
              help="Also write L_un in Matrix Market format.")
@_guard
def eigen_cmd(in_path, epsilon, epsilon_scale, p, K, method, out, dump_laplacian):
    """Emit the K smallest Laplacian eigenpairs' diagnostics as JSON lines."""
    data = io.load_dataset(in_path)
    cloud = data.cloud
    cfg = ExperimentConfig(manifold=cloud.spec, target=data.fn_spec, m=cloud.m, n=cloud.n, method=method)
    cfg = cfg.override(epsilon=epsilon, epsilon_scale=epsilon_scale, p=p, K=K)
    if not 1 <= K <= cloud.N:
        raise ConfigError(f"K must lie in [1, {cloud.N}]")
    eig, L = laplacian_eigens(cloud, cfg)
    with open(out, "w") as fh:
        for k in range(eig.K):
            fh.write(json.dumps({"k": k + 1, "mu": float(eig.values[k]), "residual": float(eig.residuals[k])}) + "\n")
    if dump_laplacian:
        graph.write_matrix_market(dump_laplacian, L.matrix, comment=f"L_un epsilon={L.epsilon} p={L.norm_constant}")
    click.echo(f"wrote {eig.K} eigenpairs to {out}")


def _apply_overrides(cfg, **kw):
    outputs = dict(cfg.outputs)
    for key in ("report", "predictions", "model"):
        if kw.get(key):
            outputs[key] = kw[key]
    flt = kw.get("filter_kind")
    try:
        flt = FilterFamily(flt) if flt else None
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.override(
        seed=kw.get("seed"),
        method=kw.get("method"),
        threads=kw.get("threads"),
        filter=flt,
        outputs=outputs,
    )


@main.command()
@click.option("--in", "in_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--config", "cfg_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--model-out", "model", type=click.Path(dir_okay=False), default=None)
@click.option("--report", type=click.Path(dir_okay=False), default=None)
@click.option("--predictions", type=click.Path(dir_okay=False), default=None)
@click.option("--filter", "filter_kind", default=None)
@_guard
def fit(in_path, cfg_path, model, report, predictions, filter_kind):
    """Fit the estimator on a saved dataset using hyperparameters from a config."""
    data = io.load_dataset(in_path)
    cfg = load_config(cfg_path)
    cfg = _apply_overrides(cfg, model=model, report=report, predictions=predictions, filter_kind=filter_kind)
    cloud = data.cloud
    cfg = cfg.override(manifold=cloud.spec, target=data.fn_spec, m=cloud.m, n=cloud.n,
                       noise_sigma=data.noise_sigma, seed=cloud.seed)
    cfg.validate()
    rep = fit_dataset(data, cfg)
    write_outputs(rep, cfg.outputs)
    click.echo(json.dumps(rep.metrics))


@main.command()
@click.option("--config", "cfg_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--seed", type=int, default=None)
@click.option("--filter", "filter_kind", default=None)
@click.option("--method", type=click.Choice(["dense", "iterative"]), default=None)
@click.option("--threads", type=int, default=None)
@click.option("--report", type=click.Path(dir_okay=False), default=None)
@click.option("--predictions", type=click.Path(dir_okay=False), default=None)
@click.option("--model-out", "model", type=click.Path(dir_okay=False), default=None)
@_guard
def experiment(cfg_path, **kw):
    """Run sampling, fitting and evaluation end to end from a config."""
    cfg = _apply_overrides(load_config(cfg_path), **kw)
    rep = run_experiment(cfg)
    click.echo(json.dumps(rep.metrics))


@main.command()
@click.option("--config", "cfg_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--m-grid", default="50,100,200,400", show_default=True)
@click.option("--seeds", default="1..5", show_default=True)
@click.option("--filters", default=None, help="Comma-separated filter kinds; defaults to the config's.")
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@_guard
def convergence(cfg_path, m_grid, seeds, filters, workers, out):
    """Sup-error slope versus log m over a grid of labeled sizes and seeds."""
    cfg = load_config(cfg_path)
    try:
        flts = [FilterFamily(k) for k in filters.split(",")] if filters else None
        result = convergence_study(cfg, _parse_ints(m_grid), _parse_ints(seeds), flts, workers)
    except ValueError as exc:
        if isinstance(exc, MdspecError):
            raise
        raise ConfigError(str(exc)) from exc
    io.write_json(out, result)
    click.echo(json.dumps({k: v["slope"] for k, v in result["filters"].items()}))


if __name__ == "__main__":  # pragma: no cover
    main()
