"""Spectral filters, hyperparameter schedules and the diffusion-based estimator."""

from dataclasses import dataclass, field
import json
import logging
import math

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import (
    DegenerateEigenvalueError,
    InvalidRegularizationError,
    ShapeError,
)

log = logging.getLogger(__name__)

FILTER_KINDS = ("tikhonov", "spectral_cutoff", "gradient_flow", "landweber")
# block eigenvalues below this fraction of the largest are dropped from the truncation
CLAMP_RTOL = 1e-14


@dataclass(frozen=True)
class FilterFamily:
    kind: str
    steps: int = None  # landweber only; None means floor(1 / lambda)

    def __post_init__(self):
        if self.kind not in FILTER_KINDS:
            raise ValueError(f"unknown filter {self.kind!r}")
        if self.steps is not None and (self.kind != "landweber" or self.steps < 1):
            raise ValueError("steps is a positive integer and only valid for landweber")

    @property
    def qualification(self):
        return 1.0 if self.kind == "tikhonov" else math.inf

    def to_dict(self):
        out = {"kind": self.kind}
        if self.steps is not None:
            out["steps"] = self.steps
        return out

    @classmethod
    def from_dict(cls, data):
        if isinstance(data, str):
            return cls(data)
        return cls(data["kind"], data.get("steps"))


def landweber_steps(filt, lam):
    return filt.steps if filt.steps is not None else max(1, math.floor(1.0 / lam))


def filter_value(filt, lam, s):
    """Evaluate g_lambda(s); ``s`` may be a scalar or an array of nonnegative values."""
    if not lam > 0:
        raise InvalidRegularizationError(f"lambda must be > 0, got {lam}")
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0):
        raise ValueError("filter argument must be >= 0")
    scalar = s_arr.ndim == 0
    s_arr = np.atleast_1d(s_arr)
    out = np.empty_like(s_arr)
    zero = s_arr == 0
    pos = ~zero
    sp_ = s_arr[pos]
    if filt.kind == "tikhonov":
        out = 1.0 / (lam + s_arr)
    elif filt.kind == "spectral_cutoff":
        out[zero] = 0.0
        out[pos] = np.where(sp_ >= lam, 1.0 / sp_, 0.0)
    elif filt.kind == "gradient_flow":
        out[zero] = 1.0 / lam
        out[pos] = -np.expm1(-sp_ / lam) / sp_
    else:
        T = landweber_steps(filt, lam)
        if np.any(s_arr > 1):
            raise ValueError("landweber with unit step needs s <= 1")
        out[zero] = float(T)
        # sum_{i<T} (1-s)^i = (1 - (1-s)^T) / s, which never exceeds T or 1/s;
        # the clamp only removes rounding overshoot
        with np.errstate(divide="ignore"):
            val = np.where(
                sp_ < 1.0, -np.expm1(T * np.log1p(-np.minimum(sp_, 1.0))) / sp_, 1.0 / sp_
            )
        out[pos] = np.minimum(np.minimum(val, float(T)), 1.0 / sp_)
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class HyperParams:
    epsilon: float
    t: float
    lam: float
    K: int
    q: int
    r: float = 2.0
    lambda_scale: float = 1.0
    q_scale: float = 1.0

    def __post_init__(self):
        for name in ("epsilon", "t", "lam", "K", "q"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.r > 1:
            raise ValueError("r must be > 1")


def schedule_q(m, d, t, r=2.0, q_scale=1.0):
    """Truncation level ``round(q_scale (ln m / (t (2r+1)))^{d/2})`` clamped to [1, m]."""
    q = round(q_scale * (math.log(m) / (t * (2 * r + 1))) ** (d / 2.0))
    return int(min(max(q, 1), m))


def schedule_lambda(m, d, lambda_scale=1.0):
    """Regularization schedule ``lambda_scale ((ln m)^{d/2} / m)^{1/2}``."""
    return lambda_scale * (math.log(m) ** (d / 2.0) / m) ** 0.5


def default_hyperparams(m, d, t, r=2.0, lambda_scale=1.0, q_scale=1.0,
                        *, N=None, K=None, epsilon_scale=1.0):
    from .graph import default_epsilon

    if m < 2 or not r > 1:
        raise ValueError("need m >= 2 and r > 1")
    N = m if N is None else N
    K = min(N, 200) if K is None else K
    return HyperParams(
        epsilon=default_epsilon(max(N, 2), d, epsilon_scale),
        t=t,
        lam=schedule_lambda(m, d, lambda_scale),
        K=K,
        q=schedule_q(m, d, t, r, q_scale),
        r=r,
        lambda_scale=lambda_scale,
        q_scale=q_scale,
    )


def usable_truncation(block, q):
    """Largest q' <= q with block eigenvalues strictly above the clamp floor."""
    vals = block.values[: min(q, block.values.size)]
    floor = CLAMP_RTOL * max(float(block.values[0]), 0.0)
    bad = np.nonzero(vals <= floor)[0]
    return int(bad[0]) if bad.size else int(vals.size)


def empirical_eigenfunctions(est, block, q):
    """N x q matrix of phi_k = (m lambda_k)^{-1/2} sum_i u_k(i) H(i, .)."""
    m = block.m
    if not 1 <= q <= m:
        raise ShapeError(f"q must lie in [1, m = {m}]")
    lam = block.values[:q]
    if np.any(lam <= 0):
        k = int(np.nonzero(lam <= 0)[0][0])
        raise DegenerateEigenvalueError(
            f"block eigenvalue {k + 1} is {lam[k]:.3g} <= 0", q_reduced=k
        )
    V = est.eigens.vectors
    with threadpool_limits(1):
        inner = est.weights[:, None] * (V[:m].T @ block.vectors[:, :q])
        return (V @ inner) / np.sqrt(m * lam)


def sample_coefficients(y, phi):
    """g_k = (1/m) sum_{i<m} y_i phi_k(i)."""
    y = np.asarray(y, dtype=float).reshape(-1)
    phi = np.asarray(phi, dtype=float)
    if phi.ndim != 2 or phi.shape[0] < y.size:
        raise ShapeError("eigenfunction matrix has fewer rows than responses")
    return phi[: y.size].T @ y / y.size


@dataclass(frozen=True)
class DiffusionEstimator:
    values: np.ndarray
    q_used: int
    lam: float
    t: float
    filter: FilterFamily
    block_values: np.ndarray
    filter_values: np.ndarray
    coefficients: np.ndarray
    eigenfunctions: np.ndarray
    q_requested: int = None

    def reconstruct(self):
        return self.eigenfunctions @ (self.filter_values * self.coefficients)

    def components(self):
        """Per-k triples (lambda_k, g_k, phi_k)."""
        return [
            (float(self.block_values[k]), float(self.coefficients[k]), self.eigenfunctions[:, k])
            for k in range(self.q_used)
        ]

    def to_json(self):
        doc = {
            "lambda": self.lam,
            "t": self.t,
            "q_used": self.q_used,
            "q_requested": self.q_requested,
            "filter": self.filter.to_dict(),
            "values": self.values.tolist(),
            "components": {
                "block_values": self.block_values.tolist(),
                "filter_values": self.filter_values.tolist(),
                "coefficients": self.coefficients.tolist(),
                "eigenfunctions": self.eigenfunctions.T.tolist(),
            },
        }
        # json emits floats with repr, the shortest round-trip form
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        comp = doc["components"]
        q = doc["q_used"]
        phi = np.array(comp["eigenfunctions"], dtype=float).reshape(q, -1).T
        return cls(
            values=np.array(doc["values"], dtype=float),
            q_used=q,
            lam=doc["lambda"],
            t=doc["t"],
            filter=FilterFamily.from_dict(doc["filter"]),
            block_values=np.array(comp["block_values"], dtype=float),
            filter_values=np.array(comp["filter_values"], dtype=float),
            coefficients=np.array(comp["coefficients"], dtype=float),
            eigenfunctions=phi,
            q_requested=doc.get("q_requested"),
        )


def fit_diffusion(dataset, est, block, filt, hp):
    """Truncated spectral filtering on the estimated heat kernel.

    Eigenvalues at or below ``1e-14`` times the largest are dropped from the
    truncation (with a warning) rather than divided by.
    """
    m = dataset.m
    if dataset.cloud.N != est.N:
        raise ShapeError("dataset and heat-kernel estimate disagree on N")
    if block.m != m:
        raise ShapeError("block eigens were computed for a different m")
    if not 1 <= hp.q <= m:
        raise ShapeError(f"q = {hp.q} must lie in [1, m = {m}]")
    q = usable_truncation(block, hp.q)
    if q == 0:
        raise DegenerateEigenvalueError("no positive block eigenvalue", q_reduced=0)
    if q < hp.q:
        log.warning("truncation reduced from q = %d to %d (degenerate eigenvalues)", hp.q, q)
    phi = empirical_eigenfunctions(est, block, q)
    coef = sample_coefficients(dataset.y, phi)
    lam_k = block.values[:q].copy()
    gvals = filter_value(filt, hp.lam, lam_k)
    values = phi @ (gvals * coef)
    return DiffusionEstimator(
        values=values,
        q_used=q,
        lam=float(hp.lam),
        t=float(hp.t),
        filter=filt,
        block_values=lam_k,
        filter_values=gvals,
        coefficients=coef,
        eigenfunctions=phi,
        q_requested=int(hp.q),
    )


def classical_fit(exact_kernel, y, filt, lam, eval_kernel_rows):
    """Classical spectral algorithm with a known kernel.

    ``exact_kernel`` is the (1/m)-normalized m x m kernel matrix and
    ``eval_kernel_rows`` the raw m x N kernel values H(x_i, x_j).
    """
    H = np.asarray(exact_kernel, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    rows = np.asarray(eval_kernel_rows, dtype=float)
    m = y.size
    if H.shape != (m, m) or rows.shape[0] != m:
        raise ShapeError("kernel shapes inconsistent with y")
    with threadpool_limits(1):
        s, U = np.linalg.eigh(0.5 * (H + H.T))
        gamma = U @ (filter_value(filt, lam, np.clip(s, 0.0, None)) * (U.T @ y))
        return rows.T @ gamma / m
