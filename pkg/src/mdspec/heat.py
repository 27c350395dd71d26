"""Truncated heat-kernel estimator built from Laplacian eigenpairs.

The N x N estimate ``sum_k exp(-mu_k t) v_k v_k^T`` is kept in factored form
(the N x K eigenvector matrix plus K weights).  Only the m x m labeled block is
ever materialized.
"""

from dataclasses import dataclass
import logging
import math

import numpy as np
from threadpoolctl import threadpool_limits

from .eigen import fix_signs
from .errors import BoundsError, InvalidTimeError, ShapeError
from .geometry import analytic_kernel_matrix

log = logging.getLogger(__name__)

UNDERFLOW = 1e-300
DENSE_LIMIT = 4000


@dataclass(frozen=True)
class HeatKernelEstimate:
    eigens: object
    t: float
    weights: np.ndarray

    @property
    def N(self):
        return self.eigens.N

    @property
    def K(self):
        return self.eigens.K

    def _check(self, idx):
        idx = np.asarray(idx)
        if np.any(idx < 0) or np.any(idx >= self.N):
            raise BoundsError(f"index out of range [0, {self.N})")
        return idx

    def entry(self, i, j):
        self._check([i, j])
        V = self.eigens.vectors
        # V[i] * V[j] is commutative elementwise, so (i, j) and (j, i) agree bitwise
        return float(np.dot(self.weights, V[i] * V[j]))

    def rows(self, index):
        """Rows ``index`` of the estimate as a len(index) x N array."""
        index = self._check(index)
        V = self.eigens.vectors
        with threadpool_limits(1):
            return (V[index] * self.weights) @ V.T

    def diagonal(self):
        V = self.eigens.vectors
        return np.einsum("ik,k,ik->i", V, self.weights, V)

    def kappa_squared(self):
        """max_i H(i, i), the runtime stand-in for the kernel bound."""
        return float(np.max(self.diagonal()))

    def dense(self):
        if self.N > DENSE_LIMIT:
            raise ShapeError(f"refusing to materialize an N = {self.N} estimate")
        return self.rows(np.arange(self.N))


@dataclass(frozen=True)
class BlockEigens:
    values: np.ndarray
    vectors: np.ndarray
    m: int
    t: float


def heat_kernel_estimate(eigens, t):
    """Factored estimate with weights ``exp(-mu_k t)``; tiny weights flushed to 0."""
    if not t > 0:
        raise InvalidTimeError(f"t must be > 0, got {t}")
    weights = np.exp(-eigens.values * t)
    weights[weights < UNDERFLOW] = 0.0
    return HeatKernelEstimate(eigens, float(t), weights)


def hk_entry(est, i, j):
    """Entry (i, j) of the estimate, 0-based indices."""
    return est.entry(i, j)


def truncation_check(est):
    """Surrogate for the K-truncation condition: (K+1) exp(-mu_K t) <= 1/K.

    Returns ``(ok, lhs, rhs)`` and logs a warning when it fails.
    """
    K = est.K
    lhs = (K + 1) * math.exp(-float(est.eigens.values[-1]) * est.t)
    rhs = 1.0 / K
    ok = lhs <= rhs
    if not ok:
        log.warning(
            "heat-kernel truncation condition not met: (K+1)exp(-mu_K t) = %.3g > 1/K = %.3g",
            lhs,
            rhs,
        )
    return ok, lhs, rhs


def block_eigens_from_matrix(matrix, t, m=None):
    """Eigendecomposition of a symmetric block, values nonincreasing."""
    B = np.asarray(matrix, dtype=float)
    B = 0.5 * (B + B.T)
    with threadpool_limits(1):
        values, vectors = np.linalg.eigh(B)
    # ties keep the original (ascending-solver) index order
    order = np.argsort(-values, kind="stable")
    return BlockEigens(values[order], fix_signs(vectors[:, order]),
                       B.shape[0] if m is None else m, float(t))


def labeled_block(est, m):
    """(1/m) times the top-left m x m block of the estimate."""
    if not 1 <= m <= est.N:
        raise BoundsError(f"m must lie in [1, {est.N}]")
    Vm = est.eigens.vectors[:m]
    with threadpool_limits(1):
        B = ((Vm * est.weights) @ Vm.T) / m
    return 0.5 * (B + B.T)


def labeled_block_eigens(est, m):
    return block_eigens_from_matrix(labeled_block(est, m), est.t, m)


def exact_heat_kernel_matrix(spec, cloud, t, truncation=None):
    """Oracle heat-kernel matrix (1/m) H_t(x_i, x_j) over the labeled points."""
    m = cloud.labeled_count
    if m < 1:
        raise ShapeError("cloud has no labeled points")
    X = cloud.points[:m]
    return analytic_kernel_matrix(spec, X, X, t, truncation) / m


def exact_kernel_rows(spec, cloud, t, truncation=None):
    """Unnormalized oracle rows H_t(x_i, x_j), i labeled, j over all N points."""
    X = cloud.points
    return analytic_kernel_matrix(spec, X[: cloud.labeled_count], X, t, truncation)
