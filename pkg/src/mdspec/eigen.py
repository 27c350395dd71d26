"""Smallest eigenpairs of the graph Laplacian.

Two routes: a dense LAPACK solve (also the test oracle) and a thick-restart
Lanczos iteration with full reorthogonalization on ``c I - L``, where ``c`` is
the Gershgorin bound of ``L``; no factorization of ``L`` is needed.

Eigenvectors are scaled so that ``v_k^T v_k = p N`` and signed so that the
entry of largest magnitude is positive.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from threadpoolctl import threadpool_limits

from . import rng
from .errors import (
    AsymmetricInputError,
    ConvergenceError,
    MultiplicityError,
    ShapeError,
)

RESIDUAL_TOL = 1e-10
SYMMETRY_TOL = 1e-10


@dataclass(frozen=True)
class LaplacianEigens:
    values: np.ndarray
    vectors: np.ndarray
    scale: float
    epsilon: float
    N: int
    residuals: np.ndarray = None

    @property
    def K(self):
        return self.values.shape[0]

    def truncate(self, K):
        res = None if self.residuals is None else self.residuals[:K]
        return LaplacianEigens(
            self.values[:K], self.vectors[:, :K], self.scale, self.epsilon, self.N, res
        )


def fix_signs(vectors):
    """Flip columns so that each column's largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def dense_symmetric_eig(matrix):
    """Full eigendecomposition of a symmetric matrix, ascending eigenvalues."""
    A = np.asarray(matrix, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeError("matrix must be square")
    scale = max(np.max(np.abs(A)), 1.0) if A.size else 1.0
    if np.max(np.abs(A - A.T), initial=0.0) > SYMMETRY_TOL * scale:
        raise AsymmetricInputError("matrix is not symmetric")
    with threadpool_limits(1):
        return np.linalg.eigh(A)


def gershgorin_bound(L):
    """Upper bound on the spectrum of ``L`` from absolute row sums."""
    if sp.issparse(L):
        return float(np.max(np.asarray(abs(L).sum(axis=1)).ravel()))
    return float(np.max(np.sum(np.abs(L), axis=1)))


def lanczos_largest(matvec, n, k, tol=RESIDUAL_TOL, norm_estimate=1.0,
                    ncv=None, max_restarts=None, seed=0):
    """Thick-restart Lanczos for the ``k`` largest eigenpairs of a symmetric operator.

    Returns ``(values, vectors, residual_norms)`` with descending values.
    Raises ConvergenceError when the restart budget (``20 k``) is exhausted.
    """
    if ncv is None:
        ncv = min(n, max(2 * k + 1, k + 20))
    ncv = min(ncv, n)
    if max_restarts is None:
        max_restarts = 20 * k
    gen = rng.stage_generator(seed, "solver")
    V = np.zeros((n, ncv))
    AV = np.zeros((n, ncv))

    def orthonormalize(w, size):
        for _ in range(2):
            w = w - V[:, :size] @ (V[:, :size].T @ w)
        nrm = np.linalg.norm(w)
        return w, nrm

    v, nrm = orthonormalize(rng.box_muller(gen, n), 0)
    V[:, 0] = v / nrm
    AV[:, 0] = matvec(V[:, 0])
    size = 1
    threshold = tol * norm_estimate
    residuals = None
    for _ in range(max_restarts + 1):
        while size < ncv:
            w, nrm = orthonormalize(AV[:, size - 1], size)
            if nrm <= 1e-12 * norm_estimate:
                # invariant subspace: continue with a fresh random direction
                w, nrm = orthonormalize(rng.box_muller(gen, n), size)
            V[:, size] = w / nrm
            AV[:, size] = matvec(V[:, size])
            size += 1
        T = V.T @ AV
        T = 0.5 * (T + T.T)
        theta, S = np.linalg.eigh(T)
        order = np.argsort(-theta, kind="stable")
        theta, S = theta[order], S[:, order]
        Y = V @ S[:, :k]
        AY = AV @ S[:, :k]
        residuals = np.linalg.norm(AY - Y * theta[:k], axis=0)
        if np.all(residuals <= threshold):
            return theta[:k], Y, residuals
        keep = min(ncv - 2, k + (ncv - k) // 2)
        nxt, _ = orthonormalize(AV[:, ncv - 1], ncv)
        Vkeep = V @ S[:, :keep]
        AVkeep = AV @ S[:, :keep]
        V[:] = 0.0
        AV[:] = 0.0
        V[:, :keep] = Vkeep
        AV[:, :keep] = AVkeep
        w, nrm = orthonormalize(nxt, keep)
        if nrm <= 1e-12:
            w, nrm = orthonormalize(rng.box_muller(gen, n), keep)
        V[:, keep] = w / nrm
        AV[:, keep] = matvec(V[:, keep])
        size = keep + 1
    raise ConvergenceError(
        f"Lanczos did not converge after {max_restarts} restarts", residuals=residuals
    )


def smallest_eigenpairs(L, K, method="dense"):
    """The ``K`` algebraically smallest eigenpairs of a GraphLaplacian."""
    N = L.n_points
    if not 1 <= K <= N:
        raise ShapeError(f"K must lie in [1, {N}]")
    with threadpool_limits(1):
        if method == "dense":
            A = L.dense()
            values, vectors = scipy.linalg.eigh(A, subset_by_index=[0, K - 1])
        elif method == "iterative":
            if K > N / 4:
                raise ShapeError("iterative method requires K <= N / 4")
            c = gershgorin_bound(L.matrix)
            M = L.matrix

            def matvec(v):
                return c * v - M @ v

            theta, vectors, _ = lanczos_largest(matvec, N, K, norm_estimate=c)
            values = c - theta
        else:
            raise ValueError(f"unknown method {method!r}")
        order = np.argsort(values, kind="stable")
        values = values[order]
        vectors = vectors[:, order]
        vectors = vectors / np.linalg.norm(vectors, axis=0)
        residuals = np.linalg.norm(L.matrix @ vectors - vectors * values, axis=0)
    scale = L.norm_constant * N
    vectors = fix_signs(vectors) * np.sqrt(scale)
    return LaplacianEigens(values, vectors, scale, L.epsilon, N, residuals)


def group_multiplicities(values, rtol=1e-6):
    """Group sorted eigenvalues that agree within ``rtol`` (relative to the largest)."""
    values = np.asarray(values, dtype=float)
    spread = max(np.max(np.abs(values)), 1e-300)
    groups = []
    start = 0
    for i in range(1, values.size + 1):
        if i == values.size or values[i] - values[i - 1] > rtol * spread:
            groups.append((float(values[start:i].mean()), i - start))
            start = i
    return groups


def align_to_reference(estimated, reference_values, reference_vectors):
    """Rotate estimated vectors onto the reference span, one eigenspace at a time.

    ``reference_values`` is ``[(value, multiplicity), ...]``.  Within each group
    the orthogonal Procrustes rotation is applied.  Returns the aligned N x K
    matrix and the l-infinity residual of every group.
    """
    E = estimated.vectors if isinstance(estimated, LaplacianEigens) else estimated
    E = np.asarray(E, dtype=float)
    R = np.asarray(reference_vectors, dtype=float)
    sizes = [int(m) for _, m in reference_values]
    total = sum(sizes)
    if R.shape[1] != total or E.shape[1] < total or E.shape[0] != R.shape[0]:
        raise MultiplicityError(
            f"group sizes sum to {total}; estimated has {E.shape[1]} columns, "
            f"reference {R.shape[1]}"
        )
    aligned = np.empty_like(R)
    residuals = []
    start = 0
    for size in sizes:
        cols = slice(start, start + size)
        U, _, Vt = np.linalg.svd(E[:, cols].T @ R[:, cols])
        aligned[:, cols] = E[:, cols] @ (U @ Vt)
        residuals.append(float(np.max(np.abs(aligned[:, cols] - R[:, cols]))))
        start += size
    return aligned, residuals
