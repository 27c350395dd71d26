"""Gaussian affinity and un-normalized graph Laplacian on a point cloud."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import math

import numpy as np
import scipy.io
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .errors import InvalidBandwidthError, ShapeError

DENSE_LIMIT = 8192
SPARSE_DROP = 1e-14
ROW_BLOCK = 512


@dataclass(frozen=True)
class AffinityMatrix:
    entries: object  # ndarray, or scipy.sparse.csr_matrix above DENSE_LIMIT
    epsilon: float
    intrinsic_dim: int

    @property
    def N(self):
        return self.entries.shape[0]

    @property
    def diagonal_value(self):
        return kernel_constant(self.epsilon, self.intrinsic_dim)

    @property
    def is_sparse(self):
        return sp.issparse(self.entries)


@dataclass(frozen=True)
class GraphLaplacian:
    matrix: object
    epsilon: float
    norm_constant: float
    n_points: int

    @property
    def is_sparse(self):
        return sp.issparse(self.matrix)

    def matvec(self, v):
        return self.matrix @ v

    def dense(self):
        return self.matrix.toarray() if self.is_sparse else self.matrix


def kernel_constant(epsilon, d):
    return epsilon ** (-d / 2.0) * (4.0 * math.pi) ** (-d / 2.0)


def _sq_dist_rows(X, lo, hi):
    # Neumaier-compensated sum of per-coordinate squared differences;
    # entry (i, j) is bitwise equal to entry (j, i)
    total = np.zeros((hi - lo, X.shape[0]))
    comp = np.zeros_like(total)
    for k in range(X.shape[1]):
        term = (X[lo:hi, k, None] - X[None, :, k]) ** 2
        tmp = total + term
        big = np.abs(total) >= np.abs(term)
        comp += np.where(big, (total - tmp) + term, (term - tmp) + total)
        total = tmp
    return total + comp


def pairwise_sq_distances(X, threads=1):
    """Dense matrix of squared Euclidean distances, assembled by row blocks."""
    X = np.asarray(X, dtype=float)
    N = X.shape[0]
    out = np.empty((N, N))
    blocks = [(lo, min(lo + ROW_BLOCK, N)) for lo in range(0, N, ROW_BLOCK)]

    def fill(block):
        lo, hi = block
        out[lo:hi] = _sq_dist_rows(X, lo, hi)

    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill, blocks))
    else:
        for block in blocks:
            fill(block)
    return out


def gaussian_affinity(cloud, epsilon, threads=1, sparse=None):
    """W(i, j) = eps^{-d/2} (4 pi)^{-d/2} exp(-|x_i - x_j|^2 / (4 eps)).

    Dense up to ``DENSE_LIMIT`` points.  Beyond that (or with ``sparse=True``)
    entries below ``1e-14`` times the diagonal are dropped and a CSR matrix is
    returned.
    """
    if not epsilon > 0:
        raise InvalidBandwidthError(f"epsilon must be > 0, got {epsilon}")
    X = cloud.points
    if X.shape[0] == 0:
        raise ShapeError("empty point cloud")
    d = cloud.spec.intrinsic_dim
    c = kernel_constant(epsilon, d)
    if sparse is None:
        sparse = X.shape[0] > DENSE_LIMIT
    if not sparse:
        W = c * np.exp(pairwise_sq_distances(X, threads) / (-4.0 * epsilon))
        return AffinityMatrix(W, float(epsilon), d)

    radius = math.sqrt(4.0 * epsilon * math.log(1.0 / SPARSE_DROP))
    pairs = cKDTree(X).query_pairs(radius, output_type="ndarray")
    i, j = pairs[:, 0], pairs[:, 1]
    diff = X[i] - X[j]
    vals = c * np.exp(np.einsum("ij,ij->i", diff, diff) / (-4.0 * epsilon))
    N = X.shape[0]
    diag = np.arange(N)
    rows = np.concatenate([i, j, diag])
    cols = np.concatenate([j, i, diag])
    data = np.concatenate([vals, vals, np.full(N, c)])
    W = sp.csr_matrix((data, (rows, cols)), shape=(N, N))
    return AffinityMatrix(W, float(epsilon), d)


def unnormalized_laplacian(W, p, N):
    """L = (D - W) / (p eps N) with D the diagonal degree matrix."""
    if not p > 0:
        raise ValueError("p must be > 0")
    if W.entries.shape != (N, N):
        raise ShapeError(f"affinity is {W.entries.shape}, expected ({N}, {N})")
    scale = 1.0 / (p * W.epsilon * N)
    if W.is_sparse:
        degree = np.asarray(W.entries.sum(axis=1)).ravel()
        L = (sp.diags(degree) - W.entries) * scale
        return GraphLaplacian(L.tocsr(), W.epsilon, float(p), N)
    degree = W.entries.sum(axis=1)
    L = -W.entries * scale
    L[np.diag_indices(N)] = (degree - np.diag(W.entries)) * scale
    return GraphLaplacian(L, W.epsilon, float(p), N)


def default_epsilon(N, d, scale=1.0):
    """Bandwidth schedule ``scale * (ln N / N)^{1 / (d/2 + 2)}``."""
    if N < 2 or d < 1 or not scale > 0:
        raise ValueError("need N >= 2, d >= 1, scale > 0")
    return scale * (math.log(N) / N) ** (1.0 / (d / 2.0 + 2.0))


def write_matrix_market(path, matrix, comment=""):
    """Dump a dense or sparse matrix in Matrix Market coordinate format."""
    M = matrix if sp.issparse(matrix) else sp.coo_matrix(matrix)
    scipy.io.mmwrite(str(path), M, comment=comment, symmetry="symmetric")
