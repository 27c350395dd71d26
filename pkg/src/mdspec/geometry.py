"""Synthetic manifolds, regression targets and closed-form spectral oracles.

Three manifolds are supported: the unit circle in R^2, the unit sphere in R^3
and a torus of revolution in R^3.  Closed-form Laplace-Beltrami spectra and
heat kernels are available for the circle and the sphere only.

Intrinsic coordinates: on the circle ``theta = atan2(y, x) mod 2 pi``; on the
sphere ``theta`` is the colatitude measured from +z and ``phi = atan2(y, x)
mod 2 pi``; on the torus ``(u, v)`` are the toroidal and poloidal angles.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.special import sph_harm_y

from . import rng
from .errors import (
    OffManifoldError,
    ShapeError,
    UnsupportedManifoldError,
    UnsupportedOracleError,
    InvalidTimeError,
)

KINDS = ("circle", "sphere2", "torus2")
TARGET_ARITY = {"circle_trig": 2, "sphere_theta": 2, "sphere_theta_phi": 1}
ON_MANIFOLD_TOL = 1e-9
TAIL_TOL = 1e-12


@dataclass(frozen=True)
class ManifoldSpec:
    kind: str
    torus_radii: tuple = (2.0, 1.0)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UnsupportedManifoldError(f"unsupported manifold {self.kind!r}")
        if self.kind == "torus2":
            R, r = (float(v) for v in self.torus_radii)
            if not (R > r > 0):
                raise UnsupportedManifoldError("torus radii must satisfy R > r > 0")
            object.__setattr__(self, "torus_radii", (R, r))

    @property
    def ambient_dim(self):
        return 2 if self.kind == "circle" else 3

    @property
    def intrinsic_dim(self):
        return 1 if self.kind == "circle" else 2

    @property
    def volume(self):
        if self.kind == "circle":
            return 2.0 * math.pi
        if self.kind == "sphere2":
            return 4.0 * math.pi
        R, r = self.torus_radii
        return 4.0 * math.pi**2 * R * r

    @property
    def density(self):
        """Uniform sampling density p = 1 / vol."""
        return 1.0 / self.volume

    def to_dict(self):
        out = {"kind": self.kind}
        if self.kind == "torus2":
            out["radii"] = list(self.torus_radii)
        return out

    @classmethod
    def from_dict(cls, data):
        if isinstance(data, str):
            return cls(data)
        if data.get("kind") == "torus2" and "radii" in data:
            return cls("torus2", tuple(data["radii"]))
        return cls(data["kind"])


@dataclass(frozen=True)
class TargetFnSpec:
    """Regression target.

    ``circle_trig(a, b)`` is ``a sin(theta) + b cos(theta)`` on the circle,
    ``sphere_theta(a, b)`` the same in the colatitude, ``sphere_theta_phi(a,)``
    is ``a sin(theta) phi``, and ``custom_coeffs(c0, a1, b1, a2, b2, ...)`` is
    the trigonometric series ``c0 + sum_k a_k cos(k s) + b_k sin(k s)`` in the
    first intrinsic angle ``s``.
    """

    kind: str
    parameters: tuple

    def __post_init__(self):
        params = tuple(float(p) for p in self.parameters)
        object.__setattr__(self, "parameters", params)
        if self.kind == "custom_coeffs":
            if len(params) == 0 or len(params) % 2 == 0:
                raise ShapeError("custom_coeffs needs an odd number of parameters")
        elif self.kind in TARGET_ARITY:
            if len(params) != TARGET_ARITY[self.kind]:
                raise ShapeError(
                    f"{self.kind} takes {TARGET_ARITY[self.kind]} parameters, "
                    f"got {len(params)}"
                )
        else:
            raise ValueError(f"unknown target kind {self.kind!r}")

    def to_dict(self):
        return {"kind": self.kind, "parameters": list(self.parameters)}

    @classmethod
    def from_dict(cls, data):
        return cls(data["kind"], tuple(data["parameters"]))


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray
    labeled_count: int
    spec: ManifoldSpec
    seed: int = 0

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != self.spec.ambient_dim:
            raise ShapeError(
                f"points must be N x {self.spec.ambient_dim}, got {pts.shape}"
            )
        if not 0 <= self.labeled_count <= pts.shape[0]:
            raise ShapeError("labeled_count must lie in [0, N]")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def N(self):
        return self.points.shape[0]

    @property
    def m(self):
        return self.labeled_count

    @property
    def n(self):
        return self.N - self.labeled_count

    def with_labeled_count(self, m):
        return PointCloud(self.points, m, self.spec, self.seed)


@dataclass(frozen=True)
class LabeledDataset:
    cloud: PointCloud
    y: np.ndarray
    noise_sigma: float
    fn_spec: TargetFnSpec

    def __post_init__(self):
        y = np.array(self.y, dtype=float).reshape(-1)
        if y.shape[0] != self.cloud.labeled_count:
            raise ShapeError("len(y) must equal cloud.labeled_count")
        if not np.all(np.isfinite(y)):
            raise ValueError("responses must be finite")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        y.setflags(write=False)
        object.__setattr__(self, "y", y)

    @property
    def m(self):
        return self.cloud.labeled_count


# -- sampling ---------------------------------------------------------------


def on_manifold_residual(spec, points):
    """Absolute deviation of each row from the manifold's defining equation."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != spec.ambient_dim:
        raise ShapeError(f"expected ambient dimension {spec.ambient_dim}")
    if spec.kind in ("circle", "sphere2"):
        return np.abs(np.linalg.norm(pts, axis=1) - 1.0)
    R, r = spec.torus_radii
    rho = np.hypot(pts[:, 0], pts[:, 1])
    return np.abs(np.hypot(rho - R, pts[:, 2]) - r)


def sample_manifold(spec, count, seed, labeled_count=0):
    """Draw ``count`` i.i.d. points uniform w.r.t. the Riemannian volume."""
    if count < 1:
        raise ValueError("count must be >= 1")
    gen = rng.stage_generator(seed, "points")
    if spec.kind == "circle":
        theta = 2.0 * np.pi * rng.uniform(gen, count)
        pts = np.column_stack([np.cos(theta), np.sin(theta)])
    elif spec.kind == "sphere2":
        z = rng.box_muller(gen, 3 * count).reshape(count, 3)
        pts = z / np.linalg.norm(z, axis=1, keepdims=True)
    elif spec.kind == "torus2":
        pts = _sample_torus(gen, spec.torus_radii, count)
    else:  # pragma: no cover - ManifoldSpec already validates
        raise UnsupportedManifoldError(spec.kind)
    return PointCloud(pts, labeled_count, spec, seed)


def _sample_torus(gen, radii, count):
    # area element is r (R + r cos v) du dv; rejection on v
    R, r = radii
    out = []
    have = 0
    while have < count:
        batch = 2 * (count - have) + 16
        u = 2.0 * np.pi * gen.random(batch)
        v = 2.0 * np.pi * gen.random(batch)
        accept = gen.random(batch) * (R + r) <= R + r * np.cos(v)
        u, v = u[accept], v[accept]
        out.append(np.column_stack([u, v]))
        have += u.shape[0]
    uv = np.concatenate(out)[:count]
    u, v = uv[:, 0], uv[:, 1]
    ring = R + r * np.cos(v)
    return np.column_stack([ring * np.cos(u), ring * np.sin(u), r * np.sin(v)])


# -- targets ----------------------------------------------------------------


def intrinsic_coords(spec, points):
    """Intrinsic angles of each row: (theta,) circle, (theta, phi) sphere, (u, v) torus."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    azimuth = np.mod(np.arctan2(pts[:, 1], pts[:, 0]), 2.0 * np.pi)
    if spec.kind == "circle":
        return azimuth[:, None]
    if spec.kind == "sphere2":
        norm = np.linalg.norm(pts, axis=1)
        theta = np.arccos(np.clip(pts[:, 2] / norm, -1.0, 1.0))
        return np.column_stack([theta, azimuth])
    R, _ = spec.torus_radii
    rho = np.hypot(pts[:, 0], pts[:, 1])
    v = np.mod(np.arctan2(pts[:, 2], rho - R), 2.0 * np.pi)
    return np.column_stack([azimuth, v])


def eval_target(fn_spec, points, spec, check=True):
    """Evaluate f* at one point (returns a float) or at every row of a matrix."""
    arr = np.asarray(points, dtype=float)
    single = arr.ndim == 1
    pts = np.atleast_2d(arr)
    if check:
        bad = on_manifold_residual(spec, pts) > ON_MANIFOLD_TOL
        if np.any(bad):
            raise OffManifoldError(
                f"{int(bad.sum())} point(s) lie off the {spec.kind} manifold"
            )
    coords = intrinsic_coords(spec, pts)
    a = fn_spec.parameters
    kind = fn_spec.kind
    if kind == "circle_trig":
        if spec.kind != "circle":
            raise UnsupportedManifoldError("circle_trig requires the circle")
        th = coords[:, 0]
        vals = a[0] * np.sin(th) + a[1] * np.cos(th)
    elif kind in ("sphere_theta", "sphere_theta_phi"):
        if spec.kind != "sphere2":
            raise UnsupportedManifoldError(f"{kind} requires sphere2")
        th, ph = coords[:, 0], coords[:, 1]
        if kind == "sphere_theta":
            vals = a[0] * np.sin(th) + a[1] * np.cos(th)
        else:
            vals = a[0] * np.sin(th) * ph
    else:
        s = coords[:, 0]
        vals = np.full(s.shape, a[0])
        for k in range(1, (len(a) - 1) // 2 + 1):
            vals = vals + a[2 * k - 1] * np.cos(k * s) + a[2 * k] * np.sin(k * s)
    return float(vals[0]) if single else vals


def make_dataset(spec, fn_spec, m, n, noise_sigma, seed):
    """Sample m + n points and noisy responses for the first m of them."""
    if m < 1 or n < 0:
        raise ValueError("need m >= 1 and n >= 0")
    cloud = sample_manifold(spec, m + n, seed, labeled_count=m)
    clean = eval_target(fn_spec, cloud.points[:m], spec)
    noise = rng.box_muller(rng.stage_generator(seed, "noise"), m)
    y = clean + float(noise_sigma) * noise
    return LabeledDataset(cloud, y, float(noise_sigma), fn_spec)


# -- spectral oracles ---------------------------------------------------------


def _require_oracle(spec):
    if spec.kind not in ("circle", "sphere2"):
        raise UnsupportedOracleError(
            f"no closed-form Laplace-Beltrami spectrum for {spec.kind}"
        )


def analytic_spectrum(spec, count):
    """First ``count`` eigenvalues (with multiplicity) as ``[(value, mult), ...]``.

    The multiplicity of the last group is truncated so the total is ``count``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    _require_oracle(spec)
    out = []
    total = 0
    level = 0
    while total < count:
        if spec.kind == "circle":
            value, mult = float(level * level), (1 if level == 0 else 2)
        else:
            value, mult = float(level * (level + 1)), 2 * level + 1
        mult = min(mult, count - total)
        out.append((value, mult))
        total += mult
        level += 1
    return out


def expand_spectrum(groups):
    """Flatten ``[(value, mult), ...]`` into a vector of eigenvalues."""
    return np.concatenate([np.full(m, v) for v, m in groups])


def analytic_eigenfunctions(spec, points, count):
    """N x count matrix of L2(vol)-orthonormal eigenfunctions sampled at ``points``.

    Circle: 1/sqrt(2 pi), cos(k theta)/sqrt(pi), sin(k theta)/sqrt(pi).
    Sphere: real spherical harmonics, degree by degree.
    """
    _require_oracle(spec)
    coords = intrinsic_coords(spec, points)
    cols = []
    level = 0
    while len(cols) < count:
        if spec.kind == "circle":
            th = coords[:, 0]
            if level == 0:
                cols.append(np.full(th.shape, 1.0 / math.sqrt(2.0 * math.pi)))
            else:
                cols.append(np.cos(level * th) / math.sqrt(math.pi))
                cols.append(np.sin(level * th) / math.sqrt(math.pi))
        else:
            th, ph = coords[:, 0], coords[:, 1]
            cols.append(sph_harm_y(level, 0, th, ph).real)
            for order in range(1, level + 1):
                Y = sph_harm_y(level, order, th, ph)
                cols.append(math.sqrt(2.0) * Y.real)
                cols.append(math.sqrt(2.0) * Y.imag)
        level += 1
    return np.column_stack(cols[:count])


def default_truncation(spec, t):
    """Smallest level whose dropped spectral tail is below 1e-12."""
    _require_oracle(spec)
    if t <= 0:
        raise InvalidTimeError("t must be > 0")
    level = 1
    while True:
        nxt = level + 1
        if spec.kind == "circle":
            term = 2.0 * math.exp(-nxt * nxt * t) / (2.0 * math.pi)
            ratio = math.exp(-(2 * nxt + 1) * t)
        else:
            term = (2 * nxt + 1) * math.exp(-nxt * (nxt + 1) * t) / (4.0 * math.pi)
            ratio = math.exp(-2 * (nxt + 1) * t) * (2 * nxt + 3) / (2 * nxt + 1)
        # geometric majorant of the tail
        if ratio < 1 and term / (1.0 - ratio) < TAIL_TOL:
            return level
        level = nxt


def analytic_kernel_matrix(spec, A, B, t, truncation=None):
    """Matrix of H_t(a_i, b_j) from the truncated spectral sum."""
    _require_oracle(spec)
    if t <= 0:
        raise InvalidTimeError("t must be > 0")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if truncation is None:
        truncation = default_truncation(spec, t)
    if truncation < 1:
        raise ValueError("truncation must be >= 1")
    if spec.kind == "circle":
        delta = intrinsic_coords(spec, A)[:, 0][:, None] - intrinsic_coords(spec, B)[:, 0][None, :]
        acc = np.zeros(delta.shape)
        for k in range(truncation, 0, -1):
            acc += math.exp(-k * k * t) * np.cos(k * delta)
        return (1.0 + 2.0 * acc) / (2.0 * math.pi)
    An = A / np.linalg.norm(A, axis=1, keepdims=True)
    Bn = B / np.linalg.norm(B, axis=1, keepdims=True)
    G = np.clip(An @ Bn.T, -1.0, 1.0)
    # Legendre three-term recurrence, P_0 = 1, P_1 = G
    p_prev = np.ones_like(G)
    p_cur = G
    acc = np.ones_like(G)
    for l in range(1, truncation + 1):
        acc += math.exp(-l * (l + 1) * t) * (2 * l + 1) * p_cur
        p_prev, p_cur = p_cur, ((2 * l + 1) * G * p_cur - l * p_prev) / (l + 1)
    return acc / (4.0 * math.pi)


def analytic_heat_kernel(spec, t, x, x_prime, truncation=None):
    """Closed-form heat kernel H_t(x, x') on the circle or the unit sphere."""
    if t <= 0:
        raise InvalidTimeError("t must be > 0")
    for pt in (x, x_prime):
        if on_manifold_residual(spec, pt)[0] > ON_MANIFOLD_TOL:
            raise OffManifoldError("point lies off the manifold")
    return float(analytic_kernel_matrix(spec, x, x_prime, t, truncation)[0, 0])
