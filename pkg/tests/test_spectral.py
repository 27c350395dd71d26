import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mdspec import eigen, geometry, graph, heat, spectral
from mdspec.eigen import LaplacianEigens
from mdspec.errors import DegenerateEigenvalueError, InvalidRegularizationError, ShapeError
from mdspec.spectral import FilterFamily, filter_value

CIRCLE = geometry.ManifoldSpec("circle")
# max |classical - diffusion| over the approximation budget on seeds 0-9 was 6.0e-4
CLASSICAL_GAP_CONST = 8e-4


# -- filters ---------------------------------------------------------------------


@pytest.mark.parametrize(
    "kind, lam, s, expected",
    [
        ("tikhonov", 0.1, 0.9, 1.0),
        ("spectral_cutoff", 0.5, 0.49, 0.0),
        ("spectral_cutoff", 0.5, 0.5, 2.0),
        ("gradient_flow", 0.2, 0.0, 5.0),
        ("gradient_flow", 0.2, 1e-12, 5.0),
        ("landweber", 0.25, 0.0, 4.0),
        ("landweber", 0.25, 0.5, 1.875),
    ],
)
def test_filter_examples(kind, lam, s, expected):
    assert filter_value(FilterFamily(kind), lam, s) == pytest.approx(expected, rel=1e-10)


def test_landweber_explicit_steps():
    filt = FilterFamily("landweber", steps=3)
    # 1 + (1 - s) + (1 - s)^2
    assert filter_value(filt, 0.1, 0.5) == pytest.approx(1.75)
    with pytest.raises(ValueError):
        FilterFamily("tikhonov", steps=3)


@pytest.mark.parametrize("lam", [0.0, -0.1])
def test_invalid_lambda(lam):
    with pytest.raises(InvalidRegularizationError):
        filter_value(FilterFamily("tikhonov"), lam, 0.5)


def test_unknown_filter():
    with pytest.raises(ValueError):
        FilterFamily("bogus")


@pytest.mark.parametrize("kind", spectral.FILTER_KINDS)
def test_filter_axioms_down_to_small_lambda(kind):
    filt = FilterFamily(kind)
    s = np.logspace(-8, 0, 200)
    for lam in np.logspace(-4, 0, 30):
        g = filter_value(filt, lam, s)
        assert np.all(s * g <= 1.0)
        assert np.all(np.abs(1 - s * g) <= 1.0)
        assert np.all(g <= 1.0 / lam)


def test_qualification_spot_checks():
    s = np.logspace(-8, 1, 400)
    for lam in (1e-3, 0.05, 0.5):
        tik = filter_value(FilterFamily("tikhonov"), lam, s)
        assert np.max(np.abs(1 - s * tik) * s) <= lam
        cut = filter_value(FilterFamily("spectral_cutoff"), lam, s)
        for alpha in (1, 2, 4):
            assert np.max(np.abs(1 - s * cut) * s**alpha) <= lam**alpha
    assert FilterFamily("tikhonov").qualification == 1
    assert FilterFamily("gradient_flow").qualification == math.inf


def test_filter_vectorized_matches_scalar():
    s = np.array([0.0, 1e-3, 0.3, 1.0])
    for kind in spectral.FILTER_KINDS:
        filt = FilterFamily(kind)
        np.testing.assert_array_equal(filter_value(filt, 0.1, s), [filter_value(filt, 0.1, v) for v in s])


# -- schedules -----------------------------------------------------------------


def test_schedule_examples():
    hp = spectral.default_hyperparams(140, 2, 0.4, r=2)
    assert hp.lam == pytest.approx(math.sqrt(math.log(140) / 140), rel=1e-14)
    assert hp.lam == pytest.approx(0.1879, abs=1e-4)
    assert hp.q == 2


def test_schedule_clamps_q():
    assert spectral.schedule_q(10, 2, 0.001) == 10
    assert spectral.schedule_q(3, 1, 100.0) == 1


def test_default_hyperparams_preconditions():
    with pytest.raises(ValueError):
        spectral.default_hyperparams(1, 2, 0.4)
    with pytest.raises(ValueError):
        spectral.default_hyperparams(10, 2, 0.4, r=1.0)


# -- estimator building blocks -----------------------------------------------------


def estimate_from(values, vectors, t=0.5):
    vectors = np.asarray(vectors, dtype=float)
    eig = LaplacianEigens(np.asarray(values, dtype=float), vectors, 1.0, 0.1, vectors.shape[0])
    return heat.heat_kernel_estimate(eig, t)


def random_estimate(N=30, K=8, seed=0):
    # column norm^2 = N / 4 keeps block eigenvalues inside the landweber domain s <= 1
    rng = np.random.default_rng(seed)
    V = np.linalg.qr(rng.standard_normal((N, K)))[0] * math.sqrt(N / 4)
    mu = np.concatenate([[0.0], np.sort(rng.uniform(0.5, 6, K - 1))])
    return estimate_from(mu, V)


def test_single_labeled_point_eigenfunction():
    est = random_estimate()
    block = heat.labeled_block_eigens(est, 1)
    phi = spectral.empirical_eigenfunctions(est, block, 1)[:, 0]
    H = est.dense()
    np.testing.assert_allclose(phi, H[0] / math.sqrt(H[0, 0]), rtol=1e-12)


def test_rank_one_eigenfunction_is_constant():
    c = 0.8
    est = estimate_from([0.0], np.full((7, 1), c))
    block = heat.labeled_block_eigens(est, 3)
    phi = spectral.empirical_eigenfunctions(est, block, 1)
    np.testing.assert_allclose(phi, c, rtol=1e-12)


def test_degenerate_block_eigenvalue():
    est = estimate_from([0.0], np.full((7, 1), 0.8))
    block = heat.BlockEigens(np.array([0.64, 0.0, 0.0]), np.eye(3), 3, 0.5)
    with pytest.raises(DegenerateEigenvalueError) as info:
        spectral.empirical_eigenfunctions(est, block, 2)
    assert info.value.q_reduced == 1


def test_sample_coefficients_examples():
    phi = np.ones((4, 1))
    np.testing.assert_allclose(spectral.sample_coefficients([1.0, -1.0], phi), [0.0])
    c = 1.5
    np.testing.assert_allclose(spectral.sample_coefficients([c, c, c], np.full((5, 1), c)), [c * c])
    with pytest.raises(ShapeError):
        spectral.sample_coefficients(np.ones(5), np.ones((3, 2)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_sample_coefficients_linear(seed):
    rng = np.random.default_rng(seed)
    phi = rng.standard_normal((12, 4))
    y1, y2 = rng.standard_normal(8), rng.standard_normal(8)
    np.testing.assert_allclose(
        spectral.sample_coefficients(y1 + y2, phi),
        spectral.sample_coefficients(y1, phi) + spectral.sample_coefficients(y2, phi),
        atol=1e-12,
    )


# -- fitting ---------------------------------------------------------------------


def circle_dataset(m, n, y=None, sigma=0.0, seed=0):
    fn = geometry.TargetFnSpec("circle_trig", (1.0, 1.0))
    data = geometry.make_dataset(CIRCLE, fn, m, n, sigma, seed)
    if y is not None:
        data = geometry.LabeledDataset(data.cloud, np.asarray(y, dtype=float), sigma, fn)
    return data


def hyper(q, lam=0.01, t=0.5, K=1):
    return spectral.HyperParams(epsilon=0.1, t=t, lam=lam, K=K, q=q)


def test_constant_data_on_constant_kernel():
    c = 3.0
    m, n = 4, 6
    # H = 1/(2 pi) everywhere: single constant eigenvector sqrt(1/(2 pi))
    est = estimate_from([0.0], np.full((m + n, 1), 1 / math.sqrt(2 * math.pi)))
    block = heat.labeled_block_eigens(est, m)
    data = circle_dataset(m, n, y=np.full(m, c))
    model = spectral.fit_diffusion(data, est, block, FilterFamily("spectral_cutoff"), hyper(1, lam=0.1))
    assert block.values[0] == pytest.approx(1 / (2 * math.pi))
    np.testing.assert_allclose(model.values, c, rtol=1e-12)


def test_zero_responses_give_zero():
    est = random_estimate()
    block = heat.labeled_block_eigens(est, 10)
    data = circle_dataset(10, 20, y=np.zeros(10))
    model = spectral.fit_diffusion(data, est, block, FilterFamily("tikhonov"), hyper(3))
    assert np.all(model.values == 0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(spectral.FILTER_KINDS))
def test_fit_linear_in_y(seed, kind):
    rng = np.random.default_rng(seed)
    est = random_estimate(seed=seed % 7)
    block = heat.labeled_block_eigens(est, 10)
    y1, y2 = rng.standard_normal(10), rng.standard_normal(10)
    filt, hp = FilterFamily(kind), hyper(4, lam=0.05)
    fit = lambda y: spectral.fit_diffusion(circle_dataset(10, 20, y=y), est, block, filt, hp).values
    total = fit(y1 + y2)
    np.testing.assert_allclose(total, fit(y1) + fit(y2), atol=1e-10 * np.max(np.abs(total)))


def test_fit_reduces_q_on_degenerate_block(caplog):
    est = estimate_from([0.0, 1.0], np.linalg.qr(np.random.default_rng(0).standard_normal((12, 2)))[0] * math.sqrt(12))
    block = heat.labeled_block_eigens(est, 5)
    data = circle_dataset(5, 7, y=np.arange(5.0))
    with caplog.at_level("WARNING"):
        model = spectral.fit_diffusion(data, est, block, FilterFamily("tikhonov"), hyper(4))
    assert model.q_used == 2 and model.q_requested == 4
    assert "reduced" in caplog.text


def test_fit_shape_checks():
    est = random_estimate()
    block = heat.labeled_block_eigens(est, 10)
    with pytest.raises(ShapeError):
        spectral.fit_diffusion(circle_dataset(10, 5, y=np.ones(10)), est, block, FilterFamily("tikhonov"), hyper(2))
    with pytest.raises(ShapeError):
        spectral.fit_diffusion(circle_dataset(10, 20, y=np.ones(10)), est, block, FilterFamily("tikhonov"), hyper(11))


def test_estimator_round_trip_keeps_reconstruction():
    est = random_estimate()
    block = heat.labeled_block_eigens(est, 10)
    data = circle_dataset(10, 20, y=np.random.default_rng(3).standard_normal(10))
    model = spectral.fit_diffusion(data, est, block, FilterFamily("gradient_flow"), hyper(5))
    back = spectral.DiffusionEstimator.from_json(model.to_json())
    scale = np.max(np.abs(model.values))
    np.testing.assert_allclose(back.reconstruct(), model.values, atol=1e-12 * scale)
    assert np.array_equal(back.values, model.values)
    assert len(back.components()) == 5


# -- classical algorithm oracle ------------------------------------------------------


def test_classical_single_point_tikhonov():
    h11, h1j, lam, y = 0.8, np.array([0.8, 0.3, 0.1]), 0.2, 2.0
    out = spectral.classical_fit(np.array([[h11]]), [y], FilterFamily("tikhonov"), lam, h1j[None, :])
    np.testing.assert_allclose(out, y * h1j / (lam + h11), rtol=1e-14)


def test_classical_zero_responses():
    cloud = geometry.sample_manifold(CIRCLE, 15, seed=0, labeled_count=5)
    H = heat.exact_heat_kernel_matrix(CIRCLE, cloud, 0.5)
    rows = heat.exact_kernel_rows(CIRCLE, cloud, 0.5)
    assert np.all(spectral.classical_fit(H, np.zeros(5), FilterFamily("tikhonov"), 0.1, rows) == 0)


@pytest.mark.parametrize("kind", ["tikhonov", "spectral_cutoff", "gradient_flow"])
def test_diffusion_close_to_classical(kind):
    m, n, t, K = 60, 200, 0.5, 60
    N = m + n
    data = circle_dataset(m, n, seed=21)
    eps = graph.default_epsilon(N, 1, 0.3)
    L = graph.unnormalized_laplacian(graph.gaussian_affinity(data.cloud, eps), CIRCLE.density, N)
    est = heat.heat_kernel_estimate(eigen.smallest_eigenpairs(L, K), t)
    block = heat.labeled_block_eigens(est, m)
    hp = spectral.default_hyperparams(m, 1, t, N=N, K=K, epsilon_scale=0.3, q_scale=3, lambda_scale=0.1)
    filt = FilterFamily(kind)
    model = spectral.fit_diffusion(data, est, block, filt, hp)
    classical = spectral.classical_fit(
        heat.exact_heat_kernel_matrix(CIRCLE, data.cloud, t), data.y, filt, hp.lam,
        heat.exact_kernel_rows(CIRCLE, data.cloud, t),
    )
    budget = m ** (3 / 5 + 1) * math.log(m) ** 0.5 * (1 / K + eps**0.25)
    assert np.max(np.abs(model.values - classical)[m:]) <= CLASSICAL_GAP_CONST * budget
