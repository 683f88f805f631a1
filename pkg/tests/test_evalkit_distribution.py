"""Trajectory vectors, Gaussian fits, Frechet distance, temporal variance."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latentcast import evalkit as ek
from oracles import frechet_newton_schulz, random_psd, temporal_variance_twopass


def rng(seed=0):
    return np.random.default_rng(seed)


# -- vectorization -------------------------------------------------------------


def test_vector_dims_match_task():
    assert ek.vectorize("points", rng(0).random((12, 2))).values.shape == (24,)
    assert ek.vectorize("boxes", rng(1).random((12, 4))).values.shape == (48,)
    assert ek.vectorize("pixels", rng(2).random((12, 16, 16, 3))).values.shape == (2352,)
    assert ek.vectorize("depth", rng(3).random((12, 16, 16))).values.shape == (2352,)


@pytest.mark.parametrize("hw", [(14, 14), (16, 16), (32, 32), (64, 64), (20, 36)])
def test_dense_dims_independent_of_resolution(hw):
    h, w = hw
    vec = ek.vectorize("depth", rng(4).random((12, h, w)) + 1.0)
    assert vec.values.shape == (2352,)


def test_pooling_preserves_constant_frames():
    frames = np.full((12, 32, 32), 3.25)
    vec = ek.vectorize("depth", frames)
    np.testing.assert_allclose(vec.values, 3.25, atol=1e-12)


def test_vectorize_layout_is_frame_major():
    xy = np.arange(24, dtype=float).reshape(12, 2)
    vec = ek.vectorize("points", xy)
    np.testing.assert_array_equal(vec.values.reshape(12, 2), xy)


def test_filter_complete():
    items = ["a", "b", "c"]
    present = np.ones((3, 12))
    present[1, 8] = 0.0
    assert ek.filter_complete(items, present) == ["a", "c"]
    assert ek.filter_complete(items, np.ones((3, 12))) == items


def test_filter_complete_matches_scan_oracle():
    r = rng(5)
    items = list(range(40))
    present = (r.random((40, 12)) > 0.1).astype(float)
    want = [i for i in items if all(present[i] > 0)]
    assert ek.filter_complete(items, present) == want


# -- gaussian fits ---------------------------------------------------------------


def test_fit_gaussian_identical_vectors():
    v = rng(6).random(5)
    g = ek.fit_gaussian([v, v, v])
    np.testing.assert_allclose(g.mean, v)
    np.testing.assert_allclose(g.cov, ek.SHRINKAGE_FLOOR * np.eye(5), atol=1e-15)


def test_fit_gaussian_two_point_population_variance():
    a = 1.7
    g = ek.fit_gaussian([np.array([a]), np.array([-a])])
    assert abs(g.mean[0]) < 1e-15
    # population (n) denominator gives a^2, up to the 1e-6 relative shrinkage
    assert abs(g.cov[0, 0] - a * a) < 1e-5


def test_fit_gaussian_needs_two_vectors():
    with pytest.raises(ValueError, match="at least 2"):
        ek.fit_gaussian([np.ones(3)])


def test_fit_gaussian_monte_carlo_recovery():
    r = rng(7)
    d = 4
    mean = r.normal(size=d)
    cov = random_psd(r, d)
    chol = np.linalg.cholesky(cov)
    draws = mean + r.normal(size=(10_000, d)) @ chol.T
    g = ek.fit_gaussian(list(draws))
    se_mean = np.sqrt(np.diag(cov) / 10_000)
    assert np.all(np.abs(g.mean - mean) < 3 * se_mean + 1e-12)
    # covariance entries: crude 3-sigma bound via entry variance ~ (s_ii s_jj + s_ij^2)/n
    for i in range(d):
        for j in range(d):
            se = np.sqrt((cov[i, i] * cov[j, j] + cov[i, j] ** 2) / 10_000)
            assert abs(g.cov[i, j] - cov[i, j]) < 4 * se + 1e-6


# -- frechet distance -------------------------------------------------------------


def _gauss(mean, cov):
    return ek.GaussianSummary(mean=np.asarray(mean, dtype=np.float64), cov=np.asarray(cov, dtype=np.float64), count=2)


def test_fd_zero_for_identical():
    g = _gauss(rng(8).normal(size=6), random_psd(rng(9), 6))
    assert ek.frechet_distance(g, g) < 1e-9


def test_fd_unit_cov_mean_shift():
    g1 = _gauss(np.zeros(2), np.eye(2))
    g2 = _gauss(np.array([3.0, 4.0]), np.eye(2))
    assert abs(ek.frechet_distance(g1, g2) - 5.0) < 1e-9


def test_fd_one_dimensional_sigmas():
    g1 = _gauss(np.array([0.7]), np.array([[1.0]]))
    g2 = _gauss(np.array([0.7]), np.array([[4.0]]))
    assert abs(ek.frechet_distance(g1, g2) - 1.0) < 1e-9  # (sigma1-sigma2)^2 = 1


def test_fd_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension"):
        ek.frechet_distance(_gauss(np.zeros(2), np.eye(2)), _gauss(np.zeros(3), np.eye(3)))


def test_fd_dual_algorithm_agreement():
    r = rng(10)
    for trial in range(50):
        d = int(r.integers(5, 51))
        g1 = _gauss(r.normal(size=d), random_psd(r, d))
        g2 = _gauss(r.normal(size=d), random_psd(r, d))
        ours = ek.frechet_distance(g1, g2)
        oracle = frechet_newton_schulz(g1.mean, g1.cov, g2.mean, g2.cov)
        assert abs(ours - oracle) / max(abs(oracle), 1e-12) < 1e-6, f"trial {trial}, d={d}"


def test_fd_metric_axioms_on_random_pairs():
    r = rng(11)
    for _ in range(30):
        d = int(r.integers(2, 12))
        g1 = _gauss(r.normal(size=d), random_psd(r, d))
        g2 = _gauss(r.normal(size=d), random_psd(r, d))
        fd = ek.frechet_distance(g1, g2)
        assert fd >= 0.0
        assert abs(fd - ek.frechet_distance(g2, g1)) < 1e-8
        assert ek.frechet_distance(g1, g1) < 1e-9


def test_fd_mean_shift_monotonicity():
    r = rng(12)
    cov1, cov2 = random_psd(r, 3), random_psd(r, 3)
    direction = r.normal(size=3)
    direction /= np.linalg.norm(direction)
    fds = [ek.frechet_distance(_gauss(np.zeros(3), cov1), _gauss(s * direction, cov2)) for s in (0.5, 1.0, 2.0, 4.0)]
    assert all(a < b for a, b in zip(fds, fds[1:]))


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=2, max_value=8), st.integers(min_value=0, max_value=10_000))
def test_fd_axioms_property(dim, seed):
    r = rng(seed)
    g1 = _gauss(r.normal(size=dim), random_psd(r, dim))
    g2 = _gauss(r.normal(size=dim), random_psd(r, dim))
    fd12 = ek.frechet_distance(g1, g2)
    fd21 = ek.frechet_distance(g2, g1)
    assert fd12 >= 0.0
    assert abs(fd12 - fd21) < 1e-8
    assert ek.frechet_distance(g1, g1) < 1e-9


# -- temporal variance -------------------------------------------------------------


def test_temporal_variance_static_is_zero():
    vec = ek.vectorize("points", np.tile([3.0, 4.0], (12, 1)))
    assert ek.temporal_variance([vec], "points") == 0.0


def test_temporal_variance_alternating_unit():
    coords = np.array([((-1.0) ** t) for t in range(12)])
    vectors = [np.stack([coords, np.zeros(12)], axis=1).reshape(-1)]
    # one coordinate alternates +-1 (variance 1), the other is constant (0)
    assert abs(ek.temporal_variance(vectors, "points") - 0.5) < 1e-12
    single = [coords.reshape(12, 1) @ np.ones((1, 2))]  # both coords alternate
    assert abs(ek.temporal_variance([s.reshape(-1) for s in single], "points") - 1.0) < 1e-12


def test_temporal_variance_matches_twopass_oracle():
    r = rng(13)
    for task, d in (("points", 24), ("boxes", 48)):
        vectors = [r.normal(size=d) for _ in range(20)]
        got = ek.temporal_variance(vectors, task)
        want = temporal_variance_twopass(np.stack(vectors))
        assert abs(got - want) < 1e-9
