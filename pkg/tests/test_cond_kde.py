"""Conditional kernel density estimator: normalization, shape, inversion."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from hsdm.cond_kde import CondDensityModel, fit_cond_kde
from hsdm.smoothing import smooth_durations, y_from_t

SQRT_2PI = np.sqrt(2.0 * np.pi)


def _lognormal_pairs(n, rho=0.5, seed=61):
    """AR(1) in log space mapped to the positive y scale."""
    rng = np.random.default_rng(seed)
    t = np.empty(n + 1)
    t[0] = rng.normal()
    for i in range(1, n + 1):
        t[i] = rho * t[i - 1] + rng.normal() * np.sqrt(1 - rho**2)
    y = y_from_t(t + 1.5)
    return y[:-1], y[1:]


@pytest.fixture(scope="module")
def fitted():
    y_prev, y = _lognormal_pairs(500)
    return fit_cond_kde(y_prev, y)


def test_density_integrates_to_one(fitted):
    """The truncated conditional density must integrate to 1 on the t scale."""
    t_grid = np.linspace(-14.0, 12.0, 6001)
    for t_prev in np.arange(1.0, 13.0):
        dens = fitted.density(t_grid, np.full_like(t_grid, t_prev))
        total = np.trapezoid(dens, t_grid)
        assert total == pytest.approx(1.0, abs=1e-3), f"t_prev={t_prev}"


def test_single_pair_kernel_height():
    # one training pair, untruncated: the kernel peak is 1/(h sqrt(2 pi))
    model = CondDensityModel(
        np.array([2.0]), np.array([0.0]), h_cond=0.5, h_y=0.3
    )
    got = model.density_y(np.array([0.0]), np.array([2.0]), truncate=False)
    assert got == pytest.approx(1.0 / (0.3 * SQRT_2PI), rel=1e-12)


def test_cdf_limits(fitted):
    lo = fitted.cdf(np.array([-40.0]), np.array([2.0]))
    hi = fitted.cdf(np.array([40.0]), np.array([2.0]))
    assert lo == pytest.approx(0.0, abs=1e-12)
    assert hi == pytest.approx(1.0, abs=1e-12)


def test_cdf_is_monotone(fitted):
    t_grid = np.linspace(-12.0, 10.0, 200)
    for t_prev in (0.5, 2.0, 6.0):
        c = fitted.cdf(t_grid, np.full_like(t_grid, t_prev))
        assert np.all(np.diff(c) >= -1e-12)
        assert np.all((c >= 0) & (c <= 1 + 1e-12))


def test_density_matches_cdf_derivative(fitted):
    """Central differences of the CDF reproduce the density away from the tails."""
    t_grid = np.linspace(0.0, 4.0, 41)
    eps = 1e-5
    prev = np.full_like(t_grid, 2.0)
    dens = fitted.density(t_grid, prev)
    num = (
        fitted.cdf(t_grid + eps, prev) - fitted.cdf(t_grid - eps, prev)
    ) / (2 * eps)
    mask = dens > 1e-3
    assert mask.sum() > 10
    assert_allclose(num[mask], dens[mask], rtol=1e-4)


def test_inverse_cdf_round_trip(fitted):
    for prob in (0.05, 0.3, 0.5, 0.9, 0.99):
        t = fitted.inverse_cdf(prob, 2.0)
        back = fitted.cdf(np.array([t]), np.array([2.0]))
        assert back == pytest.approx(prob, abs=1e-8)


def test_inverse_cdf_rejects_bad_probabilities(fitted):
    with pytest.raises(ValueError):
        fitted.inverse_cdf(0.0, 2.0)
    with pytest.raises(ValueError):
        fitted.inverse_cdf(1.0, 2.0)


def test_conditioning_value_is_clamped(fitted):
    """Queries beyond the training range behave like the nearest seen value."""
    t_grid = np.linspace(-2.0, 6.0, 50)
    far = fitted.cdf(t_grid, np.full_like(t_grid, 80.0))
    edge = fitted.cdf(t_grid, np.full_like(t_grid, float(fitted.y_prev.max())))
    assert_allclose(far, edge, rtol=1e-12)


def test_conditional_mode_tracks_conditioning_value():
    """Two clusters (short->short, long->long) pull the conditional mode apart."""
    rng = np.random.default_rng(62)
    n = 300
    short = rng.normal(1.0, 0.12, size=n)
    long = rng.normal(4.0, 0.12, size=n)
    y_prev = np.concatenate([short, long])
    y = np.concatenate([
        short + rng.normal(0, 0.1, n), long + rng.normal(0, 0.1, n)
    ])
    model = fit_cond_kde(y_prev, y)
    grid = np.linspace(0.2, 6.0, 500)
    mode_short = grid[np.argmax(model.density_y(grid, np.full_like(grid, 1.0)))]
    mode_long = grid[np.argmax(model.density_y(grid, np.full_like(grid, 4.0)))]
    assert abs(mode_short - 1.0) < 0.3
    assert abs(mode_long - 4.0) < 0.3


def test_conditional_mean_is_nondecreasing_in_history(fitted):
    """Self-excitation: longer previous durations shift the next law upward."""
    t_grid = np.linspace(-14.0, 12.0, 4001)
    means = []
    for t_prev in (0.5, 1.5, 2.5, 3.5):
        dens = fitted.density(t_grid, np.full_like(t_grid, t_prev))
        means.append(np.trapezoid(t_grid * dens, t_grid))
    assert np.all(np.diff(means) > 0)


def test_generalized_residuals_are_roughly_uniform():
    rng = np.random.default_rng(63)
    x = rng.integers(1, 4000, size=900)
    y = smooth_durations(x, seed=5).y
    model = fit_cond_kde(y[:-1], y[1:])
    c = model.generalized_residuals(y)
    assert c.size == y.size - 1
    assert np.all((c > 0) & (c < 1))
    assert abs(c.mean() - 0.5) < 0.04
    assert abs(c.var() - 1.0 / 12.0) < 0.012


def test_cdf_and_density_consistent(fitted):
    yq = np.linspace(0.5, 6.0, 30)
    prev = np.full_like(yq, 2.2)
    c, d = fitted.cdf_and_density_y(yq, prev)
    assert_allclose(c, fitted.cdf_y(yq, prev), rtol=1e-12)
    assert_allclose(d, fitted.density_y(yq, prev), rtol=1e-12)


def test_fit_requires_two_pairs_and_variation():
    with pytest.raises(ValueError, match="two training pairs"):
        fit_cond_kde(np.array([1.0]), np.array([1.0]))
    with pytest.raises(ValueError, match="degenerate"):
        fit_cond_kde(np.full(30, 2.0), np.full(30, 2.0))


def test_cv_table_covers_grid(fitted):
    assert len(fitted.cv_table) == 49
    best = max(fitted.cv_table, key=lambda row: row[2])
    assert best[0] == pytest.approx(fitted.h_cond)
    assert best[1] == pytest.approx(fitted.h_y)


def test_serialization_round_trip(tmp_path, fitted):
    path = tmp_path / "kde.json"
    fitted.save(path)
    clone = CondDensityModel.load(path)
    t_grid = np.linspace(-2.0, 5.0, 20)
    prev = np.full_like(t_grid, 2.0)
    assert_allclose(clone.cdf(t_grid, prev), fitted.cdf(t_grid, prev), atol=0)
    assert clone.h_cond == fitted.h_cond
    assert clone.h_y == fitted.h_y
