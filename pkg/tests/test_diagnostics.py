"""Goodness-of-fit statistics and the model comparison helpers."""

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.stats import kstwobign

from hsdm.diagnostics import (
    compare_models,
    evaluate_residuals,
    ks_uniform,
    ljung_box,
    qq_points,
    smoothing_ratio,
)
from hsdm.model import PredictionResult


def _result(residuals, log_density=None, burn_in=0, label="hsdm"):
    residuals = np.asarray(residuals, dtype=np.float64)
    if log_density is None:
        log_density = np.zeros_like(residuals)
    n = residuals.size
    return PredictionResult(
        residuals_all=residuals,
        log_density_all=np.asarray(log_density, dtype=np.float64),
        mu=np.zeros(n),
        sigma=np.ones(n),
        tau_mean=np.zeros(n),
        tau_sd=np.ones(n),
        p_transformed=np.zeros(n),
        p_detrended=np.zeros(n),
        t_values=np.zeros(n),
        times_norm_prev=np.linspace(0, 1, n),
        burn_in=burn_in,
        n_clipped=0,
        update_seconds=0.0,
        wall_seconds=0.0,
        smoothing_seed=0,
        label=label,
    )


def test_ks_midpoint_grid_is_exact():
    """Samples at (2k-1)/(2n) sit half a step from the grid: D = 1/(2n)."""
    for n in (4, 25, 100):
        u = (2 * np.arange(1, n + 1) - 1) / (2 * n)
        d, p = ks_uniform(u)
        assert d == pytest.approx(1.0 / (2 * n), rel=1e-12)
        assert 0 < p <= 1


def test_ks_point_mass_at_half():
    d, p = ks_uniform(np.full(50, 0.5))
    assert d == pytest.approx(0.5, rel=1e-12)
    assert p < 1e-10


def test_ks_matches_brute_force():
    rng = np.random.default_rng(91)
    for _ in range(50):
        n = int(rng.integers(3, 30))
        u = rng.uniform(size=n)
        d, p = ks_uniform(u)
        s = np.sort(u)
        want = 0.0
        for i in range(n):
            want = max(want, abs((i + 1) / n - s[i]), abs(s[i] - i / n))
        assert d == pytest.approx(want, abs=1e-10)
        lam = d * (np.sqrt(n) + 0.12 + 0.11 / np.sqrt(n))
        assert p == pytest.approx(float(kstwobign.sf(lam)), rel=1e-10)


def test_ks_input_validation():
    with pytest.raises(ValueError):
        ks_uniform(np.array([]))
    with pytest.raises(ValueError):
        ks_uniform(np.array([0.5, 1.2]))


def test_ljung_box_matches_brute_force():
    rng = np.random.default_rng(92)
    for _ in range(50):
        n = int(rng.integers(25, 80))
        x = rng.normal(size=n)
        lags = (3, 7)
        got = ljung_box(x, lags)
        xc = x - x.mean()
        denom = float(np.sum(xc**2))
        rho = np.array([
            float(np.sum(xc[k:] * xc[:-k])) / denom for k in range(1, 8)
        ])
        for lag in lags:
            q_want = n * (n + 2) * sum(
                rho[k - 1] ** 2 / (n - k) for k in range(1, lag + 1)
            )
            q_got, p_got = got[lag]
            assert q_got == pytest.approx(q_want, abs=1e-10)
            assert 0 <= p_got <= 1


def test_ljung_box_detects_autocorrelation():
    rng = np.random.default_rng(93)
    n = 5000
    x = np.empty(n)
    x[0] = rng.normal()
    for i in range(1, n):
        x[i] = 0.2 * x[i - 1] + rng.normal()
    _, p = ljung_box(x, (10,))[10]
    assert p < 0.01


def test_ljung_box_white_noise_is_calm():
    rng = np.random.default_rng(94)
    x = rng.normal(size=5000)
    _, p = ljung_box(x, (10,))[10]
    assert p > 0.05


def test_ljung_box_input_validation():
    with pytest.raises(ValueError):
        ljung_box(np.random.default_rng(0).normal(size=50), (0,))
    with pytest.raises(ValueError):
        ljung_box(np.zeros(10) + 3.0, (2,))
    with pytest.raises(ValueError):
        ljung_box(np.random.default_rng(0).normal(size=5), (10,))


def test_qq_points_shapes():
    u = np.array([0.9, 0.1, 0.5])
    theo, emp = qq_points(u)
    assert_allclose(theo, [1 / 6, 3 / 6, 5 / 6])
    assert_allclose(emp, [0.1, 0.5, 0.9])


def test_evaluate_residuals_report():
    rng = np.random.default_rng(95)
    res = _result(rng.uniform(size=400), rng.normal(size=400), burn_in=50)
    report = evaluate_residuals(res)
    assert report.n_events == 350
    assert report.label == "hsdm"
    assert 0 <= report.ks_pvalue <= 1
    assert set(report.lb) == {5, 10, 15}
    assert report.total_loglik == pytest.approx(res.total_loglik)
    row = report.row()
    assert "hsdm" in row and f"{report.ks_stat:.4f}" in row


def test_compare_model_with_itself_is_flat():
    rng = np.random.default_rng(96)
    u = rng.uniform(size=300)
    ll = rng.normal(size=300)
    comp = compare_models([_result(u, ll), _result(u, ll, label="clone")])
    pw = comp.pairwise["clone"]
    assert pw["mean_diff"] == pytest.approx(0.0, abs=1e-15)
    assert pw["median_diff"] == pytest.approx(0.0, abs=1e-15)
    assert pw["n_common"] == 300


def test_compare_models_orders_by_loglik():
    rng = np.random.default_rng(97)
    u = rng.uniform(size=200)
    good = _result(u, np.full(200, -1.0), label="good")
    bad = _result(u, np.full(200, -2.0), label="bad")
    comp = compare_models([good, bad])
    assert comp.baseline == "good"
    pw = comp.pairwise["bad"]
    assert pw["mean_diff"] == pytest.approx(-1.0)
    assert pw["pct_positive"] == 0.0
    table = comp.table()
    assert "good" in table and "bad" in table


def test_compare_models_rejects_misaligned_days():
    a = _result(np.random.default_rng(0).uniform(size=100))
    b = _result(np.random.default_rng(1).uniform(size=90))
    with pytest.raises(ValueError, match="different events"):
        compare_models([a, b])
    c = _result(np.random.default_rng(2).uniform(size=100), burn_in=10)
    with pytest.raises(ValueError, match="different events"):
        compare_models([a, c])


def test_smoothing_ratio_arithmetic():
    out = smoothing_ratio((10.0, 11.0, 12.0), reference_gap=100.0)
    assert out == pytest.approx(0.02)


def test_smoothing_ratio_validation():
    with pytest.raises(ValueError, match="two smoothing draws"):
        smoothing_ratio((10.0,), reference_gap=5.0)
    with pytest.raises(ValueError, match="positive"):
        smoothing_ratio((10.0, 11.0), reference_gap=0.0)
