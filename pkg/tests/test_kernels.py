"""Cross-checks of the numeric kernels against brute-force references.

Every kernel has two implementations (compiled and numpy/scipy); both are
checked here against straight-line Python loops on small random inputs, and
against each other on larger ones.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.special import ndtr

from hsdm._kernels import HAVE_NATIVE, _fallback

if HAVE_NATIVE:
    from hsdm._kernels import _native

    BACKENDS = [_fallback, _native]
else:
    BACKENDS = [_fallback]

SQRT_2PI = np.sqrt(2.0 * np.pi)


def _brute_cond_sums(x_train, y_train, g, h, x_query, y_query):
    den = np.zeros(len(x_query))
    num_pdf = np.zeros(len(x_query))
    num_cdf = np.zeros(len(x_query))
    for j in range(len(x_query)):
        for i in range(len(x_train)):
            kx = np.exp(-0.5 * ((x_query[j] - x_train[i]) / g) ** 2)
            u = (y_query[j] - y_train[i]) / h
            den[j] += kx
            num_pdf[j] += kx * np.exp(-0.5 * u * u) / (h * SQRT_2PI)
            num_cdf[j] += kx * ndtr(u)
    return den, num_pdf, num_cdf


@pytest.mark.parametrize("kernels", BACKENDS)
def test_cond_kde_sums_matches_brute_force(kernels):
    rng = np.random.default_rng(11)
    x_train = rng.normal(size=40)
    y_train = rng.normal(size=40)
    x_query = rng.normal(size=17)
    y_query = rng.normal(size=17)
    got = kernels.cond_kde_sums(x_train, y_train, 0.37, 0.52, x_query, y_query)
    want = _brute_cond_sums(x_train, y_train, 0.37, 0.52, x_query, y_query)
    for a, b in zip(got, want):
        assert_allclose(a, b, rtol=1e-12)


@pytest.mark.parametrize("kernels", BACKENDS)
def test_cond_kde_loo_matches_brute_force(kernels):
    """LOO score equals the sum of log density ratios with own kernel removed."""
    rng = np.random.default_rng(12)
    x_train = rng.normal(size=30)
    y_train = 0.5 * x_train + rng.normal(size=30)
    idx = np.array([0, 3, 7, 19, 29], dtype=np.intp)
    g, h = 0.45, 0.6
    den, num, _ = _brute_cond_sums(
        x_train, y_train, g, h, x_train[idx], y_train[idx]
    )
    want = np.log((num - 1.0 / (h * SQRT_2PI)) / (den - 1.0)).sum()
    got = kernels.cond_kde_loo(x_train, y_train, g, h, idx)
    assert_allclose(got, want, rtol=1e-12)


@pytest.mark.parametrize("kernels", BACKENDS)
def test_cond_kde_loo_isolated_point_is_finite(kernels):
    # a far outlier has ~zero leave-one-out mass; the floor keeps the score finite
    x_train = np.array([0.0, 0.01, 0.02, 500.0])
    y_train = np.array([0.0, 0.01, 0.02, 500.0])
    idx = np.arange(4, dtype=np.intp)
    score = kernels.cond_kde_loo(x_train, y_train, 0.1, 0.1, idx)
    assert np.isfinite(score)
    assert score < -100


@pytest.mark.parametrize("kernels", BACKENDS)
def test_kde1d_sums_matches_brute_force(kernels):
    rng = np.random.default_rng(13)
    train = rng.normal(size=25)
    query = np.linspace(-3, 3, 11)
    h = 0.4
    pdf, cdf = kernels.kde1d_sums(train, h, query)
    want_pdf = np.array([
        np.mean(np.exp(-0.5 * ((q - train) / h) ** 2)) / (h * SQRT_2PI)
        for q in query
    ])
    want_cdf = np.array([np.mean(ndtr((q - train) / h)) for q in query])
    assert_allclose(pdf, want_pdf, rtol=1e-12)
    assert_allclose(cdf, want_cdf, rtol=1e-12)


@pytest.mark.parametrize("kernels", BACKENDS)
def test_acd_psi_hand_example(kernels):
    # psi[1] = 0.1 + 0.1 * 2 + 0.8 * 1 = 1.1
    psi = kernels.acd_psi(np.array([2.0, 5.0]), 0.1, 0.1, 0.8, 1.0)
    assert_allclose(psi, [1.0, 1.1], rtol=1e-14)


@pytest.mark.parametrize("kernels", BACKENDS)
def test_acd_psi_matches_loop(kernels):
    rng = np.random.default_rng(14)
    x = rng.exponential(size=200)
    omega, alpha, beta, psi1 = 0.15, 0.12, 0.7, 0.9
    want = np.empty(200)
    want[0] = psi1
    for i in range(1, 200):
        want[i] = omega + alpha * x[i - 1] + beta * want[i - 1]
    got = kernels.acd_psi(x, omega, alpha, beta, psi1)
    assert_allclose(got, want, rtol=1e-12)


@pytest.mark.parametrize("kernels", BACKENDS)
def test_fiacd_psi_matches_loop(kernels):
    """The fractional recursion with pre-sample padding, against a direct loop."""
    rng = np.random.default_rng(15)
    n, L = 120, 9
    x = rng.exponential(size=n)
    lam = rng.uniform(0.0, 0.15, size=L)
    omega, beta, psi1, x_pre = 0.2, 0.55, 1.1, 0.97
    want = np.empty(n)
    want[0] = psi1
    for i in range(1, n):
        acc = omega + beta * want[i - 1]
        for k in range(1, L + 1):
            xv = x[i - k] if i - k >= 0 else x_pre
            acc += lam[k - 1] * xv
        want[i] = acc
    got = kernels.fiacd_psi(x, lam, omega, beta, psi1, x_pre)
    assert_allclose(got, want, rtol=1e-10)


@pytest.mark.parametrize("kernels", BACKENDS)
def test_arma_innovations_matches_loop(kernels):
    rng = np.random.default_rng(16)
    w = rng.normal(size=150)
    phi = np.array([0.4, -0.2])
    theta = np.array([0.3])
    want = np.empty(150)
    for i in range(150):
        acc = w[i]
        for j, p in enumerate(phi, start=1):
            if i - j >= 0:
                acc -= p * w[i - j]
        for j, t in enumerate(theta, start=1):
            if i - j >= 0:
                acc -= t * want[i - j]
        want[i] = acc
    got = kernels.arma_innovations(w, phi, theta)
    assert_allclose(got, want, rtol=1e-10)


@pytest.mark.parametrize("kernels", BACKENDS)
def test_arma_innovations_empty_orders(kernels):
    w = np.array([1.0, -2.0, 0.5])
    got = kernels.arma_innovations(w, np.empty(0), np.empty(0))
    assert_allclose(got, w, rtol=0, atol=0)


@pytest.mark.skipif(not HAVE_NATIVE, reason="compiled kernels unavailable")
def test_backends_agree_on_large_inputs():
    """Compiled and numpy backends agree to near machine precision."""
    rng = np.random.default_rng(17)
    x_train = rng.normal(size=1500)
    y_train = 0.3 * x_train + rng.normal(size=1500)
    x_query = rng.normal(size=700)
    y_query = rng.normal(size=700)
    a = _native.cond_kde_sums(x_train, y_train, 0.3, 0.4, x_query, y_query)
    b = _fallback.cond_kde_sums(x_train, y_train, 0.3, 0.4, x_query, y_query)
    for u, v in zip(a, b):
        assert_allclose(u, v, rtol=1e-11)

    idx = np.arange(0, 1500, 3, dtype=np.intp)
    assert_allclose(
        _native.cond_kde_loo(x_train, y_train, 0.3, 0.4, idx),
        _fallback.cond_kde_loo(x_train, y_train, 0.3, 0.4, idx),
        rtol=1e-11,
    )

    q = np.linspace(-4, 4, 500)
    for u, v in zip(
        _native.kde1d_sums(y_train, 0.25, q), _fallback.kde1d_sums(y_train, 0.25, q)
    ):
        assert_allclose(u, v, rtol=1e-11)

    ratios = rng.exponential(size=3000)
    assert_allclose(
        _native.acd_psi(ratios, 0.1, 0.1, 0.8, 1.0),
        _fallback.acd_psi(ratios, 0.1, 0.1, 0.8, 1.0),
        rtol=1e-11,
    )
    lam = 0.1 * 0.9 ** np.arange(60)
    assert_allclose(
        _native.fiacd_psi(ratios, lam, 0.1, 0.6, 1.0, 1.0),
        _fallback.fiacd_psi(ratios, lam, 0.1, 0.6, 1.0, 1.0),
        rtol=1e-10,
    )
    w = rng.normal(size=3000)
    assert_allclose(
        _native.arma_innovations(w, np.array([0.5]), np.array([-0.3])),
        _fallback.arma_innovations(w, np.array([0.5]), np.array([-0.3])),
        rtol=1e-10,
    )
