"""Numpy/scipy implementations of the hot numeric kernels.

These are the pure-Python counterparts of ``hsdm._kernels._native``.  They are
selected automatically when the compiled extension is unavailable and they
double as an independent route for cross-checking it: the KDE sums use chunked
broadcasting, the recursions use ``scipy.signal.lfilter`` / ``fftconvolve``
instead of explicit loops, so agreement between the two backends is a real
test of the math rather than of one code path.
"""

import numpy as np
from scipy.signal import fftconvolve, lfilter
from scipy.special import ndtr

__all__ = [
    "cond_kde_sums",
    "cond_kde_loo",
    "kde1d_sums",
    "acd_psi",
    "fiacd_psi",
    "arma_innovations",
]

_SQRT_2PI = float(np.sqrt(2.0 * np.pi))

# Queries are processed in blocks so the (block x n_train) kernel matrices stay
# inside a fixed memory budget.
_BLOCK_CELLS = 4_000_000


def _query_blocks(n_query, n_train):
    step = max(1, _BLOCK_CELLS // max(n_train, 1))
    for lo in range(0, n_query, step):
        yield lo, min(lo + step, n_query)


def cond_kde_sums(x_train, y_train, g, h, x_query, y_query):
    """Gaussian product-kernel sums for a conditional KDE.

    For every query pair (x_query[j], y_query[j]) returns

        den[j]     = sum_i exp(-((x_query[j]-x_train[i])/g)^2 / 2)
        num_pdf[j] = sum_i k_i * phi((y_query[j]-y_train[i])/h) / h
        num_cdf[j] = sum_i k_i * Phi((y_query[j]-y_train[i])/h)

    where k_i is the (unnormalised) conditioning kernel inside den.  The
    conditional density and CDF are num_pdf/den and num_cdf/den.
    """
    x_train = np.asarray(x_train, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.float64)
    x_query = np.asarray(x_query, dtype=np.float64)
    y_query = np.asarray(y_query, dtype=np.float64)
    m = x_query.shape[0]
    den = np.empty(m)
    num_pdf = np.empty(m)
    num_cdf = np.empty(m)
    for lo, hi in _query_blocks(m, x_train.shape[0]):
        kx = np.exp(-0.5 * ((x_query[lo:hi, None] - x_train[None, :]) / g) ** 2)
        uy = (y_query[lo:hi, None] - y_train[None, :]) / h
        den[lo:hi] = kx.sum(axis=1)
        num_pdf[lo:hi] = (kx * np.exp(-0.5 * uy**2)).sum(axis=1) / (h * _SQRT_2PI)
        num_cdf[lo:hi] = (kx * ndtr(uy)).sum(axis=1)
    return den, num_pdf, num_cdf


def cond_kde_loo(x_train, y_train, g, h, eval_idx):
    """Leave-one-out conditional log-density summed over ``eval_idx``.

    Each evaluation point is a training pair; its own kernel contribution is
    subtracted from the sums before the log-ratio is taken.  Contributions are
    floored at 1e-300 so an isolated point yields a large negative number
    rather than -inf.
    """
    x_train = np.asarray(x_train, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.float64)
    eval_idx = np.asarray(eval_idx, dtype=np.intp)
    den, num_pdf, _ = cond_kde_sums(
        x_train, y_train, g, h, x_train[eval_idx], y_train[eval_idx]
    )
    den_loo = den - 1.0
    num_loo = num_pdf - 1.0 / (h * _SQRT_2PI)
    ratio = np.maximum(num_loo, 0.0) / np.maximum(den_loo, 1e-300)
    return float(np.log(np.maximum(ratio, 1e-300)).sum())


def kde1d_sums(train, h, query):
    """Gaussian KDE density and CDF at ``query`` points (normalised by n)."""
    train = np.asarray(train, dtype=np.float64)
    query = np.asarray(query, dtype=np.float64)
    n = train.shape[0]
    pdf = np.empty(query.shape[0])
    cdf = np.empty(query.shape[0])
    for lo, hi in _query_blocks(query.shape[0], n):
        u = (query[lo:hi, None] - train[None, :]) / h
        pdf[lo:hi] = np.exp(-0.5 * u**2).sum(axis=1) / (n * h * _SQRT_2PI)
        cdf[lo:hi] = ndtr(u).sum(axis=1) / n
    return pdf, cdf


def acd_psi(x, omega, alpha, beta, psi1):
    """ACD(1,1) conditional-mean recursion psi[i] = omega + alpha*x[i-1] + beta*psi[i-1]."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    psi = np.empty(n)
    psi[0] = psi1
    if n > 1:
        drive = omega + alpha * x[:-1]
        psi[1:] = lfilter([1.0], [1.0, -beta], drive, zi=np.array([beta * psi1]))[0]
    return psi


def fiacd_psi(x, lam, omega, beta, psi1, x_pre):
    """Fractionally integrated ACD recursion.

    psi[i] = omega + beta*psi[i-1] + sum_{k=1..L} lam[k-1] * X[i-k], with
    X[m] = x[m] for m >= 0 and the scalar ``x_pre`` before the sample.
    """
    x = np.asarray(x, dtype=np.float64)
    lam = np.asarray(lam, dtype=np.float64)
    n = x.shape[0]
    L = lam.shape[0]
    padded = np.concatenate([np.full(L, x_pre), x[: n - 1]])
    conv = fftconvolve(padded, lam)[L - 1 : L - 1 + n]
    psi = np.empty(n)
    psi[0] = psi1
    if n > 1:
        drive = omega + conv[1:]
        psi[1:] = lfilter([1.0], [1.0, -beta], drive, zi=np.array([beta * psi1]))[0]
    return psi


def arma_innovations(w, phi, theta):
    """Innovations of an ARMA(p,q) with zero pre-sample values.

    e[i] = w[i] - sum_j phi[j] w[i-j] - sum_j theta[j] e[i-j], the MA side
    written as (1 + theta_1 B + ...).
    """
    w = np.asarray(w, dtype=np.float64)
    b = np.concatenate([[1.0], -np.asarray(phi, dtype=np.float64)])
    a = np.concatenate([[1.0], np.asarray(theta, dtype=np.float64)])
    return lfilter(b, a, w)
