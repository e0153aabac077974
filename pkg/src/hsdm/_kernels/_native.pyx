# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot numeric kernels.

Same contracts as ``hsdm._kernels._fallback``; see that module for the
definitions.  Loops run without the GIL and skip kernel pairs whose
conditioning weight underflows to zero.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport erfc, exp, log, sqrt

cnp.import_array()

cdef double SQRT_2PI = sqrt(2.0 * np.pi)
cdef double INV_SQRT2 = 1.0 / sqrt(2.0)
# exp(-0.5 * u2) underflows below ~1e-306 for u2 > 1408; skipping there is lossless.
cdef double U2_CUTOFF = 1400.0


cdef inline double norm_cdf(double z) noexcept nogil:
    return 0.5 * erfc(-z * INV_SQRT2)


def cond_kde_sums(const double[::1] x_train, const double[::1] y_train, double g, double h,
                  const double[::1] x_query, const double[::1] y_query):
    cdef Py_ssize_t n = x_train.shape[0]
    cdef Py_ssize_t m = x_query.shape[0]
    den_arr = np.empty(m)
    num_pdf_arr = np.empty(m)
    num_cdf_arr = np.empty(m)
    cdef double[::1] den = den_arr
    cdef double[::1] num_pdf = num_pdf_arr
    cdef double[::1] num_cdf = num_cdf_arr
    cdef Py_ssize_t i, j
    cdef double dxg, uy, kx, u2, s_den, s_pdf, s_cdf
    with nogil:
        for j in range(m):
            s_den = 0.0
            s_pdf = 0.0
            s_cdf = 0.0
            for i in range(n):
                dxg = (x_query[j] - x_train[i]) / g
                u2 = dxg * dxg
                if u2 > U2_CUTOFF:
                    continue
                kx = exp(-0.5 * u2)
                uy = (y_query[j] - y_train[i]) / h
                s_den += kx
                if uy * uy <= U2_CUTOFF:
                    s_pdf += kx * exp(-0.5 * uy * uy)
                s_cdf += kx * norm_cdf(uy)
            den[j] = s_den
            num_pdf[j] = s_pdf / (h * SQRT_2PI)
            num_cdf[j] = s_cdf
    return den_arr, num_pdf_arr, num_cdf_arr


def cond_kde_loo(const double[::1] x_train, const double[::1] y_train, double g, double h,
                 eval_idx):
    cdef Py_ssize_t[::1] idx = np.ascontiguousarray(eval_idx, dtype=np.intp)
    cdef Py_ssize_t n = x_train.shape[0]
    cdef Py_ssize_t m = idx.shape[0]
    cdef Py_ssize_t i, j, q
    cdef double dxg, uy, kx, u2, s_den, s_pdf, xq, yq, ratio
    cdef double self_pdf = 1.0 / (h * SQRT_2PI)
    cdef double total = 0.0
    with nogil:
        for q in range(m):
            j = idx[q]
            xq = x_train[j]
            yq = y_train[j]
            s_den = 0.0
            s_pdf = 0.0
            for i in range(n):
                dxg = (xq - x_train[i]) / g
                u2 = dxg * dxg
                if u2 > U2_CUTOFF:
                    continue
                kx = exp(-0.5 * u2)
                uy = (yq - y_train[i]) / h
                s_den += kx
                if uy * uy <= U2_CUTOFF:
                    s_pdf += kx * exp(-0.5 * uy * uy)
            s_pdf = s_pdf / (h * SQRT_2PI) - self_pdf
            s_den -= 1.0
            if s_pdf < 0.0:
                s_pdf = 0.0
            if s_den < 1e-300:
                s_den = 1e-300
            ratio = s_pdf / s_den
            if ratio < 1e-300:
                ratio = 1e-300
            total += log(ratio)
    return total


def kde1d_sums(const double[::1] train, double h, const double[::1] query):
    cdef Py_ssize_t n = train.shape[0]
    cdef Py_ssize_t m = query.shape[0]
    pdf_arr = np.empty(m)
    cdf_arr = np.empty(m)
    cdef double[::1] pdf = pdf_arr
    cdef double[::1] cdf = cdf_arr
    cdef Py_ssize_t i, j
    cdef double u, s_pdf, s_cdf
    with nogil:
        for j in range(m):
            s_pdf = 0.0
            s_cdf = 0.0
            for i in range(n):
                u = (query[j] - train[i]) / h
                if u * u <= U2_CUTOFF:
                    s_pdf += exp(-0.5 * u * u)
                s_cdf += norm_cdf(u)
            pdf[j] = s_pdf / (n * h * SQRT_2PI)
            cdf[j] = s_cdf / n
    return pdf_arr, cdf_arr


def acd_psi(const double[::1] x, double omega, double alpha, double beta, double psi1):
    cdef Py_ssize_t n = x.shape[0]
    psi_arr = np.empty(n)
    cdef double[::1] psi = psi_arr
    cdef Py_ssize_t i
    psi[0] = psi1
    with nogil:
        for i in range(1, n):
            psi[i] = omega + alpha * x[i - 1] + beta * psi[i - 1]
    return psi_arr


def fiacd_psi(const double[::1] x, const double[::1] lam, double omega, double beta,
              double psi1, double x_pre):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t L = lam.shape[0]
    psi_arr = np.empty(n)
    cdef double[::1] psi = psi_arr
    cdef Py_ssize_t i, k
    cdef double conv, xval
    psi[0] = psi1
    with nogil:
        for i in range(1, n):
            conv = 0.0
            for k in range(1, L + 1):
                if i - k >= 0:
                    xval = x[i - k]
                else:
                    xval = x_pre
                conv += lam[k - 1] * xval
            psi[i] = omega + beta * psi[i - 1] + conv
    return psi_arr


def arma_innovations(const double[::1] w, const double[::1] phi, const double[::1] theta):
    cdef Py_ssize_t n = w.shape[0]
    cdef Py_ssize_t p = phi.shape[0]
    cdef Py_ssize_t q = theta.shape[0]
    e_arr = np.empty(n)
    cdef double[::1] e = e_arr
    cdef Py_ssize_t i, j
    cdef double acc
    with nogil:
        for i in range(n):
            acc = w[i]
            for j in range(1, p + 1):
                if i - j >= 0:
                    acc -= phi[j - 1] * w[i - j]
            for j in range(1, q + 1):
                if i - j >= 0:
                    acc -= theta[j - 1] * e[i - j]
            e[i] = acc
    return e_arr
