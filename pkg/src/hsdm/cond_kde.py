"""Conditional kernel density estimation of one-step duration dynamics.

The estimator works on the shifted log scale y = log(1 + x - u) (see
:mod:`hsdm.smoothing`): given training pairs (y_{i-1}, y_i), a Gaussian
product kernel gives the conditional density of y_i at y given y_{i-1},

    g(y | y_prev) = sum_i k_g(y_prev - y_prev_i) phi_h(y - y_i)
                    / sum_i k_g(y_prev - y_prev_i),

whose CDF is available in closed form through the Gaussian kernel CDF.
Because y is positive by construction while the kernels spill mass below
zero, the conditional law is truncated to y > 0 and renormalised; the raw
kernel quantities stay reachable via ``truncate=False``.

The modelling scale is t = log(x - u) = log(exp(y) - 1).  Densities on that
scale pick up the Jacobian dy/dt = exp(t) / (1 + exp(t)).
"""

import json

import numpy as np
from scipy.special import expit, ndtri

from . import _kernels
from .smoothing import y_from_t

__all__ = ["CondDensityModel", "fit_cond_kde"]

_CV_MULTIPLIERS = np.logspace(np.log10(0.25), np.log10(4.0), 7)


class CondDensityModel:
    """Gaussian product-kernel conditional density on the shifted log scale."""

    kernel = "gaussian"

    def __init__(self, y_prev, y, h_cond, h_y, cv_table=None):
        self.y_prev = np.ascontiguousarray(y_prev, dtype=np.float64)
        self.y = np.ascontiguousarray(y, dtype=np.float64)
        if self.y_prev.ndim != 1 or self.y_prev.shape != self.y.shape:
            raise ValueError("y_prev and y must be 1-d arrays of equal length")
        if self.y_prev.size < 1:
            raise ValueError("at least one training pair is required")
        if not (h_cond > 0 and h_y > 0):
            raise ValueError("bandwidths must be positive")
        self.h_cond = float(h_cond)
        self.h_y = float(h_y)
        self.cv_table = cv_table
        self._prev_lo = float(self.y_prev.min())
        self._prev_hi = float(self.y_prev.max())

    @property
    def n_train(self) -> int:
        return int(self.y.size)

    def _clamp_prev(self, y_prev):
        """Conditioning values outside the training range are clamped to it."""
        return np.clip(np.asarray(y_prev, dtype=np.float64), self._prev_lo, self._prev_hi)

    def _sums(self, y_query, y_prev_query):
        yq = np.atleast_1d(np.asarray(y_query, dtype=np.float64))
        xq = np.atleast_1d(self._clamp_prev(y_prev_query))
        if xq.size == 1 and yq.size > 1:
            xq = np.full(yq.shape, xq[0])
        if yq.shape != xq.shape:
            raise ValueError("y and y_prev must broadcast to the same shape")
        den, num_pdf, num_cdf = _kernels.cond_kde_sums(
            self.y_prev, self.y, self.h_cond, self.h_y, xq, yq
        )
        _, _, num_cdf0 = _kernels.cond_kde_sums(
            self.y_prev, self.y, self.h_cond, self.h_y, xq, np.zeros_like(xq)
        )
        return den, num_pdf, num_cdf, num_cdf0

    # -- shifted log scale (y) ------------------------------------------------

    def density_y(self, y, y_prev, truncate=True):
        """Conditional density of y given y_prev on the shifted log scale."""
        den, num_pdf, _, num_cdf0 = self._sums(y, y_prev)
        if truncate:
            out = num_pdf / np.maximum(den - num_cdf0, 1e-300)
            out = np.where(np.atleast_1d(np.asarray(y)) <= 0.0, 0.0, out)
        else:
            out = num_pdf / np.maximum(den, 1e-300)
        return out if out.size > 1 else float(out[0])

    def cdf_y(self, y, y_prev, truncate=True):
        """Conditional CDF of y given y_prev on the shifted log scale."""
        den, _, num_cdf, num_cdf0 = self._sums(y, y_prev)
        if truncate:
            out = (num_cdf - num_cdf0) / np.maximum(den - num_cdf0, 1e-300)
            out = np.clip(out, 0.0, 1.0)
            out = np.where(np.atleast_1d(np.asarray(y)) <= 0.0, 0.0, out)
        else:
            out = num_cdf / np.maximum(den, 1e-300)
        return out if out.size > 1 else float(out[0])

    def cdf_and_density_y(self, y, y_prev):
        """Truncated conditional CDF and density in one kernel pass."""
        den, num_pdf, num_cdf, num_cdf0 = self._sums(y, y_prev)
        mass = np.maximum(den - num_cdf0, 1e-300)
        cdf = np.clip((num_cdf - num_cdf0) / mass, 0.0, 1.0)
        pdf = num_pdf / mass
        return cdf, pdf

    # -- working log scale (t) ------------------------------------------------

    def density(self, t, t_prev):
        """Conditional density of the smoothed log-duration t given t_prev."""
        t = np.asarray(t, dtype=np.float64)
        out = self.density_y(y_from_t(t), y_from_t(t_prev)) * expit(t)
        return out if np.ndim(out) else float(out)

    def cdf(self, t, t_prev):
        """Conditional CDF of the smoothed log-duration t given t_prev."""
        return self.cdf_y(y_from_t(t), y_from_t(t_prev))

    def inverse_cdf(self, prob, t_prev):
        """Quantile of the conditional law by bisection on the y scale."""
        p = float(prob)
        if not 0.0 < p < 1.0:
            raise ValueError("prob must lie strictly inside (0, 1)")
        y_prev = y_from_t(float(t_prev))
        lo = 0.0
        hi = float(self.y.max()) + 10.0 * self.h_y
        while self.cdf_y(hi, y_prev) < p:
            hi += 10.0 * self.h_y
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if self.cdf_y(mid, y_prev) < p:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-12:
                break
        y_star = 0.5 * (lo + hi)
        return float(np.log(np.expm1(y_star))) if y_star <= 30.0 else y_star

    def generalized_residuals(self, y_series):
        """In-sample residuals c_i = F(y_i | y_{i-1}) for a smoothed series."""
        y_series = np.asarray(y_series, dtype=np.float64)
        return self.cdf_y(y_series[1:], y_series[:-1])

    # -- serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel,
            "h_cond": self.h_cond,
            "h_y": self.h_y,
            "y_prev": self.y_prev.tolist(),
            "y": self.y.tolist(),
        }

    @classmethod
    def from_dict(cls, d) -> "CondDensityModel":
        if d.get("kernel") != "gaussian":
            raise ValueError(f"unsupported kernel {d.get('kernel')!r}")
        return cls(d["y_prev"], d["y"], d["h_cond"], d["h_y"])

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "CondDensityModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def fit_cond_kde(y_prev, y, cv_max_points: int = 800) -> CondDensityModel:
    """Fit the conditional KDE, choosing bandwidths by leave-one-out CV.

    Candidate bandwidths are a 7x7 log-spaced multiplier grid around the
    normal-reference values s * n^(-1/6); the pair maximising the
    leave-one-out conditional log-likelihood (evaluated on at most
    ``cv_max_points`` evenly spaced training pairs) wins.
    """
    y_prev = np.ascontiguousarray(y_prev, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if y_prev.shape != y.shape or y_prev.ndim != 1:
        raise ValueError("y_prev and y must be 1-d arrays of equal length")
    n = y.size
    if n < 2:
        raise ValueError("need at least two training pairs to fit")
    if np.std(y_prev) == 0.0 or np.std(y) == 0.0:
        raise ValueError("training pairs are degenerate: no variation to set a bandwidth")
    s_prev = max(float(np.std(y_prev)), 1e-8)
    s_y = max(float(np.std(y)), 1e-8)
    g_ref = s_prev * n ** (-1.0 / 6.0)
    h_ref = s_y * n ** (-1.0 / 6.0)
    idx = np.unique(np.linspace(0, n - 1, min(n, cv_max_points)).astype(np.intp))
    best = (-np.inf, g_ref, h_ref)
    table = []
    for mg in _CV_MULTIPLIERS:
        for mh in _CV_MULTIPLIERS:
            g, h = g_ref * mg, h_ref * mh
            score = _kernels.cond_kde_loo(y_prev, y, g, h, idx)
            table.append((g, h, score))
            if score > best[0]:
                best = (score, g, h)
    return CondDensityModel(y_prev, y, h_cond=best[1], h_y=best[2], cv_table=table)
