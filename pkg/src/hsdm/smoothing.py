"""Discreteness smoothing and the generalized probability integral transform.

Durations arrive as whole milliseconds.  Subtracting an independent uniform
draw from each integer duration and taking ``y = log(1 + x - u)`` turns the
discrete sequence into a continuous one whose PIT residuals coincide with the
general (jump-aware) PIT of the original integers, provided the same uniforms
are used on both sides.  The shifted log keeps y positive for x >= 1; the
working scale for modelling is ``t = log(x - u)``, related to y by
``y = log(1 + exp(t))``.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SmoothedSeries",
    "smooth_durations",
    "general_pit",
    "IntegerLaw",
    "interpolated_cdf",
    "discrete_vs_smoothed_loglik",
    "y_from_t",
    "t_from_y",
]


def y_from_t(t):
    """Map the working log scale t = log(x-u) to the shifted scale y = log(1+x-u)."""
    return np.logaddexp(0.0, t)


def t_from_y(y):
    """Inverse of :func:`y_from_t`: t = log(exp(y) - 1), stable in both tails."""
    y = np.asarray(y, dtype=np.float64)
    out = np.where(y > 30.0, y, np.log(np.expm1(np.maximum(y, 1e-300))))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class SmoothedSeries:
    """Smoothed log-durations y = log(1 + x - u) with the uniforms that made them."""

    y: np.ndarray
    u: np.ndarray
    seed: int

    def __post_init__(self):
        self.y.setflags(write=False)
        self.u.setflags(write=False)

    @property
    def t(self) -> np.ndarray:
        """Smoothed log-durations on the working scale t = log(x - u)."""
        return t_from_y(self.y)

    def __len__(self) -> int:
        return int(self.y.size)


def smooth_durations(x, seed) -> SmoothedSeries:
    """Smooth integer durations: y_i = log(1 + x_i - u_i), u_i ~ U(0,1).

    Draws that land exactly on 0 are redrawn so the strict bracket
    exp(y)-1 in (x-1, x) holds.
    """
    x = np.asarray(x)
    if x.size and (x.min() < 1 or np.any(x != np.floor(x))):
        raise ValueError("durations must be integers >= 1")
    rng = np.random.default_rng(seed)
    u = rng.random(x.size)
    while np.any(u == 0.0):
        u[u == 0.0] = rng.random(int((u == 0.0).sum()))
    y = np.log1p(x - u)
    return SmoothedSeries(y=y, u=u, seed=seed)


def general_pit(cdf_at_x, jump_at_x, v):
    """Jump-aware PIT: W = F(x) - (1 - v) * J(x).

    ``cdf_at_x`` is the CDF evaluated at the observed point, ``jump_at_x`` the
    probability mass sitting exactly there, and ``v`` a uniform (0,1) draw.
    For continuous laws (zero jump) this is the ordinary PIT.
    """
    F = np.asarray(cdf_at_x, dtype=np.float64)
    J = np.asarray(jump_at_x, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if np.any((F < 0) | (F > 1)):
        raise ValueError("cdf values must lie in [0, 1]")
    if np.any(J < 0) or np.any(J > F + 1e-15):
        raise ValueError("jump must satisfy 0 <= jump <= cdf")
    if np.any((v <= 0) | (v >= 1)):
        raise ValueError("v must lie strictly inside (0, 1)")
    w = F - (1.0 - v) * J
    return w if w.ndim else float(w)


class IntegerLaw:
    """A probability distribution on a finite set of integers.

    Stores the ascending support and the pmf; exposes the step CDF, the point
    masses, and the piecewise-linear interpolation used to smooth the law onto
    the real line (mass at integer m spread uniformly over (m-1, m]).
    """

    def __init__(self, support, pmf):
        self.support = np.asarray(support, dtype=np.int64)
        self.pmf_values = np.asarray(pmf, dtype=np.float64)
        if self.support.ndim != 1 or self.support.shape != self.pmf_values.shape:
            raise ValueError("support and pmf must be 1-d arrays of equal length")
        if np.any(np.diff(self.support) <= 0):
            raise ValueError("support must be strictly increasing")
        if np.any(self.pmf_values < 0) or abs(self.pmf_values.sum() - 1.0) > 1e-9:
            raise ValueError("pmf must be nonnegative and sum to 1")
        # cumsum can overshoot 1.0 by an ulp; a CDF must stay within [0, 1]
        self._cdf = np.minimum(np.cumsum(self.pmf_values), 1.0)

    def cdf(self, x):
        """P(X <= x) for real x (step function)."""
        i = np.searchsorted(self.support, np.floor(np.asarray(x)), side="right")
        padded = np.concatenate([[0.0], self._cdf])
        out = padded[i]
        return out if out.ndim else float(out)

    def pmf(self, x):
        """P(X = x); zero off the support or at non-integers."""
        x = np.asarray(x)
        i = np.searchsorted(self.support, x)
        i = np.clip(i, 0, self.support.size - 1)
        hit = (self.support[i] == x) & (x == np.floor(x))
        out = np.where(hit, self.pmf_values[i], 0.0)
        return out if out.ndim else float(out)


def interpolated_cdf(law: IntegerLaw, z):
    """Linear interpolation of the integer-law CDF between consecutive integers.

    G(z) = F(floor(z)) + (z - floor(z)) * P(X = floor(z) + 1), which equals
    F(z) at integers.  This is the CDF of Z = X - V for V ~ U(0,1).
    """
    z = np.asarray(z, dtype=np.float64)
    fz = np.floor(z)
    out = law.cdf(fz) + (z - fz) * law.pmf(fz + 1.0)
    return out if out.ndim else float(out)


def discrete_vs_smoothed_loglik(law: IntegerLaw, x, z):
    """Log-likelihood of the integer draw and of its smoothed counterpart.

    Returns (log P(X=x), log g(z)) where g is the density of the interpolated
    CDF, computed as the slope of G over the unit interval containing z.
    The two are equal whenever z is in (x-1, x).
    """
    x = int(x)
    z = float(z)
    if not (x - 1 < z < x):
        raise ValueError("z must lie in the open interval (x-1, x)")
    p = law.pmf(x)
    slope = interpolated_cdf(law, float(np.ceil(z))) - interpolated_cdf(
        law, float(np.ceil(z)) - 1.0
    )
    if p <= 0 or slope <= 0:
        raise ValueError("x carries no probability mass under the law")
    return float(np.log(p)), float(np.log(slope))
