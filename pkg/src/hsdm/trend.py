"""Intraday trend: quadratic mean and variance curves over normalized time.

The transformed residuals pT_i = Phi^{-1}(c_i) carry a slow intraday pattern
modelled as pT_i ~ N(tau_mean(t), tau_sd(t)^2) at normalized time t in
[0, 1], with tau_mean and tau_sd^2 both quadratic in t.  Fitting maximizes
the Gaussian quasi-likelihood

    -sum_i [ log(tau_sd(t_{i-1}) sigma_i)
             + (pT_i - tau_mean(t_{i-1}) - tau_sd(t_{i-1}) mu_i)^2
               / (2 tau_sd(t_{i-1})^2 sigma_i^2) ],

with (mu_i, sigma_i) = (0, 1) for the marginal fit and the latent one-step
moments for the joint refit.  Online tracking on a test day is either a pair
of penalized least-squares regressions updated in O(1) per event (LSE) or a
full re-optimization with the penalties as log-priors (PM, the slow
reference).
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

__all__ = [
    "TrendParams",
    "TrendFit",
    "quasi_ml_fit",
    "joint_quasi_ml_fit",
    "detrend",
    "OnlineTrendState",
    "PmTrendState",
]

VAR_FLOOR = 1e-8


@dataclass(frozen=True)
class TrendParams:
    """Quadratic trend coefficients over normalized time.

    ``mean_coef`` and ``var_coef`` are highest-degree-first (numpy polyval
    order): tau_mean(t) = mean_coef[0] t^2 + mean_coef[1] t + mean_coef[2],
    and likewise for tau_sd^2.  ``day_start``/``day_end`` record the clock
    anchors of the normalization.
    """

    mean_coef: np.ndarray
    var_coef: np.ndarray
    day_start: int = 0
    day_end: int = 1

    def __post_init__(self):
        object.__setattr__(
            self, "mean_coef", np.asarray(self.mean_coef, dtype=np.float64)
        )
        object.__setattr__(
            self, "var_coef", np.asarray(self.var_coef, dtype=np.float64)
        )
        if self.mean_coef.shape != (3,) or self.var_coef.shape != (3,):
            raise ValueError("mean_coef and var_coef must each have three entries")

    def tau_mean(self, t_norm):
        return np.polyval(self.mean_coef, t_norm)

    def tau_var(self, t_norm, floor=None):
        v = np.polyval(self.var_coef, t_norm)
        return v if floor is None else np.maximum(v, floor)

    def tau_sd(self, t_norm, floor=None):
        v = self.tau_var(t_norm, floor=floor)
        if floor is None and np.any(np.asarray(v) <= 0):
            raise ValueError("nonpositive trend variance; supply a floor or refit")
        return np.sqrt(v)

    def min_var_on_day(self) -> float:
        """Exact minimum of the variance quadratic over normalized [0, 1]."""
        return _quad_min_01(self.var_coef)

    def clock_coefficients(self) -> dict:
        """The same quadratics re-expressed in raw clock-time (ms) coordinates."""
        s = float(self.day_start)
        span = float(max(self.day_end - self.day_start, 1))

        def shift(c):
            a2, a1, a0 = (float(v) for v in c)
            return [
                a2 / span**2,
                a1 / span - 2.0 * a2 * s / span**2,
                a2 * s**2 / span**2 - a1 * s / span + a0,
            ]

        return {"mean_coef": shift(self.mean_coef), "var_coef": shift(self.var_coef)}

    def to_dict(self) -> dict:
        return {
            "mean_coef": self.mean_coef.tolist(),
            "var_coef": self.var_coef.tolist(),
            "day_start": int(self.day_start),
            "day_end": int(self.day_end),
        }

    @classmethod
    def from_dict(cls, d) -> "TrendParams":
        return cls(d["mean_coef"], d["var_coef"], d["day_start"], d["day_end"])


@dataclass
class TrendFit:
    """Result of a batch trend fit."""

    params: TrendParams
    objective: float
    objective_history: list = field(default_factory=list)
    converged: bool = True
    n_eval: int = 0


def _quad_min_01(coef) -> float:
    a, b, c = (float(v) for v in coef)
    best = min(c, a + b + c)
    if a != 0.0:
        v = -b / (2.0 * a)
        if 0.0 < v < 1.0:
            best = min(best, a * v * v + b * v + c)
    return best


def _neg_joint_objective(vec, t, pT, mu, sigma):
    mean_c, var_c = vec[:3], vec[3:]
    if _quad_min_01(var_c) <= VAR_FLOOR:
        return np.inf
    tm = np.polyval(mean_c, t)
    tv = np.polyval(var_c, t)
    ts = np.sqrt(tv)
    resid = pT - tm - ts * mu
    val = np.sum(np.log(ts * sigma) + resid**2 / (2.0 * tv * sigma**2))
    return float(val) if np.isfinite(val) else np.inf


def _simplex_fit(t, pT, mu, sigma, start) -> TrendFit:
    history = []
    best_so_far = [np.inf]

    def fun(vec):
        v = _neg_joint_objective(vec, t, pT, mu, sigma)
        best_so_far[0] = min(best_so_far[0], v)
        history.append(-best_so_far[0])
        return v

    res = minimize(
        fun, start, method="Nelder-Mead",
        options={"xatol": 1e-9, "fatol": 1e-8, "maxiter": 4000},
    )
    res2 = minimize(
        fun, res.x, method="Nelder-Mead",
        options={"xatol": 1e-9, "fatol": 1e-8, "maxiter": 4000},
    )
    best = res2 if res2.fun <= res.fun else res
    params = TrendParams(mean_coef=best.x[:3], var_coef=best.x[3:])
    return TrendFit(
        params=params,
        objective=-float(best.fun),
        objective_history=history,
        converged=bool(res.success or res2.success),
        n_eval=len(history),
    )


def quasi_ml_fit(p_transformed, times_norm, constant_only=False) -> TrendFit:
    """Fit the trend quadratics to (time, pT) pairs by quasi-maximum likelihood.

    ``constant_only`` pins the quadratic and linear terms at zero, for which
    the maximizer is the sample mean and (ML) variance in closed form.
    """
    pT = np.asarray(p_transformed, dtype=np.float64)
    t = np.asarray(times_norm, dtype=np.float64)
    if pT.shape != t.shape or pT.ndim != 1:
        raise ValueError("p_transformed and times_norm must be 1-d, equal length")
    if pT.size < 2:
        raise ValueError("need at least two events to fit a trend")
    if not constant_only and pT.size < 7:
        raise ValueError("need at least seven events to fit the six trend coefficients")
    c0 = float(pT.mean())
    f0 = max(float(pT.var()), VAR_FLOOR * 10)
    if constant_only:
        params = TrendParams(mean_coef=[0.0, 0.0, c0], var_coef=[0.0, 0.0, f0])
        obj = -_neg_joint_objective(
            np.concatenate([params.mean_coef, params.var_coef]),
            t, pT, 0.0, 1.0,
        )
        return TrendFit(params=params, objective=obj, objective_history=[obj])
    start = np.array([0.0, 0.0, c0, 0.0, 0.0, f0])
    return _simplex_fit(t, pT, 0.0, 1.0, start)


def joint_quasi_ml_fit(p_transformed, times_norm, mu, sigma, start_params=None) -> TrendFit:
    """Refit the trend with the latent one-step moments (mu_i, sigma_i) supplied."""
    pT = np.asarray(p_transformed, dtype=np.float64)
    t = np.asarray(times_norm, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    if np.any(sigma <= 0):
        raise ValueError("sigma values must be positive")
    if start_params is not None:
        start = np.concatenate([start_params.mean_coef, start_params.var_coef])
    else:
        start = np.array([0.0, 0.0, float(pT.mean()), 0.0, 0.0, max(float(pT.var()), VAR_FLOOR * 10)])
    return _simplex_fit(t, pT, mu, sigma, start)


def detrend(p_transformed, times_norm, params: TrendParams) -> np.ndarray:
    """(pT - tau_mean) / tau_sd at each event time; errors on nonpositive variance."""
    pT = np.asarray(p_transformed, dtype=np.float64)
    t = np.asarray(times_norm, dtype=np.float64)
    tv = params.tau_var(t)
    if np.any(tv <= 0):
        raise ValueError("trend variance is nonpositive at some event times")
    return (pT - params.tau_mean(t)) / np.sqrt(tv)


class OnlineTrendState:
    """O(1)-per-event penalized least-squares trend tracker.

    Maintains the power sums sum t^k (k <= 6), sum t^k pT (k <= 4) and
    sum t^k pT^2 (k <= 2); both the mean regression and the variance
    regression (response (pT - tau_mean(t))^2 with the freshly updated mean)
    are assembled from them, each shrunk toward the prior coefficients with
    weight ``lam``.  ``lam=inf`` freezes the prior.
    """

    def __init__(self, prior: TrendParams, lam: float = 10.0):
        self.prior = prior
        self.lam = float(lam)
        self.params = prior
        self.n = 0
        self.seconds = 0.0
        self._P = np.zeros(7)
        self._Q = np.zeros(5)
        self._R = np.zeros(3)

    def update(self, t_norm: float, p_transformed: float, mu=0.0, sigma=1.0) -> TrendParams:
        """Absorb one (time, pT) pair and return the refreshed parameters."""
        tic = time.perf_counter()
        t = float(t_norm)
        pv = float(p_transformed)
        tp = np.power(t, np.arange(7))
        self._P += tp
        self._Q += tp[:5] * pv
        self._R += tp[:3] * pv * pv
        self.n += 1
        if math.isinf(self.lam):
            self.params = self.prior
            self.seconds += time.perf_counter() - tic
            return self.params
        P, Q, R = self._P, self._Q, self._R
        A = np.array(
            [[P[4], P[3], P[2]], [P[3], P[2], P[1]], [P[2], P[1], P[0]]]
        )
        lamI = self.lam * np.eye(3)
        rhs_mean = np.array([Q[2], Q[1], Q[0]]) + self.lam * self.prior.mean_coef
        try:
            mean_c = np.linalg.solve(A + lamI, rhs_mean)
        except np.linalg.LinAlgError:
            self.params = self.prior
            self.seconds += time.perf_counter() - tic
            return self.params
        a, b, c = mean_c
        rhs_var = np.empty(3)
        for row, k in enumerate((2, 1, 0)):
            rhs_var[row] = (
                R[k]
                - 2.0 * (a * Q[k + 2] + b * Q[k + 1] + c * Q[k])
                + a * a * P[k + 4]
                + 2.0 * a * b * P[k + 3]
                + (2.0 * a * c + b * b) * P[k + 2]
                + 2.0 * b * c * P[k + 1]
                + c * c * P[k]
            )
        rhs_var += self.lam * self.prior.var_coef
        try:
            var_c = np.linalg.solve(A + lamI, rhs_var)
        except np.linalg.LinAlgError:
            self.params = self.prior
            self.seconds += time.perf_counter() - tic
            return self.params
        self.params = TrendParams(
            mean_coef=mean_c, var_coef=var_c,
            day_start=self.prior.day_start, day_end=self.prior.day_end,
        )
        self.seconds += time.perf_counter() - tic
        return self.params


class PmTrendState:
    """Posterior-mode trend tracker: full re-optimization at every event.

    Maximizes the joint quasi-likelihood over the observed prefix plus the
    LSE penalties recast as Gaussian log-priors, warm-started from the
    previous optimum.  Slow by design; the reference for
    :class:`OnlineTrendState`.
    """

    def __init__(self, prior: TrendParams, lam: float = 10.0):
        self.prior = prior
        self.lam = float(lam)
        self.params = prior
        self.n = 0
        self.seconds = 0.0
        self._t = []
        self._pT = []
        self._mu = []
        self._sigma = []
        self._prior_vec = np.concatenate([prior.mean_coef, prior.var_coef])

    def update(self, t_norm: float, p_transformed: float, mu=0.0, sigma=1.0) -> TrendParams:
        tic = time.perf_counter()
        self._t.append(float(t_norm))
        self._pT.append(float(p_transformed))
        self._mu.append(float(mu))
        self._sigma.append(float(sigma))
        self.n += 1
        t = np.asarray(self._t)
        pT = np.asarray(self._pT)
        mu_a = np.asarray(self._mu)
        sg = np.asarray(self._sigma)

        def fun(vec):
            base = _neg_joint_objective(vec, t, pT, mu_a, sg)
            pen = self.lam * float(np.sum((vec - self._prior_vec) ** 2))
            return base + pen

        start = np.concatenate([self.params.mean_coef, self.params.var_coef])
        res = minimize(
            fun, start, method="Nelder-Mead",
            options={"xatol": 1e-7, "fatol": 1e-7, "maxiter": 600},
        )
        vec = res.x if np.isfinite(res.fun) else start
        self.params = TrendParams(
            mean_coef=vec[:3], var_coef=vec[3:],
            day_start=self.prior.day_start, day_end=self.prior.day_end,
        )
        self.seconds += time.perf_counter() - tic
        return self.params
