"""Long-memory ARFIMA(p, d, q) modelling of the latent residual process.

The model, written with backshift operator B, is

    (1 - phi_1 B - ... - phi_p B^p) (1-B)^d (Y_i - b0 - sum_j b_j u_ij)
        = (1 + theta_1 B + ... + theta_q B^q) Z_i,

with Z_i ~ N(0, sigma^2) and optional exogenous regressors u_ij.  Note the
plus signs on the MA side: that is the convention all stored coefficients
use.  Estimation is by conditional sum of squares with zero pre-sample
values and the fractional filter truncated at ``trunc`` lags; the intercept
and regression coefficients are profiled out by least squares on the
filtered design, so the numerical optimizer only sees (d, phi, theta)
through stationarity/invertibility transforms.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.signal import fftconvolve, lfilter

from ._kernels import arma_innovations

__all__ = [
    "frac_diff_coeffs",
    "apply_frac_diff",
    "ArfimaModel",
    "fit_arfima",
    "select_order",
    "simulate_arfima",
    "ArfimaForecaster",
]

DEFAULT_TRUNC = 1000
_D_MAX = 0.499


def frac_diff_coeffs(d: float, n_terms: int) -> np.ndarray:
    """Coefficients of (1-B)^d up to lag n_terms - 1.

    pi_0 = 1 and pi_k = pi_{k-1} * (k - 1 - d) / k, the binomial expansion
    of (1-B)^d.  Works for negative d (fractional integration) as well.
    """
    if n_terms < 1:
        raise ValueError("n_terms must be >= 1")
    out = np.empty(n_terms)
    out[0] = 1.0
    for k in range(1, n_terms):
        out[k] = out[k - 1] * (k - 1 - d) / k
    return out


def apply_frac_diff(x, d: float, trunc: int | None = None) -> np.ndarray:
    """Apply (1-B)^d to a series with the filter truncated at ``trunc`` lags.

    w_i = sum_{k=0..min(i, trunc)} pi_k x_{i-k}; values before the sample are
    treated as zero (CSS convention).
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    if n == 0:
        return x.copy()
    L = min(n - 1, DEFAULT_TRUNC if trunc is None else int(trunc))
    coeffs = frac_diff_coeffs(d, L + 1)
    if n * (L + 1) <= 16384:
        return np.convolve(x, coeffs)[:n]
    return fftconvolve(x, coeffs)[:n]


def _pacf_to_coeffs(z: np.ndarray) -> np.ndarray:
    """Map unconstrained reals to a stationary AR coefficient vector.

    tanh maps each component to a partial autocorrelation in (-1, 1); the
    Durbin-Levinson recursion then yields coefficients of a polynomial
    1 - a_1 B - ... - a_p B^p with all roots outside the unit circle.
    """
    r = np.tanh(z)
    a = r.copy()
    for k in range(1, r.size):
        a[:k] = a[:k] - r[k] * a[:k][::-1]
        a[k] = r[k]
    return a


def _unpack(params, p, q):
    d = _D_MAX * math.tanh(params[0])
    phi = _pacf_to_coeffs(params[1 : 1 + p]) if p else np.empty(0)
    theta = -_pacf_to_coeffs(params[1 + p : 1 + p + q]) if q else np.empty(0)
    return d, phi, theta


def _filtered_design(x, regressors, d, phi, theta, trunc):
    """Innovation-filter the target and the regression columns.

    Because the fractional filter and the ARMA innovation recursion are both
    linear with zero initial state, the CSS residual is affine in (b0, b), so
    filtering the columns of [1, U] once per (d, phi, theta) lets least
    squares recover the regression part exactly.
    """
    n = x.size
    cols = [np.ones(n)]
    if regressors is not None:
        cols.extend(np.ascontiguousarray(c, dtype=np.float64) for c in regressors.T)
    e_y = arma_innovations(apply_frac_diff(x, d, trunc), phi, theta)
    e_cols = np.column_stack(
        [arma_innovations(apply_frac_diff(c, d, trunc), phi, theta) for c in cols]
    )
    return e_y, e_cols


def _css_profile(x, regressors, d, phi, theta, trunc):
    """Profile out (b0, b) and sigma^2; return (loglik, b_all, sigma2)."""
    n = x.size
    e_y, e_cols = _filtered_design(x, regressors, d, phi, theta, trunc)
    b_all, *_ = np.linalg.lstsq(e_cols, e_y, rcond=None)
    resid = e_y - e_cols @ b_all
    sigma2 = float(resid @ resid) / n
    if sigma2 <= 0 or not np.isfinite(sigma2):
        return -np.inf, b_all, sigma2
    loglik = -0.5 * n * (math.log(2.0 * math.pi * sigma2) + 1.0)
    return loglik, b_all, sigma2


@dataclass
class ArfimaModel:
    """A fitted ARFIMA(p, d, q) with optional regression terms."""

    p: int
    q: int
    d: float
    phi: np.ndarray
    theta: np.ndarray
    b0: float
    b: np.ndarray
    sigma2: float
    trunc: int
    loglik: float
    bic: float
    n: int
    converged: bool
    _se_cache: np.ndarray | None = field(default=None, repr=False)
    _fit_data: tuple | None = field(default=None, repr=False)

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    @property
    def n_params(self) -> int:
        # d, phi, theta, b0, regression coefficients, sigma^2
        return 1 + self.p + self.q + 1 + self.b.size + 1

    def unconditional_sd(self) -> float:
        """Marginal standard deviation of the core process, truncated MA form."""
        L = self.trunc
        psi_arma = np.zeros(L + 1)
        psi_arma[0] = 1.0
        th = np.zeros(L + 1)
        th[1 : 1 + self.q] = self.theta
        for j in range(1, L + 1):
            acc = th[j]
            for k in range(1, min(j, self.p) + 1):
                acc += self.phi[k - 1] * psi_arma[j - k]
            psi_arma[j] = acc
        psi = np.convolve(psi_arma, frac_diff_coeffs(-self.d, L + 1))[: L + 1]
        return math.sqrt(self.sigma2 * float(psi @ psi))

    def core(self, x, regressors=None) -> np.ndarray:
        """Remove the mean part: x - b0 - U b."""
        x = np.asarray(x, dtype=np.float64)
        out = x - self.b0
        if self.b.size:
            if regressors is None:
                raise ValueError("model has regression terms; regressors required")
            out = out - np.asarray(regressors, dtype=np.float64) @ self.b
        return out

    def forecast_one_step(self, history, regressors=None, regressors_next=None):
        """Conditional mean and sd of the next value given ``history``.

        Empty history returns the unconditional moments.  ``regressors`` must
        cover the history rows; ``regressors_next`` is the next row.
        """
        history = np.asarray(history, dtype=np.float64)
        mean_next = self.b0
        if self.b.size:
            if regressors_next is None:
                raise ValueError("model has regression terms; regressors_next required")
            mean_next += float(np.dot(regressors_next, self.b))
        if history.size == 0:
            return mean_next, self.unconditional_sd()
        core_hist = self.core(history, regressors)
        fc = ArfimaForecaster(self)
        for v in core_hist:
            fc.update(v)
        mu_core, sigma = fc.forecast_core()
        return mu_core + mean_next, sigma

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "q": self.q,
            "d": self.d,
            "phi": [float(v) for v in self.phi],
            "theta": [float(v) for v in self.theta],
            "b0": self.b0,
            "b": [float(v) for v in self.b],
            "sigma2": self.sigma2,
            "trunc": self.trunc,
            "loglik": self.loglik,
            "bic": self.bic,
            "n": self.n,
            "converged": bool(self.converged),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ArfimaModel":
        return cls(
            p=int(payload["p"]),
            q=int(payload["q"]),
            d=float(payload["d"]),
            phi=np.asarray(payload["phi"], dtype=np.float64),
            theta=np.asarray(payload["theta"], dtype=np.float64),
            b0=float(payload["b0"]),
            b=np.asarray(payload["b"], dtype=np.float64),
            sigma2=float(payload["sigma2"]),
            trunc=int(payload["trunc"]),
            loglik=float(payload["loglik"]),
            bic=float(payload["bic"]),
            n=int(payload["n"]),
            converged=bool(payload["converged"]),
        )

    def standard_errors(self) -> dict:
        """Model-based SEs from the numerical Hessian of the profile loglik.

        Returned keys: d, phi, theta, b0, b.  Cached after the first call.
        """
        if self._fit_data is None:
            raise ValueError("standard errors need the training data (refit)")
        if self._se_cache is None:
            self._se_cache = _profile_hessian_se(self)
        se = self._se_cache
        k = 1 + self.p + self.q
        return {
            "d": se[0],
            "phi": se[1 : 1 + self.p],
            "theta": se[1 + self.p : k],
            "b0": se[k],
            "b": se[k + 1 :],
        }


def _natural_negloglik(model: ArfimaModel, vec: np.ndarray) -> float:
    """-loglik at natural parameters (d, phi, theta, b0, b), sigma profiled."""
    x, regressors = model._fit_data
    k = 1 + model.p + model.q
    d = vec[0]
    phi = vec[1 : 1 + model.p]
    theta = vec[1 + model.p : k]
    b_all = vec[k:]
    n = x.size
    cols = [np.ones(n)]
    if regressors is not None:
        cols.extend(c for c in regressors.T)
    core = x - np.column_stack(cols) @ b_all
    e = arma_innovations(apply_frac_diff(core, d, model.trunc), phi, theta)
    sigma2 = float(e @ e) / n
    return 0.5 * n * (math.log(2.0 * math.pi * sigma2) + 1.0)


def _profile_hessian_se(model: ArfimaModel) -> np.ndarray:
    vec = np.concatenate(
        [[model.d], model.phi, model.theta, [model.b0], model.b]
    )
    m = vec.size
    h = 1e-4 * np.maximum(1.0, np.abs(vec))
    H = np.empty((m, m))
    f0 = _natural_negloglik(model, vec)
    for i in range(m):
        for j in range(i, m):
            vpp = vec.copy(); vpp[i] += h[i]; vpp[j] += h[j]
            vpm = vec.copy(); vpm[i] += h[i]; vpm[j] -= h[j]
            vmp = vec.copy(); vmp[i] -= h[i]; vmp[j] += h[j]
            vmm = vec.copy(); vmm[i] -= h[i]; vmm[j] -= h[j]
            if i == j:
                H[i, i] = (
                    _natural_negloglik(model, vec + np.eye(m)[i] * h[i])
                    - 2.0 * f0
                    + _natural_negloglik(model, vec - np.eye(m)[i] * h[i])
                ) / h[i] ** 2
            else:
                H[i, j] = H[j, i] = (
                    _natural_negloglik(model, vpp)
                    - _natural_negloglik(model, vpm)
                    - _natural_negloglik(model, vmp)
                    + _natural_negloglik(model, vmm)
                ) / (4.0 * h[i] * h[j])
    cov = np.linalg.pinv(H)
    diag = np.clip(np.diag(cov), 0.0, None)
    return np.sqrt(diag)


def fit_arfima(
    x,
    p: int = 0,
    q: int = 1,
    regressors=None,
    trunc: int | None = None,
    keep_data: bool = True,
) -> ArfimaModel:
    """Fit an ARFIMA(p, d, q) by conditional sum of squares.

    ``regressors`` is an (n, k) array of exogenous columns entering the mean.
    Two quasi-Newton starts (d = 0 and d = 0.2, ARMA at zero) guard against
    the flat-likelihood ridge between d and the ARMA terms; a short simplex
    polish from the better one handles the occasional early gradient stall.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    n = x.size
    if regressors is not None:
        regressors = np.ascontiguousarray(regressors, dtype=np.float64)
        if regressors.ndim == 1:
            regressors = regressors[:, None]
        if regressors.shape[0] != n:
            raise ValueError("regressors must have one row per observation")
    if n < 10 + 2 * (p + q):
        raise ValueError(f"series too short (n={n}) for ARFIMA({p},d,{q})")
    L = min(n, DEFAULT_TRUNC if trunc is None else int(trunc))

    def objective(params):
        d, phi, theta = _unpack(params, p, q)
        ll, _, _ = _css_profile(x, regressors, d, phi, theta, L)
        return -ll if np.isfinite(ll) else 1e12

    m = 1 + p + q
    starts = [np.zeros(m)]
    alt = np.zeros(m)
    alt[0] = math.atanh(0.2 / _D_MAX)
    starts.append(alt)
    best = None
    for s in starts:
        res = minimize(objective, s, method="L-BFGS-B")
        if best is None or res.fun < best.fun:
            best = res
    polish = minimize(
        objective,
        best.x,
        method="Nelder-Mead",
        options={"xatol": 1e-7, "fatol": 1e-10, "maxiter": 200 * m},
    )
    if polish.fun <= best.fun:
        best = polish
    d, phi, theta = _unpack(best.x, p, q)
    loglik, b_all, sigma2 = _css_profile(x, regressors, d, phi, theta, L)
    n_par = 1 + p + q + b_all.size + 1
    bic = -2.0 * loglik + n_par * math.log(n)
    return ArfimaModel(
        p=p,
        q=q,
        d=float(d),
        phi=np.asarray(phi, dtype=np.float64),
        theta=np.asarray(theta, dtype=np.float64),
        b0=float(b_all[0]),
        b=np.asarray(b_all[1:], dtype=np.float64),
        sigma2=float(sigma2),
        trunc=L,
        loglik=float(loglik),
        bic=float(bic),
        n=n,
        converged=bool(best.success),
        _fit_data=(x, regressors) if keep_data else None,
    )


def select_order(x, pmax: int = 3, qmax: int = 3, regressors=None, trunc=None):
    """BIC order selection over the (p, q) grid.

    Orders are scanned by ascending complexity and a candidate replaces the
    incumbent only on a strict BIC improvement, so exact ties go to the model
    with fewer parameters.
    """
    grid = sorted(
        ((p, q) for p in range(pmax + 1) for q in range(qmax + 1)),
        key=lambda t: (t[0] + t[1], t[0], t[1]),
    )
    best = None
    for p, q in grid:
        model = fit_arfima(x, p=p, q=q, regressors=regressors, trunc=trunc)
        if best is None or model.bic < best.bic - 1e-9:
            best = model
    return best


def simulate_arfima(
    n: int,
    d: float,
    phi=(),
    theta=(),
    sigma: float = 1.0,
    rng=None,
    burn: int = 2000,
):
    """Simulate a zero-mean ARFIMA(p, d, q) path.

    Returns (x, z): the series and the innovations that generated it (post
    burn-in), the latter being what an exact-oracle PIT needs.  The
    fractional integration uses the full simulated length, not the fitting
    truncation.
    """
    rng = np.random.default_rng(rng)
    phi = np.asarray(phi, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    z = rng.normal(0.0, sigma, n + burn)
    v = lfilter(np.concatenate([[1.0], theta]), np.concatenate([[1.0], -phi]), z)
    x = apply_frac_diff(v, -d, trunc=n + burn)
    return x[burn:], z[burn:]


class ArfimaForecaster:
    """Event-by-event one-step forecaster sharing the CSS conventions.

    Feed observed core values (already mean-adjusted: y - b0 - u b) with
    :meth:`update`; :meth:`forecast_core` returns the conditional mean of the
    next core value and the innovation sd.  History before the first update
    is treated as zero, matching the fitting recursion, so early forecasts
    carry the same startup transient the CSS likelihood does.
    """

    def __init__(self, model: ArfimaModel):
        self.model = model
        L = model.trunc
        self._pi = frac_diff_coeffs(model.d, L + 1)
        self._pi_tail_rev = self._pi[1:][::-1].copy()  # pi_L .. pi_1
        self._core = []
        self._w = []
        self._e = []
        self._pending_tail = 0.0
        self._pending_wpred = 0.0
        self._have_pending = False

    def _tail_sum(self) -> float:
        i = len(self._core)
        L = self._pi.size - 1
        k = min(i, L)
        if k == 0:
            return 0.0
        seg = np.asarray(self._core[i - k : i])
        return float(np.dot(self._pi_tail_rev[L - k :], seg))

    def _w_prediction(self) -> float:
        m = self.model
        acc = 0.0
        for j in range(1, m.p + 1):
            if len(self._w) >= j:
                acc += m.phi[j - 1] * self._w[-j]
        for j in range(1, m.q + 1):
            if len(self._e) >= j:
                acc += m.theta[j - 1] * self._e[-j]
        return acc

    def forecast_core(self):
        """(conditional mean of next core value, innovation sd)."""
        if not self._core:
            return 0.0, self.model.unconditional_sd()
        self._pending_tail = self._tail_sum()
        self._pending_wpred = self._w_prediction()
        self._have_pending = True
        return self._pending_wpred - self._pending_tail, self.model.sigma

    def update(self, core_value: float):
        """Absorb the next observed core value."""
        if not self._have_pending:
            self._pending_tail = self._tail_sum()
            self._pending_wpred = self._w_prediction()
        w = core_value + self._pending_tail
        self._e.append(w - self._pending_wpred)
        self._w.append(w)
        self._core.append(float(core_value))
        self._have_pending = False
        if len(self._e) > max(self.model.q, 1) + 1:
            del self._e[0]
        if len(self._w) > max(self.model.p, 1) + 1:
            del self._w[0]
