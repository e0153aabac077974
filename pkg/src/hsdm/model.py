"""The hierarchical duration model: conditional KDE + intraday trend + ARFIMA.

Fitting runs bottom-up: smooth the integer durations, fit the conditional
KDE, map its generalized residuals through the normal quantile function,
fit the intraday trend quadratics, and fit an ARFIMA with optional
buy-pressure regressors on the detrended series.  Trend and ARFIMA are then
alternated a few rounds against the joint quasi-likelihood.

Prediction walks a held-out day event by event.  The KDE terms only depend
on the smoothed durations, so they are computed in one vectorized pass; the
sequential loop is left with the trend state and the ARFIMA forecaster.
"""

import json
import math
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import ndtr, ndtri

from .arfima import ArfimaForecaster, ArfimaModel, fit_arfima, select_order
from .cond_kde import CondDensityModel, fit_cond_kde
from .data import DaySeries
from .smoothing import SmoothedSeries, smooth_durations, t_from_y, y_from_t
from .trend import (
    VAR_FLOOR,
    OnlineTrendState,
    PmTrendState,
    TrendParams,
    _neg_joint_objective,
    detrend,
    joint_quasi_ml_fit,
    quasi_ml_fit,
)

__all__ = [
    "HsdmModel",
    "PredictionResult",
    "PredictionRecord",
    "PredictiveContext",
    "SimulatedFromModel",
    "fit_hsdm",
    "hazard",
]

RESID_CLIP = 1e-10
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

_IDENTITY_MEAN = (0.0, 0.0, 0.0)
_IDENTITY_VAR = (0.0, 0.0, 1.0)


def _log_norm_pdf(z):
    return -0.5 * np.square(z) - LOG_SQRT_2PI


def _clip_residuals(c):
    """Clip PIT values away from {0, 1} and count how many needed it."""
    c = np.asarray(c, dtype=np.float64)
    n_clipped = int(np.sum((c < RESID_CLIP) | (c > 1.0 - RESID_CLIP)))
    return np.clip(c, RESID_CLIP, 1.0 - RESID_CLIP), n_clipped


def _lagged_abs_bpi(series: DaySeries, first_event: int, n_rows: int, n_lags: int):
    """|BPI| regressor matrix, one row per event, zero-padded before the day.

    Row k covers event ``first_event + k``; lag ``l`` picks the mark of record
    ``event - l`` (the trade *before* the duration started, for l=1).
    """
    if n_lags <= 0:
        return None
    ab = np.abs(series.bpi)
    out = np.zeros((n_rows, n_lags))
    for lag in range(1, n_lags + 1):
        lo = first_event - lag
        if lo >= 0:
            out[:, lag - 1] = ab[lo : lo + n_rows]
        else:
            out[-lo:, lag - 1] = ab[0 : n_rows + lo]
    return out


def _insample_moments(model: ArfimaModel, x, regressors=None):
    """One-step-ahead conditional moments of each x_i given its own past."""
    x = np.asarray(x, dtype=np.float64)
    core = model.core(x, regressors)
    mean_part = x - core
    fc = ArfimaForecaster(model)
    mu = np.empty(core.size)
    sd = np.empty(core.size)
    for i, v in enumerate(core):
        mu[i], sd[i] = fc.forecast_core()
        fc.update(float(v))
    return mu + mean_part, sd


def _joint_loglik(trend: TrendParams, times_norm, pT, mu, sigma) -> float:
    vec = np.concatenate([trend.mean_coef, trend.var_coef])
    neg = _neg_joint_objective(vec, np.asarray(times_norm), np.asarray(pT), mu, sigma)
    return -neg - pT.size * LOG_SQRT_2PI


@dataclass(frozen=True)
class PredictiveContext:
    """Everything the one-event-ahead predictive law depends on.

    ``t_prev`` is the previous smoothed log-duration (working scale),
    ``tau_mean``/``tau_sd`` the trend evaluated at the previous trade's
    normalized clock time, and ``mu``/``sigma`` the conditional moments of
    the detrended latent value.
    """

    t_prev: float
    tau_mean: float
    tau_sd: float
    mu: float = 0.0
    sigma: float = 1.0


@dataclass(frozen=True)
class PredictionRecord:
    index: int
    residual: float
    log_density: float
    mu: float
    sigma: float
    tau_mean: float
    tau_sd: float


@dataclass
class PredictionResult:
    """Per-event predictive output for one held-out day.

    Arrays cover every event of the day; totals and the ``residuals`` /
    ``log_density`` views drop the first ``burn_in`` events so that models
    sharing a burn-in stay comparable event by event.
    """

    residuals_all: np.ndarray
    log_density_all: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    tau_mean: np.ndarray
    tau_sd: np.ndarray
    p_transformed: np.ndarray
    p_detrended: np.ndarray
    t_values: np.ndarray
    times_norm_prev: np.ndarray
    burn_in: int
    n_clipped: int
    update_seconds: float
    wall_seconds: float
    smoothing_seed: int
    label: str = "hsdm"

    @property
    def n_events(self) -> int:
        return int(self.residuals_all.size)

    @property
    def kept(self) -> np.ndarray:
        return np.arange(self.n_events) >= self.burn_in

    @property
    def residuals(self) -> np.ndarray:
        return self.residuals_all[self.burn_in :]

    @property
    def log_density(self) -> np.ndarray:
        return self.log_density_all[self.burn_in :]

    @property
    def total_loglik(self) -> float:
        return float(np.sum(self.log_density))

    @property
    def mean_loglik(self) -> float:
        kept = self.log_density
        return float(kept.mean()) if kept.size else float("nan")

    def records(self) -> list[PredictionRecord]:
        return [
            PredictionRecord(
                index=i,
                residual=float(self.residuals_all[i]),
                log_density=float(self.log_density_all[i]),
                mu=float(self.mu[i]),
                sigma=float(self.sigma[i]),
                tau_mean=float(self.tau_mean[i]),
                tau_sd=float(self.tau_sd[i]),
            )
            for i in range(self.n_events)
        ]


@dataclass
class SimulatedFromModel:
    """A day drawn from a fitted model, with its continuous latent path."""

    series: DaySeries
    smoothed: SmoothedSeries
    innovations: np.ndarray


@dataclass
class HsdmModel:
    """A fitted hierarchical duration model.

    ``include_trend=False`` pins the trend at the identity (tau_mean = 0,
    tau_sd = 1) and disables within-day updates; ``include_arfima=False``
    treats the detrended series as white noise.  Both off reduces the model
    to the conditional KDE alone.
    """

    cond_kde: CondDensityModel
    trend: TrendParams
    arfima: ArfimaModel | None
    lam: float
    smooth_seed: int
    last_train_y: float
    bpi_lags: int = 0
    include_trend: bool = True
    include_arfima: bool = True
    fit_info: dict = field(default_factory=dict)

    # -- prediction ----------------------------------------------------------

    def predict_day(
        self,
        series: DaySeries,
        *,
        seed=None,
        smoothed: SmoothedSeries | None = None,
        update: str = "lse",
        lam=None,
        burn_in: int = 100,
        label=None,
    ) -> PredictionResult:
        """Walk a held-out day one event at a time.

        Event i is predicted with the trend state and ARFIMA history through
        event i-1; afterwards the realized value updates both.  ``update``
        selects the trend tracker ("lse" or "pm"); ``lam`` defaults to the
        value the model was fitted with.  The first ``burn_in`` events are
        predicted but excluded from totals and residual views.

        Clock times are normalized with the training day's anchors, so a
        held-out day aligns with the trend by time of day regardless of how
        its own span was declared.
        """
        tic = time.perf_counter()
        if update not in ("lse", "pm"):
            raise ValueError("update must be 'lse' or 'pm'")
        if smoothed is None:
            if seed is None:
                raise ValueError("either a smoothing seed or a smoothed series is required")
            smoothed = smooth_durations(series.durations, seed)
        m = len(smoothed)
        if m != series.n_events:
            raise ValueError("smoothed series does not match the day's event count")
        lam = self.lam if lam is None else float(lam)

        y = smoothed.y
        t_vals = smoothed.t
        y_prev = np.concatenate([[self.last_train_y], y[:-1]])

        # KDE pass: generalized residuals and conditional density, batched.
        c_raw, pdf_y = self.cond_kde.cdf_and_density_y(y, y_prev)
        c, n_clipped = _clip_residuals(c_raw)
        with np.errstate(divide="ignore"):
            # density on the working scale: g(y) * dy/dt, dy/dt = expit(t)
            log_f_t = np.log(np.maximum(pdf_y, 1e-300)) + np.log1p(-np.exp(-y))
        pT = ndtri(c)

        span_start = self.trend.day_start
        span = max(self.trend.day_end - span_start, 1)
        tn = (series.clock_times.astype(np.float64) - span_start) / span
        u_prev = np.clip(tn[:-1], 0.0, 1.0)

        U = _lagged_abs_bpi(series, 1, m, self.bpi_lags if self.arfima is not None else 0)
        if self.arfima is not None and self.arfima.b.size:
            if U is None or U.shape[1] != self.arfima.b.size:
                raise ValueError("model has BPI terms; day must supply matching lags")
            mean_part = self.arfima.b0 + U @ self.arfima.b
        elif self.arfima is not None:
            mean_part = np.full(m, self.arfima.b0)
        else:
            mean_part = np.zeros(m)

        state = None
        if self.include_trend:
            cls = OnlineTrendState if update == "lse" else PmTrendState
            state = cls(self.trend, lam=lam)
        fc = ArfimaForecaster(self.arfima) if self.arfima is not None else None

        resid = np.empty(m)
        mu_a = np.empty(m)
        sd_a = np.empty(m)
        tau_m = np.empty(m)
        tau_s = np.empty(m)
        p_hat = np.empty(m)
        for i in range(m):
            params = state.params if state is not None else self.trend
            tm = float(params.tau_mean(u_prev[i]))
            ts = math.sqrt(float(params.tau_var(u_prev[i], floor=VAR_FLOOR)))
            ph = (pT[i] - tm) / ts
            if fc is not None:
                mu_core, sd_i = fc.forecast_core()
                mu_i = mu_core + mean_part[i]
            else:
                mu_i, sd_i = 0.0, 1.0
            resid[i] = ndtr((ph - mu_i) / sd_i)
            mu_a[i], sd_a[i] = mu_i, sd_i
            tau_m[i], tau_s[i] = tm, ts
            p_hat[i] = ph
            if fc is not None:
                fc.update(ph - mean_part[i])
            if state is not None:
                state.update(u_prev[i], pT[i], mu=mu_i, sigma=sd_i)

        log_density = (
            log_f_t
            - np.log(tau_s)
            + _log_norm_pdf((p_hat - mu_a) / sd_a)
            - np.log(sd_a)
            - _log_norm_pdf(pT)
        )
        return PredictionResult(
            residuals_all=resid,
            log_density_all=log_density,
            mu=mu_a,
            sigma=sd_a,
            tau_mean=tau_m,
            tau_sd=tau_s,
            p_transformed=pT,
            p_detrended=p_hat,
            t_values=t_vals,
            times_norm_prev=u_prev,
            burn_in=int(burn_in),
            n_clipped=n_clipped,
            update_seconds=state.seconds if state is not None else 0.0,
            wall_seconds=time.perf_counter() - tic,
            smoothing_seed=int(smoothed.seed),
            label=label or self.label(),
        )

    def label(self) -> str:
        if self.include_trend and self.include_arfima:
            return "hsdm"
        if self.include_trend:
            return "hsdm-no-arfima"
        if self.include_arfima:
            return "hsdm-no-trend"
        return "hsdm-kde-only"

    # -- one-event-ahead laws --------------------------------------------------

    def context_at(self, result: PredictionResult, i: int) -> PredictiveContext:
        """Predictive context for event ``i`` of a walked day."""
        t_prev = result.t_values[i - 1] if i > 0 else t_from_y(self.last_train_y)
        return PredictiveContext(
            t_prev=float(t_prev),
            tau_mean=float(result.tau_mean[i]),
            tau_sd=float(result.tau_sd[i]),
            mu=float(result.mu[i]),
            sigma=float(result.sigma[i]),
        )

    def predictive_cdf(self, t, ctx: PredictiveContext):
        """CDF of the next smoothed log-duration given the context."""
        c, _ = _clip_residuals(self.cond_kde.cdf(t, ctx.t_prev))
        z = ((ndtri(c) - ctx.tau_mean) / ctx.tau_sd - ctx.mu) / ctx.sigma
        out = ndtr(z)
        return out if np.ndim(t) else float(out)

    def predictive_density(self, t, ctx: PredictiveContext):
        """Density of the next smoothed log-duration given the context."""
        t = np.asarray(t, dtype=np.float64)
        f_hat = np.atleast_1d(self.cond_kde.density(t, ctx.t_prev))
        c, _ = _clip_residuals(self.cond_kde.cdf(t, ctx.t_prev))
        pT = ndtri(c)
        ph = (pT - ctx.tau_mean) / ctx.tau_sd
        log_f = (
            np.log(np.maximum(f_hat, 1e-300))
            - math.log(ctx.tau_sd)
            + _log_norm_pdf((ph - ctx.mu) / ctx.sigma)
            - math.log(ctx.sigma)
            - _log_norm_pdf(pT)
        )
        out = np.exp(log_f)
        return out if t.ndim else float(out)

    def hazard(self, t, ctx: PredictiveContext):
        return hazard(self, t, ctx)

    # -- simulation from the fitted model ---------------------------------------

    def simulate_day(self, n_events: int, seed) -> SimulatedFromModel:
        """Draw a synthetic day from the fitted model itself.

        The latent series uses the same zero-presample startup as the
        forecaster, so walking the result with a frozen trend reproduces
        uniform residuals exactly (after the first event).  Requires a model
        without BPI terms.
        """
        if self.arfima is not None and self.arfima.b.size:
            raise ValueError("simulate_day does not support BPI regression terms")
        rng = np.random.default_rng(seed)
        day_start, day_end = self.trend.day_start, self.trend.day_end
        span = max(day_end - day_start, 1)
        b0 = self.arfima.b0 if self.arfima is not None else 0.0
        fc = ArfimaForecaster(self.arfima) if self.arfima is not None else None

        t_prev = float(t_from_y(self.last_train_y))
        clock = int(day_start)
        times = [clock]
        t_list = []
        z_list = []
        for _ in range(n_events):
            u_prev = (clock - day_start) / span
            if self.include_trend:
                tm = float(self.trend.tau_mean(u_prev))
                ts = math.sqrt(float(self.trend.tau_var(u_prev, floor=VAR_FLOOR)))
            else:
                tm, ts = 0.0, 1.0
            if fc is not None:
                mu_core, _ = fc.forecast_core()
                z = rng.normal(0.0, self.arfima.sigma)
                core = mu_core + z
                ph = core + b0
            else:
                z = rng.normal()
                ph = z
                core = None
            pT = ph * ts + tm
            prob = float(np.clip(ndtr(pT), RESID_CLIP, 1.0 - RESID_CLIP))
            t_i = min(self.cond_kde.inverse_cdf(prob, t_prev), 25.0)
            x = max(1, math.ceil(math.exp(t_i)))
            clock += x
            if clock > day_end:
                raise ValueError(
                    "simulated day overran the declared span; reduce n_events"
                )
            times.append(clock)
            t_list.append(t_i)
            z_list.append(z)
            if fc is not None:
                fc.update(core)
            t_prev = t_i

        t_arr = np.asarray(t_list)
        x_arr = np.diff(np.asarray(times, dtype=np.int64))
        u = np.clip(x_arr - np.exp(t_arr), 1e-12, 1.0 - 1e-12)
        series = DaySeries(
            date_label="simulated",
            clock_times=np.asarray(times, dtype=np.int64),
            bpi=np.zeros(len(times)),
            day_start=day_start,
            day_end=day_end,
        )
        smoothed = SmoothedSeries(y=y_from_t(t_arr), u=u, seed=-1)
        return SimulatedFromModel(
            series=series, smoothed=smoothed, innovations=np.asarray(z_list)
        )

    # -- persistence -------------------------------------------------------------

    def save(self, path):
        """Write the model bundle to a directory (created if needed)."""
        root = Path(path)
        root.mkdir(parents=True, exist_ok=True)
        manifest = {
            "format": 1,
            "lam": self.lam,
            "smooth_seed": self.smooth_seed,
            "last_train_y": self.last_train_y,
            "bpi_lags": self.bpi_lags,
            "include_trend": self.include_trend,
            "include_arfima": self.include_arfima,
            "fit_info": _json_safe(self.fit_info),
        }
        (root / "manifest.json").write_text(json.dumps(manifest, indent=1))
        self.cond_kde.save(root / "cond_kde.json")
        (root / "trend.json").write_text(json.dumps(self.trend.to_dict()))
        arf = None if self.arfima is None else self.arfima.to_dict()
        (root / "arfima.json").write_text(json.dumps(arf))

    @classmethod
    def load(cls, path) -> "HsdmModel":
        root = Path(path)
        manifest = json.loads((root / "manifest.json").read_text())
        if manifest.get("format") != 1:
            raise ValueError(f"unsupported bundle format {manifest.get('format')!r}")
        arf_payload = json.loads((root / "arfima.json").read_text())
        return cls(
            cond_kde=CondDensityModel.load(root / "cond_kde.json"),
            trend=TrendParams.from_dict(json.loads((root / "trend.json").read_text())),
            arfima=None if arf_payload is None else ArfimaModel.from_dict(arf_payload),
            lam=float(manifest["lam"]),
            smooth_seed=int(manifest["smooth_seed"]),
            last_train_y=float(manifest["last_train_y"]),
            bpi_lags=int(manifest["bpi_lags"]),
            include_trend=bool(manifest["include_trend"]),
            include_arfima=bool(manifest["include_arfima"]),
            fit_info=manifest.get("fit_info", {}),
        )


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


def hazard(model, t, ctx: PredictiveContext):
    """Predictive hazard on the duration scale, evaluated at log-duration t.

    h(x) = f(x) / (1 - F(x)) with x = exp(t); in log-duration terms that is
    f_T(t) e^{-t} / (1 - F_T(t)).  Works with anything exposing
    ``predictive_cdf`` and ``predictive_density``.  Raises when the survival
    probability underflows, rather than dividing by a rounded zero.
    """
    t = np.asarray(t, dtype=np.float64)
    F = np.atleast_1d(model.predictive_cdf(t, ctx))
    if np.any(F >= 1.0 - 1e-12):
        raise ValueError("predictive CDF is numerically 1; hazard undefined there")
    f = np.atleast_1d(model.predictive_density(t, ctx))
    out = f * np.exp(-t) / (1.0 - F)
    return out if t.ndim else float(out)


def fit_hsdm(
    series: DaySeries,
    *,
    seed,
    lam: float = 10.0,
    pmax: int = 3,
    qmax: int = 3,
    bpi_lags: int = 0,
    include_trend: bool = True,
    include_arfima: bool = True,
    order=None,
    joint_rounds: int = 20,
    joint_tol: float = 1e-4,
    cv_max_points: int = 800,
    min_events: int = 500,
) -> HsdmModel:
    """Fit the full hierarchy to one training day.

    ``order=(p, q)`` skips the BIC order search.  ``joint_rounds`` bounds the
    trend/ARFIMA alternation; it stops early once no parameter moves more
    than ``joint_tol`` or the joint objective gains less than 0.01.  The
    returned model keeps the CV bandwidths, selected orders, and alternation
    history in ``fit_info``.

    Below a few hundred events the conditional KDE is unreliable, so days
    shorter than ``min_events`` are rejected; lower the bound explicitly for
    small synthetic studies.
    """
    tic = time.perf_counter()
    x = series.durations
    n = x.size
    if n < max(min_events, 3):
        raise ValueError(
            f"day has {n} events but at least {max(min_events, 3)} are required; "
            "pass min_events to override for small studies"
        )
    smoothed = smooth_durations(x, seed)
    y = smoothed.y

    kde = fit_cond_kde(y[:-1], y[1:], cv_max_points=cv_max_points)
    c_raw = kde.generalized_residuals(y)
    c, n_clipped = _clip_residuals(c_raw)
    pT = ndtri(c)

    tn = series.normalized_times()
    u_prev = np.clip(tn[1:-1], 0.0, 1.0)

    info: dict = {
        "n_events": int(n),
        "n_clipped_train": n_clipped,
        "h_cond": kde.h_cond,
        "h_y": kde.h_y,
    }

    if include_trend:
        tf = quasi_ml_fit(pT, u_prev)
        trend = TrendParams(
            tf.params.mean_coef,
            tf.params.var_coef,
            day_start=series.day_start,
            day_end=series.day_end,
        )
        info["trend_objective"] = tf.objective
        info["trend_converged"] = tf.converged
    else:
        trend = TrendParams(
            _IDENTITY_MEAN, _IDENTITY_VAR,
            day_start=series.day_start, day_end=series.day_end,
        )

    p_hat = detrend(pT, u_prev, trend)

    arf = None
    if include_arfima:
        U = _lagged_abs_bpi(series, 2, n - 1, bpi_lags)
        if order is not None:
            p_sel, q_sel = (int(v) for v in order)
            arf = fit_arfima(p_hat, p_sel, q_sel, regressors=U)
        else:
            arf = select_order(p_hat, pmax=pmax, qmax=qmax, regressors=U)
            p_sel, q_sel = arf.p, arf.q
        info["order"] = [p_sel, q_sel]

        if include_trend:
            mu_i, sd_i = _insample_moments(arf, p_hat, U)
            best_obj = _joint_loglik(trend, u_prev, pT, mu_i, sd_i)
            best = (trend, arf)
            path = [best_obj]
            rounds_used = 0
            converged = False
            for _ in range(joint_rounds):
                rounds_used += 1
                tf = joint_quasi_ml_fit(pT, u_prev, mu_i, sd_i, start_params=trend)
                new_trend = TrendParams(
                    tf.params.mean_coef,
                    tf.params.var_coef,
                    day_start=series.day_start,
                    day_end=series.day_end,
                )
                new_p_hat = detrend(pT, u_prev, new_trend)
                new_arf = fit_arfima(new_p_hat, p_sel, q_sel, regressors=U)
                delta = _param_delta(trend, arf, new_trend, new_arf)
                trend, arf, p_hat = new_trend, new_arf, new_p_hat
                mu_i, sd_i = _insample_moments(arf, p_hat, U)
                obj = _joint_loglik(trend, u_prev, pT, mu_i, sd_i)
                path.append(obj)
                gain = obj - best_obj
                if obj > best_obj:
                    best_obj, best = obj, (trend, arf)
                if delta < joint_tol or gain < 0.01:
                    converged = delta < joint_tol
                    break
            else:
                warnings.warn(
                    "trend/ARFIMA alternation used all "
                    f"{joint_rounds} rounds without settling; "
                    "keeping the best round",
                    RuntimeWarning,
                    stacklevel=2,
                )
            trend, arf = best
            info["joint_rounds"] = rounds_used
            info["joint_converged"] = converged
            info["joint_objective_path"] = path
            info["joint_loglik"] = best_obj
        else:
            mu_i, sd_i = _insample_moments(arf, p_hat, U)
            info["joint_loglik"] = _joint_loglik(trend, u_prev, pT, mu_i, sd_i)
        info["arfima_bic"] = arf.bic
        info["arfima_d"] = arf.d
    else:
        info["joint_loglik"] = _joint_loglik(
            trend, u_prev, pT, np.zeros(pT.size), np.ones(pT.size)
        )

    info["fit_seconds"] = time.perf_counter() - tic
    return HsdmModel(
        cond_kde=kde,
        trend=trend,
        arfima=arf,
        lam=float(lam),
        smooth_seed=int(seed),
        last_train_y=float(y[-1]),
        bpi_lags=int(bpi_lags) if include_arfima else 0,
        include_trend=include_trend,
        include_arfima=include_arfima,
        fit_info=info,
    )


def _param_delta(trend_a, arf_a, trend_b, arf_b) -> float:
    """Largest absolute move of any parameter between two alternation rounds."""
    pieces = [
        np.abs(trend_a.mean_coef - trend_b.mean_coef).max(),
        np.abs(trend_a.var_coef - trend_b.var_coef).max(),
        abs(arf_a.d - arf_b.d),
        abs(arf_a.b0 - arf_b.b0),
    ]
    if arf_a.phi.size:
        pieces.append(np.abs(arf_a.phi - arf_b.phi).max())
    if arf_a.theta.size:
        pieces.append(np.abs(arf_a.theta - arf_b.theta).max())
    if arf_a.b.size:
        pieces.append(np.abs(arf_a.b - arf_b.b).max())
    return float(max(pieces))
