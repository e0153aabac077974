"""Synthetic duration streams with known ground truth.

Generation follows the model hierarchy exactly: a latent ARFIMA path p_i is
scaled through the intraday trend, pT_i = p_i tau_sd(t) + tau_mean(t); the
log-duration is drawn through a conditional two-component normal mixture on
the log scale, T_i = Q_mix(Phi(pT_i) | T_{i-1}); the observed integer
duration is X_i = ceil(exp(T_i)).  Latent traces are kept so the exact PIT
residuals under the true law are available as an oracle: because every map
in the chain is strictly increasing, the true residual of event i reduces to
Phi(z_i / sigma) with z_i the innovation that generated it.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import lfilter
from scipy.special import expit, ndtr

from .data import DaySeries
from .arfima import frac_diff_coeffs, simulate_arfima

__all__ = [
    "MixtureLaw",
    "ScenarioSpec",
    "SimulatedDay",
    "simulate",
    "oracle_residuals",
    "bimodal_scenario",
    "unit_marginal_sigma",
]


@dataclass(frozen=True)
class MixtureLaw:
    """Conditional two-component normal mixture on the log-duration scale.

    Component locations are affine in the previous log-duration and the
    weight on the first (short) component follows a logistic in it, which is
    what produces the bimodal, self-exciting shape of the conditional
    densities.
    """

    w0: float
    w1: float
    m1_0: float
    m1_1: float
    s1: float
    m2_0: float
    m2_1: float
    s2: float
    t_ref: float = 8.0

    def weight(self, t_prev):
        return expit(self.w0 + self.w1 * (np.asarray(t_prev) - self.t_ref))

    def locations(self, t_prev):
        dt = np.asarray(t_prev) - self.t_ref
        return self.m1_0 + self.m1_1 * dt, self.m2_0 + self.m2_1 * dt

    def cdf(self, t, t_prev):
        w = self.weight(t_prev)
        m1, m2 = self.locations(t_prev)
        t = np.asarray(t)
        out = w * ndtr((t - m1) / self.s1) + (1.0 - w) * ndtr((t - m2) / self.s2)
        return out if out.ndim else float(out)

    def density(self, t, t_prev):
        w = self.weight(t_prev)
        m1, m2 = self.locations(t_prev)
        t = np.asarray(t)
        z1 = (t - m1) / self.s1
        z2 = (t - m2) / self.s2
        out = w * np.exp(-0.5 * z1**2) / (self.s1 * math.sqrt(2 * math.pi)) + (
            1.0 - w
        ) * np.exp(-0.5 * z2**2) / (self.s2 * math.sqrt(2 * math.pi))
        return out if out.ndim else float(out)

    def quantile(self, p, t_prev):
        """Inverse conditional CDF by bisection (absolute tolerance 1e-12)."""
        m1, m2 = self.locations(t_prev)
        s = max(self.s1, self.s2)
        lo = min(m1, m2) - 12.0 * s
        hi = max(m1, m2) + 12.0 * s
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.cdf(mid, t_prev) < p:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-12:
                break
        return 0.5 * (lo + hi)


@dataclass(frozen=True)
class ScenarioSpec:
    """Everything that defines a synthetic market: latent law, trend, mixture.

    ARFIMA coefficients use the package's storage convention (MA side
    1 + theta B).  ``trend_jitter`` perturbs the trend coefficients
    day-to-day; ``bpi_b`` are the regression weights on lagged absolute BPI
    entering the latent mean (empty tuple for none).
    """

    name: str
    n_events: int
    d: float
    phi: tuple = ()
    theta: tuple = ()
    sigma: float = 1.0
    trend_mean: tuple = (0.0, 0.0, 0.0)
    trend_var: tuple = (0.0, 0.0, 1.0)
    mixture: MixtureLaw = field(
        default_factory=lambda: MixtureLaw(0.4, -0.35, 6.3, 0.15, 0.65, 9.2, 0.25, 0.85)
    )
    t_init: float = 8.0
    day_start: int = 34_200_000
    day_end: int = 56_700_000
    bpi_rho: float = 0.4
    bpi_sd: float = 1.0
    bpi_b0: float = 0.0
    bpi_b: tuple = ()
    trend_jitter: float = 0.0

    def to_dict(self) -> dict:
        mix = self.mixture
        return {
            "name": self.name,
            "n_events": self.n_events,
            "d": self.d,
            "phi": list(self.phi),
            "theta": list(self.theta),
            "sigma": self.sigma,
            "trend_mean": list(self.trend_mean),
            "trend_var": list(self.trend_var),
            "mixture": [mix.w0, mix.w1, mix.m1_0, mix.m1_1, mix.s1,
                        mix.m2_0, mix.m2_1, mix.s2, mix.t_ref],
            "t_init": self.t_init,
            "day_start": self.day_start,
            "day_end": self.day_end,
            "bpi_rho": self.bpi_rho,
            "bpi_sd": self.bpi_sd,
            "bpi_b0": self.bpi_b0,
            "bpi_b": list(self.bpi_b),
            "trend_jitter": self.trend_jitter,
        }

    @classmethod
    def from_dict(cls, d) -> "ScenarioSpec":
        d = dict(d)
        d["mixture"] = MixtureLaw(*d["mixture"])
        for key in ("phi", "theta", "trend_mean", "trend_var", "bpi_b"):
            d[key] = tuple(d[key])
        return cls(**d)


@dataclass
class SimulatedDay:
    """One generated day plus the latent traces that make oracles exact."""

    series: DaySeries
    spec: ScenarioSpec
    trend_mean: np.ndarray
    trend_var: np.ndarray
    latent_p: np.ndarray
    latent_pT: np.ndarray
    latent_T: np.ndarray
    innovations: np.ndarray
    regressors: np.ndarray | None
    n_dropped: int = 0


def unit_marginal_sigma(d, phi=(), theta=(), n_terms=5000) -> float:
    """Innovation sd that gives the ARFIMA core a marginal variance of one."""
    phi = np.asarray(phi, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    p, q = phi.size, theta.size
    psi_arma = np.zeros(n_terms)
    psi_arma[0] = 1.0
    th = np.zeros(n_terms)
    th[1 : 1 + q] = theta
    for j in range(1, n_terms):
        acc = th[j]
        for k in range(1, min(j, p) + 1):
            acc += phi[k - 1] * psi_arma[j - k]
        psi_arma[j] = acc
    psi = np.convolve(psi_arma, frac_diff_coeffs(-d, n_terms))[:n_terms]
    return 1.0 / math.sqrt(float(psi @ psi))


def _jittered_trend(spec: ScenarioSpec, rng) -> tuple[np.ndarray, np.ndarray]:
    mean_c = np.asarray(spec.trend_mean, dtype=np.float64)
    var_c = np.asarray(spec.trend_var, dtype=np.float64)
    if spec.trend_jitter <= 0:
        return mean_c, var_c
    for _ in range(100):
        mc = mean_c + rng.normal(0.0, spec.trend_jitter, 3)
        vc = var_c + rng.normal(0.0, spec.trend_jitter, 3)
        grid = np.linspace(0.0, 1.0, 21)
        if np.polyval(vc, grid).min() > 0.05:
            return mc, vc
    return mean_c, var_c


def simulate(spec: ScenarioSpec, n_days: int = 1, seed: int = 0) -> list[SimulatedDay]:
    """Generate ``n_days`` independent days under the scenario."""
    children = np.random.SeedSequence(seed).spawn(n_days)
    return [_simulate_day(spec, np.random.default_rng(c), k) for k, c in enumerate(children)]


def _simulate_day(spec: ScenarioSpec, rng, day_index: int) -> SimulatedDay:
    n = spec.n_events
    core, z = simulate_arfima(
        n, spec.d, spec.phi, spec.theta, sigma=spec.sigma, rng=rng
    )
    n_lags = len(spec.bpi_b)
    # marks for records 0..n plus enough pre-day history for the lags
    innov_sd = spec.bpi_sd * math.sqrt(max(1.0 - spec.bpi_rho**2, 1e-12))
    raw = rng.normal(0.0, innov_sd, n + 1 + n_lags + 25)
    raw[0] = rng.normal(0.0, spec.bpi_sd)
    marks_ext = lfilter([1.0], [1.0, -spec.bpi_rho], raw)[25:]
    marks = marks_ext[n_lags:]  # aligned with records 0..n
    p = core.copy()
    regressors = None
    if n_lags:
        # event k (record k+1) regresses on |marks| at records k+1-lag,
        # i.e. marks_ext[n_lags+1-lag+k]
        regressors = np.column_stack(
            [
                np.abs(marks_ext[n_lags + 1 - lag : n_lags + 1 - lag + n])
                for lag in range(1, n_lags + 1)
            ]
        )
        p = p + spec.bpi_b0 + regressors @ np.asarray(spec.bpi_b)
    mean_c, var_c = _jittered_trend(spec, rng)
    span = spec.day_end - spec.day_start
    clock = np.empty(n + 1, dtype=np.int64)
    clock[0] = spec.day_start
    pT = np.empty(n)
    T = np.empty(n)
    t_prev = spec.t_init
    kept = n
    for i in range(n):
        u = min(max((clock[i] - spec.day_start) / span, 0.0), 1.0)
        tau_m = float(np.polyval(mean_c, u))
        tau_s = math.sqrt(max(float(np.polyval(var_c, u)), 1e-8))
        pT[i] = p[i] * tau_s + tau_m
        T[i] = spec.mixture.quantile(float(ndtr(pT[i])), t_prev)
        x = max(1, math.ceil(math.exp(min(T[i], 25.0))))
        if clock[i] + x > spec.day_end:
            kept = i
            break
        clock[i + 1] = clock[i] + x
        t_prev = T[i]
    series = DaySeries(
        date_label=f"{spec.name}-{day_index}",
        clock_times=clock[: kept + 1],
        bpi=np.asarray(marks[: kept + 1], dtype=np.float64),
        day_start=spec.day_start,
        day_end=spec.day_end,
    )
    return SimulatedDay(
        series=series,
        spec=spec,
        trend_mean=mean_c,
        trend_var=var_c,
        latent_p=p[:kept],
        latent_pT=pT[:kept],
        latent_T=T[:kept],
        innovations=z[:kept],
        regressors=None if regressors is None else regressors[:kept],
        n_dropped=n - kept,
    )


def oracle_residuals(day: SimulatedDay) -> np.ndarray:
    """Exact PIT residuals of the simulated events under the generating law.

    Every stage of the hierarchy is strictly increasing in its argument, so
    the conditional CDF of T_i given the full past evaluated at the realised
    T_i collapses to Phi(z_i / sigma).  With a degenerate spec (no memory,
    unit trend) this is just Phi of the latent values.
    """
    return ndtr(day.innovations / day.spec.sigma)


def bimodal_scenario(
    n_events: int = 2000,
    name: str = "bimodal",
    bpi_effects: bool = False,
    trend_jitter: float = 0.0,
    d: float = 0.1,
    theta: tuple = (-0.25,),
) -> ScenarioSpec:
    """The workhorse synthetic market: long memory, intraday trend, bimodal law.

    The innovation sd is calibrated so the latent core has unit marginal
    variance, and the day span scales with the event count so the declared
    day is roughly 60% filled.
    """
    sigma = unit_marginal_sigma(d, (), theta)
    mean_dur = 6100.0  # rough stationary mean duration of the default mixture
    span = int(max(n_events * mean_dur / 0.55, 7_500_000))
    spec = ScenarioSpec(
        name=name,
        n_events=n_events,
        d=d,
        theta=theta,
        sigma=sigma,
        trend_mean=(-0.9, 0.9, -0.12),
        trend_var=(-0.5, 0.5, 0.72),
        day_start=34_200_000,
        day_end=34_200_000 + span,
        trend_jitter=trend_jitter,
    )
    if bpi_effects:
        spec = replace(spec, bpi_b0=0.42, bpi_b=(-0.35, -0.15))
    return spec
