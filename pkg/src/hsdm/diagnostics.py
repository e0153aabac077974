"""Residual diagnostics and model comparison tables.

Everything here consumes the per-event prediction output: uniformity of the
generalized residuals (Kolmogorov-Smirnov), autocorrelation of their normal
scores (Ljung-Box), and per-event log-density comparisons between models
walked over the same day with the same smoothing.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri
from scipy.stats import chi2, kstwobign

__all__ = [
    "ks_uniform",
    "ljung_box",
    "qq_points",
    "DiagnosticReport",
    "ModelComparison",
    "evaluate_residuals",
    "compare_models",
    "smoothing_ratio",
]


def ks_uniform(u):
    """Kolmogorov-Smirnov test of U(0,1) against a sample.

    Returns (D, p).  The p-value uses the asymptotic Kolmogorov law with the
    standard small-sample size adjustment sqrt(n) + 0.12 + 0.11/sqrt(n).
    """
    u = np.sort(np.asarray(u, dtype=np.float64))
    n = u.size
    if n == 0:
        raise ValueError("empty sample")
    if u[0] < 0.0 or u[-1] > 1.0:
        raise ValueError("values outside [0, 1]")
    grid = np.arange(1, n + 1) / n
    d_plus = float(np.max(grid - u))
    d_minus = float(np.max(u - (grid - 1.0 / n)))
    d = max(d_plus, d_minus)
    rootn = math.sqrt(n)
    p = float(kstwobign.sf(d * (rootn + 0.12 + 0.11 / rootn)))
    return d, min(max(p, 0.0), 1.0)


def ljung_box(x, lags):
    """Ljung-Box portmanteau test at each lag in ``lags``.

    Autocorrelations use the biased (divide by n) estimator.  Returns a dict
    lag -> (Q, p) with chi-square p-values at ``lag`` degrees of freedom.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    lags = sorted(int(k) for k in np.atleast_1d(lags))
    if not lags or lags[0] < 1:
        raise ValueError("lags must be positive integers")
    if n <= lags[-1] + 1:
        raise ValueError("series too short for the requested lags")
    xc = x - x.mean()
    denom = float(xc @ xc)
    if denom <= 0:
        raise ValueError("constant series has no autocorrelation")
    rho = np.empty(lags[-1] + 1)
    for k in range(1, lags[-1] + 1):
        rho[k] = float(xc[k:] @ xc[:-k]) / denom
    out = {}
    acc = 0.0
    prev = 0
    for k in lags:
        for j in range(prev + 1, k + 1):
            acc += rho[j] ** 2 / (n - j)
        prev = k
        q = n * (n + 2.0) * acc
        out[k] = (float(q), float(chi2.sf(q, k)))
    return out


def qq_points(u):
    """Uniform Q-Q pairs (theoretical, empirical) for plotting or export."""
    u = np.sort(np.asarray(u, dtype=np.float64))
    n = u.size
    return (np.arange(1, n + 1) - 0.5) / n, u


@dataclass
class DiagnosticReport:
    """Uniformity and whiteness summary for one model on one day."""

    label: str
    n_events: int
    ks_stat: float
    ks_pvalue: float
    lb: dict
    total_loglik: float
    mean_loglik: float
    n_clipped: int

    def row(self) -> str:
        lb10 = self.lb.get(10, (float("nan"), float("nan")))
        return (
            f"{self.label:<16} {self.n_events:>6} {self.total_loglik:>12.2f} "
            f"{self.ks_stat:>8.4f} {self.ks_pvalue:>8.4f} {lb10[1]:>8.4f}"
        )


def evaluate_residuals(result, lags=(5, 10, 15)) -> DiagnosticReport:
    """Diagnostics for one walked day, burn-in already excluded.

    KS runs on the residuals themselves; Ljung-Box runs on their normal
    scores, where linear autocorrelation is the natural alternative.
    """
    u = result.residuals
    ks_d, ks_p = ks_uniform(u)
    z = ndtri(np.clip(u, 1e-12, 1.0 - 1e-12))
    return DiagnosticReport(
        label=result.label,
        n_events=int(u.size),
        ks_stat=ks_d,
        ks_pvalue=ks_p,
        lb=ljung_box(z, lags),
        total_loglik=result.total_loglik,
        mean_loglik=result.mean_loglik,
        n_clipped=int(result.n_clipped),
    )


@dataclass
class ModelComparison:
    """Per-model diagnostics plus per-event log-density gaps to a baseline."""

    reports: list
    baseline: str
    pairwise: dict = field(default_factory=dict)

    def table(self) -> str:
        head = (
            f"{'model':<16} {'events':>6} {'loglik':>12} "
            f"{'KS D':>8} {'KS p':>8} {'LB10 p':>8}"
        )
        lines = [head] + [r.row() for r in self.reports]
        if self.pairwise:
            lines.append("")
            lines.append(f"log-density gaps vs {self.baseline} (positive favors the model)")
            for label, g in self.pairwise.items():
                lines.append(
                    f"{label:<16} mean {g['mean_diff']:>+9.5f}  "
                    f"median {g['median_diff']:>+9.5f}  "
                    f"share>0 {g['pct_positive']:>6.1%}  n {g['n_common']}"
                )
        return "\n".join(lines)


def compare_models(results, baseline_index=0, lags=(5, 10, 15)) -> ModelComparison:
    """Side-by-side diagnostics for models walked over the same day.

    All results must cover the same events with the same burn-in, which is
    what aligning per-event log densities requires.  Gap rows are reported
    for every model against the baseline (default: the first).
    """
    if not results:
        raise ValueError("no prediction results supplied")
    n0, b0 = results[0].n_events, results[0].burn_in
    for r in results[1:]:
        if r.n_events != n0 or r.burn_in != b0:
            raise ValueError("results cover different events; cannot align them")
    reports = [evaluate_residuals(r, lags=lags) for r in results]
    base = results[baseline_index]
    pairwise = {}
    for r in results:
        if r is base:
            continue
        diff = r.log_density - base.log_density
        pairwise[r.label] = {
            "mean_diff": float(diff.mean()),
            "median_diff": float(np.median(diff)),
            "pct_positive": float(np.mean(diff > 0)),
            "n_common": int(diff.size),
        }
    return ModelComparison(reports=reports, baseline=base.label, pairwise=pairwise)


def smoothing_ratio(totals, reference_gap) -> float:
    """Smoothing sensitivity: loglik spread across seeds over a model gap.

    ``totals`` are one model's day log-likelihoods under different smoothing
    seeds; ``reference_gap`` is the log-likelihood gap between two models
    under the first (canonical) seed.  A small ratio means re-drawing the
    smoothing noise moves the criterion much less than the model choice
    does.  Raises when the gap is not positive, because the ratio is then
    meaningless.
    """
    totals = [float(v) for v in np.atleast_1d(totals)]
    if len(totals) < 2:
        raise ValueError("need at least two smoothing draws")
    gap = float(reference_gap)
    if gap <= 0.0:
        raise ValueError("reference gap must be positive; reorder the models")
    return (max(totals) - min(totals)) / gap
