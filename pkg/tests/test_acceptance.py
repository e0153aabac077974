"""Acceptance gate: one test per external criterion, each printing a summary.

These run the pipeline at realistic sizes, so the module takes tens of
minutes; the per-criterion runtime bounds are asserted where a budget is
part of the criterion itself.
"""

import json
import subprocess
import sys
import time
from fractions import Fraction

import numpy as np
import pytest
from scipy.signal import lfilter
from scipy.stats import mannwhitneyu

from hsdm.arfima import fit_arfima, frac_diff_coeffs, simulate_arfima
from hsdm.benchmarks import ACD_FLAVORS, fit_acd_family
from hsdm.diagnostics import evaluate_residuals, ks_uniform, smoothing_ratio
from hsdm.model import fit_hsdm
from hsdm.simulate import bimodal_scenario, oracle_residuals, simulate
from hsdm.smoothing import (
    IntegerLaw,
    discrete_vs_smoothed_loglik,
    general_pit,
    interpolated_cdf,
)


def test_criterion_01_fractional_differencing_series():
    """Coefficients of (1-B)^d match exact rational arithmetic to 1e-12."""
    tic = time.perf_counter()
    worst = 0.0
    for num, den in ((-2, 5), (-1, 10), (1, 10), (2, 5)):
        d = num / den
        dq = Fraction(num, den)
        coef = frac_diff_coeffs(d, 51)
        exact = Fraction(1)
        for k in range(51):
            if k:
                exact = exact * (k - 1 - dq) / k
            worst = max(worst, abs(coef[k] - float(exact)))
    elapsed = time.perf_counter() - tic
    print(f"criterion 1: max coefficient error {worst:.3e} in {elapsed:.3f}s")
    assert worst <= 1e-12
    assert elapsed < 1.0


def test_criterion_02_long_memory_recovery():
    """Mean d-hat over 100 long days stays near the true 0.1."""
    tic = time.perf_counter()
    rng = np.random.default_rng(42)
    dhats = []
    for _ in range(100):
        x, _ = simulate_arfima(20_000, 0.1, theta=(-0.25,), rng=rng)
        dhats.append(fit_arfima(x, 0, 1, keep_data=False).d)
    dhats = np.asarray(dhats)
    elapsed = time.perf_counter() - tic
    print(
        f"criterion 2: mean d-hat {dhats.mean():.4f}, sd {dhats.std():.4f}, "
        f"{elapsed:.0f}s"
    )
    assert 0.07 <= dhats.mean() <= 0.13
    assert dhats.std() <= 0.03
    assert elapsed < 600


def test_criterion_03_pit_lemma_equivalence():
    """Jump-aware PIT equals the continuous PIT of the interpolated CDF."""
    tic = time.perf_counter()
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(50):
        k = int(rng.integers(2, 15))
        support = np.cumsum(rng.integers(1, 4, size=k)).astype(np.int64)
        law = IntegerLaw(support, rng.dirichlet(np.ones(k)))
        x = rng.choice(support, size=200, p=law.pmf_values)
        v = rng.uniform(1e-6, 1 - 1e-6, size=200)
        w = general_pit(law.cdf(x), law.pmf(x), v)
        z = x - (1.0 - v)
        w_cont = np.array([interpolated_cdf(law, zi) for zi in z])
        worst = max(worst, float(np.max(np.abs(w - w_cont))))
        for xi, zi in zip(x[:5], z[:5]):
            ll_disc, ll_smooth = discrete_vs_smoothed_loglik(law, int(xi), float(zi))
            assert ll_smooth == pytest.approx(ll_disc, rel=1e-12)
    elapsed = time.perf_counter() - tic
    print(f"criterion 3: max PIT mismatch {worst:.3e} in {elapsed:.1f}s")
    assert worst <= 1e-12
    assert elapsed < 60


def test_criterion_04_oracle_residual_uniformity():
    """Residuals computed from the true simulator law look uniform."""
    tic = time.perf_counter()
    days = simulate(bimodal_scenario(10_000), n_days=100, seed=404)
    passed = sum(ks_uniform(oracle_residuals(d))[1] > 0.01 for d in days)
    elapsed = time.perf_counter() - tic
    print(f"criterion 4: KS at 1% passed on {passed}/100 days in {elapsed:.0f}s")
    assert passed >= 95
    assert elapsed < 300


@pytest.fixture(scope="module")
def ranking_pairs():
    """Twenty train/test pairs walked by the full model and all benchmarks."""
    tic = time.perf_counter()
    spec = bimodal_scenario(n_events=2200)
    rows = []
    for k in range(20):
        days = simulate(spec, n_days=2, seed=5000 + k)
        train, test = days[0].series, days[1].series
        results = {"hsdm": fit_hsdm(train, seed=11).predict_day(test, seed=13)}
        for flavor in ACD_FLAVORS:
            model = fit_acd_family(train, flavor, seed=11)
            results[flavor] = model.predict_day(test, seed=13)
        rows.append(results)
    return rows, time.perf_counter() - tic


def test_criterion_05_model_ranking_direction(ranking_pairs):
    """The full model out-predicts every benchmark on almost every pair."""
    rows, fixture_seconds = ranking_pairs
    sweep_wins = 0
    diffs = []
    for results in rows:
        ll = {m: r.total_loglik for m, r in results.items()}
        sweep_wins += all(ll["hsdm"] > ll[f] for f in ACD_FLAVORS)
        diffs.append(
            results["hsdm"].log_density - results["sfiacd"].log_density
        )
    diffs = np.concatenate(diffs)
    share = float((diffs > 0).mean())
    print(
        f"criterion 5: clean sweeps {sweep_wins}/20, per-event gain vs sfiacd "
        f"mean {diffs.mean():.3f}, positive share {share:.3f}, "
        f"fits took {fixture_seconds:.0f}s"
    )
    assert sweep_wins >= 18
    assert diffs.mean() > 0
    assert share > 0.5
    assert fixture_seconds < 1800


def test_criterion_06_diagnostics_ordering(ranking_pairs):
    """KS and Ljung-Box p-values of the full model dominate the benchmarks."""
    rows, _ = ranking_pairs
    reports = {
        m: [evaluate_residuals(row[m], lags=(10,)) for row in rows]
        for m in ("hsdm",) + ACD_FLAVORS
    }
    ks_p = {m: [r.ks_pvalue for r in rs] for m, rs in reports.items()}
    lb_p = {m: [r.lb[10][1] for r in rs] for m, rs in reports.items()}
    lines = []
    for bench in ACD_FLAVORS:
        p_ks = mannwhitneyu(ks_p["hsdm"], ks_p[bench], alternative="greater").pvalue
        p_lb = mannwhitneyu(lb_p["hsdm"], lb_p[bench], alternative="greater").pvalue
        lines.append(f"{bench}: rank-test p_ks={p_ks:.2e} p_lb={p_lb:.2e}")
        assert p_ks < 0.05
        assert p_lb < 0.05
    print("criterion 6: " + "; ".join(lines))


def test_criterion_07_smoothing_robustness():
    """Day log-likelihoods barely move across smoothing draws."""
    tic = time.perf_counter()
    spec = bimodal_scenario(n_events=1600)
    ratios = {"hsdm": [], "sfiacd": []}
    for k in range(32):
        days = simulate(spec, n_days=2, seed=7000 + k)
        train, test = days[0].series, days[1].series
        totals = {"hsdm": [], "sfiacd": []}
        for s in (71, 72, 73):
            totals["hsdm"].append(
                fit_hsdm(train, seed=s).predict_day(test, seed=s).total_loglik
            )
            bench = fit_acd_family(train, "sfiacd", seed=s)
            totals["sfiacd"].append(bench.predict_day(test, seed=s).total_loglik)
        gap = abs(totals["hsdm"][0] - totals["sfiacd"][0])
        for m in ratios:
            ratios[m].append(smoothing_ratio(totals[m], gap))
    mean_h = float(np.mean(ratios["hsdm"]))
    mean_s = float(np.mean(ratios["sfiacd"]))
    elapsed = time.perf_counter() - tic
    print(
        f"criterion 7: mean spread/gap hsdm {mean_h:.4f}, sfiacd {mean_s:.4f}, "
        f"{elapsed:.0f}s"
    )
    assert mean_h <= 0.05
    assert mean_s <= 0.05
    assert elapsed < 1800


def test_criterion_08_streaming_vs_refit_updates():
    """The recursive trend tracker matches the penalized refits at a fraction of the cost."""
    spec = bimodal_scenario(n_events=1500)
    days = simulate(spec, n_days=11, seed=808)
    model = fit_hsdm(days[0].series, seed=11)
    day_means = []
    wall_lse = wall_pm = 0.0
    for day in days[1:]:
        fast = model.predict_day(day.series, seed=13, update="lse")
        slow = model.predict_day(day.series, seed=13, update="pm")
        day_means.append(float(np.mean(np.abs(fast.log_density - slow.log_density))))
        wall_lse += fast.wall_seconds
        wall_pm += slow.wall_seconds
    gap = float(np.mean(day_means))
    speedup = wall_pm / wall_lse
    print(
        f"criterion 8: mean |per-event loglik difference| {gap:.4f}, "
        f"speedup {speedup:.0f}x ({wall_pm:.0f}s vs {wall_lse:.1f}s)"
    )
    assert gap <= 0.05
    assert speedup >= 10


def test_criterion_09_regression_extension():
    """Mark-regression coefficients are recovered and add predictive value."""
    tic = time.perf_counter()
    rng = np.random.default_rng(909)
    truth = np.array([-0.35, -0.15])
    worst_z = 0.0
    for _ in range(10):
        n = 4000
        innov = rng.normal(0.0, np.sqrt(1 - 0.4**2), n + 52)
        marks = lfilter([1.0], [1.0, -0.4], innov)[50:]
        regressors = np.column_stack([np.abs(marks[1 : n + 1]), np.abs(marks[:n])])
        core, _ = simulate_arfima(n, 0.1, theta=(-0.25,), rng=rng)
        x = core + 0.42 + regressors @ truth
        fit = fit_arfima(x, 0, 1, regressors=regressors)
        se = fit.standard_errors()["b"]
        worst_z = max(worst_z, float(np.max(np.abs(fit.b - truth) / se)))
    assert worst_z <= 3.0

    spec = bimodal_scenario(n_events=2200, bpi_effects=True)
    positive = 0
    ratios = []
    for k in range(10):
        days = simulate(spec, n_days=2, seed=9100 + k)
        train, test = days[0].series, days[1].series
        with_marks = fit_hsdm(train, seed=11, order=(0, 1), bpi_lags=2)
        without = fit_hsdm(train, seed=11, order=(0, 1))
        bench = fit_acd_family(train, "sfiacd", seed=11)
        ll_with = with_marks.predict_day(test, seed=13).total_loglik
        ll_without = without.predict_day(test, seed=13).total_loglik
        ll_bench = bench.predict_day(test, seed=13).total_loglik
        ratio = (ll_with - ll_without) / (ll_without - ll_bench)
        ratios.append(ratio)
        positive += ratio > 0
    elapsed = time.perf_counter() - tic
    print(
        f"criterion 9: worst coefficient |z| {worst_z:.2f}, improvement ratio "
        f"positive on {positive}/10 pairs (mean {np.mean(ratios):.3f}), {elapsed:.0f}s"
    )
    assert positive >= 9


def _run_pipeline(root):
    """simulate -> fit -> predict through the installed CLI, returning all bytes.

    All paths are relative to ``root`` so that even the path echoes in the
    command stdout must match between two runs.
    """
    root.mkdir()

    def run(args):
        proc = subprocess.run(
            [sys.executable, "-m", "hsdm.cli", *args],
            capture_output=True,
            check=True,
            text=True,
            cwd=root,
        )
        return proc.stdout

    outputs = {}
    outputs["simulate.stdout"] = run(
        ["simulate", "--scenario", "bimodal", "--n-events", "500",
         "--days", "2", "--seed", "17", "--out", "sim"]
    )
    spec = json.loads((root / "sim" / "scenario.json").read_text())
    outputs["fit.stdout"] = run(
        ["fit", "--data", "sim/day00.csv",
         "--day-start", str(spec["day_start"]), "--day-end", str(spec["day_end"]),
         "--seed", "3", "--pmax", "1", "--qmax", "1", "--out", "bundle"]
    )
    outputs["predict.stdout"] = run(
        ["predict", "--data", "sim/day01.csv", "--model-path", "bundle",
         "--seed", "5", "--out", "pred.csv"]
    )
    for path in sorted([*(root / "sim").iterdir(), *(root / "bundle").iterdir(),
                        root / "pred.csv"]):
        outputs[path.name] = path.read_bytes()
    return outputs


def test_criterion_10_pipeline_determinism(tmp_path):
    """Two end-to-end runs at one seed produce byte-identical artifacts."""
    first = _run_pipeline(tmp_path / "a")
    second = _run_pipeline(tmp_path / "b")
    assert set(first) == set(second)
    mismatched = [name for name in first if first[name] != second[name]]
    print(
        f"criterion 10: {len(first)} artifacts compared, "
        f"{len(mismatched)} mismatched {mismatched}"
    )
    assert not mismatched
