"""Command-line front end.

Subcommands: simulate, fit, predict, diagnose, compare, smoothing-study.
All outputs are deterministic for a fixed ``--seed``; wall-clock timings are
only included when ``--emit-timings`` is given, so repeated runs produce
byte-identical files.
"""

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
from scipy.special import ndtri

from .benchmarks import ACD_FLAVORS, AcdBenchmark, fit_acd_family
from .data import DaySeries, ingest_csv, write_csv
from .diagnostics import (
    compare_models,
    evaluate_residuals,
    ks_uniform,
    ljung_box,
    qq_points,
    smoothing_ratio,
)
from .model import HsdmModel, fit_hsdm
from .simulate import ScenarioSpec, bimodal_scenario, simulate

MODEL_CHOICES = ("hsdm",) + ACD_FLAVORS

PREDICTION_FIELDS = (
    "event_index",
    "kept",
    "residual",
    "log_density",
    "mu",
    "sigma",
    "tau_mean",
    "tau_sd",
)


def _emit(payload, emit_timings):
    if not emit_timings:
        payload = _strip_timings(payload)
    print(json.dumps(payload, indent=2, sort_keys=True))


def _strip_timings(obj):
    if isinstance(obj, dict):
        return {
            k: _strip_timings(v)
            for k, v in obj.items()
            if not str(k).endswith("_seconds")
        }
    if isinstance(obj, list):
        return [_strip_timings(v) for v in obj]
    return obj


def _load_day(path, index, day_start=None, day_end=None, skip_bad=False) -> DaySeries:
    days = ingest_csv(
        path,
        on_malformed="skip" if skip_bad else "error",
        day_start=day_start,
        day_end=day_end,
    )
    if not 0 <= index < len(days):
        raise SystemExit(f"{path} holds {len(days)} day(s); index {index} is out of range")
    return days[index]


def _builtin_scenario(name, n_events) -> ScenarioSpec:
    if name == "bimodal":
        return bimodal_scenario(n_events)
    if name == "bimodal-bpi":
        return bimodal_scenario(n_events, name="bimodal-bpi", bpi_effects=True)
    if name == "bimodal-jitter":
        return bimodal_scenario(n_events, name="bimodal-jitter", trend_jitter=0.08)
    if name == "iid":
        base = bimodal_scenario(n_events, name="iid", d=0.0, theta=())
        return replace(
            base, sigma=1.0, trend_mean=(0.0, 0.0, 0.0), trend_var=(0.0, 0.0, 1.0)
        )
    raise SystemExit(f"unknown scenario {name!r} and no such file exists")


def _resolve_scenario(arg, n_events) -> ScenarioSpec:
    p = Path(arg)
    if p.suffix == ".json" or p.exists():
        spec = ScenarioSpec.from_dict(json.loads(p.read_text()))
        if n_events is not None:
            spec = replace(spec, n_events=n_events)
        return spec
    return _builtin_scenario(arg, n_events or 2000)


def _fit_model(name, series, args):
    if name == "hsdm":
        return fit_hsdm(
            series,
            seed=args.seed,
            lam=args.lam,
            pmax=args.pmax,
            qmax=args.qmax,
            bpi_lags=args.bpi_lags,
            include_trend=not getattr(args, "no_trend", False),
            include_arfima=not getattr(args, "no_arfima", False),
        )
    return fit_acd_family(series, name, seed=args.seed)


def _predict(model, series, args):
    if isinstance(model, HsdmModel):
        return model.predict_day(
            series,
            seed=args.seed,
            update=args.trend_update,
            lam=args.lam,
            burn_in=args.burn_in,
        )
    return model.predict_day(series, seed=args.seed, burn_in=args.burn_in)


def _write_predictions(result, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PREDICTION_FIELDS)
        kept = result.kept
        for i in range(result.n_events):
            w.writerow(
                [
                    i,
                    int(kept[i]),
                    repr(float(result.residuals_all[i])),
                    repr(float(result.log_density_all[i])),
                    repr(float(result.mu[i])),
                    repr(float(result.sigma[i])),
                    repr(float(result.tau_mean[i])),
                    repr(float(result.tau_sd[i])),
                ]
            )


def _report_payload(report):
    return {
        "label": report.label,
        "n_events": report.n_events,
        "ks_stat": report.ks_stat,
        "ks_pvalue": report.ks_pvalue,
        "ljung_box": {str(k): list(v) for k, v in report.lb.items()},
        "total_loglik": report.total_loglik,
        "mean_loglik": report.mean_loglik,
        "n_clipped": report.n_clipped,
    }


# -- subcommand handlers ---------------------------------------------------------


def _cmd_simulate(args):
    spec = _resolve_scenario(args.scenario, args.n_events)
    days = simulate(spec, n_days=args.days, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "scenario.json").write_text(json.dumps(spec.to_dict(), indent=2, sort_keys=True))
    names = []
    for i, day in enumerate(days):
        name = f"day{i:02d}.csv"
        write_csv(day.series, out / name, include_duration=args.with_durations)
        names.append(name)
    _emit(
        {
            "scenario": spec.name,
            "days": names,
            "n_events": [d.series.n_events for d in days],
            "seed": args.seed,
        },
        True,
    )
    return 0


def _cmd_fit(args):
    series = _load_day(
        args.data, args.day, args.day_start, args.day_end, args.skip_bad_rows
    )
    model = _fit_model(args.model, series, args)
    out = Path(args.out)
    if isinstance(model, HsdmModel):
        if not args.emit_timings:
            model.fit_info = _strip_timings(model.fit_info)
        model.save(out)
        summary = {
            "model": "hsdm",
            "out": str(out),
            "order": model.fit_info.get("order"),
            "d": None if model.arfima is None else model.arfima.d,
            "trend": model.trend.to_dict(),
            "fit_info": model.fit_info,
        }
    else:
        if not args.emit_timings:
            model.fit_info = _strip_timings(model.fit_info)
        out.parent.mkdir(parents=True, exist_ok=True)
        model.save(out)
        summary = {
            "model": model.flavor,
            "out": str(out),
            "omega": model.omega,
            "alpha": model.alpha,
            "beta": model.beta,
            "d": model.d,
            "fit_info": model.fit_info,
        }
    _emit(summary, args.emit_timings)
    return 0


def _load_model(path):
    p = Path(path)
    if p.is_dir():
        return HsdmModel.load(p)
    return AcdBenchmark.load(p)


def _cmd_predict(args):
    series = _load_day(
        args.data, args.day, args.day_start, args.day_end, args.skip_bad_rows
    )
    model = _load_model(args.model_path)
    result = _predict(model, series, args)
    if args.out:
        _write_predictions(result, args.out)
    report = evaluate_residuals(result)
    payload = _report_payload(report)
    payload["n_events_total"] = result.n_events
    payload["burn_in"] = result.burn_in
    payload["update_seconds"] = result.update_seconds
    payload["wall_seconds"] = result.wall_seconds
    _emit(payload, args.emit_timings)
    return 0


def _cmd_diagnose(args):
    with open(args.predictions, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise SystemExit(f"{args.predictions} holds no prediction rows")
    kept = np.array([int(r["kept"]) for r in rows], dtype=bool)
    resid = np.array([float(r["residual"]) for r in rows])[kept]
    logf = np.array([float(r["log_density"]) for r in rows])[kept]
    lags = tuple(int(v) for v in args.lags.split(","))
    ks_d, ks_p = ks_uniform(resid)
    lb = ljung_box(ndtri(np.clip(resid, 1e-12, 1 - 1e-12)), lags)
    payload = {
        "n_events": int(resid.size),
        "ks_stat": ks_d,
        "ks_pvalue": ks_p,
        "ljung_box": {str(k): list(v) for k, v in lb.items()},
        "total_loglik": float(logf.sum()),
        "mean_loglik": float(logf.mean()),
    }
    if args.qq_out:
        theo, emp = qq_points(resid)
        with open(args.qq_out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["theoretical", "empirical"])
            for tq, eq in zip(theo, emp):
                writer.writerow([repr(float(tq)), repr(float(eq))])
    _emit(payload, True)
    return 0


def _cmd_compare(args):
    train = _load_day(args.train, args.train_day, args.day_start, args.day_end)
    test = _load_day(args.test, args.test_day, args.day_start, args.day_end)
    labels = [m.strip() for m in args.models.split(",") if m.strip()]
    for label in labels:
        if label not in MODEL_CHOICES:
            raise SystemExit(f"unknown model {label!r}; choose from {MODEL_CHOICES}")
    results = []
    for label in labels:
        model = _fit_model(label, train, args)
        results.append(_predict(model, test, args))
    comp = compare_models(results)
    print(comp.table())
    if args.out:
        payload = {
            "baseline": comp.baseline,
            "models": [_report_payload(r) for r in comp.reports],
            "pairwise": comp.pairwise,
            "burn_in": args.burn_in,
        }
        Path(args.out).write_text(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def _cmd_smoothing_study(args):
    train = _load_day(args.train, args.train_day, args.day_start, args.day_end)
    test = _load_day(args.test, args.test_day, args.day_start, args.day_end)
    labels = [m.strip() for m in args.models.split(",") if m.strip()]
    if len(labels) < 2:
        raise SystemExit("smoothing-study needs at least two models to compare")
    seeds = [args.seed + k for k in range(args.n_seeds)]
    totals = {label: [] for label in labels}
    for s in seeds:
        run_args = argparse.Namespace(**vars(args))
        run_args.seed = s
        for label in labels:
            model = _fit_model(label, train, run_args)
            result = _predict(model, test, run_args)
            totals[label].append(result.total_loglik)
    gap = totals[labels[0]][0] - totals[labels[1]][0]
    payload = {
        "seeds": seeds,
        "totals": totals,
        "reference_gap": gap,
        "spread": {m: max(v) - min(v) for m, v in totals.items()},
    }
    try:
        payload["ratio"] = {
            m: smoothing_ratio(v, gap) for m, v in totals.items()
        }
    except ValueError as exc:
        payload["ratio_error"] = str(exc)
    _emit(payload, True)
    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=2, sort_keys=True))
    return 0


# -- parser ------------------------------------------------------------------------


def _add_data_flags(p, *names):
    for name in names:
        p.add_argument(name, required=True)
    p.add_argument("--day-start", type=int, default=None, help="session open, ms")
    p.add_argument("--day-end", type=int, default=None, help="session close, ms")


def _add_fit_flags(p):
    p.add_argument("--seed", type=int, required=True, help="smoothing seed")
    p.add_argument("--lambda", dest="lam", type=float, default=10.0,
                   help="shrinkage weight of the within-day trend updates")
    p.add_argument("--pmax", type=int, default=3)
    p.add_argument("--qmax", type=int, default=3)
    p.add_argument("--bpi-lags", type=int, default=0,
                   help="lagged |BPI| regressors in the latent mean")
    p.add_argument("--trend-update", choices=("lse", "pm"), default="lse")
    p.add_argument("--burn-in", type=int, default=100)
    p.add_argument("--emit-timings", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="hsdm",
        description="Hierarchical duration models for trade event streams",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate synthetic trading days")
    p.add_argument("--scenario", default="bimodal",
                   help="builtin name (bimodal, bimodal-bpi, bimodal-jitter, iid) or JSON path")
    p.add_argument("--n-events", type=int, default=None)
    p.add_argument("--days", type=int, default=1)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--with-durations", action="store_true",
                   help="include the redundant duration_ms column")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("fit", help="fit a model to one training day")
    _add_data_flags(p, "--data")
    p.add_argument("--day", type=int, default=0)
    p.add_argument("--model", choices=MODEL_CHOICES, default="hsdm")
    p.add_argument("--no-trend", action="store_true")
    p.add_argument("--no-arfima", action="store_true")
    p.add_argument("--skip-bad-rows", action="store_true")
    p.add_argument("--out", required=True,
                   help="bundle directory (hsdm) or JSON file (benchmarks)")
    _add_fit_flags(p)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("predict", help="walk a held-out day with a saved model")
    _add_data_flags(p, "--data")
    p.add_argument("--day", type=int, default=0)
    p.add_argument("--model-path", required=True)
    p.add_argument("--skip-bad-rows", action="store_true")
    p.add_argument("--out", default=None, help="per-event predictions CSV")
    _add_fit_flags(p)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("diagnose", help="residual diagnostics from a predictions CSV")
    p.add_argument("--predictions", required=True)
    p.add_argument("--lags", default="5,10,15")
    p.add_argument("--qq-out", default=None, help="write Q-Q plot points (CSV)")
    p.set_defaults(func=_cmd_diagnose)

    p = sub.add_parser("compare", help="fit several models and walk the same test day")
    _add_data_flags(p, "--train", "--test")
    p.add_argument("--train-day", type=int, default=0)
    p.add_argument("--test-day", type=int, default=0)
    p.add_argument("--models", default="hsdm,eacd,sacd,efiacd,sfiacd")
    p.add_argument("--no-trend", action="store_true")
    p.add_argument("--no-arfima", action="store_true")
    p.add_argument("--out", default=None, help="JSON summary path")
    _add_fit_flags(p)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("smoothing-study",
                       help="sensitivity of day log-likelihoods to the smoothing draw")
    _add_data_flags(p, "--train", "--test")
    p.add_argument("--train-day", type=int, default=0)
    p.add_argument("--test-day", type=int, default=0)
    p.add_argument("--models", default="hsdm,sfiacd")
    p.add_argument("--n-seeds", type=int, default=3)
    p.add_argument("--no-trend", action="store_true")
    p.add_argument("--no-arfima", action="store_true")
    p.add_argument("--out", default=None, help="JSON summary path")
    _add_fit_flags(p)
    p.set_defaults(func=_cmd_smoothing_study)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
