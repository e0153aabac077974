"""Time the compiled kernels against the numpy fallback.

Runs each kernel on inputs sized like a real trading day and prints the
best-of-``--repeats`` wall time per backend together with the speedup.
Exits nonzero if the compiled extension is unavailable, since then there
is nothing to compare.
"""

import argparse
import sys
import time

import numpy as np

from hsdm._kernels import HAVE_NATIVE, _fallback

if HAVE_NATIVE:
    from hsdm._kernels import _native


def _timeit(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        tic = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - tic)
    return best


def make_cases(n, rng):
    y = rng.normal(7.5, 1.1, size=n)
    yq = rng.normal(7.5, 1.1, size=n)
    ratios = rng.exponential(size=n)
    lam = 0.3 * 0.7 ** np.arange(200)
    w = rng.normal(size=n)
    return {
        "cond_kde_sums": (y[:-1], y[1:], 0.25, 0.3, yq[:-1], yq[1:]),
        "cond_kde_loo": (y[:-1], y[1:], 0.25, 0.3, np.arange(min(n - 1, 800))),
        "kde1d_sums": (np.log(ratios + 1e-9), 0.2, np.linspace(-4, 3, n)),
        "acd_psi": (ratios, 0.1, 0.1, 0.8, 1.0),
        "fiacd_psi": (ratios, lam, 0.1, 0.6, 1.0, 1.0),
        "arma_innovations": (w, np.array([0.3]), np.array([-0.2])),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=20_000, help="events per day")
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    if not HAVE_NATIVE:
        print("compiled extension not built; nothing to benchmark")
        return 1

    rng = np.random.default_rng(args.seed)
    cases = make_cases(args.n, rng)
    print(f"n = {args.n}, best of {args.repeats}")
    print(f"{'kernel':<18} {'fallback':>11} {'native':>11} {'speedup':>8}")
    for name, case in cases.items():
        t_fb = _timeit(lambda: getattr(_fallback, name)(*case), args.repeats)
        t_nat = _timeit(lambda: getattr(_native, name)(*case), args.repeats)
        print(f"{name:<18} {t_fb * 1e3:>9.2f}ms {t_nat * 1e3:>9.2f}ms {t_fb / t_nat:>7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
