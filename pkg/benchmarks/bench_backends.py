#!/usr/bin/env python3
"""Benchmark the compiled simulation kernels against the numpy fallback.

Times one full snapshot run per (engine, scheme, size) cell on each
available backend and reports the per-run wall time plus the speedup of
the compiled path.

Usage:
    python3 benchmarks/bench_backends.py [--quick]
"""

import argparse
import time

from dynclu import _engine
from dynclu.degrees import build_power_law
from dynclu.lifetimes import Exponential, Weibull
from dynclu.simulate import Equidistant, GraphModelSpec, PoissonTimes, simulate


def time_run(spec, scheme, engine, backend, repeats=3):
    best = float("inf")
    for rep in range(repeats):
        start = time.perf_counter()
        simulate(spec, scheme, seed=1234 + rep, engine=engine, backend=backend)
        best = min(best, time.perf_counter() - start)
    return best


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true", help="small sizes, one repeat")
    args = parser.parse_args(argv)

    repeats = 1 if args.quick else 3
    k = 2000 if args.quick else 20000
    cases = []
    for n in (10, 20) if not args.quick else (10,):
        model = build_power_law(1.0, 3.0, n)
        exp_spec = GraphModelSpec(model, "on", Exponential(rate=0.5))
        wei_spec = GraphModelSpec(model, "off", Weibull(scale=1.0, shape=1.0))
        cases.extend(
            [
                (f"skip  equidistant N={n} K={k}", exp_spec, Equidistant(0.2, k), "skip"),
                (f"skip  poisson     N={n} K={k}", exp_spec, PoissonTimes(5.0, k), "skip"),
                (f"event poisson     N={n} K={k}", wei_spec, PoissonTimes(5.0, k), "event"),
            ]
        )

    backends = ["python"] + (["cython"] if _engine.HAVE_COMPILED else [])
    if not _engine.HAVE_COMPILED:
        print("note: compiled backend not built; timing the fallback only")

    header = f"{'case':34s}" + "".join(f"{b:>12s}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10s}"
    print(header)
    for label, spec, scheme, engine in cases:
        times = [time_run(spec, scheme, engine, b, repeats) for b in backends]
        row = f"{label:34s}" + "".join(f"{t * 1e3:10.1f}ms" for t in times)
        if len(times) == 2:
            row += f"{times[0] / times[1]:9.1f}x"
        print(row)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
