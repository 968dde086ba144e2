"""Time the numba and numpy slot kernels on the same scenarios.

    python3 benchmarks/bench_backends.py [--mus 200 500 800] [--repeat 3]

Both backends replay identical scenarios; the script also checks that they
return identical metrics.
"""
import argparse
import time
from dataclasses import replace

from hexrelay import _kernels
from hexrelay.netmodel import Strategy
from hexrelay.simengine import SimConfig, make_scenario, run_scenario


def best_time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--mus", type=int, nargs="+", default=[200, 500, 800])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()

    backends = sorted(_kernels.KERNELS)
    base = SimConfig(seed=args.seed)
    # compile outside the timed region
    warm = replace(base, n_mus=20, horizon=20)
    for b in backends:
        run_scenario(warm, make_scenario(warm), backend=b)

    print(f"{'n_mus':>6} {'strategy':>8} " + " ".join(f"{b + ' ms':>10}" for b in backends)
          + ("   speedup" if len(backends) > 1 else ""))
    for n in args.mus:
        cfg = replace(base, n_mus=n)
        scen = make_scenario(cfg)
        for s in Strategy:
            c = replace(cfg, strategy=s)
            times, results = {}, {}
            for b in backends:
                times[b], results[b] = best_time(lambda: run_scenario(c, scen, backend=b),
                                                 args.repeat)
            if len(set(results.values())) != 1:
                raise SystemExit(f"backends disagree at n_mus={n}, {s.label}")
            line = f"{n:>6} {s.label:>8} " + " ".join(f"{times[b] * 1e3:>10.2f}" for b in backends)
            if "numba" in times:
                line += f"   {times['numpy'] / times['numba']:>6.1f}x"
            print(line)


if __name__ == "__main__":
    main()
