"""Time the compiled and pure-Python assignment kernels.

Usage: python3 benchmarks/bench_kernels.py [--n 2000] [--reps 1000] [--repeat 3]
"""
import argparse
import time

import numpy as np

from seqate import _kernels

KINDS = {
    "bernoulli": (_kernels.CONSTANT, 0.5, 0.0),
    "wei": (_kernels.WEI_LINEAR, 0.0, 0.01),
    "efron": (_kernels.EFRON, 0.7, 0.0),
}


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2000, help="units per experiment")
    ap.add_argument("--reps", type=int, default=1000, help="experiments per batch")
    ap.add_argument("--chain", type=int, default=1_000_000, help="Efron chain steps")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    backends = ["python"]
    try:
        _kernels.get_backend("cython")
        backends.insert(0, "cython")
    except (ImportError, ValueError):
        print("compiled core unavailable; timing the fallback only")

    u = np.random.default_rng(0).random((args.reps, args.n))
    chain_u = np.random.default_rng(1).random(args.chain)
    print(f"batch {args.reps} x {args.n}, chain {args.chain} steps, best of {args.repeat}")
    print(f"{'kernel':12s}" + "".join(f"{b:>12s}" for b in backends) + "     speedup")
    cases = [(name, lambda b, s=spec: _kernels.assign_batch(*s, u, backend=b))
             for name, spec in KINDS.items()]
    cases.append(("efron-chain", lambda b: _kernels.efron_chain(0.7, chain_u, backend=b)))
    for name, run in cases:
        t = {b: best_time(lambda: run(b), args.repeat) for b in backends}
        line = f"{name:12s}" + "".join(f"{t[b]:11.4f}s" for b in backends)
        if len(backends) == 2:
            line += f"  {t['python'] / t['cython']:9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
