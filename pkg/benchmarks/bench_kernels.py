"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--J 1000] [--N 96] [--repeats 20]
"""
import argparse
import timeit

import numpy as np

from flexpool import kernels
from flexpool._kernels_py import pe_apply
from flexpool.costs import merge_linear_costs


def cases(J, N, seed):
    rng = np.random.default_rng(seed)
    g = 2 * N - 1
    B = rng.uniform(0.0, 1.0, (J, g))
    ac = merge_linear_costs(rng.standard_normal((J, g)), B)
    beta = rng.uniform(-1, 1, g) * ac.betabar
    pos = np.ascontiguousarray(ac.betabar + beta)
    bb = rng.uniform(0.1, 1.0, g)
    d = pe_apply(N, rng.uniform(-1, 1, g) * bb)
    x0 = rng.standard_normal(g)
    lam = np.zeros(N)
    return {
        "aggregate_eval": lambda k: k.aggregate_eval(ac.offsets, ac.cum_len, ac.cum_int, ac.slopes,
                                                     ac.anchors, ac.betabar, beta),
        "distribute_fill": lambda k: k.distribute_fill(ac.offsets, ac.lengths, ac.owners, pos, ac.n_systems),
        "pe_project_newton": lambda k: k.pe_project_newton(x0, d, bb, lam, 1e-10, 200),
        "pe_dykstra": lambda k: k.pe_dykstra(x0, d, bb, 1e-9, 100_000),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--J", type=int, default=1000)
    ap.add_argument("--N", type=int, default=96)
    ap.add_argument("--repeats", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    backends = kernels.available_backends()
    if "compiled" not in backends:
        print("compiled extension not built; timing the fallback only")
    print(f"J={args.J} N={args.N}, best of {args.repeats} (ms)")
    print(f"{'kernel':<20}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for name, fn in cases(args.J, args.N, args.seed).items():
        t = {b: 1e3 * min(timeit.repeat(lambda: fn(k), number=1, repeat=args.repeats))
             for b, k in backends.items()}
        speed = f"{t['python'] / t['compiled']:>9.1f}x" if "compiled" in t else ""
        print(f"{name:<20}" + "".join(f"{v:>12.3f}" for v in t.values()) + speed)


if __name__ == "__main__":
    main()
