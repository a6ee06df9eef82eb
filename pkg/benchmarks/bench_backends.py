"""Compiled hot loops against the numpy fallback.

Times the four backend kernels on their own and the two collision paths
end to end, for each backend that is importable, and prints the speedup.

    python benchmarks/bench_backends.py --N 8 32 64 --M 8 --rounds 10
"""
import argparse
import sys

import numpy as np

from boltzfast import _backend
from boltzfast.bench import random_hermitian_field, time_interleaved
from boltzfast.collision import ORACLE_CAPS, build_direct_table, eval_direct, eval_fast
from boltzfast.decomposition import decompose
from boltzfast.grid import S_MAX, half_spectrum_layout, make_config
from boltzfast.kernels import maxwell2d


def kernel_cases(kern, N, dec, f, table):
    layout = half_spectrum_layout(2, N)
    src = np.ascontiguousarray(f.coeffs)
    weight = np.ascontiguousarray(dec.alpha[0])
    spec = np.zeros(layout.pad_shape, dtype=complex)
    gathered = np.empty_like(src)
    acc = np.zeros(layout.phys_shape)
    a = np.random.default_rng(0).random(layout.phys_shape)
    cases = {
        "scatter_half": lambda: kern.scatter_half(spec, src, weight, layout.row_map, N),
        "gather_half": lambda: kern.gather_half(gathered, spec, layout.row_map, N),
        "accumulate_product": lambda: kern.accumulate_product(acc, 0.5, a, a),
        "eval_fast": lambda: eval_fast(f, dec, backend=kern.NAME),
    }
    if table is not None:
        flat = src.reshape(-1)
        cases["direct_sum"] = lambda: kern.direct_sum(table.summand, flat, 2, N)
        cases["eval_direct"] = lambda: eval_direct(f, table, backend=kern.NAME)
    return cases


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--N", type=int, nargs="+", default=[8, 32, 64])
    parser.add_argument("--M", type=int, default=8)
    parser.add_argument("--rounds", type=int, default=10)
    args = parser.parse_args(argv)

    backends = _backend.available()
    if "compiled" not in backends:
        print("compiled extension not built; only the numpy fallback is available", file=sys.stderr)
    print(f"{'N':>4} {'kernel':<20}" + "".join(f"{b + ' [us]':>16}" for b in backends) + f"{'speedup':>10}")
    for N in args.N:
        cfg = make_config(2, N, S_MAX)
        dec = decompose(cfg, maxwell2d(), args.M)
        f = random_hermitian_field(cfg, np.random.default_rng(N))
        table = build_direct_table(dec) if N <= ORACLE_CAPS[2] else None
        times = {}
        for name in backends:
            cases = kernel_cases(_backend.get(name), N, dec, f, table)
            for key, t in time_interleaved(cases, rounds=args.rounds).items():
                times.setdefault(key, {})[name] = t
        for key, by_backend in times.items():
            cells = "".join(f"{by_backend[b] * 1e6:16.2f}" for b in backends)
            speedup = by_backend["python"] / by_backend["compiled"] if len(by_backend) > 1 else float("nan")
            print(f"{N:>4} {key:<20}{cells}{speedup:10.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
