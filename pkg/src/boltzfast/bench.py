"""Timing helpers for the fast and direct collision paths.

Wall-clock numbers on shared machines are noisy, so every case is timed in
short interleaved rounds and the fastest round is kept.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .collision import ORACLE_CAPS, build_direct_table, eval_direct, eval_fast
from .decomposition import decompose
from .grid import DomainConfig, FourierField, make_config
from .kernels import KernelModel

__all__ = [
    "BenchRow",
    "random_hermitian_field",
    "time_interleaved",
    "fit_exponent",
    "run_bench",
]


@dataclass(frozen=True)
class BenchRow:
    d: int
    N: int
    M: int
    t_fast: float
    t_direct: float | None

    @property
    def ratio(self) -> float | None:
        return None if self.t_direct is None else self.t_direct / self.t_fast


def random_hermitian_field(config: DomainConfig, rng: np.random.Generator, decay: float = 0.0) -> FourierField:
    """Random real-valued field: Hermitian coefficients, optional ``exp(-decay |k|^2)`` envelope."""
    c = rng.standard_normal(config.shape) + 1j * rng.standard_normal(config.shape)
    if decay:
        k2 = sum(g * g for g in np.meshgrid(*([np.arange(-config.N, config.N + 1)] * config.d), indexing="ij"))
        c = c * np.exp(-decay * k2)
    return FourierField(c, config).hermitian_part()


def time_interleaved(cases: dict, rounds: int = 20, target: float = 0.01) -> dict:
    """Best per-call time of each zero-argument callable in ``cases``.

    Each round runs every case for about ``target`` seconds; cases are
    visited in turn so slow spells of the host hit all of them alike.
    """
    plan = {}
    for key, fn in cases.items():
        fn()
        t0 = time.perf_counter()
        fn()
        est = max(time.perf_counter() - t0, 1e-7)
        plan[key] = (fn, max(1, int(target / est)))
    best = {key: float("inf") for key in cases}
    for _ in range(rounds):
        for key, (fn, num) in plan.items():
            t0 = time.perf_counter()
            for _ in range(num):
                fn()
            best[key] = min(best[key], (time.perf_counter() - t0) / num)
    return best


def fit_exponent(Ns: Sequence[float], times: Sequence[float], log_factor: bool = False) -> float:
    """Least-squares slope of ``log t`` against ``log N`` (``t / log N`` when ``log_factor``)."""
    x = np.log(np.asarray(Ns, dtype=float))
    y = np.log(np.asarray(times, dtype=float))
    if log_factor:
        y = y - np.log(x)
    return float(np.polyfit(x, y, 1)[0])


def run_bench(d: int, kernel: KernelModel, Ns: Sequence[int], Ms: Sequence[int], S: float,
              direct_Ns: Sequence[int] = (), direct_M: int | None = None, rounds: int = 20,
              seed: int = 0, threads: int = 1, backend: str | None = None,
              progress: Callable[[str], None] | None = None) -> tuple[list[BenchRow], dict]:
    """Time ``eval_fast`` over ``Ns x Ms`` and ``eval_direct`` over ``direct_Ns``.

    Direct timings are only taken where the dense table fits under the
    size cap.  Returns the rows and the fitted exponents.
    """
    rng = np.random.default_rng(seed)
    fast_cases, direct_cases = {}, {}
    direct_M = direct_M if direct_M is not None else min(Ms)
    for N in sorted(set(Ns) | set(direct_Ns)):
        cfg = make_config(d, N, S)
        f = random_hermitian_field(cfg, rng)
        for M in Ms:
            if N in Ns:
                dec = decompose(cfg, kernel, M)
                fast_cases[(N, M)] = (lambda f=f, dec=dec: eval_fast(f, dec, threads=threads, backend=backend))
        if N in direct_Ns and N <= ORACLE_CAPS[d]:
            dec = decompose(cfg, kernel, direct_M)
            if (N, direct_M) not in fast_cases:
                fast_cases[(N, direct_M)] = (lambda f=f, dec=dec: eval_fast(f, dec, threads=threads, backend=backend))
            table = build_direct_table(dec)
            direct_cases[(N, direct_M)] = (lambda f=f, table=table: eval_direct(f, table, backend=backend))
        if progress:
            progress(f"prepared N={N}")
    fast = time_interleaved(fast_cases, rounds=rounds)
    direct = time_interleaved(direct_cases, rounds=rounds) if direct_cases else {}
    rows = [BenchRow(d, N, M, fast[(N, M)], direct.get((N, M))) for (N, M) in sorted(fast)]
    fits = {}
    for M in Ms:
        pts = [(N, fast[(N, M)]) for N in sorted(Ns)]
        if len(pts) >= 2:
            fits[f"fast_exponent_M{M}"] = fit_exponent(*zip(*pts), log_factor=True)
    ms = sorted(Ms)
    for lo, hi in zip(ms, ms[1:]):
        if hi == 2 * lo:
            for N in sorted(Ns):
                fits[f"m_doubling_N{N}_M{lo}"] = fast[(N, hi)] / fast[(N, lo)]
    if len(direct) >= 2:
        pts = sorted(direct.items())
        fits["direct_exponent"] = fit_exponent([k[0] for k, _ in pts], [t for _, t in pts])
    return rows, fits
