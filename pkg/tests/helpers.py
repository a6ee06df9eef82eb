"""Brute-force oracles shared by the test modules."""
import itertools

import numpy as np


def brute_convolution(g: np.ndarray, h: np.ndarray, N: int, d: int) -> np.ndarray:
    """``sum_{l+m=k} g_l h_m`` by an explicit loop over every pair."""
    n = 2 * N + 1
    out = np.zeros((n,) * d, dtype=complex)
    modes = list(itertools.product(range(-N, N + 1), repeat=d))
    for l in modes:
        for m in modes:
            k = tuple(a + b for a, b in zip(l, m))
            if all(abs(c) <= N for c in k):
                out[tuple(c + N for c in k)] += g[tuple(c + N for c in l)] * h[tuple(c + N for c in m)]
    return out


def brute_collision(beta_hat, f: np.ndarray, N: int, d: int) -> np.ndarray:
    """``sum_{l+m=k} betahat(l, m) f_l f_m`` with ``beta_hat`` a function of two mode tuples."""
    n = 2 * N + 1
    out = np.zeros((n,) * d, dtype=complex)
    modes = list(itertools.product(range(-N, N + 1), repeat=d))
    for l in modes:
        for m in modes:
            k = tuple(a + b for a, b in zip(l, m))
            if all(abs(c) <= N for c in k):
                out[tuple(c + N for c in k)] += (beta_hat(l, m) * f[tuple(c + N for c in l)]
                                                 * f[tuple(c + N for c in m)])
    return out


def hermitian_coeffs(rng, N: int, d: int, decay: float = 0.0) -> np.ndarray:
    n = 2 * N + 1
    c = rng.standard_normal((n,) * d) + 1j * rng.standard_normal((n,) * d)
    if decay:
        k = np.arange(-N, N + 1)
        k2 = sum(g * g for g in np.meshgrid(*([k] * d), indexing="ij"))
        c = c * np.exp(-decay * k2)
    flipped = np.conj(c[(slice(None, None, -1),) * d])
    return 0.5 * (c + flipped)
