"""Projected collision operator: fast factorised path and direct double sum.

Both evaluate

    Qhat_k = sum_{l + m = k} betahat(l, m) fhat_l fhat_m,
    betahat(l, m) = beta(l, m) - beta(m, m).

The fast path rewrites the gain part as ``P`` weighted products of two
filtered fields and the loss part as one product with the diagonal ``D``,
all formed on a zero-padded real grid.
"""
from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from . import _backend
from .decomposition import Decomposition, beta_matrix, beta_oracle_2d
from .errors import ConfigMismatch, ShapeMismatch, TooLargeForOracle
from .grid import DomainConfig, FourierField, half_spectrum_layout, pad_half, unpad_half
from .kernels import KernelModel

__all__ = [
    "DirectKernelTable",
    "ORACLE_CAPS",
    "build_direct_table",
    "eval_fast",
    "eval_direct",
    "gain_loss_fast",
]

#: Largest ``N`` accepted for dense kernel-mode tables, per dimension.
ORACLE_CAPS = {2: 12, 3: 5}


def _same_box(a: DomainConfig, b: DomainConfig) -> bool:
    return (a.d, a.N, a.S) == (b.d, b.N, b.S)


def _batch_values(fhat, weights, layout, kern):
    """Physical padded-grid values of ``w * fhat`` for each weight array (``None`` = unweighted)."""
    spec = np.zeros((len(weights),) + layout.pad_shape, dtype=np.complex128)
    for j, w in enumerate(weights):
        pad_half(layout, fhat, w, out=spec[j], kern=kern)
    axes = tuple(range(1, layout.d + 1))
    return sfft.irfftn(spec, s=layout.phys_shape, axes=axes, norm="forward", workers=1)


def gain_loss_fast(f: FourierField, dec: Decomposition, threads: int = 1, backend: str | None = None):
    """Padded physical-space accumulator ``sum_p w_p A_p B_p - F G``.

    Each term is transformed on its own, and the products are reduced
    strictly in ascending ``p`` with the loss product last.  Workers only
    produce ``(A_p, B_p)``, so the result is bit-identical for every
    ``threads`` value.
    """
    if not _same_box(f.config, dec.config):
        raise ConfigMismatch("field and decomposition were built on different configs")
    kern = _backend.get(backend)
    layout = half_spectrum_layout(dec.d, dec.N)
    fhat = np.ascontiguousarray(f.coeffs)
    acc = np.zeros(layout.phys_shape)

    def term(p):
        return _batch_values(fhat, (dec.alpha[p], dec.alpha_prime[p]), layout, kern)

    def reduce(p, vals):
        kern.accumulate_product(acc, float(dec.weights[p]), vals[0], vals[1])

    if threads <= 1:
        for p in range(dec.P):
            reduce(p, term(p))
    else:
        window = 2 * threads
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for lo in range(0, dec.P, window):
                ps = range(lo, min(dec.P, lo + window))
                for p, vals in zip(ps, pool.map(term, ps)):
                    reduce(p, vals)
    loss = _batch_values(fhat, (None, dec.diag), layout, kern)
    kern.accumulate_product(acc, -1.0, loss[0], loss[1])
    return acc, layout, kern


def eval_fast(f: FourierField, dec: Decomposition, threads: int = 1, backend: str | None = None) -> FourierField:
    """``P_N Q^{R,M}(f, f)`` with ``P + 1`` padded products, cost ``O(M^(d-1) N^d log N)``.

    ``f`` must be Hermitian (a real distribution); the real-to-complex
    transforms rely on it.
    """
    acc, layout, kern = gain_loss_fast(f, dec, threads=threads, backend=backend)
    spec = sfft.rfftn(acc, norm="forward", workers=1)
    return FourierField(unpad_half(layout, spec, kern=kern), f.config)


def _in_range_mask(d: int, N: int) -> np.ndarray:
    """``mask[l, m]`` is true when ``l + m`` stays on the lattice."""
    modes = np.array(list(itertools.product(range(-N, N + 1), repeat=d)))
    return np.all(np.abs(modes[:, None, :] + modes[None, :, :]) <= N, axis=2)


@dataclass(eq=False)
class DirectKernelTable:
    """Dense ``betahat(l, m)`` over the lattice, shape ``(n^d, n^d)`` (row ``l``, column ``m``).

    ``summand`` is the same table with pairs whose sum leaves the lattice
    zeroed; the compiled double sum streams over it without bounds tests.
    """

    config: DomainConfig
    beta_hat: np.ndarray
    provenance: str
    summand: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        _check_cap(self.config)
        size = self.config.n ** self.config.d
        if self.beta_hat.shape != (size, size):
            raise ShapeMismatch(f"table shape {self.beta_hat.shape}, expected {(size, size)}")
        mask = _in_range_mask(self.config.d, self.config.N)
        self.summand = np.ascontiguousarray(np.where(mask, self.beta_hat, 0.0))

    def at(self, l, m) -> float:
        n, N = self.config.n, self.config.N
        li = np.ravel_multi_index(tuple(c + N for c in l), (n,) * self.config.d)
        mi = np.ravel_multi_index(tuple(c + N for c in m), (n,) * self.config.d)
        return float(self.beta_hat[li, mi])


def _check_cap(config: DomainConfig) -> None:
    cap = ORACLE_CAPS[config.d]
    if config.N > cap:
        raise TooLargeForOracle(f"N = {config.N} exceeds the {config.d}D table cap {cap}")


def _oracle_beta_2d(config: DomainConfig, kernel: KernelModel, tol: float) -> np.ndarray:
    # beta depends on (|l|^2, |m|^2, |l.m|) only; one quadrature per class
    N = config.N
    modes = list(itertools.product(range(-N, N + 1), repeat=2))
    size = len(modes)
    lm = np.array(modes)
    nl = np.sum(lm * lm, axis=1)
    cache: dict[tuple[int, int, int], float] = {}
    out = np.empty((size, size))
    for i, l in enumerate(modes):
        dots = np.abs(lm @ lm[i])
        for j in range(size):
            key = (int(nl[i]), int(nl[j]), int(dots[j]))
            val = cache.get(key)
            if val is None:
                val = beta_oracle_2d(config, kernel, l, modes[j], tol=tol)
                cache[key] = val
            out[i, j] = val
    return out


def build_direct_table(source: Decomposition | str, config: DomainConfig | None = None,
                       kernel: KernelModel | None = None, tol: float = 1e-12) -> DirectKernelTable:
    """Materialise ``betahat`` from a decomposition or from the adaptive oracle.

    ``source`` is either a :class:`Decomposition` or the string ``"oracle"``
    (2D only, needs ``config`` and ``kernel``).
    """
    if isinstance(source, Decomposition):
        _check_cap(source.config)
        beta = beta_matrix(source)
        provenance = "from-decomposition"
        config = source.config
    elif source == "oracle":
        if config is None or kernel is None:
            raise ValueError("the oracle table needs a config and a kernel")
        if config.d != 2:
            raise ValueError("the quadrature oracle exists for d = 2 only")
        _check_cap(config)
        beta = _oracle_beta_2d(config, kernel, tol)
        provenance = "from-oracle-quadrature"
    else:
        raise ValueError(f"unknown table source {source!r}")
    beta_hat = beta - np.diag(beta)[None, :]
    return DirectKernelTable(config, np.ascontiguousarray(beta_hat), provenance)


def eval_direct(f: FourierField, table: DirectKernelTable, backend: str | None = None) -> FourierField:
    """Literal ``O(N^(2d))`` double sum over ``l + m = k``."""
    if not _same_box(f.config, table.config):
        raise ConfigMismatch("field and kernel table were built on different configs")
    kern = _backend.get(backend)
    cfg = f.config
    q = kern.direct_sum(table.summand, np.ascontiguousarray(f.coeffs).reshape(-1), cfg.d, cfg.N)
    return FourierField(q.reshape(f.coeffs.shape), cfg)
