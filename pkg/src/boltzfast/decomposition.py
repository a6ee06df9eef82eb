"""Factorised kernel modes ``beta(l, m) ~ sum_p w_p alpha_p(l) alpha'_p(m)``.

The collision directions are discretised with the rectangular rule:

* 2D: ``e_p = (cos t_p, sin t_p)`` with ``t_p = pi p / M`` and weight ``pi / M``;
  ``alpha_p(l) = phi_a(l . e_p)`` and ``alpha'_p(m) = phi_b(m . e_p^perp)``.
* 3D: ``e_pq`` at ``(theta_p, varphi_q) = (pi p / M, pi q / M)`` with weight
  ``pi^2 / M^2`` (optionally times ``sin theta_p``);
  ``alpha_pq(l) = phi_a(l . e)`` and ``alpha'_pq(m) = psi_b(|m - (m.e) e|)``.

Terms are stored densely on the full mode lattice and kept in ascending
``p`` (then ``q``) order; every reduction over terms follows that order.
"""
from __future__ import annotations

import math
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DumpFormatError, IndexOutOfRange, QuadratureNoConvergence, SymmetricFlagInvalid
from .grid import DomainConfig, make_config, mode_vectors
from .kernels import KernelModel, RadialTransform, phi, psi, quadrature_order_for

__all__ = [
    "Decomposition",
    "decompose",
    "decompose_2d",
    "decompose_3d",
    "refine",
    "reconstruct_beta",
    "beta_matrix",
    "beta_oracle_2d",
    "save_decomposition",
    "load_decomposition",
]

DECOMP_MAGIC = b"CSBD1"
FLAG_SYMMETRIC_HALF = 1
FLAG_JACOBIAN = 2


@dataclass(eq=False)
class Decomposition:
    config: DomainConfig
    M: int
    weights: np.ndarray
    directions: np.ndarray
    alpha: np.ndarray
    alpha_prime: np.ndarray
    diag: np.ndarray
    symmetric_half: bool = False
    jacobian: bool = False
    kernel: KernelModel | None = field(default=None, repr=False)

    @property
    def d(self) -> int:
        return self.config.d

    @property
    def N(self) -> int:
        return self.config.N

    @property
    def P(self) -> int:
        return self.weights.shape[0]

    @property
    def flags(self) -> int:
        return FLAG_SYMMETRIC_HALF * self.symmetric_half + FLAG_JACOBIAN * self.jacobian

    @property
    def nbytes(self) -> int:
        return self.alpha.nbytes + self.alpha_prime.nbytes + self.diag.nbytes


def _loss_diagonal(weights, alpha, alpha_prime):
    diag = np.zeros(alpha.shape[1:])
    for p in range(weights.shape[0]):
        diag += weights[p] * (alpha[p] * alpha_prime[p])
    return diag


def _resolve_order(config: DomainConfig, order: int | None) -> int:
    if order is not None:
        return order
    return quadrature_order_for(config.R, math.sqrt(config.d) * config.N)


def _angles(M: int, span: float) -> np.ndarray:
    # p / M is computed first so that the M and 2M grids share nodes bit for bit
    return np.array([span * (p / M) for p in range(M)])


def _terms_2d(config, kernel, thetas, order):
    t = RadialTransform(2, config.R, order)
    k = mode_vectors(config).astype(np.float64)
    c, s = np.cos(thetas), np.sin(thetas)
    along = c[:, None, None] * k[0] + s[:, None, None] * k[1]
    across = -s[:, None, None] * k[0] + c[:, None, None] * k[1]
    alpha = np.ascontiguousarray(phi(t, kernel.a, along))
    alpha_prime = np.ascontiguousarray(phi(t, kernel.b, across))
    return np.stack([c, s], axis=1), alpha, alpha_prime


def decompose_2d(config: DomainConfig, kernel: KernelModel, M: int,
                 symmetric_half: bool = False, order: int | None = None) -> Decomposition:
    """Rectangular-rule factorisation in two dimensions.

    With ``symmetric_half`` the directions cover ``[0, pi/2)`` only; this is
    valid when ``a == b`` because the gain sum over ``l + m = k`` only sees the
    part of ``beta`` symmetric in ``(l, m)``.  The constant of a constant
    kernel is then split evenly between ``a`` and ``b``.
    """
    if config.d != 2:
        raise ValueError("decompose_2d needs a 2D config")
    if M < 1:
        raise ValueError("M must be at least 1")
    if symmetric_half:
        kernel = kernel.with_symmetric(True)
        if not kernel.a_equals_b:
            raise SymmetricFlagInvalid("half-interval directions need a == b")
    thetas = _angles(M, 0.5 * math.pi if symmetric_half else math.pi)
    weights = np.full(M, math.pi / M)
    dirs, alpha, alpha_prime = _terms_2d(config, kernel, thetas, _resolve_order(config, order))
    return Decomposition(config, M, weights, dirs, alpha, alpha_prime,
                         _loss_diagonal(weights, alpha, alpha_prime),
                         symmetric_half=symmetric_half, jacobian=False, kernel=kernel)


def _directions_3d(M: int) -> tuple[np.ndarray, np.ndarray]:
    th = _angles(M, math.pi)
    ph = _angles(M, math.pi)
    T, F = np.meshgrid(th, ph, indexing="ij")
    T, F = T.ravel(), F.ravel()
    dirs = np.stack([np.sin(T) * np.cos(F), np.sin(T) * np.sin(F), np.cos(T)], axis=1)
    return dirs, T


def _terms_3d(config, kernel, dirs, order):
    t = RadialTransform(3, config.R, order)
    k = mode_vectors(config).astype(np.float64)
    k2 = np.sum(k * k, axis=0)
    P = dirs.shape[0]
    alpha = np.empty((P,) + config.shape)
    alpha_prime = np.empty((P,) + config.shape)
    for p in range(P):
        e = dirs[p]
        dot = e[0] * k[0] + e[1] * k[1] + e[2] * k[2]
        alpha[p] = phi(t, kernel.a, dot)
        alpha_prime[p] = psi(t, kernel.b, np.sqrt(np.maximum(k2 - dot * dot, 0.0)))
    return alpha, alpha_prime


def decompose_3d(config: DomainConfig, kernel: KernelModel, M: int,
                 jacobian: bool = False, order: int | None = None) -> Decomposition:
    """Rectangular-rule factorisation over the half sphere with ``M^2`` directions.

    ``jacobian`` multiplies each weight by ``sin(theta_p)``.  Without it the
    angular integrand is smooth and periodic in both angles and the rule
    converges spectrally; with it the rule follows the surface measure but
    only converges at second order.
    """
    if config.d != 3:
        raise ValueError("decompose_3d needs a 3D config")
    if M < 1:
        raise ValueError("M must be at least 1")
    dirs, thetas = _directions_3d(M)
    weights = np.full(M * M, math.pi**2 / (M * M))
    if jacobian:
        weights = weights * np.sin(thetas)
    alpha, alpha_prime = _terms_3d(config, kernel, dirs, _resolve_order(config, order))
    return Decomposition(config, M, weights, dirs, alpha, alpha_prime,
                         _loss_diagonal(weights, alpha, alpha_prime),
                         symmetric_half=False, jacobian=jacobian, kernel=kernel)


def decompose(config: DomainConfig, kernel: KernelModel, M: int, *, symmetric_half: bool = False,
              jacobian: bool = False, order: int | None = None) -> Decomposition:
    if kernel.d != config.d:
        raise ValueError(f"kernel is {kernel.d}D but the config is {config.d}D")
    if config.d == 2:
        return decompose_2d(config, kernel, M, symmetric_half=symmetric_half, order=order)
    return decompose_3d(config, kernel, M, jacobian=jacobian, order=order)


def refine(dec: Decomposition, order: int | None = None) -> Decomposition:
    """Double ``M``, reusing every direction already present.

    The ``M`` grid is the even-indexed subset of the ``2M`` grid, so only the
    odd-indexed directions are evaluated.
    """
    if dec.kernel is None:
        raise ValueError("refinement needs the kernel the decomposition was built from")
    cfg, M2 = dec.config, 2 * dec.M
    order = _resolve_order(cfg, order)
    if dec.d == 2:
        span = 0.5 * math.pi if dec.symmetric_half else math.pi
        thetas = _angles(M2, span)
        new = np.arange(1, M2, 2)
        dirs_new, a_new, ap_new = _terms_2d(cfg, dec.kernel, thetas[new], order)
        old = np.arange(0, M2, 2)
        idx_new, idx_old = new, old
        weights = np.full(M2, math.pi / M2)
        dirs = np.empty((M2, 2))
    else:
        dirs_all, thetas = _directions_3d(M2)
        pp, qq = np.divmod(np.arange(M2 * M2), M2)
        is_old = (pp % 2 == 0) & (qq % 2 == 0)
        idx_old = np.flatnonzero(is_old)
        idx_new = np.flatnonzero(~is_old)
        a_new, ap_new = _terms_3d(cfg, dec.kernel, dirs_all[idx_new], order)
        dirs_new = dirs_all[idx_new]
        weights = np.full(M2 * M2, math.pi**2 / (M2 * M2))
        if dec.jacobian:
            weights = weights * np.sin(thetas)
        dirs = np.empty((M2 * M2, 3))
    P2 = weights.shape[0]
    alpha = np.empty((P2,) + cfg.shape)
    alpha_prime = np.empty((P2,) + cfg.shape)
    alpha[idx_old], alpha_prime[idx_old], dirs[idx_old] = dec.alpha, dec.alpha_prime, dec.directions
    alpha[idx_new], alpha_prime[idx_new], dirs[idx_new] = a_new, ap_new, dirs_new
    return Decomposition(cfg, M2, weights, dirs, alpha, alpha_prime,
                         _loss_diagonal(weights, alpha, alpha_prime),
                         symmetric_half=dec.symmetric_half, jacobian=dec.jacobian, kernel=dec.kernel)


def _lattice_index(dec: Decomposition, mode) -> tuple[int, ...]:
    mode = tuple(int(c) for c in mode)
    if len(mode) != dec.d or any(abs(c) > dec.N for c in mode):
        raise IndexOutOfRange(f"mode {mode} is outside the lattice |k_i| <= {dec.N}")
    return tuple(c + dec.N for c in mode)


def reconstruct_beta(dec: Decomposition, l, m) -> float:
    """``sum_p w_p alpha_p(l) alpha'_p(m)`` accumulated in term order."""
    il, im = _lattice_index(dec, l), _lattice_index(dec, m)
    a = dec.alpha[(slice(None),) + il]
    ap = dec.alpha_prime[(slice(None),) + im]
    acc = 0.0
    for p in range(dec.P):
        acc += dec.weights[p] * (a[p] * ap[p])
    return float(acc)


def beta_matrix(dec: Decomposition) -> np.ndarray:
    """All ``beta(l, m)`` as a ``(n^d, n^d)`` array, same arithmetic as :func:`reconstruct_beta`."""
    size = dec.config.n**dec.d
    a = dec.alpha.reshape(dec.P, size)
    ap = dec.alpha_prime.reshape(dec.P, size)
    out = np.zeros((size, size))
    for p in range(dec.P):
        out += dec.weights[p] * np.multiply.outer(a[p], ap[p])
    return out


# Adaptive Gauss-Kronrod (7/15) with a global error budget; kept apart from
# the rectangular rule so it can serve as an independent check.
_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])
_X15 = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_W15 = np.concatenate([_WGK[:-1], _WGK[::-1]])
_W7 = np.zeros(15)
_W7[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG[:-1], _WG[::-1]])


def _adaptive_gk(func, a, b, tol, max_intervals=4000):
    def rule(lo, hi):
        half, mid = 0.5 * (hi - lo), 0.5 * (hi + lo)
        y = func(mid + half * _X15)
        k, g = half * (_W15 @ y), half * (_W7 @ y)
        return k, abs(k - g)

    k0, e0 = rule(a, b)
    intervals = [(e0, a, b, k0)]
    total_err = e0
    while total_err > tol:
        if len(intervals) >= max_intervals:
            raise QuadratureNoConvergence(
                f"error estimate {total_err:.3e} above {tol:.1e} after {max_intervals} intervals"
            )
        intervals.sort(key=lambda it: it[0])
        err, lo, hi, _ = intervals.pop()
        mid = 0.5 * (lo + hi)
        kl, el = rule(lo, mid)
        kr, er = rule(mid, hi)
        intervals.append((el, lo, mid, kl))
        intervals.append((er, mid, hi, kr))
        total_err = sum(it[0] for it in intervals)
        if hi - lo < 1e-14 * (b - a):
            raise QuadratureNoConvergence("interval bisection hit the resolution floor")
    return math.fsum(it[3] for it in sorted(intervals, key=lambda it: it[1]))


def beta_oracle_2d(config: DomainConfig, kernel: KernelModel, l, m, tol: float = 1e-12,
                   order: int | None = None) -> float:
    """``int_0^pi phi_a(l . e_t) phi_b(m . e_{t+pi/2}) dt`` by adaptive Gauss-Kronrod."""
    if config.d != 2:
        raise ValueError("beta_oracle_2d needs a 2D config")
    t = RadialTransform(2, config.R, _resolve_order(config, order))
    l0, l1 = float(l[0]), float(l[1])
    m0, m1 = float(m[0]), float(m[1])

    def integrand(theta):
        c, s = np.cos(theta), np.sin(theta)
        return phi(t, kernel.a, l0 * c + l1 * s) * phi(t, kernel.b, -m0 * s + m1 * c)

    return _adaptive_gk(integrand, 0.0, math.pi, tol)


_HEADER = struct.Struct("<qqqqdd")


def save_decomposition(path: str | Path, dec: Decomposition) -> None:
    """Write a ``CSBD1`` dump.

    Layout (little endian): magic, int64 ``d, N, M, flags``, float64 ``S, scale``,
    float64 weights ``(P,)``, directions ``(P, d)``, alpha and alpha' ``(P, n^d)``,
    diagonal ``(n^d,)``, then the CRC32 of all preceding bytes as uint32.
    """
    cfg = dec.config
    parts = [DECOMP_MAGIC, _HEADER.pack(cfg.d, cfg.N, dec.M, dec.flags, cfg.S, cfg.scale)]
    for arr in (dec.weights, dec.directions, dec.alpha, dec.alpha_prime, dec.diag):
        parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    body = b"".join(parts)
    with open(path, "wb") as fh:
        fh.write(body)
        fh.write(struct.pack("<I", zlib.crc32(body)))


def load_decomposition(path: str | Path) -> Decomposition:
    data = Path(path).read_bytes()
    head = len(DECOMP_MAGIC) + _HEADER.size
    if len(data) < head + 4 or data[: len(DECOMP_MAGIC)] != DECOMP_MAGIC:
        raise DumpFormatError(f"{path}: not a CSBD1 decomposition dump")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) != crc:
        raise DumpFormatError(f"{path}: checksum mismatch")
    d, N, M, flags, S, scale = _HEADER.unpack(data[len(DECOMP_MAGIC):head])
    if d not in (2, 3) or N < 1 or M < 1:
        raise DumpFormatError(f"{path}: bad header d={d} N={N} M={M}")
    cfg = make_config(d, N, S, scale)
    P = M ** (d - 1)
    size = cfg.n**d
    counts = [P, P * d, P * size, P * size, size]
    if len(body) - head != 8 * sum(counts):
        raise DumpFormatError(f"{path}: payload size does not match d={d} N={N} M={M}")
    arrays, off = [], head
    for c in counts:
        arrays.append(np.frombuffer(body, dtype="<f8", count=c, offset=off).astype(np.float64))
        off += 8 * c
    w, dirs, a, ap, diag = arrays
    return Decomposition(cfg, M, w, dirs.reshape(P, d), a.reshape((P,) + cfg.shape),
                         ap.reshape((P,) + cfg.shape), diag.reshape(cfg.shape),
                         symmetric_half=bool(flags & FLAG_SYMMETRIC_HALF),
                         jacobian=bool(flags & FLAG_JACOBIAN))
