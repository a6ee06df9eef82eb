"""Decoupled collision kernels and the radial transforms phi and psi.

Every kernel handled here satisfies ``Btilde(x, y) = a(|x|) b(|y|)`` with
power-law radial factors ``a(rho) = c |rho|^p``.  The transforms are

    phi_{R,a}(s) = int_{-R}^{R} |rho|^(d-2) a(rho) exp(i rho s) drho
                 = 2 int_0^R rho^(d-2) a(rho) cos(rho s) drho

    psi_{R,b}(r) = int_0^pi phi_{R,b}(r cos theta) dtheta          (d = 3)
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import special

from .errors import NonIntegrable

__all__ = [
    "RadialFactor",
    "KernelModel",
    "maxwell2d",
    "hardsphere3d",
    "vhs",
    "sinc",
    "phi2_closed",
    "phi3_closed",
    "psi3_closed",
    "RadialTransform",
    "phi_radial_quad",
    "psi3_quad",
    "psi3_hankel",
    "phi",
    "psi",
    "quadrature_order_for",
]

DEFAULT_ORDER = 64


@dataclass(frozen=True)
class RadialFactor:
    """Radial weight ``coef * |rho|**power``."""

    coef: float
    power: float = 0.0

    def __call__(self, rho):
        rho = np.abs(np.asarray(rho, dtype=np.float64))
        if self.power == 0.0:
            return np.full_like(rho, self.coef)
        return self.coef * rho**self.power

    @property
    def is_constant(self) -> bool:
        return self.power == 0.0


@dataclass(frozen=True)
class KernelModel:
    """A decoupled collision kernel.

    ``variant`` is ``"maxwell2d"``, ``"hardsphere3d"`` or ``"vhs"``.  The
    whole kernel constant lives in ``a`` and ``b`` is identically one, unless
    ``symmetric`` is set, in which case a constant kernel is split evenly so
    that ``a == b``.
    """

    variant: str
    d: int
    gamma: float
    C: float
    symmetric: bool = False

    def __post_init__(self):
        if self.variant not in ("maxwell2d", "hardsphere3d", "vhs"):
            raise ValueError(f"unknown kernel variant {self.variant!r}")
        if self.d not in (2, 3):
            raise ValueError(f"kernel dimension must be 2 or 3, got {self.d}")
        if self.gamma <= -1.0:
            raise NonIntegrable(
                f"gamma = {self.gamma} makes the radial integral diverge at the origin"
            )
        if self.gamma > 1.0:
            raise ValueError(f"gamma must lie in (-1, 1], got {self.gamma}")
        if not self.C > 0:
            raise ValueError(f"kernel constant must be positive, got {self.C}")

    @property
    def btilde_const(self) -> float:
        return 2.0 ** (self.d - 1) * self.C

    @property
    def radial_power(self) -> float:
        """Exponent of ``|x|`` in ``Btilde``."""
        return self.gamma if self.d == 2 else self.gamma - 1.0

    @property
    def a(self) -> RadialFactor:
        if self.symmetric:
            return RadialFactor(math.sqrt(self.btilde_const), self.radial_power)
        return RadialFactor(self.btilde_const, self.radial_power)

    @property
    def b(self) -> RadialFactor:
        if self.symmetric:
            return RadialFactor(math.sqrt(self.btilde_const), 0.0)
        return RadialFactor(1.0, 0.0)

    @property
    def a_equals_b(self) -> bool:
        return self.a == self.b

    def btilde(self, x_norm, y_norm):
        """``Btilde(|x|, |y|) = a(|x|) b(|y|)``."""
        return self.a(x_norm) * self.b(y_norm)

    def with_symmetric(self, flag: bool) -> "KernelModel":
        return KernelModel(self.variant, self.d, self.gamma, self.C, flag)


def maxwell2d(C: float = 1.0 / (2.0 * math.pi), symmetric: bool = False) -> KernelModel:
    """Two-dimensional Maxwell molecules, ``B = C``."""
    return KernelModel("maxwell2d", 2, 0.0, C, symmetric)


def hardsphere3d(C: float = 1.0 / (4.0 * math.pi), symmetric: bool = False) -> KernelModel:
    """Three-dimensional hard spheres, ``B = C |u|``."""
    return KernelModel("hardsphere3d", 3, 1.0, C, symmetric)


def vhs(gamma: float, d: int, C: float | None = None, symmetric: bool = False) -> KernelModel:
    """Variable hard spheres with the cutoff angular factor."""
    if C is None:
        C = 1.0 / (2.0 * math.pi) if d == 2 else 1.0 / (4.0 * math.pi)
    return KernelModel("vhs", d, float(gamma), C, symmetric)


def sinc(x):
    """``sin(x)/x`` with a Taylor branch for ``|x| < 1e-4``."""
    x = np.asarray(x, dtype=np.float64)
    small = np.abs(x) < 1e-4
    safe = np.where(small, 1.0, x)
    x2 = x * x
    taylor = 1.0 - x2 / 6.0 + x2 * x2 / 120.0 - x2 * x2 * x2 / 5040.0
    out = np.where(small, taylor, np.sin(safe) / safe)
    return out if out.ndim else float(out)


def phi2_closed(R: float, s):
    """``2 R Sinc(R s)``: the 2D transform of ``a = 1``."""
    return 2.0 * R * sinc(R * np.abs(s))


def phi3_closed(R: float, s):
    """``R^2 (2 Sinc(R s) - Sinc(R s / 2)^2)``: the 3D transform of ``a = 1``."""
    x = R * np.abs(s)
    return R * R * (2.0 * sinc(x) - sinc(0.5 * x) ** 2)


def psi3_closed(R: float, r):
    """``2 pi R J1(R r) / r``: ``psi`` for ``b = 1`` in closed form.

    Follows from ``int_0^pi cos(z cos t) dt = pi J0(z)`` and
    ``int_0^R rho J0(rho r) drho = R J1(R r) / r``.
    """
    x = R * np.abs(np.asarray(r, dtype=np.float64))
    small = x < 1e-4
    safe = np.where(small, 1.0, x)
    # J1(x)/x = 1/2 - x^2/16 + x^4/384 - ...
    ratio = np.where(small, 0.5 - x * x / 16.0 + x**4 / 384.0, special.j1(safe) / safe)
    out = 2.0 * math.pi * R * R * ratio
    return out if out.ndim else float(out)


@lru_cache(maxsize=64)
def _jacobi_01(order: int, q: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights for ``int_0^1 t^q g(t) dt`` (Gauss-Legendre when ``q == 0``)."""
    if q == 0.0:
        x, w = np.polynomial.legendre.leggauss(order)
    else:
        x, w = special.roots_jacobi(order, 0.0, q)
    t = 0.5 * (x + 1.0)
    w = w * 0.5 ** (q + 1.0)
    t.setflags(write=False)
    w.setflags(write=False)
    return t, w


@lru_cache(maxsize=64)
def _gauss_legendre_01(order: int) -> tuple[np.ndarray, np.ndarray]:
    return _jacobi_01(order, 0.0)


class RadialTransform:
    """Quadrature data for the radial integrals on ``[0, R]``.

    Parameters
    ----------
    d : int
        Velocity dimension; the radial weight is ``|rho|^(d-2)``.
    R : float
        Truncation radius.
    order : int
        Number of quadrature nodes (at least 64 by default).

    Notes
    -----
    Power-law factors ``c |rho|^p`` are integrated with the Gauss-Jacobi rule
    for the weight ``rho^(d-2+p)``, which reduces to Gauss-Legendre for
    ``d-2+p == 0`` and keeps the rule exact for the endpoint singularity.
    """

    def __init__(self, d: int, R: float, order: int = DEFAULT_ORDER):
        if order < 2:
            raise ValueError("quadrature order must be at least 2")
        self.d = int(d)
        self.R = float(R)
        self.order = int(order)

    def __repr__(self):
        return f"RadialTransform(d={self.d}, R={self.R!r}, order={self.order})"

    def exponent(self, factor: RadialFactor) -> float:
        return self.d - 2 + factor.power

    def has_closed_form(self, factor: RadialFactor) -> bool:
        return self.exponent(factor) in (0.0, 1.0)

    def radial_rule(self, factor: RadialFactor) -> tuple[np.ndarray, np.ndarray]:
        """Nodes ``rho_i`` and weights with ``sum w_i g(rho_i) ~ int_0^R rho^(d-2) a(rho) g(rho)``."""
        q = self.exponent(factor)
        if q <= -1.0:
            raise NonIntegrable(f"weight rho^{q} is not integrable at 0")
        t, w = _jacobi_01(self.order, float(q))
        return self.R * t, factor.coef * self.R ** (q + 1.0) * w


def _cos_sum(nodes, weights, s, chunk=1 << 16):
    # Each value must come out bitwise the same whatever batch it sits in
    # (evenness of the alpha arrays, reuse on refinement), so rows are reduced
    # one by one with numpy's row sum instead of a BLAS product.
    s = np.asarray(s, dtype=np.float64)
    flat, inverse = np.unique(np.abs(s).reshape(-1), return_inverse=True)
    out = np.empty_like(flat)
    for lo in range(0, flat.size, chunk):
        blk = flat[lo:lo + chunk]
        out[lo:lo + chunk] = np.sum(np.cos(np.multiply.outer(blk, nodes)) * weights, axis=1)
    return out[inverse].reshape(s.shape)


def phi_radial_quad(t: RadialTransform, a: RadialFactor | Callable, s):
    """``2 int_0^R rho^(d-2) a(rho) cos(rho s) drho`` by quadrature.

    ``a`` may be a :class:`RadialFactor` (Gauss-Jacobi rule matched to its
    power) or any callable of ``rho`` (Gauss-Legendre with explicit weight).
    """
    if isinstance(a, RadialFactor):
        nodes, w = t.radial_rule(a)
    else:
        x, gw = _gauss_legendre_01(t.order)
        nodes = t.R * x
        w = t.R * gw * nodes ** (t.d - 2) * np.asarray(a(nodes), dtype=np.float64)
    out = 2.0 * _cos_sum(nodes, w, s)
    return out if out.ndim else float(out)


def psi3_quad(t: RadialTransform, b: RadialFactor | Callable, r):
    """``int_0^pi phi_{R,b}(r cos theta) dtheta = 2 int_0^(pi/2) ...`` by Gauss-Legendre in theta."""
    r = np.abs(np.asarray(r, dtype=np.float64))
    x, w = _gauss_legendre_01(t.order)
    theta = 0.5 * math.pi * x
    wt = math.pi * w
    cos_t = np.cos(theta)
    if isinstance(b, RadialFactor) and t.exponent(b) in (0.0, 1.0):
        inner = lambda s: phi(t, b, s)  # noqa: E731
    else:
        inner = lambda s: phi_radial_quad(t, b, s)  # noqa: E731
    vals = inner(np.multiply.outer(r, cos_t))
    out = vals @ wt
    return out if out.ndim else float(out)


def psi3_hankel(t: RadialTransform, b: RadialFactor, r):
    """``2 pi int_0^R rho b(rho) J0(rho r) drho``: ``psi`` for a power-law ``b``."""
    nodes, w = t.radial_rule(b)
    r = np.abs(np.asarray(r, dtype=np.float64))
    flat, inverse = np.unique(r.reshape(-1), return_inverse=True)
    out = np.empty_like(flat)
    chunk = 1 << 15
    for lo in range(0, flat.size, chunk):
        out[lo:lo + chunk] = np.sum(special.j0(np.multiply.outer(flat[lo:lo + chunk], nodes)) * w, axis=1)
    out = 2.0 * math.pi * out[inverse].reshape(r.shape)
    return out if out.ndim else float(out)


def phi(t: RadialTransform, factor: RadialFactor, s):
    """``phi_{R,factor}`` using a closed form whenever the weight exponent is 0 or 1."""
    q = t.exponent(factor)
    if q == 0.0:
        return factor.coef * phi2_closed(t.R, s)
    if q == 1.0:
        return factor.coef * phi3_closed(t.R, s)
    return phi_radial_quad(t, factor, s)


def psi(t: RadialTransform, factor: RadialFactor, r):
    """``psi_{R,factor}`` (3D only): Bessel closed form for constant factors."""
    if t.d != 3:
        raise ValueError("psi is defined for d = 3 only")
    if factor.is_constant:
        return factor.coef * psi3_closed(t.R, r)
    return psi3_hankel(t, factor, r)


def quadrature_order_for(R: float, s_max: float, base: int = DEFAULT_ORDER) -> int:
    """Node count that resolves ``cos(rho s)`` on ``[0, R]`` for ``|s| <= s_max``."""
    return max(base, int(math.ceil(0.6 * R * s_max)) + 32)
