"""Exact BKW relaxation for 2D Maxwell molecules and error norms.

The physical solution is

    f(t, v) = exp(-|v|^2 / (2s)) / (2 pi s^2) * [2s - 1 + (1 - s) |v|^2 / (2s)],
    s(t) = 1 - exp(-t/8) / 2,

valid for the kernel ``B = 1/(2 pi)``.  It is sampled on the box through
the mass-preserving map ``g(w) = L^2 f(L w)``, where ``L = config.scale``.
For Maxwell molecules that map commutes with the collision operator, so
the ``t/8`` clock carries over to box units unchanged.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import ResidualTooLarge, WrongKernelClock, ZeroReference
from .grid import S_MAX, DomainConfig, FourierField, from_fourier, make_config, to_fourier, velocity_grid
from .kernels import KernelModel, maxwell2d

__all__ = [
    "BKW_C",
    "BkwState",
    "bkw",
    "bkw_dt",
    "bkw_scale",
    "bkw_config",
    "bkw_box",
    "bkw_box_dt",
    "bkw_field",
    "check_kernel_clock",
    "verify_bkw_residual",
    "rel_l1_error",
]

#: Kernel constant the BKW clock is tied to.
BKW_C = 1.0 / (2.0 * math.pi)


@dataclass(frozen=True)
class BkwState:
    t: float

    @property
    def s(self) -> float:
        return 1.0 - 0.5 * math.exp(-self.t / 8.0)

    @property
    def ds_dt(self) -> float:
        return math.exp(-self.t / 8.0) / 16.0


def check_kernel_clock(kernel: KernelModel | None) -> None:
    """Raise :class:`WrongKernelClock` unless ``kernel`` is 2D Maxwell with ``C = 1/(2 pi)``."""
    if kernel is None:
        return
    if kernel.variant != "maxwell2d" and not (kernel.variant == "vhs" and kernel.d == 2 and kernel.gamma == 0.0):
        raise WrongKernelClock(f"BKW needs 2D Maxwell molecules, got {kernel.variant} (d={kernel.d})")
    if not math.isclose(kernel.C, BKW_C, rel_tol=1e-14, abs_tol=0.0):
        raise WrongKernelClock(f"BKW clock assumes C = 1/(2 pi), got C = {kernel.C!r}")


def _check_time(t: float) -> None:
    if not t >= 0:
        raise ValueError(f"BKW time must be nonnegative, got {t}")


def _radius2(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape[-1:] != (2,):
        raise ValueError(f"velocities need a trailing axis of length 2, got shape {v.shape}")
    return np.sum(v * v, axis=-1)


def _profile(s: float, r2):
    return np.exp(-r2 / (2.0 * s)) / (2.0 * math.pi * s * s) * (2.0 * s - 1.0 + (1.0 - s) * r2 / (2.0 * s))


def _profile_ds(s: float, r2):
    g = np.exp(-r2 / (2.0 * s)) / (2.0 * math.pi * s * s)
    h = 2.0 * s - 1.0 + (1.0 - s) * r2 / (2.0 * s)
    return g * ((r2 / (2.0 * s * s) - 2.0 / s) * h + 2.0 - r2 / (2.0 * s * s))


def bkw(t: float, v, kernel: KernelModel | None = None) -> np.ndarray:
    """Physical BKW density at velocities ``v`` (trailing axis of length 2)."""
    check_kernel_clock(kernel)
    _check_time(t)
    return _profile(BkwState(t).s, _radius2(v))


def bkw_dt(t: float, v, kernel: KernelModel | None = None) -> np.ndarray:
    """Analytic ``d/dt`` of :func:`bkw`."""
    check_kernel_clock(kernel)
    _check_time(t)
    st = BkwState(t)
    return _profile_ds(st.s, _radius2(v)) * st.ds_dt


def bkw_scale(S: float = S_MAX, threshold: float = 1e-12) -> float:
    """Velocity scale ``L`` putting the effective BKW support on the box radius ``S``.

    The support radius is where the largest value of the physical solution
    over all times drops to ``threshold``.
    """
    s_grid = np.linspace(0.5, 1.0, 501)

    def envelope(r):
        return float(np.max(_profile(s_grid, r * r))) - threshold

    radius = brentq(envelope, 1.0, 50.0, xtol=1e-14)
    return radius / S


def bkw_config(N: int, S: float = S_MAX, threshold: float = 1e-12) -> DomainConfig:
    """2D config whose velocity scale matches the BKW support."""
    return make_config(2, N, S, scale=bkw_scale(S, threshold))


def _box_points(config: DomainConfig) -> np.ndarray:
    if config.d != 2:
        raise ValueError("BKW is a two-dimensional solution")
    w = np.stack(np.meshgrid(*velocity_grid(config), indexing="ij"), axis=-1)
    return config.scale * w


def bkw_box(t: float, config: DomainConfig) -> np.ndarray:
    """Box-unit grid values ``L^2 f(t, L w)``."""
    return config.scale ** 2 * bkw(t, _box_points(config))


def bkw_box_dt(t: float, config: DomainConfig) -> np.ndarray:
    return config.scale ** 2 * bkw_dt(t, _box_points(config))


def bkw_field(t: float, config: DomainConfig) -> FourierField:
    """Fourier coefficients of the sampled BKW solution."""
    return to_fourier(bkw_box(t, config), config)


def verify_bkw_residual(config: DomainConfig, t: float, M: int = 64, tol: float | None = 1e-6,
                        kernel: KernelModel | None = None, dec=None) -> float:
    """Sup-norm residual ``|P_N Q(f_N, f_N) - d/dt f_N|`` on the grid, in box units.

    Raises :class:`ResidualTooLarge` when ``tol`` is given and exceeded.
    ``t = inf`` checks the limiting Maxwellian.
    """
    from .collision import eval_fast
    from .decomposition import decompose

    kernel = maxwell2d() if kernel is None else kernel
    check_kernel_clock(kernel)
    if dec is None:
        dec = decompose(config, kernel, M)
    q = eval_fast(bkw_field(t, config), dec)
    dfdt = to_fourier(bkw_box_dt(t, config), config)
    residual = float(np.max(np.abs(from_fourier(q - dfdt))))
    if tol is not None and residual > tol:
        raise ResidualTooLarge(f"BKW residual {residual:.3e} exceeds {tol:.1e} at N={config.N}, t={t}")
    return residual


def rel_l1_error(f: FourierField | np.ndarray, g_exact) -> float:
    """``sum |f_j - g_j| / sum |g_j|`` over grid nodes."""
    values = from_fourier(f) if isinstance(f, FourierField) else np.asarray(f, dtype=float)
    g = np.asarray(g_exact, dtype=float)
    if values.shape != g.shape:
        raise ValueError(f"grid shapes differ: {values.shape} vs {g.shape}")
    denom = float(np.sum(np.abs(g)))
    if denom == 0.0:
        raise ZeroReference("reference has zero L1 norm")
    return float(np.sum(np.abs(values - g))) / denom
