"""Explicit time integration of the Fourier-Galerkin system plus moment diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .collision import eval_fast
from .decomposition import Decomposition
from .errors import BlowUp, NonPositiveTemperature
from .grid import DomainConfig, FourierField, from_fourier, to_fourier, velocity_grid

__all__ = [
    "ENTROPY_FLOOR",
    "MomentSet",
    "IntegratorConfig",
    "moment_weights",
    "moments",
    "entropy",
    "maxwellian_values",
    "moments_to_maxwellian",
    "loss_rate",
    "suggest_dt",
    "step",
    "integrate",
    "DiagnosticRecord",
]

ENTROPY_FLOOR = 1e-14
BLOWUP_FACTOR = 1e6


@dataclass(frozen=True)
class MomentSet:
    """Moments in physical velocity units (box values rescaled by ``config.scale``)."""

    mass: float
    momentum: tuple[float, ...]
    energy: float
    entropy: float

    @property
    def velocity(self) -> tuple[float, ...]:
        return tuple(p / self.mass for p in self.momentum)

    @property
    def temperature(self) -> float:
        u2 = sum(u * u for u in self.velocity)
        return (self.energy / self.mass - u2) / len(self.momentum)


def moment_weights(N: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One-dimensional weights ``int_{-pi}^{pi} v^j e^{ikv} dv`` for ``j = 0, 1, 2``, ``k = -N..N``."""
    k = np.arange(-N, N + 1)
    sign = np.where(k % 2 == 0, 1.0, -1.0)
    w0 = np.where(k == 0, 2.0 * math.pi, 0.0).astype(np.complex128)
    kk = np.where(k == 0, 1, k).astype(float)
    w1 = np.where(k == 0, 0.0, -2j * math.pi * sign / kk)
    w2 = np.where(k == 0, 2.0 * math.pi ** 3 / 3.0, 4.0 * math.pi * sign / (kk * kk)).astype(np.complex128)
    return w0, w1, w2


def _axis_line(coeffs: np.ndarray, axis: int, N: int) -> np.ndarray:
    index = [N] * coeffs.ndim
    index[axis] = slice(None)
    return coeffs[tuple(index)]


def entropy(values: np.ndarray, config: DomainConfig, floor: float = ENTROPY_FLOOR) -> float:
    """Clipped ``-int g log g`` over the box, in box units."""
    g = np.maximum(values, floor)
    return -config.cell_volume * float(np.sum(g * np.log(g)))


def moments(f: FourierField) -> MomentSet:
    """Mass, momentum and energy from exact spectral weights; entropy from grid values.

    The weights only see the axis lines of the coefficient array because the
    other factors integrate to ``2 pi delta_k``.
    """
    cfg = f.config
    N, d, L = cfg.N, cfg.d, cfg.scale
    w0, w1, w2 = moment_weights(N)
    c = f.coeffs
    other = (2.0 * math.pi) ** (d - 1)
    mass = ((2.0 * math.pi) ** d * c[(N,) * d]).real
    momentum = tuple(L * (other * np.dot(w1, _axis_line(c, j, N))).real for j in range(d))
    energy = L * L * sum((other * np.dot(w2, _axis_line(c, j, N))).real for j in range(d))
    # g(w) = L^d f(Lw) shifts the entropy by d log L times the mass
    h = entropy(from_fourier(f), cfg) + d * math.log(L) * mass
    return MomentSet(float(mass), tuple(float(p) for p in momentum), float(energy), float(h))


def maxwellian_values(rho: float, u, T: float, config: DomainConfig) -> np.ndarray:
    """Box-unit grid samples of ``L^d M(rho, u, T)(L w)``."""
    if not T > 0:
        raise NonPositiveTemperature(f"temperature must be positive, got {T}")
    if not rho > 0:
        raise ValueError(f"density must be positive, got {rho}")
    d, L = config.d, config.scale
    u = np.broadcast_to(np.asarray(u, dtype=float), (d,))
    grids = np.meshgrid(*velocity_grid(config), indexing="ij")
    r2 = sum((L * g - uj) ** 2 for g, uj in zip(grids, u))
    return L ** d * rho / (2.0 * math.pi * T) ** (d / 2.0) * np.exp(-r2 / (2.0 * T))


def moments_to_maxwellian(ms: MomentSet, config: DomainConfig) -> FourierField:
    """Maxwellian with the density, mean velocity and temperature of ``ms``."""
    return to_fourier(maxwellian_values(ms.mass, ms.velocity, ms.temperature, config), config)


@dataclass(frozen=True)
class IntegratorConfig:
    scheme: str = "rk4"
    dt: float = 1e-3
    t_end: float = 0.0
    stride: int = 1

    def __post_init__(self):
        if self.scheme not in ("rk2", "rk4"):
            raise ValueError(f"scheme must be rk2 or rk4, got {self.scheme!r}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_end >= 0:
            raise ValueError(f"t_end must be nonnegative, got {self.t_end}")
        if self.stride < 1:
            raise ValueError(f"stride must be at least 1, got {self.stride}")


def loss_rate(f: FourierField, dec: Decomposition) -> float:
    """Largest grid value of the loss frequency ``IFFT(D fhat)``."""
    return float(np.max(np.abs(from_fourier(FourierField(dec.diag * f.coeffs, f.config), tol=np.inf))))


def suggest_dt(f: FourierField, dec: Decomposition, base: float = 0.01) -> float:
    """``base`` divided by the loss frequency (at least one); a conservative explicit step."""
    return base / max(1.0, loss_rate(f, dec))


def step(f: FourierField, dec: Decomposition, dt: float, scheme: str = "rk4", threads: int = 1,
         backend: str | None = None, reference_norm: float | None = None) -> FourierField:
    """One explicit RK step of ``fhat' = P_N Q(f, f)``, followed by Hermitian averaging."""

    def rhs(g: FourierField) -> np.ndarray:
        return eval_fast(g, dec, threads=threads, backend=backend).coeffs

    c = f.coeffs
    if scheme == "rk2":
        k1 = rhs(f)
        k2 = rhs(FourierField(c + dt * k1, f.config))
        new = c + 0.5 * dt * (k1 + k2)
    elif scheme == "rk4":
        k1 = rhs(f)
        k2 = rhs(FourierField(c + 0.5 * dt * k1, f.config))
        k3 = rhs(FourierField(c + 0.5 * dt * k2, f.config))
        k4 = rhs(FourierField(c + dt * k3, f.config))
        new = c + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    else:
        raise ValueError(f"scheme must be rk2 or rk4, got {scheme!r}")
    out = FourierField(new, f.config).hermitian_part()
    ref = float(np.max(np.abs(c))) if reference_norm is None else reference_norm
    peak = float(np.max(np.abs(out.coeffs)))
    if not math.isfinite(peak) or peak > BLOWUP_FACTOR * max(ref, np.finfo(float).tiny):
        raise BlowUp(f"|fhat|_inf reached {peak:.3e} against initial {ref:.3e}")
    return out


@dataclass(frozen=True)
class DiagnosticRecord:
    step: int
    t: float
    moments: MomentSet
    l1_error: float | None = None

    def row(self) -> list[float]:
        m = self.moments
        vals = [self.t, m.mass, *m.momentum, m.energy, m.entropy]
        if self.l1_error is not None:
            vals.append(self.l1_error)
        return vals


def _step_times(icfg: IntegratorConfig) -> list[float]:
    # whole steps of dt, then one shortened step to land on t_end exactly
    count = int(math.floor(icfg.t_end / icfg.dt * (1.0 + 1e-12)))
    times = [i * icfg.dt for i in range(count + 1)]
    if icfg.t_end - times[-1] > 1e-12 * max(1.0, icfg.t_end):
        times.append(icfg.t_end)
    else:
        times[-1] = icfg.t_end
    return times


def integrate(f0: FourierField, dec: Decomposition, icfg: IntegratorConfig,
              sink: Callable[[DiagnosticRecord], None] | None = None,
              reference: Callable[[float], np.ndarray] | None = None,
              threads: int = 1, backend: str | None = None) -> FourierField:
    """Advance ``f0`` to ``icfg.t_end``.

    A record goes to ``sink`` at step 0, every ``stride`` steps and at the
    final time.  ``reference(t)`` returns exact box-unit grid values and
    adds the relative L1 error to each record.
    """
    from .reference import rel_l1_error

    def emit(n: int, t: float, g: FourierField):
        if sink is None:
            return
        err = None if reference is None else rel_l1_error(g, reference(t))
        sink(DiagnosticRecord(n, t, moments(g), err))

    times = _step_times(icfg)
    ref_norm = float(np.max(np.abs(f0.coeffs)))
    f = f0.copy()
    emit(0, times[0], f)
    last = len(times) - 1
    for n in range(1, last + 1):
        f = step(f, dec, times[n] - times[n - 1], icfg.scheme, threads=threads, backend=backend,
                 reference_norm=ref_norm)
        if n % icfg.stride == 0 or n == last:
            emit(n, times[n], f)
    return f
