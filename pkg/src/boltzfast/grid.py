"""Velocity box geometry, Fourier coefficient storage and padded products.

The velocity box is ``[-pi, pi)^d``.  A field with maximum mode ``N`` stores
``(2N+1)^d`` complex coefficients ``fhat[k + N]`` in row-major order, so
``coeffs[i0, i1, ...]`` is the coefficient of ``exp(i k.v)`` with
``k = (i0 - N, i1 - N, ...)``.  Point values live on the centred grid
``v_j = 2 pi (j - N) / (2N + 1)``.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from . import _backend
from .errors import ConfigMismatch, DealiasingViolation, DumpFormatError, NonHermitian, ShapeMismatch

__all__ = [
    "S_MAX",
    "DomainConfig",
    "FourierField",
    "make_config",
    "to_fourier",
    "from_fourier",
    "truncated_convolution",
    "velocity_grid",
    "mode_vectors",
    "pad_size",
    "save_field",
    "read_field_dump",
]

BOX_HALF_LENGTH = math.pi
#: Largest support radius allowed by ``T >= (1 + 3 sqrt 2) S / 2`` with ``T = pi``.
S_MAX = 2.0 * math.pi / (1.0 + 3.0 * math.sqrt(2.0))
_SLACK = 1e-12

FIELD_MAGIC = b"CSBF1"


@dataclass(frozen=True)
class DomainConfig:
    """Geometry of the periodic velocity box.

    ``scale`` is the number of physical velocity units per box unit.  It only
    enters the diagnostics (moments, Maxwellians, reference solutions); the
    collision operator always works in box units.
    """

    d: int
    N: int
    S: float
    scale: float = 1.0

    @property
    def T(self) -> float:
        return BOX_HALF_LENGTH

    @property
    def R(self) -> float:
        return 2.0 * self.S

    @property
    def n(self) -> int:
        return 2 * self.N + 1

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def n_pad(self) -> int:
        return pad_size(self.N)

    @property
    def cell_volume(self) -> float:
        return (2.0 * math.pi / self.n) ** self.d


def make_config(d: int, N: int, S: float, scale: float = 1.0) -> DomainConfig:
    """Validate the box parameters and return a config with ``R = 2S``.

    Raises
    ------
    DealiasingViolation
        If ``S`` breaks the no-aliasing bound ``S <= 2 pi / (1 + 3 sqrt 2)``.
    """
    if d not in (2, 3):
        raise ValueError(f"dimension must be 2 or 3, got {d}")
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N}")
    if not S > 0:
        raise ValueError(f"support radius must be positive, got {S}")
    if not scale > 0:
        raise ValueError(f"velocity scale must be positive, got {scale}")
    if S > S_MAX + _SLACK:
        raise DealiasingViolation(
            f"S = {S!r} exceeds the no-aliasing limit 2*pi/(1+3*sqrt(2)) = {S_MAX!r}"
        )
    return DomainConfig(d=int(d), N=int(N), S=float(S), scale=float(scale))


def pad_size(N: int) -> int:
    """Smallest power of two ``>= 3N + 1``.

    Products of two degree-``N`` polynomials have modes up to ``2N``; a grid of
    this size keeps every alias of those modes outside ``[-N, N]``.
    """
    return 1 << (3 * N).bit_length()


@dataclass(eq=False)
class FourierField:
    """Fourier coefficients of a distribution on the velocity box."""

    coeffs: np.ndarray
    config: DomainConfig = field(repr=False)

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if self.coeffs.shape != self.config.shape:
            raise ShapeMismatch(
                f"coefficient array has shape {self.coeffs.shape}, expected {self.config.shape}"
            )

    @classmethod
    def zeros(cls, config: DomainConfig) -> "FourierField":
        return cls(np.zeros(config.shape, dtype=np.complex128), config)

    def copy(self) -> "FourierField":
        return FourierField(self.coeffs.copy(), self.config)

    def flipped(self) -> np.ndarray:
        """Coefficients reindexed by ``k -> -k``."""
        return self.coeffs[(slice(None, None, -1),) * self.config.d]

    def hermitian_defect(self) -> float:
        return float(np.max(np.abs(self.coeffs - np.conj(self.flipped())), initial=0.0))

    def hermitian_part(self) -> "FourierField":
        """Average ``fhat_k`` with ``conj(fhat_{-k})``; the result is exactly Hermitian."""
        return FourierField(_symmetrize(self.coeffs), self.config)

    def _check(self, other: "FourierField") -> None:
        if self.config != other.config:
            raise ConfigMismatch("fields live on different configs")

    def __add__(self, other: "FourierField") -> "FourierField":
        self._check(other)
        return FourierField(self.coeffs + other.coeffs, self.config)

    def __sub__(self, other: "FourierField") -> "FourierField":
        self._check(other)
        return FourierField(self.coeffs - other.coeffs, self.config)

    def __mul__(self, scalar: float) -> "FourierField":
        return FourierField(self.coeffs * scalar, self.config)

    __rmul__ = __mul__

    def __neg__(self) -> "FourierField":
        return FourierField(-self.coeffs, self.config)


def _symmetrize(c: np.ndarray) -> np.ndarray:
    flipped = c[(slice(None, None, -1),) * c.ndim]
    return 0.5 * (c + np.conj(flipped))


def velocity_grid(config: DomainConfig) -> list[np.ndarray]:
    """Open-mesh coordinate arrays of the centred point grid (box units)."""
    v = 2.0 * math.pi * np.arange(-config.N, config.N + 1) / config.n
    return list(np.meshgrid(*([v] * config.d), indexing="ij", sparse=True))


def mode_vectors(config: DomainConfig) -> np.ndarray:
    """Integer mode vectors of the lattice, shape ``(d, n, ..., n)``."""
    k = np.arange(-config.N, config.N + 1)
    return np.stack(np.meshgrid(*([k] * config.d), indexing="ij"))


def to_fourier(values: np.ndarray, config: DomainConfig) -> FourierField:
    """Discrete Fourier coefficients of real point values on the centred grid."""
    values = np.asarray(values, dtype=np.float64)
    if values.size != config.n**config.d:
        raise ShapeMismatch(f"expected {config.n ** config.d} grid values, got {values.size}")
    values = values.reshape(config.shape)
    c = sfft.fftshift(sfft.fftn(sfft.ifftshift(values), norm="forward"))
    return FourierField(_symmetrize(c), config)


def from_fourier(field: FourierField, tol: float = 1e-8) -> np.ndarray:
    """Evaluate the truncated Fourier series on the centred grid.

    Raises
    ------
    NonHermitian
        If the imaginary residue exceeds ``tol`` relative to the field size.
    """
    z = sfft.fftshift(sfft.ifftn(sfft.ifftshift(field.coeffs), norm="forward"))
    scale = max(1.0, float(np.max(np.abs(z.real), initial=0.0)))
    residue = float(np.max(np.abs(z.imag), initial=0.0))
    if residue > tol * scale:
        raise NonHermitian(f"imaginary residue {residue:.3e} exceeds {tol:.1e}")
    return np.ascontiguousarray(z.real)


@lru_cache(maxsize=64)
def _wrap_index(N: int, n_pad: int) -> np.ndarray:
    return np.arange(-N, N + 1) % n_pad


def _pad_full(c: np.ndarray, N: int, n_pad: int) -> np.ndarray:
    out = np.zeros((n_pad,) * c.ndim, dtype=np.complex128)
    idx = _wrap_index(N, n_pad)
    out[np.ix_(*([idx] * c.ndim))] = c
    return out


def truncated_convolution(g: FourierField, h: FourierField) -> FourierField:
    """``(g * h)_k = sum_{l+m=k} g_l h_m`` restricted to the mode lattice.

    Both spectra are zero padded to a power-of-two grid of at least ``3N+1``
    points per axis, multiplied pointwise in physical space and truncated.
    """
    g._check(h)
    cfg = g.config
    n_pad = cfg.n_pad
    a = sfft.ifftn(_pad_full(g.coeffs, cfg.N, n_pad), norm="forward")
    b = sfft.ifftn(_pad_full(h.coeffs, cfg.N, n_pad), norm="forward")
    prod = sfft.fftn(a * b, norm="forward")
    idx = _wrap_index(cfg.N, n_pad)
    return FourierField(prod[np.ix_(*([idx] * cfg.d))], cfg)


# Half-spectrum layout used by the real-transform fast path.  The lattice is
# viewed as (n^(d-1), n) and the padded half spectrum as (n_pad^(d-1), n_pad//2+1);
# ``row_map`` sends each leading multi-index to its wrapped padded row.


@dataclass(frozen=True)
class HalfSpectrumLayout:
    d: int
    N: int
    n_pad: int
    row_map: np.ndarray

    @property
    def pad_shape(self) -> tuple[int, ...]:
        return (self.n_pad,) * (self.d - 1) + (self.n_pad // 2 + 1,)

    @property
    def phys_shape(self) -> tuple[int, ...]:
        return (self.n_pad,) * self.d

    @property
    def rows(self) -> int:
        return (2 * self.N + 1) ** (self.d - 1)


@lru_cache(maxsize=32)
def half_spectrum_layout(d: int, N: int) -> HalfSpectrumLayout:
    n_pad = pad_size(N)
    idx = _wrap_index(N, n_pad)
    grids = np.meshgrid(*([idx] * (d - 1)), indexing="ij")
    row_map = np.zeros(grids[0].shape, dtype=np.intp)
    for g in grids:
        row_map = row_map * n_pad + g
    row_map = np.ascontiguousarray(row_map.ravel(), dtype=np.intp)
    row_map.setflags(write=False)
    return HalfSpectrumLayout(d, N, n_pad, row_map)


def pad_half(layout: HalfSpectrumLayout, coeffs: np.ndarray, weight: np.ndarray | None = None,
             out: np.ndarray | None = None, kern=None) -> np.ndarray:
    """Scatter ``weight * coeffs`` (k_last >= 0 half) into a padded half spectrum."""
    kern = kern or _backend.kernels
    if out is None:
        out = np.zeros(layout.pad_shape, dtype=np.complex128)
    else:
        out.fill(0.0)
    n = 2 * layout.N + 1
    src = coeffs.reshape(layout.rows, n)
    w = None if weight is None else weight.reshape(layout.rows, n)
    kern.scatter_half(out.reshape(-1, layout.n_pad // 2 + 1), src, w, layout.row_map, layout.N)
    return out


def unpad_half(layout: HalfSpectrumLayout, spec: np.ndarray, kern=None) -> np.ndarray:
    """Gather lattice coefficients from a padded half spectrum of a real function."""
    kern = kern or _backend.kernels
    n = 2 * layout.N + 1
    out = np.empty((layout.rows, n), dtype=np.complex128)
    kern.gather_half(out, spec.reshape(-1, layout.n_pad // 2 + 1), layout.row_map, layout.N)
    return out.reshape((n,) * layout.d)


def save_field(path: str | Path, field: FourierField) -> None:
    """Write a ``CSBF1`` dump: magic, d and N as int64 LE, then complex128 LE coefficients."""
    cfg = field.config
    with open(path, "wb") as fh:
        fh.write(FIELD_MAGIC)
        fh.write(struct.pack("<qq", cfg.d, cfg.N))
        fh.write(np.ascontiguousarray(field.coeffs, dtype="<c16").tobytes())


def read_field_dump(path: str | Path) -> tuple[int, int, np.ndarray]:
    """Read a ``CSBF1`` dump and return ``(d, N, coeffs)``."""
    data = Path(path).read_bytes()
    head = len(FIELD_MAGIC) + 16
    if len(data) < head or data[: len(FIELD_MAGIC)] != FIELD_MAGIC:
        raise DumpFormatError(f"{path}: not a CSBF1 field dump")
    d, N = struct.unpack("<qq", data[len(FIELD_MAGIC):head])
    if d not in (2, 3) or N < 1:
        raise DumpFormatError(f"{path}: bad header d={d} N={N}")
    count = (2 * N + 1) ** d
    if len(data) - head != 16 * count:
        raise DumpFormatError(f"{path}: expected {count} coefficients, found {(len(data) - head) / 16:g}")
    coeffs = np.frombuffer(data, dtype="<c16", offset=head).reshape((2 * N + 1,) * d)
    return d, N, coeffs.astype(np.complex128)
