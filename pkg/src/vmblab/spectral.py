"""Fourier infrastructure on the periodic box [-pi, pi]^3.

Fields are stored as complex spectral coefficients with the normalization

    values(x) = sum_k c_k exp(i k . x),   c_k = fftn(values) / n^3,

so the round trip physical -> spectral -> physical is the identity and the
coefficient of k = 0 is the spatial mean.  Wavenumbers are the integers
-n/2+1 .. n/2 per axis.  All operations are pure functions of immutable
values.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import GridMismatch, NonZeroMean

BOX_VOLUME = (2.0 * np.pi) ** 3


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid, n points per axis on a 2*pi-periodic box."""

    n_per_axis: int
    dealias_fraction: float = 2.0 / 3.0

    def __post_init__(self):
        if self.n_per_axis <= 0 or self.n_per_axis % 2 != 0:
            raise ValueError("n_per_axis must be a positive even integer")
        if not 0.0 < self.dealias_fraction <= 1.0:
            raise ValueError("dealias_fraction must lie in (0, 1]")

    @property
    def shape(self) -> tuple:
        n = self.n_per_axis
        return (n, n, n)

    def axis_points(self) -> np.ndarray:
        """Physical sample points along one axis."""
        n = self.n_per_axis
        return -np.pi + 2.0 * np.pi * np.arange(n) / n

    def meshgrid(self) -> tuple:
        x = self.axis_points()
        return np.meshgrid(x, x, x, indexing="ij")


@lru_cache(maxsize=None)
def wavenumbers(grid: Grid) -> tuple:
    """Integer wavenumber arrays (k1, k2, k3), each of shape grid.shape."""
    n = grid.n_per_axis
    k = np.fft.fftfreq(n, d=1.0 / n)
    return tuple(np.meshgrid(k, k, k, indexing="ij"))


@lru_cache(maxsize=None)
def k_squared(grid: Grid) -> np.ndarray:
    k1, k2, k3 = wavenumbers(grid)
    return k1 ** 2 + k2 ** 2 + k3 ** 2


@lru_cache(maxsize=None)
def dealias_mask(grid: Grid) -> np.ndarray:
    """Boolean mask keeping modes with |k_i| <= dealias_fraction * n/2."""
    cutoff = grid.dealias_fraction * grid.n_per_axis / 2.0
    k1, k2, k3 = wavenumbers(grid)
    return (np.abs(k1) <= cutoff) & (np.abs(k2) <= cutoff) & (np.abs(k3) <= cutoff)


@dataclass(frozen=True)
class SpectralField:
    """Scalar (n,n,n) or vector (3,n,n,n) field in coefficient form."""

    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        shape = self.coeffs.shape
        if shape != self.grid.shape and shape != (3,) + self.grid.shape:
            raise ValueError("coefficient shape does not match grid")

    @property
    def rank(self) -> str:
        return "vector" if self.coeffs.ndim == 4 else "scalar"

    def values(self) -> np.ndarray:
        """Physical-space samples (real part; imaginary part is roundoff)."""
        n3 = self.grid.n_per_axis ** 3
        axes = (-3, -2, -1)
        return np.real(np.fft.ifftn(self.coeffs, axes=axes) * n3)

    def mean(self) -> np.ndarray:
        """Spatial mean: the k = 0 coefficient (per component for vectors)."""
        if self.coeffs.ndim == 4:
            return np.real(self.coeffs[:, 0, 0, 0]).copy()
        return float(np.real(self.coeffs[0, 0, 0]))

    def norm(self) -> float:
        """L^2 norm over the box (Parseval)."""
        return float(np.sqrt(BOX_VOLUME * np.sum(np.abs(self.coeffs) ** 2)))

    def component(self, i: int) -> "SpectralField":
        if self.coeffs.ndim != 4:
            raise ValueError("component() requires a vector field")
        return SpectralField(self.grid, self.coeffs[i])

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _require_same_grid(self, other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _require_same_grid(self, other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs)


def _require_same_grid(a: SpectralField, b: SpectralField):
    if a.grid != b.grid:
        raise GridMismatch("fields live on different grids")


def from_values(grid: Grid, values: np.ndarray) -> SpectralField:
    """Build a field from physical samples of shape (n,n,n) or (3,n,n,n)."""
    n3 = grid.n_per_axis ** 3
    coeffs = np.fft.fftn(np.asarray(values, dtype=float), axes=(-3, -2, -1)) / n3
    return SpectralField(grid, coeffs)


def zeros(grid: Grid, rank: str = "scalar") -> SpectralField:
    shape = grid.shape if rank == "scalar" else (3,) + grid.shape
    return SpectralField(grid, np.zeros(shape, dtype=complex))


def derivative(field: SpectralField, axis: int) -> SpectralField:
    """Spatial derivative along axis in {1, 2, 3}."""
    if axis not in (1, 2, 3):
        raise ValueError("axis must be 1, 2 or 3")
    k = wavenumbers(field.grid)[axis - 1]
    return SpectralField(field.grid, 1j * k * field.coeffs)


def gradient(field: SpectralField) -> SpectralField:
    """Gradient of a scalar field as a vector field."""
    k1, k2, k3 = wavenumbers(field.grid)
    c = field.coeffs
    return SpectralField(field.grid, np.stack([1j * k1 * c, 1j * k2 * c, 1j * k3 * c]))


def divergence(field: SpectralField) -> SpectralField:
    """Divergence of a vector field as a scalar field."""
    k1, k2, k3 = wavenumbers(field.grid)
    c = field.coeffs
    out = 1j * (k1 * c[0] + k2 * c[1] + k3 * c[2])
    return SpectralField(field.grid, out)


def laplacian(field: SpectralField) -> SpectralField:
    return SpectralField(field.grid, -k_squared(field.grid) * field.coeffs)


def inverse_laplacian_zero_mean(field: SpectralField) -> SpectralField:
    """Solve laplacian(phi) = field for the unique zero-mean phi.

    Raises NonZeroMean if the source has a spatial mean above roundoff,
    since the periodic Poisson problem is then unsolvable.
    """
    ksq = k_squared(field.grid)
    norm = np.sqrt(np.sum(np.abs(field.coeffs) ** 2))
    mean_mag = np.max(np.abs(field.coeffs[..., 0, 0, 0])) if field.coeffs.ndim == 4 \
        else abs(field.coeffs[0, 0, 0])
    if mean_mag > 1e-12 * max(norm, 1e-300):
        raise NonZeroMean("source field has a nonzero spatial mean")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(ksq > 0, -field.coeffs / ksq, 0.0)
    return SpectralField(field.grid, out)


def leray_project(field: SpectralField) -> SpectralField:
    """Divergence-free projection of a vector field (k = 0 mode unchanged)."""
    if field.coeffs.ndim != 4:
        raise ValueError("leray_project requires a vector field")
    k1, k2, k3 = wavenumbers(field.grid)
    ksq = k_squared(field.grid)
    c = field.coeffs
    kdotc = k1 * c[0] + k2 * c[1] + k3 * c[2]
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(ksq > 0, kdotc / np.where(ksq > 0, ksq, 1.0), 0.0)
    out = np.stack([c[0] - k1 * factor, c[1] - k2 * factor, c[2] - k3 * factor])
    return SpectralField(field.grid, out)


def curl(field: SpectralField) -> SpectralField:
    if field.coeffs.ndim != 4:
        raise ValueError("curl requires a vector field")
    k1, k2, k3 = wavenumbers(field.grid)
    c = field.coeffs
    out = np.stack([
        1j * (k2 * c[2] - k3 * c[1]),
        1j * (k3 * c[0] - k1 * c[2]),
        1j * (k1 * c[1] - k2 * c[0]),
    ])
    return SpectralField(field.grid, out)


def dealias(field: SpectralField) -> SpectralField:
    return SpectralField(field.grid, field.coeffs * dealias_mask(field.grid))


def dealias_product(a: SpectralField, b: SpectralField) -> SpectralField:
    """Pointwise physical product with the 2/3-rule modes zeroed afterwards."""
    _require_same_grid(a, b)
    prod = a.values() * b.values()
    return dealias(from_values(a.grid, prod))


def dot_product(a: SpectralField, b: SpectralField) -> SpectralField:
    """Dealiased pointwise dot product of two vector fields."""
    _require_same_grid(a, b)
    prod = np.sum(a.values() * b.values(), axis=0)
    return dealias(from_values(a.grid, prod))


def advect(velocity: SpectralField, field: SpectralField) -> SpectralField:
    """Dealiased advection term (velocity . grad) field, any field rank."""
    _require_same_grid(velocity, field)
    vel = velocity.values()
    out = np.zeros(field.coeffs.shape, dtype=float)
    for j in range(3):
        out = out + vel[j] * derivative(field, j + 1).values()
    return dealias(from_values(field.grid, out))


@lru_cache(maxsize=None)
def derivative_weight(grid: Grid, order: int) -> np.ndarray:
    """sum over spatial multi-indices |gamma| <= order of k^(2 gamma).

    Multiplying |c_k|^2 by this weight and summing realizes the squared
    Sobolev-type norm sum_{|gamma|<=order} ||d^gamma f||^2.
    """
    k1, k2, k3 = wavenumbers(grid)
    q1, q2, q3 = k1 ** 2, k2 ** 2, k3 ** 2
    weight = np.zeros(grid.shape)
    for g1 in range(order + 1):
        for g2 in range(order + 1 - g1):
            for g3 in range(order + 1 - g1 - g2):
                weight += q1 ** g1 * q2 ** g2 * q3 ** g3
    return weight


def sobolev_norm(field: SpectralField, order: int) -> float:
    """sqrt(sum_{|gamma|<=order} ||d^gamma field||_{L^2}^2)."""
    w = derivative_weight(field.grid, order)
    return float(np.sqrt(BOX_VOLUME * np.sum(w * np.abs(field.coeffs) ** 2)))
