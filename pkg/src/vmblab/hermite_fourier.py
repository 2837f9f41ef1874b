"""Operations on Hermite-Fourier coefficient cubes.

A phase-space fluctuation h(x, v) is stored as a complex array of shape
(basis size, n, n, n): Hermite index on the leading axis, Fourier
coefficients (same normalization as SpectralField) on the trailing axes.
Linear velocity-space operators act on axis 0; spatial operators act per
Hermite entry; nonlinear velocity operations are evaluated pointwise on
physical-space values and dealiased on the way back.
"""

from __future__ import annotations

import numpy as np

from . import spectral as sp
from . import velocity as vel
from .spectral import Grid, SpectralField
from .velocity import CollisionModel, HermiteSpace

SPATIAL_AXES = (-3, -2, -1)


def zero_cube(space: HermiteSpace, grid: Grid) -> np.ndarray:
    return np.zeros((space.size,) + grid.shape, dtype=complex)


def cube_to_values(grid: Grid, cube: np.ndarray) -> np.ndarray:
    """Physical-space samples per Hermite entry (real distributions)."""
    n3 = grid.n_per_axis ** 3
    return np.real(np.fft.ifftn(cube, axes=SPATIAL_AXES) * n3)


def cube_from_values(grid: Grid, values: np.ndarray) -> np.ndarray:
    n3 = grid.n_per_axis ** 3
    return np.fft.fftn(values, axes=SPATIAL_AXES) / n3


def dealias_cube(grid: Grid, cube: np.ndarray) -> np.ndarray:
    return cube * sp.dealias_mask(grid)


def apply_velocity_matrix(mat: np.ndarray, cube: np.ndarray) -> np.ndarray:
    """Matrix acting on the Hermite axis only."""
    return np.tensordot(mat, cube, axes=(1, 0))


def v_grad(space: HermiteSpace, grid: Grid, cube: np.ndarray) -> np.ndarray:
    """Free transport operator v . grad_x in coefficient form (no dealiasing)."""
    k = sp.wavenumbers(grid)
    out = np.zeros_like(cube)
    for j in range(3):
        out += 1j * k[j] * apply_velocity_matrix(space.v_mult(j), cube)
    return out


def gamma_cube(space: HermiteSpace, model: CollisionModel, grid: Grid,
               cube1: np.ndarray, cube2: np.ndarray) -> np.ndarray:
    """Bilinear collision term Gamma(h1, h2), pointwise in x, dealiased."""
    vals = vel.gamma(space, model, cube_to_values(grid, cube1),
                     cube_to_values(grid, cube2))
    return dealias_cube(grid, cube_from_values(grid, vals))


def coupling_cube(space: HermiteSpace, grid: Grid, cube: np.ndarray,
                  e_field: SpectralField, b_field: SpectralField) -> np.ndarray:
    """(E + v x B) . D[h] with spatially varying fields, dealiased."""
    vals = vel.field_coupling(space, cube_to_values(grid, cube),
                              e_field.values(), b_field.values())
    return dealias_cube(grid, cube_from_values(grid, vals))


def hydro_cube(space: HermiteSpace, rho: SpectralField, u: SpectralField,
               theta: SpectralField) -> np.ndarray:
    """Hydrodynamic Hermite cube {rho + u.v + theta (|v|^2-3)/2} sqrt(mu)."""
    return space.hydro_vector(rho.coeffs, u.coeffs, theta.coeffs)


def charge_cube(space: HermiteSpace, sigma: SpectralField) -> np.ndarray:
    """Charge-only cube sigma(x) sqrt(mu)."""
    out = zero_cube(space, sigma.grid)
    out[space.index_of[(0, 0, 0)]] = sigma.coeffs
    return out


def hydro_moments(space: HermiteSpace, grid: Grid, cube: np.ndarray) -> dict:
    """(rho, u, theta) of an f-type cube as SpectralFields."""
    rho, u, theta = space.moments(cube)
    return {
        "rho": SpectralField(grid, rho),
        "u": SpectralField(grid, np.stack([u[0], u[1], u[2]])),
        "theta": SpectralField(grid, theta),
    }


def charge_moment(space: HermiteSpace, grid: Grid, cube: np.ndarray) -> SpectralField:
    return SpectralField(grid, cube[space.index_of[(0, 0, 0)]])


def current_moment(space: HermiteSpace, grid: Grid, cube: np.ndarray) -> SpectralField:
    """<cube, v sqrt(mu)> as a vector SpectralField."""
    iu = [space.index_of[(1, 0, 0)], space.index_of[(0, 1, 0)],
          space.index_of[(0, 0, 1)]]
    return SpectralField(grid, np.stack([cube[iu[0]], cube[iu[1]], cube[iu[2]]]))


def stress_moment(space: HermiteSpace, grid: Grid, cube: np.ndarray) -> np.ndarray:
    """Symmetric second-moment matrix <cube, v_i v_j sqrt(mu)> of coefficients.

    Returns a (3, 3) object array of spatial coefficient arrays.
    """
    out = np.empty((3, 3), dtype=object)
    i000 = space.index_of[(0, 0, 0)]
    for i in range(3):
        for j in range(i, 3):
            if i == j:
                idx = [0, 0, 0]
                idx[i] = 2
                entry = np.sqrt(2.0) * cube[space.index_of[tuple(idx)]] \
                    + cube[i000]
            else:
                idx = [0, 0, 0]
                idx[i] = 1
                idx[j] = 1
                entry = cube[space.index_of[tuple(idx)]]
            out[i, j] = entry
            out[j, i] = entry
    return out


def transport_momentum_moment(space: HermiteSpace, grid: Grid,
                              cube: np.ndarray) -> SpectralField:
    """<v . grad_x cube, v sqrt(mu)> as a vector SpectralField."""
    k = sp.wavenumbers(grid)
    iu = [space.index_of[(1, 0, 0)], space.index_of[(0, 1, 0)],
          space.index_of[(0, 0, 1)]]
    comps = []
    for i in range(3):
        acc = np.zeros(grid.shape, dtype=complex)
        for j in range(3):
            acc += 1j * k[j] * apply_velocity_matrix(space.v_mult(j), cube)[iu[i]]
        comps.append(acc)
    return SpectralField(grid, np.stack(comps))


def transport_scalar_moment(space: HermiteSpace, grid: Grid, cube: np.ndarray,
                            weight: str) -> SpectralField:
    """<v . grad_x cube, w sqrt(mu)> for w = 1 ('mass') or |v|^2/5 ('energy5')."""
    k = sp.wavenumbers(grid)
    acc = np.zeros(grid.shape, dtype=complex)
    for j in range(3):
        moved = apply_velocity_matrix(space.v_mult(j), cube)
        if weight == "mass":
            m = moved[space.index_of[(0, 0, 0)]]
        elif weight == "energy5":
            m = space.energy_moment(moved) / 5.0
        else:
            raise ValueError("weight must be 'mass' or 'energy5'")
        acc += 1j * k[j] * m
    return SpectralField(grid, acc)
