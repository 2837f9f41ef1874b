"""Finite-epsilon evolution of the scaled two-species kinetic system.

The state carries the fluctuations f = (F - mu)/sqrt(mu) (species sum) and
g = G/sqrt(mu) (species difference) as Hermite-Fourier cubes together with
the electromagnetic fields.  The scaled system is

    df/dt = -(1/e) v.grad f - (1/e^2) L f + (1/e^2) Gamma(f, f)
            - (1/e) (E + v x B).D[g],
    dg/dt = -(1/e) v.grad g + (1/e) E.v sqrt(mu) - (1/e^2) calL g
            + (1/e^2) Gamma(g, f) - (1/e) (E + v x B).D[f],
    e dE/dt - curl B = -<g, v sqrt(mu)>,   e dB/dt + curl E = 0,
    div E = <g, sqrt(mu)>,   div B = 0,

with e = epsilon.  One step is a Strang-type composition: exact half-step
of the stiff relaxation, an explicit Heun stage whose linear transport part
is integrated exactly per Fourier mode (unitary, so unconditionally
stable), an exact per-mode Maxwell rotation with frozen current, and a
final half-step of the relaxation.  The longitudinal electric field is
slaved to the Gauss constraint, which the transport stage preserves
exactly, so constraint drift stays at roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import hermite_fourier as hf
from . import spectral as sp
from . import velocity as vel
from .errors import (CflViolation, EpsilonTooSmall, EpsilonUnderflow,
                     NonFiniteState, OrderMismatch)
from .expansion import ExpansionSet
from .spectral import Grid, SpectralField
from .velocity import CollisionModel, HermiteSpace


@dataclass(frozen=True)
class KineticState:
    """Phase-space fluctuations, fields, scaling parameter and time."""

    space: HermiteSpace
    grid: Grid
    f: np.ndarray
    g: np.ndarray
    E: SpectralField
    B: SpectralField
    epsilon: float
    t: float

    def __post_init__(self):
        if not 0.0 < self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in (0, 1]")


def equilibrium(space: HermiteSpace, grid: Grid, epsilon: float,
                t: float = 0.0) -> KineticState:
    """Global-Maxwellian fixed point: zero fluctuations and fields."""
    return KineticState(space=space, grid=grid,
                        f=hf.zero_cube(space, grid),
                        g=hf.zero_cube(space, grid),
                        E=sp.zeros(grid, "vector"), B=sp.zeros(grid, "vector"),
                        epsilon=epsilon, t=t)


@lru_cache(maxsize=4)
def _transport_eigs(max_degree: int, quad_points: int, grid: Grid):
    """Batched eigendecomposition of sum_j k_j V_j over all Fourier modes.

    Returns (eigenvalues (modes, nb), eigenvectors (modes, nb, nb), lambda_max).
    """
    space = HermiteSpace(max_degree, quad_points)
    k1, k2, k3 = (k.ravel() for k in sp.wavenumbers(grid))
    nb = space.size
    mats = (k1[:, None, None] * space.v_mult(0)
            + k2[:, None, None] * space.v_mult(1)
            + k3[:, None, None] * space.v_mult(2))
    w, v = np.linalg.eigh(mats)
    return w, v, float(np.max(np.abs(w)))


def _apply_transport(state_space: HermiteSpace, grid: Grid, cube: np.ndarray,
                     s: float) -> np.ndarray:
    """Exact free-streaming propagator exp(-s v.grad) on a cube."""
    w, v, _ = _transport_eigs(state_space.max_degree, state_space.quad_points,
                              grid)
    nb = state_space.size
    c = cube.reshape(nb, -1).T  # (modes, nb)
    proj = np.einsum("mki,mk->mi", v, c)
    phase = np.exp(-1j * w * s)
    out = np.einsum("mki,mi->mk", v, phase * proj)
    return out.T.reshape(cube.shape)


def _half_collision(state: KineticState, model: CollisionModel,
                    dt: float) -> KineticState:
    decay = np.exp(-model.nu0 * dt / (2.0 * state.epsilon ** 2))
    space = state.space
    f_h = space.project_p1(state.f)
    g_h = space.project_p2(state.g)
    return _with(state, f=f_h + decay * (state.f - f_h),
                 g=g_h + decay * (state.g - g_h))


def _with(state: KineticState, **kw) -> KineticState:
    data = {"space": state.space, "grid": state.grid, "f": state.f,
            "g": state.g, "E": state.E, "B": state.B,
            "epsilon": state.epsilon, "t": state.t}
    data.update(kw)
    return KineticState(**data)


def _nonlinear_rates(space: HermiteSpace, grid: Grid, model: CollisionModel,
                     f: np.ndarray, g: np.ndarray, e_field: SpectralField,
                     b_field: SpectralField, epsilon: float) -> tuple:
    """Collision-nonlinearity and Lorentz terms (fields frozen)."""
    inv_e2 = 1.0 / epsilon ** 2
    inv_e = 1.0 / epsilon
    n_f = inv_e2 * hf.gamma_cube(space, model, grid, f, f) \
        - inv_e * hf.coupling_cube(space, grid, g, e_field, b_field)
    n_g = inv_e2 * hf.gamma_cube(space, model, grid, g, f) \
        - inv_e * hf.coupling_cube(space, grid, f, e_field, b_field)
    iu = [space.index_of[(1, 0, 0)], space.index_of[(0, 1, 0)],
          space.index_of[(0, 0, 1)]]
    for i in range(3):
        n_g[iu[i]] += inv_e * e_field.coeffs[i]
    return n_f, n_g


def _maxwell_rotation(e_field: SpectralField, b_field: SpectralField,
                      current: SpectralField, sigma: SpectralField,
                      dt: float, epsilon: float) -> tuple:
    """Exact per-mode Maxwell step with frozen current and Gauss slaving."""
    grid = e_field.grid
    k1, k2, k3 = sp.wavenumbers(grid)
    k = np.stack([k1, k2, k3])
    ksq = sp.k_squared(grid)
    kmag = np.sqrt(np.where(ksq > 0, ksq, 1.0))
    khat = k / kmag

    e = e_field.coeffs.copy()
    b = b_field.coeffs.copy()
    j = current.coeffs

    def _dot(a, x):
        return a[0] * x[0] + a[1] * x[1] + a[2] * x[2]

    def _cross(a, x):
        return np.stack([a[1] * x[2] - a[2] * x[1],
                         a[2] * x[0] - a[0] * x[2],
                         a[0] * x[1] - a[1] * x[0]])

    # transverse parts
    e_t = e - khat * _dot(khat, e)
    b_t = b - khat * _dot(khat, b)
    j_t = j - khat * _dot(khat, j)
    b_part = 1j * _cross(k, j_t) / np.where(ksq > 0, ksq, 1.0)
    omega = kmag * dt / epsilon
    cos, sin = np.cos(omega), np.sin(omega)

    def _rot(x):
        return 1j * _cross(khat, x)

    b_shift = b_t - b_part
    e_new = cos * e_t + sin * _rot(b_shift)
    b_new = b_part + cos * b_shift - sin * _rot(e_t)

    # longitudinal: E slaved to Gauss, B has none
    e_long = -1j * k * sigma.coeffs / np.where(ksq > 0, ksq, 1.0)
    e_new = e_new + e_long

    # spatial mean: e dE/dt = -j at k = 0, B mean frozen
    e_new[:, 0, 0, 0] = e[:, 0, 0, 0] - dt * j[:, 0, 0, 0] / epsilon
    b_new[:, 0, 0, 0] = b[:, 0, 0, 0]
    return SpectralField(grid, e_new), SpectralField(grid, b_new)


def step_vmb(state: KineticState, dt: float,
             model: CollisionModel) -> KineticState:
    """One Strang-split step of the full scaled system."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    space, grid, eps = state.space, state.grid, state.epsilon

    _, _, lam_max = _transport_eigs(space.max_degree, space.quad_points, grid)
    if dt * lam_max / eps > 2.0 * np.pi:
        raise EpsilonTooSmall(
            "dt resolves less than one transport oscillation at this epsilon; "
            "reduce dt or increase epsilon")
    amp = float(np.max(np.abs(hf.cube_to_values(grid, state.f))))
    if dt * model.nu0 * amp / eps ** 2 > 1.0:
        raise CflViolation("explicit collision nonlinearity exceeds its "
                           "stability bound; reduce dt")

    mid = _half_collision(state, model, dt)

    # explicit stage: exact transport propagator + Heun on the nonlinearity
    n_f, n_g = _nonlinear_rates(space, grid, model, mid.f, mid.g, mid.E,
                                mid.B, eps)
    s = dt / eps
    f_pred = _apply_transport(space, grid, mid.f + dt * n_f, s)
    g_pred = _apply_transport(space, grid, mid.g + dt * n_g, s)
    n_f2, n_g2 = _nonlinear_rates(space, grid, model, f_pred, g_pred, mid.E,
                                  mid.B, eps)
    f_new = _apply_transport(space, grid, mid.f, s) \
        + 0.5 * dt * (_apply_transport(space, grid, n_f, s) + n_f2)
    g_new = _apply_transport(space, grid, mid.g, s) \
        + 0.5 * dt * (_apply_transport(space, grid, n_g, s) + n_g2)

    current = hf.current_moment(space, grid, g_new)
    sigma = hf.charge_moment(space, grid, g_new)
    e_new, b_new = _maxwell_rotation(mid.E, mid.B, current, sigma, dt, eps)

    out = _with(mid, f=f_new, g=g_new, E=e_new, B=b_new, t=state.t + dt)
    out = _half_collision(out, model, dt)
    if not (np.all(np.isfinite(out.f)) and np.all(np.isfinite(out.g))
            and np.all(np.isfinite(out.E.coeffs))
            and np.all(np.isfinite(out.B.coeffs))):
        raise NonFiniteState("kinetic state lost finiteness during the step")
    return out


def moments(state: KineticState) -> dict:
    """Hydrodynamic readouts {rho_f, u_f, theta_f, sigma_g}."""
    hydro = hf.hydro_moments(state.space, state.grid, state.f)
    return {"rho_f": hydro["rho"], "u_f": hydro["u"],
            "theta_f": hydro["theta"],
            "sigma_g": hf.charge_moment(state.space, state.grid, state.g)}


def lift_expansion(expansion: ExpansionSet, epsilon: float) -> KineticState:
    """Truncated expansion evaluated at a given epsilon as a KineticState."""
    if expansion.n_max < 1:
        raise OrderMismatch("expansion provides no orders to lift")
    first = expansion.order(1)
    space, grid = first.space, first.grid
    f = hf.zero_cube(space, grid)
    g = hf.zero_cube(space, grid)
    e_acc = sp.zeros(grid, "vector")
    b_acc = sp.zeros(grid, "vector")
    for m in range(1, expansion.n_max + 1):
        rec = expansion.order(m)
        scale = epsilon ** m
        f = f + scale * rec.f
        g = g + scale * rec.g
        e_acc = e_acc + scale * rec.E
        b_acc = b_acc + scale * rec.B
    return KineticState(space=space, grid=grid, f=f, g=g, E=e_acc, B=b_acc,
                        epsilon=epsilon, t=expansion.t)


def remainder(state: KineticState, expansion: ExpansionSet,
              n: int) -> KineticState:
    """n-th remainder: (state - lift of orders 1..n-1) / epsilon^n."""
    if n < 1:
        raise OrderMismatch("remainder order must be >= 1")
    if expansion.n_max < n - 1:
        raise OrderMismatch(f"expansion lacks orders 1..{n - 1}")
    eps = state.epsilon
    if eps ** n < 1e-12:
        raise EpsilonUnderflow("epsilon**n below the amplification threshold")
    f = state.f.copy()
    g = state.g.copy()
    e_acc = state.E
    b_acc = state.B
    for m in range(1, n):
        rec = expansion.order(m)
        scale = eps ** m
        f = f - scale * rec.f
        g = g - scale * rec.g
        e_acc = e_acc - scale * rec.E
        b_acc = b_acc - scale * rec.B
    inv = eps ** (-n)
    return KineticState(space=state.space, grid=state.grid, f=inv * f,
                        g=inv * g, E=inv * e_acc, B=inv * b_acc,
                        epsilon=eps, t=state.t)
