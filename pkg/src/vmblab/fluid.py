"""Time integration of the limiting incompressible fluid systems.

Two solvers live here.  The nonlinear system couples a divergence-free
velocity fluctuation u, a temperature fluctuation theta and a zero-mean
concentration difference sigma driven by its own electric potential:

    du/dt + u.grad u + grad p = eta lap u + sigma grad phi,
    dsigma/dt + u.grad sigma  = alpha lap sigma - alpha sigma,
    dtheta/dt + u.grad theta  = kappa lap theta,
    lap phi = sigma,   div u = 0,   rho = -theta.

The linear order-m companion advances [P0 u_m, sigma_m, theta_m] around a
frozen order-1 background with externally assembled sources, and
reconstructs the order-m electromagnetic fields from their curl/divergence
data plus a mean-field ODE.

Both use the same scheme: all stiff linear terms are integrated exactly per
Fourier mode (integrating factor), everything else by an explicit Heun
stage, which is second order overall and unconditionally stable in the
linear part.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import spectral as sp
from .errors import CflViolation, IncompatibleSources, NonFiniteState
from .spectral import Grid, SpectralField
from .velocity import CollisionModel


@dataclass(frozen=True)
class FluidState:
    """Solution snapshot of the nonlinear system (order-1 fields)."""

    u: SpectralField
    theta: SpectralField
    sigma: SpectralField
    phi: SpectralField
    p: SpectralField
    t: float

    @property
    def grid(self) -> Grid:
        return self.u.grid


@dataclass(frozen=True)
class LinearVNSFSources:
    """Assembled right-hand-side data for one order-m linear step.

    The compressible velocity part and the density-temperature offset are
    carried along because the linear system only evolves the solenoidal
    velocity; the builder fills them from the hierarchy identities.
    """

    R_u: SpectralField
    R_sigma: SpectralField
    R_theta: SpectralField
    ell: np.ndarray
    E_prev_dt: SpectralField
    B_prev_dt: SpectralField
    micro_current_g: SpectralField
    u_m_compressible: SpectralField
    bous_offset: SpectralField


def prepare_state(u: SpectralField, theta: SpectralField, sigma: SpectralField,
                  t: float = 0.0) -> tuple:
    """Enforce the state invariants, returning (state, correction magnitudes).

    The velocity is Leray-projected and the sigma mean removed; the sizes of
    both corrections are reported so run manifests can record them.
    """
    u_proj = sp.leray_project(u)
    corrections = {
        "leray_correction": (u - u_proj).norm(),
        "sigma_mean_correction": abs(sigma.mean()) * np.sqrt(sp.BOX_VOLUME),
    }
    sigma_coeffs = sigma.coeffs.copy()
    sigma_coeffs[0, 0, 0] = 0.0
    sigma0 = SpectralField(sigma.grid, sigma_coeffs)
    phi = sp.inverse_laplacian_zero_mean(sigma0)
    state = FluidState(u=u_proj, theta=theta, sigma=sigma0, phi=phi,
                       p=sp.zeros(u.grid), t=t)
    return state, corrections


def _check_finite(*fields):
    for f in fields:
        if not np.all(np.isfinite(f.coeffs)):
            raise NonFiniteState("state coefficients are not finite")


def _check_cfl(u: SpectralField, dt: float):
    umax = float(np.max(np.abs(u.values())))
    dx = 2.0 * np.pi / u.grid.n_per_axis
    if umax * dt / dx > 1.0:
        raise CflViolation(f"advective CFL number {umax * dt / dx:.3f} exceeds 1")


def _diffusion_factors(grid: Grid, dt: float, transport: dict):
    ksq = sp.k_squared(grid)
    return (np.exp(-transport["eta"] * ksq * dt),
            np.exp(-transport["kappa"] * ksq * dt),
            np.exp(-transport["alpha"] * (ksq + 1.0) * dt))


def nonlinear_rhs(state: FluidState, transport: dict) -> tuple:
    """Explicit (non-stiff) part of the nonlinear system, Leray-projected.

    Returns (N_u, N_theta, N_sigma); the stiff diffusion/damping terms are
    excluded because the stepper integrates those exactly.
    """
    force = np.stack([
        sp.dealias_product(state.sigma, sp.derivative(state.phi, j + 1)).coeffs
        for j in range(3)])
    n_u = sp.leray_project(SpectralField(state.grid, force)
                           - sp.advect(state.u, state.u))
    n_theta = -1.0 * sp.advect(state.u, state.theta)
    n_sigma = -1.0 * sp.advect(state.u, state.sigma)
    return n_u, n_theta, n_sigma


def time_derivatives(state: FluidState, transport: dict) -> tuple:
    """Full analytic right-hand sides (du/dt, dtheta/dt, dsigma/dt)."""
    n_u, n_theta, n_sigma = nonlinear_rhs(state, transport)
    ksq = sp.k_squared(state.grid)
    du = SpectralField(state.grid,
                       n_u.coeffs - transport["eta"] * ksq * state.u.coeffs)
    dtheta = SpectralField(state.grid,
                           n_theta.coeffs - transport["kappa"] * ksq
                           * state.theta.coeffs)
    dsigma = SpectralField(state.grid,
                           n_sigma.coeffs - transport["alpha"] * (ksq + 1.0)
                           * state.sigma.coeffs)
    return du, dtheta, dsigma


def step_nonlinear_vnsf(state: FluidState, dt: float,
                        model: CollisionModel) -> FluidState:
    """One integrating-factor Heun step of the nonlinear system."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    _check_finite(state.u, state.theta, state.sigma)
    _check_cfl(state.u, dt)
    transport = model.transport()
    fac_u, fac_th, fac_sg = _diffusion_factors(state.grid, dt, transport)
    grid = state.grid

    n_u, n_th, n_sg = nonlinear_rhs(state, transport)

    def _assemble(uc, thc, sgc, t):
        u = SpectralField(grid, uc)
        th = SpectralField(grid, thc)
        sg = SpectralField(grid, sgc)
        sg_zero = sg.coeffs.copy()
        sg_zero[0, 0, 0] = 0.0
        sg = SpectralField(grid, sg_zero)
        phi = sp.inverse_laplacian_zero_mean(sg)
        return FluidState(u=u, theta=th, sigma=sg, phi=phi,
                          p=sp.zeros(grid), t=t)

    pred = _assemble(fac_u * (state.u.coeffs + dt * n_u.coeffs),
                     fac_th * (state.theta.coeffs + dt * n_th.coeffs),
                     fac_sg * (state.sigma.coeffs + dt * n_sg.coeffs),
                     state.t + dt)
    n_u2, n_th2, n_sg2 = nonlinear_rhs(pred, transport)

    new = _assemble(
        fac_u * state.u.coeffs + 0.5 * dt * (fac_u * n_u.coeffs + n_u2.coeffs),
        fac_th * state.theta.coeffs + 0.5 * dt * (fac_th * n_th.coeffs
                                                  + n_th2.coeffs),
        fac_sg * state.sigma.coeffs + 0.5 * dt * (fac_sg * n_sg.coeffs
                                                  + n_sg2.coeffs),
        state.t + dt)
    _check_finite(new.u, new.theta, new.sigma)
    return new


def compute_pressure(state: FluidState, model: CollisionModel) -> SpectralField:
    """Diagnostic pressure: lap p = div(sigma grad phi - u.grad u), mean zero."""
    force = np.stack([
        sp.dealias_product(state.sigma, sp.derivative(state.phi, j + 1)).coeffs
        for j in range(3)])
    forcing = SpectralField(state.grid, force) - sp.advect(state.u, state.u)
    return sp.inverse_laplacian_zero_mean(sp.divergence(forcing))


# -- order-m linear system -----------------------------------------------------


def helmholtz_from_sources(grid: Grid, div_data: SpectralField,
                           curl_data: SpectralField,
                           mean: np.ndarray) -> SpectralField:
    """Reconstruct a vector field from its divergence, curl and spatial mean.

    Raises IncompatibleSources when the curl data are not solenoidal or the
    divergence data carry a spatial mean (periodic solvability), beyond 1e-8
    relative.
    """
    scale = max(curl_data.norm() + div_data.norm(), 1e-300)
    if sp.divergence(curl_data).norm() > 1e-8 * scale:
        raise IncompatibleSources("curl data have a nonzero divergence")
    if abs(div_data.coeffs[0, 0, 0]) * np.sqrt(sp.BOX_VOLUME) > 1e-8 * scale:
        raise IncompatibleSources("divergence data have a nonzero spatial mean")
    k1, k2, k3 = sp.wavenumbers(grid)
    ksq = sp.k_squared(grid)
    inv = np.where(ksq > 0, 1.0 / np.where(ksq > 0, ksq, 1.0), 0.0)
    d = div_data.coeffs
    c = curl_data.coeffs
    out = np.empty((3,) + grid.shape, dtype=complex)
    # grad part -i k d / |k|^2 plus rotational part i k x C / |k|^2
    out[0] = (-1j * k1 * d + 1j * (k2 * c[2] - k3 * c[1])) * inv
    out[1] = (-1j * k2 * d + 1j * (k3 * c[0] - k1 * c[2])) * inv
    out[2] = (-1j * k3 * d + 1j * (k1 * c[1] - k2 * c[0])) * inv
    out[:, 0, 0, 0] = np.asarray(mean, dtype=complex)
    return SpectralField(grid, out)


def reconstruct_order_m_fields(sources: LinearVNSFSources, sigma_m: SpectralField,
                               mean_e: np.ndarray) -> tuple:
    """(E_m, B_m) from the order-m Gauss/Ampere data.

    curl E_m = -d/dt B_{m-1} and div E_m = sigma_m with the given mean;
    curl B_m = micro current + d/dt E_{m-1}, div B_m = 0, zero mean.
    """
    grid = sigma_m.grid
    e_m = helmholtz_from_sources(grid, sigma_m,
                                 -1.0 * sources.B_prev_dt, mean_e)
    ampere = sources.micro_current_g + sources.E_prev_dt
    b_m = helmholtz_from_sources(grid, sp.zeros(grid),
                                 ampere, np.zeros(3))
    return e_m, b_m


def _advance_mean_e(mean_e: np.ndarray, ell: np.ndarray, alpha: float,
                    dt: float) -> np.ndarray:
    """Exact step of d/dt mean = -alpha mean + ell with ell frozen."""
    decay = np.exp(-alpha * dt)
    return mean_e * decay + (ell / alpha) * (1.0 - decay)


def _linear_rhs(state_m: FluidState, background: FluidState,
                sources: LinearVNSFSources, mean_e: np.ndarray,
                transport: dict) -> tuple:
    """Explicit part of the order-m system at one time level."""
    grid = state_m.grid
    e_m, _ = reconstruct_order_m_fields(sources, state_m.sigma, mean_e)
    e_1 = sp.gradient(background.phi)
    force = np.stack([
        (sp.dealias_product(state_m.sigma, e_1.component(j))
         + sp.dealias_product(background.sigma, e_m.component(j))).coeffs
        for j in range(3)])
    n_u = sp.leray_project(
        SpectralField(grid, force)
        - sp.advect(background.u, state_m.u)
        - sp.advect(state_m.u, background.u)
        + sources.R_u)
    n_sigma = (-1.0 * sp.advect(background.u, state_m.sigma)
               - sp.advect(state_m.u, background.sigma)
               + sources.R_sigma)
    n_theta = (-1.0 * sp.advect(background.u, state_m.theta)
               - sp.advect(state_m.u, background.theta)
               + sources.R_theta)
    return n_u, n_theta, n_sigma


def step_linear_vnsf(state_m: FluidState, background: FluidState,
                     sources: LinearVNSFSources, dt: float,
                     model: CollisionModel, *,
                     background_next: FluidState | None = None,
                     sources_next: LinearVNSFSources | None = None,
                     mean_e: np.ndarray | None = None) -> tuple:
    """Advance the order-m fields one step around the order-1 background.

    Returns (new_state_m, E_m, B_m, new_mean_e) with the electromagnetic
    fields evaluated at the new time.  background_next/sources_next supply
    the corrector-stage data; omitting them freezes the step-start values
    (first-order accurate in the background coupling only).
    """
    if mean_e is None:
        mean_e = np.zeros(3)
    background_next = background_next or background
    sources_next = sources_next or sources
    transport = model.transport()
    grid = state_m.grid
    _check_finite(state_m.u, state_m.theta, state_m.sigma)
    fac_u, fac_th, fac_sg = _diffusion_factors(grid, dt, transport)
    mean_e_next = _advance_mean_e(mean_e, sources.ell, transport["alpha"], dt)

    def _assemble(uc, thc, sgc, t):
        u = sp.leray_project(SpectralField(grid, uc))
        sg = SpectralField(grid, sgc)
        phi_coeffs = np.where(sp.k_squared(grid) > 0,
                              -sg.coeffs / np.where(sp.k_squared(grid) > 0,
                                                    sp.k_squared(grid), 1.0), 0.0)
        return FluidState(u=u, theta=SpectralField(grid, thc), sigma=sg,
                          phi=SpectralField(grid, phi_coeffs),
                          p=sp.zeros(grid), t=t)

    n_u, n_th, n_sg = _linear_rhs(state_m, background, sources, mean_e,
                                  transport)
    pred = _assemble(fac_u * (state_m.u.coeffs + dt * n_u.coeffs),
                     fac_th * (state_m.theta.coeffs + dt * n_th.coeffs),
                     fac_sg * (state_m.sigma.coeffs + dt * n_sg.coeffs),
                     state_m.t + dt)
    n_u2, n_th2, n_sg2 = _linear_rhs(pred, background_next, sources_next,
                                     mean_e_next, transport)
    new = _assemble(
        fac_u * state_m.u.coeffs + 0.5 * dt * (fac_u * n_u.coeffs + n_u2.coeffs),
        fac_th * state_m.theta.coeffs + 0.5 * dt * (fac_th * n_th.coeffs
                                                    + n_th2.coeffs),
        fac_sg * state_m.sigma.coeffs + 0.5 * dt * (fac_sg * n_sg.coeffs
                                                    + n_sg2.coeffs),
        state_m.t + dt)
    _check_finite(new.u, new.theta, new.sigma)
    e_m, b_m = reconstruct_order_m_fields(sources_next, new.sigma, mean_e_next)
    return new, e_m, b_m, mean_e_next
