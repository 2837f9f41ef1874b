"""Construction of the asymptotic coefficient families.

From a trajectory of the nonlinear limit system this module builds the
order-1 and order-2 coefficients of the formal expansion

    f ~ eps f_1 + eps^2 f_2 + ...,   g ~ eps g_1 + eps^2 g_2 + ...,
    E ~ eps E_1 + eps^2 E_2 + ...,   B ~ eps^2 B_2 + ...

Order 1 is purely hydrodynamic.  Order 2 splits into a microscopic part
obtained by inverting the linearized collision operators on explicit
right-hand sides, and a hydrodynamic part that solves a linear system
around the order-1 background with source terms assembled here.  The
compressible velocity correction and the density-temperature offset of
order 2 are fixed by solvability conditions (Poisson solves), not by
evolution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import hermite_fourier as hf
from . import spectral as sp
from . import velocity as vel
from .errors import InsufficientHistory, OrderMismatch
from .fluid import (FluidState, LinearVNSFSources,
                    reconstruct_order_m_fields, step_linear_vnsf,
                    time_derivatives)
from .spectral import Grid, SpectralField
from .velocity import CollisionModel, HermiteSpace, default_space


@dataclass(frozen=True)
class ExpansionOrder:
    """One coefficient family member (f_m, g_m, E_m, B_m) at a fixed time."""

    space: HermiteSpace
    grid: Grid
    f: np.ndarray
    g: np.ndarray
    E: SpectralField
    B: SpectralField
    hydro: dict
    t: float


@dataclass(frozen=True)
class ExpansionSet:
    """Orders 1..n_max at a common time, plus provenance metadata."""

    orders: tuple
    n_max: int
    t: float
    provenance: dict

    def __post_init__(self):
        if len(self.orders) != self.n_max:
            raise OrderMismatch("orders list does not match n_max")
        for o in self.orders:
            if abs(o.t - self.t) > 1e-12 * max(1.0, abs(self.t)):
                raise OrderMismatch("orders are not at a common time")

    def order(self, m: int) -> ExpansionOrder:
        if not 1 <= m <= self.n_max:
            raise OrderMismatch(f"order {m} not available (n_max={self.n_max})")
        return self.orders[m - 1]


def build_first_order(fluid: FluidState,
                      space: HermiteSpace | None = None) -> ExpansionOrder:
    """Purely hydrodynamic order-1 coefficients from a fluid snapshot.

    f_1 = {rho_1 + u_1.v + theta_1 (|v|^2-3)/2} sqrt(mu) with rho_1 = -theta_1,
    g_1 = sigma_1 sqrt(mu), E_1 = grad phi_1, B_1 = 0.
    """
    space = space or default_space()
    grid = fluid.grid
    rho = -1.0 * fluid.theta
    f = hf.hydro_cube(space, rho, fluid.u, fluid.theta)
    g = hf.charge_cube(space, fluid.sigma)
    e1 = sp.gradient(fluid.phi)
    hydro = {"rho": rho, "u": fluid.u, "theta": fluid.theta,
             "sigma": fluid.sigma}
    return ExpansionOrder(space=space, grid=grid, f=f, g=g, E=e1,
                          B=sp.zeros(grid, "vector"), hydro=hydro, t=fluid.t)


def build_second_order_micro(order1: ExpansionOrder,
                             model: CollisionModel) -> dict:
    """Microscopic parts of the order-2 coefficients.

    (I-P1) f_2 = L^{-1}{-v.grad f_1 + Gamma(f_1, f_1)},
    (I-P2) g_2 = calL^{-1}{-v.grad g_1 + Gamma(g_1, f_1) + E_1 . v sqrt(mu)};

    both right-hand sides are microscopic because the order-1 fields satisfy
    the incompressibility and density-temperature constraints, so the guarded
    inverses are used deliberately — a NotMicroscopic error flags broken
    input invariants.
    """
    space, grid = order1.space, order1.grid
    rhs_f = -hf.v_grad(space, grid, order1.f) \
        + hf.gamma_cube(space, model, grid, order1.f, order1.f)
    f_micro = vel.invert_L_micro(space, model, rhs_f)

    rhs_g = -hf.v_grad(space, grid, order1.g) \
        + hf.gamma_cube(space, model, grid, order1.g, order1.f)
    iu = [space.index_of[(1, 0, 0)], space.index_of[(0, 1, 0)],
          space.index_of[(0, 0, 1)]]
    for i in range(3):
        rhs_g[iu[i]] += order1.E.coeffs[i]
    g_micro = vel.invert_cal_L_micro(space, model, rhs_g)
    return {"f_micro": f_micro, "g_micro": g_micro}


def boussinesq_offset(order1: ExpansionOrder, f2_micro: np.ndarray) -> SpectralField:
    """Second-order density-temperature sum rho_2 + theta_2 (zero mean).

    Fixed by the solvability of the first momentum-moment identity:
    grad(rho_2 + theta_2) = -d/dt u_1 - div<(I-P1)f_2, v v sqrt(mu)>
    + sigma_1 E_1; the time-derivative term drops under the inverse
    divergence because u_1 is solenoidal.
    """
    space, grid = order1.space, order1.grid
    k = sp.wavenumbers(grid)
    stress = hf.stress_moment(space, grid, f2_micro)
    src = np.zeros(grid.shape, dtype=complex)
    for i in range(3):
        for j in range(3):
            src += k[i] * k[j] * stress[i, j]
    charge_force = SpectralField(grid, np.stack([
        sp.dealias_product(order1.hydro["sigma"], order1.E.component(i)).coeffs
        for i in range(3)]))
    src = src + sp.divergence(charge_force).coeffs
    return sp.inverse_laplacian_zero_mean(SpectralField(grid, src))


def _compressible_correction(fluid: FluidState, transport: dict) -> tuple:
    """(I-P0)u_2 = grad q with lap q = d/dt theta_1, and its time derivative."""
    du1, dth1, _ = time_derivatives(fluid, transport)
    u_c = sp.gradient(sp.inverse_laplacian_zero_mean(dth1))
    # second time derivative of theta_1 by differentiating its equation
    d2th1 = SpectralField(fluid.grid,
                          -transport["kappa"] * sp.k_squared(fluid.grid)
                          * dth1.coeffs) \
        - sp.advect(du1, fluid.theta) - sp.advect(fluid.u, dth1)
    du_c = sp.gradient(sp.inverse_laplacian_zero_mean(d2th1))
    return u_c, du_c, du1, dth1


def _integral(a: SpectralField, b: SpectralField) -> np.ndarray:
    """Integral over the box of the pointwise product (per component)."""
    prod = a.values() * b.values()
    return np.mean(prod, axis=(-3, -2, -1)) * sp.BOX_VOLUME


def assemble_r2_sources(fluid_traj, model: CollisionModel, dt: float,
                        space: HermiteSpace | None = None,
                        micro_traj=None) -> list:
    """Source terms of the order-2 linear system along an order-1 trajectory.

    fluid_traj is a list of FluidState at uniform spacing dt (at least 3
    levels; the density-temperature offset needs a centered time stencil).
    Returns one LinearVNSFSources per level.  Pass micro_traj (output of
    build_second_order_micro per level) to avoid recomputation.
    """
    if len(fluid_traj) < 3:
        raise InsufficientHistory("need at least 3 time levels for the "
                                  "offset time derivative")
    space = space or default_space()
    transport = model.transport(space)
    nu0 = model.nu0
    grid = fluid_traj[0].grid
    eta, kappa = transport["eta"], transport["kappa"]

    partial = []
    offsets = []
    for fl in fluid_traj:
        order1 = build_first_order(fl, space)
        if micro_traj is None:
            micro = build_second_order_micro(order1, model)
        else:
            micro = micro_traj[len(partial)]
        m2f, m2g = micro["f_micro"], micro["g_micro"]
        f1, g1, e1 = order1.f, order1.g, order1.E
        u1, th1, sg1 = fl.u, fl.theta, fl.sigma

        u_c, du_c, du1, dth1 = _compressible_correction(fl, transport)
        div_uc = sp.divergence(u_c)

        # transport-of-microscopic contributions through the pseudo-inverses
        lf = vel.invert_L_on_complement(space, model,
                                        hf.v_grad(space, grid, m2f))
        gam_f = hf.gamma_cube(space, model, grid, f1, m2f) \
            + hf.gamma_cube(space, model, grid, m2f, f1)
        lgam_f = vel.invert_L_on_complement(space, model, gam_f)

        r_u = hf.transport_momentum_moment(space, grid, lf) \
            - hf.transport_momentum_moment(space, grid, lgam_f)
        r_u = r_u - du_c - sp.advect(u1, u_c) \
            + SpectralField(grid, -eta * sp.k_squared(grid) * u_c.coeffs) \
            - sp.advect(u_c, u1)
        r_u = r_u - SpectralField(grid, np.stack([
            sp.dealias_product(div_uc, u1.component(i)).coeffs
            for i in range(3)]))
        r_u = r_u + (eta / 3.0) * sp.gradient(div_uc)

        lg = vel.invert_cal_L_on_complement(space, model,
                                            hf.v_grad(space, grid, m2g))
        gam_g = hf.gamma_cube(space, model, grid, g1, m2f) \
            + hf.gamma_cube(space, model, grid, m2g, f1)
        lgam_g = vel.invert_cal_L_on_complement(space, model, gam_g)
        lorentz_f = vel.invert_cal_L_on_complement(
            space, model,
            hf.coupling_cube(space, grid, f1, e1, sp.zeros(grid, "vector")))
        r_sigma = hf.transport_scalar_moment(space, grid, lg, "mass") \
            - hf.transport_scalar_moment(space, grid, lgam_g, "mass") \
            + hf.transport_scalar_moment(space, grid, lorentz_f, "mass") \
            - sp.dealias_product(div_uc, sg1) - sp.advect(u_c, sg1)

        lorentz_g = vel.invert_L_on_complement(
            space, model,
            hf.coupling_cube(space, grid, g1, e1, sp.zeros(grid, "vector")))
        offset = boussinesq_offset(order1, m2f)
        micro_current = hf.current_moment(space, grid, m2g)
        em_work = sp.zeros(grid)
        for i in range(3):
            em_work = em_work + sp.dealias_product(e1.component(i),
                                                   micro_current.component(i))
        r_theta = hf.transport_scalar_moment(space, grid, lf, "energy5") \
            - hf.transport_scalar_moment(space, grid, lgam_f, "energy5") \
            + hf.transport_scalar_moment(space, grid, lorentz_g, "energy5") \
            - sp.advect(u1, offset) \
            + SpectralField(grid, -kappa * sp.k_squared(grid) * offset.coeffs) \
            - sp.dealias_product(div_uc, th1) - sp.advect(u_c, th1) \
            + 0.4 * em_work

        # compatibility data for the field reconstruction and mean-field ODE
        rho1 = order1.hydro["rho"]
        ell = -(1.0 / nu0) * _integral(
            SpectralField(grid, np.stack([rho1.coeffs] * 3)), e1)
        dsg1 = time_derivatives(fl, transport)[2]
        e_prev_dt = sp.gradient(sp.inverse_laplacian_zero_mean(dsg1))

        partial.append({
            "r_u": r_u, "r_sigma": r_sigma, "r_theta": r_theta,
            "ell": ell, "e_prev_dt": e_prev_dt,
            "micro_current": micro_current, "u_c": u_c, "offset": offset,
        })
        offsets.append(offset)

    sources = []
    n = len(partial)
    for i, p in enumerate(partial):
        if i == 0:
            d_off = (-3.0 * offsets[0] + 4.0 * offsets[1] - offsets[2]) \
                * (0.5 / dt)
        elif i == n - 1:
            d_off = (3.0 * offsets[-1] - 4.0 * offsets[-2] + offsets[-3]) \
                * (0.5 / dt)
        else:
            d_off = (offsets[i + 1] - offsets[i - 1]) * (0.5 / dt)
        r_theta = p["r_theta"] + 0.4 * d_off
        sources.append(LinearVNSFSources(
            R_u=p["r_u"], R_sigma=p["r_sigma"], R_theta=r_theta,
            ell=p["ell"], E_prev_dt=p["e_prev_dt"],
            B_prev_dt=sp.zeros(grid, "vector"),
            micro_current_g=p["micro_current"],
            u_m_compressible=p["u_c"], bous_offset=p["offset"]))
    return sources


def build_full_second_order(fluid_traj, sources, model: CollisionModel,
                            dt: float, space: HermiteSpace | None = None,
                            micro_traj=None) -> list:
    """Order-2 coefficient records along the order-1 trajectory.

    Evolves the hydrodynamic part with the linear solver (starting from
    zero), grafts on the compressible and density-temperature corrections
    from the sources, and assembles the full Hermite cubes plus the
    order-2 electromagnetic fields.
    """
    space = space or default_space()
    grid = fluid_traj[0].grid
    state2, _ = _zero_fluid_state(grid, fluid_traj[0].t)
    mean_e = np.zeros(3)
    records = []
    for i, fl in enumerate(fluid_traj):
        order1 = build_first_order(fl, space)
        if micro_traj is None:
            micro = build_second_order_micro(order1, model)
        else:
            micro = micro_traj[i]
        src = sources[i]
        u2 = state2.u + src.u_m_compressible
        rho2 = src.bous_offset - state2.theta
        f2 = hf.hydro_cube(space, rho2, u2, state2.theta) + micro["f_micro"]
        g2 = hf.charge_cube(space, state2.sigma) + micro["g_micro"]
        e2, b2 = reconstruct_order_m_fields(src, state2.sigma, mean_e)
        hydro = {"rho": rho2, "u": u2, "theta": state2.theta,
                 "sigma": state2.sigma}
        records.append(ExpansionOrder(space=space, grid=grid, f=f2, g=g2,
                                      E=e2, B=b2, hydro=hydro, t=fl.t))
        if i + 1 < len(fluid_traj):
            state2, _, _, mean_e = step_linear_vnsf(
                state2, fl, src, dt, model,
                background_next=fluid_traj[i + 1],
                sources_next=sources[i + 1], mean_e=mean_e)
    return records


def _zero_fluid_state(grid: Grid, t: float):
    z = sp.zeros(grid)
    zv = sp.zeros(grid, "vector")
    state = FluidState(u=zv, theta=z, sigma=z, phi=z, p=z, t=t)
    return state, None


def expansion_set_at(order1: ExpansionOrder,
                     order2: ExpansionOrder | None = None,
                     provenance: dict | None = None) -> ExpansionSet:
    """Bundle available orders at a common time into an ExpansionSet."""
    orders = (order1,) if order2 is None else (order1, order2)
    return ExpansionSet(orders=orders, n_max=len(orders), t=order1.t,
                        provenance=provenance or {})
