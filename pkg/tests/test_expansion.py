"""Hierarchy-construction tests.

The order-by-order expansion must satisfy structural identities that are
independent of the construction code: Gauss/Faraday constraints, charge
continuity, second-order incompressibility, and microscopy of the inverted
parts.  Most hold to roundoff because every ingredient is spectral.
"""

import numpy as np
import pytest

import vmblab.expansion as ex
import vmblab.fluid as fl
import vmblab.hermite_fourier as hf
import vmblab.spectral as sp
from vmblab.cli import initializers
from vmblab.errors import OrderMismatch
from vmblab.velocity import CollisionModel, default_space


@pytest.fixture(scope="module")
def hierarchy():
    """A short fluid trajectory and both expansion orders on 16^3."""
    grid = sp.Grid(16)
    model = CollisionModel(1.0, "constant")
    u, theta, sigma = initializers("random_small", 0.05, 11, grid)
    state, _ = fl.prepare_state(u, theta, sigma)
    dt = 2e-4
    traj = [state]
    for _ in range(4):
        traj.append(fl.step_nonlinear_vnsf(traj[-1], dt, model))
    sources = ex.assemble_r2_sources(traj, model, dt)
    orders2 = ex.build_full_second_order(traj, sources, model, dt)
    return {"grid": grid, "model": model, "traj": traj, "dt": dt,
            "sources": sources, "orders2": orders2}


class TestFirstOrder:
    def test_boussinesq_relation(self, hierarchy):
        o1 = ex.build_first_order(hierarchy["traj"][0])
        rho, theta = o1.hydro["rho"], o1.hydro["theta"]
        assert (rho + theta).norm() < 1e-10 * max(theta.norm(), 1.0)

    def test_velocity_is_solenoidal(self, hierarchy):
        o1 = ex.build_first_order(hierarchy["traj"][0])
        assert sp.divergence(o1.hydro["u"]).norm() < 1e-10

    def test_magnetic_field_vanishes(self, hierarchy):
        o1 = ex.build_first_order(hierarchy["traj"][0])
        assert o1.B.norm() == 0.0

    def test_electric_field_is_a_gradient(self, hierarchy):
        o1 = ex.build_first_order(hierarchy["traj"][0])
        state = hierarchy["traj"][0]
        assert (o1.E - sp.gradient(state.phi)).norm() < 1e-10
        assert sp.curl(o1.E).norm() < 1e-12

    def test_gauss_law(self, hierarchy):
        o1 = ex.build_first_order(hierarchy["traj"][0])
        space, grid = o1.space, hierarchy["grid"]
        sigma1 = hf.charge_moment(space, grid, o1.g)
        assert (sp.divergence(o1.E) - sigma1).norm() \
            < 1e-10 * max(sigma1.norm(), 1.0)

    def test_distributions_are_hydrodynamic(self, hierarchy):
        o1 = ex.build_first_order(hierarchy["traj"][0])
        space = o1.space
        flat = o1.f.reshape(space.size, -1)
        scale = max(np.max(np.abs(flat)), 1e-300)
        assert np.max(np.abs(flat - space.project_p1(flat))) < 1e-12 * scale


class TestSecondOrderMicro:
    def test_microscopy_of_inverted_parts(self, hierarchy):
        o1 = ex.build_first_order(hierarchy["traj"][0])
        micro = ex.build_second_order_micro(o1, hierarchy["model"])
        f2m, g2m = micro["f_micro"], micro["g_micro"]
        space = o1.space
        flat_f = f2m.reshape(space.size, -1)
        flat_g = g2m.reshape(space.size, -1)
        scale_f = max(np.max(np.abs(flat_f)), 1e-300)
        scale_g = max(np.max(np.abs(flat_g)), 1e-300)
        assert np.max(np.abs(space.project_p1(flat_f))) < 1e-11 * scale_f
        assert np.max(np.abs(space.project_p2(flat_g))) < 1e-11 * scale_g


class TestSecondOrderFields:
    def test_gauss_law(self, hierarchy):
        grid = hierarchy["grid"]
        for order in hierarchy["orders2"]:
            sigma2 = hf.charge_moment(order.space, grid, order.g)
            res = (sp.divergence(order.E) - sigma2).norm()
            assert res < 1e-10 * max(sigma2.norm(), 1.0)

    def test_faraday_with_static_first_order_magnetic_field(self, hierarchy):
        # curl E2 = -dt B1 = 0
        for order in hierarchy["orders2"]:
            assert sp.curl(order.E).norm() < 1e-12

    def test_magnetic_field_is_solenoidal_and_mean_free(self, hierarchy):
        for order in hierarchy["orders2"]:
            assert sp.divergence(order.B).norm() < 1e-12
            assert np.max(np.abs(order.B.mean())) < 1e-14

    def test_ampere_law_on_nonzero_modes(self, hierarchy):
        # curl B2 = J2 + dt E1 holds exactly away from k = 0; the k = 0
        # component of the current is absorbed by the mean-field relaxation
        grid = hierarchy["grid"]
        sources = hierarchy["sources"]
        for i in (1, 2, 3):
            order = hierarchy["orders2"][i]
            current = hf.current_moment(order.space, grid, order.g)
            rhs = current.coeffs + sources[i].E_prev_dt.coeffs
            res = sp.curl(order.B).coeffs - rhs
            res[:, 0, 0, 0] = 0.0
            res_norm = sp.SpectralField(grid, res).norm()
            assert res_norm < 1e-12 * max(sp.SpectralField(grid, rhs).norm(),
                                          1.0)

    def test_magnetic_effect_appears_at_second_order(self, hierarchy):
        # generic data with sigma != 0 must generate a magnetic field at
        # order 2 even though order 1 has none
        state = hierarchy["traj"][0]
        data_norm = (state.u.norm() + state.theta.norm()
                     + state.sigma.norm())
        order = hierarchy["orders2"][2]
        assert order.B.norm() > 1e-6 * data_norm

    def test_second_order_incompressibility(self, hierarchy):
        # div u2 = dt theta1 (the time derivative of the first-order
        # temperature, by the Boussinesq relation rho1 = -theta1)
        model = hierarchy["model"]
        for i in (0, 1, 2):
            state = hierarchy["traj"][i]
            order = hierarchy["orders2"][i]
            _, dtheta, _ = fl.time_derivatives(state, model.transport())
            res = sp.divergence(order.hydro["u"]) - dtheta
            assert res.norm() < 1e-8 * max(dtheta.norm(), 1.0)


class TestHierarchyMoments:
    def test_charge_continuity(self, hierarchy):
        # dt sigma1 + div <g2, v sqrt mu> = 0 exactly (no time differencing)
        grid, model = hierarchy["grid"], hierarchy["model"]
        for i in (0, 1, 2):
            state = hierarchy["traj"][i]
            order = hierarchy["orders2"][i]
            _, _, dsigma = fl.time_derivatives(state, model.transport())
            current = hf.current_moment(order.space, grid, order.g)
            res = dsigma + sp.divergence(current)
            assert res.norm() < 1e-10 * max(dsigma.norm(), 1.0)

    def test_momentum_balance(self, hierarchy):
        # the solenoidal part of dt u1 + <v . grad f2, v sqrt mu> must be
        # balanced by the electric force sigma1 E1
        grid, model = hierarchy["grid"], hierarchy["model"]
        for i in (1, 2):
            state = hierarchy["traj"][i]
            order = hierarchy["orders2"][i]
            du, _, _ = fl.time_derivatives(state, model.transport())
            transport_term = hf.transport_momentum_moment(
                order.space, grid, order.f)
            e1 = sp.gradient(state.phi)
            force = sp.SpectralField(grid, np.stack([
                sp.dealias_product(state.sigma, e1.component(j)).coeffs
                for j in range(3)]))
            res = sp.leray_project(du + transport_term - force)
            assert res.norm() < 1e-6 * max(du.norm(), 1.0)


class TestSources:
    def test_ell_matches_field_coupling_route(self, hierarchy):
        # ell is defined through the field-coupling moment; check against
        # the closed form -(1/nu0) int rho1 E1 dx
        grid, model = hierarchy["grid"], hierarchy["model"]
        for i, src in enumerate(hierarchy["sources"]):
            state = hierarchy["traj"][i]
            rho1 = -1.0 * state.theta  # Boussinesq
            e1 = sp.gradient(state.phi)
            expected = -np.array([
                ex._integral(rho1, e1.component(j)) for j in range(3)
            ]) / model.nu0
            assert np.max(np.abs(src.ell - expected)) < 1e-12

    def test_insufficient_history_raises(self, hierarchy):
        from vmblab.errors import InsufficientHistory
        with pytest.raises(InsufficientHistory):
            ex.assemble_r2_sources(hierarchy["traj"][:2],
                                   hierarchy["model"], hierarchy["dt"])


class TestExpansionSet:
    def test_order_lookup_and_mismatch(self, hierarchy):
        o1 = ex.build_first_order(hierarchy["traj"][0])
        eset = ex.expansion_set_at(o1)
        assert eset.n_max == 1
        assert eset.order(1) is o1
        with pytest.raises(OrderMismatch):
            eset.order(2)
