"""Fluid solver tests: closed-form decays, temporal order, reconstruction.

The linearization of the fluid system around rest has exact single-mode
solutions; the integrating-factor stepper must reproduce them to roundoff
because it treats the linear part exactly.
"""

import numpy as np
import pytest

import vmblab.fluid as fl
import vmblab.spectral as sp
from vmblab.errors import CflViolation, IncompatibleSources
from vmblab.velocity import CollisionModel

from test_spectral import band_limited


def shear_state(grid, amplitude=0.05):
    x1, x2, x3 = grid.meshgrid()
    u = sp.from_values(grid, np.stack([amplitude * np.sin(x2),
                                       np.zeros_like(x1),
                                       np.zeros_like(x1)]))
    state, _ = fl.prepare_state(u, sp.zeros(grid), sp.zeros(grid))
    return state


def sigma_state(grid, amplitude=0.05):
    x1, _, _ = grid.meshgrid()
    sigma = sp.from_values(grid, amplitude * np.cos(x1))
    state, _ = fl.prepare_state(sp.zeros(grid, "vector"), sp.zeros(grid),
                                sigma)
    return state


def run_steps(state, dt, n, model):
    for _ in range(n):
        state = fl.step_nonlinear_vnsf(state, dt, model)
    return state


class TestPrepareState:
    def test_enforces_invariants(self, grid8, rng):
        u = band_limited(grid8, rng, rank="vector")
        theta = band_limited(grid8, rng)
        sigma = band_limited(grid8, rng)
        state, corrections = fl.prepare_state(u, theta, sigma)
        assert sp.divergence(state.u).norm() < 1e-12 * max(u.norm(), 1.0)
        assert state.sigma.mean() == 0.0
        assert (sp.laplacian(state.phi) - state.sigma).norm() \
            < 1e-12 * max(sigma.norm(), 1.0)
        assert corrections["leray_correction"] >= 0.0

    def test_already_clean_data_untouched(self, grid8, rng):
        u = sp.leray_project(band_limited(grid8, rng, rank="vector"))
        state, corrections = fl.prepare_state(u, sp.zeros(grid8),
                                              sp.zeros(grid8))
        assert corrections["leray_correction"] < 1e-12 * max(u.norm(), 1.0)
        assert corrections["sigma_mean_correction"] == 0.0


class TestClosedForms:
    def test_shear_flow_decays_like_viscous_heat_kernel(self, grid16, model):
        # u = (A sin x2, 0, 0) is an exact solution with u(t) = e^{-eta t} u0
        dt, steps = 1e-3, 1000
        amplitude = 0.05
        state = run_steps(shear_state(grid16, amplitude), dt, steps, model)
        eta = model.transport()["eta"]
        exact = amplitude * np.exp(-eta * dt * steps)
        got = np.max(np.abs(state.u.values()[0]))
        assert abs(got - exact) / exact < 1e-6

    def test_sigma_mode_decays_with_damping_and_diffusion(self, grid16,
                                                          model):
        # sigma = A cos x1 decays like e^{-alpha(|k|^2+1)t} = e^{-2 alpha t}
        dt, steps = 1e-3, 1000
        amplitude = 0.05
        state = run_steps(sigma_state(grid16, amplitude), dt, steps, model)
        alpha = model.transport()["alpha"]
        exact = amplitude * np.exp(-2.0 * alpha * dt * steps)
        got = np.max(np.abs(state.sigma.values()))
        assert abs(got - exact) / exact < 1e-6

    def test_temporal_order_at_least_second(self, grid8, model, rng):
        # nonlinear data: compare dt and dt/2 against a fine reference
        u = sp.leray_project(band_limited(grid8, rng, rank="vector")) * 0.05
        theta = band_limited(grid8, rng) * 0.05
        sigma = band_limited(grid8, rng) * 0.05
        state0, _ = fl.prepare_state(u, theta, sigma)
        t_final = 0.1
        ref = run_steps(state0, t_final / 512, 512, model)

        def error(n):
            out = run_steps(state0, t_final / n, n, model)
            return ((out.u - ref.u).norm() + (out.theta - ref.theta).norm()
                    + (out.sigma - ref.sigma).norm())

        e1, e2 = error(8), error(16)
        order = np.log2(e1 / e2)
        assert order >= 1.9


class TestStepProperties:
    def test_step_preserves_incompressibility_and_means(self, grid8, model,
                                                        rng):
        u = sp.leray_project(band_limited(grid8, rng, rank="vector")) * 0.05
        theta = band_limited(grid8, rng) * 0.05
        sigma = band_limited(grid8, rng) * 0.05
        state, _ = fl.prepare_state(u, theta, sigma)
        mean_u0 = state.u.mean()
        mean_theta0 = state.theta.mean()
        out = run_steps(state, 1e-2, 20, model)
        assert sp.divergence(out.u).norm() < 1e-12
        assert out.sigma.mean() == 0.0
        assert np.max(np.abs(out.u.mean() - mean_u0)) < 1e-12
        assert abs(out.theta.mean() - mean_theta0) < 1e-12

    def test_time_derivatives_match_small_step(self, grid8, model, rng):
        u = sp.leray_project(band_limited(grid8, rng, rank="vector")) * 0.05
        theta = band_limited(grid8, rng) * 0.05
        sigma = band_limited(grid8, rng) * 0.05
        state, _ = fl.prepare_state(u, theta, sigma)
        du, dtheta, dsigma = fl.time_derivatives(state, model.transport())
        dt = 1e-6
        out = fl.step_nonlinear_vnsf(state, dt, model)
        fd_u = (out.u - state.u) * (1.0 / dt)
        fd_theta = (out.theta - state.theta) * (1.0 / dt)
        fd_sigma = (out.sigma - state.sigma) * (1.0 / dt)
        assert (fd_u - du).norm() < 1e-5 * max(du.norm(), 1.0)
        assert (fd_theta - dtheta).norm() < 1e-5 * max(dtheta.norm(), 1.0)
        assert (fd_sigma - dsigma).norm() < 1e-5 * max(dsigma.norm(), 1.0)

    def test_cfl_violation_raises(self, grid8, model):
        x1, _, _ = grid8.meshgrid()
        u = sp.from_values(grid8, np.stack([10.0 * np.sin(x1) * 0 + 10.0,
                                            np.zeros_like(x1),
                                            np.zeros_like(x1)]))
        state, _ = fl.prepare_state(u, sp.zeros(grid8), sp.zeros(grid8))
        with pytest.raises(CflViolation):
            fl.step_nonlinear_vnsf(state, 1.0, model)


class TestHelmholtzReconstruction:
    def test_exact_on_nonzero_modes(self, grid16, rng):
        source = band_limited(grid16, rng, rank="vector")
        transverse = sp.leray_project(source)
        mean = transverse.coeffs[:, 0, 0, 0].copy()
        transverse_no_mean = sp.SpectralField(
            grid16, transverse.coeffs
            - (np.abs(transverse.coeffs) * 0
               + np.where(sp.k_squared(grid16) == 0, 1.0, 0.0)) * mean[:, None, None, None])
        div_data = sp.divergence(band_limited(grid16, rng, rank="vector"))
        target_mean = rng.standard_normal(3)
        out = fl.helmholtz_from_sources(grid16, div_data, sp.curl(source),
                                        target_mean)
        assert (sp.divergence(out) - div_data).norm() < 1e-12 \
            * max(div_data.norm(), 1.0)
        assert (sp.curl(out) - sp.curl(source)).norm() < 1e-12 \
            * max(source.norm(), 1.0)
        assert np.max(np.abs(out.mean() - target_mean)) < 1e-12

    def test_rejects_non_solenoidal_curl_data(self, grid8, rng):
        bad = sp.gradient(band_limited(grid8, rng))
        with pytest.raises(IncompatibleSources):
            fl.helmholtz_from_sources(grid8, sp.zeros(grid8), bad,
                                      np.zeros(3))

    def test_rejects_divergence_data_with_mean(self, grid8, rng):
        bad = band_limited(grid8, rng)
        coeffs = bad.coeffs.copy()
        coeffs[0, 0, 0] = 1.0
        bad = sp.SpectralField(grid8, coeffs)
        with pytest.raises(IncompatibleSources):
            fl.helmholtz_from_sources(grid8, bad, sp.zeros(grid8, "vector"),
                                      np.zeros(3))


class TestMeanFieldOde:
    def test_exact_exponential_relaxation(self):
        mean0 = np.array([1.0, -2.0, 0.5])
        ell = np.zeros(3)
        alpha = 1.0
        dt = 0.25
        out = fl._advance_mean_e(mean0, ell, alpha, dt)
        assert np.max(np.abs(out - mean0 * np.exp(-alpha * dt))) < 1e-12

    def test_constant_forcing_fixed_point(self):
        alpha = 2.0
        ell = np.array([1.0, 0.0, 0.0])
        fixed = ell / alpha
        out = fl._advance_mean_e(fixed, ell, alpha, 0.3)
        assert np.max(np.abs(out - fixed)) < 1e-12
