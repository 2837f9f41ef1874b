"""Oracle tests for the Fourier spectral core.

Every identity here has an independent check: closed-form trig fields,
trapezoid quadrature (exact for band-limited integrands on a periodic
grid), or operator compositions that must vanish identically.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import vmblab.spectral as sp

TOL = 1e-12


def band_limited(grid, rng, rank="scalar", kmax=2):
    """Random real field supported on |k_i| <= kmax (safe under 2/3 rule)."""
    shape = grid.shape if rank == "scalar" else (3,) + grid.shape
    coeffs = np.zeros(shape, dtype=complex)
    k1, k2, k3 = sp.wavenumbers(grid)
    mask = (np.abs(k1) <= kmax) & (np.abs(k2) <= kmax) & (np.abs(k3) <= kmax)
    raw = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    coeffs[..., mask] = raw[..., mask]
    field = sp.SpectralField(grid, coeffs)
    return sp.from_values(grid, field.values())  # re-sample: enforce realness


class TestRoundTrips:
    def test_values_coeffs_round_trip(self, grid16, rng):
        vals = rng.standard_normal(grid16.shape)
        field = sp.from_values(grid16, vals)
        assert np.max(np.abs(field.values() - vals)) < TOL

    def test_single_mode_coefficients(self, grid16):
        x1, _, _ = grid16.meshgrid()
        field = sp.from_values(grid16, np.cos(3.0 * x1))
        # cos(3 x1) = (e^{3ix1} + e^{-3ix1})/2: two coefficients of
        # magnitude 1/2, sign (-1)^3 from the grid origin at -pi
        k1, k2, k3 = sp.wavenumbers(grid16)
        expected = np.where((np.abs(k1) == 3) & (k2 == 0) & (k3 == 0),
                            -0.5, 0.0)
        assert np.max(np.abs(field.coeffs - expected)) < TOL


class TestCalculus:
    def test_derivative_of_sine(self, grid16):
        x1, x2, _ = grid16.meshgrid()
        field = sp.from_values(grid16, np.sin(2.0 * x1) * np.cos(x2))
        d1 = sp.derivative(field, 1)
        exact = 2.0 * np.cos(2.0 * x1) * np.cos(x2)
        assert np.max(np.abs(d1.values() - exact)) < TOL

    def test_curl_of_gradient_vanishes(self, grid16, rng):
        f = band_limited(grid16, rng)
        assert sp.curl(sp.gradient(f)).norm() < TOL

    def test_divergence_of_curl_vanishes(self, grid16, rng):
        v = band_limited(grid16, rng, rank="vector")
        assert sp.divergence(sp.curl(v)).norm() < TOL * v.norm()

    def test_laplacian_matches_divergence_of_gradient(self, grid16, rng):
        f = band_limited(grid16, rng)
        diff = sp.laplacian(f) - sp.divergence(sp.gradient(f))
        assert diff.norm() < TOL * max(f.norm(), 1.0)

    def test_poisson_right_inverse(self, grid16, rng):
        f = band_limited(grid16, rng)
        # strip the mean: Laplace inverse is defined on mean-zero data
        coeffs = f.coeffs.copy()
        coeffs[0, 0, 0] = 0.0
        f0 = sp.SpectralField(grid16, coeffs)
        back = sp.laplacian(sp.inverse_laplacian_zero_mean(f0))
        assert (back - f0).norm() < TOL * max(f0.norm(), 1.0)
        assert sp.inverse_laplacian_zero_mean(f0).mean() == 0.0


class TestLeray:
    def test_idempotent(self, grid16, rng):
        v = band_limited(grid16, rng, rank="vector")
        once = sp.leray_project(v)
        twice = sp.leray_project(once)
        assert (twice - once).norm() < TOL * max(v.norm(), 1.0)

    def test_result_is_divergence_free(self, grid16, rng):
        v = band_limited(grid16, rng, rank="vector")
        assert sp.divergence(sp.leray_project(v)).norm() \
            < TOL * max(v.norm(), 1.0)

    def test_annihilates_gradients(self, grid16, rng):
        f = band_limited(grid16, rng)
        assert sp.leray_project(sp.gradient(f)).norm() \
            < TOL * max(f.norm(), 1.0)

    def test_preserves_divergence_free_fields(self, grid16, rng):
        v = sp.curl(band_limited(grid16, rng, rank="vector"))
        assert (sp.leray_project(v) - v).norm() < TOL * max(v.norm(), 1.0)


class TestNormsAndProducts:
    def test_parseval_against_trapezoid_quadrature(self, grid16, rng):
        f = band_limited(grid16, rng)
        vals = f.values()
        cell = (2.0 * np.pi / grid16.n_per_axis) ** 3
        quadrature = np.sqrt(np.sum(vals ** 2) * cell)
        assert abs(f.norm() - quadrature) < TOL * quadrature

    def test_dealias_product_exact_for_band_limited_factors(self, grid16,
                                                            rng):
        a = band_limited(grid16, rng)
        b = band_limited(grid16, rng)
        # |k| <= 2 factors: the true product lives on |k| <= 4, inside the
        # 2/3 cutoff of a 16^3 grid, so dealiasing must not lose anything
        product = sp.dealias_product(a, b)
        exact = sp.from_values(grid16, a.values() * b.values())
        assert (product - exact).norm() < TOL * max(exact.norm(), 1.0)

    def test_advect_is_dealiased_directional_derivative(self, grid16, rng):
        u = sp.leray_project(band_limited(grid16, rng, rank="vector"))
        f = band_limited(grid16, rng)
        adv = sp.advect(u, f)
        uvals = u.values()
        grad = sp.gradient(f)
        exact = sum(uvals[i] * grad.component(i).values() for i in range(3))
        assert (adv - sp.from_values(grid16, exact)).norm() \
            < TOL * max(adv.norm(), 1.0)

    def test_advection_conserves_integral_for_solenoidal_velocity(
            self, grid16, rng):
        # int u . grad f dx = -int (div u) f dx = 0 for solenoidal u
        u = sp.leray_project(band_limited(grid16, rng, rank="vector"))
        f = band_limited(grid16, rng)
        assert abs(sp.advect(u, f).mean()) < TOL

    def test_sobolev_norm_zero_order_is_l2(self, grid16, rng):
        f = band_limited(grid16, rng)
        assert abs(sp.sobolev_norm(f, 0) - f.norm()) < TOL * f.norm()

    def test_sobolev_norm_single_mode_oracle(self, grid16):
        x1, x2, _ = grid16.meshgrid()
        f = sp.from_values(grid16, np.sin(x1 + 2.0 * x2))
        # |k|^2 = 5; ||f||^2 = V/2; H^1 seminorm weight (1 + |k|^2)
        expected = np.sqrt((1.0 + 5.0) * sp.BOX_VOLUME / 2.0)
        assert abs(sp.sobolev_norm(f, 1) - expected) < TOL * expected


class TestErrors:
    def test_odd_grid_rejected(self):
        with pytest.raises(ValueError):
            sp.Grid(9)

    def test_grid_mismatch_raises(self, grid8, grid16, rng):
        a = band_limited(grid8, rng)
        b = band_limited(grid16, rng)
        from vmblab.errors import GridMismatch
        with pytest.raises(GridMismatch):
            _ = a + b


class TestLinearity:
    @settings(max_examples=20, deadline=None)
    @given(c=st.floats(min_value=-5.0, max_value=5.0,
                       allow_nan=False, allow_infinity=False))
    def test_derivative_is_linear(self, c):
        grid = sp.Grid(8)
        rng = np.random.default_rng(99)
        a = band_limited(grid, rng)
        b = band_limited(grid, rng)
        lhs = sp.derivative(a + c * b, 1)
        rhs = sp.derivative(a, 1) + c * sp.derivative(b, 1)
        assert (lhs - rhs).norm() < 1e-11 * max(lhs.norm(), 1.0)
