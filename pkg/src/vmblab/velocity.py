"""Velocity-space machinery on a truncated Hermite basis.

The basis functions are tensor products of normalized probabilists' Hermite
polynomials times the square root of the unit Gaussian, orthonormal in
L^2(dv) and truncated at total degree M.  The hydrodynamic projections, the
relaxation collision operators and their bilinear companion, transport
coefficients and weighted norms all live here.

Coefficient arrays carry the basis index on the leading axis and may have
arbitrary trailing axes (a single velocity profile, or one profile per
spatial grid point), real or complex.  The nonlinear/bilinear operations are
pointwise in the trailing axes, so callers working in Fourier space must
evaluate them on physical-space values.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.linalg import eigh
from scipy.special import erf

from .errors import NotMicroscopic

SQRT2PI = np.sqrt(2.0 * np.pi)


class HermiteSpace:
    """Orthonormal Hermite tensor basis of total degree <= max_degree.

    Parameters
    ----------
    max_degree : int
        Truncation degree M >= 3.
    quad_points : int, optional
        Gauss-Hermite points per axis; defaults to M + 4, enough to
        integrate products of two basis functions exactly.
    """

    def __init__(self, max_degree: int, quad_points: int | None = None):
        if max_degree < 3:
            raise ValueError("max_degree must be at least 3")
        self.max_degree = int(max_degree)
        self.quad_points = int(quad_points) if quad_points else self.max_degree + 4

        self.indices = [n for n in itertools.product(range(self.max_degree + 1),
                                                     repeat=3)
                        if sum(n) <= self.max_degree]
        self.index_of = {n: a for a, n in enumerate(self.indices)}
        self.size = len(self.indices)
        self.degrees = np.array([sum(n) for n in self.indices])

        nodes1, weights1 = hermegauss(self.quad_points)
        self.nodes1 = nodes1
        q = self.quad_points
        # one-dimensional normalized polynomials at the nodes
        p1d = np.zeros((self.max_degree + 1, q))
        p1d[0] = 1.0
        if self.max_degree >= 1:
            p1d[1] = nodes1
        for m in range(2, self.max_degree + 1):
            p1d[m] = (nodes1 * p1d[m - 1] - np.sqrt(m - 1) * p1d[m - 2]) / np.sqrt(m)

        ii, jj, kk = np.meshgrid(range(q), range(q), range(q), indexing="ij")
        ii, jj, kk = ii.ravel(), jj.ravel(), kk.ravel()
        self.nodes = np.stack([nodes1[ii], nodes1[jj], nodes1[kk]])  # (3, q^3)
        self.weights = (weights1[ii] * weights1[jj] * weights1[kk]) / SQRT2PI ** 3

        self.basis_values = np.empty((self.size, q ** 3))
        for a, (n1, n2, n3) in enumerate(self.indices):
            self.basis_values[a] = p1d[n1][ii] * p1d[n2][jj] * p1d[n3][kk]
        # projector rows: psi_n / sqrt(mu) at the nodes times quadrature weight
        self.projector = self.basis_values * self.weights

        self._v_mult = [self._build_v_mult(axis) for axis in range(3)]
        self._raising = [self._build_raising(axis) for axis in range(3)]

        self._i000 = self.index_of[(0, 0, 0)]
        self._iu = [self.index_of[tuple(np.eye(3, dtype=int)[i])] for i in range(3)]
        self._i2 = [self.index_of[tuple(2 * np.eye(3, dtype=int)[i])]
                    for i in range(3)]

    # -- matrix builders ----------------------------------------------------

    def _build_v_mult(self, axis: int) -> np.ndarray:
        """Symmetric matrix of multiplication by v_axis (Galerkin-truncated)."""
        mat = np.zeros((self.size, self.size))
        for a, n in enumerate(self.indices):
            up = list(n)
            up[axis] += 1
            if tuple(up) in self.index_of:
                mat[self.index_of[tuple(up)], a] = np.sqrt(n[axis] + 1)
            down = list(n)
            down[axis] -= 1
            if down[axis] >= 0:
                mat[self.index_of[tuple(down)], a] = np.sqrt(n[axis])
        return mat

    def _build_raising(self, axis: int) -> np.ndarray:
        """Degree-raising ladder matrix (adjoint of the lowering ladder)."""
        mat = np.zeros((self.size, self.size))
        for a, n in enumerate(self.indices):
            up = list(n)
            up[axis] += 1
            if tuple(up) in self.index_of:
                mat[self.index_of[tuple(up)], a] = np.sqrt(n[axis] + 1)
        return mat

    def v_mult(self, axis: int) -> np.ndarray:
        return self._v_mult[axis]

    # -- elementary vectors and readouts ------------------------------------

    def unit(self, n: tuple) -> np.ndarray:
        c = np.zeros(self.size)
        c[self.index_of[tuple(n)]] = 1.0
        return c

    def sqrt_maxwellian(self) -> np.ndarray:
        return self.unit((0, 0, 0))

    def hydro_vector(self, rho, u, theta) -> np.ndarray:
        """Coefficients of {rho + u.v + theta (|v|^2-3)/2} sqrt(mu).

        The moment arguments may be scalars or arrays with matching trailing
        shape; the result then has that trailing shape.
        """
        rho = np.asarray(rho)
        out = np.zeros((self.size,) + rho.shape, dtype=np.result_type(rho, u, theta))
        out[self._i000] = rho
        for i in range(3):
            out[self._iu[i]] = np.asarray(u)[i]
        for i in range(3):
            out[self._i2[i]] = np.asarray(theta) / np.sqrt(2.0)
        return out

    def moments(self, c: np.ndarray):
        """(rho, u, theta) readout of a coefficient array."""
        rho = c[self._i000]
        u = c[[self._iu[0], self._iu[1], self._iu[2]]]
        theta = (np.sqrt(2.0) / 3.0) * (c[self._i2[0]] + c[self._i2[1]]
                                        + c[self._i2[2]])
        return rho, u, theta

    def energy_moment(self, c: np.ndarray):
        """Inner product against |v|^2 sqrt(mu)."""
        return np.sqrt(2.0) * (c[self._i2[0]] + c[self._i2[1]] + c[self._i2[2]]) \
            + 3.0 * c[self._i000]

    # -- hydrodynamic projections -------------------------------------------

    def project_p1(self, c: np.ndarray) -> np.ndarray:
        rho, u, theta = self.moments(c)
        return self.hydro_vector(rho, u, theta)

    def project_p2(self, c: np.ndarray) -> np.ndarray:
        out = np.zeros_like(c)
        out[self._i000] = c[self._i000]
        return out

    # -- quadrature projection ----------------------------------------------

    def project_function(self, polyvals: np.ndarray) -> np.ndarray:
        """Hermite coefficients of poly(v) sqrt(mu) from node values of poly.

        polyvals has shape (quad_points^3,) + trailing; exact whenever poly
        has per-axis degree <= 2*quad_points - 1 - max_degree.
        """
        return np.tensordot(self.projector, polyvals, axes=(1, 0))

    def node_values(self, c: np.ndarray) -> np.ndarray:
        """Values of f / sqrt(mu) at the quadrature nodes."""
        return np.tensordot(self.basis_values.T, c, axes=(1, 0))


@lru_cache(maxsize=None)
def default_space(max_degree: int = 4) -> HermiteSpace:
    """Shared default basis (M = 4) for callers that only need moments."""
    return HermiteSpace(max_degree)


@dataclass(frozen=True)
class VelocityVector:
    """A single velocity profile: real coefficients over the basis."""

    space: HermiteSpace
    coeffs: np.ndarray

    def __post_init__(self):
        if self.coeffs.shape != (self.space.size,):
            raise ValueError("coefficient length does not match the basis")

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))


@dataclass(frozen=True)
class CollisionModel:
    """Relaxation collision model with rate nu0.

    frequency_mode selects the weight used by the nu-weighted norm only; the
    operators themselves always relax at the constant rate nu0.
    """

    nu0: float = 1.0
    frequency_mode: str = "constant"

    def __post_init__(self):
        if self.nu0 <= 0:
            raise ValueError("nu0 must be positive")
        if self.frequency_mode not in ("constant", "hard_sphere"):
            raise ValueError("frequency_mode must be 'constant' or 'hard_sphere'")

    def transport(self, space: HermiteSpace | None = None) -> dict:
        return transport_coefficients(self, space or default_space())


# -- linear collision operators ---------------------------------------------

def apply_L(space: HermiteSpace, model: CollisionModel, c: np.ndarray) -> np.ndarray:
    """Two-species-sum linearized collision operator: nu0 (I - P1)."""
    return model.nu0 * (c - space.project_p1(c))


def apply_cal_L(space: HermiteSpace, model: CollisionModel,
                c: np.ndarray) -> np.ndarray:
    """Difference-equation linearized collision operator: nu0 (I - P2)."""
    return model.nu0 * (c - space.project_p2(c))


def _micro_guard(c: np.ndarray, hydro: np.ndarray, which: str):
    norm = np.linalg.norm(c)
    if np.linalg.norm(hydro) > 1e-10 * max(norm, 1e-300):
        raise NotMicroscopic(f"input has a nontrivial {which} hydrodynamic part")


def invert_L_micro(space: HermiteSpace, model: CollisionModel,
                   c: np.ndarray) -> np.ndarray:
    """Unique microscopic solution of L x = c; requires P1 c ~ 0."""
    _micro_guard(c, space.project_p1(c), "P1")
    return c / model.nu0


def invert_cal_L_micro(space: HermiteSpace, model: CollisionModel,
                       c: np.ndarray) -> np.ndarray:
    """Unique microscopic solution of calL x = c; requires P2 c ~ 0."""
    _micro_guard(c, space.project_p2(c), "P2")
    return c / model.nu0


def invert_L_on_complement(space: HermiteSpace, model: CollisionModel,
                           c: np.ndarray) -> np.ndarray:
    """Pseudo-inverse L^{-1} (I - P1): projects first, never raises."""
    return (c - space.project_p1(c)) / model.nu0


def invert_cal_L_on_complement(space: HermiteSpace, model: CollisionModel,
                               c: np.ndarray) -> np.ndarray:
    """Pseudo-inverse calL^{-1} (I - P2): projects first, never raises."""
    return (c - space.project_p2(c)) / model.nu0


# -- quadratic structure -----------------------------------------------------

def maxwellian_quadratic(space: HermiteSpace, rho, u, theta) -> np.ndarray:
    """Second-order coefficient of the shared-moment local Maxwellian.

    Expanding the local Maxwellian with mass 1 + t rho, bulk velocity and
    temperature read off from t times a hydrodynamic profile gives
    mu + t P1 f sqrt(mu) + t^2 m2 + O(t^3); this returns the Hermite
    coefficients of m2 / sqrt(mu).  m2 carries no mass, momentum or energy.
    """
    v = space.nodes
    rho = np.asarray(rho)
    trail = rho.shape
    expand = (slice(None),) + (None,) * len(trail)
    v1, v2, v3 = v[0][expand], v[1][expand], v[2][expand]
    vsq = v1 ** 2 + v2 ** 2 + v3 ** 2
    peculiar = (vsq - 3.0) / 2.0
    u = np.asarray(u)
    bv = u[0] * v1 + u[1] * v2 + u[2] * v3
    usq = u[0] ** 2 + u[1] ** 2 + u[2] ** 2
    s1 = rho + bv + theta * peculiar
    s2 = (-rho ** 2 / 2.0 + 1.5 * rho * theta + 0.75 * theta ** 2
          - (rho + theta) * bv
          - (theta ** 2 + rho * theta + usq / 3.0) * vsq / 2.0)
    return space.project_function(s2 + s1 ** 2 / 2.0)


def _half_projected(space: HermiteSpace, c: np.ndarray) -> np.ndarray:
    """The combination c/2 + P1 c / 2 - P2 c used inside gamma."""
    return 0.5 * c + 0.5 * space.project_p1(c) - space.project_p2(c)


def gamma(space: HermiteSpace, model: CollisionModel,
          c1: np.ndarray, c2: np.ndarray) -> np.ndarray:
    """Bilinear collision operator Gamma(h1, h2).

    Defined as the unique bilinear extension of the quadratic term of the
    mass-weighted local-Maxwellian relaxation model that is compatible with
    the linearized operators:

        Gamma(h, sqrt_mu) = -calL h,   Gamma(sqrt_mu, h) = calL h - L h,

    hence -{Gamma(sqrt_mu, h) + Gamma(h, sqrt_mu)} = L h, and on the diagonal
    Gamma(h, h) = nu0 (m2[h] - rho_h (I - P1) h).  Pointwise in any trailing
    axes (evaluate on physical-space values, not Fourier coefficients).
    """
    r1 = c1[space._i000]
    r2 = c2[space._i000]
    m1 = space.moments(c1)
    m2m = space.moments(c2)
    msum = tuple(np.asarray(a) + np.asarray(b) for a, b in zip(m1, m2m))
    cross_m2 = 0.5 * (maxwellian_quadratic(space, *msum)
                      - maxwellian_quadratic(space, *m1)
                      - maxwellian_quadratic(space, *m2m))
    micro1 = c1 - space.project_p1(c1)
    micro2 = c2 - space.project_p1(c2)
    return model.nu0 * (cross_m2
                        - 0.5 * (r1 * micro2 + r2 * micro1)
                        + r1 * _half_projected(space, c2)
                        - r2 * _half_projected(space, c1))


def field_coupling(space: HermiteSpace, c: np.ndarray,
                   e_field: np.ndarray, b_field: np.ndarray) -> np.ndarray:
    """(E + v x B) . (1/sqrt(mu)) grad_v (sqrt(mu) h) in coefficient form.

    The gradient part is the degree-raising ladder with a sign; the magnetic
    part is degree-preserving and exactly skew-adjoint in the truncation.
    e_field and b_field have shape (3,) + trailing.
    """
    out = np.zeros_like(c, dtype=np.result_type(c, e_field, b_field))
    raised = [np.tensordot(space._raising[i], c, axes=(1, 0)) for i in range(3)]
    for i in range(3):
        out -= e_field[i] * raised[i]
    # v x B part: eps_{ijk} B_k a_i a^dag_j; lowering is applied first so the
    # intermediate never leaves the truncated basis (i and j differ, so the
    # ladder factors commute) and the truncated operator stays skew-adjoint.
    lowered = [np.tensordot(space._raising[i].T, c, axes=(1, 0)) for i in range(3)]
    eps = [(0, 1, 2, 1.0), (1, 2, 0, 1.0), (2, 0, 1, 1.0),
           (1, 0, 2, -1.0), (2, 1, 0, -1.0), (0, 2, 1, -1.0)]
    for i, j, k, sign in eps:
        out += sign * b_field[k] * np.tensordot(space._raising[j], lowered[i],
                                                axes=(1, 0))
    return out


# -- norms and coefficients ---------------------------------------------------

def collision_frequency_values(space: HermiteSpace) -> np.ndarray:
    """Hard-sphere collision frequency nu(v) at the quadrature nodes."""
    speed = np.sqrt(np.sum(space.nodes ** 2, axis=0))
    gaussian = np.sqrt(2.0 / np.pi) * np.exp(-speed ** 2 / 2.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        tail = np.where(speed > 0,
                        (speed + 1.0 / np.where(speed > 0, speed, 1.0))
                        * erf(speed / np.sqrt(2.0)),
                        np.sqrt(2.0 / np.pi))
    return gaussian + tail


@lru_cache(maxsize=None)
def _nu_gram(space_key, quad_points, mode):
    # helper caching keyed by (max_degree, quad_points); rebuilds the space
    space = HermiteSpace(space_key, quad_points)
    if mode == "hard_sphere":
        w = collision_frequency_values(space)
    else:
        w = np.ones(space.nodes.shape[1])
    return space.basis_values @ (space.weights * w * space.basis_values).T


def nu_weighted_norm(space: HermiteSpace, model: CollisionModel,
                     c: np.ndarray) -> float:
    """Collision-frequency-weighted L^2_v norm of a velocity profile."""
    if model.frequency_mode == "constant":
        return float(np.sqrt(model.nu0) * np.linalg.norm(c))
    gram = _nu_gram(space.max_degree, space.quad_points, "hard_sphere")
    return float(np.sqrt(np.real(np.conj(c) @ (gram @ c))))


def weight_bound_constant(space: HermiteSpace, model: CollisionModel) -> float:
    """Smallest C with ||(1+|v|)^{1/2} f|| <= C ||f||_nu on the basis span."""
    speed = np.sqrt(np.sum(space.nodes ** 2, axis=0))
    gram_w = space.basis_values @ ((space.weights * (1.0 + speed))
                                   * space.basis_values).T
    if model.frequency_mode == "constant":
        gram_nu = model.nu0 * np.eye(space.size)
    else:
        gram_nu = _nu_gram(space.max_degree, space.quad_points, "hard_sphere")
    eigenvalues = eigh(gram_w, gram_nu, eigvals_only=True)
    return float(np.sqrt(eigenvalues[-1]))


def transport_coefficients(model: CollisionModel, space: HermiteSpace) -> dict:
    """Viscosity, heat conductivity and mobility of the diffusive limit.

    All three come from Chapman-Enskog inner products with the pseudo-inverse
    of the relevant linearized operator:

      alpha — per-component value of <calL^{-1}(v_j sqrt mu), v_i sqrt mu>;
      eta   — <L^{-1}(I-P1)(v_1 v_2 sqrt mu), v_1 v_2 sqrt mu>;
      kappa — (2/5) <L^{-1}(I-P1)(v_1 |v|^2/2 sqrt mu), v_1 |v|^2/2 sqrt mu>,

    normalized so they are exactly the coefficients of the limiting fluid
    system.  Provenance is 'computed' (never configured).
    """
    momentum = space.unit((1, 0, 0))
    alpha = float(invert_cal_L_micro(space, model, momentum) @ momentum)

    stress = space.unit((1, 1, 0))
    eta = float(invert_L_on_complement(space, model, stress) @ stress)

    v = space.nodes
    heat_poly = v[0] * (v[0] ** 2 + v[1] ** 2 + v[2] ** 2) / 2.0
    heat = space.project_function(heat_poly)
    kappa = 0.4 * float(invert_L_on_complement(space, model, heat) @ heat)

    return {"eta": eta, "kappa": kappa, "alpha": alpha, "provenance": "computed"}
