"""Canonical contact geometry on the fibres and the contact lift of a simulation.

Canonical coordinates (x, y, z) with contact form ``dz - y.dx``. A contact
Hamiltonian is any object with ``value(x, y, z)`` and
``gradient(x, y, z) -> (h_x, h_y, h_z)``; all arrays are batched over
leading axes.

The lift places one contact point at every top cell. Which forms supply the
x and y coordinates depends on the signature (``LIFT_TABLE``): by default
x holds the components of ``star^{-1} alpha`` and y those of ``e``; for
n = 3, p = 1 the p-block uses ``alpha_p`` itself and ``star e_p``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from .densities import PolynomialDensity
from .forms import (
    Cochain,
    hodge,
    hodge_components,
    hodge_inverse,
    hodge_inverse_components,
    to_point_field,
    wedge_components,
)
from .phs import (
    EnergySpec,
    PHSState,
    boundary_effort,
    effort,
    energy_coordinates,
    rhs,
)
from .stokes_dirac import Signature, structure_map

__all__ = [
    "AdaptedValues",
    "ContactHamiltonianSpec",
    "ContactPoint",
    "DualContactHamiltonianSpec",
    "LIFT_TABLE",
    "LiftReport",
    "LinearGamma",
    "PolynomialHamiltonian",
    "adapted_values",
    "adapted_values_dual",
    "contact_field",
    "contact_form",
    "contact_hamiltonian_density",
    "lift_state",
    "legendre_point",
    "legendre_point_dual",
    "reeb_field",
    "restricted_field",
    "restricted_field_dual",
    "verify_lift",
]


@dataclass(frozen=True, eq=False)
class ContactPoint:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        z = np.asarray(self.z, dtype=float)
        if x.shape != y.shape or z.shape != x.shape[:-1]:
            raise ValueError(f"inconsistent contact point shapes {x.shape}, {y.shape}, {z.shape}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)

    @property
    def fiber_dim(self) -> int:
        return self.x.shape[-1]


@dataclass(frozen=True)
class Tangent:
    x_dot: np.ndarray
    y_dot: np.ndarray
    z_dot: np.ndarray


def contact_field(h, pt: ContactPoint) -> Tangent:
    """Contact Hamiltonian vector field of ``h`` at ``pt``.

    x' = -h_y, y' = h_x + y h_z, z' = h - y.h_y
    """
    value = np.asarray(h.value(pt.x, pt.y, pt.z), dtype=float)
    hx, hy, hz = h.gradient(pt.x, pt.y, pt.z)
    hz = np.asarray(hz, dtype=float)
    x_dot = -hy
    y_dot = hx + pt.y * hz[..., None]
    z_dot = value - np.sum(pt.y * hy, axis=-1)
    return Tangent(x_dot, y_dot, z_dot)


def contact_form(pt: ContactPoint, tangent: Tangent) -> np.ndarray:
    """lambda(v) = z' - y.x'"""
    return tangent.z_dot - np.sum(pt.y * tangent.x_dot, axis=-1)


def contact_form_derivative(u: Tangent, v: Tangent) -> np.ndarray:
    """d lambda(u, v) = u_x.v_y - v_x.u_y (from d lambda = dx ^ dy)."""
    return np.sum(u.x_dot * v.y_dot, axis=-1) - np.sum(v.x_dot * u.y_dot, axis=-1)


def reeb_field(pt: ContactPoint) -> Tangent:
    return Tangent(np.zeros_like(pt.x), np.zeros_like(pt.y), np.ones_like(pt.z))


@dataclass(frozen=True)
class PolynomialHamiltonian:
    """h(x, y, z) given as a polynomial in the 2m+1 variables (x, y, z)."""

    poly: PolynomialDensity

    @property
    def fiber_dim(self) -> int:
        return (self.poly.dim - 1) // 2

    def _stack(self, x, y, z):
        return np.concatenate([np.asarray(x, float), np.asarray(y, float), np.asarray(z, float)[..., None]], axis=-1)

    def value(self, x, y, z):
        return self.poly.value(self._stack(x, y, z))

    def gradient(self, x, y, z):
        g = self.poly.gradient(self._stack(x, y, z))
        m = self.fiber_dim
        return g[..., :m], g[..., m:2 * m], g[..., 2 * m]


# -- Legendre submanifolds and adapted functions ----------------------------------


def legendre_point(psi, x) -> ContactPoint:
    """(x, grad psi(x), psi(x))"""
    x = np.asarray(x, dtype=float)
    return ContactPoint(x, psi.gradient(x), psi.value(x))


def legendre_point_dual(phi, y) -> ContactPoint:
    """(grad phi(y), y, y.grad phi(y) - phi(y))"""
    y = np.asarray(y, dtype=float)
    x = phi.gradient(y)
    return ContactPoint(x, y, np.sum(y * x, axis=-1) - phi.value(y))


@dataclass(frozen=True)
class AdaptedValues:
    delta0: np.ndarray
    delta: np.ndarray

    def max_abs(self) -> float:
        return float(max(np.max(np.abs(self.delta0), initial=0.0), np.max(np.abs(self.delta), initial=0.0)))


def adapted_values(pt: ContactPoint, psi) -> AdaptedValues:
    """Delta_0 = psi(x) - z, Delta_a = d psi / d x^a - y_a."""
    return AdaptedValues(psi.value(pt.x) - pt.z, psi.gradient(pt.x) - pt.y)


def adapted_values_dual(pt: ContactPoint, phi) -> AdaptedValues:
    """Delta^0 = x.y - phi(y) - z, Delta^a = x^a - d phi / d y_a."""
    return AdaptedValues(np.sum(pt.x * pt.y, axis=-1) - phi.value(pt.y) - pt.z, pt.x - phi.gradient(pt.y))


@dataclass(frozen=True)
class LinearGamma:
    """Gamma(u) = kappa u: vanishes exactly at 0 and nowhere else for kappa != 0."""

    kappa: float = 1.0

    def __call__(self, u):
        return self.kappa * np.asarray(u, dtype=float)

    def derivative(self, u):
        return np.full(np.shape(u), self.kappa)


@dataclass(frozen=True, eq=False)
class ContactHamiltonianSpec:
    """h = Delta_a F^a + Gamma(Delta_0) for the Legendre submanifold of ``psi``."""

    psi: object
    F: np.ndarray
    gamma: LinearGamma = field(default_factory=LinearGamma)

    def value(self, x, y, z):
        a = adapted_values(ContactPoint(x, y, z), self.psi)
        return np.sum(a.delta * self.F, axis=-1) + self.gamma(a.delta0)

    def gradient(self, x, y, z):
        x = np.asarray(x, dtype=float)
        a = adapted_values(ContactPoint(x, y, z), self.psi)
        slope = self.gamma.derivative(a.delta0)
        F = np.broadcast_to(self.F, x.shape)
        hx = np.einsum("...ab,...b->...a", self.psi.hessian(x), F) + slope[..., None] * self.psi.gradient(x)
        return hx, -F, -slope


@dataclass(frozen=True, eq=False)
class DualContactHamiltonianSpec:
    """h = Delta^a F_a + Gamma(Delta^0) for the Legendre submanifold generated by -phi."""

    phi: object
    F: np.ndarray
    gamma: LinearGamma = field(default_factory=LinearGamma)

    def value(self, x, y, z):
        a = adapted_values_dual(ContactPoint(x, y, z), self.phi)
        return np.sum(a.delta * self.F, axis=-1) + self.gamma(a.delta0)

    def gradient(self, x, y, z):
        y = np.asarray(y, dtype=float)
        x = np.asarray(x, dtype=float)
        a = adapted_values_dual(ContactPoint(x, y, z), self.phi)
        slope = self.gamma.derivative(a.delta0)
        F = np.broadcast_to(self.F, y.shape)
        hy = -np.einsum("...ab,...b->...a", self.phi.hessian(y), F) + slope[..., None] * a.delta
        hx = F + slope[..., None] * y
        return hx, hy, -slope


class OffSubmanifoldError(ValueError):
    pass


def restricted_field(spec: ContactHamiltonianSpec, pt: ContactPoint, tol: float = 1e-9) -> Tangent:
    """Field of h = Delta.F + Gamma(Delta_0) at a point of the psi-Legendre submanifold."""
    off = adapted_values(pt, spec.psi).max_abs()
    if off > tol:
        raise OffSubmanifoldError(f"point is off the Legendre submanifold (adapted values up to {off:.3e})")
    return contact_field(spec, pt)


def restricted_field_dual(spec: DualContactHamiltonianSpec, pt: ContactPoint, tol: float = 1e-9) -> Tangent:
    off = adapted_values_dual(pt, spec.phi).max_abs()
    if off > tol:
        raise OffSubmanifoldError(f"point is off the dual Legendre submanifold (adapted values up to {off:.3e})")
    return contact_field(spec, pt)


# -- contact lift of a port-Hamiltonian state ---------------------------------------------

IDENTITY, STAR, STAR_INVERSE = "identity", "star", "star_inverse"


@dataclass(frozen=True)
class BlockRule:
    """How a state variable becomes x (``x_map``) and its effort becomes y (``y_map``)."""

    x_map: str = STAR_INVERSE
    y_map: str = IDENTITY


DEFAULT_RULES = (BlockRule(), BlockRule())
LIFT_TABLE = {
    Signature(1, 1, 1): DEFAULT_RULES,
    Signature(2, 1, 2): DEFAULT_RULES,
    Signature(3, 2, 2): DEFAULT_RULES,
    Signature(3, 1, 3): (BlockRule(IDENTITY, STAR), BlockRule()),
}


def _apply(c: Cochain, how: str) -> Cochain:
    if how == IDENTITY:
        return c
    if how == STAR:
        return hodge(c)
    return hodge_inverse(c)


def _undo_components(values: np.ndarray, how: str, degree: int, n: int) -> np.ndarray:
    """Pointwise inverse of ``how`` applied to components of a ``degree``-form."""
    if how == IDENTITY:
        return values
    if how == STAR:
        return hodge_inverse_components(values, degree, n)
    return hodge_components(values, degree, n)


def _rules(signature: Signature):
    if signature not in LIFT_TABLE:
        raise ValueError(f"no lift defined for signature {signature}")
    return LIFT_TABLE[signature]


def _components(c: Cochain) -> np.ndarray:
    return to_point_field(c).components


@dataclass(frozen=True, eq=False)
class Lift:
    """Everything the lift needs per top cell."""

    point: ContactPoint
    drift: np.ndarray             # G: the x-velocity prescribed by the dynamics
    psi: PolynomialDensity
    efforts: tuple[Cochain, Cochain]
    effort_derivatives: tuple[Cochain, Cochain]   # (d e_p with boundary, d e_q)
    signature: Signature
    split: int


def _build_lift(state: PHSState, spec: EnergySpec, boundary: str,
                perturbation: tuple[int, int, float] | None = None) -> Lift:
    s = state.signature
    rule_p, rule_q = _rules(s)
    psi = spec.fiber_density(s)
    e_p, e_q = effort(state, spec)
    flows = structure_map(e_p, e_q, s, boundary_effort(e_p, boundary))
    if spec.kind == "quadratic":
        x = np.concatenate([_components(_apply(state.alpha_p, rule_p.x_map)),
                            _components(_apply(state.alpha_q, rule_q.x_map))], axis=1)
        y = np.concatenate([_components(_apply(e_p, rule_p.y_map)),
                            _components(_apply(e_q, rule_q.y_map))], axis=1)
    else:
        x = energy_coordinates(state)
        y = psi.gradient(x)
    if perturbation is not None:
        cell, comp, delta = perturbation
        y = y.copy()
        y[cell, comp] += delta
    drift = -np.concatenate([_components(_apply(flows.f_p, rule_p.x_map)),
                             _components(_apply(flows.f_q, rule_q.x_map))], axis=1)
    d_ep = flows.f_q
    d_eq = flows.f_p * ((-1.0) ** s.r)
    return Lift(ContactPoint(x, y, psi.value(x)), drift, psi, (e_p, e_q), (d_ep, d_eq),
                s, comb(s.n, s.p))


def lift_state(state: PHSState, spec: EnergySpec, boundary: str = "reflecting") -> ContactPoint:
    """Contact point (x, y, z = psi(x)) at every top cell."""
    return _build_lift(state, spec, boundary).point


def _h_by_forms(lift: Lift, gamma: LinearGamma) -> np.ndarray:
    """star^{-1}[Delta_p ^ (-F_p)] + star^{-1}[Delta_q ^ (-F_q)] + Gamma(Delta_0), pointwise."""
    s = lift.signature
    n = s.n
    rule_p, rule_q = _rules(s)
    pt = lift.point
    adapted = adapted_values(pt, lift.psi)
    k = lift.split
    total = gamma(adapted.delta0)
    d_ep, d_eq = lift.effort_derivatives
    flows = ((d_eq * ((-1.0) ** s.r), rule_p, adapted.delta[:, :k]),
             (d_ep, rule_q, adapted.delta[:, k:]))
    for flow, rule, delta in flows:
        y_degree = n - flow.degree if rule.y_map == IDENTITY else flow.degree
        delta_form = _undo_components(delta, rule.y_map, y_degree, n)
        top = wedge_components(delta_form, n - flow.degree, -_components(flow), flow.degree, n)
        total = total + hodge_inverse_components(top, n, n)[:, 0]
    return total


def contact_hamiltonian_density(state: PHSState, spec: EnergySpec, cell: int | None = None,
                                boundary: str = "reflecting", kappa: float = 1.0,
                                perturbation: tuple[int, int, float] | None = None):
    """h_psi at one cell (or all cells when ``cell`` is None), assembled from forms."""
    values = _h_by_forms(_build_lift(state, spec, boundary, perturbation), LinearGamma(kappa))
    return values if cell is None else float(values[cell])


@dataclass(frozen=True)
class LiftReport:
    res_x: np.ndarray
    res_y: np.ndarray
    res_z: np.ndarray
    h_psi: np.ndarray

    TOL_XY = 1e-10
    TOL_Z = 1e-8
    TOL_H = 1e-12

    @property
    def max_x(self) -> float:
        return float(np.max(self.res_x, initial=0.0))

    @property
    def max_y(self) -> float:
        return float(np.max(self.res_y, initial=0.0))

    @property
    def max_z(self) -> float:
        return float(np.max(self.res_z, initial=0.0))

    @property
    def max_h(self) -> float:
        return float(np.max(np.abs(self.h_psi), initial=0.0))

    @property
    def passed(self) -> bool:
        return (self.max_x <= self.TOL_XY and self.max_y <= self.TOL_XY
                and self.max_z <= self.TOL_Z and self.max_h <= self.TOL_H)


def _relative(diff: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Per-cell max |diff| over components, scaled by max(1, max |ref|) over the mesh."""
    scale = max(1.0, float(np.max(np.abs(ref), initial=0.0)))
    diff = diff.reshape(len(diff), -1)
    return np.max(np.abs(diff), axis=1) / scale


def verify_lift(state: PHSState, spec: EnergySpec, boundary: str = "reflecting", kappa: float = 1.0,
                perturbation: tuple[int, int, float] | None = None) -> LiftReport:
    """Compare the restricted contact field at every cell with the simulated dynamics.

    (a) x' against the frame components of the simulated rates,
    (b) y' against the rate of change of the effort components,
    (c) z' against -star d(e_p ^ e_q), expanded by the Leibniz rule with
        e taken from the lifted y and d e from the discrete derivatives.
    """
    s = state.signature
    n = s.n
    rule_p, rule_q = _rules(s)
    lift = _build_lift(state, spec, boundary, perturbation)
    gamma = LinearGamma(kappa)
    pt = lift.point
    ham = ContactHamiltonianSpec(lift.psi, lift.drift, gamma)
    tangent = contact_field(ham, pt)
    k = lift.split

    rate_p, rate_q = rhs(state, spec, boundary)
    ref_x = np.concatenate([_components(_apply(rate_p, rule_p.x_map)),
                            _components(_apply(rate_q, rule_q.x_map))], axis=1)
    if spec.kind == "quadratic":
        moving = PHSState(rate_p, rate_q, state.time, s)
        de_p, de_q = effort(moving, spec)
        ref_y = np.concatenate([_components(_apply(de_p, rule_p.y_map)),
                                _components(_apply(de_q, rule_q.y_map))], axis=1)
    else:
        ref_y = np.einsum("cab,cb->ca", lift.psi.hessian(pt.x), ref_x)

    d_ep, d_eq = lift.effort_derivatives
    e_p_form = _undo_components(pt.y[:, :k], rule_p.y_map,
                                n - s.p if rule_p.y_map == IDENTITY else s.p, n)
    e_q_form = _undo_components(pt.y[:, k:], rule_q.y_map,
                                n - s.q if rule_q.y_map == IDENTITY else s.q, n)
    first = wedge_components(_components(d_ep), s.q, e_q_form, n - s.q, n)
    second = wedge_components(e_p_form, n - s.p, _components(d_eq), s.p, n)
    top = first + ((-1.0) ** (n - s.p)) * second
    ref_z = -hodge_components(top, n, n)[:, 0]

    return LiftReport(
        _relative(tangent.x_dot - ref_x, ref_x),
        _relative(tangent.y_dot - ref_y, ref_y),
        _relative(tangent.z_dot - ref_z, ref_z),
        _h_by_forms(lift, gamma),
    )
