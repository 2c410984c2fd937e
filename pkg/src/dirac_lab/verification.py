"""Invariant batteries run by ``dirac-lab verify``.

Each battery returns rows of (suite, name, measured residual, tolerance).
Meshes are small and every random draw is seeded, so the table is
reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations_with_replacement

import numpy as np

from . import forms
from .contact import (
    ContactHamiltonianSpec,
    ContactPoint,
    PolynomialHamiltonian,
    contact_field,
    contact_form,
    contact_form_derivative,
    legendre_point,
    reeb_field,
    restricted_field,
    verify_lift,
)
from .densities import PolynomialDensity, quadratic_density, separable_polynomial
from .infogeo import (
    DuallyFlatChart,
    alpha_connection_identity,
    biconjugation_residual,
    canonical_divergence,
    duality_pairing_check,
    gradient_inversion_residual,
    hessian_product_residual,
    legendre_transform,
    pythagoras_check,
)
from .mesh import build_mesh
from .phs import InitialCondition, make_preset, step
from .stokes_dirac import Signature, check_isotropy, dimension_count

__all__ = ["SUITES", "Row", "random_polynomial", "run_suite"]

SIGNATURES = (Signature(1, 1, 1), Signature(2, 1, 2), Signature(3, 2, 2), Signature(3, 1, 3))
PRESET_OF = {
    Signature(1, 1, 1): "telegraph1d",
    Signature(2, 1, 2): "wave2d",
    Signature(3, 2, 2): "maxwell3d_pq22",
    Signature(3, 1, 3): "em3d_p1q3",
}


@dataclass(frozen=True)
class Row:
    suite: str
    name: str
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.residual <= self.tolerance)

    def format(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{self.suite:<8} {self.name:<44} {self.residual:10.3e} <= {self.tolerance:8.1e}  {status}"


def small_mesh(dim: int):
    cells = {1: (9,), 2: (5, 4), 3: (3, 4, 2)}[dim]
    lengths = {1: (1.3,), 2: (1.0, 0.7), 3: (1.0, 0.8, 0.6)}[dim]
    return build_mesh(dim, cells, lengths)


def random_cochain(rng, mesh, degree: int, grid: str) -> forms.Cochain:
    z = forms.zeros(mesh, degree, grid)
    return z.like(rng.standard_normal(len(z.values)))


def random_polynomial(rng, dim: int, max_degree: int = 3, scale: float = 1.0) -> PolynomialDensity:
    """Dense polynomial with normal coefficients on every monomial up to ``max_degree``."""
    terms = []
    for degree in range(max_degree + 1):
        for combo in combinations_with_replacement(range(dim), degree):
            exps = [0] * dim
            for a in combo:
                exps[a] += 1
            terms.append((scale * rng.standard_normal(), tuple(exps)))
    return PolynomialDensity(dim, tuple(terms))


# -- batteries -------------------------------------------------------------------------


def hodge_rows() -> list[Row]:
    rng = np.random.default_rng(11)
    rows = []
    for dim in (1, 2, 3):
        mesh = small_mesh(dim)
        worst_inv = worst_pos = 0.0
        for k in range(dim + 1):
            for grid in (forms.PRIMAL, forms.DUAL):
                for _ in range(5):
                    c = random_cochain(rng, mesh, k, grid)
                    twice = forms.hodge(forms.hodge(c))
                    sign = (-1) ** (k * (dim - k))
                    scale = max(1.0, float(np.max(np.abs(c.values))))
                    worst_inv = max(worst_inv, float(np.max(np.abs(twice.values - sign * c.values))) / scale)
                    # int b ^ *b is the mass-weighted squared norm; must be positive
                    norm = forms.pair_complementary(c, forms.hodge(c))
                    k_idx = c.index_degree
                    ratio = mesh.dual_measure(k_idx) / mesh.primal_measure(k_idx)
                    if grid == forms.DUAL:
                        ratio = 1.0 / ratio
                    mass = math.fsum((ratio * c.values ** 2).tolist())
                    worst_pos = max(worst_pos, abs(norm - mass) / mass + (0.0 if norm > 0 else 1.0))
        rows.append(Row("hodge", f"{dim}D star star = (-1)^(k(n-k))", worst_inv, 1e-12))
        rows.append(Row("hodge", f"{dim}D int b ^ *b = |b|^2 > 0", worst_pos, 1e-12))
    return rows


def stokes_rows() -> list[Row]:
    rng = np.random.default_rng(12)
    rows = []
    for dim in (1, 2, 3):
        mesh = small_mesh(dim)
        worst_stokes = worst_incidence = worst_dual = 0.0
        for _ in range(10):
            c = random_cochain(rng, mesh, dim - 1, forms.PRIMAL)
            lhs = forms.integrate_top(forms.exterior_derivative(c))
            rhs = forms.integrate_boundary(forms.trace_boundary(c))
            worst_stokes = max(worst_stokes, abs(lhs - rhs) / max(1.0, float(np.sum(np.abs(c.values)))))
        for k in range(dim - 1):
            product = mesh.incidence(k + 1) @ mesh.incidence(k)
            worst_incidence = max(worst_incidence, float(abs(product).sum()))
            d = random_cochain(rng, mesh, k, forms.DUAL)
            dd = forms.exterior_derivative(forms.exterior_derivative(d))
            worst_dual = max(worst_dual, float(np.max(np.abs(dd.values))) / float(np.max(np.abs(d.values))))
        rows.append(Row("stokes", f"{dim}D int dc = int_boundary c", worst_stokes, 1e-13))
        rows.append(Row("stokes", f"{dim}D integer incidence product = 0", worst_incidence, 0.0))
        rows.append(Row("stokes", f"{dim}D dual d d = 0 on random cochains", worst_dual, 1e-13))
    return rows


def dirac_rows(pairs: int = 100) -> list[Row]:
    rng = np.random.default_rng(13)
    rows = []
    for sig in SIGNATURES:
        mesh = small_mesh(sig.n)
        bnd = forms.boundary_of(mesh)
        worst = 0.0
        for _ in range(pairs):
            e = [random_cochain(rng, mesh, sig.n - sig.p, forms.DUAL),
                 random_cochain(rng, mesh, sig.n - sig.q, forms.PRIMAL),
                 random_cochain(rng, mesh, sig.n - sig.p, forms.DUAL),
                 random_cochain(rng, mesh, sig.n - sig.q, forms.PRIMAL)]
            boundary = forms.BoundaryCochain(bnd, sig.n - sig.p, forms.DUAL,
                                             rng.standard_normal(bnd.num_cells(sig.p - 1)))
            worst = max(worst, check_isotropy(*e, sig, boundary, None))
        rows.append(Row("dirac", f"isotropy {sig}", worst, 1e-10))
    count = dimension_count(build_mesh(1, [8], [1.0]), SIGNATURES[0])
    rows.append(Row("dirac", "dimension count 1D, 8 cells (D = D-perp)",
                    count.isotropy_defect if count.maximal else math.inf, 1e-12))
    return rows


def _xh_h_residual(rng, trials: int, eps: float = 1e-6) -> float:
    worst = 0.0
    for _ in range(trials):
        m = int(rng.integers(1, 4))
        h = PolynomialHamiltonian(random_polynomial(rng, 2 * m + 1))
        pt = ContactPoint(rng.uniform(-1, 1, m), rng.uniform(-1, 1, m), rng.uniform(-1, 1))
        v = contact_field(h, pt)
        ahead = h.value(pt.x + eps * v.x_dot, pt.y + eps * v.y_dot, pt.z + eps * v.z_dot)
        behind = h.value(pt.x - eps * v.x_dot, pt.y - eps * v.y_dot, pt.z - eps * v.z_dot)
        slope = (ahead - behind) / (2 * eps)
        _, _, hz = h.gradient(pt.x, pt.y, pt.z)
        expected = hz * h.value(pt.x, pt.y, pt.z)
        worst = max(worst, float(abs(slope - expected)) / max(1.0, float(abs(expected))))
    return worst


def _restricted_structure(rng, trials: int) -> float:
    worst = 0.0
    for _ in range(trials):
        m = int(rng.integers(1, 4))
        psi = separable_polynomial([[0, 0, rng.uniform(0.2, 1.0), 0, rng.uniform(0.0, 0.5)] for _ in range(m)])
        pt = legendre_point(psi, rng.uniform(-1, 1, m))
        F = rng.standard_normal(m)
        v = restricted_field(ContactHamiltonianSpec(psi, F), pt)
        res_x = np.max(np.abs(v.x_dot - F))
        res_y = np.max(np.abs(v.y_dot - psi.hessian(pt.x) @ v.x_dot))
        res_z = abs(v.z_dot - psi.gradient(pt.x) @ v.x_dot)
        worst = max(worst, float(res_x), float(res_y), float(res_z))
    return worst


def _reeb_residual(rng) -> float:
    pt = ContactPoint(rng.standard_normal(3), rng.standard_normal(3), rng.standard_normal())
    R = reeb_field(pt)
    probe = contact_field(PolynomialHamiltonian(random_polynomial(rng, 7, 2)), pt)
    return float(abs(contact_form(pt, R) - 1.0) + abs(contact_form_derivative(R, probe)))


def _lift_residuals(sig: Signature, shape: str):
    n = sig.n
    mesh = build_mesh(n, (16,) * n if n == 1 else (6,) * n, (1.0,) * n)
    state, spec = make_preset(PRESET_OF[sig], mesh, InitialCondition(shape=shape, seed=3))
    state = step(state, spec, 0.05 * min(mesh.spacings))
    return verify_lift(state, spec)


def contact_rows() -> list[Row]:
    rng = np.random.default_rng(14)
    rows = [
        Row("contact", "X_h h = (R h) h, 100 random draws", _xh_h_residual(rng, 100), 1e-8),
        Row("contact", "restricted field y' = Hess psi x', z' = grad psi.x'", _restricted_structure(rng, 50), 1e-12),
        Row("contact", "Reeb: lambda(R) = 1, d lambda(R, .) = 0", _reeb_residual(rng), 1e-15),
    ]
    for sig in SIGNATURES:
        rough = _lift_residuals(sig, "random")
        smooth = _lift_residuals(sig, "mode")
        rows.append(Row("contact", f"lift x', y' blocks {sig}", max(rough.max_x, rough.max_y), 1e-10))
        rows.append(Row("contact", f"lift z' identity {sig}", rough.max_z, 1e-8))
        rows.append(Row("contact", f"lift h_psi on simulated mode {sig}", smooth.max_h, 1e-12))
    return rows


def quartic(dim: int = 1) -> PolynomialDensity:
    return separable_polynomial([[0, 0, 0, 0, 0.25]] * dim)


def infogeo_rows(samples: int = 1000) -> list[Row]:
    rng = np.random.default_rng(15)
    mixed = separable_polynomial([[0, 0, 0.5, 0, 0.25], [0, 0, 0.3, 0, 0.1]])
    quad = quadratic_density(2)
    rows = []
    value = legendre_transform(quartic(), [8.0], (-4.0, 4.0))
    rows.append(Row("infogeo", "L[x^4/4](8) = 12 at x* = 2",
                    abs(value.value - 12.0) + abs(value.maximizer[0] - 2.0), 1e-10))
    for label, psi, x in (("quadratic", quad, [0.3, -0.8]), ("quartic", quartic(), [1.0]),
                          ("mixed quartic", mixed, [0.7, -1.3])):
        rows.append(Row("infogeo", f"biconjugation {label}", biconjugation_residual(psi, x), 1e-9))
        rows.append(Row("infogeo", f"grad phi(grad psi(x)) = x {label}", gradient_inversion_residual(psi, x), 1e-10))
        rows.append(Row("infogeo", f"Hess psi Hess phi = I {label}", hessian_product_residual(psi, x), 1e-10))
        rows.append(Row("infogeo", f"duality pairing {label}", duality_pairing_check(psi, x), 1e-8))
        rows.append(Row("infogeo", f"d g = G(a) + G(-a) {label}", alpha_connection_identity(psi, x, 0.7), 1e-10))
    chart = DuallyFlatChart(mixed)
    worst_neg = worst_self = 0.0
    pts = rng.uniform(-1.5, 1.5, size=(samples, 2, 2))
    for a, b in pts:
        worst_neg = max(worst_neg, -canonical_divergence(chart, a, b))
        worst_self = max(worst_self, abs(canonical_divergence(chart, a, a)))
    rows.append(Row("infogeo", f"D >= 0 over {samples} pairs", max(worst_neg, 0.0), 1e-12))
    rows.append(Row("infogeo", f"D(xi||xi) = 0 over {samples} points", worst_self, 1e-12))
    rows.append(Row("infogeo", "Pythagoras quadratic (0,0)/(1,0)/(1,1)",
                    pythagoras_check(DuallyFlatChart(quad, quadratic_density(2)), [0, 0], [1, 0], [1, 1]), 1e-10))
    rows.append(Row("infogeo", "Pythagoras separable quartic",
                    pythagoras_check(chart, [0.5, 1.0], [1.2, 1.0], [1.2, -0.4]), 1e-9))
    return rows


SUITES = {
    "hodge": hodge_rows,
    "stokes": stokes_rows,
    "dirac": dirac_rows,
    "contact": contact_rows,
    "infogeo": infogeo_rows,
}


def run_suite(name: str) -> list[Row]:
    if name not in SUITES:
        raise KeyError(name)
    return SUITES[name]()
