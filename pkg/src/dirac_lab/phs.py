"""Distributed-parameter port-Hamiltonian systems on the staggered grid.

State: a primal p-cochain ``alpha_p`` and a dual q-cochain ``alpha_q``.
Efforts are functional derivatives in the sense
``dE = pair(e_p, d alpha_p) + pair(e_q, d alpha_q)``; for the quadratic
energy ``c * int(alpha ^ *alpha)`` this gives ``e = 2c * star^{-1} alpha``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import comb

import numpy as np

from .densities import PolynomialDensity, quadratic_density
from .forms import (
    DUAL,
    PRIMAL,
    BoundaryCochain,
    Cochain,
    boundary_of,
    exterior_derivative,
    hodge,
    hodge_inverse,
    pair_boundary,
    pair_complementary,
    pairing_sign,
    point_field_matrix,
    sample,
    to_point_field,
    trace_boundary,
)
from .mesh import Mesh
from .stokes_dirac import Signature

__all__ = [
    "BOUNDARY_MODES",
    "PRESETS",
    "EnergySpec",
    "InitialCondition",
    "PHSState",
    "PowerBalanceReport",
    "boundary_effort",
    "effort",
    "energy",
    "energy_coordinates",
    "make_preset",
    "power_balance",
    "rhs",
    "step",
]

BOUNDARY_MODES = ("reflecting", "open")
SCHEMES = ("rk4", "midpoint")


@dataclass(frozen=True)
class EnergySpec:
    """Quadratic energy ``c_p int alpha_p^*alpha_p + c_q int alpha_q^*alpha_q``,
    or (in one dimension) ``int psi(x_p, x_q)`` for a pointwise density."""

    kind: str = "quadratic"
    coefficients: tuple[float, float] = (0.5, 0.5)
    density: PolynomialDensity | None = None

    def __post_init__(self):
        if self.kind not in ("quadratic", "density"):
            raise ValueError(f"unknown energy kind {self.kind!r}")
        if self.kind == "density":
            if self.density is None or self.density.dim != 2:
                raise ValueError("a pointwise density needs psi(x_p, x_q) of two variables")
        elif any(not c > 0 for c in self.coefficients):
            raise ValueError(f"quadratic coefficients must be positive, got {self.coefficients}")

    def check(self, signature: Signature):
        if self.kind == "density" and signature.n != 1:
            raise ValueError("pointwise-density energies are supported in one dimension only")

    def fiber_density(self, signature: Signature) -> PolynomialDensity:
        """psi as a function of the per-cell frame components (x_p block, then x_q block)."""
        if self.kind == "density":
            return self.density
        n_p, n_q = comb(signature.n, signature.p), comb(signature.n, signature.q)
        coefs = [self.coefficients[0]] * n_p + [self.coefficients[1]] * n_q
        return quadratic_density(n_p + n_q, coefs)


@dataclass(frozen=True, eq=False)
class PHSState:
    alpha_p: Cochain
    alpha_q: Cochain
    time: float
    signature: Signature

    def __post_init__(self):
        s = self.signature
        if self.alpha_p.mesh is not self.alpha_q.mesh or self.alpha_p.mesh.dim != s.n:
            raise ValueError("alpha_p and alpha_q must share one mesh of the signature's dimension")
        if (self.alpha_p.degree, self.alpha_p.grid) != (s.p, PRIMAL):
            raise ValueError(f"alpha_p must be a primal {s.p}-cochain")
        if (self.alpha_q.degree, self.alpha_q.grid) != (s.q, DUAL):
            raise ValueError(f"alpha_q must be a dual {s.q}-cochain")

    @property
    def mesh(self) -> Mesh:
        return self.alpha_p.mesh

    def advanced(self, rate_p: Cochain, rate_q: Cochain, dt: float) -> "PHSState":
        return PHSState(self.alpha_p + rate_p * dt, self.alpha_q + rate_q * dt, self.time + dt, self.signature)


@dataclass(frozen=True)
class PowerBalanceReport:
    dE_dt: float
    boundary_flux: float
    residual: float
    time: float
    scale: float

    @property
    def relative_residual(self) -> float:
        return self.residual / self.scale if self.scale > 0 else 0.0


# -- energy and effort --------------------------------------------------------------


def energy_coordinates(state: PHSState) -> np.ndarray:
    """Frame components (x_p, x_q) at every top cell, shape (cells, C(n,p)+C(n,q))."""
    xp = to_point_field(state.alpha_p).components
    xq = to_point_field(state.alpha_q).components
    return np.concatenate([xp, xq], axis=1)


def energy(state: PHSState, spec: EnergySpec) -> float:
    spec.check(state.signature)
    if spec.kind == "quadratic":
        cp, cq = spec.coefficients
        ep = cp * pair_complementary(state.alpha_p, hodge(state.alpha_p))
        eq = cq * pair_complementary(state.alpha_q, hodge(state.alpha_q))
        return math.fsum([ep, eq])
    x = energy_coordinates(state)
    dens = spec.density.value(x) * state.mesh.top_measure()
    return math.fsum(dens.tolist())


def _density_effort(state: PHSState, spec: EnergySpec) -> tuple[Cochain, Cochain]:
    mesh, s = state.mesh, state.signature
    grad = spec.density.gradient(energy_coordinates(state)) * state.mesh.top_measure()[:, None]
    out = []
    for col, alpha in ((0, state.alpha_p), (1, state.alpha_q)):
        P = point_field_matrix(mesh, alpha.degree, alpha.grid)
        slope = P.T @ grad[:, col]
        grid = DUAL if alpha.grid == PRIMAL else PRIMAL
        degree = s.n - alpha.degree
        out.append(Cochain(mesh, degree, grid, slope / pairing_sign(mesh, degree, grid)))
    return out[0], out[1]


def effort(state: PHSState, spec: EnergySpec) -> tuple[Cochain, Cochain]:
    """Functional derivatives (e_p, e_q) of the energy."""
    spec.check(state.signature)
    if spec.kind == "density":
        return _density_effort(state, spec)
    cp, cq = spec.coefficients
    return hodge_inverse(state.alpha_p) * (2 * cp), hodge_inverse(state.alpha_q) * (2 * cq)


def boundary_effort(e_p: Cochain, mode: str) -> BoundaryCochain:
    """Boundary value of e_p imposed by the boundary mode."""
    if mode == "reflecting":
        bnd = boundary_of(e_p.mesh)
        return BoundaryCochain(bnd, e_p.degree, DUAL, np.zeros(bnd.num_cells(e_p.index_degree - 1)))
    if mode == "open":
        return trace_boundary(e_p)
    raise ValueError(f"unknown boundary mode {mode!r}; expected one of {BOUNDARY_MODES}")


def _rates(state: PHSState, e_p: Cochain, e_q: Cochain, e_p_bnd: BoundaryCochain):
    s = state.signature
    rate_p = exterior_derivative(e_q) * (-((-1.0) ** s.r))
    rate_q = -exterior_derivative(e_p, e_p_bnd)
    return rate_p, rate_q


def rhs(state: PHSState, spec: EnergySpec, boundary: str = "reflecting") -> tuple[Cochain, Cochain]:
    """Time derivatives: alpha_p' = -(-1)^r d e_q, alpha_q' = -d e_p."""
    e_p, e_q = effort(state, spec)
    return _rates(state, e_p, e_q, boundary_effort(e_p, boundary))


def step(state: PHSState, spec: EnergySpec, dt: float, scheme: str = "rk4",
         boundary: str = "reflecting") -> PHSState:
    if not dt > 0:
        raise ValueError(f"time step must be positive, got {dt}")
    if scheme == "rk4":
        k1 = rhs(state, spec, boundary)
        s2 = state.advanced(*k1, 0.5 * dt)
        k2 = rhs(s2, spec, boundary)
        s3 = state.advanced(*k2, 0.5 * dt)
        k3 = rhs(s3, spec, boundary)
        s4 = state.advanced(*k3, dt)
        k4 = rhs(s4, spec, boundary)
        rate_p = (k1[0] + k2[0] * 2.0 + k3[0] * 2.0 + k4[0]) * (1.0 / 6.0)
        rate_q = (k1[1] + k2[1] * 2.0 + k3[1] * 2.0 + k4[1]) * (1.0 / 6.0)
        return state.advanced(rate_p, rate_q, dt)
    if scheme == "midpoint":
        k1 = rhs(state, spec, boundary)
        k2 = rhs(state.advanced(*k1, 0.5 * dt), spec, boundary)
        return state.advanced(*k2, dt)
    raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")


def power_balance(state: PHSState, spec: EnergySpec, boundary: str = "reflecting") -> PowerBalanceReport:
    """Semi-discrete dE/dt against the boundary port power.

    The port variables are f_bnd = boundary value of e_p and
    e_bnd = (-1)^p trace(e_q); the flux is the boundary integral of e_bnd ^ f_bnd.
    """
    s = state.signature
    e_p, e_q = effort(state, spec)
    e_p_bnd = boundary_effort(e_p, boundary)
    rate_p, rate_q = _rates(state, e_p, e_q, e_p_bnd)
    e_bnd = trace_boundary(e_q) * ((-1.0) ** s.p)
    mesh = state.mesh
    terms = np.concatenate([
        pairing_sign(mesh, e_p.degree, e_p.grid) * e_p.values * rate_p.values,
        pairing_sign(mesh, e_q.degree, e_q.grid) * e_q.values * rate_q.values,
    ])
    dE = math.fsum(terms.tolist())
    flux = pair_boundary(e_bnd, e_p_bnd)
    flux_terms = np.abs(e_bnd.values * e_p_bnd.values)
    scale = math.fsum(np.abs(terms).tolist()) + math.fsum(flux_terms.tolist())
    return PowerBalanceReport(dE, flux, abs(dE - flux), state.time, scale)


# -- presets ------------------------------------------------------------------------

PRESETS = {
    "telegraph1d": Signature(1, 1, 1),
    "wave2d": Signature(2, 1, 2),
    "maxwell3d_pq22": Signature(3, 2, 2),
    "em3d_p1q3": Signature(3, 1, 3),
}


@dataclass(frozen=True)
class InitialCondition:
    """Closed-form initial data.

    ``mode``: standing wave with integer mode numbers per axis.
    ``pulse``: Gaussian bump of the given width centred at ``center``
    (fractions of the box); in one dimension both variables carry it, which
    makes it travel towards increasing x.
    ``random``: independent normal values per cell from ``seed``.
    """

    shape: str = "mode"
    amplitude: float = 1.0
    modes: tuple[int, ...] = (1, 1, 0)
    center: tuple[float, ...] = (0.5, 0.5, 0.5)
    width: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.shape not in ("mode", "pulse", "random"):
            raise ValueError(f"unknown initial shape {self.shape!r}")
        if not self.width > 0:
            raise ValueError("pulse width must be positive")


def _cosine_product(mesh: Mesh, modes, amplitude):
    L = mesh.lengths

    def fn(pts):
        out = np.full(len(pts), float(amplitude))
        for a in range(mesh.dim):
            out = out * np.cos(modes[a] * np.pi * pts[:, a] / L[a])
        return out

    return fn


def _gaussian(mesh: Mesh, ic: InitialCondition):
    centre = np.array([c * L for c, L in zip(ic.center, mesh.lengths)])

    def fn(pts):
        r2 = np.sum((pts - centre[: mesh.dim]) ** 2, axis=1)
        return ic.amplitude * np.exp(-0.5 * r2 / ic.width ** 2)

    return fn


def make_preset(name: str, mesh: Mesh, initial: InitialCondition | None = None,
                spec: EnergySpec | None = None) -> tuple[PHSState, EnergySpec]:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}")
    sig = PRESETS[name]
    if mesh.dim != sig.n:
        raise ValueError(f"preset {name} needs a {sig.n}-dimensional mesh, got dimension {mesh.dim}")
    ic = initial or InitialCondition()
    spec = spec or EnergySpec()
    spec.check(sig)
    n, p, q = sig.n, sig.p, sig.q
    def zero_fn(k):
        return lambda pts: np.zeros((len(pts), comb(n, k)))

    if ic.shape == "random":
        rng = np.random.default_rng(ic.seed)
        ap = Cochain(mesh, p, PRIMAL, ic.amplitude * rng.standard_normal(mesh.num_cells(p)))
        aq = Cochain(mesh, q, DUAL, ic.amplitude * rng.standard_normal(mesh.num_cells(n - q)))
        return PHSState(ap, aq, 0.0, sig), spec

    modes = tuple(ic.modes) + (0,) * max(0, n - len(ic.modes))
    if name == "maxwell3d_pq22":
        # D along z (the (0,1) face component), vanishing tangential E on the walls
        L = mesh.lengths
        if ic.shape == "mode":
            def d_field(pts):
                out = np.zeros((len(pts), 3))
                out[:, 0] = ic.amplitude * np.sin(modes[0] * np.pi * pts[:, 0] / L[0]) \
                    * np.sin(modes[1] * np.pi * pts[:, 1] / L[1])
                return out
        else:
            bump = _gaussian(mesh, ic)

            def d_field(pts):
                out = np.zeros((len(pts), 3))
                out[:, 0] = bump(pts)
                return out
        ap = sample(mesh, p, PRIMAL, d_field)
        aq = sample(mesh, q, DUAL, zero_fn(q))
        return PHSState(ap, aq, 0.0, sig), spec

    # the q-variable is a top-degree (or 1D) scalar density for the remaining presets
    scalar = _cosine_product(mesh, modes[:n], ic.amplitude) if ic.shape == "mode" else _gaussian(mesh, ic)
    aq = sample(mesh, q, DUAL, scalar)
    if name == "telegraph1d" and ic.shape == "pulse":
        ap = sample(mesh, p, PRIMAL, scalar)
    else:
        ap = sample(mesh, p, PRIMAL, zero_fn(p))
    return PHSState(ap, aq, 0.0, sig), spec
