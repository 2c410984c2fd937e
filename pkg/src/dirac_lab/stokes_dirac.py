"""Discrete Stokes-Dirac structure with boundary ports.

Staggering: the energy variable of degree p is primal, the one of degree q
is dual. Consequently ``e_p`` is a dual (n-p)-cochain, ``e_q`` a primal
(p-1)-cochain, ``f_p`` primal of degree p and ``f_q`` dual of degree q.

The boundary port pair is ``f_bnd`` (a dual boundary (n-p)-cochain holding
the boundary value of ``e_p``) and ``e_bnd`` (a primal boundary
(p-1)-cochain, the signed trace of ``e_q``). ``e_p`` has no cells on the
boundary, so its boundary value is an independent input of the structure;
when it is not supplied the one-sided copy trace is used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .forms import (
    DUAL,
    PRIMAL,
    BoundaryCochain,
    Cochain,
    boundary_of,
    exterior_derivative,
    pair_boundary,
    pair_complementary,
    pairing_sign,
    trace_boundary,
    zeros,
)
from .mesh import Mesh

__all__ = [
    "FlowEffortTuple",
    "Signature",
    "bilinear_form",
    "bilinear_magnitude",
    "check_isotropy",
    "dimension_count",
    "structure_map",
]


@dataclass(frozen=True)
class Signature:
    n: int
    p: int
    q: int

    def __post_init__(self):
        if self.n not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.n}")
        if self.p + self.q != self.n + 1 or not (1 <= self.p <= self.n and 1 <= self.q <= self.n):
            raise ValueError(f"need 1 <= p, q <= n and p + q = n + 1, got {self}")

    @property
    def r(self) -> int:
        return self.p * self.q + 1

    def __str__(self) -> str:
        return f"(n={self.n}, p={self.p}, q={self.q})"


@dataclass(frozen=True, eq=False)
class FlowEffortTuple:
    f_p: Cochain
    f_q: Cochain
    f_bnd: BoundaryCochain
    e_p: Cochain
    e_q: Cochain
    e_bnd: BoundaryCochain
    signature: Signature

    def __post_init__(self):
        s = self.signature
        expect = {
            "f_p": (s.p, PRIMAL),
            "f_q": (s.q, DUAL),
            "f_bnd": (s.n - s.p, DUAL),
            "e_p": (s.n - s.p, DUAL),
            "e_q": (s.n - s.q, PRIMAL),
            "e_bnd": (s.n - s.q, PRIMAL),
        }
        for name, (deg, grid) in expect.items():
            c = getattr(self, name)
            if c.degree != deg or c.grid != grid:
                raise ValueError(f"{name} must be a {grid} {deg}-cochain for {s}, got {c.grid} {c.degree}")

    @property
    def fields(self):
        return (self.f_p, self.f_q, self.f_bnd, self.e_p, self.e_q, self.e_bnd)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([c.values for c in self.fields])

    @classmethod
    def from_vector(cls, template: "FlowEffortTuple", vector) -> "FlowEffortTuple":
        parts, start = [], 0
        for c in template.fields:
            stop = start + len(c.values)
            parts.append(c.like(vector[start:stop]))
            start = stop
        return cls(*parts, template.signature)


def _check_inputs(e_p: Cochain, e_q: Cochain, s: Signature):
    if e_p.mesh.dim != s.n or e_q.mesh is not e_p.mesh:
        raise ValueError(f"cochains do not live on a common {s.n}-dimensional mesh")
    if (e_p.degree, e_p.grid) != (s.n - s.p, DUAL):
        raise ValueError(f"e_p must be a dual {s.n - s.p}-cochain for {s}")
    if (e_q.degree, e_q.grid) != (s.n - s.q, PRIMAL):
        raise ValueError(f"e_q must be a primal {s.n - s.q}-cochain for {s}")


def structure_map(e_p: Cochain, e_q: Cochain, signature: Signature,
                  e_p_boundary: BoundaryCochain | None = None) -> FlowEffortTuple:
    """Flows and boundary port variables determined by the efforts.

    f_p = (-1)^r d e_q, f_q = d e_p (including its boundary faces),
    f_bnd = boundary value of e_p, e_bnd = -(-1)^(n-q) trace(e_q).
    """
    s = signature
    _check_inputs(e_p, e_q, s)
    if e_p_boundary is None:
        e_p_boundary = trace_boundary(e_p)
    f_p = exterior_derivative(e_q) * (-1.0) ** s.r
    f_q = exterior_derivative(e_p, e_p_boundary)
    e_bnd = trace_boundary(e_q) * (-(-1.0) ** (s.n - s.q))
    return FlowEffortTuple(f_p, f_q, e_p_boundary, e_p, e_q, e_bnd, s)


def _terms(t1: FlowEffortTuple, t2: FlowEffortTuple):
    """Each pairing in the bilinear form as (sign vector, left values, right values)."""
    if t1.signature != t2.signature:
        raise ValueError("tuples have different signatures")
    mesh = t1.e_p.mesh
    out = []
    for a, b in ((t1, t2), (t2, t1)):
        out.append((pairing_sign(mesh, a.e_p.degree, DUAL), a.e_p.values, b.f_p.values))
        out.append((pairing_sign(mesh, a.e_q.degree, PRIMAL), a.e_q.values, b.f_q.values))
        bsign = (-1.0) ** (a.e_bnd.degree * b.f_bnd.degree)
        out.append((bsign, a.e_bnd.values, b.f_bnd.values))
    return out


def bilinear_form(t1: FlowEffortTuple, t2: FlowEffortTuple) -> float:
    """Symmetric pairing of two flow/effort tuples (volume plus boundary terms)."""
    if t1.signature != t2.signature:
        raise ValueError("tuples have different signatures")
    total = [
        pair_complementary(t1.e_p, t2.f_p),
        pair_complementary(t1.e_q, t2.f_q),
        pair_complementary(t2.e_p, t1.f_p),
        pair_complementary(t2.e_q, t1.f_q),
        pair_boundary(t1.e_bnd, t2.f_bnd),
        pair_boundary(t2.e_bnd, t1.f_bnd),
    ]
    return math.fsum(total)


def bilinear_magnitude(t1: FlowEffortTuple, t2: FlowEffortTuple) -> float:
    """Sum of the absolute values of every product entering ``bilinear_form``.

    This is the natural scale for rounding error in the form.
    """
    parts = [np.abs(np.asarray(sign) * a * b) for sign, a, b in _terms(t1, t2)]
    return math.fsum(np.concatenate([np.atleast_1d(p) for p in parts]).tolist())


def check_isotropy(e_p: Cochain, e_q: Cochain, e_p2: Cochain, e_q2: Cochain,
                   signature: Signature, e_p_boundary: BoundaryCochain | None = None,
                   e_p2_boundary: BoundaryCochain | None = None) -> float:
    """Relative value of the bilinear form on two elements of the structure."""
    t1 = structure_map(e_p, e_q, signature, e_p_boundary)
    t2 = structure_map(e_p2, e_q2, signature, e_p2_boundary)
    scale = bilinear_magnitude(t1, t2)
    if scale == 0.0:
        return 0.0
    return abs(bilinear_form(t1, t2)) / scale


@dataclass(frozen=True)
class DimensionCount:
    space_dim: int
    structure_dim: int
    annihilator_dim: int
    isotropy_defect: float
    contained: bool

    @property
    def maximal(self) -> bool:
        return (self.contained and 2 * self.structure_dim == self.space_dim
                and self.annihilator_dim == self.structure_dim)


def dimension_count(mesh: Mesh, signature: Signature) -> DimensionCount:
    """Dense check that the discrete structure equals its own orthogonal complement.

    The structure is the image of the free inputs (e_p, e_q, boundary value of
    e_p). Its orthogonal complement is the null space of B^T G, with B the
    input-to-tuple matrix and G the Gram matrix of the bilinear form. Intended
    for tiny meshes only.
    """
    s = signature
    bnd = boundary_of(mesh)
    e_p0 = zeros(mesh, s.n - s.p, DUAL)
    e_q0 = zeros(mesh, s.n - s.q, PRIMAL)
    b0 = BoundaryCochain(bnd, s.n - s.p, DUAL, np.zeros(bnd.num_cells(s.p - 1)))
    sizes = (len(e_p0.values), len(e_q0.values), len(b0.values))
    n_in = sum(sizes)

    def build(u):
        a, b = sizes[0], sizes[0] + sizes[1]
        return structure_map(e_p0.like(u[:a]), e_q0.like(u[a:b]), s, b0.like(u[b:]))

    template = build(np.zeros(n_in))
    columns = [build(col).to_vector() for col in np.eye(n_in)]
    B = np.stack(columns, axis=1)
    dim_v = B.shape[0]
    unit = np.eye(dim_v)
    gram = np.empty((dim_v, dim_v))
    tuples = [FlowEffortTuple.from_vector(template, unit[i]) for i in range(dim_v)]
    for i in range(dim_v):
        for j in range(i, dim_v):
            gram[i, j] = gram[j, i] = bilinear_form(tuples[i], tuples[j])
    restricted = B.T @ gram
    structure_dim = int(np.linalg.matrix_rank(B))
    annihilator_dim = dim_v - int(np.linalg.matrix_rank(restricted))
    defect = float(np.max(np.abs(restricted @ B))) if n_in else 0.0
    # D is inside its complement when every column of B is annihilated
    return DimensionCount(dim_v, structure_dim, annihilator_dim, defect, defect <= 1e-12)
