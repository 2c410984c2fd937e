"""Cochains on the staggered primal/dual cubical grid.

A primal k-cochain stores one integral per primal k-cell. A dual m-cochain
stores one integral per dual m-cell; since dual m-cells are in one-to-one
correspondence with primal (n-m)-cells, its values are indexed by those.
Primal cells carry the orientation sigma^S of their sorted axis set, dual
cells sigma^T of the sorted complementary set.

Boundary cochains live on the boundary complex. Primal boundary values are
taken in the boundary orientation (induced by the outward normal on facets).
A dual boundary k-cochain is indexed by boundary primal (n-1-k)-cells ``c``;
its value is the integral over the part of ``*c`` lying on the boundary,
oriented so that (dual piece) ^ (boundary-oriented c) is the boundary's own
orientation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations, product
from math import comb
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .mesh import BoundaryMesh, Mesh, boundary_complex, complement, permutation_sign

__all__ = [
    "BoundaryCochain",
    "Cochain",
    "PointField",
    "basis",
    "boundary_of",
    "dual_boundary_data",
    "exterior_derivative",
    "from_point_field",
    "hodge",
    "hodge_components",
    "hodge_inverse",
    "hodge_inverse_components",
    "integrate_boundary",
    "integrate_top",
    "pair_boundary",
    "pair_complementary",
    "pairing_sign",
    "point_field_matrix",
    "read_snapshot",
    "sample",
    "to_point_field",
    "trace_boundary",
    "wedge_components",
    "write_snapshot",
    "zeros",
]

PRIMAL = "primal"
DUAL = "dual"
_GRID_TAG = {PRIMAL: "p", DUAL: "d"}


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Cochain:
    mesh: Mesh
    degree: int
    grid: str
    values: np.ndarray

    def __post_init__(self):
        if self.grid not in (PRIMAL, DUAL):
            raise ValueError(f"grid must be 'primal' or 'dual', got {self.grid!r}")
        if not 0 <= self.degree <= self.mesh.dim:
            raise ValueError(f"degree {self.degree} outside 0..{self.mesh.dim}")
        values = _frozen(self.values)
        expected = self.mesh.num_cells(self.index_degree)
        if values.shape != (expected,):
            raise ValueError(f"expected {expected} values, got shape {values.shape}")
        object.__setattr__(self, "values", values)

    @property
    def index_degree(self) -> int:
        """Degree of the primal cells that index the values."""
        return self.degree if self.grid == PRIMAL else self.mesh.dim - self.degree

    def like(self, values) -> "Cochain":
        return Cochain(self.mesh, self.degree, self.grid, values)

    def _check(self, other: "Cochain"):
        if (other.mesh is not self.mesh or other.degree != self.degree
                or other.grid != self.grid):
            raise ValueError("cochains live on different spaces")

    def __add__(self, other: "Cochain") -> "Cochain":
        self._check(other)
        return self.like(self.values + other.values)

    def __sub__(self, other: "Cochain") -> "Cochain":
        self._check(other)
        return self.like(self.values - other.values)

    def __mul__(self, scalar: float) -> "Cochain":
        return self.like(self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "Cochain":
        return self.like(-self.values)


def zeros(mesh: Mesh, degree: int, grid: str = PRIMAL) -> Cochain:
    k = degree if grid == PRIMAL else mesh.dim - degree
    return Cochain(mesh, degree, grid, np.zeros(mesh.num_cells(k)))


@dataclass(frozen=True, eq=False)
class BoundaryCochain:
    boundary: BoundaryMesh
    degree: int
    grid: str
    values: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values)
        expected = self.boundary.num_cells(self.index_degree)
        if values.shape != (expected,):
            raise ValueError(f"expected {expected} boundary values, got shape {values.shape}")
        object.__setattr__(self, "values", values)

    @property
    def index_degree(self) -> int:
        return self.degree if self.grid == PRIMAL else self.boundary.dim - self.degree

    def like(self, values) -> "BoundaryCochain":
        return BoundaryCochain(self.boundary, self.degree, self.grid, values)

    def __mul__(self, scalar: float) -> "BoundaryCochain":
        return self.like(self.values * float(scalar))

    __rmul__ = __mul__


@lru_cache(maxsize=None)
def boundary_of(mesh: Mesh) -> BoundaryMesh:
    return boundary_complex(mesh)


# -- exterior derivative -----------------------------------------------------


@dataclass(frozen=True)
class DualBoundaryData:
    """How dual cells ``*c`` of boundary primal k-cells meet the boundary.

    ``coupling[i]`` is the sign with which the canonical boundary value enters
    the dual derivative at ``*c_i``. ``extrapolation`` maps a dual
    (n-k-1)-cochain to the one-sided (copied) canonical boundary values.
    ``piece_measure`` is the measure of ``*c_i`` intersected with the boundary.
    """

    cells: np.ndarray
    coupling: np.ndarray
    extrapolation: sp.csr_matrix
    piece_measure: np.ndarray


@lru_cache(maxsize=None)
def _dual_derivative(mesh: Mesh, k: int) -> sp.csr_matrix:
    """Interior part of d on dual cochains indexed by primal k-cells -> primal (k-1)-cells."""
    n = mesh.dim
    rows, cols, vals = [], [], []
    for lo in mesh.blocks(k - 1):
        lo_idx = lo.indices()
        for pos, t in enumerate(complement(lo.axes, n)):
            hi = mesh.block(k, tuple(sorted(lo.axes + (t,))))
            hi_idx = hi.indices()
            sign = -1 if pos % 2 else 1
            N = mesh.cells_per_axis[t]
            plus_rows = np.take(lo_idx, np.arange(N), axis=t)
            minus_rows = np.take(lo_idx, np.arange(1, N + 1), axis=t)
            for r, s in ((plus_rows, sign), (minus_rows, -sign)):
                rows.append(r.ravel())
                cols.append(hi_idx.ravel())
                vals.append(np.full(hi_idx.size, s, dtype=np.int64))
    mat = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(mesh.num_cells(k - 1), mesh.num_cells(k)),
        dtype=np.int64,
    )
    mat.sort_indices()
    return mat


@lru_cache(maxsize=None)
def dual_boundary_data(mesh: Mesh, k: int) -> DualBoundaryData:
    """Boundary coupling for dual cells of boundary primal k-cells (0 <= k <= n-1)."""
    n = mesh.dim
    bnd = boundary_of(mesh)
    cells = bnd.cells[k]
    position = {int(c): i for i, c in enumerate(cells)}
    orient = dict(zip(cells.tolist(), bnd.orientation[k].tolist()))
    coupling = np.zeros(len(cells))
    measure = np.zeros(len(cells))
    rows, cols, vals = [], [], []
    for lo in mesh.blocks(k):
        T = complement(lo.axes, n)
        eps = permutation_sign(T + lo.axes)
        lo_idx = lo.indices()
        for pos, t in enumerate(T):
            hi = mesh.block(k + 1, tuple(sorted(lo.axes + (t,)))) if k < n else None
            N = mesh.cells_per_axis[t]
            for j, side, inner in ((0, -1, 0), (N, 1, N - 1)):
                on_face = np.take(lo_idx, [j], axis=t)
                piece = np.ones(on_face.shape)
                for a in T:
                    if a == t:
                        continue
                    shape = [1] * n
                    shape[a] = on_face.shape[a]
                    piece = piece * mesh.dual_lengths(a).reshape(shape)
                neighbours = np.take(hi.indices(), [inner], axis=t)
                induced = side * (-1 if pos % 2 else 1)
                for c, nb, mu in zip(on_face.ravel(), neighbours.ravel(), piece.ravel()):
                    i = position[int(c)]
                    beta = orient[int(c)] * eps
                    coupling[i] = beta
                    measure[i] += mu
                    rows.append(i)
                    cols.append(int(nb))
                    vals.append(beta * induced)
    extrap = sp.csr_matrix(
        (np.array(vals, dtype=float), (np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64))),
        shape=(len(cells), mesh.num_cells(k + 1)),
    )
    extrap.sum_duplicates()
    extrap.sort_indices()
    return DualBoundaryData(cells, coupling, extrap, measure)


def exterior_derivative(c: Cochain, boundary_values: BoundaryCochain | None = None) -> Cochain:
    """Coboundary of ``c``.

    On the dual grid the cells next to the domain boundary have faces lying on
    the boundary itself; ``boundary_values`` supplies the integrals over those
    faces (a dual boundary cochain of the same degree). When omitted they are
    taken as zero, which is the relative coboundary and squares to zero.
    """
    mesh = c.mesh
    if c.degree >= mesh.dim:
        raise ValueError(f"no exterior derivative of a {c.degree}-cochain in dimension {mesh.dim}")
    if c.grid == PRIMAL:
        if boundary_values is not None:
            raise ValueError("primal coboundary takes no boundary values")
        return Cochain(mesh, c.degree + 1, PRIMAL, mesh.incidence(c.degree) @ c.values)
    k = c.index_degree
    values = _dual_derivative(mesh, k) @ c.values
    if boundary_values is not None:
        if boundary_values.grid != DUAL or boundary_values.degree != c.degree:
            raise ValueError("boundary values must be a dual boundary cochain of matching degree")
        data = dual_boundary_data(mesh, k - 1)
        values = values.astype(float)
        values[data.cells] += data.coupling * boundary_values.values
    return Cochain(mesh, c.degree + 1, DUAL, values)


# -- Hodge star ----------------------------------------------------------------


def hodge(c: Cochain) -> Cochain:
    """Diagonal Hodge star; toggles the grid and maps degree k to n-k."""
    mesh, n = c.mesh, c.mesh.dim
    k = c.index_degree
    eps = mesh.orientation_sign(k)
    ratio = mesh.dual_measure(k) / mesh.primal_measure(k)
    if c.grid == PRIMAL:
        return Cochain(mesh, n - c.degree, DUAL, c.values * eps * ratio)
    eps = eps * (-1) ** (k * (n - k))
    return Cochain(mesh, n - c.degree, PRIMAL, c.values * eps / ratio)


def hodge_inverse(c: Cochain) -> Cochain:
    n, k = c.mesh.dim, c.degree
    out = hodge(c)
    return out if (k * (n - k)) % 2 == 0 else -out


# -- integration and pairing ---------------------------------------------------------


def _sum(values) -> float:
    return math.fsum(np.asarray(values, dtype=float).tolist())


def pairing_sign(mesh: Mesh, degree: int, grid: str) -> np.ndarray:
    """Per-cell sign s with pair_complementary(a, b) = sum(s * a * b) for ``a`` of this kind."""
    n = mesh.dim
    k = degree if grid == PRIMAL else n - degree
    eps = mesh.orientation_sign(k)
    if grid == DUAL and (k * (n - k)) % 2:
        eps = -eps
    return eps


def pair_complementary(a: Cochain, b: Cochain) -> float:
    """Integral of a ^ b for complementary degrees on opposite grids."""
    mesh, n = a.mesh, a.mesh.dim
    if b.mesh is not mesh:
        raise ValueError("cochains on different meshes")
    if a.degree + b.degree != n:
        raise ValueError(f"degrees {a.degree} and {b.degree} are not complementary in dimension {n}")
    if a.grid == b.grid:
        raise ValueError("pairing needs one primal and one dual cochain")
    return _sum(pairing_sign(mesh, a.degree, a.grid) * a.values * b.values)


def integrate_top(c: Cochain) -> float:
    if c.degree != c.mesh.dim:
        raise ValueError(f"only top-degree cochains integrate, got degree {c.degree}")
    # primal and dual n-cells both carry sigma^{0..n-1}
    return _sum(c.values)


def pair_boundary(a: BoundaryCochain, b: BoundaryCochain) -> float:
    """Integral of a ^ b over the boundary."""
    bnd = a.boundary
    m = bnd.dim
    if a.degree + b.degree != m:
        raise ValueError("boundary degrees are not complementary")
    if a.grid == b.grid:
        raise ValueError("boundary pairing needs one primal and one dual cochain")
    sign = 1.0
    if a.grid == PRIMAL:
        sign = (-1.0) ** (a.degree * b.degree)
    return sign * _sum(a.values * b.values)


def integrate_boundary(c: BoundaryCochain) -> float:
    bnd = c.boundary
    if c.degree != bnd.dim:
        raise ValueError("only top-degree boundary cochains integrate")
    if c.grid == PRIMAL:
        return _sum(c.values)
    return _sum(c.values * bnd.orientation[0])


def trace_boundary(c: Cochain) -> BoundaryCochain:
    """Restriction to the boundary.

    Primal values are copied onto boundary cells with the induced orientation
    sign. Dual cochains have no cells on the boundary; their boundary pieces
    take the value of the adjacent interior dual cell (one-sided copy).
    """
    mesh, n = c.mesh, c.mesh.dim
    if c.degree >= n:
        raise ValueError("no boundary trace of a top-degree cochain")
    bnd = boundary_of(mesh)
    if c.grid == PRIMAL:
        k = c.degree
        return BoundaryCochain(bnd, k, PRIMAL, c.values[bnd.cells[k]] * bnd.orientation[k])
    data = dual_boundary_data(mesh, c.index_degree - 1)
    return BoundaryCochain(bnd, c.degree, DUAL, data.extrapolation @ c.values)


# -- coframe components at cell centres -----------------------------------------------


def basis(n: int, k: int) -> list[tuple[int, ...]]:
    return list(combinations(range(n), k))


@dataclass(frozen=True, eq=False)
class PointField:
    """Orthonormal-coframe components of a k-form at every n-cell centre.

    ``components`` has shape (num n-cells, C(n, k)); columns follow ``basis(n, k)``.
    """

    mesh: Mesh
    degree: int
    components: np.ndarray

    def __post_init__(self):
        comps = _frozen(self.components)
        expected = (self.mesh.num_cells(self.mesh.dim), comb(self.mesh.dim, self.degree))
        if comps.shape != expected:
            raise ValueError(f"expected components of shape {expected}, got {comps.shape}")
        object.__setattr__(self, "components", comps)


@lru_cache(maxsize=None)
def _point_matrix(mesh: Mesh, degree: int, grid: str) -> sp.csr_matrix:
    n = mesh.dim
    k = degree if grid == PRIMAL else n - degree
    measure = mesh.primal_measure(k) if grid == PRIMAL else mesh.dual_measure(k)
    comps = {axes: i for i, axes in enumerate(basis(n, degree))}
    ncomp = len(comps)
    top = np.arange(mesh.num_cells(n)).reshape(mesh.top_shape)
    rows, cols, vals = [], [], []
    for blk in mesh.blocks(k):
        label = blk.axes if grid == PRIMAL else complement(blk.axes, n)
        spread = complement(blk.axes, n)
        idx = blk.indices()
        weight = 1.0 / 2 ** len(spread)
        for shift in product((0, 1), repeat=len(spread)):
            sl = [slice(None)] * n
            for a, s in zip(spread, shift):
                sl[a] = slice(s, s + mesh.cells_per_axis[a])
            src = idx[tuple(sl)]
            rows.append(top.ravel() * ncomp + comps[label])
            cols.append(src.ravel())
            vals.append(weight / measure[src.ravel()])
    mat = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(top.size * ncomp, mesh.num_cells(k)),
    )
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


def to_point_field(c: Cochain) -> PointField:
    mat = _point_matrix(c.mesh, c.degree, c.grid)
    ncomp = comb(c.mesh.dim, c.degree)
    return PointField(c.mesh, c.degree, (mat @ c.values).reshape(-1, ncomp))


def point_field_matrix(mesh: Mesh, degree: int, grid: str) -> sp.csr_matrix:
    """Sparse matrix of ``to_point_field`` (rows ordered cell-major, component-minor)."""
    return _point_matrix(mesh, degree, grid)


def from_point_field(field: PointField, grid: str = PRIMAL) -> Cochain:
    """Cochain whose cells average the adjacent n-cell components (times measure)."""
    mesh, n, degree = field.mesh, field.mesh.dim, field.degree
    k = degree if grid == PRIMAL else n - degree
    measure = mesh.primal_measure(k) if grid == PRIMAL else mesh.dual_measure(k)
    comps = {axes: i for i, axes in enumerate(basis(n, degree))}
    values = np.zeros(mesh.num_cells(k))
    for blk in mesh.blocks(k):
        label = blk.axes if grid == PRIMAL else complement(blk.axes, n)
        f = field.components[:, comps[label]].reshape(mesh.top_shape)
        total, count = f, np.ones_like(f)
        for a in complement(blk.axes, n):
            pad_total = np.zeros(tuple(s + 1 if i == a else s for i, s in enumerate(total.shape)))
            pad_count = np.zeros_like(pad_total)
            lo = [slice(None)] * n
            hi = [slice(None)] * n
            lo[a] = slice(0, -1)
            hi[a] = slice(1, None)
            pad_total[tuple(lo)] += total
            pad_total[tuple(hi)] += total
            pad_count[tuple(lo)] += count
            pad_count[tuple(hi)] += count
            total, count = pad_total, pad_count
        sl = slice(blk.offset, blk.offset + blk.size)
        values[sl] = (total / count).ravel() * measure[sl]
    return Cochain(mesh, degree, grid, values)


def sample(mesh: Mesh, degree: int, grid: str, components_fn) -> Cochain:
    """Cochain from a closed-form field given by its coframe components.

    ``components_fn(points)`` receives an (m, n) array and returns an
    (m, C(n, degree)) array (or (m,) when there is one component). Each cell
    stores measure x component at the centre of the primal cell that indexes
    it; for dual cells this is the dual cell's generating point.
    """
    n = mesh.dim
    k = degree if grid == PRIMAL else n - degree
    centers = mesh.cell_centers(k)
    comps = np.asarray(components_fn(centers), dtype=float).reshape(len(centers), -1)
    labels = {axes: i for i, axes in enumerate(basis(n, degree))}
    if comps.shape[1] != len(labels):
        raise ValueError(f"expected {len(labels)} components, got {comps.shape[1]}")
    measure = mesh.primal_measure(k) if grid == PRIMAL else mesh.dual_measure(k)
    values = np.empty(mesh.num_cells(k))
    for blk in mesh.blocks(k):
        label = blk.axes if grid == PRIMAL else complement(blk.axes, n)
        sl = slice(blk.offset, blk.offset + blk.size)
        values[sl] = comps[sl, labels[label]] * measure[sl]
    return Cochain(mesh, degree, grid, values)


# -- pointwise exterior algebra on component arrays ------------------------------------


@lru_cache(maxsize=None)
def _wedge_table(n: int, ka: int, kb: int):
    out = basis(n, ka + kb)
    where = {axes: i for i, axes in enumerate(out)}
    table = []
    for i, I in enumerate(basis(n, ka)):
        for j, J in enumerate(basis(n, kb)):
            if set(I) & set(J):
                continue
            table.append((i, j, where[tuple(sorted(I + J))], permutation_sign(I + J)))
    return table, len(out)


def wedge_components(a: np.ndarray, ka: int, b: np.ndarray, kb: int, n: int) -> np.ndarray:
    """Components of a ^ b; leading axes broadcast, last axis indexes the basis."""
    if ka + kb > n:
        raise ValueError("wedge degree exceeds dimension")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    table, size = _wedge_table(n, ka, kb)
    lead = np.broadcast_shapes(a.shape[:-1], b.shape[:-1])
    out = np.zeros(lead + (size,))
    for i, j, r, s in table:
        out[..., r] += s * a[..., i] * b[..., j]
    return out


def hodge_components(a: np.ndarray, k: int, n: int) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    src = basis(n, k)
    dst = {axes: i for i, axes in enumerate(basis(n, n - k))}
    out = np.zeros(a.shape[:-1] + (len(dst),))
    for i, S in enumerate(src):
        T = complement(S, n)
        out[..., dst[T]] = permutation_sign(S + T) * a[..., i]
    return out


def hodge_inverse_components(a: np.ndarray, k: int, n: int) -> np.ndarray:
    sign = -1.0 if (k * (n - k)) % 2 else 1.0
    return sign * hodge_components(a, k, n)


# -- snapshots -------------------------------------------------------------------


def write_snapshot(path, c: Cochain) -> None:
    """Write ``degree k grid p|d cells N`` then one ``index value`` line per cell."""
    lines = [f"degree {c.degree} grid {_GRID_TAG[c.grid]} cells {len(c.values)}"]
    lines.extend(f"{i} {v:.16e}" for i, v in enumerate(c.values.tolist()))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_snapshot(path, mesh: Mesh) -> Cochain:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    head = text[0].split()
    if len(head) != 6 or head[0] != "degree" or head[2] != "grid" or head[4] != "cells":
        raise ValueError(f"malformed snapshot header: {text[0]!r}")
    degree, tag, count = int(head[1]), head[3], int(head[5])
    grid = {v: k for k, v in _GRID_TAG.items()}[tag]
    values = np.empty(count)
    for line in text[1:1 + count]:
        i, v = line.split()
        values[int(i)] = float(v)
    return Cochain(mesh, degree, grid, values)
