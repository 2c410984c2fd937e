"""Structured cubical complexes on intervals, rectangles and boxes.

A k-cell is identified by the set of axes it extends along (its *axes*) and
by a multi-index. Along an axis in the set the multi-index counts cells
(0..N-1); along any other axis it counts vertex planes (0..N). Cells of one
degree are numbered block by block, blocks ordered like
``itertools.combinations(range(dim), k)``, and row-major inside a block.
That numbering is part of the external contract: snapshot files depend on it.

Every primal k-cell ``c`` also names a dual (n-k)-cell ``*c`` spanning the
complementary axes. Dual cells touching the boundary are truncated to half
length along the axes where ``c`` sits on the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from math import prod

import numpy as np
import scipy.sparse as sp

__all__ = [
    "Block",
    "BoundaryMesh",
    "Mesh",
    "boundary_complex",
    "build_mesh",
    "permutation_sign",
]


def permutation_sign(sequence) -> int:
    """Sign of the permutation that sorts ``sequence`` (distinct entries)."""
    seq = list(sequence)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


def complement(axes: tuple[int, ...], dim: int) -> tuple[int, ...]:
    return tuple(a for a in range(dim) if a not in axes)


@dataclass(frozen=True)
class Block:
    """All k-cells sharing one axis set."""

    axes: tuple[int, ...]
    shape: tuple[int, ...]
    offset: int

    @property
    def size(self) -> int:
        return prod(self.shape)

    def indices(self) -> np.ndarray:
        return self.offset + np.arange(self.size).reshape(self.shape)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Uniform tensor-product complex of dimension 1, 2 or 3.

    Immutable; the cached incidence and measure arrays are computed on first
    use and never change afterwards.
    """

    dim: int
    cells_per_axis: tuple[int, ...]
    lengths: tuple[float, ...]
    spacings: tuple[float, ...] = field(init=False)

    def __post_init__(self):
        object.__setattr__(
            self,
            "spacings",
            tuple(L / N for L, N in zip(self.lengths, self.cells_per_axis)),
        )

    def __repr__(self) -> str:
        return f"Mesh(dim={self.dim}, cells={self.cells_per_axis}, lengths={self.lengths})"

    # -- combinatorics ---------------------------------------------------

    def blocks(self, k: int) -> tuple[Block, ...]:
        return self._blocks[k]

    @cached_property
    def _blocks(self) -> tuple[tuple[Block, ...], ...]:
        out = []
        for k in range(self.dim + 1):
            offset = 0
            row = []
            for axes in combinations(range(self.dim), k):
                shape = tuple(
                    N if a in axes else N + 1 for a, N in enumerate(self.cells_per_axis)
                )
                row.append(Block(axes, shape, offset))
                offset += prod(shape)
            out.append(tuple(row))
        return tuple(out)

    def block(self, k: int, axes: tuple[int, ...]) -> Block:
        for b in self._blocks[k]:
            if b.axes == axes:
                return b
        raise KeyError(axes)

    def num_cells(self, k: int) -> int:
        if not 0 <= k <= self.dim:
            raise ValueError(f"degree {k} outside 0..{self.dim}")
        return sum(b.size for b in self._blocks[k])

    @property
    def cell_counts(self) -> tuple[int, ...]:
        return tuple(self.num_cells(k) for k in range(self.dim + 1))

    @property
    def euler_characteristic(self) -> int:
        return sum((-1) ** k * c for k, c in enumerate(self.cell_counts))

    @property
    def top_shape(self) -> tuple[int, ...]:
        return self.cells_per_axis

    # -- signed incidence --------------------------------------------------

    def incidence(self, k: int) -> sp.csr_matrix:
        """Integer coboundary matrix from k-cells to (k+1)-cells."""
        if not 0 <= k < self.dim:
            raise ValueError(f"no coboundary from degree {k} in dimension {self.dim}")
        return self._incidence[k]

    @cached_property
    def _incidence(self) -> tuple[sp.csr_matrix, ...]:
        mats = []
        for k in range(self.dim):
            rows, cols, vals = [], [], []
            for hi in self._blocks[k + 1]:
                idx = hi.indices()
                for pos, t in enumerate(hi.axes):
                    lo = self.block(k, tuple(a for a in hi.axes if a != t))
                    sign = -1 if pos % 2 else 1
                    lo_idx = lo.indices()
                    n_t = self.cells_per_axis[t]
                    minus = np.take(lo_idx, np.arange(n_t), axis=t)
                    plus = np.take(lo_idx, np.arange(1, n_t + 1), axis=t)
                    for face, s in ((plus, sign), (minus, -sign)):
                        rows.append(idx.ravel())
                        cols.append(face.ravel())
                        vals.append(np.full(idx.size, s, dtype=np.int64))
            mat = sp.csr_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                shape=(self.num_cells(k + 1), self.num_cells(k)),
                dtype=np.int64,
            )
            mat.sort_indices()
            mats.append(mat)
        return tuple(mats)

    # -- geometry ------------------------------------------------------------

    def _axis_coordinate(self, b: Block, a: int) -> np.ndarray:
        """Coordinate of the cell centres of block ``b`` along axis ``a``."""
        h = self.spacings[a]
        grid = np.arange(b.shape[a], dtype=float) * h
        if a in b.axes:
            grid = grid + 0.5 * h
        shape = [1] * self.dim
        shape[a] = b.shape[a]
        return np.broadcast_to(grid.reshape(shape), b.shape)

    def cell_centers(self, k: int) -> np.ndarray:
        """Centres of the primal k-cells, shape (num_cells(k), dim)."""
        parts = []
        for b in self._blocks[k]:
            coords = [self._axis_coordinate(b, a).ravel() for a in range(self.dim)]
            parts.append(np.stack(coords, axis=1))
        return np.concatenate(parts, axis=0)

    def dual_lengths(self, a: int) -> np.ndarray:
        """Lengths of dual edges along axis ``a`` indexed by vertex plane."""
        N = self.cells_per_axis[a]
        ell = np.full(N + 1, self.spacings[a])
        ell[0] *= 0.5
        ell[-1] *= 0.5
        return ell

    def primal_measure(self, k: int) -> np.ndarray:
        return self._measures[k][0]

    def dual_measure(self, k: int) -> np.ndarray:
        """Measure of the dual cell ``*c`` for every primal k-cell ``c``."""
        return self._measures[k][1]

    @cached_property
    def _measures(self):
        out = []
        for k in range(self.dim + 1):
            primal, dual = [], []
            for b in self._blocks[k]:
                pm = np.full(b.shape, float(prod(self.spacings[a] for a in b.axes)))
                dm = np.ones(b.shape)
                for a in complement(b.axes, self.dim):
                    shape = [1] * self.dim
                    shape[a] = b.shape[a]
                    dm = dm * self.dual_lengths(a).reshape(shape)
                primal.append(pm.ravel())
                dual.append(dm.ravel())
            out.append((np.concatenate(primal), np.concatenate(dual)))
        return tuple(out)

    def orientation_sign(self, k: int) -> np.ndarray:
        """eps(S, S^c) per primal k-cell: sign relating sigma^S ^ sigma^{S^c} to the volume form."""
        return self._orientation[k]

    @cached_property
    def _orientation(self):
        out = []
        for k in range(self.dim + 1):
            parts = [
                np.full(b.size, permutation_sign(b.axes + complement(b.axes, self.dim)))
                for b in self._blocks[k]
            ]
            out.append(np.concatenate(parts).astype(float))
        return tuple(out)

    def top_measure(self) -> np.ndarray:
        return self.primal_measure(self.dim)


def build_mesh(dim: int, cells_per_axis, lengths) -> Mesh:
    """Uniform cubical complex on ``[0, L_1] x ... x [0, L_dim]``."""
    if dim not in (1, 2, 3):
        raise ValueError(f"dimension must be 1, 2 or 3, got {dim}")
    cells = tuple(int(c) for c in np.atleast_1d(cells_per_axis))
    lens = tuple(float(v) for v in np.atleast_1d(lengths))
    if len(cells) != dim or len(lens) != dim:
        raise ValueError(f"expected {dim} cell counts and lengths, got {cells} and {lens}")
    if any(c < 1 for c in cells):
        raise ValueError(f"cell counts must be >= 1, got {cells}")
    if any(not (v > 0) for v in lens):
        raise ValueError(f"lengths must be positive, got {lens}")
    return Mesh(dim, cells, lens)


@dataclass(frozen=True, eq=False)
class BoundaryMesh:
    """Cells of the parent complex lying on its boundary.

    ``cells[k]`` lists parent k-cell indices in ascending order. ``orientation[k]``
    is +1 except for the top degree n-1, where it is the sign of the
    orientation induced by the outward normal relative to the parent's
    canonical orientation. ``parent_cell`` maps each boundary (n-1)-cell to
    the unique n-cell it bounds.
    """

    parent: Mesh
    cells: tuple[np.ndarray, ...]
    orientation: tuple[np.ndarray, ...]
    parent_cell: np.ndarray

    @property
    def dim(self) -> int:
        return self.parent.dim - 1

    def num_cells(self, k: int) -> int:
        return len(self.cells[k])

    @property
    def cell_counts(self) -> tuple[int, ...]:
        return tuple(len(c) for c in self.cells)

    @property
    def euler_characteristic(self) -> int:
        return sum((-1) ** k * c for k, c in enumerate(self.cell_counts))

    def incidence(self, k: int) -> sp.csr_matrix:
        """Coboundary of the boundary complex, in boundary orientation."""
        full = self.parent.incidence(k)
        sub = full[self.cells[k + 1]][:, self.cells[k]]
        return sp.diags(self.orientation[k + 1]) @ sub @ sp.diags(self.orientation[k])


def boundary_complex(mesh: Mesh) -> BoundaryMesh:
    n = mesh.dim
    cells, signs = [], []
    parent_cell = None
    for k in range(n):
        idx_parts, sign_parts = [], []
        for b in mesh.blocks(k):
            on_bnd = np.zeros(b.shape, dtype=bool)
            induced = np.zeros(b.shape)
            for a in complement(b.axes, n):
                N = mesh.cells_per_axis[a]
                coord = np.arange(N + 1).reshape([N + 1 if i == a else 1 for i in range(n)])
                lo = np.broadcast_to(coord == 0, b.shape)
                hi = np.broadcast_to(coord == N, b.shape)
                on_bnd |= lo | hi
                if k == n - 1:
                    base = -1 if a % 2 else 1
                    induced = induced - base * lo + base * hi
            idx = b.indices()[on_bnd]
            idx_parts.append(idx)
            sign_parts.append(induced[on_bnd] if k == n - 1 else np.ones(idx.size))
        idx = np.concatenate(idx_parts)
        sgn = np.concatenate(sign_parts)
        order = np.argsort(idx, kind="stable")
        cells.append(idx[order])
        signs.append(sgn[order])
    # each boundary facet bounds exactly one top cell
    top = mesh.incidence(n - 1).tocsc()
    facets = cells[n - 1]
    parent_cell = np.array([top.indices[top.indptr[f]:top.indptr[f + 1]][0] for f in facets])
    return BoundaryMesh(mesh, tuple(cells), tuple(signs), parent_cell)
