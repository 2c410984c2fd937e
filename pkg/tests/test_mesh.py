import numpy as np
import pytest

from dirac_lab.mesh import boundary_complex, build_mesh, permutation_sign


@pytest.mark.parametrize(
    "dim, cells, counts",
    [
        (1, (4,), (5, 4)),
        (2, (2, 2), (9, 12, 4)),
        (3, (1, 1, 1), (8, 12, 6, 1)),
        (3, (2, 3, 4), (60, 133, 98, 24)),
    ],
)
def test_cell_counts(dim, cells, counts):
    mesh = build_mesh(dim, cells, (1.0,) * dim)
    assert mesh.cell_counts == counts
    assert mesh.euler_characteristic == 1


@pytest.mark.parametrize("dim, cells", [(0, (1,)), (4, (1, 1, 1, 1)), (2, (2, 0)), (2, (2,))])
def test_build_mesh_rejects_bad_shapes(dim, cells):
    with pytest.raises(ValueError):
        build_mesh(dim, cells, (1.0,) * len(cells))


def test_build_mesh_rejects_non_positive_length():
    with pytest.raises(ValueError):
        build_mesh(2, (2, 2), (1.0, -1.0))


@pytest.mark.parametrize("dim, cells", [(1, (5,)), (2, (3, 4)), (3, (2, 3, 2))])
def test_coboundary_squares_to_zero(dim, cells):
    mesh = build_mesh(dim, cells, (1.0,) * dim)
    for k in range(dim - 1):
        product = (mesh.incidence(k + 1) @ mesh.incidence(k)).toarray()
        assert np.count_nonzero(product) == 0


def test_incidence_is_integer_valued():
    mesh = build_mesh(3, (2, 2, 2), (1.0, 2.0, 3.0))
    for k in range(3):
        data = mesh.incidence(k).data
        assert set(np.unique(data)) <= {-1, 1}


def test_permutation_sign():
    assert permutation_sign((0, 1, 2)) == 1
    assert permutation_sign((1, 0, 2)) == -1
    assert permutation_sign((2, 0, 1)) == 1
    assert permutation_sign(()) == 1


def test_unit_cube_incidence_matches_outward_normals():
    """Brute force: each face of the cube enters with sign det[normal, face frame]."""
    mesh = build_mesh(3, (1, 1, 1), (1.0, 1.0, 1.0))
    centres = mesh.cell_centers(2)
    inc = mesh.incidence(2).toarray()
    eye = np.eye(3)
    faces_seen = 0
    for block in mesh.blocks(2):
        for f in block.indices().ravel():
            c = centres[f]
            (normal_axis,) = [a for a in range(3) if c[a] in (0.0, 1.0)]
            assert normal_axis not in block.axes
            outward = eye[normal_axis] * (1.0 if c[normal_axis] == 1.0 else -1.0)
            frame = [eye[a] for a in block.axes]
            expected = np.linalg.det(np.stack([outward, *frame]))
            assert inc[0, f] == pytest.approx(expected)
            faces_seen += 1
    assert faces_seen == 6


def test_boundary_of_interval():
    mesh = build_mesh(1, (4,), (1.0,))
    bnd = boundary_complex(mesh)
    assert bnd.cell_counts == (2,)
    assert list(bnd.cells[0]) == [0, 4]
    assert list(bnd.orientation[0]) == [-1.0, 1.0]


def test_boundary_of_square_is_perimeter():
    mesh = build_mesh(2, (2, 2), (1.0, 1.0))
    bnd = boundary_complex(mesh)
    assert bnd.cell_counts == (8, 8)
    centres = mesh.cell_centers(1)[bnd.cells[1]]
    on_edge = np.isclose(centres, 0.0) | np.isclose(centres, 1.0)
    assert np.all(on_edge.any(axis=1))
    assert bnd.euler_characteristic == 0


def test_boundary_of_cube():
    mesh = build_mesh(3, (1, 1, 1), (1.0, 1.0, 1.0))
    bnd = boundary_complex(mesh)
    assert bnd.cell_counts == (8, 12, 6)
    assert bnd.euler_characteristic == 2


@pytest.mark.parametrize("cells", [(2, 2), (3, 1, 2)])
def test_boundary_complex_is_a_cochain_complex(cells):
    mesh = build_mesh(len(cells), cells, (1.0,) * len(cells))
    bnd = boundary_complex(mesh)
    for k in range(bnd.dim - 1):
        assert np.count_nonzero((bnd.incidence(k + 1) @ bnd.incidence(k)).toarray()) == 0
    # the boundary of the boundary is empty: the top boundary cells sum to zero under d
    ones = np.ones(bnd.num_cells(bnd.dim))
    assert np.count_nonzero(bnd.incidence(bnd.dim - 1).T @ ones) == 0


def test_dual_measures_sum_to_box_volume():
    mesh = build_mesh(3, (3, 2, 4), (1.5, 1.0, 2.0))
    assert mesh.dual_measure(0).sum() == pytest.approx(3.0)
    assert mesh.primal_measure(3).sum() == pytest.approx(3.0)
