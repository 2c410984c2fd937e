import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dirac_lab import forms
from dirac_lab.forms import DUAL, PRIMAL, BoundaryCochain
from dirac_lab.mesh import build_mesh
from dirac_lab.stokes_dirac import (
    FlowEffortTuple,
    Signature,
    bilinear_form,
    check_isotropy,
    dimension_count,
    structure_map,
)

SIGNATURES = [Signature(1, 1, 1), Signature(2, 1, 2), Signature(3, 2, 2), Signature(3, 1, 3)]
MESHES = {
    1: build_mesh(1, (6,), (1.0,)),
    2: build_mesh(2, (4, 3), (1.0, 0.8)),
    3: build_mesh(3, (3, 2, 2), (1.0, 0.9, 0.7)),
}


def efforts(rng, mesh, sig):
    e_p = forms.zeros(mesh, sig.n - sig.p, DUAL)
    e_q = forms.zeros(mesh, sig.n - sig.q, PRIMAL)
    return (e_p.like(rng.standard_normal(len(e_p.values))),
            e_q.like(rng.standard_normal(len(e_q.values))))


def boundary_values(rng, mesh, sig):
    bnd = forms.boundary_of(mesh)
    return BoundaryCochain(bnd, sig.n - sig.p, DUAL, rng.standard_normal(bnd.num_cells(sig.p - 1)))


@pytest.mark.parametrize("bad", [(1, 1, 2), (2, 2, 2), (3, 0, 4), (4, 2, 3)])
def test_signature_validation(bad):
    with pytest.raises(ValueError):
        Signature(*bad)


def test_signature_exponent():
    assert Signature(1, 1, 1).r == 2
    assert Signature(3, 1, 3).r == 4
    assert Signature(3, 2, 2).r == 5


@pytest.mark.parametrize("sig", SIGNATURES, ids=str)
def test_zero_efforts_give_zero_tuple(sig):
    mesh = MESHES[sig.n]
    e_p = forms.zeros(mesh, sig.n - sig.p, DUAL)
    e_q = forms.zeros(mesh, sig.n - sig.q, PRIMAL)
    t = structure_map(e_p, e_q, sig)
    assert not np.any(t.to_vector())


def test_constant_e_q_has_no_flow_in_1d():
    sig, mesh = Signature(1, 1, 1), MESHES[1]
    e_p = forms.zeros(mesh, 0, DUAL)
    e_q = forms.zeros(mesh, 0, PRIMAL).like(np.full(mesh.num_cells(0), 2.5))
    t = structure_map(e_p, e_q, sig)
    assert not np.any(t.f_p.values)


def test_em_signature_flow_is_plain_derivative():
    sig, mesh = Signature(3, 1, 3), MESHES[3]
    e_p, e_q = efforts(np.random.default_rng(0), mesh, sig)
    t = structure_map(e_p, e_q, sig)
    assert e_q.degree == 0
    assert np.array_equal(t.f_p.values, forms.exterior_derivative(e_q).values)


def test_inputs_are_validated():
    sig, mesh = Signature(2, 1, 2), MESHES[2]
    e_p, e_q = efforts(np.random.default_rng(0), mesh, sig)
    with pytest.raises(ValueError):
        structure_map(e_q, e_p, sig)


@pytest.mark.parametrize("sig", SIGNATURES, ids=str)
def test_bilinear_form_with_zero_and_symmetry(sig):
    mesh, rng = MESHES[sig.n], np.random.default_rng(1)
    template = structure_map(*efforts(rng, mesh, sig), sig)
    size = len(template.to_vector())
    t1 = FlowEffortTuple.from_vector(template, rng.standard_normal(size))
    t2 = FlowEffortTuple.from_vector(template, rng.standard_normal(size))
    zero = FlowEffortTuple.from_vector(template, np.zeros(size))
    assert bilinear_form(t1, zero) == 0.0
    assert bilinear_form(t1, t2) == pytest.approx(bilinear_form(t2, t1), rel=1e-15, abs=1e-14)
    assert np.array_equal(t1.to_vector(), FlowEffortTuple.from_vector(template, t1.to_vector()).to_vector())


@pytest.mark.parametrize("sig", SIGNATURES, ids=str)
def test_self_pairing_of_structure_elements_vanishes(sig):
    mesh, rng = MESHES[sig.n], np.random.default_rng(2)
    e_p, e_q = efforts(rng, mesh, sig)
    g = boundary_values(rng, mesh, sig)
    t = structure_map(e_p, e_q, sig, g)
    norm2 = float(np.sum(t.to_vector() ** 2))
    assert abs(bilinear_form(t, t)) <= 1e-10 * norm2


def test_isotropy_for_smooth_fields_in_1d():
    sig = Signature(1, 1, 1)
    mesh = build_mesh(1, (32,), (1.0,))
    e_p = forms.sample(mesh, 0, DUAL, lambda x: np.sin(2 * np.pi * x[:, 0]) + x[:, 0])
    e_q = forms.sample(mesh, 0, PRIMAL, lambda x: np.cos(3 * x[:, 0]))
    e_p2 = forms.sample(mesh, 0, DUAL, lambda x: np.exp(x[:, 0]))
    e_q2 = forms.sample(mesh, 0, PRIMAL, lambda x: x[:, 0] ** 2)
    assert check_isotropy(e_p, e_q, e_p2, e_q2, sig) <= 1e-10
    assert check_isotropy(e_p, e_q, e_p, e_q, sig) <= 1e-10


def test_isotropy_of_zero_fields_is_zero():
    sig, mesh = Signature(2, 1, 2), MESHES[2]
    e_p = forms.zeros(mesh, 1, DUAL)
    e_q = forms.zeros(mesh, 0, PRIMAL)
    assert check_isotropy(e_p, e_q, e_p, e_q, sig) == 0.0


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(SIGNATURES), st.integers(0, 2**31 - 1), st.booleans())
def test_isotropy_property(sig, seed, free_boundary):
    mesh, rng = MESHES[sig.n], np.random.default_rng(seed)
    e_p, e_q = efforts(rng, mesh, sig)
    e_p2, e_q2 = efforts(rng, mesh, sig)
    g1 = boundary_values(rng, mesh, sig) if free_boundary else None
    g2 = boundary_values(rng, mesh, sig) if free_boundary else None
    assert check_isotropy(e_p, e_q, e_p2, e_q2, sig, g1, g2) <= 1e-10


@pytest.mark.parametrize("cells", [1, 2, 5, 8])
def test_dimension_count_in_1d(cells):
    count = dimension_count(build_mesh(1, (cells,), (1.0,)), Signature(1, 1, 1))
    assert count.maximal
    assert 2 * count.structure_dim == count.space_dim


@pytest.mark.parametrize("sig", SIGNATURES[1:], ids=str)
def test_dimension_count_on_tiny_meshes(sig):
    cells = (2, 2) if sig.n == 2 else (1, 2, 1)
    count = dimension_count(build_mesh(sig.n, cells, (1.0,) * sig.n), sig)
    assert count.maximal, count
