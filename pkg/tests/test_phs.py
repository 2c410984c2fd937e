import math

import numpy as np
import pytest

from dirac_lab import forms
from dirac_lab.densities import polynomial
from dirac_lab.forms import DUAL, PRIMAL, Cochain
from dirac_lab.mesh import build_mesh
from dirac_lab.phs import (
    PRESETS,
    EnergySpec,
    InitialCondition,
    PHSState,
    effort,
    energy,
    make_preset,
    power_balance,
    rhs,
    step,
)
from dirac_lab.stokes_dirac import Signature

QUARTIC_1D = EnergySpec("density", density=polynomial(2, [(0.5, (2, 0)), (0.25, (0, 4))]))


def random_state(rng, mesh, sig, scale=1.0):
    ap = forms.zeros(mesh, sig.p, PRIMAL)
    aq = forms.zeros(mesh, sig.q, DUAL)
    return PHSState(ap.like(scale * rng.standard_normal(len(ap.values))),
                    aq.like(scale * rng.standard_normal(len(aq.values))), 0.0, sig)


def zero_state(mesh, sig):
    return PHSState(forms.zeros(mesh, sig.p, PRIMAL), forms.zeros(mesh, sig.q, DUAL), 0.0, sig)


def preset_mesh(sig):
    return {1: build_mesh(1, (12,), (1.0,)),
            2: build_mesh(2, (5, 4), (1.0, 0.8)),
            3: build_mesh(3, (3, 3, 2), (1.0, 0.9, 0.6))}[sig.n]


def gateaux_pairing(state, spec, dp, dq):
    e_p, e_q = effort(state, spec)
    return forms.pair_complementary(e_p, dp) + forms.pair_complementary(e_q, dq)


# -- energy and effort -----------------------------------------------------------


def test_energy_of_zero_state():
    sig = Signature(2, 1, 2)
    assert energy(zero_state(preset_mesh(sig), sig), EnergySpec()) == 0.0


@pytest.mark.parametrize("length", [1.0, 4.0])
def test_energy_of_constant_field(length):
    sig = Signature(1, 1, 1)
    mesh = build_mesh(1, (4,), (length,))
    ap = forms.sample(mesh, 1, PRIMAL, lambda x: np.ones(len(x)))
    state = PHSState(ap, forms.zeros(mesh, 1, DUAL), 0.0, sig)
    assert energy(state, EnergySpec()) == pytest.approx(0.5 * length, rel=1e-15)


@pytest.mark.parametrize("sig", list(PRESETS.values()), ids=str)
def test_energy_scales_quadratically(sig):
    state = random_state(np.random.default_rng(0), preset_mesh(sig), sig)
    scaled = PHSState(state.alpha_p * 3.0, state.alpha_q * 3.0, 0.0, sig)
    assert energy(scaled, EnergySpec()) == pytest.approx(9.0 * energy(state, EnergySpec()), rel=1e-14)


def test_quadratic_effort_is_hodge_in_1d():
    sig = Signature(1, 1, 1)
    state = random_state(np.random.default_rng(1), preset_mesh(sig), sig)
    e_p, e_q = effort(state, EnergySpec())
    assert np.array_equal(e_p.values, forms.hodge(state.alpha_p).values)
    assert np.array_equal(e_q.values, forms.hodge(state.alpha_q).values)


def test_quadratic_effort_uses_inverse_hodge_in_2d():
    sig = Signature(2, 1, 2)
    state = random_state(np.random.default_rng(1), preset_mesh(sig), sig)
    e_p, _ = effort(state, EnergySpec())
    assert np.array_equal(e_p.values, forms.hodge_inverse(state.alpha_p).values)


def test_quartic_density_effort_is_cube():
    sig = Signature(1, 1, 1)
    mesh = build_mesh(1, (6,), (1.5,))
    value = 0.7
    aq = forms.sample(mesh, 1, DUAL, lambda x: np.full(len(x), value))
    state = PHSState(forms.zeros(mesh, 1, PRIMAL), aq, 0.0, sig)
    _, e_q = effort(state, QUARTIC_1D)
    assert np.allclose(forms.to_point_field(e_q).components, value ** 3, rtol=1e-14, atol=0)
    assert np.allclose(e_q.values, value ** 3, rtol=1e-14, atol=0)


@pytest.mark.parametrize(
    "sig, spec",
    [(s, EnergySpec(coefficients=(0.5, 1.5))) for s in PRESETS.values()] + [(Signature(1, 1, 1), QUARTIC_1D)],
    ids=lambda v: str(v) if isinstance(v, Signature) else "",
)
def test_effort_is_gateaux_derivative(sig, spec):
    rng = np.random.default_rng(2)
    mesh = preset_mesh(sig)
    state = random_state(rng, mesh, sig, 0.5)
    direction = random_state(rng, mesh, sig, 0.5)
    expected = gateaux_pairing(state, spec, direction.alpha_p, direction.alpha_q)
    base = energy(state, spec)

    def moved(eps):
        return energy(state.advanced(direction.alpha_p, direction.alpha_q, eps), spec)

    # forward differences converge linearly: the error shrinks tenfold per decade
    errors = [abs((moved(eps) - base) / eps - expected) for eps in (1e-2, 1e-3, 1e-4, 1e-5)]
    for coarse, fine in zip(errors[:-1], errors[1:]):
        assert 8.0 <= coarse / fine <= 12.0
    central = (moved(1e-4) - moved(-1e-4)) / 2e-4
    assert abs(central - expected) <= 1e-6 * max(1.0, abs(expected))


# -- right-hand side -------------------------------------------------------------------


@pytest.mark.parametrize("sig", list(PRESETS.values()), ids=str)
def test_zero_state_has_zero_rate(sig):
    rate_p, rate_q = rhs(zero_state(preset_mesh(sig), sig), EnergySpec())
    assert not np.any(rate_p.values) and not np.any(rate_q.values)


def test_constant_efforts_are_an_equilibrium_in_1d():
    sig = Signature(1, 1, 1)
    mesh = build_mesh(1, (10,), (1.0,))
    ap = forms.sample(mesh, 1, PRIMAL, lambda x: np.full(len(x), 1.3))
    aq = forms.sample(mesh, 1, DUAL, lambda x: np.full(len(x), -0.4))
    state = PHSState(ap, aq, 0.0, sig)
    rate_p, rate_q = rhs(state, EnergySpec(), boundary="open")
    assert np.max(np.abs(rate_p.values)) <= 1e-15
    assert np.max(np.abs(rate_q.values)) <= 1e-15
    # with the field clamped at the walls only the e_q part stays at rest
    still = PHSState(forms.zeros(mesh, 1, PRIMAL), aq, 0.0, sig)
    rate_p, rate_q = rhs(still, EnergySpec(), boundary="reflecting")
    assert not np.any(rate_p.values) and not np.any(rate_q.values)


def _cell_lookup(mesh, k):
    centres = mesh.cell_centers(k)
    return {tuple(np.round(c, 9)): i for i, c in enumerate(centres)}, centres


def _axes_of(mesh, k):
    out = np.empty(mesh.num_cells(k), dtype=object)
    for blk in mesh.blocks(k):
        out[blk.offset:blk.offset + blk.size] = [blk.axes] * blk.size
    return out


def test_maxwell_rate_matches_hand_coded_curl():
    """dD/dt = curl H on primal faces, dB/dt = -curl E on dual faces, PEC walls."""
    mesh = build_mesh(3, (2, 2, 2), (1.0, 1.3, 0.7))
    h = np.array(mesh.spacings)
    sig = PRESETS["maxwell3d_pq22"]
    state = random_state(np.random.default_rng(3), mesh, sig)
    rate_p, rate_q = rhs(state, EnergySpec())
    eye = np.eye(3)

    faces, face_centres = _cell_lookup(mesh, 2)
    edges, edge_centres = _cell_lookup(mesh, 1)
    face_axes, edge_axes = _axes_of(mesh, 2), _axes_of(mesh, 1)

    def half_extent(centre, axis):
        """Dual length along ``axis`` through a point: halved on the walls."""
        on_wall = np.isclose(centre[axis], 0.0) or np.isclose(centre[axis], mesh.lengths[axis])
        return h[axis] / 2 if on_wall else h[axis]

    # E along the dual edge through each face centre, H along each primal edge
    E = np.empty(len(face_centres))
    for f, c in enumerate(face_centres):
        S = face_axes[f]
        (t,) = [a for a in range(3) if a not in S]
        orient = np.linalg.det(np.stack([eye[S[0]], eye[S[1]], eye[t]]))
        E[f] = orient * state.alpha_p.values[f] / (h[S[0]] * h[S[1]]) * half_extent(c, t)
    H = np.empty(len(edge_centres))
    for e, c in enumerate(edge_centres):
        (a,) = edge_axes[e]
        T = [b for b in range(3) if b != a]
        orient = np.linalg.det(np.stack([eye[T[0]], eye[T[1]], eye[a]]))
        area = half_extent(c, T[0]) * half_extent(c, T[1])
        H[e] = orient * state.alpha_q.values[e] / area * h[a]

    def circulation(lookup, values, centre, a, b, da, db):
        """Counter-clockwise (a, b) circulation around ``centre``; missing sides add nothing."""
        total = 0.0
        for offset, sign in (((0, -db), 1), ((da, 0), 1), ((0, db), -1), ((-da, 0), -1)):
            point = np.array(centre, dtype=float)
            point[a] += offset[0]
            point[b] += offset[1]
            key = tuple(np.round(point, 9))
            if key in lookup:
                total += sign * values[lookup[key]]
        return total

    for f, c in enumerate(face_centres):
        a, b = face_axes[f]
        expected = circulation(edges, H, c, a, b, h[a] / 2, h[b] / 2)
        assert rate_p.values[f] == pytest.approx(expected, abs=1e-13)
    for e, c in enumerate(edge_centres):
        (axis,) = edge_axes[e]
        a, b = [x for x in range(3) if x != axis]
        expected = -circulation(faces, E, c, a, b, h[a] / 2, h[b] / 2)
        assert rate_q.values[e] == pytest.approx(expected, abs=1e-13)


# -- stepping --------------------------------------------------------------------------


def test_step_keeps_zero_state():
    sig = Signature(3, 1, 3)
    out = step(zero_state(preset_mesh(sig), sig), EnergySpec(), 0.01)
    assert not np.any(out.alpha_p.values) and not np.any(out.alpha_q.values)
    assert out.time == pytest.approx(0.01)


def test_step_rejects_bad_arguments():
    sig = Signature(1, 1, 1)
    state = zero_state(preset_mesh(sig), sig)
    with pytest.raises(ValueError):
        step(state, EnergySpec(), -1.0)
    with pytest.raises(ValueError):
        step(state, EnergySpec(), 0.1, scheme="euler")
    with pytest.raises(ValueError):
        step(state, EnergySpec(), 0.1, boundary="absorbing")


def _run(state, spec, dt, steps, scheme="rk4"):
    for _ in range(steps):
        state = step(state, spec, dt, scheme)
    return state


def test_rk4_self_convergence_order():
    mesh = build_mesh(1, (32,), (1.0,))
    state, spec = make_preset("telegraph1d", mesh)
    t_end, base = 0.5, 25
    finals = [_run(state, spec, t_end / (base * 2 ** j), base * 2 ** j) for j in range(4)]
    vec = [np.concatenate([s.alpha_p.values, s.alpha_q.values]) for s in finals]
    err_coarse = np.max(np.abs(vec[0] - vec[3]))
    err_fine = np.max(np.abs(vec[1] - vec[3]))
    # the reference carries error 1/64 of the coarse run, negligible for the ratio
    assert math.log2(err_coarse / err_fine) >= 3.8


def test_midpoint_agrees_with_rk4_to_third_order():
    mesh = build_mesh(1, (24,), (1.0,))
    sig = Signature(1, 1, 1)
    smooth = lambda x: np.sin(2 * np.pi * x[:, 0]) + 0.3 * np.cos(3 * np.pi * x[:, 0])  # noqa: E731
    state = PHSState(forms.sample(mesh, 1, PRIMAL, smooth),
                     forms.sample(mesh, 1, DUAL, lambda x: np.exp(-x[:, 0])), 0.0, sig)
    gaps = []
    for dt in (4e-3, 2e-3, 1e-3):
        a = step(state, EnergySpec(), dt, "rk4")
        b = step(state, EnergySpec(), dt, "midpoint")
        gaps.append(np.max(np.abs(np.concatenate([a.alpha_p.values - b.alpha_p.values,
                                                  a.alpha_q.values - b.alpha_q.values]))))
    orders = [math.log2(gaps[i] / gaps[i + 1]) for i in range(2)]
    assert min(orders) >= 2.8


# -- power balance -----------------------------------------------------------------------


def test_power_balance_of_zero_state():
    sig = Signature(2, 1, 2)
    report = power_balance(zero_state(preset_mesh(sig), sig), EnergySpec())
    assert (report.dE_dt, report.boundary_flux, report.residual, report.relative_residual) == (0, 0, 0, 0)


def test_reflecting_standing_wave_conserves_energy():
    mesh = build_mesh(1, (64,), (1.0,))
    state, spec = make_preset("telegraph1d", mesh)
    e0 = energy(state, spec)
    dt = 0.25 * mesh.spacings[0]
    for _ in range(1000):
        state = step(state, spec, dt)
        report = power_balance(state, spec)
        assert report.residual <= 1e-10 * e0
        assert report.boundary_flux == 0.0
    assert abs(energy(state, spec) - e0) <= 1e-6 * e0


@pytest.mark.parametrize("spec", [EnergySpec(), QUARTIC_1D], ids=["quadratic", "quartic"])
def test_open_boundary_pulse_loses_energy_through_the_port(spec):
    mesh = build_mesh(1, (80,), (1.0,))
    state, _ = make_preset("telegraph1d", mesh, InitialCondition("pulse", center=(0.85,), width=0.05), spec)
    dt = 0.25 * mesh.spacings[0]
    e0 = energy(state, spec)
    for _ in range(40):
        state = step(state, spec, dt, boundary="open")
        report = power_balance(state, spec, "open")
        assert report.dE_dt < 0
        assert abs(report.dE_dt - report.boundary_flux) <= 1e-8 * abs(report.dE_dt)
    assert energy(state, spec) < e0


@pytest.mark.parametrize("sig", list(PRESETS.values()), ids=str)
def test_power_balance_on_random_states(sig):
    state = random_state(np.random.default_rng(4), preset_mesh(sig), sig)
    for mode in ("reflecting", "open"):
        assert power_balance(state, EnergySpec(coefficients=(0.7, 0.3)), mode).relative_residual <= 1e-12


# -- presets --------------------------------------------------------------------------


def test_preset_signatures_and_degrees():
    s, _ = make_preset("telegraph1d", build_mesh(1, (64,), (1.0,)))
    assert s.signature == Signature(1, 1, 1)
    cube = build_mesh(3, (4, 4, 4), (1.0, 1.0, 1.0))
    s, _ = make_preset("maxwell3d_pq22", cube)
    assert s.signature == Signature(3, 2, 2)
    assert (s.alpha_p.degree, s.alpha_p.grid) == (2, PRIMAL)
    assert len(s.alpha_p.values) == cube.num_cells(2)
    s, _ = make_preset("em3d_p1q3", cube)
    assert s.signature == Signature(3, 1, 3)
    assert (s.alpha_q.degree, s.alpha_q.grid) == (3, DUAL)


def test_preset_validation():
    with pytest.raises(ValueError):
        make_preset("wave2d", build_mesh(1, (4,), (1.0,)))
    with pytest.raises(ValueError):
        make_preset("nonsense", build_mesh(1, (4,), (1.0,)))
    with pytest.raises(ValueError):
        make_preset("wave2d", build_mesh(2, (4, 4), (1.0, 1.0)), spec=QUARTIC_1D)
    with pytest.raises(ValueError):
        InitialCondition(shape="square")


def test_random_preset_is_seeded():
    mesh = build_mesh(2, (4, 4), (1.0, 1.0))
    a, _ = make_preset("wave2d", mesh, InitialCondition("random", seed=3))
    b, _ = make_preset("wave2d", mesh, InitialCondition("random", seed=3))
    assert np.array_equal(a.alpha_p.values, b.alpha_p.values)


def test_state_type_checks():
    mesh = build_mesh(1, (4,), (1.0,))
    with pytest.raises(ValueError):
        PHSState(forms.zeros(mesh, 1, DUAL), forms.zeros(mesh, 1, DUAL), 0.0, Signature(1, 1, 1))
    with pytest.raises(ValueError):
        PHSState(Cochain(mesh, 1, PRIMAL, np.zeros(4)), forms.zeros(mesh, 1, PRIMAL), 0.0, Signature(1, 1, 1))
