import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm, logm

from nonclass.fock_engine import FockDensityOperator
from nonclass.minor_criteria import minor_value
from nonclass.moment_matrix import build_moment_matrix
from nonclass.multicopy import ROTATION3
from nonclass.optical_circuits import (
    CircuitSpec,
    bs,
    circuit_minor,
    compile_mode_unitary,
    detection_boundary_scan,
    dft_matrix,
    fock_unitary,
    interpolation_value,
    measure_functional,
    mode_generator,
    output_statistics,
    preset,
    ps,
    replica_input,
    sector_basis,
    sector_generator,
    simulate,
)
from nonclass.optical_circuits import _givens_sequence
from nonclass.state_library import StateSpec, cat_norm, make_state, prepare_state

TAU_STAR = (2 + math.sqrt(2)) / 4


def state(spec, order=4):
    return prepare_state(spec, 1e-12, order=order)


def minor(rho, S):
    return minor_value(build_moment_matrix(rho), S)


def reference_unitary(u, d):
    """exp(i a^+ h a) on d levels per mode from scipy's expm/logm, two modes."""
    a = np.diag(np.sqrt(np.arange(1, d)), 1)
    eye = np.eye(d)
    A = [np.kron(a, eye), np.kron(eye, a)]
    h = -1j * logm(u)
    G = sum(h[i, j] * A[i].conj().T @ A[j] for i in range(2) for j in range(2))
    return expm(1j * G)


def test_fig1_and_fig2_matrices():
    s = 1 / math.sqrt(2)
    np.testing.assert_allclose(compile_mode_unitary(preset("fig1")), s * np.array([[1, 1], [1, -1]]), atol=1e-15)
    np.testing.assert_allclose(compile_mode_unitary(preset("fig2")), s * np.array([[1, -1j], [1, 1j]]), atol=1e-15)


def test_three_mode_rotation():
    u = compile_mode_unitary(CircuitSpec(3, (bs(1, 2, 0.5), bs(1, 3, 2 / 3))))
    for i in range(3):
        row = ROTATION3[i]
        assert min(np.abs(u[i] - row).max(), np.abs(u[i] + row).max()) < 1e-12


def test_transparent_beam_splitter():
    u = compile_mode_unitary(CircuitSpec(2, (bs(1, 2, 1.0),)))
    np.testing.assert_allclose(np.abs(u), np.eye(2))


def test_element_validation():
    with pytest.raises(ValueError):
        bs(1, 1, 0.5)
    with pytest.raises(ValueError):
        bs(1, 2, 1.5)
    with pytest.raises(ValueError):
        CircuitSpec(2, (bs(1, 3, 0.5),))
    with pytest.raises(ValueError):
        compile_mode_unitary(np.array([[1.0, 1.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        preset("fig9")


def test_json_round_trip():
    c = preset("fig4")
    assert CircuitSpec.from_json(c.to_json()).elements == c.elements


@pytest.mark.parametrize("u", [np.diag([1, -1]), dft_matrix(3), compile_mode_unitary(preset("fig4"))], ids=["minus_one", "dft3", "fig4"])
def test_mode_generator_exponentiates_back(u):
    h = mode_generator(u)
    np.testing.assert_allclose(h, h.conj().T, atol=1e-14)
    np.testing.assert_allclose(expm(1j * h), u, atol=1e-12)


@given(st.integers(1, 4), st.integers(0, 6))
def test_sector_basis_size(m, N):
    b = sector_basis(m, N)
    assert len(b) == math.comb(N + m - 1, m - 1)
    assert np.all(b.sum(axis=1) == N)
    assert len({tuple(r) for r in b}) == len(b)


def test_sector_generator_hermitian():
    h = mode_generator(dft_matrix(3))
    G = sector_generator(h, 4).toarray()
    np.testing.assert_allclose(G, G.conj().T, atol=1e-14)


@given(st.floats(0, 1), st.floats(-math.pi, math.pi))
@settings(max_examples=15)
def test_fock_unitary_against_expm(tau, phi):
    u = compile_mode_unitary(CircuitSpec(2, (ps(2, phi), bs(1, 2, tau))))
    d = 5
    U = fock_unitary(u, d)
    R = reference_unitary(u, 2 * d)
    # compare on states whose total photon number stays inside both truncations
    low = [i * d + j for i in range(d) for j in range(d) if i + j < d]
    low_big = [i * 2 * d + j for i in range(d) for j in range(d) if i + j < d]
    np.testing.assert_allclose(U[np.ix_(low, low)], R[np.ix_(low_big, low_big)], atol=1e-9)


def test_fock_unitary_heisenberg_action():
    u = compile_mode_unitary(preset("fig2"))
    d = 6
    U = fock_unitary(u, d)
    a = np.diag(np.sqrt(np.arange(1, d)), 1)
    A = [np.kron(a, np.eye(d)), np.kron(np.eye(d), a)]
    low = [i * d + j for i in range(d) for j in range(d) if i + j < d]
    for i in range(2):
        lhs = U.conj().T @ A[i] @ U
        rhs = u[i, 0] * A[0] + u[i, 1] * A[1]
        np.testing.assert_allclose(lhs[np.ix_(low, low)], rhs[np.ix_(low, low)], atol=1e-12)


def test_fock_unitary_conserves_number():
    d = 5
    U = fock_unitary(preset("fig4"), d)
    n = np.add.outer(np.add.outer(np.arange(d), np.arange(d)), np.arange(d)).ravel()
    Ntot = np.diag(n)
    np.testing.assert_allclose(U @ Ntot, Ntot @ U, atol=1e-10)
    np.testing.assert_allclose(fock_unitary(np.eye(2), 4), np.eye(16))


def test_single_photon_splits_evenly():
    one, vac = make_state(StateSpec("fock", n=1), 3), make_state(StateSpec("fock", n=0), 3)
    dist = simulate(preset("fig1"), [one, vac])
    stats = output_statistics(dist, 1, 2)
    assert stats["n1"] == pytest.approx(0.5)
    assert stats["n2"] == pytest.approx(0.5)
    assert dist.total_probability() == pytest.approx(1)


def test_two_mode_squeezed_vacuum_correlation():
    rho = state(StateSpec("squeezed", r=0.5))
    dist = simulate(preset("fig2"), [rho, rho])
    J = dist.joint(1, 2, rho.cutoff * 2)
    assert J.sum() - np.trace(J) <= 1e-9


def test_functional_examples():
    coh = state(StateSpec("coherent", alpha=0.9 - 0.3j))
    assert abs(measure_functional(simulate(preset("fig1"), [coh, coh]), "mean_n", 2)) < 1e-10
    th = state(StateSpec("thermal", nbar=0.4))
    assert measure_functional(simulate(preset("fig1"), [th, th]), "mean_n", 2) == pytest.approx(0.4, abs=1e-10)
    one = make_state(StateSpec("fock", n=1), 3)
    val = measure_functional(simulate(preset("fig2"), [one, one]), "half_sq_diff_minus_half_sum", 1, 2)
    assert val == pytest.approx(1)
    with pytest.raises(ValueError):
        measure_functional(simulate(preset("fig1"), [one, one]), "mean_n", 3)
    with pytest.raises(ValueError):
        measure_functional(simulate(preset("fig1"), [one, one]), "variance", 1)


def test_circuit_minor_examples():
    assert circuit_minor("d15", make_state(StateSpec("fock", n=3), 5)) == pytest.approx(-3)
    disp = state(StateSpec("squeezed", r=0.4, displacement=1.0))
    val = circuit_minor("d123", disp)
    assert val == pytest.approx(-math.sinh(0.4) ** 2, abs=1e-7)
    assert val == pytest.approx(-0.168717, abs=1e-6)
    cat = state(StateSpec("cat_even", beta=1.0))
    ratio = cat_norm(1, -1) / cat_norm(1, 1)
    assert circuit_minor("d23", cat) == pytest.approx(ratio**2 - 1, abs=1e-9)
    with pytest.raises(ValueError):
        circuit_minor("d99", cat)


@pytest.mark.parametrize(
    "spec",
    [
        StateSpec("fock", n=2),
        StateSpec("squeezed", r=0.5, phi=0.7),
        StateSpec("cat_odd", beta=1.0),
        StateSpec("squeezed_thermal", nbar=0.5, r=0.35),
        StateSpec("coherent", alpha=0.5 + 0.5j),
    ],
    ids=lambda s: s.label(),
)
@pytest.mark.parametrize("name,S", [("d12", "12"), ("d14", "14"), ("d15", "15"), ("d23", "23"), ("d123", "123")])
def test_circuit_equals_minor(spec, name, S):
    rho = state(spec)
    ref = minor(replica_input(rho, name), S)
    assert circuit_minor(name, rho) == pytest.approx(ref, abs=1e-7)


@pytest.mark.parametrize("spec", [StateSpec("squeezed", r=0.3, displacement=0.5), StateSpec("fock", n=1)], ids=lambda s: s.label())
def test_dft_circuit_matches_three_mode_preset(spec):
    rho = state(spec)
    assert circuit_minor("d123_dft", rho) == pytest.approx(circuit_minor("d123", rho), abs=1e-9)


def test_mandel_form_of_d23():
    rho = state(StateSpec("squeezed_thermal", nbar=0.2, r=0.7))
    s = output_statistics(simulate(preset("fig2"), [rho, rho]), 1, 2)
    mandel = 0.5 * (s["Q1"] * s["n1"] + s["Q2"] * s["n2"] + s["n1"] ** 2 + s["n2"] ** 2 - 2 * s["n1n2"])
    assert mandel == pytest.approx(minor(rho, "23"), abs=1e-9)


def test_elementwise_and_whole_circuit_routes_agree():
    rho = make_state(StateSpec("cat_odd", beta=0.8), 8)
    c = preset("fig4")
    a = simulate(c, [rho] * 3)
    b = simulate(compile_mode_unitary(c), [rho] * 3)
    m = simulate(c, [rho] * 3, force_mixed=True)
    f = lambda dist: measure_functional(dist, "half_sq_diff_minus_half_sum", 2, 3)
    assert f(a) == pytest.approx(f(b), abs=1e-12)
    assert f(a) == pytest.approx(f(m), abs=1e-12)


def random_unitary(m, seed):
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m)))
    return q * (np.diag(r) / abs(np.diag(r)))


def rebuild(gates, m):
    u = np.eye(m, dtype=complex)
    for g in gates:
        e = np.eye(m, dtype=complex)
        if g[0] == "phase":
            e[g[1], g[1]] = g[2]
        else:
            _, i, j, w = g
            e[np.ix_([i, j], [i, j])] = w
        u = e @ u
    return u


@given(st.integers(2, 5), st.integers(0, 2**32 - 1))
def test_givens_sequence_rebuilds_unitary(m, seed):
    u = random_unitary(m, seed)
    np.testing.assert_allclose(rebuild(_givens_sequence(u), m), u, atol=1e-12)


def test_givens_sequence_of_permutation_and_dft():
    perm = np.eye(3)[[2, 0, 1]]
    np.testing.assert_allclose(rebuild(_givens_sequence(perm), 3), perm, atol=1e-12)
    np.testing.assert_allclose(rebuild(_givens_sequence(dft_matrix(3)), 3), dft_matrix(3), atol=1e-12)


def test_explicit_matrix_routes_agree():
    kets = [make_state(StateSpec("squeezed", r=0.4, phi=0.3), 7), make_state(StateSpec("fock", n=2), 7), make_state(StateSpec("cat_odd", beta=0.7), 7)]
    u = random_unitary(3, 7)
    a = simulate(u, kets)
    b = simulate(u, kets, force_mixed=True)
    assert a.sectors.keys() == b.sectors.keys()
    for N in a.sectors:
        np.testing.assert_array_equal(a.sectors[N][0], b.sectors[N][0])
        np.testing.assert_allclose(a.sectors[N][1], b.sectors[N][1], atol=1e-12)


def test_weighted_tail_reports_dropped_weight():
    rho = state(StateSpec("squeezed", r=0.8))
    full = simulate(preset("fig2"), [rho, rho])
    cut = simulate(preset("fig2"), [rho, rho], weighted_tail=1e-6)
    assert full.dropped_weight == 0
    assert 0 < cut.dropped_weight < 1e-6
    assert cut.total_probability() == pytest.approx(1 - cut.dropped_weight, abs=1e-12)


def test_simulate_checks_mode_count():
    with pytest.raises(ValueError):
        simulate(preset("fig1"), [make_state(StateSpec("fock", n=1), 3)])


def test_interpolation_endpoints():
    f2 = make_state(StateSpec("fock", n=2), 4)
    assert interpolation_value(1.0, math.pi / 2, f2) == pytest.approx(-2)
    sq = state(StateSpec("squeezed", r=0.5))
    assert interpolation_value(0.5, math.pi / 2, sq) == pytest.approx(-math.sinh(0.5) ** 2, abs=1e-10)
    with pytest.raises(ValueError):
        interpolation_value(0.4, 0.0, sq)


states = st.one_of(
    st.builds(lambda n: StateSpec("fock", n=n), st.integers(1, 3)),
    st.builds(lambda r: StateSpec("squeezed", r=r), st.floats(0.05, 0.6)),
    st.builds(lambda b: StateSpec("cat_odd", beta=b), st.floats(0.3, 1.2)),
)


@given(states, st.floats(0.5, 1.0))
@settings(max_examples=20)
def test_interpolation_mixes_endpoint_minors(spec, tau):
    rho = state(spec)
    expected = 4 * tau * (1 - tau) * minor(rho, "23") + (2 * tau - 1) ** 2 * minor(rho, "15")
    assert interpolation_value(tau, math.pi / 2, rho) == pytest.approx(expected, abs=1e-9)


def test_verdicts_just_above_threshold():
    tau = TAU_STAR + 0.01
    assert interpolation_value(tau, math.pi / 2, make_state(StateSpec("fock", n=1), 3)) < -1e-9
    assert interpolation_value(tau, math.pi / 2, make_state(StateSpec("fock", n=2), 4)) >= -1e-9


def fock_boundary(n):
    return 0.5 * (1 + math.sqrt(n / (n + 1)))


def test_boundary_scan_locates_fock_boundaries():
    states_ = {f"fock{n}": make_state(StateSpec("fock", n=n), n + 2) for n in (1, 2)}
    scan = detection_boundary_scan(states_, tau_grid=np.linspace(0.5, 1.0, 33))
    assert scan.boundaries["fock1"] == [pytest.approx(TAU_STAR, abs=1e-5)]
    assert scan.boundaries["fock2"] == [pytest.approx(fock_boundary(2), abs=1e-5)]
    assert scan.detected_at("fock1", 1.0)
    assert not scan.detected_at("fock1", 0.5)


def test_scan_verdict_examples():
    grid = [0.6, 0.8, 0.9, 0.95]
    states_ = {
        "sq": state(StateSpec("squeezed", r=0.3)),
        "odd": state(StateSpec("cat_odd", beta=1.0)),
        "even": state(StateSpec("cat_even", beta=1.0)),
    }
    scan = detection_boundary_scan(states_, tau_grid=grid, refine_tol=1e-3)
    assert scan.detected_at("sq", 0.8)
    assert not scan.detected_at("sq", 0.9)
    assert scan.detected_at("odd", 0.95)
    assert scan.detected_at("even", 0.6)
    with pytest.raises(KeyError):
        scan.detected_at("sq", 0.7)


def test_mixed_three_replica_input_is_recut():
    rho = prepare_state(StateSpec("thermal", nbar=1.0), 1e-12)
    small = replica_input(rho, "d123", mixed_cutoff=8)
    assert small.cutoff == 8
    assert isinstance(small, FockDensityOperator)
    assert replica_input(rho, "d23") is rho
