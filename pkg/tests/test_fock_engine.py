import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nonclass.boson_algebra import BosonPolynomial as P
from nonclass.fock_engine import (
    FockDensityOperator,
    ResourceError,
    eval_polynomial,
    expectation,
    ladder,
    monomial_matrix,
    product_expectation,
    purity,
    replica_statevector_expectation,
    tensor_power,
)
from nonclass.multicopy import build_multicopy
from nonclass.state_library import StateSpec, make_state, prepare_state


def fock(n, d):
    ket = np.zeros(d)
    ket[n] = 1
    return FockDensityOperator.from_ket(ket, d)


def test_ladder_small():
    a, ad = ladder(2)
    np.testing.assert_array_equal(a, [[0, 1], [0, 0]])
    np.testing.assert_array_equal(ad, a.conj().T)
    a, ad = ladder(3)
    np.testing.assert_allclose(np.diag(ad @ a).real, [0, 1, 2])
    with pytest.raises(ValueError):
        ladder(1)


@pytest.mark.parametrize("d", [2, 5, 9])
def test_commutator_defect_sits_in_corner(d):
    a, ad = ladder(d)
    defect = a @ ad - ad @ a
    expected = np.eye(d)
    expected[-1, -1] = 1 - d
    np.testing.assert_allclose(defect, expected, atol=1e-12)


def test_number_expectation_on_fock_state():
    rho = fock(1, 4)
    assert expectation(rho, eval_polynomial(P.number(1), 4)) == pytest.approx(1)


def test_thermal_mean_from_geometric_series():
    nbar = 0.5
    rho = prepare_state(StateSpec("thermal", nbar=nbar), 1e-14)
    assert expectation(rho, monomial_matrix(rho.cutoff, 1, 1)).real == pytest.approx(0.5, abs=1e-12)


def test_squeezed_second_moment():
    rho = prepare_state(StateSpec("squeezed", r=0.5), 1e-14, order=2)
    val = expectation(rho, monomial_matrix(rho.cutoff, 0, 2))
    assert val.real == pytest.approx(-0.587600, abs=1e-6)
    assert val.real == pytest.approx(-math.sinh(0.5) * math.cosh(0.5), abs=1e-12)


def test_expectation_shape_mismatch():
    with pytest.raises(ValueError):
        expectation(fock(1, 4), np.eye(5))


def test_density_invariants_enforced():
    with pytest.raises(ValueError):
        FockDensityOperator(np.diag([0.5, 0.6]), 2)
    with pytest.raises(ValueError):
        FockDensityOperator(np.array([[0.5, 1.0], [0.0, 0.5]]), 2)
    with pytest.raises(ValueError):
        FockDensityOperator(np.diag([1.5, -0.5]), 2)
    with pytest.raises(ValueError):
        FockDensityOperator(np.eye(3) / 3, 2)


def test_tensor_power_of_vacuum():
    rho2 = tensor_power(fock(0, 3), 2)
    expected = np.zeros((9, 9))
    expected[0, 0] = 1
    np.testing.assert_allclose(rho2.matrix, expected)


def test_tensor_power_trace_and_purity():
    three = tensor_power(make_state(StateSpec("thermal", nbar=1.0), 8), 3)
    assert np.trace(three.matrix).real == pytest.approx(1.0)
    rho = prepare_state(StateSpec("thermal", nbar=1.0), 1e-10)
    two = tensor_power(rho, 2)
    assert purity(rho) == pytest.approx(1 / 3, abs=1e-9)
    assert purity(two) == pytest.approx(purity(rho) ** 2, rel=1e-12)
    assert two.tail_mass <= 2 * rho.tail_mass + 1e-15


def test_tensor_power_budget():
    rho = fock(0, 20)
    with pytest.raises(ResourceError, match="8000x8000"):
        tensor_power(rho, 3, budget=2**20)
    with pytest.raises(ValueError):
        tensor_power(rho, 5)


def test_eval_polynomial_mode_range():
    with pytest.raises(ValueError):
        eval_polynomial(P.a(3), 3, modes=2)


def test_b12_vanishes_on_coherent_replicas():
    rho = prepare_state(StateSpec("coherent", alpha=0.7 + 0.2j), 1e-13, order=2)
    val = expectation(tensor_power(rho, 2), eval_polynomial(build_multicopy("12").polynomial, rho.cutoff, 2))
    assert abs(val) < 1e-10


def test_b23_on_two_squeezed_replicas():
    rho = make_state(StateSpec("squeezed", r=0.3), 24)
    op = eval_polynomial(build_multicopy("23").polynomial, rho.cutoff, 2)
    val = expectation(tensor_power(rho, 2), op).real
    assert val == pytest.approx(-0.092733, abs=5e-7)
    assert val == pytest.approx(-math.sinh(0.3) ** 2, abs=1e-10)


small = st.tuples(st.integers(0, 2), st.integers(0, 2))
coef = st.floats(-2, 2, allow_nan=False).map(lambda x: round(x, 3))
poly = st.lists(st.tuples(small, small, coef), min_size=1, max_size=3).map(
    lambda ts: sum((P.monomial({1: f1, 2: f2}, c) for f1, f2, c in ts), P.zero())
)


@given(poly, poly)
def test_eval_is_homomorphism_below_margin(p, q):
    d = 8
    lhs = eval_polynomial(p * q, d, 2)
    rhs = eval_polynomial(p, d, 2) @ eval_polynomial(q, d, 2)
    m = q.mode_degree()
    keep = [i * d + j for i in range(d - m) for j in range(d - m)]
    np.testing.assert_allclose(lhs[np.ix_(keep, keep)], rhs[np.ix_(keep, keep)], atol=1e-9)


@given(poly)
def test_hermitian_polynomials_give_hermitian_matrices(p):
    h = p + p.dagger()
    m = eval_polynomial(h, 5, 2)
    np.testing.assert_allclose(m, m.conj().T, atol=1e-10)


@given(st.floats(0.05, 0.8), st.floats(0, 2 * math.pi))
def test_three_routes_agree(r, phi):
    rho = prepare_state(StateSpec("squeezed", r=r, phi=phi), 1e-12, order=4)
    p = build_multicopy("14").polynomial
    fact = product_expectation([rho, rho], p)
    sv = replica_statevector_expectation(rho.ket, 2, p)
    assert abs(fact - sv) < 1e-10
    assert abs(fact.imag) < 1e-10


def test_dense_route_agrees_with_factorized():
    rho = make_state(StateSpec("cat_odd", beta=0.8), 14)
    p = build_multicopy("23").polynomial
    dense = expectation(tensor_power(rho, 2), eval_polynomial(p, 14, 2))
    assert abs(dense - product_expectation([rho, rho], p)) < 1e-11


def test_product_expectation_rejects_foreign_modes():
    with pytest.raises(ValueError):
        product_expectation([fock(1, 3)], P.a(2))
