import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nonclass.boson_algebra import (
    BosonPolynomial,
    multiply,
    normal_power,
    normal_product,
    operator_determinant,
    permutation_sign,
    schwinger,
    term_normal_order,
    to_output_modes,
    transform_modes,
)

P = BosonPolynomial
a1, a2 = P.a(1), P.a(2)
ad1, ad2 = P.adag(1), P.adag(2)


def dense(p, d, modes=(1, 2)):
    """Independent matrix oracle built from raw truncated ladder matrices."""
    a = np.diag(np.sqrt(np.arange(1, d)), 1)
    out = np.zeros((d ** len(modes),) * 2, dtype=complex)
    for key, c in p.terms.items():
        f = {m: (k, l) for m, k, l in key}
        mats = []
        for m in modes:
            k, l = f.get(m, (0, 0))
            mats.append(np.linalg.matrix_power(a.T, k) @ np.linalg.matrix_power(a, l))
        big = mats[0]
        for x in mats[1:]:
            big = np.kron(big, x)
        out += c * big
    return out


def low_block(d, margin, nmodes=2):
    """Flat indices of basis states whose every mode occupation is below d - margin."""
    keep = []
    for idx in itertools.product(range(d), repeat=nmodes):
        if max(idx) < d - margin:
            keep.append(np.ravel_multi_index(idx, (d,) * nmodes))
    return np.array(keep)


coeff = st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False).map(
    lambda z: complex(round(z.real, 3), round(z.imag, 3))
)
factor = st.tuples(st.integers(0, 2), st.integers(0, 2))
monomial = st.fixed_dictionaries({1: factor, 2: factor})
polys = st.lists(st.tuples(monomial, coeff), min_size=1, max_size=4).map(
    lambda terms: sum((P.monomial(f, c) for f, c in terms), P.zero())
)


def test_canonical_commutator():
    assert multiply(a1, ad1).allclose(ad1 * a1 + 1)
    assert (a1 * ad2 - ad2 * a1).is_zero()


def test_single_mode_reordering_coefficients():
    # a^2 a^+2 = a^+2 a^2 + 4 a^+ a + 2
    lhs = P.a(0, 2) * P.adag(0, 2)
    rhs = P.monomial({0: (2, 2)}) + 4 * P.number(0) + 2
    assert lhs.allclose(rhs)


def test_number_operator_square():
    n = P.number(1)
    assert (n * n).allclose(P.monomial({1: (2, 2)}) + n)


@given(polys, polys)
def test_product_matches_matrix_product(p, q):
    d = 9
    lhs = dense(multiply(p, q), d)
    rhs = dense(p, d) @ dense(q, d)
    keep = low_block(d, q.mode_degree())
    np.testing.assert_allclose(lhs[np.ix_(keep, keep)], rhs[np.ix_(keep, keep)], atol=1e-9)


@given(polys, polys, polys)
def test_product_is_associative(p, q, r):
    assert ((p * q) * r).allclose(p * (q * r), atol=1e-9)


@given(polys, polys)
def test_dagger_reverses_products(p, q):
    assert (p * q).dagger().allclose(q.dagger() * p.dagger(), atol=1e-9)


@given(polys, polys)
def test_normal_product_commutes(p, q):
    assert normal_product(p, q).allclose(normal_product(q, p))


def test_normal_product_drops_commutators():
    assert normal_product(a1, ad1).allclose(P.number(1))
    assert normal_power(ad1 + a1, 2).allclose(P.adag(1, 2) + 2 * P.number(1) + P.a(1, 2))


def test_term_normal_order_of_words():
    p = term_normal_order([(2.0, [(1, False), (1, True)]), (1j, [(2, False), (1, True)])])
    assert p.allclose(2 * P.number(1) + 1j * ad1 * a2)


def test_schwinger_algebra():
    Lx, Ly, Lz, L0 = (schwinger(c, (1, 2)) for c in ("x", "y", "z", "0"))
    assert (Lx * Ly - Ly * Lx).allclose(1j * Lz)
    assert (Ly * Lz - Lz * Ly).allclose(1j * Lx)
    casimir = Lx * Lx + Ly * Ly + Lz * Lz
    assert casimir.allclose(L0 * (L0 + 1))
    for L in (Lx, Ly, Lz, L0):
        assert L.is_hermitian()


def random_unitary(seed, n):
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / abs(np.diag(r)))


@given(polys, st.integers(0, 2**31))
def test_mode_transformation_round_trip(p, seed):
    u = random_unitary(seed, 2)
    assert to_output_modes(transform_modes(p, u), u).allclose(p, atol=1e-9)


@given(polys, polys, st.integers(0, 2**31))
def test_mode_transformation_is_a_homomorphism(p, q, seed):
    u = random_unitary(seed, 2)
    lhs = transform_modes(p * q, u)
    rhs = transform_modes(p, u) * transform_modes(q, u)
    assert lhs.allclose(rhs, atol=1e-9)


@given(st.integers(0, 2**31))
def test_total_number_is_invariant(seed):
    u = random_unitary(seed, 3)
    n = P.number(1) + P.number(2) + P.number(3)
    assert transform_modes(n, u).allclose(n, atol=1e-12)


def test_transform_leaves_foreign_modes():
    u = np.array([[0, 1], [1, 0]])
    p = P.a(1) * P.adag(5)
    assert transform_modes(p, u).allclose(P.a(2) * P.adag(5))


def test_transform_rejects_bad_shapes():
    with pytest.raises(ValueError):
        transform_modes(a1, np.eye(2), modes=(1, 2, 3))
    with pytest.raises(ValueError):
        transform_modes(a1, np.ones((2, 3)))


def test_permutation_sign():
    assert permutation_sign((0, 1, 2)) == 1
    assert permutation_sign((1, 0, 2)) == -1
    assert sum(permutation_sign(p) for p in itertools.permutations(range(4))) == 0


def test_determinant_of_scalar_matrix():
    one, zero = P.identity(), P.zero()
    det = operator_determinant([[one, zero], [zero, one]], [1, 2])
    assert det.allclose(1)
    det = operator_determinant([[one, one], [one, one]], [1, 2])
    assert det.is_zero()


def test_determinant_even_group_matches_full_group_for_symmetric_entries():
    n = P.number(0)
    ent = [[P.identity(), P.a(0)], [P.adag(0), n]]
    full = operator_determinant(ent, [1, 2], "all")
    even = operator_determinant(ent, [1, 2], "even")
    # the even subgroup of S2 is trivial, so symmetrisation differs only by relabelling
    assert full.allclose(0.5 * (even + even.relabel({1: 2, 2: 1})))


def test_determinant_validation():
    with pytest.raises(ValueError):
        operator_determinant([[a1]], [1])
    with pytest.raises(ValueError):
        operator_determinant([[P.identity()]], [1, 2])


@given(polys)
def test_json_round_trip(p):
    assert P.from_json(p.to_json()).allclose(p)


def test_relabel_refuses_to_merge():
    with pytest.raises(ValueError):
        (a1 * a2).relabel({1: 2})


def test_degree_and_modes():
    p = P.monomial({1: (2, 1), 3: (0, 1)}) + 1
    assert p.degree() == 4
    assert p.mode_degree() == 3
    assert p.modes == (1, 3)


def test_pruning_and_powers():
    assert len(P({(): 1e-16})) == 0
    assert (ad1 + a1) ** 0 == 1
    with pytest.raises(ValueError):
        a1 ** -1
    x = (ad1 + a1) / math.sqrt(2)
    assert (x**2).allclose(0.5 * (P.adag(1, 2) + P.a(1, 2)) + P.number(1) + 0.5)
