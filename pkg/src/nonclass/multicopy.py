"""Multicopy observables whose mean on identical replicas equals a principal minor.

The operator matrix of ``B_S`` has entry ``(i, j) = :(op_{S_i})^+ op_{S_j}:``
on the replica mode of row ``i``; ``B_S`` is its Leibniz determinant averaged
over all assignments of rows to replicas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .boson_algebra import (
    BosonPolynomial,
    _group,
    multiply,
    normal_power,
    normal_product,
    operator_determinant,
    schwinger,
    transform_modes,
)
from .fock_engine import (
    DEFAULT_MEMORY_BUDGET,
    FockDensityOperator,
    eval_polynomial,
    expectation,
    product_expectation,
    replica_statevector_expectation,
    tensor_power,
)
from .moment_matrix import MAX_DIMENSION, first_row_operator

__all__ = [
    "MulticopyObservable",
    "COMPACT_TAGS",
    "build_multicopy",
    "multicopy_expectation",
    "compact_form",
    "compact_form_check",
    "f1235",
    "f1235_schwinger_forms",
    "f1235_output_form",
    "HADAMARD4",
    "ROTATION3",
    "ly_vector_rotation_check",
    "b15_photon_number_form",
]

COMPACT_TAGS = {
    (1, 2): "L0_minus_Lx",
    (1, 4): "two_L0sq_minus_Lxsq",
    (2, 3): "two_Lysq_normal",
    (1, 2, 3): "B123_form",
    (1, 2, 3, 5): "f1235_form",
    (2, 5): "B25_form",
}

# a' = O a for the first two beam splitters of the three-replica circuit.
ROTATION3 = np.array(
    [
        [1 / math.sqrt(3), 1 / math.sqrt(3), 1 / math.sqrt(3)],
        [1 / math.sqrt(2), -1 / math.sqrt(2), 0.0],
        [1 / math.sqrt(6), 1 / math.sqrt(6), -2 / math.sqrt(6)],
    ]
)

# Tensor product of two 2-point Fourier transforms.
HADAMARD4 = 0.5 * np.array(
    [[1, 1, 1, 1], [1, -1, 1, -1], [1, 1, -1, -1], [1, -1, -1, 1]], dtype=float
)


@dataclass(frozen=True, eq=False)
class MulticopyObservable:
    subset: tuple[int, ...]
    polynomial: BosonPolynomial
    compact_form_tag: str = "none"

    @property
    def copies(self) -> int:
        return len(self.subset)

    @property
    def label(self) -> str:
        return "B" + "".join(map(str, self.subset))

    def to_json(self) -> dict:
        return {
            "subset": list(self.subset),
            "compact_form_tag": self.compact_form_tag,
            "polynomial": self.polynomial.to_json(),
        }


def _column_operator(j: int) -> BosonPolynomial:
    k, l = first_row_operator(j)
    return BosonPolynomial.monomial({0: (k, l)}) if k or l else BosonPolynomial.identity()


@lru_cache(maxsize=64)
def _build_cached(S: tuple[int, ...]) -> BosonPolynomial:
    ops = [_column_operator(s) for s in S]
    entries = [[normal_product(ops[i].dagger(), ops[j]) for j in range(len(S))] for i in range(len(S))]
    return operator_determinant(entries, list(range(1, len(S) + 1)))


def build_multicopy(S) -> MulticopyObservable:
    """Symmetrised operator determinant for index set ``S`` (1-based)."""
    if isinstance(S, str):
        S = [int(c) for c in S]
    S = tuple(sorted(int(s) for s in S))
    if len(set(S)) != len(S):
        raise ValueError("index set has repeated entries")
    if not 2 <= len(S) <= 4:
        raise ValueError("multicopy observables are built for 2 to 4 copies")
    if S[0] < 1 or S[-1] > MAX_DIMENSION:
        raise ValueError(f"indices must lie in 1..{MAX_DIMENSION}")
    return MulticopyObservable(S, _build_cached(S), COMPACT_TAGS.get(S, "none"))


def multicopy_expectation(
    rho: FockDensityOperator,
    B: MulticopyObservable | BosonPolynomial,
    route: str = "auto",
    budget: int = DEFAULT_MEMORY_BUDGET,
) -> float:
    """``Tr[rho^{(x)k} B]`` for a single-mode state ``rho``.

    Routes: ``factorized`` (one single-mode trace per monomial factor),
    ``statevector`` (replica ket, pure states only), ``dense`` (explicit
    tensor power and operator matrix).  ``auto`` uses the replica ket for
    pure states and the factorized form otherwise.
    """
    if rho.modes != 1:
        raise ValueError("replicas of a single-mode state expected")
    poly = B.polynomial if isinstance(B, MulticopyObservable) else B
    k = B.copies if isinstance(B, MulticopyObservable) else max(poly.modes, default=1)
    if route == "auto":
        route = "statevector" if rho.is_pure else "factorized"
    if route == "factorized":
        val = product_expectation([rho] * k, poly)
    elif route == "statevector":
        if not rho.is_pure:
            raise ValueError("statevector route needs a pure state")
        need = rho.cutoff**k * 16 * 3
        if need > budget:
            from .fock_engine import ResourceError

            raise ResourceError(f"{k} replica kets of dimension {rho.cutoff}**{k} exceed budget")
        val = replica_statevector_expectation(rho.ket, k, poly)
    elif route == "dense":
        big = tensor_power(rho, k, budget)
        val = expectation(big, eval_polynomial(poly, rho.cutoff, k))
    else:
        raise ValueError(f"unknown route {route!r}")
    if abs(val.imag) > 1e-9 * (1 + abs(val.real)):
        raise ArithmeticError(f"multicopy expectation has imaginary part {val.imag:.3e}")
    return float(val.real)


# ---------------------------------------------------------------------------
# compact angular-momentum forms


def _L(c, k, l):
    return schwinger(c, (k, l))


def f1235() -> BosonPolynomial:
    """Hermitian ``f`` with ``B_1235 = :f^+ f:``, written out monomial by monomial."""
    A = BosonPolynomial.a
    Ad = BosonPolynomial.adag

    def t(*ops):
        out = BosonPolynomial.identity()
        for op in ops:
            out = normal_product(out, op)
        return out

    n = BosonPolynomial.number
    terms = [
        (+1, t(n(1), Ad(2), A(3))),
        (-1, t(Ad(1), n(2), A(3))),
        (-1, t(n(1), A(2), Ad(3))),
        (+1, t(A(1), n(2), Ad(3))),
        (+1, t(Ad(1), A(2), n(3))),
        (-1, t(A(1), Ad(2), n(3))),
        (-1, t(n(1), Ad(2), A(4))),
        (+1, t(Ad(1), n(2), A(4))),
        (+1, t(n(1), Ad(3), A(4))),
        (-1, t(n(2), Ad(3), A(4))),
        (-1, t(Ad(1), n(3), A(4))),
        (+1, t(Ad(2), n(3), A(4))),
        (+1, t(n(1), A(2), Ad(4))),
        (-1, t(A(1), n(2), Ad(4))),
        (-1, t(n(1), A(3), Ad(4))),
        (+1, t(n(2), A(3), Ad(4))),
        (+1, t(A(1), n(3), Ad(4))),
        (-1, t(A(2), n(3), Ad(4))),
        (-1, t(Ad(1), A(2), n(4))),
        (+1, t(A(1), Ad(2), n(4))),
        (+1, t(Ad(1), A(3), n(4))),
        (-1, t(Ad(2), A(3), n(4))),
        (-1, t(A(1), Ad(3), n(4))),
        (+1, t(A(2), Ad(3), n(4))),
    ]
    acc = BosonPolynomial()
    for sign, m in terms:
        acc = acc + sign * m
    return acc * (-1j / (2 * math.sqrt(6)))


def f1235_schwinger_forms() -> tuple[BosonPolynomial, BosonPolynomial]:
    """The six-term ``L_z L_y`` sum and the even-permutation average."""
    pairs = [((1, 2), (3, 4)), ((1, 3), (4, 2)), ((1, 4), (2, 3))]
    six = BosonPolynomial()
    for p, q in pairs:
        six = six + multiply(_L("z", *p), _L("y", *q)) + multiply(_L("y", *p), _L("z", *q))
    six = six * (2 / math.sqrt(6))


    avg = BosonPolynomial()
    for s in _group(4, "even"):
        m = [x + 1 for x in s]
        avg = avg + multiply(_L("z", m[0], m[1]), _L("y", m[2], m[3]))
    return six, avg / math.sqrt(6)


def f1235_output_form() -> BosonPolynomial:
    """``-sqrt(2/3) sum L_x L_y`` over the pairs (23), (34), (42) of output modes."""
    acc = BosonPolynomial()
    for k, l in ((2, 3), (3, 4), (4, 2)):
        acc = acc + multiply(_L("x", k, l), _L("y", k, l))
    return -math.sqrt(2 / 3) * acc


def compact_form(tag: str) -> BosonPolynomial:
    """Angular-momentum expression associated with a compact-form tag."""
    L0, Lx, Ly, Lz = (_L(c, 1, 2) for c in ("0", "x", "y", "z"))
    if tag == "L0_minus_Lx":
        return L0 - Lx
    if tag == "two_L0sq_minus_Lxsq":
        return 2 * (L0 * L0 - Lx * Lx)
    if tag == "two_Lysq_normal":
        return 2 * normal_power(Ly, 2)
    if tag == "B123_form":
        s = _L("y", 1, 2) + _L("y", 2, 3) + _L("y", 3, 1)
        return (2 / 3) * normal_power(s, 2)
    if tag == "f1235_form":
        f = f1235()
        return normal_product(f.dagger(), f)
    if tag == "B25_form":
        return normal_product(L0 - Lx, normal_power(L0, 2) - normal_power(Lz, 2))
    raise ValueError(f"no compact form for tag {tag!r}")


def compact_form_check(B: MulticopyObservable, atol: float = 1e-12) -> tuple[bool, dict]:
    """Compare ``B`` with its tagged compact form; returns (equal, differing monomials)."""
    if B.compact_form_tag == "none":
        raise ValueError(f"{B.label} has no compact form")
    diff = B.polynomial.difference(compact_form(B.compact_form_tag), atol)
    return not diff, diff


def b15_photon_number_form() -> BosonPolynomial:
    """``(n1 - n2)^2 / 2 - (n1 + n2) / 2`` as an operator expression."""
    n1, n2 = BosonPolynomial.number(1), BosonPolynomial.number(2)
    d = n1 - n2
    return 0.5 * (d * d) - 0.5 * (n1 + n2)


def ly_vector_rotation_check(atol: float = 1e-12) -> dict:
    """How ``(L^{23}, L^{31}, L^{12})`` of each component moves under ``ROTATION3``.

    Output-mode operators ``a' = O a`` are rewritten in input operators; the
    y-components must transform with ``O`` itself, the x- and z-components
    must not.
    """
    pairs = ((2, 3), (3, 1), (1, 2))
    out = {}
    for comp in ("y", "x", "z"):
        vec = [_L(comp, *p) for p in pairs]
        ok = True
        for i, p in enumerate(pairs):
            lhs = transform_modes(vec[i], ROTATION3)
            rhs = BosonPolynomial()
            for j in range(3):
                rhs = rhs + ROTATION3[i, j] * vec[j]
            ok &= lhs.allclose(rhs, atol)
        out[comp] = ok
    out["passed"] = out["y"] and not out["x"] and not out["z"]
    return out
