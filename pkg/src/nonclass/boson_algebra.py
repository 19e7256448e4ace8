"""Exact algebra of multi-mode bosonic ladder operators.

Polynomials are kept in canonical normal-ordered form: inside every monomial,
each mode contributes a factor ``a_m^{dag k} a_m^{l}`` and factors acting on
distinct modes commute, so a monomial is fully described by the sorted tuple
``((mode, k, l), ...)``.  Mode labels are arbitrary non-negative integers; the
multicopy code uses 1-based replica labels to mirror the usual notation.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Iterable, Mapping, Sequence
from functools import lru_cache
from types import MappingProxyType

import numpy as np

__all__ = [
    "Monomial",
    "BosonPolynomial",
    "ZERO_PRUNE",
    "multiply",
    "normal_product",
    "normal_power",
    "term_normal_order",
    "schwinger",
    "transform_modes",
    "to_output_modes",
    "permutation_sign",
    "operator_determinant",
]

# Coefficients smaller than this after floating arithmetic are dropped.
ZERO_PRUNE = 1e-14

Monomial = tuple  # tuple[tuple[int, int, int], ...] sorted by mode


def _canonical(factors: Mapping[int, tuple[int, int]]) -> Monomial:
    return tuple(
        (mode, k, l) for mode, (k, l) in sorted(factors.items()) if k or l
    )


def _as_complex(c) -> complex:
    return complex(c)


class BosonPolynomial:
    """Finite linear combination of normal-ordered bosonic monomials.

    Instances are immutable; arithmetic returns new polynomials.  ``p * q``
    is the operator product (commutators applied), while
    :func:`normal_product` gives the term-by-term normal-ordered product
    ``:p q:``.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping[Monomial, complex] | None = None):
        clean = {}
        for key, c in (terms or {}).items():
            c = _as_complex(c)
            if abs(c) >= ZERO_PRUNE:
                clean[tuple(key)] = c
        self._terms = MappingProxyType(clean)

    # -- constructors -------------------------------------------------
    @classmethod
    def identity(cls, coeff: complex = 1.0) -> "BosonPolynomial":
        return cls({(): coeff})

    @classmethod
    def zero(cls) -> "BosonPolynomial":
        return cls()

    @classmethod
    def monomial(
        cls, factors: Mapping[int, tuple[int, int]], coeff: complex = 1.0
    ) -> "BosonPolynomial":
        """Single monomial ``coeff * prod_m a_m^{dag k_m} a_m^{l_m}``."""
        for mode, (k, l) in factors.items():
            if mode < 0 or k < 0 or l < 0:
                raise ValueError("mode labels and exponents must be non-negative")
        return cls({_canonical(factors): coeff})

    @classmethod
    def a(cls, mode: int, power: int = 1) -> "BosonPolynomial":
        return cls.monomial({mode: (0, power)})

    @classmethod
    def adag(cls, mode: int, power: int = 1) -> "BosonPolynomial":
        return cls.monomial({mode: (power, 0)})

    @classmethod
    def number(cls, mode: int) -> "BosonPolynomial":
        return cls.monomial({mode: (1, 1)})

    # -- inspection ---------------------------------------------------
    @property
    def terms(self) -> Mapping[Monomial, complex]:
        return self._terms

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms.items())

    @property
    def modes(self) -> tuple[int, ...]:
        return tuple(sorted({m for key in self._terms for m, _, _ in key}))

    def degree(self) -> int:
        """Maximum total number of ladder operators in any monomial."""
        return max((sum(k + l for _, k, l in key) for key in self._terms), default=0)

    def mode_degree(self) -> int:
        """Maximum number of ladder operators acting on one mode."""
        return max(
            (k + l for key in self._terms for _, k, l in key), default=0
        )

    def is_zero(self, atol: float = 0.0) -> bool:
        return all(abs(c) <= atol for c in self._terms.values())

    # -- algebra ------------------------------------------------------
    def __add__(self, other):
        other = _coerce(other)
        out = dict(self._terms)
        for key, c in other._terms.items():
            out[key] = out.get(key, 0) + c
        return BosonPolynomial(out)

    __radd__ = __add__

    def __neg__(self):
        return BosonPolynomial({k: -c for k, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-_coerce(other))

    def __rsub__(self, other):
        return _coerce(other) - self

    def __mul__(self, other):
        if isinstance(other, BosonPolynomial):
            return multiply(self, other)
        return BosonPolynomial({k: c * other for k, c in self._terms.items()})

    def __rmul__(self, other):
        if isinstance(other, BosonPolynomial):
            return multiply(other, self)
        return BosonPolynomial({k: other * c for k, c in self._terms.items()})

    def __truediv__(self, scalar):
        return BosonPolynomial({k: c / scalar for k, c in self._terms.items()})

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative powers are undefined")
        out = BosonPolynomial.identity()
        for _ in range(n):
            out = multiply(out, self)
        return out

    def dagger(self) -> "BosonPolynomial":
        """Hermitian conjugate; normal order is preserved by the swap k <-> l."""
        return BosonPolynomial(
            {
                tuple((m, l, k) for m, k, l in key): c.conjugate()
                for key, c in self._terms.items()
            }
        )

    def relabel(self, mapping: Mapping[int, int]) -> "BosonPolynomial":
        """Rename modes; the mapping must be injective on ``self.modes``."""
        targets = [mapping.get(m, m) for m in self.modes]
        if len(set(targets)) != len(targets):
            raise ValueError("relabelling merges distinct modes")
        out = {}
        for key, c in self._terms.items():
            factors = {mapping.get(m, m): (k, l) for m, k, l in key}
            new = _canonical(factors)
            out[new] = out.get(new, 0) + c
        return BosonPolynomial(out)

    # -- comparison ---------------------------------------------------
    def difference(self, other, atol: float = 1e-12) -> dict:
        """Monomials whose coefficients differ by more than ``atol``."""
        other = _coerce(other)
        diff = {}
        for key in set(self._terms) | set(other._terms):
            d = self._terms.get(key, 0) - other._terms.get(key, 0)
            if abs(d) > atol:
                diff[key] = d
        return diff

    def allclose(self, other, atol: float = 1e-12) -> bool:
        return not self.difference(other, atol)

    def __eq__(self, other):
        if not isinstance(other, (BosonPolynomial, int, float, complex)):
            return NotImplemented
        return self.allclose(other)

    __hash__ = None

    def is_hermitian(self, atol: float = 1e-12) -> bool:
        return self.allclose(self.dagger(), atol)

    # -- serialisation ------------------------------------------------
    def to_json(self) -> list[dict]:
        rows = []
        for key in sorted(self._terms):
            c = self._terms[key]
            rows.append(
                {
                    "modes": [
                        {"mode": m, "dag_pow": k, "pow": l} for m, k, l in key
                    ],
                    "re": c.real,
                    "im": c.imag,
                }
            )
        return rows

    @classmethod
    def from_json(cls, rows: Iterable[Mapping]) -> "BosonPolynomial":
        out = {}
        for row in rows:
            factors = {f["mode"]: (f["dag_pow"], f["pow"]) for f in row["modes"]}
            key = _canonical(factors)
            out[key] = out.get(key, 0) + complex(row["re"], row["im"])
        return cls(out)

    def __repr__(self):
        return f"BosonPolynomial({self})"

    def __str__(self):
        if not self._terms:
            return "0"
        parts = []
        for key in sorted(self._terms):
            c = self._terms[key]
            ops = []
            for m, k, l in key:
                if k:
                    ops.append(f"a{m}^+" + (f"^{k}" if k > 1 else ""))
                if l:
                    ops.append(f"a{m}" + (f"^{l}" if l > 1 else ""))
            cs = f"{c.real:.6g}" if abs(c.imag) < ZERO_PRUNE else f"({c:.6g})"
            parts.append(cs + ("*" + " ".join(ops) if ops else ""))
        return " + ".join(parts)


def _coerce(x) -> BosonPolynomial:
    if isinstance(x, BosonPolynomial):
        return x
    return BosonPolynomial.identity(x)


@lru_cache(maxsize=4096)
def _single_mode_product(k: int, l: int, m: int, n: int) -> tuple:
    """(a^+k a^l)(a^+m a^n) = sum_j C(l,j) C(m,j) j! a^+(k+m-j) a^(l+n-j).

    Coefficients are exact integers.
    """
    return tuple(
        (math.comb(l, j) * math.comb(m, j) * math.factorial(j), k + m - j, l + n - j)
        for j in range(min(l, m) + 1)
    )


def _monomial_product(left: Monomial, right: Monomial) -> list[tuple[int, Monomial]]:
    lf = {m: (k, l) for m, k, l in left}
    rf = {m: (k, l) for m, k, l in right}
    expansions = []
    for mode in sorted(set(lf) | set(rf)):
        k, l = lf.get(mode, (0, 0))
        m, n = rf.get(mode, (0, 0))
        expansions.append(
            [(c, (mode, kk, ll)) for c, kk, ll in _single_mode_product(k, l, m, n)]
        )
    out = []
    for combo in itertools.product(*expansions):
        coeff = 1
        factors = []
        for c, f in combo:
            coeff *= c
            if f[1] or f[2]:
                factors.append(f)
        out.append((coeff, tuple(factors)))
    return out


def multiply(p: BosonPolynomial, q: BosonPolynomial) -> BosonPolynomial:
    """Operator product ``p q`` reduced to normal order with [a_i, a_j^+] = delta_ij."""
    out: dict = {}
    for kp, cp in p.terms.items():
        for kq, cq in q.terms.items():
            cc = cp * cq
            for n, key in _monomial_product(kp, kq):
                out[key] = out.get(key, 0) + n * cc
    return BosonPolynomial(out)


def _merge_exponents(left: Monomial, right: Monomial) -> Monomial:
    factors = {m: (k, l) for m, k, l in left}
    for m, k, l in right:
        k0, l0 = factors.get(m, (0, 0))
        factors[m] = (k0 + k, l0 + l)
    return _canonical(factors)


def normal_product(*polys: BosonPolynomial) -> BosonPolynomial:
    """Term-by-term normal-ordered product ``:p q ...:``.

    Every product of monomials is rearranged into normal order without
    generating commutator corrections.
    """
    out = BosonPolynomial.identity()
    for p in polys:
        p = _coerce(p)
        acc: dict = {}
        for k1, c1 in out.terms.items():
            for k2, c2 in p.terms.items():
                key = _merge_exponents(k1, k2)
                acc[key] = acc.get(key, 0) + c1 * c2
        out = BosonPolynomial(acc)
    return out


def normal_power(p: BosonPolynomial, n: int) -> BosonPolynomial:
    """``:p^n:`` with the normal-ordering symbol applied term by term."""
    return normal_product(*([p] * n)) if n else BosonPolynomial.identity()


def term_normal_order(terms) -> BosonPolynomial:
    """Normal-order operator words term by term, keeping coefficients.

    ``terms`` is either a :class:`BosonPolynomial` (already normal ordered,
    returned unchanged) or an iterable of ``(coeff, word)`` pairs where a
    word is a sequence of ``(mode, is_dagger)`` ladder factors in the
    written order.  Each word is rearranged with all creation operators to
    the left, without commutator terms.
    """
    if isinstance(terms, BosonPolynomial):
        return terms
    out: dict = {}
    for coeff, word in terms:
        factors: dict[int, list[int]] = {}
        for mode, is_dag in word:
            f = factors.setdefault(mode, [0, 0])
            f[0 if is_dag else 1] += 1
        key = _canonical({m: tuple(v) for m, v in factors.items()})
        out[key] = out.get(key, 0) + complex(coeff)
    return BosonPolynomial(out)


def schwinger(component: str, modes: tuple[int, int]) -> BosonPolynomial:
    """Two-mode Schwinger operator ``L_x``, ``L_y``, ``L_z`` or ``L_0``.

    With ``(k, l) = modes``::

        L_x = (a_l^+ a_k + a_k^+ a_l) / 2
        L_y = i (a_l^+ a_k - a_k^+ a_l) / 2
        L_z = (a_k^+ a_k - a_l^+ a_l) / 2
        L_0 = (a_k^+ a_k + a_l^+ a_l) / 2
    """
    k, l = modes
    if k == l:
        raise ValueError("Schwinger operators need two distinct modes")
    ak, al = BosonPolynomial.a(k), BosonPolynomial.a(l)
    akd, ald = BosonPolynomial.adag(k), BosonPolynomial.adag(l)
    comp = component.lower().removeprefix("l").removeprefix("_")
    if comp == "x":
        return 0.5 * (ald * ak + akd * al)
    if comp == "y":
        return 0.5j * (ald * ak - akd * al)
    if comp == "z":
        return 0.5 * (akd * ak - ald * al)
    if comp == "0":
        return 0.5 * (akd * ak + ald * al)
    raise ValueError(f"unknown Schwinger component {component!r}")


def _linear_form_power(coeffs: tuple, power: int) -> dict:
    """Expand (sum_j c_j x_j)^power for commuting x_j; keys are exponent tuples."""
    n = len(coeffs)
    out = {}
    for combo in itertools.combinations_with_replacement(range(n), power):
        exps = [0] * n
        for j in combo:
            exps[j] += 1
        key = tuple(exps)
        if key in out:
            continue
        multinom = math.factorial(power)
        c = 1.0 + 0j
        for j, e in enumerate(exps):
            multinom //= math.factorial(e)
            c *= coeffs[j] ** e
        if abs(c) >= ZERO_PRUNE:
            out[key] = multinom * c
    return out


def _commuting_product(parts: list[dict], n: int) -> dict:
    acc = {(0,) * n: 1.0 + 0j}
    for part in parts:
        new = {}
        for k1, c1 in acc.items():
            for k2, c2 in part.items():
                key = tuple(x + y for x, y in zip(k1, k2))
                new[key] = new.get(key, 0) + c1 * c2
        acc = {k: c for k, c in new.items() if abs(c) >= ZERO_PRUNE}
    return acc


def transform_modes(
    p: BosonPolynomial,
    u,
    modes: Sequence[int] | None = None,
) -> BosonPolynomial:
    """Substitute ``a_i -> sum_j u_ij a_j`` and ``a_i^+ -> sum_j u*_ij a_j^+``.

    ``modes`` lists the labels the rows/columns of ``u`` refer to (default
    ``1..dim``); modes of ``p`` outside that list are left untouched.  For a
    passive circuit with output operators ``a' = u a`` this rewrites an
    expression written in output operators in terms of the input ones.

    Since a normal-ordered monomial can be rearranged so that every creation
    operator precedes every annihilation operator, the substitution produces
    a normal-ordered result without commutator terms.
    """
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError("mode transformation must be a square matrix")
    dim = u.shape[0]
    modes = tuple(range(1, dim + 1)) if modes is None else tuple(modes)
    if len(modes) != dim:
        raise ValueError(
            f"matrix of dimension {dim} does not match {len(modes)} mode labels"
        )
    if len(set(modes)) != dim:
        raise ValueError("duplicate mode labels")
    index = {m: i for i, m in enumerate(modes)}
    rows = [tuple(u[i]) for i in range(dim)]
    rows_conj = [tuple(np.conj(u[i])) for i in range(dim)]

    cache: dict = {}

    def power(i, e, dag):
        key = (i, e, dag)
        if key not in cache:
            cache[key] = _linear_form_power(rows_conj[i] if dag else rows[i], e)
        return cache[key]

    out: dict = {}
    for key, c in p.terms.items():
        inside = [(index[m], k, l) for m, k, l in key if m in index]
        outside = {m: (k, l) for m, k, l in key if m not in index}
        dag = _commuting_product([power(i, k, True) for i, k, _ in inside if k], dim)
        plain = _commuting_product([power(i, l, False) for i, _, l in inside if l], dim)
        for ed, cd in dag.items():
            for ep, cp in plain.items():
                factors = dict(outside)
                for j in range(dim):
                    if ed[j] or ep[j]:
                        factors[modes[j]] = (ed[j], ep[j])
                nk = _canonical(factors)
                out[nk] = out.get(nk, 0) + c * cd * cp
    return BosonPolynomial(out)


def to_output_modes(p: BosonPolynomial, u, modes: Sequence[int] | None = None):
    """Rewrite an input-operator expression in terms of output operators ``a' = u a``."""
    u = np.asarray(u, dtype=complex)
    return transform_modes(p, u.conj().T, modes)


def permutation_sign(perm: Sequence[int]) -> int:
    sign = 1
    perm = list(perm)
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j]:
                sign = -sign
    return sign


def _group(n: int, group: str):
    perms = list(itertools.permutations(range(n)))
    if group in ("all", "all_permutations", "S"):
        return perms
    if group in ("even", "even_permutations", "P"):
        return [p for p in perms if permutation_sign(p) == 1]
    raise ValueError(f"unknown permutation group {group!r}")


def operator_determinant(
    entries: Sequence[Sequence[BosonPolynomial]],
    row_to_mode: Sequence[int],
    group: str = "all",
    template_mode: int = 0,
) -> BosonPolynomial:
    """Symmetrised Leibniz determinant of an operator matrix.

    ``entries[i][j]`` is a single-mode operator written on ``template_mode``.
    Row ``i`` is placed on mode ``row_to_mode[i]``; the result is averaged
    over the chosen permutation group acting on those mode labels, i.e.

        (1/|G|) sum_{s in G} sum_pi sgn(pi) prod_i entries[i][pi(i)] @ mode s(row_to_mode[i])

    Factors on distinct modes commute, so the product order is immaterial.
    """
    n = len(entries)
    if any(len(row) != n for row in entries):
        raise ValueError("operator matrix must be square")
    if len(row_to_mode) != n:
        raise ValueError("need one mode per row")
    if len(set(row_to_mode)) != n:
        raise ValueError("duplicate mode assignment")
    for row in entries:
        for e in row:
            if set(_coerce(e).modes) - {template_mode}:
                raise ValueError("matrix entries must act on the template mode only")

    labels = list(row_to_mode)
    placed: dict = {}

    def entry_on(i, j, mode):
        key = (i, j, mode)
        if key not in placed:
            placed[key] = _coerce(entries[i][j]).relabel({template_mode: mode})
        return placed[key]

    leibniz = [(permutation_sign(pi), pi) for pi in itertools.permutations(range(n))]
    sym = _group(n, group)
    acc = BosonPolynomial()
    for sigma in sym:
        target = [labels[sigma[i]] for i in range(n)]
        for sign, pi in leibniz:
            term = BosonPolynomial.identity(sign)
            for i in range(n):
                term = multiply(term, entry_on(i, pi[i], target[i]))
            acc = acc + term
    return acc / len(sym)
