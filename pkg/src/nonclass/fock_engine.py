"""Truncated Fock-space backend.

Dense numpy matrices on per-mode cutoffs ``d`` (levels ``0..d-1``).  Normal
ordered monomials ``a^{+k} a^l`` have exact matrix elements on the truncated
basis, because ``a^l`` only lowers and the subsequent ``a^{+k}`` ends inside
the space whenever the matrix element is addressable at all.  Truncation
error therefore only enters through the state constructors.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache, reduce
from collections.abc import Sequence

import numpy as np

from .boson_algebra import BosonPolynomial

log = logging.getLogger(__name__)

__all__ = [
    "ResourceError",
    "TruncationError",
    "FockDensityOperator",
    "ladder",
    "monomial_matrix",
    "eval_polynomial",
    "expectation",
    "tensor_power",
    "purity",
    "DEFAULT_MEMORY_BUDGET",
    "product_expectation",
    "replica_statevector_expectation",
]

# Bytes allowed for one dense operator/density matrix.
DEFAULT_MEMORY_BUDGET = 512 * 2**20

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-9
EIGEN_TOL = 1e-10
# Skip the eigenvalue check above this matrix dimension (cost is cubic).
EIGEN_CHECK_MAX_DIM = 2048


class ResourceError(MemoryError):
    """A dense object would exceed the configured memory budget."""


class TruncationError(ValueError):
    """A computation needs more Fock levels than the state provides."""


@dataclass(frozen=True, eq=False)
class FockDensityOperator:
    """Density matrix on ``modes`` modes, each truncated at ``cutoff`` levels.

    ``tail_mass`` is the probability weight lost to truncation (before any
    explicit renormalisation, which is recorded in ``metadata``).  ``ket`` is
    kept for pure states so that replica computations can stay in O(d^k)
    memory.
    """

    matrix: np.ndarray
    cutoff: int
    modes: int = 1
    tail_mass: float = 0.0
    ket: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", mat)
        dim = self.cutoff**self.modes
        if mat.shape != (dim, dim):
            raise ValueError(
                f"matrix shape {mat.shape} does not match cutoff {self.cutoff} "
                f"on {self.modes} mode(s)"
            )
        if self.tail_mass < 0:
            raise ValueError("tail mass must be non-negative")
        scale = max(1.0, float(np.max(np.abs(mat))) if mat.size else 1.0)
        if np.max(np.abs(mat - mat.conj().T), initial=0.0) > HERMITIAN_TOL * scale:
            raise ValueError("density matrix is not Hermitian")
        tr = np.trace(mat).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"trace {tr!r} outside [1-1e-9, 1+1e-9]")
        if dim <= EIGEN_CHECK_MAX_DIM:
            lo = np.linalg.eigvalsh(mat)[0]
            if lo < -EIGEN_TOL:
                raise ValueError(f"negative eigenvalue {lo:.3e} in density matrix")

    @classmethod
    def from_ket(cls, ket, cutoff: int, modes: int = 1, tail_mass: float = 0.0, **meta):
        ket = np.asarray(ket, dtype=complex)
        return cls(np.outer(ket, ket.conj()), cutoff, modes, tail_mass, ket, dict(meta))

    @property
    def dim(self) -> int:
        return self.cutoff**self.modes

    @property
    def is_pure(self) -> bool:
        return self.ket is not None

    def photon_distribution(self) -> np.ndarray:
        """Diagonal of the density matrix (single mode: P(n), n < cutoff)."""
        return np.clip(np.diag(self.matrix).real, 0.0, None)


@lru_cache(maxsize=256)
def _ladder_cached(d: int):
    a = np.diag(np.sqrt(np.arange(1, d, dtype=float)), k=1).astype(complex)
    a.setflags(write=False)
    ad = a.conj().T.copy()
    ad.setflags(write=False)
    return a, ad


def ladder(d: int) -> tuple[np.ndarray, np.ndarray]:
    """Annihilation and creation matrices on levels ``0..d-1``."""
    if d < 2:
        raise ValueError("cutoff must be at least 2")
    return _ladder_cached(d)


@lru_cache(maxsize=1024)
def _monomial_cached(d: int, k: int, l: int) -> np.ndarray:
    a, ad = ladder(d)
    m = np.linalg.matrix_power(ad, k) @ np.linalg.matrix_power(a, l)
    m.setflags(write=False)
    return m


def monomial_matrix(d: int, k: int, l: int) -> np.ndarray:
    """Matrix of ``a^{+k} a^l`` at cutoff ``d`` (exact on the truncated basis)."""
    return _monomial_cached(max(d, 2), k, l)[:d, :d]


def _mode_positions(p: BosonPolynomial, modes) -> dict[int, int]:
    labels = list(range(1, modes + 1)) if isinstance(modes, int) else list(modes)
    pos = {m: i for i, m in enumerate(labels)}
    missing = set(p.modes) - set(pos)
    if missing:
        raise ValueError(f"polynomial acts on modes {sorted(missing)} outside {labels}")
    return pos, len(labels)


def eval_polynomial(p: BosonPolynomial, cutoff: int, modes=1) -> np.ndarray:
    """Dense matrix of ``p`` on the tensor product of ``modes`` truncated modes.

    ``modes`` is either a count (labels ``1..modes``) or the explicit list of
    labels in tensor order.
    """
    pos, m = _mode_positions(p, modes)
    dim = cutoff**m
    if dim * dim * 16 > DEFAULT_MEMORY_BUDGET:
        raise ResourceError(f"operator of dimension {dim} exceeds memory budget")
    eye = np.eye(cutoff, dtype=complex)
    out = np.zeros((dim, dim), dtype=complex)
    for key, c in p.terms.items():
        factors = [eye] * m
        for mode, k, l in key:
            factors[pos[mode]] = monomial_matrix(cutoff, k, l)
        out += c * reduce(np.kron, factors)
    return out


def expectation(rho: FockDensityOperator, op: np.ndarray) -> complex:
    """``Tr(rho op)``; imaginary residue is checked for Hermitian ``op``."""
    op = np.asarray(op)
    if op.shape != rho.matrix.shape:
        raise ValueError(f"operator shape {op.shape} vs state {rho.matrix.shape}")
    val = np.einsum("ij,ji->", rho.matrix, op)
    if np.allclose(op, op.conj().T, atol=1e-12):
        if abs(val.imag) > 1e-9 * (1 + abs(val.real)):
            raise ArithmeticError(
                f"Hermitian expectation has imaginary part {val.imag:.3e}"
            )
    return complex(val)


def tensor_power(
    rho: FockDensityOperator, k: int, budget: int = DEFAULT_MEMORY_BUDGET
) -> FockDensityOperator:
    """``rho`` tensored with itself ``k`` times (2 <= k <= 4)."""
    if not 1 <= k <= 4:
        raise ValueError("replica count must be between 1 and 4")
    dim = rho.dim**k
    need = dim * dim * 16
    if need > budget:
        raise ResourceError(
            f"{k} replicas need a {dim}x{dim} density matrix "
            f"({need / 2**20:.0f} MiB > budget {budget / 2**20:.0f} MiB)"
        )
    mat = reduce(np.kron, [rho.matrix] * k)
    ket = reduce(np.kron, [rho.ket] * k) if rho.ket is not None else None
    tail = 1.0 - (1.0 - rho.tail_mass) ** k
    return FockDensityOperator(
        mat, rho.cutoff, rho.modes * k, tail, ket, {"replicas": k, **rho.metadata}
    )


def purity(rho: FockDensityOperator) -> float:
    return float(np.einsum("ij,ji->", rho.matrix, rho.matrix).real)


def product_expectation(
    states: Sequence[FockDensityOperator], p: BosonPolynomial, modes=None
) -> complex:
    """Expectation of ``p`` on a product of single-mode states.

    ``Tr[(rho_1 x ... x rho_k) prod_i O_i] = prod_i Tr(rho_i O_i)`` so each
    monomial costs one single-mode trace per factor and no replica tensor is
    ever formed.
    """
    labels = list(range(1, len(states) + 1)) if modes is None else list(modes)
    pos = {m: i for i, m in enumerate(labels)}
    missing = set(p.modes) - set(pos)
    if missing:
        raise ValueError(f"polynomial acts on modes {sorted(missing)} outside {labels}")
    cache: dict = {}

    def single(i, k, l):
        key = (i, k, l)
        if key not in cache:
            st = states[i]
            cache[key] = np.einsum(
                "ij,ji->", st.matrix, monomial_matrix(st.cutoff, k, l)
            )
        return cache[key]

    total = 0j
    for key, c in p.terms.items():
        v = c
        for mode, k, l in key:
            v *= single(pos[mode], k, l)
        total += v
    return complex(total)


def replica_statevector_expectation(
    ket: np.ndarray, copies: int, p: BosonPolynomial, modes=None
) -> complex:
    """``<psi|^{(x)k} p |psi>^{(x)k}`` by mode-wise application on the replica tensor.

    For each normal-ordered monomial only annihilators are applied:
    ``<psi| a^{+k} a^l |psi> = <a^k psi | a^l psi>`` mode by mode, which is
    exact at any cutoff.  Memory is O(d^copies).
    """
    ket = np.asarray(ket, dtype=complex)
    d = ket.shape[0]
    labels = list(range(1, copies + 1)) if modes is None else list(modes)
    pos = {m: i for i, m in enumerate(labels)}
    missing = set(p.modes) - set(pos)
    if missing:
        raise ValueError(f"polynomial acts on modes {sorted(missing)} outside {labels}")
    psi = reduce(np.multiply.outer, [ket] * copies)
    a = ladder(max(d, 2))[0][:d, :d]

    def apply(powers):
        out = psi
        for axis, n in enumerate(powers):
            if n:
                mat = np.linalg.matrix_power(a, n)
                out = np.moveaxis(np.tensordot(mat, out, axes=([1], [axis])), 0, axis)
        return out

    total = 0j
    cache: dict = {}
    for key, c in p.terms.items():
        dag = [0] * copies
        plain = [0] * copies
        for mode, k, l in key:
            dag[pos[mode]] = k
            plain[pos[mode]] = l
        dk, pk = tuple(dag), tuple(plain)
        for t in (dk, pk):
            if t not in cache:
                cache[t] = apply(t)
        total += c * np.vdot(cache[dk], cache[pk])
    return complex(total)
