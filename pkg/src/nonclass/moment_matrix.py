"""Normally ordered moments and the matrix of moments.

Rows and columns are indexed from 1.  Column ``j`` belongs to block ``n``
(total order of its operator) and position ``l`` inside the block, with
``j = n(n+1)/2 + l + 1``; its first-row operator is ``a^{+l} a^{n-l}``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from .fock_engine import FockDensityOperator, TruncationError, monomial_matrix
from .state_library import StateSpec, cat_norm

__all__ = [
    "MAX_DIMENSION",
    "index_map",
    "block_of",
    "block_indices",
    "first_row_operator",
    "entry_exponents",
    "moment",
    "MomentMatrix",
    "build_moment_matrix",
    "matrix_from_moments",
    "analytic_moment",
    "analytic_moment_matrix",
    "gaussian_moment_closed_form",
]

MAX_DIMENSION = 6


@lru_cache(maxsize=None)
def index_map(j: int) -> tuple[int, int]:
    """1-based column index -> (block n, position l) with 0 <= l <= n."""
    if j < 1:
        raise ValueError("indices start at 1")
    n = 0
    while (n + 1) * (n + 2) // 2 < j:
        n += 1
    return n, j - 1 - n * (n + 1) // 2


def block_of(j: int) -> int:
    return index_map(j)[0]


def block_indices(n: int) -> tuple[int, ...]:
    """1-based indices belonging to block ``n``."""
    start = n * (n + 1) // 2 + 1
    return tuple(range(start, start + n + 1))


def first_row_operator(j: int) -> tuple[int, int]:
    """Exponents ``(k, l)`` of the first-row operator ``a^{+k} a^l`` of column ``j``."""
    n, l = index_map(j)
    return l, n - l


def entry_exponents(i: int, j: int) -> tuple[int, int]:
    """Exponents of the normally ordered product ``:(op_i)^+ op_j:``."""
    ki, li = first_row_operator(i)
    kj, lj = first_row_operator(j)
    return li + kj, ki + lj


def moment(rho: FockDensityOperator, k: int, l: int) -> complex:
    """``Tr(rho a^{+k} a^l)`` on a single-mode state.

    Normally ordered monomials are exact on the truncated basis, so the only
    requirement is the margin recorded by ``prepare_state`` when present.
    """
    if k < 0 or l < 0:
        raise ValueError("exponents must be non-negative")
    if rho.modes != 1:
        raise ValueError("moments are defined for single-mode states")
    margin = rho.metadata.get("margin")
    if margin is not None and margin < k + l:
        raise TruncationError(
            f"state prepared with margin {margin} but moment order is {k + l}"
        )
    if k == 0 and l == 0:
        return complex(np.trace(rho.matrix))
    d = rho.cutoff
    if k >= d or l >= d:
        return 0j
    if rho.ket is not None:
        return complex(_ket_moment(rho.ket, k, l))
    return complex(np.einsum("ij,ji->", rho.matrix, monomial_matrix(d, k, l)))


def _lowered(ket: np.ndarray, p: int) -> np.ndarray:
    """Components of ``a^p |psi>``."""
    if p == 0:
        return ket
    n = np.arange(p, len(ket))
    fac = np.exp(0.5 * (gammaln(n + 1) - gammaln(n - p + 1)))
    return fac * ket[p:]


def _ket_moment(ket: np.ndarray, k: int, l: int) -> complex:
    u = _lowered(ket, k)
    v = _lowered(ket, l)
    m = min(len(u), len(v))
    return np.vdot(u[:m], v[:m])


@dataclass
class MomentMatrix:
    """Hermitian matrix of normally ordered moments (1-based reporting)."""

    entries: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=complex)
        n = self.entries.shape[0]
        if self.entries.shape != (n, n):
            raise ValueError("moment matrix must be square")
        scale = 1.0 + float(np.max(np.abs(self.entries), initial=0.0))
        if np.max(np.abs(self.entries - self.entries.conj().T), initial=0.0) > 1e-10 * scale:
            raise ValueError("moment matrix is not Hermitian")

    @property
    def dimension(self) -> int:
        return self.entries.shape[0]

    def index_map(self) -> dict[int, tuple[int, int]]:
        return {j: index_map(j) for j in range(1, self.dimension + 1)}

    def submatrix(self, subset) -> np.ndarray:
        idx = [s - 1 for s in subset]
        return self.entries[np.ix_(idx, idx)]

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i - 1, j - 1]

    def to_json(self) -> str:
        return json.dumps(
            {
                "N": self.dimension,
                "entries": [[z.real, z.imag] for z in self.entries.ravel()],
                "provenance": self.provenance,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "MomentMatrix":
        data = json.loads(text)
        n = data["N"]
        flat = np.array([complex(re, im) for re, im in data["entries"]])
        return cls(flat.reshape(n, n), data.get("provenance", {}))


def matrix_from_moments(moment_fn, N: int, provenance: dict | None = None) -> MomentMatrix:
    """Assemble ``D_N`` from a callable ``(k, l) -> <a^{+k} a^l>``."""
    if not 1 <= N <= MAX_DIMENSION:
        raise ValueError(f"dimension must lie in 1..{MAX_DIMENSION}")
    cache: dict = {}
    m = np.empty((N, N), dtype=complex)
    for i in range(1, N + 1):
        for j in range(1, N + 1):
            k, l = entry_exponents(i, j)
            if (k, l) not in cache:
                if (l, k) in cache:
                    cache[k, l] = np.conj(cache[l, k])
                else:
                    cache[k, l] = moment_fn(k, l)
            m[i - 1, j - 1] = cache[k, l]
    return MomentMatrix(m, provenance or {})


def build_moment_matrix(rho: FockDensityOperator, N: int = 5) -> MomentMatrix:
    """Numeric ``D_N`` of a single-mode state."""
    prov = {"source": "numeric", "cutoff": rho.cutoff, "tail_mass": rho.tail_mass}
    if "spec" in rho.metadata:
        prov["state"] = rho.metadata["spec"]
    return matrix_from_moments(lambda k, l: moment(rho, k, l), N, prov)


# ---------------------------------------------------------------------------
# closed forms


def gaussian_moment_closed_form(nbar: float, r: float, k: int, l: int) -> complex:
    """Tabulated moments of the squeezed thermal state (squeezing along x)."""
    if k + l > 4:
        raise ValueError("closed forms are tabulated up to total order 4")
    if (k + l) % 2:
        return 0j
    s = nbar + 0.5
    table = {
        (0, 0): 1.0,
        (1, 1): s * math.cosh(2 * r) - 0.5,
        (0, 2): -s * math.sinh(2 * r),
        (2, 2): 0.5 * s**2 * (3 * math.cosh(4 * r) + 1) - 2 * s * math.cosh(2 * r) + 0.5,
        (1, 3): -1.5 * s**2 * math.sinh(4 * r) + 1.5 * s * math.sinh(2 * r),
        (0, 4): 1.5 * s**2 * (math.cosh(4 * r) - 1),
    }
    key = (k, l) if (k, l) in table else (l, k)
    return complex(table[key])


def _squeezed_closed_form(r: float, k: int, l: int) -> float:
    sh, ch = math.sinh(r), math.cosh(r)
    table = {
        (0, 0): 1.0,
        (1, 1): sh**2,
        (0, 2): -sh * ch,
        (2, 2): sh**2 * (ch**2 + 2 * sh**2),
        (1, 3): -3 * sh**3 * ch,
        (0, 4): 3 * sh**2 * ch**2,
    }
    if k + l > 4:
        raise ValueError("closed forms are tabulated up to total order 4")
    if (k + l) % 2:
        return 0.0
    return table[(k, l) if (k, l) in table else (l, k)]


def analytic_moment(spec: StateSpec, k: int, l: int) -> complex:
    """Closed-form ``<a^{+k} a^l>`` for centred Fock, squeezed, cat and Gaussian states.

    Squeezed and Gaussian forms take ``phi`` into account through
    ``<a^{+k} a^l>(phi) = e^{i phi (l-k)/2} <a^{+k} a^l>(0)``.
    """
    if spec.has_modifiers:
        raise ValueError("closed forms cover centred, unmodified states only")
    fam = spec.family
    if fam == "fock":
        if k != l:
            return 0j
        n = spec.n
        return complex(math.perm(n, k)) if k <= n else 0j
    if fam == "coherent":
        a = spec.alpha
        return a.conjugate() ** k * a**l
    if fam in ("cat_even", "cat_odd"):
        if (k - l) % 2:
            return 0j
        b = spec.beta
        base = b.conjugate() ** k * b**l
        if k % 2 == 0:
            return base
        parity = 1 if fam == "cat_even" else -1
        return base * cat_norm(b, -parity) / cat_norm(b, parity)
    if fam in ("squeezed", "squeezed_thermal", "thermal"):
        if fam == "squeezed":
            val = _squeezed_closed_form(spec.r, k, l)
        else:
            r = spec.r if fam == "squeezed_thermal" else 0.0
            val = gaussian_moment_closed_form(spec.nbar, r, k, l)
        phi = spec.phi if fam != "thermal" else 0.0
        return complex(val) * complex(math.cos(phi * (l - k) / 2), math.sin(phi * (l - k) / 2))
    raise ValueError(f"no closed-form moments for family {fam!r}")


def analytic_moment_matrix(spec: StateSpec, N: int = 5) -> MomentMatrix:
    return matrix_from_moments(
        lambda k, l: analytic_moment(spec, k, l),
        N,
        {"source": "analytic", "state": spec.to_dict()},
    )
