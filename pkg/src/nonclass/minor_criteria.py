"""Principal minors of the matrix of moments and their closed forms.

A negative principal minor certifies nonclassicality.  The closed forms
below cover Fock, squeezed and cat states (pure, centred) and squeezed
thermal states, plus the change of ``d_15`` under a displacement.
"""

from __future__ import annotations

import cmath
import csv
import io
import math
from collections.abc import Iterable
from dataclasses import dataclass, field

import numpy as np

from .fock_engine import FockDensityOperator
from .moment_matrix import MomentMatrix, block_indices
from .state_library import StateSpec, cat_norm

__all__ = [
    "DETECTION_EPSILON",
    "MinorResult",
    "principal_minor",
    "minor_value",
    "is_dominant",
    "TABLE_I",
    "table_i_subsets",
    "analytic_minor",
    "gaussian_nonclassical",
    "displacement_delta_d15",
    "displacement_delta_d15_printed",
    "d1235_decompositions",
    "mandel_q",
    "CSV_HEADER",
    "results_to_csv",
]

DETECTION_EPSILON = 1e-9
IMAG_RESIDUE_TOL = 1e-9


def _subset(S) -> tuple[int, ...]:
    if isinstance(S, str):
        S = [int(c) for c in S]
    out = tuple(sorted(int(s) for s in S))
    if not out:
        raise ValueError("index set must be non-empty")
    if len(set(out)) != len(out):
        raise ValueError("index set has repeated entries")
    if out[0] < 1:
        raise ValueError("indices start at 1")
    return out


def is_dominant(S) -> bool:
    """Complete leading blocks plus any subset of the next block.

    Row/column order inside a block does not matter, so e.g. ``{1, 3}``
    counts as dominant alongside ``{1, 2}``.
    """
    S = set(_subset(S))
    n = 0
    while True:
        blk = set(block_indices(n))
        if blk <= S:
            S -= blk
            n += 1
            if not S:
                return True
            continue
        return S <= blk


@dataclass(frozen=True)
class MinorResult:
    subset: tuple[int, ...]
    value: float
    provenance: str = "numeric"
    family: str = ""
    params: dict = field(default_factory=dict)
    epsilon: float = DETECTION_EPSILON

    @property
    def verdict(self) -> str:
        return "nonclassical_detected" if self.value < -self.epsilon else "not_detected"

    @property
    def detected(self) -> bool:
        return self.value < -self.epsilon

    @property
    def dominant(self) -> bool:
        return is_dominant(self.subset)

    @property
    def label(self) -> str:
        return "d" + "".join(str(s) for s in self.subset)

    def csv_row(self) -> list:
        params = ";".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return [self.family, params, self.label, repr(self.value), self.verdict, self.provenance]


CSV_HEADER = ["family", "params", "subset", "value", "verdict", "provenance"]


def results_to_csv(results: Iterable[MinorResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in results:
        w.writerow(r.csv_row())
    return buf.getvalue()


def minor_value(M: MomentMatrix | np.ndarray, S) -> float:
    """Real determinant of the principal submatrix on 1-based ``S``."""
    S = _subset(S)
    ent = M.entries if isinstance(M, MomentMatrix) else np.asarray(M, dtype=complex)
    if S[-1] > ent.shape[0]:
        raise IndexError(f"index {S[-1]} exceeds matrix dimension {ent.shape[0]}")
    idx = [s - 1 for s in S]
    det = complex(np.linalg.det(ent[np.ix_(idx, idx)]))
    scale = 1.0 + abs(det.real)
    if abs(det.imag) > IMAG_RESIDUE_TOL * scale:
        raise ArithmeticError(
            f"principal minor {S} has imaginary residue {det.imag:.3e}"
        )
    return det.real


def principal_minor(M: MomentMatrix, S, epsilon: float = DETECTION_EPSILON) -> MinorResult:
    S = _subset(S)
    prov = M.provenance if isinstance(M, MomentMatrix) else {}
    state = prov.get("state", {})
    return MinorResult(
        S,
        minor_value(M, S),
        prov.get("source", "numeric"),
        state.get("family", ""),
        {k: v for k, v in state.items() if k != "family"},
        epsilon,
    )


# ---------------------------------------------------------------------------
# Closed forms for centred pure states.  Each row lists the equal subsets and
# a function per family: fock(n), squeezed(r) and cat(|beta|, R) where
# R = N_-/N_+ for even and N_+/N_- for odd cats (N_pm squared norms).


def _sh(r):
    return math.sinh(r)


def _ch(r):
    return math.cosh(r)


_ROWS = [
    (("12", "13"), lambda n: n, lambda r: _sh(r) ** 2, lambda b, R: b**2 * R),
    (("14", "16"), lambda n: n * (n - 1), lambda r: 2 * _sh(r) ** 4, lambda b, R: 0.0),
    (("15",), lambda n: -n, lambda r: _ch(2 * r) * _sh(r) ** 2, lambda b, R: b**4 * (1 - R**2)),
    (("23",), lambda n: n**2, lambda r: -_sh(r) ** 2, lambda b, R: b**4 * (R**2 - 1)),
    (
        ("24", "26", "34", "36"),
        lambda n: n**2 * (n - 1),
        lambda r: _sh(r) ** 4 * (_ch(r) ** 2 + 2 * _sh(r) ** 2),
        lambda b, R: b**6 * R,
    ),
    (
        ("25", "35"),
        lambda n: n**2 * (n - 1),
        lambda r: _sh(r) ** 4 * (_ch(r) ** 2 + 2 * _sh(r) ** 2),
        lambda b, R: b**6 * R,
    ),
    (
        ("45", "56"),
        lambda n: n**2 * (n - 1) ** 2,
        lambda r: 0.5 * (5 - 3 * _ch(2 * r)) * _sh(r) ** 4,
        lambda b, R: b**8 * (1 - R**2),
    ),
    (
        ("46",),
        lambda n: n**2 * (n - 1) ** 2,
        lambda r: -2 * (1 + 3 * _ch(2 * r)) * _sh(r) ** 4,
        lambda b, R: 0.0,
    ),
    (("123",), lambda n: n**2, lambda r: -_sh(r) ** 2, lambda b, R: b**4 * (R**2 - 1)),
    (
        ("124", "126", "134", "136"),
        lambda n: n**2 * (n - 1),
        lambda r: 2 * _sh(r) ** 6,
        lambda b, R: 0.0,
    ),
    (
        ("125", "135"),
        lambda n: -(n**2),
        lambda r: _sh(r) ** 4 * _ch(2 * r),
        lambda b, R: b**6 * R * (1 - R**2),
    ),
    (("145", "156"), lambda n: -(n**2) * (n - 1), lambda r: -2 * _sh(r) ** 6, lambda b, R: 0.0),
    (
        ("146",),
        lambda n: n**2 * (n - 1) ** 2,
        lambda r: -4 * _ch(2 * r) * _sh(r) ** 4,
        lambda b, R: 0.0,
    ),
    (
        ("234", "236"),
        lambda n: n**3 * (n - 1),
        lambda r: 0.5 * (1 - 3 * _ch(2 * r)) * _sh(r) ** 4,
        lambda b, R: b**8 * (R**2 - 1),
    ),
    (
        ("235",),
        lambda n: n**3 * (n - 1),
        lambda r: -_sh(r) ** 4 * (_ch(r) ** 2 + 2 * _sh(r) ** 2),
        lambda b, R: b**8 * (R**2 - 1),
    ),
    (
        ("245", "256", "345", "356"),
        lambda n: n**3 * (n - 1) ** 2,
        lambda r: 0.5 * (5 - 3 * _ch(2 * r)) * _sh(r) ** 6,
        lambda b, R: b**10 * R * (1 - R**2),
    ),
    (
        ("246", "346"),
        lambda n: n**3 * (n - 1) ** 2,
        lambda r: -2 * (1 + 3 * _ch(2 * r)) * _sh(r) ** 6,
        lambda b, R: 0.0,
    ),
    (("456",), lambda n: n**3 * (n - 1) ** 3, lambda r: -8 * _sh(r) ** 6, lambda b, R: 0.0),
    (("1234",), lambda n: n**3 * (n - 1), lambda r: -2 * _sh(r) ** 6, lambda b, R: 0.0),
    (
        ("1235",),
        lambda n: -(n**3),
        lambda r: -_ch(2 * r) * _sh(r) ** 4,
        lambda b, R: -(b**8) * (R**2 - 1) ** 2,
    ),
    (("1456",), lambda n: -(n**3) * (n - 1) ** 2, lambda r: -4 * _sh(r) ** 6, lambda b, R: 0.0),
    (("12345",), lambda n: -(n**4) * (n - 1), lambda r: 2 * _sh(r) ** 8, lambda b, R: 0.0),
]

TABLE_I: dict[tuple[int, ...], tuple] = {}
for _subsets, _f, _s, _c in _ROWS:
    for _name in _subsets:
        TABLE_I[_subset(_name)] = (_f, _s, _c)


def table_i_subsets(rows_only: bool = False) -> list[tuple[int, ...]]:
    """All tabulated subsets, or only the first subset of every row."""
    if rows_only:
        return [_subset(names[0]) for names, *_ in _ROWS]
    return sorted(TABLE_I, key=lambda s: (len(s), s))


def _gaussian_table(nbar: float, r: float, S: tuple[int, ...]) -> float:
    g = 1 + 2 * nbar
    d15 = 0.25 * (1 - 2 * g * math.cosh(2 * r) + g**2 * math.cosh(4 * r))
    d23 = 0.5 + nbar + nbar**2 - 0.5 * g * math.cosh(2 * r)
    if S == (1, 5):
        return d15
    if S in ((2, 3), (1, 2, 3)):
        return d23
    if S == (1, 2, 3, 5):
        return d15 * d23
    raise KeyError(S)


def analytic_minor(family: str, params: dict | StateSpec, S) -> float:
    """Tabulated closed form of ``d_S`` for a centred state."""
    if isinstance(params, StateSpec):
        spec = params
        family = spec.family
        params = {"n": spec.n, "r": spec.r, "beta": spec.beta, "nbar": spec.nbar}
    S = _subset(S)
    if family in ("squeezed_thermal", "thermal"):
        r = params.get("r", 0.0) if family == "squeezed_thermal" else 0.0
        try:
            return _gaussian_table(params.get("nbar", 0.0), r, S)
        except KeyError:
            raise KeyError(f"no closed form for d{''.join(map(str, S))} of {family}") from None
    if S not in TABLE_I:
        raise KeyError(f"no closed form for d{''.join(map(str, S))}")
    f_fock, f_sq, f_cat = TABLE_I[S]
    if family == "fock":
        return float(f_fock(params["n"]))
    if family == "squeezed":
        return float(f_sq(params["r"]))
    if family in ("cat_even", "cat_odd"):
        beta = complex(params["beta"])
        pos, neg = cat_norm(beta, 1), cat_norm(beta, -1)
        R = neg / pos if family == "cat_even" else pos / neg
        return float(f_cat(abs(beta), R))
    raise KeyError(f"no closed forms for family {family!r}")


def gaussian_nonclassical(nbar: float, r: float) -> bool:
    """Necessary and sufficient nonclassicality test of a squeezed thermal state."""
    if nbar < 0 or r < 0:
        raise ValueError("nbar and r must be non-negative")
    return (nbar + 0.5) * math.exp(-2 * r) < 0.5


def displacement_delta_d15(family: str, params: dict, alpha: complex) -> float:
    """Shift of ``d_15`` when a centred state is displaced by ``alpha``.

    For a centred state with vanishing odd moments the shift is
    ``2|alpha|^2 <n> + 2 Re(alpha*^2 <a^2>)``.  Squeezed states use the
    phase ``psi`` of ``<a^2>`` (``psi = phi + pi`` for squeezing phase
    ``phi``); cats use ``theta_beta = arg(beta)``.
    """
    alpha = complex(alpha)
    a2 = abs(alpha) ** 2
    ta = cmath.phase(alpha)
    if family == "fock":
        return 2 * params["n"] * a2
    if family == "squeezed":
        r = params["r"]
        psi = params.get("psi", params.get("phi", 0.0) + math.pi)
        return 2 * math.sinh(r) * a2 * (math.cosh(r) * math.cos(2 * ta - psi) + math.sinh(r))
    if family in ("cat_odd", "cat_even"):
        beta = complex(params["beta"])
        b2 = abs(beta) ** 2
        tb = cmath.phase(beta)
        pos, neg = cat_norm(beta, 1), cat_norm(beta, -1)
        R = pos / neg if family == "cat_odd" else neg / pos
        return 2 * a2 * b2 * (math.cos(2 * ta - 2 * tb) + R)
    raise ValueError(f"no displacement formula for family {family!r}")


def displacement_delta_d15_printed(family: str, params: dict, alpha: complex) -> float:
    """Same as :func:`displacement_delta_d15` except for the even cat, where the
    sign of the cosine term is flipped (the form sometimes quoted in print)."""
    if family != "cat_even":
        return displacement_delta_d15(family, params, alpha)
    alpha = complex(alpha)
    beta = complex(params["beta"])
    R = cat_norm(beta, -1) / cat_norm(beta, 1)
    return 2 * abs(alpha) ** 2 * abs(beta) ** 2 * (
        R - math.cos(2 * cmath.phase(alpha) - 2 * cmath.phase(beta))
    )


def d1235_decompositions(M: MomentMatrix, centred_tol: float = 1e-10) -> dict:
    """Direct ``d_1235`` and three rewritings valid for centred states.

    Returns ``direct``, ``cofactor`` (``d_235 - <n>^2 d_23``), ``block``
    (``d_23 (d_15 - c D_23^{-1} b)``, ``None`` when ``D_23`` is singular),
    ``product`` (``d_23 d_15 - x``) and ``x``.
    """
    if M.dimension < 5:
        raise ValueError("need the moment matrix up to index 5")
    if abs(M[1, 2]) > centred_tol:
        raise ValueError(f"state is not centred: |<a>| = {abs(M[1, 2]):.3e}")
    n = M[2, 2]
    a2 = M[3, 2]  # <a^2>
    ad2 = M[2, 3]  # <a^+2>
    ad2a = M[2, 5]  # <a^+2 a>
    ada2 = M[3, 5]  # <a^+ a^2>
    d23 = minor_value(M, (2, 3))
    d15 = minor_value(M, (1, 5))
    d235 = minor_value(M, (2, 3, 5))
    x = 2 * n * ad2a * ada2 - ad2 * ada2**2 - a2 * ad2a**2
    if abs(x.imag) > IMAG_RESIDUE_TOL * (1 + abs(x.real)):
        raise ArithmeticError(f"x has imaginary residue {x.imag:.3e}")
    out = {
        "direct": minor_value(M, (1, 2, 3, 5)),
        "cofactor": float((d235 - n**2 * d23).real),
        "product": float(d23 * d15 - x.real),
        "x": float(x.real),
        "block": None,
        "block_singular": False,
    }
    A = M.submatrix((2, 3))
    if abs(d23) > 1e-12 * (1 + np.max(np.abs(A))) ** 2:
        c = np.array([ada2, ad2a])
        b = np.array([ad2a, ada2])
        schur = c @ np.linalg.solve(A, b)
        out["block"] = float((d23 * (d15 - schur)).real)
    else:
        out["block_singular"] = True
    return out


def mandel_q(rho: FockDensityOperator) -> float:
    """Mandel parameter ``(Var n - <n>) / <n>`` from the photon-number distribution."""
    if rho.modes != 1:
        raise ValueError("single-mode state expected")
    p = np.diag(rho.matrix).real
    n = np.arange(len(p))
    mean = float(p @ n)
    var = float(p @ n**2) - mean**2
    if mean <= 0:
        raise ZeroDivisionError("Mandel parameter undefined for the vacuum")
    return (var - mean) / mean
