"""Single-mode state families with declared truncation tails.

Modifiers are applied in a fixed order: photon addition/subtraction, then
phase rotation, then displacement.
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import asdict, dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.special import gammaln
from scipy.stats import poisson

from .fock_engine import FockDensityOperator, ladder

log = logging.getLogger(__name__)

__all__ = [
    "FAMILIES",
    "StateSpec",
    "cat_norm",
    "make_state",
    "prepare_state",
    "auto_cutoff",
    "photon_tail",
    "apply_annihilation_to_cat",
]

FAMILIES = (
    "fock",
    "coherent",
    "squeezed",
    "cat_even",
    "cat_odd",
    "thermal",
    "squeezed_thermal",
    "superposition012",
)

_MAX_CUTOFF = 2000
# Levels added per unit of moment order.  Truncation errors of off-diagonal
# moments come from coherences between kept and dropped levels, i.e. they are
# first order in the amplitude tail, so one level per order is not enough.
MARGIN_PER_ORDER = 2


def _cplx(x) -> complex:
    if isinstance(x, (list, tuple)):
        return complex(x[0], x[1])
    return complex(x)


@dataclass(frozen=True)
class StateSpec:
    """Family name, its parameters and optional modifiers.

    Parameters not used by a family are ignored.  ``amplitudes`` holds the
    real coefficients (a, b, c) of ``a|0> + b|1> + c|2>``.
    """

    family: str
    n: int = 0
    alpha: complex = 0j
    r: float = 0.0
    phi: float = 0.0
    beta: complex = 0j
    nbar: float = 0.0
    amplitudes: tuple = (1.0, 0.0, 0.0)
    displacement: complex = 0j
    rotation: float = 0.0
    photon_add: int = 0
    photon_subtract: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown state family {self.family!r}")
        object.__setattr__(self, "alpha", _cplx(self.alpha))
        object.__setattr__(self, "beta", _cplx(self.beta))
        object.__setattr__(self, "displacement", _cplx(self.displacement))
        object.__setattr__(self, "amplitudes", tuple(float(x) for x in self.amplitudes))
        if self.n < 0 or self.r < 0 or self.nbar < 0:
            raise ValueError("n, r and nbar must be non-negative")
        if self.photon_add < 0 or self.photon_subtract < 0:
            raise ValueError("photon addition/subtraction counts must be non-negative")
        if self.family == "superposition012":
            if len(self.amplitudes) != 3:
                raise ValueError("superposition012 needs three amplitudes")
            norm = sum(x * x for x in self.amplitudes)
            if abs(norm - 1.0) > 1e-12:
                raise ValueError(f"amplitudes square-sum to {norm}, not 1")
        if self.family == "cat_odd" and self.beta == 0:
            raise ValueError("odd cat state is undefined at beta = 0")

    @property
    def is_gaussian_mixed(self) -> bool:
        return self.family in ("thermal", "squeezed_thermal")

    @property
    def has_modifiers(self) -> bool:
        return bool(
            self.displacement or self.rotation or self.photon_add or self.photon_subtract
        )

    def params(self) -> dict:
        """Parameters relevant to the family (for reporting)."""
        keys = {
            "fock": ("n",),
            "coherent": ("alpha",),
            "squeezed": ("r", "phi"),
            "cat_even": ("beta",),
            "cat_odd": ("beta",),
            "thermal": ("nbar",),
            "squeezed_thermal": ("nbar", "r", "phi"),
            "superposition012": ("amplitudes",),
        }[self.family]
        out = {k: getattr(self, k) for k in keys}
        for k in ("displacement", "rotation", "photon_add", "photon_subtract"):
            if getattr(self, k):
                out[k] = getattr(self, k)
        return out

    def label(self) -> str:
        parts = []
        for k, v in self.params().items():
            if isinstance(v, complex):
                v = f"{v.real:g}{v.imag:+g}j" if v.imag else f"{v.real:g}"
            elif isinstance(v, tuple):
                v = "/".join(f"{x:g}" for x in v)
            elif isinstance(v, float):
                v = f"{v:g}"
            parts.append(f"{k}={v}")
        return f"{self.family}(" + ",".join(parts) + ")"

    def to_dict(self) -> dict:
        out = {"family": self.family}
        for k, v in asdict(self).items():
            if k == "family":
                continue
            default = getattr(StateSpec, k, None) if k != "amplitudes" else (1.0, 0.0, 0.0)
            if v == default:
                continue
            if isinstance(v, complex):
                v = [v.real, v.imag]
            elif isinstance(v, tuple):
                v = list(v)
            out[k] = v
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "StateSpec":
        data = dict(data)
        family = data.pop("family")
        params = data.pop("params", {})
        modifiers = data.pop("modifiers", {})
        merged = {**params, **modifiers, **data}
        aliases = {"alpha_d": "displacement", "theta": "rotation", "n_bar": "nbar"}
        merged = {aliases.get(k, k): v for k, v in merged.items()}
        if "amplitudes" in merged:
            merged["amplitudes"] = tuple(merged["amplitudes"])
        return cls(family=family, **merged)

    def with_(self, **changes) -> "StateSpec":
        return replace(self, **changes)


def cat_norm(beta: complex, parity: int) -> float:
    """Squared norm of ``|beta> + parity |-beta>``: ``2 (1 + parity e^{-2|beta|^2})``."""
    return 2.0 * (1.0 + parity * math.exp(-2.0 * abs(beta) ** 2))


def apply_annihilation_to_cat(parity: str, beta: complex) -> tuple[str, complex]:
    """``a |c_pm> = beta sqrt(N_mp / N_pm) |c_mp>``; returns (new parity, factor)."""
    if beta == 0:
        raise ValueError("cat relation needs beta != 0")
    sgn = {"even": 1, "odd": -1}[parity]
    flipped = "odd" if parity == "even" else "even"
    factor = beta * math.sqrt(cat_norm(beta, -sgn) / cat_norm(beta, sgn))
    return flipped, factor


# ---------------------------------------------------------------------------
# analytic Fock amplitudes / populations


def _coherent_amplitudes(alpha: complex, d: int) -> np.ndarray:
    n = np.arange(d)
    if alpha == 0:
        out = np.zeros(d, dtype=complex)
        out[0] = 1.0
        return out
    logmag = -0.5 * abs(alpha) ** 2 + n * math.log(abs(alpha)) - 0.5 * gammaln(n + 1)
    return np.exp(logmag) * np.exp(1j * n * cmath.phase(alpha))


def _squeezed_amplitudes(r: float, phi: float, d: int) -> np.ndarray:
    out = np.zeros(d, dtype=complex)
    out[0] = 1.0 / math.sqrt(math.cosh(r))
    if r == 0:
        return out
    t = math.tanh(r)
    k = np.arange((d + 1) // 2)
    logmag = (
        k * math.log(t)
        + 0.5 * gammaln(2 * k + 1)
        - k * math.log(2.0)
        - gammaln(k + 1)
        - 0.5 * math.log(math.cosh(r))
    )
    vals = np.exp(logmag) * (-np.exp(1j * phi)) ** k
    out[0 : 2 * len(k) : 2] = vals[: len(out[0::2])]
    return out


def _cat_amplitudes(beta: complex, parity: int, d: int) -> np.ndarray:
    coh = _coherent_amplitudes(beta, d)
    sign = (-1.0) ** np.arange(d)
    return (coh + parity * sign * coh) / math.sqrt(cat_norm(beta, parity))


def _thermal_populations(nbar: float, d: int) -> np.ndarray:
    if nbar == 0:
        p = np.zeros(d)
        p[0] = 1.0
        return p
    q = nbar / (nbar + 1.0)
    return (1.0 - q) * q ** np.arange(d)


def _squeezed_tail(r: float, d: int) -> float:
    if r == 0:
        return 0.0 if d >= 1 else 1.0
    t2 = math.tanh(r) ** 2
    # |c_k|^2 = t^{2k} (2k)! / (4^k k!^2 cosh r); sum the geometric-like tail directly
    k0 = (d + 1) // 2
    total = 0.0
    k = k0
    while True:
        term = math.exp(
            k * math.log(t2) + gammaln(2 * k + 1) - 2 * k * math.log(2) - 2 * gammaln(k + 1)
        ) / math.cosh(r)
        total += term
        if term < 1e-18 * max(total, 1e-300) or (k > k0 + 10 and term < 1e-30):
            break
        k += 1
        if k > k0 + 200000:
            break
    return total


def photon_tail(spec: StateSpec, d: int) -> float:
    """Probability of ``n >= d`` for the unmodified family (analytic where possible)."""
    fam = spec.family
    if fam == "fock":
        return 0.0 if d > spec.n else 1.0
    if fam == "coherent":
        return float(poisson.sf(d - 1, abs(spec.alpha) ** 2))
    if fam == "squeezed":
        return _squeezed_tail(spec.r, d)
    if fam in ("cat_even", "cat_odd"):
        parity = 1 if fam == "cat_even" else -1
        mu = abs(spec.beta) ** 2
        # P(n) = 2 e^{-mu} mu^n / n! / N for n of matching parity
        n = np.arange(d, d + 400)
        mask = ((n % 2 == 0) if parity == 1 else (n % 2 == 1))
        logp = math.log(2.0) - mu + n * math.log(mu) - gammaln(n + 1) - math.log(cat_norm(spec.beta, parity))
        return float(np.sum(np.exp(logp[mask])))
    if fam == "thermal":
        if spec.nbar == 0:
            return 0.0
        return (spec.nbar / (spec.nbar + 1.0)) ** d
    if fam == "superposition012":
        a, b, c = spec.amplitudes
        return float(sum(x * x for i, x in enumerate((a, b, c)) if i >= d))
    if fam == "squeezed_thermal":
        return _numeric_tail(spec.with_(displacement=0j, rotation=0.0, photon_add=0, photon_subtract=0), d)
    raise ValueError(fam)


_NUMERIC_DIST_CACHE: dict = {}


def _numeric_distribution(spec: StateSpec) -> np.ndarray:
    """Photon-number distribution built at a generous cutoff (numeric tails)."""
    key = spec
    if key in _NUMERIC_DIST_CACHE:
        return _NUMERIC_DIST_CACHE[key]
    d = 32
    while True:
        rho = _build(spec, d)
        p = np.diag(rho).real
        if p[-8:].sum() < 1e-17 or d >= _MAX_CUTOFF:
            break
        d *= 2
    _NUMERIC_DIST_CACHE[key] = p
    return p


def _numeric_tail(spec: StateSpec, d: int) -> float:
    p = _numeric_distribution(spec)
    return float(max(p[d:].sum(), 0.0)) if d < len(p) else 0.0


def _base_support(spec: StateSpec, tail_tol: float) -> int:
    """Smallest cutoff whose unmodified-family tail is at most ``tail_tol``."""
    fam = spec.family
    if fam == "fock":
        return spec.n + 1
    if fam == "superposition012":
        a, b, c = spec.amplitudes
        return 3 if c else (2 if b else 1)
    d = 1
    step = 1
    # coarse doubling then linear refinement
    while photon_tail(spec, d) > tail_tol:
        d += step
        step = min(step * 2, 64)
        if d > _MAX_CUTOFF:
            raise ValueError(f"no cutoff below {_MAX_CUTOFF} reaches tail {tail_tol}")
    lo = max(1, d - step)
    for cand in range(lo, d + 1):
        if photon_tail(spec, cand) <= tail_tol:
            return cand
    return d


def auto_cutoff(spec: StateSpec, tail_tol: float = 1e-12, order: int = 0) -> int:
    """Smallest cutoff with declared tail <= ``tail_tol``, plus ``order`` margin levels.

    The margin (``MARGIN_PER_ORDER * order`` levels) covers ladder operators
    of total order ``order`` displacing the support of the state.
    """
    if not 0 < tail_tol <= 1e-3:
        raise ValueError("tail tolerance must lie in (0, 1e-3]")
    if order < 0:
        raise ValueError("order margin must be non-negative")
    if spec.has_modifiers and (spec.displacement or spec.photon_add or spec.photon_subtract):
        p = _numeric_distribution(spec)
        tails = np.cumsum(p[::-1])[::-1]
        hits = np.nonzero(tails <= tail_tol)[0]
        d = int(hits[0]) if len(hits) else len(p)
        d = max(d, 1)
    else:
        d = _base_support(spec, tail_tol)
    return max(d + MARGIN_PER_ORDER * order, 2)


# ---------------------------------------------------------------------------
# construction


def _exp_antihermitian(K: np.ndarray) -> np.ndarray:
    """``exp(K)`` for anti-Hermitian ``K`` through the eigenbasis of ``-iK``."""
    H = -1j * K
    w, V = np.linalg.eigh(0.5 * (H + H.conj().T))
    U = (V * np.exp(1j * w)) @ V.conj().T
    U.flags.writeable = False  # shared through the cache
    return U


@lru_cache(maxsize=32)
def _squeeze_unitary(r: float, phi: float, d: int) -> np.ndarray:
    a, ad = ladder(d)
    z = r * cmath.exp(1j * phi)
    return _exp_antihermitian(0.5 * (z.conjugate() * (a @ a) - z * (ad @ ad)))


@lru_cache(maxsize=32)
def _displacement_unitary(alpha: complex, d: int) -> np.ndarray:
    a, ad = ladder(d)
    return _exp_antihermitian(alpha * ad - alpha.conjugate() * a)


def _base_matrix(spec: StateSpec, d: int) -> tuple[np.ndarray, np.ndarray | None]:
    fam = spec.family
    ket = None
    if fam == "fock":
        if spec.n >= d:
            raise ValueError(f"cutoff {d} below Fock index {spec.n}")
        ket = np.zeros(d, dtype=complex)
        ket[spec.n] = 1.0
    elif fam == "coherent":
        ket = _coherent_amplitudes(spec.alpha, d)
    elif fam == "squeezed":
        ket = _squeezed_amplitudes(spec.r, spec.phi, d)
    elif fam in ("cat_even", "cat_odd"):
        ket = _cat_amplitudes(spec.beta, 1 if fam == "cat_even" else -1, d)
    elif fam == "superposition012":
        amps = spec.amplitudes
        needed = max((i for i, x in enumerate(amps) if x), default=0)
        if needed >= d:
            raise ValueError(f"cutoff {d} below Fock index {needed}")
        ket = np.zeros(d, dtype=complex)
        ket[:3] = amps[: min(3, d)]
    elif fam == "thermal":
        return np.diag(_thermal_populations(spec.nbar, d)).astype(complex), None
    elif fam == "squeezed_thermal":
        work = 2 * d + 40
        pops = _thermal_populations(spec.nbar, work)
        if not spec.r:
            return np.diag(pops[:d]).astype(complex), None
        top = _squeeze_unitary(spec.r, spec.phi, work)[:d]
        return (top * pops) @ top.conj().T, None
    else:  # pragma: no cover - guarded by StateSpec
        raise ValueError(fam)
    return np.outer(ket, ket.conj()), ket


def _build(spec: StateSpec, d: int) -> np.ndarray:
    """Unnormalised, truncated density matrix at cutoff ``d`` (all modifiers)."""
    return _build_with_ket(spec, d)[0]


def _build_with_ket(spec: StateSpec, d: int):
    extra = 0
    if spec.photon_add:
        extra += spec.photon_add
    if spec.displacement:
        extra += d + 40
    work = d + extra
    rho, ket = _base_matrix(spec, work)
    a, ad = ladder(max(work, 2))
    a, ad = a[:work, :work], ad[:work, :work]
    for _ in range(spec.photon_add):
        rho = ad @ rho @ a
        ket = ad @ ket if ket is not None else None
    for _ in range(spec.photon_subtract):
        rho = a @ rho @ ad
        ket = a @ ket if ket is not None else None
    if spec.photon_add or spec.photon_subtract:
        tr = np.trace(rho).real
        if tr <= 0:
            raise ValueError("photon subtraction annihilated the state")
        rho = rho / tr
        if ket is not None:
            ket = ket / math.sqrt(tr)
    if spec.rotation:
        ph = np.exp(-1j * spec.rotation * np.arange(work))
        rho = ph[:, None] * rho * ph.conj()[None, :]
        if ket is not None:
            ket = ph * ket
    if spec.displacement:
        dm = _displacement_unitary(spec.displacement, work)
        if ket is not None:
            ket = dm @ ket
            rho = np.outer(ket, ket.conj())
        else:
            rho = dm @ rho @ dm.conj().T
    rho = rho[:d, :d]
    if ket is not None:
        ket = ket[:d]
    return rho, ket


def make_state(spec: StateSpec, cutoff: int, tail_bound: float | None = None) -> FockDensityOperator:
    """Normalised density operator of ``spec`` on ``cutoff`` levels.

    The weight outside the cutoff is recorded in ``tail_mass`` and the
    explicit renormalisation is logged in ``metadata``.
    """
    if cutoff < 2:
        raise ValueError("cutoff must be at least 2")
    rho, ket = _build_with_ket(spec, cutoff)
    rho = 0.5 * (rho + rho.conj().T)
    trace = float(np.trace(rho).real)
    if not trace > 0:
        raise ValueError("state has no weight below the cutoff")
    tail = max(0.0, 1.0 - trace)
    if tail_bound is not None:
        tail = max(tail, tail_bound)
    meta = {
        "spec": spec.to_dict(),
        "trace_before_renormalization": trace,
        "renormalized": trace != 1.0,
    }
    if trace != 1.0:
        log.debug("renormalising %s at cutoff %d (trace %.3e)", spec.label(), cutoff, trace)
        rho = rho / trace
        if ket is not None:
            ket = ket / math.sqrt(trace)
    if ket is not None:
        rho = np.outer(ket, ket.conj())
    return FockDensityOperator(rho, cutoff, 1, tail, ket, meta)


def prepare_state(spec: StateSpec, tail_tol: float = 1e-12, order: int = 0) -> FockDensityOperator:
    """``make_state`` at the automatic cutoff, remembering the margin in metadata."""
    d = auto_cutoff(spec, tail_tol, order)
    rho = make_state(spec, d)
    rho.metadata["margin"] = order
    rho.metadata["tail_tol"] = tail_tol
    return rho
