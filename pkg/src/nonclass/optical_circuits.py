"""Passive linear-optics circuits acting on replicas of a single-mode state.

Mode convention: a circuit with mode matrix ``u`` maps input annihilators to
output ones as ``a' = u a``.  Elements compose as ``u = E_n ... E_1``.

* beam splitter of transmittance ``tau`` on modes ``(i, j)``:
  ``[[sqrt(tau), sqrt(1-tau)], [sqrt(1-tau), -sqrt(tau)]]``
* phase shifter ``phi`` on mode ``i``: ``a_i' = exp(-i phi) a_i``

The Fock-space unitary is ``U = exp(i a^+ h a)`` with ``h = -i log u``, so
that ``U^+ a U = u a``.  ``U`` conserves the total photon number and is built
one total-photon sector at a time.
"""

from __future__ import annotations

import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import schur
from scipy.sparse import csr_matrix
from scipy.sparse.linalg import expm_multiply

from .fock_engine import FockDensityOperator

log = logging.getLogger(__name__)

__all__ = [
    "Element",
    "CircuitSpec",
    "PRESETS",
    "preset",
    "beam_splitter_matrix",
    "compile_mode_unitary",
    "mode_generator",
    "sector_basis",
    "sector_generator",
    "fock_unitary",
    "OutputDistribution",
    "simulate",
    "FUNCTIONALS",
    "measure_functional",
    "output_statistics",
    "circuit_minor",
    "CIRCUIT_PRESETS",
    "interpolation_value",
    "detection_boundary_scan",
    "BoundaryScan",
    "replica_input",
    "dft_matrix",
    "bs",
    "ps",
]

UNITARY_TOL = 1e-12
# Sector dimension above which sector unitaries are applied with expm_multiply.
DENSE_SECTOR_MAX = 700
# Per-mode cutoff used for mixed states on three or more replicas.
MIXED_REPLICA_CUTOFF = 10
# Default N^2-weighted input tail dropped by circuit_minor for pure replicas.
PURE_WEIGHTED_TAIL = 1e-14


# ---------------------------------------------------------------------------
# circuit description


@dataclass(frozen=True)
class Element:
    kind: str  # "beam_splitter" or "phase_shifter"
    modes: tuple[int, ...]
    param: float

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(int(m) for m in self.modes))
        if self.kind == "beam_splitter":
            if len(self.modes) != 2 or self.modes[0] == self.modes[1]:
                raise ValueError("a beam splitter acts on two distinct modes")
            if not 0.0 <= self.param <= 1.0:
                raise ValueError(f"transmittance {self.param} outside [0, 1]")
        elif self.kind == "phase_shifter":
            if len(self.modes) != 1:
                raise ValueError("a phase shifter acts on one mode")
        else:
            raise ValueError(f"unknown element type {self.kind!r}")

    def to_dict(self) -> dict:
        return {"type": self.kind, "modes": list(self.modes), "param": self.param}


def bs(i: int, j: int, tau: float) -> Element:
    return Element("beam_splitter", (i, j), float(tau))


def ps(i: int, phi: float) -> Element:
    return Element("phase_shifter", (i,), float(phi))


@dataclass(frozen=True)
class CircuitSpec:
    modes: int
    elements: tuple[Element, ...] = ()
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        for e in self.elements:
            for m in e.modes:
                if not 1 <= m <= self.modes:
                    raise ValueError(f"mode {m} outside 1..{self.modes}")

    def to_json(self) -> str:
        return json.dumps({"modes": self.modes, "elements": [e.to_dict() for e in self.elements]})

    @classmethod
    def from_json(cls, text: str | dict) -> "CircuitSpec":
        data = json.loads(text) if isinstance(text, str) else text
        els = [Element(e["type"], tuple(e["modes"]), float(e["param"])) for e in data["elements"]]
        return cls(int(data["modes"]), tuple(els), data.get("name", ""))


def _fig1():
    return CircuitSpec(2, (bs(1, 2, 0.5),), "fig1")


def _fig2():
    return CircuitSpec(2, (ps(2, math.pi / 2), bs(1, 2, 0.5)), "fig2")


def _fig3(phi: float = math.pi / 2, tau: float = 0.5):
    return CircuitSpec(2, (ps(2, phi), bs(1, 2, tau)), "fig3")


def _fig4():
    return CircuitSpec(
        3,
        (bs(1, 2, 0.5), bs(1, 3, 2 / 3), ps(2, math.pi / 2), bs(2, 3, 0.5)),
        "fig4",
    )


PRESETS = {"fig1": _fig1, "fig2": _fig2, "fig3": _fig3, "fig4": _fig4}


def preset(name: str, **params) -> CircuitSpec:
    if name not in PRESETS:
        raise ValueError(f"unknown circuit preset {name!r}")
    return PRESETS[name](**params)


def dft_matrix(n: int) -> np.ndarray:
    k = np.arange(n)
    return np.exp(2j * np.pi * np.outer(k, k) / n) / math.sqrt(n)


def beam_splitter_matrix(tau: float) -> np.ndarray:
    t, r = math.sqrt(tau), math.sqrt(1.0 - tau)
    return np.array([[t, r], [r, -t]], dtype=complex)


def compile_mode_unitary(c: CircuitSpec | np.ndarray) -> np.ndarray:
    """Mode matrix ``u`` with ``a' = u a`` (an explicit matrix passes through)."""
    if isinstance(c, np.ndarray):
        u = np.asarray(c, dtype=complex)
    else:
        u = np.eye(c.modes, dtype=complex)
        for e in c.elements:
            E = np.eye(c.modes, dtype=complex)
            if e.kind == "beam_splitter":
                idx = [m - 1 for m in e.modes]
                E[np.ix_(idx, idx)] = beam_splitter_matrix(e.param)
            else:
                i = e.modes[0] - 1
                E[i, i] = np.exp(-1j * e.param)
            u = E @ u
    if np.max(np.abs(u.conj().T @ u - np.eye(len(u)))) > UNITARY_TOL * 10:
        raise ValueError("mode matrix is not unitary")
    return u


def mode_generator(u: np.ndarray) -> np.ndarray:
    """Hermitian ``h`` with ``u = exp(i h)``, eigenphases in (-pi, pi].

    The complex Schur form of a unitary is diagonal, so the logarithm is
    taken eigenvalue by eigenvalue and no branch problem arises at -1.
    """
    T, Z = schur(np.asarray(u, dtype=complex), output="complex")
    theta = np.angle(np.diag(T))
    h = (Z * theta) @ Z.conj().T
    return 0.5 * (h + h.conj().T)


# ---------------------------------------------------------------------------
# photon-number sectors


@lru_cache(maxsize=512)
def sector_basis(m: int, N: int) -> np.ndarray:
    """All occupation tuples of ``m`` modes with total ``N`` (rows, lexicographic)."""
    if m == 1:
        return np.array([[N]], dtype=np.int64)
    rows = []
    for c in itertools.combinations(range(N + m - 1), m - 1):
        prev = -1
        occ = []
        for x in c:
            occ.append(x - prev - 1)
            prev = x
        occ.append(N + m - 2 - prev)
        rows.append(occ)
    out = np.array(rows, dtype=np.int64)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=512)
def _sector_keys(m: int, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Sorted integer keys of the sector basis and the permutation sorting them."""
    keys = sector_basis(m, N) @ ((N + 1) ** np.arange(m - 1, -1, -1))
    order = np.argsort(keys)
    return keys[order], order


def sector_generator(h: np.ndarray, N: int) -> csr_matrix:
    """Matrix of ``sum_ij h_ij a_i^+ a_j`` restricted to ``N`` photons."""
    m = h.shape[0]
    basis = sector_basis(m, N)
    dim = len(basis)
    sorted_keys, order = _sector_keys(m, N)
    weights = (N + 1) ** np.arange(m - 1, -1, -1)
    keys = basis @ weights
    rows, cols, vals = [], [], []
    cols_all = np.arange(dim)
    for j in range(m):
        occ_j = basis[:, j]
        has = occ_j > 0
        for i in range(m):
            hij = h[i, j]
            if hij == 0 or not has.any():
                continue
            if i == j:
                rows.append(cols_all[has])
                cols.append(cols_all[has])
                vals.append(hij * occ_j[has])
                continue
            new_keys = keys[has] - weights[j] + weights[i]
            target = order[np.searchsorted(sorted_keys, new_keys)]
            amp = np.sqrt(occ_j[has] * (basis[has, i] + 1.0))
            rows.append(target)
            cols.append(cols_all[has])
            vals.append(hij * amp)
    if not rows:
        return csr_matrix((dim, dim), dtype=complex)
    return csr_matrix(
        (np.concatenate(vals).astype(complex), (np.concatenate(rows), np.concatenate(cols))),
        shape=(dim, dim),
    )


def _sector_unitary_dense(h: np.ndarray, N: int) -> np.ndarray:
    G = sector_generator(h, N).toarray()
    G = 0.5 * (G + G.conj().T)
    w, V = np.linalg.eigh(G)
    return (V * np.exp(1j * w)) @ V.conj().T


def fock_unitary(u: np.ndarray | CircuitSpec, cutoff: int) -> np.ndarray:
    """Dense Fock-space matrix of the circuit on ``cutoff`` levels per mode.

    Each sector unitary is computed on the complete sector (occupations up
    to the total photon number) and then projected onto levels below
    ``cutoff``.  Sectors that fit entirely inside the truncation are exact
    unitary blocks.
    """
    u = compile_mode_unitary(u)
    m = u.shape[0]
    dim = cutoff**m
    if dim > 4096:
        raise MemoryError(f"dense Fock unitary of dimension {dim} is not supported")
    h = mode_generator(u)
    out = np.zeros((dim, dim), dtype=complex)
    weights = cutoff ** np.arange(m - 1, -1, -1)
    for N in range(m * (cutoff - 1) + 1):
        basis = sector_basis(m, N)
        keep = np.all(basis < cutoff, axis=1)
        if not keep.any():
            continue
        UN = _sector_unitary_dense(h, N)
        flat = basis[keep] @ weights
        out[np.ix_(flat, flat)] = UN[np.ix_(keep, keep)]
    return out


# ---------------------------------------------------------------------------
# evolution of replica inputs


@dataclass
class OutputDistribution:
    """Photon-number distribution at the circuit output, grouped by sector."""

    modes: int
    sectors: dict = field(default_factory=dict)  # N -> (basis, probabilities)
    dropped_weight: float = 0.0
    cutoff: int = 0

    def total_probability(self) -> float:
        return float(sum(p.sum() for _, p in self.sectors.values()))

    def expectation(self, fn) -> float:
        """``sum_n P(n) fn(n)`` with ``fn`` acting on an (rows, modes) integer array."""
        acc = 0.0
        for basis, p in self.sectors.values():
            acc += float(p @ fn(basis))
        return acc

    def joint(self, i: int, j: int, size: int) -> np.ndarray:
        """Marginal distribution of output modes ``i`` and ``j`` (1-based)."""
        out = np.zeros((size, size))
        for basis, p in self.sectors.values():
            a, b = basis[:, i - 1], basis[:, j - 1]
            ok = (a < size) & (b < size)
            np.add.at(out, (a[ok], b[ok]), p[ok])
        return out


def _sector_input_pure(kets, N):
    m = len(kets)
    basis = sector_basis(m, N)
    amp = np.ones(len(basis), dtype=complex)
    for i, k in enumerate(kets):
        occ = basis[:, i]
        ok = occ < len(k)
        col = np.zeros(len(basis), dtype=complex)
        col[ok] = k[occ[ok]]
        amp *= col
    return basis, amp


def _sector_input_mixed(mats, N):
    m = len(mats)
    basis = sector_basis(m, N)
    block = np.ones((len(basis), len(basis)), dtype=complex)
    for i, r in enumerate(mats):
        occ = basis[:, i]
        ok = occ < len(r)
        sub = np.zeros((len(basis), len(basis)), dtype=complex)
        sub[np.ix_(ok, ok)] = r[np.ix_(occ[ok], occ[ok])]
        block *= sub
    return basis, block


def _total_photon_distribution(dists) -> np.ndarray:
    out = np.array([1.0])
    for p in dists:
        out = np.convolve(out, p)
    return out


def _pair_sector_unitaries(u2: np.ndarray, n_max: int) -> list[np.ndarray]:
    h2 = mode_generator(u2)
    return [_sector_unitary_dense(h2, M) for M in range(n_max + 1)]


def _givens_sequence(u: np.ndarray) -> list[tuple]:
    """Two-mode gates and a final phase layer whose product is ``u``.

    Rows are eliminated below the diagonal with unitary 2x2 rotations on
    neighbouring rows, ``G_K ... G_1 u = diag(d)``, so that
    ``u = G_1^+ ... G_K^+ diag(d)``.  The returned list is in application
    order: ``("phase", i, d_i)`` entries first, then ``("pair", i, j, w)``.
    """
    u = np.array(u, dtype=complex)
    m = u.shape[0]
    gates = []
    for c in range(m - 1):
        for r in range(m - 1, c, -1):
            x, y = u[r - 1, c], u[r, c]
            rho = math.hypot(abs(x), abs(y))
            if abs(y) < 1e-15 or rho == 0.0:
                continue
            G = np.array([[x.conjugate(), y.conjugate()], [-y, x]]) / rho
            u[[r - 1, r], :] = G @ u[[r - 1, r], :]
            gates.append(("pair", r - 1, r, G.conj().T))
    phases = [("phase", i, u[i, i] / abs(u[i, i])) for i in range(m)]
    return phases + gates[::-1]


def _element_gates(circuit: CircuitSpec) -> list[tuple]:
    out = []
    for e in circuit.elements:
        if e.kind == "phase_shifter":
            out.append(("phase", e.modes[0] - 1, np.exp(-1j * e.param)))
        else:
            i, j = (x - 1 for x in e.modes)
            out.append(("pair", i, j, beam_splitter_matrix(e.param)))
    return out


def _simulate_elementwise(gates: list[tuple], m: int, kets, n_max: int) -> np.ndarray:
    """Product ket pushed through a sequence of one- and two-mode gates.

    The amplitude tensor has ``n_max + 1`` levels per mode with every entry
    above total photon number ``n_max`` set to zero; gates conserve the
    total, so the sectors kept are evolved exactly.
    """
    D = n_max + 1
    psi = np.ones((1,) * m, dtype=complex)
    for i, k in enumerate(kets):
        col = np.zeros(D, dtype=complex)
        col[: min(D, len(k))] = k[:D]
        shape = [1] * m
        shape[i] = D
        psi = psi * col.reshape(shape)
    grid = np.indices((D,) * m).sum(axis=0)
    psi[grid > n_max] = 0.0
    n = np.arange(D)
    for g in gates:
        if g[0] == "phase":
            _, i, d = g
            if abs(d - 1) < 1e-15:
                continue
            shape = [1] * m
            shape[i] = D
            psi = psi * (d**n).reshape(shape)
            continue
        _, i, j, w = g
        X = np.moveaxis(psi, (i, j), (0, 1)).reshape(D, D, -1).copy()
        for M, UM in enumerate(_pair_sector_unitaries(w, n_max)):
            b = sector_basis(2, M)
            X[b[:, 0], b[:, 1], :] = UM @ X[b[:, 0], b[:, 1], :]
        rest = [D] * (m - 2)
        psi = np.moveaxis(X.reshape(D, D, *rest), (0, 1), (i, j))
    return psi


# Largest amplitude tensor (entries) used by the element-by-element route.
ELEMENTWISE_MAX_ENTRIES = 2**24


def simulate(
    circuit: CircuitSpec | np.ndarray,
    states: list[FockDensityOperator],
    weighted_tail: float | None = None,
    force_mixed: bool = False,
) -> OutputDistribution:
    """Output photon-number distribution for a product input state.

    ``states`` holds one single-mode state per circuit mode.  Only the
    diagonal of the output state is formed: per sector ``N`` it is
    ``diag(U_N rho_NN U_N^+)``, coherences between sectors never contribute.

    ``weighted_tail`` drops the highest sectors as long as their input
    weight times ``N^2`` stays below the given bound; the dropped weight is
    reported.  By default every sector is kept and the result is exact for
    the (truncated) input.  Pure inputs on more than two modes are pushed
    through gate by gate on an amplitude tensor (explicit mode matrices are
    first split into two-mode rotations); everything else goes through one
    whole-circuit unitary per sector.
    """
    u = compile_mode_unitary(circuit)
    m = u.shape[0]
    if len(states) != m:
        raise ValueError(f"circuit has {m} modes but {len(states)} input states were given")
    pure = all(s.is_pure for s in states) and not force_mixed
    h = mode_generator(u)
    n_max = sum(s.cutoff - 1 for s in states)
    p_total = _total_photon_distribution([s.photon_distribution() for s in states])
    dropped = 0.0
    if weighted_tail is not None:
        Ns = np.arange(len(p_total))
        w = p_total * np.maximum(Ns, 1) ** 2
        tail = np.cumsum(w[::-1])[::-1]
        keep = np.nonzero(tail > weighted_tail)[0]
        new_max = int(keep[-1]) if len(keep) else 0
        dropped = float(p_total[new_max + 1 :].sum())
        n_max = min(n_max, new_max)
    out = OutputDistribution(m, {}, dropped, max(s.cutoff for s in states))
    if pure and m > 2 and (n_max + 1) ** m <= ELEMENTWISE_MAX_ENTRIES:
        gates = _element_gates(circuit) if isinstance(circuit, CircuitSpec) else _givens_sequence(u)
        psi = _simulate_elementwise(gates, m, [s.ket for s in states], n_max)
        for N in range(n_max + 1):
            basis = sector_basis(m, N)
            probs = np.abs(psi[tuple(basis.T)]) ** 2
            if p_total[N] != 0.0:
                out.sectors[N] = (basis, probs)
        return out
    for N in range(n_max + 1):
        if p_total[N] == 0.0:
            continue
        if pure:
            basis, vec = _sector_input_pure([s.ket for s in states], N)
            if not np.any(vec):
                continue
            if len(basis) <= DENSE_SECTOR_MAX:
                res = _sector_unitary_dense(h, N) @ vec
            else:
                res = expm_multiply(1j * sector_generator(h, N), vec)
            probs = np.abs(res) ** 2
        else:
            basis, block = _sector_input_mixed([s.matrix for s in states], N)
            if not np.any(block):
                continue
            if len(basis) <= 4 * DENSE_SECTOR_MAX:
                UN = _sector_unitary_dense(h, N)
                probs = np.einsum("ab,ab->a", UN @ block, UN.conj()).real
            else:
                G = 1j * sector_generator(h, N)
                X = expm_multiply(G, block)
                Y = expm_multiply(G, X.conj().T)
                probs = np.diag(Y).real
        out.sectors[N] = (basis, probs)
    return out


# ---------------------------------------------------------------------------
# photon-number functionals


def _mean_n(mode):
    return lambda n: n[:, mode - 1].astype(float)


def _mean_product(m1, m2):
    return lambda n: n[:, m1 - 1].astype(float) * n[:, m2 - 1]


def _half_sq_diff_minus_half_sum(m1, m2):
    def f(n):
        a, b = n[:, m1 - 1].astype(float), n[:, m2 - 1].astype(float)
        return 0.5 * (a - b) ** 2 - 0.5 * (a + b)

    return f


FUNCTIONALS = {
    "mean_n": _mean_n,
    "mean_product": _mean_product,
    "half_sq_diff_minus_half_sum": _half_sq_diff_minus_half_sum,
}


def measure_functional(dist: OutputDistribution, functional: str, *modes: int) -> float:
    if functional not in FUNCTIONALS:
        raise ValueError(f"unknown functional {functional!r}")
    for m in modes:
        if not 1 <= m <= dist.modes:
            raise ValueError(f"mode {m} outside 1..{dist.modes}")
    return dist.expectation(FUNCTIONALS[functional](*modes))


def output_statistics(dist: OutputDistribution, i: int, j: int) -> dict:
    """Means, variances, Mandel parameters and cross moment of two output modes."""
    ni = dist.expectation(_mean_n(i))
    nj = dist.expectation(_mean_n(j))
    vi = dist.expectation(lambda n: n[:, i - 1].astype(float) ** 2) - ni**2
    vj = dist.expectation(lambda n: n[:, j - 1].astype(float) ** 2) - nj**2
    cross = dist.expectation(_mean_product(i, j))
    qi = (vi - ni) / ni if ni else float("nan")
    qj = (vj - nj) / nj if nj else float("nan")
    return {"n1": ni, "n2": nj, "var1": vi, "var2": vj, "Q1": qi, "Q2": qj, "n1n2": cross}


# ---------------------------------------------------------------------------
# circuits measuring principal minors


def _d123_dft():
    return dft_matrix(3)


# preset -> (circuit factory or None, copies, functional, modes, scale)
CIRCUIT_PRESETS = {
    "d12": (_fig1, 2, "mean_n", (2,), 1.0),
    "d14": (_fig1, 2, "mean_product", (1, 2), 2.0),
    "d15": (None, 2, "half_sq_diff_minus_half_sum", (1, 2), 1.0),
    "d23": (_fig2, 2, "half_sq_diff_minus_half_sum", (1, 2), 1.0),
    "d123": (_fig4, 3, "half_sq_diff_minus_half_sum", (2, 3), 1.0),
    "d123_dft": (_d123_dft, 3, "half_sq_diff_minus_half_sum", (2, 3), 1.0),
}


def _replicas(rho: FockDensityOperator, copies: int, mixed_cutoff: int) -> list[FockDensityOperator]:
    if copies >= 3 and not rho.is_pure and rho.cutoff > mixed_cutoff:
        # Dense sector blocks of a mixed three-replica input grow like d^4 per sector.
        mat = rho.matrix[:mixed_cutoff, :mixed_cutoff]
        tr = np.trace(mat).real
        small = FockDensityOperator(
            mat / tr,
            mixed_cutoff,
            1,
            rho.tail_mass + (1 - tr),
            None,
            {**rho.metadata, "recut_from": rho.cutoff},
        )
        return [small] * copies
    return [rho] * copies


def replica_input(rho: FockDensityOperator, preset_name: str, mixed_cutoff: int = MIXED_REPLICA_CUTOFF):
    """The single-mode state actually fed to every replica of a preset."""
    copies = CIRCUIT_PRESETS[preset_name][1]
    return _replicas(rho, copies, mixed_cutoff)[0]


def circuit_minor(
    preset_name: str,
    rho: FockDensityOperator,
    weighted_tail: float | None | str = "auto",
    mixed_cutoff: int = MIXED_REPLICA_CUTOFF,
) -> float:
    """Run a measuring circuit on replicas of ``rho`` and return its functional.

    Mixed states on three replicas are first cut to ``mixed_cutoff`` levels
    and renormalised (see :func:`replica_input`); compare against the minor
    of that same state.  ``weighted_tail="auto"`` drops sectors with
    ``N^2``-weighted input weight below ``PURE_WEIGHTED_TAIL`` for pure
    states and keeps every sector for mixed ones.
    """
    if weighted_tail == "auto":
        weighted_tail = PURE_WEIGHTED_TAIL if rho.is_pure else None
    if preset_name not in CIRCUIT_PRESETS:
        raise ValueError(f"unknown preset {preset_name!r}")
    factory, copies, functional, modes, scale = CIRCUIT_PRESETS[preset_name]
    circuit = factory() if factory else np.eye(copies, dtype=complex)
    dist = simulate(circuit, _replicas(rho, copies, mixed_cutoff), weighted_tail)
    return scale * measure_functional(dist, functional, *modes)


def interpolation_value(
    tau: float, phi: float, rho: FockDensityOperator, weighted_tail: float | None = None
) -> float:
    """Functional ``(n1'-n2')^2/2 - (n1'+n2')/2`` after a phase shift ``phi`` and a
    beam splitter ``tau`` on two replicas."""
    if not 0.5 <= tau <= 1.0:
        raise ValueError("transmittance must lie in [1/2, 1]")
    dist = simulate(_fig3(phi, tau), [rho, rho], weighted_tail)
    return measure_functional(dist, "half_sq_diff_minus_half_sum", 1, 2)


@dataclass
class BoundaryScan:
    rows: list  # (label, tau, value, detected)
    boundaries: dict  # label -> list of refined transition taus

    def detected_at(self, label: str, tau: float) -> bool:
        for lab, t, _, det in self.rows:
            if lab == label and abs(t - tau) < 1e-12:
                return det
        raise KeyError((label, tau))


def detection_boundary_scan(
    states: dict,
    tau_grid=None,
    phi: float = math.pi / 2,
    epsilon: float = 1e-9,
    refine_tol: float = 1e-6,
    weighted_tail: float | None = 1e-13,
) -> BoundaryScan:
    """Detection verdict of the interpolating circuit on a grid of transmittances.

    Every sign change between neighbouring grid points is refined by
    bisection to ``refine_tol``.
    """
    if tau_grid is None:
        tau_grid = 0.5 + np.arange(257) / 512
    tau_grid = np.asarray(sorted(tau_grid), dtype=float)
    rows, bounds = [], {}
    for label, rho in states.items():

        def value(t):
            return interpolation_value(float(t), phi, rho, weighted_tail)

        vals = [value(t) for t in tau_grid]
        det = [v < -epsilon for v in vals]
        rows.extend((label, float(t), v, d) for t, v, d in zip(tau_grid, vals, det))
        found = []
        for k in range(len(tau_grid) - 1):
            if det[k] != det[k + 1]:
                lo, hi = tau_grid[k], tau_grid[k + 1]
                dlo = det[k]
                while hi - lo > refine_tol:
                    mid = 0.5 * (lo + hi)
                    if (value(mid) < -epsilon) == dlo:
                        lo = mid
                    else:
                        hi = mid
                found.append(0.5 * (lo + hi))
        bounds[label] = found
    return BoundaryScan(rows, bounds)
