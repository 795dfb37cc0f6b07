"""Exact truncated-Fock-space model of a swapping chain (N <= 3 sources).

Nothing here uses the algebra calculus. States are sparse dictionaries from
occupation tuples to complex amplitudes; passive optics (loss splitters, basis
rotations, BSM beam splitters) act linearly on creation operators. The
resulting traces are the reference values the calculus is checked against.

Mode layout for a chain: source ``k`` (1-based) owns four signal slots
``[x_L, y_L, x_R, y_R]`` for channels ``2k-1`` (L) and ``2k`` (R), where
``(x, y)`` is ``(a, b)`` or ``(c, d)`` depending on the basis of the BSM the
channel feeds. Loss modes live in four further slots per source.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .chain import ChainSpec, SourceStats
from .errors import ChainTooLongError, TruncationError, ValidationError

SQRT_HALF = math.sqrt(0.5)
PRUNE = 1e-15
MAX_PHOTONS_PER_SOURCE = 4
MAX_ORACLE_SOURCES = 3

Occ = tuple[int, ...]


def _sqrt_fact(occ: Iterable[int]) -> float:
    out = 1.0
    for n in occ:
        if n > 1:
            out *= math.sqrt(math.factorial(n))
    return out


class SparseKet:
    """Sparse Fock-space ket on ``n_modes`` labelled bosonic modes."""

    __slots__ = ("n_modes", "amps")

    def __init__(self, n_modes: int, amps: Mapping[Occ, complex] | None = None):
        self.n_modes = n_modes
        self.amps: dict[Occ, complex] = {}
        for occ, a in (amps or {}).items():
            if len(occ) != n_modes:
                raise ValidationError(f"occupation {occ} does not have {n_modes} modes")
            if a != 0:
                self.amps[tuple(occ)] = complex(a)

    @classmethod
    def vacuum(cls, n_modes: int) -> "SparseKet":
        return cls(n_modes, {(0,) * n_modes: 1.0})

    @classmethod
    def from_creation_poly(cls, n_modes: int, poly: Mapping[Occ, complex]) -> "SparseKet":
        """``sum_e c_e prod_j (a_j^dagger)^{e_j} |0>``."""
        return cls(n_modes, {e: c * _sqrt_fact(e) for e, c in poly.items()})

    def norm2(self) -> float:
        return sum(abs(a) ** 2 for a in self.amps.values())

    def scaled(self, c: complex) -> "SparseKet":
        return SparseKet(self.n_modes, {o: c * a for o, a in self.amps.items()})

    def __add__(self, other: "SparseKet") -> "SparseKet":
        if other.n_modes != self.n_modes:
            raise ValidationError("mode count mismatch")
        out = dict(self.amps)
        for o, a in other.amps.items():
            out[o] = out.get(o, 0) + a
        return SparseKet(self.n_modes, out)

    def inner(self, other: "SparseKet") -> complex:
        """``<self|other>``."""
        small, big = (self.amps, other.amps) if len(self.amps) < len(other.amps) else (other.amps, self.amps)
        tot = 0j
        for o in small:
            if o in big:
                tot += self.amps[o].conjugate() * other.amps[o]
        return tot

    def tensor(self, other: "SparseKet") -> "SparseKet":
        out = {}
        for o1, a1 in self.amps.items():
            for o2, a2 in other.amps.items():
                out[o1 + o2] = a1 * a2
        return SparseKet(self.n_modes + other.n_modes, out)

    def extended(self, extra: int) -> "SparseKet":
        pad = (0,) * extra
        return SparseKet(self.n_modes + extra, {o + pad: a for o, a in self.amps.items()})

    def photon_numbers(self) -> set[int]:
        return {sum(o) for o in self.amps}

    def transform(self, mapping: Mapping[int, Sequence[tuple[int, complex]]], prune: float = PRUNE) -> "SparseKet":
        """Apply ``a_k^dagger -> sum_j T_kj a_j^dagger`` for the modes in ``mapping``."""
        n = self.n_modes
        out: dict[Occ, complex] = defaultdict(complex)
        for occ, amp in self.amps.items():
            poly = {occ_zero(n): amp / _sqrt_fact(occ)}
            for k, nk in enumerate(occ):
                if nk == 0:
                    continue
                lin = mapping.get(k, ((k, 1.0),))
                for _ in range(nk):
                    nxt: dict[Occ, complex] = defaultdict(complex)
                    for e, c in poly.items():
                        for j, t in lin:
                            e2 = list(e)
                            e2[j] += 1
                            nxt[tuple(e2)] += c * t
                    poly = nxt
            for e, c in poly.items():
                out[e] += c * _sqrt_fact(e)
        return SparseKet(n, {o: a for o, a in out.items() if abs(a) > prune})

    def project(self, keep: Callable[[Occ], bool]) -> "SparseKet":
        return SparseKet(self.n_modes, {o: a for o, a in self.amps.items() if keep(o)})

    def isclose(self, other: "SparseKet", tol: float = 1e-12) -> bool:
        keys = set(self.amps) | set(other.amps)
        return all(abs(self.amps.get(k, 0) - other.amps.get(k, 0)) <= tol for k in keys)


def occ_zero(n: int) -> Occ:
    return (0,) * n


class SparseDensityMatrix:
    """Sparse operator ``sum rho[(ket, bra)] |ket><bra|``."""

    __slots__ = ("n_modes", "elems")

    def __init__(self, n_modes: int, elems: Mapping[tuple[Occ, Occ], complex] | None = None):
        self.n_modes = n_modes
        self.elems: dict[tuple[Occ, Occ], complex] = {k: complex(v) for k, v in (elems or {}).items() if v != 0}

    @classmethod
    def from_ket(cls, ket: SparseKet) -> "SparseDensityMatrix":
        out = {}
        for k, a in ket.amps.items():
            for b, c in ket.amps.items():
                out[(k, b)] = a * c.conjugate()
        return cls(ket.n_modes, out)

    @classmethod
    def from_ensemble(cls, kets: Iterable[SparseKet], n_modes: int) -> "SparseDensityMatrix":
        acc: dict[tuple[Occ, Occ], complex] = defaultdict(complex)
        for ket in kets:
            for (k, b), v in cls.from_ket(ket).elems.items():
                acc[(k, b)] += v
        return cls(n_modes, acc)

    def __add__(self, other: "SparseDensityMatrix") -> "SparseDensityMatrix":
        out = dict(self.elems)
        for k, v in other.elems.items():
            out[k] = out.get(k, 0) + v
        return SparseDensityMatrix(self.n_modes, out)

    def trace(self) -> complex:
        return sum(v for (k, b), v in self.elems.items() if k == b)

    def partial_trace(self, modes: Sequence[int]) -> "SparseDensityMatrix":
        traced = set(modes)
        keep = [i for i in range(self.n_modes) if i not in traced]
        tr = sorted(traced)
        out: dict[tuple[Occ, Occ], complex] = defaultdict(complex)
        for (k, b), v in self.elems.items():
            if all(k[i] == b[i] for i in tr):
                out[(tuple(k[i] for i in keep), tuple(b[i] for i in keep))] += v
        return SparseDensityMatrix(len(keep), {kb: v for kb, v in out.items() if abs(v) > PRUNE**2})

    def expectation(self, ket: SparseKet) -> complex:
        """``<psi| rho |psi>``."""
        tot = 0j
        for (k, b), v in self.elems.items():
            ak = ket.amps.get(k)
            ab = ket.amps.get(b)
            if ak is not None and ab is not None:
                tot += ak.conjugate() * v * ab
        return tot

    def filter(self, keep: Callable[[Occ, Occ], bool]) -> "SparseDensityMatrix":
        return SparseDensityMatrix(self.n_modes, {kb: v for kb, v in self.elems.items() if keep(*kb)})

    def basis(self) -> list[Occ]:
        return sorted({k for k, _ in self.elems} | {b for _, b in self.elems})

    def to_dense(self) -> tuple[list[Occ], np.ndarray]:
        basis = self.basis()
        index = {o: i for i, o in enumerate(basis)}
        mat = np.zeros((len(basis), len(basis)), dtype=complex)
        for (k, b), v in self.elems.items():
            mat[index[k], index[b]] = v
        return basis, mat

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        for (k, b), v in self.elems.items():
            if abs(v - self.elems.get((b, k), 0).conjugate()) > tol:
                return False
        return True

    def min_eigenvalue(self) -> float:
        _, mat = self.to_dense()
        if mat.size == 0:
            return 0.0
        return float(np.linalg.eigvalsh(0.5 * (mat + mat.conj().T)).min())

    def isclose(self, other: "SparseDensityMatrix", tol: float = 1e-12) -> bool:
        keys = set(self.elems) | set(other.elems)
        return all(abs(self.elems.get(k, 0) - other.elems.get(k, 0)) <= tol for k in keys)


@dataclass
class ModeRegistry:
    """Labelled modes; every channel owns a signal pair and a loss pair."""

    labels: list[str] = field(default_factory=list)

    def add(self, label: str) -> int:
        if label in self.labels:
            raise ValidationError(f"duplicate mode label {label!r}")
        self.labels.append(label)
        return len(self.labels) - 1

    def add_channel(self, i: int) -> tuple[int, int, int, int]:
        """Register ``a_i, b_i`` and their loss partners; return the indices."""
        return (self.add(f"a{i}"), self.add(f"b{i}"), self.add(f"a{i}''"), self.add(f"b{i}''"))

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def __len__(self):
        return len(self.labels)


@dataclass(frozen=True)
class DetectorModel:
    """Detector with efficiency ``eta_d``; ``alpha=1`` resolves photon number."""

    eta_d: float = 1.0
    alpha: int = 1

    def __post_init__(self):
        if not 0.0 <= self.eta_d <= 1.0:
            raise ValidationError("eta_d outside [0, 1]")
        if self.alpha not in (0, 1):
            raise ValidationError("alpha must be 0 or 1")

    def p0(self, n: int) -> float:
        return (1.0 - self.eta_d) ** n

    def p1(self, n: int) -> float:
        e = self.eta_d
        return sum(e * (1.0 - e) ** k * (1.0 - self.alpha * e) ** (n - 1 - k) for k in range(n))


# --- single-source states -------------------------------------------------

def _pair_component(nu: int) -> dict[Occ, complex]:
    """Creation polynomial of the normalised nu-pair term on (a1, b1, a2, b2)."""
    if nu == 0:
        return {(0, 0, 0, 0): 1.0}
    if nu == 1:
        c = math.sqrt(0.5)
        return {(1, 0, 0, 1): c, (0, 1, 1, 0): -c}
    if nu == 2:
        c = math.sqrt(1.0 / 12.0)
        return {(2, 0, 0, 2): c, (0, 2, 2, 0): c, (1, 1, 1, 1): -2.0 * c}
    raise TruncationError(f"{nu}-pair emission exceeds the two-pair truncation")


def source_component(nu: int, weight: float = 1.0) -> SparseKet:
    """``sqrt(weight)`` times the normalised nu-pair ket on four signal modes."""
    return SparseKet.from_creation_poly(4, _pair_component(nu)).scaled(math.sqrt(weight))


def source_state(stats: SourceStats) -> SparseKet:
    """Truncated pair-source state on modes ``(a1, b1, a2, b2)``."""
    ket = SparseKet(4)
    for nu in range(3):
        w = stats.pn(nu)
        if w > 0:
            ket = ket + source_component(nu, w)
    return ket


def _loss_map(slots: Sequence[int], loss_slots: Sequence[int], eta: float) -> dict[int, list[tuple[int, float]]]:
    t, r = math.sqrt(eta), math.sqrt(1.0 - eta)
    return {s: [(s, t), (l, r)] for s, l in zip(slots, loss_slots)}


def apply_loss(ket: SparseKet, signal_slots: Sequence[int], loss_slots: Sequence[int], eta: float) -> SparseKet:
    """Pure-loss splitter coupling each signal mode to its (vacuum) loss mode."""
    if not 0.0 <= eta <= 1.0:
        raise ValidationError("eta outside [0, 1]")
    for occ in ket.amps:
        if any(occ[l] for l in loss_slots):
            raise ValidationError("loss modes must start in vacuum")
    return ket.transform(_loss_map(signal_slots, loss_slots, eta))


def apply_dephasing(rho: SparseDensityMatrix, channel_slots: Sequence[int]) -> SparseDensityMatrix:
    """Remove coherences between different photon numbers in one channel."""
    slots = list(channel_slots)
    return rho.filter(lambda k, b: sum(k[s] for s in slots) == sum(b[s] for s in slots))


def rotate_to_diagonal(ket: SparseKet, x: int, y: int) -> SparseKet:
    """Re-express slots ``(x, y)`` from ``(a, b)`` to ``(c, d)``.

    ``c = (a + b)/sqrt2``, ``d = (a - b)/sqrt2``, so ``a^dag -> (c^dag + d^dag)/sqrt2``
    and ``b^dag -> (c^dag - d^dag)/sqrt2``.
    """
    return ket.transform({x: [(x, SQRT_HALF), (y, SQRT_HALF)], y: [(x, SQRT_HALF), (y, -SQRT_HALF)]})


def beam_splitter(ket: SparseKet, i_slots: Sequence[int], j_slots: Sequence[int]) -> SparseKet:
    """50:50 BSM splitter: ``x_i -> (x~_i + x~_j)/sqrt2``, ``x_j -> (x~_i - x~_j)/sqrt2``."""
    mapping = {}
    for si, sj in zip(i_slots, j_slots):
        mapping[si] = [(si, SQRT_HALF), (sj, SQRT_HALF)]
        mapping[sj] = [(si, SQRT_HALF), (sj, -SQRT_HALF)]
    return ket.transform(mapping)


def _lossy_source(stats_weight: float, nu: int, eta_l: float, eta_r: float) -> SparseKet:
    ket = source_component(nu, stats_weight).extended(4)
    ket = apply_loss(ket, (0, 1), (4, 5), eta_l)
    return apply_loss(ket, (2, 3), (6, 7), eta_r)


def reduced_source_state(stats: SourceStats, eta_i: float, eta_j: float, components: bool = False):
    """Signal-mode state of one source after lossy, dephasing channels.

    The full superposition is propagated (not the per-pair-number pieces), the
    loss modes are traced out and each channel is dephased. With
    ``components=True`` a dict ``{(nu, m, n): rho}`` of the blocks built from
    each pair number separately is returned as well.
    """
    ket = source_state(stats).extended(4)
    ket = apply_loss(ket, (0, 1), (4, 5), eta_i)
    ket = apply_loss(ket, (2, 3), (6, 7), eta_j)
    rho = SparseDensityMatrix.from_ket(ket).partial_trace([4, 5, 6, 7])
    rho = apply_dephasing(apply_dephasing(rho, (0, 1)), (2, 3))
    if not components:
        return rho
    parts = {}
    for nu in range(3):
        w = stats.pn(nu)
        if w == 0:
            continue
        r = SparseDensityMatrix.from_ket(_lossy_source(w, nu, eta_i, eta_j)).partial_trace([4, 5, 6, 7])
        for m in range(nu + 1):
            for n in range(nu + 1):
                block = r.filter(lambda k, b, m=m, n=n: k[0] + k[1] == m and k[2] + k[3] == n and b[0] + b[1] == m and b[2] + b[3] == n)
                if block.elems:
                    parts[(nu, m, n)] = block
    return rho, parts


# --- BSM projectors -------------------------------------------------------

@dataclass(frozen=True)
class Projector:
    """Diagonal-pattern projector, optionally conjugated by a mode transform."""

    patterns: frozenset[Occ]
    slots: tuple[int, ...]
    to_detection: Callable[[SparseKet], SparseKet] | None = None
    from_detection: Callable[[SparseKet], SparseKet] | None = None

    def apply(self, ket: SparseKet) -> SparseKet:
        k = self.to_detection(ket) if self.to_detection else ket
        k = k.project(lambda o: tuple(o[s] for s in self.slots) in self.patterns)
        return self.from_detection(k) if self.from_detection else k

    def expectation(self, ket: SparseKet) -> float:
        return self.apply(ket).norm2() if self.from_detection else ket.project(
            lambda o: tuple(o[s] for s in self.slots) in self.patterns).norm2()

    def __add__(self, other: "Projector") -> "Projector":
        if (self.slots, self.to_detection, self.from_detection) != (other.slots, other.to_detection, other.from_detection):
            raise ValidationError("projectors act in different frames")
        return Projector(self.patterns | other.patterns, self.slots, self.to_detection, self.from_detection)


E_PLUS_PATTERNS = frozenset({(1, 1, 0, 0), (0, 0, 1, 1)})
E_MINUS_PATTERNS = frozenset({(1, 0, 0, 1), (0, 1, 1, 0)})


def bsm_projectors(i_slots: Sequence[int], j_slots: Sequence[int], basis: str = "ab", frame: str = "detection") -> tuple[Projector, Projector]:
    """``(E+, E-)`` for the BSM joining the channels at ``i_slots`` and ``j_slots``.

    ``frame="detection"`` builds the physical operators: rotate to ``basis``,
    apply the 50:50 splitter and count one photon in each of two detectors.
    ``frame="source"`` gives the source-mode operators (both photons from one
    channel for E+, one from each for E-); only the sums agree.
    """
    if basis not in ("ab", "cd"):
        raise ValidationError("basis must be 'ab' or 'cd'")
    xi, yi = i_slots
    xj, yj = j_slots
    slots = (xi, yi, xj, yj)

    def fwd(ket):
        if basis == "cd":
            ket = rotate_to_diagonal(rotate_to_diagonal(ket, xi, yi), xj, yj)
        return beam_splitter(ket, (xi, yi), (xj, yj))

    def back(ket):
        # splitter is its own inverse; rotation inverse is its transpose (itself)
        ket = beam_splitter(ket, (xi, yi), (xj, yj))
        if basis == "cd":
            ket = rotate_to_diagonal(rotate_to_diagonal(ket, xi, yi), xj, yj)
        return ket

    if frame == "detection":
        return (Projector(E_PLUS_PATTERNS, slots, fwd, back), Projector(E_MINUS_PATTERNS, slots, fwd, back))
    if frame != "source":
        raise ValidationError("frame must be 'detection' or 'source'")
    if basis == "ab":
        return Projector(E_PLUS_PATTERNS, slots), Projector(E_MINUS_PATTERNS, slots)

    def rot(ket):
        return rotate_to_diagonal(rotate_to_diagonal(ket, xi, yi), xj, yj)

    return (Projector(E_PLUS_PATTERNS, slots, rot, rot), Projector(E_MINUS_PATTERNS, slots, rot, rot))


def bell_state(kind: str, i_slots: Sequence[int], j_slots: Sequence[int], n_modes: int) -> SparseKet:
    """Dual-rail Bell state; ``kind`` in psi+, psi-, phi+, phi-."""
    xi, yi = i_slots
    xj, yj = j_slots

    def occ(*ones):
        o = [0] * n_modes
        for s in ones:
            o[s] += 1
        return tuple(o)

    c = SQRT_HALF
    if kind == "psi+":
        return SparseKet(n_modes, {occ(xi, yj): c, occ(yi, xj): c})
    if kind == "psi-":
        return SparseKet(n_modes, {occ(xi, yj): c, occ(yi, xj): -c})
    if kind == "phi+":
        return SparseKet(n_modes, {occ(xi, xj): c, occ(yi, yj): c})
    if kind == "phi-":
        return SparseKet(n_modes, {occ(xi, xj): c, occ(yi, yj): -c})
    raise ValidationError(f"unknown Bell state {kind!r}")


# --- chain traces ---------------------------------------------------------

def channel_bases(n_sources: int, alternate: bool) -> list[str]:
    """Measurement basis per channel (1-based list index 0 -> channel 1)."""
    out = []
    for c in range(1, 2 * n_sources + 1):
        if c == 1 or c == 2 * n_sources:
            out.append("ab")
            continue
        k = c // 2  # BSM joining channels 2k, 2k+1
        out.append("cd" if alternate and k % 2 == 0 else "ab")
    return out


def source_ensemble(nu: int, eta_l: float, eta_r: float, basis_l: str, basis_r: str) -> list[tuple[tuple[int, int], SparseKet]]:
    """Signal kets of one nu-pair emission, one per loss-mode configuration.

    Each member is tagged with its photon counts in the (L, R) channels and is
    expressed in the measurement basis of each channel. Weights exclude p(nu).
    """
    ket = _lossy_source(1.0, nu, eta_l, eta_r)
    if basis_l == "cd":
        ket = rotate_to_diagonal(ket, 0, 1)
    if basis_r == "cd":
        ket = rotate_to_diagonal(ket, 2, 3)
    groups: dict[Occ, dict[Occ, complex]] = defaultdict(dict)
    for occ, a in ket.amps.items():
        if sum(occ) > MAX_PHOTONS_PER_SOURCE:
            raise TruncationError(f"occupation {occ} exceeds the per-source truncation")
        groups[occ[4:]][occ[:4]] = a
    out = []
    for _, amps in sorted(groups.items()):
        member = SparseKet(4, amps)
        counts = {(o[0] + o[1], o[2] + o[3]) for o in amps}
        if len(counts) != 1:
            raise AssertionError("loss configuration does not fix channel photon numbers")
        out.append((counts.pop(), member))
    return out


def source_outcome_distribution(nu: int, eta_l: float, eta_r: float, basis_l: str, basis_r: str) -> dict[Occ, float]:
    """Joint distribution of measurement-basis occupations ``(xL, yL, xR, yR)``."""
    dist: dict[Occ, float] = defaultdict(float)
    for _, member in source_ensemble(nu, eta_l, eta_r, basis_l, basis_r):
        for o, a in member.amps.items():
            dist[o] += abs(a) ** 2
    return dict(dist)


def _bsm_ok(right: Occ, left: Occ) -> bool:
    return right[2] + left[0] == 1 and right[3] + left[1] == 1


@dataclass
class OracleResult:
    eta_bar: float
    eta_bar_AB: float
    eta_AB: float
    per_sequence: dict[tuple[int, ...], float]
    per_sequence_bell: dict[tuple[int, ...], float]

    @property
    def fidelity(self) -> float:
        return self.eta_AB / self.eta_bar_AB


def _check_oracle_spec(spec: ChainSpec):
    if spec.n_sources > MAX_ORACLE_SOURCES:
        raise ChainTooLongError(f"exact oracle supports at most {MAX_ORACLE_SOURCES} sources")


def sequence_trace(spec: ChainSpec, nu: Sequence[int], _cache=None) -> float:
    """``tr(E rho^(nu))``: probability that all BSMs succeed given pair numbers ``nu``.

    Uses source-mode projectors (E = E+ + E- is diagonal in each BSM basis), so
    the sum runs over classical per-source occupation distributions.
    """
    _check_oracle_spec(spec)
    n = spec.n_sources
    bases = channel_bases(n, spec.rule.sigma_squared == 0.0)
    dists = []
    weight = 1.0
    for k, v in enumerate(nu, start=1):
        weight *= spec.sources[k - 1].pn(v)
        key = (v, spec.eta(2 * k - 1), spec.eta(2 * k), bases[2 * k - 2], bases[2 * k - 1])
        if _cache is not None and key in _cache:
            d = _cache[key]
        else:
            d = source_outcome_distribution(*key)
            if _cache is not None:
                _cache[key] = d
        dists.append(list(d.items()))
    if weight == 0.0:
        return 0.0
    total = 0.0

    def rec(k, prev_occ, acc):
        nonlocal total
        if k == n:
            total += acc
            return
        for occ, pr in dists[k]:
            if k > 0 and not _bsm_ok(prev_occ, occ):
                continue
            rec(k + 1, occ, acc * pr)

    rec(0, None, 1.0)
    return weight * total


def _joint_slots(k: int) -> tuple[tuple[int, int], tuple[int, int]]:
    base = 4 * (k - 1)
    return (base, base + 1), (base + 2, base + 3)


def sequence_detection_trace(spec: ChainSpec, nu: Sequence[int], bell: bool) -> float:
    """Trace computed with physical detection-mode projectors.

    ``bell=False`` returns ``tr(E~ rho^(nu))`` summed over every success
    pattern. ``bell=True`` returns ``tr(E~^- rho^(nu) P)`` where ``E~^-`` is the
    all-minus outcome and ``P`` projects the outer modes onto ``|Psi^->``.
    """
    _check_oracle_spec(spec)
    n = spec.n_sources
    bases = channel_bases(n, spec.rule.sigma_squared == 0.0)
    weight = 1.0
    ens = []
    for k, v in enumerate(nu, start=1):
        weight *= spec.sources[k - 1].pn(v)
        ens.append(source_ensemble(v, spec.eta(2 * k - 1), spec.eta(2 * k), bases[2 * k - 2], bases[2 * k - 1]))
    if weight == 0.0:
        return 0.0
    n_modes = 4 * n
    out_l, _ = _joint_slots(1)
    _, out_r = _joint_slots(n)
    target = bell_state("psi-", out_l, out_r, n_modes) if bell else None
    allowed = E_MINUS_PATTERNS if bell else (E_MINUS_PATTERNS | E_PLUS_PATTERNS)
    bsm_slots = [(_joint_slots(k)[1] + _joint_slots(k + 1)[0]) for k in range(1, n)]
    total = 0.0
    for combo in itertools.product(*ens):
        counts = [c for c, _ in combo]
        if any(counts[k][1] + counts[k + 1][0] != 2 for k in range(n - 1)):
            continue
        if bell and (counts[0][0] != 1 or counts[-1][1] != 1):
            continue
        joint = combo[0][1]
        for _, member in combo[1:]:
            joint = joint.tensor(member)
        for k in range(1, n):
            (xi, yi), (xj, yj) = _joint_slots(k)[1], _joint_slots(k + 1)[0]
            joint = beam_splitter(joint, (xi, yi), (xj, yj))
        # group amplitudes by detection pattern
        groups: dict[Occ, dict[Occ, complex]] = defaultdict(dict)
        for occ, a in joint.amps.items():
            pats = tuple(tuple(occ[s] for s in sl) for sl in bsm_slots)
            if all(p in allowed for p in pats):
                if not bell:
                    total += abs(a) ** 2
                    continue
                outer = tuple(occ[s] if s in out_l + out_r else 0 for s in range(n_modes))
                groups[pats][outer] = groups[pats].get(outer, 0) + a
        if bell:
            for amps in groups.values():
                total += abs(target.inner(SparseKet(n_modes, amps))) ** 2
    return weight * total


def chain_trace(spec: ChainSpec) -> OracleResult:
    """Exact ``eta_bar``, ``eta_bar_AB`` and ``eta_AB`` for ``N <= 3`` sources."""
    _check_oracle_spec(spec)
    n = spec.n_sources
    cache: dict = {}
    per, per_bell = {}, {}
    eta_bar = eta_bar_ab = 0.0
    for nu in itertools.product(range(3), repeat=n):
        t = sequence_trace(spec, nu, cache)
        per[nu] = t
        eta_bar += t
        if nu[0] > 0 and nu[-1] > 0:
            eta_bar_ab += t
    eta_ab = 0.0
    scale = 2 ** (n - 1)
    for nu in itertools.product(range(3), repeat=n):
        if nu[0] == 0 or nu[-1] == 0:
            continue
        b = scale * sequence_detection_trace(spec, nu, bell=True)
        per_bell[nu] = b
        eta_ab += b
    return OracleResult(eta_bar, eta_bar_ab, eta_ab, per, per_bell)


# --- loss before and after a splitter ------------------------------------

def random_truncated_state(rng: np.random.Generator, n_modes: int = 3, max_photons: int = 4) -> SparseKet:
    """Random normalised ket with total photon number <= ``max_photons``."""
    amps = {}
    for occ in itertools.product(range(max_photons + 1), repeat=n_modes):
        if sum(occ) <= max_photons:
            amps[occ] = complex(rng.normal(), rng.normal())
    ket = SparseKet(n_modes, amps)
    return ket.scaled(1.0 / math.sqrt(ket.norm2()))


def loss_equivalence_check(state: SparseKet, eta_d: float, tol: float = 1e-12) -> bool:
    """Loss before vs after a 50:50 splitter on modes 0 and 1 of ``state``.

    Further modes of ``state`` are spectators that may be entangled with the
    two split modes. Returns True when the reduced states agree elementwise.
    """
    n = state.n_modes
    ket = state.extended(2)
    l1, l2 = n, n + 1
    # system 1: splitter, then loss on both outputs
    s1 = beam_splitter(ket, (0,), (1,))
    s1 = apply_loss(s1, (0, 1), (l1, l2), eta_d)
    # system 2: loss on both inputs, then splitter
    s2 = apply_loss(ket, (0, 1), (l1, l2), eta_d)
    s2 = beam_splitter(s2, (0,), (1,))
    r1 = SparseDensityMatrix.from_ket(s1).partial_trace([l1, l2])
    r2 = SparseDensityMatrix.from_ket(s2).partial_trace([l1, l2])
    return r1.isclose(r2, tol)


# --- Monte Carlo ----------------------------------------------------------

def monte_carlo_cross_check(spec: ChainSpec, samples: int, seed: int = 0) -> tuple[float, float]:
    """Sample per-source outcomes and count full-chain BSM success.

    Each source's pair number and both arms' occupations are drawn jointly
    from the exact distribution, so double-pair correlations are kept.
    Returns ``(estimate of eta_bar, binomial standard error)``.
    """
    _check_oracle_spec(spec)
    if samples <= 0:
        raise ValidationError("samples must be positive")
    n = spec.n_sources
    bases = channel_bases(n, spec.rule.sigma_squared == 0.0)
    rng = np.random.default_rng(seed)
    occs = []
    for k in range(1, n + 1):
        table: dict[Occ, float] = defaultdict(float)
        for v in range(3):
            w = spec.sources[k - 1].pn(v)
            if w == 0:
                continue
            d = source_outcome_distribution(v, spec.eta(2 * k - 1), spec.eta(2 * k), bases[2 * k - 2], bases[2 * k - 1])
            for o, pr in d.items():
                table[o] += w * pr
        keys = sorted(table)
        probs = np.array([table[o] for o in keys])
        probs = probs / probs.sum()
        draw = rng.choice(len(keys), size=samples, p=probs)
        occs.append(np.asarray(keys, dtype=np.int64)[draw])
    ok = np.ones(samples, dtype=bool)
    for k in range(n - 1):
        right, left = occs[k], occs[k + 1]
        ok &= (right[:, 2] + left[:, 0] == 1) & (right[:, 3] + left[:, 1] == 1)
    est = float(ok.mean())
    return est, math.sqrt(est * (1.0 - est) / samples)


# --- basis identities -----------------------------------------------------

BELL_MAPPING = (("psi+", "phi-", 1.0), ("phi+", "phi+", 1.0), ("psi-", "psi-", -1.0), ("phi-", "psi+", 1.0))


def bell_mapping_residuals() -> dict[str, float]:
    """Norm of ``|X>_ab - s|Y>_cd`` for each listed basis identity.

    Both qubits of the ``ab`` Bell state are re-expressed in the diagonal
    modes; the residual is zero when the identity holds as a state equation.
    """
    out = {}
    for ab, cd, sign in BELL_MAPPING:
        ket = bell_state(ab, (0, 1), (2, 3), 4)
        ket = rotate_to_diagonal(rotate_to_diagonal(ket, 0, 1), 2, 3)
        diff = ket + bell_state(cd, (0, 1), (2, 3), 4).scaled(-sign)
        out[f"{ab}_ab={'-' if sign < 0 else ''}{cd}_cd"] = math.sqrt(diff.norm2())
    return out


def noon_outcomes(first: Occ = (1, 1)) -> dict[Occ, float]:
    """Diagonal-basis outcome probabilities of the second qubit after projecting the first.

    The four-photon source term is projected onto ``first`` photons in
    ``(a1, b1)``; the remaining ``(a2, b2)`` photons are rotated to ``(c2, d2)``
    and the normalised outcome distribution is returned.
    """
    ket = rotate_to_diagonal(source_component(2), 2, 3)
    ket = ket.project(lambda o: (o[0], o[1]) == tuple(first))
    total = ket.norm2()
    if total == 0.0:
        raise ValidationError(f"first-qubit outcome {first} has zero probability")
    dist: dict[Occ, float] = defaultdict(float)
    for o, a in ket.amps.items():
        dist[(o[2], o[3])] += abs(a) ** 2 / total
    return dict(dist)
