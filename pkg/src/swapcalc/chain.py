"""Efficiency and Bell-state fidelity of passively concatenated swapping chains.

A chain has ``N`` pair sources and ``2N`` channels. Source ``k`` (1-based)
feeds channels ``2k-1`` and ``2k``; BSM ``k`` joins channels ``2k`` and
``2k+1``. Every emission sequence ``nu`` in ``{0,1,2}^N`` contributes
``p(nu) * beta(nu)``, where ``beta(nu)`` is the functional ``L`` applied to the
algebra product of per-BSM coefficients.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Sequence

from scipy.optimize import brentq

from . import kernels
from .algebra import (
    ABSM,
    STANDARD,
    AlgebraElement,
    SigmaRule,
    functional_L,
    functional_sigma_zero,
    product,
    scalar,
    sigma,
)
from .errors import ChainTooLongError, UndefinedFidelityError, ValidationError

MAX_P1 = 8.0 / 27.0
DEFAULT_MAX_SOURCES = 16
GAMMA = 0.75
ZERO_PAIRS = frozenset({(0, 0), (0, 1), (1, 0)})

__all__ = [
    "ABSM",
    "STANDARD",
    "ChainSpec",
    "LinkMetrics",
    "SourceStats",
    "beta_hat_sequence",
    "beta_pair",
    "beta_sequence",
    "bell_efficiency",
    "bell_fidelity",
    "coincidence_efficiency",
    "iter_sequences",
    "link_metrics",
    "lost_pair_fidelity",
    "p_sequence",
    "terminated_efficiency",
]


def _solve_lambda_sq(p1: float) -> float:
    """Invert ``p1 = 2 x (1-x)^2`` on ``[0, 1/3]``."""
    if p1 == 0.0:
        return 0.0
    if abs(p1 - MAX_P1) < 1e-15:
        return 1.0 / 3.0
    return brentq(lambda x: 2.0 * x * (1.0 - x) ** 2 - p1, 0.0, 1.0 / 3.0, xtol=1e-17, rtol=1e-15)


@dataclass(frozen=True)
class SourceStats:
    """Zero-, one- and two-pair emission probabilities of one source."""

    p1: float
    p2: float
    p0: float
    lambda_sq: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.p1 <= MAX_P1 + 1e-15:
            raise ValidationError(f"p1 must lie in [0, 8/27], got {self.p1}")
        if self.p2 < 0.0 or self.p0 < -1e-15:
            raise ValidationError(f"invalid pair statistics p0={self.p0}, p2={self.p2}")

    @classmethod
    def exact(cls, p1: float) -> "SourceStats":
        """Two-mode squeezed vacuum statistics, ``p(n) = (n+1)(1-x)^2 x^n``."""
        if not 0.0 <= p1 <= MAX_P1 + 1e-15:
            raise ValidationError(f"p1 must lie in [0, 8/27], got {p1}")
        x = _solve_lambda_sq(min(p1, MAX_P1))
        return cls.from_lambda_sq(x, p1=p1)

    @classmethod
    def from_lambda_sq(cls, x: float, p1: float | None = None) -> "SourceStats":
        if not 0.0 <= x <= 1.0 / 3.0 + 1e-15:
            raise ValidationError(f"lambda_sq must lie in [0, 1/3], got {x}")
        if p1 is None:
            p1 = 2.0 * (1.0 - x) ** 2 * x
        p2 = 3.0 * (1.0 - x) ** 2 * x * x
        return cls(p1=p1, p2=p2, p0=1.0 - p1 - p2, lambda_sq=x)

    @classmethod
    def approx(cls, p1: float, gamma: float = GAMMA) -> "SourceStats":
        """Quadratic double-pair approximation ``p2 = gamma * p1**2``."""
        p2 = gamma * p1 * p1
        return cls(p1=p1, p2=p2, p0=1.0 - p1 - p2)

    @classmethod
    def single_pair_only(cls, p1: float) -> "SourceStats":
        return cls(p1=p1, p2=0.0, p0=1.0 - p1)

    def pn(self, n: int) -> float:
        return (self.p0, self.p1, self.p2)[n]

    @property
    def triple(self) -> tuple[float, float, float]:
        return (self.p0, self.p1, self.p2)


@dataclass(frozen=True)
class ChainSpec:
    """``N`` sources, ``2N`` channel transmissions and the BSM protocol."""

    sources: tuple[SourceStats, ...]
    channel_eta: tuple[float, ...]
    rule: SigmaRule = STANDARD
    lossless_terminals: bool = True

    def __post_init__(self):
        n = len(self.sources)
        if n < 2:
            raise ValidationError("a chain needs at least two sources")
        if len(self.channel_eta) != 2 * n:
            raise ValidationError(f"expected {2 * n} channel efficiencies, got {len(self.channel_eta)}")
        for i, e in enumerate(self.channel_eta, start=1):
            if not 0.0 <= e <= 1.0:
                raise ValidationError(f"eta_{i}={e} outside [0, 1]")
        if self.lossless_terminals and (self.channel_eta[0] != 1.0 or self.channel_eta[-1] != 1.0):
            raise ValidationError("outer channels must be lossless unless lossless_terminals=False")

    @classmethod
    def build(
        cls,
        p: Sequence[float | SourceStats],
        eta: Sequence[float],
        rule: SigmaRule = STANDARD,
        *,
        mode: str = "exact",
        eta_d: float = 1.0,
        lossless_terminals: bool = True,
    ) -> "ChainSpec":
        """Build a spec, folding detector efficiency into the BSM channels.

        With ``lossless_terminals`` the outer channels are forced to 1 and left
        unfolded; otherwise ``eta_d`` multiplies every channel.
        """
        if not 0.0 <= eta_d <= 1.0:
            raise ValidationError(f"eta_d={eta_d} outside [0, 1]")
        sources = tuple(_as_stats(x, mode) for x in p)
        eta = [float(e) for e in eta]
        if len(eta) == 2 * len(sources) - 2:
            eta = [1.0] + eta + [1.0]
        folded = []
        for i, e in enumerate(eta):
            outer = i == 0 or i == len(eta) - 1
            if outer and lossless_terminals:
                folded.append(1.0)
            else:
                folded.append(e * eta_d)
        return cls(sources, tuple(folded), rule, lossless_terminals)

    @property
    def n_sources(self) -> int:
        return len(self.sources)

    def eta(self, i: int) -> float:
        """1-based channel transmission."""
        return self.channel_eta[i - 1]

    def with_rule(self, rule: SigmaRule) -> "ChainSpec":
        return ChainSpec(self.sources, self.channel_eta, rule, self.lossless_terminals)


def _as_stats(x, mode: str) -> SourceStats:
    if isinstance(x, SourceStats):
        return x
    if mode == "exact":
        return SourceStats.exact(float(x))
    if mode == "approx":
        return SourceStats.approx(float(x))
    raise ValidationError(f"unknown pair-statistics mode {mode!r}")


@dataclass(frozen=True)
class LinkMetrics:
    eta_bar_chain: float
    eta_bar_AB: float
    eta_AB: float

    @property
    def fidelity(self) -> float:
        if self.eta_bar_AB <= 0.0:
            raise UndefinedFidelityError("terminated efficiency is zero; fidelity undefined")
        return self.eta_AB / self.eta_bar_AB


def beta_pair(m: int, n: int, eta_i: float, eta_j: float, left_source: int, right_source: int) -> AlgebraElement:
    """Algebra-valued success coefficient of one BSM.

    ``m`` pairs come from the left source (channel ``i``), ``n`` from the
    right source (channel ``j``).
    """
    if m not in (0, 1, 2) or n not in (0, 1, 2):
        raise ValidationError(f"pair counts must be in {{0,1,2}}, got ({m}, {n})")
    sl = sigma(left_source)
    sr = sigma(right_source)
    qi = 1.0 - eta_i
    qj = 1.0 - eta_j
    if (m, n) in ZERO_PAIRS:
        return AlgebraElement()
    if (m, n) == (1, 1):
        return scalar(0.5 * eta_i * eta_j)
    if (m, n) == (2, 0):
        return sl.scale(eta_i**2 / 3.0)
    if (m, n) == (0, 2):
        return sr.scale(eta_j**2 / 3.0)
    if (m, n) == (2, 1):
        return scalar(eta_i * eta_j * qi) + sl.scale(eta_i**2 * qj / 3.0)
    if (m, n) == (1, 2):
        return scalar(eta_i * eta_j * qj) + sr.scale(eta_j**2 * qi / 3.0)
    return scalar(2.0 * eta_i * eta_j * qi * qj) + sl.scale(eta_i**2 * qj**2 / 3.0) + sr.scale(eta_j**2 * qi**2 / 3.0)


def _check_nu(spec: ChainSpec, nu: Sequence[int]) -> tuple[int, ...]:
    nu = tuple(int(v) for v in nu)
    if len(nu) != spec.n_sources:
        raise ValidationError(f"sequence length {len(nu)} != {spec.n_sources} sources")
    if any(v not in (0, 1, 2) for v in nu):
        raise ValidationError(f"sequence entries must be 0, 1 or 2: {nu}")
    return nu


def bsm_factors(spec: ChainSpec, nu: Sequence[int]) -> list[AlgebraElement]:
    nu = _check_nu(spec, nu)
    return [
        beta_pair(nu[k], nu[k + 1], spec.eta(2 * k + 2), spec.eta(2 * k + 3), k + 1, k + 2)
        for k in range(spec.n_sources - 1)
    ]


def beta_sequence(spec: ChainSpec, nu: Sequence[int]) -> float:
    return functional_L(product(bsm_factors(spec, nu), spec.rule))


def beta_hat_sequence(spec: ChainSpec, nu: Sequence[int]) -> float:
    """Chain success with exactly one detected photon from each adjacent source."""
    out = 1.0
    for f in bsm_factors(spec, nu):
        out *= functional_sigma_zero(f)
    return out


def p_sequence(spec: ChainSpec, nu: Sequence[int]) -> float:
    nu = _check_nu(spec, nu)
    out = 1.0
    for s, v in zip(spec.sources, nu):
        out *= s.pn(v)
    return out


def lost_pair_fidelity(n2: int) -> float:
    if n2 < 0:
        raise ValidationError("n2 must be non-negative")
    return 0.25 + 0.75 * (2.0 / 3.0) ** n2


def iter_sequences(n: int, prune: bool = True) -> Iterator[tuple[int, ...]]:
    """Lexicographic emission sequences, skipping zero-coefficient neighbours."""
    if not prune:
        yield from itertools.product(range(3), repeat=n)
        return

    def rec(prefix):
        if len(prefix) == n:
            yield tuple(prefix)
            return
        for v in range(3):
            if prefix and (prefix[-1], v) in ZERO_PAIRS:
                continue
            prefix.append(v)
            yield from rec(prefix)
            prefix.pop()

    yield from rec([])


def reference_metrics(spec: ChainSpec, prune: bool = True) -> LinkMetrics:
    """Slow sum through the generic algebra; used to check the kernels."""
    tot = [0.0, 0.0, 0.0]
    for nu in iter_sequences(spec.n_sources, prune):
        p = p_sequence(spec, nu)
        if p == 0.0:
            continue
        factors = bsm_factors(spec, nu)
        prod = product(factors, spec.rule)
        beta = functional_L(prod)
        tot[0] += p * beta
        if nu[0] > 0 and nu[-1] > 0:
            tot[1] += p * beta
        if nu[0] == 1 and nu[-1] == 1:
            hat = 1.0
            for f in factors:
                hat *= functional_sigma_zero(f)
            tot[2] += p * (0.25 * beta + 0.75 * (2.0 / 3.0) ** nu.count(2) * hat)
    return LinkMetrics(*tot)


def transfer_metrics(spec: ChainSpec) -> LinkMetrics:
    """Same sums in O(N) by propagating per-source partial sums.

    The state for each value of the latest ``nu_k`` holds the weighted sums of
    the scalar and ``sigma_k`` coefficients; no sequence is ever materialised.
    """
    from ._kernels_py import bsm_abc

    s = spec.rule.sigma_squared
    n = spec.n_sources
    probs = [src.triple for src in spec.sources]
    g = (1.0, 1.0, 2.0 / 3.0)

    def run(first_allowed, last_allowed):
        v = [[probs[0][a], 0.0] if a in first_allowed else [0.0, 0.0] for a in range(3)]
        for k in range(n - 1):
            ei, ej = spec.eta(2 * k + 2), spec.eta(2 * k + 3)
            nv = [[0.0, 0.0] for _ in range(3)]
            for b in range(3):
                pb = probs[k + 1][b]
                for a in range(3):
                    c0, c1 = v[a]
                    if c0 == 0.0 and c1 == 0.0:
                        continue
                    A, B, C = bsm_abc(a, b, ei, ej)
                    t = c0 + c1
                    nv[b][0] += pb * (A * t + B * (c0 + s * c1))
                    nv[b][1] += pb * C * t
            v = nv
        return sum(v[a][0] + v[a][1] for a in last_allowed)

    eta_bar = run((0, 1, 2), (0, 1, 2))
    eta_bar_ab = run((1, 2), (1, 2))
    beta_11 = run((1,), (1,))
    u = [0.0, probs[0][1], 0.0]
    for k in range(n - 1):
        ei, ej = spec.eta(2 * k + 2), spec.eta(2 * k + 3)
        nu_ = [0.0, 0.0, 0.0]
        for b in range(3):
            for a in range(3):
                if u[a] == 0.0:
                    continue
                A = bsm_abc(a, b, ei, ej)[0]
                nu_[b] += u[a] * probs[k + 1][b] * g[b] * A
        u = nu_
    eta_ab = 0.25 * beta_11 + 0.75 * u[1]
    return LinkMetrics(eta_bar, eta_bar_ab, eta_ab)


def link_metrics(spec: ChainSpec, max_sources: int = DEFAULT_MAX_SOURCES, method: str = "enumerate") -> LinkMetrics:
    """All three efficiencies in one pass.

    ``method="enumerate"`` runs the pruned exhaustive sum (capped at
    ``max_sources``); ``method="transfer"`` uses the linear-time recursion and
    has no cap.
    """
    if method == "transfer":
        return transfer_metrics(spec)
    if method != "enumerate":
        raise ValidationError(f"unknown method {method!r}")
    if spec.n_sources > max_sources:
        raise ChainTooLongError(
            f"{spec.n_sources} sources exceeds the exhaustive-sum cap of {max_sources}; use method='transfer'"
        )
    probs = [src.triple for src in spec.sources]
    a, b, c, _ = kernels.chain_sums(probs, list(spec.channel_eta), spec.rule.sigma_squared)
    return LinkMetrics(a, b, c)


def coincidence_efficiency(spec: ChainSpec, **kw) -> float:
    return link_metrics(spec, **kw).eta_bar_chain


def terminated_efficiency(spec: ChainSpec, **kw) -> float:
    return link_metrics(spec, **kw).eta_bar_AB


def bell_efficiency(spec: ChainSpec, **kw) -> float:
    return link_metrics(spec, **kw).eta_AB


def bell_fidelity(spec: ChainSpec, **kw) -> float:
    return link_metrics(spec, **kw).fidelity


def balanced_chain(ell: int, eta: float, eta_r: float, p: float | SourceStats, rule: SigmaRule = STANDARD, mode: str = "exact") -> ChainSpec:
    """Chain of ``ell`` balanced Type-I links (``2*ell`` sources).

    Elementary-link BSMs see ``eta`` on both sides; repeater-node BSMs see
    ``eta_r``.
    """
    if ell < 1:
        raise ValidationError("ell must be >= 1")
    n = 2 * ell
    bsm = [eta if k % 2 == 0 else eta_r for k in range(n - 1)]
    channels = [1.0]
    for e in bsm:
        channels += [e, e]
    channels.append(1.0)
    return ChainSpec.build([p] * n, channels, rule, mode=mode)
