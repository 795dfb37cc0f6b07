"""Balanced and imbalanced Type-I repeater chains.

Closed-form fidelity to first order in the emission probability, the allowed
emission probability at a target fidelity, the ABSM gain, and the two-level
repeater efficiency built from elementary-link efficiencies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from scipy.optimize import brentq

from .algebra import ABSM, STANDARD, SigmaRule
from .chain import MAX_P1, ChainSpec, SourceStats, balanced_chain, link_metrics
from .errors import UnreachableFidelityError, ValidationError

FIBER_DB_PER_KM = 0.15
DEFAULT_ELL_MAX = 32


def db_to_eta(db: float) -> float:
    return 10.0 ** (-db / 10.0)


def eta_to_db(eta: float) -> float:
    return -10.0 * math.log10(eta)


def loss_to_distance_km(total_loss_db: float) -> float:
    return total_loss_db / FIBER_DB_PER_KM


def per_channel_eta(total_loss_db: float, ell: int, eta_d: float = 1.0) -> float:
    """Channel efficiency when the combined loss is split over ``2*ell`` channels."""
    return db_to_eta(total_loss_db) ** (1.0 / (2 * ell)) * eta_d


@dataclass(frozen=True)
class BalancedChainSpec:
    """``ell`` balanced Type-I links with BSM-channel efficiency ``eta``."""

    ell: int
    eta: float
    eta_r: float
    p: float = 0.0
    rule: SigmaRule = STANDARD

    def __post_init__(self):
        if int(self.ell) != self.ell or self.ell < 1:
            raise ValidationError("ell must be a positive integer")
        for name in ("eta", "eta_r"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name}={v} outside [0, 1]")
        if not 0.0 <= self.p <= MAX_P1:
            raise ValidationError(f"p={self.p} outside [0, 8/27]")

    @property
    def sigma(self) -> float:
        return self.rule.sigma

    @property
    def n_sources(self) -> int:
        return 2 * self.ell

    def with_p(self, p: float) -> "BalancedChainSpec":
        return BalancedChainSpec(self.ell, self.eta, self.eta_r, p, self.rule)

    def with_rule(self, rule: SigmaRule) -> "BalancedChainSpec":
        return BalancedChainSpec(self.ell, self.eta, self.eta_r, self.p, rule)

    def to_chain(self, mode: str = "exact") -> ChainSpec:
        return balanced_chain(self.ell, self.eta, self.eta_r, self.p, self.rule, mode)


@dataclass(frozen=True)
class ErrorTerms:
    eps0: float
    eps0_boundary: float
    eps_plus: float
    eps_plus_boundary: float

    @property
    def total(self) -> float:
        return self.eps0 + self.eps0_boundary + self.eps_plus + self.eps_plus_boundary


def error_terms(ell: int, eta: float, eta_r: float, sigma: float) -> ErrorTerms:
    """First-order error weights of a balanced chain.

    ``eps0``/``eps0_boundary`` collect sequences with no vacuum emission;
    the ``plus`` pair collects the rest and vanishes for a single link.
    """
    q, qr = 1.0 - eta, 1.0 - eta_r
    e0b = q
    e0 = 0.5 * (ell - 1) * (5.0 + sigma) * q * qr
    if ell == 1:
        return ErrorTerms(e0, e0b, 0.0, 0.0)
    epb = 0.25 * (1.0 + sigma) * (1.0 + sigma * (ell - 2)) * q
    ep = 0.25 * (ell - 2) * (1.0 + sigma) ** 2 * (2.0 + sigma * (ell - 3)) * q * qr
    return ErrorTerms(e0, e0b, ep, epb)


def _numerator_weight(t: ErrorTerms, sigma: float) -> float:
    return t.eps_plus + (11.0 + sigma) / (5.0 + sigma) * t.eps0


def closed_form_fidelity(spec: BalancedChainSpec) -> float:
    """Bell-state fidelity of the balanced chain with the O(p^2) remainder dropped."""
    t = error_terms(spec.ell, spec.eta, spec.eta_r, spec.sigma)
    return (1.0 + spec.p * _numerator_weight(t, spec.sigma)) / (1.0 + 4.0 * spec.p * t.total)


@dataclass(frozen=True)
class AllowedProbability:
    """Emission probability meeting a fidelity target.

    ``raw`` is the unclamped first-order inversion; ``p`` is capped at 8/27
    and ``clamped`` records whether the cap was applied.
    """

    p: float
    raw: float
    clamped: bool


def allowed_emission_probability(F: float, ell: int, eta: float, eta_r: float, rule: SigmaRule = STANDARD) -> AllowedProbability:
    """Invert the closed-form fidelity for ``p`` at fixed ``F``."""
    if not 0.25 < F < 1.0:
        raise ValidationError("target fidelity must lie in (1/4, 1)")
    BalancedChainSpec(ell, eta, eta_r, 0.0, rule)  # validation only
    sigma = rule.sigma
    t = error_terms(ell, eta, eta_r, sigma)
    denom = 4.0 * F * t.total - _numerator_weight(t, sigma)
    if denom <= 0.0:
        raise UnreachableFidelityError(f"no positive emission probability reaches F={F}")
    raw = (1.0 - F) / denom
    if raw > MAX_P1:
        return AllowedProbability(MAX_P1, raw, True)
    return AllowedProbability(raw, raw, False)


def elementary_gain(F: float, ell: int, eta: float, eta_r: float) -> float:
    """ABSM gain in elementary-link efficiency, ``(p_absm / p_standard)**2``."""
    p0 = allowed_emission_probability(F, ell, eta, eta_r, ABSM).raw
    p1 = allowed_emission_probability(F, ell, eta, eta_r, STANDARD).raw
    return (p0 / p1) ** 2


def exact_emission_probability(F: float, ell: int, eta: float, eta_r: float, rule: SigmaRule = STANDARD, mode: str = "exact") -> float:
    """Root of the enumerated fidelity ``F(p) = F`` on ``(0, 8/27]``."""
    if not 0.25 < F < 1.0:
        raise ValidationError("target fidelity must lie in (1/4, 1)")

    def gap(p):
        return link_metrics(balanced_chain(ell, eta, eta_r, p, rule, mode), method="transfer").fidelity - F

    lo = 1e-12
    if gap(lo) <= 0.0:
        raise UnreachableFidelityError(f"F={F} not reachable even as p -> 0")
    if gap(MAX_P1) > 0.0:
        return MAX_P1
    return brentq(gap, lo, MAX_P1, xtol=1e-15, rtol=1e-13)


def exact_gain(F: float, ell: int, eta: float, eta_r: float, mode: str = "exact") -> float:
    """Gain using the enumerated fidelity instead of its first-order form."""
    p0 = exact_emission_probability(F, ell, eta, eta_r, ABSM, mode)
    p1 = exact_emission_probability(F, ell, eta, eta_r, STANDARD, mode)
    return (p0 / p1) ** 2


# --- two-level repeater ---------------------------------------------------

@dataclass(frozen=True)
class RepeaterMetrics:
    mu1: float
    P2: float
    eta_tilde_AB: float
    eta_bar_links: tuple[float, ...]
    eta_bar_AB: float

    @property
    def mu2(self) -> float:
        return self.mu1 / self.P2


def pair_rate(metrics: RepeaterMetrics, R: float) -> float:
    """Entangled pairs per second at multiplexed source rate ``R``."""
    if R < 0:
        raise ValidationError("rate must be non-negative")
    return R * metrics.eta_tilde_AB


def _sub_chain(spec: ChainSpec, first: int, last: int) -> ChainSpec:
    """Sources ``first..last`` (1-based, inclusive) as a stand-alone chain."""
    chans = spec.channel_eta[2 * (first - 1): 2 * last]
    return ChainSpec(spec.sources[first - 1: last], chans, spec.rule, lossless_terminals=False)


def two_level_efficiency(spec: ChainSpec, links: Sequence[tuple[int, int]] | None = None, method: str = "transfer") -> RepeaterMetrics:
    """Pairs per source mode when every repeater-node BSM fires at once.

    ``links`` lists the (first, last) source of each elementary link; by
    default sources are grouped in consecutive pairs.
    """
    n = spec.n_sources
    if links is None:
        if n % 2:
            raise ValidationError("default partition needs an even number of sources")
        links = [(2 * i - 1, 2 * i) for i in range(1, n // 2 + 1)]
    links = [tuple(l) for l in links]
    if links[0][0] != 1 or links[-1][1] != n or any(b[0] != a[1] + 1 for a, b in zip(links, links[1:])):
        raise ValidationError("elementary links must tile the chain")
    effs = []
    for first, last in links:
        if last - first < 1:
            raise ValidationError("each elementary link needs at least two sources")
        effs.append(link_metrics(_sub_chain(spec, first, last), method=method).eta_bar_AB)
    if any(e <= 0.0 for e in effs):
        raise ValidationError("an elementary link has zero efficiency")
    ell = len(effs)
    total = link_metrics(spec, method=method).eta_bar_AB
    mu1 = sum(1.0 / e for e in effs) / ell
    P2 = total / math.prod(effs)
    return RepeaterMetrics(mu1, P2, P2 / mu1, tuple(effs), total)


def leading_order_link_efficiency(ell: int, p: float, eta: float, eta_r: float) -> float:
    """``p^2 eta^2 eta_r^(2(ell-1)) / 2^(2 ell - 1)``: the published balanced-chain form."""
    return p * p * eta * eta * eta_r ** (2 * (ell - 1)) / 2.0 ** (2 * ell - 1)


def link_efficiency(total_loss_db: float, F: float, ell: int, eta_r: float, eta_d: float, rule: SigmaRule = STANDARD, model: str = "closed_form") -> float:
    """Balanced-chain ``eta_tilde`` at the emission probability allowed by ``F``.

    ``model="closed_form"`` uses the published leading-order expression;
    ``model="two_level"`` evaluates the two-level formulas on the enumerated
    chain.
    """
    eta = per_channel_eta(total_loss_db, ell, eta_d)
    p = allowed_emission_probability(F, ell, eta, eta_r, rule).p
    if model == "closed_form":
        return leading_order_link_efficiency(ell, p, eta, eta_r)
    if model == "two_level":
        return two_level_efficiency(balanced_chain(ell, eta, eta_r, p, rule)).eta_tilde_AB
    raise ValidationError(f"unknown model {model!r}")


def optimal_link_count(total_loss_db: float, F: float, eta_r: float, eta_d: float, ell_max: int = DEFAULT_ELL_MAX, rule: SigmaRule = STANDARD, model: str = "closed_form") -> tuple[int, float]:
    """``(ell, eta_tilde)`` maximising the link efficiency; ties go to smaller ``ell``."""
    if ell_max < 1:
        raise ValidationError("ell_max must be >= 1")
    best = (0, -1.0)
    for ell in range(1, ell_max + 1):
        e = link_efficiency(total_loss_db, F, ell, eta_r, eta_d, rule, model)
        if e > best[1]:
            best = (ell, e)
    return best


def repeaterless_crossover(F: float, eta_r: float, eta_d: float, rule: SigmaRule = STANDARD, start_db: float = 1.0, stop_db: float = 200.0, step_db: float = 0.1, model: str = "closed_form", ell_max: int = DEFAULT_ELL_MAX) -> tuple[float, int, float] | None:
    """First loss on the grid where the optimal envelope beats ``eta_c``.

    Returns ``(loss_dB, ell_opt, eta_tilde)`` or None when never crossed.
    """
    steps = int(round((stop_db - start_db) / step_db))
    for i in range(steps + 1):
        db = start_db + i * step_db
        ell, e = optimal_link_count(db, F, eta_r, eta_d, ell_max, rule, model)
        if e > db_to_eta(db):
            return db, ell, e
    return None


# --- imbalanced chains ----------------------------------------------------

def build_imbalanced_chain(kind: str, ell: int, eta2: float, eta3: float, eta_r: float, p: float | SourceStats, rule: SigmaRule = STANDARD, mode: str = "exact") -> ChainSpec:
    """Chain of ``ell`` imbalanced Type-I links.

    ``IA`` flips the imbalance on every other link; ``IB`` repeats it.
    Repeater-node BSMs see ``eta_r`` on both sides.
    """
    kind = kind.upper()
    if kind not in ("IA", "IB"):
        raise ValidationError("kind must be 'IA' or 'IB'")
    if ell < 1:
        raise ValidationError("ell must be >= 1")
    channels = [1.0]
    for i in range(ell):
        left, right = (eta3, eta2) if kind == "IA" and i % 2 else (eta2, eta3)
        channels += [left, right]
        if i < ell - 1:
            channels += [eta_r, eta_r]
    channels.append(1.0)
    return ChainSpec.build([p] * (2 * ell), channels, rule, mode=mode)


def three_pair_ratio(p: float, fidelity: float) -> float:
    """Size of the neglected three-pair term against the double-pair infidelity.

    Returns ``(p3 / p1) / (1 - F)`` with TMSV statistics at single-pair
    probability ``p``. Cells where this exceeds a user threshold are those in
    which three-pair emissions, absent from the model, would dominate.
    """
    stats = SourceStats.exact(p)
    x = stats.lambda_sq
    if p == 0.0:
        return 0.0
    p3 = 4.0 * (1.0 - x) ** 2 * x ** 3
    infid = 1.0 - fidelity
    if infid <= 0.0:
        return math.inf
    return p3 / stats.p1 / infid
