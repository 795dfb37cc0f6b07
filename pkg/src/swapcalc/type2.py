"""Operating point and maximum efficiency of the double-swap (Type-II) link.

The link has three sources (outer, central, outer) and two BSMs with channel
efficiencies ``eta2, eta3`` (first BSM) and ``eta4, eta5`` (second BSM). The
analytic optimum maximises ``p12*p34*p56`` at fixed infidelity ``delta_f``
to first order; a derivative-free numeric optimiser over the same first-order
infidelity, assembled independently from chain-model coefficients, serves as
the cross-check. The cascaded variant replaces both outer sources by a
multiplexed pair of sources joined by an internal swap (five sources total).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .algebra import ABSM, STANDARD, SigmaRule
from .chain import GAMMA, MAX_P1, ChainSpec, SourceStats, beta_hat_sequence, beta_sequence, lost_pair_fidelity
from .errors import ValidationError
from .repeater import db_to_eta, error_terms

LOSSY_LIMIT_ETA = 1e-9
M_BOUND_FACTOR = 0.1  # "M much less than the bound" means at most this fraction of it


def weight_w(b: float, gamma: float = GAMMA) -> float:
    """Central-source weight ``2 / (1 + sqrt(1 + 8 gamma b))``."""
    return 2.0 / (1.0 + math.sqrt(1.0 + 8.0 * gamma * b))


def lam(eta_i: float, eta_j: float) -> float:
    """Imbalance ``eta_i (1-eta_j) / (eta_j (1-eta_i))``; ``inf`` at ``eta_i = 1``."""
    if eta_i >= 1.0:
        if eta_j >= 1.0:
            raise ValidationError("imbalance undefined with both channels lossless")
        return math.inf
    if eta_j <= 0.0:
        return math.inf
    return eta_i * (1.0 - eta_j) / (eta_j * (1.0 - eta_i))


@dataclass(frozen=True)
class CascadedConfig:
    M: float
    eta_r: float

    def __post_init__(self):
        if self.M < 1:
            raise ValidationError("multiplexing factor M must be >= 1")
        if not 0.0 < self.eta_r < 1.0:
            raise ValidationError("eta_r must lie in (0, 1)")

    def m_bound(self, delta_f: float) -> float:
        return 32.0 / (self.eta_r * delta_f) ** 2


@dataclass(frozen=True)
class Type2Spec:
    eta2: float
    eta3: float
    eta4: float
    eta5: float
    rule: SigmaRule = STANDARD
    alpha_receiver: float = 0.0
    cascaded: CascadedConfig | None = None

    def __post_init__(self):
        for i, e in enumerate(self.etas, start=2):
            if not 0.0 <= e <= 1.0:
                raise ValidationError(f"eta{i}={e} outside [0, 1]")
        if not 0.0 <= self.alpha_receiver < 1.0:
            raise ValidationError("alpha_receiver must lie in [0, 1)")

    @property
    def etas(self) -> tuple[float, float, float, float]:
        return (self.eta2, self.eta3, self.eta4, self.eta5)

    @property
    def sigma(self) -> float:
        return self.rule.sigma

    @property
    def lambdas(self) -> tuple[float, float]:
        return lam(self.eta2, self.eta3), lam(self.eta5, self.eta4)

    def with_rule(self, rule: SigmaRule) -> "Type2Spec":
        return replace(self, rule=rule)

    @classmethod
    def from_split(cls, loss2_db: float, loss5_db: float, bsm_loss_db: float = 20.0, **kw) -> "Type2Spec":
        """Split ``bsm_loss_db`` per BSM; ``loss2_db``/``loss5_db`` go to the outer channels."""
        for x in (loss2_db, loss5_db):
            if not 0.0 <= x <= bsm_loss_db:
                raise ValidationError("split outside [0, bsm_loss_db]")
        return cls(db_to_eta(loss2_db), db_to_eta(bsm_loss_db - loss2_db),
                   db_to_eta(bsm_loss_db - loss5_db), db_to_eta(loss5_db), **kw)


@dataclass(frozen=True)
class Type2Betas:
    b111: float
    b121_hat: float
    b121: float
    b211: float
    b112: float
    b202: float


def type2_betas(spec: Type2Spec) -> Type2Betas:
    """Leading-order coincidence coefficients of the three-source link."""
    e2, e3, e4, e5 = spec.etas
    s = spec.sigma
    a = spec.alpha_receiver
    b111 = 0.25 * e2 * e3 * e4 * e5
    hat = e2 * e3 * e4 * e5 * (1 - e3) * (1 - e4)
    b121 = (hat + s / 3.0 * e3 ** 2 * e4 ** 2 * (1 - e2) * (1 - e5)
            + e2 * e3 * e4 ** 2 * (1 - e3) * (1 - e5) / 3.0
            + e3 ** 2 * e4 * e5 * (1 - e2) * (1 - e4) / 3.0)
    b211 = 0.5 * e2 * e3 * e4 * e5 * (1 - e2) + e2 ** 2 * e4 * e5 * (1 - e3) / 6.0
    b112 = 0.5 * e5 * e4 * e3 * e2 * (1 - e5) + e5 ** 2 * e3 * e2 * (1 - e4) / 6.0
    b202 = e2 ** 2 * e5 ** 2 / 9.0
    return Type2Betas(b111, hat, b121, (1 - a) * b211, (1 - a) * b112, (1 - a) ** 2 * b202)


def three_source_chain(spec: Type2Spec, p: Sequence[float] = (0.0, 0.0, 0.0)) -> ChainSpec:
    e2, e3, e4, e5 = spec.etas
    return ChainSpec(tuple(SourceStats.approx(x) for x in p), (1.0, e2, e3, e4, e5, 1.0), spec.rule)


def cascaded_chain(spec: Type2Spec, p: Sequence[float] = (0.0, 0.0, 0.0)) -> ChainSpec:
    """Five-source chain; ``p = (p_outer_left, p_central, p_outer_right)``."""
    if spec.cascaded is None:
        raise ValidationError("spec has no cascaded configuration")
    r = spec.cascaded.eta_r
    e2, e3, e4, e5 = spec.etas
    p1, p2, p3 = p
    stats = tuple(SourceStats.approx(x) for x in (p1, p1, p2, p3, p3))
    return ChainSpec(stats, (1.0, r, r, e2, e3, e4, e5, r, r, 1.0), spec.rule)


@dataclass(frozen=True)
class OperatingPoint:
    p12: float
    p34: float
    p56: float
    p: float
    b: float
    w: float
    lambdas: tuple[float, float]
    clamped: bool = False

    @property
    def probabilities(self) -> tuple[float, float, float]:
        return (self.p12, self.p34, self.p56)


@dataclass(frozen=True)
class EfficiencyBreakdown:
    pi0: float
    beta111: float
    pi_hat: float
    eta_hat_AB: float


@dataclass(frozen=True)
class _Weights:
    b12: float
    b34: float
    b56: float
    b: float
    main: float  # deterministic-source coincidence coefficient of the full chain


def _plain_weights(spec: Type2Spec) -> _Weights:
    c = type2_betas(spec)
    b12, b56 = c.b211, c.b112
    b34 = 0.75 * c.b121 - 0.5 * c.b121_hat
    if b12 <= 0 or b56 <= 0 or b34 <= 0:
        raise ValidationError("a Lagrange weight vanishes for these channel efficiencies")
    return _Weights(b12, b34, b56, b34 * c.b202 / (b12 * b56), c.b111)


def _cascaded_weights(spec: Type2Spec) -> _Weights:
    ch = cascaded_chain(spec)

    def B(*nu):
        return beta_sequence(ch, nu)

    def H(*nu):
        return beta_hat_sequence(ch, nu)

    b12 = 0.5 * (B(2, 1, 1, 1, 1) + 0.75 * B(1, 2, 1, 1, 1) - 0.5 * H(1, 2, 1, 1, 1))
    b56 = 0.5 * (B(1, 1, 1, 1, 2) + 0.75 * B(1, 1, 1, 2, 1) - 0.5 * H(1, 1, 1, 2, 1))
    b34 = 0.75 * (B(1, 1, 2, 1, 1) - 2.0 / 3.0 * H(1, 1, 2, 1, 1) + B(2, 0, 2, 1, 1)
                  + B(1, 1, 2, 0, 2) + 0.75 * B(2, 0, 2, 0, 2))
    if b12 <= 0 or b56 <= 0 or b34 <= 0:
        raise ValidationError("a Lagrange weight vanishes for these channel efficiencies")
    b = 9.0 / 16.0 * b34 * B(1, 2, 0, 2, 1) / (b12 * b56)
    return _Weights(b12, b34, b56, b, B(1, 1, 1, 1, 1))


def _clamp(ps: Sequence[float]) -> tuple[tuple[float, ...], bool]:
    clamped = any(x > MAX_P1 for x in ps)
    return tuple(min(x, MAX_P1) for x in ps), clamped


def _check_delta_f(delta_f: float):
    if not 0.0 < delta_f < 0.75:
        raise ValidationError("delta_f must lie in (0, 3/4)")


def lagrange_operating_point(spec: Type2Spec, delta_f: float) -> OperatingPoint:
    """First-order optimal ``(p12, p34, p56)`` for the three-source link."""
    _check_delta_f(delta_f)
    wt = _plain_weights(spec)
    w = weight_w(wt.b)
    p = 16.0 * wt.main * delta_f / (36.0 + 27.0 * wt.b * w)
    ps, clamped = _clamp((p / wt.b12, p / (wt.b34 * w), p / wt.b56))
    return OperatingPoint(*ps, p, wt.b, w, spec.lambdas, clamped)


def _plain_eta_hat(spec: Type2Spec, delta_f: float) -> float:
    wt = _plain_weights(spec)
    w = weight_w(wt.b)
    return 16.0 ** 3 * wt.main ** 4 * delta_f ** 3 / (wt.b12 * wt.b34 * wt.b56 * w * (36.0 + 27.0 * wt.b * w) ** 3)


def _balanced_lossy(spec: Type2Spec) -> Type2Spec:
    e = LOSSY_LIMIT_ETA
    return replace(spec, eta2=e, eta3=e, eta4=e, eta5=e, alpha_receiver=0.0)


def pi0_type2(sigma_rule: SigmaRule, delta_f: float) -> float:
    """Combined source efficiency of the balanced, lossy three-source link."""
    ref = Type2Spec(*(LOSSY_LIMIT_ETA,) * 4, rule=sigma_rule)
    return _plain_eta_hat(ref, delta_f) / type2_betas(ref).b111


def pi0_type2_closed_form(sigma: float, delta_f: float) -> float:
    """Exact lossy limit ``576 df^3 / ((3+s) w (36 + 27 b w)^3)``, ``b = (3+s)/16``."""
    b = (3.0 + sigma) / 16.0
    w = weight_w(b)
    return 576.0 * delta_f ** 3 / ((3.0 + sigma) * w * (36.0 + 27.0 * b * w) ** 3)


def pi0_type1(delta_f: float, sigma: float = 1.0) -> float:
    """Balanced single-swap link: ``p^2`` at the first-order allowed ``p``, lossy limit, F -> 1."""
    t = error_terms(1, 0.0, 0.0, sigma)
    denom = 4.0 * t.total - t.eps_plus - (11.0 + sigma) / (5.0 + sigma) * t.eps0
    return (delta_f / denom) ** 2


def max_efficiency(spec: Type2Spec, delta_f: float) -> EfficiencyBreakdown:
    """Leading-order maximum ``eta_AB`` at infidelity ``delta_f`` and its factors."""
    _check_delta_f(delta_f)
    if spec.cascaded is not None:
        return cascaded_operating_point(spec, delta_f)[1]
    eta_hat = _plain_eta_hat(spec, delta_f)
    b111 = type2_betas(replace(spec, alpha_receiver=0.0)).b111
    pi0 = pi0_type2(spec.rule, delta_f)
    return EfficiencyBreakdown(pi0, b111, eta_hat / (pi0 * b111), eta_hat)


def absm_gain_from_lambdas(l23: float, l54: float) -> float:
    """Gain ``eta_hat(ABSM) / eta_hat(standard)`` expressed through the imbalances."""
    if l23 < 0 or l54 < 0:
        raise ValidationError("imbalance parameters must be non-negative")
    if math.isinf(l23) or math.isinf(l54):
        return 1.0
    s = l23 + l54 + l23 * l54
    if s == 0.0:
        return math.inf
    den = 9.0 + 3.0 * l23 + 3.0 * l54 + l23 * l54

    def f(b):
        w = weight_w(b)
        return w * (36.0 + 27.0 * b * w) ** 3

    return f((1.0 + s) / den) / f(s / den) * (1.0 + 1.0 / s)


def absm_gain(spec: Type2Spec) -> float:
    """ABSM gain of the three-source link; independent of ``delta_f`` and of the rule field."""
    return absm_gain_from_lambdas(*spec.lambdas)


def direct_gain(spec: Type2Spec, delta_f: float = 0.01) -> float:
    """``eta_hat`` ratio evaluated from the two rules directly."""
    return max_efficiency(spec.with_rule(ABSM), delta_f).eta_hat_AB / max_efficiency(spec.with_rule(STANDARD), delta_f).eta_hat_AB


def b_from_lambdas(l23: float, l54: float, sigma: float) -> float:
    if math.isinf(l23) and math.isinf(l54):
        return 1.0
    if math.isinf(l23):
        return (1.0 + l54) / (3.0 + l54)
    if math.isinf(l54):
        return (1.0 + l23) / (3.0 + l23)
    return (sigma + l23 + l54 + l23 * l54) / (9.0 + 3.0 * l23 + 3.0 * l54 + l23 * l54)


def leading_order_terms(spec: Type2Spec, p12: float, p34: float, p56: float) -> tuple[float, float]:
    """``(eta_AB, eta_bar_AB)`` from the leading-order coefficient set."""
    c = type2_betas(spec)
    g = GAMMA
    eta_ab = p12 * p56 * (p34 * c.b111 + g * p34 ** 2 * (0.25 * c.b121 + 0.5 * c.b121_hat))
    eta_bar = (p12 * p34 * p56 * c.b111 + g * p12 ** 2 * p34 * p56 * c.b211 + g * p12 * p34 ** 2 * p56 * c.b121
               + g * p12 * p34 * p56 ** 2 * c.b112 + g * g * p12 ** 2 * p56 ** 2 * c.b202)
    return eta_ab, eta_bar


def type2_fidelity(spec: Type2Spec, p12: float, p34: float, p56: float) -> float:
    """Bell-state fidelity with the leading-order set in the normalisation."""
    for x in (p12, p34, p56):
        if not 0.0 <= x <= MAX_P1:
            raise ValidationError("emission probability outside [0, 8/27]")
    if min(p12, p34, p56) == 0.0:
        return 1.0
    eta_ab, eta_bar = leading_order_terms(spec, p12, p34, p56)
    if eta_bar <= 0.0:
        raise ValidationError("zero normalisation")
    return eta_ab / eta_bar


# --- cascaded sources -----------------------------------------------------

def cascaded_eta_hat(spec: Type2Spec, p1: float, p2: float, p3: float) -> float:
    """Delivered efficiency ``(M/2)^2 p1^2 p2 p3^2 beta^(11111)`` of the cascaded link."""
    M = spec.cascaded.M
    return 0.25 * M * M * p1 ** 2 * p2 * p3 ** 2 * beta_sequence(cascaded_chain(spec), (1, 1, 1, 1, 1))


def _cascaded_raw(spec: Type2Spec, delta_f: float) -> tuple[OperatingPoint, float]:
    wt = _cascaded_weights(spec)
    w = weight_w(wt.b)
    p = 8.0 * wt.main * delta_f / (30.0 + 15.0 * wt.b * w)
    raw = (p / wt.b12, p / (wt.b34 * w), p / wt.b56)
    ps, clamped = _clamp(raw)
    op = OperatingPoint(*ps, p, wt.b, w, spec.lambdas, clamped)
    return op, cascaded_eta_hat(spec, *raw)


def pi0_cascaded(spec: Type2Spec, delta_f: float) -> float:
    ref = _balanced_lossy(spec)
    _, eh = _cascaded_raw(ref, delta_f)
    return eh / type2_betas(ref).b111


def pi0_cascaded_coefficient(spec: Type2Spec, delta_f: float = 0.01) -> float:
    """``pi0 / (M^2 eta_r^4 / (1-eta_r)^4 * delta_f^5)`` in the lossy limit."""
    c = spec.cascaded
    return pi0_cascaded(spec, delta_f) / (c.M ** 2 * c.eta_r ** 4 / (1 - c.eta_r) ** 4 * delta_f ** 5)


def cascaded_operating_point(spec: Type2Spec, delta_f: float) -> tuple[OperatingPoint, EfficiencyBreakdown]:
    """First-order optimum of the five-source cascaded link.

    ``p12`` is the emission probability of each source inside the left
    cascaded source, ``p34`` the central source, ``p56`` each source inside
    the right cascaded source.
    """
    _check_delta_f(delta_f)
    if spec.cascaded is None:
        raise ValidationError("spec has no cascaded configuration")
    if spec.cascaded.M > M_BOUND_FACTOR * spec.cascaded.m_bound(delta_f):
        raise ValidationError(f"M={spec.cascaded.M} is not small against 32/(eta_r*delta_f)^2")
    op, eh = _cascaded_raw(spec, delta_f)
    b111 = type2_betas(replace(spec, alpha_receiver=0.0)).b111
    pi0 = pi0_cascaded(spec, delta_f)
    return op, EfficiencyBreakdown(pi0, b111, eh / (pi0 * b111), eh)


# --- reductions relative to a balanced single-swap link -------------------

def type1_reference_efficiency(combined_db: float, delta_f: float) -> float:
    """Leading-order ``eta_hat`` of a balanced single-swap link with the same combined loss."""
    eta = db_to_eta(combined_db / 2.0)
    return pi0_type1(delta_f) * 0.5 * eta * eta


def reduction_db(spec: Type2Spec, delta_f: float, combined_db: float) -> float:
    return 10.0 * math.log10(type1_reference_efficiency(combined_db, delta_f) / max_efficiency(spec, delta_f).eta_hat_AB)


@dataclass(frozen=True)
class WorkedExample:
    plain_db: float
    cascaded_standard_db: float
    cascaded_absm_db: float


def worked_example(combined_db: float = 40.0, fidelity: float = 0.95, M: float = 1000.0, eta_r: float = 0.95) -> WorkedExample:
    """Fully imbalanced link: lossless outer channels, all loss on the central source."""
    df = 1.0 - fidelity
    e = db_to_eta(combined_db / 2.0)
    plain = Type2Spec(1.0, e, e, 1.0)
    casc = CascadedConfig(M, eta_r)
    cs = replace(plain, cascaded=casc)
    return WorkedExample(
        reduction_db(plain, df, combined_db),
        reduction_db(cs.with_rule(STANDARD), df, combined_db),
        reduction_db(cs.with_rule(ABSM), df, combined_db),
    )


# --- numeric cross-check --------------------------------------------------

@dataclass(frozen=True)
class FirstOrderInfidelity:
    """``1 - F ~ sum_k c_k prod_g p_g^{e_kg}``, homogeneous of degree one.

    Built from every pair-number sequence carrying exactly one pair more than
    the all-single-pair sequence, each weighted by its coincidence coefficient
    minus its Bell-projected part, relative to the single-pair coefficient.
    """

    groups: tuple[int, ...]
    terms: tuple[tuple[tuple[int, ...], float], ...]

    def __call__(self, p: Sequence[float]) -> float:
        return sum(c * math.prod(x ** e for x, e in zip(p, ex)) for ex, c in self.terms)


def first_order_infidelity(chain: ChainSpec, groups: Sequence[int], gamma: float = GAMMA) -> FirstOrderInfidelity:
    """Assemble the first-order infidelity of ``chain`` with sources mapped to parameter ``groups``."""
    n = chain.n_sources
    if len(groups) != n:
        raise ValidationError("one group label per source")
    n_groups = max(groups) + 1
    main = beta_sequence(chain, (1,) * n)
    if main <= 0:
        raise ValidationError("single-pair coefficient vanishes")
    acc: dict[tuple[int, ...], float] = {}
    for nu in itertools.product(range(3), repeat=n):
        if sum(nu) != n + 1 or nu[0] == 0 or nu[-1] == 0:
            continue
        beta = beta_sequence(chain, nu)
        if beta == 0.0:
            continue
        n2 = sum(1 for v in nu if v == 2)
        bell = 0.0
        if nu[0] == 1 and nu[-1] == 1:
            bell = 0.25 * beta + 0.75 * (2.0 / 3.0) ** n2 * beta_hat_sequence(chain, nu)
        ex = [0] * n_groups
        for g, v in zip(groups, nu):
            ex[g] += v - 1
        key = tuple(ex)
        acc[key] = acc.get(key, 0.0) + gamma ** n2 * (beta - bell) / main
    return FirstOrderInfidelity(tuple(groups), tuple(sorted(acc.items())))


@dataclass(frozen=True)
class NumericOptimum:
    probabilities: tuple[float, ...]
    objective: float


def _golden_refine(fun, x0: np.ndarray, span: float, sweeps: int = 60, tol: float = 1e-10) -> np.ndarray:
    """Coordinate-wise golden-section ascent of ``fun`` from ``x0``."""
    x = x0.copy()
    for _ in range(sweeps):
        prev = x.copy()
        for i in range(len(x)):
            def neg(t, i=i):
                y = x.copy()
                y[i] = t
                return -fun(y)
            r = minimize_scalar(neg, bracket=None, bounds=(x[i] - span, x[i] + span), method="bounded",
                                options={"xatol": tol})
            x[i] = r.x
        span = max(span * 0.5, 1e-6)
        if np.max(np.abs(x - prev)) < tol:
            break
    return x


def numeric_optimum(infid: FirstOrderInfidelity, delta_f: float, multiplicity: Sequence[int], pivot: int = 1,
                    grid: Sequence[float] | None = None) -> NumericOptimum:
    """Maximise ``prod p_g^{m_g}`` subject to ``infid(p) = delta_f``.

    Log-ratios to the ``pivot`` group are searched on a coarse grid, then
    refined by golden-section steps; the overall scale follows in closed form
    because the constraint is homogeneous of degree one.
    """
    m = np.asarray(multiplicity, dtype=float)
    k = len(m)
    free = [g for g in range(k) if g != pivot]
    grid = np.linspace(-12.0, 12.0, 49) if grid is None else np.asarray(grid)

    def probs(x):
        r = np.ones(k)
        r[free] = np.exp(x)
        d = infid(r)
        return r * (delta_f / d)

    def logobj(x):
        p = probs(x)
        return float(np.sum(m * np.log(p)))

    best, bx = -np.inf, None
    for pt in itertools.product(grid, repeat=len(free)):
        v = logobj(np.array(pt))
        if v > best:
            best, bx = v, np.array(pt)
    step = float(grid[1] - grid[0]) if len(grid) > 1 else 1.0
    x = _golden_refine(logobj, bx, 2 * step)
    p = probs(x)
    return NumericOptimum(tuple(float(v) for v in p), float(np.exp(logobj(x))))


def numeric_operating_point(spec: Type2Spec, delta_f: float) -> NumericOptimum:
    """Numeric first-order optimum for the three-source or cascaded link."""
    _check_delta_f(delta_f)
    if spec.cascaded is None:
        inf = first_order_infidelity(three_source_chain(spec), (0, 1, 2))
        return numeric_optimum(inf, delta_f, (1, 1, 1))
    inf = first_order_infidelity(cascaded_chain(spec), (0, 0, 1, 2, 2))
    return numeric_optimum(inf, delta_f, (2, 1, 2))


def exact_fidelity_optimum(spec: Type2Spec, delta_f: float) -> NumericOptimum:
    """Maximise ``p12 p34 p56`` at ``type2_fidelity = 1 - delta_f`` (no first-order expansion)."""
    _check_delta_f(delta_f)

    def probs(x):
        r = np.array([math.exp(x[0]), 1.0, math.exp(x[1])])

        def gap(s):
            return 1.0 - type2_fidelity(spec, *(s * r)) - delta_f

        top = MAX_P1 / r.max() * (1.0 - 1e-12)
        if gap(top) < 0:
            return r * top
        return r * brentq(gap, 1e-14, top, xtol=1e-16, rtol=1e-13)

    def logobj(x):
        return float(np.sum(np.log(probs(x))))

    start = lagrange_operating_point(spec, delta_f)
    x0 = np.log([start.p12 / start.p34, start.p56 / start.p34])
    x = _golden_refine(logobj, x0, 1.0)
    p = probs(x)
    return NumericOptimum(tuple(float(v) for v in p), float(np.prod(p)))


# --- grids ----------------------------------------------------------------

def split_grid(bsm_loss_db: float = 20.0, step_db: float = 0.5) -> np.ndarray:
    """Outer-channel losses strictly inside ``(0, bsm_loss_db)``."""
    n = int(round(bsm_loss_db / step_db))
    return np.array([i * step_db for i in range(1, n)])


def pi_hat_map(delta_f: float = 0.01, bsm_loss_db: float = 20.0, step_db: float = 0.5,
               rule: SigmaRule = STANDARD, cascaded: CascadedConfig | None = None) -> tuple[np.ndarray, np.ndarray]:
    """``pi_hat`` over the split grid; rows index ``loss2_db``, columns ``loss5_db``."""
    xs = split_grid(bsm_loss_db, step_db)
    out = np.empty((len(xs), len(xs)))
    for i, a in enumerate(xs):
        for j, c in enumerate(xs):
            s = Type2Spec.from_split(a, c, bsm_loss_db, rule=rule, cascaded=cascaded)
            out[i, j] = max_efficiency(s, delta_f).pi_hat
    return xs, out
