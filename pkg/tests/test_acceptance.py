"""Acceptance suite: one test per headline criterion.

Each test records a single ``criterion N: PASS|FAIL`` line (collected in the
terminal summary by conftest) and then asserts the same checks, so a failing
line always corresponds to a failing test. Tolerances are the published ones;
nothing is relaxed to make a check pass.
"""

import itertools
import math
import time
from dataclasses import replace

import numpy as np
import pytest

from swapcalc.algebra import ABSM, STANDARD
from swapcalc.chain import (
    ChainSpec,
    SourceStats,
    beta_sequence,
    link_metrics,
    lost_pair_fidelity,
    p_sequence,
)
from swapcalc.fock import (
    bell_mapping_residuals,
    chain_trace,
    loss_equivalence_check,
    noon_outcomes,
    random_truncated_state,
    sequence_trace,
)
from swapcalc.repeater import (
    BalancedChainSpec,
    balanced_chain,
    closed_form_fidelity,
    elementary_gain,
    repeaterless_crossover,
)
from swapcalc.type2 import (
    CascadedConfig,
    Type2Spec,
    absm_gain,
    absm_gain_from_lambdas,
    direct_gain,
    lagrange_operating_point,
    max_efficiency,
    numeric_operating_point,
    pi0_type1,
    pi0_type2,
    pi_hat_map,
    type2_betas,
    worked_example,
)


def verdict(record_property, n, title, checks):
    """Record one summary line for criterion ``n`` and assert every check."""
    ok = all(c for c, _ in checks)
    detail = "; ".join(d for _, d in checks)
    line = f"criterion {n} {'PASS' if ok else 'FAIL'} {title}: {detail}"
    record_property("acceptance", line)
    print(line)
    failed = [d for c, d in checks if not c]
    assert ok, "; ".join(failed)


def within(value, target, tol):
    return abs(value - target) <= tol


def random_chain(rng, n, rule):
    etas = [1.0] + list(rng.uniform(0.0, 1.0, 2 * n - 2)) + [1.0]
    probs = rng.uniform(0.001, 0.25, n)
    return ChainSpec(tuple(SourceStats.exact(float(p)) for p in probs), tuple(etas), rule)


def test_criterion_01_oracle_equivalence(record_property):
    rng = np.random.default_rng(2024)
    worst_seq = worst_eta = 0.0
    start = time.perf_counter()
    for n in (2, 3):
        for rule in (STANDARD, ABSM):
            for _ in range(50):
                spec = random_chain(rng, n, rule)
                o = chain_trace(spec)
                for nu in itertools.product(range(3), repeat=n):
                    model = p_sequence(spec, nu) * beta_sequence(spec, nu)
                    worst_seq = max(worst_seq, abs(o.per_sequence[nu] - model))
                worst_eta = max(worst_eta, abs(o.eta_AB - link_metrics(spec).eta_AB))
    elapsed = time.perf_counter() - start
    verdict(record_property, 1, "oracle equivalence", [
        (worst_seq <= 1e-10, f"max per-sequence deviation {worst_seq:.2e} (<= 1e-10)"),
        (worst_eta <= 1e-10, f"max eta_AB deviation {worst_eta:.2e} (<= 1e-10)"),
        (elapsed < 300.0, f"runtime {elapsed:.1f} s (< 300 s)"),
    ])


def _closed_form_gap(ell, rule, p):
    closed = closed_form_fidelity(BalancedChainSpec(ell, 0.1, 0.9, p, rule))
    enum = link_metrics(balanced_chain(ell, 0.1, 0.9, p, rule), method="transfer").fidelity
    return abs(closed - enum)


def test_criterion_02_closed_form_vs_enumeration(record_property):
    checks = []
    for rule in (STANDARD, ABSM):
        for ell in range(1, 6):
            c_full = _closed_form_gap(ell, rule, 0.01) / 0.01 ** 2
            c_half = _closed_form_gap(ell, rule, 0.005) / 0.005 ** 2
            ratio = c_half / c_full
            checks.append((0.2 <= ratio <= 1.2, f"{rule.name} l={ell} C={c_full:.3g} ratio={ratio:.3f}"))
    verdict(record_property, 2, "closed form vs enumeration, ratio in [0.2, 1.2]", checks)


def test_criterion_03_gain_anchors(record_property):
    g10 = elementary_gain(0.9, 10, 0.1, 0.9)
    g6 = elementary_gain(0.9, 6, 0.1, 0.9)
    verdict(record_property, 3, "gain anchors", [
        (within(g10, 20.0, 2.0), f"G(l=10)={g10:.3f} (20 +- 2)"),
        (within(g6, 10.0, 1.0), f"G(l=6)={g6:.3f} (10 +- 1)"),
    ])


def test_criterion_04_repeater_crossover(record_property):
    hit = repeaterless_crossover(0.9, 0.9, 0.9, STANDARD, step_db=0.1)
    assert hit is not None
    db, ell, eta_tilde = hit
    rate = 1e5 / eta_tilde
    verdict(record_property, 4, "repeater crossover", [
        (within(db, 83.0, 2.0), f"crossover {db:.1f} dB (83 +- 2)"),
        (ell == 3, f"l_opt={ell} (3)"),
        (1e13 / 3 <= rate <= 3e13, f"rate {rate:.3g} Hz (1e13 within x3)"),
    ])


def test_criterion_05_type2_limiting_gains(record_property):
    cases = [
        ("l23=l54=1", absm_gain_from_lambdas(1.0, 1.0), 1.4),
        ("l23->0, l54=1", absm_gain_from_lambdas(1e-9, 1.0), 2.1),
        ("l23,l54->inf", absm_gain_from_lambdas(1e9, 1e9), 1.0),
        ("l23->inf, l54=1", absm_gain_from_lambdas(1e9, 1.0), 1.0),
    ]
    checks = [(abs(g / t - 1) <= 0.05, f"{name}: G={g:.4f} ({t} +- 5%)") for name, g, t in cases]
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(20):
        spec = Type2Spec(*rng.uniform(0.01, 0.99, 4))
        worst = max(worst, abs(absm_gain(spec) / direct_gain(spec, 0.01) - 1))
    checks.append((worst <= 0.01, f"formula vs direct ratio over 20 draws: max rel dev {worst:.2e} (<= 1%)"))
    verdict(record_property, 5, "type-II limiting gains", checks)


def test_criterion_06_pi0_coefficients(record_property):
    df = 0.01
    c1 = pi0_type2(STANDARD, df) / df ** 3
    c0 = pi0_type2(ABSM, df) / df ** 3
    ct = pi0_type1(df) / df ** 2
    verdict(record_property, 6, "pi0 coefficients", [
        (f"{c1:.2g}" == "0.0027", f"sigma=1: {c1:.5g} -> {c1:.2g} (0.0027)"),
        (f"{c0:.2g}" == "0.0037", f"sigma=0: {c0:.5g} -> {c0:.2g} (0.0037)"),
        (f"{ct:.2g}" == "0.062" or f"{ct:.3g}" == "0.0625", f"type-I: {ct:.5g} (0.0625)"),
    ])


def test_criterion_07_pi_hat_maxima(record_property):
    xs, plain = pi_hat_map()
    _, casc = pi_hat_map(cascaded=CascadedConfig(1000.0, 0.95))
    i, j = np.unravel_index(np.argmax(plain), plain.shape)
    k, m = np.unravel_index(np.argmax(casc), casc.shape)
    verdict(record_property, 7, "pi_hat maxima", [
        (within(plain.max(), 1.86, 0.05), f"plain max {plain.max():.3f} at ({xs[i]}, {xs[j]}) dB (1.86 +- 0.05)"),
        (within(casc.max(), 6.3, 0.2), f"cascaded max {casc.max():.3f} at ({xs[k]}, {xs[m]}) dB (6.3 +- 0.2)"),
    ])


def test_criterion_08_cascaded_worked_example(record_property):
    ex = worked_example(40.0, 0.95, 1000.0, 0.95)
    verdict(record_property, 8, "cascaded worked example", [
        (within(ex.plain_db, 48.0, 1.0), f"plain {ex.plain_db:.2f} dB (48 +- 1)"),
        (within(ex.cascaded_standard_db, 31.0, 1.0), f"cascaded sigma=1 {ex.cascaded_standard_db:.2f} dB (31 +- 1)"),
        (within(ex.cascaded_absm_db, 19.0, 1.0), f"cascaded sigma=0 {ex.cascaded_absm_db:.2f} dB (19 +- 1)"),
    ])


def test_criterion_09_lagrange_vs_numeric(record_property):
    specs = [Type2Spec(0.1, 0.1, 0.1, 0.1), Type2Spec(0.3, 0.02, 0.05, 0.5), Type2Spec(0.9, 0.01, 0.2, 0.2),
             Type2Spec(0.05, 0.6, 0.6, 0.05)]
    specs += [s.with_rule(ABSM) for s in specs]
    worst_p = worst_eta = 0.0
    for df in (0.005, 0.01, 0.05):
        for spec in specs:
            op = lagrange_operating_point(spec, df)
            num = numeric_operating_point(spec, df)
            worst_p = max(worst_p, max(abs(a / b - 1) for a, b in zip(num.probabilities, op.probabilities)))
            eta_num = num.objective * type2_betas(spec).b111
            worst_eta = max(worst_eta, abs(eta_num / max_efficiency(spec, df).eta_hat_AB - 1))
    verdict(record_property, 9, "analytic vs numeric operating point", [
        (worst_p <= 0.02, f"max rel p deviation {worst_p:.2e} (<= 2%)"),
        (worst_eta <= 0.05, f"max rel eta_hat deviation {worst_eta:.2e} (<= 5%)"),
    ])


def test_criterion_10_structural_properties(record_property):
    checks = [(lost_pair_fidelity(1) == 0.75, f"lost-pair fidelity(1)={lost_pair_fidelity(1)!r} (3/4)")]

    rng = np.random.default_rng(10)
    e = rng.uniform(0.05, 0.95, 4)
    b202 = type2_betas(Type2Spec(*e)).b202
    checks.append((b202 == e[0] ** 2 * e[3] ** 2 / 9, f"beta(2,0,2)={b202:.6g} = eta2^2 eta5^2/9"))

    worst = 0.0
    for _ in range(20):
        spec = random_chain(rng, 3, STANDARD)
        e3, e4 = spec.eta(3), spec.eta(4)
        w = p_sequence(spec, (0, 2, 0))
        std_model = beta_sequence(spec, (0, 2, 0))
        absm_model = beta_sequence(spec.with_rule(ABSM), (0, 2, 0))
        worst = max(worst,
                    abs(std_model - e3 ** 2 * e4 ** 2 / 3),
                    abs(absm_model),
                    abs(sequence_trace(spec, (0, 2, 0)) - w * std_model),
                    abs(sequence_trace(spec.with_rule(ABSM), (0, 2, 0))))
    checks.append((worst <= 1e-12, f"nu=(0,2,0): standard eta3^2 eta4^2/3, ABSM 0, oracle agrees (max dev {worst:.1e})"))

    states = [random_truncated_state(rng, 3, 4) for _ in range(100)]
    etas = rng.uniform(0.0, 1.0, 100)
    ok = all(loss_equivalence_check(s, float(x), 1e-12) for s, x in zip(states, etas))
    checks.append((ok, "loss before/after splitter on 100 random states (1e-12)"))

    res = max(bell_mapping_residuals().values())
    checks.append((res <= 1e-12, f"Bell-basis mapping residual {res:.1e}"))

    p11 = noon_outcomes((1, 1)).get((1, 1), 0.0)
    checks.append((p11 <= 1e-12, f"diagonal-basis (1,1) probability {p11:.1e} (<= 1e-12)"))
    verdict(record_property, 10, "structural properties", checks)


def test_criterion_11_b_bounds(record_property):
    rng = np.random.default_rng(11)
    lo_viol = hi_viol = 0
    invariance = 0.0
    for k in range(10_000):
        rule = STANDARD if k % 2 == 0 else ABSM
        spec = Type2Spec(*rng.uniform(1e-4, 1.0 - 1e-4, 4), rule=rule)
        b = lagrange_operating_point(spec, 0.01).b
        lo_viol += b < spec.sigma / 36
        hi_viol += b > 1.0
        if k % 10 == 0:
            alpha = float(rng.uniform(0.0, 0.99))
            ba = lagrange_operating_point(replace(spec, alpha_receiver=alpha), 0.01).b
            invariance = max(invariance, abs(ba - b) / b)
    verdict(record_property, 11, "b bounds", [
        (lo_viol == 0 and hi_viol == 0, f"10^4 draws: {lo_viol} below sigma/36, {hi_viol} above 1"),
        (invariance <= 4 * np.finfo(float).eps, f"receiver PNR invariance: max rel change {invariance:.1e}"),
    ])


@pytest.mark.parametrize("rule", [STANDARD, ABSM])
def test_b_bounds_are_tight_in_the_lossy_balanced_limit(rule):
    b = lagrange_operating_point(Type2Spec(1e-9, 1e-9, 1e-9, 1e-9, rule=rule), 0.01).b
    assert b == pytest.approx((3 + rule.sigma) / 16, rel=1e-6)
    assert math.isfinite(b)
