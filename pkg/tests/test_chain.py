import itertools
import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from swapcalc.algebra import ABSM, STANDARD, functional_L, functional_sigma_zero
from swapcalc.chain import (
    GAMMA,
    MAX_P1,
    ChainSpec,
    SourceStats,
    balanced_chain,
    beta_hat_sequence,
    beta_pair,
    beta_sequence,
    bell_fidelity,
    coincidence_efficiency,
    iter_sequences,
    link_metrics,
    lost_pair_fidelity,
    p_sequence,
    reference_metrics,
    transfer_metrics,
)
from swapcalc.errors import ChainTooLongError, UndefinedFidelityError, ValidationError
from swapcalc.repeater import BalancedChainSpec, closed_form_fidelity

unit = st.floats(0.0, 1.0, allow_nan=False)
prob = st.floats(0.0, 0.25, allow_nan=False)
rules = st.sampled_from([STANDARD, ABSM])


@st.composite
def chains(draw, n_min=2, n_max=6):
    n = draw(st.integers(n_min, n_max))
    ps = draw(st.lists(prob, min_size=n, max_size=n))
    etas = draw(st.lists(unit, min_size=2 * n - 2, max_size=2 * n - 2))
    mode = draw(st.sampled_from(["exact", "approx"]))
    return ChainSpec.build(ps, etas, draw(rules), mode=mode)


# --- pair statistics ------------------------------------------------------

def test_exact_statistics_follow_the_thermal_law():
    s = SourceStats.exact(0.1)
    x = s.lambda_sq
    assert 2 * x * (1 - x) ** 2 == pytest.approx(0.1, abs=1e-15)
    assert s.p2 == pytest.approx(3 * (1 - x) ** 2 * x ** 2, abs=1e-15)
    assert s.p0 + s.p1 + s.p2 == pytest.approx(1.0, abs=1e-15)


def test_ceiling_probability():
    s = SourceStats.exact(MAX_P1)
    assert s.lambda_sq == pytest.approx(1 / 3)
    with pytest.raises(ValidationError):
        SourceStats.exact(0.3)


@given(st.floats(1e-6, 1e-3))
def test_exact_and_quadratic_statistics_agree_to_leading_order(p):
    # p2 = 3 x^2 (1-x)^2 with p = 2 x (1-x)^2 gives p2 = (3/4) p^2 (1 + O(p))
    assert SourceStats.exact(p).p2 / SourceStats.approx(p).p2 == pytest.approx(1.0, abs=5 * p)
    assert GAMMA == 0.75


# --- single-BSM coefficients ---------------------------------------------

@given(unit, unit)
def test_bsm_coefficient_table(ei, ej):
    qi, qj = 1 - ei, 1 - ej
    L = {k: functional_L(beta_pair(*k, ei, ej, 1, 2)) for k in itertools.product(range(3), repeat=2)}
    assert L[(0, 0)] == L[(0, 1)] == L[(1, 0)] == 0.0
    assert L[(1, 1)] == pytest.approx(ei * ej / 2)
    assert L[(2, 0)] == pytest.approx(ei ** 2 / 3)
    assert L[(0, 2)] == pytest.approx(ej ** 2 / 3)
    assert L[(2, 1)] == pytest.approx(ei * ej * qi + ei ** 2 * qj / 3)
    assert L[(1, 2)] == pytest.approx(ei * ej * qj + ej ** 2 * qi / 3)
    assert L[(2, 2)] == pytest.approx(2 * ei * ej * qi * qj + ei ** 2 * qj ** 2 / 3 + ej ** 2 * qi ** 2 / 3)


def test_bsm_coefficient_tags_the_correct_sources():
    b = beta_pair(2, 2, 0.5, 0.5, 4, 5)
    assert set(b.terms) == {0, 1 << 3, 1 << 4}
    with pytest.raises(ValidationError):
        beta_pair(3, 1, 0.5, 0.5, 1, 2)


# --- structural identities -----------------------------------------------

@given(unit, unit, unit, unit)
def test_outer_double_pairs_coefficient(e2, e3, e4, e5):
    spec = ChainSpec.build([0.1] * 3, [e2, e3, e4, e5], STANDARD)
    assert beta_sequence(spec, (2, 0, 2)) == pytest.approx(e2 ** 2 * e5 ** 2 / 9, abs=1e-15)
    assert beta_sequence(spec.with_rule(ABSM), (2, 0, 2)) == pytest.approx(e2 ** 2 * e5 ** 2 / 9, abs=1e-15)


@given(unit, unit, unit, unit)
def test_central_double_pair_feeding_both_bsms(e2, e3, e4, e5):
    spec = ChainSpec.build([0.1] * 3, [e2, e3, e4, e5], STANDARD)
    assert beta_sequence(spec, (0, 2, 0)) == pytest.approx(e3 ** 2 * e4 ** 2 / 3, abs=1e-15)
    assert beta_sequence(spec.with_rule(ABSM), (0, 2, 0)) == 0.0


def test_lost_pair_fidelity():
    assert lost_pair_fidelity(0) == 1.0
    assert lost_pair_fidelity(1) == 0.75
    assert lost_pair_fidelity(2) == pytest.approx(0.25 + 0.75 * 4 / 9)
    assert lost_pair_fidelity(200) == pytest.approx(0.25)
    with pytest.raises(ValidationError):
        lost_pair_fidelity(-1)


def test_lost_pair_fidelity_realised_by_a_chain():
    # Only (1,2,1) connects when the central double pair's extra photons are always lost
    # (eta3 = eta4 = 1 would detect them); with single-pair outer sources the
    # sequence (1,2,1) has fidelity 1/4 + 3/4 * 2/3 * beta_hat/beta.
    e = 0.3
    spec = ChainSpec((SourceStats.single_pair_only(0.1), SourceStats(0.0, 1.0, 0.0), SourceStats.single_pair_only(0.1)),
                     (1.0, e, e, e, e, 1.0), ABSM)
    b, h = beta_sequence(spec, (1, 2, 1)), beta_hat_sequence(spec, (1, 2, 1))
    assert bell_fidelity(spec) == pytest.approx(0.25 + 0.75 * (2 / 3) * h / b)


def test_single_pair_chain_is_perfect():
    spec = ChainSpec(tuple(SourceStats.single_pair_only(0.2) for _ in range(4)), (1.0,) + (0.4,) * 6 + (1.0,))
    assert bell_fidelity(spec) == pytest.approx(1.0, abs=1e-14)
    m = link_metrics(spec)
    assert m.eta_AB == pytest.approx(p_sequence(spec, (1,) * 4) * beta_sequence(spec, (1,) * 4))


def test_two_sources_single_pairs_only():
    spec = ChainSpec((SourceStats.single_pair_only(0.1),) * 2, (1.0, 0.5, 0.2, 1.0))
    m = link_metrics(spec)
    assert m.eta_AB == m.eta_bar_AB == pytest.approx(0.01 * 0.5 * 0.5 * 0.2)


# --- sums -----------------------------------------------------------------

@given(chains(n_max=5))
def test_pruned_unpruned_kernel_and_transfer_agree(spec):
    a = reference_metrics(spec, prune=True)
    b = reference_metrics(spec, prune=False)
    c = link_metrics(spec)
    d = transfer_metrics(spec)
    for x, y in [(a, b), (a, c), (a, d)]:
        for f in ("eta_bar_chain", "eta_bar_AB", "eta_AB"):
            assert getattr(x, f) == pytest.approx(getattr(y, f), rel=1e-10, abs=1e-300)


def test_pruning_skips_zero_neighbours():
    seqs = list(iter_sequences(4))
    assert all((a, b) not in {(0, 0), (0, 1), (1, 0)} for s in seqs for a, b in zip(s, s[1:]))
    full = [s for s in itertools.product(range(3), repeat=4)
            if all((a, b) not in {(0, 0), (0, 1), (1, 0)} for a, b in zip(s, s[1:]))]
    assert seqs == full


@st.composite
def lossy_chains(draw):
    n = draw(st.integers(2, 5))
    ps = draw(st.lists(st.floats(1e-3, 0.05), min_size=n, max_size=n))
    etas = draw(st.lists(st.floats(0.05, 0.5), min_size=2 * n - 2, max_size=2 * n - 2))
    return ChainSpec.build(ps, etas, draw(rules))


@given(lossy_chains(), st.integers(0, 10 ** 6))
def test_efficiency_is_monotone_in_each_transmission_when_lossy(spec, seed):
    rng = np.random.default_rng(seed)
    i = int(rng.integers(1, len(spec.channel_eta) - 1))
    etas = list(spec.channel_eta)
    base = coincidence_efficiency(spec)
    etas[i] += 0.01
    bumped = ChainSpec(spec.sources, tuple(etas), spec.rule)
    assert coincidence_efficiency(bumped) >= base * (1 - 1e-12)


def test_number_resolving_detection_breaks_monotonicity_near_unit_transmission():
    # a second photon reaching the BSM spoils an otherwise successful detection
    f = lambda ei: functional_L(beta_pair(2, 1, ei, 1.0, 1, 2))
    assert f(0.99) > f(1.0)
    st_ = (SourceStats.exact(0.0), SourceStats.exact(0.25), SourceStats.exact(0.25), SourceStats.exact(0.0))
    lo = ChainSpec(st_, (1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0))
    hi = ChainSpec(st_, (1.0, 0.0, 1.0, 0.01, 1.0, 1.0, 0.0, 1.0))
    assert coincidence_efficiency(hi) < coincidence_efficiency(lo)
    # likewise a neighbour's single pair spoils a detected double pair
    e = (1.0, 0.0, 1.0, 1.0, 1.0, 1.0)
    quiet = ChainSpec((SourceStats.exact(0.0), SourceStats.exact(0.25), SourceStats.exact(0.0)), e)
    noisy = ChainSpec((SourceStats.exact(0.0), SourceStats.exact(0.25), SourceStats.exact(0.01)), e)
    assert coincidence_efficiency(noisy) < coincidence_efficiency(quiet)


@given(lossy_chains(), st.integers(0, 10 ** 6))
def test_efficiency_is_monotone_in_each_emission_probability_when_lossy(spec, seed):
    k = int(np.random.default_rng(seed).integers(0, spec.n_sources))
    src = list(spec.sources)
    src[k] = SourceStats.exact(src[k].p1 + 0.01)
    bumped = ChainSpec(tuple(src), spec.channel_eta, spec.rule)
    assert coincidence_efficiency(bumped) >= coincidence_efficiency(spec) * (1 - 1e-12)


@given(chains())
def test_absm_never_increases_the_coincidence_rate(spec):
    std = link_metrics(spec.with_rule(STANDARD)).eta_bar_chain
    alt = link_metrics(spec.with_rule(ABSM)).eta_bar_chain
    assert alt <= std * (1 + 1e-12)


def test_protocols_agree_without_double_pair_detections():
    spec = ChainSpec(tuple(SourceStats.single_pair_only(0.2) for _ in range(3)), (1.0,) + (0.6,) * 4 + (1.0,))
    assert link_metrics(spec).eta_bar_chain == link_metrics(spec.with_rule(ABSM)).eta_bar_chain


@given(chains())
def test_fidelity_bounds(spec):
    m = link_metrics(spec)
    assume(m.eta_bar_AB > 1e-200)
    assert m.fidelity <= 1 + 1e-12
    floor = 0.25 * sum(p_sequence(spec, nu) * beta_sequence(spec, nu)
                       for nu in iter_sequences(spec.n_sources) if nu[0] == 1 and nu[-1] == 1)
    assert m.eta_AB >= floor * (1 - 1e-12) - 1e-290


@given(chains())
def test_quarter_floor_with_single_pair_terminal_sources(spec):
    src = list(spec.sources)
    src[0] = SourceStats.single_pair_only(max(src[0].p1, 0.01))
    src[-1] = SourceStats.single_pair_only(max(src[-1].p1, 0.01))
    s = ChainSpec(tuple(src), spec.channel_eta, spec.rule)
    m = link_metrics(s)
    assume(m.eta_bar_AB > 1e-200)
    assert 0.25 - 1e-12 <= m.fidelity <= 1 + 1e-12


def test_terminal_double_pairs_can_push_fidelity_below_a_quarter():
    # all loss on the BSM side of the second source: source-1 double pairs dominate
    spec = ChainSpec.build([0.01, 0.01], [1.0, 1e-4], STANDARD)
    assert bell_fidelity(spec) < 0.25


def test_degenerate_chain_raises():
    spec = ChainSpec.build([0.1, 0.1], [0.0, 0.0], STANDARD)
    with pytest.raises(UndefinedFidelityError):
        bell_fidelity(spec)
    with pytest.raises(ZeroDivisionError):
        bell_fidelity(spec)


def test_enumeration_cap():
    spec = balanced_chain(9, 0.5, 0.9, 0.01)
    with pytest.raises(ChainTooLongError):
        link_metrics(spec)
    assert link_metrics(spec, method="transfer").eta_bar_AB > 0
    assert link_metrics(spec, max_sources=18).eta_bar_AB == pytest.approx(
        link_metrics(spec, method="transfer").eta_bar_AB, rel=1e-10)


def test_spec_validation():
    with pytest.raises(ValidationError):
        ChainSpec.build([0.1], [], STANDARD)
    with pytest.raises(ValidationError):
        ChainSpec((SourceStats.exact(0.1),) * 2, (1.0, 0.5, 0.5), STANDARD)
    with pytest.raises(ValidationError):
        ChainSpec((SourceStats.exact(0.1),) * 2, (0.9, 0.5, 0.5, 1.0), STANDARD)
    with pytest.raises(ValidationError):
        ChainSpec.build([0.1, 0.1], [1.5, 0.5], STANDARD)
    with pytest.raises(ValidationError):
        ChainSpec.build([0.1, 0.1], [0.5, 0.5], STANDARD, mode="poisson")
    with pytest.raises(ValidationError):
        beta_sequence(ChainSpec.build([0.1, 0.1], [0.5, 0.5]), (1, 3))


def test_detector_efficiency_folding():
    s = ChainSpec.build([0.1, 0.1], [0.8, 0.7], STANDARD, eta_d=0.9)
    assert s.channel_eta == pytest.approx((1.0, 0.72, 0.63, 1.0))
    t = ChainSpec.build([0.1, 0.1], [0.9, 0.8, 0.7, 0.9], STANDARD, eta_d=0.9, lossless_terminals=False)
    assert t.channel_eta == pytest.approx((0.81, 0.72, 0.63, 0.81))
    # terminal channels feed no BSM, so they never enter the coefficients
    assert link_metrics(t).eta_bar_AB == link_metrics(s).eta_bar_AB


def test_balanced_single_link_matches_first_order_closed_form():
    # 40 dB split evenly over one link, p = 0.01: difference shrinks as p^2
    eta = 0.01
    diffs = []
    for p in (0.01, 0.005):
        enum = bell_fidelity(balanced_chain(1, eta, 0.9, p))
        closed = closed_form_fidelity(BalancedChainSpec(1, eta, 0.9, p))
        diffs.append(abs(enum - closed))
    assert diffs[0] < 10 * 0.01 ** 2
    assert diffs[1] / (diffs[0] / 4) == pytest.approx(1.0, abs=0.2)


def test_sequence_weights_use_source_statistics():
    spec = ChainSpec.build([0.1, 0.2, 0.05], [0.5] * 4, STANDARD, mode="approx")
    assert p_sequence(spec, (2, 1, 0)) == pytest.approx(0.75 * 0.01 * 0.2 * (1 - 0.05 - 0.75 * 0.05 ** 2))
    assert beta_hat_sequence(spec, (1, 1, 1)) == beta_sequence(spec, (1, 1, 1))


def test_beta_hat_drops_completed_double_pairs():
    spec = ChainSpec.build([0.1] * 3, [0.5] * 4, STANDARD)
    assert beta_hat_sequence(spec, (2, 0, 2)) == 0.0
    assert beta_hat_sequence(spec, (1, 2, 1)) == pytest.approx(0.5 ** 4 * 0.5 * 0.5)
