import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from conftest import key_error_estimate
from diqss.bitcore import BitString, THREE_PARTY, key_condition
from diqss.noise import (
    KEY_INPUTS,
    Loss,
    NoiseParams,
    Signal,
    Vacuum,
    binary_entropy,
    branch_probabilities,
    efficiency_threshold,
    estimate_key_error_rate,
    key_rate_bound,
    qber_decoherence,
    qber_loss,
    qber_total,
    round_output,
    sample_branch,
)
from diqss.quantum import GhzLabel

B = BitString.parse
unit = st.floats(0.0, 1.0, allow_nan=False)

# high-precision references (50 significant digits, rounded)
ORACLE = {
    "h(0.11)": 0.499915958,
    "eta7(0.972)": 0.8197168349,
    "Q1(0.95,0.972)": 0.02049292087,
    "Q2(0.972)": 0.09014158255,
    "Q(0.95,0.972)": 0.1106345034,
    "eta*(1)": 0.9651182107,
    "eta*(0.95)": 0.9722161978,
    "critical product": 0.7799442711,
}


def test_params_validation():
    with pytest.raises(ValueError):
        NoiseParams(1.1, 1.0)
    with pytest.raises(ValueError):
        NoiseParams(1.0, -0.1)
    with pytest.raises(ValueError):
        NoiseParams(float("nan"), 1.0)


@given(unit, unit)
def test_branch_probabilities_sum_to_one(f, eta):
    probs = branch_probabilities(NoiseParams(f, eta))
    assert len(probs) == 9
    assert min(probs) >= 0
    assert sum(probs) == pytest.approx(1.0, abs=1e-12)


def test_branch_frequencies_match_weights():
    params = NoiseParams(0.8, 0.7)
    rng = np.random.default_rng(11)
    draws = 200_000
    counts = Counter()
    for _ in range(draws):
        b = sample_branch(params, rng)
        if isinstance(b, Signal):
            counts["ideal" if b.label == GhzLabel.plus(7) else "white"] += 1
        elif isinstance(b, Loss):
            counts[f"lose{len(b.lost)}"] += 1
        else:
            counts["vacuum"] += 1
    keys = ["ideal", "white"] + [f"lose{k}" for k in range(1, 7)] + ["vacuum"]
    probs = branch_probabilities(params)
    # white noise can land on GHZ1+ itself, 1/128 of the time
    probs[0] += probs[1] / 128
    probs[1] *= 127 / 128
    observed = [counts[k] for k in keys]
    _, pvalue = stats.chisquare(observed, np.array(probs) * draws)
    assert pvalue > 1e-4


def test_pure_parameters_give_pure_branches():
    rng = np.random.default_rng(0)
    assert all(sample_branch(NoiseParams(1, 1), rng) == Signal(GhzLabel.plus(7)) for _ in range(100))
    assert all(isinstance(sample_branch(NoiseParams(1, 0), rng), Vacuum) for _ in range(100))


def test_loss_branch_validation():
    with pytest.raises(ValueError):
        Loss(frozenset(), 0)
    with pytest.raises(ValueError):
        Loss(frozenset(range(7)), 0)
    with pytest.raises(ValueError):
        Loss(frozenset({7}), 0)
    with pytest.raises(ValueError):
        Loss(frozenset({1}), 2)


def test_round_output_validation():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        round_output(Vacuum(), B("000"), rng)
    with pytest.raises(ValueError):
        round_output(Vacuum(), B("1000000"), rng)


def test_ideal_branch_always_key_compatible():
    rng = np.random.default_rng(1)
    ideal = Signal(GhzLabel.plus(7))
    for x in KEY_INPUTS:
        for _ in range(20):
            assert key_condition(round_output(ideal, BitString.from_int(x, 7), rng), THREE_PARTY)


@pytest.mark.parametrize("branch", [Vacuum(), Loss(frozenset({0, 3}), 1), Loss(frozenset({2}), 0)])
def test_degraded_branches_give_uniform_outputs(branch):
    # loss leaves a product state, so every output string is equally likely
    rng = np.random.default_rng(7)
    x = B("1111000")
    counts = Counter(round_output(branch, x, rng).to_int() for _ in range(64_000))
    _, pvalue = stats.chisquare([counts[i] for i in range(128)])
    assert pvalue > 1e-4


def test_loss_survivors_keep_their_bit_positions():
    # survivors of |bbb...> each yield a fair bit in the H basis; check the
    # lost positions are filled and output width stays seven
    rng = np.random.default_rng(3)
    outs = {round_output(Loss(frozenset({6}), 0), B("0000000"), rng) for _ in range(2000)}
    assert all(len(y) == 7 for y in outs)
    assert len(outs) == 128


# --- closed forms ---------------------------------------------------------

def test_binary_entropy_values():
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.0) == binary_entropy(1.0) == 0.0
    assert binary_entropy(0.11) == pytest.approx(ORACLE["h(0.11)"], abs=1e-9)
    with pytest.raises(ValueError):
        binary_entropy(1.5)


def test_qber_components_at_reference_point():
    p = NoiseParams(0.95, 0.972)
    assert p.efficiency**7 == pytest.approx(ORACLE["eta7(0.972)"], abs=1e-10)
    assert qber_decoherence(p) == pytest.approx(ORACLE["Q1(0.95,0.972)"], abs=1e-10)
    assert qber_loss(p) == pytest.approx(ORACLE["Q2(0.972)"], abs=1e-10)
    assert qber_total(p) == pytest.approx(ORACLE["Q(0.95,0.972)"], abs=1e-10)
    assert qber_total(p) == pytest.approx(0.1107, abs=0.002)


@given(unit, unit)
def test_qber_components_add_up(f, eta):
    p = NoiseParams(f, eta)
    assert qber_decoherence(p) + qber_loss(p) == pytest.approx(qber_total(p), abs=1e-12)
    assert 0.0 <= qber_total(p) <= 0.5


@given(unit, unit, unit)
def test_qber_monotone(f, eta, other):
    lo, hi = sorted((eta, other))
    assert qber_total(NoiseParams(f, hi)) <= qber_total(NoiseParams(f, lo)) + 1e-15
    lo, hi = sorted((f, other))
    assert qber_total(NoiseParams(hi, eta)) <= qber_total(NoiseParams(lo, eta)) + 1e-15


def test_key_rate_endpoints():
    assert key_rate_bound(NoiseParams(1.0, 1.0)) == 1.0
    assert key_rate_bound(NoiseParams(0.5, 0.9)) == pytest.approx(-0.91668, abs=1e-5)
    assert key_rate_bound(NoiseParams(0.95, 0.972)) == pytest.approx(-0.0036537, abs=1e-6)


@pytest.mark.parametrize("fidelity, key", [(1.0, "eta*(1)"), (0.95, "eta*(0.95)")])
def test_threshold_matches_reference(fidelity, key):
    t = efficiency_threshold(fidelity)
    assert t.efficiency == pytest.approx(ORACLE[key], abs=2e-9)
    assert key_rate_bound(NoiseParams(fidelity, t.efficiency)) == pytest.approx(0.0, abs=1e-7)
    # the two-digit critical product gives nearly the same root
    assert t.approximation == pytest.approx(t.efficiency, abs=1e-4)


def test_threshold_product_is_constant():
    for f in (1.0, 0.97, 0.9, 0.85, 0.79):
        t = efficiency_threshold(f)
        assert f * t.efficiency**7 == pytest.approx(ORACLE["critical product"], abs=1e-8)


def test_threshold_exists_just_below_two_digit_product():
    # 0.7799 < F < 0.78: a root exists although (0.78/F)^(1/7) > 1
    t = efficiency_threshold(0.77996)
    assert t.efficiency < 1.0 < t.approximation


@pytest.mark.parametrize("fidelity", [0.7, 0.0, 1.2])
def test_threshold_missing(fidelity):
    with pytest.raises(ValueError):
        efficiency_threshold(fidelity)


# --- Monte Carlo ----------------------------------------------------------

def test_key_inputs_are_the_weight_zero_mod_four_words():
    assert len(KEY_INPUTS) == 36
    assert {bin(x).count("1") for x in KEY_INPUTS} == {0, 4}


def test_estimate_is_worker_invariant():
    p = NoiseParams(0.9, 0.95)
    one = estimate_key_error_rate(p, 20_000, seed=5, workers=1)
    three = estimate_key_error_rate(p, 20_000, seed=5, workers=3)
    assert one == three
    assert estimate_key_error_rate(p, 20_000, seed=6).errors != one.errors


def test_estimate_rejects_bad_arguments():
    with pytest.raises(ValueError):
        estimate_key_error_rate(NoiseParams(), 0)
    with pytest.raises(ValueError):
        estimate_key_error_rate(NoiseParams(), 10, seed=-1)


MC_GRID = [(1.0, 1.0), (0.95, 0.972), (0.9, 0.9), (1.0, 0.95), (0.8, 1.0), (0.5, 0.9)]


@pytest.mark.slow
@pytest.mark.parametrize("fidelity, efficiency", MC_GRID)
def test_monte_carlo_matches_closed_form(fidelity, efficiency):
    est = key_error_estimate(fidelity, efficiency)
    q = qber_total(NoiseParams(fidelity, efficiency))
    if q == 0.0:
        assert est.errors == 0
    else:
        se = math.sqrt(q * (1 - q) / est.rounds)
        assert abs(est.rate - q) <= 4 * se
