import numpy as np
import pytest

from utils.errors import NotPurifiableError, StarvationError, ValidationError
from utils.params import ErrorRates
from utils.purification import (
    BellDiagonalState,
    Protocol,
    QueuePurifier,
    WernerState,
    bbpssw_round,
    bell_coefficients,
    bell_density_matrix,
    breakdown_error_rate,
    dejmps_round,
    expected_pairs_for_rounds,
    max_achievable_fidelity,
    oracle_purify,
    purification_curve,
    purify_pairs,
    purify_rounds,
    purify_to_target,
    queue_purifier_latency,
    round_latency,
    rounds_to_near_fixpoint,
    rounds_to_threshold,
    sample_raw_pairs,
    twirl,
    werner_to_bell,
)

NOISELESS = ErrorRates(0.0, 0.0, 0.0, 0.0)


def _random_state(rng):
    coeffs = rng.dirichlet(np.ones(4))
    # Keep Phi+ dominant so the round is meaningful for both protocols
    coeffs[0] += 1.0
    return BellDiagonalState.from_array(coeffs)


def _random_errors(rng):
    p1, p2, pms = 10.0 ** rng.uniform(-6, -2, size=3)
    return ErrorRates(p_1q=p1, p_2q=p2, p_mv=0.0, p_ms=pms)


# =============================================
# === CLOSED FORM VS DENSITY MATRIX ==========
# =============================================

@pytest.mark.parametrize("protocol", list(Protocol))
def test_closed_form_matches_oracle(protocol):
    rng = np.random.default_rng(20240601)
    for _ in range(500):
        s1, s2, errors = _random_state(rng), _random_state(rng), _random_errors(rng)
        exact = oracle_purify(s1.as_array(), s2.as_array(), protocol, errors)
        closed = purify_pairs(s1, s2, protocol, errors)
        np.testing.assert_allclose(closed.state.as_array(), exact.state.as_array(), atol=1e-9)
        assert closed.p_success == pytest.approx(exact.p_success, abs=1e-9)


def test_oracle_accepts_state_objects(defaults):
    bell = werner_to_bell(0.9)
    a = oracle_purify(bell, WernerState(0.9), Protocol.DEJMPS, defaults.errors)
    b = oracle_purify(bell.as_array(), bell.as_array(), "dejmps", defaults.errors)
    np.testing.assert_allclose(a.state.as_array(), b.state.as_array(), atol=1e-12)


def test_bell_density_matrix_round_trip():
    coeffs = np.array([0.7, 0.1, 0.15, 0.05])
    rho = bell_density_matrix(coeffs)
    assert np.trace(rho).real == pytest.approx(1.0)
    np.testing.assert_allclose(bell_coefficients(rho), coeffs, atol=1e-12)


# =============================================
# === NOISELESS FORMULAS =====================
# =============================================

@pytest.mark.parametrize("f", [0.55, 0.7, 0.9, 0.99])
def test_noiseless_bbpssw_formula(f):
    r = (1 - f) / 3
    outcome = bbpssw_round(WernerState(f), NOISELESS)
    norm = f ** 2 + 2 * f * r + 5 * r ** 2
    assert outcome.fidelity == pytest.approx((f ** 2 + r ** 2) / norm, abs=1e-12)
    assert outcome.p_success == pytest.approx(norm, abs=1e-12)
    assert isinstance(outcome.state, WernerState)


def test_noiseless_dejmps_formula():
    a, b, c, d = 0.7, 0.05, 0.15, 0.1
    outcome = dejmps_round(BellDiagonalState(a, b, c, d), NOISELESS)
    n = (a + b) ** 2 + (c + d) ** 2
    expected = [(a ** 2 + b ** 2) / n, 2 * c * d / n, (c ** 2 + d ** 2) / n, 2 * a * b / n]
    np.testing.assert_allclose(outcome.state.as_array(), expected, atol=1e-12)
    assert outcome.p_success == pytest.approx(n)


def test_werner_input_purifies_only_above_half(defaults):
    assert bbpssw_round(WernerState(0.6), NOISELESS).fidelity > 0.6
    assert bbpssw_round(WernerState(0.45), NOISELESS).fidelity < 0.45
    with pytest.raises(NotPurifiableError):
        bbpssw_round(0.25, defaults.errors)


def test_dejmps_needs_dominant_component(defaults):
    with pytest.raises(NotPurifiableError):
        dejmps_round(BellDiagonalState(0.4, 0.4, 0.1, 0.1), defaults.errors)


def test_state_validation():
    with pytest.raises(ValidationError):
        BellDiagonalState(0.5, 0.5, 0.5, -0.5)
    with pytest.raises(ValidationError):
        BellDiagonalState(0.5, 0.2, 0.2, 0.2)
    with pytest.raises(ValidationError):
        WernerState(0.1)
    assert twirl(BellDiagonalState(0.9, 0.1, 0.0, 0.0)) == WernerState(0.9)
    with pytest.raises(ValidationError):
        Protocol.parse("recurrence")


# =============================================
# === ITERATION ===============================
# =============================================

@pytest.mark.parametrize("start", [0.6, 0.75, 0.9])
def test_dejmps_converges_faster_and_higher(start, defaults):
    errors = defaults.errors
    assert max_achievable_fidelity(Protocol.DEJMPS, errors) >= max_achievable_fidelity(Protocol.BBPSSW, errors)
    dejmps = rounds_to_near_fixpoint(start, Protocol.DEJMPS, errors)
    bbpssw = rounds_to_near_fixpoint(start, Protocol.BBPSSW, errors)
    assert bbpssw >= 3 * dejmps


def test_fixpoint_below_one_under_noise(defaults):
    f_star = max_achievable_fidelity(Protocol.DEJMPS, defaults.errors)
    assert 1 - 1e-5 < f_star < 1.0
    assert max_achievable_fidelity(Protocol.DEJMPS, NOISELESS) == pytest.approx(1.0, abs=1e-12)


def test_breakdown_rate_in_expected_decade(defaults):
    rate = breakdown_error_rate(Protocol.DEJMPS, defaults.threshold.f_min)
    assert 1e-6 <= rate <= 1e-4
    grid = [10.0 ** (k / 4) for k in range(-28, -11)]
    first_bad = next(r for r in grid
                     if max_achievable_fidelity(Protocol.DEJMPS, ErrorRates(r, r, r, r)) < defaults.threshold.f_min)
    assert 1e-6 <= first_bad <= 1e-4


def test_purify_to_target_counts_rounds(defaults):
    run = purify_to_target(0.99, Protocol.DEJMPS, defaults.errors, defaults.threshold.f_min)
    assert run.reachable
    assert run.rounds == len(run.success_probs) >= 1
    assert run.fidelity >= defaults.threshold.f_min
    assert rounds_to_threshold(0.99, "dejmps", defaults.errors, defaults.threshold.f_min) == run.rounds
    assert purify_to_target(0.9999, Protocol.DEJMPS, defaults.errors, 0.99).rounds == 0


def test_unreachable_target_reported(defaults):
    noisy = ErrorRates(1e-3, 1e-3, 1e-3, 1e-3)
    assert rounds_to_threshold(0.9, Protocol.DEJMPS, noisy, defaults.threshold.f_min) is None
    assert not purify_to_target(0.2, Protocol.BBPSSW, noisy, 0.9).reachable


def test_purify_rounds_returns_every_outcome(defaults):
    outcomes = purify_rounds(0.85, Protocol.BBPSSW, defaults.errors, 4)
    assert len(outcomes) == 4
    fidelities = [o.fidelity for o in outcomes]
    assert fidelities == sorted(fidelities)


def test_purify_rounds_on_separable_pairs(defaults):
    assert purify_rounds(0.1, Protocol.BBPSSW, defaults.errors, 0) == []
    with pytest.raises(NotPurifiableError):
        purify_rounds(0.1, Protocol.BBPSSW, defaults.errors, 1)


# =============================================
# === COSTS ===================================
# =============================================

def test_expected_pairs():
    assert expected_pairs_for_rounds(0) == 1.0
    assert expected_pairs_for_rounds(3, (1.0, 1.0, 1.0)) == 8.0
    assert expected_pairs_for_rounds(2, (0.5, 0.8)) == pytest.approx(2 / 0.5 * 2 / 0.8)
    with pytest.raises(ValidationError):
        expected_pairs_for_rounds(2, (0.5,))
    with pytest.raises(ValidationError):
        expected_pairs_for_rounds(1, (0.0,))


def test_purification_curve(defaults):
    df = purification_curve(Protocol.DEJMPS, 0.85, 8, defaults.errors)
    assert list(df['round']) == list(range(9))
    assert df['expected_pairs'].is_monotonic_increasing
    assert df['error'].iloc[-1] < df['error'].iloc[0]


def test_round_latency(defaults):
    assert round_latency(defaults.times) == 121.0
    assert round_latency(defaults.times, 600) == pytest.approx(122.2)


def test_queue_latency_bounds(defaults):
    assert queue_purifier_latency(0.5, 0, defaults.times) == 2.0
    fast_input = queue_purifier_latency(1e6, 2, defaults.times, success_probs=(1.0, 1.0))
    assert fast_input == pytest.approx(0.5 * 4 * 121.0)
    with pytest.raises(StarvationError):
        queue_purifier_latency(0.0, 2, defaults.times)
    with pytest.raises(ValidationError):
        queue_purifier_latency(1.0, 4, defaults.times, depth=3)


def test_queue_purifier_delivers_one_per_2_to_the_depth():
    chain = QueuePurifier(depth=3, latency=10.0)
    delivered = []
    for i in range(16):
        delivered += chain.feed(float(i))
    assert len(delivered) == 2
    assert chain.attempts == 14 and chain.failures == 0
    assert delivered == sorted(delivered)


def test_queue_purifier_failures_discard_pairs():
    rng = np.random.default_rng(3)
    chain = QueuePurifier(depth=2, latency=1.0, success_probs=(0.5, 0.5), rng=rng)
    for i in range(400):
        chain.feed(float(i))
    assert chain.failures > 0
    assert chain.delivered < 100


def test_sampled_raw_pairs_average_to_expectation():
    rng = np.random.default_rng(11)
    probs = (0.8, 0.9)
    samples = [sample_raw_pairs(rng, probs) for _ in range(4000)]
    assert min(samples) == 4
    assert np.mean(samples) == pytest.approx(expected_pairs_for_rounds(2, probs), rel=0.05)
