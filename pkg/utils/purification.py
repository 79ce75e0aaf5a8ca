"""DEJMPS and BBPSSW purification under noisy local operations.

Bell-diagonal coefficients are ordered (a, b, c, d) = (Phi+, Psi-, Psi+, Phi-),
so the fidelity of a pair is its `a` coefficient.

Noise model, shared by the closed-form rounds and the density-matrix oracle:
every two-qubit gate is followed by two-qubit depolarizing noise on its
qubits (probability p_2q of replacement by the maximally mixed state), every
one-qubit gate by one-qubit depolarizing noise (p_1q), and each measurement
outcome flips with probability p_ms.
"""

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from functools import reduce

import numpy as np
import pandas as pd
from scipy.optimize import brentq

from .errors import ConvergenceError, NotPurifiableError, StarvationError, ValidationError
from .params import ErrorRates

logger = logging.getLogger(__name__)

NORMALIZATION_TOL = 1e-12
FIXPOINT_TOL = 1e-12
FIXPOINT_MAX_ITER = 10_000


class Protocol(Enum):
    DEJMPS = "dejmps"
    BBPSSW = "bbpssw"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValidationError(f"Unknown purification protocol '{value}'") from None


# =============================================
# === STATES ==================================
# =============================================

@dataclass(frozen=True)
class BellDiagonalState:
    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        coeffs = self.as_array()
        if np.any(coeffs < -NORMALIZATION_TOL):
            raise ValidationError(f"Bell-diagonal coefficients must be non-negative: {coeffs}")
        if abs(coeffs.sum() - 1.0) > NORMALIZATION_TOL:
            raise ValidationError(f"Bell-diagonal coefficients must sum to 1, got {coeffs.sum()!r}")

    @property
    def fidelity(self):
        return self.a

    def as_array(self):
        return np.array([self.a, self.b, self.c, self.d], dtype=float)

    @classmethod
    def from_array(cls, coeffs):
        coeffs = np.clip(np.asarray(coeffs, dtype=float), 0.0, None)
        coeffs = coeffs / coeffs.sum()
        return cls(*(float(x) for x in coeffs))


@dataclass(frozen=True)
class WernerState:
    f: float

    def __post_init__(self):
        if not (0.25 - NORMALIZATION_TOL <= self.f <= 1.0 + NORMALIZATION_TOL):
            raise ValidationError(f"Werner fidelity must lie in [1/4, 1], got {self.f}")

    @property
    def fidelity(self):
        return self.f


@dataclass(frozen=True)
class PurifyOutcome:
    state: object
    p_success: float

    @property
    def fidelity(self):
        return self.state.fidelity


def werner_to_bell(f):
    """Bell-diagonal form of a Werner state: the three error components share 1 - f."""
    rest = (1.0 - f) / 3.0
    return BellDiagonalState(f, rest, rest, rest)


def twirl(state):
    """Projects a Bell-diagonal state onto Werner form, keeping its fidelity."""
    return WernerState(min(1.0, max(0.25, state.fidelity)))


def _as_bell(state):
    if isinstance(state, BellDiagonalState):
        return state
    if isinstance(state, WernerState):
        return werner_to_bell(state.f)
    return werner_to_bell(float(state))


# =============================================
# === CLOSED-FORM ROUNDS =====================
# =============================================

def _physical(coeffs, rotate):
    # Indexed [phase, parity]. The DEJMPS rotation swaps the Phi- and Psi- slots.
    a, b, c, d = coeffs
    if rotate:
        return np.array([[a, c], [b, d]])
    return np.array([[a, c], [d, b]])


def _labelled(grid):
    return np.array([grid[0, 0], grid[1, 1], grid[0, 1], grid[1, 0]])


def purify_pairs(pair1, pair2, protocol, errors):
    """
    Closed-form noisy round on two Bell-diagonal pairs.

    Args:
        pair1, pair2: BellDiagonalState (or Werner fidelity) inputs; pair1 is kept.
        protocol (Protocol): DEJMPS rotates first; BBPSSW twirls both inputs.
        errors (ErrorRates): Gate and measurement error probabilities.

    Returns:
        PurifyOutcome: Post-selected BellDiagonalState and success probability.
    """
    protocol = Protocol.parse(protocol)
    s1, s2 = _as_bell(pair1), _as_bell(pair2)
    rotate = protocol is Protocol.DEJMPS
    if not rotate:
        s1, s2 = werner_to_bell(s1.a), werner_to_bell(s2.a)
    lam, mu = _physical(s1.as_array(), rotate), _physical(s2.as_array(), rotate)

    if rotate:
        w = (1.0 - errors.p_1q) ** 2
        lam = w * lam + (1.0 - w) / 4.0
        mu = w * mu + (1.0 - w) / 4.0

    agree = np.zeros((2, 2))
    disagree = np.zeros((2, 2))
    for phase in (0, 1):
        for parity in (0, 1):
            for p1 in (0, 1):
                p2 = p1 ^ phase
                agree[phase, parity] += lam[p1, parity] * mu[p2, parity]
                disagree[phase, parity] += lam[p1, parity] * mu[p2, parity ^ 1]

    v = (1.0 - errors.p_2q) ** 2
    keep = (1.0 - errors.p_ms) ** 2 + errors.p_ms ** 2
    swap = 2.0 * errors.p_ms * (1.0 - errors.p_ms)
    out = keep * (v * agree + (1.0 - v) / 8.0) + swap * (v * disagree + (1.0 - v) / 8.0)

    coeffs = _labelled(out)
    p_success = float(coeffs.sum())
    return PurifyOutcome(BellDiagonalState.from_array(coeffs / p_success), p_success)


def dejmps_round(state, errors):
    """One DEJMPS round on two copies of `state`; requires a dominant Phi+ component."""
    state = _as_bell(state)
    if not state.a > max(state.b, state.c, state.d):
        raise NotPurifiableError(f"DEJMPS needs a dominant fidelity component, got {state}")
    return purify_pairs(state, state, Protocol.DEJMPS, errors)


def bbpssw_round(state, errors):
    """One BBPSSW round; the output is twirled back to Werner form."""
    f = state.fidelity if hasattr(state, "fidelity") else float(state)
    if f <= 0.25:
        raise NotPurifiableError(f"BBPSSW cannot purify fidelity {f} (fixed point 1/4)")
    outcome = purify_pairs(f, f, Protocol.BBPSSW, errors)
    return PurifyOutcome(twirl(outcome.state), outcome.p_success)


def purify_round(state, protocol, errors):
    if Protocol.parse(protocol) is Protocol.DEJMPS:
        return dejmps_round(state, errors)
    return bbpssw_round(state, errors)


# =============================================
# === DENSITY-MATRIX ORACLE ==================
# =============================================

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_PAULIS = (_I2, _X, _Y, _Z)
_Z0 = np.array([[1], [0]], dtype=complex)
_Z1 = np.array([[0], [1]], dtype=complex)

sqrt_plus_ix = (_I2 + 1j * _X) / np.sqrt(2)
sqrt_minus_ix = sqrt_plus_ix.conj().T

_BELL_VECTORS = np.array([
    [1, 0, 0, 1],    # Phi+
    [0, 1, -1, 0],   # Psi-
    [0, 1, 1, 0],    # Psi+
    [1, 0, 0, -1],   # Phi-
], dtype=complex) / np.sqrt(2)


def _tensor(*ops):
    return reduce(np.kron, ops)


def _on_qubits(ops_by_qubit, n=4):
    """Embeds {qubit: 2x2 operator} into an n-qubit operator (qubit 0 most significant)."""
    return _tensor(*(ops_by_qubit.get(q, _I2) for q in range(n)))


def _cnot(control, target, n=4):
    p0 = _Z0 @ _Z0.conj().T
    p1 = _Z1 @ _Z1.conj().T
    return _on_qubits({control: p0}, n) + _on_qubits({control: p1, target: _X}, n)


# Qubits are ordered (A1, B1, A2, B2); pair 1 is kept, pair 2 is measured.
_ROTATION = _tensor(sqrt_minus_ix, sqrt_plus_ix, sqrt_minus_ix, sqrt_plus_ix)
_CNOT_A = _cnot(0, 2)
_CNOT_B = _cnot(1, 3)
_ONE_QUBIT_PAULIS = {q: [_on_qubits({q: p}) for p in _PAULIS] for q in range(4)}
_TWO_QUBIT_PAULIS = {
    pair: [_on_qubits({pair[0]: p, pair[1]: r}) for p in _PAULIS for r in _PAULIS]
    for pair in ((0, 2), (1, 3))
}
_PROJECTORS = {
    (m2, m3): _tensor(np.eye(4), z2, z3)
    for m2, z2 in ((0, _Z0), (1, _Z1))
    for m3, z3 in ((0, _Z0), (1, _Z1))
}


def bell_density_matrix(coeffs):
    """4x4 density matrix of a Bell-diagonal pair in the (A, B) computational basis."""
    coeffs = np.asarray(coeffs, dtype=float)
    return sum(w * np.outer(v, v.conj()) for w, v in zip(coeffs, _BELL_VECTORS))


def bell_coefficients(rho):
    return np.real(np.array([v.conj() @ rho @ v for v in _BELL_VECTORS]))


def _depolarize(rho, p, paulis):
    if p == 0:
        return rho
    twirled = sum(op @ rho @ op.conj().T for op in paulis) / len(paulis)
    return (1.0 - p) * rho + p * twirled


def _coefficients(pair):
    if isinstance(pair, (BellDiagonalState, WernerState)):
        return _as_bell(pair).as_array()
    return BellDiagonalState.from_array(pair).as_array()


def oracle_purify(pair1, pair2, protocol, errors):
    """
    Exact simulation of one purification round on the 16-dimensional joint state.

    Parameters
    ----------
    pair1, pair2 : array-like
        Bell-diagonal coefficient 4-vectors (Phi+, Psi-, Psi+, Phi-).
    protocol : Protocol or str
        DEJMPS applies the bilateral rotation; BBPSSW twirls its inputs first.
    errors : ErrorRates
        Depolarizing probabilities for gates, flip probability for measurements.

    Returns
    -------
    PurifyOutcome
        Post-selected Bell-diagonal state of pair 1 and the success probability.
    """
    protocol = Protocol.parse(protocol)
    c1 = _coefficients(pair1)
    c2 = _coefficients(pair2)
    if protocol is Protocol.BBPSSW:
        c1, c2 = werner_to_bell(c1[0]).as_array(), werner_to_bell(c2[0]).as_array()

    rho = np.kron(bell_density_matrix(c1), bell_density_matrix(c2))
    if protocol is Protocol.DEJMPS:
        rho = _ROTATION @ rho @ _ROTATION.conj().T
        for q in range(4):
            rho = _depolarize(rho, errors.p_1q, _ONE_QUBIT_PAULIS[q])
    rho = _CNOT_A @ rho @ _CNOT_A.conj().T
    rho = _depolarize(rho, errors.p_2q, _TWO_QUBIT_PAULIS[(0, 2)])
    rho = _CNOT_B @ rho @ _CNOT_B.conj().T
    rho = _depolarize(rho, errors.p_2q, _TWO_QUBIT_PAULIS[(1, 3)])

    branches = {m: proj.conj().T @ rho @ proj for m, proj in _PROJECTORS.items()}
    q = errors.p_ms
    kept = ((1 - q) ** 2 + q ** 2) * (branches[(0, 0)] + branches[(1, 1)]) \
        + 2 * q * (1 - q) * (branches[(0, 1)] + branches[(1, 0)])
    p_success = float(np.real(np.trace(kept)))
    coeffs = bell_coefficients(kept / p_success)
    return PurifyOutcome(BellDiagonalState.from_array(coeffs), p_success)


# =============================================
# === ITERATION AND PLANNING =================
# =============================================

@dataclass(frozen=True)
class PurificationRun:
    """Result of purifying toward a target: rounds used and per-round success."""
    rounds: int
    success_probs: tuple
    fidelity: float
    reachable: bool = True


def purify_rounds(f_in, protocol, errors, rounds):
    """Iterates `rounds` rounds from a Werner input; returns the list of outcomes."""
    protocol = Protocol.parse(protocol)
    if rounds == 0:
        return []
    if f_in <= 0.25:
        raise NotPurifiableError(f"Pairs at fidelity {f_in} carry no entanglement to purify")
    state = werner_to_bell(f_in) if protocol is Protocol.DEJMPS else WernerState(f_in)
    outcomes = []
    for _ in range(rounds):
        outcome = purify_round(state, protocol, errors)
        outcomes.append(outcome)
        state = outcome.state
    return outcomes


def purify_to_target(f_in, protocol, errors, f_target, max_rounds=FIXPOINT_MAX_ITER):
    """
    Runs rounds until fidelity reaches f_target.

    Stops as unreachable when the fidelity stalls below the target, when the
    state becomes non-purifiable, or after max_rounds rounds.
    """
    protocol = Protocol.parse(protocol)
    if f_in >= f_target:
        return PurificationRun(0, (), f_in)
    if f_in <= 0.25:
        return PurificationRun(0, (), f_in, reachable=False)
    state = werner_to_bell(f_in) if protocol is Protocol.DEJMPS else WernerState(f_in)
    successes = []
    f = f_in
    for _ in range(max_rounds):
        try:
            outcome = purify_round(state, protocol, errors)
        except NotPurifiableError:
            break
        successes.append(outcome.p_success)
        f_next = outcome.fidelity
        if f_next >= f_target:
            return PurificationRun(len(successes), tuple(successes), f_next)
        if f_next - f < FIXPOINT_TOL:
            break
        state, f = outcome.state, f_next
    return PurificationRun(len(successes), tuple(successes), f, reachable=False)


def rounds_to_threshold(f_in, protocol, errors, f_target):
    """Minimal rounds to reach f_target, or None when the target is unreachable."""
    run = purify_to_target(f_in, protocol, errors, f_target)
    return run.rounds if run.reachable else None


def max_achievable_fidelity(protocol, errors, start=0.99):
    """Fixpoint of the noisy recurrence, iterated from a Werner pair at `start`."""
    protocol = Protocol.parse(protocol)
    state = werner_to_bell(start) if protocol is Protocol.DEJMPS else WernerState(start)
    f = start
    trace = [f]
    for _ in range(FIXPOINT_MAX_ITER):
        try:
            outcome = purify_round(state, protocol, errors)
        except NotPurifiableError:
            logger.debug("Recurrence left the purifiable region after %d rounds", len(trace) - 1)
            return 0.25
        f_next = outcome.fidelity
        trace.append(f_next)
        if abs(f_next - f) < FIXPOINT_TOL:
            return f_next
        state, f = outcome.state, f_next
    raise ConvergenceError(
        f"{protocol.value} recurrence did not converge in {FIXPOINT_MAX_ITER} rounds", trace[-10:]
    )


def rounds_to_near_fixpoint(f_in, protocol, errors, tolerance=0.1, max_rounds=FIXPOINT_MAX_ITER):
    """Rounds until the error is within (1 + tolerance) of the fixpoint error."""
    fixpoint_error = 1.0 - max_achievable_fidelity(protocol, errors)
    limit = (1.0 + tolerance) * fixpoint_error
    protocol = Protocol.parse(protocol)
    state = werner_to_bell(f_in) if protocol is Protocol.DEJMPS else WernerState(f_in)
    for r in range(max_rounds + 1):
        if 1.0 - state.fidelity <= limit:
            return r
        state = purify_round(state, protocol, errors).state
    raise ConvergenceError(f"{protocol.value} did not approach its fixpoint in {max_rounds} rounds")


def breakdown_error_rate(protocol, f_target, lo=1e-9, hi=1e-2):
    """
    Uniform operation error rate at which the fixpoint fidelity drops to f_target.

    Solved on log10(rate) with scipy's brentq.
    """
    def margin(log_rate):
        rate = 10.0 ** log_rate
        errors = ErrorRates(p_1q=rate, p_2q=rate, p_mv=rate, p_ms=rate)
        return max_achievable_fidelity(protocol, errors) - f_target

    lo_log, hi_log = math.log10(lo), math.log10(hi)
    if margin(lo_log) < 0 or margin(hi_log) > 0:
        raise ValidationError(f"No breakdown between {lo} and {hi} for target {f_target}")
    rate = 10.0 ** brentq(margin, lo_log, hi_log, xtol=1e-6)
    logger.info("%s breakdown at uniform error rate %.3e", Protocol.parse(protocol).value, rate)
    return rate


def expected_pairs_for_rounds(rounds, success_probs=None):
    """Expected raw pairs consumed per delivered pair: product of 2/p_success over rounds."""
    if rounds < 0:
        raise ValidationError(f"rounds must be non-negative, got {rounds}")
    probs = list(success_probs) if success_probs is not None else [1.0] * rounds
    if len(probs) < rounds:
        raise ValidationError(f"Need {rounds} success probabilities, got {len(probs)}")
    expected = 1.0
    for p in probs[:rounds]:
        if not (0.0 < p <= 1.0):
            raise ValidationError(f"Success probability must lie in (0, 1], got {p}")
        expected *= 2.0 / p
    return expected


def purification_curve(protocol, start, rounds, errors):
    """Fidelity, error and cumulative expected pairs per round, starting from a Werner pair."""
    rows = [{'protocol': Protocol.parse(protocol).value, 'round': 0, 'fidelity': start,
             'error': 1.0 - start, 'p_success': 1.0, 'expected_pairs': 1.0}]
    expected = 1.0
    for r, outcome in enumerate(purify_rounds(start, protocol, errors, rounds), start=1):
        expected *= 2.0 / outcome.p_success
        rows.append({'protocol': rows[0]['protocol'], 'round': r, 'fidelity': outcome.fidelity,
                     'error': 1.0 - outcome.fidelity, 'p_success': outcome.p_success,
                     'expected_pairs': expected})
    return pd.DataFrame(rows)


# =============================================
# === QUEUE PURIFIER =========================
# =============================================

def round_latency(times, distance=0):
    """One purification round: table purify time plus classical bits across `distance` cells."""
    return times.t_prfy + times.t_cb * distance


def queue_purifier_latency(incoming_rate, rounds, times, distance=0, success_probs=None, depth=None):
    """
    Steady-state interval (us) between purified pairs leaving a FIFO purifier chain.

    Level 0 performs E/2 purifications per delivered pair, one round latency
    each, so the chain delivers no faster than that even with unlimited input.
    """
    if incoming_rate <= 0:
        raise StarvationError("Purifier chain receives no pairs and never delivers")
    if depth is not None and rounds > depth:
        raise ValidationError(f"{rounds} rounds exceed purifier depth {depth}")
    if rounds == 0:
        return 1.0 / incoming_rate
    expected = expected_pairs_for_rounds(rounds, success_probs)
    return max(expected / incoming_rate, 0.5 * expected * round_latency(times, distance))


def sample_raw_pairs(rng, success_probs):
    """Draws the raw pairs consumed to deliver one pair through len(success_probs) rounds."""
    def cost(level):
        if level == 0:
            return 1
        total = 0
        while True:
            total += cost(level - 1) + cost(level - 1)
            if rng.random() < success_probs[level - 1]:
                return total
    return cost(len(success_probs))


@dataclass
class QueuePurifier:
    """
    Depth-n purification tree implemented by n purifiers in a FIFO chain.

    Level k pairs up its two oldest waiting pairs, purifies them for one round
    latency and passes the survivor to level k + 1. A failed round discards
    both pairs; the level simply waits for fresh input.
    """
    depth: int
    latency: float
    success_probs: tuple = ()
    rng: object = None
    waiting: list = field(default_factory=list)
    busy_until: list = field(default_factory=list)
    attempts: int = 0
    failures: int = 0
    received: int = 0
    delivered: int = 0

    def __post_init__(self):
        if self.depth < 1:
            raise ValidationError(f"Purifier depth must be at least 1, got {self.depth}")
        self.waiting = [deque() for _ in range(self.depth)]
        self.busy_until = [0.0] * self.depth

    def _succeeds(self, level):
        if self.rng is None or not self.success_probs:
            return True
        return self.rng.random() < self.success_probs[level]

    def feed(self, arrival_time):
        """Adds one raw pair; returns the delivery times it completes, if any."""
        self.received += 1
        delivered = []
        self.waiting[0].append(arrival_time)
        level = 0
        while level < self.depth and len(self.waiting[level]) >= 2:
            self.waiting[level].popleft()
            second = self.waiting[level].popleft()
            start = max(second, self.busy_until[level])
            finish = start + self.latency
            self.busy_until[level] = finish
            self.attempts += 1
            if not self._succeeds(level):
                self.failures += 1
                break
            if level + 1 == self.depth:
                self.delivered += 1
                delivered.append(finish)
                break
            self.waiting[level + 1].append(finish)
            level += 1
        return delivered
