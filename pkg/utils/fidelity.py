import logging
import math

import numpy as np
import pandas as pd

from .errors import NoCrossoverError, ValidationError

logger = logging.getLogger(__name__)

DEFAULT_HOP_SPACING = 600  # cells per teleport hop


def _check_distance(d):
    if d < 0:
        raise ValidationError(f"Distance must be a non-negative cell count, got {d}")


def ballistic_fidelity(f_old, d, errors):
    """Fidelity after ballistically moving a qubit d cells."""
    _check_distance(d)
    return f_old * (1.0 - errors.p_mv) ** d


def ballistic_error(d, errors):
    """1 - (1 - p_mv)^d, computed without cancellation."""
    _check_distance(d)
    if errors.p_mv >= 1.0:
        return 1.0 if d > 0 else 0.0
    return -math.expm1(d * math.log1p(-errors.p_mv))


def ballistic_latency(d, times):
    _check_distance(d)
    return times.t_mv * d


def teleport_fidelity(f_old, f_epr, errors):
    """Fidelity of a qubit teleported with an EPR pair of fidelity f_epr."""
    gate_term = (1.0 - errors.p_1q) * (1.0 - errors.p_2q)
    measure_term = (4.0 * (1.0 - errors.p_ms) ** 2 - 1.0) / 3.0
    state_term = (4.0 * f_old - 1.0) * (4.0 * f_epr - 1.0) / 9.0
    return 0.25 * (1.0 + 3.0 * gate_term * measure_term * state_term)


def generation_fidelity(errors, f_zero=1.0):
    """Fidelity of a freshly generated EPR pair (one-qubit gate then CNOT)."""
    return (1.0 - errors.p_1q) * (1.0 - errors.p_2q) * f_zero


def teleport_latency(d, times):
    """Teleport time with pre-positioned EPR halves; only the classical bits travel d cells."""
    _check_distance(d)
    return 2 * times.t_1q + times.t_2q + times.t_ms + times.t_cb * d


def link_fidelity(params, hop_spacing=DEFAULT_HOP_SPACING):
    """
    Fidelity of a virtual-wire pair: generated at the G node in the middle of
    the link, each half moved half a hop to its T' node.
    """
    f_gen = generation_fidelity(params.errors, params.f_zero)
    return ballistic_fidelity(f_gen, hop_spacing, params.errors)


def chained_teleport_fidelity(f_initial, hops, f_link, errors):
    """Folds teleport_fidelity over `hops` teleports, each assisted by an f_link pair."""
    if hops < 0:
        raise ValidationError(f"hops must be non-negative, got {hops}")
    f = f_initial
    for _ in range(hops):
        f = teleport_fidelity(f, f_link, errors)
    return f


def ballistic_distribution_fidelity(distance, params):
    """EPR pair generated mid-path with both halves moved ballistically, `distance` cells in total."""
    f_gen = generation_fidelity(params.errors, params.f_zero)
    return ballistic_fidelity(f_gen, distance, params.errors)


def crossover_distance(times):
    """Smallest cell count at which teleportation beats ballistic movement."""
    slope = times.t_mv - times.t_cb
    if slope <= 0:
        raise NoCrossoverError(
            f"t_mv ({times.t_mv}) must exceed t_cb ({times.t_cb}) for teleportation to win"
        )
    constant = teleport_latency(0, times)
    d = math.floor(constant / slope) + 1
    # Guard against rounding in the division
    while d > 1 and teleport_latency(d - 1, times) < ballistic_latency(d - 1, times):
        d -= 1
    while not teleport_latency(d, times) < ballistic_latency(d, times):
        d += 1
    logger.debug("Teleportation wins from %d cells", d)
    return d


# =============================================
# === TABLES ==================================
# =============================================

def latency_table(distances, times):
    """Ballistic vs teleport latency per distance, with the faster mode marked."""
    distances = np.asarray(list(distances), dtype=int)
    df = pd.DataFrame({
        'distance': distances,
        'ballistic_us': [ballistic_latency(int(d), times) for d in distances],
        'teleport_us': [teleport_latency(int(d), times) for d in distances],
    })
    df['teleport_faster'] = df['teleport_us'] < df['ballistic_us']
    return df


def teleport_chain_table(initial_fidelities, max_hops, params, hop_spacing=DEFAULT_HOP_SPACING):
    """
    EPR error after 0..max_hops chained teleports for several starting fidelities.

    Args:
        initial_fidelities (list): Starting fidelities of the chain-teleported pair.
        max_hops (int): Largest hop count to tabulate.
        params (ParameterSet): Physical parameters.
        hop_spacing (int): Cells per hop, used for the assisting link pairs.

    Returns:
        pd.DataFrame: Long-format rows (initial_fidelity, hops, fidelity, error, above_threshold).
    """
    f_link = link_fidelity(params, hop_spacing)
    rows = []
    for f0 in initial_fidelities:
        f = f0
        for hops in range(max_hops + 1):
            if hops:
                f = teleport_fidelity(f, f_link, params.errors)
            rows.append({
                'initial_fidelity': f0,
                'hops': hops,
                'fidelity': f,
                'error': 1.0 - f,
                'above_threshold': f >= params.threshold.f_min,
            })
    return pd.DataFrame(rows)
