# utils/channel.py

import logging
import math
from dataclasses import asdict, dataclass, field
from enum import Enum

import pandas as pd

from .errors import InfeasiblePlanError, NotPurifiableError, ValidationError
from .fidelity import (
    DEFAULT_HOP_SPACING,
    generation_fidelity,
    link_fidelity,
    teleport_fidelity,
    teleport_latency,
)
from .params import ThresholdPolicy, with_uniform_error_rate
from .purification import (
    Protocol,
    expected_pairs_for_rounds,
    purify_rounds,
    purify_to_target,
    round_latency,
)

logger = logging.getLogger(__name__)

REFERENCE_DISTANCE = 64 * DEFAULT_HOP_SPACING  # longest path on a 32x32 grid


class PlacementScheme(Enum):
    ENDPOINTS_ONLY = "endpoints-only"
    VIRTUAL_WIRE = "virtual-wire"
    BETWEEN_TELEPORTS = "between-teleports"
    BETWEEN_TELEPORTS_VIRTUAL_WIRE = "between-teleports-virtual-wire"

    @property
    def purifies_wire(self):
        return self in (PlacementScheme.VIRTUAL_WIRE, PlacementScheme.BETWEEN_TELEPORTS_VIRTUAL_WIRE)

    @property
    def purifies_between(self):
        return self in (PlacementScheme.BETWEEN_TELEPORTS, PlacementScheme.BETWEEN_TELEPORTS_VIRTUAL_WIRE)

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            choices = ", ".join(s.value for s in cls)
            raise ValidationError(f"Unknown placement scheme '{value}' (choose from {choices})") from None


@dataclass(frozen=True)
class PlannerSettings:
    """Knobs of the planner; endpoint_cap and wire_cap bound purification depth."""
    hop_spacing: int = DEFAULT_HOP_SPACING
    endpoint_cap: int = 5
    wire_cap: int = 5
    between_rounds: int = 1
    max_rounds: int = 20
    protocol: Protocol = Protocol.DEJMPS

    def __post_init__(self):
        if self.hop_spacing < 1:
            raise ValidationError(f"hop_spacing must be at least 1 cell, got {self.hop_spacing}")
        if min(self.endpoint_cap, self.wire_cap, self.between_rounds) < 0:
            raise ValidationError("Purification depths must be non-negative")


@dataclass(frozen=True)
class LogicalTransferSpec:
    physical_per_logical: int = 49
    threshold: ThresholdPolicy = field(default_factory=ThresholdPolicy)

    def __post_init__(self):
        if self.physical_per_logical < 1:
            raise ValidationError("A logical qubit needs at least one physical qubit")


@dataclass(frozen=True)
class ChannelPlan:
    """EPR budget, latency and fidelity of one channel, per purified end-to-end pair."""
    distance: int
    hops: int
    rounds_endpoint: int = 0
    rounds_wire: int = 0
    rounds_between: int = 0
    total_pairs: float = 1.0
    nonlocal_pairs: float = 0.0
    setup_latency: float = 0.0
    delivered_fidelity: float = 1.0
    raw_fidelity: float = 1.0
    link_fidelity: float = 1.0
    endpoint_success: tuple = ()
    scheme: PlacementScheme = PlacementScheme.ENDPOINTS_ONLY
    feasible: bool = True
    failing_stage: str = None

    @property
    def pairs_per_purified(self):
        """Raw end-to-end pairs arriving at the endpoints per purified pair."""
        return expected_pairs_for_rounds(self.rounds_endpoint, self.endpoint_success or None)

    def as_row(self):
        row = asdict(self)
        row['scheme'] = self.scheme.value
        row['endpoint_success'] = ";".join(f"{p:.12g}" for p in self.endpoint_success)
        return row


def _hops_for(distance, hop_spacing):
    if distance < 0:
        raise ValidationError(f"Distance must be non-negative, got {distance}")
    return math.ceil(distance / hop_spacing)


def _distribute(f_link, f_assist, hops, scheme, params, settings):
    """Chains the end-to-end pair over `hops` teleports, purifying between hops if asked."""
    errors = params.errors
    if hops == 0:
        return generation_fidelity(errors, params.f_zero), []
    f = f_link
    stages = []
    for hop in range(1, hops + 1):
        f = teleport_fidelity(f, f_assist, errors)
        if scheme.purifies_between and hop < hops and settings.between_rounds:
            outcomes = purify_rounds(f, settings.protocol, errors, settings.between_rounds)
            stages.append(tuple(o.p_success for o in outcomes))
            f = outcomes[-1].fidelity
    return f, stages


def _count_pairs(hops, end_pairs, stages, wire_cost):
    """Total and non-local expected pairs for one purified end-to-end pair."""
    if hops == 0:
        return end_pairs, 0.0
    # Pairs crossing the last hop, then walk back toward the generator.
    crossing = end_pairs
    teleports = crossing
    for successes in reversed(stages):
        crossing *= expected_pairs_for_rounds(len(successes), successes)
        teleports += crossing
    generated = crossing
    # Hops not followed by a purification stage carry the same population as the next one.
    teleports += crossing * (hops - 1 - len(stages))
    return generated + teleports * wire_cost, generated


def plan_channel(distance, scheme, params, hop_spacing=None, settings=None):
    """
    Plans one channel: hop count, purification depths, pair budgets and latency.

    Args:
        distance (int): Source to destination distance in cells.
        scheme (PlacementScheme or str): Where purification happens.
        params (ParameterSet): Physical parameters and threshold.
        hop_spacing (int): Cells per teleport hop; overrides settings.hop_spacing.
        settings (PlannerSettings): Purification depth policy.

    Returns:
        ChannelPlan: Infeasible plans are returned marked, with the failing stage.
    """
    settings = settings or PlannerSettings()
    hop_spacing = hop_spacing or settings.hop_spacing
    if hop_spacing < 1:
        raise ValidationError(f"hop_spacing must be at least 1 cell, got {hop_spacing}")
    scheme = PlacementScheme.parse(scheme)
    errors = params.errors
    f_min = params.threshold.f_min
    hops = _hops_for(distance, hop_spacing)
    f_link = link_fidelity(params, hop_spacing)

    wire_candidates = range(settings.wire_cap + 1) if scheme.purifies_wire and hops else [0]
    chosen = None
    for rounds_wire in wire_candidates:
        try:
            wire_outcomes = purify_rounds(f_link, settings.protocol, errors, rounds_wire)
        except NotPurifiableError:
            break
        f_assist = wire_outcomes[-1].fidelity if wire_outcomes else f_link
        try:
            f_raw, stages = _distribute(f_link, f_assist, hops, scheme, params, settings)
        except NotPurifiableError:
            chosen = (rounds_wire, wire_outcomes, None, [], None, "between")
            break
        run = purify_to_target(f_raw, settings.protocol, errors, f_min, settings.max_rounds)
        chosen = (rounds_wire, wire_outcomes, f_raw, stages, run, None)
        if run.reachable and run.rounds <= settings.endpoint_cap:
            break

    rounds_wire, wire_outcomes, f_raw, stages, run, stage = chosen
    if stage is None:
        if not run.reachable:
            stage = "endpoint"
        elif run.rounds > settings.endpoint_cap:
            stage = "wire" if scheme.purifies_wire else "endpoint"

    rounds_between = settings.between_rounds if stages else 0
    if run is None or not run.reachable:
        total = nonlocal_pairs = float("nan")
        rounds_endpoint, successes, delivered = (run.rounds if run else 0), (), (run.fidelity if run else 0.25)
    else:
        rounds_endpoint, successes, delivered = run.rounds, run.success_probs, run.fidelity
        wire_cost = expected_pairs_for_rounds(rounds_wire, [o.p_success for o in wire_outcomes])
        end_pairs = expected_pairs_for_rounds(rounds_endpoint, successes)
        total, nonlocal_pairs = _count_pairs(hops, end_pairs, stages, wire_cost)

    latency = hops * teleport_latency(hop_spacing, params.times)
    latency += len(stages) * rounds_between * round_latency(params.times, hop_spacing)
    latency += rounds_endpoint * round_latency(params.times, distance)

    plan = ChannelPlan(
        distance=distance,
        hops=hops,
        rounds_endpoint=rounds_endpoint,
        rounds_wire=rounds_wire,
        rounds_between=rounds_between,
        total_pairs=total,
        nonlocal_pairs=nonlocal_pairs,
        setup_latency=latency,
        delivered_fidelity=delivered,
        raw_fidelity=f_raw if f_raw is not None else 0.25,
        link_fidelity=f_link,
        endpoint_success=tuple(successes),
        scheme=scheme,
        feasible=stage is None,
        failing_stage=stage,
    )
    if not plan.feasible:
        logger.warning("Channel of %d cells (%s) is infeasible at stage '%s'", distance, scheme.value, stage)
    else:
        logger.debug("Planned %s over %d hops: %d endpoint rounds, %.4g total pairs",
                     scheme.value, hops, rounds_endpoint, total)
    return plan


def pairs_per_logical_transfer(plan, spec=None):
    """Expected raw pairs reaching the endpoints to teleport one logical qubit."""
    spec = spec or LogicalTransferSpec()
    if not plan.feasible:
        raise InfeasiblePlanError(f"Channel of {plan.distance} cells cannot reach threshold",
                                  stage=plan.failing_stage)
    return plan.pairs_per_purified * spec.physical_per_logical


# =============================================
# === SWEEPS =================================
# =============================================

def distance_sweep(scheme, params, distances, hop_spacing=None, settings=None):
    """One plan per distance as a DataFrame; infeasible rows are kept and marked."""
    rows = [plan_channel(int(d), scheme, params, hop_spacing, settings).as_row() for d in distances]
    return pd.DataFrame(rows)


def scheme_comparison(params, distances, hop_spacing=None, settings=None):
    """distance_sweep for every placement scheme, stacked."""
    frames = [distance_sweep(s, params, distances, hop_spacing, settings) for s in PlacementScheme]
    return pd.concat(frames, ignore_index=True)


def error_rate_sensitivity(params, rate_grid, scheme, distance=REFERENCE_DISTANCE, hop_spacing=None, settings=None):
    """
    Teleported-pair need per uniform operation error rate.

    Every error probability is set to the grid rate; rows where purification
    cannot reach threshold carry feasible=False and breakdown=True.
    """
    rows = []
    for rate in rate_grid:
        plan = plan_channel(distance, scheme, with_uniform_error_rate(params, rate), hop_spacing, settings)
        rows.append({
            'rate': rate,
            'scheme': plan.scheme.value,
            'nonlocal_pairs': plan.nonlocal_pairs,
            'total_pairs': plan.total_pairs,
            'rounds_endpoint': plan.rounds_endpoint,
            'rounds_wire': plan.rounds_wire,
            'feasible': plan.feasible,
            'breakdown': not plan.feasible,
        })
    df = pd.DataFrame(rows)
    working = df[df['feasible']]
    if not working.empty:
        logger.info("%s: %d/%d rates workable, pair need spans %.3g..%.3g",
                    PlacementScheme.parse(scheme).value, len(working), len(df),
                    working['nonlocal_pairs'].min(), working['nonlocal_pairs'].max())
    return df
