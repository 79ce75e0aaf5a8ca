"""Event-driven communication simulator for logical instruction streams.

Each two-qubit instruction opens an EPR channel between the sites of its
qubits, waits for enough purified pairs to teleport a whole logical qubit,
and moves the data with a single teleport.

Channels share the teleporter sets, generator banks and purifier queues on
their route by time multiplexing: a resource crossed by n channels gives each
of them 1/n of its servers, and a channel streams raw pairs at the pace of
its tightest share. Every channel also holds one storage cell on each
incoming link its pairs teleport over; a link has t cells, and channels that
find one full wait until a cell frees up.
"""

import heapq
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from enum import IntEnum
from functools import reduce

import networkx as nx
import numpy as np
import pandas as pd

from .channel import PlacementScheme, PlannerSettings, plan_channel
from .errors import DeadlockError, InfeasiblePlanError, ValidationError
from .purification import QueuePurifier, round_latency
from .topology import Coordinate, dimension_order_path, midpoint_generator, turn_index
from .workloads import LayoutMode

logger = logging.getLogger(__name__)

WAIT_BINS = (0.0, 1.0, 10.0, 100.0, 1e3, 1e4, 1e5, np.inf)


class EventKind(IntEnum):
    # Value is the tie-break rank at equal timestamps: arrivals first.
    TELEPORT_COMPLETE = 0
    MOVE_COMPLETE = 1
    CLASSICAL_ARRIVE = 2
    GENERATION_COMPLETE = 3
    PURIFY_ROUND_COMPLETE = 4
    MEASURE_COMPLETE = 5
    CHANNEL_READY = 6
    INSTRUCTION_COMPLETE = 7


@dataclass(order=True)
class Event:
    time: float
    kind: EventKind
    subject: tuple
    serial: int
    payload: dict = field(default_factory=dict, compare=False)


# =============================================
# === PAULI FRAMES ===========================
# =============================================

_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Z = np.diag([1, -1]).astype(complex)

# Correction bits: bit 0 applies X, bit 1 applies Z.
PAULI_FRAMES = tuple(
    np.linalg.matrix_power(_X, bits & 1) @ np.linalg.matrix_power(_Z, bits >> 1) for bits in range(4)
)


def identify_frame(operator):
    """Index of the Pauli frame equal to `operator` up to a global phase."""
    for index, frame in enumerate(PAULI_FRAMES):
        if np.isclose(abs(np.trace(frame.conj().T @ operator)) / 2, 1.0):
            return index
    raise ValidationError("Operator is not a Pauli frame")


# [later][earlier] -> frame of PAULI_FRAMES[later] @ PAULI_FRAMES[earlier]
_FRAME_PRODUCTS = tuple(
    tuple(identify_frame(PAULI_FRAMES[later] @ PAULI_FRAMES[earlier]) for earlier in range(4))
    for later in range(4)
)


def pauli_frame(corrections):
    """Frame left on a qubit after applying each hop's correction in order."""
    return reduce(lambda frame, bits: _FRAME_PRODUCTS[bits][frame], corrections, 0)


@dataclass
class QubitIdPacket:
    """Control packet riding with one EPR half; `correction` accumulates each hop's 2-bit Pauli correction."""
    id: int
    dest: Coordinate
    partner_dest: Coordinate
    correction: int = 0
    history: list = field(default_factory=list)

    def record(self, bits):
        if not 0 <= bits <= 3:
            raise ValidationError(f"Correction must be two bits, got {bits}")
        self.history.append(bits)
        self.correction ^= bits


# =============================================
# === STATE ==================================
# =============================================

@dataclass
class Resource:
    name: str
    kind: str
    capacity: int
    router: Coordinate = None
    users: set = field(default_factory=set)  # ids of the channels streaming through
    busy: float = 0.0  # server time over capacity


@dataclass
class RouterState:
    """Teleporter sets, purifier queues and per-link storage of one T' router."""
    coord: Coordinate
    x_set: Resource
    y_set: Resource
    purifier: Resource
    storage_limit: int
    storage: dict = field(default_factory=dict)  # neighbour -> cells held on that incoming link
    peak_storage: int = 0

    def teleporters(self, dim):
        return self.x_set if dim == "x" else self.y_set

    def has_room(self, neighbour):
        return self.storage.get(neighbour, 0) < self.storage_limit


@dataclass
class Channel:
    """
    One EPR channel: raw pairs stream from the midpoint generator to both ends.

    `remaining` counts raw-pair intervals left to stream as of `since`. The
    last raw pair leaves the generator at `drained`; its purified survivor is
    ready `latency` later.
    """
    id: int
    src: Coordinate
    dst: Coordinate
    path: list
    raw_pairs: int
    latency: float
    rounds: int = 0
    round_time: float = 0.0
    demand: list = field(default_factory=list)  # (resource, server us per raw pair)
    cells: list = field(default_factory=list)  # (router, neighbour)
    requested: float = 0.0
    start: float = None
    drained: float = None
    remaining: float = 0.0
    since: float = 0.0
    rate: float = 0.0  # raw pairs per us
    version: int = 0
    info: dict = field(default_factory=dict)

    @property
    def hops(self):
        return len(self.path) - 1

    @property
    def interval(self):
        return 1.0 / self.rate if self.rate else math.inf

    @property
    def travel(self):
        """Generation, teleports and moves of a pair before its first purification round."""
        return self.latency - self.rounds * self.round_time

    @property
    def drain_at(self):
        if not self.remaining:
            return self.since
        return self.since + self.remaining / self.rate

    @property
    def ready(self):
        return None if self.drained is None else self.drained + self.latency


@dataclass(frozen=True)
class SimSettings:
    stochastic: bool = False
    seed: int = 0
    trace: bool = False
    physical_per_logical: int = 49
    planner: PlannerSettings = field(default_factory=PlannerSettings)

    def __post_init__(self):
        if self.physical_per_logical < 1:
            raise ValidationError("physical_per_logical must be at least 1")


@dataclass
class SimReport:
    makespan: float = 0.0
    instructions: int = 0
    channels: int = 0
    epr_generated: int = 0
    epr_teleport_assist: int = 0
    epr_purification_sacrificed: int = 0
    epr_endpoint_used: int = 0
    nonlocal_pairs: int = 0
    recycled_qubits: int = 0
    purifier_attempts: int = 0
    purifier_failures: int = 0
    peak_link_storage: int = 0
    corrections_checked: int = 0
    utilization: dict = field(default_factory=dict)
    queue_wait_histogram: dict = field(default_factory=dict)
    trace: list = field(default_factory=list)

    @property
    def balanced(self):
        consumed = self.epr_teleport_assist + self.epr_purification_sacrificed + self.epr_endpoint_used
        return consumed == self.epr_generated

    def to_dict(self, include_trace=False):
        data = asdict(self)
        if not include_trace:
            data.pop('trace')
        return data

    def to_json(self, include_trace=False):
        return json.dumps(self.to_dict(include_trace), indent=2, sort_keys=True)

    def trace_frame(self):
        return pd.DataFrame(self.trace, columns=['time', 'kind', 'subject'])


def _link_dim(a, b):
    return "x" if a.y == b.y else "y"


# =============================================
# === NETWORK STATE ==========================
# =============================================

class Network:
    """Resource state of one mesh during a simulation."""

    def __init__(self, layout, params, settings=None):
        self.layout = layout
        self.params = params
        self.settings = settings or SimSettings()
        self.rng = np.random.default_rng(self.settings.seed)
        self.routers = {}
        for c in layout.sites():
            self.routers[c] = RouterState(
                coord=c,
                x_set=Resource(f"T'({c})/x", "teleporter", layout.set_size, c),
                y_set=Resource(f"T'({c})/y", "teleporter", layout.set_size, c),
                purifier=Resource(f"P({c})", "purifier", layout.p, c),
                storage_limit=layout.t,
            )
        self.generators = {
            link: Resource(f"G({link[0]}-{link[1]})", "generator", layout.g) for link in layout.links()
        }
        self.channels = {}
        self.waiting = []
        self.drains = []  # (drain time, channel id, version)
        self.plans = {}
        self.report = SimReport()
        self.waits = []

    def plan_for(self, hops):
        if hops not in self.plans:
            distance = hops * self.layout.hop_spacing
            plan = plan_channel(distance, PlacementScheme.ENDPOINTS_ONLY, self.params,
                                self.layout.hop_spacing, self.settings.planner)
            if not plan.feasible:
                raise InfeasiblePlanError(f"No channel of {hops} hops reaches threshold", stage=plan.failing_stage)
            if plan.rounds_endpoint > self.layout.depth:
                raise InfeasiblePlanError(
                    f"{hops}-hop channels need {plan.rounds_endpoint} rounds but purifiers are "
                    f"{self.layout.depth} deep", stage="endpoint")
            self.plans[hops] = plan
        return self.plans[hops]

    def _route(self, path, rounds, round_time):
        """Server time per raw pair on every resource of the route, and the link cells it holds."""
        times = self.params.times
        demand = {}
        cells = []

        def use(resource, service):
            prev = demand.get(resource.name, (resource, 0.0))[1]
            demand[resource.name] = (resource, prev + service)

        gen_link = midpoint_generator(path)
        use(self.generators[tuple(sorted(gen_link))], times.t_gen)
        m = path.index(gen_link[0])
        # Source half walks path[m] -> path[0]; destination half path[m] -> path[-1].
        steps = [(path[k], path[k - 1]) for k in range(m, 0, -1)]
        steps += [(path[k], path[k + 1]) for k in range(m, len(path) - 1)]
        for a, b in steps:
            use(self.routers[a].teleporters(_link_dim(a, b)), times.t_tprt)
            use(self.generators[tuple(sorted((a, b)))], times.t_gen)
            cells.append((b, a))
        if rounds:
            # Each end runs half of every pair's purification round.
            for end in (path[0], path[-1]):
                use(self.routers[end].purifier, round_time / 2.0)
        return list(demand.values()), cells

    def first_pair_latency(self, path, rounds):
        """Generation, the longer teleport chain, a turn move if any, local moves and purification."""
        times = self.params.times
        hops = len(path) - 1
        distance = hops * self.layout.hop_spacing
        local_move = self.layout.local_cells * times.t_mv
        if hops == 0:
            return times.t_gen + local_move
        m = hops // 2
        per_hop = times.t_tprt + times.t_cb * self.layout.hop_spacing
        src_side, dst_side = m * per_hop, (hops - m) * per_hop
        turn = turn_index(path)
        if turn is not None:
            if turn <= m:
                src_side += local_move
            else:
                dst_side += local_move
        return times.t_gen + max(src_side, dst_side) + local_move + rounds * round_latency(times, distance)

    def open_channel(self, src, dst, now, pairs_needed=None, info=None):
        """
        Requests a channel from src to dst at `now`.

        The channel starts streaming as soon as every link cell it needs is
        free, possibly right away. Its drain and ready times settle as the
        network advances.

        Returns:
            Channel: the new channel, streaming or waiting for storage.
        """
        pairs_needed = pairs_needed or self.settings.physical_per_logical
        src, dst = self.layout.check(src), self.layout.check(dst)
        path = dimension_order_path(src, dst, self.layout)
        hops = len(path) - 1
        channel_id = len(self.channels)
        if hops == 0:
            channel = Channel(channel_id, src, dst, path, pairs_needed, self.first_pair_latency(path, 0),
                              requested=now, start=now, drained=now, since=now, info=info or {})
            self.channels[channel_id] = channel
            self._count_pairs(pairs_needed, pairs_needed, 0)
            return channel

        plan = self.plan_for(hops)
        rounds = plan.rounds_endpoint
        round_time = round_latency(self.params.times, hops * self.layout.hop_spacing)
        demand, cells = self._route(path, rounds, round_time)
        raw = self._raw_pairs(plan, rounds, round_time, pairs_needed)
        channel = Channel(channel_id, src, dst, path, raw, self.first_pair_latency(path, rounds), rounds,
                          round_time, demand, cells, requested=now, remaining=float(raw - 1), since=now,
                          info=info or {})
        self.channels[channel_id] = channel
        self._count_pairs(raw, pairs_needed, hops)
        self.report.channels += 1
        if not self._admit(channel, now):
            logger.debug("Channel %d %s -> %s waits for link storage", channel_id, src, dst)
            self.waiting.append(channel)
        return channel

    def _raw_pairs(self, plan, rounds, round_time, pairs_needed):
        if not (self.settings.stochastic and rounds):
            return math.ceil(pairs_needed * plan.pairs_per_purified - 1e-9)
        # Raw pairs go round-robin to p FIFO purifier chains until pairs_needed come out.
        chains = [QueuePurifier(rounds, round_time, plan.endpoint_success, self.rng)
                  for _ in range(self.layout.p)]
        delivered = raw = 0
        while delivered < pairs_needed:
            delivered += len(chains[raw % len(chains)].feed(float(raw)))
            raw += 1
        for chain in chains:
            self.report.purifier_attempts += chain.attempts
            self.report.purifier_failures += chain.failures
        return raw

    def _admit(self, channel, now):
        if not all(self.routers[router].has_room(neighbour) for router, neighbour in channel.cells):
            return False
        for router, neighbour in channel.cells:
            state = self.routers[router]
            state.storage[neighbour] = state.storage.get(neighbour, 0) + 1
            state.peak_storage = max(state.peak_storage, state.storage[neighbour])
            self.report.peak_link_storage = max(self.report.peak_link_storage, state.storage[neighbour])
        channel.start = channel.since = now
        for resource, _ in channel.demand:
            resource.users.add(channel.id)
        self.waits.append(now - channel.requested)
        self._repace(channel.demand, now)
        return True

    def _pace(self, channel):
        """Raw pairs per us under equal time slots on every resource of the route."""
        return min((resource.capacity / (len(resource.users) * service)
                    for resource, service in channel.demand if service > 0), default=math.inf)

    def _progress(self, channel, now):
        elapsed = now - channel.since
        if elapsed > 0 and channel.rate:
            done = min(channel.remaining, channel.rate * elapsed)
            channel.remaining -= done
            for resource, service in channel.demand:
                resource.busy += done * service / resource.capacity
        channel.since = now

    def _repace(self, demand, now):
        """Re-times every streaming channel that shares a resource with `demand`."""
        affected = set()
        for resource, _ in demand:
            affected |= resource.users
        for channel_id in sorted(affected):
            channel = self.channels[channel_id]
            rate = self._pace(channel)
            if rate == channel.rate:
                continue
            self._progress(channel, now)
            channel.rate = rate
            channel.version += 1
            heapq.heappush(self.drains, (channel.drain_at, channel_id, channel.version))

    def next_drain(self):
        """(time, channel id, version) of the next channel to drain, or None when nothing streams."""
        while self.drains:
            _, channel_id, version = self.drains[0]
            channel = self.channels[channel_id]
            if channel.drained is None and channel.version == version:
                return self.drains[0]
            heapq.heappop(self.drains)
        return None

    def retire(self, channel, now):
        """Ends a drained channel's stream, frees its shares and cells, and admits waiting channels."""
        self._progress(channel, now)
        channel.remaining = 0.0
        channel.drained = now
        for resource, service in channel.demand:
            resource.busy += service / resource.capacity
            resource.users.discard(channel.id)
        for router, neighbour in channel.cells:
            self.routers[router].storage[neighbour] -= 1
        self._fold_corrections(channel)
        self._repace(channel.demand, now)
        still_waiting = []
        for waiting in self.waiting:
            if not self._admit(waiting, now):
                still_waiting.append(waiting)
        self.waiting = still_waiting

    def settle(self):
        """Runs every streaming and waiting channel to its drain."""
        while True:
            head = self.next_drain()
            if head is None:
                break
            time, channel_id, _ = head
            self.retire(self.channels[channel_id], time)
        if self.waiting:
            raise DeadlockError(f"{len(self.waiting)} channels wait for storage on an idle network",
                                [f"channel {c.id} {c.src} -> {c.dst}" for c in self.waiting])

    def _count_pairs(self, raw, used, hops):
        report = self.report
        report.epr_generated += raw * (1 + hops)
        report.epr_teleport_assist += raw * hops
        report.epr_purification_sacrificed += raw - used
        report.epr_endpoint_used += used
        report.recycled_qubits += 2 * raw * (1 + hops)
        if hops:
            report.nonlocal_pairs += raw

    def _fold_corrections(self, channel):
        # One 2-bit correction per hop each half teleports over.
        m = channel.hops // 2
        bits = [int(b) for b in self.rng.integers(0, 4, size=channel.hops)]
        for dest, partner, corrections in ((channel.src, channel.dst, bits[:m]),
                                           (channel.dst, channel.src, bits[m:])):
            packet = QubitIdPacket(channel.id, dest, partner)
            for b in corrections:
                packet.record(b)
            if packet.correction != pauli_frame(packet.history):
                raise ValidationError(f"Correction record of packet {packet.id} disagrees with its Pauli frame")
        self.report.corrections_checked += 1

    def resources(self):
        for router in self.routers.values():
            yield router.x_set
            yield router.y_set
            yield router.purifier
        yield from self.generators.values()


def open_channel(src, dst, pairs_needed, layout, params, now=0.0, network=None):
    """Ready time of a channel opened on `network` (a fresh idle one by default) once it settles."""
    network = network or Network(layout, params)
    channel = network.open_channel(Coordinate(*src), Coordinate(*dst), now, pairs_needed)
    network.settle()
    return channel.ready


def teleport_logical(qubit, src, dst, layout, params, ready=0.0):
    """Completion of a data teleport started at `ready`: t_tprt plus classical bits across the route."""
    if src == dst:
        return ready
    distance = layout.distance(Coordinate(*src), Coordinate(*dst))
    logger.debug("Logical qubit %s teleports %s -> %s", qubit, src, dst)
    return ready + params.times.t_tprt + params.times.t_cb * distance

# =============================================
# === SCHEDULING =============================
# =============================================

def _dependencies(stream):
    last, deps = {}, {}
    for ins in stream:
        deps[ins.seq] = sorted({last[q] for q in ins.qubits if q in last})
        for q in ins.qubits:
            last[q] = ins.seq
    return deps


def schedule(stream, layout=None):
    """Groups instructions by dependency level; each group issues together, in stream order."""
    if layout is not None:
        if stream.placement is None:
            raise ValidationError("Stream must be placed before it can be scheduled on a layout")
        for ins in stream:
            for q in ins.qubits:
                layout.check(stream.placement.site(q))
    level, last = {}, {}
    groups = []
    for ins in stream:
        lvl = 1 + max((level[last[q]] for q in ins.qubits if q in last), default=0)
        level[ins.seq] = lvl
        for q in ins.qubits:
            last[q] = ins.seq
        if lvl > len(groups):
            groups.append([])
        groups[lvl - 1].append(ins)
    return groups


def dependency_graph(stream):
    graph = nx.DiGraph()
    for ins in stream:
        graph.add_node(ins.seq, instruction=ins)
    for seq, preds in _dependencies(stream).items():
        graph.add_edges_from((p, seq) for p in preds)
    return graph


def _leg_payload(channel):
    return {key: channel.info[key] for key in ('qubit', 'src', 'dst')}


# =============================================
# === SIMULATION =============================
# =============================================

class Simulation:
    """Single-threaded event loop over one stream, layout and parameter set."""

    def __init__(self, stream, layout, params, settings=None):
        if stream.placement is None:
            raise ValidationError("Stream must be placed on the layout before simulation")
        self.stream = stream
        self.layout = layout
        self.params = params
        self.settings = settings or SimSettings()
        self.mode = stream.placement.mode
        self.network = Network(layout, params, self.settings)
        self.events = []
        self.serial = 0
        self.now = 0.0
        self.home = dict(stream.placement.sites)
        for c in self.home.values():
            layout.check(c)
        self.where = dict(self.home)
        self.occupancy = {c: 0 for c in layout.sites()}
        for c in self.home.values():
            self.occupancy[c] += 1
        self.slot_waiters = {}
        self.deps = _dependencies(stream)
        self.remaining = {seq: len(p) for seq, p in self.deps.items()}
        self.successors = {}
        for seq, preds in self.deps.items():
            for p in preds:
                self.successors.setdefault(p, []).append(seq)
        self.by_seq = {ins.seq: ins for ins in stream}
        self.last_op = {}
        for ins in stream:
            for q in ins.qubits:
                self.last_op[q] = ins.seq
        self.completed = set()
        self.wakeup = None

    def push(self, time, kind, subject, **payload):
        self.serial += 1
        heapq.heappush(self.events, Event(time, kind, subject, self.serial, payload))

    def check_plans(self):
        """Fails before simulating if any channel the stream needs is infeasible."""
        hop_counts = set()
        for ins in self.stream:
            a, b = (self.home[q] for q in ins.qubits)
            hop_counts.add(abs(a.x - b.x) + abs(a.y - b.y))
        if self.mode is LayoutMode.MOBILE:
            hop_counts.update(range(1, self.layout.rows + self.layout.cols - 1))
        for h in sorted(hop_counts - {0}):
            self.network.plan_for(h)

    def run(self):
        self.check_plans()
        for ins in self.stream:
            if not self.remaining[ins.seq]:
                self.issue(ins)
        self.sync()
        while self.events:
            event = heapq.heappop(self.events)
            if self.stale(event):
                continue
            self.now = event.time
            if self.settings.trace:
                self.network.report.trace.append((event.time, event.kind.name, ":".join(map(str, event.subject))))
            self.handle(event)
            self.sync()
        pending = [seq for seq in self.by_seq if seq not in self.completed]
        if pending:
            blocked = [f"instruction {w['seq']} waiting for site {site}"
                       for site, queue in sorted(self.slot_waiters.items()) for w in queue]
            raise DeadlockError(f"{len(pending)} instructions cannot proceed", blocked or pending[:10])
        return self.finish()

    # --- issue and channel legs ---

    def issue(self, ins):
        a, b = ins.qubits
        src, dst = self.where[a], self.where[b]
        if src == dst:
            self.push(self.now, EventKind.INSTRUCTION_COMPLETE, (ins.seq, 0))
            return
        self.start_leg(ins.seq, 0, a, src, dst)

    def start_leg(self, seq, leg, qubit, src, dst):
        info = {'subject': (seq, leg), 'qubit': qubit, 'src': src, 'dst': dst}
        self.network.open_channel(src, dst, self.now, info=info)

    def sync(self):
        """Schedules a wake-up for the channel the network drains next."""
        head = self.network.next_drain()
        if head is None or head == self.wakeup:
            return
        self.wakeup = head
        time, channel_id, version = head
        subject = self.network.channels[channel_id].info['subject']
        self.push(time, EventKind.GENERATION_COMPLETE, subject, channel=channel_id, version=version)

    def stale(self, event):
        # Drain wake-ups go stale once the channel is re-paced or already drained.
        if event.kind is not EventKind.GENERATION_COMPLETE:
            return False
        channel = self.network.channels[event.payload['channel']]
        return channel.drained is not None or channel.version != event.payload['version']

    def needs_slot(self, leg):
        # Returns to a Home Base site land in the resident slot, kept free for its owner.
        return not (self.mode is LayoutMode.HOME_BASE and leg == 1)

    def handle(self, event):
        seq, leg = event.subject
        p = event.payload
        if event.kind is EventKind.GENERATION_COMPLETE:
            channel = self.network.channels[p['channel']]
            self.network.retire(channel, self.now)
            if channel.rounds:
                self.push(self.now + channel.travel + channel.round_time, EventKind.PURIFY_ROUND_COMPLETE,
                          (seq, leg), channel=channel.id, round=1)
            else:
                self.push(self.now + channel.latency, EventKind.CHANNEL_READY, (seq, leg), **_leg_payload(channel))
        elif event.kind is EventKind.PURIFY_ROUND_COMPLETE:
            channel = self.network.channels[p['channel']]
            if p['round'] < channel.rounds:
                self.push(self.now + channel.round_time, EventKind.PURIFY_ROUND_COMPLETE, (seq, leg),
                          channel=channel.id, round=p['round'] + 1)
            else:
                self.push(self.now, EventKind.CHANNEL_READY, (seq, leg), **_leg_payload(channel))
        elif event.kind is EventKind.CHANNEL_READY:
            if self.needs_slot(leg) and self.occupancy[p['dst']] >= self.layout.site_slots:
                self.slot_waiters.setdefault(p['dst'], []).append(dict(p, seq=seq, leg=leg, since=self.now))
                return
            self.begin_teleport(seq, leg, p)
        elif event.kind is EventKind.MEASURE_COMPLETE:
            classical = self.params.times.t_cb * self.layout.distance(p['src'], p['dst'])
            self.push(self.now + classical, EventKind.CLASSICAL_ARRIVE, (seq, leg), **p)
        elif event.kind is EventKind.CLASSICAL_ARRIVE:
            self.push(self.now, EventKind.TELEPORT_COMPLETE, (seq, leg), **p)
        elif event.kind is EventKind.TELEPORT_COMPLETE:
            self.arrive(seq, leg, p)
        elif event.kind is EventKind.MOVE_COMPLETE:
            self.release(p['site'])
        elif event.kind is EventKind.INSTRUCTION_COMPLETE:
            self.complete(seq)

    def begin_teleport(self, seq, leg, p):
        if self.needs_slot(leg):
            self.occupancy[p['dst']] += 1
        self.push(self.now + self.params.times.t_tprt, EventKind.MEASURE_COMPLETE, (seq, leg), **p)

    def arrive(self, seq, leg, p):
        qubit, src, dst = p['qubit'], p['src'], p['dst']
        self.where[qubit] = dst
        if self.mode is LayoutMode.HOME_BASE:
            if leg == 0:
                # Operation done at the partner's site; head home.
                self.start_leg(seq, 1, qubit, dst, src)
            else:
                self.push(self.now, EventKind.MOVE_COMPLETE, (seq, leg), site=src)
                self.push(self.now, EventKind.INSTRUCTION_COMPLETE, (seq, 0))
            return
        self.push(self.now, EventKind.MOVE_COMPLETE, (seq, leg), site=src)
        if leg == 0:
            self.push(self.now, EventKind.INSTRUCTION_COMPLETE, (seq, 0))

    def release(self, site):
        self.occupancy[site] -= 1
        queue = self.slot_waiters.get(site)
        while queue and self.occupancy[site] < self.layout.site_slots:
            waiter = queue.pop(0)
            self.network.waits.append(self.now - waiter['since'])
            self.begin_teleport(waiter['seq'], waiter['leg'], waiter)
        if queue == []:
            del self.slot_waiters[site]

    def complete(self, seq):
        self.completed.add(seq)
        self.network.report.instructions += 1
        ins = self.by_seq[seq]
        if self.mode is LayoutMode.MOBILE:
            for q in ins.qubits:
                if self.last_op[q] == seq and self.where[q] != self.home[q]:
                    self.start_leg(seq, 1 + ins.qubits.index(q), q, self.where[q], self.home[q])
        ready = []
        for succ in self.successors.get(seq, ()):
            self.remaining[succ] -= 1
            if not self.remaining[succ]:
                ready.append(succ)
        for succ in sorted(ready):
            self.issue(self.by_seq[succ])

    def finish(self):
        report = self.network.report
        report.makespan = self.now
        if self.now > 0:
            report.utilization = {
                r.name: min(1.0, r.busy / self.now) for r in self.network.resources() if r.busy > 0
            }
        counts, _ = np.histogram(self.network.waits, bins=np.array(WAIT_BINS))
        labels = [f"<{edge:g}" for edge in WAIT_BINS[1:]]
        report.queue_wait_histogram = dict(zip(labels, (int(c) for c in counts)))
        logger.info("Simulated %d instructions over %d channels: makespan %.1f us",
                    report.instructions, report.channels, report.makespan)
        return report


def run(stream, layout, params, settings=None):
    """Simulates `stream` on `layout`; identical inputs give identical reports."""
    if not len(stream):
        return SimReport()
    return Simulation(stream, layout, params, settings).run()


def write_trace_csv(report, path):
    report.trace_frame().to_csv(path, index=False)


# =============================================
# === LOWER BOUND ============================
# =============================================

def contention_free_bound(stream, layout, params, settings=None):
    """
    Critical path of the dependency graph with every instruction timed on an idle mesh.

    No contention and no slot waits, so `run` can only be slower.
    """
    if stream.placement is None:
        raise ValidationError("Stream must be placed before computing its bound")
    settings = settings or SimSettings()
    legs = {}

    def leg(src, dst):
        if src == dst:
            return 0.0
        # Idle-mesh timing depends only on the displacement.
        key = (dst.x - src.x, dst.y - src.y)
        if key not in legs:
            fresh = Network(layout, params, settings)
            channel = fresh.open_channel(src, dst, 0.0)
            fresh.settle()
            ready = channel.ready
            legs[key] = teleport_logical(None, src, dst, layout, params, ready)
        return legs[key]

    home = dict(stream.placement.sites)
    where = dict(home)
    last = {}
    for ins in stream:
        for q in ins.qubits:
            last[q] = ins.seq
    graph = dependency_graph(stream)
    cost = {}
    tails = {}
    mobile = stream.placement.mode is LayoutMode.MOBILE
    for ins in stream:
        a, b = ins.qubits
        src, dst = where[a], where[b]
        there = leg(src, dst)
        if mobile:
            cost[ins.seq] = there
            where[a] = dst
            tails[ins.seq] = max([leg(where[q], home[q]) for q in ins.qubits if last[q] == ins.seq] + [0.0])
        else:
            cost[ins.seq] = there + leg(dst, src) if src != dst else 0.0
    finish = {}
    for seq in nx.topological_sort(graph):
        begin = max((finish[p] for p in graph.predecessors(seq)), default=0.0)
        finish[seq] = begin + cost[seq]
    bound = max((finish[s] + tails.get(s, 0.0) for s in finish), default=0.0)
    logger.debug("Contention-free bound %.1f us over %d instructions", bound, len(stream))
    return bound
