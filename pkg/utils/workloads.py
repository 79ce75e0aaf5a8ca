# utils/workloads.py

import logging
from dataclasses import dataclass, field, replace
from enum import Enum

from .errors import ConfigParseError, ValidationError
from .topology import MOBILE, Coordinate, hops_between

logger = logging.getLogger(__name__)


class LayoutMode(Enum):
    HOME_BASE = "home-base"
    MOBILE = "mobile"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValidationError(f"Unknown layout mode '{value}' (home-base or mobile)") from None


@dataclass(frozen=True)
class LogicalInstruction:
    seq: int
    qubit_a: int
    qubit_b: int

    def __post_init__(self):
        if self.qubit_a == self.qubit_b:
            raise ValidationError(f"Instruction {self.seq} acts twice on qubit {self.qubit_a}")

    @property
    def qubits(self):
        return self.qubit_a, self.qubit_b


@dataclass(frozen=True)
class Placement:
    """Starting site of every logical qubit, plus the movement discipline."""
    mode: LayoutMode
    sites: dict = field(default_factory=dict)

    def site(self, qubit):
        try:
            return self.sites[qubit]
        except KeyError:
            raise ValidationError(f"Logical qubit {qubit} has no placement") from None


@dataclass(frozen=True)
class InstructionStream:
    instructions: tuple
    n: int
    placement: Placement = None
    name: str = "custom"

    def __post_init__(self):
        for ins in self.instructions:
            for q in ins.qubits:
                if not 1 <= q <= self.n:
                    raise ValidationError(f"Instruction {ins.seq} names qubit {q} outside 1..{self.n}")
        if self.placement is not None:
            missing = [q for q in range(1, self.n + 1) if q not in self.placement.sites]
            if missing:
                raise ValidationError(f"Placement leaves qubits {missing[:5]} unplaced")

    def __len__(self):
        return len(self.instructions)

    def __iter__(self):
        return iter(self.instructions)

    def placed(self, placement):
        return replace(self, placement=placement)


def _stream(pairs, n, name):
    return InstructionStream(tuple(LogicalInstruction(seq, a, b) for seq, (a, b) in enumerate(pairs)), n, name=name)


def _all_to_all(qubits):
    # Ordered by (i + j, i): every qubit meets its partners in ascending order.
    pairs = [(a, b) for i, a in enumerate(qubits) for b in qubits[i + 1:]]
    return sorted(pairs, key=lambda ab: (ab[0] + ab[1], ab[0]))


def qft_pattern(n):
    """All-to-all interactions of an n-qubit QFT, each qubit's partners ascending."""
    if n < 2:
        raise ValidationError(f"QFT needs at least 2 qubits, got {n}")
    return _stream(_all_to_all(list(range(1, n + 1))), n, "qft")


def modmult_pattern(n_a, n_b):
    """Bipartite register A x register B, row-major; B is numbered after A."""
    if n_a < 1 or n_b < 1:
        raise ValidationError(f"Both registers need qubits, got {n_a} and {n_b}")
    pairs = [(a, n_a + b) for a in range(1, n_a + 1) for b in range(1, n_b + 1)]
    return _stream(pairs, n_a + n_b, "mm")


def modexp_pattern(n, steps):
    """Each step squares (all-to-all on the first half) then multiplies (first half x second half)."""
    if n < 2 or n % 2:
        raise ValidationError(f"Modular exponentiation needs an even qubit count, got {n}")
    if steps < 1:
        raise ValidationError(f"steps must be at least 1, got {steps}")
    half = n // 2
    low, high = list(range(1, half + 1)), list(range(half + 1, n + 1))
    step = _all_to_all(low) + [(a, b) for a in low for b in high]
    return _stream(step * steps, n, "me")


def _modmult(n, split=None, **_):
    n_a = n // 2 if split is None else split
    if not 0 < n_a < n:
        raise ValidationError(f"Register A must hold between 1 and {n - 1} of {n} qubits, got {n_a}")
    return modmult_pattern(n_a, n - n_a)


# Builders take the qubit count plus optional split (register A size) and steps.
BENCHMARKS = {
    "qft": lambda n, **_: qft_pattern(n),
    "mm": _modmult,
    "me": lambda n, steps=1, **_: modexp_pattern(n, steps),
}


# =============================================
# === PLACEMENTS =============================
# =============================================

def _check_fits(n, layout):
    if n < 1:
        raise ValidationError(f"Need at least one logical qubit, got {n}")
    if n > layout.site_count:
        raise ValidationError(f"{n} logical qubits do not fit on {layout.site_count} sites")


def home_base_placement(n, layout):
    """One qubit per site in site order; visitors always return home."""
    _check_fits(n, layout)
    sites = layout.sites()
    return Placement(LayoutMode.HOME_BASE, {q: sites[q - 1] for q in range(1, n + 1)})


def mobile_placement(n, layout):
    """Serpentine order, so consecutive qubits always sit on neighbouring sites."""
    _check_fits(n, layout)
    if layout.lq_capacity != MOBILE:
        raise ValidationError("Mobile placement needs sites with room for a visitor (lq_capacity=2)")
    sites = {}
    for q in range(1, n + 1):
        x, offset = divmod(q - 1, layout.rows)
        y = layout.rows - 1 - offset if x % 2 else offset
        sites[q] = Coordinate(x, y)
    return Placement(LayoutMode.MOBILE, sites)


def place(stream, layout, mode):
    mode = LayoutMode.parse(mode)
    placer = home_base_placement if mode is LayoutMode.HOME_BASE else mobile_placement
    logger.debug("Placing %d qubits of %s (%s)", stream.n, stream.name, mode.value)
    return stream.placed(placer(stream.n, layout))


def mobile_hops(stream):
    """
    Replays Mobile movement without timing.

    The first qubit of each instruction moves to its partner's current site
    and stays; after its last instruction a qubit away from its start goes
    back. Returns one dict per move: seq, qubit, kind ('visit' or 'return'), hops.
    """
    if stream.placement is None:
        raise ValidationError("Stream has no placement to replay")
    where = dict(stream.placement.sites)
    last = {}
    for ins in stream:
        for q in ins.qubits:
            last[q] = ins.seq
    moves = []
    for ins in stream:
        a, b = ins.qubits
        if where[a] != where[b]:
            moves.append({'seq': ins.seq, 'qubit': a, 'kind': 'visit', 'hops': hops_between(where[a], where[b])})
            where[a] = where[b]
        for q in ins.qubits:
            home = stream.placement.site(q)
            if last[q] == ins.seq and where[q] != home:
                moves.append({'seq': ins.seq, 'qubit': q, 'kind': 'return', 'hops': hops_between(where[q], home)})
                where[q] = home
    return moves


# =============================================
# === SERIALIZATION ==========================
# =============================================

def dump_stream(stream):
    lines = [f"# {stream.name} stream", f"qubits {stream.n}"]
    if stream.placement is not None:
        lines.append(f"mode {stream.placement.mode.value}")
        lines += [f"place {q} {c.x} {c.y}" for q, c in sorted(stream.placement.sites.items())]
    lines += [f"op {ins.seq} {ins.qubit_a} {ins.qubit_b}" for ins in stream]
    return "\n".join(lines) + "\n"


def load_stream(text, name="custom"):
    """Parses `op <seq> <qa> <qb>` and `place <q> <x> <y>` lines (plus `qubits` and `mode`)."""
    ops, sites = [], {}
    n, mode = None, LayoutMode.HOME_BASE
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        word, *args = line.split()
        try:
            if word == "op" and len(args) == 3:
                seq, a, b = (int(v) for v in args)
                ops.append(LogicalInstruction(seq, a, b))
            elif word == "place" and len(args) == 3:
                q, x, y = (int(v) for v in args)
                if q in sites:
                    raise ConfigParseError(number, raw, f"qubit {q} placed twice")
                sites[q] = Coordinate(x, y)
            elif word == "qubits" and len(args) == 1:
                n = int(args[0])
            elif word == "mode" and len(args) == 1:
                mode = LayoutMode.parse(args[0])
            else:
                raise ConfigParseError(number, raw, f"unrecognised '{word}' line")
        except ValueError as exc:
            if isinstance(exc, ConfigParseError):
                raise
            raise ConfigParseError(number, raw, str(exc)) from None

    if [ins.seq for ins in ops] != sorted({ins.seq for ins in ops}):
        raise ValidationError("op sequence numbers must be unique and ascending")
    if n is None:
        n = max([max(ins.qubits) for ins in ops] + list(sites) + [0])
    placement = Placement(mode, sites) if sites else None
    return InstructionStream(tuple(ops), n, placement, name)


def load_stream_file(path):
    with open(path, encoding="utf-8") as fh:
        return load_stream(fh.read())
