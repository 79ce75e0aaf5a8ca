"""Mesh layout of teleporter routers, generator links and logical-qubit sites.

Every router sits at a Coordinate (x, y) of a rows x cols grid and owns one
logical-qubit site with its corrector and purifier stations. Adjacent
routers are joined by a virtual wire fed by one G node in the middle of the
link.

Layout documents are plain text:

    # comment
    rows = 2
    cols = 2
    t = 4
    g = 4
    p = 1
    depth = 3
    lq_capacity = 1
    hop_spacing = 600
    local_cells = 50
    link 0,0 1,0
    link 0,0 0,1
    ...

Every 4-neighbour link must be listed exactly once.
"""

import logging
import math
from dataclasses import dataclass, fields
from enum import Enum
from functools import cached_property
from typing import NamedTuple

import networkx as nx

from .errors import ConfigParseError, NoGeneratorNeeded, ValidationError
from .fidelity import DEFAULT_HOP_SPACING, link_fidelity

logger = logging.getLogger(__name__)

HOME_BASE = 1
MOBILE = 2


class NodeKind(Enum):
    LOGICAL_QUBIT = "LQ"
    TELEPORTER = "T'"
    GENERATOR = "G"
    CORRECTOR = "C"
    PURIFIER = "P"


class Coordinate(NamedTuple):
    x: int
    y: int

    def __str__(self):
        return f"{self.x},{self.y}"

    @classmethod
    def parse(cls, text):
        try:
            x, y = (int(part) for part in text.split(","))
        except ValueError:
            raise ValidationError(f"Bad coordinate '{text}', expected 'x,y'") from None
        return cls(x, y)


@dataclass(frozen=True)
class VirtualWire:
    a: Coordinate
    b: Coordinate
    rate: float  # pairs per microsecond
    fidelity: float

    def __post_init__(self):
        if self.a == self.b:
            raise ValidationError(f"A virtual wire needs two distinct routers, got {self.a}")
        if not self.rate > 0:
            raise ValidationError(f"Virtual wire {self.a}-{self.b} has no pair stream")


@dataclass(frozen=True)
class GridLayout:
    """
    A rows x cols router mesh and its per-node resources.

    t teleporters per router are split into equal X and Y sets; g generators
    sit on every link; p purifier queues of `depth` levels sit at every
    endpoint. lq_capacity is 1 for Home Base layouts and 2 for Mobile ones.
    """
    rows: int
    cols: int
    t: int = 4
    g: int = 4
    p: int = 1
    depth: int = 3
    lq_capacity: int = HOME_BASE
    hop_spacing: int = DEFAULT_HOP_SPACING
    local_cells: int = 50

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValidationError(f"Grid must have at least one router, got {self.rows}x{self.cols}")
        if self.t < 2 or self.t % 2:
            raise ValidationError(f"t must be even and at least 2 (two equal teleporter sets), got {self.t}")
        if self.g < 1 or self.p < 1 or self.depth < 1:
            raise ValidationError("Every link needs a generator and every endpoint a purifier queue")
        if self.lq_capacity not in (HOME_BASE, MOBILE):
            raise ValidationError(f"lq_capacity must be 1 (Home Base) or 2 (Mobile), got {self.lq_capacity}")
        if self.hop_spacing < 1 or self.local_cells < 0:
            raise ValidationError("hop_spacing must be positive and local_cells non-negative")

    @cached_property
    def graph(self):
        mesh = nx.grid_2d_graph(self.cols, self.rows)
        return nx.relabel_nodes(mesh, lambda node: Coordinate(*node))

    @property
    def set_size(self):
        """Teleporters in each of the X and Y sets."""
        return self.t // 2

    @property
    def storage_per_router(self):
        return 4 * self.t

    @property
    def site_count(self):
        return self.rows * self.cols

    @property
    def capacity(self):
        return self.site_count * self.lq_capacity

    @property
    def site_slots(self):
        """
        Logical qubits a site can hold at once.

        Mobile sites error-correct lq_capacity qubits. Home Base sites correct
        their resident and keep room for one visitor to teleport in.
        """
        return self.lq_capacity + 1 if self.lq_capacity == HOME_BASE else self.lq_capacity

    def sites(self):
        """Routers in placement order: x-major, then y."""
        return [Coordinate(x, y) for x in range(self.cols) for y in range(self.rows)]

    def links(self):
        return sorted(tuple(sorted(edge)) for edge in self.graph.edges)

    def in_bounds(self, c):
        return 0 <= c.x < self.cols and 0 <= c.y < self.rows

    def check(self, c):
        if not self.in_bounds(c):
            raise ValidationError(f"Coordinate {tuple(c)} lies outside the {self.rows}x{self.cols} grid")
        return Coordinate(*c)

    def node_counts(self):
        n = self.site_count
        return {
            NodeKind.LOGICAL_QUBIT: n,
            NodeKind.TELEPORTER: n,
            NodeKind.GENERATOR: self.graph.number_of_edges(),
            NodeKind.CORRECTOR: n,
            NodeKind.PURIFIER: n,
        }

    def virtual_wires(self, params):
        rate = self.g / params.times.t_gen
        f_link = link_fidelity(params, self.hop_spacing)
        return [VirtualWire(a, b, rate, f_link) for a, b in self.links()]

    def distance(self, src, dst):
        """Cells covered by the dimension-order route between two routers."""
        return self.hop_spacing * (abs(src.x - dst.x) + abs(src.y - dst.y))


def build_mesh(rows, cols, t, g, p, depth=3, lq_capacity=HOME_BASE, hop_spacing=DEFAULT_HOP_SPACING,
               params=None, local_cells=50):
    """Builds and validates a mesh layout; with params, also checks the link pairs are purifiable."""
    layout = GridLayout(rows, cols, t, g, p, depth, lq_capacity, hop_spacing, local_cells)
    if not nx.is_connected(layout.graph):
        raise ValidationError("Mesh is not connected")
    if params is not None:
        f_link = link_fidelity(params, hop_spacing)
        if f_link <= 0.5:
            logger.warning("Link pairs at %.4f fidelity are below the purification limit", f_link)
    logger.info("Built %dx%d mesh: %d links, t=%d g=%d p=%d", rows, cols,
                layout.graph.number_of_edges(), t, g, p)
    return layout


def parse_grid(text):
    """'16x16' -> (16, 16)."""
    try:
        rows, cols = (int(part) for part in text.lower().split("x"))
    except ValueError:
        raise ValidationError(f"Bad grid '{text}', expected RxC") from None
    if rows < 1 or cols < 1:
        raise ValidationError(f"Grid dimensions must be positive, got {text}")
    return rows, cols


# =============================================
# === ROUTES ==================================
# =============================================

def dimension_order_path(src, dst, layout=None):
    """X-first, then Y, Manhattan route from src to dst, endpoints included."""
    src, dst = Coordinate(*src), Coordinate(*dst)
    for c in (src, dst):
        if c.x < 0 or c.y < 0:
            raise ValidationError(f"Coordinate {tuple(c)} is negative")
        if layout is not None:
            layout.check(c)
    path = [src]
    x_step = 1 if dst.x > src.x else -1
    path += [Coordinate(x, src.y) for x in range(src.x + x_step, dst.x + x_step, x_step)]
    y_step = 1 if dst.y > src.y else -1
    path += [Coordinate(dst.x, y) for y in range(src.y + y_step, dst.y + y_step, y_step)]
    return path


def turn_index(path):
    """Index of the router where an X-then-Y path changes dimension, or None."""
    if len(path) < 3:
        return None
    dx = path[-1].x - path[0].x
    dy = path[-1].y - path[0].y
    return abs(dx) if dx and dy else None


def midpoint_generator(path):
    """The link (path[m], path[m + 1]) with m = floor(hops / 2), whose G node seeds the channel."""
    hops = len(path) - 1
    if hops < 0:
        raise ValidationError("Path must contain at least one router")
    if hops == 0:
        raise NoGeneratorNeeded(f"Source and destination share router {path[0]}")
    m = hops // 2
    return path[m], path[m + 1]


# =============================================
# === SERIALIZATION ==========================
# =============================================

_LAYOUT_KEYS = tuple(f.name for f in fields(GridLayout))


def dump_layout(layout):
    lines = ["# interconnect layout"]
    lines += [f"{key} = {getattr(layout, key)}" for key in _LAYOUT_KEYS]
    lines += [f"link {a} {b}" for a, b in layout.links()]
    return "\n".join(lines) + "\n"


def load_layout(text):
    """Parses a layout document; the listed links must be exactly the mesh's."""
    values = {}
    links = set()
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("link "):
            parts = line.split()
            if len(parts) != 3:
                raise ConfigParseError(number, raw, "expected 'link x,y x,y'")
            try:
                a, b = Coordinate.parse(parts[1]), Coordinate.parse(parts[2])
            except ValidationError as exc:
                raise ConfigParseError(number, raw, str(exc)) from None
            edge = tuple(sorted((a, b)))
            if edge in links:
                raise ConfigParseError(number, raw, "duplicate link")
            links.add(edge)
            continue
        key, sep, value = (part.strip() for part in line.partition("="))
        if not sep:
            raise ConfigParseError(number, raw, "expected 'key = value' or 'link'")
        if key not in _LAYOUT_KEYS:
            raise ConfigParseError(number, raw, f"unknown key '{key}'")
        if key in values:
            raise ConfigParseError(number, raw, f"duplicate key '{key}'")
        try:
            values[key] = int(value)
        except ValueError:
            raise ConfigParseError(number, raw, f"'{value}' is not an integer") from None

    missing = {"rows", "cols"} - values.keys()
    if missing:
        raise ValidationError(f"Layout is missing {sorted(missing)}")
    layout = GridLayout(**values)
    expected = set(layout.links())
    if links != expected:
        absent = sorted(expected - links)[:3]
        extra = sorted(links - expected)[:3]
        raise ValidationError(f"Link list does not match a {layout.rows}x{layout.cols} mesh "
                              f"(missing {absent}, unexpected {extra})")
    return layout


def load_layout_file(path):
    with open(path, encoding="utf-8") as fh:
        return load_layout(fh.read())


def hops_between(src, dst):
    return abs(src.x - dst.x) + abs(src.y - dst.y)


def grid_for(n):
    """Smallest near-square grid holding n sites."""
    cols = math.ceil(math.sqrt(n))
    return math.ceil(n / cols), cols
