import pytest

from utils.errors import ConfigParseError, ValidationError
from utils.simulator import dependency_graph, schedule
from utils.topology import MOBILE, Coordinate, build_mesh
from utils.workloads import (
    BENCHMARKS,
    InstructionStream,
    LayoutMode,
    LogicalInstruction,
    dump_stream,
    home_base_placement,
    load_stream,
    mobile_hops,
    mobile_placement,
    modexp_pattern,
    modmult_pattern,
    place,
    qft_pattern,
)


def _pairs(stream):
    return [ins.qubits for ins in stream]


def test_qft_pattern():
    stream = qft_pattern(6)
    assert len(stream) == 15
    assert _pairs(stream)[:5] == [(1, 2), (1, 3), (1, 4), (2, 3), (1, 5)]
    partners = {}
    for a, b in _pairs(stream):
        partners.setdefault(a, []).append(b)
    assert all(p == sorted(p) for p in partners.values())
    assert [ins.seq for ins in stream] == list(range(15))


def test_modmult_pattern_numbers_b_after_a():
    assert _pairs(modmult_pattern(2, 3)) == [(1, 3), (1, 4), (1, 5), (2, 3), (2, 4), (2, 5)]


def test_modexp_pattern():
    assert _pairs(modexp_pattern(4, 1)) == [(1, 2), (1, 3), (1, 4), (2, 3), (2, 4)]
    assert _pairs(modexp_pattern(2, 1)) == [(1, 2)]
    assert _pairs(modexp_pattern(4, 2)) == _pairs(modexp_pattern(4, 1)) * 2
    with pytest.raises(ValidationError):
        modexp_pattern(5, 1)


def test_benchmark_registry():
    assert set(BENCHMARKS) == {"qft", "mm", "me"}
    assert BENCHMARKS["mm"](5).n == 5


def test_benchmark_sizes():
    mm = BENCHMARKS["mm"](6, split=2)
    assert _pairs(mm)[:4] == [(1, 3), (1, 4), (1, 5), (1, 6)]
    assert len(mm) == 2 * 4
    assert len(BENCHMARKS["me"](4, steps=3)) == 3 * 5
    with pytest.raises(ValidationError):
        BENCHMARKS["mm"](4, split=4)


def test_instructions_validate_qubits():
    with pytest.raises(ValidationError):
        LogicalInstruction(0, 3, 3)
    with pytest.raises(ValidationError):
        InstructionStream((LogicalInstruction(0, 1, 4),), 3)


def test_home_base_placement_is_a_bijection():
    layout = build_mesh(16, 16, 4, 4, 1)
    placement = home_base_placement(256, layout)
    assert placement.mode is LayoutMode.HOME_BASE
    assert len(set(placement.sites.values())) == 256
    assert placement.site(1) == Coordinate(0, 0)
    assert placement.site(17) == Coordinate(1, 0)


def test_placement_capacity():
    layout = build_mesh(2, 2, 4, 4, 1)
    with pytest.raises(ValidationError):
        home_base_placement(5, layout)
    with pytest.raises(ValidationError):
        mobile_placement(4, layout)


def test_mobile_placement_is_serpentine():
    layout = build_mesh(2, 2, 4, 4, 1, lq_capacity=MOBILE)
    sites = mobile_placement(4, layout).sites
    assert [sites[q] for q in range(1, 5)] == [(0, 0), (0, 1), (1, 1), (1, 0)]


def test_mobile_qft_visits_are_single_hops():
    layout = build_mesh(4, 4, 4, 4, 1, lq_capacity=MOBILE)
    stream = place(qft_pattern(16), layout, "mobile")
    moves = mobile_hops(stream)
    visits = [m for m in moves if m['kind'] == 'visit']
    assert len(visits) == len(stream)
    assert all(m['hops'] == 1 for m in visits)
    returns = [m for m in moves if m['kind'] == 'return']
    assert {m['qubit'] for m in returns} == set(range(1, 16))


def test_stream_document_round_trip():
    layout = build_mesh(2, 2, 4, 4, 1)
    stream = place(qft_pattern(4), layout, LayoutMode.HOME_BASE)
    loaded = load_stream(dump_stream(stream), name="qft")
    assert loaded == stream


def test_stream_document_errors():
    with pytest.raises(ConfigParseError) as exc:
        load_stream("qubits 3\nop 0 1 2\nop 1 x 3\n")
    assert exc.value.line_number == 3
    with pytest.raises(ConfigParseError):
        load_stream("jump 1 2\n")
    with pytest.raises(ValidationError):
        load_stream("op 1 1 2\nop 0 2 3\n")


def test_qft_schedule_groups():
    groups = schedule(qft_pattern(6))
    assert [[ins.qubits for ins in g] for g in groups[:5]] == [
        [(1, 2)],
        [(1, 3)],
        [(1, 4), (2, 3)],
        [(1, 5), (2, 4)],
        [(1, 6), (2, 5), (3, 4)],
    ]


def test_schedule_and_dependency_graph_agree():
    stream = qft_pattern(8)
    graph = dependency_graph(stream)
    level = {}
    for depth, group in enumerate(schedule(stream), start=1):
        for ins in group:
            level[ins.seq] = depth
    for u, v in graph.edges:
        assert level[u] < level[v]


def test_schedule_checks_sites_on_layout():
    small = build_mesh(2, 2, 4, 4, 1)
    with pytest.raises(ValidationError):
        schedule(qft_pattern(4), small)
    assert schedule(place(qft_pattern(4), small, "home-base"), small)
