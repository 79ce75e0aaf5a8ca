import json
from dataclasses import replace

import pandas as pd
import pytest

from utils.cli import (
    EXIT_INFEASIBLE,
    EXIT_OK,
    EXIT_USAGE,
    SweepSpec,
    normalize_sweep,
    parse_range,
    run_command,
    run_sweep,
)
from utils.errors import ValidationError
from utils.simulator import run
from utils.topology import MOBILE, build_mesh
from utils.workloads import place, qft_pattern


def _read(path):
    return pd.read_csv(path, comment="#")


def _meta(path):
    lines = [line[2:] for line in path.read_text().splitlines() if line.startswith("# ")]
    return dict(line.split("=", 1) for line in lines)


def test_parse_range():
    assert parse_range("0:100:50") == [0, 50, 100]
    assert parse_range("600,1200") == [600, 1200]
    with pytest.raises(ValidationError):
        parse_range("10:0:5")
    with pytest.raises(ValidationError):
        parse_range("a:b:c")


def test_model_writes_crossover(tmp_path):
    assert run_command(["model", "--distances", "0:1200:50", "--out", str(tmp_path)]) == EXIT_OK
    path = tmp_path / "model.csv"
    assert _meta(path)['crossover_cells'] == "617"
    df = _read(path)
    assert len(df) == 25
    assert {'distance', 'ballistic_us', 'teleport_us', 'teleport_faster', 'ballistic_error',
            'ballistic_pair_fidelity'} <= set(df.columns)


def test_purify_curve_with_json_mirror(tmp_path):
    argv = ["purify", "--protocol", "dejmps", "--start-fidelity", "0.85", "--rounds", "8",
            "--out", str(tmp_path), "--json"]
    assert run_command(argv) == EXIT_OK
    df = _read(tmp_path / "purify.csv")
    assert list(df['round']) == list(range(9))
    payload = json.loads((tmp_path / "purify.json").read_text())
    assert payload['meta']['protocol'] == "dejmps"
    assert len(payload['rows']) == 9


def test_plan_exit_codes(tmp_path):
    ok = ["plan", "--distances", "600:6000:600", "--out", str(tmp_path)]
    assert run_command(ok) == EXIT_OK
    shallow = ["plan", "--distances", "38400", "--endpoint-cap", "2", "--out", str(tmp_path)]
    assert run_command(shallow) == EXIT_INFEASIBLE
    df = _read(tmp_path / "plan.csv")
    assert not df['feasible'].any()
    assert run_command(["plan", "--scheme", "nowhere", "--out", str(tmp_path)]) == EXIT_USAGE


def test_plan_all_schemes(tmp_path):
    assert run_command(["plan", "--scheme", "all", "--distances", "600,1200", "--out", str(tmp_path)]) == EXIT_OK
    assert len(_read(tmp_path / "plan.csv")) == 8


def test_usage_errors(tmp_path):
    assert run_command(["bogus"]) == EXIT_USAGE
    assert run_command(["purify", "--rounds", "many"]) == EXIT_USAGE
    assert run_command(["model", "--params", str(tmp_path / "missing.txt"), "--out", str(tmp_path)]) == EXIT_USAGE
    bad = tmp_path / "bad.txt"
    bad.write_text("t_mv = fast\n")
    assert run_command(["model", "--params", str(bad), "--out", str(tmp_path)]) == EXIT_USAGE


def test_params_document_changes_results(tmp_path):
    params = tmp_path / "params.txt"
    params.write_text("t_mv = 0.4\n")
    assert run_command(["model", "--params", str(params), "--out", str(tmp_path)]) == EXIT_OK
    assert int(_meta(tmp_path / "model.csv")['crossover_cells']) < 617


def test_teleport_chain_and_sensitivity(tmp_path):
    assert run_command(["teleport-chain", "--max-hops", "8", "--out", str(tmp_path)]) == EXIT_OK
    assert len(_read(tmp_path / "teleport-chain.csv")) == 3 * 9
    argv = ["sensitivity", "--rates", "0,1e-8,1e-6,1e-3", "--out", str(tmp_path)]
    assert run_command(argv) == EXIT_OK
    df = _read(tmp_path / "sensitivity.csv")
    assert list(df['feasible']) == [True, True, True, False]


def test_simulate_writes_report(tmp_path):
    argv = ["simulate", "--grid", "2x2", "--benchmark", "qft", "--layout", "home-base", "--out", str(tmp_path)]
    assert run_command(argv + ["--trace"]) == EXIT_OK
    df = _read(tmp_path / "simulate.csv")
    assert df.loc[0, 'makespan'] >= df.loc[0, 'contention_free_bound'] - 1e-6
    report = json.loads((tmp_path / "simulate-report.json").read_text())
    assert report['instructions'] == 6
    assert (tmp_path / "simulate-trace.csv").exists()


@pytest.mark.parametrize("flags, instructions", [
    (["--benchmark", "mm", "--split", "1"], 3),
    (["--benchmark", "me", "--steps", "2"], 10),
])
def test_simulate_benchmark_sizes(tmp_path, flags, instructions):
    argv = ["simulate", "--grid", "2x2", "--out", str(tmp_path)] + flags
    assert run_command(argv) == EXIT_OK
    report = json.loads((tmp_path / "simulate-report.json").read_text())
    assert report['instructions'] == instructions


def test_simulate_infeasible_exit(tmp_path):
    params = tmp_path / "params.txt"
    params.write_text("p_mv = 1e-3\n")
    argv = ["simulate", "--grid", "2x2", "--params", str(params), "--out", str(tmp_path)]
    assert run_command(argv) == EXIT_INFEASIBLE


def test_sweep_outputs_are_byte_identical(tmp_path):
    argv = ["sweep", "--grid", "2x2", "--t", "2,4", "--p-ratio", "1,2", "--seed", "3"]
    assert run_command(argv + ["--out", str(tmp_path / "a")]) == EXIT_OK
    assert run_command(argv + ["--out", str(tmp_path / "b")]) == EXIT_OK
    first = (tmp_path / "a" / "sweep.csv").read_bytes()
    assert first == (tmp_path / "b" / "sweep.csv").read_bytes()
    df = _read(tmp_path / "a" / "sweep.csv")
    assert len(df) == 5
    assert df[df['baseline']]['normalized'].iloc[0] == 1.0


def test_sweep_rejects_odd_t(tmp_path):
    assert run_command(["sweep", "--grid", "2x2", "--t", "3", "--out", str(tmp_path)]) == EXIT_USAGE


def test_sweep_points():
    spec = SweepSpec(t_values=(2, 4), p_ratios=(1, 2))
    assert spec.points() == [(2, 2, 2), (2, 2, 1), (4, 4, 4), (4, 4, 2)]
    for t, g, p in SweepSpec(area_budget=100, p_ratios=(1, 2, 4)).points():
        assert t == g and t % 2 == 0
        assert t + g + p == 100
    assert SweepSpec(t_values=(8,), p_values=(1, 3)).points() == [(8, 8, 1), (8, 8, 3)]


def test_normalize_sweep():
    results = pd.DataFrame({'t': [2, 1024], 'g': [2, 1024], 'p': [2, 1024],
                            'makespan': [400.0, 200.0], 'baseline': [False, True]})
    normalized = normalize_sweep(results)
    assert list(normalized['normalized']) == [2.0, 1.0]
    with pytest.raises(ValidationError):
        normalize_sweep(results[~results['baseline']])
    assert list(normalize_sweep(results, baseline=100.0)['normalized']) == [4.0, 2.0]


@pytest.mark.slow
def test_full_mesh_runtime_falls_as_resources_grow(defaults):
    layout = build_mesh(16, 16, 2, 2, 2)
    stream = place(qft_pattern(256), layout, "home-base")
    results = normalize_sweep(run_sweep(SweepSpec(t_values=(2, 16, 128)), stream, layout, defaults))
    values = list(results[~results['baseline']]['normalized'])
    assert values == sorted(values, reverse=True)
    assert min(values) >= 1.0 - 1e-9


def _area_sweep(layout, mode, ratios, defaults):
    stream = place(qft_pattern(256), layout, mode)
    points = SweepSpec(area_budget=90, p_ratios=ratios).points()
    return {ratio: run(stream, replace(layout, t=t, g=g, p=p), defaults).makespan
            for ratio, (t, g, p) in zip(ratios, points)}


@pytest.mark.slow
def test_home_base_tolerates_trading_purifiers_for_teleporters(defaults):
    makespans = _area_sweep(build_mesh(16, 16, 30, 30, 30), "home-base", (1, 2, 4), defaults)
    assert max(makespans[2], makespans[4]) <= 1.10 * makespans[1]


@pytest.mark.slow
def test_mobile_slows_when_purifiers_run_short(defaults):
    layout = build_mesh(16, 16, 40, 40, 10, lq_capacity=MOBILE)
    makespans = _area_sweep(layout, "mobile", (4, 8), defaults)
    assert makespans[8] > makespans[4]
