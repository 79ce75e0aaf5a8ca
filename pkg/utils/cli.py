# utils/cli.py
"""
Headless front end for the interconnect models and simulator.

Every command writes <out>/<command>.csv (with `#` provenance lines) and,
with --json, a <command>.json mirror, then prints a short summary.

Examples
--------
  python -m utils.cli model --distances 0:1200:50
  python -m utils.cli purify --protocol dejmps --start-fidelity 0.85 --rounds 8
  python -m utils.cli plan --scheme endpoints-only --distances 600:38400:600
  python -m utils.cli sensitivity --scheme virtual-wire
  python -m utils.cli teleport-chain --start-fidelities 0.999,0.9999 --max-hops 64
  python -m utils.cli simulate --benchmark qft --layout home-base --grid 4x4
  python -m utils.cli sweep --benchmark qft --layout home-base --grid 16x16 --t 2,4,8,16 --couple-tg --p-ratio 1,2,4,8
"""

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd

from .channel import PlacementScheme, PlannerSettings, distance_sweep, error_rate_sensitivity, scheme_comparison
from .errors import ConfigParseError, InfeasiblePlanError, InterconnectError, ValidationError
from .fidelity import (
    ballistic_distribution_fidelity,
    ballistic_error,
    crossover_distance,
    latency_table,
    teleport_chain_table,
)
from .params import default_ion_trap, load_config_file
from .purification import Protocol, breakdown_error_rate, purification_curve
from .simulator import SimSettings, contention_free_bound, run, write_trace_csv
from .topology import HOME_BASE, MOBILE, build_mesh, load_layout_file, parse_grid
from .workloads import BENCHMARKS, LayoutMode, load_stream_file, place

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_FAILURE = 1

BASELINE = (1024, 1024, 1024)


# =============================================
# === ARGUMENT HELPERS =======================
# =============================================

def parse_range(text):
    """'lo:hi:step' (inclusive) or a comma list -> list of ints."""
    if ":" in text:
        try:
            lo, hi, step = (int(v) for v in text.split(":"))
        except ValueError:
            raise ValidationError(f"Bad range '{text}', expected lo:hi:step") from None
        if step <= 0 or hi < lo:
            raise ValidationError(f"Range '{text}' is empty")
        return list(range(lo, hi + 1, step))
    return parse_ints(text)


def parse_ints(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"Bad integer list '{text}'") from None


def parse_floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"Bad number list '{text}'") from None


def _params(args):
    return load_config_file(args.params) if args.params else default_ion_trap()


def write_dataset(df, args, command, meta):
    """Writes the CSV (plus optional JSON mirror) and returns the CSV path."""
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, f"{command}.csv")
    meta = dict(meta, command=command)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for key in sorted(meta):
            fh.write(f"# {key}={meta[key]}\n")
        df.to_csv(fh, index=False, lineterminator="\n")
    if args.json:
        payload = {'meta': {k: str(v) for k, v in sorted(meta.items())},
                   'rows': json.loads(df.to_json(orient="records"))}
        with open(os.path.join(args.out, f"{command}.json"), "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    print(f"Wrote {len(df)} rows to {path}")
    return path


def _show(df, columns=None, rows=12):
    print(df[columns or list(df.columns)].to_string(index=False, max_rows=rows))


# =============================================
# === COMMANDS ================================
# =============================================

def cmd_model(args):
    params = _params(args)
    df = latency_table(parse_range(args.distances), params.times)
    df['ballistic_error'] = [ballistic_error(int(d), params.errors) for d in df['distance']]
    df['ballistic_pair_fidelity'] = [ballistic_distribution_fidelity(int(d), params) for d in df['distance']]
    crossover = crossover_distance(params.times)
    print(f"Teleportation beats ballistic movement from {crossover} cells")
    _show(df)
    write_dataset(df, args, "model", {'crossover_cells': crossover, 'distances': args.distances})
    return EXIT_OK


def cmd_purify(args):
    params = _params(args)
    protocol = Protocol.parse(args.protocol)
    df = purification_curve(protocol, args.start_fidelity, args.rounds, params.errors)
    _show(df, ['round', 'fidelity', 'error', 'expected_pairs'])
    write_dataset(df, args, "purify", {'protocol': protocol.value, 'start_fidelity': args.start_fidelity,
                                       'rounds': args.rounds})
    return EXIT_OK


def _planner(args):
    return PlannerSettings(hop_spacing=args.hop_spacing, endpoint_cap=args.endpoint_cap)


def cmd_plan(args):
    params = _params(args)
    distances = parse_range(args.distances)
    settings = _planner(args)
    if args.scheme == "all":
        df = scheme_comparison(params, distances, settings=settings)
    else:
        df = distance_sweep(PlacementScheme.parse(args.scheme), params, distances, settings=settings)
    _show(df, ['scheme', 'distance', 'hops', 'rounds_endpoint', 'rounds_wire', 'total_pairs',
               'nonlocal_pairs', 'feasible'])
    write_dataset(df, args, "plan", {'scheme': args.scheme, 'distances': args.distances,
                                     'hop_spacing': args.hop_spacing, 'endpoint_cap': args.endpoint_cap})
    infeasible = df[~df['feasible']]
    if not infeasible.empty:
        first = infeasible.iloc[0]
        print(f"{len(infeasible)} infeasible rows; first at {first['distance']} cells "
              f"({first['scheme']}), stage: {first['failing_stage']}", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_sensitivity(args):
    params = _params(args)
    rates = parse_floats(args.rates) if args.rates else list(np.logspace(-9, -3, 25))
    df = error_rate_sensitivity(params, rates, PlacementScheme.parse(args.scheme), args.distance,
                                settings=_planner(args))
    breakdown = breakdown_error_rate(Protocol.DEJMPS, params.threshold.f_min)
    print(f"Purification breaks down at a uniform error rate of {breakdown:.3e}")
    _show(df, ['rate', 'nonlocal_pairs', 'rounds_endpoint', 'feasible'], rows=30)
    write_dataset(df, args, "sensitivity", {'scheme': args.scheme, 'distance': args.distance,
                                            'breakdown_rate': f"{breakdown:.6e}"})
    return EXIT_OK


def cmd_teleport_chain(args):
    params = _params(args)
    df = teleport_chain_table(parse_floats(args.start_fidelities), args.max_hops, params, args.hop_spacing)
    _show(df[df['hops'].isin([0, 1, args.max_hops])])
    write_dataset(df, args, "teleport-chain", {'max_hops': args.max_hops, 'hop_spacing': args.hop_spacing,
                                               'f_min': params.threshold.f_min})
    return EXIT_OK


def _layout(args, t, g, p):
    """--layout is 'home-base', 'mobile' or a layout document path."""
    if args.layout not in (m.value for m in LayoutMode):
        layout = load_layout_file(args.layout)
        mode = LayoutMode.MOBILE if layout.lq_capacity == MOBILE else LayoutMode.HOME_BASE
        return replace(layout, t=t or layout.t, g=g or layout.g, p=p or layout.p), mode
    mode = LayoutMode.parse(args.layout)
    rows, cols = parse_grid(args.grid)
    capacity = MOBILE if mode is LayoutMode.MOBILE else HOME_BASE
    return build_mesh(rows, cols, t or 4, g or 4, p or 1, args.depth, capacity, args.hop_spacing), mode


def _stream(args, layout, mode):
    if args.stream:
        stream = load_stream_file(args.stream)
        return stream if stream.placement else place(stream, layout, mode)
    n = args.qubits or layout.site_count
    stream = BENCHMARKS[args.benchmark](n, steps=args.steps, split=args.split)
    return place(stream, layout, mode)


def _sim_settings(args):
    return SimSettings(stochastic=args.stochastic, seed=args.seed, trace=args.trace)


def cmd_simulate(args):
    params = _params(args)
    t, g, p = (parse_ints(v)[0] if v else None for v in (args.t, args.g, args.p))
    layout, mode = _layout(args, t, g, p)
    stream = _stream(args, layout, mode)
    settings = _sim_settings(args)
    report = run(stream, layout, params, settings)
    bound = contention_free_bound(stream, layout, params, settings)
    os.makedirs(args.out, exist_ok=True)
    row = {k: v for k, v in report.to_dict().items() if not isinstance(v, dict)}
    row['contention_free_bound'] = bound
    df = pd.DataFrame([row])
    write_dataset(df, args, "simulate", {'benchmark': stream.name, 'layout': mode.value,
                                         'grid': f"{layout.rows}x{layout.cols}", 't': layout.t, 'g': layout.g,
                                         'p': layout.p, 'seed': args.seed, 'stochastic': args.stochastic})
    with open(os.path.join(args.out, "simulate-report.json"), "w", encoding="utf-8") as fh:
        fh.write(report.to_json() + "\n")
    if args.trace:
        write_trace_csv(report, os.path.join(args.out, "simulate-trace.csv"))
    print(f"Makespan {report.makespan:.1f} us over {report.instructions} instructions "
          f"(contention-free bound {bound:.1f} us)")
    return EXIT_OK


# =============================================
# === SWEEP ===================================
# =============================================

@dataclass(frozen=True)
class SweepSpec:
    """
    Resource grid for a sweep.

    With couple_tg, g follows t. p_ratios give p = t / ratio. With an
    area_budget, t = g = ratio * p and t + g + p stays at the budget.
    """
    t_values: tuple = (2, 4, 8, 16)
    g_values: tuple = ()
    p_values: tuple = ()
    couple_tg: bool = True
    p_ratios: tuple = ()
    area_budget: int = None
    baseline: tuple = BASELINE

    def __post_init__(self):
        for v in self.t_values + self.g_values + self.p_values + self.baseline:
            if v < 1:
                raise ValidationError(f"Resource counts must be positive, got {v}")
        for t in self.t_values:
            if t % 2:
                raise ValidationError(f"t must be even, got {t}")

    def points(self):
        if self.area_budget:
            triples = []
            for ratio in self.p_ratios or (1,):
                share = self.area_budget / (2 * ratio + 1)
                t = max(2, 2 * math.floor(ratio * share / 2))
                p = self.area_budget - 2 * t
                if p < 1:
                    raise ValidationError(f"Area budget {self.area_budget} leaves no purifiers at ratio {ratio}")
                triples.append((t, t, p))
            return triples
        triples = []
        for t in self.t_values:
            g_choices = (t,) if self.couple_tg or not self.g_values else self.g_values
            for g in g_choices:
                if self.p_ratios:
                    p_choices = [max(1, t // r) for r in self.p_ratios]
                else:
                    p_choices = self.p_values or (t,)
                triples += [(t, g, p) for p in p_choices]
        return triples


def _simulate_point(job):
    stream, base_layout, params, settings, (t, g, p) = job
    layout = replace(base_layout, t=t, g=g, p=p)
    return run(stream, layout, params, settings).makespan


def run_sweep(spec, stream, layout, params, settings=None, workers=1):
    """Simulates every sweep point plus the baseline; rows come back in point order."""
    settings = settings or SimSettings()
    points = spec.points() + [spec.baseline]
    jobs = [(stream, layout, params, settings, point) for point in points]
    logger.info("Sweeping %d resource points on %d worker(s)", len(points), workers)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            makespans = list(pool.map(_simulate_point, jobs))
    else:
        makespans = [_simulate_point(job) for job in jobs]
    rows = [{'t': t, 'g': g, 'p': p, 'makespan': m, 'baseline': (t, g, p) == spec.baseline}
            for (t, g, p), m in zip(points, makespans)]
    return pd.DataFrame(rows)


def normalize_sweep(results, baseline=None):
    """Divides every makespan by the baseline run's."""
    if baseline is None:
        marked = results[results['baseline']] if 'baseline' in results else results.iloc[0:0]
        if marked.empty:
            raise ValidationError("Sweep results carry no baseline run")
        baseline = float(marked['makespan'].iloc[0])
    if not baseline > 0:
        raise ValidationError(f"Baseline makespan must be positive, got {baseline}")
    out = results.copy()
    out['normalized'] = out['makespan'] / baseline
    return out


def cmd_sweep(args):
    params = _params(args)
    spec = SweepSpec(
        t_values=tuple(parse_ints(args.t)),
        g_values=tuple(parse_ints(args.g)) if args.g else (),
        p_values=tuple(parse_ints(args.p)) if args.p else (),
        couple_tg=args.couple_tg,
        p_ratios=tuple(parse_ints(args.p_ratio)) if args.p_ratio else (),
        area_budget=args.area_budget,
    )
    layout, mode = _layout(args, 2, 2, 1)
    stream = _stream(args, layout, mode)
    results = normalize_sweep(run_sweep(spec, stream, layout, params, _sim_settings(args), args.workers))
    _show(results)
    write_dataset(results, args, "sweep", {'benchmark': stream.name, 'layout': mode.value,
                                           'grid': f"{layout.rows}x{layout.cols}", 'seed': args.seed,
                                           'baseline': "x".join(map(str, spec.baseline))})
    return EXIT_OK


# =============================================
# === ENTRY POINT =============================
# =============================================

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--params", type=str, default=None, help="Parameter document (key = value)")
    common.add_argument("--out", type=str, default="results")
    common.add_argument("--json", action="store_true", help="Also write a JSON mirror")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = argparse.ArgumentParser(prog="interconnect", description="EPR distribution models and simulator")
    sub = p.add_subparsers(dest="cmd", required=True)

    pm = sub.add_parser("model", parents=[common], help="Ballistic vs teleport latency and error")
    pm.add_argument("--distances", type=str, default="0:1200:50")
    pm.set_defaults(func=cmd_model)

    pp = sub.add_parser("purify", parents=[common], help="Purification curve")
    pp.add_argument("--protocol", choices=[pr.value for pr in Protocol], default="dejmps")
    pp.add_argument("--start-fidelity", type=float, default=0.85)
    pp.add_argument("--rounds", type=int, default=8)
    pp.set_defaults(func=cmd_purify)

    for name, func in (("plan", cmd_plan), ("sensitivity", cmd_sensitivity)):
        sp = sub.add_parser(name, parents=[common], help=f"Channel {name} table")
        sp.add_argument("--scheme", type=str, default="endpoints-only")
        sp.add_argument("--hop-spacing", type=int, default=600)
        sp.add_argument("--endpoint-cap", type=int, default=5)
        sp.set_defaults(func=func)
        if name == "plan":
            sp.add_argument("--distances", type=str, default="600:38400:600")
        else:
            sp.add_argument("--rates", type=str, default=None)
            sp.add_argument("--distance", type=int, default=64 * 600)

    pt = sub.add_parser("teleport-chain", parents=[common], help="EPR error over chained teleports")
    pt.add_argument("--start-fidelities", type=str, default="0.9999,0.99999,1.0")
    pt.add_argument("--max-hops", type=int, default=64)
    pt.add_argument("--hop-spacing", type=int, default=600)
    pt.set_defaults(func=cmd_teleport_chain)

    for name, func in (("simulate", cmd_simulate), ("sweep", cmd_sweep)):
        sp = sub.add_parser(name, parents=[common], help=f"{name.capitalize()} a benchmark on a mesh")
        sp.add_argument("--benchmark", choices=sorted(BENCHMARKS), default="qft")
        sp.add_argument("--layout", type=str, default="home-base", help="home-base, mobile or a layout file")
        sp.add_argument("--grid", type=str, default="16x16")
        sp.add_argument("--stream", type=str, default=None, help="Instruction stream document")
        sp.add_argument("--qubits", type=int, default=None)
        sp.add_argument("--steps", type=int, default=1, help="Square-and-multiply steps of the me benchmark")
        sp.add_argument("--split", type=int, default=None, help="Register A size of the mm benchmark")
        sp.add_argument("--depth", type=int, default=3)
        sp.add_argument("--hop-spacing", type=int, default=600)
        sp.add_argument("--t", type=str, default="2,4,8,16" if name == "sweep" else None)
        sp.add_argument("--g", type=str, default=None)
        sp.add_argument("--p", type=str, default=None)
        sp.add_argument("--stochastic", action="store_true")
        sp.add_argument("--trace", action="store_true")
        sp.set_defaults(func=func)
        if name == "sweep":
            sp.add_argument("--couple-tg", action="store_true")
            sp.add_argument("--p-ratio", type=str, default=None)
            sp.add_argument("--area-budget", type=int, default=None)
            sp.add_argument("--workers", type=int, default=1)
    return p


def run_command(argv):
    """Runs one command; returns its exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except InfeasiblePlanError as exc:
        print(f"error: infeasible plan: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ValidationError, ConfigParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InterconnectError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    verbosity = sum(a.count("v") for a in argv if a.startswith("-") and set(a[1:]) == {"v"})
    verbosity += argv.count("--verbose")
    level = logging.WARNING if not verbosity else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    sys.exit(run_command(argv))


if __name__ == "__main__":
    main()
