"""``prongsuf`` command line.

Every run writes a result file: ``--out`` if given, otherwise a default name
inside ``$PRONGSUF_OUTPUT_DIR`` (or the working directory).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from ..contacts import Scenario, ScenarioError, assemble, reduce
from ..design import (EE_TARGET, DesignVariables, design_model, optimize_design, sweep_height,
                      write_sweep_csv)
from ..hqp import LAYERS, HqpInfeasible, TaskSet, solve_hqp, verify_solution
from ..model import IKError, ModelError, RobotModel, RobotState
from ..robots import quadruped, single_body, standing_state
from ..suf import METHODS, SufResult, compute_suf, replay_certificate
from .bench import (SCENARIOS, BenchRecord, run_benchmark, sample_instance,
                    scenario_for, write_records_csv)
from .plots import emit_plot

SCHEMA_VERSION = "1.0"
OUTPUT_ENV = "PRONGSUF_OUTPUT_DIR"
BUILTIN_MODELS = {
    "quadruped": lambda: quadruped(),
    "quadruped-noprong": lambda: quadruped(prongs=False),
    "quadruped-noarm": lambda: quadruped(arm=False, prongs=False),
    "single-body": single_body,
}
BUILTIN_SCENARIOS = (*SCENARIOS, "fixture")
REPLAY_TOL = 1e-6
HARD_FAILURES = ("numeric-failure", "sampling-failed")
DIRECTORY_COMMANDS = ("bench", "sweep")

__all__ = ["main", "build_parser", "emit_plot", "run_benchmark", "sample_instance"]


class CliError(RuntimeError):
    pass


def _output_path(args, default_name: str) -> Path:
    if args.out:
        return Path(args.out)
    return Path(os.environ.get(OUTPUT_ENV, ".")) / default_name


def _write_json(path: Path, doc: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"schema_version": SCHEMA_VERSION, **doc}
    path.write_text(json.dumps(payload, indent=2, default=_jsonable) + "\n")


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    raise TypeError(f"cannot serialise {type(x).__name__}")


def load_model(spec: str) -> RobotModel:
    if spec in BUILTIN_MODELS:
        return BUILTIN_MODELS[spec]()
    path = Path(spec)
    if not path.exists():
        raise CliError(f"unknown model {spec!r}: not a builtin ({', '.join(BUILTIN_MODELS)}) "
                       "and no such file")
    return RobotModel.load(path)


def load_instance(model: RobotModel, scenario_spec: str, state_path: str | None, seed: int | None):
    """Resolve (model, state, scenario) for SUF commands."""
    if scenario_spec in BUILTIN_SCENARIOS:
        if scenario_spec == "fixture":
            scenario = Scenario(["ground"], "handle")
        else:
            scenario = scenario_for(scenario_spec)
            prongs = model.contacts_of_kind("prong")
            if scenario_spec == "manipulation" and prongs:
                scenario = Scenario([*scenario.active_contacts, *prongs], scenario.end_effector)
    else:
        path = Path(scenario_spec)
        if not path.exists():
            raise CliError(f"unknown scenario {scenario_spec!r}")
        scenario = Scenario.from_json(path.read_text())
    if state_path:
        state = RobotState.from_dict(json.loads(Path(state_path).read_text()))
    elif scenario_spec == "fixture":
        state = RobotState.zero(model)
    elif scenario_spec in SCENARIOS and seed is not None:
        state = sample_instance(model, scenario_spec, seed)
    elif scenario_spec == "manipulation":
        variables = DesignVariables(0.3, 0.2, 0.45)
        model = design_model(model, variables)
        state = standing_state(model, height=variables.b_z, x_f=variables.x_f,
                               y_f=variables.y_f, ee_target=EE_TARGET)
    elif scenario_spec == "teleoperation":
        state = sample_instance(model, scenario_spec, 0)
    else:
        raise CliError("a --state file is needed for custom scenarios")
    return model, state, scenario


def _method_kwargs(args, method):
    if method == "fibonacci" and args.samples:
        return {"n": args.samples}
    if method == "single" and args.direction:
        d = np.asarray(args.direction, dtype=float)
        return {"direction": d / np.linalg.norm(d)}
    return {}


def _records_for(results, scenario: str, seed) -> list:
    exact = results.get("exact")
    ok_exact = exact is not None and exact.status == "ok" and exact.rho > 0
    out = []
    for m, r in results.items():
        ratio = r.rho / exact.rho if ok_exact and np.isfinite(r.rho) else None
        out.append(BenchRecord(scenario, -1 if seed is None else seed, m, float(r.rho), ratio,
                               max(r.wall_time * 1e3, 1e-6), r.status))
    return out


def _emit_results(args, results: dict, model, state, scenario, name: str) -> int:
    path = _output_path(args, f"{name}.{args.format}")
    if args.format == "csv":
        path.parent.mkdir(parents=True, exist_ok=True)
        write_records_csv(_records_for(results, args.scenario, args.seed), path)
    else:
        doc = {"command": f"suf {name}",
               "instance": {"model": model.to_dict(), "state": state.to_dict(),
                            "scenario": scenario.to_dict()}}
        if len(results) == 1:
            doc["result"] = next(iter(results.values())).to_dict()
        else:
            doc["results"] = {m: r.to_dict() for m, r in results.items()}
        _write_json(path, doc)
    for m, r in results.items():
        print(f"{m:10s} rho = {r.rho:12.6f} N  status = {r.status:18s} {r.wall_time * 1e3:9.3f} ms")
    print(f"wrote {path}")
    return 1 if any(r.status in HARD_FAILURES for r in results.values()) else 0


def cmd_suf_compute(args) -> int:
    model = load_model(args.model)
    model, state, scenario = load_instance(model, args.scenario, args.state, args.seed)
    reduced = reduce(assemble(model, state, scenario))
    result = compute_suf(reduced, args.method, **_method_kwargs(args, args.method))
    return _emit_results(args, {args.method: result}, model, state, scenario, "compute")


def cmd_suf_compare(args) -> int:
    model = load_model(args.model)
    model, state, scenario = load_instance(model, args.scenario, args.state, args.seed)
    reduced = reduce(assemble(model, state, scenario))
    methods = args.method or list(METHODS)
    results = {m: compute_suf(reduced, m, **_method_kwargs(args, m)) for m in methods}
    return _emit_results(args, results, model, state, scenario, "compare")


def cmd_suf_bench(args) -> int:
    methods = args.method or list(METHODS)
    scenarios = [args.scenario] if args.scenario else list(SCENARIOS)
    seed = 0 if args.seed is None else args.seed
    records, summary = ([], {}) if args.samples == 0 else run_benchmark(
        args.samples, seed, methods, scenarios, repeats=args.repeats, workers=args.workers)
    out_dir = Path(args.out) if args.out else Path(os.environ.get(OUTPUT_ENV, "."))
    out_dir.mkdir(parents=True, exist_ok=True)
    write_records_csv(records, out_dir / "bench.csv")
    _write_json(out_dir / "summary.json", {"command": "suf bench", "samples": args.samples,
                                           "seed": seed, "methods": methods,
                                           "summary": summary})
    if any(r.ratio_to_exact is not None and r.method != "exact" for r in records):
        emit_plot(records, "boxplot", out_dir / "ratios.svg")
    for kind, per in summary.items():
        for m, s in per.items():
            q = s["ratio"]
            ratio = "" if q is None else f"ratio median {q['median']:.4f} [{q['q1']:.4f}, {q['q3']:.4f}]"
            t = s["median_time_ms"]
            print(f"{kind:14s} {m:10s} {'' if t is None else f'{t:10.3f} ms'}  {ratio}")
    print(f"wrote {out_dir / 'bench.csv'}")
    return 1 if any(r.status in HARD_FAILURES for r in records) else 0


def cmd_design_optimize(args) -> int:
    model = load_model(args.model)
    result = optimize_design(model, tuple(args.ee), method=args.method,
                             seed=0 if args.seed is None else args.seed, restarts=args.restarts)
    v = result.variables
    path = _output_path(args, "design.json")
    _write_json(path, {"command": "design optimize", "method": args.method, "rho": result.rho,
                       "x_f": v.x_f, "y_f": v.y_f, "b_z": v.b_z, "prong_x": v.prong_x,
                       "evaluations": len(result.evaluations)})
    print(f"x_f = {v.x_f:.4f}  y_f = {v.y_f:.4f}  b_z = {v.b_z:.4f}  rho = {result.rho:.4f} N")
    print(f"wrote {path}")
    return 0


def _heights(args):
    if args.heights:
        return sorted(args.heights)
    return list(np.round(np.arange(args.h_min, args.h_max + 1e-9, args.h_step), 6))


def cmd_design_sweep(args) -> int:
    model = load_model(args.model)
    rows = sweep_height(model, _heights(args), tuple(args.ee), method=args.method)
    out_dir = Path(args.out) if args.out else Path(os.environ.get(OUTPUT_ENV, "."))
    out_dir.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(rows, out_dir / "sweep.csv")
    emit_plot(rows, "line", out_dir / "sweep.svg")
    for r in rows:
        print(f"b_z = {r.b_z:.3f}  prong {r.rho_prong:9.3f} N  no prong {r.rho_noprong:9.3f} N"
              f"  ratio {r.benefit:.3f}")
    print(f"wrote {out_dir / 'sweep.csv'}")
    return 0


def cmd_hqp_solve(args) -> int:
    model = load_model(args.model)
    state = RobotState.from_dict(json.loads(Path(args.state).read_text()))
    tasks = TaskSet.from_json(Path(args.tasks).read_text()) if args.tasks else TaskSet()
    solution = solve_hqp(model, state, args.contacts, tasks, layers=tuple(args.layers))
    residual = verify_solution(model, state, solution)
    path = _output_path(args, "hqp.json")
    _write_json(path, {"command": "hqp solve", "solution": solution.to_dict(),
                       "constraint_residual": residual})
    for k, v in solution.objectives.items():
        print(f"layer {k}: objective {v:.6e}{'  (no effect)' if k in solution.skipped else ''}")
    print(f"wrote {path}")
    return 0


def cmd_polytope_export(args) -> int:
    if args.method not in ("exact", "fibonacci"):
        raise CliError("only exact and fibonacci produce a polytope")
    model = load_model(args.model)
    model, state, scenario = load_instance(model, args.scenario, args.state, args.seed)
    reduced = reduce(assemble(model, state, scenario))
    result = compute_suf(reduced, args.method, **_method_kwargs(args, args.method))
    if result.polytope is None:
        raise CliError(f"no polytope: status {result.status}")
    fmt = args.format
    path = _output_path(args, f"polytope.{fmt}")
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        result.polytope.write_csv(path, args.which)
    elif fmt == "obj":
        result.polytope.write_obj(path)
    else:
        _write_json(path, {"command": "polytope export", "result": result.to_dict()})
    print(f"{len(result.polytope.vertices)} vertices, {len(result.polytope.b)} facets, "
          f"rho = {result.rho:.6f} N")
    print(f"wrote {path}")
    return 0


def cmd_certify_replay(args) -> int:
    doc = json.loads(Path(args.result).read_text())
    inst = doc["instance"]
    model = RobotModel.from_dict(inst["model"])
    state = RobotState.from_dict(inst["state"])
    scenario = Scenario.from_dict(inst["scenario"])
    docs = [doc["result"]] if "result" in doc else list(doc["results"].values())
    system = assemble(model, state, scenario)
    reduced = reduce(system)
    report, ok = {}, True
    for d in docs:
        result = SufResult.from_dict(d)
        if result.certificate is None:
            continue
        worst = replay_certificate(reduced, result, args.samples,
                                   0 if args.seed is None else args.seed, system)
        passed = worst < REPLAY_TOL
        ok &= passed
        report[result.method] = {"rho": result.rho, "max_violation": worst, "passed": passed}
        print(f"{result.method:10s} rho = {result.rho:.6f} N  max violation {worst:.3e}  "
              f"{'PASS' if passed else 'FAIL'}")
    if not report:
        raise CliError("the result file holds no decision-rule certificate")
    path = _output_path(args, "replay.json")
    _write_json(path, {"command": "certify replay", "samples": args.samples,
                       "tolerance": REPLAY_TOL, "replay": report})
    print(f"wrote {path}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prongsuf", description="SUF analysis for legged robots")
    groups = parser.add_subparsers(dest="group", required=True)

    def common(p, scenario=True):
        p.add_argument("--model", default="quadruped",
                       help=f"builtin ({', '.join(BUILTIN_MODELS)}) or JSON model file")
        if scenario:
            p.add_argument("--scenario", default="manipulation",
                           help=f"builtin ({', '.join(BUILTIN_SCENARIOS)}) or JSON scenario file")
            p.add_argument("--state", help="JSON state file")
        p.add_argument("--seed", type=int, help="random instance seed")
        p.add_argument("--out", help="output file or directory")

    suf = groups.add_parser("suf").add_subparsers(dest="command", required=True)
    p = suf.add_parser("compute", help="one method on one instance")
    common(p)
    p.add_argument("--method", choices=METHODS, default="affine")
    p.add_argument("--samples", type=int, help="Fibonacci directions")
    p.add_argument("--direction", type=float, nargs=3, help="single-direction force direction")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_suf_compute)

    p = suf.add_parser("compare", help="several methods on one instance")
    common(p)
    p.add_argument("--method", choices=METHODS, action="append")
    p.add_argument("--samples", type=int, help="Fibonacci directions")
    p.add_argument("--direction", type=float, nargs=3)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_suf_compare)

    p = suf.add_parser("bench", help="random-instance benchmark")
    p.add_argument("--scenario", choices=SCENARIOS)
    p.add_argument("--method", choices=METHODS, action="append")
    p.add_argument("--samples", type=int, default=20, help="instances per scenario")
    p.add_argument("--seed", type=int)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", choices=("json", "csv"), default="csv")
    p.set_defaults(func=cmd_suf_bench)

    design = groups.add_parser("design").add_subparsers(dest="command", required=True)
    p = design.add_parser("optimize", help="best feet placement and torso height")
    common(p, scenario=False)
    p.add_argument("--ee", type=float, nargs=3, default=list(EE_TARGET))
    p.add_argument("--method", choices=METHODS, default="affine")
    p.add_argument("--restarts", type=int, default=0)
    p.add_argument("--format", choices=("json",), default="json")
    p.set_defaults(func=cmd_design_optimize)

    p = design.add_parser("sweep", help="SUF against torso height, with and without prongs")
    common(p, scenario=False)
    p.add_argument("--ee", type=float, nargs=3, default=list(EE_TARGET))
    p.add_argument("--method", choices=METHODS, default="affine")
    p.add_argument("--heights", type=float, nargs="+")
    p.add_argument("--h-min", type=float, default=0.25)
    p.add_argument("--h-max", type=float, default=0.55)
    p.add_argument("--h-step", type=float, default=0.05)
    p.add_argument("--format", choices=("csv",), default="csv")
    p.set_defaults(func=cmd_design_sweep)

    hqp = groups.add_parser("hqp").add_subparsers(dest="command", required=True)
    p = hqp.add_parser("solve", help="hierarchical whole-body QP for one timestep")
    common(p, scenario=False)
    p.add_argument("--state", required=True)
    p.add_argument("--tasks", help="JSON task set")
    p.add_argument("--contacts", nargs="*", default=[])
    p.add_argument("--layers", type=int, nargs="+", default=list(LAYERS))
    p.add_argument("--format", choices=("json",), default="json")
    p.set_defaults(func=cmd_hqp_solve)

    poly = groups.add_parser("polytope").add_subparsers(dest="command", required=True)
    p = poly.add_parser("export", help="write the rejectable force polytope")
    common(p)
    p.add_argument("--method", choices=("exact", "fibonacci"), default="exact")
    p.add_argument("--samples", type=int)
    p.add_argument("--which", choices=("vertices", "halfspaces"), default="vertices")
    p.add_argument("--format", choices=("json", "csv", "obj"), default="json")
    p.set_defaults(func=cmd_polytope_export, direction=None)

    cert = groups.add_parser("certify").add_subparsers(dest="command", required=True)
    p = cert.add_parser("replay", help="check a decision-rule certificate on random forces")
    p.add_argument("--result", required=True, help="JSON written by 'suf compute/compare'")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--format", choices=("json",), default="json")
    p.set_defaults(func=cmd_certify_replay)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ModelError, ScenarioError, IKError, HqpInfeasible, ValueError,
            FileNotFoundError, KeyError) as exc:
        message = f"{type(exc).__name__}: {exc}"
        print(f"error: {message}", file=sys.stderr)
        name = f"{args.group}-{args.command}-error.json"
        try:
            out = getattr(args, "out", None)
            if out and args.command not in DIRECTORY_COMMANDS and not Path(out).is_dir():
                target = Path(out)
            else:
                target = Path(out or os.environ.get(OUTPUT_ENV, ".")) / name
            _write_json(target, {"command": f"{args.group} {args.command}", "error": message})
        except OSError:
            pass
        return 2


if __name__ == "__main__":
    sys.exit(main())
