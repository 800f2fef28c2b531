"""``infersim`` command line.

Outputs go under ``$INFERSIM_OUT`` (default ``./infersim-out``). Failures exit
nonzero with a JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Sequence

from infersim.catalog import bundled_catalog, load_catalog
from infersim.config import ConfigError
from infersim.engine import SWEEP_AXES, SimulationError, load_scenario, run, sweep
from infersim.experiments import CROSSOVER_MAX_SEQS
from infersim.parallelism import bundled_hardware, load_hardware_file, placement
from infersim.planner import PlanError, kv_projection, plan
from infersim.report import RunResult, dumps, report, summary_brief
from infersim.scheduler import SchedulerConfig
from infersim.workload import (
    bundled_workloads,
    load_workload,
    preset_workload,
    sample_workload,
    workload_stats,
    write_requests_csv,
)

OUT_ENV = "INFERSIM_OUT"

EXIT_CONFIG = 2
EXIT_SIMULATION = 3
EXIT_IO = 4


class CliError(Exception):
    def __init__(self, kind: str, message: str, code: int, **details):
        super().__init__(message)
        self.kind = kind
        self.code = code
        self.details = details


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would print usage text and exit 2
        raise CliError("usage", message, EXIT_CONFIG, usage=self.format_usage().strip())


def out_dir() -> Path:
    return Path(os.environ.get(OUT_ENV, "infersim-out"))


def _emit(obj) -> None:
    sys.stdout.write(dumps(obj))


def _parse_values(axis: str, text: str) -> list:
    raw = [v.strip() for v in text.split(";" if axis == "parallelism" else ",") if v.strip()]
    if not raw:
        raise CliError("usage", "--values is empty", EXIT_CONFIG)
    if axis in ("max_num_seqs", "max_num_batched_tokens", "batch_size", "dp"):
        try:
            return [int(v) for v in raw]
        except ValueError as exc:
            raise CliError("usage", f"--values for {axis} must be integers: {exc}", EXIT_CONFIG) from None
    return raw


def cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    telemetry, summary = run(scenario, fast_forward=not args.no_fast_forward,
                             check_invariants=args.check)
    dest = out_dir() / scenario.name
    paths = report([RunResult(scenario.name, telemetry, summary)], dest)
    _emit({"scenario": scenario.name, "out_dir": str(dest), "summary": summary_brief(summary),
           "files": sorted(str(p) for p in paths.values())})
    return 0


def cmd_sweep(args) -> int:
    scenario = load_scenario(args.scenario)
    if args.axis not in SWEEP_AXES:
        raise CliError("usage", f"invalid axis '{args.axis}'", EXIT_CONFIG, allowed=list(SWEEP_AXES))
    values = _parse_values(args.axis, args.values)
    points = sweep(scenario, args.axis, values, jobs=args.jobs)
    dest = out_dir() / f"{scenario.name}-sweep-{args.axis}"
    results = [RunResult(f"{args.axis}={p.value}", p.telemetry, p.summary, p.value) for p in points]
    report(results, dest, axis=args.axis)
    _emit({"scenario": scenario.name, "axis": args.axis, "out_dir": str(dest),
           "points": [{"value": p.value, **summary_brief(p.summary)} for p in points]})
    return 0


def _catalogs(args):
    catalog = bundled_catalog()
    if getattr(args, "models_file", None):
        for name, spec in load_catalog(args.models_file).entries.items():
            catalog.entries[name] = spec
    hardware = bundled_hardware()
    if getattr(args, "hardware_file", None):
        hardware.update(load_hardware_file(args.hardware_file))
    return catalog, hardware


def _workload(ref: str, num_requests: int | None, seed: int | None):
    if ref in bundled_workloads():
        return preset_workload(ref, num_requests, seed)
    spec = load_workload(ref)
    if num_requests is not None:
        spec = spec.with_requests(num_requests)
    return spec


def cmd_plan(args) -> int:
    catalog, hardware = _catalogs(args)
    if args.hardware not in hardware:
        raise CliError("config", f"unknown hardware '{args.hardware}'", EXIT_CONFIG, known=sorted(hardware))
    hw = hardware[args.hardware]
    model = catalog[args.model]
    spec = _workload(args.workload, args.requests, None)
    stats = workload_stats(sample_workload(spec))
    sched = SchedulerConfig(max_num_seqs=args.max_num_seqs,
                            max_num_batched_tokens=max(args.max_num_batched_tokens, args.max_num_seqs))
    entries = plan(model, hw, stats, args.gpus, sched)
    payload = {"model": model.name, "hardware": hw.name, "gpus": args.gpus,
               "workload": {"num_requests": stats.num_requests, "mean_isl": stats.mean_isl,
                            "mean_osl": stats.mean_osl},
               "entries": [e.to_dict() for e in entries]}
    dest = out_dir() / f"plan-{model.name}-{args.gpus}gpu.json"
    dest.parent.mkdir(parents=True, exist_ok=True)
    dest.write_text(dumps(payload))
    _emit(payload)
    return 0


def cmd_workload_gen(args) -> int:
    spec = _workload(args.spec, args.requests, args.seed)
    requests = sample_workload(spec)
    dest = Path(args.output)
    if dest.parent and not dest.parent.exists():
        dest.parent.mkdir(parents=True, exist_ok=True)
    write_requests_csv(requests, dest)
    stats = workload_stats(requests)
    _emit({"output": str(dest), "num_requests": stats.num_requests, "mean_isl": stats.mean_isl,
           "mean_osl": stats.mean_osl, "max_osl": stats.max_osl})
    return 0


def cmd_validate(args) -> int:
    scenario = load_scenario(args.scenario)
    rep = placement(scenario.model, scenario.hardware, scenario.parallelism, scenario.scheduler)
    payload = {"scenario": scenario.name, "model": scenario.model.name,
               "parallelism": str(scenario.parallelism), "placement": asdict(rep)}
    if not rep.feasible:
        raise CliError("infeasible", rep.infeasibility_reason or "infeasible placement",
                       EXIT_SIMULATION, placement=asdict(rep))
    _emit(payload)
    return 0


def cmd_kv_projection(args) -> int:
    catalog, _ = _catalogs(args)
    proj = kv_projection(catalog[args.model], args.max_tokens, args.points)
    _emit({"model": args.model, "kv_bytes_per_token": proj.kv_bytes_per_token,
           "points": [{"tokens": t, "bytes": b} for t, b in proj.points]})
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="infersim", description="Serving simulator and parallelism planner.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="run one scenario file")
    s.add_argument("scenario")
    s.add_argument("--no-fast-forward", action="store_true", help="step every decode iteration")
    s.add_argument("--check", action="store_true", help="assert scheduler and pool invariants every step")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("sweep", help="run a scenario over several values of one parameter")
    s.add_argument("scenario")
    s.add_argument("--axis", required=True, help=", ".join(SWEEP_AXES))
    s.add_argument("--values", required=True,
                   help="comma-separated; for parallelism use ';' between triples, e.g. '8,1,1;4,2,1'")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("plan", help="rank parallelism configurations analytically")
    s.add_argument("--model", required=True)
    s.add_argument("--hardware", default="h200-node")
    s.add_argument("--gpus", type=int, required=True)
    s.add_argument("--workload", default="natural-reasoning", help="preset name or workload file")
    s.add_argument("--requests", type=int)
    s.add_argument("--max-num-seqs", type=int, default=CROSSOVER_MAX_SEQS)
    s.add_argument("--max-num-batched-tokens", type=int, default=SchedulerConfig.max_num_batched_tokens)
    s.add_argument("--models-file")
    s.add_argument("--hardware-file")
    s.set_defaults(func=cmd_plan)

    w = sub.add_parser("workload", help="workload utilities")
    wsub = w.add_subparsers(dest="workload_command", required=True, parser_class=_Parser)
    g = wsub.add_parser("gen", help="sample a workload into a CSV")
    g.add_argument("spec", help="preset name or workload file")
    g.add_argument("-o", "--output", required=True)
    g.add_argument("--requests", type=int)
    g.add_argument("--seed", type=int)
    g.set_defaults(func=cmd_workload_gen)

    s = sub.add_parser("validate", help="check a scenario's placement without simulating")
    s.add_argument("scenario")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("kv-projection", help="linear KV footprint versus generated tokens")
    s.add_argument("--model", required=True)
    s.add_argument("--max-tokens", type=int, required=True)
    s.add_argument("--points", type=int, default=11)
    s.add_argument("--models-file")
    s.set_defaults(func=cmd_kv_projection)
    return p


def _fail(kind: str, message: str, code: int, **details) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message, **details}, sort_keys=True) + "\n")
    return code


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CliError as exc:
        return _fail(exc.kind, str(exc), exc.code, **exc.details)
    except PlanError as exc:
        return _fail("no-feasible-config", str(exc), EXIT_SIMULATION, reasons=exc.reasons)
    except ConfigError as exc:
        return _fail("config", str(exc), EXIT_CONFIG)
    except KeyError as exc:
        return _fail("config", str(exc.args[0]) if exc.args else str(exc), EXIT_CONFIG)
    except SimulationError as exc:
        return _fail("simulation", str(exc), EXIT_SIMULATION)
    except OSError as exc:
        return _fail("io", str(exc), EXIT_IO)
    except ValueError as exc:
        return _fail("invalid", str(exc), EXIT_CONFIG)


if __name__ == "__main__":
    sys.exit(main())
