"""Command-line entry points: generate, schedule, verify, campaign, dump-matrices.

Settings are resolved flag > JSON config file (``--config``) > default.  The
output directory is resolved flag > ``TPS_OUTPUT_DIR`` > config > ``results``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

from tps.campaign import CampaignSpec, format_summary, run_all, summarise, write_reports
from tps.collision import SafetyParams, build_tables
from tps.delays import Schedule, SearchParams
from tps.errors import (
    CycleDetectedError,
    InfeasiblePairError,
    SchedulingError,
    TPSError,
)
from tps.kinematics import KinematicLimits
from tps.metrics import METRICS_SCHEMA_VERSION, RunMetrics, compute_metrics, verify
from tps.planner import plan
from tps.scenario import COMPARISON_CORNER, Scenario, ScenarioConfig, generate

log = logging.getLogger("tps")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_CYCLE = 3
EXIT_INFEASIBLE = 4
EXIT_BLOCKED = 5
EXIT_UNSAFE = 6

DIAGNOSTIC_SCHEMA_VERSION = 1
OUTPUT_ENV = "TPS_OUTPUT_DIR"

DEFAULTS = {
    "n": None,
    "delta": 10.0,
    "seed": 0,
    "r_col": 1.0,
    "sf": 1.5,
    "lam": 0.5,
    "min_spacing": 2.0,
    "spacing_metric": "euclidean",
    "cube_far_corner": list(COMPARISON_CORNER),
    "a_max": 3.0,
    "v_max": 20.0,
    "d_max": 3.0,
    "dt_step": 1e-3,
    "t_sample": 1e-2,
    "refine_tol": 1e-5,
    "expansion_cap": 16.0,
    "resolution": 1e-3,
    "counts": None,
    "reps": 200,
    "base_seed": 0,
    "workers": 1,
    "output_dir": None,
}


def _delta(text: str):
    return text if text == "auto" else float(text)


def _add_scenario_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("scenario")
    g.add_argument("--n", type=int, help="number of drones")
    g.add_argument("--delta", type=_delta, help="density factor, a number or 'auto'")
    g.add_argument("--seed", type=int)
    g.add_argument("--min-spacing", type=float)
    g.add_argument("--spacing-metric", choices=["euclidean", "chebyshev"])
    g.add_argument("--cube-far-corner", type=float, nargs=3, metavar=("X", "Y", "Z"))
    g.add_argument("--a-max", type=float)
    g.add_argument("--v-max", type=float)
    g.add_argument("--d-max", type=float)


def _add_safety_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("safety")
    g.add_argument("--r-col", type=float, help="collision radius (m)")
    g.add_argument("--sf", type=float, help="safety factor applied to the radius when planning")
    g.add_argument("--lam", type=float, help="soft-constraint marker value")


def _add_search_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("delay search")
    g.add_argument("--dt-step", type=float, help="delay resolution (s)")
    g.add_argument("--t-sample", type=float, help="sampling step of the collision check (s)")
    g.add_argument("--refine-tol", type=float)
    g.add_argument("--expansion-cap", type=float)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON file of settings; flags override it")
    p.add_argument("--output-dir", type=Path, help=f"output directory (env {OUTPUT_ENV} also works)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tps", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="draw a random scenario and save it as JSON")
    _add_common(p)
    _add_scenario_flags(p)
    _add_safety_flags(p)

    p = sub.add_parser("schedule", help="plan start delays for a scenario file or generated scenario")
    _add_common(p)
    p.add_argument("--scenario", type=Path, help="scenario JSON; omit to generate from flags")
    _add_scenario_flags(p)
    _add_safety_flags(p)
    _add_search_flags(p)
    p.add_argument("--resolution", type=float, help="verifier time resolution (s)")
    p.add_argument("--no-verify", action="store_true")
    p.add_argument("--dump-matrices", action="store_true", help="also write the collision tables")
    p.add_argument("--trace", action="store_true", help="also write the priority selection trace")

    p = sub.add_parser("verify", help="check a schedule against its scenario")
    _add_common(p)
    p.add_argument("scenario", type=Path)
    p.add_argument("schedule", type=Path)
    p.add_argument("--r-col", type=float)
    p.add_argument("--resolution", type=float)

    p = sub.add_parser("campaign", help="seeded Monte Carlo runs over several drone counts")
    _add_common(p)
    p.add_argument("--counts", type=int, nargs="+", help="drone counts")
    p.add_argument("--reps", type=int, help="replications per count")
    p.add_argument("--base-seed", type=int)
    p.add_argument("--workers", type=int)
    _add_scenario_flags(p)
    _add_safety_flags(p)
    _add_search_flags(p)
    p.add_argument("--resolution", type=float, help="verifier time resolution (s)")

    p = sub.add_parser("dump-matrices", help="write the collision tables of a scenario as CSV")
    _add_common(p)
    p.add_argument("scenario", type=Path)
    _add_safety_flags(p)
    return parser


def _settings(args: argparse.Namespace) -> dict:
    cfg = {}
    if getattr(args, "config", None):
        try:
            cfg = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise TPSError(f"cannot read config file {args.config}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise TPSError(f"config file {args.config} must hold a JSON object")
        unknown = set(cfg) - set(DEFAULTS)
        if unknown:
            raise TPSError(f"unknown config keys: {sorted(unknown)}")
    merged = dict(DEFAULTS)
    merged.update(cfg)
    for key, value in vars(args).items():
        if key in DEFAULTS and value is not None:
            merged[key] = value
    if args.output_dir is None and os.environ.get(OUTPUT_ENV):
        merged["output_dir"] = os.environ[OUTPUT_ENV]
    if merged["output_dir"] is None:
        merged["output_dir"] = "results"
    merged["output_dir"] = Path(merged["output_dir"])
    return merged


def _limits(s: dict) -> KinematicLimits:
    return KinematicLimits(s["a_max"], s["v_max"], s["d_max"])


def _safety(s: dict) -> SafetyParams:
    return SafetyParams(s["r_col"], s["sf"], s["lam"])


def _search(s: dict) -> SearchParams:
    return SearchParams(s["dt_step"], s["t_sample"], s["refine_tol"], s["expansion_cap"])


def _scenario_config(s: dict) -> ScenarioConfig:
    if s["n"] is None:
        raise TPSError("--n is required to generate a scenario")
    return ScenarioConfig(
        n=s["n"], delta=s["delta"], r_col=s["r_col"], sf=s["sf"], min_spacing=s["min_spacing"],
        cube_far_corner=tuple(s["cube_far_corner"]), seed=s["seed"],
        spacing_metric=s["spacing_metric"], limits=_limits(s),
    )


def _write_diagnostic(out: Path, status: str, message: str, **extra) -> dict:
    doc = {"schema_version": DIAGNOSTIC_SCHEMA_VERSION, "status": status, "message": message, **extra}
    out.mkdir(parents=True, exist_ok=True)
    (out / "diagnostic.json").write_text(json.dumps(doc, indent=1))
    print(json.dumps(doc), file=sys.stderr)
    return doc


def _write_metrics(path: Path, metrics: RunMetrics) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["schema_version"] + RunMetrics.csv_header())
        w.writerow([METRICS_SCHEMA_VERSION] + metrics.csv_row())


def cmd_generate(s: dict, args) -> int:
    scenario = generate(_scenario_config(s))
    out = s["output_dir"]
    out.mkdir(parents=True, exist_ok=True)
    path = out / "scenario.json"
    scenario.save(path)
    print(path)
    return EXIT_OK


def cmd_schedule(s: dict, args) -> int:
    out = s["output_dir"]
    out.mkdir(parents=True, exist_ok=True)
    if args.scenario:
        scenario = Scenario.load(args.scenario)
    else:
        scenario = generate(_scenario_config(s))
        scenario.save(out / "scenario.json")
    safety = _safety(s)
    trace = [] if args.trace else None
    try:
        result = plan(scenario.paths, safety, _search(s), trace=trace)
    except CycleDetectedError as exc:
        _write_diagnostic(out, "cycle-detected", str(exc), cycles=exc.cycles)
        return EXIT_CYCLE
    except InfeasiblePairError as exc:
        if args.dump_matrices and exc.tables is not None:
            exc.tables.dump_csv(out / "matrices")
        _write_diagnostic(out, "infeasible-pair", str(exc), pairs=[list(p) for p in exc.pairs])
        return EXIT_INFEASIBLE
    except SchedulingError as exc:
        cause = exc.cause
        _write_diagnostic(out, "blocked-pair", str(exc),
                          pair=[getattr(cause, "higher", None), getattr(cause, "lower", None)],
                          partial_delays={str(k): v for k, v in exc.partial_delays.items()})
        return EXIT_BLOCKED

    (out / "schedule.json").write_text(result.schedule.to_json())
    if args.dump_matrices:
        result.tables.dump_csv(out / "matrices")
    if trace is not None:
        (out / "priority_trace.json").write_text(
            json.dumps({"schema_version": DIAGNOSTIC_SCHEMA_VERSION, "rounds": trace}, indent=1))
    check = None if args.no_verify else verify(scenario, result.schedule, safety.r_col, s["resolution"])
    metrics = compute_metrics(scenario, result.schedule, result.calc_time, check)
    _write_metrics(out / "metrics.csv", metrics)
    print(f"n={scenario.n} flock_time={metrics.flock_time:.3f}s max_delay={metrics.max_delay:.3f}s "
          f"calc_time={metrics.calc_time:.3f}s "
          + ("verify=skipped" if check is None else
             f"collision_free={str(check.collision_free).lower()} min_distance={check.min_distance:.4f}m"))
    if check is not None and not check.collision_free:
        return EXIT_UNSAFE
    return EXIT_OK


def cmd_verify(s: dict, args) -> int:
    scenario = Scenario.load(args.scenario)
    try:
        schedule = Schedule.from_json(args.schedule.read_text())
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise TPSError(f"cannot read schedule {args.schedule}: {exc}") from exc
    if schedule.n != scenario.n:
        raise TPSError(f"schedule has {schedule.n} drones, scenario has {scenario.n}")
    check = verify(scenario, schedule, s["r_col"], s["resolution"])
    doc = {
        "schema_version": DIAGNOSTIC_SCHEMA_VERSION,
        "collision_free": check.collision_free,
        "min_distance": check.min_distance,
        "closest_pair": list(check.closest_pair) if check.closest_pair else None,
        "first_violation": (
            {"pair": list(check.first_violation[0]), "time": check.first_violation[1]}
            if check.first_violation else None
        ),
    }
    print(json.dumps(doc))
    return EXIT_OK if check.collision_free else EXIT_UNSAFE


def cmd_campaign(s: dict, args) -> int:
    if not s["counts"]:
        raise TPSError("--counts is required")
    spec = CampaignSpec(
        drone_counts=tuple(s["counts"]), replications=s["reps"], delta=s["delta"],
        cube_far_corner=tuple(s["cube_far_corner"]), base_seed=s["base_seed"],
        output_dir=str(s["output_dir"]), min_spacing=s["min_spacing"],
        spacing_metric=s["spacing_metric"], limits=_limits(s), safety=_safety(s),
        search=_search(s), verify_resolution=s["resolution"], workers=s["workers"],
    )

    def progress(rec):
        log.info("n=%d seed=%d %s", rec.n, rec.seed, rec.status)

    records = run_all(spec, progress)
    write_reports(spec, records, s["output_dir"])
    print(format_summary(summarise(records)))
    return EXIT_OK


def cmd_dump_matrices(s: dict, args) -> int:
    scenario = Scenario.load(args.scenario)
    tables = build_tables(scenario.paths, _safety(s), strict=False)
    for path in tables.dump_csv(s["output_dir"]):
        print(path)
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "schedule": cmd_schedule,
    "verify": cmd_verify,
    "campaign": cmd_campaign,
    "dump-matrices": cmd_dump_matrices,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        settings = _settings(args)
        return COMMANDS[args.command](settings, args)
    except (TPSError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
