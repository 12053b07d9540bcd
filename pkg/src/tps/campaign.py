"""Seeded Monte Carlo campaigns over drone counts, with CSV reports.

Per-run rows and aggregate tables contain only seed-determined quantities, so
re-running the same campaign reproduces them byte for byte.  Wall-clock
calculation times go to a separate timing file.
"""

from __future__ import annotations

import csv
import json
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

from tps.collision import SafetyParams
from tps.delays import SearchParams
from tps.errors import CycleDetectedError, InfeasiblePairError, SchedulingError
from tps.kinematics import KinematicLimits
from tps.metrics import RunMetrics, compute_metrics, verify
from tps.planner import plan
from tps.scenario import COMPARISON_CORNER, ScenarioConfig, generate

CAMPAIGN_SCHEMA_VERSION = 1
Z95 = 1.96

STATUS_OK = "ok"
STATUS_CYCLE = "cycle"
STATUS_INFEASIBLE = "infeasible"
STATUS_BLOCKED = "blocked"

# aggregated per drone count, in this column order
SUMMARY_METRICS = (
    "flock_time",
    "mean_delay",
    "max_delay",
    "overhead_time_pct",
    "overhead_distance_pct",
    "min_observed_pair_distance",
)


@dataclass(frozen=True)
class CampaignSpec:
    drone_counts: tuple
    replications: int = 200
    delta: Union[float, str] = 10.0
    cube_far_corner: tuple = COMPARISON_CORNER
    base_seed: int = 0
    output_dir: Optional[str] = None
    min_spacing: float = 2.0
    spacing_metric: str = "euclidean"
    limits: KinematicLimits = field(default_factory=KinematicLimits)
    safety: SafetyParams = field(default_factory=SafetyParams)
    search: SearchParams = field(default_factory=SearchParams)
    verify_resolution: float = 1e-3
    workers: int = 1

    def __post_init__(self) -> None:
        from tps.errors import InvalidInputError

        object.__setattr__(self, "drone_counts", tuple(int(n) for n in self.drone_counts))
        object.__setattr__(self, "cube_far_corner", tuple(float(c) for c in self.cube_far_corner))
        if not self.drone_counts:
            raise InvalidInputError("drone_counts must not be empty")
        if any(n < 1 for n in self.drone_counts):
            raise InvalidInputError("every drone count must be >= 1")
        if self.replications < 1:
            raise InvalidInputError("replications must be >= 1")
        if self.workers < 1:
            raise InvalidInputError("workers must be >= 1")

    def scenario_config(self, n: int, seed: int) -> ScenarioConfig:
        return ScenarioConfig(
            n=n, delta=self.delta, r_col=self.safety.r_col, sf=self.safety.sf,
            min_spacing=self.min_spacing, cube_far_corner=self.cube_far_corner, seed=seed,
            spacing_metric=self.spacing_metric, limits=self.limits,
        )

    def seeds(self) -> range:
        return range(self.base_seed, self.base_seed + self.replications)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["drone_counts"] = list(self.drone_counts)
        d["cube_far_corner"] = list(self.cube_far_corner)
        return d


@dataclass(frozen=True)
class RunRecord:
    n: int
    seed: int
    status: str
    calc_time: float
    metrics: Optional[RunMetrics] = None
    detail: str = ""


def run_replication(spec: CampaignSpec, n: int, seed: int) -> RunRecord:
    """Generate, plan and verify one scenario."""
    scenario = generate(spec.scenario_config(n, seed))
    try:
        result = plan(scenario.paths, spec.safety, spec.search)
    except CycleDetectedError as exc:
        return RunRecord(n, seed, STATUS_CYCLE, math.nan, detail=json.dumps(exc.cycles[:3]))
    except InfeasiblePairError as exc:
        return RunRecord(n, seed, STATUS_INFEASIBLE, math.nan, detail=json.dumps(exc.pairs[:3]))
    except SchedulingError as exc:
        return RunRecord(n, seed, STATUS_BLOCKED, math.nan, detail=str(exc.cause))
    check = verify(scenario, result.schedule, spec.safety.r_col, spec.verify_resolution)
    metrics = compute_metrics(scenario, result.schedule, result.calc_time, check)
    return RunRecord(n, seed, STATUS_OK, result.calc_time, metrics)


def _run_job(args):
    spec, n, seed = args
    return run_replication(spec, n, seed)


def run_all(spec: CampaignSpec, progress=None) -> list[RunRecord]:
    """Every (n, seed) replication, ordered by n then seed regardless of worker count."""
    jobs = [(spec, n, seed) for n in spec.drone_counts for seed in spec.seeds()]
    if spec.workers == 1:
        records = []
        for job in jobs:
            records.append(_run_job(job))
            if progress:
                progress(records[-1])
        return records
    with ProcessPoolExecutor(spec.workers) as pool:
        records = []
        for rec in pool.map(_run_job, jobs, chunksize=4):
            records.append(rec)
            if progress:
                progress(rec)
    return records


# ---------------------------------------------------------------------------
# aggregation


def mean_half_width(values: Sequence[float]) -> tuple[float, Optional[float]]:
    """Mean and normal-approximation 95% half-width; ``None`` width for a single value."""
    if not values:
        return math.nan, None
    mean = statistics.fmean(values)
    if len(values) < 2:
        return mean, None
    return mean, Z95 * statistics.stdev(values) / math.sqrt(len(values))


@dataclass(frozen=True)
class CountSummary:
    n: int
    runs: int
    scheduled: int
    cycle_free_pct: float
    collision_free_pct: float
    stats: dict  # metric -> (mean, half_width or None)


def summarise(records: Sequence[RunRecord]) -> list[CountSummary]:
    out = []
    for n in sorted({r.n for r in records}):
        group = [r for r in records if r.n == n]
        ok = [r.metrics for r in group if r.status == STATUS_OK]
        cycle_free = sum(r.status not in (STATUS_CYCLE, STATUS_INFEASIBLE) for r in group)
        stats = {m: mean_half_width([getattr(x, m) for x in ok]) for m in SUMMARY_METRICS}
        out.append(CountSummary(
            n=n, runs=len(group), scheduled=len(ok),
            cycle_free_pct=100.0 * cycle_free / len(group),
            collision_free_pct=100.0 * sum(x.collision_free for x in ok) / len(ok) if ok else math.nan,
            stats=stats,
        ))
    return out


def _fmt(value) -> str:
    if value is None:
        return "NA"
    if isinstance(value, float):
        return "nan" if math.isnan(value) else f"{value:.6f}"
    return str(value)


PER_RUN_FIELDS = [f for f in RunMetrics.csv_header() if f != "calc_time"]


def write_reports(spec: CampaignSpec, records: Sequence[RunRecord], out_dir) -> dict:
    """Write per-run, summary, long-format and timing CSVs plus a manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {name: out / f"{name}.csv" for name in ("runs", "summary", "long", "timing")}

    with paths["runs"].open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["schema_version", "status"] + PER_RUN_FIELDS)
        for r in records:
            if r.metrics is None:
                w.writerow([CAMPAIGN_SCHEMA_VERSION, r.status, r.seed, r.n] + ["NA"] * (len(PER_RUN_FIELDS) - 2))
            else:
                row = asdict(r.metrics)
                w.writerow([CAMPAIGN_SCHEMA_VERSION, r.status] + [_fmt(row[k]) for k in PER_RUN_FIELDS])

    summaries = summarise(records)
    with paths["summary"].open("w", newline="") as fh:
        w = csv.writer(fh)
        header = ["schema_version", "n", "runs", "scheduled", "cycle_free_pct", "collision_free_pct"]
        for m in SUMMARY_METRICS:
            header += [f"{m}_mean", f"{m}_ci95"]
        w.writerow(header)
        for s in summaries:
            row = [CAMPAIGN_SCHEMA_VERSION, s.n, s.runs, s.scheduled,
                   _fmt(s.cycle_free_pct), _fmt(s.collision_free_pct)]
            for m in SUMMARY_METRICS:
                mean, half = s.stats[m]
                row += [_fmt(mean), _fmt(half)]
            w.writerow(row)

    with paths["long"].open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["schema_version", "n", "seed", "metric", "value"])
        for r in records:
            if r.metrics is None:
                continue
            for m in SUMMARY_METRICS:
                w.writerow([CAMPAIGN_SCHEMA_VERSION, r.n, r.seed, m, _fmt(getattr(r.metrics, m))])

    with paths["timing"].open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["schema_version", "n", "seed", "status", "calc_time_s"])
        for r in records:
            w.writerow([CAMPAIGN_SCHEMA_VERSION, r.n, r.seed, r.status, _fmt(r.calc_time)])

    manifest = {"schema_version": CAMPAIGN_SCHEMA_VERSION, "spec": spec.to_dict(),
                "files": {k: v.name for k, v in paths.items()}}
    (out / "campaign.json").write_text(json.dumps(manifest, indent=1, default=str))
    return paths


def format_summary(summaries: Sequence[CountSummary]) -> str:
    """Human-readable table in the ``mean ± half-width`` style."""

    def cell(mean, half, digits=3):
        if math.isnan(mean):
            return "n/a"
        return f"{mean:.{digits}f} ± {'n/a' if half is None else f'{half:.{digits}f}'}"

    lines = [f"{'n':>6} {'ok/runs':>9} {'cycle-free':>10} {'flock time (s)':>18} "
             f"{'avg delay (s)':>16} {'max delay (s)':>16} {'T_OH (%)':>18} {'D_OH (%)':>10}"]
    for s in summaries:
        st = s.stats
        lines.append(
            f"{s.n:>6} {f'{s.scheduled}/{s.runs}':>9} {s.cycle_free_pct:>9.1f}% "
            f"{cell(*st['flock_time']):>18} {cell(*st['mean_delay']):>16} {cell(*st['max_delay']):>16} "
            f"{cell(*st['overhead_time_pct']):>18} {st['overhead_distance_pct'][0]:>10.3f}"
        )
    return "\n".join(lines)
