"""Fraction of random scenarios whose hard constraints are acyclic.

Only the collision tables are built, so 200 seeds at n=1000 take a few
minutes.  Pairs whose whole path sits inside another's corridor are counted
separately; they always form a two-drone cycle.
"""

import argparse
import csv
from dataclasses import dataclass

import numpy as np

from tps.collision import WHOLE_PATH_INSIDE, SafetyParams, build_tables
from tps.priority import detect_cycle
from tps.scenario import SCALABILITY_CORNER, ScenarioConfig, generate


@dataclass(frozen=True)
class Config:
    counts: tuple = (50, 100, 250, 500, 1000)
    seeds: int = 200
    out: str = "results/cycle_rate.csv"


def survey(n: int, seeds: int, safety=SafetyParams()) -> dict:
    cyclic = whole_inside = 0
    for seed in range(seeds):
        sc = generate(ScenarioConfig(n=n, delta="auto", cube_far_corner=SCALABILITY_CORNER, seed=seed))
        tables = build_tables(sc.paths, safety, strict=False)
        cyclic += bool(detect_cycle(tables))
        whole_inside += bool(np.any(tables.config == WHOLE_PATH_INSIDE))
    return {"n": n, "seeds": seeds, "cycle_free_pct": 100.0 * (seeds - cyclic) / seeds,
            "with_enclosed_path_pct": 100.0 * whole_inside / seeds}


def main(argv=None) -> None:
    cfg = Config()
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--counts", type=int, nargs="+", default=list(cfg.counts))
    ap.add_argument("--seeds", type=int, default=cfg.seeds)
    ap.add_argument("--out", default=cfg.out)
    args = ap.parse_args(argv)

    rows = []
    for n in args.counts:
        rows.append(survey(n, args.seeds))
        print("n={n:>5}  cycle-free {cycle_free_pct:6.1f}%  enclosed-path scenarios "
              "{with_enclosed_path_pct:6.1f}%".format(**rows[-1]), flush=True)
    with open(args.out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


if __name__ == "__main__":
    main()
