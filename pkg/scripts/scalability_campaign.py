"""Scalability campaign: density factor grows with n, targets in a 500 m cube.

Counts of 2500 and 5000 are supported but slow; the defaults stop at 1000.

    python scripts/scalability_campaign.py --counts 50 100 --reps 10
"""

import argparse
from dataclasses import dataclass

from tps.campaign import CampaignSpec, format_summary, run_all, summarise, write_reports
from tps.scenario import SCALABILITY_CORNER


@dataclass(frozen=True)
class Config:
    counts: tuple = (50, 100, 250, 500, 1000)
    reps: int = 200
    base_seed: int = 0
    workers: int = 1
    out: str = "results/scalability"


def main(argv=None) -> None:
    cfg = Config()
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--counts", type=int, nargs="+", default=list(cfg.counts))
    ap.add_argument("--reps", type=int, default=cfg.reps)
    ap.add_argument("--base-seed", type=int, default=cfg.base_seed)
    ap.add_argument("--workers", type=int, default=cfg.workers)
    ap.add_argument("--out", default=cfg.out)
    args = ap.parse_args(argv)
    cfg = Config(tuple(args.counts), args.reps, args.base_seed, args.workers, args.out)

    spec = CampaignSpec(drone_counts=cfg.counts, replications=cfg.reps, delta="auto",
                        cube_far_corner=SCALABILITY_CORNER, base_seed=cfg.base_seed,
                        workers=cfg.workers)
    records = run_all(spec, progress=lambda r: print(f"n={r.n} seed={r.seed} {r.status}", flush=True))
    write_reports(spec, records, cfg.out)
    print(format_summary(summarise(records)))


if __name__ == "__main__":
    main()
