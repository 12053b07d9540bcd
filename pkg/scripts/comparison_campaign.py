"""Small-swarm campaign: 10 to 30 drones, fixed density factor 10, 200 seeds each.

Writes runs/summary/long/timing CSVs and prints the mean ± 95% half-width table.

    python scripts/comparison_campaign.py --reps 20 --out results/comparison
"""

import argparse
from dataclasses import dataclass

from tps.campaign import CampaignSpec, format_summary, run_all, summarise, write_reports
from tps.scenario import COMPARISON_CORNER


@dataclass(frozen=True)
class Config:
    counts: tuple = (10, 15, 20, 25, 30)
    reps: int = 200
    delta: float = 10.0
    base_seed: int = 0
    workers: int = 1
    out: str = "results/comparison"


def main(argv=None) -> None:
    cfg = Config()
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--counts", type=int, nargs="+", default=list(cfg.counts))
    ap.add_argument("--reps", type=int, default=cfg.reps)
    ap.add_argument("--base-seed", type=int, default=cfg.base_seed)
    ap.add_argument("--workers", type=int, default=cfg.workers)
    ap.add_argument("--out", default=cfg.out)
    args = ap.parse_args(argv)
    cfg = Config(tuple(args.counts), args.reps, cfg.delta, args.base_seed, args.workers, args.out)

    spec = CampaignSpec(drone_counts=cfg.counts, replications=cfg.reps, delta=cfg.delta,
                        cube_far_corner=COMPARISON_CORNER, base_seed=cfg.base_seed,
                        workers=cfg.workers)
    records = run_all(spec)
    paths = write_reports(spec, records, cfg.out)
    print(format_summary(summarise(records)))
    print(f"reports in {paths['summary'].parent}")


if __name__ == "__main__":
    main()
