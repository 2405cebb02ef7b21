#!/usr/bin/env python3
"""Run the full brake-vs-no-brake in-hand manipulation study.

Equivalent to `brakesim compare --scenario hand2x3 --seeds 10`, kept as a
script so the study parameters are easy to edit in one place.
"""

import argparse
from pathlib import Path

from brakesim.experiment import aggregate_records, run_experiment
from brakesim.scenario import load_scenario


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scenario", default="hand2x3")
    parser.add_argument("--seeds", type=int, default=10)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--out", type=Path, default=Path("results/hand_study"))
    args = parser.parse_args()

    scenario = load_scenario(args.scenario)
    seeds = [scenario.seed + i for i in range(args.seeds)]
    result = run_experiment(scenario, ("brakes_on", "brakes_off"), seeds,
                            out_dir=args.out, threads=args.threads)
    for arm, records in result.arms.items():
        agg = aggregate_records(records)
        print(f"{arm}: {agg['success_count']}/{agg['n_trials']} successes, "
              f"median time {agg['median_time_s']:.1f}s, "
              f"median error {agg['median_error_mm']:.2f}mm")
    comp = result.comparison
    print(f"Mann-Whitney: time p={comp['time_to_goal']['p_value']:.3g}, "
          f"error p={comp['final_error']['p_value']:.3g}")
    print(f"metrics written to {args.out / 'metrics.json'}")


if __name__ == "__main__":
    main()
