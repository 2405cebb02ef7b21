#!/usr/bin/env python3
"""Drive the ten-joint chain through a demonstration waypoint sequence.

Writes one trajectory CSV per waypoint plus a summary JSON, then prints the
per-waypoint convergence numbers.
"""

import argparse
import json
from pathlib import Path

import numpy as np

from brakesim.experiment import run_chain_waypoints
from brakesim.scenario import load_scenario

DEMO_WAYPOINTS_DEG = [
    [30, -30, 30, -30, 30, -30, 30, -30, 30, -30],
    [45, 45, 45, -20, -20, -20, 10, 10, 10, 0],
    [-50, 40, -30, 20, -10, 10, -20, 30, -40, 50],
    [0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scenario", default="chain10")
    parser.add_argument("--targets", type=Path, default=None,
                        help="optional waypoint JSON (degrees); default demo set")
    parser.add_argument("--out", type=Path, default=Path("results/chain_demo"))
    args = parser.parse_args()

    scenario = load_scenario(args.scenario)
    if args.targets is not None:
        with open(args.targets) as f:
            rows = json.load(f)
    else:
        rows = DEMO_WAYPOINTS_DEG
    waypoints = [np.deg2rad(np.asarray(row, dtype=float)) for row in rows]
    summary = run_chain_waypoints(scenario, waypoints, out_dir=args.out)
    for entry in summary["waypoints"]:
        print(f"waypoint {entry['waypoint']}: converged={entry['converged']} "
              f"max error {entry['max_error_deg']:.2f} deg in "
              f"{entry['sim_time_s']:.1f}s sim "
              f"({entry['direction_changes']} direction change(s))")
    print(f"outputs in {args.out}")


if __name__ == "__main__":
    main()
