#!/usr/bin/env python3
"""Print the brake force/torque/power table for 1..N electrode stacks."""

import argparse

from brakesim.experiment import emit_brake_table
from brakesim.scenario import load_scenario


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scenario", default="chain10",
                        help="scenario supplying the brake electrical constants")
    parser.add_argument("--stacks", type=int, default=8)
    args = parser.parse_args()
    scenario = load_scenario(args.scenario)
    print(emit_brake_table(scenario.brake_default, args.stacks), end="")


if __name__ == "__main__":
    main()
