"""Command-line interface.

Subcommands:
  brake-metrics  CSV table of brake force/torque/power vs stack count
  run-chain      voting controller through a waypoint file on a chain scenario
  run-hand       manipulation trials for one arm (brakes on or off)
  compare        both arms plus the Mann-Whitney comparison

Exit codes: 0 success, 1 simulation fault, 2 validation/usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .engine import IntegrationFault
from .experiment import (emit_brake_table, load_waypoints, run_chain_waypoints,
                         run_experiment, run_hand_trial, ExperimentResult)
from .scenario import ScenarioError, load_scenario


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None,
                        help="base random seed (default: the scenario's seed)")
    parser.add_argument("--out", type=Path, default=None,
                        help="output directory (default: print to stdout only)")
    parser.add_argument("--threads", type=int, default=1,
                        help="trial-level parallelism; results are independent of this")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="brakesim",
        description="Simulation and control of tendon-driven mechanisms "
                    "with electrostatic joint brakes.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("brake-metrics",
                       help="emit a CSV of brake metrics for 1..N stacks")
    p.add_argument("--scenario", default="chain10",
                   help="scenario supplying the brake electrical parameters")
    p.add_argument("--stacks", type=int, default=8, help="maximum stack count")
    _common_flags(p)

    p = sub.add_parser("run-chain",
                       help="run the voting controller through waypoints")
    p.add_argument("--scenario", default="chain10")
    p.add_argument("--targets", required=True, type=Path,
                   help="JSON file of waypoint configurations in degrees")
    _common_flags(p)

    p = sub.add_parser("run-hand", help="run manipulation trials for one arm")
    p.add_argument("--scenario", default="hand2x3")
    p.add_argument("--goal-x", type=float, default=None,
                   help="override the scenario's goal x (meters)")
    p.add_argument("--brakes", choices=("on", "off"), required=True)
    p.add_argument("--seeds", type=int, default=10, help="number of seeds to run")
    _common_flags(p)

    p = sub.add_parser("compare",
                       help="run both arms and the Mann-Whitney comparison")
    p.add_argument("--scenario", default="hand2x3")
    p.add_argument("--goal-x", type=float, default=None)
    p.add_argument("--seeds", type=int, default=10)
    _common_flags(p)

    return parser


def _seed_list(args, scenario) -> list[int]:
    base = scenario.seed if args.seed is None else args.seed
    return [base + i for i in range(args.seeds)]


def _cmd_brake_metrics(args) -> int:
    scenario = load_scenario(args.scenario)
    table = emit_brake_table(scenario.brake_default, args.stacks)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "brake_metrics.csv").write_text(table)
    sys.stdout.write(table)
    return 0


def _cmd_run_chain(args) -> int:
    scenario = load_scenario(args.scenario)
    waypoints = load_waypoints(args.targets, len(scenario.mechanism.joints))
    summary = run_chain_waypoints(scenario, waypoints, out_dir=args.out)
    json.dump(summary, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0 if summary["all_converged"] else 1


def _cmd_run_hand(args) -> int:
    scenario = load_scenario(args.scenario)
    seeds = _seed_list(args, scenario)
    arm = "brakes_on" if args.brakes == "on" else "brakes_off"
    records = [run_hand_trial(scenario, brakes_on=args.brakes == "on", seed=s,
                              out_dir=args.out, arm_name=arm, goal_x=args.goal_x)
               for s in seeds]
    result = ExperimentResult(scenario_name=scenario.name, seeds=seeds,
                              arms={arm: records}, comparison=None)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "metrics.json").write_text(result.to_json())
    sys.stdout.write(result.to_json())
    return 0


def _cmd_compare(args) -> int:
    scenario = load_scenario(args.scenario)
    seeds = _seed_list(args, scenario)
    result = run_experiment(scenario, ("brakes_on", "brakes_off"), seeds,
                            out_dir=args.out, threads=args.threads,
                            goal_x=args.goal_x)
    sys.stdout.write(result.to_json())
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "brake-metrics": _cmd_brake_metrics,
        "run-chain": _cmd_run_chain,
        "run-hand": _cmd_run_hand,
        "compare": _cmd_compare,
    }
    try:
        return handlers[args.command](args)
    except (ScenarioError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except IntegrationFault as exc:
        print(f"simulation fault: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
