import dataclasses
import json

import numpy as np
import pytest

from brakesim.brake import max_brake_torque
from brakesim.experiment import (ExperimentResult, TrialRecord, aggregate_records,
                                 emit_brake_table, load_waypoints,
                                 run_chain_waypoints, run_experiment,
                                 run_hand_trial)


class TestBrakeTable:
    def test_four_stack_torque_column(self, brake_1stack):
        # Hand evaluation of the force/torque chain gives 62.7, 125.4,
        # 188.1, 250.7 mN*m for one through four stacks.
        table = emit_brake_table(brake_1stack, 4)
        lines = table.strip().splitlines()
        assert lines[0] == ("num_stacks,attractive_force_N,holding_force_N,"
                            "holding_torque_Nm,power_W")
        torques = [float(line.split(",")[3]) for line in lines[1:]]
        expected = [0.0627, 0.1254, 0.1881, 0.2507]
        for got, want in zip(torques, expected):
            assert got == pytest.approx(want, rel=0.005)
        # The CSV carries nine significant digits; exact linearity is
        # asserted on the model itself in the acceptance suite.
        one_stack = max_brake_torque(brake_1stack)
        for n, got in enumerate(torques, start=1):
            assert got == pytest.approx(n * one_stack, rel=1e-8)

    def test_single_row(self, brake_1stack):
        table = emit_brake_table(brake_1stack, 1)
        assert len(table.strip().splitlines()) == 2

    def test_zero_voltage_all_zero(self, brake_1stack):
        spec = dataclasses.replace(brake_1stack, voltage=0.0)
        table = emit_brake_table(spec, 3)
        for line in table.strip().splitlines()[1:]:
            _, force_a, force_h, torque, power = line.split(",")
            assert float(force_a) == 0.0
            assert float(force_h) == 0.0
            assert float(torque) == 0.0
            assert float(power) == 0.0

    def test_bad_stack_count(self, brake_1stack):
        with pytest.raises(ValueError):
            emit_brake_table(brake_1stack, 0)


def fake_records():
    return [
        TrialRecord(seed=0, success=True, time_to_goal_s=10.0,
                    final_error_mm=0.5, config_switches=3, stalled=False,
                    trajectory_path=None),
        TrialRecord(seed=1, success=False, time_to_goal_s=180.0,
                    final_error_mm=20.0, config_switches=7, stalled=True,
                    trajectory_path=None),
        TrialRecord(seed=2, success=True, time_to_goal_s=30.0,
                    final_error_mm=0.9, config_switches=1, stalled=False,
                    trajectory_path=None),
    ]


class TestAggregates:
    def test_recomputable_from_records(self):
        records = fake_records()
        agg = aggregate_records(records)
        times = np.array([r.time_to_goal_s for r in records])
        errors = np.array([r.final_error_mm for r in records])
        assert agg["success_count"] == 2
        assert agg["mean_time_s"] == pytest.approx(times.mean())
        assert agg["median_time_s"] == pytest.approx(np.median(times))
        assert agg["std_error_mm"] == pytest.approx(errors.std())
        assert agg["n_trials"] == 3

    def test_result_json_contains_everything(self):
        result = ExperimentResult(scenario_name="x", seeds=[0, 1, 2],
                                  arms={"brakes_on": fake_records()},
                                  comparison=None)
        data = json.loads(result.to_json())
        assert data["scenario"] == "x"
        assert len(data["arms"]["brakes_on"]["records"]) == 3
        agg = data["arms"]["brakes_on"]["aggregate"]
        assert agg == aggregate_records(fake_records())


class TestHandTrials:
    def test_single_trial_record(self, mini_hand_scenario, tmp_path):
        record = run_hand_trial(mini_hand_scenario, brakes_on=True, seed=0,
                                out_dir=tmp_path)
        assert record.seed == 0
        assert record.trajectory_path == "brakes_on/seed_000.csv"
        assert (tmp_path / record.trajectory_path).exists()
        assert record.time_to_goal_s <= mini_hand_scenario.controller.timeout

    def test_experiment_with_comparison(self, mini_hand_scenario, tmp_path):
        result = run_experiment(mini_hand_scenario, ("brakes_on", "brakes_off"),
                                seeds=[0, 1], out_dir=tmp_path)
        assert set(result.arms) == {"brakes_on", "brakes_off"}
        assert result.comparison is not None
        assert 0.0 <= result.comparison["time_to_goal"]["p_value"] <= 1.0
        assert 0.0 <= result.comparison["final_error"]["p_value"] <= 1.0
        assert (tmp_path / "metrics.json").exists()
        assert (tmp_path / "brakes_off" / "seed_001.csv").exists()

    def test_metrics_json_identical_across_thread_counts(self, mini_hand_scenario,
                                                         tmp_path):
        serial = run_experiment(mini_hand_scenario, ("brakes_on", "brakes_off"),
                                seeds=[0, 1], out_dir=tmp_path / "serial",
                                threads=1)
        parallel = run_experiment(mini_hand_scenario, ("brakes_on", "brakes_off"),
                                  seeds=[0, 1], out_dir=tmp_path / "parallel",
                                  threads=2)
        a = (tmp_path / "serial" / "metrics.json").read_bytes()
        b = (tmp_path / "parallel" / "metrics.json").read_bytes()
        assert a == b
        assert serial.to_json() == parallel.to_json()

    def test_trajectory_csv_identical_across_thread_counts(self, mini_hand_scenario,
                                                           tmp_path):
        run_experiment(mini_hand_scenario, ("brakes_on",), seeds=[0],
                       out_dir=tmp_path / "serial", threads=1)
        run_experiment(mini_hand_scenario, ("brakes_on",), seeds=[0],
                       out_dir=tmp_path / "parallel", threads=2)
        a = (tmp_path / "serial" / "brakes_on" / "seed_000.csv").read_bytes()
        b = (tmp_path / "parallel" / "brakes_on" / "seed_000.csv").read_bytes()
        assert a == b

    def test_voting_scenario_rejected(self, chain10_scenario):
        with pytest.raises(ValueError, match="mppi"):
            run_hand_trial(chain10_scenario, brakes_on=True, seed=0)

    def test_plant_fault_marks_seed_failed(self, mini_hand_scenario):
        # An absurd contact stiffness blows the integrator up; the trial must
        # come back as a failed record carrying the diagnostic, not raise.
        exploding = dataclasses.replace(mini_hand_scenario.object_spec,
                                        contact_stiffness=1e12)
        scenario = dataclasses.replace(mini_hand_scenario, object_spec=exploding)
        record = run_hand_trial(scenario, brakes_on=True, seed=0)
        assert not record.success
        assert record.fault is not None
        assert "non-finite" in record.fault
        assert record.time_to_goal_s == scenario.controller.timeout

    def test_unknown_arm_rejected(self, mini_hand_scenario):
        with pytest.raises(ValueError, match="unknown arm"):
            run_experiment(mini_hand_scenario, ("brakes_maybe",), seeds=[0])


class TestChainWaypoints:
    def test_waypoint_run_summary(self, chain10_scenario, tmp_path):
        waypoints = [np.deg2rad([10, -10, 10, -10, 10, -10, 10, -10, 10, -10]),
                     np.zeros(10)]
        summary = run_chain_waypoints(chain10_scenario, waypoints,
                                      out_dir=tmp_path)
        assert summary["n_waypoints"] == 2
        assert summary["all_converged"]
        for entry in summary["waypoints"]:
            assert entry["max_error_deg"] <= 1.0
            assert entry["direction_changes"] <= 1
        assert (tmp_path / "waypoint_00.csv").exists()
        assert (tmp_path / "waypoint_01.csv").exists()
        data = json.loads((tmp_path / "summary.json").read_text())
        assert data["n_waypoints"] == 2
        assert "wall_time_s" in data["waypoints"][0]

    def test_waypoint_file_parsing(self, tmp_path):
        path = tmp_path / "targets.json"
        path.write_text("[[10, -10, 0], [0, 0, 0]]")
        waypoints = load_waypoints(path, 3)
        assert len(waypoints) == 2
        np.testing.assert_allclose(waypoints[0], np.deg2rad([10, -10, 0]))

    def test_waypoint_length_checked(self, tmp_path):
        path = tmp_path / "targets.json"
        path.write_text("[[10, -10]]")
        with pytest.raises(ValueError, match="3 angles"):
            load_waypoints(path, 3)

    def test_mppi_scenario_rejected(self, hand_scenario):
        with pytest.raises(ValueError, match="voting"):
            run_chain_waypoints(hand_scenario, [np.zeros(6)])
