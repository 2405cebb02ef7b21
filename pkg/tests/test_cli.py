import json

import pytest

from brakesim.cli import main


class TestBrakeMetrics:
    def test_stdout_table(self, capsys):
        assert main(["brake-metrics", "--stacks", "3"]) == 0
        out = capsys.readouterr().out
        lines = out.strip().splitlines()
        assert lines[0].startswith("num_stacks,")
        assert len(lines) == 4

    def test_writes_file(self, tmp_path, capsys):
        assert main(["brake-metrics", "--stacks", "2",
                     "--out", str(tmp_path)]) == 0
        assert (tmp_path / "brake_metrics.csv").exists()


class TestRunChain:
    def test_single_waypoint(self, tmp_path, capsys):
        targets = tmp_path / "targets.json"
        targets.write_text(json.dumps([[8, -8, 8, -8, 8, -8, 8, -8, 8, -8]]))
        code = main(["run-chain", "--targets", str(targets),
                     "--out", str(tmp_path / "run")])
        assert code == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["all_converged"]
        assert (tmp_path / "run" / "waypoint_00.csv").exists()
        assert (tmp_path / "run" / "summary.json").exists()

    def test_bad_targets_file(self, tmp_path, capsys):
        targets = tmp_path / "targets.json"
        targets.write_text("[[1, 2]]")
        assert main(["run-chain", "--targets", str(targets)]) == 2


class TestRunHand:
    def test_one_seed_off(self, mini_hand_scenario_path, tmp_path, capsys):
        code = main(["run-hand", "--scenario", str(mini_hand_scenario_path),
                     "--brakes", "off", "--seeds", "1",
                     "--out", str(tmp_path)])
        assert code == 0
        metrics = json.loads((tmp_path / "metrics.json").read_text())
        assert "brakes_off" in metrics["arms"]
        records = metrics["arms"]["brakes_off"]["records"]
        assert len(records) == 1
        assert (tmp_path / records[0]["trajectory_path"]).exists()

    def test_brakes_flag_required(self, mini_hand_scenario_path, capsys):
        with pytest.raises(SystemExit):
            main(["run-hand", "--scenario", str(mini_hand_scenario_path)])


class TestCompare:
    def test_comparison_output(self, mini_hand_scenario_path, tmp_path, capsys):
        code = main(["compare", "--scenario", str(mini_hand_scenario_path),
                     "--seeds", "2", "--out", str(tmp_path)])
        assert code == 0
        metrics = json.loads((tmp_path / "metrics.json").read_text())
        assert set(metrics["arms"]) == {"brakes_on", "brakes_off"}
        assert "p_value" in metrics["comparison"]["time_to_goal"]
        assert "p_value" in metrics["comparison"]["final_error"]

    def test_byte_identical_across_threads(self, mini_hand_scenario_path,
                                           tmp_path, capsys):
        for threads, name in ((1, "a"), (2, "b")):
            code = main(["compare", "--scenario", str(mini_hand_scenario_path),
                         "--seeds", "2", "--threads", str(threads),
                         "--out", str(tmp_path / name)])
            assert code == 0
        a = (tmp_path / "a" / "metrics.json").read_bytes()
        b = (tmp_path / "b" / "metrics.json").read_bytes()
        assert a == b

    def test_seed_flag_changes_seeds(self, mini_hand_scenario_path, tmp_path,
                                     capsys):
        code = main(["compare", "--scenario", str(mini_hand_scenario_path),
                     "--seeds", "1", "--seed", "7", "--out", str(tmp_path)])
        assert code == 0
        metrics = json.loads((tmp_path / "metrics.json").read_text())
        assert metrics["seeds"] == [7]


class TestErrors:
    def test_missing_scenario_exits_2(self, capsys):
        assert main(["run-hand", "--scenario", "/no/such.json",
                     "--brakes", "on"]) == 2
        assert "error:" in capsys.readouterr().err

    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit):
            main(["frobnicate"])
