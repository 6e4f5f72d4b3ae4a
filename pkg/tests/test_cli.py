"""Command-line surface, exercised through main() with captured IO."""

import csv
import io
import json
import shutil
import subprocess

import pytest

from rgsbeam import cli

SCENARIO_TOML = """\
rrh_count = 3
antennas_per_rrh = 2
group_sizes = [2]
error_radius = 0.05
sinr_db_list = [4.0]
fronthaul_power_watts = 5.6
eta = 0.25
p_max_watts = 10.0
trials = 1
seed = 7
"""

SCENARIO_DICT = {
    "rrh_count": 3,
    "antennas_per_rrh": 2,
    "group_sizes": [2],
    "error_radius": 0.05,
    "sinr_db_list": [4.0],
    "fronthaul_power_watts": 5.6,
    "eta": 0.25,
    "p_max_watts": 10.0,
    "trials": 1,
    "seed": 7,
}


@pytest.fixture()
def config_file(tmp_path):
    path = tmp_path / "scenario.toml"
    path.write_text(SCENARIO_TOML)
    return path


class TestArgumentParsing:
    def test_requires_a_subcommand(self):
        with pytest.raises(SystemExit):
            cli.main([])

    def test_unknown_method_flag_value(self, config_file):
        with pytest.raises(ValueError, match="unknown method"):
            cli.main(["run", str(config_file), "--methods", "sorcery"])


class TestRun:
    def test_writes_csvs_and_prints_table(self, config_file, tmp_path, capsys):
        out_dir = tmp_path / "out"
        rc = cli.main([
            "run", str(config_file), "--methods", "coordinated",
            "--out-dir", str(out_dir),
        ])
        assert rc == 0
        printed = capsys.readouterr().out
        assert "coordinated" in printed
        assert (out_dir / "summary.csv").exists()
        assert (out_dir / "trials.csv").exists()

    def test_env_var_supplies_out_dir(self, config_file, tmp_path, monkeypatch,
                                      capsys):
        target = tmp_path / "from-env"
        monkeypatch.setenv(cli.ENV_OUT_DIR, str(target))
        rc = cli.main(["run", str(config_file), "--methods", "coordinated"])
        capsys.readouterr()
        assert rc == 0
        assert (target / "summary.csv").exists()

    def test_seed_and_trials_override(self, config_file, tmp_path, capsys):
        out_dir = tmp_path / "o"
        rc = cli.main([
            "run", str(config_file), "--methods", "coordinated",
            "--trials", "2", "--seed", "50", "--out-dir", str(out_dir),
        ])
        capsys.readouterr()
        assert rc == 0
        with open(out_dir / "trials.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert [int(r["seed"]) for r in rows] == [50, 51]


class TestValidate:
    def test_quick_exit_zero(self, capsys):
        rc = cli.main(["validate", "--level", "quick"])
        printed = capsys.readouterr().out
        assert rc == 0
        assert "result: PASS" in printed

    def test_tampered_exit_nonzero(self, capsys):
        rc = cli.main(["validate", "--cone-tol", "0.1"])
        printed = capsys.readouterr().out
        assert rc == 1
        assert "result: FAIL" in printed


class TestSolve:
    def test_writes_report_json(self, tmp_path, capsys):
        payload = {"scenario": SCENARIO_DICT, "seed": 11}
        src = tmp_path / "instance.json"
        src.write_text(json.dumps(payload))
        dst = tmp_path / "result.json"
        rc = cli.main([
            "solve", str(src), "--method", "coordinated", "--out", str(dst),
        ])
        capsys.readouterr()
        assert rc == 0
        report = json.loads(dst.read_text())
        assert report["feasible"] is True
        assert report["active_rrhs"] == [0, 1, 2]
        beams = report["beamformers"]
        assert len(beams["re"]) == 1  # one multicast group
        assert len(beams["re"][0]) == 6

    def test_reads_stdin_and_prints(self, monkeypatch, capsys):
        payload = {"scenario": SCENARIO_DICT, "seed": 11}
        monkeypatch.setattr("sys.stdin", io.StringIO(json.dumps(payload)))
        rc = cli.main(["solve", "-", "--method", "coordinated"])
        report = json.loads(capsys.readouterr().out)
        assert rc == 0
        assert report["feasible"] is True

    def test_infeasible_instance_exit_code(self, tmp_path, capsys):
        scenario = dict(SCENARIO_DICT, sinr_db_list=[60.0], p_max_watts=1e-3)
        src = tmp_path / "bad.json"
        src.write_text(json.dumps({"scenario": scenario}))
        rc = cli.main(["solve", str(src), "--method", "coordinated"])
        report = json.loads(capsys.readouterr().out)
        assert rc == 1
        assert report["feasible"] is False

    def test_channel_override(self, tmp_path, capsys):
        h = [[1.0, 0, 0, 0, 0, 0], [0, 1.0, 0, 0, 0, 0]]
        payload = {
            "scenario": SCENARIO_DICT,
            "h_hat": {"re": h, "im": [[0.0] * 6, [0.0] * 6]},
        }
        src = tmp_path / "fixed.json"
        src.write_text(json.dumps(payload))
        rc = cli.main(["solve", str(src), "--method", "coordinated"])
        report = json.loads(capsys.readouterr().out)
        assert rc == 0
        assert report["feasible"] is True

    def test_channel_override_shape_checked(self, tmp_path):
        payload = {
            "scenario": SCENARIO_DICT,
            "h_hat": {"re": [[1.0, 2.0]], "im": [[0.0, 0.0]]},
        }
        src = tmp_path / "short.json"
        src.write_text(json.dumps(payload))
        with pytest.raises(ValueError, match="h_hat shape"):
            cli.main(["solve", str(src), "--method", "coordinated"])

    def test_csv_export(self, tmp_path, capsys):
        payload = {"scenario": SCENARIO_DICT, "seed": 11}
        src = tmp_path / "instance.json"
        src.write_text(json.dumps(payload))
        csv_path = tmp_path / "beams.csv"
        rc = cli.main([
            "solve", str(src), "--method", "coordinated",
            "--csv", str(csv_path),
        ])
        capsys.readouterr()
        assert rc == 0
        header = csv_path.read_text().splitlines()[0]
        assert header == "record,l,m,antenna,re,im"


class TestTrace:
    def test_writes_trace_csv(self, config_file, tmp_path, capsys):
        rc = cli.main([
            "trace", str(config_file), "--instances", "1",
            "--out-dir", str(tmp_path / "tr"),
        ])
        printed = capsys.readouterr().out
        assert rc == 0
        assert "instances converged" in printed
        assert (tmp_path / "tr" / "traces.csv").exists()


@pytest.mark.skipif(shutil.which("rgsbeam") is None,
                    reason="console script not on PATH")
def test_console_script_help():
    proc = subprocess.run(
        ["rgsbeam", "--help"], capture_output=True, text=True, timeout=60
    )
    assert proc.returncode == 0
    for sub in ("run", "validate", "solve", "trace"):
        assert sub in proc.stdout
