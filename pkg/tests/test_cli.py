import csv
import gzip
import json
import shutil
import subprocess

import numpy as np
import pytest

from qlyapunov.cli import main
from qlyapunov.config import ConfigError, config_from_dict, load_config, parse_target


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, (json.loads(out.out) if code == 0 else None), out.err


class TestCheck:
    @pytest.mark.parametrize("preset,sr,fc", [
        ("example3-qutrit", False, True),
        ("twoqubit-ising", False, False),
        ("twoqubit-ideal", True, True),
        ("qutrit-ideal", True, True),
    ])
    def test_presets(self, capsys, tmp_path, preset, sr, fc):
        code, rep, _ = run(capsys, "check", "--preset", preset, "--out", str(tmp_path))
        assert code == 0
        assert (rep["strongly_regular"], rep["fully_connected"]) == (sr, fc)
        assert rep["ideal"] == (sr and fc)
        assert json.loads((tmp_path / "check.json").read_text()) == rep

    def test_witnesses_are_one_based(self, capsys):
        _, rep, _ = run(capsys, "check", "--preset", "example3-qutrit", "--no-write")
        # omega_12 == omega_23 for equally spaced levels
        wit = rep["strongly_regular_witness"]
        assert wit["kind"] == "coincident" and abs(wit["omega"]) == pytest.approx(1.0)
        assert sorted(wit["pairs"]) == [[1, 2], [2, 3]]

    def test_bell_target_is_exceptional(self, capsys):
        _, rep, _ = run(capsys, "check", "--preset", "twoqubit-ideal", "--target", "bell", "--no-write")
        assert rep["spectrum"]["class"] == "pure"
        assert rep["pseudo_pure"]["exceptional"] is True
        assert rep["target_stationary"] is False

    def test_generic_target_counts(self, capsys):
        _, rep, _ = run(capsys, "check", "--preset", "qutrit-ideal", "--target", "diag:0.5,0.3,0.2",
                        "--no-write")
        assert rep["spectrum"]["class"] == "generic"
        assert rep["stationary_count"] == 6 and rep["flag_manifold_dim"] == 6
        assert rep["pseudo_pure"] is None


class TestCensus:
    def test_twoqubit_table(self, capsys, tmp_path):
        code, rep, _ = run(capsys, "census", "--preset", "twoqubit-ideal", "--out", str(tmp_path))
        assert code == 0
        assert rep["n_stationary"] == 6 and rep["n_sinks"] == 1
        verdicts = sorted(r["verdict"] for r in rep["rows"])
        assert verdicts == ["center_with_unstable"] * 4 + ["hyperbolic_sink", "hyperbolic_source"]
        with open(tmp_path / "census.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 6
        assert rows[0]["verdict"] == "hyperbolic_sink" and rows[0]["hessian_plus"] == "8"

    def test_non_stationary_target_fails(self, capsys):
        code, _, err = run(capsys, "census", "--preset", "twoqubit-ideal", "--target", "bell", "--no-write")
        assert code == 1 and "stationary" in err


class TestSimulate:
    ARGS = ("simulate", "--preset", "qutrit-ideal", "--target", "diag:0.6,0.3,0.1",
            "--samples", "3", "--t-final", "40", "--seed", "5")

    def test_deterministic_output(self, capsys, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run(capsys, *self.ARGS, "--out", str(a))[0] == 0
        assert run(capsys, *self.ARGS, "--out", str(b))[0] == 0
        assert (a / "simulate_trajectories.csv").read_bytes() == (b / "simulate_trajectories.csv").read_bytes()
        assert (a / "simulate_summary.json").read_bytes() == (b / "simulate_summary.json").read_bytes()

    def test_summary_and_csv_contents(self, capsys, tmp_path):
        code, rep, _ = run(capsys, *self.ARGS, "--out", str(tmp_path))
        assert code == 0 and "samples" not in rep
        assert sum(rep["counts"].values()) == rep["n_samples"] == 3
        summary = json.loads((tmp_path / "simulate_summary.json").read_text())
        assert [s["sample_id"] for s in summary["samples"]] == [0, 1, 2]
        with open(tmp_path / "simulate_trajectories.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert list(rows[0]) == ["sample_id", "t", "V", "f"]
        for sid in "012":
            v = np.array([float(r["V"]) for r in rows if r["sample_id"] == sid])
            assert len(v) > 10
            assert np.all(np.diff(v) <= 1e-10)

    def test_gzip_and_plot(self, capsys, tmp_path):
        code, rep, _ = run(capsys, *self.ARGS, "--out", str(tmp_path), "--gzip", "--plot")
        assert code == 0
        with gzip.open(tmp_path / "simulate_trajectories.csv.gz", "rt") as fh:
            assert fh.readline().strip() == "sample_id,t,V,f"
        png = tmp_path / "simulate_V.png"
        assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
        assert rep["files"]["figure"] == "simulate_V.png"

    def test_no_write(self, capsys, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        assert run(capsys, *self.ARGS, "--no-write")[0] == 0
        assert list(tmp_path.iterdir()) == []


def test_track_bell_reports_exceptional(capsys):
    code, rep, _ = run(capsys, "track", "--preset", "twoqubit-ideal", "--target", "bell",
                       "--samples", "2", "--t-final", "20", "--no-write")
    assert code == 0
    assert rep["exceptionality"]["exceptional"] is True
    assert 0.0 <= rep["stalled_fraction"] <= 1.0


class TestConfigErrors:
    @pytest.mark.parametrize("argv,key", [
        (["--preset", "qutrit-ideal", "--target", "diag:0.5,0.5"], "--target"),
        (["--preset", "qutrit-ideal", "--target", "diag:1,x,0"], "--target"),
        (["--preset", "qutrit-ideal", "--samples", "0"], "--samples"),
        (["--preset", "qutrit-ideal", "--t-final", "-1"], "--t-final"),
        ([], "--config"),
    ])
    def test_cli_errors(self, capsys, argv, key):
        code, _, err = run(capsys, "simulate", *argv, "--no-write")
        assert code == 2 and key in err

    def test_file_errors_name_the_key(self, capsys, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text('[model]\nH0 = [[0, 0], [0, 1]]\nH1 = [[0, 1], [2, 0]]\n[target]\ndiag = [1, 0]\n')
        code, _, err = run(capsys, "check", "--config", str(bad))
        assert code == 2 and "model.H1" in err

    @pytest.mark.parametrize("table,key", [
        ({"preset": "nope"}, "preset"),
        ({"preset": "qutrit-ideal", "experiment": {"samples": "ten"}}, "experiment.samples"),
        ({"preset": "qutrit-ideal", "target": {"diag": [0.5, 0.6, -0.1]}}, "target.diag"),
        ({"preset": "qutrit-ideal", "target": {"diag": [1, 0, 0], "ket": [1, 0, 0]}}, "target"),
    ])
    def test_dict_errors(self, table, key):
        with pytest.raises(ConfigError) as info:
            config_from_dict(table)
        assert info.value.key == key

    def test_toml_round_trip(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text('preset = "twoqubit-ideal"\n[target]\nket = [1, 0, 0, 2]\n'
                        '[experiment]\nsamples = 7\n[integrator]\nt_final = 12.5\n'
                        '[output]\ndir = "out"\ngzip = true\n')
        cfg = load_config(path)
        assert cfg.samples == 7 and cfg.integrator.t_final == 12.5 and cfg.gzip
        assert np.allclose(cfg.rho_d0, parse_target("ket:1,0,0,2"))
        assert cfg.rho_d0[3, 3].real == pytest.approx(0.8)


@pytest.mark.skipif(shutil.which("qlyapunov") is None, reason="console script not installed")
def test_console_script():
    proc = subprocess.run(["qlyapunov", "check", "--preset", "qutrit-ideal", "--no-write"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and json.loads(proc.stdout)["ideal"] is True
