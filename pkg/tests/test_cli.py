import csv
import json
import subprocess
import sys

import pytest

from casimir_rabi.cli import ConfigError, figure_config, load_config, main, resolve, run

SPECTRUM = """
[experiment]
kind = spectrum
[model]
g = 1e-3
"""

TRAJ = """
[experiment]
kind = trajectories
[model]
g = 0.01
gamma_a = 1e-3
gamma_b = 1e-3
[space]
n_cav = 4
n_mech = 5
[trajectories]
n_traj = 6
master_seed = 7
t_final = 2000
dt = 1.0
record_every = 50
"""


def write(tmp_path, text, name="cfg.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestConfig:
    def test_missing_g_names_field(self, tmp_path, capsys):
        path = write(tmp_path, "[experiment]\nkind = spectrum\n[model]\ngamma_a = 0\n")
        assert main(["run", str(path), "--out", str(tmp_path / "o")]) == 2
        assert "[model] g" in capsys.readouterr().err

    def test_unknown_field(self):
        with pytest.raises(ConfigError, match=r"\[model\] coupling"):
            load_config("[experiment]\nkind = spectrum\n[model]\ng = 1e-3\ncoupling = 2\n")

    def test_unknown_kind(self):
        with pytest.raises(ConfigError, match="unknown kind"):
            load_config("[experiment]\nkind = plot\n[model]\ng = 1e-3\n")

    def test_unparseable_value(self):
        with pytest.raises(ConfigError, match="cannot parse"):
            load_config("[experiment]\nkind = spectrum\n[model]\ng = small\n")

    def test_negative_coupling(self):
        with pytest.raises(ConfigError):
            resolve(load_config("[experiment]\nkind = spectrum\n[model]\ng = -1e-3\n"))

    def test_resolve_fills_defaults(self):
        cfg = resolve(load_config(TRAJ.replace("t_final = 2000\ndt = 1.0\n", "")), seed=3)
        tr = cfg["trajectories"]
        assert tr["t_final"] == pytest.approx(5000.0)
        assert tr["dt"] > 0 and tr["master_seed"] == 3
        assert cfg["model"]["omega_c"] == pytest.approx(1.5 + 10.5e-4)
        assert "qfi" not in cfg

    def test_shipped_configs_parse(self):
        for fid in ("2", "3", "4", "5", "6", "7", "9"):
            text = figure_config(fid)
            assert text.startswith("# All frequencies and rates")
            resolve(load_config(text))

    def test_unknown_figure(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["reproduce", "8"])
        assert exc.value.code == 2
        with pytest.raises(KeyError):
            figure_config("8")


class TestRun:
    def test_spectrum_outputs(self, tmp_path):
        out = tmp_path / "spec"
        m = run(SPECTRUM, out)
        rows = list(csv.reader(open(out / "spectrum.csv")))
        assert len(rows) == 202 and len(rows[0]) == 13
        assert {"spectrum.csv", "summary.json", "resolved_config.ini", "manifest.json"} <= set(m["outputs"])
        assert all(c["pass"] for c in m["checks"])

    def test_manifest_contents(self, tmp_path):
        m = run(TRAJ, tmp_path / "t", command="run x")
        on_disk = json.load(open(tmp_path / "t" / "manifest.json"))
        assert on_disk["master_seed"] == 7
        assert on_disk["rng"].startswith("numpy PCG64")
        for key in ("version", "python", "numpy", "scipy", "wall_time_s", "leakage", "config", "command"):
            assert key in on_disk
        assert on_disk["outputs"] == m["outputs"]

    def test_outputs_stay_in_out_dir(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        run(TRAJ, tmp_path / "a" / "b")
        assert sorted(p.name for p in tmp_path.iterdir()) == ["a"]
        files = {p.name for p in (tmp_path / "a" / "b").iterdir()}
        assert "trajectories.jsonl" in files and "trajectory_0000.csv" in files

    def test_trajectories_reproducible(self, tmp_path):
        run(TRAJ, tmp_path / "1")
        run(TRAJ, tmp_path / "2", workers=2)
        assert (tmp_path / "1" / "trajectories.jsonl").read_bytes() == (tmp_path / "2" / "trajectories.jsonl").read_bytes()

    def test_seed_override(self, tmp_path):
        run(TRAJ, tmp_path / "1", seed=8)
        run(TRAJ, tmp_path / "2")
        a = (tmp_path / "1" / "trajectories.jsonl").read_text().splitlines()
        b = (tmp_path / "2" / "trajectories.jsonl").read_text().splitlines()
        assert json.loads(a[0])["master_seed"] == 8
        assert a != b

    def test_numerical_error_exit_code(self, tmp_path, capsys):
        bad = TRAJ.replace("dt = 1.0", "dt = 500.0").replace("gamma_a = 1e-3", "gamma_a = 1.0")
        path = write(tmp_path, bad)
        assert main(["run", str(path), "--out", str(tmp_path / "o")]) == 3
        assert "dt too large" in capsys.readouterr().err

    def test_module_entry_point(self, tmp_path):
        path = write(tmp_path, SPECTRUM)
        res = subprocess.run([sys.executable, "-m", "casimir_rabi", "run", str(path), "--out", str(tmp_path / "o")],
                             capture_output=True, text=True, check=True)
        assert "PASS  crossing location" in res.stdout
        assert (tmp_path / "o" / "manifest.json").exists()
