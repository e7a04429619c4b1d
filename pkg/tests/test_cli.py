import csv
import hashlib
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from dotflux import cli, units
from dotflux.config import ConfigError, RunConfig, initial_state_vector

BASE = {
    "model": "singledot",
    "coupling_factor": 0.05,
    "bandwidth": 0.01,
    "mu1_mev": 40.0,
    "mu2_mev": 0.0,
    "temperature_k": 2.0,
    "grid": {"horizon_ns": 0.012},
}


def write_config(tmp_path, name="cfg.json", **overrides):
    raw = dict(BASE)
    raw.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(raw))
    return path


def run_cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "dotflux.cli", *args],
        capture_output=True,
        text=True,
    )


def file_hash(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return rows


class TestConfig:
    def test_unknown_field_rejected(self):
        with pytest.raises(ConfigError, match="unknown config fields"):
            RunConfig.from_dict({"bogus": 1})

    def test_unknown_model_rejected(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"model": "tripledot"})

    def test_three_axes_rejected(self):
        axes = [{"name": "mu1_mev", "values": [1]}] * 3
        with pytest.raises(ConfigError, match="two sweep axes"):
            RunConfig.from_dict({"sweep": axes})

    def test_axis_linspace(self):
        cfg = RunConfig.from_dict(
            {"sweep": [{"name": "bandwidth", "min": 0.1, "max": 0.2, "count": 3}]}
        )
        assert cfg.sweep[0].values == pytest.approx([0.1, 0.15, 0.2])

    def test_initial_state_parsing(self):
        cfg = RunConfig.from_dict({"model": "twodot", "initial_state": "basis_7"})
        v = initial_state_vector(cfg)
        assert v[3] == 1.0
        cfg2 = RunConfig.from_dict({"model": "spindeg", "initial_state": [0, 0.5, 0.5, 0]})
        rho = initial_state_vector(cfg2)
        assert np.trace(rho).real == pytest.approx(1.0)
        with pytest.raises(ConfigError):
            initial_state_vector(
                RunConfig.from_dict({"model": "twodot", "initial_state": "basis_9"})
            )


class TestRunCommand:
    def test_outputs_and_determinism(self, tmp_path):
        cfg = write_config(tmp_path, out_dir=str(tmp_path / "out"))
        r1 = run_cli("run", str(cfg))
        assert r1.returncode == 0, r1.stderr
        hashes1 = {
            name: file_hash(tmp_path / "out" / name)
            for name in ("timeseries.csv", "coefficients.csv", "manifest.json")
        }
        r2 = run_cli("run", str(cfg))
        assert r2.returncode == 0
        for name, h in hashes1.items():
            assert file_hash(tmp_path / "out" / name) == h

    def test_timeseries_schema_and_physics(self, tmp_path):
        cfg = write_config(tmp_path, out_dir=str(tmp_path / "out"))
        assert run_cli("run", str(cfg)).returncode == 0
        rows = read_csv(tmp_path / "out" / "timeseries.csv")
        assert list(rows[0]) == [
            "t_ns", "rho00", "rho11", "i_1d_na", "i_d2_na", "delta_i_na", "i_avg_na",
        ]
        first, last = rows[0], rows[-1]
        assert float(first["i_1d_na"]) == 0.0
        trace = float(last["rho00"]) + float(last["rho11"])
        assert trace == pytest.approx(1.0, abs=1e-8)
        man = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert man["schema_version"] == cli.SCHEMA_VERSION
        assert man["convergence"]["steady"]["converged"] is True

    def test_manifest_unit_round_trip(self, tmp_path):
        cfg = write_config(tmp_path, out_dir=str(tmp_path / "out"))
        assert run_cli("run", str(cfg)).returncode == 0
        man = json.loads((tmp_path / "out" / "manifest.json").read_text())
        mu1 = man["resolved"]["mu1_radns"]
        assert units.radns_to_mev(mu1) == pytest.approx(
            man["config"]["mu1_mev"], rel=1e-12
        )
        omega = man["resolved"]["dot_frequency_radns"]
        assert units.radns_to_mev(omega) == pytest.approx(
            man["config"]["dot_energy_mev"], rel=1e-12
        )

    def test_zero_coupling_currents_vanish(self, tmp_path):
        cfg = write_config(
            tmp_path,
            out_dir=str(tmp_path / "out"),
            coupling_factor=1e-9,
            grid={"horizon_ns": 0.002},
        )
        assert run_cli("run", str(cfg)).returncode == 0
        rows = read_csv(tmp_path / "out" / "timeseries.csv")
        for row in rows[:: max(1, len(rows) // 20)]:
            assert abs(float(row["i_avg_na"])) < 1e-12

    def test_config_error_exit_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"model": "nope"}))
        assert run_cli("run", str(bad)).returncode == 2
        missing = run_cli("run", str(tmp_path / "absent.json"))
        assert missing.returncode == 2

    def test_steady_only_unconverged_exit_4(self, tmp_path):
        cfg = write_config(
            tmp_path,
            out_dir=str(tmp_path / "out4"),
            steady={"rel_tol": 0.0, "balance_tol": 0.0},
        )
        r = run_cli("run", str(cfg), "--steady-only")
        assert r.returncode == 4
        assert not (tmp_path / "out4" / "timeseries.csv").exists()
        assert (tmp_path / "out4" / "manifest.json").exists()

    def test_model_override_flag(self, tmp_path):
        cfg = write_config(
            tmp_path,
            out_dir=str(tmp_path / "out_ov"),
            coupling_factor=0.014,
            bandwidth=0.1,
            coulomb_mev=5.0,
        )
        r = run_cli("run", str(cfg), "--model", "spindeg")
        assert r.returncode == 0, r.stderr
        rows = read_csv(tmp_path / "out_ov" / "timeseries.csv")
        assert "rho_dd" in rows[0]

    def test_oracle_check_appends_columns(self, tmp_path):
        cfg = write_config(
            tmp_path,
            out_dir=str(tmp_path / "oc"),
            grid={"horizon_ns": 0.004},
        )
        r = run_cli("run", str(cfg), "--oracle-check")
        assert r.returncode == 0, r.stderr
        rows = read_csv(tmp_path / "oc" / "timeseries.csv")
        assert "oracle_trace_distance" in rows[0]
        man = json.loads((tmp_path / "oc" / "manifest.json").read_text())
        assert man["oracle_check"]["max_trace_distance"] < 5e-3


class TestSweepCommand:
    def test_degenerate_sweep_matches_run(self, tmp_path):
        run_dir, sweep_dir = tmp_path / "r", tmp_path / "s"
        cfg_run = write_config(tmp_path, "run.json", out_dir=str(run_dir))
        cfg_sweep = write_config(
            tmp_path,
            "sweep.json",
            out_dir=str(sweep_dir),
            sweep=[{"name": "mu1_mev", "values": [40.0]}],
        )
        assert run_cli("run", str(cfg_run)).returncode == 0
        assert run_cli("sweep", str(cfg_sweep)).returncode == 0
        man = json.loads((run_dir / "manifest.json").read_text())
        rows = read_csv(sweep_dir / "sweep.csv")
        assert len(rows) == 1
        assert float(rows[0]["i_st_na"]) == pytest.approx(
            man["convergence"]["steady"]["steady_value"], rel=1e-12
        )

    def test_parallel_matches_serial(self, tmp_path):
        cfg1 = write_config(
            tmp_path, "s1.json", out_dir=str(tmp_path / "s1"),
            sweep=[{"name": "mu1_mev", "values": [35.0, 40.0]}],
        )
        cfg2 = write_config(
            tmp_path, "s2.json", out_dir=str(tmp_path / "s2"),
            sweep=[{"name": "mu1_mev", "values": [35.0, 40.0]}],
        )
        assert run_cli("sweep", str(cfg1)).returncode == 0
        assert run_cli("sweep", str(cfg2), "--workers", "2").returncode == 0
        assert file_hash(tmp_path / "s1" / "sweep.csv") == file_hash(
            tmp_path / "s2" / "sweep.csv"
        )

    def test_per_point_failures_recorded(self, tmp_path):
        cfg = write_config(
            tmp_path, "sf.json", out_dir=str(tmp_path / "sf"),
            sweep=[{"name": "temperature_k", "values": [2.0, -1.0]}],
        )
        assert run_cli("sweep", str(cfg)).returncode == 0
        rows = read_csv(tmp_path / "sf" / "sweep.csv")
        assert rows[0]["error"] == ""
        assert rows[1]["error"] != ""
        assert rows[1]["converged"] == "false"
