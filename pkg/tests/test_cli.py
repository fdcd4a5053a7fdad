"""End-to-end runs through the command-line entry point."""

import json
import math
import shutil
import subprocess
import sys

import numpy as np
import pytest

from mnsflow.cli import main
from mnsflow.diagnostics import CSV_COLUMNS
from mnsflow.initial import abc_flow
from mnsflow.runner import ESTIMATE_COLUMNS
from mnsflow.spectral import Grid, inverse_transform
from mnsflow.storage import read_csv, read_snapshot


def write_config(path, out, **items):
    lines = [f"output_dir={out}"] + [f"{k}={v}" for k, v in items.items()]
    path.write_text("\n".join(lines) + "\n")
    return str(path)


def column(rows, name):
    i = CSV_COLUMNS.index(name)
    return np.array([float(r[i]) for r in rows])


@pytest.fixture(autouse=True)
def no_env_override(monkeypatch):
    monkeypatch.delenv("MNSFLOW_OUTPUT_DIR", raising=False)


class TestSimulate:
    def test_abc_decay_and_artifacts(self, tmp_path, capsys):
        out = tmp_path / "abc"
        cfg = write_config(tmp_path / "abc.cfg", out, model="mns", n=16, T=1.0, dt=0.01,
                           ic="abc:1,1,1", diag_every=10, snapshot_every=50)
        assert main(["-q", "simulate", "--config", cfg]) == 0
        assert "completed t=1" in capsys.readouterr().out

        final = read_snapshot(out / "final.mns")
        g = Grid(16)
        expected = math.exp(-1.0) * inverse_transform(g, abc_flow(g))
        assert final.t == 1.0
        assert np.linalg.norm(final.samples - expected) <= 1e-9 * np.linalg.norm(expected)

        header, rows = read_csv(out / "diagnostics.csv")
        assert header == list(CSV_COLUMNS)
        np.testing.assert_allclose(column(rows, "t"), np.linspace(0, 1, 11), atol=1e-14)
        assert (out / "snapshots" / "snap_00000050.mns").exists()
        assert (out / "snapshots" / "snap_00000050.json").exists()
        est_header, est_rows = read_csv(out / "estimates.csv")
        assert est_header == list(ESTIMATE_COLUMNS) and len(est_rows) == 44

        meta = json.loads((out / "metadata.json").read_text())
        assert meta["status"] == "completed" and meta["riesz_sign"] == 1
        assert "PCG64" in meta["generator"] and meta["steps"] == 100
        assert meta["config"]["model"] == "mns"

    def test_energy_decreases_tg64(self, tmp_path):
        out = tmp_path / "tg"
        cfg = write_config(tmp_path / "tg.cfg", out, model="mns", n=64, T=2.0, cfl=0.4,
                           dt_max=0.01, ic="taylor_green:1.0", diag_every=5)
        assert main(["-q", "simulate", "--config", cfg]) == 0
        _, rows = read_csv(out / "diagnostics.csv")
        e = column(rows, "E_half")
        assert column(rows, "t")[-1] == 2.0
        assert np.all(np.diff(e) < 0)

    def test_blowup(self, tmp_path, capsys):
        # a large Hall field with a fixed step far beyond stability diverges within a few steps
        out = tmp_path / "blow"
        cfg = write_config(tmp_path / "b.cfg", out, model="hall", n=16, T=1.0, dt=0.01,
                           ic="random:1,2,200.0")
        code = main(["-q", "simulate", "--config", cfg])
        assert code != 0
        assert "BLOW-UP" in capsys.readouterr().err
        assert (out / "last_good.mns").exists()
        good = read_snapshot(out / "last_good.mns")
        assert np.all(np.isfinite(good.samples))
        meta = json.loads((out / "metadata.json").read_text())
        assert meta["status"] == "blowup" and meta["blowup"]["t_good"] == good.t
        assert 0 < good.t < meta["blowup"]["t"] <= 1.0
        _, rows = read_csv(out / "diagnostics.csv")
        assert len(rows) >= 1 and float(rows[0][0]) == 0.0

    def test_immediate_blowup_threshold(self, tmp_path):
        out = tmp_path / "trip"
        cfg = write_config(tmp_path / "t.cfg", out, model="mns", n=16, T=1.0, dt=0.01,
                           ic="taylor_green", blowup_threshold=1e-9)
        assert main(["-q", "simulate", "--config", cfg]) == 3
        good = read_snapshot(out / "last_good.mns")
        assert good.t == 0.0
        meta = json.loads((out / "metadata.json").read_text())
        assert meta["blowup"]["initial_state"] is True

    def test_restart_reproduces(self, tmp_path):
        items = dict(model="mns", n=16, T=0.2, dt=0.01, ic="random:5,2,2.0", diag_every=2,
                     snapshot_every=10)
        full = tmp_path / "full"
        assert main(["-q", "simulate", "--config",
                     write_config(tmp_path / "a.cfg", full, **items)]) == 0

        # resume from the mid-run checkpoint inside a copy of the output
        # directory so the diagnostics file is continued in place
        part = tmp_path / "part"
        shutil.copytree(full, part)
        (part / "final.mns").unlink()
        cfg = write_config(tmp_path / "b.cfg", part, **items)
        snap = part / "snapshots" / "snap_00000010.mns"
        assert main(["-q", "simulate", "--config", cfg, "--restart", str(snap)]) == 0

        assert (part / "final.mns").read_bytes() == (full / "final.mns").read_bytes()
        assert read_csv(part / "diagnostics.csv") == read_csv(full / "diagnostics.csv")

    def test_restart_mismatch(self, tmp_path, capsys):
        out = tmp_path / "r"
        items = dict(model="mns", n=16, T=0.02, dt=0.01, ic="taylor_green")
        assert main(["-q", "simulate", "--config", write_config(tmp_path / "a.cfg", out,
                                                                **items)]) == 0
        items["model"] = "hall"
        cfg = write_config(tmp_path / "b.cfg", tmp_path / "r2", **items)
        assert main(["-q", "simulate", "--config", cfg, "--restart",
                     str(out / "final.mns")]) == 2
        assert "model mismatch" in capsys.readouterr().err

    def test_config_errors(self, tmp_path, capsys):
        p = tmp_path / "bad.cfg"
        p.write_text("modle=mns\n")
        assert main(["simulate", "--config", str(p)]) == 2
        assert "unknown key 'modle'" in capsys.readouterr().err
        assert main(["simulate", "--config", str(tmp_path / "missing.cfg")]) == 2


class TestOtherCommands:
    def test_verify(self, capsys):
        assert main(["-q", "verify", "--n", "8", "--count", "5"]) == 0
        out = capsys.readouterr().out
        assert "FAIL" not in out and "checks passed" in out

    def test_convergence(self, tmp_path, capsys):
        out = tmp_path / "conv"
        cfg = write_config(tmp_path / "c.cfg", out, model="mns", n=16, T=0.5, dt=0.05,
                           ic="taylor_green")
        assert main(["-q", "convergence", "--config", cfg, "--halvings", "3"]) == 0
        text = capsys.readouterr().out
        assert "order" in text
        header, rows = read_csv(out / "convergence.csv")
        assert header == ["dt", "steps", "rel_diff", "order"]
        orders = [float(r[3]) for r in rows[:2]]
        assert all(o >= 3.7 for o in orders)

    def test_convergence_needs_dt(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.cfg", tmp_path / "o", model="mns", n=16, T=0.5,
                           ic="taylor_green")
        assert main(["-q", "convergence", "--config", cfg, "--halvings", "3"]) == 2
        assert "fixed dt" in capsys.readouterr().err

    def test_boost(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.cfg", tmp_path / "o", model="mns", n=16, T=1.0,
                           ic="random:3,2,1.0")
        assert main(["-q", "boost", "--config", cfg, "--velocity", "1,0.5,0"]) == 0
        lines = capsys.readouterr().out.splitlines()
        values = dict(line.split() for line in lines[1:])
        assert float(values["ns_rotational"]) <= 1e-13
        assert float(values["mns"]) > 0.1

    def test_boost_bad_velocity(self, tmp_path):
        cfg = write_config(tmp_path / "c.cfg", tmp_path / "o", model="mns", n=16, T=1.0,
                           ic="taylor_green")
        assert main(["-q", "boost", "--config", cfg, "--velocity", "1,2"]) == 2

    def test_console_script(self):
        proc = subprocess.run([sys.executable, "-m", "mnsflow.cli", "--help"],
                              capture_output=True, text=True, check=False)
        assert proc.returncode == 0
        for command in ("simulate", "verify", "convergence", "boost"):
            assert command in proc.stdout
