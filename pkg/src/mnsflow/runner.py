"""Run orchestration: build the state, integrate, write every artifact.

Output directory layout::

    diagnostics.csv          one row per record, fixed column order
    estimates.csv            both sides of each energy estimate per record
    metadata.json            parameters, Riesz sign, generator, versions, outcome
    final.mns / final.json   final state and its checkpoint sidecar
    snapshots/snap_*.mns     periodic checkpoints (with .json sidecars)
    last_good.mns            written only when a run blows up
"""

import json
import logging
import math
import os
import platform
import time
from dataclasses import dataclass

import numpy as np

import mnsflow
from mnsflow import _fft
from mnsflow.config import RunConfig
from mnsflow.diagnostics import CSV_COLUMNS, EnergyBudget, estimate_monitors
from mnsflow.initial import GENERATOR
from mnsflow.integrator import BlowUp, StepControls, canonicalize, integrate
from mnsflow.models import require_solenoidal, rhs_nonstiff
from mnsflow.spectral import Grid, l2_norm
from mnsflow.storage import (
    SnapshotError,
    format_float,
    read_csv,
    read_sidecar,
    read_snapshot,
    sidecar_path,
    write_csv,
    write_sidecar,
    write_snapshot,
)

__all__ = [
    "RunOutcome",
    "ConvergenceRow",
    "controls_for",
    "convergence_study",
    "load_restart",
    "run",
    "EXIT_OK",
    "EXIT_BLOWUP",
]

log = logging.getLogger("mnsflow")

EXIT_OK = 0
EXIT_BLOWUP = 3

ESTIMATE_COLUMNS = ("t", "inequality", "lhs", "log_rhs", "ratio", "holds")


@dataclass
class RunOutcome:
    exit_code: int
    state: np.ndarray
    t: float
    step: int
    records: list
    output_dir: str
    blowup: BlowUp = None


def controls_for(config):
    return StepControls(T=config.T, dt=config.dt, cfl=config.cfl, dt_max=config.dt_max,
                        blowup_threshold=config.blowup_threshold)


def load_restart(config, grid, path):
    """State and budget from a checkpoint, checked against ``config``."""
    snap = read_snapshot(path)
    if snap.n != config.n:
        raise SnapshotError(f"{path}: grid mismatch (snapshot n={snap.n}, config n={config.n})")
    if snap.model is not config.model:
        raise SnapshotError(
            f"{path}: model mismatch (snapshot {snap.model.value}, config {config.model.value})")
    if snap.sign != config.riesz_sign:
        raise SnapshotError(
            f"{path}: Riesz sign mismatch (snapshot {snap.sign}, config {config.riesz_sign})")
    uh = canonicalize(grid, snap.samples, config.leray)
    side = sidecar_path(path)
    if os.path.exists(side):
        budget = EnergyBudget.from_state_dict(grid, read_sidecar(side)["budget"])
        if budget.t != snap.t:
            raise SnapshotError(f"{side}: time {budget.t!r} does not match snapshot t={snap.t!r}")
    else:
        log.warning("no sidecar for %s; time integrals restart from zero", path)
        budget = EnergyBudget(grid, config.model, m=config.m, quadrature=config.quadrature)
        step = int(round(snap.t / config.dt)) if config.dt is not None else 0
        budget.start(uh, rhs_nonstiff(config.model, grid, uh, config.riesz_sign, check=False),
                     t=snap.t, step=step)
    return uh, budget


def _metadata(config, restart):
    return {
        "tool": "mnsflow",
        "version": mnsflow.__version__,
        "config": config.as_dict(),
        "riesz_sign": config.riesz_sign,
        "generator": GENERATOR,
        "fft_backend": _fft.backend_name(),
        "numpy": np.__version__,
        "python": platform.python_version(),
        "restart": restart,
        "csv_columns": list(CSV_COLUMNS),
        "status": "running",
    }


def _write_json(path, payload):
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, default=str)
    os.replace(tmp, path)


def _checkpoint(path, samples, t, step, budget, config):
    write_snapshot(path, samples, t, config.model, config.riesz_sign)
    write_sidecar(sidecar_path(path), {
        "t": float(t).hex(),
        "step": step,
        "budget": budget.state_dict(),
        "config": config.as_dict(),
    })


def run(config: RunConfig, restart=None):
    """Execute one configured run; returns a :class:`RunOutcome`.

    A blow-up is not raised: it is reported in the outcome (nonzero exit
    code) after ``last_good.mns`` and the metadata are written.
    """
    restart = restart or config.restart
    grid = Grid(config.n)
    out = config.output_dir
    snapdir = os.path.join(out, "snapshots")
    os.makedirs(snapdir, exist_ok=True)
    csv_path = os.path.join(out, "diagnostics.csv")
    meta_path = os.path.join(out, "metadata.json")

    budget = None
    if restart:
        uh, budget = load_restart(config, grid, restart)
        log.info("restarting from %s at t=%.6g (step %d)", restart, budget.t, budget.step)
    else:
        uh = config.ic.build(grid)
    require_solenoidal(grid, uh)

    meta = _metadata(config, restart)
    _write_json(meta_path, meta)

    if restart and os.path.exists(csv_path):
        header, rows = read_csv(csv_path)
        if list(header) != list(CSV_COLUMNS):
            raise SnapshotError(f"{csv_path}: unexpected columns, refusing to append")
        keep = [r for r in rows if float(r[0]) < budget.t]
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            fh.write(",".join(CSV_COLUMNS) + "\n")
            for r in keep:
                fh.write(",".join(r) + "\n")
    else:
        write_csv(csv_path, CSV_COLUMNS, [])

    csv_fh = open(csv_path, "a", newline="", encoding="utf-8")

    def write_row(rec):
        csv_fh.write(",".join(format_float(v) for v in rec.row()) + "\n")
        csv_fh.flush()

    def progress(rec):
        log.info("t=%.6g step=%d E_L2=%.10g E_half=%.10g cancel=%.2e", rec.t, rec.step,
                 rec.E_L2, rec.E_half, rec.cancel)

    def on_snapshot(state, samples, t, step, b):
        path = os.path.join(snapdir, f"snap_{step:08d}.mns")
        _checkpoint(path, samples, t, step, b, config)
        log.info("checkpoint %s", path)

    started = time.time()
    try:
        result = integrate(
            config.model, grid, uh, controls_for(config), sign=config.riesz_sign, m=config.m,
            C=config.C, diag_every=config.diag_every, observers=(write_row, progress),
            snapshot_every=config.snapshot_every, on_snapshot=on_snapshot,
            leray=config.leray, budget=budget, quadrature=config.quadrature,
        )
    except BlowUp as exc:
        good = exc.last_good if exc.last_good is not None else uh
        t_good = exc.t_good if exc.t_good is not None else (budget.t if budget else 0.0)
        write_snapshot(os.path.join(out, "last_good.mns"), _fft.irfft3(good, grid.n), t_good,
                       config.model, config.riesz_sign)
        meta.update(status="blowup", blowup={"t": exc.t, "norms": exc.norms, "t_good": t_good,
                                             "step": exc.step,
                                             "initial_state": exc.last_good is None},
                    wall_seconds=time.time() - started)
        _write_json(meta_path, meta)
        log.error("%s; last good state written (t=%.6g)", exc, t_good)
        return RunOutcome(EXIT_BLOWUP, good, t_good, exc.step or 0, [], out, exc)
    finally:
        csv_fh.close()

    samples = _fft.irfft3(result.state, grid.n)
    _checkpoint(os.path.join(out, "final.mns"), samples, result.t, result.step, result.budget,
                config)

    est = estimate_monitors(result.records, C=config.C)
    write_csv(os.path.join(out, "estimates.csv"), ESTIMATE_COLUMNS,
              [[r[c] for c in ESTIMATE_COLUMNS] for r in est])

    final = result.records[-1]
    meta.update(
        status="completed",
        t_final=result.t,
        steps=result.step,
        wall_seconds=time.time() - started,
        final={"E_L2": final.E_L2, "E_half": final.E_half, "hm": final.hm,
               "resid_en": final.resid_en, "L2_norm": l2_norm(grid, result.state)},
        max_cancel=max(result.log["cancel"]),
        max_abs_resid=max(abs(x) for x in result.log["resid"]),
        bound_rhs_finite=all(math.isfinite(r.bound_rhs) for r in result.records),
    )
    _write_json(meta_path, meta)
    return RunOutcome(EXIT_OK, result.state, result.t, result.step, result.records, out)


@dataclass
class ConvergenceRow:
    dt: float
    steps: int
    difference: float  # relative L2 distance to the run with dt/2; nan for the finest
    order: float  # log2 of successive difference ratios; nan where undefined


def convergence_study(config, halvings):
    """Self-convergence of the final state under repeated halving of ``dt``.

    Runs ``dt, dt/2, ..., dt/2^halvings`` in memory (no files). The
    difference for level ``i`` is ``‖u_i - u_{i+1}‖ / ‖u_{i+1}‖`` and the
    observed order is ``log2(d_i / d_{i+1})``.
    """
    if config.dt is None:
        raise ValueError("convergence needs a fixed dt in the config")
    if halvings < 2:
        raise ValueError(f"need at least 2 halvings to observe an order, got {halvings}")
    grid = Grid(config.n)
    u0 = config.ic.build(grid)
    finals, dts = [], []
    for level in range(halvings + 1):
        dt = config.dt / 2**level
        controls = StepControls(T=config.T, dt=dt, blowup_threshold=config.blowup_threshold)
        res = integrate(config.model, grid, u0, controls, sign=config.riesz_sign, m=config.m,
                        C=config.C, diag_every=2**62, leray=config.leray)
        finals.append(res.state)
        dts.append((dt, res.step))
        log.info("convergence level %d: dt=%.6g steps=%d", level, dt, res.step)
    diffs = [l2_norm(grid, finals[i] - finals[i + 1]) / l2_norm(grid, finals[i + 1])
             for i in range(halvings)] + [math.nan]
    rows = []
    for i, (dt, steps) in enumerate(dts):
        d0, d1 = diffs[i], diffs[i + 1] if i + 1 < len(diffs) else math.nan
        order = math.log2(d0 / d1) if d0 > 0 and d1 > 0 else math.nan
        rows.append(ConvergenceRow(dt, steps, float(d0), order))
    return rows
