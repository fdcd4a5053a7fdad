"""Integrating-factor RK4 with exact heat semigroup, CFL control and blow-up checks."""

import math
from dataclasses import dataclass, field

import numpy as np

from mnsflow import _fft, _kernels
from mnsflow import operators as ops
from mnsflow.diagnostics import EnergyBudget, cancellation_check, make_record
from mnsflow.models import ModelKind, rhs_nonstiff
from mnsflow.spectral import dealias

__all__ = [
    "BlowUp",
    "StepControls",
    "IntegrationResult",
    "step_ifrk4",
    "choose_dt",
    "canonicalize",
    "integrate",
]


class BlowUp(RuntimeError):
    """The state became non-finite or exceeded the amplitude threshold.

    ``last_good`` holds the last accepted state and ``t_good`` its time.
    """

    def __init__(self, t, norms, last_good=None, t_good=None, step=None):
        self.t = t
        self.norms = dict(norms)
        self.last_good = last_good
        self.t_good = t_good
        self.step = step
        detail = ", ".join(f"{k}={v:.6g}" for k, v in self.norms.items())
        super().__init__(f"blow-up at t={t:.6g}: {detail}")


@dataclass(frozen=True)
class StepControls:
    """Exactly one of ``dt`` (fixed step) or ``cfl`` (advective Courant number)."""

    T: float
    dt: float = None
    cfl: float = None
    dt_max: float = 1e-2
    blowup_threshold: float = 1e6

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")
        if (self.dt is None) == (self.cfl is None):
            raise ValueError("give exactly one of dt or cfl")
        if self.dt is not None and not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.cfl is not None and not 0 < self.cfl <= 1:
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if not self.dt_max > 0:
            raise ValueError(f"dt_max must be positive, got {self.dt_max}")
        if not self.blowup_threshold > 0:
            raise ValueError(f"blowup_threshold must be positive, got {self.blowup_threshold}")


def step_ifrk4(model, grid, uh, dt, sign=1, k1=None):
    """One Lawson (integrating-factor) RK4 step of ``dû/dt = N(û) - |k|² û``.

    ``k1`` may carry a precomputed ``N(uh)``. With ``N ≡ 0`` the step is
    exactly ``exp(-|k|² dt) û``. The result is dealiased; ``uh`` must be too.
    """
    if dt < 0:
        raise ValueError(f"dt must be non-negative, got {dt}")
    if dt == 0:
        return uh.copy()
    N = lambda x: rhs_nonstiff(model, grid, x, sign=sign, check=False)  # noqa: E731
    keep = grid.axis_keep
    e_half = ops.heat_multiplier(grid, 0.5 * dt)
    e_full = ops.heat_multiplier(grid, dt)
    ones = _ones(grid)
    if k1 is None:
        k1 = N(uh)
    buf = np.empty_like(uh)
    k2 = N(_kernels.stage(*keep, e_half, uh, e_half, k1, 0.5 * dt, buf))
    k3 = N(_kernels.stage(*keep, e_half, uh, ones, k2, 0.5 * dt, buf))
    k4 = N(_kernels.stage(*keep, e_full, uh, e_half, k3, dt, buf))
    return _kernels.rk4_combine(*keep, e_full, e_half, uh, k1, k2, k3, k4, dt,
                                np.empty_like(uh))


_ones_cache = {}


def _ones(grid):
    out = _ones_cache.get(grid.n)
    if out is None:
        out = _ones_cache[grid.n] = np.ones(grid.spectral_shape)
    return out


def _max_speed(grid, uh):
    u = _fft.irfft3(uh, grid.n)
    return float(np.sqrt(np.sum(u**2, axis=0)).max())


def choose_dt(grid, uh, controls):
    """``min(dt_max, cfl Δx / max|v|)``; ``dt_max`` when the field is at rest."""
    if controls.dt is not None:
        return controls.dt
    vmax = _max_speed(grid, uh)
    if not math.isfinite(vmax):
        raise ValueError("cannot choose a step for a non-finite state")
    if vmax == 0.0:
        return controls.dt_max
    return min(controls.dt_max, controls.cfl * grid.dx / vmax)


def canonicalize(grid, u_phys, leray=False):
    """State reconstructed from physical samples, exactly as a restart sees it."""
    uh = dealias(grid, _fft.rfft3(u_phys))
    return ops.leray_project(grid, uh) if leray else uh


def _amplitude_check(grid, uh, threshold):
    """Return ``max|v|`` if it may exceed ``threshold`` (or is non-finite), else None."""
    if not np.all(np.isfinite(uh)):
        return math.nan
    mag = np.sqrt(np.sum(uh.real**2 + uh.imag**2, axis=0))
    bound = float(np.sum(grid.weight * mag))
    if bound <= threshold:
        return None
    vmax = _max_speed(grid, uh)
    return vmax if not vmax <= threshold else None


@dataclass
class IntegrationResult:
    state: np.ndarray
    t: float
    step: int
    records: list
    budget: EnergyBudget
    # per-accepted-step monitors: t, E_L2, E_half, cancel, resid, div_rel, mean_abs
    log: dict = field(default_factory=dict)


def integrate(model, grid, u0, controls, *, sign=1, m=3, C=1.0, diag_every=1,
              observers=(), snapshot_every=0, on_snapshot=None, leray=False,
              budget=None, quadrature="hermite", log_div=False):
    """Advance ``u0`` to ``controls.T``.

    A :class:`~mnsflow.diagnostics.DiagnosticsRecord` is built at the start,
    every ``diag_every`` steps and at the end; each is passed to every
    observer and collected in the result. Every ``snapshot_every`` steps the
    state is rebuilt from its physical samples (see :func:`canonicalize`)
    and ``on_snapshot(state, samples, t, step, budget)`` is called with
    those samples, which reproduce ``state`` exactly when read back.

    To resume from a checkpoint pass the restored ``budget``; its ``t`` and
    ``step`` are the starting point, and the opening record is only emitted
    if that step is on the ``diag_every`` cadence (so a resumed run repeats
    no rows).

    ``log_div=True`` adds the per-step ``max|div u| / ‖u‖`` and ``max|û_0|``
    to ``result.log``; both cost an extra transform per step.

    Raises :class:`BlowUp` before any non-finite or over-threshold state is
    recorded.
    """
    model = ModelKind.parse(model)
    sign = ops.check_sign(sign)
    if diag_every < 1:
        raise ValueError(f"diag_every must be >= 1, got {diag_every}")
    uh = np.array(u0, dtype=complex)
    grid.check_spectral(uh, vector=True)

    amp = _amplitude_check(grid, uh, controls.blowup_threshold)
    t0 = budget.t if budget is not None else 0.0
    if amp is not None:
        raise BlowUp(t0, {"max_speed": amp}, last_good=None, t_good=None, step=0)

    N = lambda x: rhs_nonstiff(model, grid, x, sign=sign, check=False)  # noqa: E731
    nh = N(uh)
    if budget is None:
        budget = EnergyBudget(grid, model, m=m, quadrature=quadrature)
        budget.start(uh, nh)
    else:
        budget.resume(uh, nh)

    records = []
    log = {k: [] for k in ("t", "E_L2", "E_half", "cancel", "resid", "div_rel", "mean_abs")}

    def monitor():
        q = budget.current
        log["t"].append(budget.t)
        log["E_L2"].append(0.5 * q["l2"])
        log["E_half"].append(0.5 * q["halfE"])
        log["cancel"].append(cancellation_check(model, grid, uh, nh, sign))
        log["resid"].append(budget.residual())
        if log_div:
            norm = math.sqrt(q["l2"])
            dm = float(np.abs(_fft.irfft3(ops.divergence(grid, uh), grid.n)).max())
            log["div_rel"].append(dm / norm if norm else 0.0)
            log["mean_abs"].append(float(np.abs(uh[:, 0, 0, 0]).max()))

    def emit():
        rec = make_record(grid, model, uh, nh, budget, C=C, sign=sign)
        records.append(rec)
        for obs in observers:
            obs(rec)

    resumed = budget.step > 0
    monitor()
    if not resumed or budget.step % diag_every == 0:
        emit()

    T = controls.T
    fixed = controls.dt
    if fixed is not None:
        ratio = T / fixed
        exact_multiple = abs(ratio - round(ratio)) <= 1e-9 * max(ratio, 1.0)
        n_total = int(round(ratio)) if exact_multiple else math.ceil(ratio - 1e-9)

    while True:
        t, step = budget.t, budget.step
        if fixed is not None:
            if step >= n_total or t >= T:
                break
            if step + 1 < n_total or exact_multiple:
                h, t_new = fixed, (step + 1) * fixed
                if step + 1 == n_total:
                    t_new = T
            else:
                h, t_new = T - step * fixed, T
        else:
            if t >= T:
                break
            h = choose_dt(grid, uh, controls)
            if t + h >= T * (1 - 1e-14):
                h, t_new = T - t, T
            else:
                t_new = t + h

        new = step_ifrk4(model, grid, uh, h, sign=sign, k1=nh)
        if leray:
            new = ops.leray_project(grid, new)
        amp = _amplitude_check(grid, new, controls.blowup_threshold)
        if amp is not None:
            raise BlowUp(t_new, {"max_speed": amp, "E_L2": budget.current["l2"] / 2},
                         last_good=uh, t_good=t, step=step)
        snap = snapshot_every and (step + 1) % snapshot_every == 0
        if snap:
            samples = _fft.irfft3(new, grid.n)
            new = canonicalize(grid, samples, leray)
        uh = new
        nh = N(uh)
        budget.advance(uh, nh, h)
        budget.t = t_new
        monitor()
        done = budget.t >= T
        if done or budget.step % diag_every == 0:
            emit()
        if snap and on_snapshot is not None:
            on_snapshot(uh, samples, budget.t, budget.step, budget)
        if done:
            break

    return IntegrationResult(uh, budget.t, budget.step, records, budget, log)
