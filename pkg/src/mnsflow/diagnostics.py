"""Norms, energy budgets and estimate monitors.

Spectral quadratic quantities share one form,
``Q_w(u) = (2π)³ Σ_k w(k) |û_k|²``, and along a trajectory of
``dû/dt = N̂ - |k|² û`` their rate is known exactly from the same ``N`` the
integrator evaluates:

    dQ_w/dt = 2 (2π)³ Σ_k w(k) Re(conj(û_k) (N̂_k - |k|² û_k)).

:class:`EnergyBudget` integrates dissipation rates in time with the
endpoint-corrected trapezoidal rule
``∫ Q ≈ h (Q_0 + Q_1)/2 + h² (Q'_0 - Q'_1)/12``, which is fourth-order;
the plain trapezoidal rule is available for comparison.
"""

import math
from dataclasses import asdict, dataclass, field, fields

import mpmath
import numpy as np

from mnsflow import _fft
from mnsflow import operators as ops
from mnsflow.models import ModelKind
from mnsflow.spectral import VOLUME, l2_norm

__all__ = [
    "CSV_COLUMNS",
    "DiagnosticsRecord",
    "EnergyBudget",
    "sobolev_seminorm",
    "hm_norm",
    "multi_index_hm_sq",
    "lp_norm",
    "grad_linf",
    "div_max",
    "cancellation_check",
    "half_energy_residual",
    "bound_log",
    "bound_loglog",
    "bound_rhs_value",
    "estimate_monitors",
    "make_record",
    "galilean_defect",
]

CSV_COLUMNS = (
    "t", "E_L2", "E_half", "D_half_cum", "grad_sq", "lap_sq", "d3_sq", "hm",
    "l3", "l6", "linf", "grad_linf", "resid_en", "cancel", "div_max", "bound_rhs",
)


def _weighted_sq(grid, uh, w):
    a = (uh.real**2 + uh.imag**2)
    if a.ndim == 4:
        a = a.sum(axis=0)
    return VOLUME * float(np.sum(grid.weight * w * a))


def sobolev_seminorm(grid, uh, s):
    """``‖Λ^s u‖_{L²}``; at ``s = 0`` the plain L² norm (mean included)."""
    if s == 0:
        return l2_norm(grid, uh)
    return math.sqrt(_weighted_sq(grid, uh, ops._kpow(grid, 2 * s)))


def hm_norm(grid, uh, m):
    """Spectral ``H^m`` norm with weight ``(1 + |k|²)^m``.

    Equivalent to the multi-index sum of :func:`multi_index_hm_sq`:
    ``Σ_{|α|≤m} ‖D^α u‖² ≤ hm² ≤ 2^m Σ_{|α|≤m} ‖D^α u‖²`` (the upper factor
    is valid for ``m <= 10``).
    """
    if m < 0:
        raise ValueError(f"H^m needs m >= 0, got {m}")
    return math.sqrt(_weighted_sq(grid, uh, (1.0 + grid.ksq) ** m))


def multi_index_hm_sq(grid, uh, m):
    """``Σ_{|α|≤m} ‖D^α u‖²`` summed over every multi-index, for integer ``m``."""
    k1, k2, k3 = (kj**2 for kj in grid.k)
    w = np.zeros(grid.spectral_shape)
    for a1 in range(m + 1):
        for a2 in range(m + 1 - a1):
            for a3 in range(m + 1 - a1 - a2):
                w = w + k1**a1 * k2**a2 * k3**a3
    return _weighted_sq(grid, uh, w)


def lp_norm(grid, u, p):
    """Collocation ``L^p`` norm of the pointwise magnitude, ``p`` in {3, 6, inf}."""
    mag = np.sqrt(np.sum(u**2, axis=0)) if u.ndim == 4 else np.abs(u)
    if p == np.inf or p == "inf":
        return float(mag.max())
    if p not in (3, 6):
        raise ValueError(f"unsupported L^p exponent {p}")
    return float((grid.dx**3 * np.sum(mag**p)) ** (1.0 / p))


def _gradient_phys(grid, uh):
    """``g[j, i] = ∂_j u_i`` at the collocation points."""
    return np.stack([_fft.irfft3(ops.partial(grid, uh, j), grid.n) for j in range(3)])


def grad_linf(grid, uh):
    """``max_x |∇u(x)|`` with the Frobenius norm of the gradient tensor."""
    g = _gradient_phys(grid, uh)
    return float(np.sqrt(np.sum(g**2, axis=(0, 1))).max())


def div_max(grid, uh):
    return float(np.abs(_fft.irfft3(ops.divergence(grid, uh), grid.n)).max())


def _cancel_weight(grid, model):
    return grid.kabs if ModelKind.parse(model) is ModelKind.MNS else 1.0


def cancellation_check(model, grid, uh, nh=None, sign=1):
    """Normalized ``|⟨N, W⟩| / (‖N‖ ‖W‖)``, ``W = Λu`` for mNS and ``u`` otherwise.

    Returns 0 when ``N`` or ``W`` vanishes.
    """
    from mnsflow.models import rhs_nonstiff

    if nh is None:
        nh = rhs_nonstiff(model, grid, uh, sign=sign)
    w = _cancel_weight(grid, model)
    prod = (nh.real * uh.real + nh.imag * uh.imag).sum(axis=0)
    inner = VOLUME * float(np.sum(grid.weight * w * prod))
    nn = _weighted_sq(grid, nh, 1.0)
    ww = _weighted_sq(grid, uh, w * w if np.ndim(w) else 1.0)
    if nn == 0.0 or ww == 0.0:
        return 0.0
    return abs(inner) / math.sqrt(nn * ww)


class _Kahan:
    __slots__ = ("total", "comp")

    def __init__(self, total=0.0, comp=0.0):
        self.total = total
        self.comp = comp

    def add(self, x):
        y = x - self.comp
        t = self.total + y
        self.comp = (t - self.total) - y
        self.total = t


# name -> weight(grid, m); each is integrated as a dissipation rate
_RATES = {
    "half": lambda grid, m: grid.kabs**3,
    "grad": lambda grid, m: grid.ksq,
    "lap": lambda grid, m: grid.ksq**2,
    "d3": lambda grid, m: grid.ksq**3,
    "dhm": lambda grid, m: (1.0 + grid.ksq) ** m * grid.ksq,
}


class EnergyBudget:
    """Running energies and time-integrated dissipation along one trajectory.

    Call :meth:`start` with the initial state and its nonlinear term, then
    :meth:`advance` after each accepted step with the new state, its
    nonlinear term and the step size.
    """

    def __init__(self, grid, model, m=3, quadrature="hermite"):
        if quadrature not in ("hermite", "trapezoid"):
            raise ValueError(f"unknown quadrature {quadrature!r}")
        self.grid = grid
        self.model = ModelKind.parse(model)
        self.m = m
        self.quadrature = quadrature
        self._w = {name: fn(grid, m) for name, fn in _RATES.items()}
        self._w["l2"] = np.ones(grid.spectral_shape)
        self._w["halfE"] = grid.kabs
        self._w["hm"] = (1.0 + grid.ksq) ** m
        self.cum = {name: _Kahan() for name in _RATES}
        self.initial = {}
        self.hm_sup_sq = 0.0
        self.t = 0.0
        self.step = 0
        self._prev = None

    def _evaluate(self, uh, nh):
        a = (uh.real**2 + uh.imag**2).sum(axis=0)
        b = (nh.real * uh.real + nh.imag * uh.imag).sum(axis=0) - self.grid.ksq * a
        wa = self.grid.weight * a
        wb = self.grid.weight * b
        q = {name: VOLUME * float(np.sum(w * wa)) for name, w in self._w.items()}
        dq = {name: 2.0 * VOLUME * float(np.sum(self._w[name] * wb)) for name in _RATES}
        return q, dq

    def start(self, uh, nh, t=0.0, step=0):
        q, dq = self._evaluate(uh, nh)
        self.t, self.step = t, step
        self.initial = {
            "E_L2": 0.5 * q["l2"],
            "E_half": 0.5 * q["halfE"],
            "l2_sq": q["l2"],
            "half_sq": q["halfE"],
            "grad_sq": q["grad"],
            "hm_sq": q["hm"],
        }
        self.hm_sup_sq = q["hm"]
        self._prev = (q, dq)
        return q

    def resume(self, uh, nh):
        """Re-derive the endpoint values after restoring counters from a checkpoint."""
        self._prev = self._evaluate(uh, nh)
        return self._prev[0]

    def advance(self, uh, nh, h):
        q0, dq0 = self._prev
        q1, dq1 = self._evaluate(uh, nh)
        for name, acc in self.cum.items():
            inc = 0.5 * h * (q0[name] + q1[name])
            if self.quadrature == "hermite":
                inc += h * h / 12.0 * (dq0[name] - dq1[name])
            acc.add(inc)
        self.hm_sup_sq = max(self.hm_sup_sq, q1["hm"])
        self.step += 1
        self._prev = (q1, dq1)
        return q1

    @property
    def current(self):
        return self._prev[0]

    def integral(self, name):
        return self.cum[name].total

    def residual(self):
        """Energy balance residual appropriate to the model.

        mNS conserves ``½‖Λ^{1/2}u‖² + ∫‖Λ^{3/2}u‖²``; the other systems
        conserve ``½‖u‖² + ∫‖∇u‖²``.
        """
        q = self.current
        if self.model is ModelKind.MNS:
            return 0.5 * q["halfE"] + self.integral("half") - self.initial["E_half"]
        return 0.5 * q["l2"] + self.integral("grad") - self.initial["E_L2"]

    def l2_residual(self):
        return 0.5 * self.current["l2"] + self.integral("grad") - self.initial["E_L2"]

    def state_dict(self):
        """Exact (hex-encoded) counters for checkpointing."""
        return {
            "model": self.model.value,
            "m": self.m,
            "quadrature": self.quadrature,
            "t": self.t.hex(),
            "step": self.step,
            "hm_sup_sq": self.hm_sup_sq.hex(),
            "initial": {k: float(v).hex() for k, v in self.initial.items()},
            "cum": {k: [a.total.hex(), a.comp.hex()] for k, a in self.cum.items()},
        }

    @classmethod
    def from_state_dict(cls, grid, d):
        b = cls(grid, d["model"], m=d["m"], quadrature=d["quadrature"])
        b.t = float.fromhex(d["t"])
        b.step = int(d["step"])
        b.hm_sup_sq = float.fromhex(d["hm_sup_sq"])
        b.initial = {k: float.fromhex(v) for k, v in d["initial"].items()}
        b.cum = {k: _Kahan(float.fromhex(v[0]), float.fromhex(v[1])) for k, v in d["cum"].items()}
        return b


# beyond this the inner exponential of the bound has no usable mpmath form
_HUGE = mpmath.mpf(10) ** 6


def _bound_terms(initial, t, C):
    a = mpmath.mpf(initial["l2_sq"])
    h = mpmath.mpf(initial["half_sq"])
    L = mpmath.mpf(initial["grad_sq"])
    A = mpmath.mpf(initial["hm_sq"])
    E = mpmath.exp(C * h)
    return A, L, t * a * E, C * t * a * E * L * E


def bound_log(initial, t, C):
    """Natural log of the global ``H^m`` bound at time ``t``, as an mpmath number.

    With ``a = ‖v₀‖²``, ``h = ‖Λ^{1/2}v₀‖²``, ``L = ‖Λv₀‖²``,
    ``A = ‖v₀‖²_{H^m}`` and ``E = exp(C h)``::

        B = A exp(t a E) exp(L exp(C t a E L E))

    Returns ``-inf`` when ``A = 0`` and ``+inf`` when ``ln B`` itself is
    beyond any floating range (see :func:`bound_loglog`).
    """
    A, L, x1, x2 = _bound_terms(initial, t, C)
    if A == 0:
        return mpmath.ninf
    if x2 > _HUGE:
        return mpmath.inf
    return mpmath.log(A) + x1 + L * mpmath.exp(x2)


def bound_loglog(initial, t, C):
    """``ln ln B`` of the global bound, computed without forming ``ln B``."""
    A, L, x1, x2 = _bound_terms(initial, t, C)
    if A == 0:
        return mpmath.ninf
    head = mpmath.log(A) + x1
    if L == 0:
        return mpmath.log(head) if head > 0 else mpmath.ninf
    tail = mpmath.log(L) + x2
    if head <= 0:
        # ln B = head + exp(tail) with head small against exp(tail) or negative
        if tail < 50:
            lnb = head + mpmath.exp(tail)
            return mpmath.log(lnb) if lnb > 0 else mpmath.ninf
        return tail + mpmath.log1p(head * mpmath.exp(-tail))
    lh = mpmath.log(head)
    hi, lo = (lh, tail) if lh >= tail else (tail, lh)
    return hi + mpmath.log1p(mpmath.exp(lo - hi))


def bound_rhs_value(initial, t, C):
    """``ln(1 + ln(1 + B))`` for the global bound ``B``.

    ``B`` outgrows binary64 (and its logarithm often does too) for ordinary
    data, so the doubly logarithmic value is what gets tabulated.
    """
    with mpmath.workdps(30):
        lnb = bound_log(initial, t, C)
        if lnb == mpmath.ninf:
            return 0.0
        if lnb == mpmath.inf or lnb > 1e4:
            # ln(1 + ln(1 + B)) agrees with ln ln B to far below binary64 resolution
            return float(bound_loglog(initial, t, C))
        ln1pb = lnb + mpmath.log1p(mpmath.exp(-lnb)) if lnb > 0 else mpmath.log1p(mpmath.exp(lnb))
        return float(mpmath.log1p(ln1pb))


@dataclass
class DiagnosticsRecord:
    t: float
    E_L2: float
    E_half: float
    D_half_cum: float
    grad_sq: float
    lap_sq: float
    d3_sq: float
    hm: float
    l3: float
    l6: float
    linf: float
    grad_linf: float
    resid_en: float
    cancel: float
    div_max: float
    bound_rhs: float
    step: int = 0
    D_grad_cum: float = 0.0
    D_lap_cum: float = 0.0
    D_d3_cum: float = 0.0
    D_hm_cum: float = 0.0
    hm_sup_sq: float = 0.0
    initial: dict = field(default_factory=dict, repr=False)

    def row(self):
        return [getattr(self, c) for c in CSV_COLUMNS]

    def as_dict(self):
        return asdict(self)

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


def make_record(grid, model, uh, nh, budget, C=1.0, sign=1):
    """Full diagnostics at the budget's current time.

    ``nh`` must be the nonlinear term at ``uh`` (the one passed to the budget).
    """
    q = budget.current
    u = _fft.irfft3(uh, grid.n)
    g = _gradient_phys(grid, uh)
    gmag = np.sqrt(np.sum(g**2, axis=(0, 1)))
    div = g[0, 0] + g[1, 1] + g[2, 2]
    return DiagnosticsRecord(
        t=budget.t,
        E_L2=0.5 * q["l2"],
        E_half=0.5 * q["halfE"],
        D_half_cum=budget.integral("half"),
        grad_sq=q["grad"],
        lap_sq=q["lap"],
        d3_sq=q["d3"],
        hm=math.sqrt(q["hm"]),
        l3=lp_norm(grid, u, 3),
        l6=lp_norm(grid, u, 6),
        linf=lp_norm(grid, u, np.inf),
        grad_linf=float(gmag.max()),
        resid_en=budget.residual(),
        cancel=cancellation_check(model, grid, uh, nh, sign),
        div_max=float(np.abs(div).max()),
        bound_rhs=bound_rhs_value(budget.initial, budget.t, C),
        step=budget.step,
        D_grad_cum=budget.integral("grad"),
        D_lap_cum=budget.integral("lap"),
        D_d3_cum=budget.integral("d3"),
        D_hm_cum=budget.integral("dhm"),
        hm_sup_sq=budget.hm_sup_sq,
        initial=dict(budget.initial),
    )


def half_energy_residual(series):
    """``ρ(t) = E_half(t) + D_half_cum(t) - E_half(0)`` for each record."""
    if not series:
        return []
    e0 = series[0].E_half
    return [r.E_half + r.D_half_cum - e0 for r in series]


def _ratio(lhs, log_rhs):
    if lhs == 0:
        return 0.0
    if log_rhs == mpmath.ninf:
        return math.inf
    if log_rhs == mpmath.inf:
        return 0.0
    return float(mpmath.exp(mpmath.log(lhs) - log_rhs))


def estimate_monitors(series, C=1.0):
    """Both sides of the energy estimates for every record.

    Covers the L², H¹ and H² estimates and the global ``H^m`` bound, all
    for the supplied constant ``C``. Nothing is asserted; each row carries
    ``lhs``, ``log_rhs`` (natural log of the right side), ``ratio = lhs/rhs``
    and ``holds``.
    """
    rows = []
    if not series:
        return rows
    with mpmath.workdps(30):
        for r in series:
            init = r.initial or series[0].initial
            a = mpmath.mpf(init["l2_sq"])
            h = mpmath.mpf(init["half_sq"])
            L = mpmath.mpf(init["grad_sq"])
            E = mpmath.exp(C * h)
            logs = {
                "L2": mpmath.log(a) + C * h if a > 0 else mpmath.ninf,
                "H1": mpmath.log(L) + C * h if L > 0 else mpmath.ninf,
                "H2": (mpmath.log(L) + C * r.t * a * E * L * E) if L > 0 else mpmath.ninf,
                "Hm": bound_log(init, r.t, C),
            }
            lhs = {
                "L2": 2.0 * r.E_L2 + r.D_grad_cum,
                "H1": r.grad_sq + r.D_lap_cum,
                "H2": r.lap_sq + r.D_d3_cum,
                "Hm": r.hm_sup_sq + r.D_hm_cum,
            }
            for name in ("L2", "H1", "H2", "Hm"):
                ratio = _ratio(lhs[name], logs[name])
                rows.append({
                    "t": r.t,
                    "inequality": name,
                    "lhs": lhs[name],
                    "log_rhs": float(logs[name]) if logs[name] != mpmath.ninf else -math.inf,
                    "ratio": ratio,
                    "holds": ratio <= 1.0,
                })
    return rows


def galilean_defect(model, grid, uh, velocity, sign=1):
    """Relative failure of the nonlinear term to commute with a Galilean boost.

    For ``w(x, t) = u(x - ct, t) + c`` the boost is a symmetry exactly when
    ``N(u + c) - N(u) = -(c·∇)u``. Returns
    ``‖N(u + c) - N(u) + (c·∇)u‖ / ‖(c·∇)u‖`` (0 if ``(c·∇)u = 0``).
    Exploratory only; nothing is asserted about its value.
    """
    model = ModelKind.parse(model)
    c = np.asarray(velocity, dtype=float).reshape(3, 1, 1, 1)
    k1, k2, k3 = grid.k
    cdotk = c[0] * k1 + c[1] * k2 + c[2] * k3
    adv = 1j * cdotk * uh
    omega = ops.curl_vec(grid, uh)
    cx = np.stack([
        c[1] * omega[2] - c[2] * omega[1],
        c[2] * omega[0] - c[0] * omega[2],
        c[0] * omega[1] - c[1] * omega[0],
    ])
    if model is ModelKind.MNS:
        delta = -ops.riesz_cross(grid, cx, sign)
    elif model is ModelKind.NS_ROTATIONAL:
        delta = ops.leray_project(grid, cx)
    elif model is ModelKind.NS_CONVECTIVE:
        delta = -ops.leray_project(grid, adv)
    else:
        delta = -ops.curl_vec(grid, cx)
    scale = l2_norm(grid, adv)
    if scale == 0.0:
        return 0.0
    return l2_norm(grid, delta + adv) / scale
