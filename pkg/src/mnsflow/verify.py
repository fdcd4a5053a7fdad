"""Operator-identity and cancellation suites.

Each suite returns a list of :class:`Check` results (worst relative error
over the sampled fields against a tolerance). ``mnsflow verify`` runs both
and exits nonzero if any check fails.
"""

import math
from dataclasses import dataclass

import numpy as np

from mnsflow import operators as ops
from mnsflow.diagnostics import cancellation_check
from mnsflow.initial import random_solenoidal, taylor_green
from mnsflow.models import ModelKind, rhs_nonstiff
from mnsflow.spectral import Grid, enforce_hermitian, l2_norm

__all__ = ["Check", "random_field", "operator_suite", "cancellation_suite", "run_all"]


@dataclass
class Check:
    name: str
    error: float
    tol: float

    @property
    def passed(self):
        return math.isfinite(self.error) and self.error <= self.tol

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<44s} worst={self.error:.3e}  tol={self.tol:.0e}"


def random_field(grid, rng, vector=True):
    """Hermitian, mean-free random coefficients on the whole stored lattice."""
    shape = ((3,) if vector else ()) + grid.spectral_shape
    uh = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    uh = enforce_hermitian(grid, uh)
    uh[..., 0, 0, 0] = 0
    return uh


def _rel(grid, a, b, scale=None):
    scale = l2_norm(grid, b) if scale is None else scale
    return l2_norm(grid, a - b) / scale if scale else l2_norm(grid, a - b)


class _Worst:
    def __init__(self):
        self.errors = {}

    def add(self, name, err):
        self.errors[name] = max(self.errors.get(name, 0.0), float(err))


def operator_suite(n=16, count=100, seed=0, tol=1e-12):
    """Multiplier identities on ``count`` random mean-free fields."""
    grid = Grid(n)
    rng = np.random.Generator(np.random.PCG64(seed))
    w = _Worst()
    for _ in range(count):
        u = random_field(grid, rng)
        f = u[0]
        a, b = rng.uniform(-0.5, 1.5, size=2)
        tau1, tau2 = rng.uniform(0.0, 1.0, size=2)
        nu = l2_norm(grid, u)

        rsq = sum(ops.riesz(grid, ops.riesz(grid, f, j), j) for j in range(3))
        w.add("R1^2 + R2^2 + R3^2 = -I", _rel(grid, rsq, -f))
        for sign in (1, -1):
            rr = ops.riesz_cross(grid, ops.riesz_cross(grid, u, sign), sign)
            w.add("Rx Rx = P (both signs)", _rel(grid, rr, ops.leray_project(grid, u)))
            lam = ops.lambda_pow(grid, ops.riesz_cross(grid, u, sign), 1.0)
            w.add("Lambda Rx = sign * curl", _rel(grid, lam, sign * ops.curl_vec(grid, u)))
            w.add("div Rx = 0",
                  l2_norm(grid, ops.divergence(grid, ops.riesz_cross(grid, u, sign))) / nu)
        w.add("Lambda^a Lambda^b = Lambda^(a+b)",
              _rel(grid, ops.lambda_pow(grid, ops.lambda_pow(grid, u, a), b),
                   ops.lambda_pow(grid, u, a + b)))
        w.add("heat(t1) heat(t2) = heat(t1 + t2)",
              _rel(grid, ops.heat_factor(grid, ops.heat_factor(grid, u, tau1), tau2),
                   ops.heat_factor(grid, u, tau1 + tau2)))
        curl = ops.curl_vec(grid, u)
        w.add("div curl = 0", l2_norm(grid, ops.divergence(grid, curl)) / l2_norm(grid, curl))
        pu = ops.leray_project(grid, u)
        w.add("P P = P", _rel(grid, ops.leray_project(grid, pu), pu))
        grad = ops.gradient(grid, f)
        w.add("P grad = 0", l2_norm(grid, ops.leray_project(grid, grad)) / l2_norm(grid, grad))
        w.add("Lambda P = P Lambda",
              _rel(grid, ops.lambda_pow(grid, pu, b),
                   ops.leray_project(grid, ops.lambda_pow(grid, u, b))))
    return [Check(name, err, tol) for name, err in w.errors.items()]


def cancellation_suite(n=32, count=10, seed=0, tol=1e-12):
    """Energy cancellations and rotational/convective agreement of the nonlinear terms."""
    grid = Grid(n)
    rng = np.random.Generator(np.random.PCG64(seed))
    fields = [taylor_green(grid)]
    fields += [random_solenoidal(grid, int(s), 2.0, 1.0)
               for s in rng.integers(0, 2**63, size=count)]
    w = _Worst()
    for u in fields:
        for model in ModelKind:
            for sign in ((1, -1) if model is ModelKind.MNS else (1,)):
                nh = rhs_nonstiff(model, grid, u, sign=sign)
                w.add(f"cancellation {model.value}", cancellation_check(model, grid, u, nh, sign))
                scale = l2_norm(grid, nh)
                div = l2_norm(grid, ops.divergence(grid, nh))
                w.add("div N = 0 (all models)", div / scale if scale else div)
                w.add("mean of N = 0 (all models)", float(np.abs(nh[:, 0, 0, 0]).max()))
        rot = rhs_nonstiff(ModelKind.NS_ROTATIONAL, grid, u)
        conv = rhs_nonstiff(ModelKind.NS_CONVECTIVE, grid, u)
        w.add("rotational NS = convective NS", _rel(grid, conv, rot))
    tols = {"div N = 0 (all models)": 1e-13, "mean of N = 0 (all models)": 0.0}
    return [Check(name, err, tols.get(name, tol)) for name, err in w.errors.items()]


def run_all(seed=0):
    return operator_suite(seed=seed) + cancellation_suite(seed=seed)
