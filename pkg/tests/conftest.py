import numpy as np
import pytest

from mnsflow import operators as ops
from mnsflow.spectral import Grid, enforce_hermitian, forward_transform

# criterion id -> (passed, detail); filled by test_acceptance, printed at the end
ACCEPTANCE = {}


def random_coefficients(grid, rng, vector=True):
    """Hermitian, mean-free random coefficients (not dealiased)."""
    shape = ((3,) if vector else ()) + grid.spectral_shape
    uh = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    uh = enforce_hermitian(grid, uh)
    uh[..., 0, 0, 0] = 0
    return uh


def random_solenoidal_field(grid, rng, dealiased=True):
    uh = ops.leray_project(grid, random_coefficients(grid, rng))
    if dealiased:
        uh = uh * grid.dealias_mask
    return uh


def sample(grid, fn):
    """Spectral coefficients of a vector field given as a function of (x, y, z)."""
    x, y, z = np.meshgrid(*(np.arange(grid.n) * grid.dx,) * 3, indexing="ij")
    comps = fn(x, y, z)
    u = np.stack([np.broadcast_to(c, x.shape).astype(float) for c in comps])
    return forward_transform(grid, u)


def coords(grid):
    return np.meshgrid(*(np.arange(grid.n) * grid.dx,) * 3, indexing="ij")


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(12345))


@pytest.fixture(params=[8, 16])
def small_grid(request):
    return Grid(request.param)


@pytest.fixture
def grid16():
    return Grid(16)


@pytest.fixture
def grid32():
    return Grid(32)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k)):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
