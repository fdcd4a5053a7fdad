"""Solenoidal initial data.

Taylor-Green and ABC fields are written directly as exact Fourier
coefficients, so the ABC flow is a discrete curl eigenfunction to the last
bit. Random fields come from numpy's PCG64 generator and are reproducible
bit-for-bit for a given seed.
"""

from dataclasses import dataclass

import numpy as np

from mnsflow import operators as ops
from mnsflow.spectral import dealias, enforce_hermitian, l2_norm

__all__ = [
    "GENERATOR",
    "ICSpec",
    "taylor_green",
    "abc_flow",
    "random_solenoidal",
    "from_modes",
    "dilate",
]

GENERATOR = f"numpy.random.PCG64 (numpy {np.__version__})"


def from_modes(grid, modes):
    """Vector field from ``{(component, k): coefficient}`` on the full lattice.

    Modes whose conjugate partner is the stored one are skipped, so callers
    list Hermitian-complete sets.
    """
    uh = np.zeros((3,) + grid.spectral_shape, dtype=complex)
    for (comp, k), value in modes.items():
        index, conj = grid.locate(k)
        if not conj:
            uh[(comp,) + index] = value
    return uh


def taylor_green(grid, amplitude=1.0):
    """``a (sin x cos y cos z, -cos x sin y cos z, 0)``; ``‖v‖² = 2 a² π³``."""
    if not amplitude > 0:
        raise ValueError(f"Taylor-Green amplitude must be positive, got {amplitude}")
    a = float(amplitude)
    modes = {}
    for s1 in (1, -1):
        for s2 in (1, -1):
            for s3 in (1, -1):
                k = (s1, s2, s3)
                modes[(0, k)] = complex(0.0, -a * s1 / 8.0)
                modes[(1, k)] = complex(0.0, a * s2 / 8.0)
    return from_modes(grid, modes)


def abc_flow(grid, A=1.0, B=1.0, C=1.0):
    """``(A sin z + C cos y, B sin x + A cos z, C sin y + B cos x)``, curl eigenvalue 1."""
    if A == 0 and B == 0 and C == 0:
        raise ValueError("ABC flow needs at least one nonzero coefficient")
    A, B, C = float(A), float(B), float(C)
    modes = {}
    for s in (1, -1):
        ex, ey, ez = (s, 0, 0), (0, s, 0), (0, 0, s)
        modes[(0, ez)] = complex(0.0, -s * A / 2)
        modes[(0, ey)] = complex(C / 2, 0.0)
        modes[(1, ex)] = complex(0.0, -s * B / 2)
        modes[(1, ez)] = complex(A / 2, 0.0)
        modes[(2, ey)] = complex(0.0, -s * C / 2)
        modes[(2, ex)] = complex(B / 2, 0.0)
    return from_modes(grid, modes)


def random_solenoidal(grid, seed, k0, target, cutoff=None):
    """Random analytic field with shell spectrum ``E(k) ∝ k⁴ exp(-2 (k/k0)²)``.

    Modes are complex Gaussians, Hermitian-symmetrized, Leray-projected,
    dealiased (or cut at ``cutoff`` when given) and rescaled so that
    ``‖v‖_{L²} = target``.
    """
    if not target > 0:
        raise ValueError(f"target L2 norm must be positive, got {target}")
    if not 1 <= k0 <= grid.cutoff - 1:
        raise ValueError(f"peak wavenumber k0 must lie in [1, {grid.cutoff - 1}], got {k0}")
    rng = np.random.Generator(np.random.PCG64(int(seed) & (2**64 - 1)))
    amp = grid.kabs * np.exp(-((grid.kabs / k0) ** 2))
    while True:
        z = rng.standard_normal((2, 3) + grid.spectral_shape)
        uh = amp * (z[0] + 1j * z[1]) / np.sqrt(2.0)
        uh = enforce_hermitian(grid, uh)
        uh = dealias(grid, ops.leray_project(grid, uh), cutoff)
        norm = l2_norm(grid, uh)
        if norm > 0:
            return uh * (target / norm)


def dilate(grid, uh, factor):
    """Coefficients of ``λ u(λ x)`` for an integer ``λ >= 1``.

    Mode ``k`` moves to ``λ k`` with its coefficient multiplied by ``λ``.
    """
    factor = int(factor)
    if factor < 1:
        raise ValueError(f"dilation factor must be a positive integer, got {factor}")
    n = grid.n
    out = np.zeros_like(uh)
    idx = np.nonzero(np.any(uh != 0, axis=0) if uh.ndim == 4 else uh != 0)
    kk = [grid.kvec[a][idx].astype(int) * factor for a in range(3)]
    if any(np.any(np.abs(c) >= n // 2) for c in kk):
        raise ValueError(f"dilation by {factor} pushes modes past the n={n} grid")
    target = (kk[0] % n, kk[1] % n, kk[2])
    out[(Ellipsis,) + target] = factor * uh[(Ellipsis,) + idx]
    return out


@dataclass(frozen=True)
class ICSpec:
    """Initial-condition family and its parameters.

    ``kind`` is ``taylor_green`` (amplitude), ``abc`` (A, B, C) or
    ``random`` (seed, k0, target).
    """

    kind: str
    params: tuple

    @classmethod
    def parse(cls, text):
        """Parse ``kind:p1,p2,...``, e.g. ``taylor_green:1.0`` or ``random:7,2,5.0``."""
        kind, _, rest = str(text).strip().partition(":")
        kind = kind.strip().lower()
        vals = [v.strip() for v in rest.split(",")] if rest.strip() else []
        try:
            if kind == "taylor_green":
                params = (float(vals[0]) if vals else 1.0,)
                if len(vals) > 1 or not params[0] > 0:
                    raise ValueError
            elif kind == "abc":
                params = tuple(float(v) for v in vals) if vals else (1.0, 1.0, 1.0)
                if len(params) != 3 or not any(params):
                    raise ValueError
            elif kind == "random":
                if len(vals) != 3:
                    raise ValueError
                params = (int(vals[0]), float(vals[1]), float(vals[2]))
                if not params[2] > 0:
                    raise ValueError
            else:
                raise KeyError(kind)
        except KeyError:
            raise ValueError(
                f"unknown initial condition {kind!r}; use taylor_green, abc or random") from None
        except (ValueError, IndexError):
            raise ValueError(
                f"bad parameters for initial condition {kind!r}: {rest!r}") from None
        return cls(kind, params)

    def build(self, grid):
        if self.kind == "taylor_green":
            return taylor_green(grid, *self.params)
        if self.kind == "abc":
            return abc_flow(grid, *self.params)
        if self.kind == "random":
            return random_solenoidal(grid, *self.params)
        raise ValueError(f"unknown initial condition {self.kind!r}")

    def __str__(self):
        return f"{self.kind}:" + ",".join(repr(p) for p in self.params)
