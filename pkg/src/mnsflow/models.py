"""Nonlinear terms of the four evolution systems.

Every system is integrated as ``dû_k/dt = N̂_k(u) - |k|² û_k``; this module
supplies ``N``. Products are formed pseudo-spectrally from dealiased inputs
and the product is dealiased again before any multiplier acts on it, which
makes the energy cancellations below exact up to rounding:

* mNS, ``N = -R×(v×ω)``:            ``⟨N, Λv⟩ = 0``
* rotational NS, ``N = P(v×ω)``:    ``⟨N, v⟩ = 0``
* convective NS, ``N = -P(v·∇v)``:  equal to the rotational form
* Hall, ``N = -∇×(B×(∇×B))``:       ``⟨N, B⟩ = 0``
"""

import enum

import numpy as np

from mnsflow import _fft, _kernels
from mnsflow import operators as ops

__all__ = [
    "ModelKind",
    "NonSolenoidalError",
    "nonlinear_mns",
    "nonlinear_ns_rotational",
    "nonlinear_ns_convective",
    "nonlinear_hall",
    "rhs_nonstiff",
    "require_solenoidal",
]


class ModelKind(enum.Enum):
    MNS = "mns"
    NS_ROTATIONAL = "ns_rotational"
    NS_CONVECTIVE = "ns_convective"
    HALL = "hall"

    @property
    def code(self):
        """Integer id used in snapshot headers."""
        return list(ModelKind).index(self)

    @classmethod
    def from_code(cls, code):
        members = list(cls)
        if not 0 <= code < len(members):
            raise ValueError(f"unknown model id {code}")
        return members[code]

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            choices = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown model {name!r}; choose one of {choices}") from None


class NonSolenoidalError(ValueError):
    pass


def require_solenoidal(grid, uh, rtol=1e-10):
    """Reject ``uh`` unless it is dealiased and ``‖k·û‖ <= rtol ‖|k| û‖``."""
    grid.check_spectral(uh, vector=True)
    if np.any(uh[:, ~grid.dealias_mask]):
        raise ValueError("input has energy outside the dealiased band (or a nonzero mean)")
    k1, k2, k3 = grid.k
    div = k1 * uh[0] + k2 * uh[1] + k3 * uh[2]
    scale = np.sqrt(np.sum(grid.ksq * (np.abs(uh) ** 2).sum(axis=0)))
    defect = np.sqrt(np.sum(np.abs(div) ** 2))
    if defect > rtol * scale:
        rel = defect / scale if scale else np.inf
        raise NonSolenoidalError(f"input is not solenoidal (relative divergence {rel:.3e})")


def _phys(grid, uh):
    return _fft.irfft3(uh, grid.n)


def _rotational_product(grid, vh):
    """Unmasked spectral coefficients of ``v × (∇×v)``; the caller's kernel masks them."""
    wh = _kernels.curl(*grid.axis_k, *grid.axis_keep, vh, np.empty_like(vh))
    v = _phys(grid, vh)
    x = _kernels.cross_phys(v, _phys(grid, wh), np.empty_like(v))
    return _fft.rfft3(x)


def nonlinear_mns(grid, vh, sign=1, check=True):
    """``N(v) = -R×(v×ω)`` with ``ω = ∇×v``."""
    if check:
        require_solenoidal(grid, vh)
    sign = ops.check_sign(sign)
    xh = _rotational_product(grid, vh)
    return _kernels.scaled_cross(*grid.axis_k, *grid.axis_keep, xh, complex(0.0, -sign),
                                 True, np.empty_like(xh))


def nonlinear_ns_rotational(grid, vh, sign=1, check=True):
    """``N(v) = P(v×ω)``.

    This is the Leray form of ``v_t - v×ω = -∇(p + |v|²/2) + Δv``. The
    composition ``R×R×`` of the Riesz cross product equals ``+P`` under the
    multiplier calculus, so the doubly-Riesz form is realized through ``P``.
    """
    if check:
        require_solenoidal(grid, vh)
    xh = _rotational_product(grid, vh)
    return _kernels.project(*grid.axis_k, *grid.axis_keep, xh, 1.0, np.empty_like(xh))


def nonlinear_ns_convective(grid, vh, sign=1, check=True):
    """``N(v) = -P((v·∇)v)``, the advective form of NS."""
    if check:
        require_solenoidal(grid, vh)
    v = _phys(grid, vh)
    adv = np.zeros_like(v)
    for j in range(3):
        adv += v[j] * _phys(grid, ops.partial(grid, vh, j))
    xh = _fft.rfft3(adv)
    return _kernels.project(*grid.axis_k, *grid.axis_keep, xh, -1.0, np.empty_like(xh))


def nonlinear_hall(grid, bh, sign=1, check=True):
    """``N(B) = -∇×(B×(∇×B))``."""
    if check:
        require_solenoidal(grid, bh)
    xh = _rotational_product(grid, bh)
    return _kernels.scaled_cross(*grid.axis_k, *grid.axis_keep, xh, -1j, False,
                                 np.empty_like(xh))


_DISPATCH = {
    ModelKind.MNS: nonlinear_mns,
    ModelKind.NS_ROTATIONAL: nonlinear_ns_rotational,
    ModelKind.NS_CONVECTIVE: nonlinear_ns_convective,
    ModelKind.HALL: nonlinear_hall,
}


def rhs_nonstiff(model, grid, uh, sign=1, check=True):
    """Nonlinear part ``N(u)`` of the chosen system."""
    try:
        fn = _DISPATCH[ModelKind.parse(model)]
    except KeyError:
        raise ValueError(f"unknown model {model!r}") from None
    return fn(grid, uh, sign=sign, check=check)
