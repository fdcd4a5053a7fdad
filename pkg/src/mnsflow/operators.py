"""Exact Fourier-multiplier operators on half-spectrum fields.

Every operator whose symbol carries ``1/|k|`` returns 0 at the zero mode.
None of them truncate; callers dealias where products are involved.

The Riesz transform has symbol ``σ i k_j / |k|``. ``σ = +1`` corresponds to
the ``exp(+2πi x·ξ)`` forward convention; ``σ = -1`` to the opposite one.

Nyquist modes carry ``k_j = -n/2``, which is its own negation on the grid,
so odd symbols (derivatives, Riesz transforms, curl) map real fields to real
fields only when the input has no Nyquist content. Every dealiased field
qualifies.
"""

import numpy as np

__all__ = [
    "check_sign",
    "partial",
    "gradient",
    "lambda_pow",
    "riesz",
    "riesz_vector",
    "riesz_dot",
    "riesz_cross",
    "curl_vec",
    "divergence",
    "leray_project",
    "heat_factor",
]


def check_sign(sign):
    if sign not in (1, -1):
        raise ValueError(f"Riesz sign must be +1 or -1, got {sign!r}")
    return int(sign)


def partial(grid, uh, j):
    """∂/∂x_{j+1}; ``j`` is the 0-based axis."""
    return 1j * grid.k[j] * uh


def gradient(grid, gh):
    grid.check_spectral(gh, vector=False)
    return np.stack([1j * kj * gh for kj in grid.k])


_pow_cache = {}


def _kpow(grid, a):
    key = (grid.n, float(a))
    out = _pow_cache.get(key)
    if out is None:
        with np.errstate(divide="ignore"):
            out = grid.kabs ** float(a)
        out[0, 0, 0] = 0.0
        _pow_cache[key] = out
    return out


def lambda_pow(grid, uh, a):
    """Fractional Laplacian power ``Λ^a = (-Δ)^{a/2}``: multiply by ``|k|^a``.

    The zero mode is mapped to 0 for every ``a``, so ``Λ^a Λ^b = Λ^{a+b}``
    holds exactly on mean-free fields.
    """
    if a < -1:
        raise ValueError(f"Λ^a supported for a >= -1, got {a}")
    return _kpow(grid, a) * uh


def riesz(grid, uh, j, sign=1):
    """Riesz transform ``R_j`` (symbol ``σ i k_j/|k|``), 0-based axis ``j``."""
    sign = check_sign(sign)
    return (sign * 1j) * (grid.k[j] * grid.inv_kabs) * uh


def riesz_vector(grid, fh, sign=1):
    """``R f = (R_1 f, R_2 f, R_3 f)`` for a scalar ``f``."""
    return np.stack([riesz(grid, fh, j, sign) for j in range(3)])


def riesz_dot(grid, uh, sign=1):
    """``R·u = R_1 u_1 + R_2 u_2 + R_3 u_3``."""
    return sum(riesz(grid, uh[j], j, sign) for j in range(3))


def _cross_k(grid, uh):
    k1, k2, k3 = grid.k
    return np.stack([
        k2 * uh[2] - k3 * uh[1],
        k3 * uh[0] - k1 * uh[2],
        k1 * uh[1] - k2 * uh[0],
    ])


def curl_vec(grid, uh):
    """``∇×u``: symbol ``i k × û``."""
    grid.check_spectral(uh, vector=True)
    return 1j * _cross_k(grid, uh)


def divergence(grid, uh):
    grid.check_spectral(uh, vector=True)
    k1, k2, k3 = grid.k
    return 1j * (k1 * uh[0] + k2 * uh[1] + k3 * uh[2])


def riesz_cross(grid, uh, sign=1):
    """``R×u = (R_2u_3 - R_3u_2, R_3u_1 - R_1u_3, R_1u_2 - R_2u_1)``.

    Symbol ``σ (i k/|k|) ×``; the output is solenoidal and
    ``Λ R×u = σ ∇×u``.
    """
    sign = check_sign(sign)
    grid.check_spectral(uh, vector=True)
    return ((sign * 1j) * grid.inv_kabs) * _cross_k(grid, uh)


def leray_project(grid, uh):
    """Projection onto solenoidal fields, ``û - k (k·û)/|k|²``."""
    grid.check_spectral(uh, vector=True)
    k1, k2, k3 = grid.k
    kdotu = (k1 * uh[0] + k2 * uh[1] + k3 * uh[2]) * grid.inv_ksq
    return np.stack([uh[0] - k1 * kdotu, uh[1] - k2 * kdotu, uh[2] - k3 * kdotu])


_heat_cache = {}


def heat_multiplier(grid, tau):
    if tau < 0:
        raise ValueError(f"heat factor needs tau >= 0, got {tau}")
    key = (grid.n, float(tau))
    out = _heat_cache.get(key)
    if out is None:
        if len(_heat_cache) > 64:
            _heat_cache.clear()
        out = np.exp(-grid.ksq * float(tau))
        _heat_cache[key] = out
    return out


def heat_factor(grid, uh, tau):
    """Exact heat semigroup ``exp(τΔ)``: multiply by ``exp(-|k|² τ)``."""
    return heat_multiplier(grid, tau) * uh
