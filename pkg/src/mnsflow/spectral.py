"""Periodic grids, transforms, dealiasing and pointwise products on [0, 2π)³.

Spectral fields are stored in half-spectrum (real-to-complex) layout:
a scalar has shape ``(n, n, n//2 + 1)`` and a vector ``(3, n, n, n//2 + 1)``.
Axis ``j`` of the array is coordinate ``x_{j+1}``. Only the last axis is
halved, so modes with ``k3 < 0`` are implied by Hermitian symmetry.

Physical fields have shape ``(n, n, n)`` or ``(3, n, n, n)`` and sample
the collocation points ``x = 2π (i, j, l) / n``.

Normalization: ``û_k = n^-3 Σ_x u(x) exp(-i k·x)``, so the inverse is the
plain Fourier sum and ``‖u‖²_{L²} = (2π)³ Σ_k |û_k|²``.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from mnsflow import _fft

__all__ = [
    "Grid",
    "GridMismatchError",
    "HermitianError",
    "NonFiniteError",
    "forward_transform",
    "inverse_transform",
    "hermitian_defect",
    "enforce_hermitian",
    "dealias",
    "l2_inner",
    "l2_norm",
    "full_spectrum",
    "coefficient",
    "pointwise_cross",
    "pointwise_dot",
    "advective_product",
]

VOLUME = (2.0 * np.pi) ** 3


class GridMismatchError(ValueError):
    pass


class HermitianError(ValueError):
    """Coefficients do not describe a real field."""


class NonFiniteError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    """Uniform cubic grid with ``n`` points per axis on the 2π-periodic torus.

    Wavenumbers are integers in ``{-n/2, ..., n/2 - 1}``; the Nyquist index
    maps to ``-n/2`` on every axis. The dealias cutoff is ``K = n // 3``.
    """

    n: int

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or isinstance(self.n, bool):
            raise ValueError(f"n must be an integer, got {self.n!r}")
        if self.n < 8 or self.n % 2:
            raise ValueError(f"n must be even and >= 8, got {self.n}")

    @property
    def cutoff(self):
        return self.n // 3

    @property
    def dx(self):
        return 2.0 * np.pi / self.n

    @property
    def spectral_shape(self):
        return (self.n, self.n, self.n // 2 + 1)

    @property
    def physical_shape(self):
        return (self.n, self.n, self.n)

    @cached_property
    def k(self):
        """Integer wavenumbers as three broadcastable float arrays."""
        n = self.n
        full = np.fft.fftfreq(n, 1.0 / n)
        half = np.arange(n // 2 + 1, dtype=float)
        half[-1] = -(n // 2)
        return (full.reshape(n, 1, 1), full.reshape(1, n, 1), half.reshape(1, 1, -1))

    @cached_property
    def kvec(self):
        """Wavenumbers broadcast to shape ``(3, *spectral_shape)``."""
        return np.stack(np.broadcast_arrays(*self.k))

    @cached_property
    def ksq(self):
        k1, k2, k3 = self.k
        return k1**2 + k2**2 + k3**2

    @cached_property
    def kabs(self):
        return np.sqrt(self.ksq)

    @cached_property
    def inv_kabs(self):
        """``1/|k|`` with the zero mode set to 0."""
        with np.errstate(divide="ignore"):
            out = 1.0 / self.kabs
        out[0, 0, 0] = 0.0
        return out

    @cached_property
    def inv_ksq(self):
        with np.errstate(divide="ignore"):
            out = 1.0 / self.ksq
        out[0, 0, 0] = 0.0
        return out

    @cached_property
    def axis_k(self):
        """Per-axis 1-D wavenumber vectors."""
        return tuple(np.ascontiguousarray(kj.ravel()) for kj in self.k)

    @cached_property
    def axis_keep(self):
        """Per-axis 1-D masks of ``|k_j| <= K``."""
        return tuple(np.abs(kj) <= self.cutoff for kj in self.axis_k)

    @cached_property
    def dealias_mask(self):
        return self.band_mask(self.cutoff)

    def band_mask(self, cutoff):
        """Cube mask keeping ``max_j |k_j| <= cutoff`` and dropping k = 0."""
        k1, k2, k3 = self.k
        mask = (np.abs(k1) <= cutoff) & (np.abs(k2) <= cutoff) & (np.abs(k3) <= cutoff)
        mask = np.array(mask)
        mask[0, 0, 0] = False
        return mask

    @cached_property
    def weight(self):
        """Multiplicity of each stored mode in a full-lattice sum."""
        w = np.full(self.spectral_shape, 2.0)
        w[..., 0] = 1.0
        w[..., -1] = 1.0
        return w

    @cached_property
    def x(self):
        pts = np.arange(self.n) * self.dx
        n = self.n
        return (pts.reshape(n, 1, 1), pts.reshape(1, n, 1), pts.reshape(1, 1, n))

    def wavenumber(self, index):
        """Integer wavenumber triple of a stored mode index."""
        i, j, l = index
        return tuple(int(self.k[a].ravel()[idx]) for a, idx in enumerate((i, j, l)))

    def locate(self, k):
        """Stored index of wavenumber ``k`` and whether it is held conjugated.

        Returns ``(index, conjugate)``; when ``conjugate`` is true the stored
        value is the coefficient of ``-k``.
        """
        n = self.n
        k = tuple(int(c) for c in k)
        if any(c < -(n // 2) or c >= n // 2 for c in k):
            raise ValueError(f"wavenumber {k} outside the grid")
        conj = k[2] < 0 and k[2] != -(n // 2)
        if conj:
            k = tuple(-c for c in k)
        return (k[0] % n, k[1] % n, k[2] % n if k[2] >= 0 else n // 2), conj

    def check_spectral(self, uh, vector=None):
        shape = np.shape(uh)
        if shape[-3:] != self.spectral_shape or len(shape) not in (3, 4):
            raise GridMismatchError(
                f"spectral array of shape {shape} does not live on the n={self.n} grid")
        if vector is not None and (len(shape) == 4) != vector:
            raise GridMismatchError(f"expected a {'vector' if vector else 'scalar'} field")
        if len(shape) == 4 and shape[0] != 3:
            raise GridMismatchError(f"vector field needs 3 components, got {shape[0]}")

    def check_physical(self, u, vector=None):
        shape = np.shape(u)
        if shape[-3:] != self.physical_shape or len(shape) not in (3, 4):
            raise GridMismatchError(
                f"physical array of shape {shape} does not live on the n={self.n} grid")
        if vector is not None and (len(shape) == 4) != vector:
            raise GridMismatchError(f"expected a {'vector' if vector else 'scalar'} field")
        if len(shape) == 4 and shape[0] != 3:
            raise GridMismatchError(f"vector field needs 3 components, got {shape[0]}")


def forward_transform(grid, u):
    """Physical samples to half-spectrum coefficients."""
    u = np.asarray(u, dtype=np.float64)
    grid.check_physical(u)
    if not np.all(np.isfinite(u)):
        bad = np.count_nonzero(~np.isfinite(u))
        raise NonFiniteError(f"cannot transform a field with {bad} non-finite samples")
    return _fft.rfft3(u)


def inverse_transform(grid, uh, check=True, rtol=1e-12):
    """Coefficients to physical samples.

    With ``check`` the coefficients must be Hermitian on the self-conjugate
    planes of the half spectrum (relative defect at most ``rtol``); otherwise
    the anti-Hermitian part would be silently dropped.
    """
    grid.check_spectral(uh)
    if check:
        defect = hermitian_defect(grid, uh)
        if defect > rtol:
            raise HermitianError(f"coefficients are not Hermitian (relative defect {defect:.3e})")
    return _fft.irfft3(uh, grid.n)


def _mirror_planes(grid, uh):
    """Self-conjugate planes of the half spectrum and their k -> -k mirrors."""
    n = grid.n
    rev = (-np.arange(n)) % n
    planes = uh[..., [0, n // 2]]
    mirrored = np.conj(planes[..., rev, :, :][..., :, rev, :])
    return planes, mirrored


def hermitian_defect(grid, uh):
    """Largest ``|û_k - conj(û_{-k})|`` relative to ``max |û|``."""
    planes, mirrored = _mirror_planes(grid, uh)
    scale = np.max(np.abs(uh)) if uh.size else 0.0
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(planes - mirrored)) / scale)


def enforce_hermitian(grid, uh):
    """Replace the self-conjugate planes by their Hermitian part."""
    out = np.array(uh, dtype=complex)
    planes, mirrored = _mirror_planes(grid, out)
    out[..., [0, grid.n // 2]] = 0.5 * (planes + mirrored)
    return out


def dealias(grid, uh, cutoff=None):
    """Zero every mode with some ``|k_j| > cutoff`` (default ``n // 3``) and the mean.

    Idempotent. ``cutoff`` may be lowered to band-limit a field.
    """
    grid.check_spectral(uh)
    mask = grid.dealias_mask if cutoff is None else grid.band_mask(cutoff)
    return uh * mask


def l2_inner(grid, a, b):
    """``⟨a, b⟩ = (2π)³ Σ_k â_k · conj(b̂_k)`` over the full lattice (real part)."""
    grid.check_spectral(a)
    grid.check_spectral(b)
    if np.shape(a) != np.shape(b):
        raise GridMismatchError(f"cannot pair fields of shapes {np.shape(a)} and {np.shape(b)}")
    prod = a.real * b.real + a.imag * b.imag
    if prod.ndim == 4:
        prod = prod.sum(axis=0)
    return VOLUME * float(np.sum(grid.weight * prod))


def l2_norm(grid, a):
    return np.sqrt(max(l2_inner(grid, a, a), 0.0))


def full_spectrum(grid, uh):
    """Expand half-spectrum coefficients to the full ``n³`` lattice.

    The result is indexed like ``numpy.fft.fftn`` output.
    """
    grid.check_spectral(uh)
    n = grid.n
    out = np.empty(uh.shape[:-1] + (n,), dtype=complex)
    out[..., : n // 2 + 1] = uh
    rev = (-np.arange(n)) % n
    hi = np.arange(n // 2 + 1, n)
    src = uh[..., rev, :, :][..., :, rev, :]
    out[..., hi] = np.conj(src[..., n - hi])
    return out


def coefficient(grid, uh, k):
    """Coefficient of wavenumber ``k`` (integer triple), any sign."""
    index, conj = grid.locate(k)
    value = uh[(Ellipsis,) + index]
    return np.conj(value) if conj else value


def _same_physical(grid, *fields):
    for f in fields:
        grid.check_physical(f, vector=True)


def pointwise_cross(grid, u, w):
    """``u × w`` at every collocation point."""
    _same_physical(grid, u, w)
    return np.stack([
        u[1] * w[2] - u[2] * w[1],
        u[2] * w[0] - u[0] * w[2],
        u[0] * w[1] - u[1] * w[0],
    ])


def pointwise_dot(grid, u, w):
    _same_physical(grid, u, w)
    return u[0] * w[0] + u[1] * w[1] + u[2] * w[2]


def advective_product(grid, u, grad_u):
    """``(u·∇)u`` from samples of ``u`` and ``grad_u[j, i] = ∂_j u_i``."""
    grid.check_physical(u, vector=True)
    if np.shape(grad_u) != (3, 3) + grid.physical_shape:
        raise GridMismatchError(f"gradient has shape {np.shape(grad_u)}")
    return u[0] * grad_u[0] + u[1] * grad_u[1] + u[2] * grad_u[2]
