"""Fused loops for the nonlinear-term hot path.

Each spectral kernel visits only the modes kept by the dealias mask (zero
mode excluded) and writes zeros elsewhere, so applying it to an unmasked
product is the same as dealiasing first. No fast-math: the loops must give
the same IEEE results as the equivalent numpy expressions.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def cross_phys(a, b, out):
    n0, n1, n2 = a.shape[1], a.shape[2], a.shape[3]
    for i in range(n0):
        for j in range(n1):
            for l in range(n2):
                a0 = a[0, i, j, l]
                a1 = a[1, i, j, l]
                a2 = a[2, i, j, l]
                b0 = b[0, i, j, l]
                b1 = b[1, i, j, l]
                b2 = b[2, i, j, l]
                out[0, i, j, l] = a1 * b2 - a2 * b1
                out[1, i, j, l] = a2 * b0 - a0 * b2
                out[2, i, j, l] = a0 * b1 - a1 * b0
    return out


@njit(cache=True)
def curl(k1, k2, k3, keep1, keep2, keep3, uh, out):
    """``out = i k × uh`` on kept modes, 0 elsewhere."""
    out[:] = 0
    n0, n1, n2 = uh.shape[1], uh.shape[2], uh.shape[3]
    for i in range(n0):
        if not keep1[i]:
            continue
        a = k1[i]
        for j in range(n1):
            if not keep2[j]:
                continue
            b = k2[j]
            for l in range(n2):
                if not keep3[l]:
                    continue
                c = k3[l]
                u0 = uh[0, i, j, l]
                u1 = uh[1, i, j, l]
                u2 = uh[2, i, j, l]
                out[0, i, j, l] = 1j * (b * u2 - c * u1)
                out[1, i, j, l] = 1j * (c * u0 - a * u2)
                out[2, i, j, l] = 1j * (a * u1 - b * u0)
    out[:, 0, 0, 0] = 0
    return out


@njit(cache=True)
def scaled_cross(k1, k2, k3, keep1, keep2, keep3, xh, coef, inverse_norm, out):
    """``out = coef · (k × xh) / |k|^p`` on kept modes, ``p = 1`` if ``inverse_norm`` else 0."""
    out[:] = 0
    n0, n1, n2 = xh.shape[1], xh.shape[2], xh.shape[3]
    for i in range(n0):
        if not keep1[i]:
            continue
        a = k1[i]
        for j in range(n1):
            if not keep2[j]:
                continue
            b = k2[j]
            for l in range(n2):
                if not keep3[l]:
                    continue
                c = k3[l]
                ksq = a * a + b * b + c * c
                if ksq == 0.0:
                    continue
                s = coef / np.sqrt(ksq) if inverse_norm else coef
                x0 = xh[0, i, j, l]
                x1 = xh[1, i, j, l]
                x2 = xh[2, i, j, l]
                out[0, i, j, l] = s * (b * x2 - c * x1)
                out[1, i, j, l] = s * (c * x0 - a * x2)
                out[2, i, j, l] = s * (a * x1 - b * x0)
    return out


@njit(cache=True)
def project(k1, k2, k3, keep1, keep2, keep3, xh, coef, out):
    """``out = coef · (xh - k (k·xh)/|k|²)`` on kept modes."""
    out[:] = 0
    n0, n1, n2 = xh.shape[1], xh.shape[2], xh.shape[3]
    for i in range(n0):
        if not keep1[i]:
            continue
        a = k1[i]
        for j in range(n1):
            if not keep2[j]:
                continue
            b = k2[j]
            for l in range(n2):
                if not keep3[l]:
                    continue
                c = k3[l]
                ksq = a * a + b * b + c * c
                if ksq == 0.0:
                    continue
                x0 = xh[0, i, j, l]
                x1 = xh[1, i, j, l]
                x2 = xh[2, i, j, l]
                d = (a * x0 + b * x1 + c * x2) / ksq
                out[0, i, j, l] = coef * (x0 - a * d)
                out[1, i, j, l] = coef * (x1 - b * d)
                out[2, i, j, l] = coef * (x2 - c * d)
    return out


@njit(cache=True)
def stage(keep1, keep2, keep3, e_out, x, e_in, y, a, out):
    """``out = e_out·x + a·(e_in·y)`` on kept modes (heat factors are per-mode reals)."""
    out[:] = 0
    n0, n1, n2 = x.shape[1], x.shape[2], x.shape[3]
    for c in range(3):
        for i in range(n0):
            if not keep1[i]:
                continue
            for j in range(n1):
                if not keep2[j]:
                    continue
                for l in range(n2):
                    if keep3[l]:
                        out[c, i, j, l] = (e_out[i, j, l] * x[c, i, j, l]
                                           + a * (e_in[i, j, l] * y[c, i, j, l]))
    out[:, 0, 0, 0] = 0
    return out


@njit(cache=True)
def rk4_combine(keep1, keep2, keep3, e_full, e_half, u, k1, k2, k3, k4, dt, out):
    """``out = E u + dt/6 (E k1 + 2 E½ (k2 + k3) + k4)`` on kept modes."""
    out[:] = 0
    n0, n1, n2 = u.shape[1], u.shape[2], u.shape[3]
    w = dt / 6.0
    for c in range(3):
        for i in range(n0):
            if not keep1[i]:
                continue
            for j in range(n1):
                if not keep2[j]:
                    continue
                for l in range(n2):
                    if keep3[l]:
                        ef = e_full[i, j, l]
                        eh = e_half[i, j, l]
                        out[c, i, j, l] = ef * u[c, i, j, l] + w * (
                            ef * k1[c, i, j, l]
                            + 2.0 * eh * (k2[c, i, j, l] + k3[c, i, j, l])
                            + k4[c, i, j, l])
    out[:, 0, 0, 0] = 0
    return out
