"""Real-to-complex FFT engine shared by every module.

FFTW (via pyFFTW) is used when importable, with plans built under
FFTW_ESTIMATE so that serial runs are bitwise reproducible across processes.
Otherwise scipy.fft is used. Both carry the ``forward`` normalization:
the forward transform is scaled by n^-3 and the inverse is unscaled.
"""

import threading

import numpy as np

try:
    import pyfftw
    import pyfftw.builders
except ImportError:  # pragma: no cover - exercised only without pyfftw
    pyfftw = None
    import scipy.fft

__all__ = ["backend_name", "rfft3", "irfft3"]

_lock = threading.Lock()
_plans = {}


def backend_name():
    if pyfftw is not None:
        return f"fftw-{pyfftw.__version__}"
    return "scipy.fft"


def _plan(kind, shape, n):
    key = (kind, shape)
    plan = _plans.get(key)
    if plan is None:
        if kind == "r2c":
            a = pyfftw.empty_aligned(shape, dtype="float64")
            plan = pyfftw.builders.rfftn(
                a, axes=(-3, -2, -1), threads=1, planner_effort="FFTW_ESTIMATE",
                norm="forward")
        else:
            a = pyfftw.empty_aligned(shape, dtype="complex128")
            plan = pyfftw.builders.irfftn(
                a, s=(n, n, n), axes=(-3, -2, -1), threads=1,
                planner_effort="FFTW_ESTIMATE", norm="forward")
        _plans[key] = plan
    return plan


def rfft3(u):
    """Forward transform over the last three axes, scaled by n^-3."""
    u = np.asarray(u, dtype=np.float64)
    if pyfftw is None:
        return scipy.fft.rfftn(u, axes=(-3, -2, -1), norm="forward")
    with _lock:
        plan = _plan("r2c", u.shape, u.shape[-1])
        out = pyfftw.empty_aligned(plan.output_shape, dtype="complex128")
        return plan(u, out)


def irfft3(uh, n):
    """Inverse of :func:`rfft3`; ``uh`` is left untouched."""
    if pyfftw is None:
        return scipy.fft.irfftn(uh, s=(n, n, n), axes=(-3, -2, -1), norm="forward")
    with _lock:
        plan = _plan("c2r", uh.shape, n)
        # c2r plans clobber their input buffer, so never hand them uh itself
        plan.input_array[...] = uh
        out = pyfftw.empty_aligned(plan.output_shape, dtype="float64")
        return plan(None, out)
