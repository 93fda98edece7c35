"""Euler integration kernels for the crack-growth simulator.

These inner loops dominate runtime: every MCMC step and every
design-of-experiments row integrates one trajectory, so the kernels carry
a numba ``@njit`` fast path. A pure-numpy fallback with identical
semantics is selected with ``DEGFUSION_BACKEND=numpy``;
``DEGFUSION_BACKEND=numba`` forces the jitted path and fails loudly if
numba is unavailable. The default (``auto``) picks numba when importable.

Kernels return a failure index instead of raising so that the same source
compiles under numba; callers translate failures into exceptions.
"""

import os

import numpy as np

from .errors import ConfigurationError

BACKEND_ENV = "DEGFUSION_BACKEND"

_SQRT_PI = float(np.sqrt(np.pi))


def _paris_scalar(c, m, s_max, s_min, y_geo, a0, pts, cap, max_step):
    """Integrate da/dN = c * ((s_max - s_min) * sqrt(pi*a) * y_geo)**m.

    Explicit Euler on the (possibly irregular) cycle grid ``pts``.
    Returns ``(values, fail)`` where ``fail`` is 0 on success and the
    index of the first non-finite or runaway step otherwise. Values are
    clipped at ``cap``.
    """
    n = pts.shape[0]
    out = np.empty(n)
    a = a0 if a0 < cap else cap
    out[0] = a
    amp = (s_max - s_min) * y_geo * _SQRT_PI
    for i in range(1, n):
        dn = pts[i] - pts[i - 1]
        da = c * (amp * np.sqrt(a)) ** m * dn
        if not np.isfinite(da) or da > max_step:
            return out, i
        a = a + da
        if a > cap:
            a = cap
        out[i] = a
    return out, 0


def _paris_batch_numpy(X, pts, cap, max_step):
    """Vectorized-over-rows variant of :func:`_paris_scalar`.

    Steps the whole sample forward one grid interval at a time; per-row
    arithmetic is identical to the scalar kernel, so columns match looped
    scalar calls bit for bit. Returns ``(values, fail_step, fail_row)``.
    """
    n = X.shape[0]
    n_pts = pts.shape[0]
    out = np.empty((n_pts, n))
    a = np.minimum(X[:, 5], cap)
    out[0] = a
    c = X[:, 0]
    m = X[:, 1]
    amp = (X[:, 2] - X[:, 3]) * X[:, 4] * _SQRT_PI
    for i in range(1, n_pts):
        dn = pts[i] - pts[i - 1]
        da = c * (amp * np.sqrt(a)) ** m * dn
        bad = ~np.isfinite(da) | (da > max_step)
        if bad.any():
            return out, i, int(np.argmax(bad))
        a = np.minimum(a + da, cap)
        out[i] = a
    return out, 0, -1


def _paris_batch_loops(X, pts, cap, max_step):
    """Step-outer batch kernel with contiguous row writes.

    Identical arithmetic and failure semantics to the vectorized numpy
    batch; compiled under numba the inner loop is branch-cheap.
    """
    n = X.shape[0]
    n_pts = pts.shape[0]
    out = np.empty((n_pts, n))
    a = np.empty(n)
    amp = np.empty(n)
    for r in range(n):
        a[r] = X[r, 5] if X[r, 5] < cap else cap
        amp[r] = (X[r, 2] - X[r, 3]) * X[r, 4] * _SQRT_PI
        out[0, r] = a[r]
    for i in range(1, n_pts):
        dn = pts[i] - pts[i - 1]
        for r in range(n):
            da = X[r, 0] * (amp[r] * np.sqrt(a[r])) ** X[r, 1] * dn
            if not np.isfinite(da) or da > max_step:
                return out, i, r
            v = a[r] + da
            if v > cap:
                v = cap
            a[r] = v
            out[i, r] = v
    return out, 0, -1


def _numba_impls():
    from numba import njit

    scalar = njit(cache=True)(_paris_scalar)
    batch = njit(cache=True)(_paris_batch_loops)
    return scalar, batch


def _numpy_impls():
    return _paris_scalar, _paris_batch_numpy


def _select_backend():
    choice = os.environ.get(BACKEND_ENV, "auto").strip().lower() or "auto"
    if choice not in ("auto", "numba", "numpy"):
        raise ConfigurationError(
            f"{BACKEND_ENV} must be 'numba', 'numpy' or 'auto', got {choice!r}"
        )
    if choice == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        if choice == "numba":
            raise ConfigurationError(
                f"{BACKEND_ENV}=numba requested but numba is not importable"
            ) from None
        return "numpy"
    return "numba"


_BACKEND = _select_backend()
if _BACKEND == "numba":
    paris_scalar, paris_batch = _numba_impls()
else:
    paris_scalar, paris_batch = _numpy_impls()


def backend_name():
    """Name of the active kernel backend ('numba' or 'numpy')."""
    return _BACKEND
