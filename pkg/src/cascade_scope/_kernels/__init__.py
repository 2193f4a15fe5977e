"""Hot loops with a compiled backend and a numpy fallback.

The compiled extension is used when it was built and importable; setting
``CASCADE_SCOPE_PUREPY=1`` forces the numpy path.  ``BACKEND`` names the
active one.
"""

from __future__ import annotations

import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("CASCADE_SCOPE_PUREPY", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _compiled
    except ImportError:
        _compiled = None
    else:
        _impl = _compiled
        BACKEND = "cython"
else:
    _compiled = None


def available_backends() -> dict:
    out = {"python": _pykernels}
    if _compiled is not None:
        out["cython"] = _compiled
    return out


def _backend(name):
    if name is None:
        return _impl
    try:
        return available_backends()[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} is not available") from None


def geometry(grid):
    """Pad grid geometry to three axes for the kernels."""
    origin = np.zeros(3)
    spacing = np.ones(3)
    periodic = np.zeros(3, dtype=np.int32)
    for a in range(grid.dim):
        origin[a] = grid.origin[a]
        spacing[a] = grid.spacing[a]
        periodic[a] = int(grid.periodic[a])
    return origin, spacing, periodic


def as4d(values, grid) -> np.ndarray:
    """Reshape ``(ncomp, *grid.shape)`` or a scalar grid array to ``(ncomp, n0, n1, n2)``."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.shape == grid.shape:
        arr = arr[None]
    pad = (1,) * (3 - grid.dim)
    return np.ascontiguousarray(arr.reshape(arr.shape[:1] + grid.shape + pad))


def pad_centers(centers, grid) -> np.ndarray:
    c = np.asarray(centers, dtype=np.float64)
    if c.ndim == 1:
        c = c[:, None]
    out = np.zeros((c.shape[0], 3))
    out[:, :grid.dim] = c[:, :grid.dim]
    return out


def ball_sums(values, grid, centers, R, m, power=1.0, mode=0, lapdim=None, backend=None):
    """Cutoff-weighted sums around each centre, times the cell volume.

    ``mode`` 0 weights with ``psi**power``, 1 with ``lap psi`` (in ``lapdim``
    dimensions) and 2 dots a vector field with ``grad psi``.
    """
    impl = _backend(backend)
    origin, spacing, periodic = geometry(grid)
    vals = as4d(values, grid)
    cen = pad_centers(centers, grid)
    lapdim = grid.dim if lapdim is None else lapdim
    raw = impl.ball_sums(vals, origin, spacing, periodic, grid.dim, cen,
                         float(R), int(m), float(power), int(mode), int(lapdim))
    return np.asarray(raw) * grid.cell_volume


def coherence_sup(xi, valid, offsets, denom, periodic, backend=None):
    impl = _backend(backend)
    xi = np.ascontiguousarray(xi, dtype=np.float64)
    valid = np.ascontiguousarray(valid, dtype=np.uint8)
    offsets = np.ascontiguousarray(offsets, dtype=np.int64)
    denom = np.ascontiguousarray(denom, dtype=np.float64)
    periodic = np.ascontiguousarray(periodic, dtype=np.int32)
    return np.asarray(impl.coherence_sup(xi, valid, offsets, denom, periodic))


def pairs_sup(X, xiX, Y, xiY, gamma, rmax=None, backend=None):
    """Supremum of the coherence ratio over all distinct point pairs, and the pair count."""
    impl = _backend(backend)
    c = lambda a: np.ascontiguousarray(a, dtype=np.float64)
    best, count = impl.pairs_sup(c(X), c(xiX), c(Y), c(xiY), float(gamma),
                                 -1.0 if rmax is None else float(rmax))
    return float(best), int(count)
