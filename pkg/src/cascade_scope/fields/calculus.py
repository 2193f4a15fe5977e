"""Spectral and second-order finite-difference calculus on structured grids.

Vector fields carry their components first.  On a 2D grid a three-component
field is z-independent, so every z-derivative is identically zero.
"""

from __future__ import annotations

import numpy as np

from .grid import Grid, GridError, ScalarField, VectorField

SCHEMES = ("spectral", "central2")
KINDS = ("gradient", "divergence", "curl", "laplacian")


def _spectral_diff(values: np.ndarray, grid: Grid, axis: int, order: int = 1) -> np.ndarray:
    n = grid.resolution[axis]
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=grid.spacing[axis])
    if order % 2 == 1:
        # the Nyquist mode has no odd-derivative partner
        k = k.copy()
        k[n // 2] = 0.0
    shape = [1] * values.ndim
    shape[axis] = n
    factor = ((1j * k) ** order).reshape(shape)
    return np.fft.ifft(np.fft.fft(values, axis=axis) * factor, axis=axis).real


def _central_diff(values: np.ndarray, grid: Grid, axis: int) -> np.ndarray:
    h = grid.spacing[axis]
    if grid.periodic[axis]:
        return (np.roll(values, -1, axis=axis) - np.roll(values, 1, axis=axis)) / (2.0 * h)
    return np.gradient(values, h, axis=axis, edge_order=2)


def _central_second(values: np.ndarray, grid: Grid, axis: int) -> np.ndarray:
    h = grid.spacing[axis]
    if grid.periodic[axis]:
        return (np.roll(values, -1, axis=axis) - 2.0 * values + np.roll(values, 1, axis=axis)) / h ** 2
    first = np.gradient(values, h, axis=axis, edge_order=2)
    return np.gradient(first, h, axis=axis, edge_order=2)


def partial(values: np.ndarray, grid: Grid, axis: int, scheme: str = "spectral") -> np.ndarray:
    """First derivative of a grid-shaped array along ``axis``.

    Axes beyond the grid dimension (the embedded z direction) give zeros.
    """
    if axis >= grid.dim:
        return np.zeros_like(values, dtype=np.float64)
    if scheme == "spectral":
        grid.require_spectral()
        return _spectral_diff(values, grid, axis)
    if scheme == "central2":
        return _central_diff(values, grid, axis)
    raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")


def _laplacian_array(values: np.ndarray, grid: Grid, scheme: str) -> np.ndarray:
    out = np.zeros_like(values, dtype=np.float64)
    for a in range(grid.dim):
        if scheme == "spectral":
            out += _spectral_diff(values, grid, a, order=2)
        else:
            out += _central_second(values, grid, a)
    return out


def gradient_tensor(u: VectorField, scheme: str = "spectral") -> np.ndarray:
    """``G[i, j] = d u_j / d x_i`` with shape ``(3, ncomp, *grid.shape)``."""
    nd = max(u.grid.dim, u.ncomp)
    return np.stack([
        np.stack([partial(u.values[j], u.grid, i, scheme) for j in range(u.ncomp)])
        for i in range(nd)
    ])


def curl_array(values: np.ndarray, grid: Grid, scheme: str = "spectral") -> np.ndarray:
    if values.shape[0] != 3:
        raise GridError("curl needs a three-component vector field")
    d = lambda comp, axis: partial(values[comp], grid, axis, scheme)
    return np.stack([
        d(2, 1) - d(1, 2),
        d(0, 2) - d(2, 0),
        d(1, 0) - d(0, 1),
    ])


def derivative(fld, kind: str, scheme: str = "spectral"):
    """Apply one differential operator to a field.

    ``gradient`` of a scalar gives one component per grid axis; ``laplacian``
    acts componentwise on vectors.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    grid = fld.grid
    if scheme == "spectral":
        grid.require_spectral()
    if kind == "gradient":
        if not isinstance(fld, ScalarField):
            raise GridError("gradient is defined for scalar fields; use gradient_tensor for vectors")
        vals = np.stack([partial(fld.values, grid, a, scheme) for a in range(grid.dim)])
        return VectorField(grid, vals, fld.time)
    if kind == "divergence":
        if not isinstance(fld, VectorField):
            raise GridError("divergence needs a vector field")
        vals = sum(partial(fld.values[a], grid, a, scheme) for a in range(grid.dim))
        return ScalarField(grid, vals, fld.time)
    if kind == "curl":
        if not isinstance(fld, VectorField):
            raise GridError("curl needs a vector field")
        return VectorField(grid, curl_array(fld.values, grid, scheme), fld.time)
    if kind == "laplacian":
        if isinstance(fld, ScalarField):
            return ScalarField(grid, _laplacian_array(fld.values, grid, scheme), fld.time)
        vals = np.stack([_laplacian_array(c, grid, scheme) for c in fld.values])
        return VectorField(grid, vals, fld.time)
    raise ValueError(f"unknown derivative kind {kind!r}; expected one of {KINDS}")


def velocity_from_vorticity(omega: VectorField, return_mean: bool = False):
    """Recover the zero-mean, divergence-free velocity whose curl is ``omega``.

    Solves ``-|k|^2 u_hat = -i k x omega_hat`` mode by mode.  The mean of each
    vorticity component cannot be produced by a periodic velocity and is
    dropped; with ``return_mean=True`` it is returned alongside the field.
    """
    grid = omega.grid
    grid.require_spectral()
    if omega.ncomp != 3:
        raise GridError("vorticity must have three components")
    axes = tuple(range(1, grid.dim + 1))
    w_hat = np.fft.fftn(omega.values, axes=axes)
    ks = grid.wavenumbers()
    kvec = []
    for a in range(3):
        if a < grid.dim:
            shape = [1] * grid.dim
            shape[a] = grid.resolution[a]
            k = ks[a].copy()
            k[grid.resolution[a] // 2] = 0.0
            kvec.append(k.reshape(shape))
        else:
            kvec.append(np.zeros([1] * grid.dim))
    k2 = sum(k ** 2 for k in kvec)
    k2 = np.broadcast_to(k2, grid.shape).copy()
    zero = k2 == 0.0
    k2[zero] = 1.0
    mean = w_hat[(slice(None),) + (0,) * grid.dim].real / np.prod(grid.resolution)
    cross = np.stack([
        kvec[1] * w_hat[2] - kvec[2] * w_hat[1],
        kvec[2] * w_hat[0] - kvec[0] * w_hat[2],
        kvec[0] * w_hat[1] - kvec[1] * w_hat[0],
    ])
    u_hat = 1j * cross / k2
    u_hat[:, zero] = 0.0
    u = np.fft.ifftn(u_hat, axes=axes).real
    out = VectorField(grid, u, omega.time)
    if return_mean:
        return out, mean
    return out


def solenoidal_projection(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Remove the gradient part and the mean of a periodic three-component field."""
    grid.require_spectral()
    axes = tuple(range(1, grid.dim + 1))
    v_hat = np.fft.fftn(values, axes=axes)
    ks = grid.wavenumbers()
    kvec = []
    for a in range(3):
        if a < grid.dim:
            shape = [1] * grid.dim
            shape[a] = grid.resolution[a]
            kvec.append(ks[a].reshape(shape))
        else:
            kvec.append(np.zeros([1] * grid.dim))
    k2 = np.broadcast_to(sum(k ** 2 for k in kvec), grid.shape).copy()
    zero = k2 == 0.0
    k2[zero] = 1.0
    kdotv = sum(kvec[a] * v_hat[a] for a in range(3))
    out = np.stack([v_hat[a] - kvec[a] * kdotv / k2 for a in range(3)])
    out[:, zero] = 0.0
    return np.fft.ifftn(out, axes=axes).real
