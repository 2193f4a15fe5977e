"""Cutoff-weighted ball integrals in three dimensions.

Two quadratures are available.  ``spectral`` (the default on fully periodic
grids) treats the samples as a trigonometric polynomial and pairs its
Fourier coefficients with the continuum Fourier transform of the radial
cutoff, which is exact for band-limited data.  ``direct`` sums over grid
cells: on a 3D grid through the compiled ball-sum kernel, and on a 2D grid
carrying a z-independent (embedded) field by replacing the radial cutoff
with its column integral, tabulated once per cutoff power.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline

from . import _kernels
from .cutoffs import radial_profile

_TABLE_POINTS = 40_001
_GL_NODES = 48
_SPEC_NODES = 24


def spectral_capable(grid) -> bool:
    return grid.fully_periodic and all(r % 2 == 0 for r in grid.resolution)


def _gauss(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _piece(s, lo, hi, fn, cubic_end):
    """``int_lo^hi fn(sqrt(s^2 + z^2)) dz`` per row, GL on [0, 1]."""
    v, w = _gauss(_GL_NODES)
    width = (hi - lo)[:, None]
    if cubic_end:
        # z = hi - width (1 - v)^3 smooths a fractional power at the outer edge
        z = hi[:, None] - width * (1.0 - v[None, :]) ** 3
        jac = 3.0 * width * (1.0 - v[None, :]) ** 2
    else:
        z = lo[:, None] + width * v[None, :]
        jac = np.broadcast_to(width, z.shape)
    sigma = np.sqrt(s[:, None] ** 2 + z ** 2)
    return np.sum(fn(sigma) * jac * w[None, :], axis=1)


@lru_cache(maxsize=32)
def column_tables(m: int, power: float):
    """Tabulated column integrals on ``s in [0, 2]`` (unit radius).

    Returns ``(s, P, G, L)`` with ``P = int psi^power``,
    ``G = int psi_s / sigma`` and ``L = int (psi_ss + 2 psi_s / sigma)``, all
    over ``zeta`` in R with ``sigma = sqrt(s^2 + zeta^2)``.
    """
    s = np.linspace(0.0, 2.0, _TABLE_POINTS)
    z_in = np.sqrt(np.clip(1.0 - s * s, 0.0, None))
    z_out = np.sqrt(np.clip(4.0 - s * s, 0.0, None))

    def pw(sig):
        p = radial_profile(sig, m)[0]
        return p if power == 1.0 else p ** power

    def grad(sig):
        return radial_profile(sig, m)[1] / sig

    def lap(sig):
        _, d1, d2 = radial_profile(sig, m)
        return d2 + 2.0 * d1 / sig

    P = 2.0 * (z_in + _piece(s, z_in, z_out, pw, True))
    G = 2.0 * _piece(s, z_in, z_out, grad, False)
    L = 2.0 * _piece(s, z_in, z_out, lap, False)
    for arr in (P, G, L):
        arr[-1] = 0.0
        arr.flags.writeable = False
    return s, P, G, L


@lru_cache(maxsize=32)
def _column_splines(m: int, power: float):
    s, P, G, L = column_tables(m, power)
    return tuple(CubicSpline(s, arr, bc_type="natural") for arr in (P, G, L))


def _column_sums(values, grid, centers, R, m, power, mode):
    """Column-integrated version of the kernel's three modes on a 2D grid."""
    P, G, L = _column_splines(int(m), float(power) if mode == 0 else 1.0)
    vals = np.asarray(values, dtype=np.float64)
    h = grid.spacing
    out = np.zeros(len(centers))
    for c, ctr in enumerate(centers):
        idx, disp = [], []
        for a in range(2):
            lo = math.ceil((ctr[a] - 2 * R - grid.origin[a]) / h[a] - 0.5)
            hi = math.floor((ctr[a] + 2 * R - grid.origin[a]) / h[a] - 0.5)
            if not grid.periodic[a]:
                lo, hi = max(lo, 0), min(hi, grid.resolution[a] - 1)
            i = np.arange(lo, hi + 1)
            idx.append(np.mod(i, grid.resolution[a]))
            disp.append(grid.origin[a] + (i + 0.5) * h[a] - ctr[a])
        dx, dy = np.meshgrid(disp[0], disp[1], indexing="ij")
        s = np.sqrt(dx * dx + dy * dy) / R
        inside = s < 2.0
        sel = np.ix_(idx[0], idx[1])
        if mode == 0:
            w = P(np.minimum(s, 2.0)) * R
            acc = vals[0][sel] * w if vals.ndim == 3 else vals[sel] * w
        elif mode == 1:
            w = L(np.minimum(s, 2.0)) / R
            acc = (vals[0][sel] if vals.ndim == 3 else vals[sel]) * w
        else:
            g = G(np.minimum(s, 2.0)) / R
            acc = (vals[0][sel] * dx + vals[1][sel] * dy) * g
        out[c] = np.sum(np.where(inside, acc, 0.0))
    return out * grid.cell_volume


def _ramp_nodes(qmax: float):
    """Gauss-Legendre nodes on the ramp ``s in [1, 2]`` fine enough for ``sin(q s)``, ``q <= qmax``."""
    pieces = int(math.ceil(qmax / 10.0)) + 4
    v, w = _gauss(_SPEC_NODES)
    edges = np.linspace(1.0, 2.0, pieces + 1)
    s_list, w_list = [], []
    for j, (a, b) in enumerate(zip(edges, edges[1:])):
        if j == pieces - 1:
            # s = b - (b - a)(1 - v)^3 flattens a fractional power at s = 2
            s_list.append(b - (b - a) * (1.0 - v) ** 3)
            w_list.append(3.0 * (b - a) * (1.0 - v) ** 2 * w)
        else:
            s_list.append(a + (b - a) * v)
            w_list.append((b - a) * w)
    return np.concatenate(s_list), np.concatenate(w_list)


def radial_transform(q, m: int, power: float = 1.0) -> np.ndarray:
    """``int_{R^3} psi(|y|)**power exp(-i q . y) dy`` for the unit-radius cutoff.

    The plateau ``|y| <= 1`` contributes in closed form; the ramp is
    integrated by Gauss-Legendre.
    """
    q = np.asarray(q, dtype=np.float64)
    out = np.empty_like(q)
    small = q < 1e-3
    qs = q[small]
    # 4 pi (sin q - q cos q) / q^3, Taylor series near zero
    out[small] = 4.0 * math.pi * (1.0 / 3.0 - qs ** 2 / 30.0 + qs ** 4 / 840.0 - qs ** 6 / 45360.0)
    ql = q[~small]
    out[~small] = 4.0 * math.pi * (np.sin(ql) - ql * np.cos(ql)) / ql ** 3
    if q.size == 0:
        return out
    s, w = _ramp_nodes(float(np.max(q)))
    prof = radial_profile(s, m)[0]
    if power != 1.0:
        prof = prof ** power
    base = 4.0 * math.pi * w * prof * s * s
    for lo in range(0, q.size, 4096):
        qq = q.ravel()[lo:lo + 4096, None]
        x = qq * s[None, :]
        with np.errstate(invalid="ignore", divide="ignore"):
            j0 = np.where(x > 0, np.sin(x) / np.where(x > 0, x, 1.0), 1.0)
        out.ravel()[lo:lo + 4096] += j0 @ base
    return out


@lru_cache(maxsize=64)
def _spectral_weights(shape, spacing, R, m, power):
    """Cutoff transform and wave vectors on the FFT grid (last axis halved)."""
    dim = len(shape)
    ks = []
    for a in range(dim):
        if a == dim - 1:
            k = 2.0 * np.pi * np.fft.rfftfreq(shape[a], d=spacing[a])
        else:
            k = 2.0 * np.pi * np.fft.fftfreq(shape[a], d=spacing[a])
        ks.append(k)
    mesh = np.meshgrid(*ks, indexing="ij")
    k2 = sum(k * k for k in mesh)
    uniq, inv = np.unique(k2, return_inverse=True)
    hat = (radial_transform(np.sqrt(uniq) * R, m, power) * R ** 3)[inv].reshape(k2.shape)
    # Hermitian half-spectrum: interior columns stand for two modes
    n_last = shape[-1]
    mult = np.full(hat.shape[-1], 2.0)
    mult[0] = 1.0
    if n_last % 2 == 0:
        mult[-1] = 1.0
    odd = []
    for a in range(dim):
        k = mesh[a].copy()
        n = shape[a]
        if n % 2 == 0:
            # no odd-derivative partner for the Nyquist mode
            if a == dim - 1:
                k[..., -1] = 0.0
            else:
                idx = [slice(None)] * dim
                idx[a] = n // 2
                k[tuple(idx)] = 0.0
        odd.append(k)
    for arr in [hat, mult, k2] + odd:
        arr.flags.writeable = False
    return ks, hat, mult, k2, odd


def _spectral_sums(values, grid, centers, R, m, power, mode):
    grid.require_spectral()
    dim = grid.dim
    vals = np.asarray(values, dtype=np.float64)
    ks, hat, mult, k2, kodd = _spectral_weights(grid.shape, grid.spacing, float(R), int(m),
                                                float(power) if mode == 0 else 1.0)
    axes = tuple(range(-dim, 0))
    npts = float(np.prod(grid.shape))
    # coefficients of f(x) = sum_k c_k exp(i k . x), samples at cell centres
    phase = 1.0
    for a in range(dim):
        shp = [1] * dim
        shp[a] = -1
        x0 = grid.origin[a] + 0.5 * grid.spacing[a]
        phase = phase * np.exp(-1j * ks[a] * x0).reshape(shp)
    if mode == 2:
        coef = 0.0
        for a in range(dim):
            va = np.fft.rfftn(vals[a], axes=axes) * phase / npts
            # int v . grad psi(x - c) = sum_k (-i k . v_k) psi_hat(k) exp(i k . c)
            coef = coef + (-1j) * kodd[a] * va
        amp = coef * hat
    else:
        f = vals[0] if vals.ndim == dim + 1 else vals
        amp = np.fft.rfftn(f, axes=axes) * phase / npts * hat
        if mode == 1:
            amp = -k2 * amp
    amp = amp * mult
    out = np.empty(len(centers))
    step = 128
    for lo in range(0, len(centers), step):
        c = centers[lo:lo + step]
        nc = len(c)
        acc = amp
        # contract the last axis first, then the others, keeping the centre index last
        E = np.exp(1j * np.outer(ks[dim - 1], c[:, dim - 1]))
        acc = acc.reshape(-1, acc.shape[-1]) @ E
        acc = acc.reshape(grid.shape[:-1] + (nc,))
        for a in range(dim - 2, -1, -1):
            E = np.exp(1j * np.outer(ks[a], c[:, a]))
            acc = np.einsum("...kc,kc->...c", acc, E)
        out[lo:lo + nc] = acc.real
    return out


def ball_sums3(values, grid, centers, R, m, power=1.0, mode=0, backend=None, quadrature="auto"):
    """``int_{R^3} f psi^power``, ``int f lap psi`` or ``int v . grad psi`` per centre.

    ``centers`` carry the grid's coordinates (two for embedded fields).
    ``quadrature`` is ``spectral``, ``direct`` or ``auto`` (spectral on fully
    periodic grids with even resolution).
    """
    centers = np.asarray(centers, dtype=np.float64).reshape(-1, grid.dim)
    if grid.dim not in (2, 3):
        raise ValueError("three-dimensional ball integrals need a 2D (embedded) or 3D grid")
    if quadrature == "auto":
        quadrature = "spectral" if spectral_capable(grid) else "direct"
    if quadrature == "spectral":
        return _spectral_sums(values, grid, centers, R, m, power, mode)
    if quadrature != "direct":
        raise ValueError(f"unknown quadrature {quadrature!r}; expected spectral, direct or auto")
    if grid.dim == 3:
        return _kernels.ball_sums(values, grid, centers, R, m, power, mode, lapdim=3, backend=backend)
    return _column_sums(values, grid, centers, R, m, power, mode)
