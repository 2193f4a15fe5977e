"""Vectorised numpy versions of the compiled kernels (same signatures)."""

from __future__ import annotations

import numpy as np

from ..cutoffs import radial_profile

_CHUNK_CELLS = 4_000_000


def _axis_windows(centers, origin, spacing, periodic, n, ndim, R):
    idx, dist, ok = [], [], []
    for a in range(3):
        if a >= ndim:
            nc = centers.shape[0]
            idx.append(np.zeros((nc, 1), dtype=np.int64))
            dist.append(np.zeros((nc, 1)))
            ok.append(np.ones((nc, 1), dtype=bool))
            continue
        c = centers[:, a]
        lo = np.ceil((c - 2.0 * R - origin[a]) / spacing[a] - 0.5).astype(np.int64)
        hi = np.floor((c + 2.0 * R - origin[a]) / spacing[a] - 0.5).astype(np.int64)
        if not periodic[a]:
            lo = np.maximum(lo, 0)
            hi = np.minimum(hi, n[a] - 1)
        width = max(int(np.max(hi - lo)) + 1, 1)
        i = lo[:, None] + np.arange(width)[None, :]
        valid = i <= hi[:, None]
        d = origin[a] + (i + 0.5) * spacing[a] - c[:, None]
        idx.append(np.mod(i, n[a]))
        dist.append(d)
        ok.append(valid)
    return idx, dist, ok


def ball_sums(values, origin, spacing, periodic, ndim, centers, R, m, power, mode, lapdim):
    values = np.asarray(values, dtype=np.float64)
    centers = np.asarray(centers, dtype=np.float64)
    n = values.shape[1:]
    nc = centers.shape[0]
    out = np.zeros(nc)
    if nc == 0:
        return out
    per_center = 1
    for a in range(ndim):
        per_center *= int(np.ceil(4.0 * R / spacing[a])) + 2
    step = max(1, _CHUNK_CELLS // max(per_center, 1))
    for start in range(0, nc, step):
        cc = centers[start:start + step]
        idx, dist, ok = _axis_windows(cc, origin, spacing, periodic, n, ndim, R)
        d0 = dist[0][:, :, None, None]
        d1 = dist[1][:, None, :, None]
        d2 = dist[2][:, None, None, :]
        r2 = d0 * d0 + d1 * d1 + d2 * d2
        mask = ok[0][:, :, None, None] & ok[1][:, None, :, None] & ok[2][:, None, None, :]
        mask &= r2 < 4.0 * R * R
        sel = (idx[0][:, :, None, None], idx[1][:, None, :, None], idx[2][:, None, None, :])
        r = np.sqrt(r2)
        psi, d1s, d2s = radial_profile(r / R, m)
        if mode == 0:
            w = psi if power == 1.0 else psi ** power
            acc = values[0][sel] * w
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                dpsi = np.where(r > R, d1s / R, 0.0)
                if mode == 1:
                    w = np.where(r > R, d2s / (R * R) + (lapdim - 1) * dpsi / r, 0.0)
                    acc = values[0][sel] * w
                else:
                    dots = values[0][sel] * d0
                    if ndim > 1:
                        dots = dots + values[1][sel] * d1
                    if ndim > 2:
                        dots = dots + values[2][sel] * d2
                    acc = np.where(r > R, dots * dpsi / r, 0.0)
        acc = np.where(mask, acc, 0.0)
        out[start:start + step] = acc.reshape(acc.shape[0], -1).sum(axis=1)
    return out


def coherence_sup(xi, valid, offsets, denom, periodic):
    xi = np.asarray(xi, dtype=np.float64)
    valid = np.asarray(valid, dtype=bool)
    shape = valid.shape
    best = np.zeros(shape)
    grids = np.indices(shape)
    a0, a1, a2 = xi[0], xi[1], xi[2]
    for k in range(offsets.shape[0]):
        off = offsets[k]
        inside = valid.copy()
        b = xi
        vb = valid
        for ax in range(3):
            o = int(off[ax])
            if o == 0:
                continue
            b = np.roll(b, -o, axis=ax + 1)
            vb = np.roll(vb, -o, axis=ax)
            if not periodic[ax]:
                j = grids[ax] + o
                inside &= (j >= 0) & (j < shape[ax])
        inside &= vb
        c0 = a1 * b[2] - a2 * b[1]
        c1 = a2 * b[0] - a0 * b[2]
        c2 = a0 * b[1] - a1 * b[0]
        val = np.sqrt(c0 * c0 + c1 * c1 + c2 * c2) / denom[k]
        best = np.where(inside & (val > best), val, best)
    return best


def pairs_sup(X, xiX, Y, xiY, gamma, rmax, chunk=1024):
    best, count = 0.0, 0
    for s in range(0, len(X), chunk):
        xa, xia = X[s:s + chunk], xiX[s:s + chunk]
        d = np.sqrt(np.sum((Y[None, :, :] - xa[:, None, :]) ** 2, axis=2))
        a, b = xia[:, None, :], xiY[None, :, :]
        c0 = a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1]
        c1 = a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2]
        c2 = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
        ok = d > 0
        if rmax >= 0:
            ok &= d <= rmax
        count += int(np.count_nonzero(ok))
        if np.any(ok):
            den = np.sqrt(d[ok]) if gamma == 0.5 else np.power(d[ok], gamma)
            val = np.sqrt(c0 * c0 + c1 * c1 + c2 * c2)[ok] / den
            best = max(best, float(np.max(val)))
    return best, count
