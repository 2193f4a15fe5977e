# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: cutoff-weighted ball sums and the coherence supremum."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, pow, ceil, floor

cnp.import_array()


cdef inline double _smooth(double t) nogil:
    if t <= 0.0:
        return 0.0
    if t >= 1.0:
        return 1.0
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t))


cdef inline double _chi(double t) nogil:
    # roundoff can push 1 - S slightly below 0 near t = 1
    cdef double c = 1.0 - _smooth(t)
    return c if c > 0.0 else 0.0


cdef inline double _smooth_d1(double t) nogil:
    if t <= 0.0 or t >= 1.0:
        return 0.0
    return 30.0 * t * t * (1.0 - t) * (1.0 - t)


cdef inline double _smooth_d2(double t) nogil:
    if t <= 0.0 or t >= 1.0:
        return 0.0
    return 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t)


cdef inline double _ipow(double x, int n) nogil:
    cdef double out = 1.0
    cdef int i
    for i in range(n):
        out *= x
    return out


cdef inline Py_ssize_t _wrap(Py_ssize_t i, Py_ssize_t n) nogil:
    i = i % n
    if i < 0:
        i += n
    return i


def ball_sums(const double[:, :, :, ::1] values,
              const double[::1] origin, const double[::1] spacing, const int[::1] periodic, int ndim,
              const double[:, ::1] centers, double R, int m, double power, int mode, int lapdim):
    """Per-centre sums of ``values`` against cutoff weights over ``B(c, 2R)``.

    mode 0: sum f * psi**power; mode 1: sum f * lap(psi);
    mode 2: sum v . grad(psi) with the first ``ndim`` components of ``values``.
    """
    cdef Py_ssize_t nc = centers.shape[0]
    cdef Py_ssize_t n[3]
    cdef Py_ssize_t lo[3]
    cdef Py_ssize_t hi[3]
    cdef double d[3]
    cdef Py_ssize_t i0, i1, i2, j0, j1, j2, c, a
    cdef double r2, r, s, t, chi, c1, c2, psi, dpsi, d2psi, acc, w, R2 = 4.0 * R * R
    cdef double mp = m * power
    cdef bint use_int = (power == 1.0)
    out = np.zeros(nc, dtype=np.float64)
    cdef double[::1] res = out

    n[0] = values.shape[1]
    n[1] = values.shape[2]
    n[2] = values.shape[3]

    with nogil:
        for c in range(nc):
            for a in range(3):
                if a < ndim:
                    lo[a] = <Py_ssize_t>ceil((centers[c, a] - 2.0 * R - origin[a]) / spacing[a] - 0.5)
                    hi[a] = <Py_ssize_t>floor((centers[c, a] + 2.0 * R - origin[a]) / spacing[a] - 0.5)
                    if not periodic[a]:
                        if lo[a] < 0:
                            lo[a] = 0
                        if hi[a] > n[a] - 1:
                            hi[a] = n[a] - 1
                else:
                    lo[a] = 0
                    hi[a] = 0
            acc = 0.0
            for i0 in range(lo[0], hi[0] + 1):
                d[0] = origin[0] + (i0 + 0.5) * spacing[0] - centers[c, 0]
                j0 = _wrap(i0, n[0])
                for i1 in range(lo[1], hi[1] + 1):
                    if ndim > 1:
                        d[1] = origin[1] + (i1 + 0.5) * spacing[1] - centers[c, 1]
                    else:
                        d[1] = 0.0
                    j1 = _wrap(i1, n[1])
                    for i2 in range(lo[2], hi[2] + 1):
                        if ndim > 2:
                            d[2] = origin[2] + (i2 + 0.5) * spacing[2] - centers[c, 2]
                        else:
                            d[2] = 0.0
                        r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
                        if r2 >= R2:
                            continue
                        j2 = _wrap(i2, n[2])
                        r = sqrt(r2)
                        s = r / R
                        if mode == 0:
                            if s <= 1.0:
                                w = 1.0
                            else:
                                chi = _chi(s - 1.0)
                                if use_int:
                                    w = _ipow(chi, m)
                                else:
                                    w = pow(chi, mp)
                            acc += values[0, j0, j1, j2] * w
                            continue
                        if s <= 1.0:
                            continue
                        t = s - 1.0
                        chi = _chi(t)
                        c1 = -_smooth_d1(t)
                        dpsi = m * _ipow(chi, m - 1) * c1 / R
                        if mode == 1:
                            c2 = -_smooth_d2(t)
                            if m >= 2:
                                d2psi = m * (m - 1) * _ipow(chi, m - 2) * c1 * c1 + m * _ipow(chi, m - 1) * c2
                            else:
                                d2psi = c2
                            w = d2psi / (R * R) + (lapdim - 1) * dpsi / r
                            acc += values[0, j0, j1, j2] * w
                        else:
                            w = 0.0
                            for a in range(ndim):
                                w += values[a, j0, j1, j2] * d[a]
                            acc += w * dpsi / r
            res[c] = acc
    return out


def coherence_sup(const double[:, :, :, ::1] xi, const cnp.uint8_t[:, :, ::1] valid,
                  const long[:, ::1] offsets, const double[::1] denom, const int[::1] periodic):
    """``max_k |xi(x) x xi(x + o_k)| / denom_k`` over valid neighbours, 0 at invalid x."""
    cdef Py_ssize_t n0 = xi.shape[1], n1 = xi.shape[2], n2 = xi.shape[3]
    cdef Py_ssize_t nk = offsets.shape[0]
    cdef Py_ssize_t i0, i1, i2, j0, j1, j2, k
    cdef double a0, a1, a2, b0, b1, b2, c0, c1, c2, val, best
    cdef Py_ssize_t n[3]
    out = np.zeros((n0, n1, n2), dtype=np.float64)
    cdef double[:, :, ::1] res = out
    n[0] = n0
    n[1] = n1
    n[2] = n2

    with nogil:
        for i0 in range(n0):
            for i1 in range(n1):
                for i2 in range(n2):
                    if not valid[i0, i1, i2]:
                        continue
                    a0 = xi[0, i0, i1, i2]
                    a1 = xi[1, i0, i1, i2]
                    a2 = xi[2, i0, i1, i2]
                    best = 0.0
                    for k in range(nk):
                        j0 = i0 + offsets[k, 0]
                        j1 = i1 + offsets[k, 1]
                        j2 = i2 + offsets[k, 2]
                        if j0 < 0 or j0 >= n[0]:
                            if not periodic[0]:
                                continue
                            j0 = _wrap(j0, n[0])
                        if j1 < 0 or j1 >= n[1]:
                            if not periodic[1]:
                                continue
                            j1 = _wrap(j1, n[1])
                        if j2 < 0 or j2 >= n[2]:
                            if not periodic[2]:
                                continue
                            j2 = _wrap(j2, n[2])
                        if not valid[j0, j1, j2]:
                            continue
                        b0 = xi[0, j0, j1, j2]
                        b1 = xi[1, j0, j1, j2]
                        b2 = xi[2, j0, j1, j2]
                        c0 = a1 * b2 - a2 * b1
                        c1 = a2 * b0 - a0 * b2
                        c2 = a0 * b1 - a1 * b0
                        val = sqrt(c0 * c0 + c1 * c1 + c2 * c2) / denom[k]
                        if val > best:
                            best = val
                    res[i0, i1, i2] = best
    return out


def pairs_sup(const double[:, ::1] X, const double[:, ::1] xiX, const double[:, ::1] Y,
              const double[:, ::1] xiY, double gamma, double rmax):
    """``max |xiX_a x xiY_b| / |X_a - Y_b|^gamma`` over distinct pairs within ``rmax``.

    Returns ``(sup, pair count)``; ``rmax < 0`` means unlimited.
    """
    cdef Py_ssize_t nx = X.shape[0], ny = Y.shape[0], nd = X.shape[1]
    cdef Py_ssize_t a, b, k
    cdef double best = 0.0, d2, t, c0, c1, c2, val
    cdef long long count = 0
    cdef double r2 = rmax * rmax
    with nogil:
        for a in range(nx):
            for b in range(ny):
                d2 = 0.0
                for k in range(nd):
                    t = Y[b, k] - X[a, k]
                    d2 = d2 + t * t
                if d2 == 0.0:
                    continue
                if rmax >= 0.0 and d2 > r2:
                    continue
                count += 1
                c0 = xiX[a, 1] * xiY[b, 2] - xiX[a, 2] * xiY[b, 1]
                c1 = xiX[a, 2] * xiY[b, 0] - xiX[a, 0] * xiY[b, 2]
                c2 = xiX[a, 0] * xiY[b, 1] - xiX[a, 1] * xiY[b, 0]
                val = sqrt(c0 * c0 + c1 * c1 + c2 * c2) / (sqrt(sqrt(d2)) if gamma == 0.5 else pow(sqrt(d2), gamma))
                if val > best:
                    best = val
    return best, count
