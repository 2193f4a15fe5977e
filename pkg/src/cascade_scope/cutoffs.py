"""Refined temporal and spatial cutoffs and their bound constants.

Both cutoffs are powers of a quintic smoothstep ramp.  The power
``m = ceil(1 / (1 - rho))`` is the smallest one for which every normalised
ratio ``|eta'| T / eta**rho``, ``|grad psi| R / psi**rho`` and
``|lap psi| R**2 / psi**(2 rho - 1)`` stays bounded as the cutoff vanishes.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate

DEFAULT_RHO = 0.75
DEFAULT_SAMPLES = 200_000


class CutoffError(ValueError):
    pass


def smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t))


def smoothstep_d1(t):
    t = np.clip(t, 0.0, 1.0)
    return 30.0 * t * t * (1.0 - t) ** 2


def smoothstep_d2(t):
    t = np.clip(t, 0.0, 1.0)
    return 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t)


def radial_profile(s, m: int):
    """``chi(s)**m`` and its first two derivatives in ``s``.

    ``chi`` is 1 on ``[0, 1]``, decreases smoothly on ``[1, 2]`` and vanishes
    beyond 2.
    """
    s = np.asarray(s, dtype=np.float64)
    t = s - 1.0
    chi = np.clip(1.0 - smoothstep(t), 0.0, 1.0)  # roundoff can push 1 - S below 0 near t = 1
    d1 = -smoothstep_d1(t)
    d2 = -smoothstep_d2(t)
    psi = chi ** m
    dpsi = m * chi ** (m - 1) * d1
    if m >= 2:
        d2psi = m * (m - 1) * chi ** (m - 2) * d1 * d1 + m * chi ** (m - 1) * d2
    else:
        d2psi = d2 * np.ones_like(chi)
    return psi, dpsi, d2psi


def power_for(rho: float) -> int:
    return int(math.ceil(1.0 / (1.0 - rho) - 1e-12))


def _check_rho(rho: float, name: str):
    if not (0.5 < rho < 1.0):
        raise CutoffError(f"{name} must lie in (1/2, 1), got {rho}")


@dataclass(frozen=True)
class TemporalCutoff:
    """``eta(t)``: zero on ``(0, T/3)``, one on ``(2T/3, T)``."""

    T: float
    rho: float
    m: int

    def evaluate(self, t):
        t = np.asarray(t, dtype=np.float64)
        third = self.T / 3.0
        tau = (t - third) / third
        base = smoothstep(tau)
        eta = base ** self.m
        deta = self.m * base ** (self.m - 1) * smoothstep_d1(tau) / third
        return eta, deta

    def __call__(self, t):
        return self.evaluate(t)[0]

    def derivative(self, t):
        return self.evaluate(t)[1]

    def integral(self, power: float = 1.0) -> float:
        """``int_0^T eta(t)**power dt``."""
        if power == 0:
            return self.T
        # substitution tau = v**2 softens the fractional power at the ramp start
        val, _ = integrate.quad(
            lambda v: 2.0 * v * smoothstep(v * v) ** (self.m * power),
            0.0, 1.0, epsabs=0.0, epsrel=1e-13, limit=200)
        return self.T / 3.0 * (1.0 + val)

    def weights(self, series, power: float = 1.0) -> np.ndarray:
        """Quadrature weights ``w_k`` with ``sum w_k g(t_k) ~ int_0^T g eta**power dt``."""
        if series.static:
            return np.array([self.integral(power)])
        eta = self.evaluate(series.times)[0]
        return trapezoid_weights(series.times) * eta ** power

    def derivative_weights(self, series) -> np.ndarray:
        if series.static:
            # int_0^T eta' dt = eta(T) - eta(0)
            return np.array([1.0])
        return trapezoid_weights(series.times) * self.evaluate(series.times)[1]


@dataclass(frozen=True)
class SpatialCutoff:
    """``psi(x) = chi(|x - x0| / R)**m``, equal to one on ``B(x0, R)``."""

    x0: tuple[float, ...]
    R: float
    rho: float
    m: int
    dim: int

    def radial(self, r):
        """``psi``, ``dpsi/dr`` and the ``dim``-dimensional Laplacian at radius ``r``."""
        r = np.asarray(r, dtype=np.float64)
        psi, d1, d2 = radial_profile(r / self.R, self.m)
        dr = d1 / self.R
        with np.errstate(divide="ignore", invalid="ignore"):
            lap = d2 / self.R ** 2 + np.where(r > 0, (self.dim - 1) * dr / r, 0.0)
        return psi, dr, lap

    def evaluate_displacement(self, disp):
        """``psi``, ``grad psi`` and ``lap psi`` at displacements ``disp = x - x0``.

        ``disp`` has the components first, shape ``(dim, ...)``.
        """
        disp = np.asarray(disp, dtype=np.float64)
        r = np.sqrt(np.sum(disp ** 2, axis=0))
        psi, dr, lap = self.radial(r)
        with np.errstate(divide="ignore", invalid="ignore"):
            unit = np.where(r > 0, disp / r, 0.0)
        return psi, dr * unit, lap

    def evaluate(self, points):
        pts = np.asarray(points, dtype=np.float64)
        disp = pts - np.reshape(self.x0, (-1,) + (1,) * (pts.ndim - 1))
        return self.evaluate_displacement(disp)

    def __call__(self, points):
        return self.evaluate(points)[0]


def build_eta(T: float, rho1: float = DEFAULT_RHO, m: int | None = None) -> TemporalCutoff:
    if not T > 0:
        raise CutoffError(f"T must be positive, got {T}")
    _check_rho(rho1, "rho1")
    m = power_for(rho1) if m is None else int(m)
    if m < 1:
        raise CutoffError("power m must be >= 1")
    return TemporalCutoff(float(T), float(rho1), m)


def build_psi(x0, R: float, rho2: float = DEFAULT_RHO, dim: int | None = None,
              m: int | None = None) -> SpatialCutoff:
    if not R > 0:
        raise CutoffError(f"R must be positive, got {R}")
    _check_rho(rho2, "rho2")
    x0 = (float(x0),) if np.isscalar(x0) else tuple(float(v) for v in x0)
    if dim is None:
        dim = len(x0)
    if len(x0) < dim:
        x0 = x0 + (0.0,) * (dim - len(x0))
    m = power_for(rho2) if m is None else int(m)
    if m < 1:
        raise CutoffError("power m must be >= 1")
    return SpatialCutoff(x0[:dim], float(R), float(rho2), m, int(dim))


def nested_cutoff(x_i, R: float, R0: float, rho2: float = DEFAULT_RHO, dim: int | None = None):
    """Cutoff at ``x_i`` shrunk to ``min(R, R0 - |x_i|)`` so that it stays below ``psi0``."""
    x_i = (float(x_i),) if np.isscalar(x_i) else tuple(float(v) for v in x_i)
    dist = math.sqrt(sum(v * v for v in x_i))
    if dist >= R0:
        raise CutoffError("centre must lie inside B(0, R0)")
    return build_psi(x_i, min(R, R0 - dist), rho2, dim)


def trapezoid_weights(times) -> np.ndarray:
    times = np.asarray(times, dtype=np.float64)
    w = np.zeros_like(times)
    dt = np.diff(times)
    w[:-1] += 0.5 * dt
    w[1:] += 0.5 * dt
    return w


@dataclass
class CutoffCheckReport:
    kind: str
    rho: float
    m: int | None
    samples: int
    measured_C0_eta: float | None = None
    measured_C0_grad: float | None = None
    measured_C0_lap: float | None = None
    growth: dict = field(default_factory=dict)
    bounded: bool = True
    inward: bool | None = None
    order: int | None = None
    c_alpha: float | None = None
    delta_alpha: float | None = None
    lhs: float | None = None
    rhs_integral: float | None = None
    degenerate: bool = False
    within_bound: bool | None = None

    def to_dict(self) -> dict:
        out = {}
        for key, val in asdict(self).items():
            if isinstance(val, float) and not math.isfinite(val):
                val = "inf" if val > 0 else ("-inf" if val < 0 else "nan")
            out[key] = val
        return out


def _sup_ratio(num, den_base, power):
    pos = den_base > 0
    if not np.any(pos):
        return 0.0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        ratio = np.abs(num[pos]) / den_base[pos] ** power
    ratio = ratio[~np.isnan(ratio)]
    return float(np.max(ratio)) if ratio.size else 0.0


def _midpoints(lo, hi, n):
    return lo + (np.arange(n) + 0.5) * (hi - lo) / n


def _temporal_constant(cut, n):
    t = _midpoints(0.0, cut.T, n)
    eta, deta = cut.evaluate(t)
    return _sup_ratio(deta * cut.T, eta, cut.rho)


def _spatial_constants(cut, n):
    r = _midpoints(0.0, 2.0 * cut.R, n)
    psi, dr, lap = cut.radial(r)
    grad = _sup_ratio(dr * cut.R, psi, cut.rho)
    lapc = _sup_ratio(lap * cut.R ** 2, psi, 2.0 * cut.rho - 1.0)
    inward = bool(np.all(dr <= 0.0))
    return grad, lapc, inward


def _growth(coarse, fine):
    if coarse == 0.0:
        return 1.0 if fine == 0.0 else math.inf
    return fine / coarse


def verify_cutoff_bounds(cutoff, samples: int = DEFAULT_SAMPLES,
                         growth_tol: float = 0.01) -> CutoffCheckReport:
    """Measure the normalised ratio suprema by dense midpoint sampling.

    The sampling is repeated with ten times as many points; a supremum that
    keeps growing under refinement (``growth > 1 + growth_tol``) marks the
    ratio as unbounded and the report stores ``inf`` for it.
    """
    if hasattr(cutoff, "radial"):
        g1, l1, inward = _spatial_constants(cutoff, samples)
        g2, l2, inward2 = _spatial_constants(cutoff, 10 * samples)
        growth = {"grad": _growth(g1, g2), "lap": _growth(l1, l2)}
        bounded = all(v <= 1.0 + growth_tol for v in growth.values())
        rep = CutoffCheckReport(
            kind="spatial", rho=cutoff.rho, m=getattr(cutoff, "m", None), samples=10 * samples,
            measured_C0_grad=g2 if growth["grad"] <= 1.0 + growth_tol else math.inf,
            measured_C0_lap=l2 if growth["lap"] <= 1.0 + growth_tol else math.inf,
            growth=growth, bounded=bounded, inward=inward and inward2)
        return rep
    if hasattr(cutoff, "evaluate") and hasattr(cutoff, "T"):
        c1 = _temporal_constant(cutoff, samples)
        c2 = _temporal_constant(cutoff, 10 * samples)
        growth = {"eta": _growth(c1, c2)}
        bounded = growth["eta"] <= 1.0 + growth_tol
        return CutoffCheckReport(
            kind="temporal", rho=cutoff.rho, m=getattr(cutoff, "m", None), samples=10 * samples,
            measured_C0_eta=c2 if bounded else math.inf, growth=growth, bounded=bounded)
    raise CutoffError("cutoff must provide radial() (spatial) or evaluate() and T (temporal)")


def displacement(grid, center: Sequence[float]) -> np.ndarray:
    """Per-cell displacement from ``center``, minimum image on periodic axes."""
    disp = []
    for a, ax in enumerate(grid.mesh()):
        d = ax - float(center[a])
        if grid.periodic[a]:
            L = grid.extent[a]
            d = d - L * np.round(d / L)
        disp.append(d)
    return np.stack(disp)


def check_scale_inequality(f, psi: SpatialCutoff, order: int,
                           constants: CutoffCheckReport | None = None) -> CutoffCheckReport:
    """Measure ``c(alpha)`` in the scale inequality for one field and cutoff.

    Derivatives move onto the cutoff by parts: ``|(D f, psi)| = |(f, D psi)|``.
    Order 1 takes the largest single-axis derivative, order 2 the Laplacian.
    """
    if order not in (1, 2):
        raise CutoffError("order must be 1 or 2")
    grid = f.grid
    if psi.dim != grid.dim:
        raise CutoffError("cutoff and field dimensions differ")
    if not grid.contains_ball(psi.x0, 2.0 * psi.R):
        raise CutoffError("cutoff support B(x0, 2R) does not fit the grid")
    if constants is None:
        constants = verify_cutoff_bounds(psi, samples=20_000)
    vol = grid.cell_volume
    val, grad, lap = psi.evaluate_displacement(displacement(grid, psi.x0))
    fv = f.values
    if order == 1:
        lhs = max(abs(float(np.sum(fv * grad[a])) * vol) for a in range(grid.dim))
        delta = psi.rho
        bound = constants.measured_C0_grad
    else:
        lhs = abs(float(np.sum(fv * lap)) * vol)
        delta = 2.0 * psi.rho - 1.0
        bound = constants.measured_C0_lap
    with np.errstate(divide="ignore"):
        weight = np.where(val > 0, val ** delta, 0.0)
    rhs = float(np.sum(np.abs(fv) * weight)) * vol
    rep = CutoffCheckReport(
        kind="scale_inequality", rho=psi.rho, m=psi.m, samples=int(np.prod(grid.shape)),
        measured_C0_grad=constants.measured_C0_grad, measured_C0_lap=constants.measured_C0_lap,
        order=order, delta_alpha=delta, lhs=lhs, rhs_integral=rhs)
    if rhs == 0.0:
        rep.degenerate = True
        return rep
    rep.c_alpha = lhs * psi.R ** order / rhs
    rep.within_bound = bool(rep.c_alpha <= bound * (1.0 + 1e-9))
    return rep


def nested_margin(psi_i: SpatialCutoff, psi0: SpatialCutoff, grid) -> float:
    """``min over the grid of psi0 - psi_i``; non-negative when ``psi_i <= psi0``."""
    a = psi_i.evaluate_displacement(displacement(grid, psi_i.x0))[0]
    b = psi0.evaluate_displacement(displacement(grid, psi0.x0))[0]
    return float(np.min(b - a))
