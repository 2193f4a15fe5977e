"""Localized, time-averaged, per-unit-mass integrals of a density."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import _kernels
from .cutoffs import DEFAULT_RHO, build_eta, power_for


class SupportError(ValueError):
    pass


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)


@dataclass(frozen=True)
class EnsembleConfig:
    R0: float = 10.0
    delta: float = 1.0
    rho1: float = DEFAULT_RHO
    rho2: float = DEFAULT_RHO
    K1: int = 3
    K2: int = 3
    dim: int = 1

    def __post_init__(self):
        if not 0.0 < self.delta <= 1.0:
            raise ValueError(f"delta must lie in (0, 1], got {self.delta}")
        if not self.R0 > 0:
            raise ValueError("R0 must be positive")
        if self.K1 < 1 or self.K2 < 1:
            raise ValueError("K1 and K2 must be positive integers")
        if self.dim not in (1, 2, 3):
            raise ValueError("dim must be 1, 2 or 3")
        for name in ("rho1", "rho2"):
            v = getattr(self, name)
            if not 0.5 < v < 1.0:
                raise ValueError(f"{name} must lie in (1/2, 1), got {v}")

    @property
    def kstar(self) -> float:
        """Analytic comparability constant ``3 * 2**(d+1) * v_d * K1 * K2``."""
        d = self.dim
        return 3.0 * 2.0 ** (d + 1) * unit_ball_volume(d) * self.K1 * self.K2

    @property
    def m_space(self) -> int:
        return power_for(self.rho2)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["kstar"] = self.kstar
        return out


def check_support(grid, centers: np.ndarray, radius: float) -> None:
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    for a in range(grid.dim):
        if grid.periodic[a]:
            if 2.0 * radius > grid.extent[a] * (1.0 + 1e-12):
                raise SupportError(
                    f"support radius {radius} overlaps its periodic image on axis {a}")
            continue
        lo = grid.origin[a]
        hi = lo + grid.extent[a]
        tol = 1e-12 * grid.extent[a]
        c = centers[:, a]
        if np.any(c - radius < lo - tol) or np.any(c + radius > hi + tol):
            raise SupportError(
                f"support B(x_i, {radius}) leaves the grid on axis {a} [{lo}, {hi}]")


class LocalAverager:
    """Evaluates ``(1/T) int (1/R^d) int f phi^delta`` at many centres at once.

    Time integration uses the cutoff-weighted trapezoid rule over the
    snapshots (closed quadrature for static series); space uses the cell
    midpoint rule through the ball-sum kernel.
    """

    def __init__(self, series, config: EnsembleConfig, backend=None):
        self.series = series
        self.config = config
        self.grid = series.grid
        if self.grid.dim != config.dim:
            raise ValueError(f"config dim {config.dim} differs from grid dim {self.grid.dim}")
        self.eta = build_eta(series.T, config.rho1)
        self.weights = self.eta.weights(series, config.delta) / series.T
        self.m = config.m_space
        self.backend = backend
        self._data = [np.asarray(s.values) for s in series.snapshots]

    def values(self, centers, R: float) -> np.ndarray:
        centers = np.asarray(centers, dtype=np.float64).reshape(-1, self.grid.dim)
        if centers.shape[0] == 0:
            return np.zeros(0)
        check_support(self.grid, centers, 2.0 * R)
        total = np.zeros(centers.shape[0])
        for w, data in zip(self.weights, self._data):
            if w == 0.0:
                continue
            total += w * _kernels.ball_sums(data, self.grid, centers, R, self.m,
                                            self.config.delta, 0, backend=self.backend)
        return total / R ** self.grid.dim

    def value(self, center, R: float) -> float:
        return float(self.values(np.atleast_1d(center), R)[0])
