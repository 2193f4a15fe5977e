"""Structured grids and the immutable field containers that live on them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

MIN_RESOLUTION = 4


class GridError(ValueError):
    pass


def _as_tuple(value, dim: int | None, cast) -> tuple:
    if np.isscalar(value):
        if dim is None:
            dim = 1
        return tuple(cast(value) for _ in range(dim))
    return tuple(cast(v) for v in value)


@dataclass(frozen=True)
class Grid:
    """Cell-centred uniform grid in 1, 2 or 3 dimensions.

    Sample ``i`` along axis ``a`` sits at ``origin[a] + (i + 0.5) * spacing[a]``.
    """

    origin: tuple[float, ...]
    extent: tuple[float, ...]
    resolution: tuple[int, ...]
    periodic: tuple[bool, ...]

    def __post_init__(self):
        n = len(self.resolution)
        if n not in (1, 2, 3):
            raise GridError(f"dimension must be 1, 2 or 3, got {n}")
        if not (len(self.origin) == len(self.extent) == len(self.periodic) == n):
            raise GridError("origin, extent, resolution and periodic must have equal length")
        for e in self.extent:
            if not (e > 0 and math.isfinite(e)):
                raise GridError(f"extent must be positive and finite, got {self.extent}")
        for r in self.resolution:
            if r < MIN_RESOLUTION:
                raise GridError(f"resolution must be >= {MIN_RESOLUTION} per axis, got {self.resolution}")

    @property
    def dim(self) -> int:
        return len(self.resolution)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(e / r for e, r in zip(self.extent, self.resolution))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.resolution

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def fully_periodic(self) -> bool:
        return all(self.periodic)

    def axis(self, a: int) -> np.ndarray:
        h = self.spacing[a]
        return self.origin[a] + (np.arange(self.resolution[a]) + 0.5) * h

    def axes(self) -> list[np.ndarray]:
        return [self.axis(a) for a in range(self.dim)]

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*self.axes(), indexing="ij")

    def require_spectral(self) -> None:
        if not self.fully_periodic:
            raise GridError("spectral operations need a fully periodic grid")
        if any(r % 2 for r in self.resolution):
            raise GridError("spectral operations need an even resolution on every axis")

    def wavenumbers(self) -> list[np.ndarray]:
        """Angular wavenumbers per axis, FFT ordering."""
        return [
            2.0 * np.pi * np.fft.fftfreq(n, d=h)
            for n, h in zip(self.resolution, self.spacing)
        ]

    def to_header(self) -> dict:
        return {
            "dim": self.dim,
            "origin": list(self.origin),
            "extent": list(self.extent),
            "resolution": list(self.resolution),
            "periodic": list(self.periodic),
        }

    def contains_ball(self, center: Sequence[float], radius: float) -> bool:
        """True when B(center, radius) is representable on the grid.

        Periodic axes accept any centre as long as the ball does not overlap
        its own periodic image; bounded axes need the ball inside the box.
        """
        for a in range(self.dim):
            c = float(center[a]) if a < len(center) else 0.0
            if self.periodic[a]:
                if 2.0 * radius > self.extent[a] * (1.0 + 1e-12):
                    return False
            else:
                lo = self.origin[a]
                hi = lo + self.extent[a]
                if c - radius < lo - 1e-12 * self.extent[a] or c + radius > hi + 1e-12 * self.extent[a]:
                    return False
        return True


def make_grid(origin, extent, resolution, periodic=False) -> Grid:
    """Build a :class:`Grid`; scalars broadcast to every axis.

    >>> make_grid(-10.0, 20.0, 4096).spacing
    (0.0048828125,)
    """
    dims = [len(v) for v in (origin, extent, resolution, periodic) if not np.isscalar(v)]
    dim = dims[0] if dims else 1
    if any(d != dim for d in dims):
        raise GridError("inconsistent dimensions between grid arguments")
    return Grid(
        origin=_as_tuple(origin, dim, float),
        extent=_as_tuple(extent, dim, float),
        resolution=_as_tuple(resolution, dim, int),
        periodic=_as_tuple(periodic, dim, bool),
    )


def _frozen(values: np.ndarray) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True, order="C")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        if self.values.shape != self.grid.shape:
            raise GridError(f"values shape {self.values.shape} does not match grid {self.grid.shape}")

    ncomp = 1

    def replace(self, values=None, time=None) -> "ScalarField":
        return ScalarField(self.grid, self.values if values is None else values,
                           self.time if time is None else time)


@dataclass(frozen=True, eq=False)
class VectorField:
    """Vector samples stored component-first, ``values.shape == (ncomp, *grid.shape)``.

    Three components on a 2D grid represent a z-independent flow embedded
    in three dimensions.
    """

    grid: Grid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        if self.values.ndim != self.grid.dim + 1 or self.values.shape[1:] != self.grid.shape:
            raise GridError(f"values shape {self.values.shape} does not match grid {self.grid.shape}")
        if self.values.shape[0] < self.grid.dim:
            raise GridError("vector field needs at least one component per grid axis")

    @property
    def ncomp(self) -> int:
        return self.values.shape[0]

    @property
    def embedded(self) -> bool:
        return self.ncomp == 3 and self.grid.dim == 2

    def magnitude(self) -> np.ndarray:
        return np.sqrt(np.sum(self.values ** 2, axis=0))

    def replace(self, values=None, time=None) -> "VectorField":
        return VectorField(self.grid, self.values if values is None else values,
                           self.time if time is None else time)


@dataclass(frozen=True, eq=False)
class FieldSeries:
    """Snapshots on a uniform time grid covering ``[0, T]``.

    A *static* series holds a single time-independent snapshot; time integrals
    against the temporal cutoff are then evaluated in closed quadrature
    instead of from samples.
    """

    snapshots: tuple
    horizon: float
    static: bool = False
    times: np.ndarray = field(init=False)

    def __post_init__(self):
        snaps = tuple(self.snapshots)
        object.__setattr__(self, "snapshots", snaps)
        if not snaps:
            raise GridError("a series needs at least one snapshot")
        if not self.horizon > 0:
            raise GridError("horizon T must be positive")
        grid = snaps[0].grid
        if any(s.grid != grid for s in snaps):
            raise GridError("all snapshots must share one grid")
        times = np.array([s.time for s in snaps], dtype=np.float64)
        if self.static:
            if len(snaps) != 1:
                raise GridError("a static series holds exactly one snapshot")
        else:
            if len(snaps) < 2:
                raise GridError("a time-resolved series needs at least two snapshots")
            if times[0] != 0.0:
                raise GridError("first snapshot must be at t = 0")
            steps = np.diff(times)
            if np.any(steps <= 0):
                raise GridError("snapshot times must be strictly increasing")
            if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
                raise GridError("snapshot times must be uniformly spaced")
            if not math.isclose(times[-1], self.horizon, rel_tol=1e-12):
                raise GridError("last snapshot must be at t = T")
        times.flags.writeable = False
        object.__setattr__(self, "times", times)

    @classmethod
    def from_fields(cls, fields) -> "FieldSeries":
        fields = tuple(fields)
        return cls(fields, horizon=float(fields[-1].time))

    @classmethod
    def constant(cls, fld, horizon: float) -> "FieldSeries":
        return cls((fld,), horizon=float(horizon), static=True)

    @property
    def grid(self) -> Grid:
        return self.snapshots[0].grid

    @property
    def T(self) -> float:
        return self.horizon

    @property
    def final(self):
        return self.snapshots[-1]

    def __len__(self):
        return len(self.snapshots)

    def __iter__(self):
        return iter(self.snapshots)

    def map(self, fn) -> "FieldSeries":
        return FieldSeries(tuple(fn(s) for s in self.snapshots), self.horizon, self.static)
