"""Analytic field generators.

All generators are deterministic functions of ``(params, grid, time)``; the
random one also takes an integer seed.  Exact Navier-Stokes solutions use
unit viscosity.
"""

from __future__ import annotations

import math

import numpy as np

from .calculus import curl_array, solenoidal_projection
from .grid import Grid, GridError, ScalarField, VectorField


class GeneratorError(ValueError):
    pass


def demo1d_function(x):
    return np.cos(x + 5.0) ** 2 * np.sin(0.5 * (x - 1.0) ** 2)


def _check_params(name, params, defaults):
    unknown = set(params) - set(defaults)
    if unknown:
        raise GeneratorError(f"{name}: unknown parameters {sorted(unknown)}")
    merged = dict(defaults)
    merged.update(params)
    return merged


def _field_kind(p, name):
    kind = p["field"]
    if kind not in ("velocity", "vorticity"):
        raise GeneratorError(f"{name}: field must be 'velocity' or 'vorticity', got {kind!r}")
    return kind


def _demo1d(params, grid: Grid, time):
    p = _check_params("demo1d", params, {"absolute": False})
    x = grid.mesh()[0]
    f = demo1d_function(x)
    if p["absolute"]:
        f = np.abs(f)
    return ScalarField(grid, f, time)


def _taylor_green(params, grid: Grid, time):
    p = _check_params("taylor_green_2d3d", params, {"A": 1.0, "k": 1, "field": "velocity"})
    kind = _field_kind(p, "taylor_green_2d3d")
    if grid.dim not in (2, 3):
        raise GeneratorError("taylor_green_2d3d needs a 2D or 3D grid")
    A, k = float(p["A"]), float(p["k"])
    if k <= 0:
        raise GeneratorError("taylor_green_2d3d: k must be positive")
    mesh = grid.mesh()
    x, y = mesh[0], mesh[1]
    decay = math.exp(-2.0 * k * k * time)
    zero = np.zeros(grid.shape)
    if kind == "velocity":
        vals = [A * np.sin(k * x) * np.cos(k * y) * decay,
                -A * np.cos(k * x) * np.sin(k * y) * decay,
                zero]
    else:
        vals = [zero, zero, 2.0 * A * k * np.sin(k * x) * np.sin(k * y) * decay]
    return VectorField(grid, np.stack(vals), time)


def _abc(params, grid: Grid, time):
    p = _check_params("abc_flow", params, {"A": 1.0, "B": 1.0, "C": 1.0, "k": 1, "field": "velocity"})
    kind = _field_kind(p, "abc_flow")
    if grid.dim != 3:
        raise GeneratorError("abc_flow needs a 3D grid")
    A, B, C, k = (float(p[c]) for c in "ABCk")
    if k <= 0:
        raise GeneratorError("abc_flow: k must be positive")
    x, y, z = grid.mesh()
    decay = math.exp(-k * k * time)
    u = np.stack([
        A * np.sin(k * z) + C * np.cos(k * y),
        B * np.sin(k * x) + A * np.cos(k * z),
        C * np.sin(k * y) + B * np.cos(k * x),
    ]) * decay
    # Beltrami: curl u = k u
    if kind == "vorticity":
        u = k * u
    return VectorField(grid, u, time)


def _single_mode(params, grid: Grid, time):
    p = _check_params("single_mode", params, {"A": 1.0, "k": 1, "field": "vorticity", "decay": False})
    kind = _field_kind(p, "single_mode")
    if grid.dim not in (2, 3):
        raise GeneratorError("single_mode needs a 2D or 3D grid")
    A, k = float(p["A"]), float(p["k"])
    if k <= 0:
        raise GeneratorError("single_mode: k must be positive")
    x = grid.mesh()[0]
    decay = math.exp(-k * k * time) if p["decay"] else 1.0
    zero = np.zeros(grid.shape)
    if kind == "vorticity":
        vals = [zero, zero, A * np.sin(k * x) * decay]
    else:
        vals = [zero, -(A / k) * np.cos(k * x) * decay, zero]
    return VectorField(grid, np.stack(vals), time)


def _random_multiscale(params, grid: Grid, time):
    p = _check_params("random_multiscale", params, {
        "seed": 0, "slope": -5.0 / 3.0, "kmin": 1.0, "kmax": None,
        "amplitude": 1.0, "field": "velocity", "decay": True,
    })
    kind = _field_kind(p, "random_multiscale")
    if grid.dim not in (2, 3):
        raise GeneratorError("random_multiscale needs a 2D or 3D grid")
    grid.require_spectral()
    kmax = p["kmax"] if p["kmax"] is not None else min(grid.resolution) / 3.0
    if not 0 < p["kmin"] <= kmax:
        raise GeneratorError("random_multiscale: need 0 < kmin <= kmax")
    if p["amplitude"] <= 0:
        raise GeneratorError("random_multiscale: amplitude must be positive")
    rng = np.random.default_rng(int(p["seed"]))
    ncomp = grid.dim
    noise = rng.standard_normal((ncomp,) + grid.shape)
    if grid.dim == 2:
        noise = np.concatenate([noise, np.zeros((1,) + grid.shape)])

    axes = tuple(range(1, grid.dim + 1))
    ks = grid.wavenumbers()
    # shell index in units of the fundamental wavenumber of the box
    kunit = [k * (L / (2.0 * np.pi)) for k, L in zip(ks, grid.extent)]
    kmag = np.sqrt(sum(k ** 2 for k in np.meshgrid(*kunit, indexing="ij")))
    kphys2 = sum(k ** 2 for k in np.meshgrid(*ks, indexing="ij"))
    band = (kmag >= p["kmin"]) & (kmag <= kmax)
    shape = np.zeros(grid.shape)
    # E(k) ~ k^slope over shells of area ~ k^(d-1)
    shape[band] = kmag[band] ** ((p["slope"] - (grid.dim - 1)) / 2.0)

    v_hat = np.fft.fftn(noise, axes=axes) * shape
    u0 = solenoidal_projection(np.fft.ifftn(v_hat, axes=axes).real, grid)
    rms = math.sqrt(float(np.mean(np.sum(u0 ** 2, axis=0))))
    if rms == 0.0:
        raise GeneratorError("random_multiscale: empty wavenumber band")
    scale = p["amplitude"] / rms
    u_hat = np.fft.fftn(u0, axes=axes) * scale
    if p["decay"]:
        u_hat = u_hat * np.exp(-kphys2 * time)
    u = np.fft.ifftn(u_hat, axes=axes).real
    if kind == "vorticity":
        u = curl_array(u, grid, "spectral")
    return VectorField(grid, u, time)


GENERATORS = {
    "demo1d": _demo1d,
    "taylor_green_2d3d": _taylor_green,
    "abc_flow": _abc,
    "random_multiscale": _random_multiscale,
    "single_mode": _single_mode,
}


def sample_analytic(generator_id: str, params: dict | None, grid: Grid, time: float = 0.0):
    """Sample a named generator at the cell centres of ``grid`` at ``time``."""
    try:
        gen = GENERATORS[generator_id]
    except KeyError:
        raise GeneratorError(
            f"unknown generator {generator_id!r}; known: {sorted(GENERATORS)}") from None
    try:
        return gen(dict(params or {}), grid, float(time))
    except GridError as exc:
        raise GeneratorError(f"{generator_id}: {exc}") from exc


def sample_series(generator_id: str, params: dict | None, grid: Grid, horizon: float, nsteps: int):
    """Uniform snapshots ``t_k = k T / nsteps`` for ``k = 0..nsteps``."""
    from .grid import FieldSeries

    if nsteps < 1:
        raise GeneratorError("nsteps must be >= 1")
    times = [horizon * k / nsteps for k in range(nsteps + 1)]
    times[-1] = float(horizon)
    return FieldSeries(tuple(sample_analytic(generator_id, params, grid, t) for t in times), horizon)
