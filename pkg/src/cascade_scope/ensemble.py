"""Ensemble averages over covers, scale sweeps and the sign-fluctuation detector."""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .averaging import EnsembleConfig, LocalAverager, SupportError, unit_ball_volume
from .covers import BiasObjective, Cover, CoverError, OptimizeTrace, optimize_cover, random_cover, uniform_cover
from .fields import FieldSeries, make_grid, sample_analytic

__all__ = [
    "EnsembleConfig", "LocalAverager", "SupportError", "IntegralAverages", "SweepResult",
    "DetectorReport", "KstarReport", "PropagationReport", "local_average", "ensemble_average",
    "integral_average", "scale_sweep", "kstar_check", "detect_scales", "propagation_report",
    "demo1d_series", "log_scales", "thread_count", "REFERENCE_GLOBAL_AVERAGE",
]

REFERENCE_GLOBAL_AVERAGE = -0.003880
DEMO_SPACING = 1e-3


def thread_count() -> int:
    raw = os.environ.get("CASCADE_SCOPE_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = os.cpu_count() or 1
    return max(1, n)


def _averager(f, config, backend=None):
    if isinstance(f, LocalAverager):
        return f
    return LocalAverager(f, config, backend=backend)


def local_average(f: FieldSeries, x_i, R: float, config: EnsembleConfig, backend=None) -> float:
    """``(1/T) int (1/R^d) int f phi^delta``, trapezoid in time, midpoint in space."""
    return _averager(f, config, backend).value(x_i, R)


def ensemble_average(f, cover: Cover, config: EnsembleConfig, backend=None) -> float:
    """Mean of the local averages over the cover.

    ``math.fsum`` is correctly rounded, so the result does not depend on the
    order of the centres.
    """
    if cover.n == 0:
        raise CoverError("empty cover")
    vals = _averager(f, config, backend).values(cover.centers, cover.R)
    return math.fsum(vals.tolist()) / cover.n


@dataclass
class IntegralAverages:
    """Integral-scale averages under the conventions compared by the demo.

    ``F0`` and ``F0_abs`` carry the cutoff ``phi0**delta``; the rest use the
    sharp ball ``B(0, R0)`` with the plain time mean.
    """

    F0: float
    F0_abs: float
    plain_mean: float
    half_domain_mean: float
    per_unit_mass: float

    def conventions(self) -> dict:
        return {"plain_mean": self.plain_mean, "cutoff_F0": self.F0,
                "half_domain_mean": self.half_domain_mean, "per_unit_mass": self.per_unit_mass}

    def match(self, target: float, tol: float) -> str | None:
        """First convention within ``tol`` of ``target``, plain mean tried first."""
        for name, v in self.conventions().items():
            if abs(v - target) <= tol:
                return name
        return None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _time_mean(series: FieldSeries) -> np.ndarray:
    if series.static:
        return np.asarray(series.snapshots[0].values)
    w = np.diff(series.times)
    tw = np.zeros(len(series))
    tw[:-1] += w / 2
    tw[1:] += w / 2
    acc = sum(wk * np.asarray(s.values) for wk, s in zip(tw, series.snapshots))
    return acc / series.T


def integral_average(f: FieldSeries, config: EnsembleConfig, backend=None) -> IntegralAverages:
    grid = f.grid
    origin = np.zeros((1, grid.dim))
    av = _averager(f, config, backend)
    F0 = float(av.values(origin, config.R0)[0])
    F0_abs = float(LocalAverager(f.map(lambda s: s.replace(values=np.abs(s.values))), config,
                                 backend=backend).values(origin, config.R0)[0])
    mean = _time_mean(f)
    if mean.shape != grid.shape:
        raise ValueError("integral_average needs a scalar density")
    mesh = grid.mesh()
    r = np.sqrt(sum(x * x for x in mesh))
    ball = r < config.R0
    half = ball & (mesh[0] >= 0.0)
    dv = grid.cell_volume
    ball_mass = math.fsum(mean[ball].tolist()) * dv
    vol = unit_ball_volume(grid.dim) * config.R0 ** grid.dim
    return IntegralAverages(
        F0=F0, F0_abs=F0_abs,
        plain_mean=ball_mass / vol,
        half_domain_mean=math.fsum(mean[half].tolist()) * dv / (vol / 2.0),
        per_unit_mass=ball_mass / config.R0 ** grid.dim,
    )


def demo1d_series(R0: float = 10.0, spacing: float = DEMO_SPACING, absolute: bool = False,
                  T: float | None = None) -> FieldSeries:
    """Time-independent demo density on ``[-3 R0, 3 R0]`` with ``T = R0**2``.

    The grid reaches every doubled ball ``B(x_i, 2R)`` with ``|x_i| <= R0``.
    """
    L = 3.0 * R0
    n = int(round(2 * L / spacing))
    grid = make_grid(-L, 2 * L, n)
    fld = sample_analytic("demo1d", {"absolute": absolute}, grid)
    return FieldSeries.constant(fld, R0 ** 2 if T is None else T)


def log_scales(lo: float, hi: float, n: int) -> list[float]:
    if n == 1:
        return [float(hi)]
    return [float(v) for v in np.logspace(math.log10(lo), math.log10(hi), n)]


@dataclass
class SweepResult:
    scales: list
    values_max: list
    values_min: list
    values_uniform: list
    F0: float
    F0_abs: float
    covers: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    traces: list = field(default_factory=list)

    def ordering_ok(self, tol: float = 1e-12) -> bool:
        return all(lo <= u + tol and u <= hi + tol
                   for lo, u, hi in zip(self.values_min, self.values_uniform, self.values_max))

    def to_dict(self) -> dict:
        return {"scales": self.scales, "values_max": self.values_max, "values_min": self.values_min,
                "values_uniform": self.values_uniform, "F0": self.F0, "F0_abs": self.F0_abs,
                "covers": self.covers, "config": self.config, "traces": self.traces}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["R", "min", "uniform", "max", "F0"])
        for row in zip(self.scales, self.values_min, self.values_uniform, self.values_max):
            w.writerow([repr(float(v)) for v in row] + [repr(float(self.F0))])
        return buf.getvalue()


def _sweep_point(av: LocalAverager, R: float, budget: int):
    cfg = av.config
    base = uniform_cover(cfg.R0, R, cfg.dim, cfg.K1, cfg.K2)
    u = ensemble_average(av, base, cfg)
    out = {"R": R, "uniform": u, "covers": {"uniform": base.to_dict()}, "traces": {}}
    for direction in ("maximize", "minimize"):
        tr = OptimizeTrace()
        cov = optimize_cover(av, R, BiasObjective(direction, budget=budget), trace=tr)
        out[direction] = ensemble_average(av, cov, cfg)
        out["covers"][direction] = cov.to_dict()
        out["traces"][direction] = {"base_n": tr.base_n, "added": tr.added,
                                    "moves_tried": tr.moves_tried, "moves_accepted": tr.moves_accepted}
    return out


def scale_sweep(f: FieldSeries, scales, config: EnsembleConfig, budget: int = 200,
                backend=None, threads: int | None = None, keep_covers: bool = True) -> SweepResult:
    """Uniform, maximised and minimised ensemble averages at each scale."""
    scales = [float(R) for R in scales]
    if not scales:
        raise ValueError("no scales given")
    for R in scales:
        if not (0 < R <= config.R0 * (1 + 1e-12)):
            raise ValueError(f"scale {R} outside (0, R0]")
    av = _averager(f, config, backend)
    F = integral_average(f, config, backend)
    threads = thread_count() if threads is None else max(1, threads)
    if threads > 1 and len(scales) > 1:
        with ThreadPoolExecutor(threads) as pool:
            points = list(pool.map(lambda R: _sweep_point(av, R, budget), scales))
    else:
        points = [_sweep_point(av, R, budget) for R in scales]
    return SweepResult(
        scales=scales,
        values_max=[p["maximize"] for p in points],
        values_min=[p["minimize"] for p in points],
        values_uniform=[p["uniform"] for p in points],
        F0=F.F0, F0_abs=F.F0_abs,
        covers=[p["covers"] for p in points] if keep_covers else [],
        config=config.to_dict(),
        traces=[p["traces"] for p in points],
    )


@dataclass
class KstarReport:
    empirical: float
    analytic: float
    F0: float
    trials: int
    scales: list
    ratio_min: list
    ratio_max: list

    @property
    def within_bound(self) -> bool:
        return self.empirical <= self.analytic

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["within_bound"] = self.within_bound
        return d


def kstar_check(f: FieldSeries, trials: int, config: EnsembleConfig, scales=None, seed: int = 0,
                backend=None) -> KstarReport:
    """Largest ``max(<F>_R / F0, F0 / <F>_R)`` over random valid covers."""
    for s in f.snapshots:
        if np.any(np.asarray(s.values) < 0):
            raise ValueError("kstar_check needs a nonnegative density")
    av = _averager(f, config, backend)
    F0 = float(av.values(np.zeros((1, config.dim)), config.R0)[0])
    if not F0 > 0:
        raise ValueError("kstar_check needs F0 > 0")
    if scales is None:
        scales = log_scales(config.R0 / 100.0, config.R0, 10)
    rng = np.random.default_rng(seed)
    worst = 1.0
    rmin, rmax = [], []
    for R in scales:
        lo, hi = math.inf, -math.inf
        for _ in range(trials):
            cov = random_cover(config.R0, R, config.dim, config.K1, config.K2, rng)
            ratio = ensemble_average(av, cov, config) / F0
            lo, hi = min(lo, ratio), max(hi, ratio)
            if ratio <= 0:
                worst = math.inf
            else:
                worst = max(worst, ratio, 1.0 / ratio)
        rmin.append(lo)
        rmax.append(hi)
    return KstarReport(worst, config.kstar, F0, trials, [float(R) for R in scales], rmin, rmax)


@dataclass
class DetectorReport:
    scales: list
    spread: list
    flagged: list
    threshold: float
    floor: float

    def spread_at(self, R: float) -> float:
        i = int(np.argmin([abs(math.log(s / R)) for s in self.scales]))
        return self.spread[i]

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def detect_scales(sweep: SweepResult, threshold: float, floor: float | None = None) -> DetectorReport:
    """Flag scales whose max/min spread, over ``max(|F0|, floor)``, exceeds ``threshold``.

    The floor defaults to the cutoff average of ``|f|``, which keeps the
    normalisation meaningful when ``F0`` itself nearly cancels.
    """
    floor = sweep.F0_abs if floor is None else floor
    denom = max(abs(sweep.F0), floor)
    if denom <= 0:
        denom = 1.0
    spread = [max(0.0, (hi - lo) / denom) for hi, lo in zip(sweep.values_max, sweep.values_min)]
    flagged = [R for R, s in zip(sweep.scales, spread) if s > threshold]
    return DetectorReport(list(sweep.scales), spread, flagged, float(threshold), float(floor))


@dataclass
class PropagationReport:
    R_star: float
    C1_band: float
    F_star: float | None
    persistence: bool | None
    exponent: float | None
    insufficient_data: bool
    window_scales: list
    above_scales: list
    note: str = ""

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _comparable(v: float, ref: float, band: float) -> bool:
    if ref == 0.0 or v == 0.0 or (v > 0) != (ref > 0):
        return False
    r = v / ref
    return 1.0 / band <= r <= band


def propagation_report(sweep: SweepResult, R_star: float, C1_band: float) -> PropagationReport:
    """Checks whether comparability on ``[R*, 2R*]`` persists above ``2R*``.

    Also fits ``|<F>_R| ~ (R*/R)**C4 F*`` on the uniform curve above ``2R*``.
    Report only, without a pass/fail contract.
    """
    eps = 1e-12
    win = [i for i, R in enumerate(sweep.scales) if R_star * (1 - eps) <= R <= 2 * R_star * (1 + eps)]
    above = [i for i, R in enumerate(sweep.scales) if R >= 2 * R_star * (1 + eps)]
    base = PropagationReport(R_star, C1_band, None, None, None, True,
                             [sweep.scales[i] for i in win], [sweep.scales[i] for i in above])
    if not win or not above:
        base.note = "no sweep scales in [R*, 2R*]" if not win else "no sweep scales above 2R*"
        return base
    curves = (sweep.values_min, sweep.values_uniform, sweep.values_max)
    vals = [c[i] for c in curves for i in win]
    F_star = math.fsum(vals) / len(vals)
    base.F_star = F_star
    base.insufficient_data = False
    window_ok = all(_comparable(v, F_star, C1_band) for v in vals)
    base.persistence = window_ok and all(_comparable(c[i], F_star, C1_band) for c in curves for i in above)
    if not window_ok:
        base.note = "curves not comparable on [R*, 2R*]"
    xs, ys = [], []
    for i in above:
        u = sweep.values_uniform[i]
        if u != 0.0 and F_star != 0.0:
            xs.append(math.log(R_star / sweep.scales[i]))
            ys.append(math.log(abs(u / F_star)))
    if len(xs) >= 2:
        slope = float(np.polyfit(xs, ys, 1)[0])
        base.exponent = slope + 0.0
    elif len(xs) == 1 and xs[0] != 0.0:
        base.exponent = ys[0] / xs[0]
    return base
