"""(K1, K2)-covers of the integral domain B(0, R0) at scale R.

A cover is a set of centres ``x_i`` in ``B(0, R0)`` whose balls ``B(x_i, R)``
cover the domain, with ``(R0/R)^d <= n <= K1 (R0/R)^d`` and every domain
point inside at most ``K2`` of the doubled balls ``B(x_i, 2R)``.  Coverage
and multiplicity are checked on a validation lattice of spacing ``R/8``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.spatial import cKDTree

DEFAULT_K = {1: (3, 3), 2: (8, 10), 3: (30, 40)}
LATTICE_DIVISOR = 8
_TOL = 1e-9


class CoverError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Cover:
    centers: np.ndarray
    R: float
    R0: float
    K1: int
    K2: int
    dim: int

    def __post_init__(self):
        c = np.array(self.centers, dtype=np.float64).reshape(-1, self.dim)
        c.flags.writeable = False
        object.__setattr__(self, "centers", c)

    @property
    def n(self) -> int:
        return self.centers.shape[0]

    @property
    def n_bounds(self) -> tuple[float, float]:
        base = (self.R0 / self.R) ** self.dim
        return base, self.K1 * base

    def with_centers(self, centers) -> "Cover":
        return Cover(centers, self.R, self.R0, self.K1, self.K2, self.dim)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim, "R": self.R, "R0": self.R0, "K1": self.K1, "K2": self.K2,
            "n": self.n, "centers": self.centers.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "Cover":
        return cls(np.array(data["centers"], dtype=np.float64).reshape(-1, int(data["dim"])),
                   float(data["R"]), float(data["R0"]), int(data["K1"]), int(data["K2"]),
                   int(data["dim"]))


@dataclass
class CoverValidityReport:
    covers_domain: bool
    n_in_bounds: bool
    multiplicity_ok: bool
    centers_inside: bool
    max_local_multiplicity: int
    n: int
    n_bounds: tuple
    lattice_spacing: float
    lattice_points: int
    worst_uncovered: list | None = None
    worst_uncovered_distance: float | None = None

    @property
    def valid(self) -> bool:
        return self.covers_domain and self.n_in_bounds and self.multiplicity_ok and self.centers_inside

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["n_bounds"] = list(self.n_bounds)
        d["valid"] = self.valid
        return d


def _sorted_rows(points: np.ndarray) -> np.ndarray:
    if points.shape[0] == 0:
        return points
    order = np.lexsort(points.T[::-1])
    return points[order]


def _project_into_ball(points: np.ndarray, R0: float) -> np.ndarray:
    norms = np.sqrt(np.sum(points ** 2, axis=1))
    out = points.copy()
    outside = norms > R0
    out[outside] *= (R0 / norms[outside])[:, None]
    return out


def _lattice_centers(R0: float, spacing: float, dim: int, offset=None) -> np.ndarray:
    """Centres of lattice cells meeting the open ball, pulled back into it.

    Projection onto the (convex) ball never increases the distance to a
    domain point, so coverage by the unprojected cells is preserved.
    """
    m = max(1, int(math.ceil(2.0 * R0 / spacing - 1e-12)))
    if offset is None:
        offset = np.zeros(dim)
    # one extra ring absorbs a shifted lattice
    js = np.arange(-1, m + 1) if np.any(offset) else np.arange(m)
    line = (js - (m - 1) / 2.0) * spacing
    pts = np.array(list(itertools.product(line, repeat=dim)), dtype=np.float64) + offset
    half = spacing / 2.0
    nearest = np.clip(0.0, pts - half, pts + half)
    keep = np.sqrt(np.sum(nearest ** 2, axis=1)) < R0 * (1.0 - 1e-12)
    pts = _project_into_ball(pts[keep], R0)
    pts = np.unique(np.round(pts, 12), axis=0)
    return _sorted_rows(pts)


def uniform_cover(R0: float, R: float, dim: int, K1: int | None = None, K2: int | None = None) -> Cover:
    """Axis-aligned lattice cover with spacing ``2R / sqrt(d)``."""
    dk1, dk2 = DEFAULT_K.get(dim, (None, None))
    return _uniform_cover(float(R0), float(R), int(dim),
                          dk1 if K1 is None else int(K1), dk2 if K2 is None else int(K2))


@lru_cache(maxsize=256)
def _uniform_cover(R0: float, R: float, dim: int, K1, K2) -> Cover:
    if not (0 < R <= R0 * (1 + 1e-12)):
        raise CoverError(f"need 0 < R <= R0, got R={R}, R0={R0}")
    if dim not in (1, 2, 3):
        raise CoverError("dim must be 1, 2 or 3")
    spacing = 2.0 * R / math.sqrt(dim)
    centers = _lattice_centers(R0, spacing, dim)
    cover = Cover(centers, float(R), float(R0), K1, K2, dim)
    lo, hi = cover.n_bounds
    if cover.n > hi * (1 + 1e-12):
        need = int(math.ceil(cover.n / lo - 1e-12))
        raise CoverError(
            f"uniform lattice needs {cover.n} centres but K1 (R0/R)^d = {hi:g}; "
            f"minimal feasible K1 is {need}")
    report = validate_cover(cover)
    if not report.multiplicity_ok:
        raise CoverError(
            f"uniform lattice has local multiplicity {report.max_local_multiplicity} > K2 = {K2}; "
            f"minimal feasible K2 is {report.max_local_multiplicity}")
    if not report.valid:
        raise CoverError(f"uniform lattice failed validation: {report.to_dict()}")
    return cover


def _lattice_params(R0: float, R: float, divisor: int):
    h = R / divisor
    return h, int(math.floor(R0 / h + 1e-9))


def _boundary_points(R0: float, R: float, dim: int, divisor: int) -> np.ndarray:
    """Sphere samples: lattice points near the sphere, projected radially onto it."""
    if dim == 1:
        return np.array([[-R0], [R0]])
    h, k = _lattice_params(R0, R, divisor)
    line = np.arange(-k - 1, k + 2) * h
    grids = np.meshgrid(*([line] * dim), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    norms = np.sqrt(np.sum(pts ** 2, axis=1))
    shell = (norms > R0 - h) & (norms <= R0 + h) & (norms > 0)
    out = pts[shell] * (R0 / norms[shell])[:, None]
    return np.unique(np.round(out, 12), axis=0)


def validation_lattice(R0: float, R: float, dim: int, divisor: int = LATTICE_DIVISOR) -> np.ndarray:
    """Lattice of spacing ``R/divisor`` inside ``B(0, R0)`` plus boundary samples."""
    h, k = _lattice_params(R0, R, divisor)
    line = np.arange(-k, k + 1) * h
    grids = np.meshgrid(*([line] * dim), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    inside = pts[np.sqrt(np.sum(pts ** 2, axis=1)) <= R0 * (1 + 1e-12)]
    return np.concatenate([inside, _boundary_points(R0, R, dim, divisor)])


def _lattice_counts(centers: np.ndarray, R0: float, R: float, dim: int, divisor: int):
    """Coverage and doubled-ball counts on the structured lattice, stencil by stencil."""
    h, k = _lattice_params(R0, R, divisor)
    shape = (2 * k + 1,) * dim
    cover = np.zeros(shape, dtype=np.int32)
    mult = np.zeros(shape, dtype=np.int32)
    rc2 = (R * (1 + _TOL)) ** 2
    rm2 = (2 * R * (1 - _TOL)) ** 2
    for c in centers:
        sl, d2 = [], None
        for a in range(dim):
            lo = max(-k, int(math.ceil((c[a] - 2 * R) / h)) - 1)
            hi = min(k, int(math.floor((c[a] + 2 * R) / h)) + 1)
            if hi < lo:
                break
            idx = np.arange(lo, hi + 1)
            sq = (idx * h - c[a]) ** 2
            sl.append(slice(lo + k, hi + k + 1))
            d2 = sq if d2 is None else d2[..., None] + sq.reshape((1,) * a + (-1,))
        else:
            sl = tuple(sl)
            cover[sl] += d2 <= rc2
            mult[sl] += d2 < rm2
    line = np.arange(-k, k + 1) * h
    r2 = sum(np.meshgrid(*([line * line] * dim), indexing="ij"))
    inside = r2 <= (R0 * (1 + 1e-12)) ** 2
    return cover, mult, inside, line


def validate_cover(cover: Cover, divisor: int = LATTICE_DIVISOR) -> CoverValidityReport:
    h, _ = _lattice_params(cover.R0, cover.R, divisor)
    lo, hi = cover.n_bounds
    n_ok = lo * (1 - 1e-12) <= cover.n <= hi * (1 + 1e-12)
    norms = np.sqrt(np.sum(cover.centers ** 2, axis=1)) if cover.n else np.zeros(0)
    inside_ok = bool(np.all(norms <= cover.R0 * (1 + 1e-12)))
    bpts = _boundary_points(cover.R0, cover.R, cover.dim, divisor)
    cnt, mult, inside, line = _lattice_counts(cover.centers, cover.R0, cover.R, cover.dim, divisor)
    npts = int(np.count_nonzero(inside)) + len(bpts)
    if cover.n == 0:
        return CoverValidityReport(False, n_ok, True, inside_ok, 0, 0, (lo, hi), h, npts,
                                   bpts[0].tolist(), math.inf)
    tree = cKDTree(cover.centers)
    bdist, _ = tree.query(bpts)
    bmult = tree.query_ball_point(bpts, cover.R * 2.0 * (1 - _TOL), return_length=True)
    max_mult = max(int(np.max(mult[inside])), int(np.max(bmult)))
    holes = inside & (cnt == 0)
    covered = not np.any(holes) and bool(np.all(bdist <= cover.R * (1 + _TOL)))
    worst = worst_d = None
    if not covered:
        idx = np.argwhere(holes)
        cand = np.concatenate([line[idx], bpts[bdist > cover.R * (1 + _TOL)]])
        d, _ = tree.query(cand)
        j = int(np.argmax(d))
        worst, worst_d = cand[j].tolist(), float(d[j])
    return CoverValidityReport(
        covers_domain=covered, n_in_bounds=bool(n_ok),
        multiplicity_ok=max_mult <= cover.K2, centers_inside=inside_ok,
        max_local_multiplicity=max_mult, n=cover.n, n_bounds=(lo, hi),
        lattice_spacing=h, lattice_points=npts,
        worst_uncovered=worst, worst_uncovered_distance=worst_d)


def candidate_lattice(R0: float, spacing: float, dim: int) -> np.ndarray:
    k = int(math.floor(R0 / spacing + 1e-9))
    line = np.arange(-k, k + 1) * spacing
    grids = np.meshgrid(*([line] * dim), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    pts = pts[np.sqrt(np.sum(pts ** 2, axis=1)) <= R0 * (1 + 1e-12)]
    return _sorted_rows(pts)


@dataclass(frozen=True)
class BiasObjective:
    direction: str = "maximize"
    candidate_spacing: float | None = None
    budget: int = 200

    def __post_init__(self):
        if self.direction not in ("maximize", "minimize", "none"):
            raise ValueError(f"direction must be maximize, minimize or none, got {self.direction!r}")
        if self.budget < 0:
            raise ValueError("budget must be >= 0")


@dataclass
class OptimizeTrace:
    base_n: int = 0
    added: int = 0
    moves_tried: int = 0
    moves_accepted: int = 0
    base_value: float = 0.0
    final_value: float = 0.0
    extra: dict = field(default_factory=dict)


class _CoverState:
    """Incremental coverage and multiplicity counts on the validation lattice."""

    def __init__(self, cover: Cover, divisor: int = LATTICE_DIVISOR):
        self.R = cover.R
        self.K2 = cover.K2
        self.pts = validation_lattice(cover.R0, cover.R, cover.dim, divisor)
        self.tree = cKDTree(self.pts)
        self.cover_count = np.zeros(len(self.pts), dtype=np.int64)
        self.mult_count = np.zeros(len(self.pts), dtype=np.int64)
        for c in cover.centers:
            self.add(c)

    def _near(self, c, radius):
        return np.asarray(self.tree.query_ball_point(c, radius), dtype=np.int64)

    def cover_idx(self, c):
        return self._near(c, self.R * (1 + _TOL))

    def mult_idx(self, c):
        return self._near(c, 2.0 * self.R * (1 - _TOL))

    def can_add(self, c, mult_idx=None) -> bool:
        idx = self.mult_idx(c) if mult_idx is None else mult_idx
        return bool(np.all(self.mult_count[idx] < self.K2))

    def add(self, c, mult_idx=None):
        self.cover_count[self.cover_idx(c)] += 1
        self.mult_count[self.mult_idx(c) if mult_idx is None else mult_idx] += 1

    def can_move(self, old, new) -> bool:
        old_c, new_c = self.cover_idx(old), self.cover_idx(new)
        cov = self.cover_count.copy()
        cov[old_c] -= 1
        cov[new_c] += 1
        if np.any(cov[old_c] < 1):
            return False
        mult = self.mult_count.copy()
        mult[self.mult_idx(old)] -= 1
        new_m = self.mult_idx(new)
        mult[new_m] += 1
        return bool(np.all(mult[new_m] <= self.K2))

    def move(self, old, new):
        self.cover_count[self.cover_idx(old)] -= 1
        self.mult_count[self.mult_idx(old)] -= 1
        self.add(new)


def optimize_cover(averager, R: float, objective: BiasObjective, R0: float | None = None,
                   K1: int | None = None, K2: int | None = None, trace: OptimizeTrace | None = None) -> Cover:
    """Bias a cover toward large (or small) ensemble averages.

    Starts from the uniform cover, greedily adds candidate centres (lattice
    spacing ``R/4``) that push the mean in the requested direction while the
    multiplicity stays within ``K2``, then hill-climbs single centres by
    ``R/4`` steps until ``objective.budget`` moves have been tried.  Ties go
    to the lexicographically smallest centre.
    """
    cfg = averager.config
    R0 = cfg.R0 if R0 is None else R0
    K1 = cfg.K1 if K1 is None else K1
    K2 = cfg.K2 if K2 is None else K2
    dim = averager.grid.dim
    base = uniform_cover(R0, R, dim, K1, K2)
    trace = trace if trace is not None else OptimizeTrace()
    trace.base_n = base.n
    if objective.direction == "none":
        vals = averager.values(base.centers, R)
        trace.base_value = trace.final_value = math.fsum(vals) / base.n
        return base
    sign = 1.0 if objective.direction == "maximize" else -1.0
    step = objective.candidate_spacing or R / 4.0

    centers = [np.array(c) for c in base.centers]
    vals = list(averager.values(base.centers, R))
    total = math.fsum(vals)
    trace.base_value = total / len(vals)
    state = _CoverState(base)

    n_max = int(math.floor(K1 * (R0 / R) ** dim * (1 + 1e-12)))
    room = n_max - len(centers)
    cands = candidate_lattice(R0, step, dim)
    if room > 0 and len(cands):
        cvals = averager.values(cands, R)
        # best score first, then lexicographic position
        keys = [cands[:, a] for a in range(dim - 1, -1, -1)] + [-sign * cvals]
        order = np.lexsort(keys)
        for j in order:
            v = cvals[j]
            mean = total / len(centers)
            if sign * v <= sign * mean:
                break
            midx = state.mult_idx(cands[j])
            if not state.can_add(cands[j], midx):
                continue
            state.add(cands[j], midx)
            centers.append(cands[j].copy())
            vals.append(float(v))
            total += v
            trace.added += 1
            if len(centers) >= n_max:
                break

    # hill climbing: worst-scoring centres first
    budget = objective.budget
    moves = [s * step * e for e in np.eye(dim) for s in (-1.0, 1.0)]
    improved = True
    while budget > 0 and improved:
        improved = False
        order = sorted(range(len(centers)), key=lambda i: (sign * vals[i], tuple(centers[i])))
        for i in order:
            if budget <= 0:
                break
            trial = [centers[i] + mv for mv in moves]
            trial = [p for p in trial if np.sqrt(np.sum(p ** 2)) <= R0 * (1 + 1e-12)]
            if not trial:
                continue
            tvals = averager.values(np.array(trial), R)
            budget -= len(trial)
            trace.moves_tried += len(trial)
            best = None
            for p, v in sorted(zip(trial, tvals), key=lambda pv: (-sign * pv[1], tuple(pv[0]))):
                if sign * v <= sign * vals[i]:
                    break
                if state.can_move(centers[i], p):
                    best = (p, float(v))
                    break
            if best is not None:
                state.move(centers[i], best[0])
                total += best[1] - vals[i]
                centers[i] = best[0]
                vals[i] = best[1]
                trace.moves_accepted += 1
                improved = True

    result = base.with_centers(_sorted_rows(np.array(centers)))
    trace.final_value = total / len(centers)
    return result


def random_cover(R0: float, R: float, dim: int, K1: int, K2: int, rng: np.random.Generator,
                 max_tries: int = 200) -> Cover:
    """Jittered-lattice cover, resampled until valid.

    The lattice is shrunk by a random factor ``lam`` so each centre can be
    jittered by up to ``(1 - lam) R`` without opening a coverage hole.
    """
    base_spacing = 2.0 * R / math.sqrt(dim)
    for _ in range(max_tries):
        lam = rng.uniform(0.7, 1.0)
        spacing = lam * base_spacing
        offset = rng.uniform(-0.5, 0.5, dim) * spacing
        pts = _lattice_centers(R0, spacing, dim, offset=offset)
        slack = (1.0 - lam) * R
        if slack > 0 and len(pts):
            direction = rng.standard_normal(pts.shape)
            direction /= np.linalg.norm(direction, axis=1)[:, None]
            radius = slack * rng.uniform(0.0, 1.0, len(pts)) ** (1.0 / dim)
            pts = _project_into_ball(pts + direction * radius[:, None], R0)
        cover = Cover(_sorted_rows(pts), float(R), float(R0), int(K1), int(K2), dim)
        if validate_cover(cover).valid:
            return cover
    raise CoverError(f"no valid random cover found in {max_tries} tries at R={R}")
