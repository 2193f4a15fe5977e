"""Vorticity diagnostics: coherence, assumption checks, localized fluxes and verdicts.

Everything here lives in three dimensions.  Fields on a 2D grid with three
components are z-independent flows; their ball integrals are taken over the
full 3D balls through column-integrated cutoffs (see :mod:`ballsums`).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels
from .averaging import SupportError, check_support, unit_ball_volume
from .ballsums import ball_sums3
from .covers import DEFAULT_K, Cover, uniform_cover
from .cutoffs import DEFAULT_RHO, build_eta, displacement, power_for, trapezoid_weights
from .fields import FieldSeries, VectorField, curl_array, gradient_tensor

DEFAULT_BETA = 0.1
DEFAULT_C1 = 1.0
DEFAULT_EPS_REL = 1e-8


class InconsistentFieldsError(ValueError):
    pass


def _clean(obj):
    """JSON-safe copy: non-finite floats become strings, arrays become lists."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _require3(grid, what):
    if grid.dim not in (2, 3):
        raise ValueError(f"{what} needs a 3D grid or a 2D grid carrying an embedded field")


def _origin(grid, x0):
    return np.zeros(grid.dim) if x0 is None else np.asarray(x0, dtype=np.float64).reshape(grid.dim)


def _enstrophy_density(values):
    return 0.5 * np.sum(np.asarray(values) ** 2, axis=0)


def _grad_sq(omega: VectorField, scheme):
    G = gradient_tensor(omega, scheme)
    return np.sum(G ** 2, axis=(0, 1))


def _stretching_density(omega: VectorField, u: VectorField, scheme):
    """``(omega . grad) u . omega = sum_ij omega_i d_i u_j omega_j``."""
    G = gradient_tensor(u, scheme)
    w = np.asarray(omega.values)
    return np.einsum("i...,ij...,j...->...", w, G, w)


def _check_pair(omega: FieldSeries, u: FieldSeries):
    if omega.grid != u.grid:
        raise InconsistentFieldsError("vorticity and velocity live on different grids")
    if len(omega) != len(u) or omega.static != u.static or not np.allclose(omega.times, u.times):
        raise InconsistentFieldsError("vorticity and velocity have different time grids")
    for s in list(omega) + list(u):
        if getattr(s, "ncomp", 1) != 3:
            raise InconsistentFieldsError("vorticity and velocity need three components")


def curl_residual(omega: FieldSeries, u: FieldSeries, scheme: str = "spectral") -> float:
    """``max |curl u - omega| / max |omega|`` over all snapshots."""
    _check_pair(omega, u)
    worst, scale = 0.0, 0.0
    for w, v in zip(omega, u):
        c = curl_array(np.asarray(v.values), v.grid, scheme)
        worst = max(worst, float(np.max(np.abs(c - w.values))))
        scale = max(scale, float(np.max(np.abs(w.values))))
    if scale == 0.0:
        return worst
    return worst / scale


# -- coherence ---------------------------------------------------------------

@dataclass
class CoherenceField:
    values: np.ndarray
    undefined: np.ndarray
    gamma: float
    r: float
    eps_vort: float
    stencil_size: int


def direction_field(omega_values, eps_vort):
    w = np.asarray(omega_values, dtype=np.float64)
    mag = np.sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2])
    valid = mag >= eps_vort
    if eps_vort <= 0:
        valid &= mag > 0
    xi = np.zeros_like(w)
    xi[:, valid] = w[:, valid] / mag[valid]
    return xi, valid


def pair_distance(offset, spacing) -> float:
    """Physical length of an integer index offset (shared with test oracles)."""
    return math.sqrt(sum((o * h) ** 2 for o, h in zip(offset, spacing)))


def coherence_stencil(grid, r, gamma):
    """Integer offsets within distance ``r`` and their ``|d|^gamma`` denominators."""
    h = list(grid.spacing) + [1.0] * (3 - grid.dim)
    reach = [int(math.floor(r / h[a] * (1 + 1e-12))) if a < grid.dim else 0 for a in range(3)]
    offs, den = [], []
    for i in range(-reach[0], reach[0] + 1):
        for j in range(-reach[1], reach[1] + 1):
            for k in range(-reach[2], reach[2] + 1):
                if i == 0 and j == 0 and k == 0:
                    continue
                d = pair_distance((i, j, k), h)
                if d <= r * (1 + 1e-12):
                    offs.append((i, j, k))
                    den.append(math.pow(d, gamma))
    return np.array(offs, dtype=np.int64).reshape(-1, 3), np.array(den)


def coherence_measure(omega: VectorField, gamma: float, r: float, eps_vort: float | None = None,
                      backend=None) -> CoherenceField:
    """``sup |xi(x) x xi(y)| / |x - y|^gamma`` over grid points ``y`` within ``r``.

    Points with ``|omega| < eps_vort`` get 0 and are marked undefined; they
    are also excluded as partners.
    """
    grid = omega.grid
    _require3(grid, "coherence_measure")
    if omega.ncomp != 3:
        raise ValueError("coherence needs a three-component vorticity")
    hmin = min(grid.spacing)
    if r < hmin * (1 - 1e-12):
        raise ValueError(f"pair radius {r} is below the grid spacing {hmin}")
    for a in range(grid.dim):
        if grid.periodic[a] and 2 * r >= grid.extent[a]:
            raise ValueError(f"pair radius {r} reaches half the period on axis {a}")
    w = np.asarray(omega.values)
    if eps_vort is None:
        eps_vort = DEFAULT_EPS_REL * float(np.max(np.sqrt(np.sum(w ** 2, axis=0))))
    xi, valid = direction_field(w, eps_vort)
    offs, den = coherence_stencil(grid, r, gamma)
    xi4 = _kernels.as4d(xi, grid)
    valid3 = _kernels.as4d(valid.astype(np.float64), grid)[0] > 0
    periodic = np.array([int(p) for p in grid.periodic] + [0] * (3 - grid.dim))
    out = _kernels.coherence_sup(xi4, valid3, offs, den, periodic, backend=backend)
    return CoherenceField(out.reshape(grid.shape), ~valid, float(gamma), float(r),
                          float(eps_vort), len(offs))


@dataclass
class CoherenceReport:
    gamma: float
    r: float | None
    M: float
    eps_vort: float
    C1_meas: float
    pairs: int
    C1_user: float
    holds: bool
    curl_residual: float
    snapshots: int

    def to_dict(self):
        return _clean(asdict(self))


def check_A1(omega: FieldSeries, u: FieldSeries, M: float, C1_user: float = DEFAULT_C1,
             R0: float = 1.0, gamma: float = 0.5, r: float | None = None, x0=None,
             eps_rel: float = DEFAULT_EPS_REL, scheme: str = "spectral",
             curl_tol: float = 1e-6, backend=None) -> CoherenceReport:
    """Coherence over intense-region pairs, all snapshots.

    ``x`` ranges over ``B(x0, 2R0)`` with ``|grad u|_F > M``; ``y`` over
    ``B(x0, 2R0 + R0^(2/3))``.  Pair distances are Euclidean in R^3, so the
    extended ball must fit inside one period.  For an embedded field the
    ``z = 0`` plane carries the supremum, since lifting a pair off the plane
    only lengthens it.
    """
    _check_pair(omega, u)
    grid = omega.grid
    _require3(grid, "check_A1")
    res = curl_residual(omega, u, scheme)
    if res > curl_tol:
        raise InconsistentFieldsError(f"curl u differs from omega by {res:.3e} (relative) > {curl_tol}")
    R_ext = 2 * R0 + R0 ** (2.0 / 3.0)
    x0 = _origin(grid, x0)
    check_support(grid, x0[None, :], R_ext)
    disp = displacement(grid, x0)
    dist0 = np.sqrt(np.sum(disp ** 2, axis=0))
    pos = disp.reshape(grid.dim, -1).T
    wmax = max(float(np.max(np.sqrt(np.sum(np.asarray(s.values) ** 2, axis=0)))) for s in omega)
    eps = eps_rel * wmax
    best, pairs = 0.0, 0
    for w, v in zip(omega, u):
        xi, valid = direction_field(w.values, eps)
        G = gradient_tensor(v, scheme)
        gnorm = np.sqrt(np.sum(G ** 2, axis=(0, 1)))
        xmask = (valid & (dist0 < 2 * R0) & (gnorm > M)).ravel()
        ymask = (valid & (dist0 < R_ext)).ravel()
        xi_flat = xi.reshape(3, -1).T
        b, n = _kernels.pairs_sup(pos[xmask], xi_flat[xmask], pos[ymask], xi_flat[ymask],
                                  gamma, r, backend=backend)
        best = max(best, b)
        pairs += n
    return CoherenceReport(gamma, r, float(M), eps, best, pairs, float(C1_user), best <= C1_user,
                           res, len(omega))


def _sharp_ball_weights(grid, x0, radius):
    """Per-cell 3D measure of ``B(x0, radius)`` (chords for embedded fields)."""
    disp = displacement(grid, x0)
    rho2 = np.sum(disp ** 2, axis=0)
    if grid.dim == 3:
        return (rho2 < radius * radius).astype(np.float64) * grid.cell_volume
    return 2.0 * np.sqrt(np.clip(radius * radius - rho2, 0.0, None)) * grid.cell_volume


def _time_weights(series: FieldSeries):
    if series.static:
        return np.array([series.T])
    return trapezoid_weights(series.times)


def hybrid_integral(omega: FieldSeries, x0, R: float, gamma: float = 0.5,
                    eps_rel: float = DEFAULT_EPS_REL, backend=None) -> float:
    """``int_0^T int_{B(x0, 2R)} |omega|^2 rho_{gamma, 2R}^2``."""
    grid = omega.grid
    x0 = _origin(grid, x0)
    check_support(grid, x0[None, :], 2 * R)
    ball = _sharp_ball_weights(grid, x0, 2 * R)
    total = []
    for wt, w in zip(_time_weights(omega), omega):
        mag2 = np.sum(np.asarray(w.values) ** 2, axis=0)
        eps = eps_rel * math.sqrt(float(np.max(mag2)))
        if float(np.max(mag2)) == 0.0:
            total.append(0.0)
            continue
        rho = coherence_measure(w, gamma, 2 * R, eps, backend=backend).values
        total.append(wt * float(np.sum(mag2 * rho * rho * ball)))
    return math.fsum(total)


# -- Kraichnan scale ----------------------------------------------------------

@dataclass
class VorticityDiagnostics:
    E0: float
    P0: float
    P0_grad: float
    P0_final: float
    sigma0: float | None
    defined: bool
    B_T: float
    R0: float
    rho: float
    T: float

    def to_dict(self):
        return _clean(asdict(self))


def diagnostics_E0_P0_sigma0(omega: FieldSeries, rho: float = DEFAULT_RHO, R0: float = 1.0,
                             x0=None, scheme: str = "spectral", backend=None) -> VorticityDiagnostics:
    """Time-averaged enstrophy, modified palinstrophy and the Kraichnan scale at ``(x0, R0)``."""
    grid = omega.grid
    _require3(grid, "diagnostics_E0_P0_sigma0")
    x0 = _origin(grid, x0)[None, :]
    check_support(grid, x0, 2 * R0)
    m = power_for(rho)
    eta = build_eta(omega.T, rho)
    wE = eta.weights(omega, 2 * rho - 1)
    wP = eta.weights(omega, 1.0)
    norm = omega.T * R0 ** 3
    e_terms, p_terms = [], []
    for we, wp, w in zip(wE, wP, omega):
        if we != 0.0:
            e_terms.append(we * ball_sums3(_enstrophy_density(w.values), grid, x0, R0, m,
                                           2 * rho - 1, 0, backend)[0])
        if wp != 0.0:
            p_terms.append(wp * ball_sums3(_grad_sq(w, scheme), grid, x0, R0, m, 1.0, 0, backend)[0])
    E0 = math.fsum(e_terms) / norm
    P0_grad = math.fsum(p_terms) / norm
    P0_final = ball_sums3(_enstrophy_density(omega.final.values), grid, x0, R0, m, 1.0, 0,
                          backend)[0] / norm
    P0 = P0_grad + P0_final
    defined = P0 > 0
    sigma0 = math.sqrt(E0 / P0) if defined else None
    B_T = max(float(np.sum(np.sqrt(np.sum(np.asarray(w.values) ** 2, axis=0)))) * grid.cell_volume
              for w in omega)
    return VorticityDiagnostics(E0, P0, P0_grad, P0_final, sigma0, defined, B_T, R0, rho, omega.T)


@dataclass
class A2Report:
    holds: bool
    margin: float
    sigma0: float
    beta: float
    R0: float

    def to_dict(self):
        return _clean(asdict(self))


def check_A2(diag: VorticityDiagnostics, beta: float = DEFAULT_BETA, R0: float | None = None) -> A2Report:
    if not diag.defined:
        raise ValueError("Kraichnan scale undefined (P0 = 0)")
    R0 = diag.R0 if R0 is None else R0
    margin = beta * R0 - diag.sigma0
    return A2Report(margin > 0, margin, diag.sigma0, beta, R0)


@dataclass
class A3Report:
    localization_integral: float
    localization_bound: float | None
    localization_holds: bool | None
    modulation_ratio: float | None
    modulation_holds: bool
    degenerate: bool
    final_enstrophy: float
    sup_enstrophy: float
    warnings: list = field(default_factory=list)

    def to_dict(self):
        return _clean(asdict(self))


def check_A3(omega: FieldSeries, R0: float = 1.0, C2: float | None = None,
             rho: float = DEFAULT_RHO, x0=None, backend=None) -> A3Report:
    """Localization integral against ``1/C2`` and the final-time modulation ratio."""
    grid = omega.grid
    _require3(grid, "check_A3")
    x0 = _origin(grid, x0)
    warnings = []
    if R0 > min(math.sqrt(omega.T), 1.0) * (1 + 1e-12):
        warnings.append(f"R0 = {R0} exceeds min(sqrt(T), 1) = {min(math.sqrt(omega.T), 1.0)}")
    R_ext = 2 * R0 + R0 ** (2.0 / 3.0)
    try:
        check_support(grid, x0[None, :], R_ext)
    except SupportError as exc:
        warnings.append(f"localization ball not contained in the grid: {exc}")
    ball = _sharp_ball_weights(grid, x0, R_ext)
    loc = math.fsum(wt * float(np.sum(np.sum(np.asarray(w.values) ** 2, axis=0) * ball))
                    for wt, w in zip(_time_weights(omega), omega))
    bound = None if C2 is None else 1.0 / C2
    m = power_for(rho)
    check_support(grid, x0[None, :], 2 * R0)
    per = [float(ball_sums3(np.sum(np.asarray(w.values) ** 2, axis=0), grid, x0[None, :], R0, m,
                            1.0, 0, backend)[0]) for w in omega]
    sup = max(per)
    degenerate = sup <= 0.0
    ratio = None if degenerate else per[-1] / sup
    return A3Report(loc, bound, None if bound is None else loc <= bound, ratio,
                    (not degenerate) and ratio >= 0.5, degenerate, per[-1], sup, warnings)


# -- fluxes ---------------------------------------------------------------------

class FluxEvaluator:
    """Batch evaluation of ``(1/T)(1/R^3) int int |omega|^2/2 (u . grad phi_i)``."""

    def __init__(self, omega: FieldSeries, u: FieldSeries, rho: float = DEFAULT_RHO, backend=None):
        _check_pair(omega, u)
        self.grid = omega.grid
        _require3(self.grid, "local_flux")
        self.T = omega.T
        self.m = power_for(rho)
        self.rho = rho
        self.backend = backend
        self.weights = build_eta(omega.T, rho).weights(omega, 1.0)
        nd = self.grid.dim
        self._data = [(_enstrophy_density(w.values) * np.asarray(v.values)[:nd])
                      for w, v in zip(omega, u)]

    def values(self, centers, R: float) -> np.ndarray:
        centers = np.asarray(centers, dtype=np.float64).reshape(-1, self.grid.dim)
        check_support(self.grid, centers, 2 * R)
        total = np.zeros(len(centers))
        for wk, data in zip(self.weights, self._data):
            if wk != 0.0:
                total += wk * ball_sums3(data, self.grid, centers, R, self.m, 1.0, 2, self.backend)
        return total / (self.T * R ** 3)


def local_flux(omega: FieldSeries, u: FieldSeries, x_i, R: float, rho: float = DEFAULT_RHO,
               backend=None) -> float:
    return float(FluxEvaluator(omega, u, rho, backend).values(np.atleast_1d(x_i), R)[0])


def _cover_points(cover: Cover, grid):
    """Distinct grid-coordinate centres and the multiplicity map back to the cover."""
    pts = np.asarray(cover.centers)[:, :grid.dim]
    if grid.dim == cover.dim:
        return pts, np.arange(len(pts))
    uniq, inv = np.unique(np.round(pts, 12), axis=0, return_inverse=True)
    return uniq, inv.ravel()


@dataclass
class FluxPoint:
    R: float
    Phi: float
    Psi: float
    n: int


def ensemble_flux(omega, u, cover: Cover, rho: float = DEFAULT_RHO, backend=None) -> FluxPoint:
    ev = omega if isinstance(omega, FluxEvaluator) else FluxEvaluator(omega, u, rho, backend)
    pts, inv = _cover_points(cover, ev.grid)
    vals = ev.values(pts, cover.R)[inv]
    phi = math.fsum(vals.tolist()) / cover.n
    return FluxPoint(cover.R, phi, cover.R ** 3 * phi, cover.n)


@dataclass
class FluxCurve:
    scales: list
    Phi: list
    Psi: list
    n: list
    covers: list = field(default_factory=list)

    def to_dict(self):
        return _clean(asdict(self))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["R", "Phi", "Psi"])
        for row in zip(self.scales, self.Phi, self.Psi):
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def flux_curve(omega: FieldSeries, u: FieldSeries, scales, R0: float = 1.0,
               K1: int | None = None, K2: int | None = None, rho: float = DEFAULT_RHO,
               backend=None, keep_covers: bool = False) -> FluxCurve:
    """``<Phi>_R`` and ``<Psi>_R = R^3 <Phi>_R`` over uniform 3D covers."""
    K1 = DEFAULT_K[3][0] if K1 is None else K1
    K2 = DEFAULT_K[3][1] if K2 is None else K2
    ev = FluxEvaluator(omega, u, rho, backend)
    pts = []
    covers = []
    for R in scales:
        cov = uniform_cover(R0, float(R), 3, K1, K2)
        pts.append(ensemble_flux(ev, None, cov))
        if keep_covers:
            covers.append(cov.to_dict())
    return FluxCurve([p.R for p in pts], [p.Phi for p in pts], [p.Psi for p in pts],
                     [p.n for p in pts], covers)


# -- balance identity ------------------------------------------------------------

@dataclass
class BalanceReport:
    x_i: list
    R: float
    t_eval: float
    flux: float
    final_enstrophy: float
    palinstrophy: float
    cutoff_transport: float
    vortex_stretching: float
    rhs: float
    residual: float
    normalized_residual: float
    largest_term: float

    def to_dict(self):
        return _clean(asdict(self))


def balance_residual(omega: FieldSeries, u: FieldSeries, x_i, R: float, rho: float = DEFAULT_RHO,
                     scheme: str = "spectral", t_eval: float | None = None,
                     backend=None) -> BalanceReport:
    """All terms of the localized enstrophy balance up to ``t_eval`` (default ``T``).

    ``flux = final_enstrophy + palinstrophy - cutoff_transport - vortex_stretching``
    holds exactly for Navier-Stokes solutions with unit viscosity; the
    residual measures the discretization error.
    """
    _check_pair(omega, u)
    grid = omega.grid
    _require3(grid, "balance_residual")
    c = np.asarray(x_i, dtype=np.float64).reshape(1, grid.dim)
    check_support(grid, c, 2 * R)
    m = power_for(rho)
    eta = build_eta(omega.T, rho)
    if t_eval is None:
        t_eval = omega.T
    if omega.static:
        if t_eval != omega.T:
            raise ValueError("a static series is evaluated at T only")
        w_eta = eta.weights(omega, 1.0)
        w_deta = eta.derivative_weights(omega)
        snaps_w, snaps_u = list(omega), list(u)
    else:
        k = int(np.argmin(np.abs(omega.times - t_eval)))
        if not math.isclose(omega.times[k], t_eval, rel_tol=1e-12, abs_tol=1e-14):
            raise ValueError(f"t_eval = {t_eval} is not a snapshot time")
        if omega.times[k] <= 2 * omega.T / 3:
            raise ValueError("t_eval must lie in (2T/3, T]")
        times = omega.times[:k + 1]
        tw = trapezoid_weights(times)
        e, de = eta.evaluate(times)
        w_eta, w_deta = tw * e, tw * de
        snaps_w, snaps_u = list(omega)[:k + 1], list(u)[:k + 1]

    def s(vals, mode, power=1.0):
        return float(ball_sums3(vals, grid, c, R, m, power, mode, backend)[0])

    flux, palin, trans, stretch = [], [], [], []
    for we, wd, w, v in zip(w_eta, w_deta, snaps_w, snaps_u):
        ens = _enstrophy_density(w.values)
        if we != 0.0:
            flux.append(we * s(ens * np.asarray(v.values)[:grid.dim], 2))
            palin.append(we * s(_grad_sq(w, scheme), 0))
            trans.append(we * s(ens, 1))
            stretch.append(we * s(_stretching_density(w, v, scheme), 0))
        if wd != 0.0:
            trans.append(wd * s(ens, 0))
    final = s(_enstrophy_density(snaps_w[-1].values), 0)
    F, P, C, D = (math.fsum(x) for x in (flux, palin, trans, stretch))
    rhs = final + P - C - D
    resid = F - rhs
    largest = max(abs(F), abs(final), abs(P), abs(C), abs(D))
    norm = abs(resid) / largest if largest > 0 else 0.0
    return BalanceReport(c[0].tolist(), float(R), float(t_eval), F, final, P, C, D, rhs, resid,
                         norm, largest)


# -- verdicts -------------------------------------------------------------------

@dataclass
class CascadeVerdict:
    inertial_range: tuple
    empty_range: bool
    kstar: float
    P0: float
    beta: float
    rows: list
    verified: bool
    worst_margin: float | None
    witness: float | None
    message: str

    def to_dict(self):
        return _clean(asdict(self))


def kstar3(K1: int | None = None, K2: int | None = None) -> float:
    K1 = DEFAULT_K[3][0] if K1 is None else K1
    K2 = DEFAULT_K[3][1] if K2 is None else K2
    return 3.0 * 2.0 ** 4 * unit_ball_volume(3) * K1 * K2


def verify_cascade(flux: FluxCurve, diag: VorticityDiagnostics, kstar: float,
                   beta: float = DEFAULT_BETA, R0: float | None = None) -> CascadeVerdict:
    """Checks ``P0 / (4K*) <= <Phi>_R <= 4K* P0`` on the inertial range ``[sigma0/beta, R0]``."""
    if not diag.defined:
        raise ValueError("Kraichnan scale undefined (P0 = 0)")
    R0 = diag.R0 if R0 is None else R0
    lo_R = diag.sigma0 / beta
    empty = lo_R > R0
    lower, upper = diag.P0 / (4 * kstar), 4 * kstar * diag.P0
    rows = []
    for R, phi in zip(flux.scales, flux.Phi):
        inside = (not empty) and lo_R * (1 - 1e-12) <= R <= R0 * (1 + 1e-12)
        holds = lower <= phi <= upper
        margin = min(math.log(phi / lower), math.log(upper / phi)) if phi > 0 else -math.inf
        rows.append({"R": R, "Phi": phi, "lower": lower, "upper": upper,
                     "in_range": inside, "holds": holds, "margin": margin})
    active = [r for r in rows if r["in_range"]]
    failing = [r for r in active if not r["holds"]]
    verified = bool(active) and not failing
    worst = min((r["margin"] for r in active), default=None)
    witness = failing[0]["R"] if failing else None
    if empty:
        msg = f"empty inertial range: sigma0/beta = {lo_R:.6g} > R0 = {R0:.6g}"
    elif not active:
        msg = "no flux scales inside the inertial range"
    elif failing:
        msg = f"bound fails at R = {witness:.6g}"
    else:
        msg = f"cascade verified on [{lo_R:.6g}, {R0:.6g}]"
    return CascadeVerdict((lo_R, R0), empty, kstar, diag.P0, beta, rows, verified, worst, witness, msg)


@dataclass
class LocalityTable:
    kstar: float
    rows: list

    def to_dict(self):
        return _clean(asdict(self))


def locality_ratios(flux: FluxCurve, kstar: float, verdict: CascadeVerdict | None = None) -> LocalityTable:
    """``<Psi>_r / <Psi>_R`` against ``(r/R)^3`` times the ``16 K*^2`` band, all scale pairs."""
    ok = {}
    if verdict is not None:
        ok = {row["R"]: row["holds"] and row["in_range"] for row in verdict.rows}
    band = 16.0 * kstar * kstar
    rows = []
    for i, r in enumerate(flux.scales):
        for j, R in enumerate(flux.scales):
            q = (r / R) ** 3
            row = {"r": r, "R": R, "band_lower": q / band, "band_upper": q * band,
                   "dyadic_k": None, "zero_denominator": False}
            k = math.log2(r / R)
            if abs(k - round(k)) < 1e-9:
                row["dyadic_k"] = int(round(k))
            if flux.Psi[j] == 0.0 or flux.Phi[j] == 0.0:
                row.update(zero_denominator=True, ratio=None, identity_error=None, in_band=False)
            else:
                ratio = flux.Psi[i] / flux.Psi[j]
                pred = q * (flux.Phi[i] / flux.Phi[j])
                err = abs(ratio - pred) / abs(ratio) if ratio != 0 else abs(pred)
                row.update(ratio=ratio, identity_error=err,
                           in_band=q / band <= ratio <= q * band)
            row["both_verified"] = bool(ok.get(r)) and bool(ok.get(R))
            rows.append(row)
    return LocalityTable(kstar, rows)


# -- full pipeline -----------------------------------------------------------------

@dataclass
class CascadeConfig:
    R0: float = 1.0
    rho: float = DEFAULT_RHO
    K1: int = DEFAULT_K[3][0]
    K2: int = DEFAULT_K[3][1]
    beta: float = DEFAULT_BETA
    C1: float = DEFAULT_C1
    C2: float | None = None
    M: float | None = None
    gamma: float = 0.5
    scheme: str = "spectral"

    @property
    def kstar(self) -> float:
        return kstar3(self.K1, self.K2)

    def to_dict(self):
        d = asdict(self)
        d["kstar"] = self.kstar
        return _clean(d)


@dataclass
class CascadeReport:
    config: dict
    A1: CoherenceReport
    diagnostics: VorticityDiagnostics
    A2: A2Report | None
    A3: A3Report
    flux: FluxCurve
    verdict: CascadeVerdict | None
    locality: LocalityTable

    def to_dict(self):
        return {
            "config": self.config, "A1": self.A1.to_dict(), "diagnostics": self.diagnostics.to_dict(),
            "A2": None if self.A2 is None else self.A2.to_dict(), "A3": self.A3.to_dict(),
            "flux": self.flux.to_dict(),
            "verdict": None if self.verdict is None else self.verdict.to_dict(),
            "locality": self.locality.to_dict(),
        }


def run_cascade(omega: FieldSeries, u: FieldSeries, scales, config: CascadeConfig,
                backend=None) -> CascadeReport:
    """A1-A3 reports, flux curve, verdict and locality table in one pass."""
    M = config.M
    if M is None:
        G = gradient_tensor(u.final, config.scheme)
        M = float(np.median(np.sqrt(np.sum(G ** 2, axis=(0, 1)))))
    a1 = check_A1(omega, u, M, config.C1, config.R0, config.gamma, scheme=config.scheme,
                  backend=backend)
    diag = diagnostics_E0_P0_sigma0(omega, config.rho, config.R0, scheme=config.scheme, backend=backend)
    a2 = check_A2(diag, config.beta, config.R0) if diag.defined else None
    a3 = check_A3(omega, config.R0, config.C2, config.rho, backend=backend)
    curve = flux_curve(omega, u, scales, config.R0, config.K1, config.K2, config.rho, backend)
    verdict = verify_cascade(curve, diag, config.kstar, config.beta, config.R0) if diag.defined else None
    table = locality_ratios(curve, config.kstar, verdict)
    cfg = config.to_dict()
    cfg["M"] = M
    return CascadeReport(cfg, a1, diag, a2, a3, curve, verdict, table)
