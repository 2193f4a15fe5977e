"""Command-line entry point: ``cascade-scope <command> [flags]``.

Exit codes: 0 success, 2 invalid input or configuration, 3 I/O failure.
Every report embeds the resolved run configuration; JSON is written with
sorted keys and CSV with ``repr`` floats, so equal inputs give equal bytes.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .averaging import SupportError
from .cascade import (
    CascadeConfig, _clean, balance_residual, check_A1, check_A2, check_A3,
    diagnostics_E0_P0_sigma0, run_cascade,
)
from .covers import DEFAULT_K, CoverError, uniform_cover, validate_cover
from .cutoffs import CutoffError, build_eta, build_psi, verify_cutoff_bounds
from .ensemble import (
    REFERENCE_GLOBAL_AVERAGE, EnsembleConfig, demo1d_series, detect_scales,
    integral_average, scale_sweep,
)
from .fields import (
    FieldFileError, FieldSeries, GeneratorError, GridError, demo1d_function, gradient_tensor,
    make_grid, read_field, sample_analytic, velocity_from_vorticity, write_field,
)
from .svg import line_chart

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 2, 3
FORMATS = ("csv", "json", "svg")


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def parse_scales(text: str) -> list[float]:
    """``lo:hi:Nlog``, ``lo:hi:Nlin`` or a comma list."""
    m = re.fullmatch(r"\s*([^:]+):([^:]+):(\d+)(log|lin)\s*", text)
    if m:
        lo, hi, n, kind = float(m[1]), float(m[2]), int(m[3]), m[4]
        if n < 1 or lo <= 0 or hi < lo:
            raise UsageError(f"bad scale range {text!r}")
        if n == 1:
            return [hi]
        if kind == "log":
            return [float(v) for v in np.logspace(math.log10(lo), math.log10(hi), n)]
        return [float(v) for v in np.linspace(lo, hi, n)]
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad scale list {text!r}") from None
    if not vals or any(v <= 0 for v in vals):
        raise UsageError(f"bad scale list {text!r}")
    return vals


@dataclass
class RunConfig:
    command: str
    R0: float | None = None
    T: float | None = None
    K1: int | None = None
    K2: int | None = None
    rho1: float = 0.75
    rho2: float = 0.75
    delta: float = 1.0
    beta: float = 0.1
    C1: float = 1.0
    C2: float | None = None
    M: float | None = None
    scales: list | None = None
    seed: int = 0
    budget: int = 200
    inputs: list = field(default_factory=list)
    velocity: list = field(default_factory=list)
    out: str = "."
    formats: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _clean(asdict(self))


def _common(p, scales=True):
    p.add_argument("--config", help="JSON file with flag defaults")
    p.add_argument("--R0", type=float)
    p.add_argument("--T", type=float)
    p.add_argument("--K1", type=int)
    p.add_argument("--K2", type=int)
    p.add_argument("--rho1", type=float)
    p.add_argument("--rho2", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--C1", type=float)
    p.add_argument("--C2", type=float)
    p.add_argument("--M", type=float)
    if scales:
        p.add_argument("--scales", type=str)
    p.add_argument("--seed", type=int)
    p.add_argument("--budget", type=int)
    p.add_argument("--in", dest="inputs", nargs="+", default=None, help="field files (vorticity for flow commands)")
    p.add_argument("--velocity", nargs="+", default=None, help="velocity field files")
    p.add_argument("--out", default=None)
    p.add_argument("--format", dest="formats", action="append", choices=FORMATS)


def _gen_flags(p):
    p.add_argument("--gen", help="generator id used instead of --in")
    p.add_argument("--params", default="{}", help="generator parameters as JSON")
    p.add_argument("--resolution", type=int, default=32)
    p.add_argument("--nsteps", type=int, default=4)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="cascade-scope", description="Ensemble-average and enstrophy-cascade diagnostics.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("demo1d", help="1D sample computation: density, sweep, global averages")
    _common(p)
    p.add_argument("--spacing", type=float, default=1e-3)

    p = sub.add_parser("sweep", help="scale sweep of a scalar density")
    _common(p)
    _gen_flags(p)
    p.add_argument("--threshold", type=float, default=1.0)

    for name, hlp in (("diagnose", "E0, P0, sigma0 and assumption checks"),
                      ("cascade", "flux curve, verdict and locality table"),
                      ("balance", "localized enstrophy balance terms")):
        p = sub.add_parser(name, help=hlp)
        _common(p, scales=name == "cascade")
        _gen_flags(p)
        p.add_argument("--scheme", choices=("spectral", "central2"), default="spectral")
        if name == "balance":
            p.add_argument("--x", type=float, nargs="+", help="ball centre (default origin)")
            p.add_argument("--R", type=float, required=True)

    p = sub.add_parser("cover", help="build and validate a cover")
    _common(p, scales=False)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--R", type=float, required=True)

    p = sub.add_parser("cutoff-verify", help="measure the cutoff ratio constants")
    _common(p, scales=False)
    p.add_argument("--R", type=float, default=1.0)
    p.add_argument("--dim", type=int, default=3)
    p.add_argument("--samples", type=int, default=200_000)

    p = sub.add_parser("generate", help="write generator snapshots as field files")
    _common(p, scales=False)
    _gen_flags(p)
    p.add_argument("--dim", type=int, default=3)
    p.add_argument("--extent", type=float, default=2 * math.pi)
    p.add_argument("--field", choices=("velocity", "vorticity", "both"), default="both")
    return ap


_DEFAULTS = {
    "demo1d": {"R0": 10.0, "K1": 3, "K2": 3, "scales": "1e-2:1e1:16log"},
    "sweep": {"R0": 10.0, "K1": 3, "K2": 3, "scales": "1e-2:1e1:10log"},
    "diagnose": {"R0": 1.0, "T": 1.0},
    "cascade": {"R0": 1.0, "T": 1.0},
    "balance": {"R0": 1.0, "T": 1.0},
    "cover": {"R0": 10.0},
    "cutoff-verify": {"T": 1.0},
    "generate": {"T": 1.0},
}

_RC_KEYS = ("R0", "T", "K1", "K2", "rho1", "rho2", "delta", "beta", "C1", "C2", "M", "seed",
            "budget", "inputs", "velocity", "out", "formats")


def resolve(args) -> RunConfig:
    """Merge defaults, the optional JSON config and explicit flags; validate."""
    merged = dict(_DEFAULTS.get(args.command, {}))
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            file_cfg = json.load(fh)
        if not isinstance(file_cfg, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(file_cfg) - set(_RC_KEYS) - {"scales"}
        if unknown:
            raise UsageError(f"unknown config keys {sorted(unknown)}")
        merged.update(file_cfg)
    for key in _RC_KEYS + ("scales",):
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    scales = merged.pop("scales", None)
    rc = RunConfig(command=args.command)
    for key, val in merged.items():
        setattr(rc, key, val)
    if isinstance(scales, str):
        scales = parse_scales(scales)
    rc.scales = None if scales is None else [float(s) for s in scales]
    rc.inputs = list(rc.inputs or [])
    rc.velocity = list(rc.velocity or [])
    rc.formats = list(rc.formats or FORMATS)
    rc.out = rc.out or "."
    extra = {k: v for k, v in vars(args).items()
             if k not in _RC_KEYS + ("scales", "command", "config")}
    rc.extra = extra
    for name in ("R0", "T"):
        v = getattr(rc, name)
        if v is not None and not v > 0:
            raise UsageError(f"--{name} must be positive")
    for name in ("rho1", "rho2"):
        if not 0.5 < getattr(rc, name) < 1.0:
            raise UsageError(f"--{name} must lie in (1/2, 1)")
    if not 0 < rc.delta <= 1:
        raise UsageError("--delta must lie in (0, 1]")
    if rc.budget < 0:
        raise UsageError("--budget must be >= 0")
    if rc.scales is not None and rc.R0 is not None:
        bad = [s for s in rc.scales if s > rc.R0 * (1 + 1e-12)]
        if bad:
            raise UsageError(f"scales {bad} exceed R0 = {rc.R0}")
    return rc


# -- output ---------------------------------------------------------------------------

def _dump_json(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


def _write(rc: RunConfig, name: str, text: str) -> str:
    os.makedirs(rc.out, exist_ok=True)
    path = os.path.join(rc.out, name)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def _emit(rc, stem, report: dict, csv_text=None, svg_text=None) -> list[str]:
    written = []
    report = dict(report)
    report["run_config"] = rc.to_dict()
    if "json" in rc.formats:
        written.append(_write(rc, stem + ".json", _dump_json(report)))
    if csv_text is not None and "csv" in rc.formats:
        written.append(_write(rc, stem + ".csv", csv_text))
    if svg_text is not None and "svg" in rc.formats:
        written.append(_write(rc, stem + ".svg", svg_text))
    return written


def _sweep_svg(sweep, title):
    return line_chart([("max bias", sweep.scales, sweep.values_max),
                       ("uniform", sweep.scales, sweep.values_uniform),
                       ("min bias", sweep.scales, sweep.values_min),
                       ("F0", sweep.scales, [sweep.F0] * len(sweep.scales))],
                      title=title, xlabel="R", ylabel="<F>_R", logx=True)


# -- input -------------------------------------------------------------------------------

def _load_series(paths, T):
    fields = sorted((read_field(p) for p in paths), key=lambda f: f.time)
    if len(fields) == 1:
        if T is None:
            raise UsageError("a single snapshot needs --T (treated as time-independent)")
        return FieldSeries.constant(fields[0], T)
    try:
        return FieldSeries.from_fields(fields)
    except GridError as exc:
        raise UsageError(f"snapshots do not form a valid series: {exc}") from exc


def _gen_params(rc):
    try:
        params = json.loads(rc.extra.get("params") or "{}")
    except json.JSONDecodeError as exc:
        raise UsageError(f"--params is not valid JSON: {exc}") from exc
    if not isinstance(params, dict):
        raise UsageError("--params must be a JSON object")
    return params


def _flow_grid(gen, n, extent=2 * math.pi, dim=None):
    if dim is None:
        dim = 3 if gen == "abc_flow" else 2
    return make_grid((0.0,) * dim, (extent,) * dim, (n,) * dim, True)


def _flow_series(rc):
    """Vorticity and velocity series from files or a generator."""
    gen = rc.extra.get("gen")
    if gen:
        params = _gen_params(rc)
        params.pop("field", None)
        if gen == "random_multiscale":
            params.setdefault("seed", rc.seed)
        grid = _flow_grid(gen, rc.extra["resolution"], dim=params.pop("dim", None))
        nsteps = rc.extra["nsteps"]
        times = [rc.T * k / nsteps for k in range(nsteps + 1)]
        w = [sample_analytic(gen, dict(params, field="vorticity"), grid, t) for t in times]
        u = [sample_analytic(gen, dict(params, field="velocity"), grid, t) for t in times]
        return FieldSeries(tuple(w), rc.T), FieldSeries(tuple(u), rc.T)
    if not rc.inputs:
        raise UsageError("give vorticity files with --in or a generator with --gen")
    omega = _load_series(rc.inputs, rc.T)
    if rc.velocity:
        u = _load_series(rc.velocity, rc.T)
    else:
        if not omega.grid.fully_periodic:
            raise UsageError("velocity files are required on non-periodic grids")
        u = omega.map(velocity_from_vorticity)
    return omega, u


# -- commands ------------------------------------------------------------------------------

def cmd_demo1d(rc: RunConfig) -> dict:
    cfg = EnsembleConfig(R0=rc.R0, delta=rc.delta, rho1=rc.rho1, rho2=rc.rho2, K1=rc.K1, K2=rc.K2, dim=1)
    series = demo1d_series(rc.R0, spacing=rc.extra.get("spacing", 1e-3), T=rc.T)
    rc.T = series.T
    F = integral_average(series, cfg)
    matched = F.match(REFERENCE_GLOBAL_AVERAGE, 2e-4)
    sweep = scale_sweep(series, rc.scales, cfg, budget=rc.budget)
    det = detect_scales(sweep, 1.0)
    xs = np.linspace(-rc.R0, rc.R0, 4001)
    fx = demo1d_function(xs)
    dens_csv = "x,f\n" + "".join(f"{x!r},{y!r}\n" for x, y in zip(xs.tolist(), fx.tolist()))
    dens_svg = line_chart([("f(x)", xs.tolist(), fx.tolist())], title="demo density",
                          xlabel="x", ylabel="f")
    files = _emit(rc, "demo1d_density", {"samples": len(xs)}, dens_csv, dens_svg)
    report = {
        "global_averages": F.conventions(), "F0_abs": F.F0_abs,
        "reference_value": REFERENCE_GLOBAL_AVERAGE, "tolerance": 2e-4, "matched_convention": matched,
        "sweep": sweep.to_dict(), "ordering_ok": sweep.ordering_ok(), "detector": det.to_dict(),
    }
    files += _emit(rc, "demo1d_sweep", report, sweep.to_csv(), _sweep_svg(sweep, "demo sweep"))
    return {"files": files, "matched_convention": matched, "averages": F.conventions(),
            "ordering_ok": sweep.ordering_ok()}


def cmd_sweep(rc: RunConfig) -> dict:
    gen = rc.extra.get("gen")
    if gen:
        if gen == "demo1d":
            series = demo1d_series(rc.R0, absolute=bool(_gen_params(rc).get("absolute", False)), T=rc.T)
        else:
            raise UsageError("sweep generators: demo1d (use --in for other densities)")
    elif rc.inputs:
        series = _load_series(rc.inputs, rc.T if rc.T is not None else rc.R0 ** 2)
    else:
        raise UsageError("give a density with --in or --gen demo1d")
    dim = series.grid.dim
    K1 = rc.K1 if rc.K1 is not None else DEFAULT_K[dim][0]
    K2 = rc.K2 if rc.K2 is not None else DEFAULT_K[dim][1]
    rc.K1, rc.K2, rc.T = K1, K2, series.T
    cfg = EnsembleConfig(R0=rc.R0, delta=rc.delta, rho1=rc.rho1, rho2=rc.rho2, K1=K1, K2=K2, dim=dim)
    sweep = scale_sweep(series, rc.scales, cfg, budget=rc.budget)
    det = detect_scales(sweep, rc.extra.get("threshold", 1.0))
    report = {"sweep": sweep.to_dict(), "ordering_ok": sweep.ordering_ok(), "detector": det.to_dict()}
    files = _emit(rc, "sweep", report, sweep.to_csv(), _sweep_svg(sweep, "scale sweep"))
    return {"files": files, "flagged": det.flagged}


def _cascade_config(rc) -> CascadeConfig:
    return CascadeConfig(R0=rc.R0, rho=rc.rho1, K1=rc.K1 or DEFAULT_K[3][0], K2=rc.K2 or DEFAULT_K[3][1],
                         beta=rc.beta, C1=rc.C1, C2=rc.C2, M=rc.M,
                         scheme=rc.extra.get("scheme", "spectral"))


def cmd_diagnose(rc: RunConfig) -> dict:
    omega, u = _flow_series(rc)
    cc = _cascade_config(rc)
    diag = diagnostics_E0_P0_sigma0(omega, cc.rho, cc.R0, scheme=cc.scheme)
    report = {"diagnostics": diag.to_dict()}
    if diag.defined:
        report["A2"] = check_A2(diag, cc.beta, cc.R0).to_dict()
    else:
        report["A2"] = {"holds": None, "note": "sigma0 undefined (P0 = 0)"}
    report["A3"] = check_A3(omega, cc.R0, cc.C2, cc.rho).to_dict()
    M = cc.M
    if M is None:
        G = gradient_tensor(u.final, cc.scheme)
        M = float(np.median(np.sqrt(np.sum(G ** 2, axis=(0, 1)))))
    report["A1"] = check_A1(omega, u, M, cc.C1, cc.R0, scheme=cc.scheme).to_dict()
    files = _emit(rc, "diagnose", report)
    return {"files": files, "sigma0": diag.sigma0}


def cmd_cascade(rc: RunConfig) -> dict:
    omega, u = _flow_series(rc)
    cc = _cascade_config(rc)
    scales = rc.scales or [cc.R0 * 2.0 ** -k for k in range(3, -1, -1)]
    rc.scales = scales
    rep = run_cascade(omega, u, scales, cc)
    svg = line_chart([("<Phi>_R", rep.flux.scales, rep.flux.Phi)], title="averaged flux",
                     xlabel="R", ylabel="<Phi>_R", logx=True)
    files = _emit(rc, "cascade", rep.to_dict(), rep.flux.to_csv(), svg)
    return {"files": files, "verdict": None if rep.verdict is None else rep.verdict.message}


def cmd_balance(rc: RunConfig) -> dict:
    omega, u = _flow_series(rc)
    dim = omega.grid.dim
    x = rc.extra.get("x") or [0.0] * dim
    if len(x) != dim:
        raise UsageError(f"--x needs {dim} coordinates")
    rep = balance_residual(omega, u, x, rc.extra["R"], rc.rho1, rc.extra.get("scheme", "spectral"))
    d = rep.to_dict()
    terms = ("flux", "final_enstrophy", "palinstrophy", "cutoff_transport", "vortex_stretching",
             "rhs", "residual", "normalized_residual")
    csv_text = "term,value\n" + "".join(f"{t},{float(d[t])!r}\n" for t in terms)
    files = _emit(rc, "balance", {"balance": d}, csv_text)
    return {"files": files, "normalized_residual": rep.normalized_residual}


def cmd_cover(rc: RunConfig) -> dict:
    dim = rc.extra["dim"]
    if dim not in DEFAULT_K:
        raise UsageError("--dim must be 1, 2 or 3")
    cov = uniform_cover(rc.R0, rc.extra["R"], dim, rc.K1, rc.K2)
    rep = validate_cover(cov)
    files = _emit(rc, "cover", {"cover": cov.to_dict(), "validity": rep.to_dict()})
    return {"files": files, "n": cov.n, "valid": rep.valid}


def cmd_cutoff_verify(rc: RunConfig) -> dict:
    T = rc.T
    eta = build_eta(T, rc.rho1)
    psi = build_psi(np.zeros(rc.extra["dim"]), rc.extra["R"], rc.rho2)
    n = rc.extra["samples"]
    report = {"eta": verify_cutoff_bounds(eta, n).to_dict(), "psi": verify_cutoff_bounds(psi, n).to_dict()}
    files = _emit(rc, "cutoff_verify", report)
    return {"files": files, "bounded": report["eta"]["bounded"] and report["psi"]["bounded"]}


def cmd_generate(rc: RunConfig) -> dict:
    gen = rc.extra.get("gen")
    if not gen:
        raise UsageError("generate needs --gen")
    params = _gen_params(rc)
    kinds = ("velocity", "vorticity") if rc.extra["field"] == "both" else (rc.extra["field"],)
    if gen == "demo1d":
        L = 3.0 * (rc.R0 or 10.0)
        grid = make_grid(-L, 2 * L, rc.extra["resolution"])
        kinds = (None,)
    else:
        grid = _flow_grid(gen, rc.extra["resolution"], rc.extra["extent"], rc.extra["dim"])
    nsteps = rc.extra["nsteps"]
    os.makedirs(rc.out, exist_ok=True)
    files = []
    for kind in kinds:
        p = dict(params) if kind is None else dict(params, field=kind)
        for k in range(nsteps + 1):
            t = rc.T * k / nsteps if nsteps else 0.0
            fld = sample_analytic(gen, p, grid, t)
            path = os.path.join(rc.out, f"{gen}_{kind or 'density'}_{k:04d}.cscope")
            write_field(fld, path)
            files.append(path)
    files += _emit(rc, "generate", {"generator": gen, "params": params, "files": files})
    return {"files": files}


COMMANDS = {
    "demo1d": cmd_demo1d, "sweep": cmd_sweep, "diagnose": cmd_diagnose, "cascade": cmd_cascade,
    "balance": cmd_balance, "cover": cmd_cover, "cutoff-verify": cmd_cutoff_verify,
    "generate": cmd_generate,
}

_INVALID = (UsageError, CoverError, CutoffError, GeneratorError, GridError, SupportError, ValueError)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        rc = resolve(args)
        result = COMMANDS[args.command](rc)
    except FieldFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except _INVALID as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(json.dumps(_clean(result), sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
