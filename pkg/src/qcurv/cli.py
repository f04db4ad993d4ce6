"""Command line interface.

Exit codes: 0 success, 2 input error, 3 blow-up termination, 4 solver failure.

Config and scenario files are line-oriented ``key = value`` files with
sections [problem], [solver], [continuation], [detection] and [scenario].
Prescribed functions are given in [problem] by exactly one of

    f_constant = 24
    f_zonal    = c0 c1 c2 ...        (orthonormal zonal coefficients)
    f_terms    = 1 0 0 0 0 0 0 1     (one "c a0 ... an" term per line;
                 2 0 0 0 0 0 0 0      continuation lines are indented)
    f_file     = path/to/poly.txt

CSV columns
    spectrum:  k, lambda_k, mu_k  (exact rationals)
    steps.csv: param, max_v, min_v, residual, iterations
    pohozaev:  r, T1, T2, T3, boundary, residual
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import os
import platform
import sys
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .blowup import DetectionConfig, diagnose
from .errors import (
    NewtonFailed,
    NonpositiveIterate,
    ParseError,
    QcurvError,
    SingularJacobian,
)
from .index_theory import (
    FPLUS,
    condition_eight,
    degree_G_estimate,
    find_critical_points,
    index_f,
)
from .paneitz import SphereBubble, paneitz_eigenvalue_exact, q_round, spectral_paneitz
from .pohozaev import (
    PowerSum,
    RadialBubble,
    RadialFunction,
    RadialGrid,
    pohozaev_balance,
    radial_bilaplacian,
    radial_solve,
)
from .solver import (
    BLOWUP,
    COMPLETED,
    FAILED,
    ContinuationPath,
    ProblemSpec,
    SolverConfig,
    continue_mu,
    continue_tau,
    critical_exponent,
    newton_solve,
)
from .sphere import (
    AmbientPolynomial,
    ZonalFunction,
    analysis,
    collocation_grid,
    north_pole,
    sphere_volume,
    zonal_from_polynomial,
)

SCHEMA = "qcurv-report/1"
EXIT_OK, EXIT_INPUT, EXIT_BLOWUP, EXIT_SOLVER = 0, 2, 3, 4


# ---------------------------------------------------------------------------
# Config parsing
# ---------------------------------------------------------------------------

class Config:
    """configparser wrapper that reports line numbers for bad values."""

    def __init__(self, text: str = "", source: str = "<config>"):
        self.text = text
        self.source = source
        self.cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        try:
            self.cp.read_string(text, source=source)
        except configparser.ParsingError as exc:
            lineno = exc.errors[0][0] if exc.errors else None
            raise ParseError(f"malformed line {exc.errors[0][1]!s}" if exc.errors else str(exc), lineno) from exc
        except configparser.MissingSectionHeaderError as exc:
            raise ParseError("expected a [section] header", exc.lineno) from exc
        except configparser.Error as exc:
            raise ParseError(str(exc), getattr(exc, "lineno", None)) from exc

    @classmethod
    def load(cls, path) -> "Config":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ParseError(f"cannot read {path}: {exc.strerror}") from exc
        return cls(text, str(path))

    def line_of(self, section: str, key: str):
        cur = None
        for i, raw in enumerate(self.text.splitlines(), start=1):
            s = raw.strip()
            if s.startswith("[") and s.endswith("]"):
                cur = s[1:-1].strip()
            elif cur == section and s.split("=", 1)[0].strip().lower() == key.lower() and "=" in s:
                return i
        return None

    def has(self, section, key) -> bool:
        return self.cp.has_option(section, key)

    def raw(self, section, key, default=None):
        if not self.has(section, key):
            return default
        return self.cp.get(section, key)

    def get(self, section, key, conv, default=None):
        val = self.raw(section, key)
        if val is None:
            return default
        try:
            return conv(val.strip())
        except (ValueError, TypeError) as exc:
            raise ParseError(f"bad value for {section}.{key}: {val.strip()!r}", self.line_of(section, key)) from exc

    def set_default(self, section, key, value):
        if value is None:
            return
        if not self.cp.has_section(section):
            self.cp.add_section(section)
        self.cp.set(section, key, str(value))

    def resolved(self) -> dict:
        return {s: dict(self.cp.items(s)) for s in self.cp.sections()}


def _floats(text: str):
    return [float(v) for v in text.replace(",", " ").split()]


def parse_schedule(text: str):
    """``geomspace a b m``, ``linspace a b m`` or an explicit list of numbers."""
    parts = text.split()
    if parts and parts[0] in ("geomspace", "linspace"):
        if len(parts) != 4:
            raise ValueError("schedule generator needs start, stop and count")
        a, b, m = float(parts[1]), float(parts[2]), int(parts[3])
        fn = np.geomspace if parts[0] == "geomspace" else np.linspace
        return [float(x) for x in fn(a, b, m)]
    return _floats(text)


def load_f(cfg: Config, n: int, L_hint: int = 16) -> ZonalFunction:
    axis = cfg.get("problem", "axis", lambda s: np.array(_floats(s)), None)
    axis = north_pole(n) if axis is None else axis / np.linalg.norm(axis)
    keys = [k for k in ("f_constant", "f_zonal", "f_terms", "f_file") if cfg.has("problem", k)]
    if len(keys) != 1:
        raise ParseError("give exactly one of f_constant, f_zonal, f_terms, f_file in [problem]",
                         cfg.line_of("problem", keys[1]) if len(keys) > 1 else None)
    key = keys[0]
    if key == "f_constant":
        c = cfg.get("problem", key, float)
        return ZonalFunction(axis, n, [c * math.sqrt(sphere_volume(n))])
    if key == "f_zonal":
        return ZonalFunction(axis, n, cfg.get("problem", key, _floats))
    if key == "f_terms":
        base = cfg.line_of("problem", key)
        try:
            poly = AmbientPolynomial.from_text(cfg.raw("problem", key), n)
        except ParseError as exc:
            ln = None if exc.lineno is None or base is None else base + exc.lineno - 1
            raise ParseError(str(exc).split(": ", 1)[-1], ln) from exc
    else:
        path = cfg.get("problem", key, str)
        try:
            poly = AmbientPolynomial.from_text(Path(path).read_text(), n)
        except OSError as exc:
            raise ParseError(f"cannot read {path}", cfg.line_of("problem", key)) from exc
    return zonal_from_polynomial(poly, max(poly.degree, 1), axis)


def solver_config(cfg: Config) -> SolverConfig:
    s = "solver"
    return SolverConfig(
        L=cfg.get(s, "L", int, 64),
        newton_tol=cfg.get(s, "newton_tol", float, 1e-10),
        max_iter=cfg.get(s, "max_iter", int, 60),
        damping=cfg.get(s, "damping", float, 1.0),
        grid_size=cfg.get(s, "grid_size", int, None),
        blowup_ceiling=cfg.get(s, "blowup_ceiling", float, 1e6),
    )


def detection_config(cfg: Config) -> DetectionConfig:
    d = DetectionConfig()
    s = "detection"
    return DetectionConfig(
        C0=cfg.get(s, "C0", float, d.C0),
        eps=cfg.get(s, "eps", float, d.eps),
        R=cfg.get(s, "R", float, d.R),
        delta_star=cfg.get(s, "delta_star", float, d.delta_star),
        rho=cfg.get(s, "rho", float, d.rho),
    )


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


class Output:
    def __init__(self, out: str | None, command: str, args, cfg: Config | None):
        self.dir = Path(out) if out else None
        self.command = command
        self.args = args
        self.cfg = cfg

    def write(self, name: str, text: str):
        if self.dir is None:
            return
        self.dir.mkdir(parents=True, exist_ok=True)
        (self.dir / name).write_text(text)

    def result(self, payload: dict, name: str = "result.json"):
        payload = {"schema": SCHEMA, "command": self.command, **payload}
        text = dumps(payload)
        self.write(name, text)
        return text

    def manifest(self, exit_code: int):
        args = {k: v for k, v in vars(self.args).items() if k != "func"}
        man = {
            "schema": SCHEMA,
            "command": self.command,
            "version": __version__,
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "arguments": args,
            "config": self.cfg.resolved() if self.cfg else {},
            "exit_code": exit_code,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "threads": os.environ.get("OMP_NUM_THREADS", "default"),
        }
        self.write("manifest.json", dumps(man))


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    return buf.getvalue()


def _override(cfg: Config, args):
    """Command-line flags win over the file."""
    for sec, key, val in (("problem", "n", args.n), ("problem", "tau", getattr(args, "tau", None)),
                          ("solver", "L", args.L)):
        if val is not None:
            cfg.set_default(sec, key, val)
    if getattr(args, "f", None):
        for k in ("f_constant", "f_zonal", "f_terms"):
            cfg.cp.remove_option("problem", k) if cfg.cp.has_section("problem") else None
        cfg.set_default("problem", "f_file", args.f)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _fmt_fraction(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def cmd_spectrum(args, out: Output) -> int:
    n = args.n if args.n is not None else 6
    L = args.L if args.L is not None else 8
    rows = []
    for k in range(L + 1):
        rows.append((k, k * (k + n - 1), _fmt_fraction(paneitz_eigenvalue_exact(n, k))))
    text = _csv(rows, ["k", "lambda_k", "mu_k"])
    out.write("spectrum.csv", text)
    out.result({"n": n, "L": L, "rows": [list(r) for r in rows]})
    sys.stdout.write(text)
    return EXIT_OK


def _problem(cfg: Config):
    n = cfg.get("problem", "n", int)
    if n is None:
        raise ParseError("[problem] needs n")
    spectrum = spectral_paneitz(n, 0)  # validates n
    del spectrum
    f = load_f(cfg, n)
    tau = cfg.get("problem", "tau", float, 0.0)
    return n, f, tau


def cmd_solve(args, out: Output) -> int:
    cfg = out.cfg
    n, f, tau = _problem(cfg)
    scfg = solver_config(cfg)
    spec = ProblemSpec(n, f, tau)
    try:
        sol = newton_solve(spec, scfg)
    except (NewtonFailed, NonpositiveIterate, SingularJacobian) as exc:
        out.result({"status": FAILED, "error": f"{type(exc).__name__}: {exc}"})
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    out.result({"solution": sol.to_dict()})
    print(f"converged: max v = {sol.max_val:.10g}, min v = {sol.min_val:.10g}, "
          f"residual = {sol.residual_norm:.3e}, iterations = {sol.iterations}")
    return EXIT_OK


def cmd_continue(args, out: Output) -> int:
    cfg = out.cfg
    n, f, tau = _problem(cfg)
    scfg = solver_config(cfg)
    param = cfg.get("continuation", "parameter", str, "tau")
    schedule = cfg.get("continuation", "schedule", parse_schedule, None)
    if not schedule:
        raise ParseError("[continuation] needs a schedule", cfg.line_of("continuation", "schedule"))
    if param == "tau":
        path = continue_tau(ProblemSpec(n, f, schedule[0]), scfg, schedule)
    elif param == "mu":
        path = continue_mu(f, scfg, schedule, tau)
    else:
        raise ParseError(f"unknown continuation parameter {param!r}", cfg.line_of("continuation", "parameter"))
    out.result({"path": path.to_dict()}, "path.json")
    out.write("steps.csv", _csv(path.table_rows(), ["param", "max_v", "min_v", "residual", "iterations"]))
    code = {COMPLETED: EXIT_OK, BLOWUP: EXIT_BLOWUP, FAILED: EXIT_SOLVER}[path.termination]
    payload = {"termination": path.termination, "message": path.message, "failed_param": path.failed_param,
               "steps": len(path.solutions)}
    if path.termination == BLOWUP and param == "tau":
        payload["report"] = diagnose(path, detection_config(cfg)).to_dict()
    out.result(payload)
    print(f"{path.parameter} path: {path.termination} after {len(path.solutions)} steps {path.message}".rstrip())
    return code


def cmd_diagnose(args, out: Output) -> int:
    try:
        data = json.loads(Path(args.path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read path artifact {args.path}: {exc}") from exc
    try:
        path = ContinuationPath.from_dict(data.get("path", data))
    except (KeyError, TypeError) as exc:
        raise ParseError(f"path artifact lacks field {exc}") from exc
    report = diagnose(path, detection_config(out.cfg))
    out.result({"report": report.to_dict()})
    print(f"{len(report.points)} blow-up point(s), {len(report.rejected)} rejected candidate(s)")
    return EXIT_OK


def cmd_index(args, out: Output) -> int:
    cfg = out.cfg
    if args.f:
        try:
            text = Path(args.f).read_text()
        except OSError as exc:
            raise ParseError(f"cannot read {args.f}") from exc
        poly = AmbientPolynomial.from_text(text, args.n)
    else:
        if not cfg.has("problem", "f_terms"):
            raise ParseError("index needs --f or [problem] f_terms")
        n = cfg.get("problem", "n", int, args.n)
        poly = AmbientPolynomial.from_text(cfg.raw("problem", "f_terms"), n)
    n = poly.n
    cs = find_critical_points(poly, n, starts=args.starts, seed=args.seed)
    s8, ok8 = condition_eight(cs)
    payload = {
        "n": n,
        "critical_points": [c.to_dict() for c in cs.points],
        "morse_sum": cs.morse_sum,
        "euler_characteristic": cs.euler,
        "search_complete": cs.complete,
        "condition_eight": {"sum": s8, "satisfied": ok8},
        "F_plus": len([c for c in cs.points if c.classification == FPLUS]),
    }
    payload["index"] = index_f(cs).to_dict() if n == 6 else None
    if args.degree_t0:
        d = degree_G_estimate(poly, args.degree_t0, seed=args.seed)
        payload["degree_G"] = {"degree": d.degree, "zeros": d.zeros, "reliable": d.reliable, "radius": d.radius}
    out.result(payload)
    idx = payload["index"]["total"] if payload["index"] else "n/a"
    print(f"Index(f) = {idx}; F+ sign condition sum = {s8} ({'satisfied' if ok8 else 'not satisfied'})")
    return EXIT_OK


def _scenario_field(cfg: Config, n: int):
    kind = cfg.get("scenario", "u", str, "power")
    if kind == "power":
        vals = cfg.get("scenario", "terms", _floats, [1.0, 4.0 - n])
        if len(vals) % 2:
            raise ParseError("terms are (coefficient, power) pairs", cfg.line_of("scenario", "terms"))
        return PowerSum(list(zip(vals[::2], vals[1::2])))
    if kind == "bubble":
        return RadialBubble(n, cfg.get("scenario", "k", float, 0.25), cfg.get("scenario", "height", float, 1.0))
    raise ParseError(f"unknown field kind {kind!r}", cfg.line_of("scenario", "u"))


def cmd_pohozaev(args, out: Output) -> int:
    cfg = out.cfg
    n = cfg.get("scenario", "n", int, args.n)
    if n is None:
        raise ParseError("[scenario] needs n")
    spectral_paneitz(n, 0)
    u = _scenario_field(cfg, n)
    f = cfg.get("scenario", "f", float, 0.0)
    q = cfg.get("scenario", "q", lambda s: critical_exponent(n) if s == "critical" else float(s), critical_exponent(n))
    radii = cfg.get("scenario", "radii", _floats, [1e-3, 1e-2, 1e-1, 1.0])
    rows, records = [], []
    for r in radii:
        b = pohozaev_balance(u, f, q, r, n)
        rows.append((r, b.T1, b.T2, b.T3, b.boundary, b.residual))
        records.append({"r": r, "T1": b.T1, "T2": b.T2, "T3": b.T3, "boundary": b.boundary,
                        "residual": b.residual, "relative_residual": b.relative_residual})
    out.write("pohozaev.csv", _csv(rows, ["r", "T1", "T2", "T3", "boundary", "residual"]))
    out.result({"n": n, "q": q, "laplacian_sign": "geometer", "balances": records})
    for rec in records:
        print(f"r = {rec['r']:.6g}: boundary = {rec['boundary']:.10g}, residual = {rec['residual']:.3e}")
    return EXIT_OK


def cmd_bubble_check(args, out: Output) -> int:
    cfg = out.cfg
    n = cfg.get("scenario", "n", int, args.n if args.n is not None else 6)
    spectral_paneitz(n, 0)
    k = cfg.get("scenario", "k", float, 0.25)
    R = cfg.get("scenario", "radius", float, 2.0)
    Ns = [int(v) for v in cfg.get("scenario", "grid_sizes", _floats, [51, 101, 201, 401])]
    L = cfg.get("scenario", "L", int, 64)
    lams = cfg.get("scenario", "lambdas", _floats, [0.5, 2.0, 4.0])
    q = critical_exponent(n)
    fconst = 2 * n * (n + 2) * (n - 2) * k * k
    errs = []
    bub = RadialBubble(n, k)
    for N in Ns:
        u = RadialFunction.sample(RadialGrid(n, 0.0, R, N), bub)
        res = radial_bilaplacian(u).values - (n - 4) / 2 * fconst * u.values ** q
        errs.append(float(np.max(np.abs(res))))
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    grid = collocation_grid(n, 4 * L + 1)
    mu = spectral_paneitz(n, L).eigen
    spectral = []
    for lam in lams:
        b = SphereBubble(north_pole(n), lam, n)
        vals = b.profile(grid.nodes)
        z = analysis(vals, grid, L)
        rhs = analysis((n - 4) / 2 * q_round(n) * vals ** q, grid, L)
        spectral.append({"lambda": lam, "relative_residual":
                         float(np.linalg.norm(mu * z.coeffs - rhs.coeffs) / np.linalg.norm(rhs.coeffs))})
    out.result({"n": n, "k": k, "f": fconst, "radial": {"N": Ns, "max_residual": errs, "orders": orders},
                "spectral": spectral, "L": L})
    print("radial orders: " + ", ".join(f"{o:.3f}" for o in orders))
    for s in spectral:
        print(f"lambda = {s['lambda']:g}: spectral residual {s['relative_residual']:.3e}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qcurv", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        sp.add_argument("--n", type=int)
        sp.add_argument("--L", type=int)
        sp.add_argument("--out", help="output directory for JSON/CSV artifacts")
        sp.add_argument("--seed", type=int, default=0)
        if config:
            sp.add_argument("--config", help="key = value config file")

    sp = sub.add_parser("spectrum", help="Paneitz eigenvalues as CSV (k, lambda_k, mu_k)")
    common(sp, config=False)
    sp.set_defaults(func=cmd_spectrum)

    for name, fn, help_ in (("solve", cmd_solve, "single Newton solve"),
                            ("continue", cmd_continue, "continuation in tau or mu; writes steps.csv")):
        sp = sub.add_parser(name, help=help_)
        common(sp)
        sp.add_argument("--tau", type=float)
        sp.add_argument("--f", help="AmbientPolynomial file (zonal about the axis)")
        if name == "continue":
            sp.add_argument("--mu-schedule", help="schedule for the mu homotopy, e.g. 'linspace 0 1 11'")
        sp.set_defaults(func=fn)

    sp = sub.add_parser("diagnose", help="blow-up report for a path.json artifact")
    common(sp)
    sp.add_argument("path")
    sp.set_defaults(func=cmd_diagnose)

    sp = sub.add_parser("index", help="critical points, Index(f) and the F+ sign condition")
    common(sp)
    sp.add_argument("--f", help="AmbientPolynomial file")
    sp.add_argument("--starts", type=int, default=64)
    sp.add_argument("--degree-t0", type=float, default=None, help="also estimate the degree of G")
    sp.set_defaults(func=cmd_index)

    sp = sub.add_parser("pohozaev", help="Pohozaev balance for a radial scenario")
    common(sp)
    sp.set_defaults(func=cmd_pohozaev)

    sp = sub.add_parser("bubble-check", help="radial and spectral bubble residuals")
    common(sp)
    sp.set_defaults(func=cmd_bubble_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out = Output(args.out, args.command, args, None)
    code = EXIT_INPUT
    try:
        if args.command != "spectrum":
            cfg = Config.load(args.config) if getattr(args, "config", None) else Config()
            if args.command in ("solve", "continue"):
                _override(cfg, args)
                if getattr(args, "mu_schedule", None):
                    cfg.set_default("continuation", "parameter", "mu")
                    cfg.set_default("continuation", "schedule", args.mu_schedule)
            out.cfg = cfg
        code = args.func(args, out)
    except ParseError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        code = EXIT_INPUT
    except (QcurvError, ValueError) as exc:
        print(f"input error: {type(exc).__name__}: {exc}", file=sys.stderr)
        code = EXIT_INPUT
    out.manifest(code)
    return code


if __name__ == "__main__":
    sys.exit(main())
