"""Newton-Galerkin solver for P v = (n-4)/2 f v^q with zonal f.

The unknown is the coefficient vector of v in the orthonormal zonal basis.
The nonlinearity is evaluated pointwise on a Gauss grid in t and projected
back by quadrature.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InvalidParameter,
    NewtonFailed,
    NonpositiveCurvature,
    NonpositiveIterate,
    SingularJacobian,
)
from .paneitz import coeffs as paneitz_coeffs
from .paneitz import paneitz_eigenvalue, q_round
from .sphere import (
    ZonalFunction,
    _dilate,
    _grid_basis,
    collocation_grid,
    conformal_factor,
    sphere_volume,
    zonal_from_callable,
)

log = logging.getLogger(__name__)

CONVERGED = "Converged"
COMPLETED = "Completed"
BLOWUP = "BlowupDetected"
FAILED = "NewtonFailed"


def critical_exponent(n: int) -> float:
    return (n + 4) / (n - 4)


@dataclass(frozen=True)
class ProblemSpec:
    """Prescribed-curvature problem on S^n at subcritical gap tau."""

    n: int
    f: ZonalFunction
    tau: float = 0.0

    def __post_init__(self):
        if self.n < 5:
            raise InvalidParameter("n must be at least 5")
        if self.f.n != self.n:
            raise InvalidParameter("f lives on a sphere of another dimension")
        if not 0.0 <= self.tau < 8.0 / (self.n - 4):
            raise InvalidParameter(f"tau = {self.tau} outside [0, {8 / (self.n - 4)})")
        t = np.cos(np.linspace(0.0, np.pi, 2001))
        if np.min(self.f(t)) <= 0:
            raise NonpositiveCurvature("f must be positive on the sphere")

    @property
    def q(self) -> float:
        return critical_exponent(self.n) - self.tau

    def with_tau(self, tau: float) -> "ProblemSpec":
        return ProblemSpec(self.n, self.f, tau)


@dataclass(frozen=True)
class SolverConfig:
    L: int = 64
    newton_tol: float = 1e-10
    max_iter: int = 60
    damping: float = 1.0
    grid_size: int | None = None
    blowup_ceiling: float = 1e6
    rcond: float = 1e-13
    check_points: int = 4001

    def __post_init__(self):
        if self.L < 1:
            raise InvalidParameter("L must be positive")
        if not 0 < self.damping <= 1:
            raise InvalidParameter("damping must lie in (0, 1]")
        if self.grid_size is not None and self.grid_size < self.L + 1:
            raise InvalidParameter("grid_size must be at least L+1")

    @property
    def size(self) -> int:
        return self.grid_size or 4 * self.L + 1


@dataclass
class Solution:
    """A converged positive solve.

    residual_norm is the coefficient 2-norm of P v - (n-4)/2 f v^q divided by
    max(1, |P v|); abs_residual is the unscaled norm.
    """

    v: ZonalFunction
    residual_norm: float
    abs_residual: float
    positive: bool
    min_val: float
    max_val: float
    iterations: int
    tau: float
    status: str = CONVERGED

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "tau": self.tau,
            "residual_norm": self.residual_norm,
            "abs_residual": self.abs_residual,
            "positive": self.positive,
            "min_val": self.min_val,
            "max_val": self.max_val,
            "iterations": self.iterations,
            "v": self.v.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Solution":
        return cls(
            v=ZonalFunction.from_dict(d["v"]),
            residual_norm=d["residual_norm"],
            abs_residual=d["abs_residual"],
            positive=d["positive"],
            min_val=d["min_val"],
            max_val=d["max_val"],
            iterations=d["iterations"],
            tau=d["tau"],
            status=d.get("status", CONVERGED),
        )


class _Discretization:
    """Grid, basis matrices and eigenvalues shared by residual and Jacobian."""

    def __init__(self, spec: ProblemSpec, L: int, size: int):
        if size < L + 1:
            raise InvalidParameter("grid too small for L")
        self.spec = spec
        self.grid = collocation_grid(spec.n, size)
        self.B = _grid_basis(spec.n, L, size)
        self.Bw = self.B * self.grid.weights[:, None]
        self.mu = np.atleast_1d(paneitz_eigenvalue(spec.n, np.arange(L + 1)))
        self.fvals = spec.f(self.grid.nodes)
        self.half = (spec.n - 4) / 2

    def values(self, c):
        return self.B @ c

    def residual(self, c, vals=None):
        vals = self.values(c) if vals is None else vals
        if np.min(vals) <= 0:
            raise NonpositiveIterate("iterate is not positive on the grid")
        nl = self.half * self.fvals * vals ** self.spec.q
        return self.mu * c - self.Bw.T @ nl

    def jacobian(self, c, vals=None):
        vals = self.values(c) if vals is None else vals
        q = self.spec.q
        d = self.half * q * self.fvals * vals ** (q - 1)
        return np.diag(self.mu) - self.Bw.T @ (d[:, None] * self.B)

    def scaled(self, c, r):
        return float(np.linalg.norm(r)) / max(1.0, float(np.linalg.norm(self.mu * c)))


def _as_coeffs(v0, spec: ProblemSpec, L: int) -> np.ndarray:
    if isinstance(v0, ZonalFunction):
        c = np.zeros(L + 1)
        m = min(L, v0.L) + 1
        c[:m] = v0.coeffs[:m]
        return c
    c = np.zeros(L + 1)
    c[: min(L + 1, np.size(v0))] = np.asarray(v0, dtype=float)[: L + 1]
    return c


def constant_coeffs(n: int, L: int, value: float) -> np.ndarray:
    c = np.zeros(L + 1)
    c[0] = value * math.sqrt(sphere_volume(n))
    return c


def initial_guess(spec: ProblemSpec, L: int) -> np.ndarray:
    """The constant balancing d_n c against (n-4)/2 fbar c^q."""
    fbar = spec.f.coeffs[0] / math.sqrt(sphere_volume(spec.n))
    d = paneitz_coeffs(spec.n).d_float
    value = (2 * d / ((spec.n - 4) * fbar)) ** (1.0 / (spec.q - 1))
    return constant_coeffs(spec.n, L, value)


def _dense_range(v: ZonalFunction, points: int):
    t = np.cos(np.linspace(0.0, np.pi, points))
    vals = v(t)
    return float(vals.min()), float(vals.max())


def residual(spec: ProblemSpec, v: ZonalFunction, grid_size: int | None = None) -> ZonalFunction:
    """Coefficients of P v - (n-4)/2 f v^q, truncated at the degree of v."""
    disc = _Discretization(spec, v.L, grid_size or 4 * v.L + 1)
    return v.with_coeffs(disc.residual(v.coeffs))


def jacobian(spec: ProblemSpec, v: ZonalFunction, grid_size: int | None = None) -> np.ndarray:
    disc = _Discretization(spec, v.L, grid_size or 4 * v.L + 1)
    return disc.jacobian(v.coeffs)


def _newton(disc: _Discretization, c: np.ndarray, cfg: SolverConfig):
    """Damped Newton from c; returns (c, scaled residual, abs residual, iterations)."""
    r = disc.residual(c)
    norm = disc.scaled(c, r)
    it = 0
    rank_deficient = False
    while norm > cfg.newton_tol:
        if it >= cfg.max_iter:
            raise NewtonFailed(f"no convergence after {it} iterations (residual {norm:.3e})")
        J = disc.jacobian(c)
        if not np.all(np.isfinite(J)):
            raise SingularJacobian("Jacobian has non-finite entries")
        step, _, rank, sv = np.linalg.lstsq(J, -r, rcond=cfg.rcond)
        if rank == 0:
            raise SingularJacobian("Jacobian is zero")
        rank_deficient = rank_deficient or rank < J.shape[0]
        alpha = cfg.damping
        saw_positive = False
        while True:
            trial = c + alpha * step
            vals = disc.values(trial)
            if np.min(vals) > 0:
                saw_positive = True
                rt = disc.residual(trial, vals)
                nt = disc.scaled(trial, rt)
                if nt < norm:
                    c, r, norm = trial, rt, nt
                    break
            alpha *= 0.5
            if alpha < 2.0 ** -20:
                if not saw_positive:
                    raise NonpositiveIterate("damping floor reached without a positive iterate")
                if rank_deficient:
                    raise SingularJacobian(
                        f"Newton stalled at residual {norm:.3e} with a rank-deficient Jacobian"
                    )
                raise NewtonFailed(f"line search stalled at residual {norm:.3e}")
        it += 1
    return c, norm, float(np.linalg.norm(r)), it


def newton_solve(spec: ProblemSpec, config: SolverConfig, v0=None) -> Solution:
    """Solve the problem from v0 (a ZonalFunction, coefficient array, or None).

    None uses the constant initial guess.  The axis of the solution is the
    axis of f.
    """
    L = config.L
    disc = _Discretization(spec, L, config.size)
    c0 = initial_guess(spec, L) if v0 is None else _as_coeffs(v0, spec, L)
    c, norm, abs_norm, it = _newton(disc, c0, config)
    v = ZonalFunction(spec.f.axis, spec.n, c)
    vmin, vmax = _dense_range(v, config.check_points)
    vmin = min(vmin, float(np.min(disc.values(c))))
    if vmin <= 0:
        raise NonpositiveIterate(f"converged iterate has min {vmin:.3e} <= 0")
    return Solution(v, norm, abs_norm, True, vmin, vmax, it, spec.tau)


# ---------------------------------------------------------------------------
# Continuation
# ---------------------------------------------------------------------------

@dataclass
class ContinuationPath:
    parameter: str
    schedule: list
    params: list = field(default_factory=list)
    solutions: list = field(default_factory=list)
    termination: str = COMPLETED
    failed_param: float | None = None
    message: str = ""
    n: int = 0
    f: ZonalFunction | None = None
    tau: float | None = None

    @property
    def max_vals(self) -> np.ndarray:
        return np.array([s.max_val for s in self.solutions])

    def table_rows(self):
        for p, s in zip(self.params, self.solutions):
            yield (p, s.max_val, s.min_val, s.residual_norm, s.iterations)

    def to_dict(self) -> dict:
        return {
            "parameter": self.parameter,
            "schedule": list(map(float, self.schedule)),
            "params": list(map(float, self.params)),
            "termination": self.termination,
            "failed_param": self.failed_param,
            "message": self.message,
            "n": self.n,
            "tau": self.tau,
            "f": None if self.f is None else self.f.to_dict(),
            "solutions": [s.to_dict() for s in self.solutions],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ContinuationPath":
        return cls(
            parameter=d["parameter"],
            schedule=list(d["schedule"]),
            params=list(d["params"]),
            solutions=[Solution.from_dict(s) for s in d["solutions"]],
            termination=d["termination"],
            failed_param=d.get("failed_param"),
            message=d.get("message", ""),
            n=d["n"],
            f=None if d.get("f") is None else ZonalFunction.from_dict(d["f"]),
            tau=d.get("tau"),
        )


def _follow(make_spec, schedule, config: SolverConfig, c_start, path: ContinuationPath, max_bisect=10):
    """Shared stepping loop: warm start with a secant predictor, bisect on failure."""
    L = config.L
    prev = None  # (param, coeffs) before the last accepted one
    cur_p, cur_c = None, c_start
    for target in schedule:
        trial = target
        bisections = 0
        while True:
            spec = make_spec(trial)
            disc = _Discretization(spec, L, config.size)
            guesses = [cur_c]
            if prev is not None and cur_p is not None and cur_p != prev[0]:
                pred = cur_c + (cur_c - prev[1]) * (trial - cur_p) / (cur_p - prev[0])
                if np.min(disc.values(pred)) > 0:
                    guesses.insert(0, pred)
            err = None
            for g in guesses:
                try:
                    c, norm, abs_norm, it = _newton(disc, g, config)
                    err = None
                    break
                except (NewtonFailed, NonpositiveIterate, SingularJacobian) as exc:
                    err = exc
            if err is None:
                v = ZonalFunction(spec.f.axis, spec.n, c)
                vmin, vmax = _dense_range(v, config.check_points)
                if vmin <= 0:
                    err = NonpositiveIterate(f"solution at {trial} has min {vmin:.3e}")
            if err is None:
                if cur_p is not None:
                    prev = (cur_p, cur_c)
                cur_p, cur_c = trial, c
                if trial == target:
                    path.params.append(float(target))
                    path.solutions.append(Solution(v, norm, abs_norm, True, vmin, vmax, it, spec.tau))
                    log.info("%s = %.6g: max v = %.6g, %d its", path.parameter, target, vmax, it)
                    if vmax > config.blowup_ceiling:
                        path.termination = BLOWUP
                        path.message = f"max v = {vmax:.6g} exceeds {config.blowup_ceiling:g}"
                        return path
                    break
                trial = target
                continue
            if cur_p is None or bisections >= max_bisect:
                path.termination = FAILED
                path.failed_param = float(trial)
                path.message = f"{type(err).__name__}: {err}"
                return path
            bisections += 1
            trial = 0.5 * (cur_p + trial)
    path.termination = COMPLETED
    return path


def continue_tau(spec: ProblemSpec, config: SolverConfig, schedule, v0=None) -> ContinuationPath:
    """Follow solutions as tau decreases along ``schedule`` (spec.tau is ignored)."""
    schedule = [float(s) for s in schedule]
    if not schedule:
        raise InvalidParameter("empty schedule")
    if any(b >= a for a, b in zip(schedule, schedule[1:])):
        raise InvalidParameter("tau schedule must be strictly decreasing")
    start = spec.with_tau(schedule[0])
    c0 = initial_guess(start, config.L) if v0 is None else _as_coeffs(v0, start, config.L)
    path = ContinuationPath("tau", schedule, n=spec.n, f=spec.f)
    return _follow(spec.with_tau, schedule, config, c0, path)


def homotopy_f(f: ZonalFunction, mu: float) -> ZonalFunction:
    """f_mu = mu f + (1 - mu) q_round(n)."""
    c = mu * f.coeffs
    c[0] += (1 - mu) * q_round(f.n) * math.sqrt(sphere_volume(f.n))
    return f.with_coeffs(c)


def continue_mu(f: ZonalFunction, config: SolverConfig, schedule, tau: float = 0.0) -> ContinuationPath:
    """Follow solutions of the f_mu problem from v = 1 at mu = 0 along ``schedule``."""
    schedule = [float(s) for s in schedule]
    if not schedule or schedule[0] != 0.0:
        raise InvalidParameter("mu schedule must start at 0")
    if any(b <= a for a, b in zip(schedule, schedule[1:])) or schedule[-1] > 1.0:
        raise InvalidParameter("mu schedule must increase within [0, 1]")

    def make(mu):
        return ProblemSpec(f.n, homotopy_f(f, mu), tau)

    path = ContinuationPath("mu", schedule, n=f.n, f=f, tau=tau)
    return _follow(make, schedule, config, constant_coeffs(f.n, config.L, 1.0), path)


def conformal_pullback(v: ZonalFunction, lam: float, L: int | None = None) -> ZonalFunction:
    """T v = |det d phi|^{(n-4)/(2n)} v o phi for phi = phi_{a, 1/lam}, a the axis of v.

    T maps solutions of the critical equation with constant f to solutions;
    T 1 is the bubble delta_{a, lam}.
    """
    a = v.axis
    n = v.n

    def g(t):
        x = np.outer(t, a) + np.outer(np.sqrt(np.clip(1 - t * t, 0, None)), _perp(a))
        return conformal_factor(a, lam, x) ** ((n - 4) / (2 * n)) * v.at(_dilate(a, lam, x))

    return zonal_from_callable(g, n, L or v.L, a)


def _perp(a):
    e = np.zeros_like(a)
    e[int(np.argmin(np.abs(a)))] = 1.0
    e -= (e @ a) * a
    return e / np.linalg.norm(e)
