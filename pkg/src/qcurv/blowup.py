"""Diagnostics for concentrating solution sequences.

Chart fields are functions on R^n obtained from a field v on S^n through the
stereographic chart centred at a point p:  u(y) = (2/(1+|y|^2))^{(n-4)/2} v(x(y)).
With that weight u solves the flat equation Delta^2 u = (n-4)/2 f u^q at q
critical, so Euclidean bubble analysis applies directly.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .errors import (
    AnnulusInsideCore,
    DimensionMismatch,
    FitDiverged,
    InsufficientPath,
    InvalidParameter,
    NonpositiveField,
    RadiusOutOfChart,
)
from .paneitz import SphereBubble, coeffs as paneitz_coeffs, euclidean_bubble_from_f
from .sphere import (
    ZonalFunction,
    as_direction,
    chart,
    geodesic_distance,
    stereo_inverse,
    tangent_basis,
)
from .solver import ContinuationPath, Solution, critical_exponent

SQRT6 = math.sqrt(6.0)


# ---------------------------------------------------------------------------
# Chart fields
# ---------------------------------------------------------------------------

class ChartField:
    """u(y) = (2/(1+|y|^2))^{(n-4)/2} v(x(y)) in the chart centred at ``pole``.

    When v is zonal and the pole lies on its axis the field is radial and
    ``radial(r)`` gives it exactly.
    """

    def __init__(self, v: ZonalFunction, pole, max_radius: float = 1e3):
        self.v = v
        self.n = v.n
        self.chart = chart(pole)
        self.max_radius = max_radius
        s = float(self.chart.pole @ v.axis)
        self.sign = s if abs(abs(s) - 1.0) < 1e-12 else None

    @property
    def is_radial(self) -> bool:
        return self.sign is not None

    def _weight(self, r2):
        return (2.0 / (1.0 + r2)) ** ((self.n - 4) / 2)

    def radial(self, r) -> np.ndarray:
        if not self.is_radial:
            raise InvalidParameter("pole is not on the axis of the field")
        r = np.asarray(r, dtype=float)
        r2 = r * r
        t = self.sign * (1.0 - r2) / (1.0 + r2)
        return self._weight(r2) * self.v(t)

    def __call__(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        r2 = np.sum(y * y, axis=-1)
        return self._weight(r2) * self.v.at(stereo_inverse(self.chart, y))


def _radial_available(u, center) -> bool:
    return hasattr(u, "radial") and getattr(u, "is_radial", True) and not np.any(center)


def _antithetic_directions(n: int, pairs: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    d = rng.standard_normal((pairs, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return np.concatenate([d, -d])


# ---------------------------------------------------------------------------
# Averages and hat curves
# ---------------------------------------------------------------------------

@dataclass
class AverageCurve:
    center: np.ndarray
    radii: np.ndarray
    values: np.ndarray


def spherical_average(u, center, radii, n: int | None = None, pairs: int = 256, seed: int = 0) -> AverageCurve:
    """Average of u over the spheres |y - center| = r.

    Radial chart fields centred at the origin are evaluated exactly; otherwise
    the average uses ``pairs`` antithetic pairs of directions, so terms odd in
    y - center cancel exactly.
    """
    radii = np.asarray(radii, dtype=float)
    center = np.asarray(center, dtype=float)
    n = n or center.size
    max_r = getattr(u, "max_radius", np.inf)
    if np.any(radii < 0) or not np.all(np.isfinite(radii)) or np.any(radii + np.linalg.norm(center) > max_r):
        raise RadiusOutOfChart("radii must be finite, nonnegative and inside the chart window")
    if _radial_available(u, center):
        return AverageCurve(center, radii, np.asarray(u.radial(radii), dtype=float))
    dirs = _antithetic_directions(n, pairs, seed)
    pts = center + radii[:, None, None] * dirs[None, :, :]
    vals = np.asarray(u(pts.reshape(-1, n)), dtype=float).reshape(radii.size, -1)
    return AverageCurve(center, radii, vals.mean(axis=1))


@dataclass
class HatCurve:
    exponent: float
    radii: np.ndarray
    values: np.ndarray
    critical_points: int
    rho: float
    critical_radii: list = field(default_factory=list)


def hat_exponent(q: float) -> float:
    if not q > 1:
        raise InvalidParameter("q must exceed 1")
    return 4.0 / (q - 1.0)


def hat_curve(avg: AverageCurve, q: float, rho: float) -> HatCurve:
    """r^{4/(q-1)} times the average; counts slope sign changes on (0, rho)."""
    e = hat_exponent(q)
    vals = avg.radii ** e * avg.values
    inside = (avg.radii > 0) & (avg.radii < rho)
    r = avg.radii[inside]
    slope = np.sign(np.diff(vals[inside]))
    nz = np.nonzero(slope)[0]
    crit = []
    for i, j in zip(nz, nz[1:]):
        if slope[i] != slope[j]:
            crit.append(float(r[j]))
    return HatCurve(e, avg.radii, vals, len(crit), rho, crit)


# ---------------------------------------------------------------------------
# Detection and bubble fitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DetectionConfig:
    C0: float = 10.0
    eps: float = 0.1
    R: float = 10.0
    delta_star: float = 0.1
    rho: float = 0.5

    def __post_init__(self):
        if not self.C0 > 1 or not 0 < self.eps < 1 or not self.R > 1:
            raise InvalidParameter("need C0 > 1, 0 < eps < 1 and R > 1")


@dataclass
class Candidate:
    point: np.ndarray | None
    height: float
    accepted: bool
    closeness: float
    k: float
    k_fit: float
    gradient_norm: float
    reason: str = ""


def exp_map(p, xi) -> np.ndarray:
    """Exponential map of S^n at p applied to tangent vector(s) xi (ambient)."""
    xi = np.asarray(xi, dtype=float)
    th = np.linalg.norm(xi, axis=-1, keepdims=True)
    safe = np.where(th > 0, th, 1.0)
    return np.cos(th) * p + np.sin(th) * xi / safe


def _f_at(f, x) -> np.ndarray:
    if isinstance(f, ZonalFunction):
        return f.at(x)
    return np.asarray(f(x), dtype=float)


def _field_at(v, x) -> np.ndarray:
    if isinstance(v, Solution):
        v = v.v
    if isinstance(v, ZonalFunction):
        return v.at(x)
    return np.asarray(v(x), dtype=float)


def _tangent_gradient(v, p, h=1e-6) -> float:
    E = tangent_basis(p)
    g = [(_field_at(v, exp_map(p, h * e)[None]) - _field_at(v, exp_map(p, -h * e)[None]))[0] / (2 * h) for e in E.T]
    return float(np.linalg.norm(g))


def _zonal_maxima(v: ZonalFunction, points: int = 20001):
    th = np.linspace(0.0, np.pi, points)
    vals = v(np.cos(th))
    out = []
    if vals[0] >= vals[1]:
        out.append((0.0, vals[0]))
    if vals[-1] >= vals[-2]:
        out.append((np.pi, vals[-1]))
    inner = np.nonzero((vals[1:-1] > vals[:-2]) & (vals[1:-1] >= vals[2:]))[0] + 1
    out.extend((th[i], vals[i]) for i in inner)
    return out


def rescaled_profile(v, p, q: float, z) -> np.ndarray:
    """v(p)^{-1} v(exp_p(v(p)^{-(q-1)/4} z e)) along a fixed tangent direction e."""
    p = as_direction(p, tol=1e-10)
    e = tangent_basis(p)[:, 0]
    h = float(_field_at(v, p[None])[0])
    th = np.asarray(z, dtype=float) * h ** (-(q - 1) / 4)
    return _field_at(v, exp_map(p, np.outer(th, e))) / h


def _fit_k(z, w, n):
    mask = (z > 0) & (w > 0)
    s = w[mask] ** (2.0 / (4 - n)) - 1.0
    z2 = z[mask] ** 2
    return float(z2 @ s / (z2 @ z2)) if mask.any() else float("nan")


def detect_concentration(v, f, cfg: DetectionConfig = DetectionConfig(), q: float | None = None) -> list:
    """Local maxima of a zonal v above C0, each tested against the rescaled bubble.

    Closeness is the sup distance between the rescaled profile (in geodesic
    normal coordinates) and (1 + k|z|^2)^{(4-n)/2} for |z| <= 2R, with k taken
    from f at the candidate.  Ring maxima of zonal fields are reported as
    rejected.  Output is ordered by height.
    """
    if isinstance(v, Solution):
        q = critical_exponent(v.v.n) - v.tau if q is None else q
        v = v.v
    n = v.n
    q = critical_exponent(n) if q is None else q
    found = []
    for th, h in _zonal_maxima(v):
        if h <= cfg.C0:
            continue
        if 0.0 < th < np.pi:
            found.append(Candidate(None, float(h), False, float("inf"), float("nan"), float("nan"), 0.0,
                                   f"ring maximum at angle {th:.6g} from the axis"))
            continue
        p = v.axis if th == 0.0 else -v.axis
        fp = float(_f_at(f, p[None])[0])
        bub = euclidean_bubble_from_f(n, fp)
        z = np.linspace(0.0, 2 * cfg.R, 401)
        if h ** (-(q - 1) / 4) * 2 * cfg.R > np.pi:
            z = z[z * h ** (-(q - 1) / 4) <= np.pi]
        w = rescaled_profile(v, p, q, z)
        dist = float(np.max(np.abs(w - bub.radial(z))))
        ok = dist < cfg.eps
        found.append(Candidate(p.copy(), float(h), ok, dist, bub.k, _fit_k(z, w, n), _tangent_gradient(v, p),
                               "" if ok else f"profile distance {dist:.3g} >= eps"))
    found.sort(key=lambda c: -c.height)
    return found


@dataclass
class BubbleFit:
    a: np.ndarray
    lam: float
    alpha: float
    residual: float
    concentrated: bool


def bubble_height_factor(n: int, f_at_a: float) -> float:
    """The alpha with alpha * delta solving the equation for f constant = f(a)."""
    return (2 * paneitz_coeffs(n).d_float / ((n - 4) * f_at_a)) ** ((n - 4) / 8)


def fit_bubble(v, point, R: float = 10.0, n: int | None = None, q: float | None = None,
               f_at_p: float | None = None, radii: int = 40, pairs: int = 16, seed: int = 0) -> BubbleFit:
    """Least-squares fit of alpha * delta_{a, lam} to v on a geodesic window around ``point``.

    The window radius is R * v(point)^{-(q-1)/4}.  The centre a is moved by
    the exponential map from ``point``; lam is fitted in log scale.
    """
    p = as_direction(point, tol=1e-10)
    n = n or p.size - 1
    q = critical_exponent(n) if q is None else q
    h = float(_field_at(v, p[None])[0])
    if not h > 0:
        raise FitDiverged("field is not positive at the point")
    alpha0 = 1.0 if f_at_p is None else bubble_height_factor(n, f_at_p)
    lam0 = max((h / alpha0) ** (2 / (n - 4)), 1e-3)
    width = min(np.pi, R * h ** (-(q - 1) / 4))
    E = tangent_basis(p)
    dirs = _antithetic_directions(n, pairs, seed) @ E.T
    rs = np.linspace(0.0, width, radii + 1)[1:]
    pts = np.concatenate([p[None], exp_map(p, (rs[:, None, None] * dirs[None]).reshape(-1, n + 1))])
    data = _field_at(v, pts)
    scale = float(np.linalg.norm(data))

    def model(params):
        a = exp_map(p, E @ params[:n])
        return SphereBubble(a, math.exp(params[n]), n)(pts) * params[n + 1]

    x0 = np.concatenate([np.zeros(n), [math.log(lam0), alpha0]])
    try:
        sol = least_squares(lambda x: (model(x) - data) / scale, x0, xtol=1e-15, ftol=1e-15, gtol=1e-15,
                            max_nfev=2000)
    except (ValueError, FloatingPointError) as exc:
        raise FitDiverged(str(exc)) from exc
    if not sol.success or not np.all(np.isfinite(sol.x)):
        raise FitDiverged(sol.message)
    a = exp_map(p, E @ sol.x[:n])
    lam = math.exp(sol.x[n])
    res = float(np.linalg.norm(sol.fun))
    return BubbleFit(a, lam, float(sol.x[n + 1]), res, lam >= 2.0)


# ---------------------------------------------------------------------------
# Harnack ratios and decay
# ---------------------------------------------------------------------------

def _radial_laplacian(u, r, n, rel=1e-4):
    h = rel * r
    up, u0, um = u.radial(r + h), u.radial(r), u.radial(r - h)
    d2 = (up - 2 * u0 + um) / h ** 2
    d1 = (up - um) / (2 * h)
    return -(d2 + (n - 1) / r * d1)


def _fd_laplacian(u, y, n, h):
    out = -2 * n * u(y)
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        out = out + u(y + e) + u(y - e)
    return -out / h ** 2


@dataclass
class HarnackRecord:
    r_in: float
    r_out: float
    ratio: float
    laplacian_ratio: float


def harnack_ratios(u, center, annuli, n: int | None = None, samples: int = 201, pairs: int = 64,
                   seed: int = 0) -> list:
    """max/min of u on each annulus, and r^2 max(Delta u)/min u with r = sqrt(r_in r_out).

    Delta is the geometer's Laplacian.  Raises NonpositiveField if u <= 0 on
    a sample.
    """
    center = np.asarray(center, dtype=float)
    n = n or center.size
    out = []
    for r_in, r_out in annuli:
        if not 0 < r_in < r_out:
            raise InvalidParameter("annulus needs 0 < r_in < r_out")
        rs = np.linspace(r_in, r_out, samples)
        if _radial_available(u, center):
            vals = np.asarray(u.radial(rs))
            lap = _radial_laplacian(u, rs, n)
        else:
            dirs = _antithetic_directions(n, pairs, seed)
            pts = center + (rs[:, None, None] * dirs[None]).reshape(-1, n)
            vals = np.asarray(u(pts))
            lap = _fd_laplacian(u, pts, n, 1e-4 * r_in)
        if np.min(vals) <= 0:
            raise NonpositiveField("u must be positive on the annulus")
        r = math.sqrt(r_in * r_out)
        out.append(HarnackRecord(r_in, r_out, float(vals.max() / vals.min()),
                                 float(r * r * lap.max() / vals.min())))
    return out


@dataclass
class DecayFit:
    exponent: float
    amplitude: float
    blowup: bool
    r_in: float
    r_out: float


def decay_fit(u, center, annulus, n: int | None = None, q: float | None = None, core_R: float = 10.0,
              height: float | None = None, samples: int = 200, exponent_floor: float = 0.25) -> DecayFit:
    """Log-log fit of height * ubar(r) = amplitude * r^exponent on the annulus.

    ``height`` defaults to u(center).  The annulus must lie outside the core
    radius core_R * height^{-(q-1)/4}.  Fits with |exponent| below
    ``exponent_floor`` are flagged as non-blow-up.
    """
    center = np.asarray(center, dtype=float)
    n = n or center.size
    q = critical_exponent(n) if q is None else q
    r_in, r_out = annulus
    if height is None:
        height = float(u.radial(0.0)) if _radial_available(u, center) else float(u(center[None])[0])
    core = core_R * height ** (-(q - 1) / 4)
    if r_in < core:
        raise AnnulusInsideCore(f"r_in = {r_in:.4g} is inside the core radius {core:.4g}")
    rs = np.geomspace(r_in, r_out, samples)
    avg = spherical_average(u, center, rs, n)
    if np.min(avg.values) <= 0:
        raise NonpositiveField("average is not positive on the annulus")
    slope, intercept = np.polyfit(np.log(rs), np.log(height * avg.values), 1)
    return DecayFit(float(slope), float(math.exp(intercept)), abs(slope) >= exponent_floor, r_in, r_out)


# ---------------------------------------------------------------------------
# Path-level estimates
# ---------------------------------------------------------------------------

def extrapolate_limit(params, values):
    """Limit as the parameter tends to 0 from the last three points.

    Uses Neville (Richardson) extrapolation of the interpolating quadratic in
    the parameter.  With fewer points the raw final value is returned.
    Returns (limit, tag).
    """
    params = np.asarray(params, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.size < 3:
        return float(values[-1]), "unextrapolated"
    x, y = params[-3:], values[-3:]
    coef = np.polyfit(x, y, 2)
    return float(np.polyval(coef, 0.0)), "richardson"


@dataclass
class MuEstimate:
    point: np.ndarray
    params: np.ndarray
    heights: np.ndarray
    mu: np.ndarray
    tau_scaling: np.ndarray
    limit: float
    limit_tag: str
    blowup: bool


def mu_estimates(path: ContinuationPath, point, C0: float = 10.0) -> MuEstimate:
    """tau v(p)^2 and tau v(p)^{2/(n-4)} along a tau path, with the extrapolated limit of the first."""
    if path.parameter != "tau":
        raise InvalidParameter("mu estimates need a tau path")
    if len(path.solutions) < 3:
        raise InsufficientPath("need at least three path steps")
    p = as_direction(point, tol=1e-10)
    n = path.n
    taus = np.asarray(path.params, dtype=float)
    heights = np.array([float(s.v.at(p[None])[0]) for s in path.solutions])
    mu = taus * heights ** 2
    scaling = taus * heights ** (2.0 / (n - 4))
    limit, tag = extrapolate_limit(taus, mu)
    blow = int(np.sum(heights > C0)) >= 3
    return MuEstimate(p, taus, heights, mu, scaling, limit, tag, blow)


def balance_residual(M, lambdas, mus) -> np.ndarray:
    """sum_l M_lj lam_l - (4 sqrt6 / 3) lam_j mu_j for each j."""
    M = np.asarray(getattr(M, "matrix", M), dtype=float)
    lambdas = np.asarray(lambdas, dtype=float)
    mus = np.asarray(mus, dtype=float)
    k = lambdas.size
    if M.shape != (k, k) or mus.size != k:
        raise DimensionMismatch("M, lambda and mu sizes differ")
    return M.T @ lambdas - (4 * SQRT6 / 3) * lambdas * mus


def interaction_balance(points, lambdas, mus, f) -> np.ndarray:
    from .index_theory import interaction_matrix

    if len(points) != len(lambdas) or len(points) != len(mus):
        raise DimensionMismatch("need one lambda and one mu per point")
    return balance_residual(interaction_matrix(points, f), lambdas, mus)


def lambda_estimates(heights, f_values) -> np.ndarray:
    """lam_j = f(p_j)^{-1/4} v(p_1)/v(p_j) from heights at the last path step."""
    heights = np.asarray(heights, dtype=float)
    return np.asarray(f_values, dtype=float) ** -0.25 * heights[0] / heights


@dataclass
class SeparationResult:
    min_distance: float
    passed: bool


def separation_check(points, delta_star: float) -> SeparationResult:
    pts = [np.asarray(p, dtype=float) for p in points]
    if len(pts) < 2:
        return SeparationResult(float("inf"), True)
    d = min(float(geodesic_distance(a, b)) for i, a in enumerate(pts) for b in pts[i + 1:])
    return SeparationResult(d, d >= delta_star)


def drift_sequence(points, heights, critical_points):
    """Distances of p_j(tau) to the nearest critical point and their log-slope against log v."""
    crit = np.asarray(critical_points, dtype=float)
    d = np.array([float(np.min(geodesic_distance(np.asarray(p)[None], crit))) for p in points])
    h = np.asarray(heights, dtype=float)
    ok = d > 0
    slope = float(np.polyfit(np.log(h[ok]), np.log(d[ok]), 1)[0]) if ok.sum() >= 2 else float("nan")
    return d, slope


def zonal_critical_points(f: ZonalFunction, points: int = 20001):
    """Poles plus representatives of critical rings of a zonal function."""
    th = np.linspace(0.0, np.pi, points)
    g = -np.sin(th) * f.derivative(np.cos(th))
    out = [f.axis, -f.axis]
    s = np.sign(g[1:-1])
    for i in np.nonzero(s[:-1] * s[1:] < 0)[0] + 1:
        e = tangent_basis(f.axis)[:, 0]
        out.append(np.cos(th[i]) * f.axis + np.sin(th[i]) * e)
    return out


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass
class PointReport:
    location: list
    height: float
    closeness: float
    k: float
    k_fit: float
    fit: dict | None
    hat_critical_points: int
    hat_critical_radii: list
    harnack: list
    decay_exponent: float | None
    decay_amplitude: float | None
    mu_sequence: list
    mu_limit: float | None
    mu_limit_tag: str
    mu_target: float
    mu_relative_gap: float | None
    tau_scaling: list
    crit_distance: float


@dataclass
class BlowupReport:
    config: dict
    points: list
    rejected: list
    separations: dict
    balance_residual: list
    schema: str = "qcurv-report/1"

    def to_dict(self) -> dict:
        return asdict(self)


def laplacian_at_pole(f: ZonalFunction, p) -> float:
    t = float(np.asarray(p) @ f.axis)
    return float(f.laplacian_h(np.array([t]))[0])


def diagnose(path: ContinuationPath, cfg: DetectionConfig = DetectionConfig(),
             harnack_annuli=((0.25, 1.0),), decay_annulus=None) -> BlowupReport:
    """Blow-up report for the last step of a tau path (n = 5 or 6, zonal f)."""
    if not path.solutions:
        return BlowupReport(asdict(cfg), [], [], {"min_distance": None, "passed": True}, [])
    f = path.f
    last = path.solutions[-1]
    n = path.n
    q = critical_exponent(n) - last.tau
    cands = detect_concentration(last, f, cfg, q)
    accepted = [c for c in cands if c.accepted]
    crit = zonal_critical_points(f)
    reports = []
    for c in accepted:
        p = c.point
        fp = float(f.at(p[None])[0])
        u = ChartField(last.v, p)
        try:
            fit = fit_bubble(last.v, p, cfg.R, n, q, fp)
            fit_d = {"a": fit.a.tolist(), "lam": fit.lam, "alpha": fit.alpha, "residual": fit.residual,
                     "concentrated": fit.concentrated}
        except FitDiverged:
            fit_d = None
        radii = np.geomspace(1e-4, cfg.rho, 600)
        hat = hat_curve(spherical_average(u, np.zeros(n), radii), q, cfg.rho)
        harn = [asdict(h) for h in harnack_ratios(u, np.zeros(n), harnack_annuli)]
        u0 = float(u.radial(0.0))
        ann = decay_annulus or (cfg.R * u0 ** (-(q - 1) / 4), cfg.rho)
        try:
            dec = decay_fit(u, np.zeros(n), ann, n, q, cfg.R)
            dexp, damp = dec.exponent, dec.amplitude
        except AnnulusInsideCore:
            dexp = damp = None
        target = laplacian_at_pole(f, p) / fp ** 1.5
        if path.parameter == "tau" and len(path.solutions) >= 3:
            est = mu_estimates(path, p, cfg.C0)
            mu_seq, lim, tag, scal = est.mu.tolist(), est.limit, est.limit_tag, est.tau_scaling.tolist()
            gap = abs(lim - target) / abs(target) if target else None
        else:
            mu_seq, lim, tag, scal, gap = [], None, "unavailable", [], None
        dist = float(min(geodesic_distance(p, cp) for cp in crit))
        reports.append(PointReport(p.tolist(), c.height, c.closeness, c.k, c.k_fit, fit_d, hat.critical_points,
                                   hat.critical_radii, harn, dexp, damp, mu_seq, lim, tag, target, gap, scal, dist))
    sep = separation_check([c.point for c in accepted], cfg.delta_star)
    bal = []
    if n == 6 and accepted and all(r.mu_limit is not None for r in reports):
        lams = lambda_estimates([c.height for c in accepted], [float(f.at(c.point[None])[0]) for c in accepted])
        try:
            bal = interaction_balance([c.point for c in accepted], lams, [r.mu_limit for r in reports],
                                      _ZonalAsPoly(f)).tolist()
        except Exception:  # noqa: BLE001 - balance is diagnostic only
            bal = []
    rejected = [{"height": c.height, "closeness": c.closeness, "reason": c.reason,
                 "location": None if c.point is None else c.point.tolist()} for c in cands if not c.accepted]
    return BlowupReport(asdict(cfg), [asdict(r) for r in reports], rejected,
                        {"min_distance": None if len(accepted) < 2 else sep.min_distance, "passed": sep.passed},
                        bal)


class _ZonalAsPoly:
    """Adapter giving a zonal f the value/gradient/Hessian interface of AmbientPolynomial at poles."""

    def __init__(self, f: ZonalFunction):
        self.f = f
        self.n = f.n

    def __call__(self, x):
        return self.f.at(np.atleast_2d(x)) if np.ndim(x) > 1 else float(self.f.at(np.asarray(x)[None])[0])

    def laplacian_h(self, p) -> float:
        return laplacian_at_pole(self.f, p)
