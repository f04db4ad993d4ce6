"""Morse data of f on S^n, the interaction matrix M, Index(f) and the centroid map G.

Laplacians use the geometer's sign: lap_h = -trace of the tangential Hessian,
so a coordinate function has lap_h > 0 at its maximum.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_jacobi
from scipy.stats import norm, qmc

from .errors import (
    CoincidentPoints,
    DegenerateCritical,
    DegenerateZero,
    IncompleteSearch,
    InvalidParameter,
    NonpositiveCurvature,
    RhoZero,
    TooManyPlusPoints,
    UnsupportedDimension,
    ZeroOnBoundary,
)
from .paneitz import green_J
from .sphere import (
    AmbientPolynomial,
    as_direction,
    geodesic_distance,
    sphere_product_rule,
    sphere_volume,
    tangent_basis,
)

FPLUS = "Fplus"
FMINUS = "Fminus"
DEGENERATE = "Degenerate"


def _value(f, x) -> float:
    return float(np.asarray(f(np.asarray(x)[None]))[0])


def tangential_hessian(f: AmbientPolynomial, p) -> np.ndarray:
    """Hessian of f on S^n at p in the tangent basis of p (n x n)."""
    p = np.asarray(p, dtype=float)
    E = tangent_basis(p)
    g = f.gradient(p)
    return E.T @ f.hessian(p) @ E - (g @ p) * np.eye(E.shape[1])


def riemannian_gradient(f: AmbientPolynomial, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    g = f.gradient(p)
    return g - (g @ p) * p


def morse_data(f: AmbientPolynomial, p, tol: float = 1e-8):
    """(Morse index, lap_h) at a critical point p."""
    p = as_direction(p, tol=1e-10)
    eig = np.linalg.eigvalsh(tangential_hessian(f, p))
    if np.min(np.abs(eig)) < tol:
        raise DegenerateCritical(f"Hessian eigenvalue {np.min(np.abs(eig)):.3e} below {tol}", [p])
    return int(np.sum(eig < 0)), float(-eig.sum())


def laplacian_h(f: AmbientPolynomial, p) -> float:
    """Delta_h f(p) (geometer's sign) at any point p."""
    p = np.asarray(p, dtype=float)
    return float(-np.trace(tangential_hessian(f, p)) + 0.0)


@dataclass
class CriticalPoint:
    location: np.ndarray
    value: float
    gradient_norm: float
    morse_index: int
    lap_h: float
    classification: str

    def to_dict(self) -> dict:
        return {
            "location": self.location.tolist(),
            "value": self.value,
            "gradient_norm": self.gradient_norm,
            "morse_index": self.morse_index,
            "lap_h": self.lap_h,
            "classification": self.classification,
        }


@dataclass
class CriticalSet:
    n: int
    points: list
    morse_sum: int
    euler: int

    @property
    def complete(self) -> bool:
        return self.morse_sum == self.euler

    @property
    def plus(self) -> list:
        return [c for c in self.points if c.classification == FPLUS]


def euler_characteristic(n: int) -> int:
    return 1 + (-1) ** n


def sobol_directions(n: int, count: int, seed: int = 0) -> np.ndarray:
    """Quasi-random points on S^n from a scrambled Sobol sequence.

    A power-of-two block is drawn and truncated to ``count``.
    """
    m = max(0, math.ceil(math.log2(max(count, 1))))
    s = qmc.Sobol(d=n + 1, scramble=True, seed=seed).random_base2(m)[:count]
    g = norm.ppf(np.clip(s, 1e-12, 1 - 1e-12))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _newton_on_sphere(f, x, tol, max_iter=100):
    for _ in range(max_iter):
        g = riemannian_gradient(f, x)
        if np.linalg.norm(g) < tol:
            return x, True
        E = tangent_basis(x)
        H = tangential_hessian(f, x)
        xi = np.linalg.lstsq(H, -(E.T @ g), rcond=1e-12)[0]
        step = np.linalg.norm(xi)
        if step > 0.5:
            xi *= 0.5 / step
        x = x + E @ xi
        x /= np.linalg.norm(x)
    return x, np.linalg.norm(riemannian_gradient(f, x)) < tol


def find_critical_points(f: AmbientPolynomial, n: int | None = None, starts: int = 64, seed: int = 0,
                         tol: float = 1e-11, dedup: float = 1e-6, hess_tol: float = 1e-8) -> CriticalSet:
    """Riemannian Newton from quasi-random starts, deduplicated and classified.

    Degenerate critical points raise DegenerateCritical carrying them in
    ``.points``.  A Morse count different from the Euler characteristic
    emits an IncompleteSearch warning.
    """
    n = f.n if n is None else n
    if n != f.n:
        raise InvalidParameter("polynomial dimension does not match n")
    found = []
    for x0 in sobol_directions(n, starts, seed):
        x, ok = _newton_on_sphere(f, x0, tol)
        if not ok:
            continue
        if all(geodesic_distance(x, y) > dedup for y in found):
            found.append(x)
    found.sort(key=lambda x: tuple(np.round(-x, 9)))
    points, degenerate = [], []
    for x in found:
        try:
            m, lap = morse_data(f, x, hess_tol)
        except DegenerateCritical:
            degenerate.append(x)
            continue
        cls = FPLUS if lap > 0 else FMINUS if lap < 0 else DEGENERATE
        points.append(CriticalPoint(x, _value(f, x), float(np.linalg.norm(riemannian_gradient(f, x))), m, lap, cls))
    if degenerate:
        raise DegenerateCritical(f"{len(degenerate)} degenerate critical point(s) found", degenerate)
    msum = sum((-1) ** c.morse_index for c in points)
    cs = CriticalSet(n, points, msum, euler_characteristic(n))
    if not cs.complete:
        warnings.warn(f"Morse count {msum} differs from Euler characteristic {cs.euler}", IncompleteSearch)
    return cs


# ---------------------------------------------------------------------------
# Interaction matrix and Index
# ---------------------------------------------------------------------------

@dataclass
class InteractionMatrix:
    points: list
    matrix: np.ndarray
    rho: float


def _build_matrix(points, values, laps) -> InteractionMatrix:
    k = len(points)
    vals = np.asarray(values, dtype=float)
    if np.any(vals <= 0):
        raise NonpositiveCurvature("f must be positive at the points")
    M = np.zeros((k, k))
    for i in range(k):
        M[i, i] = laps[i] / vals[i] ** 1.5
        for j in range(i + 1, k):
            if geodesic_distance(points[i], points[j]) < 1e-9:
                raise CoincidentPoints("interaction matrix needs distinct points")
            M[i, j] = M[j, i] = -15.0 * float(green_J(points[i], points[j][None])[0]) / (vals[i] * vals[j]) ** 0.75
    return InteractionMatrix(list(points), M, float(np.linalg.eigvalsh(M)[0]))


def interaction_matrix(points, f) -> InteractionMatrix:
    """M_ii = lap_h f / f^{3/2}, M_ij = -15 J_{p_i}(p_j) / (f_i f_j)^{3/4} on S^6.

    ``f`` is an AmbientPolynomial or any object with a call operator and a
    ``laplacian_h(p)`` method.
    """
    points = [as_direction(p, tol=1e-10) for p in points]
    if not points:
        raise InvalidParameter("need at least one point")
    if points[0].size != 7:
        raise UnsupportedDimension("the interaction matrix is defined on S^6")
    lap = f.laplacian_h if hasattr(f, "laplacian_h") else (lambda p: laplacian_h(f, p))
    return _build_matrix(points, [_value(f, p) for p in points], [lap(p) for p in points])


@dataclass
class IndexResult:
    l: int
    subsets: list = field(default_factory=list)
    total: int = -1

    def to_dict(self) -> dict:
        return {"l": self.l, "subsets": self.subsets, "total": self.total}


def index_f(cs, rho_tol: float = 1e-8, max_plus: int = 20) -> IndexResult:
    """Index(f) = -1 + sum over subsets of F+ with rho > 0 of (-1)^{k-1+sum m}."""
    points = cs.points if isinstance(cs, CriticalSet) else list(cs)
    plus = sorted([c for c in points if c.lap_h > 0], key=lambda c: tuple(np.round(c.location, 9)))
    l = len(plus)
    if l > max_plus:
        raise TooManyPlusPoints(f"{l} points in F+ exceeds the cap of {max_plus}")
    res = IndexResult(l)
    total = -1
    for k in range(1, l + 1):
        for sub in itertools.combinations(range(l), k):
            cps = [plus[i] for i in sub]
            im = _build_matrix([c.location for c in cps], [c.value for c in cps], [c.lap_h for c in cps])
            if abs(im.rho) < rho_tol:
                raise RhoZero(f"rho = {im.rho:.3e} for subset {sub}")
            msum = sum(c.morse_index for c in cps)
            sign = (-1) ** (k - 1 + msum)
            counted = im.rho > 0
            if counted:
                total += sign
            res.subsets.append({"subset": list(sub), "rho": im.rho, "sign": sign, "counted": counted,
                                "matrix": im.matrix.tolist()})
    res.total = total
    return res


def condition_eight(cs):
    """(sum over lap_h > 0 critical points of (-1)^m, whether the sum differs from -1)."""
    points = cs.points if isinstance(cs, CriticalSet) else list(cs)
    s = sum((-1) ** c.morse_index for c in points if c.lap_h > 0)
    return s, s != -1


# ---------------------------------------------------------------------------
# Centroid map
# ---------------------------------------------------------------------------

class CentroidMap:
    """G((t-1)/t P) = (1/omega_n) int f(phi_{P,t}(x)) x dv on the unit ball.

    Points x are written as s P + sqrt(1-s^2) w with w in the unit sphere of
    P^perp; phi_{P,t} only moves s, so the w integral is done by a product
    rule exact for the polynomial degree of f plus one and the s integral by
    Gauss-Jacobi with ``outer`` nodes.
    """

    def __init__(self, f: AmbientPolynomial, outer: int = 384):
        self.f = f
        self.n = n = f.n
        a = (n - 2) / 2
        self.s, ws = roots_jacobi(outer, a, a)
        self.ws = ws / sphere_volume(n)
        pts, w = sphere_product_rule(n - 1, f.degree + 1)
        self.omega, self.wo = pts, w

    def at_pt(self, P, t: float) -> np.ndarray:
        if not t >= 1:
            raise InvalidParameter("t must be >= 1")
        P = np.asarray(P, dtype=float)
        E = tangent_basis(P)
        dirs = self.omega @ E.T  # (m, n+1) unit vectors orthogonal to P
        s = self.s
        y2 = t * t * (1 + s) / (1 - s)
        s2 = (y2 - 1) / (y2 + 1)
        c1 = np.sqrt(np.clip(1 - s * s, 0, None))
        c2 = np.sqrt(np.clip(1 - s2 * s2, 0, None))
        xs = s2[:, None, None] * P + c2[:, None, None] * dirs[None]
        fv = self.f(xs.reshape(-1, self.n + 1)).reshape(s.size, -1)
        inner_const = fv @ self.wo  # integral of f o phi over w
        inner_dir = np.einsum("ij,j,jk->ik", fv, self.wo, dirs)
        G = (self.ws * s) @ inner_const * P + (self.ws * c1) @ inner_dir
        return G

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        r = float(np.linalg.norm(z))
        if r >= 1:
            raise InvalidParameter("G is defined on the open unit ball")
        if r == 0:
            P = np.zeros(self.n + 1)
            P[-1] = 1.0
            return self.at_pt(P, 1.0)
        return self.at_pt(z / r, 1.0 / (1.0 - r))


def centroid_map_G(f: AmbientPolynomial, P, t: float, outer: int = 384) -> np.ndarray:
    return CentroidMap(f, outer).at_pt(as_direction(P), t)


@dataclass
class DegreeResult:
    degree: int
    zeros: list
    reliable: bool
    radius: float


def _fd_jacobian(G, z, h=1e-6):
    m = z.size
    J = np.empty((m, m))
    for j in range(m):
        e = np.zeros(m)
        e[j] = h
        J[:, j] = (G(z + e) - G(z - e)) / (2 * h)
    return J


def degree_G_estimate(f: AmbientPolynomial, t0: float, starts: int = 32, seed: int = 0, outer: int = 384,
                      tol: float = 1e-11, det_tol: float = 1e-10, boundary_margin: float = 0.05) -> DegreeResult:
    """Brouwer degree of G on the ball |z| < (t0-1)/t0 from a zero census.

    Zeros are located by Newton with a finite-difference Jacobian from
    quasi-random starts; the degree is the sum of sign(det DG).  A zero on
    the boundary raises ZeroOnBoundary, a singular one DegenerateZero, and
    zeros within ``boundary_margin`` of the boundary mark the result unreliable.
    """
    if not t0 > 1:
        raise InvalidParameter("t0 must exceed 1")
    G = CentroidMap(f, outer)
    R = (t0 - 1) / t0
    n1 = f.n + 1
    rng = np.random.default_rng(seed)
    inits = [np.zeros(n1)]
    for _ in range(starts):
        d = rng.standard_normal(n1)
        inits.append(d / np.linalg.norm(d) * R * rng.random() ** (1 / n1))
    zeros = []
    for z in inits:
        for _ in range(60):
            g = G(z)
            if np.linalg.norm(g) < tol:
                break
            step = np.linalg.lstsq(_fd_jacobian(G, z), -g, rcond=1e-12)[0]
            lim = 0.25 * R
            if np.linalg.norm(step) > lim:
                step *= lim / np.linalg.norm(step)
            z = z + step
            if np.linalg.norm(z) >= 0.999999:
                break
        else:
            g = G(z)
        if np.linalg.norm(z) >= 0.999999 or np.linalg.norm(G(z)) > 1e3 * tol:
            continue
        if np.linalg.norm(z) > R * (1 + 1e-3):
            continue
        if any(np.linalg.norm(z - y["z"]) < 1e-6 for y in zeros):
            continue
        det = float(np.linalg.det(_fd_jacobian(G, z)))
        zeros.append({"z": z, "det": det})
    reliable = True
    degree = 0
    for zz in zeros:
        r = float(np.linalg.norm(zz["z"]))
        if abs(r - R) <= 1e-3 * R:
            raise ZeroOnBoundary(f"zero of G at |z| = {r:.6g} on the boundary {R:.6g}")
        if abs(zz["det"]) < det_tol:
            raise DegenerateZero(f"zero of G with det DG = {zz['det']:.3e}")
        if r > R * (1 - boundary_margin):
            reliable = False
        degree += int(math.copysign(1, zz["det"]))
    return DegreeResult(degree, [{"z": zz["z"].tolist(), "det": zz["det"]} for zz in zeros], reliable, R)
