"""Geometry of the round sphere S^n in R^{n+1} and its zonal function basis.

Points of S^n are plain numpy arrays of length n+1.  Stereographic charts
are centred at their pole: the projection is taken through the antipode of
the pole, so the pole maps to the origin and |y| = 1 is the equator.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, roots_jacobi

from .errors import AntipodalPole, GridTooSmall, InvalidParameter, ParseError

UNIT_TOL = 1e-12


# ---------------------------------------------------------------------------
# Points and charts
# ---------------------------------------------------------------------------

def as_direction(x, tol: float = UNIT_TOL) -> np.ndarray:
    """Return ``x`` as a float array, checking that it lies on the unit sphere."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise InvalidParameter("a direction must be a 1-d vector of length >= 2")
    if abs(x @ x - 1.0) > tol:
        raise InvalidParameter(f"|x|^2 = {x @ x!r} is not 1 within {tol}")
    return x


def north_pole(n: int) -> np.ndarray:
    """The point e_{n+1} of S^n (the last ambient coordinate)."""
    e = np.zeros(n + 1)
    e[-1] = 1.0
    return e


def geodesic_distance(x, y) -> np.ndarray:
    c = np.sum(np.asarray(x) * np.asarray(y), axis=-1)
    return np.arccos(np.clip(c, -1.0, 1.0))


def tangent_basis(p) -> np.ndarray:
    """Orthonormal basis of the tangent space p^perp, as columns of an (n+1, n) array."""
    p = np.asarray(p, dtype=float)
    m = p.size
    q, _ = np.linalg.qr(np.column_stack([p, np.eye(m)]))
    return q[:, 1:m]


def random_directions(n: int, count: int, rng) -> np.ndarray:
    """``count`` independent uniform points on S^n."""
    g = rng.standard_normal((count, n + 1))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


@dataclass(frozen=True)
class StereoChart:
    """Stereographic chart of S^n centred at ``pole`` (pole -> 0, -pole -> infinity)."""

    pole: np.ndarray
    basis: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.pole.size - 1


def chart(pole) -> StereoChart:
    pole = as_direction(pole)
    return StereoChart(pole=pole, basis=tangent_basis(pole))


def stereo_project(ch: StereoChart, x) -> np.ndarray:
    """Chart coordinates y in R^n of point(s) x; x may be (n+1,) or (m, n+1)."""
    x = np.asarray(x, dtype=float)
    s = x @ ch.pole
    denom = 1.0 + s
    if np.any(denom <= 1e-15):
        raise AntipodalPole("the antipode of the chart pole has no finite image")
    return (x @ ch.basis) / np.expand_dims(denom, -1)


def stereo_inverse(ch: StereoChart, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    r2 = np.sum(y * y, axis=-1)
    r2e = np.expand_dims(r2, -1)
    return ((1.0 - r2e) * ch.pole + 2.0 * (y @ ch.basis.T)) / (1.0 + r2e)


def chart_radius(t) -> np.ndarray:
    """|y| in the chart centred at the pole for a point with <x, pole> = t."""
    t = np.asarray(t, dtype=float)
    return np.sqrt(np.clip(1.0 - t, 0.0, None) / np.clip(1.0 + t, 1e-300, None))


def pole_cosine(r) -> np.ndarray:
    """Inverse of :func:`chart_radius`: <x, pole> for chart radius r."""
    r2 = np.asarray(r, dtype=float) ** 2
    return (1.0 - r2) / (1.0 + r2)


def _dilate(center, s: float, x) -> np.ndarray:
    """Dilation y -> s*y in the chart centred at ``center``; any s > 0."""
    x = np.asarray(x, dtype=float)
    c = np.asarray(center, dtype=float)
    sc = x @ c
    scx = np.expand_dims(sc, -1)
    w = x - scx * c
    a = 1.0 + scx
    b = s * s * (1.0 - scx)
    return ((a - b) * c + 2.0 * s * w) / (a + b)


def conformal_map(P, t: float, x) -> np.ndarray:
    """phi_{P,t}: dilation by t in stereographic coordinates projected through P.

    P sits at infinity of that chart, so for t > 1 points are pushed towards P;
    P and -P are fixed and phi_{P,1} is the identity.
    """
    if not t >= 1.0:
        raise InvalidParameter(f"dilation parameter t = {t!r} must be >= 1")
    P = as_direction(P)
    x = np.asarray(x, dtype=float)
    norms = np.sum(x * x, axis=-1)
    if np.any(np.abs(norms - 1.0) > UNIT_TOL):
        raise InvalidParameter("x must lie on the unit sphere")
    return _dilate(-P, t, x)


def conformal_factor(a, lam: float, x) -> np.ndarray:
    """|det d phi_{a, 1/lam}| at x, i.e. (lam (1+|y|^2) / (1 + lam^2 |y|^2))^n.

    y are the chart coordinates centred at ``a``; written in t = <x, a> so that
    the antipode of ``a`` is handled without passing through infinity.
    """
    if not lam > 0:
        raise InvalidParameter("lambda must be positive")
    a = np.asarray(a, dtype=float)
    n = a.size - 1
    t = np.asarray(x, dtype=float) @ a
    return (2.0 * lam / ((1.0 + t) + lam * lam * (1.0 - t))) ** n


# ---------------------------------------------------------------------------
# Volumes and exact integrals
# ---------------------------------------------------------------------------

def sphere_volume(n: int) -> float:
    """Volume of the unit sphere S^n in R^{n+1}."""
    if n < 1:
        raise InvalidParameter("n must be >= 1")
    return 2.0 * math.pi ** ((n + 1) / 2) / math.gamma((n + 1) / 2)


def unit_sphere_area(m: int) -> float:
    """Area of the unit sphere in R^m (that is, of S^{m-1})."""
    if m < 2:
        raise InvalidParameter("m must be >= 2")
    return 2.0 * math.pi ** (m / 2) / math.gamma(m / 2)


def integrate_monomial(n: int, alpha) -> float:
    """Exact value of the integral of x^alpha over S^n."""
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != n + 1 or any(a < 0 for a in alpha):
        raise InvalidParameter(f"exponent tuple must have {n + 1} nonnegative entries")
    if any(a % 2 for a in alpha):
        return 0.0
    b = [(a + 1) / 2 for a in alpha]
    return 2.0 * math.exp(sum(math.lgamma(v) for v in b) - math.lgamma(sum(b)))


# ---------------------------------------------------------------------------
# Ambient polynomials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AmbientPolynomial:
    """Polynomial in the ambient coordinates x_1..x_{n+1}, restricted to S^n."""

    n: int
    terms: dict

    def __post_init__(self):
        clean = {}
        for alpha, c in self.terms.items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != self.n + 1 or any(a < 0 for a in alpha):
                raise InvalidParameter(f"bad exponent tuple {alpha} for n = {self.n}")
            if c != 0:
                clean[alpha] = clean.get(alpha, 0.0) + float(c)
        object.__setattr__(self, "terms", clean)

    @property
    def degree(self) -> int:
        return max((sum(a) for a in self.terms), default=0)

    def _arrays(self):
        if not self.terms:
            return np.zeros((0, self.n + 1), dtype=int), np.zeros(0)
        alphas = np.array(list(self.terms.keys()), dtype=int)
        coeffs = np.array(list(self.terms.values()), dtype=float)
        return alphas, coeffs

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        alphas, coeffs = self._arrays()
        if coeffs.size == 0:
            return np.zeros(x.shape[:-1])
        mons = np.prod(x[..., None, :] ** alphas, axis=-1)
        return mons @ coeffs

    def gradient(self, x) -> np.ndarray:
        """Ambient (Euclidean) gradient, shape (..., n+1)."""
        x = np.asarray(x, dtype=float)
        alphas, coeffs = self._arrays()
        out = np.zeros(x.shape)
        for i in range(self.n + 1):
            for alpha, c in zip(alphas, coeffs):
                if alpha[i] == 0:
                    continue
                beta = alpha.copy()
                beta[i] -= 1
                out[..., i] += c * alpha[i] * np.prod(x ** beta, axis=-1)
        return out

    def hessian(self, x) -> np.ndarray:
        """Ambient Hessian at a single point, shape (n+1, n+1)."""
        x = np.asarray(x, dtype=float)
        alphas, coeffs = self._arrays()
        m = self.n + 1
        out = np.zeros((m, m))
        for alpha, c in zip(alphas, coeffs):
            for i in range(m):
                for j in range(m):
                    beta = alpha.copy()
                    f = c * beta[i]
                    beta[i] -= 1
                    if f == 0:
                        continue
                    f *= beta[j]
                    beta[j] -= 1
                    if f == 0:
                        continue
                    out[i, j] += f * np.prod(x ** beta)
        return out

    def integral(self) -> float:
        return sum(c * integrate_monomial(self.n, a) for a, c in self.terms.items())

    def scaled(self, factor: float) -> "AmbientPolynomial":
        return AmbientPolynomial(self.n, {a: factor * c for a, c in self.terms.items()})

    def to_text(self) -> str:
        lines = []
        for alpha, c in sorted(self.terms.items()):
            lines.append(" ".join([repr(c)] + [str(a) for a in alpha]))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, n: int | None = None) -> "AmbientPolynomial":
        """Parse one term per line, ``c a0 a1 ... an``; '#' starts a comment."""
        terms = {}
        width = None if n is None else n + 1
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                c = float(parts[0])
                alpha = tuple(int(p) for p in parts[1:])
            except ValueError as exc:
                raise ParseError(f"cannot parse polynomial term {raw.strip()!r}", lineno) from exc
            if width is None:
                width = len(alpha)
            if len(alpha) != width or width < 2 or any(a < 0 for a in alpha):
                raise ParseError(f"expected {width} nonnegative exponents, got {raw.strip()!r}", lineno)
            terms[alpha] = terms.get(alpha, 0.0) + c
        if width is None:
            raise ParseError("polynomial has no terms")
        return cls(width - 1, terms)


def coordinate_polynomial(n: int, index: int, scale: float = 1.0, shift: float = 0.0) -> AmbientPolynomial:
    """``scale * x_index + shift`` on S^n (0-based index)."""
    alpha = [0] * (n + 1)
    alpha[index] = 1
    terms = {tuple(alpha): scale}
    if shift:
        terms[tuple([0] * (n + 1))] = shift
    return AmbientPolynomial(n, terms)


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CollocationGrid:
    """Gauss nodes in t = <x, axis> for the zonal measure on S^n.

    Weights integrate against omega_{n-1} (1 - t^2)^{(n-2)/2} dt, so they sum
    to vol(S^n), and the rule is exact for polynomials in t of degree
    2*size - 1.
    """

    n: int
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def size(self) -> int:
        return self.nodes.size


@lru_cache(maxsize=32)
def _grid_arrays(n: int, size: int):
    a = (n - 2) / 2
    t, w = roots_jacobi(size, a, a)
    w = w * unit_sphere_area(n)
    t.setflags(write=False)
    w.setflags(write=False)
    return t, w


def collocation_grid(n: int, size: int) -> CollocationGrid:
    if n < 2:
        raise InvalidParameter("zonal grids need n >= 2")
    if size < 1:
        raise GridTooSmall("grid needs at least one node")
    t, w = _grid_arrays(int(n), int(size))
    return CollocationGrid(n=int(n), nodes=t, weights=w)


def sphere_product_rule(m: int, degree: int):
    """Product quadrature on S^m exact for ambient polynomials up to ``degree``.

    Returns (points of shape (N, m+1), weights summing to vol(S^m)).
    """
    if m == 1:
        k = degree + 1
        th = 2 * np.pi * np.arange(k) / k
        return np.column_stack([np.cos(th), np.sin(th)]), np.full(k, 2 * np.pi / k)
    inner_pts, inner_w = sphere_product_rule(m - 1, degree)
    a = (m - 2) / 2
    s, ws = roots_jacobi(max(1, (degree + 2) // 2), a, a)
    rad = np.sqrt(1.0 - s * s)
    pts = np.concatenate(
        [np.column_stack([r * inner_pts, np.full(len(inner_pts), si)]) for si, r in zip(s, rad)]
    )
    w = np.concatenate([wi * inner_w for wi in ws])
    return pts, w


# ---------------------------------------------------------------------------
# Zonal basis
# ---------------------------------------------------------------------------

def _log_gegenbauer_norm(n: int, k: np.ndarray) -> np.ndarray:
    """log of sqrt(omega_{n-1} * int C_k^lam(t)^2 (1-t^2)^{lam-1/2} dt), lam = (n-1)/2."""
    lam = (n - 1) / 2
    k = np.asarray(k, dtype=float)
    log_h = (
        math.log(math.pi) + (1 - 2 * lam) * math.log(2.0) + gammaln(k + 2 * lam)
        - gammaln(k + 1) - np.log(k + lam) - 2 * gammaln(lam)
    )
    return 0.5 * (log_h + math.log(unit_sphere_area(n)))


def zonal_basis(n: int, L: int, t, derivatives: int = 0):
    """L2(S^n)-orthonormal zonal harmonics Y_0..Y_L evaluated at t.

    Y_k is the Gegenbauer polynomial C_k^{(n-1)/2} divided by its norm.  With
    ``derivatives`` = 1 or 2 also returns d/dt (and d^2/dt^2) of the basis.
    Arrays have shape (len(t), L+1).
    """
    if n < 2:
        raise InvalidParameter("zonal basis needs n >= 2")
    t = np.atleast_1d(np.asarray(t, dtype=float))
    lam = (n - 1) / 2
    ks = np.arange(L + 2)
    log_norm = _log_gegenbauer_norm(n, ks)
    # p_{k+1} = (A_k t p_k - B_k p_{k-1}) in normalised form
    A = 2 * (ks[:-1] + lam) / (ks[:-1] + 1) * np.exp(log_norm[:-1] - log_norm[1:])
    B = np.zeros(L + 1)
    B[1:] = (ks[1:-1] + 2 * lam - 1) / (ks[1:-1] + 1) * np.exp(log_norm[:-2] - log_norm[2:])
    P = np.empty((t.size, L + 1))
    P[:, 0] = np.exp(-log_norm[0])
    d1 = np.zeros_like(P) if derivatives >= 1 else None
    d2 = np.zeros_like(P) if derivatives >= 2 else None
    for k in range(L):
        nxt = A[k] * t * P[:, k]
        if k > 0:
            nxt -= B[k] * P[:, k - 1]
        P[:, k + 1] = nxt
        if d1 is not None:
            dn = A[k] * (P[:, k] + t * d1[:, k])
            if k > 0:
                dn -= B[k] * d1[:, k - 1]
            d1[:, k + 1] = dn
        if d2 is not None:
            dd = A[k] * (2 * d1[:, k] + t * d2[:, k])
            if k > 0:
                dd -= B[k] * d2[:, k - 1]
            d2[:, k + 1] = dd
    if derivatives == 0:
        return P
    if derivatives == 1:
        return P, d1
    return P, d1, d2


@lru_cache(maxsize=32)
def _grid_basis(n: int, L: int, size: int) -> np.ndarray:
    grid = collocation_grid(n, size)
    B = zonal_basis(n, L, grid.nodes)
    B.setflags(write=False)
    return B


@dataclass(frozen=True)
class ZonalFunction:
    """Axisymmetric function sum_k c_k Y_k(<x, axis>) on S^n."""

    axis: np.ndarray
    n: int
    coeffs: np.ndarray

    def __post_init__(self):
        axis = as_direction(self.axis, tol=1e-10)
        coeffs = np.array(self.coeffs, dtype=float)
        if axis.size != self.n + 1:
            raise InvalidParameter("axis dimension does not match n")
        axis.setflags(write=False)
        coeffs.setflags(write=False)
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def L(self) -> int:
        return self.coeffs.size - 1

    def __call__(self, t) -> np.ndarray:
        """Values as a function of t = <x, axis>."""
        t = np.asarray(t, dtype=float)
        out = zonal_basis(self.n, self.L, t.ravel()) @ self.coeffs
        return out.reshape(t.shape)

    def at(self, x) -> np.ndarray:
        """Values at points x of S^n."""
        return self(np.asarray(x, dtype=float) @ self.axis)

    def derivative(self, t, order: int = 1) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        basis = zonal_basis(self.n, self.L, t.ravel(), derivatives=order)
        return (basis[order] @ self.coeffs).reshape(t.shape)

    def laplacian_h(self, t) -> np.ndarray:
        """Geometer's (nonnegative) Laplacian of the field, as a function of t."""
        t = np.asarray(t, dtype=float)
        _, d1, d2 = zonal_basis(self.n, self.L, t.ravel(), derivatives=2)
        tt = t.ravel()
        val = -((1 - tt * tt) * (d2 @ self.coeffs) - self.n * tt * (d1 @ self.coeffs))
        return val.reshape(t.shape)

    def with_coeffs(self, coeffs) -> "ZonalFunction":
        return ZonalFunction(self.axis, self.n, coeffs)

    def truncated(self, L: int) -> "ZonalFunction":
        c = np.zeros(L + 1)
        m = min(L, self.L) + 1
        c[:m] = self.coeffs[:m]
        return self.with_coeffs(c)

    def norm(self) -> float:
        """L2(S^n) norm (Parseval)."""
        return float(np.linalg.norm(self.coeffs))

    def to_dict(self) -> dict:
        return {"n": self.n, "axis": self.axis.tolist(), "coeffs": self.coeffs.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "ZonalFunction":
        return cls(np.asarray(d["axis"], dtype=float), int(d["n"]), np.asarray(d["coeffs"], dtype=float))

    @classmethod
    def from_json(cls, text: str) -> "ZonalFunction":
        return cls.from_dict(json.loads(text))


def analysis(samples, grid: CollocationGrid, L: int, axis=None) -> ZonalFunction:
    """Zonal coefficients c_0..c_L of grid samples by Gauss quadrature."""
    if grid.size < L + 1:
        raise GridTooSmall(f"grid of size {grid.size} cannot resolve degree {L}")
    samples = np.asarray(samples, dtype=float)
    if samples.shape != (grid.size,):
        raise InvalidParameter("samples must have one value per grid node")
    B = _grid_basis(grid.n, L, grid.size)
    coeffs = B.T @ (grid.weights * samples)
    if axis is None:
        axis = north_pole(grid.n)
    return ZonalFunction(np.asarray(axis, dtype=float), grid.n, coeffs)


def synthesis(zf: ZonalFunction, grid: CollocationGrid) -> np.ndarray:
    if grid.n != zf.n:
        raise InvalidParameter("grid and function dimensions differ")
    return _grid_basis(zf.n, zf.L, grid.size) @ zf.coeffs


def zonal_from_callable(func, n: int, L: int, axis=None, grid_size: int | None = None) -> ZonalFunction:
    """Project a function of t = <x, axis> onto zonal harmonics of degree <= L."""
    grid = collocation_grid(n, grid_size or 4 * L + 1)
    return analysis(func(grid.nodes), grid, L, axis)


def zonal_from_polynomial(poly: AmbientPolynomial, L: int, axis=None, tol: float = 1e-9) -> ZonalFunction:
    """Zonal representation of an ambient polynomial that is invariant about ``axis``.

    Invariance is checked by evaluating on several meridians; a non-zonal
    polynomial raises InvalidParameter.
    """
    n = poly.n
    axis = north_pole(n) if axis is None else as_direction(axis)
    E = tangent_basis(axis)
    grid = collocation_grid(n, max(4 * L + 1, poly.degree + 1))
    t = grid.nodes
    rad = np.sqrt(1.0 - t * t)
    rng = np.random.default_rng(12345)
    dirs = rng.standard_normal((4, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    vals = [poly(np.outer(t, axis) + np.outer(rad, E @ d)) for d in dirs]
    scale = max(1.0, float(np.max(np.abs(vals[0]))))
    if any(np.max(np.abs(v - vals[0])) > tol * scale for v in vals[1:]):
        raise InvalidParameter("polynomial is not zonal about the given axis")
    return analysis(vals[0], grid, L, axis)
