"""Radial finite-difference laboratory on balls and annuli in R^n.

Delta is the geometer's Laplacian, Delta u = -(u'' + (n-1) u'/r); every
serialized result carries ``laplacian_sign = "geometer"``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps
from scipy.integrate import simpson
from scipy.sparse.linalg import spsolve

from .errors import (
    GridTooCoarse,
    HypothesisViolated,
    IllConditioned,
    InvalidParameter,
    NewtonFailed,
    NonpositiveIterate,
    NotASolution,
)
from .sphere import unit_sphere_area

LAPLACIAN_SIGN = "geometer"


# ---------------------------------------------------------------------------
# Grids, stencils and fields
# ---------------------------------------------------------------------------

def fornberg_weights(z: float, x, m: int) -> np.ndarray:
    """Finite-difference weights at z for derivatives 0..m on nodes x (Fornberg's recursion).

    Returns an array of shape (m+1, len(x)).
    """
    x = np.asarray(x, dtype=float)
    N = x.size
    c = np.zeros((m + 1, N))
    c1, c4 = 1.0, x[0] - z
    c[0, 0] = 1.0
    for i in range(1, N):
        mn = min(i, m)
        c2, c5, c4 = 1.0, c4, x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[k, i] = c1 * (k * c[k - 1, i - 1] - c5 * c[k, i - 1]) / c2
                c[0, i] = -c1 * c5 * c[0, i - 1] / c2
            for k in range(mn, 0, -1):
                c[k, j] = (c4 * c[k, j] - k * c[k - 1, j]) / c3
            c[0, j] = c4 * c[0, j] / c3
        c1 = c2
    return c


@dataclass(frozen=True)
class RadialGrid:
    n: int
    r_min: float
    r_max: float
    N: int

    def __post_init__(self):
        if self.N < 9:
            raise GridTooCoarse("radial grids need at least 9 nodes")
        if not 0 <= self.r_min < self.r_max:
            raise InvalidParameter("need 0 <= r_min < r_max")

    @property
    def h(self) -> float:
        return (self.r_max - self.r_min) / (self.N - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.r_min, self.r_max, self.N)

    @property
    def has_center(self) -> bool:
        return self.r_min == 0.0


@dataclass(frozen=True)
class RadialFunction:
    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.N,) or not np.all(np.isfinite(vals)):
            raise InvalidParameter("values must be finite, one per grid node")
        object.__setattr__(self, "values", vals)

    @property
    def positive(self) -> bool:
        return bool(np.all(self.values > 0))

    @classmethod
    def sample(cls, grid: RadialGrid, func) -> "RadialFunction":
        return cls(grid, func(grid.nodes))


def _stencil(grid: RadialGrid, i: int, d: int, order: int):
    """(columns, weights) for the d-th derivative at node i."""
    N = grid.N
    half = (d + 1) // 2 + (order - 2) // 2
    offs = np.arange(i - half, i + half + 1)
    if offs[0] < 0 and grid.has_center:
        # even extension u(-r) = u(r)
        cols = np.abs(offs)
    elif offs[0] < 0:
        cols = np.arange(0, d + order)
        offs = cols
    elif offs[-1] > N - 1:
        cols = np.arange(N - d - order, N)
        offs = cols
    else:
        cols = offs
    if offs[-1] > N - 1:
        cols = np.arange(N - d - order, N)
        offs = cols
    w = fornberg_weights(i * grid.h, offs * grid.h, d)[d]
    return cols, w


def derivative_matrix(grid: RadialGrid, d: int) -> sps.csr_matrix:
    """Sparse d-th derivative on the grid, second order.

    With a centre node, stencils are fourth order on r < r_max/4: the 1/r^k
    coefficients of the radial operators would otherwise amplify the
    near-centre truncation error to O(1).
    """
    rows, cols, vals = [], [], []
    nodes = grid.nodes
    for i in range(grid.N):
        order = 4 if grid.has_center and nodes[i] < grid.r_max / 4 else 2
        c, w = _stencil(grid, i, d, order)
        rows.extend([i] * len(c))
        cols.extend(c)
        vals.extend(w)
    return sps.csr_matrix((vals, (rows, cols)), shape=(grid.N, grid.N))


def _cached_ops(grid: RadialGrid):
    return [None] + [derivative_matrix(grid, d) for d in range(1, 5)]


def bilaplacian_matrix(grid: RadialGrid) -> sps.csr_matrix:
    """Delta^2 = d4 + 2(n-1)/r d3 + (n-1)(n-3)/r^2 d2 - (n-1)(n-3)/r^3 d1; n(n+2)/3 d4 at r = 0."""
    n = grid.n
    D = _cached_ops(grid)
    r = grid.nodes
    with np.errstate(divide="ignore"):
        inv = np.where(r > 0, 1.0 / np.where(r > 0, r, 1.0), 0.0)
    k = (n - 1) * (n - 3)
    A = (D[4] + sps.diags(2 * (n - 1) * inv) @ D[3] + sps.diags(k * inv ** 2) @ D[2]
         - sps.diags(k * inv ** 3) @ D[1]).tolil()
    if grid.has_center:
        A[0, :] = n * (n + 2) / 3 * D[4][0, :].toarray()
    return A.tocsr()


def radial_bilaplacian(u: RadialFunction) -> RadialFunction:
    return RadialFunction(u.grid, bilaplacian_matrix(u.grid) @ u.values)


def radial_laplacian(u: RadialFunction) -> RadialFunction:
    g = u.grid
    D = _cached_ops(g)
    r = g.nodes
    d1, d2 = D[1] @ u.values, D[2] @ u.values
    with np.errstate(divide="ignore", invalid="ignore"):
        lap = -(d2 + (g.n - 1) * d1 / r)
    if g.has_center:
        lap[0] = -g.n * d2[0]
    return RadialFunction(g, lap)


# ---------------------------------------------------------------------------
# Analytic radial fields (exact derivatives)
# ---------------------------------------------------------------------------

class PowerSum:
    """u(r) = sum_i c_i r^{p_i} with exact derivatives."""

    def __init__(self, terms):
        self.terms = [(float(c), float(p)) for c, p in terms]

    def derivative(self, r, k: int = 0) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        for c, p in self.terms:
            coef = c
            for j in range(k):
                coef *= p - j
            if coef != 0:
                out = out + coef * r ** (p - k)
        return out

    def __call__(self, r):
        return self.derivative(r, 0)

    def bilaplacian(self, n: int) -> "PowerSum":
        return PowerSum([(c * p * (p - 2) * (p + n - 2) * (p + n - 4), p - 4) for c, p in self.terms
                         if p * (p - 2) * (p + n - 2) * (p + n - 4) != 0])


class RadialBubble:
    """height * (1 + k s^2)^{(4-n)/2} with s = height^{2/(n-4)} r, exact derivatives up to order 4."""

    def __init__(self, n: int, k: float, height: float = 1.0):
        self.n, self.k, self.height = n, k, height
        self.scale = height ** (2.0 / (n - 4))

    def derivative(self, r, order: int = 0) -> np.ndarray:
        s = self.scale * np.asarray(r, dtype=float)
        a, k = (4 - self.n) / 2, self.k
        w = 1 + k * s * s
        if order == 0:
            g = w ** a
        elif order == 1:
            g = 2 * a * k * s * w ** (a - 1)
        elif order == 2:
            g = 2 * a * k * w ** (a - 1) + 4 * a * (a - 1) * k ** 2 * s ** 2 * w ** (a - 2)
        elif order == 3:
            g = 12 * a * (a - 1) * k ** 2 * s * w ** (a - 2) + 8 * a * (a - 1) * (a - 2) * k ** 3 * s ** 3 * w ** (a - 3)
        elif order == 4:
            g = (12 * a * (a - 1) * k ** 2 * w ** (a - 2) + 48 * a * (a - 1) * (a - 2) * k ** 3 * s ** 2 * w ** (a - 3)
                 + 16 * a * (a - 1) * (a - 2) * (a - 3) * k ** 4 * s ** 4 * w ** (a - 4))
        else:
            raise InvalidParameter("derivatives up to order 4 only")
        return self.height * self.scale ** order * g

    def __call__(self, r):
        return self.derivative(r, 0)


def _jet(u, r: float, n: int):
    """(u, u', u'', Delta u, (Delta u)') at radius r > 0."""
    d = [float(np.asarray(u.derivative(np.array([r]), k))[0]) for k in range(4)]
    lap = -(d[2] + (n - 1) * d[1] / r)
    dlap = -(d[3] + (n - 1) * (d[2] / r - d[1] / r ** 2))
    return d[0], d[1], d[2], lap, dlap


def _jet_grid(u: RadialFunction, r: float):
    g = u.grid
    i = int(round((r - g.r_min) / g.h))
    if i < 0 or i >= g.N or abs(g.nodes[i] - r) > 1e-9 * max(1.0, r):
        raise InvalidParameter("radius must be a grid node")
    if r <= 0:
        raise InvalidParameter("radius must be positive")
    D = _cached_ops(g)
    d = [u.values[i]] + [float((D[k] @ u.values)[i]) for k in range(1, 4)]
    n = g.n
    lap = -(d[2] + (n - 1) * d[1] / r)
    dlap = -(d[3] + (n - 1) * (d[2] / r - d[1] / r ** 2))
    return d[0], d[1], d[2], lap, dlap


def boundary_term_terms(jet, r: float, n: int) -> np.ndarray:
    """The five summands of the radial boundary term B."""
    u, up, upp, lap, dlap = jet
    return np.array([
        -(n - 2) / 2 * lap * up,
        -(r / 2) * lap ** 2,
        (n - 4) / 2 * u * dlap,
        r * up * dlap,
        -lap * r * upp,
    ])


def boundary_term(u, r: float, n: int | None = None) -> float:
    """B at radius r for a radial field (analytic field or RadialFunction)."""
    if isinstance(u, RadialFunction):
        return float(boundary_term_terms(_jet_grid(u, r), r, u.grid.n).sum())
    return float(boundary_term_terms(_jet(u, r, n), r, n).sum())


# ---------------------------------------------------------------------------
# Pohozaev balance
# ---------------------------------------------------------------------------

class RadialCoefficient:
    """Radial f with its derivative; a float is taken as a constant."""

    def __init__(self, value, derivative=None):
        if callable(value):
            self.value = value
            self.deriv = derivative if derivative is not None else (lambda r: np.zeros_like(np.asarray(r, float)))
            self.zero = False
        else:
            c = float(value)
            self.value = lambda r, c=c: np.full_like(np.asarray(r, dtype=float), c)
            self.deriv = lambda r: np.zeros_like(np.asarray(r, dtype=float))
            self.zero = c == 0.0

    @classmethod
    def of(cls, f):
        if isinstance(f, cls):
            return f
        if isinstance(f, tuple):
            return cls(*f)
        return cls(f)


@dataclass
class PohozaevBalance:
    T1: float
    T2: float
    T3: float
    boundary: float
    residual: float
    scale: float
    r: float
    n: int
    q: float
    laplacian_sign: str = LAPLACIAN_SIGN

    @property
    def relative_residual(self) -> float:
        return abs(self.residual) / self.scale if self.scale else abs(self.residual)


def pohozaev_balance(u, f, q: float, r: float | None = None, n: int | None = None,
                     solution_tol: float = 1e-3, quad_nodes: int = 400) -> PohozaevBalance:
    """T1 + T2 - T3 - int_{dB_r} B for a radial u solving Delta^2 u = (n-4)/2 f u^q on B_r.

    u is a RadialFunction on a grid containing the centre (ball integrals
    by composite Simpson up to the node r) or an analytic field with
    ``derivative(r, k)`` (Gauss-Legendre on [0, r]).  ``scale`` is the
    largest magnitude among the four terms.
    """
    fc = RadialCoefficient.of(f)
    if isinstance(u, RadialFunction):
        n = u.grid.n
        r = u.grid.r_max if r is None else r
        jet = _jet_grid(u, r)
    else:
        if n is None or r is None:
            raise InvalidParameter("analytic fields need n and r")
        jet = _jet(u, r, n)
    w = unit_sphere_area(n)
    c = (n - 4) / (2 * (q + 1))
    if fc.zero:
        T1 = T2 = T3 = 0.0
    else:
        if isinstance(u, RadialFunction):
            s = u.grid.nodes
            mask = s <= r + 1e-12
            s, uv = s[mask], u.values[mask]
            if not u.grid.has_center:
                raise InvalidParameter("ball integrals need a grid starting at r = 0")
            i1 = simpson(s * fc.deriv(s) * uv ** (q + 1) * s ** (n - 1), x=s)
            i2 = simpson(fc.value(s) * uv ** (q + 1) * s ** (n - 1), x=s)
            _check_solution_grid(u, fc, q, solution_tol)
        else:
            x, wq = np.polynomial.legendre.leggauss(quad_nodes)
            s = 0.5 * r * (x + 1)
            wq = 0.5 * r * wq
            uv = u.derivative(s, 0)
            i1 = wq @ (s * fc.deriv(s) * uv ** (q + 1) * s ** (n - 1))
            i2 = wq @ (fc.value(s) * uv ** (q + 1) * s ** (n - 1))
        T1 = c * w * i1
        T2 = (n - 4) / 2 * (n / (q + 1) - (n - 4) / 2) * w * i2
        T3 = r * c * w * r ** (n - 1) * float(fc.value(np.array([r]))[0]) * jet[0] ** (q + 1)
    terms = boundary_term_terms(jet, r, n)
    IB = w * r ** (n - 1) * terms.sum()
    scale = max(abs(T1), abs(T2), abs(T3), abs(IB), w * r ** (n - 1) * np.abs(terms).max())
    return PohozaevBalance(T1, T2, T3, IB, T1 + T2 - T3 - IB, scale, r, n, q)


def _check_solution_grid(u: RadialFunction, fc: RadialCoefficient, q, tol):
    n = u.grid.n
    s = u.grid.nodes
    A = bilaplacian_matrix(u.grid)
    lhs = A @ u.values
    rhs = (n - 4) / 2 * fc.value(s) * u.values ** q
    inner = slice(0, u.grid.N - 3)
    denom = max(1.0, np.max(np.abs(rhs)))
    err = np.max(np.abs(lhs[inner] - rhs[inner])) / denom
    # same roundoff floor as the radial Newton solver
    floor = 1e3 * np.finfo(float).eps * float(np.max(abs(A) @ np.abs(u.values))) / denom
    if err > max(tol, floor):
        warnings.warn(f"field misses the equation by {err:.3e} (relative)", NotASolution)


# ---------------------------------------------------------------------------
# Serrin-Zou and biharmonic decomposition
# ---------------------------------------------------------------------------

@dataclass
class SerrinZouResult:
    t: np.ndarray
    margin: np.ndarray
    inf_margin: float
    passed: bool


def serrin_zou_check(y: RadialFunction, phi: RadialFunction, a: float | None = None, c0: float = 1e-6,
                     check: bool = True, tol: float = 1e-8) -> SerrinZouResult:
    """inf over (0, a) of y / (t^2 phi), with the lemma's hypotheses checked numerically.

    With ``check`` the differential inequality y'' + (n-1) y'/t + phi <= 0,
    positivity of y and monotonicity of phi >= 0 are verified at the nodes;
    failures raise HypothesisViolated.
    """
    g = y.grid
    n = g.n
    t = g.nodes
    a = g.r_max if a is None else a
    inside = (t > 0) & (t < a + 1e-12)
    if check:
        D = _cached_ops(g)
        with np.errstate(divide="ignore", invalid="ignore"):
            lhs = D[2] @ y.values + (n - 1) * (D[1] @ y.values) / t + phi.values
        scale = max(1.0, float(np.max(np.abs(phi.values))))
        bad = inside & (lhs > tol * scale)
        if np.any(bad):
            raise HypothesisViolated(f"differential inequality fails at t = {t[bad][0]:.6g}")
        if np.any(y.values[inside] <= 0):
            raise HypothesisViolated("y must be positive")
        if np.any(phi.values[inside] < -tol) or np.any(np.diff(phi.values[inside]) > tol * scale):
            raise HypothesisViolated("phi must be nonnegative and non-increasing")
    ph = phi.values[inside]
    tt = t[inside]
    with np.errstate(divide="ignore", invalid="ignore"):
        margin = np.where(ph > 0, y.values[inside] / (tt ** 2 * ph), np.inf)
    inf_m = float(np.min(margin)) if margin.size else float("inf")
    return SerrinZouResult(tt, margin, inf_m, inf_m >= c0)


@dataclass
class BiharmonicFit:
    a1: float
    a2: float
    b: float
    residual: float
    nonnegative: bool


def biharmonic_fit(u: RadialFunction, r_in: float | None = None, r_out: float | None = None) -> BiharmonicFit:
    """Least squares of u against r^{4-n}, r^{2-n} and a constant on [r_in, r_out]."""
    g = u.grid
    n = g.n
    r = g.nodes
    r_in = max(r_in or g.r_min, 1e-300)
    r_out = r_out or g.r_max
    if r_out / r_in < 2:
        raise IllConditioned("annulus too thin: need r_out / r_in >= 2")
    m = (r >= r_in - 1e-12) & (r <= r_out + 1e-12) & (r > 0)
    X = np.column_stack([r[m] ** (4 - n), r[m] ** (2 - n), np.ones(m.sum())])
    # column scaling keeps the normal equations well balanced
    sc = np.linalg.norm(X, axis=0)
    coef, *_ = np.linalg.lstsq(X / sc, u.values[m], rcond=None)
    coef = coef / sc
    res = float(np.linalg.norm(X @ coef - u.values[m]) / max(np.linalg.norm(u.values[m]), 1e-300))
    return BiharmonicFit(float(coef[0]), float(coef[1]), float(coef[2]), res,
                         bool(coef[0] >= -1e-10 and coef[1] >= -1e-10))


# ---------------------------------------------------------------------------
# Radial solver
# ---------------------------------------------------------------------------

def radial_solve(n: int, f, q: float, radius: float, bc: dict, N: int = 401, u0=None,
                 tol: float = 1e-10, max_iter: int = 60) -> RadialFunction:
    """Damped Newton for Delta^2 u = (n-4)/2 f u^q on B_radius.

    ``bc`` is {"kind": "dirichlet", "u": .., "du": ..} (value and radial
    derivative) or {"kind": "navier", "u": .., "lap": ..} (value and the
    geometer Laplacian).  The centre carries the even regularity conditions.
    Convergence is measured as max |F| / max(1, max |rhs|).
    """
    grid = RadialGrid(n, 0.0, radius, N)
    fc = RadialCoefficient.of(f)
    r = grid.nodes
    fv = fc.value(r)
    A = bilaplacian_matrix(grid).tolil()
    D = _cached_ops(grid)
    kind = bc.get("kind")
    if kind == "dirichlet":
        second = D[1][N - 1, :].toarray().ravel()
        g1 = float(bc["du"])
    elif kind == "navier":
        second = -(D[2][N - 1, :].toarray().ravel() + (n - 1) / radius * D[1][N - 1, :].toarray().ravel())
        g1 = float(bc["lap"])
    else:
        raise InvalidParameter("bc kind must be 'dirichlet' or 'navier'")
    g0 = float(bc["u"])
    A[N - 2, :] = 0.0
    A[N - 2, N - 1] = 1.0
    A[N - 1, :] = second
    A = A.tocsr()
    pde = np.ones(N, dtype=bool)
    pde[N - 2:] = False
    rhs_bc = np.zeros(N)
    rhs_bc[N - 2], rhs_bc[N - 1] = g0, g1
    c = (n - 4) / 2

    def F(u):
        out = A @ u - rhs_bc
        out[pde] -= c * fv[pde] * u[pde] ** q
        return out

    if u0 is not None:
        guesses = [np.asarray(u0(r) if callable(u0) else u0, dtype=float).copy()]
    else:
        guesses = _default_guesses(A, pde, rhs_bc, fv, c, q, r, n)
    err = None
    for u in guesses:
        try:
            u = _radial_newton(F, A, pde, fv, c, q, u, tol, max_iter)
            return RadialFunction(grid, u)
        except (NewtonFailed, NonpositiveIterate) as exc:
            err = exc
    raise err


def _radial_newton(F, A, pde, fv, c, q, u, tol, max_iter):
    if np.any(u[:-1] <= 0):
        raise NonpositiveIterate("initial guess must be positive")
    scale = max(1.0, float(np.max(np.abs(c * fv * u ** q))))
    # the h^-4 stencils put a roundoff floor under the attainable residual
    floor = 1e3 * np.finfo(float).eps * float(np.max(abs(A) @ np.abs(u))) / scale
    res = F(u)
    norm = float(np.max(np.abs(res))) / scale
    it = 0
    while norm > tol:
        if it >= max_iter:
            raise NewtonFailed(f"radial Newton did not converge (residual {norm:.3e})")
        d = np.where(pde, c * q * fv * u ** (q - 1), 0.0)
        J = (A - sps.diags(d)).tocsc()
        step = spsolve(J, -res)
        alpha = 1.0
        while True:
            trial = u + alpha * step
            if np.all(trial[:-1] > 0):
                rt = F(trial)
                nt = float(np.max(np.abs(rt))) / scale
                if nt < norm:
                    u, res, norm = trial, rt, nt
                    break
            alpha *= 0.5
            if alpha < 2.0 ** -20:
                if norm <= floor:
                    # stalled at roundoff: accept
                    return u
                if np.all((u + step)[:-1] > 0):
                    raise NewtonFailed(f"radial line search stalled at {norm:.3e}")
                raise NonpositiveIterate("damping floor reached without a positive iterate")
        it += 1
    return u


def _default_guesses(A, pde, rhs_bc, fv, c, q, r, n):
    """Biharmonic extension of the boundary data, then that plus a scaled torsion-like profile."""
    lin = spsolve(A.tocsc(), rhs_bc)
    phi = spsolve(A.tocsc(), np.where(pde, 1.0, 0.0))
    w = r ** (n - 1)
    num = simpson(phi * w, x=r)
    den = simpson(c * np.mean(fv) * np.abs(phi) ** (q + 1) * w, x=r)
    amp = (num / den) ** (1.0 / (q - 1)) if q != 1 and den > 0 and num > 0 else 1.0
    out = [g for g in (lin, lin + amp * phi) if np.all(g[:-1] > 0)]
    return out or [np.maximum(lin + amp * phi, 1e-3)]
