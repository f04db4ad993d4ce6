"""The Paneitz operator of the round sphere in spectral form, and its bubbles.

Sign convention: Delta is the geometer's Laplacian (nonnegative spectrum), so
on degree-k spherical harmonics Delta acts by lambda_k = k(k+n-1) and the
Paneitz operator P = Delta^2 + c_n Delta + d_n acts by mu_k.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import InvalidParameter, NonpositiveCurvature, SingularPoint, UnsupportedDimension
from .sphere import ZonalFunction, as_direction, conformal_factor, zonal_from_callable


@dataclass(frozen=True)
class PaneitzCoeffs:
    n: int
    c: Fraction
    d: Fraction

    @property
    def c_float(self) -> float:
        return float(self.c)

    @property
    def d_float(self) -> float:
        return float(self.d)


def _check_dim(n: int) -> int:
    if int(n) != n or n < 5:
        raise UnsupportedDimension(f"the Paneitz problem needs n >= 5, got {n}")
    return int(n)


def coeffs(n: int) -> PaneitzCoeffs:
    n = _check_dim(n)
    return PaneitzCoeffs(n, Fraction(n * n - 2 * n - 4, 2), Fraction((n - 4) * n * (n * n - 4), 16))


def q_round(n: int) -> float:
    """Q-curvature of the round sphere, n(n^2-4)/8."""
    n = _check_dim(n)
    return n * (n * n - 4) / 8


def paneitz_eigenvalue_exact(n: int, k: int) -> Fraction:
    pc = coeffs(n)
    lam = k * (k + n - 1)
    return lam * lam + pc.c * lam + pc.d


def paneitz_eigenvalue(n: int, k) -> np.ndarray | float:
    """mu_k = (k+n/2-2)(k+n/2-1)(k+n/2)(k+n/2+1); vectorised over k."""
    _check_dim(n)
    k = np.asarray(k, dtype=float)
    if np.any(k < 0):
        raise InvalidParameter("degree k must be nonnegative")
    h = n / 2
    out = (k + h - 2) * (k + h - 1) * (k + h) * (k + h + 1)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SpectralPaneitz:
    n: int
    eigen: np.ndarray

    @property
    def L(self) -> int:
        return self.eigen.size - 1


def spectral_paneitz(n: int, L: int) -> SpectralPaneitz:
    eig = paneitz_eigenvalue(n, np.arange(L + 1))
    eig = np.atleast_1d(eig)
    eig.setflags(write=False)
    return SpectralPaneitz(n, eig)


def _check_match(op: SpectralPaneitz, v: ZonalFunction):
    if op.n != v.n or op.L != v.L:
        raise InvalidParameter("operator and field have different n or L")


def apply(op: SpectralPaneitz, v: ZonalFunction) -> ZonalFunction:
    _check_match(op, v)
    return v.with_coeffs(op.eigen * v.coeffs)


def invert(op: SpectralPaneitz, g: ZonalFunction) -> ZonalFunction:
    _check_match(op, g)
    return g.with_coeffs(g.coeffs / op.eigen)


# ---------------------------------------------------------------------------
# Bubbles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SphereBubble:
    """delta_{a,lam} = |det d phi_{a,1/lam}|^{(n-4)/(2n)} on S^n."""

    a: np.ndarray
    lam: float
    n: int

    def __post_init__(self):
        if not self.lam > 0:
            raise InvalidParameter("lambda must be positive")
        a = as_direction(self.a, tol=1e-10)
        if a.size != self.n + 1:
            raise InvalidParameter("centre dimension does not match n")
        object.__setattr__(self, "a", a)

    def profile(self, t) -> np.ndarray:
        """Value as a function of t = <x, a>."""
        t = np.asarray(t, dtype=float)
        lam = self.lam
        return (2 * lam / ((1 + t) + lam * lam * (1 - t))) ** ((self.n - 4) / 2)

    def __call__(self, x) -> np.ndarray:
        return sphere_bubble_eval(self, x)

    def zonal(self, L: int, grid_size: int | None = None) -> ZonalFunction:
        return zonal_from_callable(self.profile, self.n, L, self.a, grid_size)


def sphere_bubble_eval(b: SphereBubble, x) -> np.ndarray:
    return conformal_factor(b.a, b.lam, x) ** ((b.n - 4) / (2 * b.n))


@dataclass(frozen=True)
class EuclideanBubble:
    """(1 + k|y - center|^2)^{(4-n)/2}; equals 1 at the centre."""

    n: int
    k: float
    center: np.ndarray | None = None

    def radial(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return (1 + self.k * r * r) ** ((4 - self.n) / 2)

    def __call__(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        c = np.zeros(self.n) if self.center is None else np.asarray(self.center)
        return self.radial(np.linalg.norm(y - c, axis=-1))

    def critical_f(self) -> float:
        """The constant f for which this profile solves the critical equation."""
        return 2 * self.n * (self.n + 2) * (self.n - 2) * self.k ** 2


def euclidean_bubble_from_f(n: int, f_at_p: float, center=None) -> EuclideanBubble:
    if not f_at_p > 0:
        raise NonpositiveCurvature(f"f(p) = {f_at_p} must be positive")
    k = float(np.sqrt(f_at_p / (2 * n * (n + 2) * (n - 2))))
    return EuclideanBubble(n, k, None if center is None else np.asarray(center, dtype=float))


def green_J(p0, x) -> np.ndarray:
    """J_{p0} = (1 + |y|^2) / (2|y|^2), y the chart coordinates centred at p0.

    In terms of s = <x, p0> this is 1/(1 - s): singular at p0, 1/2 at -p0.
    """
    p0 = as_direction(p0, tol=1e-10)
    s = np.asarray(x, dtype=float) @ p0
    if np.any(1.0 - s <= 1e-14):
        raise SingularPoint("J is singular at p0")
    return 1.0 / (1.0 - s)
