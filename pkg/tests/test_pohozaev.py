import math
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcurv.errors import GridTooCoarse, HypothesisViolated, IllConditioned
from qcurv.pohozaev import (
    LAPLACIAN_SIGN,
    NotASolution,
    PowerSum,
    RadialBubble,
    RadialFunction,
    RadialGrid,
    biharmonic_fit,
    boundary_term,
    fornberg_weights,
    pohozaev_balance,
    radial_bilaplacian,
    radial_laplacian,
    radial_solve,
    serrin_zou_check,
)
from qcurv.solver import critical_exponent
from qcurv.sphere import unit_sphere_area


def bubble_f(n, k):
    return 2 * n * (n + 2) * (n - 2) * k * k


def sample(n, r_min, r_max, N, func):
    return RadialFunction.sample(RadialGrid(n, r_min, r_max, N), func)


# --- stencils and operators --------------------------------------------------------

def test_fornberg_weights_classic():
    w = fornberg_weights(0.0, np.array([-1.0, 0.0, 1.0]), 2)
    assert np.allclose(w[1], [-0.5, 0.0, 0.5])
    assert np.allclose(w[2], [1.0, -2.0, 1.0])


def test_grid_too_coarse():
    with pytest.raises(GridTooCoarse):
        RadialGrid(5, 0.0, 1.0, 5)


def test_laplacian_of_r_squared():
    u = sample(6, 0.0, 1.0, 101, lambda r: r * r)
    assert LAPLACIAN_SIGN == "geometer"
    assert np.allclose(radial_laplacian(u).values, -12.0, atol=1e-8)
    assert np.max(np.abs(radial_bilaplacian(u).values)) < 1e-5


@pytest.mark.parametrize("n", [5, 6, 7])
def test_bilaplacian_of_bubble_converges_at_order_two(n):
    k = 0.25
    f = bubble_f(n, k)
    q = critical_exponent(n)
    b = RadialBubble(n, k)
    errs = []
    for N in (101, 201, 401):
        u = sample(n, 0.0, 2.0, N, b)
        res = radial_bilaplacian(u).values - (n - 4) / 2 * f * u.values ** q
        errs.append(np.max(np.abs(res)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(orders - 2.0) < 0.1)


def test_bilaplacian_of_power_on_annulus_converges():
    n = 5
    u_exact = PowerSum([(1.0, -2.0)])
    lap2 = u_exact.bilaplacian(n)
    errs = []
    for N in (201, 401, 801):
        u = sample(n, 0.5, 2.0, N, u_exact)
        errs.append(np.max(np.abs(radial_bilaplacian(u).values - lap2(u.grid.nodes))))
    order = math.log2(errs[1] / errs[2])
    assert order == pytest.approx(2.0, abs=0.2)


def test_power_sum_bilaplacian_formula():
    n = 6
    u = PowerSum([(2.0, 3.0), (1.0, 6.0)])
    r = np.linspace(0.5, 2, 7)
    h = 1e-3
    d1 = lambda g, r: (g(r + h) - g(r - h)) / (2 * h)
    d2 = lambda g, r: (g(r + h) - 2 * g(r) + g(r - h)) / h ** 2
    lap = lambda g: (lambda r: -(d2(g, r) + (n - 1) / r * d1(g, r)))
    fd = lap(lap(u))(r)
    assert np.allclose(u.bilaplacian(n)(r), fd, rtol=1e-3)


# --- boundary term -----------------------------------------------------------------

@pytest.mark.parametrize("n", [5, 6, 7, 8])
def test_boundary_term_vanishes_for_fundamental_solution(n):
    u = PowerSum([(1.0, 4.0 - n)])
    for r in (1e-3, 0.1, 1.0, 7.0):
        B = boundary_term(u, r, n)
        scale = r ** (5 - 2 * n)  # size of the individual summands
        assert abs(B) / scale < 1e-10


@pytest.mark.parametrize("n,A", [(5, 1.0), (5, 2.0), (5, 10.0), (6, 1.0), (6, 2.0), (6, 10.0)])
def test_boundary_limit_with_constant(n, A):
    u = PowerSum([(1.0, 4.0 - n), (A, 0.0)])
    r = 1e-3
    integral = unit_sphere_area(n) * r ** (n - 1) * boundary_term(u, r, n)
    target = -(n - 4) ** 2 * (n - 2) * unit_sphere_area(n) * A
    assert integral == pytest.approx(target, rel=1e-2)
    if (n, A) == (5, 1.0):
        assert target == pytest.approx(-8 * math.pi ** 2)


# --- Pohozaev balance ----------------------------------------------------------------

@pytest.mark.parametrize("n", [5, 6])
def test_balance_exact_bubble_analytic(n):
    k = 0.25
    b = RadialBubble(n, k, 3.0)
    bal = pohozaev_balance(b, bubble_f(n, k), critical_exponent(n), 1.5, n)
    assert bal.T2 == pytest.approx(0.0, abs=1e-12)  # critical exponent kills T2
    assert bal.relative_residual < 1e-12


def test_balance_with_variable_f_and_subcritical_q():
    # manufactured: f is defined so that u solves the equation exactly
    n, q = 5, 2.0
    u = PowerSum([(2.0, 0.0), (-0.1, 2.0), (0.01, 4.0)])
    lap2 = u.bilaplacian(n)
    c = (n - 4) / 2
    f = lambda r: lap2(r) / (c * u(r) ** q)
    h = 1e-6
    df = lambda r: (f(r + h) - f(r - h)) / (2 * h)
    bal = pohozaev_balance(u, (f, df), q, 1.0, n)
    assert bal.relative_residual < 1e-8


def test_balance_on_grid_converges():
    n, k = 6, 0.25
    f, q = bubble_f(n, k), critical_exponent(n)
    res = []
    for N in (201, 401, 801):
        u = sample(n, 0.0, 1.5, N, RadialBubble(n, k))
        res.append(pohozaev_balance(u, f, q).relative_residual)
    orders = np.log2(np.array(res[:-1]) / np.array(res[1:]))
    assert np.all(orders > 1.9)


def test_balance_at_fine_grid():
    n, k = 6, 0.25
    u = sample(n, 0.0, 1.5, 1501, RadialBubble(n, k))
    assert u.grid.h == pytest.approx(1e-3)
    bal = pohozaev_balance(u, bubble_f(n, k), critical_exponent(n))
    assert bal.relative_residual < 1e-6


def test_balance_warns_for_non_solution():
    u = sample(6, 0.0, 1.0, 101, lambda r: 1 + r * r)
    with pytest.warns(NotASolution):
        pohozaev_balance(u, 24.0, 2.0)


# --- Serrin-Zou ----------------------------------------------------------------------

def admissible_instance(rng, n, a, N=401):
    """phi a nonnegative non-increasing polynomial, y the radial solution of
    y'' + (n-1)/t y' = -(phi + g) with g >= 0 constant, shifted to stay positive."""
    m = int(rng.integers(1, 4))
    # phi(t) = b0 + sum_j b_j (1 - t/a)^j in monomials
    b = rng.uniform(0, 2, m + 1)
    phi = np.polynomial.Polynomial([b[0]])
    base = np.polynomial.Polynomial([1.0, -1.0 / a])
    for j in range(1, m + 1):
        phi = phi + b[j] * base ** j
    g = rng.uniform(0.05, 1.0)
    src = phi + g
    y = np.polynomial.Polynomial([0.0])
    for j, cj in enumerate(src.coef):
        y = y - np.polynomial.Polynomial([0.0] * (j + 2) + [cj / ((j + 2) * (j + n))])
    grid = RadialGrid(n, 0.0, a, N)
    t = grid.nodes
    y0 = -np.min(y(t)) + rng.uniform(0.1, 2.0)
    return RadialFunction(grid, y(t) + y0), RadialFunction(grid, phi(t))


@pytest.mark.parametrize("seed", range(5))
def test_serrin_zou_random_admissible(seed):
    rng = np.random.default_rng(seed)
    for _ in range(10):
        n = int(rng.integers(5, 8))
        y, phi = admissible_instance(rng, n, float(rng.uniform(0.5, 3.0)))
        res = serrin_zou_check(y, phi)
        assert res.passed and res.inf_margin > 0


def test_serrin_zou_equality_case():
    n, y0 = 5, 1.0
    a = 0.9 * math.sqrt(2 * n * y0)
    grid = RadialGrid(n, 0.0, a, 401)
    y = RadialFunction(grid, y0 - grid.nodes ** 2 / (2 * n))
    phi = RadialFunction(grid, np.ones(grid.N))
    res = serrin_zou_check(y, phi)
    assert res.passed
    t = res.t
    assert np.allclose(res.margin, (y0 - t ** 2 / (2 * n)) / t ** 2)


def test_serrin_zou_vacuous_when_phi_zero():
    grid = RadialGrid(5, 0.0, 1.0, 101)
    res = serrin_zou_check(RadialFunction(grid, np.ones(101)), RadialFunction(grid, np.zeros(101)))
    assert res.passed and res.inf_margin == math.inf


def test_serrin_zou_constructed_example_violates_hypothesis():
    # y = t^2 (1+t) phi with phi = 1 is subharmonic, so the lemma's hypothesis fails
    grid = RadialGrid(5, 0.0, 1.0, 201)
    t = grid.nodes
    y = RadialFunction(grid, t ** 2 * (1 + t))
    phi = RadialFunction(grid, np.ones(grid.N))
    with pytest.raises(HypothesisViolated):
        serrin_zou_check(y, phi)
    res = serrin_zou_check(y, phi, check=False)
    assert res.inf_margin >= 1.0


# --- biharmonic decomposition --------------------------------------------------------

@settings(max_examples=20, deadline=None)
@given(a1=st.floats(-5, 5), a2=st.floats(-5, 5), b=st.floats(-5, 5), n=st.integers(5, 7))
def test_biharmonic_fit_recovers_coefficients(a1, a2, b, n):
    u = sample(n, 0.5, 2.0, 201, lambda r: a1 * r ** (4 - n) + a2 * r ** (2 - n) + b)
    fit = biharmonic_fit(u)
    assert np.allclose([fit.a1, fit.a2, fit.b], [a1, a2, b], atol=1e-8)


def test_biharmonic_fit_examples():
    n = 5
    fit = biharmonic_fit(sample(n, 0.5, 2.0, 201, lambda r: 3 * r ** -1 + 5 * r ** -3 + 7))
    assert np.allclose([fit.a1, fit.a2, fit.b], [3, 5, 7], atol=1e-8)
    fit = biharmonic_fit(sample(n, 0.5, 2.0, 201, lambda r: r ** -1.0))
    assert np.allclose([fit.a1, fit.a2, fit.b], [1, 0, 0], atol=1e-10) and fit.nonnegative
    with pytest.raises(IllConditioned):
        biharmonic_fit(sample(n, 1.0, 1.5, 51, lambda r: r))


def test_blowup_limit_has_no_r_2_minus_n_term():
    # M u_M(r) -> k^{(4-n)/2} r^{4-n} for the bubble family; a2 vanishes in the limit
    n, k = 6, 0.25
    a2 = []
    for M in (1e2, 1e3, 1e4):
        u = RadialBubble(n, k, M)
        fit = biharmonic_fit(sample(n, 0.2, 1.0, 201, lambda r: M * u(r)))
        assert fit.a1 == pytest.approx(k ** ((4 - n) / 2), rel=1e-2)
        a2.append(abs(fit.a2))
    assert a2[-1] < 1e-3 * a2[0] + 1e-6


# --- radial solver -------------------------------------------------------------------

@pytest.mark.parametrize("N", [101, 201, 401])
def test_radial_solve_recovers_bubble(N):
    n, k, R = 6, 0.25, 1.0
    b = RadialBubble(n, k)
    bc = {"kind": "dirichlet", "u": float(b(R)), "du": float(b.derivative(np.array([R]), 1)[0])}
    u = radial_solve(n, bubble_f(n, k), critical_exponent(n), R, bc, N=N)
    h = R / (N - 1)
    assert np.max(np.abs(u.values - b(u.grid.nodes))) < h * h


def test_radial_solve_linear_case():
    from scipy.sparse.linalg import spsolve

    from qcurv.pohozaev import bilaplacian_matrix

    n, R, N = 5, 1.0, 101
    bc = {"kind": "navier", "u": 1.0, "lap": 0.5}
    u = radial_solve(n, 2.0, 1.0, R, bc, N=N)
    # independent linear solve of the same discrete system
    grid = RadialGrid(n, 0.0, R, N)
    A = bilaplacian_matrix(grid).tolil()
    from qcurv.pohozaev import derivative_matrix

    D1, D2 = derivative_matrix(grid, 1), derivative_matrix(grid, 2)
    for i in range(N - 2):
        A[i, i] -= (n - 4) / 2 * 2.0
    A[N - 2, :] = 0.0
    A[N - 2, N - 1] = 1.0
    A[N - 1, :] = -(D2[N - 1, :].toarray().ravel() + (n - 1) / R * D1[N - 1, :].toarray().ravel())
    rhs = np.zeros(N)
    rhs[N - 2], rhs[N - 1] = 1.0, 0.5
    direct = spsolve(A.tocsr(), rhs)
    assert np.allclose(u.values, direct, atol=1e-10)


@pytest.mark.parametrize("n,q", [(5, 2.0), (6, 3.0)])
def test_radial_solve_zero_navier_data(n, q):
    f, R = 10.0, 0.5
    u = radial_solve(n, f, q, R, {"kind": "navier", "u": 0.0, "lap": 0.0}, N=201)
    interior = u.values[:-1]
    assert np.all(interior > 0)
    res = radial_bilaplacian(u).values[:-2] - (n - 4) / 2 * f * u.values[:-2] ** q
    assert np.max(np.abs(res)) / max(1.0, np.max((n - 4) / 2 * f * u.values ** q)) < 1e-8
