"""Acceptance suite: one PASS/FAIL line per criterion (see the terminal summary)."""
import math
from fractions import Fraction

import numpy as np
import pytest

from qcurv.blowup import (
    ChartField,
    DetectionConfig,
    decay_fit,
    detect_concentration,
    harnack_ratios,
    hat_curve,
    laplacian_at_pole,
    mu_estimates,
    spherical_average,
)
from qcurv.cli import main
from qcurv.index_theory import (
    euler_characteristic,
    find_critical_points,
    condition_eight,
    index_f,
    interaction_matrix,
)
from qcurv.paneitz import SphereBubble, coeffs, paneitz_eigenvalue_exact, q_round, spectral_paneitz
from qcurv.pohozaev import (
    PowerSum,
    RadialBubble,
    RadialFunction,
    RadialGrid,
    boundary_term,
    pohozaev_balance,
    radial_bilaplacian,
    serrin_zou_check,
)
from qcurv.solver import (
    COMPLETED,
    ProblemSpec,
    SolverConfig,
    constant_coeffs,
    continue_mu,
    continue_tau,
    critical_exponent,
    newton_solve,
)
from qcurv.sphere import (
    AmbientPolynomial,
    ZonalFunction,
    analysis,
    collocation_grid,
    coordinate_polynomial,
    north_pole,
    random_directions,
    unit_sphere_area,
    zonal_from_callable,
    zonal_from_polynomial,
)

from test_pohozaev import admissible_instance


class Radial:
    def __init__(self, g):
        self.g = g
        self.is_radial = True

    def radial(self, r):
        return self.g(np.asarray(r, dtype=float))

    def __call__(self, y):
        return self.g(np.linalg.norm(y, axis=-1))


# shared n = 6 blow-up path: f = x_7 + 2, tau from 0.5 down to 1e-3
BLOWUP_N = 6
BLOWUP_L = 640
BLOWUP_TAUS = np.geomspace(0.5, 1e-3, 40)


@pytest.fixture(scope="module")
def blowup_path():
    f = zonal_from_polynomial(coordinate_polynomial(BLOWUP_N, BLOWUP_N, 1.0, 2.0), 1)
    cfg = SolverConfig(L=BLOWUP_L, newton_tol=1e-10)
    return continue_tau(ProblemSpec(BLOWUP_N, f, float(BLOWUP_TAUS[0])), cfg, BLOWUP_TAUS)


# --- 1 ---------------------------------------------------------------------------

def test_criterion_1_spectral_identities(verdict):
    ok = coeffs(6).c == 10 and coeffs(6).d == 24
    ok &= coeffs(5).d == Fraction(1, 2) * Fraction(105, 8)
    worst = 0
    for n in range(5, 13):
        pc = coeffs(n)
        for k in range(51):
            lam = k * (k + n - 1)
            exact = Fraction(lam) ** 2 + pc.c * lam + pc.d
            worst += paneitz_eigenvalue_exact(n, k) != exact
    ok &= worst == 0
    verdict(1, ok, f"c6=10, d6=24, d5=105/16; eigenvalue mismatches over n=5..12, k=0..50: {worst}")
    assert ok


# --- 2 ---------------------------------------------------------------------------

def test_criterion_2_bubble_pde(verdict):
    orders = {}
    for n in (5, 6, 7):
        k = 0.25
        f = 2 * n * (n + 2) * (n - 2) * k * k
        q = critical_exponent(n)
        errs = []
        for N in (101, 201, 401):
            u = RadialFunction.sample(RadialGrid(n, 0.0, 2.0, N), RadialBubble(n, k))
            errs.append(np.max(np.abs(radial_bilaplacian(u).values - (n - 4) / 2 * f * u.values ** q)))
        orders[n] = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    order_ok = all(abs(o - 2.0) <= 0.1 for v in orders.values() for o in v)
    L = 64
    grid = collocation_grid(6, 4 * L + 1)
    mu = spectral_paneitz(6, L).eigen
    res = {}
    for lam in (0.5, 2.0, 4.0):
        vals = SphereBubble(north_pole(6), lam, 6).profile(grid.nodes)
        lhs = mu * analysis(vals, grid, L).coeffs
        rhs = analysis(24 * vals ** 5, grid, L).coeffs
        res[lam] = float(np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs))
    spec_ok = all(r < 1e-6 for r in res.values())
    ok = order_ok and spec_ok
    verdict(2, ok, "FD orders " + ", ".join(f"n={n}: " + "/".join(f"{o:.3f}" for o in v) for n, v in orders.items())
            + "; spectral residuals " + ", ".join(f"{lam:g}: {r:.1e}" for lam, r in res.items()))
    assert ok


# --- 3 ---------------------------------------------------------------------------

def test_criterion_3_pohozaev(verdict):
    worst_B = 0.0
    for n in (5, 6, 7, 8):
        u = PowerSum([(1.0, 4.0 - n)])
        for r in (1e-3, 0.1, 1.0, 10.0):
            worst_B = max(worst_B, abs(boundary_term(u, r, n)) / r ** (5 - 2 * n))
    b_ok = worst_B < 1e-10
    n, A, r = 5, 1.0, 1e-3
    u = PowerSum([(1.0, 4.0 - n), (A, 0.0)])
    lim = unit_sphere_area(n) * r ** (n - 1) * boundary_term(u, r, n)
    target = -(n - 4) ** 2 * (n - 2) * unit_sphere_area(n) * A
    lim_ok = abs(lim - target) <= 0.01 * abs(target) and abs(target + 8 * math.pi ** 2) < 1e-9
    k = 0.25
    res = []
    for N in (201, 401, 801):
        ub = RadialFunction.sample(RadialGrid(6, 0.0, 1.5, N), RadialBubble(6, k))
        res.append(pohozaev_balance(ub, 2 * 6 * 8 * 4 * k * k, critical_exponent(6)).relative_residual)
    orders = [math.log2(a / b) for a, b in zip(res, res[1:])]
    bal_ok = all(o > 1.9 for o in orders)
    ok = b_ok and lim_ok and bal_ok
    verdict(3, ok, f"max scaled |B| = {worst_B:.1e}; limit {lim:.4f} vs {target:.4f}; "
            f"balance orders " + "/".join(f"{o:.2f}" for o in orders))
    assert ok


# --- 4 ---------------------------------------------------------------------------

def test_criterion_4_trivial_and_perturbative(verdict):
    worst = 0.0
    for n in (5, 6, 7, 8):
        f = ZonalFunction(north_pole(n), n, constant_coeffs(n, 0, q_round(n)))
        sol = newton_solve(ProblemSpec(n, f, 0.2), SolverConfig(L=12))
        worst = max(worst, abs(sol.max_val - 1), abs(sol.min_val - 1))
    triv_ok = worst < 1e-10
    f5 = zonal_from_callable(lambda t: 105 / 8 * (1 + 0.05 * t), 5, 1)
    path = continue_mu(f5, SolverConfig(L=32), np.linspace(0, 1, 11), tau=0.2)
    hom_ok = (path.termination == COMPLETED and path.params[-1] == 1.0
              and all(s.positive and s.residual_norm < 1e-8 for s in path.solutions))
    worst_res = max(s.residual_norm for s in path.solutions)
    ok = triv_ok and hom_ok
    verdict(4, ok, f"|v - 1| <= {worst:.1e}; mu path {path.termination} at mu={path.params[-1]}, "
            f"max residual {worst_res:.1e} (tau = 0.2)")
    assert ok


# --- 5 / 6 / 8 -------------------------------------------------------------------

def _step_diagnostics(sol, f, tau, cfg):
    q = critical_exponent(BLOWUP_N) - tau
    cands = [c for c in detect_concentration(sol, f, cfg, q) if c.accepted]
    p = cands[0].point if cands else f.axis
    u = ChartField(sol.v, p)
    hat = hat_curve(spherical_average(u, np.zeros(BLOWUP_N), np.geomspace(1e-4, cfg.rho, 600)), q, cfg.rho)
    return p, u, q, hat


def test_criterion_5_blowup_phenomenology(blowup_path, verdict):
    path = blowup_path
    cfg = DetectionConfig()
    f = path.f
    m = np.asarray(path.max_vals)
    growth = len(path.solutions) == len(BLOWUP_TAUS) and bool(np.all(np.diff(m) > 0))
    hats = []
    for sol, tau in list(zip(path.solutions, path.params))[-3:]:
        p, u, q, hat = _step_diagnostics(sol, f, tau, cfg)
        hats.append(hat.critical_points)
    single = all(h == 1 for h in hats)
    u0 = float(u.radial(0.0))
    dec = decay_fit(u, np.zeros(BLOWUP_N), (cfg.R * u0 ** (-(q - 1) / 4), cfg.rho), BLOWUP_N, q, cfg.R)
    decay_ok = abs(dec.exponent + 2) <= 0.05 * 2
    target = laplacian_at_pole(f, p) / float(f.at(p[None])[0]) ** 1.5
    est = mu_estimates(path, p, cfg.C0)
    gap = abs(est.limit - target) / abs(target)
    mu_ok = gap <= 0.25
    verdict("5a", growth, f"max v increases over all {len(m)} steps (final {m[-1]:.4g})")
    verdict("5b", single, f"critical points of the hat curve at the last 3 steps: {hats}")
    verdict("5c", decay_ok, f"decay exponent {dec.exponent:.4f} (target -2 within 5%)")
    verdict("5d", mu_ok, f"tau v(p)^2 -> {est.limit:.4f} vs Delta f/f^(3/2) = {target:.4f}, gap {100 * gap:.0f}%")
    ok = growth and single and decay_ok and mu_ok
    verdict(5, ok, "all sub-checks" if ok else "see sub-checks 5a-5d")
    assert ok


def test_criterion_6_tau_scaling(blowup_path, verdict):
    est = mu_estimates(blowup_path, blowup_path.f.axis)
    last = est.tau_scaling[-5:]
    ratio = float(last.max() / last.min())
    ok = ratio < 10
    verdict(6, ok, f"tau v^(2/(n-4)) max/min over last 5 steps = {ratio:.3f}")
    assert ok


def test_criterion_7_index_machinery(verdict):
    cs6 = find_critical_points(coordinate_polynomial(6, 6, 1.0, 2.0), starts=32)
    idx = index_f(cs6).total
    cs5 = find_critical_points(coordinate_polynomial(5, 5, 1.0, 2.0), starts=32)
    s8, ok8 = condition_eight(cs5)
    morse_ok = cs6.morse_sum == euler_characteristic(6) and cs5.morse_sum == euler_characteristic(5)
    rng = np.random.default_rng(7)
    terms = {(0,) * 7: 10.0}
    for i, s in enumerate(rng.uniform(0.5, 2, 7)):
        a = [0] * 7
        a[i] = 2
        terms[tuple(a)] = float(s)
    f = AmbientPolynomial(6, terms)
    pts = list(random_directions(6, 4, rng))
    im, im4 = interaction_matrix(pts, f), interaction_matrix(pts, f.scaled(4.0))
    off_ok = bool(np.all(im.matrix[~np.eye(4, dtype=bool)] < 0))
    sign_ok = np.sign(im.rho) == np.sign(im4.rho)
    p = north_pole(6)
    rho = interaction_matrix([p, -p], AmbientPolynomial(6, {(0,) * 7: 24.0})).rho
    rho_ok = abs(rho - (-0.06380)) < 1e-4
    ok = idx == 0 and s8 == -1 and not ok8 and morse_ok and off_ok and sign_ok and rho_ok
    verdict(7, ok, f"Index(x7+2) = {idx}; condition sum on S^5 = {s8}; Morse sums "
            f"{cs6.morse_sum}/{cs5.morse_sum}; antipodal rho = {rho:.5f}")
    assert ok


def test_criterion_8_harnack(blowup_path, verdict):
    cfg = DetectionConfig()
    ratios = []
    for sol, tau in zip(blowup_path.solutions, blowup_path.params):
        if sol.max_val <= cfg.C0:
            continue
        _, u, _, _ = _step_diagnostics(sol, blowup_path.f, tau, cfg)
        ratios.append(harnack_ratios(u, np.zeros(BLOWUP_N), [(0.25, 1.0)])[0].ratio)
    ratios = np.array(ratios)
    path_ok = ratios.size > 0 and bool(np.all((ratios <= 2 * ratios[0]) & (ratios >= ratios[0] / 2)))
    worst = 0.0
    for n in (5, 6, 7, 8):
        h = harnack_ratios(Radial(lambda r, n=n: r ** (4.0 - n)), np.zeros(n), [(0.25, 1.0)])[0]
        worst = max(worst, abs(h.ratio - 4.0 ** (n - 4)) / 4.0 ** (n - 4))
    exact_ok = worst < 1e-8
    ok = path_ok and exact_ok
    detail = (f"path ratios in [{ratios.min():.3f}, {ratios.max():.3f}] over {ratios.size} steps, first "
              f"{ratios[0]:.3f}" if ratios.size else "no step above C0")
    verdict(8, ok, detail + f"; exact 4^(n-4) relative error {worst:.1e}")
    assert ok


# --- 9 ---------------------------------------------------------------------------

def test_criterion_9_serrin_zou(verdict):
    rng = np.random.default_rng(2024)
    margins = []
    for _ in range(50):
        n = int(rng.integers(5, 9))
        y, phi = admissible_instance(rng, n, float(rng.uniform(0.5, 3.0)))
        res = serrin_zou_check(y, phi)
        margins.append(res.inf_margin if res.passed else -math.inf)
    n, y0 = 6, 2.0
    a = 0.95 * math.sqrt(2 * n * y0)
    grid = RadialGrid(n, 0.0, a, 401)
    eq = serrin_zou_check(RadialFunction(grid, y0 - grid.nodes ** 2 / (2 * n)),
                          RadialFunction(grid, np.ones(grid.N)))
    ok = min(margins) > 0 and eq.passed and eq.inf_margin > 0
    verdict(9, ok, f"min margin over 50 instances {min(margins):.3e}; equality case margin {eq.inf_margin:.3e}")
    assert ok


# --- 10 --------------------------------------------------------------------------

CONFIGS = {
    "solve": "[problem]\nn = 5\ntau = 0.2\nf_constant = 13.125\n[solver]\nL = 8\n",
    "continue": "[problem]\nn = 6\nf_terms =\n    2 0 0 0 0 0 0 0\n    1 0 0 0 0 0 0 1\n"
                "[solver]\nL = 96\nblowup_ceiling = 15\n[continuation]\nschedule = geomspace 0.5 0.005 25\n"
                "[detection]\nC0 = 5\n",
    "pohozaev": "[scenario]\nn = 5\nu = bubble\nk = 0.25\nf = 13.125\nradii = 0.1 1\n",
    "bubble-check": "[scenario]\ngrid_sizes = 51 101\nL = 32\n",
}


def test_criterion_10_determinism(tmp_path, verdict):
    fpoly = tmp_path / "f.txt"
    fpoly.write_text("2 0 0 0 0 0 0 0\n1 0 0 0 0 0 0 1\n")
    for name, text in CONFIGS.items():
        (tmp_path / f"{name}.ini").write_text(text)

    def runs(tag):
        d = tmp_path / tag
        cmds = {
            "spectrum": ["spectrum", "--n", "6", "--L", "6"],
            "solve": ["solve", "--config", str(tmp_path / "solve.ini")],
            "continue": ["continue", "--config", str(tmp_path / "continue.ini")],
            "diagnose": ["diagnose", str(tmp_path / "a" / "continue" / "path.json")],
            "index": ["index", "--f", str(fpoly), "--n", "6", "--starts", "32"],
            "pohozaev": ["pohozaev", "--config", str(tmp_path / "pohozaev.ini")],
            "bubble-check": ["bubble-check", "--config", str(tmp_path / "bubble-check.ini")],
        }
        for name, argv in cmds.items():
            main(argv + ["--out", str(d / name), "--seed", "3"])
        return d

    a, b = runs("a"), runs("b")
    same = {}
    for cmd in ("spectrum", "solve", "continue", "diagnose", "index", "pohozaev", "bubble-check"):
        ra, rb = a / cmd / "result.json", b / cmd / "result.json"
        same[cmd] = ra.exists() and ra.read_bytes() == rb.read_bytes()
    ok = all(same.values())
    verdict(10, ok, "byte-identical result.json: " + ", ".join(f"{k}={'yes' if v else 'no'}" for k, v in same.items()))
    assert ok
