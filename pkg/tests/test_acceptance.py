"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

from __future__ import annotations

import time

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from _systems import (
    DUFFING,
    RANDOM_SEEDS,
    SYS_A,
    SYS_A3,
    SYS_A_PRIME,
    SYS_B,
    persistence_trig,
    random_system,
)
from subharmonic.bifurcation import bifurcation_curves, c_surface, count_subharmonics
from subharmonic.errors import HierarchyExhausted, NoConvergence
from subharmonic.mechanical import mechanical_curves, orbit_with_period
from subharmonic.melnikov import melnikov_hierarchy, melnikov_planar, phase_derivative_sides
from subharmonic.oracle import ActionAngleFlow, PersistenceFlow, empirical_curve, shoot_many, shoot_periodic
from subharmonic.series import residual, run_series
from subharmonic.trees import bounds_report, tree_sum
from subharmonic.trigsys import resonance_context


@pytest.fixture
def report(capsys):
    def emit(number: int, title: str, ok: bool, detail: str = ""):
        with capsys.disabled():
            status = "PASS" if ok else "FAIL"
            print(f"\n[acceptance {number:2d}] {status}  {title}" + (f"  ({detail})" if detail else ""))
        assert ok, f"criterion {number} failed: {detail}"

    return emit


def test_criterion_01_sys_a_exactness(report):
    start = time.perf_counter()
    ctx = resonance_context(SYS_A, 1, 1)
    surf = c_surface(SYS_A, ctx, 6)
    eps = np.geomspace(1e-3, 1e-1, 25)
    curves = bifurcation_curves(surf, eps)
    elapsed = time.perf_counter() - start
    rows = float(np.max(np.abs(surf.Ck[1:])))
    c0 = float(np.max(np.abs(surf.Ck[0] + np.sin(surf.t0_grid))))
    gam = float(max(np.max(np.abs(curves.gamma1 - eps)), np.max(np.abs(curves.gamma2 + eps))))
    ok = rows <= 1e-12 and c0 <= 1e-12 and gam <= 1e-12 and elapsed < 5.0
    report(1, "SYS-A exactness", ok, f"max|C_k>=1|={rows:.1e}, C0 err={c0:.1e}, gamma err={gam:.1e}, {elapsed:.2f}s")


def test_criterion_02_sys_a_prime_second_order(report):
    ctx = resonance_context(SYS_A_PRIME, 1, 1)
    surf = c_surface(SYS_A_PRIME, ctx, 2)
    err = float(np.max(np.abs(surf.Ck[2] - np.sin(surf.t0_grid) / 4)))
    tree_err = max(abs(tree_sum(SYS_A_PRIME, ctx, t, 2, "C", 0) - np.sin(t) / 4) for t in surf.t0_grid[::4])
    ok = err <= 1e-12 and tree_err <= 1e-10
    report(2, "SYS-A' second order", ok, f"series err={err:.1e}, tree err={tree_err:.1e}")


def test_criterion_03_tree_equivalence(report):
    start = time.perf_counter()
    systems = [SYS_A_PRIME, SYS_B] + [random_system(s) for s in RANDOM_SEEDS]
    worst = 0.0
    for sys_ in systems:
        ctx = resonance_context(sys_, 1, 1)
        for t0 in (0.3, 2.1):
            st = run_series(sys_, ctx, t0, 2)
            for k in (1, 2):
                b = 3 * k * max(1, sys_.max_momentum(1, 1))
                for h in ("alpha", "A"):
                    spec = st.spectrum(h, k)
                    for nu in sorted(set(range(-b, b + 1)) | set(spec)):
                        worst = max(worst, abs(tree_sum(sys_, ctx, t0, k, h, nu) - spec.get(nu, 0.0)))
                worst = max(worst, abs(tree_sum(sys_, ctx, t0, k, "C", 0) - st.C[k][0]))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and elapsed < 60.0
    report(3, "tree sum equals recursion", ok, f"max gap={worst:.1e} over {len(systems)} systems, {elapsed:.2f}s")


def test_criterion_04_residual_scaling(report):
    ctx = resonance_context(SYS_A_PRIME, 1, 1)
    st = run_series(SYS_A_PRIME, ctx, np.array([0.3, 1.2, 2.5]), 4)
    eps = np.geomspace(1e-3, 1e-2, 8)
    res = [residual(st, e) for e in eps]
    slope = float(np.polyfit(np.log(eps), np.log(res), 1)[0])
    report(4, "residual scaling", abs(slope - 5) <= 0.2, f"slope={slope:.3f}")


def test_criterion_05_oracle_agreement(report):
    ctx = resonance_context(SYS_A, 1, 1)
    inside = shoot_periodic(ActionAngleFlow(SYS_A, ctx, 0.05, 0.3), [0.0, 1.0])
    outside_flow = ActionAngleFlow(SYS_A, ctx, 0.05, 1.5)
    try:
        shoot_periodic(outside_flow, [0.0, 1.0])
        refused = False
    except NoConvergence:
        refused = True
    refused &= all(r is None for r in shoot_many(outside_flow, outside_flow.seeds(np.linspace(0, 6, 8))))
    curve = empirical_curve(lambda C: ActionAngleFlow(SYS_A, ctx, 0.05, C), (-2.0, 2.0), iterations=50)
    hi_err, lo_err = abs(curve.C_max_hat - 1.0), abs(curve.C_min_hat + 1.0)
    ok = inside.defect <= 1e-10 and refused and hi_err <= 1e-6 and lo_err <= 1e-6
    report(5, "shooting oracle agreement", ok, f"defect={inside.defect:.1e}, threshold errs={hi_err:.1e},{lo_err:.1e}")


def test_criterion_06_counting(report):
    eps = 0.05
    ctx = resonance_context(SYS_A, 1, 1)
    surf = c_surface(SYS_A, ctx, 3)
    g1 = bifurcation_curves(surf, [eps]).gamma1[0]
    a = (count_subharmonics(surf, eps, 0.0), count_subharmonics(surf, eps, g1))
    ctx3 = resonance_context(SYS_A3, 1, 3)
    surf3 = c_surface(SYS_A3, ctx3, 3)
    g13 = bifurcation_curves(surf3, [eps]).gamma1[0]
    b = (count_subharmonics(surf3, eps, 0.0), count_subharmonics(surf3, eps, g13))
    report(6, "solution counts", a == (2, 1) and b == (6, 3), f"q=1: {a}, q=3: {b}")


def test_criterion_07_mechanical_zero_mean(report):
    c = mechanical_curves(DUFFING, 1, 1, np.geomspace(1e-3, 1e-1, 9))
    rel = abs(c.mean_C0) / float(np.max(np.abs(c.C0)))
    ok = rel <= 1e-10 and bool(np.all(c.gamma1 >= 0)) and bool(np.all(c.gamma2 <= 0))
    report(7, "mechanical zero mean and curve signs", ok, f"relative mean={rel:.1e}")


def test_criterion_08_phase_derivative_identity(report):
    ctx = resonance_context(SYS_A_PRIME, 1, 1)
    t0 = 2 * np.pi * np.arange(64) / 64
    gap = 0.0
    for C in (-0.5, 0.0, 0.3):
        lhs, rhs = phase_derivative_sides(SYS_A_PRIME, ctx, t0, C)
        gap = max(gap, float(np.max(np.abs(lhs - rhs))))
    report(8, "phase-derivative identity", gap <= 1e-10, f"max gap={gap:.1e}")


def test_criterion_09_coordinate_invariance(report):
    orbit = orbit_with_period(DUFFING, 2 * np.pi)
    C = 0.2

    def f(z):
        return np.array([z[1], -z[0] ** 3])

    def g(z, t):
        return np.array([np.zeros_like(z[0]), -C * z[1] + np.cos(t)])

    # xi = h^{-1}(z) = (x, y - x^2); the pulled-back field is Dh^{-1} f(h(xi))
    def h(xi):
        return np.array([xi[0], xi[1] + xi[0] ** 2])

    def pull(v, xi):
        return np.array([v[0], v[1] - 2 * xi[0] * v[0]])

    def f_xi(xi):
        return pull(f(h(xi)), xi)

    def g_xi(xi, t):
        return pull(g(h(xi), t), xi)

    z0 = orbit.z[:, 0]
    xi0 = [z0[0], z0[1] - z0[0] ** 2]
    sol = solve_ivp(
        lambda t, xi: f_xi(xi), (0, orbit.period), xi0, method="DOP853", rtol=1e-13, atol=1e-13, t_eval=orbit.t
    )
    gap = 0.0
    for t0 in np.linspace(0, 2 * np.pi, 7):
        m_z = melnikov_planar(f, g, orbit, t0)
        m_xi = melnikov_planar(f_xi, g_xi, (sol.t, sol.y), t0)
        gap = max(gap, abs(m_z - m_xi))
    report(9, "planar Melnikov coordinate invariance", gap <= 1e-8, f"max gap={gap:.1e}")


def test_criterion_10_node_bounds(report):
    lines, ok = [], True
    for name, sys_ in (("SYS-A'", SYS_A_PRIME), ("SYS-B", SYS_B), ("random", random_system(RANDOM_SEEDS[0]))):
        rep = bounds_report(sys_, resonance_context(sys_, 1, 1), 3)
        ok &= all(r.proven_ok for r in rep)
        over = [(r.k, r.h) for r in rep if not r.stated_ok]
        lines.append(f"{name}: stated 2k bound exceeded at {over}" if over else f"{name}: stated 2k bound holds")
    report(10, "tree node bounds", ok, "; ".join(lines))


def test_criterion_11_torus_persistence(report):
    seeds = 2 * np.pi * np.arange(8) / 8
    worst, converged = 0.0, True
    for eps in (0.01, 0.1):
        flow = PersistenceFlow.tuned(eps)
        for r in shoot_many(flow, flow.seeds(seeds)):
            if r is None:
                converged = False
            else:
                worst = max(worst, r.defect)
    sys_ = persistence_trig()
    try:
        melnikov_hierarchy(sys_, resonance_context(sys_, 1, 1), 0.0, 4)
        exhausted = False
    except HierarchyExhausted:
        exhausted = True
    ok = converged and worst <= 1e-9 and exhausted
    report(11, "resonant torus persistence", ok, f"max defect={worst:.1e}, hierarchy exhausted={exhausted}")
