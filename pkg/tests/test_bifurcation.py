from __future__ import annotations

import numpy as np
import pytest

from _systems import DEGENERATE, SYS_A, SYS_A3, SYS_A_PRIME, SYS_B, TrigSystem, DAMPING
from subharmonic.bifurcation import (
    bifurcation_curves,
    c_surface,
    count_subharmonics,
    default_grid_size,
    degeneracy_order,
    interpolation_defect,
    stationary_phases,
    subharmonic_roots,
)
from subharmonic.errors import AllStationary, MalformedConfig
from subharmonic.series import residual, run_series
from subharmonic.trigsys import resonance_context


@pytest.fixture(scope="module")
def surf_a():
    return c_surface(SYS_A, resonance_context(SYS_A, 1, 1), 3)


@pytest.fixture(scope="module")
def surf_ap():
    return c_surface(SYS_A_PRIME, resonance_context(SYS_A_PRIME, 1, 1), 2)


def test_grid_size_rule():
    assert default_grid_size(SYS_A, 6) == 256  # 8 * 19 = 152 -> 256
    assert default_grid_size(SYS_A, 0) == 8


def test_sys_a_rows(surf_a):
    t = surf_a.t0_grid
    assert np.max(np.abs(surf_a.Ck[0] + np.sin(t))) < 1e-15
    assert np.max(np.abs(surf_a.Ck[1:])) < 1e-15


def test_sys_a_prime_rows(surf_ap):
    assert np.max(np.abs(surf_ap.Ck[2] - np.sin(surf_ap.t0_grid) / 4)) < 1e-13
    assert interpolation_defect(surf_ap, SYS_A_PRIME) < 1e-8


def test_sys_b_rows_vanish():
    surf = c_surface(SYS_B, resonance_context(SYS_B, 1, 1), 1)
    assert np.max(np.abs(surf.Ck)) < 1e-15
    assert degeneracy_order(surf).all_constant


def test_sys_a_curves_are_exact(surf_a):
    eps = np.geomspace(1e-3, 1e-1, 9)
    c = bifurcation_curves(surf_a, eps)
    assert np.max(np.abs(c.gamma1 - eps)) < 1e-15
    assert np.max(np.abs(c.gamma2 + eps)) < 1e-15
    assert np.allclose(c.tau1, 1.5 * np.pi) and np.allclose(c.tau2, 0.5 * np.pi)


def test_sys_a_prime_curve_to_third_order(surf_ap):
    eps = np.array([0.01, 0.05, 0.1])
    c = bifurcation_curves(surf_ap, eps)
    assert np.max(np.abs(c.gamma1 - eps * (1 - eps**2 / 4))) < 1e-14
    assert np.allclose(c.tau1, 1.5 * np.pi, atol=1e-10)


def test_ordering_invariant_both_signs():
    for sys_ in (SYS_A_PRIME, DEGENERATE):
        surf = c_surface(sys_, resonance_context(sys_, 1, 1), 3)
        eps = np.linspace(-0.2, 0.2, 21)
        c = bifurcation_curves(surf, eps)
        assert np.all(c.gamma1[eps >= 0] >= c.gamma2[eps >= 0])
        assert np.all(c.gamma1[eps <= 0] <= c.gamma2[eps <= 0])
        assert c.gamma1[10] == 0 and c.gamma2[10] == 0


def test_constant_rows_give_coinciding_curves():
    sys_ = TrigSystem.build([0.0, 1.0], [], [DAMPING])
    surf = c_surface(sys_, resonance_context(sys_, 1, 1), 2)
    c = bifurcation_curves(surf, [0.05, 0.1])
    assert np.all(c.gamma1 == c.gamma2)
    with pytest.raises(AllStationary):
        stationary_phases(surf, 0.1)


def test_stationary_phases(surf_a, surf_ap):
    pts = stationary_phases(surf_a, 0.03)
    assert [p.kind for p in pts] == ["min", "max"]
    assert pts[0].t0 == pytest.approx(np.pi / 2, abs=1e-12)
    assert pts[1].t0 == pytest.approx(1.5 * np.pi, abs=1e-12)
    pts = stationary_phases(surf_ap, 0.1)
    assert [p.t0 for p in pts] == [pytest.approx(np.pi / 2, abs=1e-10), pytest.approx(1.5 * np.pi, abs=1e-10)]


def test_flat_stationary_point_is_found():
    # C0 = -(sin t0)^3 style flatness: use a surface built from a known row
    surf = c_surface(SYS_A, resonance_context(SYS_A, 1, 1), 0)
    flat = type(surf)(surf.ctx, surf.t0_grid, np.array([np.sin(surf.t0_grid) ** 3]), 1.0)
    kinds = {round(p.t0, 6): p.kind for p in stationary_phases(flat, 0.0)}
    assert kinds[0.0] == "saddle-flat" and kinds[round(np.pi, 6)] == "saddle-flat"


def test_degeneracy_orders(surf_a, surf_ap):
    d = degeneracy_order(surf_a)
    assert d.kstar == 0 and d.nondegenerate
    assert d.curvature_at_extremes[0] * d.curvature_at_extremes[1] == pytest.approx(-1.0, abs=1e-9)
    assert degeneracy_order(surf_ap).kstar == 0
    deg = degeneracy_order(c_surface(DEGENERATE, resonance_context(DEGENERATE, 1, 1), 3))
    assert deg.kstar == 1 and deg.nondegenerate


def test_stationary_phases_move_continuously_in_cusp_case():
    surf = c_surface(DEGENERATE, resonance_context(DEGENERATE, 1, 1), 3)
    eps = np.linspace(0.005, 0.2, 40)
    c = bifurcation_curves(surf, eps)
    assert c.kstar == 1
    resolution = eps[1] - eps[0]
    assert np.max(np.abs(np.diff(c.tau1))) <= 10 * resolution
    assert np.max(np.abs(np.diff(c.tau2))) <= 10 * resolution


def test_counts_sys_a(surf_a):
    res = subharmonic_roots(surf_a, 0.05, 0.0)
    assert res.count == 2
    assert res.roots == [pytest.approx(0.0, abs=1e-12), pytest.approx(np.pi, abs=1e-12)]
    assert count_subharmonics(surf_a, 0.05, 0.05) == 1
    out = subharmonic_roots(surf_a, 0.05, 0.07)
    assert out.count == 0 and out.outside_range


def test_counts_q3():
    ctx = resonance_context(SYS_A3, 1, 3)
    surf = c_surface(SYS_A3, ctx, 2)
    assert count_subharmonics(surf, 0.05, 0.0) == 6
    g1 = bifurcation_curves(surf, [0.05]).gamma1[0]
    assert count_subharmonics(surf, 0.05, g1) == 3


def test_count_refuses_p_greater_than_one():
    ctx = resonance_context(SYS_A, 2, 1)
    surf = c_surface(SYS_A, ctx, 1)
    with pytest.raises(MalformedConfig):
        count_subharmonics(surf, 0.05, 0.0)


def test_q3_exact_family_solves_equations():
    ctx = resonance_context(SYS_A3, 1, 3)
    t0 = np.linspace(0, 2 * np.pi, 8, endpoint=False)
    st = run_series(SYS_A3, ctx, t0, 3)
    assert np.max(np.abs(st.C[0] + np.sin(t0))) < 1e-15
    assert residual(st, 0.05) <= 1e-13
