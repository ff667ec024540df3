from __future__ import annotations

import numpy as np
import pytest

from _systems import (
    DUFFING,
    NO_C,
    NONLINEAR,
    SYS_A,
    SYS_A_PRIME,
    SYS_B,
    M,
    melnikov_quadrature,
    persistence_trig,
)
from subharmonic.errors import BadOrbit, HierarchyExhausted, Hyp2ViolatedDegenerate, Hyp2ViolatedNoRoot
from subharmonic.mechanical import orbit_with_period
from subharmonic.melnikov import (
    melnikov_curve,
    melnikov_derivative_t0,
    melnikov_hierarchy,
    melnikov_planar,
    melnikov_value,
    phase_derivative_sides,
    solve_C0,
)
from subharmonic.trigsys import TrigSystem, resonance_context


@pytest.fixture(scope="module")
def ctx_a():
    return resonance_context(SYS_A, 1, 1)


def test_values_on_sys_a(ctx_a):
    assert melnikov_value(SYS_A, ctx_a, 0.0, 0.0) == pytest.approx(0.0, abs=1e-15)
    assert melnikov_value(SYS_A, ctx_a, np.pi / 2, 1.0) == pytest.approx(-2.0, abs=1e-15)


@pytest.mark.parametrize("sys_", [SYS_A, SYS_A_PRIME, SYS_B, NONLINEAR])
def test_spectral_sum_matches_quadrature(sys_):
    ctx = resonance_context(sys_, 1, 1)
    for t0 in np.linspace(0, 2 * np.pi, 7):
        for C in (-0.7, 0.0, 1.1):
            assert melnikov_value(sys_, ctx, t0, C) == pytest.approx(
                melnikov_quadrature(sys_, ctx, t0, C), abs=1e-13
            )


def test_empty_resonant_sum_is_zero():
    sys_ = TrigSystem.build([0, 1], [], [M(2, -1, [(0, 0, 1.0)])])
    ctx = resonance_context(sys_, 1, 1)
    assert np.all(melnikov_value(sys_, ctx, np.linspace(0, 6, 5), 3.0) == 0.0)


def test_solve_C0_examples(ctx_a):
    C0, D = solve_C0(SYS_A, ctx_a, np.pi / 2)
    assert (C0, D) == (pytest.approx(-1.0, abs=1e-15), pytest.approx(-1.0))
    ctx_b = resonance_context(SYS_B, 1, 1)
    for t0 in np.linspace(0, 6, 4):
        C0, D = solve_C0(SYS_B, ctx_b, t0)
        assert abs(C0) < 1e-15 and D == pytest.approx(-1.0)


def test_degenerate_and_missing_roots():
    ctx = resonance_context(NO_C, 1, 1)
    with pytest.raises(Hyp2ViolatedDegenerate):
        solve_C0(NO_C, ctx, 0.3)
    no_root = TrigSystem.build([0, 1], [], [M(0, 0, [(0, 0, 1.0), (0, 2, 1.0)])])  # 1 + C^2
    with pytest.raises(Hyp2ViolatedNoRoot):
        solve_C0(no_root, resonance_context(no_root, 1, 1), 0.0)
    double = TrigSystem.build([0, 1], [], [M(0, 0, [(0, 2, 1.0)])])  # C^2
    with pytest.raises(Hyp2ViolatedDegenerate):
        solve_C0(double, resonance_context(double, 1, 1), 0.0)


def test_bracket_expands_to_far_root():
    far = TrigSystem.build([0, 1], [], [M(0, 0, [(0, 0, 300.0), (0, 1, -1.0)])])
    C0, D = solve_C0(far, resonance_context(far, 1, 1), 0.0)
    assert C0 == pytest.approx(300.0)


def test_root_nearest_zero_is_chosen():
    two = TrigSystem.build([0, 1], [], [M(0, 0, [(0, 0, 2.0), (0, 1, -3.0), (0, 2, 1.0)])])  # (C-1)(C-2)
    C0, D = solve_C0(two, resonance_context(two, 1, 1), 0.0)
    assert C0 == pytest.approx(1.0) and D == pytest.approx(-1.0)


def test_curve_degree_and_accuracy(ctx_a):
    # cos t has momentum 1 at p = q = 1, so only the sin mode is resonant
    curve = melnikov_curve(SYS_A_PRIME, resonance_context(SYS_A_PRIME, 1, 1))
    assert curve.trig_degree == 1
    assert np.max(np.abs(curve.C0_values + np.sin(curve.t0_grid))) < 1e-12
    assert melnikov_curve(SYS_B, resonance_context(SYS_B, 1, 1)).trig_degree == 0


def test_periodicity_in_t0(ctx_a):
    t0 = np.linspace(0, 2 * np.pi, 9)
    assert np.allclose(
        melnikov_value(SYS_A_PRIME, ctx_a, t0, 0.4),
        melnikov_value(SYS_A_PRIME, ctx_a, t0 + 2 * np.pi, 0.4),
        rtol=0,
        atol=1e-14,
    )


def test_phase_derivative_identity():
    ctx = resonance_context(SYS_A_PRIME, 1, 1)
    t0 = 2 * np.pi * np.arange(64) / 64
    lhs, rhs = phase_derivative_sides(SYS_A_PRIME, ctx, t0, 0.3)
    assert np.max(np.abs(lhs - rhs)) < 1e-10
    assert np.allclose(rhs, -melnikov_derivative_t0(SYS_A_PRIME, ctx, t0, 0.3))


def _mech_fields(C):
    def f(z):
        return np.array([z[1], -z[0] ** 3])

    def g(z, t):
        return np.array([np.zeros_like(z[0]), -C * z[1] + np.cos(t)])

    return f, g


def test_planar_zero_perturbation_and_mechanical_formula():
    orbit = orbit_with_period(DUFFING, 2 * np.pi)
    f, g = _mech_fields(0.2)
    assert melnikov_planar(f, lambda z, t: np.zeros_like(z), orbit) == 0.0
    y = orbit.z[1, :-1]
    t = orbit.t[:-1]
    for t0 in (0.0, 1.0, 2.5):
        want = -0.2 * np.mean(y**2) + np.mean(y * np.cos(t + t0))
        assert melnikov_planar(f, g, orbit, t0) == pytest.approx(want, abs=1e-13)


def test_planar_rejects_open_orbit():
    orbit = orbit_with_period(DUFFING, 2 * np.pi)
    z = orbit.z.copy()
    z[0, -1] += 1e-3
    f, g = _mech_fields(0.0)
    with pytest.raises(BadOrbit):
        melnikov_planar(f, g, (orbit.t, z))


def test_hierarchy_sys_a_stops_at_level_zero(ctx_a):
    t0 = 2 * np.pi * np.arange(32) / 32
    levels = melnikov_hierarchy(SYS_A, ctx_a, 0.0, 4, t0)
    assert len(levels) == 1 and levels[0][0] == 0
    assert np.max(np.abs(levels[0][1] + np.sin(t0))) < 1e-14


def test_hierarchy_zero_perturbation_exhausts():
    sys_ = TrigSystem.build([0.0, 1.0], [], [])
    with pytest.raises(HierarchyExhausted) as info:
        melnikov_hierarchy(sys_, resonance_context(sys_, 1, 1), 0.0, 3)
    assert len(info.value.levels) == 4


def test_hierarchy_persistence_system_exhausts():
    sys_ = persistence_trig()
    with pytest.raises(HierarchyExhausted):
        melnikov_hierarchy(sys_, resonance_context(sys_, 1, 1), 0.0, 4)
