"""Randomized invariants checked with hypothesis."""

from __future__ import annotations

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from _systems import RANDOM_SEEDS, SYS_A_PRIME, random_system
from subharmonic import _spectra as sp
from subharmonic.bifurcation import bifurcation_curves, c_surface
from subharmonic.cli import fmt
from subharmonic.melnikov import melnikov_value
from subharmonic.series import run_series
from subharmonic.trigsys import resonance_context

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
phase = st.floats(0, 2 * np.pi, allow_nan=False)


def spectrum(w):
    return st.lists(st.tuples(finite, finite), min_size=2 * w + 1, max_size=2 * w + 1).map(
        lambda v: np.array([[complex(a, b) for a, b in v]])
    )


@settings(max_examples=50, deadline=None)
@given(spectrum(2), spectrum(3), st.floats(0, 10, allow_nan=False))
def test_conv_is_pointwise_product(a, b, t):
    lhs = sp.evaluate(sp.conv(a, b), 1.0, t)
    rhs = sp.evaluate(a, 1.0, t) * sp.evaluate(b, 1.0, t)
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(RANDOM_SEEDS), phase, finite)
def test_melnikov_is_real_and_periodic(seed, t0, C):
    sys_ = random_system(seed)
    ctx = resonance_context(sys_, 1, 1)
    m = melnikov_value(sys_, ctx, t0, C)
    assert np.isrealobj(m) or abs(np.imag(m)) == 0
    assert np.isclose(m, melnikov_value(sys_, ctx, t0 + 2 * np.pi, C), rtol=1e-12, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(RANDOM_SEEDS), phase)
def test_series_spectra_are_hermitian(seed, t0):
    sys_ = random_system(seed)
    ctx = resonance_context(sys_, 1, 1)
    state = run_series(sys_, ctx, t0, 2)
    for k in range(3):
        for kind in ("alpha", "A"):
            spec = state.spectrum(kind, k)
            for nu, v in spec.items():
                assert np.isclose(spec.get(-nu, 0.0), np.conj(v), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-3, 0.3))
def test_curves_are_odd_in_eps(eps):
    surf = c_surface(SYS_A_PRIME, resonance_context(SYS_A_PRIME, 1, 1), 3)
    c = bifurcation_curves(surf, [-eps, eps])
    assert c.gamma1[1] >= c.gamma2[1] and c.gamma1[0] <= c.gamma2[0]


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_formatting_round_trips(x):
    assert float(fmt(x)) == x
    assert not fmt(x).startswith("-0") or x != 0
