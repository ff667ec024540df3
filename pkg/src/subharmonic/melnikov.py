"""Subharmonic Melnikov function and the root curve C0(t0).

For a resonance ``omega(A0) = p/q`` only the modes of ``G`` with
``nu0 * p + sigma0 * q == 0`` survive the average over one period, so

    M(t0, C) = sum_{resonant} exp(i sigma0 t0) G_{nu0, sigma0}(A0, C)

is an exact, finite trigonometric polynomial in ``t0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    BadOrbit,
    HierarchyExhausted,
    Hyp2ViolatedDegenerate,
    Hyp2ViolatedNoRoot,
)
from .mechanical import MechanicalSystem, mechanical_C0
from .trigsys import ResonanceContext, TrigSystem, jets_at

__all__ = [
    "MelnikovCurve",
    "MechanicalSystem",
    "melnikov_value",
    "melnikov_dC",
    "melnikov_derivative_t0",
    "solve_C0",
    "solve_C0_many",
    "melnikov_curve",
    "melnikov_planar",
    "melnikov_hierarchy",
    "mechanical_C0",
    "phase_derivative_sides",
]

HYP2_TOL = 1e-10
HIERARCHY_TOL = 1e-10


def resonant_modes(sys: TrigSystem, ctx: ResonanceContext):
    return [m for m in sys.g_modes if m.momentum(ctx.p, ctx.q) == 0]


def _mode_sum(sys, ctx, t0, C, weight, poly):
    t0 = np.asarray(t0, dtype=float)
    C = np.asarray(C, dtype=float)
    out = np.zeros(np.broadcast(t0, C).shape, dtype=complex)
    for m in resonant_modes(sys, ctx):
        out = out + weight(m) * np.exp(1j * m.sigma * t0) * poly(m, C)
    return out


def melnikov_value(sys: TrigSystem, ctx: ResonanceContext, t0, C):
    """M(t0, C); broadcasts over ``t0`` and ``C``."""
    out = _mode_sum(sys, ctx, t0, C, lambda m: 1.0, lambda m, C: m.poly(ctx.A0, C))
    return out.real if out.ndim else float(out.real)


def melnikov_dC(sys: TrigSystem, ctx: ResonanceContext, t0, C):
    out = _mode_sum(sys, ctx, t0, C, lambda m: 1.0, lambda m, C: m.taylor(ctx.A0, C, 0, 1))
    return out.real if out.ndim else float(out.real)


def melnikov_derivative_t0(sys: TrigSystem, ctx: ResonanceContext, t0, C):
    """dM/dt0, differentiating the exponentials exactly."""
    out = _mode_sum(sys, ctx, t0, C, lambda m: 1j * m.sigma, lambda m, C: m.poly(ctx.A0, C))
    return out.real if out.ndim else float(out.real)


def _C_polynomial(sys, ctx, t0: float) -> np.ndarray:
    """Real coefficients (ascending in C) of C -> M(t0, C)."""
    modes = resonant_modes(sys, ctx)
    deg = max((m.deg_C for m in modes), default=0)
    coef = np.zeros(deg + 1, dtype=complex)
    for m in modes:
        ph = np.exp(1j * m.sigma * t0)
        for a, c, v in m.coeff:
            coef[c] += ph * v * ctx.A0**a
    return coef.real


def solve_C0(
    sys: TrigSystem,
    ctx: ResonanceContext,
    t0: float,
    bracket: tuple[float, float] = (-10.0, 10.0),
) -> tuple[float, float]:
    """Root ``C0`` of ``C -> M(t0, C)`` and ``D = dM/dC`` there.

    Among the real roots the one nearest to zero inside the bracket is taken;
    the bracket is doubled up to ten times before giving up.
    """
    coef = _C_polynomial(sys, ctx, t0)
    jet_scale = max(jets_at(sys, ctx, 0.0, 1).scale(), np.finfo(float).tiny)
    if len(coef) < 2 or np.all(np.abs(coef[1:]) <= 1e-14 * jet_scale):
        raise Hyp2ViolatedDegenerate(
            f"Melnikov root condition fails: M(t0, C) does not depend on C at t0 = {t0:.17g}"
        )
    roots = np.polynomial.polynomial.polyroots(np.trim_zeros(coef, "b"))
    real = np.array([r.real for r in np.atleast_1d(roots) if abs(r.imag) <= 1e-8 * max(1.0, abs(r))])
    lo, hi = float(bracket[0]), float(bracket[1])
    chosen = None
    for j in range(11):
        inside = real[(real >= lo * 2**j) & (real <= hi * 2**j)]
        if inside.size:
            chosen = float(inside[np.argmin(np.abs(inside))])
            break
    if chosen is None:
        raise Hyp2ViolatedNoRoot(f"Melnikov root condition fails: no real root of M(t0, .) at t0 = {t0:.17g}")
    dcoef = np.polynomial.polynomial.polyder(coef)
    for _ in range(4):
        d = np.polynomial.polynomial.polyval(chosen, dcoef)
        if d == 0.0:
            break
        step = np.polynomial.polynomial.polyval(chosen, coef) / d
        chosen -= step
        if abs(step) <= 1e-16 * max(1.0, abs(chosen)):
            break
    C0 = float(chosen)
    scale = max(jets_at(sys, ctx, C0, 1).scale(), np.finfo(float).tiny)
    D = float(melnikov_dC(sys, ctx, t0, C0))
    if abs(D) < HYP2_TOL * scale:
        raise Hyp2ViolatedDegenerate(
            f"Melnikov root condition fails: dM/dC = {D:.3e} at t0 = {t0:.17g}, C0 = {C0:.17g}"
        )
    return C0, D


def solve_C0_many(sys, ctx, t0s, bracket=(-10.0, 10.0)) -> tuple[np.ndarray, np.ndarray]:
    pairs = [solve_C0(sys, ctx, float(t), bracket) for t in np.atleast_1d(t0s)]
    return np.array([c for c, _ in pairs]), np.array([d for _, d in pairs])


@dataclass(frozen=True)
class MelnikovCurve:
    t0_grid: np.ndarray
    C0_values: np.ndarray
    D_values: np.ndarray
    trig_degree: int


def melnikov_curve(sys: TrigSystem, ctx: ResonanceContext, t0_grid=None, n: int = 64) -> MelnikovCurve:
    if t0_grid is None:
        t0_grid = 2 * np.pi * np.arange(n) / n
    t0_grid = np.asarray(t0_grid, dtype=float)
    C0, D = solve_C0_many(sys, ctx, t0_grid)
    spec = np.fft.rfft(C0) / len(C0)
    cut = 1e-12 * max(1.0, float(np.max(np.abs(C0))))
    big = np.nonzero(np.abs(spec) > cut)[0]
    degree = int(big[-1]) if big.size else 0
    return MelnikovCurve(t0_grid, C0, D, degree)


def melnikov_planar(
    f_field: Callable[[np.ndarray], np.ndarray],
    g_field: Callable[[np.ndarray, np.ndarray], np.ndarray],
    orbit,
    t0: float = 0.0,
    closure_tol: float = 1e-8,
) -> float:
    """(1/T) int_0^T (f1 g2 - f2 g1) dt along a sampled periodic orbit.

    ``orbit`` provides ``t`` (uniform, ``t[0]`` to ``t[-1] = t[0] + T``) and
    ``z`` of shape ``(2, len(t))``; ``f_field(z)`` is the unperturbed field and
    ``g_field(z, t)`` the perturbation, evaluated at ``t + t0``.  The periodic
    trapezoid rule is spectrally accurate here.
    """
    t, z = (orbit.t, orbit.z) if hasattr(orbit, "t") else orbit
    t = np.asarray(t, dtype=float)
    z = np.asarray(z, dtype=float)
    if len(t) < 257:
        raise BadOrbit("need at least 256 samples per period")
    scale = max(1.0, float(np.max(np.abs(z))))
    if np.max(np.abs(z[:, -1] - z[:, 0])) > closure_tol * scale:
        raise BadOrbit(f"orbit does not close: defect {np.max(np.abs(z[:, -1] - z[:, 0])):.3e}")
    zs, ts = z[:, :-1], t[:-1]
    f = f_field(zs)
    g = g_field(zs, ts + t0)
    return float(np.mean(f[0] * g[1] - f[1] * g[0]))


def melnikov_hierarchy(
    sys: TrigSystem,
    ctx: ResonanceContext,
    C_fixed: float,
    K: int,
    t0_grid=None,
) -> list[tuple[int, np.ndarray]]:
    """Levels M_0, M_1, ... on a phase grid, up to the first non-vanishing one.

    Undetermined phase corrections are set to zero while the levels vanish.
    Raises :class:`HierarchyExhausted` if every level through ``K`` vanishes.
    """
    from .series import compute_order, init_state

    if t0_grid is None:
        n = max(16, 8 * (1 + 3 * K * max(1, sys.max_sigma())))
        t0_grid = 2 * np.pi * np.arange(n) / n
    t0_grid = np.asarray(t0_grid, dtype=float)
    state = init_state(sys, ctx, t0_grid, mode="fixed", C_fixed=C_fixed, hierarchy=True)
    tol = HIERARCHY_TOL * state.scale
    levels = []
    for k in range(K + 1):
        if k > 0:
            compute_order(state)
        Mk = np.asarray(state.obstructions[k], dtype=float)
        levels.append((k, Mk))
        if np.max(np.abs(Mk)) > tol:
            return levels
    raise HierarchyExhausted(
        f"all Melnikov levels vanish through order {K}: full-torus persistence candidate", levels
    )


def phase_derivative_sides(sys: TrigSystem, ctx: ResonanceContext, t0, C: float, n_quad: int | None = None):
    """Return ``(omega(A0) <d_alpha G>, -M'(t0))``.

    The left side is a direct time average of the alpha-derivative of ``G``
    along the unperturbed orbit; the right side differentiates the spectral
    formula for ``M``.
    """
    t0 = np.atleast_1d(np.asarray(t0, dtype=float))
    if n_quad is None:
        n_quad = 4 * (sys.max_momentum(ctx.p, ctx.q) + 1) + 16
    t = np.arange(n_quad) * ctx.T / n_quad
    alpha0 = ctx.omega0 * t
    vals = sys.dG_dalpha(alpha0[None, :], ctx.A0, C, t[None, :] + t0[:, None])
    lhs = ctx.omega0 * np.mean(vals, axis=1).real
    rhs = -np.atleast_1d(melnikov_derivative_t0(sys, ctx, t0, C))
    return lhs, rhs
