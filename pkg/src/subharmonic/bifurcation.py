"""Bifurcation curves in the (eps, gamma) plane.

``C(eps, t0) = sum_k eps^k C_k(t0)`` is tabulated on a uniform phase grid.
Each ``C_k`` is a trigonometric polynomial in ``t0``, so the table is turned
into exact Fourier coefficients and every later step (extrema, stationary
phases, root counting) works on the interpolant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import AllStationary, MalformedConfig
from .series import run_series
from .trigsys import ResonanceContext, TrigSystem

__all__ = [
    "CSurface",
    "BifurcationCurves",
    "StationaryPoint",
    "Degeneracy",
    "CountResult",
    "default_grid_size",
    "c_surface",
    "interpolation_defect",
    "bifurcation_curves",
    "stationary_phases",
    "degeneracy_order",
    "subharmonic_roots",
    "count_subharmonics",
]

CONST_TOL = 1e-9
FLAT_TOL = 1e-8
ROOT_CLUSTER = 1e-6


def default_grid_size(sys: TrigSystem, K: int) -> int:
    """Smallest power of two >= 8 (1 + 3 K max|sigma|)."""
    need = 8 * (1 + 3 * K * sys.max_sigma())
    return 1 << max(3, int(np.ceil(np.log2(need))))


@dataclass(frozen=True)
class CSurface:
    ctx: ResonanceContext
    t0_grid: np.ndarray
    Ck: np.ndarray  # shape (K + 1, N_t)
    jet_scale: float

    @property
    def K(self) -> int:
        return self.Ck.shape[0] - 1

    @property
    def fourier(self) -> np.ndarray:
        """Centered coefficients ``c[k, n]`` with ``C_k(t0) = sum_n c[k, n] e^{i n t0}``."""
        return np.fft.fftshift(np.fft.fft(self.Ck, axis=1), axes=1) / self.Ck.shape[1]

    def coefficients(self, eps: float, K: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Fourier coefficients of ``C(eps, .)`` truncated at order ``K`` and their indices."""
        K = self.K if K is None else K
        c = self.fourier[: K + 1]
        n = self.Ck.shape[1]
        idx = np.arange(n) - n // 2
        coef = np.polynomial.polynomial.polyval(eps, c)  # sums over k
        if n % 2 == 0:  # split the Nyquist term so the interpolant is real
            coef = np.concatenate([coef, coef[:1] / 2])
            coef[0] /= 2
            idx = np.concatenate([idx, [n // 2]])
        return coef, idx

    def evaluate(self, eps: float, t0, deriv: int = 0, K: int | None = None):
        coef, idx = self.coefficients(eps, K)
        t0 = np.asarray(t0, dtype=float)
        ph = np.exp(1j * np.multiply.outer(t0, idx))
        return (ph @ (coef * (1j * idx) ** deriv)).real


def c_surface(sys: TrigSystem, ctx: ResonanceContext, K: int, N_t: int | None = None) -> CSurface:
    """Run the series at every grid phase (vectorized over the grid)."""
    if K < 0:
        raise MalformedConfig("K must be >= 0")
    N_t = default_grid_size(sys, K) if N_t is None else int(N_t)
    t0 = 2 * np.pi * np.arange(N_t) / N_t
    state = run_series(sys, ctx, t0, K, mode="C")
    return CSurface(ctx, t0, np.array(state.C, dtype=float), state.scale)


def interpolation_defect(surf: CSurface, sys: TrigSystem, n_control: int = 7) -> float:
    """Max gap between the interpolant and fresh series runs at off-grid phases."""
    t = (np.arange(n_control) + 0.37) * 2 * np.pi / n_control
    state = run_series(sys, surf.ctx, t, surf.K, mode="C")
    ref = np.array(state.C)
    c, idx = surf.fourier, np.arange(surf.Ck.shape[1]) - surf.Ck.shape[1] // 2
    worst = 0.0
    for k in range(surf.K + 1):
        cc, ii = c[k], idx
        if len(idx) % 2 == 0:
            cc = np.concatenate([cc, cc[:1] / 2])
            cc[0] /= 2
            ii = np.concatenate([idx, [len(idx) // 2]])
        val = (np.exp(1j * np.multiply.outer(t, ii)) @ cc).real
        worst = max(worst, float(np.max(np.abs(val - ref[k]))))
    return worst


def _refine(surf: CSurface, eps: float, t: float, K: int | None) -> float:
    for _ in range(20):
        d1 = surf.evaluate(eps, t, 1, K)
        d2 = surf.evaluate(eps, t, 2, K)
        if d2 == 0.0:
            break
        step = d1 / d2
        if abs(step) > 0.1:
            break
        t -= step
        if abs(step) < 1e-15:
            break
    return float(np.mod(t, 2 * np.pi))


def _extremes(surf: CSurface, eps: float, K: int | None):
    fine = np.linspace(0, 2 * np.pi, 8 * surf.Ck.shape[1], endpoint=False)
    v = surf.evaluate(eps, fine, 0, K)
    out = []
    for i, better in ((int(np.argmax(v)), np.greater_equal), (int(np.argmin(v)), np.less_equal)):
        t = _refine(surf, eps, fine[i], K)
        vt = float(surf.evaluate(eps, t, 0, K))
        if not better(vt, v[i]):
            t, vt = float(fine[i]), float(v[i])
        out.append((t, vt))
    return out


@dataclass(frozen=True)
class BifurcationCurves:
    eps_grid: np.ndarray
    gamma1: np.ndarray
    gamma2: np.ndarray
    tau1: np.ndarray
    tau2: np.ndarray
    kstar: int | None


def bifurcation_curves(surf: CSurface, eps_grid, K: int | None = None) -> BifurcationCurves:
    """``gamma1 = eps sup C(eps, .)``, ``gamma2 = eps inf C(eps, .)``."""
    eps_grid = np.asarray(eps_grid, dtype=float)
    g1, g2, t1, t2 = (np.empty_like(eps_grid) for _ in range(4))
    for i, eps in enumerate(eps_grid):
        (tmax, vmax), (tmin, vmin) = _extremes(surf, float(eps), K)
        g1[i], g2[i], t1[i], t2[i] = eps * vmax, eps * vmin, tmax, tmin
    return BifurcationCurves(eps_grid, g1, g2, t1, t2, degeneracy_order(surf).kstar)


@dataclass(frozen=True)
class StationaryPoint:
    t0: float
    kind: str  # "min", "max" or "saddle-flat"


def _is_constant(coef: np.ndarray, idx: np.ndarray, scale: float) -> bool:
    return bool(np.all(np.abs(coef[idx != 0]) <= CONST_TOL * scale))


def stationary_phases(surf: CSurface, eps: float, K: int | None = None) -> list[StationaryPoint]:
    """Zeros of ``dC/dt0`` on ``[0, 2 pi)`` with second-derivative classification."""
    coef, idx = surf.coefficients(eps, K)
    scale = max(float(np.max(np.abs(coef))), surf.jet_scale, np.finfo(float).tiny)
    if _is_constant(coef, idx, scale):
        raise AllStationary("C(eps, t0) does not depend on t0")
    n = 16 * surf.Ck.shape[1]
    grid = np.linspace(0, 2 * np.pi, n + 1)
    d = surf.evaluate(eps, grid, 1, K)
    found = []
    for i in range(n):
        a, b = grid[i], grid[i + 1]
        if d[i] == 0.0:
            found.append(a)
        elif d[i] * d[i + 1] < 0:
            found.append(brentq(lambda t: surf.evaluate(eps, t, 1, K), a, b, xtol=1e-15, rtol=1e-15))
    for i in range(n):  # even-multiplicity zeros show up as touching minima of |d|
        prev = d[i - 1] if i else d[n - 1]  # grid is periodic: grid[n] == grid[0] + 2 pi
        if abs(d[i]) < abs(prev) and abs(d[i]) < abs(d[i + 1]) and prev * d[i + 1] > 0:
            t = _refine_flat(surf, eps, grid[i], K)
            if abs(surf.evaluate(eps, t, 1, K)) <= FLAT_TOL * scale:
                found.append(t)
    out = []
    for t in sorted(np.mod(found, 2 * np.pi)):
        if out and abs(t - out[-1].t0) < 1e-9:
            continue
        c2 = float(surf.evaluate(eps, t, 2, K))
        kind = "saddle-flat" if abs(c2) <= FLAT_TOL * scale else ("min" if c2 > 0 else "max")
        out.append(StationaryPoint(float(t), kind))
    if len(out) > 1 and out[0].t0 + 2 * np.pi - out[-1].t0 < 1e-9:
        out.pop()
    return out


def _refine_flat(surf, eps, t, K):
    for _ in range(50):
        d2 = surf.evaluate(eps, t, 2, K)
        d3 = surf.evaluate(eps, t, 3, K)
        if d3 == 0.0:
            break
        step = d2 / d3
        if abs(step) > 0.1:
            break
        t -= step
        if abs(step) < 1e-15:
            break
    return float(t)


@dataclass(frozen=True)
class Degeneracy:
    """First order whose row depends on ``t0`` (``kstar is None`` if none through ``K``)."""

    kstar: int | None
    K: int
    nondegenerate: bool
    curvature_at_extremes: tuple[float, float]

    @property
    def all_constant(self) -> bool:
        return self.kstar is None


def degeneracy_order(surf: CSurface, tol_rel: float = CONST_TOL) -> Degeneracy:
    c = surf.fourier
    idx = np.arange(c.shape[1]) - c.shape[1] // 2
    for k in range(surf.K + 1):
        row = surf.Ck[k]
        scale = max(float(np.max(np.abs(row))), surf.jet_scale, np.finfo(float).tiny)
        if np.ptp(row) > tol_rel * scale:
            coef = c[k]
            ev = lambda t, d: float((np.exp(1j * idx * t) @ (coef * (1j * idx) ** d)).real)  # noqa: E731
            fine = np.linspace(0, 2 * np.pi, 8 * len(row), endpoint=False)
            vals = np.array([ev(t, 0) for t in fine])
            curv = []
            for t in (fine[np.argmin(vals)], fine[np.argmax(vals)]):
                for _ in range(20):
                    d2 = ev(t, 2)
                    if d2 == 0:
                        break
                    step = ev(t, 1) / d2
                    t -= step
                    if abs(step) < 1e-15:
                        break
                curv.append(ev(t, 2))
            nondeg = all(abs(x) > FLAT_TOL * scale for x in curv)
            return Degeneracy(k, surf.K, nondeg, (curv[0], curv[1]))
    return Degeneracy(None, surf.K, False, (0.0, 0.0))


@dataclass(frozen=True)
class CountResult:
    count: int
    roots: list[float]
    outside_range: bool


def subharmonic_roots(surf: CSurface, eps: float, gamma: float, K: int | None = None) -> CountResult:
    """Roots of ``eps C(eps, t0) = gamma`` over ``[0, 2 pi q)``; tangential roots count once."""
    ctx = surf.ctx
    if ctx.p != 1:
        raise MalformedConfig("counting is only defined for p = 1")
    curves = bifurcation_curves(surf, [eps], K)
    lo, hi = sorted((float(curves.gamma1[0]), float(curves.gamma2[0])))
    slack = 1e-12 * max(abs(lo), abs(hi), 1e-300)
    if not lo - slack <= gamma <= hi + slack:
        return CountResult(0, [], True)
    coef, idx = surf.coefficients(eps, K)
    coef = eps * coef
    coef[idx == 0] -= gamma
    scale = max(float(np.max(np.abs(coef))), np.finfo(float).tiny)
    if np.all(np.abs(coef) <= 1e-14 * scale) or _is_constant(coef, idx, max(abs(gamma), scale)):
        raise AllStationary("eps C(eps, t0) - gamma is independent of t0")
    keep = np.abs(coef) > 1e-14 * scale
    lo_i, hi_i = idx[keep].min(), idx[keep].max()
    poly = np.zeros(hi_i - lo_i + 1, dtype=complex)
    for c, n in zip(coef, idx):
        if lo_i <= n <= hi_i:
            poly[n - lo_i] += c
    z = np.polynomial.polynomial.polyroots(poly) if len(poly) > 1 else np.array([])
    z = z[np.abs(np.abs(z) - 1.0) <= ROOT_CLUSTER ** 0.5]
    angles = np.sort(np.mod(np.angle(z), 2 * np.pi))

    def f(t):
        return eps * surf.evaluate(eps, t, 0, K) - gamma

    polished = []
    for t in angles:
        for _ in range(5):
            d = eps * surf.evaluate(eps, t, 1, K)
            if abs(d) <= FLAT_TOL * abs(eps) * scale:
                break
            t -= f(t) / d
        t = float(np.mod(t, 2 * np.pi))
        polished.append(0.0 if t > 2 * np.pi - 1e-14 or t < 1e-14 else t)
    roots: list[float] = []
    for t in sorted(polished):
        if roots and abs(t - roots[-1]) <= ROOT_CLUSTER:
            continue
        roots.append(t)
    if len(roots) > 1 and roots[0] + 2 * np.pi - roots[-1] <= ROOT_CLUSTER:
        roots.pop()
    q = ctx.q
    full = sorted(r + 2 * np.pi * j for j in range(q) for r in roots)
    return CountResult(len(full), full, False)


def count_subharmonics(surf: CSurface, eps: float, gamma: float, K: int | None = None) -> int:
    return subharmonic_roots(surf, eps, gamma, K).count
