"""Mechanical oscillators ``x'' + g(x) = eps f(x, t) - gamma x'`` with ``gamma = eps C``.

The unperturbed orbit of a prescribed period is found by root finding on the
energy-period map; first-order Melnikov data are then time averages along it.
Only first order is computed here, the series engine works in action-angle
variables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import BadOrbit, Hyp1Violated, MalformedConfig, NoSuchPeriod

__all__ = [
    "MechanicalSystem",
    "UnperturbedOrbit",
    "MechanicalCurves",
    "orbit_with_period",
    "mechanical_C0",
    "mechanical_curves",
    "mechanical_from_dict",
]

ORBIT_TOL = 1e-12
PERIOD_TOL = 1e-10
N_ORBIT = 1024


@dataclass(frozen=True)
class MechanicalSystem:
    """Restoring force ``g`` (ascending coefficients) and forcing modes.

    ``f_modes`` holds ``(sigma, coeffs)`` pairs meaning
    ``f(x, t) = sum_sigma exp(i sigma t) sum_j coeffs[j] x^j``; conjugate
    partners are added on construction so ``f`` is real.
    """

    g_poly: tuple[float, ...]
    f_modes: tuple[tuple[int, tuple[complex, ...]], ...] = ()
    energy_bracket: tuple[float, float] = (1e-3, 10.0)
    _cache: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    @classmethod
    def build(cls, g, f_modes=(), energy_bracket=(1e-3, 10.0)) -> "MechanicalSystem":
        modes: dict[int, np.ndarray] = {}
        for sigma, coeffs in f_modes:
            sigma = int(sigma)
            if sigma in modes:
                raise MalformedConfig(f"duplicate forcing mode sigma={sigma}")
            modes[sigma] = np.asarray(coeffs, dtype=complex)
        for sigma in list(modes):
            if -sigma not in modes:
                modes[-sigma] = np.conj(modes[sigma])
            elif not np.allclose(modes[-sigma], np.conj(modes[sigma]), rtol=0, atol=1e-14):
                raise MalformedConfig(f"forcing modes {sigma} and {-sigma} are not conjugate")
        if 0 in modes and np.any(np.abs(modes[0].imag) > 1e-14):
            raise MalformedConfig("the sigma=0 forcing mode must be real")
        packed = tuple((s, tuple(complex(c) for c in modes[s])) for s in sorted(modes))
        lo, hi = map(float, energy_bracket)
        if not lo < hi:
            raise MalformedConfig("energy bracket must satisfy lo < hi")
        return cls(tuple(float(c) for c in g), packed, (lo, hi))

    def g(self, x):
        return np.polynomial.polynomial.polyval(x, self.g_poly)

    def potential(self, x):
        return np.polynomial.polynomial.polyval(x, np.polynomial.polynomial.polyint(self.g_poly))

    def energy(self, x, y):
        return 0.5 * np.asarray(y) ** 2 + self.potential(x)

    def forcing(self, x, t):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        out = np.zeros(np.broadcast(x, t).shape, dtype=complex)
        for sigma, coeffs in self.f_modes:
            out = out + np.exp(1j * sigma * t) * np.polynomial.polynomial.polyval(x, coeffs)
        return out.real

    def equilibrium(self) -> float:
        """Stable equilibrium nearest to the origin."""
        roots = np.polynomial.polynomial.polyroots(self.g_poly) if len(self.g_poly) > 1 else []
        dg = np.polynomial.polynomial.polyder(self.g_poly)
        stable = [
            float(r.real)
            for r in np.atleast_1d(roots)
            if abs(r.imag) < 1e-9 and np.polynomial.polynomial.polyval(r.real, dg) >= 0
        ]
        if not stable:
            raise BadOrbit("g has no stable equilibrium")
        return min(stable, key=abs)


@dataclass(frozen=True)
class UnperturbedOrbit:
    """One period of the unperturbed orbit, sampled uniformly (endpoint included)."""

    energy: float
    period: float
    t: np.ndarray
    z: np.ndarray
    dT_dE: float


def _period_of(mech: MechanicalSystem, E: float, dense: bool = False):
    xe = mech.equilibrium()
    v = E - float(mech.potential(xe))
    if v <= 0:
        raise NoSuchPeriod(f"energy {E} lies below the equilibrium energy")
    z0 = np.array([xe, math.sqrt(2.0 * v)])

    def rhs(t, z):
        return [z[1], -mech.g(z[0])]

    def leave(t, z):
        return z[0] - xe

    leave.terminal, leave.direction = True, -1.0

    def back(t, z):
        return z[0] - xe

    back.terminal, back.direction = True, 1.0
    horizon = 1e4
    first = solve_ivp(rhs, (0.0, horizon), z0, method="DOP853", rtol=ORBIT_TOL, atol=ORBIT_TOL, events=leave)
    if not first.t_events[0].size:
        raise NoSuchPeriod(f"orbit at energy {E} does not return")
    t1, z1 = first.t_events[0][0], first.y_events[0][0]
    second = solve_ivp(
        rhs, (t1, t1 + horizon), z1, method="DOP853", rtol=ORBIT_TOL, atol=ORBIT_TOL, events=back
    )
    if not second.t_events[0].size:
        raise NoSuchPeriod(f"orbit at energy {E} does not close")
    T = float(second.t_events[0][0])
    if not dense:
        return T
    sol = solve_ivp(
        rhs, (0.0, T), z0, method="DOP853", rtol=ORBIT_TOL, atol=ORBIT_TOL, dense_output=True
    )
    return T, sol, z0


def orbit_with_period(
    mech: MechanicalSystem,
    T0_target: float,
    E_bracket: tuple[float, float] | None = None,
    n_samples: int = N_ORBIT,
) -> UnperturbedOrbit:
    """Unperturbed orbit of period ``T0_target`` (cached on ``mech``)."""
    E_bracket = tuple(E_bracket or mech.energy_bracket)
    key = (float(T0_target), E_bracket, int(n_samples))
    if key in mech._cache:
        return mech._cache[key]
    if n_samples < 512:
        raise MalformedConfig("need at least 512 orbit samples")
    Es = np.geomspace(*E_bracket, 9) if E_bracket[0] > 0 else np.linspace(*E_bracket, 9)
    Ts = np.array([_period_of(mech, float(E)) for E in Es])
    dT = np.diff(Ts)
    if np.all(np.abs(dT) <= PERIOD_TOL * np.max(Ts)):
        if abs(Ts[0] - T0_target) <= 1e-8 * T0_target:
            raise Hyp1Violated("anisochronicity fails: period map is flat (isochronous oscillator)")
        raise NoSuchPeriod(f"period is {Ts[0]:.12g} for every energy, never {T0_target:.12g}")
    if not (np.all(dT > 0) or np.all(dT < 0)):
        raise Hyp1Violated("anisochronicity fails: period map is not monotone on the energy bracket")
    if not min(Ts[0], Ts[-1]) <= T0_target <= max(Ts[0], Ts[-1]):
        raise NoSuchPeriod(
            f"period {T0_target:.12g} outside [{min(Ts[0], Ts[-1]):.6g}, {max(Ts[0], Ts[-1]):.6g}]"
        )
    i = int(np.searchsorted(Ts if dT[0] > 0 else -Ts, T0_target if dT[0] > 0 else -T0_target))
    lo, hi = Es[max(i - 1, 0)], Es[min(i, len(Es) - 1)]
    E = brentq(lambda e: _period_of(mech, e) - T0_target, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
    T, sol, z0 = _period_of(mech, E, dense=True)
    if abs(T - T0_target) > PERIOD_TOL * max(1.0, T0_target):
        raise NoSuchPeriod(f"period solve stalled at |T - target| = {abs(T - T0_target):.3e}")
    h = 1e-6 * max(1.0, E)
    dTdE = (_period_of(mech, E + h) - _period_of(mech, E - h)) / (2 * h)
    if abs(dTdE) < 1e-10:
        raise Hyp1Violated(f"anisochronicity fails: dT/dE = {dTdE:.3e} at E = {E:.17g}")
    t = np.linspace(0.0, T, n_samples + 1)
    z = sol.sol(t)
    z[:, -1] = z0  # exact closure by construction; defect checked below
    defect = np.max(np.abs(sol.sol(T) - z0))
    if defect > 1e-9 * max(1.0, float(np.max(np.abs(z)))):
        raise BadOrbit(f"unperturbed orbit does not close: defect {defect:.3e}")
    orbit = UnperturbedOrbit(float(E), float(T), t, z, float(dTdE))
    mech._cache[key] = orbit
    return orbit


def _averages(mech: MechanicalSystem, p: int, q: int, E_bracket=None):
    """``<y0^2>`` and ``c_sigma = <y0 P_sigma(x0) e^{i sigma t}>`` over ``T = 2 pi q``."""
    if p < 1 or q < 1 or math.gcd(p, q) != 1:
        raise MalformedConfig(f"need coprime p, q >= 1, got p={p}, q={q}")
    orbit = orbit_with_period(mech, 2 * math.pi * q / p, E_bracket)
    n = orbit.t.size - 1
    x = np.tile(orbit.z[0, :-1], p)
    y = np.tile(orbit.z[1, :-1], p)
    t = np.arange(p * n) * (orbit.period / n)
    y2 = float(np.mean(y * y))
    coeffs = {
        sigma: complex(np.mean(y * np.polynomial.polynomial.polyval(x, c) * np.exp(1j * sigma * t)))
        for sigma, c in mech.f_modes
    }
    scale = float(np.mean(np.abs(y))) * max(
        (float(np.max(np.abs(np.polynomial.polynomial.polyval(x, c)))) for _, c in mech.f_modes),
        default=0.0,
    )
    return orbit, y2, coeffs, scale


def mechanical_C0(mech: MechanicalSystem, p: int, q: int, t0, E_bracket=None):
    """``C0(t0) = <y0 f(x0, . + t0)> / <y0^2>`` for the orbit of period ``2 pi q / p``."""
    _, y2, coeffs, _ = _averages(mech, p, q, E_bracket)
    t0a = np.asarray(t0, dtype=float)
    out = np.zeros(t0a.shape, dtype=complex)
    for sigma, c in coeffs.items():
        out = out + c * np.exp(1j * sigma * t0a)
    out = out.real / y2
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class MechanicalCurves:
    t0_grid: np.ndarray
    C0: np.ndarray
    eps_grid: np.ndarray
    gamma1: np.ndarray
    gamma2: np.ndarray
    mean_C0: float
    zero_mean: bool
    degenerate: bool
    energy: float


def mechanical_curves(mech: MechanicalSystem, p: int, q: int, eps_grid, N_t: int = 64, E_bracket=None):
    """First-order curves ``gamma ~ eps * extremes of C0`` and the zero-mean check."""
    orbit, y2, coeffs, scale = _averages(mech, p, q, E_bracket)
    t0 = 2 * np.pi * np.arange(N_t) / N_t
    C0 = np.asarray(mechanical_C0(mech, p, q, t0, E_bracket))
    mean = float(np.mean(C0))
    big = max(float(np.max(np.abs(C0))), scale / y2 if y2 > 0 else 0.0)
    degenerate = bool(np.max(np.abs(C0)) <= 1e-10 * max(big, np.finfo(float).tiny))
    zero_mean = abs(mean) <= 1e-10 * max(big, np.finfo(float).tiny)
    eps = np.asarray(eps_grid, dtype=float)
    hi, lo = float(np.max(C0)), float(np.min(C0))
    g1 = np.where(eps >= 0, eps * hi, eps * lo)
    g2 = np.where(eps >= 0, eps * lo, eps * hi)
    return MechanicalCurves(t0, C0, eps, g1, g2, mean, zero_mean, degenerate, orbit.energy)


def _coeff(v, where: str) -> complex:
    if isinstance(v, bool):
        raise MalformedConfig(f"{where} must be a number or [re, im]")
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, list) and len(v) == 2 and all(isinstance(u, (int, float)) for u in v):
        return complex(v[0], v[1])
    raise MalformedConfig(f"{where} must be a number or [re, im]")


def mechanical_from_dict(data: Mapping) -> MechanicalSystem:
    """Read a ``[mechanical]`` table: ``g``, optional ``energy_bracket``, ``f_modes``."""
    mtab = data.get("mechanical")
    if not isinstance(mtab, dict):
        raise MalformedConfig("missing [mechanical] table")
    unknown = set(mtab) - {"g", "f_modes", "energy_bracket"}
    if unknown:
        raise MalformedConfig(f"unknown keys in [mechanical]: {sorted(unknown)}")
    g = mtab.get("g")
    if not isinstance(g, list) or not g or not all(isinstance(c, (int, float)) for c in g):
        raise MalformedConfig("mechanical.g must be a non-empty array of numbers")
    modes = []
    for i, e in enumerate(mtab.get("f_modes", [])):
        if not isinstance(e, dict) or set(e) != {"sigma", "coeff_x"}:
            raise MalformedConfig(f"mechanical.f_modes[{i}] needs exactly sigma and coeff_x")
        if isinstance(e["sigma"], bool) or not isinstance(e["sigma"], int):
            raise MalformedConfig(f"mechanical.f_modes[{i}].sigma must be an integer")
        if not isinstance(e["coeff_x"], list):
            raise MalformedConfig(f"mechanical.f_modes[{i}].coeff_x must be an array")
        cs = [_coeff(v, f"mechanical.f_modes[{i}].coeff_x[{j}]") for j, v in enumerate(e["coeff_x"])]
        modes.append((e["sigma"], cs))
    bracket = mtab.get("energy_bracket", (1e-3, 10.0))
    if not isinstance(bracket, (list, tuple)) or len(bracket) != 2:
        raise MalformedConfig("mechanical.energy_bracket must be [lo, hi]")
    return MechanicalSystem.build(g, modes, tuple(bracket))
