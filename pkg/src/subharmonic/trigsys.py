"""Exact spectral model of a periodically perturbed action-angle system.

The system is

    alpha' = omega(A) + eps * F(alpha, A, C, t)
    A'     = eps * G(alpha, A, C, t)

with ``omega`` a real polynomial and ``F``, ``G`` finite sums of modes
``exp(i*nu*alpha) * exp(i*sigma*t) * P(A, C)``, ``P`` a bivariate polynomial
with complex coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import (
    Hyp1Violated,
    MalformedConfig,
    NoResonance,
    RealityViolation,
)

try:  # pragma: no cover - exercised depending on interpreter
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

__all__ = [
    "Mode",
    "TrigSystem",
    "ResonanceContext",
    "JetTable",
    "parse_config",
    "parse_system",
    "system_from_dict",
    "resonance_context",
    "jets_at",
]

HYP1_TOL = 1e-10
REALITY_TOL = 1e-14


@dataclass(frozen=True)
class Mode:
    """One Fourier mode ``exp(i nu alpha + i sigma t) * P(A, C)``.

    ``coeff`` holds ``(degA, degC, value)`` triples, sorted and merged.
    """

    nu: int
    sigma: int
    coeff: tuple[tuple[int, int, complex], ...]

    @classmethod
    def from_terms(cls, nu: int, sigma: int, terms: Iterable[tuple[int, int, complex]]) -> "Mode":
        merged: dict[tuple[int, int], complex] = {}
        for a, c, v in terms:
            if a < 0 or c < 0:
                raise MalformedConfig(f"negative degree in mode ({nu}, {sigma})")
            merged[(int(a), int(c))] = merged.get((int(a), int(c)), 0j) + complex(v)
        items = tuple((a, c, v) for (a, c), v in sorted(merged.items()) if v != 0)
        return cls(int(nu), int(sigma), items)

    @property
    def key(self) -> tuple[int, int]:
        return (self.nu, self.sigma)

    @property
    def deg_A(self) -> int:
        return max((a for a, _, _ in self.coeff), default=0)

    @property
    def deg_C(self) -> int:
        return max((c for _, c, _ in self.coeff), default=0)

    def momentum(self, p: int, q: int) -> int:
        return self.nu * p + self.sigma * q

    def conjugate(self) -> "Mode":
        return Mode(-self.nu, -self.sigma, tuple((a, c, v.conjugate()) for a, c, v in self.coeff))

    def poly(self, A, C):
        out = 0j
        for a, c, v in self.coeff:
            out = out + v * np.power(A, a) * np.power(C, c)
        return out

    def taylor(self, A0: float, C0, r2: int, r3: int):
        """``(d_A^r2 d_C^r3 / r2! r3!) P`` at ``(A0, C0)``; ``C0`` may be an array."""
        out = np.zeros(np.shape(C0), dtype=complex) if np.ndim(C0) else 0j
        for a, c, v in self.coeff:
            if a < r2 or c < r3:
                continue
            out = out + v * math.comb(a, r2) * math.comb(c, r3) * A0 ** (a - r2) * np.power(C0, c - r3)
        return out

    def magnitude(self) -> float:
        return max((abs(v) for _, _, v in self.coeff), default=0.0)


def _check_modes(modes: Sequence[Mode], label: str, realify: bool) -> tuple[Mode, ...]:
    by_key: dict[tuple[int, int], Mode] = {}
    for m in modes:
        if m.key in by_key:
            raise MalformedConfig(f"duplicate {label} mode {m.key}")
        by_key[m.key] = m
    scale = max((m.magnitude() for m in modes), default=0.0)
    for key, m in list(by_key.items()):
        partner = by_key.get((-m.nu, -m.sigma))
        if partner is None:
            if not realify:
                raise RealityViolation(f"{label} mode {key} has no conjugate partner")
            by_key[(-m.nu, -m.sigma)] = m.conjugate()
            continue
        want = dict(((a, c), v) for a, c, v in m.conjugate().coeff)
        have = dict(((a, c), v) for a, c, v in partner.coeff)
        for k in set(want) | set(have):
            if abs(want.get(k, 0j) - have.get(k, 0j)) > REALITY_TOL * max(scale, 1.0):
                raise RealityViolation(
                    f"{label} modes {key} and {partner.key} are not complex conjugates"
                )
    return tuple(by_key[k] for k in sorted(by_key))


@dataclass(frozen=True)
class TrigSystem:
    omega_poly: tuple[float, ...]
    f_modes: tuple[Mode, ...] = ()
    g_modes: tuple[Mode, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "omega_poly", tuple(float(c) for c in self.omega_poly))

    @classmethod
    def build(cls, omega_poly, f_modes=(), g_modes=(), realify: bool = True) -> "TrigSystem":
        if len(omega_poly) == 0:
            raise MalformedConfig("omega polynomial is empty")
        return cls(
            tuple(omega_poly),
            _check_modes(list(f_modes), "F", realify),
            _check_modes(list(g_modes), "G", realify),
        )

    def modes(self, which: str) -> tuple[Mode, ...]:
        return self.f_modes if which == "F" else self.g_modes

    def omega(self, A):
        return np.polynomial.polynomial.polyval(A, self.omega_poly)

    def omega_derivative(self, A, order: int = 1):
        c = np.polynomial.polynomial.polyder(self.omega_poly, order) if order else self.omega_poly
        return np.polynomial.polynomial.polyval(A, c)

    @property
    def omega_degree(self) -> int:
        nz = [i for i, c in enumerate(self.omega_poly) if c != 0.0]
        return max(nz, default=0)

    def max_momentum(self, p: int, q: int) -> int:
        return max((abs(m.momentum(p, q)) for m in self.f_modes + self.g_modes), default=0)

    def max_sigma(self) -> int:
        return max((abs(m.sigma) for m in self.f_modes + self.g_modes), default=0)

    def _evaluate(self, modes, alpha, A, C, t):
        alpha, A, C, t = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (alpha, A, C, t)))
        out = np.zeros(alpha.shape, dtype=complex)
        for m in modes:
            out += np.exp(1j * (m.nu * alpha + m.sigma * t)) * m.poly(A, C)
        return out

    def F(self, alpha, A, C, t):
        """Complex sum of the F modes; real up to rounding."""
        return self._evaluate(self.f_modes, alpha, A, C, t)

    def G(self, alpha, A, C, t):
        return self._evaluate(self.g_modes, alpha, A, C, t)

    def dG_dalpha(self, alpha, A, C, t):
        alpha, A, C, t = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (alpha, A, C, t)))
        out = np.zeros(alpha.shape, dtype=complex)
        for m in self.g_modes:
            out += 1j * m.nu * np.exp(1j * (m.nu * alpha + m.sigma * t)) * m.poly(A, C)
        return out


@dataclass(frozen=True)
class ResonanceContext:
    p: int
    q: int
    A0: float
    omega0: float
    omega_prime: float
    T: float = field(init=False)
    omega_small: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "T", 2.0 * math.pi * self.q)
        object.__setattr__(self, "omega_small", 1.0 / self.q)


def resonance_context(
    sys: TrigSystem,
    p: int,
    q: int,
    bracket: tuple[float, float] | None = None,
    A0: float | None = None,
) -> ResonanceContext:
    """Solve ``omega(A0) = p/q`` and check that the frequency map is not flat there.

    Without ``bracket`` or ``A0`` the smallest positive real root of the
    polynomial is used (smallest in modulus if none is positive).
    """
    p, q = int(p), int(q)
    if q < 1 or math.gcd(p, q) != 1:
        raise MalformedConfig(f"need coprime p, q with q >= 1, got p={p}, q={q}")
    target = p / q
    shifted = np.array(sys.omega_poly, dtype=float)
    shifted[0] -= target
    if not np.any(shifted[1:]):
        if shifted[0] == 0.0:
            raise Hyp1Violated("anisochronicity fails: omega(A) is constant")
        raise NoResonance(f"omega(A) is constant and never equals {p}/{q}")

    def f(A):
        return float(np.polynomial.polynomial.polyval(A, shifted))

    if A0 is None:
        if bracket is None:
            roots = np.polynomial.polynomial.polyroots(shifted)
            real = sorted(float(r.real) for r in roots if abs(r.imag) <= 1e-9 * max(1.0, abs(r)))
            if not real:
                raise NoResonance(f"omega(A) = {p}/{q} has no real solution")
            pos = [r for r in real if r > 0]
            r0 = pos[0] if pos else min(real, key=abs)
            delta = 1e-6 * max(1.0, abs(r0))
            bracket = (r0 - delta, r0 + delta)
        a, b = float(bracket[0]), float(bracket[1])
        fa, fb = f(a), f(b)
        if fa == 0.0:
            A0 = a
        elif fb == 0.0:
            A0 = b
        elif fa * fb > 0:
            raise NoResonance(f"omega(A) - {p}/{q} does not change sign on [{a}, {b}]")
        else:
            A0 = brentq(f, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    A0 = float(A0)
    for _ in range(3):
        d = float(sys.omega_derivative(A0))
        if d == 0.0:
            break
        step = f(A0) / d
        A0 -= step
        if abs(step) <= 1e-16 * max(1.0, abs(A0)):
            break
    wp = float(sys.omega_derivative(A0))
    if abs(wp) < HYP1_TOL:
        raise Hyp1Violated(f"anisochronicity fails: omega'(A0) = {wp:.3e} at A0 = {A0:.17g}")
    if abs(f(A0)) > 1e-12 * max(1.0, abs(target)):
        raise NoResonance(f"could not solve omega(A) = {p}/{q} to tolerance (residual {f(A0):.3e})")
    return ResonanceContext(p=p, q=q, A0=A0, omega0=float(sys.omega(A0)), omega_prime=wp)


@dataclass(frozen=True)
class JetTable:
    """Taylor coefficients ``(d_A^r2 d_C^r3 / r2! r3!) X_{nu,sigma}(A0, C0)``.

    ``values`` maps ``(which, nu, sigma, r2, r3)`` to a complex number, or to a
    complex array when ``C0`` is an array (one entry per phase).
    """

    A0: float
    C0: object
    kmax: int
    values: Mapping[tuple[str, int, int, int, int], object]

    def __call__(self, which: str, nu: int, sigma: int, r2: int, r3: int):
        return self.values.get((which, nu, sigma, r2, r3), 0.0)

    def scale(self) -> float:
        return max((float(np.max(np.abs(v))) for v in self.values.values()), default=0.0)


def jets_at(sys: TrigSystem, ctx: ResonanceContext, C0, kmax: int) -> JetTable:
    if kmax < 1:
        raise MalformedConfig("kmax must be >= 1")
    values = {}
    for which in ("F", "G"):
        for m in sys.modes(which):
            for r2 in range(kmax + 1):
                for r3 in range(kmax + 1 - r2):
                    values[(which, m.nu, m.sigma, r2, r3)] = m.taylor(ctx.A0, C0, r2, r3)
    return JetTable(A0=ctx.A0, C0=C0, kmax=kmax, values=values)


# --- configuration -----------------------------------------------------------


def parse_config(config_text: str) -> dict:
    try:
        return tomllib.loads(config_text)
    except tomllib.TOMLDecodeError as exc:
        raise MalformedConfig(f"invalid TOML: {exc}") from exc


def _number(x, what: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise MalformedConfig(f"{what} must be a number, got {x!r}")
    return float(x)


def _integer(x, what: str) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise MalformedConfig(f"{what} must be an integer, got {x!r}")
    return x


def _modes_from_table(table, label: str) -> list[Mode]:
    if table is None:
        return []
    if not isinstance(table, dict) or set(table) - {"modes"}:
        raise MalformedConfig(f"[{label}] may only contain a 'modes' array")
    entries = table.get("modes", [])
    if not isinstance(entries, list):
        raise MalformedConfig(f"{label}.modes must be an array of tables")
    modes = []
    for i, e in enumerate(entries):
        where = f"{label}.modes[{i}]"
        if not isinstance(e, dict) or set(e) != {"nu", "sigma", "coeff"}:
            raise MalformedConfig(f"{where} needs exactly the keys nu, sigma, coeff")
        nu = _integer(e["nu"], f"{where}.nu")
        sigma = _integer(e["sigma"], f"{where}.sigma")
        terms = []
        if not isinstance(e["coeff"], list):
            raise MalformedConfig(f"{where}.coeff must be an array")
        for j, t in enumerate(e["coeff"]):
            if not isinstance(t, list) or len(t) != 4:
                raise MalformedConfig(f"{where}.coeff[{j}] must be [degA, degC, re, im]")
            da = _integer(t[0], f"{where}.coeff[{j}] degA")
            dc = _integer(t[1], f"{where}.coeff[{j}] degC")
            terms.append((da, dc, complex(_number(t[2], "re"), _number(t[3], "im"))))
        modes.append(Mode.from_terms(nu, sigma, terms))
    return modes


def system_from_dict(data: Mapping) -> TrigSystem:
    sysd = data.get("system")
    if not isinstance(sysd, dict):
        raise MalformedConfig("missing [system] table")
    unknown = set(sysd) - {"omega", "realify"}
    if unknown:
        raise MalformedConfig(f"unknown keys in [system]: {sorted(unknown)}")
    omega = sysd.get("omega")
    if not isinstance(omega, list) or not omega:
        raise MalformedConfig("system.omega must be a non-empty array of numbers")
    omega = [_number(c, "system.omega entry") for c in omega]
    realify = sysd.get("realify", True)
    if not isinstance(realify, bool):
        raise MalformedConfig("system.realify must be a boolean")
    return TrigSystem.build(
        omega,
        _modes_from_table(data.get("F"), "F"),
        _modes_from_table(data.get("G"), "G"),
        realify=realify,
    )


def parse_system(config_text: str) -> TrigSystem:
    return system_from_dict(parse_config(config_text))
