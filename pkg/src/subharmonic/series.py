"""Order-by-order Fourier recursion for subharmonic solutions.

Two modes are supported:

``"C"``
    the dissipation-like parameter ``C`` is expanded as ``sum eps^k C_k(t0)``
    and each ``C_k`` is fixed by the solvability condition of the next order.
``"fixed"``
    ``C`` is held at a given value and solvability is enforced through the
    constant phase corrections ``alpha_bar[k]`` (zero Fourier mode of
    ``alpha[k]``).  With ``hierarchy=True`` the corrections are set to zero and
    the obstructions ``M_k(t0)`` are recorded instead.

All arrays carry a leading axis over a batch of initial phases ``t0``, so a
whole phase grid is advanced in one pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _spectra as sp
from .errors import DegenerateZero, MalformedConfig, SolvabilityFailure
from .trigsys import JetTable, ResonanceContext, TrigSystem, jets_at

__all__ = [
    "SeriesState",
    "init_state",
    "compute_order",
    "run_series",
    "evaluate_solution",
    "residual",
]

SOLVABILITY_TOL = 1e-12
REALITY_TOL = 1e-12
SIMPLE_ZERO_TOL = 1e-10


def _series_powers(delta: list, k: int, n: int) -> list[list]:
    """``P[r][j]`` = coefficient of eps^j in (sum_{i>=1} eps^i delta[i])^r."""
    P = [[None] * (k + 1) for _ in range(k + 1)]
    P[0][0] = np.ones((n, 1), dtype=complex)
    for r in range(1, k + 1):
        for j in range(r, k + 1):
            acc = None
            for i in range(1, j - r + 2):
                if i >= len(delta) or delta[i] is None or P[r - 1][j - i] is None:
                    continue
                term = sp.conv(delta[i], P[r - 1][j - i])
                acc = term if acc is None else sp.add(acc, term)
            P[r][j] = acc
    return P


@dataclass
class SeriesState:
    sys: TrigSystem
    ctx: ResonanceContext
    t0: np.ndarray
    mode: str
    jets: JetTable
    C: list = field(default_factory=list)
    alpha: list = field(default_factory=list)
    A: list = field(default_factory=list)
    alpha_bar: list = field(default_factory=list)
    obstructions: list = field(default_factory=list)
    D: np.ndarray | None = None
    dG_dalpha_mean: np.ndarray | None = None
    hierarchy: bool = False
    scalar: bool = False
    K_done: int = 0
    _kernels: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.t0.shape[0]

    @property
    def scale(self) -> float:
        return max(self.jets.scale(), np.finfo(float).tiny)

    @property
    def C_values(self) -> np.ndarray:
        """Array of shape ``(K_done + 1, n)`` with the C coefficients (C mode)."""
        return np.array(self.C)

    def _jet(self, which: str, nu: int, sigma: int, r2: int, r3: int):
        if r2 + r3 > self.jets.kmax:
            self.jets = jets_at(self.sys, self.ctx, self.jets.C0, r2 + r3)
        return self.jets(which, nu, sigma, r2, r3)

    def _kernel_active(self, which: str, r1: int, r2: int, r3: int) -> bool:
        for m in self.sys.modes(which):
            if m.deg_A >= r2 and m.deg_C >= r3 and (r1 == 0 or m.nu != 0):
                return True
        return False

    def kernel(self, which: str, r1: int, r2: int, r3: int) -> np.ndarray:
        """Spectrum of (d_1^r1 d_2^r2 d_3^r3 / r!) X along the unperturbed orbit."""
        key = (which, r1, r2, r3)
        if key not in self._kernels:
            p, q = self.ctx.p, self.ctx.q
            w = self.sys.max_momentum(p, q)
            out = sp.zeros(self.n, w)
            for m in self.sys.modes(which):
                if r1 and m.nu == 0:
                    continue
                jet = self._jet(which, m.nu, m.sigma, r2, r3)
                c = (1j * m.nu) ** r1 / math.factorial(r1) * jet * np.exp(1j * m.sigma * self.t0)
                out[:, m.momentum(p, q) + w] += c
            self._kernels[key] = out
        return self._kernels[key]

    def _deltas(self):
        n = self.n
        dalpha = [None] + list(self.alpha[1:])
        dA = [None] + list(self.A[1:])
        if self.mode == "C":
            dC = [None] + [sp.constant(c) for c in self.C[1:]]
        else:
            dC = [None]
        return dalpha, dA, dC, n

    def compose(self, which: str, k: int) -> np.ndarray:
        """Coefficient of eps^k in X(alpha(t), A(t), C, t + t0), X in {F, G}."""
        if k == 0:
            return self.kernel(which, 0, 0, 0).copy()
        dalpha, dA, dC, n = self._deltas()
        pa = _series_powers(dalpha, k, n)
        pA = _series_powers(dA, k, n)
        pC = _series_powers(dC, k, n)
        total = sp.zeros(n)
        for r2 in range(k + 1):
            for r3 in range(k + 1 - r2):
                if not any(self._kernel_active(which, r1, r2, r3) for r1 in range(k + 1 - r2 - r3)):
                    continue
                mixed = [None] * (k + 1)
                for j in range(k + 1):
                    acc = None
                    for j2 in range(j + 1):
                        a, c = pA[r2][j2], pC[r3][j - j2]
                        if a is None or c is None:
                            continue
                        term = a * c
                        acc = term if acc is None else sp.add(acc, term)
                    mixed[j] = acc
                for r1 in range(k + 1 - r2 - r3):
                    if not self._kernel_active(which, r1, r2, r3):
                        continue
                    Y = None
                    for j1 in range(r1, k + 1):
                        a, b = pa[r1][j1], mixed[k - j1]
                        if a is None or b is None:
                            continue
                        term = sp.conv(a, b)
                        Y = term if Y is None else sp.add(Y, term)
                    if Y is not None:
                        total = sp.add(total, sp.conv(self.kernel(which, r1, r2, r3), Y))
        return total

    def omega_excess(self, k: int) -> np.ndarray:
        """Order-k part of omega(A) - omega(A0) - omega'(A0) (A - A0)."""
        deg = self.sys.omega_degree
        if k < 2 or deg < 2:
            return sp.zeros(self.n)
        _, dA, _, n = self._deltas()
        pA = _series_powers(dA, k, n)
        out = sp.zeros(n)
        for r in range(2, min(deg, k) + 1):
            if pA[r][k] is None:
                continue
            c = self.sys.omega_derivative(self.ctx.A0, r) / math.factorial(r)
            out = sp.add(out, c * pA[r][k])
        return out

    # convenience accessors -----------------------------------------------------

    def spectrum(self, kind: str, k: int, index: int = 0) -> dict[int, complex]:
        arr = {"alpha": self.alpha, "A": self.A}[kind][k]
        w = sp.width(arr)
        return {int(nu): complex(arr[index, nu + w]) for nu in range(-w, w + 1)}

    def C_of(self, eps: float) -> np.ndarray:
        if self.mode != "C":
            return np.full(self.n, float(self.jets.C0))
        return np.polynomial.polynomial.polyval(eps, np.array(self.C))


def _phases(t0) -> tuple[np.ndarray, bool]:
    arr = np.atleast_1d(np.asarray(t0, dtype=float))
    if arr.ndim != 1:
        raise MalformedConfig("t0 must be a scalar or a 1-d array")
    return arr, np.ndim(t0) == 0


def init_state(
    sys: TrigSystem,
    ctx: ResonanceContext,
    t0,
    mode: str = "C",
    C_fixed: float | None = None,
    hierarchy: bool = False,
    C0_bracket: tuple[float, float] = (-10.0, 10.0),
) -> SeriesState:
    """Install the order-0 data at one phase or at a batch of phases."""
    from .melnikov import melnikov_derivative_t0, melnikov_value, solve_C0_many

    t0_arr, scalar = _phases(t0)
    n = t0_arr.shape[0]
    if mode == "C":
        C0, D = solve_C0_many(sys, ctx, t0_arr, bracket=C0_bracket)
        jets = jets_at(sys, ctx, C0, 1)
        state = SeriesState(sys, ctx, t0_arr, "C", jets, C=[C0], D=D, scalar=scalar)
    elif mode == "fixed":
        if C_fixed is None:
            raise MalformedConfig("fixed-phase mode needs C_fixed")
        C_fixed = float(C_fixed)
        jets = jets_at(sys, ctx, C_fixed, 1)
        state = SeriesState(
            sys, ctx, t0_arr, "fixed", jets, C=[np.full(n, C_fixed)], hierarchy=hierarchy, scalar=scalar
        )
        M = melnikov_value(sys, ctx, t0_arr, C_fixed)
        Mp = melnikov_derivative_t0(sys, ctx, t0_arr, C_fixed)
        tol = SIMPLE_ZERO_TOL * state.scale
        if not hierarchy:
            bad = np.abs(M) > tol
            if np.any(bad):
                raise DegenerateZero(
                    f"t0 = {t0_arr[bad][0]:.17g} is not a zero of M (M = {M[bad][0]:.3e})"
                )
            flat = np.abs(Mp) < tol
            if np.any(flat):
                raise DegenerateZero(
                    f"t0 = {t0_arr[flat][0]:.17g} is not a simple zero of M (|M'| = {abs(Mp[flat][0]):.3e})"
                )
        state.dG_dalpha_mean = sp.zero_mode(state.kernel("G", 1, 0, 0))
        state.obstructions.append(M)
    else:
        raise MalformedConfig(f"unknown series mode {mode!r}")
    state.alpha.append(sp.zeros(n))
    state.A.append(sp.zeros(n))
    state.alpha_bar.append(np.zeros(n))
    return state


def _real(values: np.ndarray, scale: float, what: str) -> np.ndarray:
    if np.any(np.abs(values.imag) > REALITY_TOL * max(scale, 1.0)):
        raise SolvabilityFailure(f"{what} is not real (imaginary part {np.max(np.abs(values.imag)):.3e})")
    return values.real.copy()


def compute_order(state: SeriesState) -> SeriesState:
    """Advance ``state`` by one order in place and return it."""
    k = state.K_done + 1
    ctx = state.ctx
    w_small, wp = ctx.omega_small, ctx.omega_prime
    F_prev = state.compose("F", k - 1)
    G_prev = state.compose("G", k - 1)
    zero = sp.zero_mode(G_prev)
    if not state.hierarchy and np.any(np.abs(zero) > SOLVABILITY_TOL * max(state.scale, 1.0)):
        raise SolvabilityFailure(
            f"order {k}: mean of G^({k - 1}) is {np.max(np.abs(zero)):.3e}, cannot be cancelled"
        )
    F_eff = sp.add(F_prev, state.omega_excess(k))
    w = max(sp.width(F_eff), sp.width(G_prev))
    F_eff, G_prev = sp.pad(F_eff, w), sp.pad(G_prev, w)
    nu = sp.axis(w)
    nz = nu != 0
    div = 1j * w_small * nu[nz]
    alpha_k = sp.zeros(state.n, w)
    A_k = sp.zeros(state.n, w)
    A_k[:, nz] = G_prev[:, nz] / div
    alpha_k[:, nz] = F_eff[:, nz] / div + wp * G_prev[:, nz] / div**2
    A_k[:, w] = -F_eff[:, w] / wp
    state.alpha.append(alpha_k)
    state.A.append(A_k)

    if state.mode == "C":
        state.C.append(np.zeros(state.n))
        gamma0 = sp.zero_mode(state.compose("G", k))
        C_k = _real(-gamma0 / state.D, state.scale, f"C_{k}")
        state.C[k] = C_k
        state.alpha_bar.append(np.zeros(state.n))
    else:
        gamma0 = _real(sp.zero_mode(state.compose("G", k)), state.scale, f"Gamma_{k}")
        state.obstructions.append(gamma0)
        if state.hierarchy:
            bar = np.zeros(state.n)
        else:
            bar = -gamma0 / state.dG_dalpha_mean.real
        state.alpha_bar.append(bar)
        alpha_k[:, w] = bar
    state.K_done = k
    return state


def run_series(sys, ctx, t0, K: int, mode: str = "C", **kwargs) -> SeriesState:
    state = init_state(sys, ctx, t0, mode=mode, **kwargs)
    for _ in range(K):
        compute_order(state)
    return state


def _sum_orders(parts: list, eps: float) -> np.ndarray:
    w = max(sp.width(a) for a in parts)
    total = sp.zeros(parts[0].shape[0], w)
    for k, a in enumerate(parts):
        total = total + eps**k * sp.pad(a, w)
    return total


def evaluate_solution(state: SeriesState, eps: float, t, wrap: bool = True):
    """Truncated series ``(alpha, A)`` at times ``t`` (time measured from the phase t0)."""
    ctx = state.ctx
    t = np.asarray(t, dtype=float)
    da = sp.evaluate(_sum_orders(state.alpha, eps), ctx.omega_small, t).real
    dA = sp.evaluate(_sum_orders(state.A, eps), ctx.omega_small, t).real
    alpha = ctx.omega0 * t + da
    if wrap:
        alpha = np.mod(alpha, 2 * np.pi)
    A = ctx.A0 + dA
    if state.scalar:
        return alpha[0], A[0]
    return alpha, A


def residual(state: SeriesState, eps: float, N_samples: int | None = None) -> float:
    """Max defect of the truncated series in the equations of motion.

    Derivatives are taken term-wise in Fourier space.  The unperturbed parts
    are subtracted analytically so that rounding stays at ``eps * 1e-16``.
    """
    ctx, sys = state.ctx, state.sys
    dal = _sum_orders(state.alpha, eps)
    dAs = _sum_orders(state.A, eps)
    wmax = max(sp.width(dal), sp.width(dAs))
    need = 4 * wmax + 4
    if N_samples is None:
        N_samples = max(need, 64)
    if N_samples < need:
        raise MalformedConfig(f"N_samples must be at least {need}")
    t = np.arange(N_samples) * ctx.T / N_samples
    w = ctx.omega_small
    da = sp.evaluate(dal, w, t).real
    dA = sp.evaluate(dAs, w, t).real
    da_dot = sp.evaluate(sp.derivative(dal, w), w, t).real
    dA_dot = sp.evaluate(sp.derivative(dAs, w), w, t).real
    omega_excess = np.zeros_like(dA)
    for r in range(1, sys.omega_degree + 1):
        omega_excess += sys.omega_derivative(ctx.A0, r) / math.factorial(r) * dA**r
    alpha = ctx.omega0 * t + da
    A = ctx.A0 + dA
    C = state.C_of(eps)[:, None]
    tt = t[None, :] + state.t0[:, None]
    F = sys.F(alpha, A, C, tt).real
    G = sys.G(alpha, A, C, tt).real
    r1 = da_dot - omega_excess - eps * F
    r2 = dA_dot - eps * G
    return float(np.max(np.abs(r1) + np.abs(r2)))
