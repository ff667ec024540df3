"""Direct numerical verification by shooting.

A periodic orbit of period ``T`` is a zero of ``x -> Phi_T(x) - x - shift``
where ``Phi_T`` is the time-``T`` flow and ``shift`` accounts for an angle
that winds ``p`` times.  Newton's method uses a central-difference Jacobian;
all seeds and all difference probes of one Newton sweep are integrated as a
single vectorized ODE.

Failure to converge is evidence, not proof, that no orbit exists nearby.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .errors import MalformedConfig, NoConvergence, NoExistenceAnywhere, StepUnderflow
from .mechanical import MechanicalSystem, orbit_with_period
from .trigsys import ResonanceContext, TrigSystem

__all__ = [
    "Trajectory",
    "PeriodicOrbit",
    "ActionAngleFlow",
    "MechanicalFlow",
    "PersistenceFlow",
    "integrate",
    "shoot_periodic",
    "shoot_many",
    "empirical_curve",
]

INTEGRATION_TOL = 1e-12
DEFECT_TOL = 1e-10
MAX_NEWTON = 25
FD_STEP = 1e-6
N_SEEDS = 16


# --- flows -------------------------------------------------------------------


@dataclass(frozen=True)
class ActionAngleFlow:
    """``alpha' = omega(A) + eps F``, ``A' = eps G`` at fixed ``C``."""

    sys: TrigSystem
    ctx: ResonanceContext
    eps: float
    C: float

    @property
    def period(self) -> float:
        return self.ctx.T

    @property
    def shift(self) -> np.ndarray:
        return np.array([2 * np.pi * self.ctx.p, 0.0])

    def rhs(self, t, z):
        a, A = z[0], z[1]
        da = self.sys.omega(A) + self.eps * self.sys.F(a, A, self.C, t).real
        dA = self.eps * self.sys.G(a, A, self.C, t).real
        return np.array([da, dA])

    def seeds(self, t0s) -> np.ndarray:
        """Series states at real time 0 for each phase (unperturbed if the series fails)."""
        from .errors import SubharmonicError
        from .series import evaluate_solution, run_series

        t0s = np.asarray(t0s, dtype=float)
        try:
            st = run_series(self.sys, self.ctx, t0s, 2)
            a, A = evaluate_solution(st, self.eps, -t0s, wrap=False)
            return np.stack([np.diag(a), np.diag(A)], axis=1)
        except SubharmonicError:
            return np.stack([-self.ctx.omega0 * t0s, np.full_like(t0s, self.ctx.A0)], axis=1)


@dataclass(frozen=True)
class MechanicalFlow:
    """``x'' + g(x) = eps f(x, t) - eps C x'``; orbits of period ``2 pi q`` near the ``2 pi q / p`` orbit."""

    mech: MechanicalSystem
    p: int
    q: int
    eps: float
    C: float

    @property
    def period(self) -> float:
        return 2 * np.pi * self.q

    @property
    def shift(self) -> np.ndarray:
        return np.zeros(2)

    def rhs(self, t, z):
        x, y = z[0], z[1]
        fy = -self.mech.g(x) + self.eps * (self.mech.forcing(x, t) - self.C * y)
        return np.array([y, fy])

    def seeds(self, t0s) -> np.ndarray:
        orbit = orbit_with_period(self.mech, 2 * np.pi * self.q / self.p)
        return _orbit_seeds(orbit, t0s)


def _orbit_seeds(orbit, t0s) -> np.ndarray:
    ts = np.mod(-np.asarray(t0s, dtype=float), orbit.period)
    return np.stack([np.interp(ts, orbit.t, orbit.z[0]), np.interp(ts, orbit.t, orbit.z[1])], axis=1)


@dataclass(frozen=True)
class PersistenceFlow:
    """Hamiltonian ``H = y^2/2 + x^4/4 + eps cos(t) (y^2/2 + x^4/4 - E)^2``.

    ``E`` is the energy of the unperturbed orbit of period ``2 pi``; that orbit
    stays a solution for every ``eps``.
    """

    eps: float
    E: float

    @classmethod
    def tuned(cls, eps: float) -> "PersistenceFlow":
        return cls(eps, _quartic_orbit().energy)

    @property
    def period(self) -> float:
        return 2 * np.pi

    @property
    def shift(self) -> np.ndarray:
        return np.zeros(2)

    def rhs(self, t, z):
        x, y = z[0], z[1]
        h0 = 0.5 * y * y + 0.25 * x**4
        k = 1.0 + 2.0 * self.eps * np.cos(t) * (h0 - self.E)
        return np.array([y * k, -(x**3) * k])

    def seeds(self, t0s) -> np.ndarray:
        return _orbit_seeds(_quartic_orbit(), t0s)


_QUARTIC = MechanicalSystem.build([0.0, 0.0, 0.0, 1.0])


def _quartic_orbit():
    return orbit_with_period(_QUARTIC, 2 * np.pi)


# --- integration -------------------------------------------------------------


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    z: np.ndarray
    tol: float
    defect: float | None = None


def _check_tol(tol: float):
    if not 1e-14 <= tol <= 1e-6:
        raise MalformedConfig("integration tolerance must lie in [1e-14, 1e-6]")


def integrate(flow, state0, t_span, tol: float = INTEGRATION_TOL, n_out: int = 257) -> Trajectory:
    """Adaptive DOP853 integration sampled at ``n_out`` uniform times."""
    _check_tol(tol)
    state0 = np.asarray(state0, dtype=float)
    sol = solve_ivp(
        lambda t, z: flow.rhs(t, z),
        tuple(t_span),
        state0,
        method="DOP853",
        rtol=tol,
        atol=tol,
        dense_output=True,
    )
    if not sol.success:
        raise StepUnderflow(f"integration failed: {sol.message}")
    t = np.linspace(t_span[0], t_span[1], n_out)
    return Trajectory(t, sol.sol(t), tol)


def _flow_map(flow, states: np.ndarray, T: float, tol: float) -> np.ndarray:
    """Time-``T`` map for a batch of states (rows); failed rows come back as NaN."""
    m = states.shape[0]

    def rhs(t, zf):
        return flow.rhs(t, zf.reshape(2, m)).ravel()

    with np.errstate(all="ignore"):
        sol = solve_ivp(rhs, (0.0, T), states.T.ravel(), method="DOP853", rtol=tol, atol=tol)
    if sol.success and np.all(np.isfinite(sol.y[:, -1])):
        return sol.y[:, -1].reshape(2, m).T
    if m == 1:
        return np.full((1, 2), np.nan)
    # isolate the rows that blow up
    return np.vstack([_flow_map(flow, states[i : i + 1], T, tol) for i in range(m)])


# --- shooting ----------------------------------------------------------------


@dataclass(frozen=True)
class PeriodicOrbit:
    initial_state: np.ndarray
    period: float
    defect: float
    iterations: int


def shoot_many(
    flow,
    guesses,
    T: float | None = None,
    tol: float = INTEGRATION_TOL,
    max_iter: int = MAX_NEWTON,
    defect_tol: float = DEFECT_TOL,
    stop_at_first: bool = False,
) -> list[PeriodicOrbit | None]:
    """Newton shooting from several guesses at once.

    A seed is dropped when its defect stops decreasing (less than 10% over
    five iterations) or grows beyond any plausible basin.
    """
    _check_tol(tol)
    T = flow.period if T is None else float(T)
    X = np.array(guesses, dtype=float).reshape(-1, 2)
    n = X.shape[0]
    shift = flow.shift
    result: list[PeriodicOrbit | None] = [None] * n
    active = list(range(n))
    history = {i: [] for i in range(n)}
    scale = np.maximum(1.0, np.abs(X).max(axis=1))
    dirs = np.array([[1, 0], [-1, 0], [0, 1], [0, -1]], dtype=float)
    for it in range(max_iter + 1):
        if not active:
            break
        base = X[active]
        h = FD_STEP * scale[active]
        probes = base[:, None, :] + h[:, None, None] * dirs[None, :, :]
        batch = np.concatenate([base[:, None, :], probes], axis=1).reshape(-1, 2)
        out = _flow_map(flow, batch, T, tol).reshape(len(active), 5, 2)
        keep = []
        for j, i in enumerate(active):
            img = out[j]
            r = img[0] - X[i] - shift
            defect = float(np.max(np.abs(r)))
            if not np.isfinite(defect):
                continue
            history[i].append(defect)
            if defect <= defect_tol * scale[i]:
                result[i] = PeriodicOrbit(X[i].copy(), T, defect, it)
                continue
            hist = history[i]
            if it == max_iter or defect > 1e3 * max(1.0, hist[0]):
                continue
            if len(hist) > 5 and hist[-1] > 0.9 * hist[-6]:
                continue
            hj = FD_STEP * scale[i]
            J = np.column_stack([(img[1] - img[2]) / (2 * hj), (img[3] - img[4]) / (2 * hj)]) - np.eye(2)
            if not np.all(np.isfinite(J)):
                continue
            step = np.linalg.lstsq(J, -r, rcond=1e-12)[0]
            limit = 0.5 * max(1.0, scale[i])
            norm = float(np.max(np.abs(step)))
            if norm > limit:
                step *= limit / norm
            X[i] = X[i] + step
            keep.append(i)
        if stop_at_first and any(r is not None for r in result):
            break
        active = keep
    return result


def shoot_periodic(flow, guess, T: float | None = None, tol: float = INTEGRATION_TOL) -> PeriodicOrbit:
    res = shoot_many(flow, [guess], T, tol)[0]
    if res is None:
        raise NoConvergence(f"no periodic orbit found within {MAX_NEWTON} Newton iterations")
    return res


# --- empirical existence region ----------------------------------------------


@dataclass(frozen=True)
class EmpiricalCurve:
    C_max_hat: float
    C_min_hat: float
    note: str = "thresholds are one-sided: non-convergence is evidence, not proof, of non-existence"


def empirical_curve(
    make_flow: Callable[[float], object],
    C_bracket: tuple[float, float],
    t0_seeds: Sequence[float] | int = N_SEEDS,
    iterations: int = 50,
) -> EmpiricalCurve:
    """Bracket the set of ``C`` where shooting succeeds from some seed.

    ``make_flow(C)`` returns a flow with ``seeds(t0s)``.  The predicate is
    evaluated on a coarse scan first to find an interior point, then each
    boundary is bisected ``iterations`` times.  Orbits found on the way are
    reused as extra seeds.
    """
    if isinstance(t0_seeds, int):
        t0_seeds = 2 * np.pi * np.arange(t0_seeds) / t0_seeds
    t0_seeds = np.asarray(t0_seeds, dtype=float)
    lo, hi = map(float, C_bracket)
    memo: dict[float, PeriodicOrbit | None] = {}
    warm: list[np.ndarray] = []

    def exists(C: float) -> bool:
        if C in memo:
            return memo[C] is not None
        flow = make_flow(C)
        guesses = list(warm[-2:]) + list(flow.seeds(t0_seeds))
        found = [r for r in shoot_many(flow, guesses, stop_at_first=True) if r is not None]
        memo[C] = found[0] if found else None
        if found:
            warm.append(found[0].initial_state)
        return bool(found)

    inside = None
    for C in np.linspace(lo, hi, 9)[[4, 3, 5, 2, 6, 1, 7, 0, 8]]:
        if exists(float(C)):
            inside = float(C)
            break
    if inside is None:
        raise NoExistenceAnywhere(f"no periodic orbit for any probed C in [{lo}, {hi}]")

    def boundary(a: float, b: float) -> float:
        """``a`` inside, ``b`` candidate outside."""
        if exists(b):
            return b
        for _ in range(iterations):
            mid = 0.5 * (a + b)
            if mid in (a, b):
                break
            if exists(mid):
                a = mid
            else:
                b = mid
        return 0.5 * (a + b)

    warm_start = list(warm)
    upper = boundary(inside, hi)
    warm[:] = warm_start
    lower = boundary(inside, lo)
    return EmpiricalCurve(upper, lower)
