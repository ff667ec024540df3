"""Labelled-tree expansion of the low-order coefficients.

A tree is built from lines carrying a component label ``h`` (``"alpha"``,
``"A"`` or ``"C"``) and an integer momentum, and nodes carrying a mode of
``F`` or ``G``.  Its value is the product of line propagators and node
factors; summing over all trees of a given order reproduces the Fourier
recursion term by term.  This is an independent check, not a production
evaluator, so enumeration is capped at low order.

Children of a node are ordered within each component group.  With that
convention the ``1/r!`` of the Taylor expansion sits in the node factor and
each distinct ordered tree is counted once.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import MalformedConfig, TooLarge
from .trigsys import JetTable, ResonanceContext, TrigSystem, jets_at

__all__ = [
    "Tree",
    "enumerate_trees",
    "tree_value",
    "tree_sum",
    "bounds_report",
    "shape_count",
    "DEFAULT_CAP",
]

DEFAULT_CAP = 3
COMPONENTS = ("alpha", "A", "C")


@dataclass(frozen=True)
class Tree:
    """A root line together with the subtree hanging from its node.

    ``delta`` is 2 only for alpha lines whose node is a ``G`` mode.
    ``children`` holds three tuples (alpha, A and C subtrees).
    """

    h: str
    delta: int
    nu: int
    node: tuple[str, int, int]
    children: tuple[tuple["Tree", ...], tuple["Tree", ...], tuple["Tree", ...]]

    @property
    def r(self) -> tuple[int, int, int]:
        return tuple(len(c) for c in self.children)

    def subtrees(self):
        for group in self.children:
            yield from group

    @property
    def order(self) -> int:
        """Number of lines not labelled ``C``."""
        return (self.h != "C") + sum(c.order for c in self.subtrees())

    @property
    def n_nodes(self) -> int:
        return 1 + sum(c.n_nodes for c in self.subtrees())

    def lines(self):
        yield self
        for c in self.subtrees():
            yield from c.lines()

    def shape(self) -> tuple:
        """Canonical unlabelled rooted shape."""
        return tuple(sorted(c.shape() for c in self.subtrees()))


def _line_options(h: str, nu: int):
    """``(node function, delta)`` choices for a line of component ``h``."""
    if h == "alpha":
        return [] if nu == 0 else [("F", 1), ("G", 2)]
    if h == "A":
        return [("G", 1)] if nu != 0 else [("F", 1)]
    if h == "C":
        return [("G", 1)] if nu == 0 else []
    raise MalformedConfig(f"unknown component {h!r}")


def _compositions(total: int, parts: int):
    """Ordered tuples of ``parts`` integers >= 1 summing to ``total``."""
    if parts == 0:
        if total == 0:
            yield ()
        return
    for first in range(1, total - parts + 2):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


class _Enumerator:
    def __init__(self, sys: TrigSystem, ctx: ResonanceContext):
        self.sys, self.ctx = sys, ctx
        self.M = max(1, sys.max_momentum(ctx.p, ctx.q))
        self.enumerate = lru_cache(maxsize=None)(self._enumerate)

    def _momentum_range(self, k: int) -> range:
        bound = self.M * (3 * k)
        return range(-bound, bound + 1)

    def _children(self, kinds: tuple[str, ...], orders: tuple[int, ...], target: int):
        """All child tuples whose momenta sum to ``target``."""
        if not kinds:
            if target == 0:
                yield ()
            return
        h, k = kinds[0], orders[0]
        nus = [0] if h == "C" else self._momentum_range(k)
        for nu in nus:
            if h == "alpha" and nu == 0:
                continue
            subs = self.enumerate(h, k, nu)
            if not subs:
                continue
            for rest in self._children(kinds[1:], orders[1:], target - nu):
                for t in subs:
                    yield (t,) + rest

    def _enumerate(self, h: str, k: int, nu: int) -> tuple[Tree, ...]:
        if k < 1:
            return ()
        p, q = self.ctx.p, self.ctx.q
        budget = k if h == "C" else k - 1
        out = []
        for which, delta in _line_options(h, nu):
            for mode in self.sys.modes(which):
                rest = nu - mode.momentum(p, q)
                for r1 in range(budget + 1):
                    if r1 and mode.nu == 0:
                        continue
                    for r2 in range(min(mode.deg_A, budget - r1) + 1):
                        for r3 in range(min(mode.deg_C, budget - r1 - r2) + 1):
                            n = r1 + r2 + r3
                            if h == "C" and r3 == 1 and r1 + r2 == 0:
                                continue  # that term is C_k itself
                            if (n == 0) != (budget == 0):
                                continue
                            kinds = ("alpha",) * r1 + ("A",) * r2 + ("C",) * r3
                            for orders in _compositions(budget, n):
                                for kids in self._children(kinds, orders, rest):
                                    out.append(
                                        Tree(
                                            h,
                                            delta,
                                            nu,
                                            (which, mode.nu, mode.sigma),
                                            (kids[:r1], kids[r1 : r1 + r2], kids[r1 + r2 :]),
                                        )
                                    )
        return tuple(out)


def _require_linear(sys: TrigSystem):
    if sys.omega_degree > 1:
        raise MalformedConfig("the tree expansion is implemented for linear omega(A) only")


def enumerate_trees(
    sys: TrigSystem, ctx: ResonanceContext, k: int, h: str, nu: int, cap: int = DEFAULT_CAP
) -> list[Tree]:
    """All trees of order ``k`` with root component ``h`` and momentum ``nu``.

    Nodes whose factor vanishes identically (derivative orders beyond the
    polynomial degree, or alpha-derivatives of a mode with ``nu = 0``) are
    not generated.
    """
    if k > cap:
        raise TooLarge(f"tree enumeration capped at order {cap}, got {k}")
    _require_linear(sys)
    if h not in COMPONENTS:
        raise MalformedConfig(f"unknown component {h!r}")
    return list(_Enumerator(sys, ctx).enumerate(h, int(k), int(nu)))


def _propagator(t: Tree, ctx: ResonanceContext, D: complex | None) -> complex:
    if t.h == "C":
        if D is None:
            raise MalformedConfig("a tree with C lines needs D(t0)")
        return -1.0 / D
    if t.nu == 0:
        return -1.0 / ctx.omega_prime
    x = 1j * ctx.omega_small * t.nu
    return ctx.omega_prime ** (t.delta - 1) / x**t.delta


def tree_value(theta: Tree, jets: JetTable, ctx: ResonanceContext, t0: float, D: float | None = None) -> complex:
    """Product of propagators and node factors (``D`` needed when C lines occur)."""
    which, nu_v, sigma_v = theta.node
    r1, r2, r3 = theta.r
    val = _propagator(theta, ctx, D)
    val *= (1j * nu_v) ** r1 / math.factorial(r1) * jets(which, nu_v, sigma_v, r2, r3)
    val *= np.exp(1j * sigma_v * t0)
    for c in theta.subtrees():
        val *= tree_value(c, jets, ctx, t0, D)
    return complex(val)


def tree_sum(sys: TrigSystem, ctx: ResonanceContext, t0: float, k: int, h: str, nu: int, cap: int = DEFAULT_CAP) -> complex:
    from .melnikov import solve_C0

    trees = enumerate_trees(sys, ctx, k, h, nu, cap)
    if not trees:
        return 0j
    C0, D = solve_C0(sys, ctx, float(t0))
    jets = jets_at(sys, ctx, C0, k + 1)
    return complex(sum(tree_value(t, jets, ctx, t0, D) for t in trees))


@dataclass(frozen=True)
class BoundsReport:
    k: int
    h: str
    n_trees: int
    max_nodes: int
    proven_bound: int
    stated_bound: int
    proven_ok: bool
    stated_ok: bool


def _momenta(sys: TrigSystem, ctx: ResonanceContext, k: int, h: str) -> range:
    if h == "C":
        return range(0, 1)
    b = max(1, sys.max_momentum(ctx.p, ctx.q)) * 3 * k
    return range(-b, b + 1)


def bounds_report(sys: TrigSystem, ctx: ResonanceContext, kmax: int = DEFAULT_CAP) -> list[BoundsReport]:
    """Largest node count per (k, h) against ``3k-2`` / ``3k-1`` and against ``2k``."""
    _require_linear(sys)
    if kmax > DEFAULT_CAP:
        raise TooLarge(f"tree enumeration capped at order {DEFAULT_CAP}")
    en = _Enumerator(sys, ctx)
    out = []
    for k in range(1, kmax + 1):
        for h in COMPONENTS:
            trees = [t for nu in _momenta(sys, ctx, k, h) for t in en.enumerate(h, k, nu)]
            big = max((t.n_nodes for t in trees), default=0)
            proven = 3 * k - 1 if h == "C" else 3 * k - 2
            out.append(BoundsReport(k, h, len(trees), big, proven, 2 * k, big <= proven, big <= 2 * k))
    return out


def shape_count(sys: TrigSystem, ctx: ResonanceContext, k: int) -> int:
    """Number of distinct unlabelled shapes among all trees of order ``k``."""
    _require_linear(sys)
    en = _Enumerator(sys, ctx)
    shapes = set()
    for h in COMPONENTS:
        for nu in _momenta(sys, ctx, k, h):
            shapes.update(t.shape() for t in en.enumerate(h, k, nu))
    return len(shapes)
