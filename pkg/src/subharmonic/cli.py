"""Command-line front end.

Exit codes: 0 success, 2 hypothesis violation, 3 oracle non-convergence,
4 configuration or usage error.  Machine output goes to ``--out`` (written
atomically) or stdout; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import io
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import (
    ConfigError,
    HypothesisViolation,
    MalformedConfig,
    NoConvergence,
    OracleError,
    SubharmonicError,
)

EXIT_OK, EXIT_HYPOTHESIS, EXIT_ORACLE, EXIT_CONFIG = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_CONFIG)


# --- formatting --------------------------------------------------------------


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        raise MalformedConfig("non-finite value in output")
    return f"{x + 0.0:.17g}"  # no negative zero


def to_json(obj) -> str:
    """JSON with every float printed to 17 significant digits."""
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, float, np.integer, np.floating)):
        return fmt(obj)
    if isinstance(obj, str):
        import json

        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{to_json(str(k))}: {to_json(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(to_json(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\r\n")
    for row in rows:
        buf.write(",".join(fmt(v) if not isinstance(v, str) else v for v in row) + "\r\n")
    return buf.getvalue()


def emit(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
        return
    d = os.path.dirname(os.path.abspath(out))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(out))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, out)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def parse_eps(spec: str, two_sided: bool = False) -> np.ndarray:
    """``log:a:b:n``, ``lin:a:b:n``, a number, or a comma-separated list."""
    try:
        if spec.startswith(("log:", "lin:")):
            kind, a, b, n = spec.split(":")
            a, b, n = float(a), float(b), int(n)
            if n < 1:
                raise ValueError
            if kind == "log":
                if a <= 0 or b <= 0:
                    raise MalformedConfig("log grid needs positive endpoints")
                grid = np.geomspace(a, b, n)
            else:
                grid = np.linspace(a, b, n)
        else:
            grid = np.array([float(v) for v in spec.split(",")])
    except ValueError as exc:
        raise MalformedConfig(f"bad eps grid {spec!r}") from exc
    if two_sided:
        grid = np.concatenate([-grid[::-1], grid])
    return grid


def thread_count(arg: int | None) -> int:
    if arg is not None:
        n = arg
    else:
        env = os.environ.get("SUBH_THREADS")
        try:
            n = int(env) if env else 1
        except ValueError as exc:
            raise MalformedConfig("SUBH_THREADS must be an integer") from exc
    if n < 1:
        raise MalformedConfig("thread count must be >= 1")
    return n


# --- config ------------------------------------------------------------------


def _load(path: str) -> dict:
    from .trigsys import parse_config

    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise MalformedConfig(f"cannot read config {path}: {exc}") from exc


def _trig(args):
    from .trigsys import resonance_context, system_from_dict

    sys_ = system_from_dict(_load(args.config))
    return sys_, resonance_context(sys_, args.p, args.q)


def _mech(args):
    from .mechanical import mechanical_from_dict

    return mechanical_from_dict(_load(args.config))


# --- subcommands -------------------------------------------------------------


def cmd_melnikov(args) -> int:
    n = args.nt or 64
    t0 = 2 * np.pi * np.arange(n) / n
    if args.mechanical:
        from .mechanical import _averages, mechanical_C0

        mech = _mech(args)
        _, y2, _, _ = _averages(mech, args.p, args.q)
        C0 = mechanical_C0(mech, args.p, args.q, t0)
        rows = [(t, c, -y2) for t, c in zip(t0, C0)]
    else:
        from .melnikov import melnikov_curve

        sys_, ctx = _trig(args)
        curve = melnikov_curve(sys_, ctx, t0)
        rows = list(zip(curve.t0_grid, curve.C0_values, curve.D_values))
    emit(csv_text(["t0", "C0", "D"], rows), args.out)
    return EXIT_OK


def cmd_series(args) -> int:
    from .series import run_series

    sys_, ctx = _trig(args)
    kwargs = {}
    if args.mode == "fixed":
        if args.C is None:
            raise MalformedConfig("--mode fixed needs --C")
        kwargs["C_fixed"] = args.C
    st = run_series(sys_, ctx, float(args.t0), args.order, mode=args.mode, **kwargs)
    orders = []
    for k in range(args.order + 1):
        orders.append(
            {
                "k": k,
                "alpha": [[nu, v.real, v.imag] for nu, v in st.spectrum("alpha", k).items()],
                "A": [[nu, v.real, v.imag] for nu, v in st.spectrum("A", k).items()],
            }
        )
    doc = {"t0": float(args.t0), "mode": args.mode}
    if args.mode == "C":
        doc["C"] = [float(c[0]) for c in st.C]
    else:
        doc["alpha_bar"] = [float(a[0]) for a in st.alpha_bar]
    doc["orders"] = orders
    emit(to_json(doc) + "\n", args.out)
    return EXIT_OK


def cmd_curves(args) -> int:
    from .bifurcation import bifurcation_curves, c_surface

    sys_, ctx = _trig(args)
    eps = parse_eps(args.eps, args.two_sided)
    surf = c_surface(sys_, ctx, args.order, args.nt)
    chunks = np.array_split(eps, min(thread_count(args.threads), len(eps)))
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        parts = list(pool.map(lambda e: bifurcation_curves(surf, e), chunks))
    rows = []
    for c in parts:
        rows += list(zip(c.eps_grid, c.gamma1, c.gamma2, c.tau1, c.tau2))
    emit(csv_text(["eps", "gamma1", "gamma2", "tau1", "tau2"], rows), args.out)
    return EXIT_OK


def cmd_count(args) -> int:
    from .bifurcation import c_surface, subharmonic_roots

    sys_, ctx = _trig(args)
    surf = c_surface(sys_, ctx, args.order, args.nt)
    res = subharmonic_roots(surf, float(args.eps), float(args.gamma))
    text = f"{res.count}\n"
    if args.detail:
        text += to_json({"roots": res.roots, "outside_range": res.outside_range}) + "\n"
    emit(text, args.out)
    if res.outside_range:
        sys.stderr.write("gamma lies outside the existence interval [gamma2, gamma1]\n")
    return EXIT_OK


def cmd_trees(args) -> int:
    from .series import run_series
    from .trees import tree_sum

    if not args.check:
        raise MalformedConfig("trees: only --check is supported")
    sys_, ctx = _trig(args)
    st = run_series(sys_, ctx, float(args.t0), args.order)
    rows = []
    for k in range(1, args.order + 1):
        for h in ("alpha", "A", "C"):
            if h == "C":
                ref = {0: complex(st.C[k][0])}
            else:
                ref = st.spectrum(h, k)
            for nu, v in ref.items():
                tv = tree_sum(sys_, ctx, float(args.t0), k, h, nu)
                rows.append((k, h, nu, tv.real, tv.imag, v.real, v.imag, abs(tv - v)))
    header = ["k", "h", "nu", "tree_re", "tree_im", "series_re", "series_im", "abs_diff"]
    emit(csv_text(header, rows), args.out)
    return EXIT_OK


def _flow(args, eps: float, C: float):
    from .oracle import ActionAngleFlow, MechanicalFlow

    if args.mechanical:
        return MechanicalFlow(_mech(args), args.p, args.q, eps, C)
    sys_, ctx = _trig(args)
    return ActionAngleFlow(sys_, ctx, eps, C)


def cmd_verify(args) -> int:
    from .oracle import N_SEEDS, shoot_many

    flow = _flow(args, float(args.eps), float(args.C))
    if args.t0 is not None:
        seeds = flow.seeds([float(args.t0)])
    else:
        seeds = flow.seeds(2 * np.pi * np.arange(N_SEEDS) / N_SEEDS)
    found = [r for r in shoot_many(flow, seeds, stop_at_first=True) if r is not None]
    if found:
        r = found[0]
        doc = {
            "converged": True,
            "defect": r.defect,
            "orbit_ic": list(r.initial_state),
            "iterations": r.iterations,
        }
    else:
        doc = {"converged": False, "defect": None, "orbit_ic": None, "iterations": None}
    emit(to_json(doc) + "\n", args.out)
    if not found:
        raise NoConvergence("shooting did not converge from any seed")
    return EXIT_OK


def cmd_scan(args) -> int:
    from .oracle import empirical_curve

    eps = parse_eps(args.eps, args.two_sided)
    bracket = (float(args.C_bracket[0]), float(args.C_bracket[1]))
    if not bracket[0] < bracket[1]:
        raise MalformedConfig("--C-bracket needs lo < hi")
    _flow(args, 0.0, 0.0)  # validate config before spawning work

    def one(e):
        return empirical_curve(lambda C: _flow(args, float(e), C), bracket, args.seeds)

    with ThreadPoolExecutor(max_workers=thread_count(args.threads)) as pool:
        curves = list(pool.map(one, eps))
    rows = [(e, c.C_max_hat, c.C_min_hat) for e, c in zip(eps, curves)]
    emit(csv_text(["eps", "C_max_hat", "C_min_hat"], rows), args.out)
    return EXIT_OK


# --- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="subharmonic", description="Subharmonic Melnikov analysis and bifurcation curves.")
    ap.add_argument("--threads", type=int, default=None, help="worker cap (default: $SUBH_THREADS or 1)")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, order=True, nt=True):
        p.add_argument("--config", required=True)
        p.add_argument("--p", type=int, default=1)
        p.add_argument("--q", type=int, default=1)
        p.add_argument("--out", default=None)
        if order:
            p.add_argument("--order", type=int, default=4)
        if nt:
            p.add_argument("--nt", type=int, default=None, help="phase grid size override")
        return p

    p = common(sub.add_parser("melnikov", help="C0(t0) and D(t0) on a phase grid"), order=False)
    p.add_argument("--mechanical", action="store_true")
    p.set_defaults(func=cmd_melnikov)

    p = common(sub.add_parser("series", help="Fourier coefficients at one phase"), nt=False)
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--mode", choices=("C", "fixed"), default="C")
    p.add_argument("--C", type=float, default=None)
    p.set_defaults(func=cmd_series)

    p = common(sub.add_parser("curves", help="bifurcation curves gamma1, gamma2"))
    p.add_argument("--eps", required=True)
    p.add_argument("--two-sided", action="store_true")
    p.set_defaults(func=cmd_curves)

    p = common(sub.add_parser("count", help="number of subharmonic solutions at (eps, gamma)"))
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--detail", action="store_true", help="also print the roots as JSON")
    p.set_defaults(func=cmd_count)

    p = common(sub.add_parser("trees", help="tree expansion versus recursion"), nt=False)
    p.set_defaults(order=2)
    p.add_argument("--check", action="store_true")
    p.add_argument("--t0", type=float, default=0.0)
    p.set_defaults(func=cmd_trees)

    p = common(sub.add_parser("verify", help="shoot for one periodic orbit"), order=False, nt=False)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--C", type=float, required=True)
    p.add_argument("--t0", type=float, default=None, help="single seed phase (default: 16 phases)")
    p.add_argument("--mechanical", action="store_true")
    p.set_defaults(func=cmd_verify)

    p = common(sub.add_parser("scan", help="empirical existence thresholds"), order=False, nt=False)
    p.add_argument("--eps", required=True)
    p.add_argument("--two-sided", action="store_true")
    p.add_argument("--C-bracket", nargs=2, type=float, default=(-10.0, 10.0), metavar=("LO", "HI"))
    p.add_argument("--seeds", type=int, default=16)
    p.add_argument("--mechanical", action="store_true")
    p.set_defaults(func=cmd_scan)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG
    except HypothesisViolation as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_HYPOTHESIS
    except OracleError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_ORACLE
    except SubharmonicError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_HYPOTHESIS


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
