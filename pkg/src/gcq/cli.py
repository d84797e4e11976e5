"""Command line entry point (``python -m gcq`` or ``gcq``)."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import harness
from ._validation import ConvergenceError, DomainError
from .fast import FastConfig, FastGCQ, build_history_quadrature, default_n0
from .kernels import frac_integral_kernel, power_kernel
from .meshgen import graded_mesh, read_mesh_csv, two_sided_graded_mesh, uniform_mesh, write_mesh_csv
from .reference import weights_dd, weights_real_quadrature
from .subdiffusion import SubdiffusionConfig, fem_assemble, l2_error, solve_nonsmooth, solve_smooth


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _positive_fraction(text):
    try:
        v = float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _fmt(v):
    return "%.12e" % float(v)


def _fast_config(args):
    return FastConfig(args.n0, args.tol, args.local_method, args.n_contour)


def _add_fast(p):
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--n0", type=int, default=None)
    p.add_argument("--local-method", choices=["exact-dd", "contour"], default="exact-dd")
    p.add_argument("--n-contour", type=int, default=None)


def _load_json_config(args, p):
    """Fill unset flags from ``--config``; explicit flags win."""
    if not getattr(args, "config", None):
        return
    data = json.loads(Path(args.config).read_text())
    defaults = {a.dest: a.default for a in p._actions}
    for key, value in data.items():
        dest = key.replace("-", "_")
        if dest not in defaults:
            raise SystemExit(f"error: unknown config key {key!r}")
        if getattr(args, dest) == defaults[dest]:
            setattr(args, dest, value)


def _time_mesh(args):
    if args.gamma == 1:
        return uniform_mesh(args.T, args.N)
    return graded_mesh(args.T, args.N, args.gamma)


# ----------------------------------------------------------------------------


def cmd_mesh(args):
    if args.kind == "uniform":
        mesh = uniform_mesh(args.T, args.N)
    elif args.kind == "graded":
        mesh = graded_mesh(args.T, args.N, args.gamma)
    else:
        if args.r is None:
            raise SystemExit("error: --r is required for --kind two-sided")
        mesh = two_sided_graded_mesh(args.T, args.N, args.r, args.gamma1, args.gamma2)
    write_mesh_csv(mesh, args.out)
    return 0


def cmd_weights(args):
    mesh = read_mesh_csv(args.mesh)
    kernel = power_kernel(args.mu) if args.mu is not None else frac_integral_kernel(args.alpha)
    if args.method == "dd":
        table = weights_dd(kernel, mesh)
    else:
        table = weights_real_quadrature(kernel, mesh, args.tol)
    table.to_csv(args.out)
    return 0


def cmd_fracint(args):
    a, b = args.alpha, args.beta
    mesh = _time_mesh(args)
    kernel = frac_integral_kernel(a)
    cfg = _fast_config(args)
    t0 = time.perf_counter()
    n0 = cfg.n0 if cfg.n0 is not None else default_n0(mesh.N)
    hist = build_history_quadrature(kernel, mesh, n0, cfg.tol)
    ev = FastGCQ(kernel, mesh, cfg, hist)
    f = mesh.points**b
    c = np.array([ev.step(v) for v in f])
    wall = time.perf_counter() - t0
    exact = math.gamma(b + 1) / math.gamma(a + b + 1) * mesh.points ** (a + b)
    out = Path(args.out)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "t_n", "c_n", "exact", "abs_err"])
        for n in range(mesh.N):
            w.writerow([n + 1, _fmt(mesh.points[n]), _fmt(c[n]), _fmt(exact[n]), _fmt(abs(c[n] - exact[n]))])
    meta = {
        "N": mesh.N,
        "alpha": a,
        "beta": b,
        "gamma": args.gamma,
        "tol": cfg.tol,
        "n0": ev.n0,
        "local_method": cfg.local_method,
        "N_Q_his": hist.count,
        "N_Q_loc": ev.n_contour if cfg.local_method == "contour" else 0,
        "max_abs_err": float(np.max(np.abs(c - exact))),
        "wall_time": wall,
    }
    out.with_suffix(".json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    return 0


def cmd_subdiffuse(args):
    a, b = args.alpha, args.beta
    intervals = int(round(2.0 / args.dx))
    fem = fem_assemble(intervals)
    cfg = _fast_config(args)
    source = harness._example2_source(a, b)

    def run(N):
        mesh = uniform_mesh(1.0, N) if args.gamma == 1 else graded_mesh(1.0, N, args.gamma)
        if args.path == "smooth":
            sc = SubdiffusionConfig(a, mesh, fem, lambda x: np.cos(np.pi * x / 2), source=source, fast=cfg)
            return mesh, solve_smooth(sc)
        sc = SubdiffusionConfig(a, mesh, fem, 1.0, source=source, path="nonsmooth", fast=cfg)
        return mesh, solve_nonsmooth(sc)

    mesh, u = run(args.N)
    out = Path(args.out)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "t_n"] + [f"u{i + 1}" for i in range(fem.size)])
        for n in range(mesh.N):
            w.writerow([n + 1, _fmt(mesh.points[n])] + [_fmt(v) for v in u[n]])

    if args.path == "smooth":
        err = max(
            l2_error(fem, u[n], lambda x, t=t: (1 + t**b) * np.cos(np.pi * x / 2))
            for n, t in enumerate(mesh.points)
        )
        reference = "exact"
    else:
        _, fine = run(2 * args.N)
        err = max(l2_error(fem, u[n], fine[2 * n + 1]) for n in range(mesh.N))
        reference = "step-doubled"
    report = {"N": args.N, "intervals": intervals, "path": args.path, "reference": reference,
              "max_l2_error": float(err), "eoc": []}
    if args.Ns:
        problem = "fem_example2" if args.path == "smooth" else "nonsmooth_example4"
        rep = harness.run_convergence(
            problem, {"alpha": a, "beta": b, "gamma": args.gamma, "intervals": intervals}, args.Ns, cfg
        )
        report["eoc"] = [{"N": n, "error": e, "eoc": o} for n, e, o in zip(rep.Ns, rep.errors, [None] + rep.eoc)]
        report["predicted"] = rep.predicted
    out.with_suffix(".json").write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    return 0


def cmd_convergence(args):
    if args.alpha is None:
        args.alpha = 0.4 if args.problem == "two_singularity_example3" else 0.5
    params = {"alpha": args.alpha, "beta": args.beta, "gamma": args.gamma}
    if args.problem == "two_singularity_example3":
        params = {"alpha": args.alpha, "beta1": args.beta1, "beta2": args.beta2, "r": args.r,
                  "mesh": args.mesh_kind}
    if args.intervals is not None:
        params["intervals"] = args.intervals
    rep = harness.run_convergence(args.problem, params, args.Ns, _fast_config(args))
    harness.emit(rep, args.out, args.format, args.timing)
    if args.format == "csv":
        out = Path(args.out)
        harness.write_gnuplot(out.with_suffix(".gp"), f"{args.problem} convergence", "N", "max error",
                              [(out.name, "1:2", args.problem)])
    return 0


def cmd_quad_table(args):
    table = harness.quadrature_count_table(args.alpha, args.gammas, args.Ns, args.tol, args.n0)
    harness.emit_table(table, args.out, args.format)
    return 0


def cmd_reproduce(args):
    for path in harness.reproduce(args.figure, args.outdir, args.quick):
        print(path)
    return 0


# ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gcq", description="gCQ on nonuniform time meshes")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh", help="write a time mesh as CSV")
    p.add_argument("--kind", choices=["uniform", "graded", "two-sided"], default="graded")
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--r", type=float, default=None)
    p.add_argument("--gamma1", type=float, default=1.0)
    p.add_argument("--gamma2", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mesh)

    p = sub.add_parser("weights", help="reference weight table for a mesh")
    p.add_argument("--alpha", type=float, default=0.5, help="order of the fractional integral")
    p.add_argument("--mu", type=float, default=None, help="use K(z) = z**mu instead")
    p.add_argument("--mesh", required=True)
    p.add_argument("--method", choices=["dd", "quad"], default="dd")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_weights)

    p = sub.add_parser("fracint", help="fast fractional integral of t**beta")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--N", type=int, required=True)
    _add_fast(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fracint)

    p = sub.add_parser("subdiffuse", help="1D subdiffusion with a known source")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--dx", type=_positive_fraction, default=1 / 512)
    p.add_argument("--path", choices=["smooth", "nonsmooth"], default="smooth")
    p.add_argument("--Ns", type=_ints, default=None, help="comma list for an EOC table")
    _add_fast(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_subdiffuse)

    p = sub.add_parser("convergence", help="error/EOC sweep for a model problem")
    p.add_argument("--problem", choices=sorted(harness.PROBLEMS), default="fracint")
    p.add_argument("--alpha", type=float, default=None, help="0.4 for the two-singularity problem, else 0.5")
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--beta1", type=float, default=0.6)
    p.add_argument("--beta2", type=float, default=0.8)
    p.add_argument("--r", type=float, default=0.28)
    p.add_argument("--mesh-kind", choices=["two_sided", "uniform"], default="two_sided")
    p.add_argument("--intervals", type=int, default=None)
    p.add_argument("--Ns", type=_ints, default=[64, 128, 256, 512])
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--timing", action="store_true", help="include wall times")
    p.add_argument("--config", default=None, help="JSON file of flag values")
    _add_fast(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_convergence, parser=p)

    p = sub.add_parser("quad-table", help="history quadrature node counts")
    p.add_argument("--alpha", type=float, default=0.8)
    p.add_argument("--gammas", type=_floats, default=[2, 4, 6, 8, 10])
    p.add_argument("--Ns", type=_ints, default=[16, 32, 64, 128, 256, 512, 1024, 2048, 4096])
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--n0", type=int, default=10)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--config", default=None, help="JSON file of flag values")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_quad_table, parser=p)

    p = sub.add_parser("reproduce", help="regenerate a figure or table")
    p.add_argument("--figure", choices=["fig1", "fig2", "tab1", "tab2", "fig4", "fig8"], required=True)
    p.add_argument("--outdir", default="out")
    p.add_argument("--quick", action="store_true", help="smaller N for a fast run")
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if hasattr(args, "parser"):
        _load_json_config(args, args.parser)
    try:
        return args.func(args)
    except (DomainError, ConvergenceError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
