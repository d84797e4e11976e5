"""Convergence sweeps, order estimates, node-count tables and artifact output."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .fast import FastConfig, build_history_quadrature, default_n0, fractional_integral
from .kernels import frac_derivative_history_kernel, frac_integral_kernel
from .meshgen import TimeMesh, graded_mesh, two_sided_graded_mesh, uniform_mesh, write_mesh_csv
from .subdiffusion import (
    SubdiffusionConfig,
    fem_assemble,
    l2_error,
    scalar_system,
    solve_nonsmooth,
    solve_smooth,
)

__all__ = [
    "ConvergenceReport",
    "PROBLEMS",
    "run_convergence",
    "estimate_order",
    "quadrature_count_table",
    "emit",
    "emit_table",
    "write_gnuplot",
    "reproduce",
    "thread_count",
]


def thread_count() -> int:
    """Worker bound from ``GCQ_THREADS`` (default 1)."""
    raw = os.environ.get("GCQ_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"GCQ_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"GCQ_THREADS must be a positive integer, got {raw!r}")
    return n


# ----------------------------------------------------------------------------
# problems: each returns (max error, history node count) for one N

G = math.gamma


def _mesh(N, gamma, T=1.0) -> TimeMesh:
    return uniform_mesh(T, N) if gamma == 1 else graded_mesh(T, N, gamma)


def _fracint(N, p, cfg):
    a, b, g = p["alpha"], p["beta"], p["gamma"]
    mesh = _mesh(N, g)
    kernel = frac_integral_kernel(a)
    hist = build_history_quadrature(kernel, mesh, cfg.n0 or default_n0(N), cfg.tol)
    c = fractional_integral(kernel, mesh, mesh.points**b, cfg, hist)
    exact = G(b + 1) / G(a + b + 1) * mesh.points ** (a + b)
    return float(np.max(np.abs(c - exact))), hist.count


def _example1(N, p, cfg):
    a, b, g = p["alpha"], p["beta"], p["gamma"]
    mesh = _mesh(N, g)
    coef = G(b + 1) / G(b - a + 1)
    sc = SubdiffusionConfig(
        a, mesh, scalar_system(1.0), 0.0, load=lambda t: coef * t ** (b - a) + t**b, fast=cfg
    )
    info: dict = {}
    u = solve_smooth(sc, info)[:, 0]
    return float(np.max(np.abs(u - mesh.points**b))), info["n_history"]


def _example2_source(a, b):
    coef = G(b + 1) / G(b - a + 1)
    return lambda x, t: (coef * t ** (b - a) + math.pi**2 * (1 + t**b) / 4) * np.cos(np.pi * x / 2)


def _example2(N, p, cfg):
    a, b, g = p["alpha"], p["beta"], p["gamma"]
    fem = fem_assemble(int(p.get("intervals", 1024)))
    mesh = _mesh(N, g)
    sc = SubdiffusionConfig(
        a, mesh, fem, lambda x: np.cos(np.pi * x / 2), source=_example2_source(a, b), fast=cfg
    )
    info: dict = {}
    u = solve_smooth(sc, info)
    err = max(
        l2_error(fem, u[n], lambda x, t=t: (1 + t**b) * np.cos(np.pi * x / 2))
        for n, t in enumerate(mesh.points)
    )
    return float(err), info["n_history"]


def example3_solution(a, b1, b2, r):
    def u(t):
        return 1.0 + t**b1 + (max(t - r, 0.0) ** b2 if t > r else 0.0)

    c1, c2 = G(b1 + 1) / G(b1 - a + 1), G(b2 + 1) / G(b2 - a + 1)

    def f(t):
        jump = c2 * (t - r) ** (b2 - a) if t > r else 0.0
        return u(t) + c1 * t ** (b1 - a) + jump

    return u, f


def example3_mesh(N, p) -> TimeMesh:
    if p.get("mesh", "two_sided") == "uniform":
        return uniform_mesh(1.0, N)
    b1, b2 = p.get("beta1", 0.6), p.get("beta2", 0.8)
    return two_sided_graded_mesh(
        1.0, N, p.get("r", 0.28), p.get("gamma1", 1.0 / b1), p.get("gamma2", 1.0 / b2)
    )


def _example3_run(N, p, cfg):
    a, b1, b2, r = p.get("alpha", 0.4), p.get("beta1", 0.6), p.get("beta2", 0.8), p.get("r", 0.28)
    mesh = example3_mesh(N, p)
    u, f = example3_solution(a, b1, b2, r)
    sc = SubdiffusionConfig(a, mesh, scalar_system(1.0), 1.0, load=lambda t: f(t), fast=cfg)
    info: dict = {}
    un = solve_smooth(sc, info)[:, 0]
    exact = np.array([u(t) for t in mesh.points])
    return mesh, un, exact, info["n_history"]


def _example3(N, p, cfg):
    _, un, exact, nh = _example3_run(N, p, cfg)
    return float(np.max(np.abs(un - exact))), nh


def _example4(N, p, cfg):
    a, b, g = p["alpha"], p["beta"], p["gamma"]
    fem = fem_assemble(int(p.get("intervals", 64)))

    def run(n_steps):
        sc = SubdiffusionConfig(
            a, _mesh(n_steps, g), fem, 1.0, source=_example2_source(a, b), path="nonsmooth", fast=cfg
        )
        info: dict = {}
        return solve_nonsmooth(sc, info), info["n_history"]

    coarse, nh = run(N)
    fine, _ = run(2 * N)
    err = max(l2_error(fem, coarse[n], fine[2 * n + 1]) for n in range(N))
    return float(err), nh


def _predicted(problem, p) -> float:
    if problem == "fracint":
        return min(1.0, p["gamma"] * (p["alpha"] + p["beta"]))
    if problem in ("ode_example1", "fem_example2"):
        return min(1.0, p["gamma"] * p["beta"])
    if problem == "two_singularity_example3":
        if p.get("mesh", "two_sided") == "uniform":
            return min(1.0, p.get("beta1", 0.6), p.get("beta2", 0.8))
        return 1.0
    return min(1.0, p["gamma"] * p["alpha"], p["gamma"] * p["beta"])


PROBLEMS: dict[str, Callable] = {
    "fracint": _fracint,
    "ode_example1": _example1,
    "fem_example2": _example2,
    "two_singularity_example3": _example3,
    "nonsmooth_example4": _example4,
}


# ----------------------------------------------------------------------------
# reports


@dataclass
class ConvergenceReport:
    problem: str
    params: dict
    Ns: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    n_history: list = field(default_factory=list)
    wall_times: list = field(default_factory=list)
    eoc: list = field(default_factory=list)
    predicted: float = float("nan")

    @property
    def final_eoc(self):
        numeric = [e for e in self.eoc if not isinstance(e, str)]
        return numeric[-1] if numeric else None

    def to_dict(self, include_timing: bool = False) -> dict:
        d = asdict(self)
        if not include_timing:
            d.pop("wall_times")
        return d


def estimate_order(errors: Sequence[float], Ns: Sequence[int]) -> list:
    """Pairwise slopes ``log(e_i / e_{i+1}) / log(N_{i+1} / N_i)``.

    A pair containing an exact (zero) error yields the marker ``"exact"``.
    """
    if len(errors) != len(Ns) or len(Ns) < 2:
        raise ValueError("need matching error/N lists of length >= 2")
    out: list = []
    for (e0, e1), (n0, n1) in zip(zip(errors, errors[1:]), zip(Ns, Ns[1:])):
        if e0 < 0 or e1 < 0 or not (math.isfinite(e0) and math.isfinite(e1)):
            raise ValueError(f"errors must be finite and >= 0, got {e0}, {e1}")
        if n1 <= n0:
            raise ValueError("Ns must be increasing")
        if e0 == 0 or e1 == 0:
            out.append("exact")
        else:
            out.append(math.log(e0 / e1) / math.log(n1 / n0))
    return out


def _parallel_map(fn, items, threads=None):
    threads = threads or thread_count()
    if threads == 1 or len(items) < 2:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def run_convergence(
    problem: str,
    params: dict,
    Ns: Sequence[int],
    config: FastConfig = FastConfig(),
    threads: int | None = None,
) -> ConvergenceReport:
    """Run ``problem`` for every ``N`` and collect max errors and EOCs."""
    if problem not in PROBLEMS:
        raise ValueError(f"unknown problem {problem!r}; choose from {sorted(PROBLEMS)}")
    Ns = [int(n) for n in Ns]
    if any(b <= a for a, b in zip(Ns, Ns[1:])):
        raise ValueError("Ns must be strictly increasing")
    fn = PROBLEMS[problem]

    def cell(N):
        t0 = time.perf_counter()
        try:
            err, nh = fn(N, params, config)
        except Exception as exc:
            raise RuntimeError(f"{problem} failed at N={N}: {exc}") from exc
        return err, nh, time.perf_counter() - t0

    results = _parallel_map(cell, Ns, threads)
    rep = ConvergenceReport(problem, dict(params), Ns, predicted=_predicted(problem, params))
    for err, nh, wall in results:
        rep.errors.append(err)
        rep.n_history.append(nh)
        rep.wall_times.append(wall)
    if len(Ns) >= 2:
        rep.eoc = estimate_order(rep.errors, Ns)
    return rep


def quadrature_count_table(
    alpha: float,
    gammas: Sequence[float],
    Ns: Sequence[int],
    tol: float = 1e-8,
    n0: int = 10,
    threads: int | None = None,
) -> dict:
    """History node counts for the fractional integral of order ``alpha``."""
    kernel = frac_integral_kernel(alpha)
    cells = [(g, N) for g in gammas for N in Ns]

    def cell(gn):
        g, N = gn
        return build_history_quadrature(kernel, _mesh(N, g), n0, tol).count

    counts = _parallel_map(cell, cells, threads)
    it = iter(counts)
    return {
        "alpha": float(alpha),
        "tol": float(tol),
        "n0": int(n0),
        "Ns": [int(n) for n in Ns],
        "rows": {repr(float(g)): [next(it) for _ in Ns] for g in gammas},
    }


# ----------------------------------------------------------------------------
# emission


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return "%.12e" % float(v)


def emit(report: ConvergenceReport, path, format: str = "csv", include_timing: bool = False) -> None:
    """Write a report; identical reports give identical bytes."""
    path = Path(path)
    if format == "json":
        text = json.dumps(report.to_dict(include_timing), sort_keys=True, indent=2) + "\n"
        path.write_text(text)
        return
    if format != "csv":
        raise ValueError(f"unknown format {format!r}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["N", "error", "n_history", "eoc", "predicted"]
    if include_timing:
        header.append("wall_time")
    w.writerow(header)
    for i, N in enumerate(report.Ns):
        row = [
            _fmt(N),
            _fmt(report.errors[i]),
            _fmt(report.n_history[i]),
            _fmt(report.eoc[i - 1]) if i > 0 and report.eoc else "",
            _fmt(report.predicted),
        ]
        if include_timing:
            row.append(_fmt(report.wall_times[i]))
        w.writerow(row)
    path.write_text(buf.getvalue())


def emit_table(table: dict, path, format: str = "csv") -> None:
    path = Path(path)
    if format == "json":
        path.write_text(json.dumps(table, sort_keys=True, indent=2) + "\n")
        return
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["gamma"] + [str(n) for n in table["Ns"]])
    for g, counts in table["rows"].items():
        w.writerow([g] + [str(c) for c in counts])
    path.write_text(buf.getvalue())


def write_gnuplot(path, title: str, xlabel: str, ylabel: str, series, logscale: str = "xy"):
    """Write a gnuplot script plotting ``(csv_name, columns, label)`` series."""
    lines = [
        "set datafile separator ','",
        f"set title '{title}'",
        f"set xlabel '{xlabel}'",
        f"set ylabel '{ylabel}'",
        f"set logscale {logscale}" if logscale else "unset logscale",
        "set key left bottom",
        "plot " + ", \\\n     ".join(
            f"'{fname}' using {cols} skip 1 with linespoints title '{label}'"
            for fname, cols, label in series
        ),
        "",
    ]
    Path(path).write_text("\n".join(lines))


# ----------------------------------------------------------------------------
# reproduction targets


def _sweep_target(outdir, stem, problem, cases, Ns, title, threads):
    series, reports = [], []
    for label, params in cases:
        rep = run_convergence(problem, params, Ns, threads=threads)
        fname = f"{stem}_{label}.csv"
        emit(rep, outdir / fname, "csv")
        emit(rep, outdir / f"{stem}_{label}.json", "json")
        series.append((fname, "1:2", label))
        reports.append(rep)
    write_gnuplot(outdir / f"{stem}.gp", title, "N", "max error", series)
    return reports


def reproduce(figure: str, outdir, quick: bool = False, threads: int | None = None) -> list[Path]:
    """Regenerate one figure or table as CSV/JSON plus a gnuplot script."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    before = set(outdir.iterdir())
    Ns = [32, 64, 128, 256] if quick else [64, 128, 256, 512, 1024, 2048]
    table_Ns = [16, 32, 64, 128] if quick else [16, 32, 64, 128, 256, 512, 1024, 2048, 4096]
    gammas = [2, 4] if quick else [2, 4, 6, 8, 10]

    if figure == "fig1":
        cases = []
        for a, b in [(0.3, 0.2), (0.5, 0.3), (0.4, 0.6), (0.8, -0.5)]:
            cases.append((f"a{a}_b{b}", {"alpha": a, "beta": b, "gamma": 1.0 / (a + b)}))
        _sweep_target(outdir, "fig1", "fracint", cases, Ns, "fractional integral, gamma = 1/(alpha+beta)", threads)
    elif figure == "fig2":
        cases = [(f"g{g}", {"alpha": 0.4, "beta": 0.1, "gamma": g}) for g in (1.0, 1.5, 2.0, 2.5)]
        _sweep_target(outdir, "fig2", "fracint", cases, Ns, "fractional integral, alpha=0.4, beta=0.1", threads)
    elif figure == "fig4":
        cases = []
        for a, b in [(0.5, 0.4), (0.3, 0.5), (0.7, 0.6)]:
            cases.append((f"a{a}_b{b}", {"alpha": a, "beta": b, "gamma": 1.0 / b}))
        _sweep_target(outdir, "fig4", "ode_example1", cases, Ns, "model ODE, gamma = 1/beta", threads)
    elif figure in ("tab1", "tab2"):
        alpha = 0.8 if figure == "tab1" else 0.5
        table = quadrature_count_table(alpha, gammas, table_Ns, 1e-8, 10, threads)
        emit_table(table, outdir / f"{figure}.csv", "csv")
        emit_table(table, outdir / f"{figure}.json", "json")
        series = [(f"{figure}_long.csv", f"1:{i + 2}", f"gamma={g}") for i, g in enumerate(table["rows"])]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N"] + list(table["rows"]))
        for i, N in enumerate(table["Ns"]):
            w.writerow([N] + [table["rows"][g][i] for g in table["rows"]])
        (outdir / f"{figure}_long.csv").write_text(buf.getvalue())
        write_gnuplot(outdir / f"{figure}.gp", "history quadrature nodes", "N", "nodes", series, "x")
    elif figure == "fig8":
        N = 256 if quick else 1024
        p = {"alpha": 0.4, "beta1": 0.6, "beta2": 0.8, "r": 0.28}
        series = []
        for kind in ("two_sided", "uniform"):
            mesh, un, exact, _ = _example3_run(N, dict(p, mesh=kind), FastConfig())
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(["n", "t", "tau", "abs_err"])
            for n in range(N):
                w.writerow([n + 1, _fmt(mesh.points[n]), _fmt(mesh.steps[n]), _fmt(abs(un[n] - exact[n]))])
            (outdir / f"fig8_{kind}.csv").write_text(buf.getvalue())
            series.append((f"fig8_{kind}.csv", "2:4", kind))
        write_mesh_csv(two_sided_graded_mesh(1.0, N, 0.28, 1 / 0.6, 1 / 0.8), outdir / "fig8_mesh.csv")
        write_gnuplot(outdir / "fig8.gp", "two singularities, r = 0.28", "t", "absolute error", series, "y")
    else:
        raise ValueError(f"unknown figure {figure!r}; choose fig1, fig2, tab1, tab2, fig4 or fig8")
    return sorted(set(outdir.iterdir()) - before)
