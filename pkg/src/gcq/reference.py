"""Slow reference constructions of the gCQ weights.

Two independent routes to the same lower-triangular table ``omega[n, j]``:

* divided differences of ``K`` at the inverse steps, in extended precision;
* the real-line integral ``tau_j int_0^inf G(x) prod_{l=j..n} 1/(1 + tau_l x) dx``.

Both are O(N^2) (or worse) and exist to validate the fast evaluator.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import mpmath
import numpy as np
from scipy import integrate

from ._validation import ConvergenceError, as_samples, check_order
from .kernels import KernelSpec, power_kernel
from .meshgen import TimeMesh
from .special import gauss_jacobi_left

__all__ = [
    "WeightTable",
    "divided_differences",
    "dd_weight_rows",
    "weights_dd",
    "weights_real_quadrature",
    "apply_direct",
    "composition_check",
]

_EPS = np.finfo(float).eps
_SNAP_ULPS = 64
_DPS_LADDER = (40, 80, 160, 320, 640, 1280, 2560)


@dataclass(frozen=True, eq=False)
class WeightTable:
    """Lower-triangular gCQ weights; ``values[n-1, j-1]`` is ``omega_{n,j}``."""

    values: np.ndarray
    mesh_id: str
    kernel: str
    method: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return self.values.shape[0]

    def diagonal(self) -> np.ndarray:
        return np.diagonal(self.values).copy()

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "j", "value"])
            for n in range(self.N):
                for j in range(n + 1):
                    w.writerow([n + 1, j + 1, f"{self.values[n, j]:.17e}"])


# ----------------------------------------------------------------------------
# divided differences in extended precision


def _generic_taylor(K):
    def taylor(c, m):
        return mpmath.diff(K, c, m) / mpmath.factorial(m)

    return taylor


def _prepare_nodes(x_float: np.ndarray, dps: int):
    """Snap float-level ties, then pull apart ties that are not adjacent.

    Returns mp nodes in which equal values only ever occur inside one
    contiguous run, plus a flag telling whether any node was moved.  A value
    recurring in ``g`` separate runs forms a cluster of spacing ``eta``; its
    divided differences cancel about ``(g - 1) * log10(1/eta)`` digits, so
    ``eta`` shrinks only as far as the working precision can absorb.
    """
    n = len(x_float)
    order = np.argsort(x_float, kind="stable")
    snapped = x_float.copy()
    start = 0
    for i in range(1, n + 1):
        if i == n or (
            x_float[order[i]] - x_float[order[start]]
            > _SNAP_ULPS * _EPS * x_float[order[start]]
        ):
            snapped[order[start:i]] = x_float[order[start]]
            start = i
    xs = [mpmath.mpf(float(v)) for v in snapped]

    runs = []  # (start, stop, repeat index of this value)
    seen: dict[float, int] = {}
    i = 0
    while i < n:
        j = i
        while j + 1 < n and snapped[j + 1] == snapped[i]:
            j += 1
        g = seen.get(snapped[i], 0)
        runs.append((i, j + 1, g))
        seen[snapped[i]] = g + 1
        i = j + 1
    most = max(seen.values(), default=1)
    if most == 1:
        return xs, False
    eta = mpmath.mpf(10) ** (-(dps // most))
    for a, b, g in runs:
        for m in range(a, b):
            xs[m] = xs[m] * (1 + g * eta)
    return xs, True


def dd_weight_rows(K, taylor, steps, dps: int):
    """gCQ weights from divided differences at ``1/steps`` with ``dps`` digits.

    Returns a list of mp rows (row ``n`` holds ``j = 0..n``) and a flag
    raised when non-adjacent equal steps had to be separated.
    """
    steps = np.asarray(steps, dtype=float)
    with mpmath.workdps(dps):
        x, separated = _prepare_nodes(1.0 / steps, dps)
        rows = []
        prev_dd: list = []
        prev_pf: list = []
        for n in range(len(x)):
            dd = [None] * (n + 1)
            pf = [None] * (n + 1)
            dd[n] = K(x[n])
            pf[n] = mpmath.mpf(1)
            for j in range(n - 1, -1, -1):
                diff = x[n] - x[j]
                if diff:
                    dd[j] = (dd[j + 1] - prev_dd[j]) / diff
                else:
                    # x[j..n] lie in one run, so all nodes coincide
                    dd[j] = taylor(x[n], n - j)
                pf[j] = prev_pf[j] * (-x[n])
            rows.append([pf[j] * dd[j] for j in range(n + 1)])
            prev_dd, prev_pf = dd, pf
    return rows, separated


def _rows_to_float(rows) -> np.ndarray:
    N = len(rows)
    out = np.zeros((N, N))
    for n, row in enumerate(rows):
        out[n, : n + 1] = [float(v) for v in row]
    return out


def _adaptive_dd(K, taylor, steps, dps: Optional[int]):
    if dps is not None:
        rows, sep = dd_weight_rows(K, taylor, steps, dps)
        return rows, sep, dps
    ladder = iter(_DPS_LADDER)
    d = next(ladder)
    rows, sep = dd_weight_rows(K, taylor, steps, d)
    cur = _rows_to_float(rows)
    for d_next in ladder:
        rows_n, sep = dd_weight_rows(K, taylor, steps, d_next)
        nxt = _rows_to_float(rows_n)
        if np.all(np.abs(nxt - cur) <= 4 * _EPS * np.abs(nxt)):
            return rows_n, sep, d_next
        cur, rows, d = nxt, rows_n, d_next
    raise ConvergenceError(
        f"divided differences not stable at {_DPS_LADDER[-1]} digits"
    )


def divided_differences(K: Callable, nodes, taylor: Optional[Callable] = None, dps: int = 60) -> float:
    """Newton divided difference ``K[x_1, ..., x_k]``.

    ``K`` must accept mpmath numbers.  Coincident nodes use the Taylor
    coefficient ``K^{(m)}(c)/m!`` (``taylor(c, m)`` if given, otherwise
    numerical differentiation in extended precision).
    """
    nodes = np.sort(np.asarray(nodes, dtype=float).ravel())
    if nodes.size == 0:
        raise ValueError("need at least one node")
    taylor = taylor or _generic_taylor(K)
    with mpmath.workdps(dps):
        x = [mpmath.mpf(float(v)) for v in nodes]
        table = [K(v) for v in x]
        for level in range(1, len(x)):
            new = []
            for i in range(len(x) - level):
                d = x[i + level] - x[i]
                if d:
                    new.append((table[i + 1] - table[i]) / d)
                else:
                    new.append(taylor(x[i], level))
            table = new
        return float(table[0])


def weights_dd(kernel: KernelSpec, mesh: TimeMesh, dps: Optional[int] = None) -> WeightTable:
    """All weights ``omega_{n,j} = prod_{l=j+1..n}(-tau_l)^{-1} K[1/tau_j, ..., 1/tau_n]``.

    Precision is raised until two consecutive levels agree to a few ulps.
    """
    rows, sep, used = _adaptive_dd(kernel.K, kernel.taylor, mesh.steps, dps)
    inv = 1.0 / mesh.steps
    confluent = bool(np.any(np.abs(np.diff(inv)) <= _SNAP_ULPS * _EPS * inv[1:]))
    diag = {"dps": used, "separated_ties": sep, "confluent": confluent}
    return WeightTable(_rows_to_float(rows), mesh.fingerprint(), kernel.name, "dd", diag)


# ----------------------------------------------------------------------------
# real-line quadrature


def _real_weight(kernel: KernelSpec, window: np.ndarray, tol: float, jacobi_nodes: int = 48):
    """``tau_j int_0^inf G(x) prod r(tau_l x) dx`` for ``window = tau_j..tau_n``."""
    alpha = -kernel.mu
    scale = kernel.density_scale
    a = 1.0 / window.max()

    def prod_r(x):
        x = np.asarray(x, dtype=float)
        return np.prod(1.0 / (1.0 + np.multiply.outer(x, window)), axis=-1)

    # singular panel (0, a]: x = a y, weight y^-alpha handled by the rule
    rule = gauss_jacobi_left(jacobi_nodes, alpha)
    head = scale * a ** (1.0 - alpha) * float(np.dot(rule.weights, prod_r(a * rule.nodes)))
    head_check_rule = gauss_jacobi_left(jacobi_nodes // 2, alpha)
    head_check = scale * a ** (1.0 - alpha) * float(
        np.dot(head_check_rule.weights, prod_r(a * head_check_rule.nodes))
    )

    # (a, inf) in the log variable x = a e^s
    log_a = math.log(a)
    log_window = np.log(window)

    def integrand(s):
        log_x = log_a + s
        # log(1 + tau x) without overflow for huge x
        ltx = log_window + log_x
        log_r = np.logaddexp(0.0, ltx)
        val = (1.0 - alpha) * log_x - float(log_r.sum())
        return scale * math.exp(val) if val > -745 else 0.0

    tail, err = integrate.quad(integrand, 0.0, math.inf, epsabs=tol / 10, epsrel=1e-13, limit=400)
    value = window[0] * (head + tail)
    err_total = window[0] * (err + abs(head - head_check))
    if not err_total <= tol:
        raise ConvergenceError(
            f"real-line weight quadrature reached {err_total:.3e} > tol {tol:.3e}"
        )
    return value, err_total


def weights_real_quadrature(kernel: KernelSpec, mesh: TimeMesh, tol: float = 1e-10) -> WeightTable:
    if not kernel.has_density:
        raise ValueError("real-line weights need -1 < mu < 0")
    N = mesh.N
    out = np.zeros((N, N))
    worst = 0.0
    steps = mesh.steps
    for n in range(N):
        for j in range(n + 1):
            out[n, j], err = _real_weight(kernel, steps[j : n + 1], tol)
            worst = max(worst, err)
    diag = {"tol": tol, "max_error_estimate": worst}
    return WeightTable(out, mesh.fingerprint(), kernel.name, "quad", diag)


# ----------------------------------------------------------------------------
# application


def apply_direct(weights: WeightTable, f) -> np.ndarray:
    """``c_n = sum_{j<=n} omega_{n,j} f_j`` for samples ``f`` (time on axis 0)."""
    W = weights.values
    f = np.asarray(f, dtype=float)
    if f.shape[:1] != (W.shape[0],):
        raise ValueError(f"expected {W.shape[0]} samples, got shape {f.shape}")
    return np.tensordot(W, f, axes=(1, 0))


def composition_check(alpha: float, mesh: TimeMesh, samples: int = 3, seed: int = 0) -> float:
    """Largest gap between ``z^(alpha-1)`` applied to first differences and ``z^alpha``.

    Both sides are formed in extended precision from random data and rounded
    to double before subtracting.
    """
    alpha = check_order(alpha)
    steps = mesh.steps
    k_int = power_kernel(alpha - 1.0)
    k_der = power_kernel(alpha)
    rows_int, _, d1 = _adaptive_dd(k_int.K, k_int.taylor, steps, None)
    rows_der, _, d2 = _adaptive_dd(k_der.K, k_der.taylor, steps, None)
    rng = np.random.default_rng(seed)
    worst = 0.0
    with mpmath.workdps(max(d1, d2)):
        tau = [mpmath.mpf(float(s)) for s in steps]
        for _ in range(samples):
            f = [mpmath.mpf(float(v)) for v in rng.standard_normal(mesh.N)]
            df = [(f[n] - (f[n - 1] if n else 0)) / tau[n] for n in range(mesh.N)]
            for n in range(mesh.N):
                lhs = float(mpmath.fsum(rows_int[n][j] * df[j] for j in range(n + 1)))
                rhs = float(mpmath.fsum(rows_der[n][j] * f[j] for j in range(n + 1)))
                worst = max(worst, abs(lhs - rhs))
    return worst


def sample(f, mesh: TimeMesh) -> np.ndarray:
    return as_samples(f, mesh.points)


def matrix_gcq_direct(alpha: float, M: np.ndarray, S: np.ndarray, mesh: TimeMesh, loads) -> np.ndarray:
    """Direct gCQ for ``K(z) = (z^alpha M + S)^{-1}`` applied to load vectors.

    Uses the generalised eigenbasis ``S V = M V diag(lam)``, ``V^T M V = I``,
    in which ``K`` is diagonal with entries ``1/(z^alpha + lam_k)``; each entry's
    weights come from extended-precision divided differences.
    """
    from scipy.linalg import eigh

    alpha = check_order(alpha)
    loads = np.asarray(loads, dtype=float)
    lam, V = eigh(S, M)
    coeff = loads @ V  # row n: V^T g_n
    out_modal = np.zeros_like(coeff)
    for k, lk in enumerate(lam):
        lk_mp = mpmath.mpf(float(lk))

        def K(z, lk_mp=lk_mp):
            return 1 / (mpmath.power(z, alpha) + lk_mp)

        rows, _, _ = _adaptive_dd(K, _generic_taylor(K), mesh.steps, None)
        W = _rows_to_float(rows)
        out_modal[:, k] = W @ coeff[:, k]
    return out_modal @ V.T
