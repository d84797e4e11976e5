"""Fast and oblivious evaluation of gCQ sums ``c_n = sum_j omega_{n,j} f_j``.

The sum is split at ``n - n0``.  The last ``n0`` terms (local part) use
exact window weights or a contour quadrature; the older terms (history)
use a real-line quadrature in which every node carries one scalar state
updated by an implicit-Euler step.  Live memory is independent of ``N``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import special as sp

from ._validation import ConvergenceError, as_samples, check_count, check_positive
from .kernels import KernelSpec
from .meshgen import TimeMesh, mesh_stats
from .special import complete_elliptic_K, gauss_jacobi_left, jacobi_sn_cn_dn

__all__ = [
    "RealQuadrature",
    "ContourQuadrature",
    "FastConfig",
    "FastGCQ",
    "build_history_quadrature",
    "build_local_contour",
    "contour_for_poles",
    "window_weights",
    "fractional_integral",
    "default_n0",
    "default_n_contour",
]

Q_THRESHOLD = 1.1
_TAYLOR_MAX_Q = 2.5
_MAX_PANEL_ORDER = 64


def default_n0(N: int) -> int:
    return min(10, N)


def default_n_contour(n0: int) -> int:
    return max(50, n0 * n0)


# ----------------------------------------------------------------------------
# history quadrature


@dataclass(frozen=True, eq=False)
class RealQuadrature:
    """Nodes and weights for ``int_0^inf G(x) (.) dx``; weights absorb ``G``."""

    nodes: np.ndarray
    weights: np.ndarray
    tol: float
    n0: int
    mesh_id: str
    x_max: float = 0.0
    panels: tuple = ()
    delta_min: float = 0.0

    @property
    def count(self) -> int:
        return len(self.nodes)

    def laplace(self, t) -> np.ndarray:
        """``sum_l w_l exp(-x_l t)`` for each ``t``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.exp(-np.multiply.outer(t, self.nodes)) @ self.weights


@lru_cache(maxsize=None)
def _legendre01(m: int):
    x, w = np.polynomial.legendre.leggauss(m)
    return 0.5 * (x + 1.0), 0.5 * w


def _panel_exact(alpha, a, b, s):
    """``int_a^b G(x) e^{-x s} dx / k(s)`` for the power density of order alpha."""
    return sp.gammainc(1.0 - alpha, b * s) - sp.gammainc(1.0 - alpha, a * s)


def _window_log_products(steps: np.ndarray, n0: int, X: float) -> tuple[np.ndarray, np.ndarray]:
    """For every window of ``n0`` consecutive steps: log prod r(tau X) and kappa(X)."""
    tx = steps * X
    lr = np.log1p(tx)
    kap = tx / (1.0 + tx)
    cl = np.concatenate([[0.0], np.cumsum(lr)])
    ck = np.concatenate([[0.0], np.cumsum(kap)])
    # windows ending at n = n0+1..N use steps n-n0+1..n (1-based)
    ends = np.arange(n0 + 1, len(steps) + 1)
    return -(cl[ends] - cl[ends - n0]), ck[ends] - ck[ends - n0]


def _tail_bound(alpha, scale, steps, n0, X) -> float:
    """Bound on ``int_X^inf G(x) prod_window r(tau x) x^{-1} dx`` over all windows."""
    logp, kap = _window_log_products(steps, n0, X)
    vals = logp - alpha * math.log(X) - np.log(alpha + kap)
    return scale * math.exp(float(vals.max()))


def build_history_quadrature(
    kernel: KernelSpec,
    mesh: TimeMesh,
    n0: int,
    tol: float = 1e-8,
    panel_ratio: float = 2.0,
    grid_points: int = 240,
) -> RealQuadrature:
    """Composite rule on ``(0, X]`` valid for every history window of ``mesh``.

    One Gauss-Jacobi panel with weight ``x^{-alpha}`` covers ``(0, 1/T]``;
    geometric Gauss-Legendre panels follow up to the truncation point ``X``.
    Each panel gets the smallest order whose exponential moments
    ``int G(x) e^{-x s} dx`` match the closed form to ``tol`` relative to
    ``k(s)`` for ``s`` across the range the history windows can reach.
    ``X`` is the smallest point beyond which the tail bound drops below
    ``tol/4``.
    """
    n0 = check_count(n0, "n0")
    tol = check_positive(tol, "tol")
    if not kernel.has_density:
        raise ValueError("history quadrature needs a kernel with -1 < mu < 0")
    N = mesh.N
    if N <= n0:
        return RealQuadrature(np.zeros(0), np.zeros(0), tol, n0, mesh.fingerprint())
    alpha = -kernel.mu
    scale = kernel.density_scale
    steps = mesh.steps
    T = mesh.T
    pts = np.concatenate([[0.0], mesh.points])
    # shortest span t_n - t_{n-n0} over the steps that have a history part
    delta_min = float(np.min(pts[n0 + 1 :] - pts[1 : N - n0 + 1]))

    # truncation point by bisection in log X
    lo, hi = math.log(1.0 / T), math.log(1.0 / T)
    while _tail_bound(alpha, scale, steps, n0, math.exp(hi)) > tol / 4:
        hi += 2.0
        if hi > 300:
            raise ConvergenceError(
                f"history tail bound stays above {tol / 4:.3e} "
                f"(achieved {_tail_bound(alpha, scale, steps, n0, math.exp(hi)):.3e})"
            )
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if _tail_bound(alpha, scale, steps, n0, math.exp(mid)) > tol / 4:
            lo = mid
        else:
            hi = mid
    X = math.exp(hi)

    edges = [min(1.0 / T, X)]
    while edges[-1] < X:
        edges.append(edges[-1] * panel_ratio)
    n_panels = len(edges)
    panel_tol = tol / n_panels

    s_hi = T + 40.0 * float(steps.max())
    s_lo = min(0.1 * delta_min, 0.1 / X)
    s = np.geomspace(s_lo, s_hi, grid_points)

    nodes, weights, panels = [], [], []

    kk = s ** (alpha - 1.0) / math.gamma(alpha)

    def fit(make_rule, exact):
        best = math.inf
        for m in range(1, _MAX_PANEL_ORDER + 1):
            x, w = make_rule(m)
            err = float(np.max(np.abs(np.exp(-np.multiply.outer(s, x)) @ w / kk - exact)))
            if err <= panel_tol:
                return x, w, m
            best = min(best, err)
        raise ConvergenceError(
            f"panel tolerance {panel_tol:.3e} not reached with {_MAX_PANEL_ORDER} nodes "
            f"(achieved {best:.3e})"
        )

    a0 = edges[0]

    def jacobi(m):
        r = gauss_jacobi_left(m, alpha)
        return a0 * r.nodes, scale * a0 ** (1.0 - alpha) * r.weights

    x, w, m = fit(jacobi, _panel_exact(alpha, 0.0, a0, s))
    nodes.append(x)
    weights.append(w)
    panels.append((0.0, a0, m))

    for a, b in zip(edges[:-1], edges[1:]):

        def legendre(m, a=a, b=b):
            y, wy = _legendre01(m)
            xx = a + (b - a) * y
            return xx, (b - a) * wy * scale * xx ** (-alpha)

        x, w, m = fit(legendre, _panel_exact(alpha, a, b, s))
        nodes.append(x)
        weights.append(w)
        panels.append((a, b, m))

    return RealQuadrature(
        np.concatenate(nodes),
        np.concatenate(weights),
        tol,
        n0,
        mesh.fingerprint(),
        X,
        tuple(panels),
        delta_min,
    )


# ----------------------------------------------------------------------------
# local contour


@dataclass(frozen=True, eq=False)
class ContourQuadrature:
    """Clockwise contour rule ``(1/2 pi i) oint g(z) dz ~ sum_l w_l g(z_l)``."""

    nodes: np.ndarray
    weights: np.ndarray
    kind: str  # "circle" or "elliptic"
    m: float
    M: float
    modulus: float = 0.0

    @property
    def count(self) -> int:
        return len(self.nodes)

    @property
    def q(self) -> float:
        return self.M / self.m


def contour_for_poles(m: float, M: float, n_nodes: int) -> ContourQuadrature:
    """Rule on the circle of radius ``M`` centred at ``M + m/10``."""
    n_nodes = check_count(n_nodes, "n_nodes", minimum=2)
    q = M / m
    l = np.arange(1, n_nodes + 1)
    if q < Q_THRESHOLD:
        theta = -math.pi + 2.0 * math.pi * l / n_nodes
        e = np.exp(1j * theta)
        z = m / 10.0 + M * (1.0 + e)
        dz = 1j * M * e
        return ContourQuadrature(z, -dz / (1j * n_nodes), "circle", m, M)

    # sn maps the line Im(sigma) = K'/2 onto |sn| = 1/sqrt(k); the Moebius
    # factor below sends that circle onto the circle through m/10 and 2M + m/10
    rho = math.sqrt(2.0 * q - 1.0)
    k = ((rho - 1.0) / (rho + 1.0)) ** 2
    K = complete_elliptic_K(k)
    Kp = complete_elliptic_K(math.sqrt((1.0 - k) * (1.0 + k)))
    sigma = -K + 0.5j * Kp + 4.0 * K * (l - 0.5) / n_nodes
    inv_k = 1.0 / k
    z = np.empty(n_nodes, dtype=complex)
    dz = np.empty(n_nodes, dtype=complex)
    c = M / (q - 1.0)
    for i, sg in enumerate(sigma):
        sn, cn, dn = jacobi_sn_cn_dn(complex(sg), k)
        z[i] = m / 10.0 + c * (rho * (inv_k + sn) / (inv_k - sn) - 1.0)
        dz[i] = c * rho * 2.0 * inv_k * cn * dn / (inv_k - sn) ** 2
    # increasing Re(sigma) already traverses the circle clockwise
    w = 4.0 * K / (2j * math.pi * n_nodes) * dz
    return ContourQuadrature(z, w, "elliptic", m, M, k)


def build_local_contour(mesh: TimeMesh, window: tuple[int, int], n_nodes: int) -> ContourQuadrature:
    """Contour enclosing the poles ``1/tau_j`` for ``j`` in the 1-based window."""
    st = mesh_stats(mesh, window)
    return contour_for_poles(1.0 / st.tau_max, 1.0 / st.tau_min, n_nodes)


# ----------------------------------------------------------------------------
# exact window weights


@lru_cache(maxsize=64)
def _binomials(mu: float, count: int) -> np.ndarray:
    b = np.empty(count)
    b[0] = 1.0
    for i in range(1, count):
        b[i] = b[i - 1] * (mu - (i - 1)) / i
    return b


def _taylor_terms(w: int, rho: float) -> int:
    # bound on the p-th term: C(w-1+p, p) rho^p
    p, coef = 0, 1.0
    while True:
        p += 1
        coef *= (w - 1 + p) / p * rho
        if coef < 1e-18 and p > 4:
            return p + 1
        if p > 400:
            return p


def window_weights(mu: float, steps) -> np.ndarray:
    """``omega_{n,j}`` for the last row of a window with ``steps = tau_s..tau_n``.

    Double-precision Taylor expansion of the divided differences about the
    centre of the pole cluster when it is tight; extended-precision
    divided differences otherwise.
    """
    steps = np.asarray(steps, dtype=float)
    w = len(steps)
    x = 1.0 / steps
    xmin, xmax = float(x.min()), float(x.max())
    if xmax / xmin <= _TAYLOR_MAX_Q:
        c = 0.5 * (xmin + xmax)
        eps = x / c - 1.0
        rho = (xmax - xmin) / (xmax + xmin)
        P = _taylor_terms(w, rho)
        b = _binomials(float(mu), w + P)
        out = np.empty(w)
        h = eps[-1] ** np.arange(P)
        pf = 1.0
        cmu = c**mu
        out[-1] = cmu * float(b[:P] @ h)
        for i in range(w - 2, -1, -1):
            k = w - 1 - i
            pf *= 1.0 + eps[i + 1]
            h = np.convolve(h, eps[i] ** np.arange(P))[:P]
            out[i] = (-1.0) ** k * cmu * pf * float(b[k : k + P] @ h)
        return out
    from .reference import _adaptive_dd
    from .kernels import power_kernel

    kern = power_kernel(mu)
    rows, _, _ = _adaptive_dd(kern.K, kern.taylor, steps, None)
    return np.array([float(v) for v in rows[-1]])


# ----------------------------------------------------------------------------
# the stepper


@dataclass(frozen=True)
class FastConfig:
    n0: Optional[int] = None
    tol: float = 1e-8
    local_method: str = "exact-dd"  # or "contour"
    n_contour: Optional[int] = None

    def __post_init__(self):
        if self.local_method not in ("exact-dd", "contour"):
            raise ValueError(f"unknown local method {self.local_method!r}")
        check_positive(self.tol, "tol")


def _ordered_sum(w: np.ndarray, v: np.ndarray):
    if v.ndim == 1:
        prod = w * v
        if np.iscomplexobj(prod):
            return complex(math.fsum(prod.real), math.fsum(prod.imag))
        return math.fsum(prod)
    return w @ v


class FastGCQ:
    """Sequential evaluator of ``[K(d_t) f]_n`` for ``K(z) = z**mu, -1 < mu < 0``.

    Use :meth:`step` for plain sums, or :meth:`advance` / :meth:`lagged` /
    :meth:`diagonal` / :meth:`push` when the current sample depends on the
    output (implicit schemes).
    """

    def __init__(
        self,
        kernel: KernelSpec,
        mesh: TimeMesh,
        config: FastConfig = FastConfig(),
        history: Optional[RealQuadrature] = None,
        sample_shape: tuple = (),
    ):
        if not kernel.has_density:
            raise ValueError("fast evaluation needs -1 < mu < 0")
        self.kernel = kernel
        self.mesh = mesh
        self.config = config
        self.n0 = config.n0 if config.n0 is not None else default_n0(mesh.N)
        self.n0 = check_count(self.n0, "n0")
        self.n_contour = config.n_contour or default_n_contour(self.n0)
        if history is None:
            history = build_history_quadrature(kernel, mesh, self.n0, config.tol)
        elif history.mesh_id != mesh.fingerprint() or history.n0 != self.n0:
            raise ValueError("history quadrature was built for a different mesh or n0")
        self.history = history
        self.sample_shape = tuple(sample_shape)
        self.reset()

    def reset(self):
        self.n = 0
        self.y = np.zeros((self.history.count,) + self.sample_shape)
        self.buffer: deque = deque()
        self._local = None
        self._lagged = None

    def state_size(self) -> int:
        """Scalars held between steps: history states, contour states, sample buffer."""
        per = int(np.prod(self.sample_shape)) if self.sample_shape else 1
        n_loc = self.n_contour if self.config.local_method == "contour" else 0
        return (self.history.count + n_loc + self.n0) * per

    # -- implicit interface -------------------------------------------------

    def advance(self):
        """Move to the next step; the sample for it is supplied later via push."""
        if self._lagged is not None:
            raise RuntimeError("push the sample of the current step before advancing")
        if self.n >= self.mesh.N:
            raise RuntimeError("mesh exhausted")
        self.n += 1
        n, n0, tau = self.n, self.n0, self.mesh.steps
        if len(self.buffer) == n0:
            f_old = self.buffer.popleft()
            j = n - n0  # 1-based index of the absorbed sample
            r = 1.0 / (1.0 + tau[j - 1] * self.history.nodes)
            self.y = self._scale(r, self.y + tau[j - 1] * f_old)

        lo = max(1, n - n0 + 1)
        hist = 0.0
        if n > n0 and self.history.count:
            logp = np.zeros(self.history.count)
            for ell in range(lo, n + 1):
                logp -= np.log1p(tau[ell - 1] * self.history.nodes)
            hist = _ordered_sum(self.history.weights * np.exp(logp), self.y)

        window = tau[lo - 1 : n]
        if self.config.local_method == "exact-dd":
            wts = window_weights(self.kernel.mu, window)
            self._local = ("dd", wts)
            past = list(self.buffer)
            loc = _ordered_sum(wts[:-1], np.array(past)) if past else 0.0
        else:
            quad = contour_for_poles(1.0 / window.max(), 1.0 / window.min(), self.n_contour)
            z = quad.nodes
            gz = quad.weights * z**self.kernel.mu
            u = np.zeros((len(z),) + self.sample_shape, dtype=complex)
            for ell, f_j in zip(range(lo, n), self.buffer):
                t = tau[ell - 1]
                u = self._scale(1.0 / (1.0 - t * z), u + t * f_j)
            u = self._scale(1.0 / (1.0 - tau[n - 1] * z), u)
            loc = np.real(_ordered_sum(gz, u))
            diag = float(np.real(np.sum(gz * tau[n - 1] / (1.0 - tau[n - 1] * z))))
            self._local = ("contour", diag)
        self._lagged = hist + loc + np.zeros(self.sample_shape) if self.sample_shape else float(hist + loc)
        return self._lagged

    def lagged(self):
        """Sum over ``j < n`` for the current step (after :meth:`advance`)."""
        if self._lagged is None:
            raise RuntimeError("call advance first")
        return self._lagged

    def diagonal(self) -> float:
        """``omega_{n,n}`` as used by the current local method."""
        kind, data = self._local
        return float(data[-1]) if kind == "dd" else data

    def push(self, f_n):
        if self._lagged is None:
            raise RuntimeError("call advance first")
        f_n = np.asarray(f_n, dtype=float)
        if f_n.shape != self.sample_shape:
            raise ValueError(f"sample shape {f_n.shape} != {self.sample_shape}")
        self.buffer.append(f_n.copy() if f_n.ndim else float(f_n))
        self._lagged = None

    def step(self, f_n):
        value = self.advance() + self.diagonal() * np.asarray(f_n, dtype=float)
        self.push(f_n)
        return value

    def _scale(self, r, v):
        return r.reshape(r.shape + (1,) * len(self.sample_shape)) * v


def fractional_integral(kernel: KernelSpec, mesh: TimeMesh, f, config: FastConfig = FastConfig(), history=None) -> np.ndarray:
    """Fast evaluation of ``c_n`` for all ``n`` (time along axis 0 of the result)."""
    samples = as_samples(f, mesh.points)
    ev = FastGCQ(kernel, mesh, config, history, samples.shape[1:])
    out = np.empty(samples.shape)
    for n in range(mesh.N):
        out[n] = ev.step(samples[n])
    return out
