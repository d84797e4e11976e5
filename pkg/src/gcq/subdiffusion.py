"""Time-fractional subdiffusion ``D^alpha u + A u = f`` with gCQ in time.

Space is discretised by piecewise linear finite elements on ``(-1, 1)``
with homogeneous Dirichlet conditions, giving a mass/stiffness pencil
``(M, S)``.  A scalar ODE is the special case ``M = 1, S = a``.

With ``v = u - u0`` the Caputo derivative becomes the composition of the
fractional integral of order ``1 - alpha`` with a first difference, so each
step solves

    (tau_n^{-alpha} M + S) v_n = b_n - S u0 + tau_n^{-alpha} M v_{n-1} - M L_n,

where ``L_n`` collects the weights ``omega_{n,j}, j < n`` of ``z^(alpha-1)``
applied to the difference quotients of ``v``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from ._validation import DomainError, check_count, check_order
from .fast import FastConfig, FastGCQ
from .kernels import PencilOperator, frac_derivative_history_kernel
from .meshgen import TimeMesh

__all__ = [
    "FemSystem",
    "SubdiffusionConfig",
    "fem_assemble",
    "scalar_system",
    "solve_smooth",
    "solve_nonsmooth",
    "laplace_invert_E",
    "l2_error",
]


@dataclass(frozen=True, eq=False)
class FemSystem:
    """Linear FE pencil on ``(-1, 1)``; ``x`` holds the interior nodes."""

    intervals: int
    dx: float
    x: np.ndarray
    op: PencilOperator

    @property
    def size(self) -> int:
        return self.op.size

    def mass_dense(self) -> np.ndarray:
        o = self.op
        return np.diag(o.m_diag) + np.diag(o.m_off, 1) + np.diag(o.m_off, -1)

    def stiff_dense(self) -> np.ndarray:
        o = self.op
        return np.diag(o.s_diag) + np.diag(o.s_off, 1) + np.diag(o.s_off, -1)


def fem_assemble(intervals: int) -> FemSystem:
    intervals = check_count(intervals, "intervals", minimum=2)
    dx = 2.0 / intervals
    n = intervals - 1
    x = -1.0 + dx * np.arange(1, intervals)
    op = PencilOperator(
        np.full(n - 1, dx / 6.0),
        np.full(n, 4.0 * dx / 6.0),
        np.full(n - 1, -1.0 / dx),
        np.full(n, 2.0 / dx),
    )
    return FemSystem(intervals, dx, x, op)


def scalar_system(a: float = 1.0) -> FemSystem:
    """The ODE ``D^alpha u + a u = f`` dressed as a one-node system."""
    op = PencilOperator(np.zeros(0), np.ones(1), np.zeros(0), np.array([float(a)]))
    return FemSystem(0, 0.0, np.zeros(1), op)


@dataclass
class SubdiffusionConfig:
    """Problem and discretisation parameters.

    ``source(x, t)`` gives nodal values of ``f`` and is loaded as ``M f_h``;
    alternatively ``load(t)`` returns the load vector directly.  ``u0`` is a
    function of ``x`` or a nodal vector.
    """

    alpha: float
    mesh: TimeMesh
    system: FemSystem
    u0: Union[Callable, np.ndarray, float] = 0.0
    source: Optional[Callable] = None
    load: Optional[Callable] = None
    path: str = "smooth"
    fast: FastConfig = field(default_factory=FastConfig)
    sigma: float = math.pi / 4
    d: float = math.pi / 6
    J: int = 50

    def __post_init__(self):
        self.alpha = check_order(self.alpha)
        if self.path not in ("smooth", "nonsmooth"):
            raise ValueError(f"path must be 'smooth' or 'nonsmooth', got {self.path!r}")
        if self.source is not None and self.load is not None:
            raise ValueError("give either source or load, not both")

    def u0_nodal(self) -> np.ndarray:
        u0 = self.u0
        if callable(u0):
            return np.asarray(u0(self.system.x), dtype=float) * np.ones(self.system.size)
        return np.asarray(u0, dtype=float) * np.ones(self.system.size)

    def load_at(self, t: float) -> np.ndarray:
        if self.load is not None:
            return np.asarray(self.load(t), dtype=float) * np.ones(self.system.size)
        if self.source is None:
            return np.zeros(self.system.size)
        fh = np.asarray(self.source(self.system.x, t), dtype=float) * np.ones(self.system.size)
        return self.system.op.mass(fh)


def _march(cfg: SubdiffusionConfig, u0: np.ndarray, info: Optional[dict]) -> np.ndarray:
    """Return ``v_1..v_N`` for zero initial data and load ``b_n - S u0``."""
    alpha = cfg.alpha
    op = cfg.system.op
    mesh = cfg.mesh
    kernel = frac_derivative_history_kernel(alpha)
    ev = FastGCQ(kernel, mesh, cfg.fast, sample_shape=(op.size,))
    su0 = op.stiff(u0)
    v_prev = np.zeros(op.size)
    out = np.empty((mesh.N, op.size))
    worst = 0.0
    for n in range(mesh.N):
        tau = mesh.steps[n]
        lag = ev.advance()
        c = tau ** (-alpha)
        rhs = cfg.load_at(mesh.points[n]) - su0 + c * op.mass(v_prev) - op.mass(lag)
        v = op.solve_pencil(c, 1.0, rhs)
        if info is not None:
            res = c * op.mass(v) + op.stiff(v) - rhs
            nr = np.linalg.norm(rhs)
            if nr > 0:
                worst = max(worst, float(np.linalg.norm(res) / nr))
        ev.push((v - v_prev) / tau)
        out[n] = v
        v_prev = v
    if info is not None:
        info.update(
            max_relative_residual=worst,
            n_history=ev.history.count,
            n0=ev.n0,
            state_size=ev.state_size(),
        )
    return out


def solve_smooth(cfg: SubdiffusionConfig, info: Optional[dict] = None) -> np.ndarray:
    """Snapshots ``u_1..u_N`` (rows) for initial data in the operator domain."""
    u0 = cfg.u0_nodal()
    return _march(cfg, u0, info) + u0


def laplace_invert_E(
    alpha: float,
    A,
    u0,
    t: float,
    J: int = 50,
    sigma: float = math.pi / 4,
    d: float = math.pi / 6,
):
    """``E(t) u0``, the inverse transform of ``z^(alpha-1) (z^alpha + A)^{-1} u0``.

    Trapezoid rule on the hyperbola ``z = mu (1 - sin(sigma + i s))``; ``A`` is
    a positive number or an object with ``solve(c, rhs)`` returning
    ``(c + A)^{-1} rhs``.  ``alpha = 1`` is accepted.
    """
    alpha = float(alpha)
    if not 0.0 < alpha <= 1.0:
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    t = float(t)
    if not t > 0:
        raise DomainError(f"t must be > 0, got {t}")
    J = check_count(J, "J")
    theta = 1.0 - 1.0 / J
    a = math.acosh(1.0 / ((1.0 - theta) * math.sin(sigma)))
    h = a / J
    mu = 2.0 * math.pi * d * J * (1.0 - theta) / (t * a)
    s = h * np.arange(0, J + 1)
    arg = sigma + 1j * s
    z = mu * (1.0 - np.sin(arg))
    # -h/(2 pi i) phi'(s) with phi' = -i mu cos(sigma + i s)
    w = h * mu * np.cos(arg) / (2.0 * math.pi)
    coef = w * np.exp(t * z) * z ** (alpha - 1.0)
    za = z**alpha
    scalar = np.isscalar(A) or (isinstance(A, np.ndarray) and A.ndim == 0)
    if scalar:
        terms = coef / (za + float(A))
        total = terms[0].real + 2.0 * float(np.sum(terms[1:].real))
        return total * (np.asarray(u0, dtype=float) if np.ndim(u0) else float(u0))
    u0 = np.asarray(u0, dtype=float)
    total = (coef[0] * A.solve(za[0], u0)).real
    for c, zz in zip(coef[1:], za[1:]):
        total = total + 2.0 * (c * A.solve(zz, u0.astype(complex))).real
    return total


def solve_nonsmooth(cfg: SubdiffusionConfig, info: Optional[dict] = None) -> np.ndarray:
    """``u_n = E(t_n) u0 + [K(d_t) f]_n`` with ``E`` by Laplace inversion."""
    u0 = cfg.u0_nodal()
    zero = np.zeros_like(u0)
    conv = _march(cfg, zero, info)
    if not np.any(u0):
        return conv
    op = cfg.system.op
    hom = np.stack(
        [laplace_invert_E(cfg.alpha, op, u0, t, cfg.J, cfg.sigma, cfg.d) for t in cfg.mesh.points]
    )
    return conv + hom


def solve(cfg: SubdiffusionConfig, info: Optional[dict] = None) -> np.ndarray:
    return solve_smooth(cfg, info) if cfg.path == "smooth" else solve_nonsmooth(cfg, info)


def l2_error(fem: FemSystem, numeric, exact, method: str = "nodal") -> float:
    """L2 norm of ``numeric - exact`` on the FE space.

    ``nodal`` compares against the nodal interpolant in the mass norm;
    ``quadrature`` integrates ``(u_h - u)^2`` elementwise with 5-point Gauss.
    ``exact`` is a function of ``x`` or a nodal vector.
    """
    numeric = np.asarray(numeric, dtype=float)
    if method == "nodal":
        ex = exact(fem.x) if callable(exact) else np.asarray(exact, dtype=float)
        e = numeric - ex
        if e.shape != (fem.size,):
            raise ValueError(f"expected {fem.size} nodal values, got {e.shape}")
        return math.sqrt(max(float(e @ fem.op.mass(e)), 0.0))
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")
    if not callable(exact):
        raise ValueError("quadrature norm needs exact as a function")
    g, gw = np.polynomial.legendre.leggauss(5)
    nodes = np.concatenate([[-1.0], fem.x, [1.0]])
    vals = np.concatenate([[0.0], numeric, [0.0]])
    left, right = nodes[:-1], nodes[1:]
    half = 0.5 * (right - left)
    xq = (0.5 * (left + right))[:, None] + half[:, None] * g[None, :]
    lam = (g[None, :] + 1.0) / 2.0
    uh = vals[:-1, None] * (1 - lam) + vals[1:, None] * lam
    err = (uh - exact(xq)) ** 2
    return math.sqrt(float(np.sum(half[:, None] * gw[None, :] * err)))
