"""Sectorial convolution kernels and the SPD operators they act on.

A scalar power kernel has Laplace transform ``K(z) = z**mu``.  For
``-1 < mu < 0`` its convolution kernel is completely monotone and

    k(t) = t**(-mu-1) / Gamma(-mu) = int_0^inf G(x) exp(-x t) dx,
    G(x) = sin(-pi mu) / pi * x**mu.

Positive ``mu`` (a fractional derivative) has no such density; ``G`` is
then ``None`` and only the divided-difference route applies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import mpmath
import numpy as np
from scipy.linalg import solve_banded

from ._validation import check_order

__all__ = [
    "KernelSpec",
    "power_kernel",
    "frac_integral_kernel",
    "frac_derivative_history_kernel",
    "resolvent_density",
    "DenseOperator",
    "PencilOperator",
]


@dataclass(frozen=True)
class KernelSpec:
    """Scalar kernel ``K(z) = z**mu`` with its real-line density.

    ``K`` accepts floats, complex numbers, numpy arrays and mpmath numbers.
    """

    mu: float
    name: str

    @property
    def has_density(self) -> bool:
        return -1.0 < self.mu < 0.0

    def K(self, z):
        if isinstance(z, (mpmath.mpf, mpmath.mpc)):
            return mpmath.power(z, self.mu)
        return np.asarray(z) ** self.mu if isinstance(z, np.ndarray) else z**self.mu

    @property
    def G(self) -> Optional[Callable]:
        if not self.has_density:
            return None
        c = math.sin(-math.pi * self.mu) / math.pi
        mu = self.mu
        return lambda x: c * np.asarray(x, dtype=float) ** mu

    @property
    def density_scale(self) -> float:
        """The constant ``sin(-pi mu)/pi`` in front of ``x**mu``."""
        return math.sin(-math.pi * self.mu) / math.pi

    def taylor(self, c, m: int):
        """``K^{(m)}(c) / m!`` in mpmath arithmetic."""
        return mpmath.binomial(self.mu, m) * mpmath.power(c, self.mu - m)

    def k(self, t):
        """Convolution kernel ``t**(-mu-1)/Gamma(-mu)`` (density case only)."""
        if not self.has_density:
            raise ValueError(f"kernel {self.name} has no locally integrable k(t)")
        return np.asarray(t, dtype=float) ** (-self.mu - 1.0) / math.gamma(-self.mu)


def power_kernel(mu: float, name: str | None = None) -> KernelSpec:
    mu = float(mu)
    if not math.isfinite(mu):
        raise ValueError("mu must be finite")
    return KernelSpec(mu, name or f"z^{mu:g}")


def frac_integral_kernel(alpha: float) -> KernelSpec:
    """Fractional integral of order ``alpha``: ``K(z) = z**-alpha``."""
    alpha = check_order(alpha)
    return KernelSpec(-alpha, f"fracint({alpha:g})")


def frac_derivative_history_kernel(alpha: float) -> KernelSpec:
    """``K(z) = z**(alpha-1)``, applied to first differences in the Caputo scheme."""
    alpha = check_order(alpha)
    return KernelSpec(alpha - 1.0, f"fracint({1.0 - alpha:g})")


# ----------------------------------------------------------------------------
# operators


class DenseOperator:
    """SPD matrix ``A`` held densely; shifted solves by LU of ``cI + A``."""

    def __init__(self, A):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"operator must be square, got {A.shape}")
        if not np.allclose(A, A.T, rtol=1e-13, atol=0.0):
            raise ValueError("operator must be symmetric")
        self.A = A
        self.size = A.shape[0]

    def apply(self, v):
        return self.A @ v

    def solve(self, c, rhs):
        return np.linalg.solve(c * np.eye(self.size) + self.A, rhs)

    def to_dense(self):
        return self.A.copy()


class PencilOperator:
    """``A = M^{-1} S`` for symmetric tridiagonal ``M`` and ``S``.

    Bands are stored as ``(sub/super, diag)`` pairs.  ``A`` is self-adjoint in
    the ``M`` inner product; ``solve(c, b)`` returns ``(cM + S)^{-1} M b``.
    """

    def __init__(self, m_off, m_diag, s_off, s_diag):
        self.m_off = np.asarray(m_off, dtype=float)
        self.m_diag = np.asarray(m_diag, dtype=float)
        self.s_off = np.asarray(s_off, dtype=float)
        self.s_diag = np.asarray(s_diag, dtype=float)
        self.size = len(self.m_diag)

    @staticmethod
    def _matvec(off, diag, v):
        out = diag[:, None] * v if v.ndim == 2 else diag * v
        if len(off):
            if v.ndim == 2:
                out[:-1] += off[:, None] * v[1:]
                out[1:] += off[:, None] * v[:-1]
            else:
                out[:-1] += off * v[1:]
                out[1:] += off * v[:-1]
        return out

    def mass(self, v):
        return self._matvec(self.m_off, self.m_diag, np.asarray(v))

    def stiff(self, v):
        return self._matvec(self.s_off, self.s_diag, np.asarray(v))

    def _bands(self, cm, cs):
        n = self.size
        ab = np.zeros((3, n), dtype=np.result_type(cm, cs, float))
        ab[1] = cm * self.m_diag + cs * self.s_diag
        ab[0, 1:] = cm * self.m_off + cs * self.s_off
        ab[2, :-1] = cm * self.m_off + cs * self.s_off
        return ab

    def solve_pencil(self, cm, cs, rhs):
        """Solve ``(cm M + cs S) x = rhs`` directly (no mass multiplication)."""
        rhs = np.asarray(rhs)
        ab = self._bands(cm, cs)
        if np.iscomplexobj(rhs) != np.iscomplexobj(ab):
            ab, rhs = ab.astype(complex), rhs.astype(complex)
        return solve_banded((1, 1), ab, rhs)

    def apply(self, v):
        return self.solve_pencil(1.0, 0.0, self.stiff(v))

    def solve(self, c, rhs):
        return self.solve_pencil(c, 1.0, self.mass(rhs))

    def to_dense(self):
        n = self.size
        M = np.diag(self.m_diag) + np.diag(self.m_off, 1) + np.diag(self.m_off, -1)
        S = np.diag(self.s_diag) + np.diag(self.s_off, 1) + np.diag(self.s_off, -1)
        return np.linalg.solve(M, S).reshape(n, n)


def resolvent_density(alpha: float, A, x: float):
    """Real density of the subdiffusion resolvent ``(z**alpha + A)^{-1}``.

    Returns ``sin(pi a)/pi * x**a * (x**a e^{-i pi a} + A)^{-1}(x**a e^{i pi a} + A)^{-1}``;
    a scalar when ``A`` is a number, a matrix otherwise.
    """
    alpha = check_order(alpha)
    x = float(x)
    if not x > 0:
        raise ValueError(f"x must be > 0, got {x}")
    xa = x**alpha
    pref = math.sin(math.pi * alpha) / math.pi * xa
    zm = xa * complex(math.cos(math.pi * alpha), -math.sin(math.pi * alpha))
    if np.isscalar(A):
        a = float(A)
        return pref * ((1.0 / (zm + a)) * (1.0 / (zm.conjugate() + a))).real
    op = A if hasattr(A, "solve") else DenseOperator(A)
    n = op.size
    eye = np.eye(n)
    inner = op.solve(zm.conjugate(), eye.astype(complex))
    outer = op.solve(zm, inner)
    out = pref * outer
    assert np.all(np.isfinite(out)), "singular shifted solve"
    return out.real
