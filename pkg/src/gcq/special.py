"""Special functions needed by the quadratures and the test oracles.

Elliptic functions take the *modulus* ``k`` (not the parameter ``m = k**2``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy import special as sp
from scipy.linalg import eigh_tridiagonal

from ._validation import ConvergenceError, DomainError, check_count, check_order

__all__ = [
    "GaussRule",
    "gamma_fn",
    "mittag_leffler",
    "complete_elliptic_K",
    "jacobi_sn",
    "jacobi_sn_cn_dn",
    "gauss_legendre",
    "gauss_jacobi_left",
]


def gamma_fn(x: float) -> float:
    x = float(x)
    if x <= 0 and x == math.floor(x):
        raise DomainError(f"Gamma has a pole at {x}")
    return math.gamma(x)


# Largest term magnitude the plain double series tolerates before cancellation
# would eat more than ~3 digits of the 1e-12 absolute target.
_PEAK_DOUBLE = 1e3
_MAX_TERMS = 200_000


def _log_term(a, b, log_abs_z, k):
    """log|z^k / Gamma(a k + b)|, or -inf when 1/Gamma vanishes."""
    arg = a * k + b
    if arg <= 0 and arg == math.floor(arg):
        return -math.inf
    return k * log_abs_z - math.lgamma(arg)


def mittag_leffler(a: float, b: float, z: float) -> float:
    """Two-parameter Mittag-Leffler function ``sum_k z**k / Gamma(a k + b)``.

    Summed in double precision when the terms stay moderate, otherwise in
    extended precision sized from the largest term.
    """
    a, b, z = float(a), float(b), float(z)
    if not a > 0:
        raise DomainError(f"order a must be > 0, got {a}")
    if z == 0.0:
        return float(sp.rgamma(b))
    log_abs_z = math.log(abs(z))
    cutoff = math.log(1e-18)

    # locate the number of terms and the peak magnitude
    peak = -math.inf
    k = 0
    prev = math.inf
    while True:
        lt = _log_term(a, b, log_abs_z, k)
        peak = max(peak, lt)
        # once Gamma(a k + b) is increasing, log-terms are concave in k
        if a * k + b > 2 and lt < cutoff and lt < prev:
            break
        prev = lt
        k += 1
        if k > _MAX_TERMS:
            raise ConvergenceError(
                f"E_{{{a},{b}}}({z}): series did not settle within {_MAX_TERMS} terms"
            )
    nterms = k + 1

    if peak <= math.log(_PEAK_DOUBLE):
        terms = []
        for j in range(nterms):
            arg = a * j + b
            if arg <= 0 and arg == math.floor(arg):
                continue
            sign = 1.0 if (z > 0 or j % 2 == 0) else -1.0
            terms.append(sign * math.exp(j * log_abs_z) * float(sp.rgamma(arg)))
        return math.fsum(terms)

    dps = int(peak / math.log(10)) + 25
    with mpmath.workdps(dps):
        zm = mpmath.mpf(z)
        am, bm = mpmath.mpf(a), mpmath.mpf(b)
        total = mpmath.fsum(zm**j * mpmath.rgamma(am * j + bm) for j in range(nterms))
        return float(total)


def complete_elliptic_K(k: float) -> float:
    """Complete elliptic integral of the first kind for modulus ``0 <= k < 1``."""
    k = float(k)
    if not 0.0 <= k < 1.0:
        raise DomainError(f"modulus must lie in [0, 1), got {k}")
    # 1 - k^2 formed as a product keeps accuracy for k near 1
    return float(sp.ellipkm1((1.0 - k) * (1.0 + k)))


def _real_sncndn(u: float, k: float):
    if k == 1.0:
        s = math.tanh(u)
        c = 1.0 / math.cosh(u)
        return s, c, c
    s, c, d, _ = sp.ellipj(u, k * k)
    return float(s), float(c), float(d)


def jacobi_sn_cn_dn(u, k: float):
    """Jacobi ``sn, cn, dn`` for real or complex ``u`` and modulus ``k``.

    Complex arguments use the addition theorem with the complementary
    modulus ``k' = sqrt(1 - k**2)`` for the imaginary part.
    """
    k = float(k)
    if not 0.0 <= k < 1.0:
        raise DomainError(f"modulus must lie in [0, 1), got {k}")
    if not isinstance(u, complex) and not np.iscomplexobj(u):
        return _real_sncndn(float(u), k)
    u = complex(u)
    s, c, d = _real_sncndn(u.real, k)
    if u.imag == 0.0:
        return complex(s), complex(c), complex(d)
    kp = math.sqrt((1.0 - k) * (1.0 + k))
    s1, c1, d1 = _real_sncndn(u.imag, kp)
    k2 = k * k
    den = c1 * c1 + k2 * s * s * s1 * s1
    sn = complex(s * d1, c * d * s1 * c1) / den
    cn = complex(c * c1, -s * d * s1 * d1) / den
    dn = complex(d * c1 * d1, -k2 * s * c * s1) / den
    return sn, cn, dn


def jacobi_sn(u, k: float):
    return jacobi_sn_cn_dn(u, k)[0]


@dataclass(frozen=True)
class GaussRule:
    nodes: np.ndarray
    weights: np.ndarray
    kind: str  # "legendre" on [-1, 1] or "jacobi" on [0, 1] with weight x**-alpha
    alpha: float = 0.0

    def __len__(self):
        return len(self.nodes)

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, f(self.nodes)))


def gauss_legendre(n: int) -> GaussRule:
    n = check_count(n, "n")
    x, w = np.polynomial.legendre.leggauss(n)
    return GaussRule(x, w, "legendre")


def gauss_jacobi_left(n: int, alpha: float) -> GaussRule:
    """Rule on [0, 1] for the weight ``x**(-alpha)``, exact to degree 2n-1.

    Golub-Welsch on the Jacobi matrix of the weight ``(1+s)**(-alpha)`` on
    ``[-1, 1]``, then mapped by ``x = (s + 1) / 2``.
    """
    n = check_count(n, "n")
    alpha = check_order(alpha)
    b = -alpha
    k = np.arange(n, dtype=float)
    s = 2.0 * k + b
    diag = b * b / (s * (s + 2.0))
    k1 = np.arange(1, n, dtype=float)
    s1 = 2.0 * k1 + b
    off = np.sqrt(4.0 * k1 * k1 * (k1 + b) ** 2 / (s1 * s1 * (s1 + 1.0) * (s1 - 1.0)))
    nodes, vecs = eigh_tridiagonal(diag, off)
    # total mass of x**-alpha on [0, 1]
    weights = vecs[0] ** 2 / (1.0 - alpha)
    return GaussRule(0.5 * (nodes + 1.0), weights, "jacobi", alpha)
