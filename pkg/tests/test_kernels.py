import math

import mpmath
import numpy as np
import pytest
from scipy import integrate

from gcq import DomainError
from gcq.kernels import (
    DenseOperator,
    PencilOperator,
    frac_derivative_history_kernel,
    frac_integral_kernel,
    power_kernel,
    resolvent_density,
)

# k(1) for K(z) = 1/(sqrt(z) + 1): Talbot and de Hoog inversion in mpmath agree to 20 digits.
K_RESOLVENT_1 = 0.13660600739194928254


def _laplace_of_density(G, t):
    # tanh-sinh quadrature handles the x**mu endpoint singularity
    f = lambda x: mpmath.mpf(float(G(float(x)))) * mpmath.exp(-x * t) if x > 0 else mpmath.mpf(0)
    with mpmath.workdps(30):
        return float(mpmath.quad(f, [0, 1 / t, 10 / t, mpmath.inf]))


def test_frac_integral_examples():
    k = frac_integral_kernel(0.5)
    assert k.mu == -0.5
    assert float(k.G(1.0)) == pytest.approx(1 / math.pi, rel=1e-15)
    assert _laplace_of_density(k.G, 1.0) == pytest.approx(1 / math.gamma(0.5), rel=1e-11)
    for a in (0.1, 0.5, 0.9):
        assert frac_integral_kernel(a).K(1.0) == 1.0
    for bad in (0, 1, -0.5, 1.5):
        with pytest.raises(DomainError):
            frac_integral_kernel(bad)


def test_frac_derivative_history_examples():
    assert frac_derivative_history_kernel(0.5) == frac_integral_kernel(0.5)
    k = frac_derivative_history_kernel(0.3)
    assert float(k.G(2.0)) == pytest.approx(math.sin(0.7 * math.pi) / math.pi * 2**-0.7, rel=1e-15)
    assert frac_derivative_history_kernel(0.5).K(4.0) == pytest.approx(0.5, rel=1e-15)
    with pytest.raises(DomainError):
        frac_derivative_history_kernel(1.0)


def test_kernel_inputs():
    k = frac_integral_kernel(0.4)
    z = np.array([1.0, 2.0, 3.0 + 1j])
    np.testing.assert_allclose(k.K(z), z**-0.4)
    assert abs(k.K(mpmath.mpf(2)) - mpmath.mpf(2) ** -0.4) < 1e-30
    assert power_kernel(0.5).G is None
    with pytest.raises(ValueError):
        power_kernel(0.5).k(1.0)


@pytest.mark.parametrize("alpha", [0.2, 0.5, 0.8])
@pytest.mark.parametrize("t", [0.1, 1.0, 5.0])
def test_realline_laplace_identity(alpha, t):
    k = frac_integral_kernel(alpha)
    exact = t ** (alpha - 1) / math.gamma(alpha)
    c, mu = k.density_scale, k.mu
    assert float(k.G(0.3)) == pytest.approx(c * 0.3**mu, rel=1e-15)
    # x = u**p with p = 1/(1+mu) removes the endpoint singularity
    p = 1.0 / (1.0 + mu)
    val, _ = integrate.quad(lambda u: c * p * math.exp(-(u**p) * t), 0, math.inf, epsabs=0, epsrel=1e-13)
    assert val == pytest.approx(exact, rel=1e-10)
    assert float(k.k(t)) == pytest.approx(exact, rel=1e-14)


def test_resolvent_density_scalar():
    assert resolvent_density(0.5, 1.0, 1.0) == pytest.approx(1 / (2 * math.pi), rel=1e-14)
    G = lambda x: resolvent_density(0.5, 1.0, x)
    assert _laplace_of_density(G, 1.0) == pytest.approx(K_RESOLVENT_1, rel=1e-9)


def _random_spd(rng, n=5):
    B = rng.standard_normal((n, n))
    return B @ B.T + n * np.eye(n)


def test_resolvent_density_matrix():
    rng = np.random.default_rng(4)
    A = _random_spd(rng)
    op = DenseOperator(A)
    alpha = 0.6
    for x in (1e-3, 0.4, 7.0):
        Gm = resolvent_density(alpha, op, x)
        np.testing.assert_allclose(Gm, Gm.T, atol=1e-13 * np.abs(Gm).max())
        for _ in range(10):
            v = rng.standard_normal(5)
            assert v @ Gm @ v >= -1e-12
    # imaginary part of the complex product is negligible
    xa = 0.4**alpha
    zm = xa * np.exp(-1j * np.pi * alpha)
    full = np.linalg.solve(zm * np.eye(5) + A, np.linalg.solve(np.conj(zm) * np.eye(5) + A, np.eye(5)))
    assert np.linalg.norm(full.imag) < 1e-13


def test_resolvent_density_bound():
    rng = np.random.default_rng(1)
    op = DenseOperator(_random_spd(rng))
    alpha = 0.5
    vals = [np.linalg.norm(resolvent_density(alpha, op, x), 2) * x**alpha for x in np.geomspace(1e-4, 1e4, 41)]
    # |z^a e^{±i pi a} + A|^{-1} <= 1/(|z|^a sin(pi a)) for SPD A
    bound = math.sin(math.pi * alpha) / math.pi / math.sin(math.pi * alpha) ** 2
    assert max(vals) <= bound * (1 + 1e-10)


def test_dense_operator_solve_apply():
    rng = np.random.default_rng(2)
    op = DenseOperator(_random_spd(rng, 6))
    rhs = rng.standard_normal(6)
    for c in (0.5, 3.0 + 2.0j):
        x = op.solve(c, rhs.astype(complex))
        back = c * x + op.apply(x)
        assert np.linalg.norm(back - rhs) <= 1e-12 * np.linalg.norm(rhs)
    with pytest.raises(ValueError):
        DenseOperator(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_pencil_operator_solve_apply():
    n = 7
    dx = 2 / (n + 1)
    op = PencilOperator(np.full(n - 1, dx / 6), np.full(n, 4 * dx / 6), np.full(n - 1, -1 / dx), np.full(n, 2 / dx))
    rng = np.random.default_rng(3)
    rhs = rng.standard_normal(n)
    for c in (0.7, 1.0 - 2.0j):
        x = op.solve(c, rhs.astype(complex))
        back = c * x + op.apply(x)
        assert np.linalg.norm(back - rhs) <= 1e-12 * np.linalg.norm(rhs)
    A = op.to_dense()
    x = rng.standard_normal(n)
    np.testing.assert_allclose(op.apply(x), A @ x, rtol=1e-12, atol=1e-12)
