import math

import mpmath
import numpy as np
import pytest

from gcq.kernels import frac_derivative_history_kernel, frac_integral_kernel, power_kernel
from gcq.meshgen import graded_mesh, mesh_from_points, uniform_mesh
from gcq.reference import (
    apply_direct,
    composition_check,
    divided_differences,
    weights_dd,
    weights_real_quadrature,
)

# z^-0.5 at nodes (1, 2, 4), by the recursion in 50-digit arithmetic.
DD_124 = 0.063113276073392904466


def test_divided_difference_examples():
    assert divided_differences(lambda z: z**-0.5, [2.0]) == pytest.approx(2**-0.5, rel=1e-15)
    assert divided_differences(lambda z: z**2, [1.0, 3.0]) == pytest.approx(4.0, rel=1e-15)
    assert divided_differences(lambda z: mpmath.power(z, -0.5), [1.0, 2.0, 4.0]) == pytest.approx(DD_124, rel=1e-14)


def test_divided_difference_confluent():
    # repeated node with Taylor data gives the derivative
    k = power_kernel(-0.5)
    val = divided_differences(k.K, [2.0, 2.0], taylor=k.taylor)
    assert val == pytest.approx(-0.5 * 2**-1.5, rel=1e-14)


def test_weights_dd_examples():
    a = 0.4
    m = graded_mesh(1, 12, 2.5)
    W = weights_dd(frac_integral_kernel(a), m)
    assert W.values[0, 0] == pytest.approx(m.steps[0] ** a, rel=1e-14)
    np.testing.assert_allclose(W.diagonal(), m.steps**a, rtol=1e-14)
    Wd = weights_dd(frac_derivative_history_kernel(a), m)
    np.testing.assert_allclose(Wd.diagonal(), m.steps ** (1 - a), rtol=1e-14)
    assert np.all(np.triu(W.values, 1) == 0)
    assert np.all(W.values[np.tril_indices(12)] > 0)


def test_uniform_toeplitz():
    W = weights_dd(frac_integral_kernel(0.5), uniform_mesh(1, 8)).values
    for n in range(8):
        for j in range(n + 1):
            assert W[n, j] == pytest.approx(W[n - j, 0], rel=1e-13)
    assert weights_dd(frac_integral_kernel(0.5), uniform_mesh(1, 8)).diagnostics["confluent"]


def test_real_quadrature_examples():
    a = 0.3
    m = graded_mesh(1, 8, 2)
    Wq = weights_real_quadrature(frac_integral_kernel(a), m)
    assert Wq.values[0, 0] == pytest.approx(m.steps[0] ** a, rel=1e-10)
    assert np.all(Wq.values[np.tril_indices(8)] > 0)


def test_oracle_equivalence_alpha06():
    m = graded_mesh(1, 16, 2)
    k = frac_integral_kernel(0.6)
    gap = np.max(np.abs(weights_dd(k, m).values - weights_real_quadrature(k, m, 1e-10).values))
    assert gap <= 1e-9


def test_apply_direct_examples():
    a = 0.5
    W = weights_dd(frac_integral_kernel(a), graded_mesh(1, 16, 2))
    np.testing.assert_array_equal(apply_direct(W, np.zeros(16)), np.zeros(16))
    m1 = uniform_mesh(0.3, 1)
    W1 = weights_dd(frac_integral_kernel(a), m1)
    assert apply_direct(W1, [2.0])[0] == pytest.approx(0.3**a * 2.0, rel=1e-14)
    with pytest.raises(ValueError):
        apply_direct(W, np.ones(5))


def test_apply_direct_rate():
    a, b = 0.5, 0.5
    errs = []
    for N in (32, 64, 128):
        m = graded_mesh(1, N, 2)
        c = apply_direct(weights_dd(frac_integral_kernel(a), m), m.points**b)
        exact = math.gamma(1.5) / math.gamma(2) * m.points
        errs.append(np.max(np.abs(c - exact)))
    rates = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert errs[0] > errs[1] > errs[2]
    assert abs(rates[-1] - 1) < 0.15


def test_constant_data_rate():
    # f = 1: c_n -> t_n^a / Gamma(a+1) at order min(1, gamma a)
    a, g = 0.4, 1.5
    errs = []
    Ns = (64, 128, 256)
    for N in Ns:
        m = graded_mesh(1, N, g)
        c = apply_direct(weights_dd(frac_integral_kernel(a), m), np.ones(N))
        errs.append(np.max(np.abs(c - m.points**a / math.gamma(a + 1))))
    rate = math.log2(errs[-2] / errs[-1])
    assert abs(rate - min(1, g * a)) < 0.1


def test_composition_examples():
    assert composition_check(0.5, graded_mesh(1, 16, 2)) < 1e-10
    assert composition_check(0.25, uniform_mesh(1, 32)) < 1e-10
    assert composition_check(0.5, uniform_mesh(1, 1)) == 0.0


def test_weight_table_csv(tmp_path):
    W = weights_dd(frac_integral_kernel(0.5), uniform_mesh(1, 3))
    W.to_csv(tmp_path / "w.csv")
    lines = (tmp_path / "w.csv").read_text().splitlines()
    assert lines[0] == "n,j,value"
    assert len(lines) == 1 + 6


def test_close_steps_separated():
    # two equal steps that are not adjacent exercise the tie handling
    m = mesh_from_points(np.cumsum([0.1, 0.2, 0.1, 0.3, 0.1]))
    k = frac_integral_kernel(0.5)
    gap = np.max(np.abs(weights_dd(k, m).values - weights_real_quadrature(k, m, 1e-11).values))
    assert gap < 1e-9
