import numpy as np
import pytest

from vmbd.errors import NonFiniteEvaluation
from vmbd.numdiff import DYNAMICS_STEP, gradient, matrix_function_partials, total_derivative


def test_constant_matrix_has_zero_partials():
    A = np.array([[1.0, 2.0], [3.0, 4.0]])
    dt, dq = matrix_function_partials(lambda t, q: A, 0.3, np.array([1.0, -2.0]))
    assert np.all(dt == 0.0)
    assert all(np.all(d == 0.0) for d in dq)


def test_polynomial_partial():
    _, dq = matrix_function_partials(lambda t, q: np.array([[q[0] ** 2]]), 0.0, np.array([3.0]))
    assert abs(dq[0][0, 0] - 6.0) < 1e-9


def test_time_partial():
    dt, _ = matrix_function_partials(lambda t, q: np.array([[np.sin(t)]]), 0.0, np.array([0.0]))
    assert abs(dt[0, 0] - 1.0) < 1e-9


def test_richardson_order():
    # Halving h must shrink the error by at least 4x (order >= 2); the
    # extrapolated scheme is 4th order so 16x is expected.
    def f(t, q):
        return np.array([np.exp(np.sin(q[0])) * q[1]])

    q = np.array([0.7, 1.3])
    exact = np.cos(0.7) * np.exp(np.sin(0.7)) * 1.3
    errs = [abs(matrix_function_partials(f, 0.0, q, step=h)[1][0][0] - exact) for h in (0.2, 0.1, 0.05)]
    assert errs[0] / errs[1] > 4.0 and errs[1] / errs[2] > 4.0
    assert np.log2(errs[1] / errs[2]) > 3.5


def test_gradient_of_scalar():
    g = gradient(lambda t, q: q[0] ** 2 * np.cos(q[1]), 0.0, np.array([1.5, 0.4]))
    np.testing.assert_allclose(g, [3.0 * np.cos(0.4), -2.25 * np.sin(0.4)], rtol=1e-10)


def test_gradient_absolute_step_for_large_angles():
    q = np.array([800.0])
    g = gradient(lambda t, q: np.sin(q[0]), 0.0, q, step=DYNAMICS_STEP, relative=False)
    assert abs(g[0] - np.cos(800.0)) < 1e-9


def test_total_derivative_matches_chain_rule():
    def f(t, q):
        return np.array([[np.sin(q[0]) * t, q[1] ** 3], [np.exp(q[0] * q[1]), t**2]])

    t, q, qd = 0.8, np.array([0.3, -0.6]), np.array([1.7, 0.4])
    dt, dq = matrix_function_partials(f, t, q)
    chain = dt + dq[0] * qd[0] + dq[1] * qd[1]
    np.testing.assert_allclose(total_derivative(f, t, q, qd), chain, atol=1e-9)


def test_nonfinite_probe_raises():
    with pytest.raises(NonFiniteEvaluation):
        matrix_function_partials(lambda t, q: np.array([1.0 / (q[0] - 1.0 - 1e-9)]) * np.inf, 0.0, np.array([1.0]))


def test_extra_extrapolation_level_raises_order():
    def f(t, q):
        return np.array([np.exp(np.sin(q[0]))])

    exact = np.cos(0.7) * np.exp(np.sin(0.7))
    steps = np.array([0.4, 0.2, 0.1])
    errs = [abs(gradient(f, 0.0, [0.7], step=h, relative=False, levels=2)[0] - exact) for h in steps]
    assert np.polyfit(np.log(steps), np.log(errs), 1)[0] > 5.5
