import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import cart_simple_pendulum, free_particle
from vmbd.cases import random_states
from vmbd.errors import NonFiniteEvaluation, SingularMass
from vmbd.model import (
    BodyKinematics,
    CoordinateLayout,
    MultibodySystem,
    derive_mass_decomposition,
    generalized_forces,
    kinematic_constraint_eval,
    kinetic_energy,
    linear_momentum,
)

finite = st.floats(-3.0, 3.0, allow_nan=False)


def _fit_quadratic_form(T, m):
    """Recover (M, N, T0) of a quadratic ``T(qdot)`` by least squares on a grid.

    Independent of the package's assembly: it only ever calls ``T``.
    """
    rng = np.random.default_rng(1)
    rows, vals = [], []
    iu = np.triu_indices(m)
    for _ in range(40):
        v = rng.normal(size=m)
        quad = np.outer(v, v)
        quad = np.where(np.eye(m, dtype=bool), 0.5 * quad, quad)
        rows.append(np.concatenate((quad[iu], v, [1.0])))
        vals.append(T(v))
    coef, *_ = np.linalg.lstsq(np.array(rows), np.array(vals), rcond=None)
    M = np.zeros((m, m))
    M[iu] = coef[: len(iu[0])]
    M = M + M.T - np.diag(np.diag(M))
    return M, coef[len(iu[0]) : len(iu[0]) + m], coef[-1]


class TestLayout:
    def test_counts(self):
        lay = CoordinateLayout(("a", "b", "c", "d"), s=1, r=2)
        assert (lay.m, lay.p) == (4, 2)
        assert lay.ignorable_names == ("d",)

    @pytest.mark.parametrize("s, r", [(4, 0), (2, 2), (0, 5), (-1, 0)])
    def test_rejects_inconsistent_counts(self, s, r):
        with pytest.raises(ValueError):
            CoordinateLayout(("a", "b", "c"), s=s, r=r)


class TestMassDecomposition:
    def test_free_particle(self):
        M, N, T0 = derive_mass_decomposition(free_particle(2.0), 0.0, np.zeros(2))
        np.testing.assert_array_equal(M, np.diag([2.0, 2.0]))
        assert np.all(N == 0.0) and T0 == 0.0

    def test_cart_pendulum_matches_fitted_oracle(self):
        sys = cart_simple_pendulum()
        q = np.array([0.0, 0.0])
        oracle_M, oracle_N, oracle_T0 = _fit_quadratic_form(lambda v: kinetic_energy(sys, 0.0, q, v), 2)
        np.testing.assert_allclose(oracle_M, [[1.5, 0.1], [0.1, 0.02]], atol=1e-12)
        M, N, T0 = derive_mass_decomposition(sys, 0.0, q)
        np.testing.assert_allclose(M, [[1.5, 0.1], [0.1, 0.02]], atol=1e-15)
        np.testing.assert_allclose(N, oracle_N, atol=1e-12)
        assert abs(T0 - oracle_T0) < 1e-12

    def test_cart_case_initial_state(self, cart):
        M, N, T0 = derive_mass_decomposition(cart.system, 0.0, cart.q0)
        qd = cart.qdot0
        quad = 0.5 * qd @ M @ qd + qd @ N + T0
        assert abs(quad - kinetic_energy(cart.system, 0.0, cart.q0, qd)) <= 1e-12 * abs(quad)

    def test_symmetric(self, any_case):
        for t, q, _ in random_states(any_case, 10):
            M, _, _ = derive_mass_decomposition(any_case.system, t, q)
            assert np.array_equal(M, M.T)

    def test_quadratic_form_identity(self, any_case):
        for t, q, qd in random_states(any_case, 100, seed=3):
            M, N, T0 = derive_mass_decomposition(any_case.system, t, q)
            direct = kinetic_energy(any_case.system, t, q, qd)
            assert abs(0.5 * qd @ M @ qd + qd @ N + T0 - direct) <= 1e-12 * max(1.0, abs(direct))

    def test_ignorable_independence(self, any_case):
        sys = any_case.system
        sl = sys.layout.ignorable
        for t, q, _ in random_states(any_case, 5, seed=4):
            M, N, T0 = derive_mass_decomposition(sys, t, q)
            q2 = q.copy()
            q2[sl] += 17.3
            M2, N2, T02 = derive_mass_decomposition(sys, t, q2)
            np.testing.assert_allclose(M2, M, atol=1e-10)
            np.testing.assert_allclose(N2, N, atol=1e-10)
            assert abs(T02 - T0) <= 1e-10

    def test_singular_mass_detected(self):
        # A single point mass cannot give a planar 2-coordinate model a PD mass matrix
        # if both coordinates move it along the same line.
        def lin(t, q):
            return np.array([[1.0, 1.0], [0.0, 0.0], [0.0, 0.0]])

        sys = MultibodySystem(CoordinateLayout(("a", "b")), (BodyKinematics(1.0, np.zeros((3, 3)), lin),))
        with pytest.raises(SingularMass):
            derive_mass_decomposition(sys, 0.0, np.zeros(2))

    def test_nonfinite_provider(self):
        def lin(t, q):
            return np.array([[np.nan, 0.0], [0.0, 1.0], [0.0, 0.0]])

        sys = MultibodySystem(CoordinateLayout(("a", "b")), (BodyKinematics(1.0, np.zeros((3, 3)), lin),))
        with pytest.raises(NonFiniteEvaluation):
            derive_mass_decomposition(sys, 0.0, np.zeros(2))


@settings(max_examples=50, deadline=None)
@given(st.tuples(finite, finite), st.tuples(finite, finite))
def test_quadratic_form_identity_property(q, qd):
    sys = cart_simple_pendulum()
    q, qd = np.array(q), np.array(qd)
    M, N, T0 = derive_mass_decomposition(sys, 0.0, q)
    direct = kinetic_energy(sys, 0.0, q, qd)
    assert abs(0.5 * qd @ M @ qd + qd @ N + T0 - direct) <= 1e-12 * max(1.0, direct)


class TestBodyValidation:
    def test_nonpositive_mass(self):
        with pytest.raises(ValueError):
            BodyKinematics(0.0, np.eye(3), lambda t, q: np.zeros((3, 1)))

    def test_asymmetric_inertia(self):
        with pytest.raises(ValueError):
            BodyKinematics(1.0, [[1, 0.5, 0], [0, 1, 0], [0, 0, 1]], lambda t, q: np.zeros((3, 1)))

    def test_indefinite_inertia(self):
        with pytest.raises(ValueError):
            BodyKinematics(1.0, np.diag([1.0, -1.0, 1.0]), lambda t, q: np.zeros((3, 1)))


class TestForces:
    def test_zero_forces(self):
        sys = free_particle()
        assert np.all(generalized_forces(sys, 0.0, np.array([1.0, 2.0]), np.array([3.0, 4.0])) == 0.0)

    def test_potential_gradient_enters_with_minus_sign(self):
        sys = free_particle(potential=lambda t, q: 0.5 * 3.0 * q[0] ** 2)
        Q = generalized_forces(sys, 0.0, np.array([2.0, 0.0]), np.zeros(2))
        np.testing.assert_allclose(Q, [-6.0, 0.0], atol=1e-9)

    def test_cart_torque(self):
        from vmbd.cases import build_cart_pendulum

        case = build_cart_pendulum(tau=0.25)
        Q = generalized_forces(case.system, 0.0, case.q0, case.qdot0) + case.system.forces.potential_grad(0.0, case.q0)
        np.testing.assert_allclose(Q, [0.25, -0.25, 0.0], atol=1e-15)

    def test_boom_force_at_zero(self, satellite):
        Q = generalized_forces(satellite.system, 0.0, satellite.q0, satellite.qdot0)
        assert abs(Q[3] - 0.012) < 1e-15
        assert np.all(np.delete(Q, 3) == 0.0)


class TestKinematicConstraint:
    def test_cart_row_at_initial_configuration(self, cart):
        from vmbd.model import constraint_matrices

        a, b = constraint_matrices(cart.system, 0.0, cart.q0)
        np.testing.assert_allclose(a, [[0.2, 0.2, 0.0]], atol=1e-15)
        assert np.all(b == 0.0)

    def test_cart_initial_residual(self, cart):
        assert kinematic_constraint_eval(cart.system, 0.0, cart.q0, cart.qdot0) == pytest.approx([0.0], abs=1e-16)

    def test_null_space_velocity(self, cart):
        from vmbd.model import constraint_matrices

        a, _ = constraint_matrices(cart.system, 0.0, np.array([0.3, 1.1, 0.0]))
        null = np.linalg.svd(a)[2][-1]
        assert abs(kinematic_constraint_eval(cart.system, 0.0, np.array([0.3, 1.1, 0.0]), null)[0]) < 1e-15

    def test_unconstrained_is_empty(self, tribody):
        assert kinematic_constraint_eval(tribody.system, 0.0, tribody.q0, tribody.qdot0).shape == (0,)


def test_linear_momentum_of_free_particle():
    sys = free_particle(2.0)
    np.testing.assert_allclose(linear_momentum(sys, 0.0, np.zeros(2), np.array([3.0, -1.0])), [6.0, -2.0, 0.0])
