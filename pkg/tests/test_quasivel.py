import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import free_particle
from vmbd.cases import random_states
from vmbd.errors import SingularAugmentedMatrix
from vmbd.ignorable import build_dynamical_constraint
from vmbd.model import constraint_matrices, derive_mass_decomposition, kinematic_constraint_eval
from vmbd.quasivel import (
    QuasiVelocityDef,
    ReducedMap,
    build_reduced_map,
    quasi_velocities,
    reconstruct_qdot,
    solve_augmented,
)


def _dc(case):
    return build_dynamical_constraint(case.system, case.t0, case.q0, case.qdot0)


def _augmented(case, dc, t, q):
    sys = case.system
    Y, Z = case.qv_reduced.evaluate(t, q, sys.layout.m)
    M, N, _ = derive_mass_decomposition(sys, t, q)
    Mp, Np = dc.rows_from(M, N)
    a, b = constraint_matrices(sys, t, q)
    return np.vstack((Y, Mp, a)), np.concatenate((Z, Np, b)), Y.shape[0]


class TestReducedMap:
    def test_cart_block_identity(self, cart):
        dc = _dc(cart)
        rmap = build_reduced_map(cart.system, cart.qv_reduced, dc, 0.0, cart.q0)
        A, _, k = _augmented(cart, dc, 0.0, cart.q0)
        assert A.shape == (3, 3)
        np.testing.assert_allclose(A @ rmap.W, [[1.0], [0.0], [0.0]], atol=1e-12)

    def test_identities_on_random_states(self, any_case):
        dc = _dc(any_case)
        for t, q, _ in random_states(any_case, 20, seed=2):
            rmap = build_reduced_map(any_case.system, any_case.qv_reduced, dc, t, q)
            A, c, k = _augmented(any_case, dc, t, q)
            target = np.zeros((A.shape[0], k))
            target[:k] = np.eye(k)
            np.testing.assert_allclose(A @ rmap.W, target, atol=1e-10)
            np.testing.assert_allclose(A @ rmap.X, -c, atol=1e-10 * max(1.0, np.abs(c).max()))
            assert 1.0 <= rmap.condition_number < 1e12

    def test_identity_map(self):
        rmap = solve_augmented(np.eye(2), np.zeros(2), np.zeros((0, 2)), np.zeros(0), np.zeros((0, 2)), np.zeros(0))
        np.testing.assert_allclose(rmap.W, np.eye(2))
        np.testing.assert_allclose(rmap.X, np.zeros(2))

    def test_duplicate_constraint_row_is_singular(self, cart):
        bad = QuasiVelocityDef(lambda t, q: 2.0 * constraint_matrices(cart.system, t, q)[0])
        with pytest.raises(SingularAugmentedMatrix):
            build_reduced_map(cart.system, bad, _dc(cart), 0.0, cart.q0)

    def test_wrong_row_count(self, cart):
        with pytest.raises(SingularAugmentedMatrix):
            build_reduced_map(cart.system, cart.qv_full, _dc(cart), 0.0, cart.q0)

    def test_without_dynamical_rows_is_standard_map(self, cart):
        rmap = build_reduced_map(cart.system, cart.qv_full, None, 0.0, cart.q0)
        assert rmap.W.shape == (3, 2)
        Y, _ = cart.qv_full.evaluate(0.0, cart.q0, 3)
        a, _ = constraint_matrices(cart.system, 0.0, cart.q0)
        np.testing.assert_allclose(np.vstack((Y, a)) @ rmap.W, [[1, 0], [0, 1], [0, 0]], atol=1e-14)

    def test_unchecked_solve_matches(self, tribody):
        dc = _dc(tribody)
        t, q, _ = random_states(tribody, 1, seed=5)[0]
        A, c, k = _augmented(tribody, dc, t, q)
        Y, Z = A[:k], c[:k]
        s = dc.s
        checked = solve_augmented(Y, Z, A[k : k + s], c[k : k + s], A[k + s :], c[k + s :])
        fast = solve_augmented(Y, Z, A[k : k + s], c[k : k + s], A[k + s :], c[k + s :], check_condition=False)
        np.testing.assert_allclose(fast.W, checked.W, atol=1e-13)
        assert np.isnan(fast.condition_number)


class TestReconstruction:
    def test_identity(self):
        rmap = ReducedMap(np.eye(2), np.zeros(2), 1.0)
        np.testing.assert_allclose(reconstruct_qdot(rmap, [1.0, 2.0]), [1.0, 2.0])

    def test_cart_initial_state(self, cart):
        rmap = build_reduced_map(cart.system, cart.qv_reduced, _dc(cart), 0.0, cart.q0)
        u = quasi_velocities(cart.qv_reduced, cart.system, 0.0, cart.q0, cart.qdot0)
        assert u == pytest.approx([-2.0])
        np.testing.assert_allclose(reconstruct_qdot(rmap, u), [1.0, -1.0, 3.0], atol=1e-14)

    def test_free_particle_without_quasi_velocities(self):
        sys = free_particle(2.0)
        dc = build_dynamical_constraint(sys, 0.0, np.zeros(2), np.array([3.0, -1.0]))
        empty = QuasiVelocityDef(lambda t, q: np.zeros((0, 2)))
        rmap = build_reduced_map(sys, empty, dc, 0.0, np.zeros(2))
        assert rmap.W.shape == (2, 0)
        np.testing.assert_allclose(reconstruct_qdot(rmap, []), [3.0, -1.0], atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.lists(st.floats(-5, 5), min_size=5, max_size=5))
def test_round_trip_and_constraints(seed, u):
    from vmbd.cases import build_case

    case = build_case("tribody")
    dc = _dc(case)
    t, q, _ = random_states(case, 1, seed=seed)[0]
    u = np.array(u)
    rmap = build_reduced_map(case.system, case.qv_reduced, dc, t, q)
    qd = reconstruct_qdot(rmap, u)
    np.testing.assert_allclose(quasi_velocities(case.qv_reduced, case.system, t, q, qd), u, atol=1e-10)
    Mp, Np = dc.evaluate(t, q)
    assert np.abs(Mp @ qd + Np).max() <= 1e-12 * max(1.0, np.abs(Np).max())


def test_cart_reconstruction_satisfies_both_constraints(cart):
    dc = _dc(cart)
    rng = np.random.default_rng(0)
    for t, q, _ in random_states(cart, 20, seed=9):
        rmap = build_reduced_map(cart.system, cart.qv_reduced, dc, t, q)
        qd = reconstruct_qdot(rmap, rng.normal(size=1))
        assert abs(kinematic_constraint_eval(cart.system, t, q, qd)[0]) <= 1e-12
        Mp, Np = dc.evaluate(t, q)
        assert abs((Mp @ qd + Np)[0]) <= 1e-12 * max(1.0, abs(Np[0]))
