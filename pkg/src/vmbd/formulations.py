"""Equation-of-motion engines.

Four formulations share one system description and produce first-order
state-derivative functions:

``volterra-reduced``
    State ``[q; u_NI]`` with ``p - s`` quasi-velocities. The velocity map is
    augmented with the conserved ignorable momenta, so ``p - s`` equations
    remain.
``kane``
    Standard Volterra / Kane form, state ``[q; u]`` with ``p`` quasi-velocities.
``lagrange``
    State ``[q; qdot]``; multipliers from the acceleration-level constraints.
``maggi``
    State ``[q; qdot]``; multiplier-free projection onto the admissible
    velocity directions.

Time and configuration derivatives of the kinematic quantities are taken
numerically along the motion (see :mod:`vmbd.numdiff`).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, lu_solve

from .errors import (
    InconsistentInitialState,
    SingularKKT,
    SingularProjection,
    SingularReducedMass,
)
from .ignorable import DynamicalConstraint
from .model import (
    CoordinateLayout,
    MultibodySystem,
    constraint_matrices,
    generalized_forces,
    mass_decomposition_from_maps,
    nonconservative_forces,
    velocity_maps,
)
from .numdiff import DYNAMICS_STEP, gradient, total_derivative
from .quasivel import COND_LIMIT, QuasiVelocityDef, ReducedMap, lu_with_condition, solve_augmented, solve_stacked

METHODS = ("lagrange", "maggi", "kane", "volterra-reduced")

CONSISTENCY_TOL = 1e-10


def method_card(method: str, system) -> tuple[int, int]:
    """``(n_states, n_equations)`` of a formulation.

    ``system`` is a :class:`MultibodySystem` or a bare :class:`CoordinateLayout`.
    A system with non-conservative forces integrates its accumulated work
    alongside the motion, which adds one state.
    """
    if isinstance(system, CoordinateLayout):
        layout, extra = system, 0
    else:
        layout = system.layout
        extra = int(has_work_channel(system))
    m, p, s = layout.m, layout.p, layout.s
    cards = {
        "lagrange": (2 * m, m),
        "maggi": (2 * m, m),
        "kane": (m + p, p),
        "volterra-reduced": (m + p - s, p - s),
    }
    try:
        n_states, n_equations = cards[method]
    except KeyError:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}") from None
    return n_states + extra, n_equations


def has_work_channel(system: MultibodySystem) -> bool:
    return system.forces.nc_forces is not None


def _skew(w: np.ndarray) -> np.ndarray:
    """Stack of cross-product matrices for an (N, 3) array."""
    S = np.zeros(w.shape[:-1] + (3, 3))
    S[..., 0, 1], S[..., 0, 2] = -w[..., 2], w[..., 1]
    S[..., 1, 0], S[..., 1, 2] = w[..., 2], -w[..., 0]
    S[..., 2, 0], S[..., 2, 1] = -w[..., 1], w[..., 0]
    return S


def _check_consistent(name: str, residual: np.ndarray, scale: float) -> None:
    if residual.size and np.abs(residual).max() > CONSISTENCY_TOL * (1.0 + scale):
        raise InconsistentInitialState(
            f"initial velocities violate the {name} (max residual {np.abs(residual).max():.3e})"
        )


@dataclass(frozen=True)
class ReducedTerms:
    """Terms of ``M_NI du/dt = L_NI`` with ``L_NI = U_NI + K_NI - A_NI``."""

    M_NI: np.ndarray
    N_NI: np.ndarray
    T0_NI: float
    A_NI: np.ndarray
    K_NI: np.ndarray
    U_NI: np.ndarray
    L_NI: np.ndarray
    qdot: np.ndarray


class QuasiVelocityFormulation:
    """Volterra's equations in quasi-velocities.

    With a :class:`DynamicalConstraint` this is the reduced form with
    ``p - s`` equations; with ``dc=None`` it is the standard (Kane) form.

    Angular velocities and inertias are body-frame components, so the rate
    of the angular partial velocities is taken in the inertial sense:
    ``d/dt(D W) + w x (D W)``.
    """

    def __init__(self, system: MultibodySystem, qv: QuasiVelocityDef, dc: Optional[DynamicalConstraint] = None):
        self.system = system
        self.qv = qv
        self.dc = dc
        lay = system.layout
        self.method = "kane" if dc is None else "volterra-reduced"
        k = lay.p if dc is None else lay.p - lay.s
        if dc is not None and dc.system is not system:
            raise ValueError("dynamical constraint was built for a different system")
        self.k = k

    @property
    def n_states(self) -> int:
        return self.system.layout.m + self.k

    @property
    def n_equations(self) -> int:
        return self.k

    # -- velocity map -----------------------------------------------------

    def _raw(self, t, q):
        """Smooth inputs of the augmented solve: body maps, ``(M, N, T0)`` and
        the stacked ``A = [Y; M'; a]``, ``c = [Z; N'; b]``."""
        sys = self.system
        m = sys.layout.m
        vm = velocity_maps(sys, t, q)
        M, N, T0 = mass_decomposition_from_maps(sys, vm)
        Y, Z = self.qv.evaluate(t, q, m)
        if Y.shape[0] != self.k:
            raise ValueError(f"{self.method} needs {self.k} quasi-velocities, got {Y.shape[0]}")
        a, b = constraint_matrices(sys, t, q)
        if self.dc is None:
            Mp, Np = np.zeros((0, m)), np.zeros(0)
        else:
            Mp, Np = self.dc.rows_from(M, N)
        return vm, M, N, T0, np.concatenate((Y, Mp, a)), np.concatenate((Z, Np, b))

    def _snapshot(self, t, q, check_condition: bool = True):
        vm, M, N, T0, A, c = self._raw(t, q)
        rmap = solve_stacked(A, c, self.k, check_condition=check_condition)
        return vm, M, N, T0, rmap

    def reduced_map(self, t, q) -> ReducedMap:
        return self._snapshot(t, np.asarray(q, dtype=float))[-1]

    def qdot(self, t, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        m = self.system.layout.m
        rmap = self.reduced_map(t, z[:m])
        return rmap.W @ z[m:] + rmap.X

    def initial_state(self, t0, q0, qdot0) -> np.ndarray:
        sys = self.system
        q0 = np.asarray(q0, dtype=float)
        qdot0 = np.asarray(qdot0, dtype=float)
        a, b = constraint_matrices(sys, t0, q0)
        scale = float(np.abs(a).max(initial=0.0) * np.abs(qdot0).max(initial=0.0))
        _check_consistent("kinematic constraints", a @ qdot0 + b, scale)
        _, M, N, _, rmap = self._snapshot(t0, q0)
        if self.dc is not None:
            Mp, Np = self.dc.rows_from(M, N)
            _check_consistent("conserved ignorable momenta", Mp @ qdot0 + Np, float(np.abs(Np).max(initial=0.0)))
        Y, Z = self.qv.evaluate(t0, q0, sys.layout.m)
        u0 = Y @ qdot0 + Z
        back = rmap.W @ u0 + rmap.X
        _check_consistent("quasi-velocity reconstruction", back - qdot0, float(np.abs(qdot0).max(initial=0.0)))
        return np.concatenate((q0, u0))

    # -- dynamics ---------------------------------------------------------

    def terms(self, t, q, u) -> ReducedTerms:
        sys = self.system
        q = np.asarray(q, dtype=float)
        u = np.asarray(u, dtype=float)
        k = self.k
        vm, M, N, T0, rmap = self._snapshot(t, q)
        W, X = rmap.W, rmap.X
        qdot = W @ u + X
        n = len(sys.bodies)

        def probe(tt, qq):
            pvm, pM, pN, _, pmap = self._snapshot(tt, qq, check_condition=False)
            pW = pmap.W
            dTdu = pW.T @ (pM @ (pW @ u + pmap.X) + pN)
            return np.concatenate((dTdu, (pvm.B @ pW).ravel(), (pvm.D @ pW).ravel()))

        rate = total_derivative(probe, t, q, qdot)
        A_NI = rate[:k]
        Bdot = rate[k : k + 3 * n * k].reshape(n, 3, k)
        Ddot = rate[k + 3 * n * k :].reshape(n, 3, k)

        V = vm.B @ qdot + vm.C
        w = vm.D @ qdot + vm.E
        Hw = np.einsum("nab,nb->na", sys.inertias, w)
        Dang = Ddot + _skew(w) @ (vm.D @ W)
        K_NI = np.einsum("n,nak,na->k", sys.masses, Bdot, V) + np.einsum("nak,na->k", Dang, Hw)

        U_NI = W.T @ generalized_forces(sys, t, q, qdot)
        MW = M @ W
        M_NI = W.T @ MW
        M_NI = 0.5 * (M_NI + M_NI.T)
        N_NI = W.T @ (M @ X + N)
        T0_NI = 0.5 * float(X @ M @ X) + float(X @ N) + T0
        L_NI = U_NI + K_NI - A_NI
        return ReducedTerms(M_NI, N_NI, T0_NI, A_NI, K_NI, U_NI, L_NI, qdot)

    def rhs(self, t, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        m = self.system.layout.m
        tr = self.terms(t, z[:m], z[m:])
        if self.k == 0:
            return np.concatenate((tr.qdot, np.zeros(0)))
        try:
            udot = cho_solve(cho_factor(tr.M_NI, check_finite=False), tr.L_NI, check_finite=False)
        except LinAlgError:
            raise SingularReducedMass(f"reduced mass matrix is not positive definite at t={t}") from None
        return np.concatenate((tr.qdot, udot))

    def power(self, t, z) -> float:
        z = np.asarray(z, dtype=float)
        m = self.system.layout.m
        qd = self.qdot(t, z)
        return float(nonconservative_forces(self.system, t, z[:m], qd) @ qd)


class _GeneralizedVelocityFormulation:
    """Shared machinery for the ``[q; qdot]`` formulations."""

    method = ""

    def __init__(self, system: MultibodySystem):
        self.system = system

    @property
    def n_states(self) -> int:
        return 2 * self.system.layout.m

    @property
    def n_equations(self) -> int:
        return self.system.layout.m

    def qdot(self, t, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return z[self.system.layout.m :].copy()

    def initial_state(self, t0, q0, qdot0) -> np.ndarray:
        q0 = np.asarray(q0, dtype=float)
        qdot0 = np.asarray(qdot0, dtype=float)
        a, b = constraint_matrices(self.system, t0, q0)
        scale = float(np.abs(a).max(initial=0.0) * np.abs(qdot0).max(initial=0.0))
        _check_consistent("kinematic constraints", a @ qdot0 + b, scale)
        return np.concatenate((q0, qdot0))

    def power(self, t, z) -> float:
        z = np.asarray(z, dtype=float)
        m = self.system.layout.m
        return float(nonconservative_forces(self.system, t, z[:m], z[m:]) @ z[m:])

    def dynamic_terms(self, t, q, qd):
        """``(M, F, a, gamma)`` with ``M qdd = F + a' lambda`` and ``a qdd = gamma``.

        ``F = Q - (dM/dt qdot + dN/dt - dT/dq)`` and ``gamma = -(da/dt qdot + db/dt)``.
        """
        sys = self.system
        m = sys.layout.m
        vm = velocity_maps(sys, t, q)
        M, N, _ = mass_decomposition_from_maps(sys, vm)
        a, b = constraint_matrices(sys, t, q)
        r = a.shape[0]

        def probe(tt, qq):
            pM, pN, _ = mass_decomposition_from_maps(sys, velocity_maps(sys, tt, qq))
            pa, pb = constraint_matrices(sys, tt, qq)
            return np.concatenate((pM @ qd + pN, pa @ qd + pb))

        def kinetic(tt, qq):
            pvm = velocity_maps(sys, tt, qq)
            V = pvm.B @ qd + pvm.C
            w = pvm.D @ qd + pvm.E
            Iw = np.einsum("nab,nb->na", sys.inertias, w)
            return 0.5 * (np.einsum("n,na,na->", sys.masses, V, V) + np.einsum("na,na->", w, Iw))

        rate = total_derivative(probe, t, q, qd)
        dTdq = gradient(kinetic, t, q, step=DYNAMICS_STEP, relative=False)
        F = generalized_forces(sys, t, q, qd) - (rate[:m] - dTdq)
        gamma = -rate[m : m + r]
        return M, F, a, gamma


class Lagrange(_GeneralizedVelocityFormulation):
    method = "lagrange"

    def rhs(self, t, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        m = self.system.layout.m
        q, qd = z[:m], z[m:]
        M, F, a, gamma = self.dynamic_terms(t, q, qd)
        r = a.shape[0]
        kkt = np.zeros((m + r, m + r))
        kkt[:m, :m] = M
        kkt[:m, m:] = a.T
        kkt[m:, :m] = a
        factor, cond = lu_with_condition(kkt)
        if not cond <= COND_LIMIT:
            raise SingularKKT(f"constrained mass matrix is singular at t={t} (cond={cond:.3e})")
        sol = lu_solve(factor, np.concatenate((F, gamma)), check_finite=False)
        return np.concatenate((qd, sol[:m]))


class Maggi(_GeneralizedVelocityFormulation):
    """Projection of the Lagrange equations onto the columns of ``W`` from the
    standard quasi-velocity map; the multipliers never appear."""

    method = "maggi"

    def __init__(self, system: MultibodySystem, qv_full: QuasiVelocityDef):
        super().__init__(system)
        self.qv = qv_full

    def rhs(self, t, z) -> np.ndarray:
        sys = self.system
        z = np.asarray(z, dtype=float)
        m = sys.layout.m
        q, qd = z[:m], z[m:]
        M, F, a, gamma = self.dynamic_terms(t, q, qd)
        Y, Z = self.qv.evaluate(t, q, m)
        W = solve_augmented(Y, Z, np.zeros((0, m)), np.zeros(0), a, np.zeros(a.shape[0])).W
        lhs = np.vstack((W.T @ M, a))
        factor, cond = lu_with_condition(lhs)
        if not cond <= COND_LIMIT:
            raise SingularProjection(f"projected mass matrix is singular at t={t} (cond={cond:.3e})")
        qdd = lu_solve(factor, np.concatenate((W.T @ F, gamma)), check_finite=False)
        return np.concatenate((qd, qdd))


def make_formulation(method: str, system: MultibodySystem, qv_reduced=None, qv_full=None, dc=None):
    if method == "lagrange":
        return Lagrange(system)
    if method == "maggi":
        return Maggi(system, qv_full)
    if method == "kane":
        return QuasiVelocityFormulation(system, qv_full, None)
    if method == "volterra-reduced":
        if dc is None:
            raise ValueError("the reduced formulation needs a dynamical constraint")
        return QuasiVelocityFormulation(system, qv_reduced, dc)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


# Functional entry points -------------------------------------------------


def reduced_terms(sys, qv, dc, t, q, u_NI) -> ReducedTerms:
    return QuasiVelocityFormulation(sys, qv, dc).terms(t, q, u_NI)


def reduced_volterra_rhs(sys, qv, dc, t, z) -> np.ndarray:
    return QuasiVelocityFormulation(sys, qv, dc).rhs(t, z)


def standard_volterra_rhs(sys, qv_full, t, z) -> np.ndarray:
    return QuasiVelocityFormulation(sys, qv_full, None).rhs(t, z)


def lagrange_rhs(sys, t, z) -> np.ndarray:
    return Lagrange(sys).rhs(t, z)


def maggi_rhs(sys, qv_full, t, z) -> np.ndarray:
    return Maggi(sys, qv_full).rhs(t, z)
