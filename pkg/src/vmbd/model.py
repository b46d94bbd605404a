"""Declarative multibody system description and kinetic-energy assembly.

A system is a set of rigid bodies whose centroidal velocities are affine in
the generalized velocities::

    V_i = B_i(t, q) qdot + C_i(t, q)      (inertial frame)
    w_i = D_i(t, q) qdot + E_i(t, q)      (body frame, same frame as inertia)

From these maps the kinetic energy is assembled as the quadratic form
``T = 1/2 qdot' M qdot + qdot' N + T0``. Ignorable coordinates, when present,
are the last ``s`` entries of ``q``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import NonFiniteEvaluation, SingularMass
from .numdiff import gradient, matrix_function_partials  # noqa: F401  (re-export)

MatrixMap = Callable[[float, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class CoordinateLayout:
    """Generalized-coordinate bookkeeping: ``m`` coordinates, ``r`` kinematic
    constraints and ``s`` ignorable coordinates stored last."""

    names: tuple[str, ...]
    s: int = 0
    r: int = 0

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        if len(set(self.names)) != len(self.names):
            raise ValueError("coordinate names must be unique")
        if self.r < 0 or self.r > self.m:
            raise ValueError(f"constraint count r={self.r} out of range for m={self.m}")
        if self.s < 0 or self.s > self.p:
            raise ValueError(f"ignorable count s={self.s} must satisfy 0 <= s <= p={self.p}")

    @property
    def m(self) -> int:
        return len(self.names)

    @property
    def p(self) -> int:
        return self.m - self.r

    @property
    def ignorable(self) -> slice:
        return slice(self.m - self.s, self.m)

    @property
    def ignorable_names(self) -> tuple[str, ...]:
        return self.names[self.ignorable]


@dataclass(frozen=True)
class BodyKinematics:
    """Mass properties of one rigid body plus its velocity maps.

    Any of the bias maps, or the angular Jacobian, may be ``None`` which
    stands for an identically zero map. Point masses use a zero inertia.
    """

    mass: float
    inertia: np.ndarray
    lin_jac: MatrixMap
    lin_bias: Optional[MatrixMap] = None
    ang_jac: Optional[MatrixMap] = None
    ang_bias: Optional[MatrixMap] = None
    name: str = ""

    def __post_init__(self):
        inertia = np.array(self.inertia, dtype=float).reshape(3, 3)
        if not self.mass > 0:
            raise ValueError(f"body {self.name!r}: mass must be positive")
        if not np.allclose(inertia, inertia.T, rtol=0, atol=1e-12 * (1 + np.abs(inertia).max())):
            raise ValueError(f"body {self.name!r}: inertia must be symmetric")
        inertia = 0.5 * (inertia + inertia.T)
        if np.linalg.eigvalsh(inertia).min() < -1e-12 * (1 + np.abs(inertia).max()):
            raise ValueError(f"body {self.name!r}: inertia must be positive semi-definite")
        inertia.setflags(write=False)
        object.__setattr__(self, "inertia", inertia)


def _zero_potential(t, q):
    return 0.0


@dataclass(frozen=True)
class ForceModel:
    """Conservative part as a potential ``V(t, q)``, everything else as
    generalized forces ``Q_nc(t, q, qdot)``.

    ``potential_grad`` is an optional analytic override for ``dV/dq``.
    """

    potential: Optional[Callable[[float, np.ndarray], float]] = None
    nc_forces: Optional[Callable[[float, np.ndarray, np.ndarray], np.ndarray]] = None
    potential_grad: Optional[Callable[[float, np.ndarray], np.ndarray]] = None


@dataclass(frozen=True)
class KinematicConstraint:
    """Velocity-level constraint ``a(t, q) qdot + b(t, q) = 0``."""

    jac: MatrixMap
    bias: Optional[MatrixMap] = None


@dataclass(frozen=True)
class MultibodySystem:
    layout: CoordinateLayout
    bodies: tuple[BodyKinematics, ...]
    forces: ForceModel = field(default_factory=ForceModel)
    constraint: Optional[KinematicConstraint] = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "bodies", tuple(self.bodies))
        if not self.bodies:
            raise ValueError("a system needs at least one body")
        if self.layout.r > 0 and self.constraint is None:
            raise ValueError("layout declares constraints but none were supplied")
        if self.layout.r == 0 and self.constraint is not None:
            raise ValueError("constraint supplied but layout declares r = 0")
        masses = np.array([b.mass for b in self.bodies])
        inertias = np.stack([b.inertia for b in self.bodies])
        # Stacked forms used by the quadratic-form assembly.
        mass3 = np.repeat(masses, 3)[:, None]
        inertia_blocks = np.zeros((3 * masses.size, 3 * masses.size))
        for i, inertia in enumerate(inertias):
            inertia_blocks[3 * i : 3 * i + 3, 3 * i : 3 * i + 3] = inertia
        for name, arr in (("_masses", masses), ("_inertias", inertias), ("_mass3", mass3), ("_inertia_blocks", inertia_blocks)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def m(self) -> int:
        return self.layout.m

    @property
    def masses(self) -> np.ndarray:
        return self._masses

    @property
    def inertias(self) -> np.ndarray:
        return self._inertias


@dataclass(frozen=True)
class VelocityMaps:
    """Stacked body maps at one ``(t, q)``: ``B, D`` are (N, 3, m), ``C, E`` (N, 3)."""

    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    E: np.ndarray


def velocity_maps(sys: MultibodySystem, t: float, q) -> VelocityMaps:
    q = np.asarray(q, dtype=float)
    m = sys.layout.m
    n = len(sys.bodies)
    B = np.empty((n, 3, m))
    D = np.zeros((n, 3, m))
    C = np.zeros((n, 3))
    E = np.zeros((n, 3))
    for i, body in enumerate(sys.bodies):
        B[i] = body.lin_jac(t, q)
        if body.lin_bias is not None:
            C[i] = body.lin_bias(t, q)
        if body.ang_jac is not None:
            D[i] = body.ang_jac(t, q)
        if body.ang_bias is not None:
            E[i] = body.ang_bias(t, q)
    if not np.isfinite(B.sum() + C.sum() + D.sum() + E.sum()):
        raise NonFiniteEvaluation(f"body velocity maps are not finite at t={t}, q={q}")
    return VelocityMaps(B, C, D, E)


def mass_decomposition_from_maps(sys: MultibodySystem, vm: VelocityMaps):
    """``(M, N, T0)`` of ``T = 1/2 qdot' M qdot + qdot' N + T0`` from body maps."""
    m = vm.B.shape[2]
    B = vm.B.reshape(-1, m)
    D = vm.D.reshape(-1, m)
    C = vm.C.reshape(-1)
    E = vm.E.reshape(-1)
    mB = sys._mass3 * B
    J = sys._inertia_blocks
    JD = J @ D
    JE = J @ E
    M = B.T @ mB + D.T @ JD
    M = 0.5 * (M + M.T)
    N = mB.T @ C + JD.T @ E
    T0 = 0.5 * (float(C @ (sys._mass3[:, 0] * C)) + float(E @ JE))
    return M, N, T0


def derive_mass_decomposition(sys: MultibodySystem, t: float, q, *, check: bool = True):
    """Kinetic-energy quadratic form ``(M, N, T0)`` at ``(t, q)``.

    Raises
    ------
    SingularMass
        If ``check`` is set and ``M`` is not positive definite.
    """
    M, N, T0 = mass_decomposition_from_maps(sys, velocity_maps(sys, t, q))
    if check:
        try:
            np.linalg.cholesky(M)
        except np.linalg.LinAlgError:
            raise SingularMass(f"mass matrix is not positive definite at q={np.asarray(q)}") from None
    return M, N, T0


def body_velocities(sys: MultibodySystem, t: float, q, qdot):
    """Centroidal linear (inertial) and angular (body-frame) velocities, each (N, 3)."""
    vm = velocity_maps(sys, t, q)
    qdot = np.asarray(qdot, dtype=float)
    return vm.B @ qdot + vm.C, vm.D @ qdot + vm.E


def kinetic_energy(sys: MultibodySystem, t: float, q, qdot) -> float:
    """Kinetic energy summed body by body from the centroidal velocities."""
    V, w = body_velocities(sys, t, q, qdot)
    Iw = np.einsum("nab,nb->na", sys.inertias, w)
    return 0.5 * float(np.einsum("n,na,na->", sys.masses, V, V) + np.einsum("na,na->", w, Iw))


def potential_energy(sys: MultibodySystem, t: float, q) -> float:
    if sys.forces.potential is None:
        return 0.0
    v = float(sys.forces.potential(t, np.asarray(q, dtype=float)))
    if not np.isfinite(v):
        raise NonFiniteEvaluation("potential energy is not finite")
    return v


def potential_gradient(sys: MultibodySystem, t: float, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    f = sys.forces
    if f.potential is None:
        return np.zeros(q.size)
    if f.potential_grad is not None:
        g = np.asarray(f.potential_grad(t, q), dtype=float)
    else:
        g = gradient(lambda tt, qq: f.potential(tt, qq), t, q)
    if not np.isfinite(g).all():
        raise NonFiniteEvaluation("potential gradient is not finite")
    return g


def nonconservative_forces(sys: MultibodySystem, t: float, q, qdot) -> np.ndarray:
    if sys.forces.nc_forces is None:
        return np.zeros(sys.layout.m)
    Q = np.asarray(sys.forces.nc_forces(t, np.asarray(q, dtype=float), np.asarray(qdot, dtype=float)), dtype=float)
    if Q.shape != (sys.layout.m,) or not np.isfinite(Q).all():
        raise NonFiniteEvaluation("non-conservative forces must be a finite m-vector")
    return Q


def generalized_forces(sys: MultibodySystem, t: float, q, qdot) -> np.ndarray:
    """Total generalized force ``Q_nc(t, q, qdot) - dV/dq``."""
    return nonconservative_forces(sys, t, q, qdot) - potential_gradient(sys, t, q)


def constraint_matrices(sys: MultibodySystem, t: float, q):
    """``(a, b)`` with shapes (r, m) and (r,); empty when r = 0."""
    m, r = sys.layout.m, sys.layout.r
    if r == 0:
        return np.zeros((0, m)), np.zeros(0)
    q = np.asarray(q, dtype=float)
    a = np.asarray(sys.constraint.jac(t, q), dtype=float).reshape(r, m)
    b = np.zeros(r) if sys.constraint.bias is None else np.asarray(sys.constraint.bias(t, q), dtype=float).reshape(r)
    if not np.isfinite(a.sum() + b.sum()):
        raise NonFiniteEvaluation("constraint Jacobian or bias is not finite")
    return a, b


def kinematic_constraint_eval(sys: MultibodySystem, t: float, q, qdot) -> np.ndarray:
    """Residual ``a qdot + b`` of the kinematic constraints (empty if r = 0)."""
    a, b = constraint_matrices(sys, t, q)
    return a @ np.asarray(qdot, dtype=float) + b


def lagrangian(sys: MultibodySystem, t: float, q, qdot) -> float:
    return kinetic_energy(sys, t, q, qdot) - potential_energy(sys, t, q)


def linear_momentum(sys: MultibodySystem, t: float, q, qdot) -> np.ndarray:
    """Total linear momentum in the inertial frame."""
    V, _ = body_velocities(sys, t, q, qdot)
    return sys.masses @ V

