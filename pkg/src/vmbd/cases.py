"""Built-in case studies.

``cart``
    Cart with a two-link pendulum whose tip carries a knife-edge wheel
    (one nonholonomic constraint, cart position ignorable).
``tribody``
    Free-floating main body with two hinged rectangular panels (position of
    the main body ignorable).
``satellite``
    Cubic satellite deploying a tip mass on a massless boom driven by a
    time-varying internal force.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import GimbalProximity
from .integrate import IntegratorSettings
from .model import (
    BodyKinematics,
    CoordinateLayout,
    ForceModel,
    KinematicConstraint,
    MultibodySystem,
    constraint_matrices,
)
from .quasivel import QuasiVelocityDef, solve_augmented

GRAVITY = 9.81
GIMBAL_MARGIN = 0.01

E_X = np.array([1.0, 0.0, 0.0])


@dataclass(frozen=True)
class CaseStudy:
    id: str
    system: MultibodySystem
    qv_reduced: QuasiVelocityDef
    qv_full: QuasiVelocityDef
    t0: float
    q0: np.ndarray
    qdot0: np.ndarray
    settings: IntegratorSettings
    momentum_direction: np.ndarray = field(default_factory=lambda: E_X.copy())
    description: str = ""


# -- rotation helpers -------------------------------------------------------


def _rot_x(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _rot_y(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rot_z(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _check_gimbal(theta: float) -> None:
    if abs(theta) > np.pi / 2 - GIMBAL_MARGIN:
        raise GimbalProximity(f"pitch angle {theta:.6f} rad is within {GIMBAL_MARGIN} rad of the singularity")


def euler_zyx_matrix(psi, theta, phi) -> np.ndarray:
    """Body-to-inertial rotation for the intrinsic z-y-x sequence."""
    return _rot_z(psi) @ _rot_y(theta) @ _rot_x(phi)


def euler_zyx_rate_matrix(theta, phi) -> np.ndarray:
    """Maps ``(psi_dot, theta_dot, phi_dot)`` to body-frame angular velocity."""
    _check_gimbal(theta)
    st, ct = np.sin(theta), np.cos(theta)
    sp, cp = np.sin(phi), np.cos(phi)
    return np.array(
        [
            [-st, 0.0, 1.0],
            [ct * sp, cp, 0.0],
            [ct * cp, -sp, 0.0],
        ]
    )


def _hat(v) -> np.ndarray:
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


def inertia_from_products(Ixx, Iyy, Izz, Ixy, Ixz, Iyz) -> np.ndarray:
    return np.array(
        [
            [Ixx, -Ixy, -Ixz],
            [-Ixy, Iyy, -Iyz],
            [-Ixz, -Iyz, Izz],
        ]
    )


# -- case 1 -------------------------------------------------------------------


def build_cart_pendulum(tau: float = 0.0) -> CaseStudy:
    """Cart + two-link pendulum with a knife-edge wheel at the tip.

    Both links are uniform slender bars of length ``l`` carrying half of the
    pendulum mass each; angles are measured from the +X axis. The motor torque
    ``tau`` acts on link AB and reacts on link BC; with ``tau = 0`` the system
    has no non-conservative forces at all.
    """
    m1, m2, l = 1.0, 0.5, 0.2
    mb = 0.5 * m2
    bar_inertia = np.diag([0.0, mb * l**2 / 12.0, mb * l**2 / 12.0])

    def cart_jac(t, q):
        return np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]])

    def bar1_jac(t, q):
        s1, c1 = np.sin(q[0]), np.cos(q[0])
        return np.array([[-0.5 * l * s1, 0.0, 1.0], [0.5 * l * c1, 0.0, 0.0], [0.0, 0.0, 0.0]])

    def bar2_jac(t, q):
        s1, c1 = np.sin(q[0]), np.cos(q[0])
        s2, c2 = np.sin(q[1]), np.cos(q[1])
        return np.array([[-l * s1, -0.5 * l * s2, 1.0], [l * c1, 0.5 * l * c2, 0.0], [0.0, 0.0, 0.0]])

    spin1 = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    spin2 = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 1.0, 0.0]])

    def potential(t, q):
        return mb * GRAVITY * l * (1.5 * np.sin(q[0]) + 0.5 * np.sin(q[1]))

    def potential_grad(t, q):
        return np.array([1.5 * mb * GRAVITY * l * np.cos(q[0]), 0.5 * mb * GRAVITY * l * np.cos(q[1]), 0.0])

    def torque(t, q, qd):
        return np.array([tau, -tau, 0.0])

    def wheel(t, q):
        return np.array([[l * np.cos(q[0] - q[1]), l, 0.0]])

    system = MultibodySystem(
        CoordinateLayout(("theta1", "theta2", "x"), s=1, r=1),
        (
            BodyKinematics(m1, np.zeros((3, 3)), cart_jac, name="cart"),
            BodyKinematics(mb, bar_inertia, bar1_jac, ang_jac=lambda t, q: spin1, name="link AB"),
            BodyKinematics(mb, bar_inertia, bar2_jac, ang_jac=lambda t, q: spin2, name="link BC"),
        ),
        ForceModel(potential=potential, nc_forces=torque if tau != 0.0 else None, potential_grad=potential_grad),
        KinematicConstraint(wheel),
        name="cart",
    )
    y_red = np.array([[-1.0, 1.0, 0.0]])
    y_full = np.array([[1.0, -1.0, 0.0], [0.0, 0.0, 1.0]])
    return CaseStudy(
        id="cart",
        system=system,
        qv_reduced=QuasiVelocityDef(lambda t, q: y_red, labels=("theta2_dot - theta1_dot",)),
        qv_full=QuasiVelocityDef(lambda t, q: y_full, labels=("theta1_dot - theta2_dot", "x_dot")),
        t0=0.0,
        q0=np.array([np.pi / 2, np.pi / 2, 4.0]),
        qdot0=np.array([1.0, -1.0, 3.0]),
        settings=IntegratorSettings(t_final=50.0, sample_step=0.01),
        description="cart with a 2-DOF pendulum and knife-edge wheel",
    )


# -- cases 2 and 3 --------------------------------------------------------------


def _floating_base_columns(R, Omega, r_body):
    """Inertial velocity Jacobian columns for a point fixed at ``r_body``
    (body frame) relative to the base centre of mass: Euler-rate block."""
    return -R @ _hat(r_body) @ Omega


def _euler_qv(n_extra: int, n_translation: int, full: bool, labels):
    """Quasi-velocities ``[w_body, extra rates, (translation rates)]``."""
    m = 3 + n_extra + n_translation
    rows = 3 + n_extra + (n_translation if full else 0)

    def jac(t, q):
        Y = np.zeros((rows, m))
        Y[:3, :3] = euler_zyx_rate_matrix(q[1], q[2])
        Y[3 : 3 + n_extra, 3 : 3 + n_extra] = np.eye(n_extra)
        if full:
            Y[3 + n_extra :, 3 + n_extra :] = np.eye(n_translation)
        return Y

    return QuasiVelocityDef(jac, labels=labels[:rows])


def build_three_body_spacecraft() -> CaseStudy:
    """Main body with two hinged uniform rectangular panels, torque-free."""
    ms, mp = 100.0, 10.0
    a, b, c = 2.0, 2.0, 2.0
    I_main = inertia_from_products(67.0, 67.0, 67.0, 5.0, 2.0, 0.0)
    I_panel = np.diag([mp * c**2 / 12.0, mp * b**2 / 12.0, mp * (b**2 + c**2) / 12.0])
    m = 8

    def main_lin(t, q):
        B = np.zeros((3, m))
        B[:, 5:8] = np.eye(3)
        return B

    def main_ang(t, q):
        D = np.zeros((3, m))
        D[:, :3] = euler_zyx_rate_matrix(q[1], q[2])
        return D

    def panel(side: float, idx: int):
        def offset(g):
            return np.array([side * (0.5 * a + 0.5 * b * np.cos(g)), 0.0, -side * 0.5 * b * np.sin(g)])

        def doffset(g):
            return np.array([-side * 0.5 * b * np.sin(g), 0.0, -side * 0.5 * b * np.cos(g)])

        def lin(t, q):
            R = euler_zyx_matrix(q[0], q[1], q[2])
            Omega = euler_zyx_rate_matrix(q[1], q[2])
            B = np.zeros((3, m))
            B[:, :3] = _floating_base_columns(R, Omega, offset(q[idx]))
            B[:, idx] = R @ doffset(q[idx])
            B[:, 5:8] = np.eye(3)
            return B

        def ang(t, q):
            D = np.zeros((3, m))
            D[:, :3] = _rot_y(q[idx]).T @ euler_zyx_rate_matrix(q[1], q[2])
            D[1, idx] = 1.0
            return D

        return lin, ang

    lin1, ang1 = panel(+1.0, 3)
    lin2, ang2 = panel(-1.0, 4)
    names = ("psi", "theta", "phi", "gamma1", "gamma2", "X", "Y", "Z")
    system = MultibodySystem(
        CoordinateLayout(names, s=3, r=0),
        (
            BodyKinematics(ms, I_main, main_lin, ang_jac=main_ang, name="main body"),
            BodyKinematics(mp, I_panel, lin1, ang_jac=ang1, name="panel 1"),
            BodyKinematics(mp, I_panel, lin2, ang_jac=ang2, name="panel 2"),
        ),
        name="tribody",
    )
    labels = ("wx", "wy", "wz", "gamma1_dot", "gamma2_dot", "X_dot", "Y_dot", "Z_dot")
    return CaseStudy(
        id="tribody",
        system=system,
        qv_reduced=_euler_qv(2, 3, False, labels),
        qv_full=_euler_qv(2, 3, True, labels),
        t0=0.0,
        q0=np.array([np.pi / 10, np.pi / 6, 0.03, 0.0, 0.0, 3.0, 3.0, 9.0]),
        qdot0=np.array([0.3, 0.0, -0.3, 0.0, 0.2, 0.1, -0.3, -0.4]),
        settings=IntegratorSettings(t_final=50.0, sample_step=0.1),
        description="three connected rigid bodies floating in space",
    )


def boom_force(t: float) -> float:
    """Magnitude of the boom actuator force (N)."""
    return -0.018 * np.sin(0.089 * t) + 0.012 * np.cos(0.0485 * t)


def build_boom_satellite() -> CaseStudy:
    """Cubic satellite with a deployable boom pushing a tip mass along body +x."""
    ms, mt = 2000.0, 1.0
    side, a = 2.5, 0.5
    I_sat = inertia_from_products(1400.0, 900.0, 1100.0, 5.0, 8.0, 3.0)
    m = 7

    def sat_lin(t, q):
        B = np.zeros((3, m))
        B[:, 4:7] = np.eye(3)
        return B

    def sat_ang(t, q):
        D = np.zeros((3, m))
        D[:, :3] = euler_zyx_rate_matrix(q[1], q[2])
        return D

    def tip_lin(t, q):
        R = euler_zyx_matrix(q[0], q[1], q[2])
        Omega = euler_zyx_rate_matrix(q[1], q[2])
        B = np.zeros((3, m))
        B[:, :3] = _floating_base_columns(R, Omega, np.array([0.5 * side + q[3], 0.0, 0.0]))
        B[:, 3] = R[:, 0]
        B[:, 4:7] = np.eye(3)
        return B

    def actuator(t, q, qd):
        Q = np.zeros(m)
        Q[3] = boom_force(t)
        return Q

    names = ("psi", "theta", "phi", "rho", "X", "Y", "Z")
    system = MultibodySystem(
        CoordinateLayout(names, s=3, r=0),
        (
            BodyKinematics(ms, I_sat, sat_lin, ang_jac=sat_ang, name="satellite"),
            BodyKinematics(mt, np.zeros((3, 3)), tip_lin, name="tip mass"),
        ),
        ForceModel(nc_forces=actuator),
        name="satellite",
    )
    labels = ("wx", "wy", "wz", "rho_dot", "X_dot", "Y_dot", "Z_dot")
    return CaseStudy(
        id="satellite",
        system=system,
        qv_reduced=_euler_qv(1, 3, False, labels),
        qv_full=_euler_qv(1, 3, True, labels),
        t0=0.0,
        q0=np.array([np.pi / 8, np.pi / 12, 0.08, a, 0.0, 0.0, 0.0]),
        qdot0=np.array([-0.1, 0.05, -0.05, 0.0, 2.0, 1.0, 0.0]),
        settings=IntegratorSettings(t_final=50.0, sample_step=0.1),
        description="cubic satellite with a deployable boom",
    )


CASES: dict[str, Callable[[], CaseStudy]] = {
    "cart": build_cart_pendulum,
    "tribody": build_three_body_spacecraft,
    "satellite": build_boom_satellite,
}


def build_case(case_id: str) -> CaseStudy:
    try:
        return CASES[case_id]()
    except KeyError:
        raise ValueError(f"unknown case {case_id!r}; expected one of {tuple(CASES)}") from None


def random_states(case: CaseStudy, n: int, seed: int = 0):
    """Random admissible ``(t, q, qdot)`` samples around the case's workspace.

    Coordinates are perturbed by up to 0.6 from the initial configuration,
    which keeps every case clear of the Euler-angle singularity; velocities
    are random in the admissible directions.
    """
    rng = np.random.default_rng(seed)
    sys = case.system
    lay = sys.layout
    out = []
    while len(out) < n:
        q = case.q0 + rng.uniform(-0.6, 0.6, lay.m)
        t = float(rng.uniform(0.0, 5.0))
        Y, Z = case.qv_full.evaluate(t, q, lay.m)
        a, b = constraint_matrices(sys, t, q)
        rmap = solve_augmented(Y, Z, np.zeros((0, lay.m)), np.zeros(0), a, b)
        qdot = rmap.W @ rng.normal(size=lay.p) + rmap.X
        out.append((t, q, qdot))
    return out
