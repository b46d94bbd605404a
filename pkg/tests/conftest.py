"""Small analytic systems shared by the unit tests."""
from __future__ import annotations

import numpy as np
import pytest

from vmbd.cases import build_case, euler_zyx_rate_matrix
from vmbd.model import BodyKinematics, CoordinateLayout, ForceModel, MultibodySystem
from vmbd.quasivel import QuasiVelocityDef

G = 9.81


def free_particle(mass=2.0, s=2, potential=None):
    """Planar point mass, ``q = [x, y]``."""

    def lin(t, q):
        return np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])

    return MultibodySystem(
        CoordinateLayout(("x", "y"), s=s),
        (BodyKinematics(mass, np.zeros((3, 3)), lin, name="particle"),),
        ForceModel(potential=potential),
        name="particle",
    )


def cart_simple_pendulum(m1=1.0, m2=0.5, l=0.2, order=("x", "theta")):
    """Cart on a rail with a rigid massless rod and a bob.

    ``theta`` is measured from the downward vertical. ``order`` picks the
    coordinate order; putting ``x`` last makes it the ignorable coordinate.
    """
    ix, it = order.index("x"), order.index("theta")

    def cart(t, q):
        B = np.zeros((3, 2))
        B[0, ix] = 1.0
        return B

    def bob(t, q):
        th = q[it]
        B = np.zeros((3, 2))
        B[0, ix] = 1.0
        B[0, it] = l * np.cos(th)
        B[1, it] = l * np.sin(th)
        return B

    def potential(t, q):
        return -m2 * G * l * np.cos(q[it])

    return MultibodySystem(
        CoordinateLayout(tuple(order), s=1 if order[-1] == "x" else 0),
        (
            BodyKinematics(m1, np.zeros((3, 3)), cart, name="cart"),
            BodyKinematics(m2, np.zeros((3, 3)), bob, name="bob"),
        ),
        ForceModel(potential=potential),
        name="cart-pendulum",
    )


def simple_pendulum(mass=0.7, l=0.5):
    def bob(t, q):
        return np.array([[l * np.cos(q[0])], [l * np.sin(q[0])], [0.0]])

    return MultibodySystem(
        CoordinateLayout(("theta",)),
        (BodyKinematics(mass, np.zeros((3, 3)), bob, name="bob"),),
        ForceModel(potential=lambda t, q: -mass * G * l * np.cos(q[0])),
        name="pendulum",
    )


def free_rigid_body(inertia=(1.0, 2.0, 3.0), mass=1.0):
    """Torque-free rigid body, ``q = [psi, theta, phi, X, Y, Z]``.

    Returns the system and the quasi-velocity definition ``u = body rates``.
    """
    I = np.diag(inertia)

    def lin(t, q):
        B = np.zeros((3, 6))
        B[:, 3:] = np.eye(3)
        return B

    def ang(t, q):
        D = np.zeros((3, 6))
        D[:, :3] = euler_zyx_rate_matrix(q[1], q[2])
        return D

    sys = MultibodySystem(
        CoordinateLayout(("psi", "theta", "phi", "X", "Y", "Z"), s=3),
        (BodyKinematics(mass, I, lin, ang_jac=ang, name="body"),),
        name="rigid body",
    )
    qv = QuasiVelocityDef(lambda t, q: ang(t, q), labels=("wx", "wy", "wz"))
    return sys, qv


@pytest.fixture(scope="session")
def cart():
    return build_case("cart")


@pytest.fixture(scope="session")
def tribody():
    return build_case("tribody")


@pytest.fixture(scope="session")
def satellite():
    return build_case("satellite")


@pytest.fixture(scope="session", params=["cart", "tribody", "satellite"])
def any_case(request):
    return build_case(request.param)


ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, title: str, passed, detail: str, soft: bool = False) -> str:
    status = "PASS" if passed else ("WARN" if soft else "FAIL")
    line = f"criterion {number:2d} [{status}] {title}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
