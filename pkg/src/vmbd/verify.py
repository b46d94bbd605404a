"""Invariant checks run by ``vmbd verify``."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .bench import dynamical_constraint_for
from .cases import CaseStudy, build_case, random_states
from .errors import VmbdError
from .formulations import METHODS, QuasiVelocityFormulation, make_formulation
from .ignorable import verify_definition1
from .integrate import integrate_adaptive
from .model import (
    KinematicConstraint,
    constraint_matrices,
    derive_mass_decomposition,
    kinematic_constraint_eval,
    kinetic_energy,
)
from .numdiff import matrix_function_partials

N_SAMPLES = 20
QUADRATIC_TOL = 1e-12
MAP_TOL = 1e-10
INITIAL_TOL = 1e-12
EQUIVALENCE_TOL = 1e-6
EQUIVALENCE_HORIZON = 0.5


@dataclass(frozen=True)
class CheckOutcome:
    name: str
    passed: bool
    detail: str


def perturbed_constraint_case(case: CaseStudy, offset: float = 0.05) -> CaseStudy:
    """Copy of ``case`` whose kinematic-constraint row gains ``offset`` in its
    first column, so that the case's initial velocities violate it."""
    sys = case.system
    if sys.constraint is None:
        raise ValueError(f"case {case.id!r} has no kinematic constraint to perturb")
    jac, bias = sys.constraint.jac, sys.constraint.bias

    def bad_jac(t, q):
        a = np.array(jac(t, q), dtype=float)
        a[:, 0] += offset
        return a

    bad = dataclasses.replace(sys, constraint=KinematicConstraint(bad_jac, bias))
    return dataclasses.replace(case, system=bad)


def _initial_residual(case: CaseStudy) -> CheckOutcome:
    name = f"{case.id}: kinematic-constraint residual at t0"
    res = kinematic_constraint_eval(case.system, case.t0, case.q0, case.qdot0)
    worst = float(np.abs(res).max(initial=0.0))
    return CheckOutcome(name, worst <= INITIAL_TOL, f"|a qdot0 + b| = {worst:.2e}")


def _definition1(case: CaseStudy, samples) -> CheckOutcome:
    report = verify_definition1(case.system, samples)
    declared = set(case.system.layout.ignorable_names)
    ok = set(report.accepted) == declared
    return CheckOutcome(
        f"{case.id}: ignorable-coordinate test",
        ok,
        f"accepted {sorted(report.accepted)}, declared {sorted(declared)}",
    )


def _quadratic_form(case: CaseStudy, samples) -> CheckOutcome:
    worst = 0.0
    for t, q, qd in samples:
        M, N, T0 = derive_mass_decomposition(case.system, t, q)
        quad = 0.5 * qd @ M @ qd + qd @ N + T0
        direct = kinetic_energy(case.system, t, q, qd)
        worst = max(worst, abs(quad - direct) / max(1.0, abs(direct)))
    return CheckOutcome(
        f"{case.id}: kinetic-energy quadratic form", worst <= QUADRATIC_TOL, f"max relative mismatch {worst:.2e}"
    )


def _augmented_map(case: CaseStudy, samples) -> CheckOutcome:
    sys = case.system
    dc = dynamical_constraint_for(case)
    form = QuasiVelocityFormulation(sys, case.qv_reduced, dc) if dc is not None else None
    worst = 0.0
    for t, q, _ in samples:
        if form is None:
            break
        rmap = form.reduced_map(t, q)
        Y, Z = case.qv_reduced.evaluate(t, q, sys.layout.m)
        M, N, _ = derive_mass_decomposition(sys, t, q, check=False)
        Mp, Np = dc.rows_from(M, N)
        a, b = constraint_matrices(sys, t, q)
        A = np.vstack((Y, Mp, a))
        k = Y.shape[0]
        target_W = np.zeros((A.shape[0], k))
        target_W[:k] = np.eye(k)
        target_X = -np.concatenate((Z, Np, b))
        scale = max(1.0, float(np.abs(A).max()))
        worst = max(
            worst,
            float(np.abs(A @ rmap.W - target_W).max()) / scale,
            float(np.abs(A @ rmap.X - target_X).max()) / max(scale, float(np.abs(target_X).max())),
        )
    return CheckOutcome(f"{case.id}: augmented-map identities", worst <= MAP_TOL, f"max residual {worst:.2e}")


def _reduced_mass(case: CaseStudy, samples) -> CheckOutcome:
    dc = dynamical_constraint_for(case)
    form = make_formulation("volterra-reduced", case.system, case.qv_reduced, case.qv_full, dc)
    worst_asym, min_eig = 0.0, np.inf
    for t, q, _ in samples:
        rmap = form.reduced_map(t, q)
        M, _, _ = derive_mass_decomposition(case.system, t, q)
        M_NI = rmap.W.T @ M @ rmap.W
        worst_asym = max(worst_asym, float(np.abs(M_NI - M_NI.T).max()) / float(np.abs(M_NI).max()))
        min_eig = min(min_eig, float(np.linalg.eigvalsh(0.5 * (M_NI + M_NI.T)).min()))
    return CheckOutcome(
        f"{case.id}: reduced mass matrix symmetric positive definite",
        worst_asym <= 1e-12 and min_eig > 0,
        f"asymmetry {worst_asym:.1e}, smallest eigenvalue {min_eig:.3e}",
    )


def _equivalence(case: CaseStudy) -> CheckOutcome:
    settings = case.settings.replace(
        t_final=EQUIVALENCE_HORIZON, sample_step=EQUIVALENCE_HORIZON / 10, rtol=1e-10, atol=1e-12
    )
    dc = dynamical_constraint_for(case)
    m = case.system.layout.m
    qs = {}
    for method in METHODS:
        form = make_formulation(method, case.system, case.qv_reduced, case.qv_full, dc)
        z0 = form.initial_state(case.t0, case.q0, case.qdot0)
        traj = integrate_adaptive(form.rhs, z0, settings, t0=case.t0)
        qs[method] = traj.states[:, :m]
    ref = qs["lagrange"]
    worst = max(float(np.abs(q - ref).max()) for q in qs.values())
    return CheckOutcome(
        f"{case.id}: cross-method equivalence over {EQUIVALENCE_HORIZON:g} s",
        worst <= EQUIVALENCE_TOL,
        f"max |q - q_lagrange| = {worst:.2e}",
    )


def _guarded(name: str, fn, *args) -> CheckOutcome:
    try:
        return fn(*args)
    except VmbdError as exc:
        return CheckOutcome(name, False, f"{type(exc).__name__}: {exc}")


def run_checks(case_ids: Iterable[str], *, perturb_constraint: bool = False) -> list[CheckOutcome]:
    outcomes = []
    for cid in case_ids:
        case = build_case(cid)
        if perturb_constraint:
            if case.system.layout.r == 0:
                outcomes.append(CheckOutcome(f"{cid}: constraint perturbation", True, "no kinematic constraint; skipped"))
            else:
                case = perturbed_constraint_case(case)
        outcomes.append(_initial_residual(case))
        samples = random_states(build_case(cid), N_SAMPLES, seed=0)
        for label, fn in (
            ("ignorable-coordinate test", _definition1),
            ("kinetic-energy quadratic form", _quadratic_form),
            ("augmented-map identities", _augmented_map),
            ("reduced mass matrix", _reduced_mass),
        ):
            outcomes.append(_guarded(f"{cid}: {label}", fn, case, samples))
        if not perturb_constraint:
            outcomes.append(_guarded(f"{cid}: cross-method equivalence", _equivalence, case))
    return outcomes


def fd_order(steps=(0.2, 0.1, 0.05, 0.025)) -> float:
    """Observed convergence order of the finite-difference policy.

    Differentiates ``exp(sin q)`` at ``q = 0.7`` and fits the slope of
    log(error) against log(step).
    """

    def f(t, q):
        return np.array([np.exp(np.sin(q[0]))])

    q = np.array([0.7])
    exact = np.cos(0.7) * np.exp(np.sin(0.7))
    errs = [abs(float(matrix_function_partials(f, 0.0, q, step=h)[1][0][0]) - exact) for h in steps]
    slope = np.polyfit(np.log(steps), np.log(errs), 1)[0]
    return float(slope)
