"""Ignorable coordinates: numerical admissibility check and the conserved-momentum constraint."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import NoIgnorableCoordinates, NonFiniteEvaluation
from .model import (
    MultibodySystem,
    constraint_matrices,
    derive_mass_decomposition,
    lagrangian,
    nonconservative_forces,
)
from .numdiff import gradient

DEFINITION_TOL = 1e-9


@dataclass(frozen=True)
class DynamicalConstraint:
    """Conservation of the ignorable momenta written as a velocity constraint.

    ``M' qdot + N' = 0`` with ``M'`` the last ``s`` rows of the mass matrix and
    ``N' = N_2 - G_I``; ``G_I`` is frozen at construction time.
    """

    system: MultibodySystem
    G_I: np.ndarray

    def __post_init__(self):
        G = np.array(self.G_I, dtype=float).reshape(self.system.layout.s)
        G.setflags(write=False)
        object.__setattr__(self, "G_I", G)

    @property
    def s(self) -> int:
        return self.system.layout.s

    def rows_from(self, M: np.ndarray, N: np.ndarray):
        """``(M', N')`` from an already assembled ``(M, N)``."""
        sl = self.system.layout.ignorable
        return M[sl, :], N[sl] - self.G_I

    def evaluate(self, t: float, q):
        M, N, _ = derive_mass_decomposition(self.system, t, q, check=False)
        return self.rows_from(M, N)

    def row_jac(self, t: float, q) -> np.ndarray:
        return self.evaluate(t, q)[0]

    def bias(self, t: float, q) -> np.ndarray:
        return self.evaluate(t, q)[1]


def initial_generalized_momentum(sys: MultibodySystem, t0: float, q0, qdot0) -> np.ndarray:
    """Momentum conjugate to the ignorable coordinates at the initial state."""
    s = sys.layout.s
    if s == 0:
        raise NoIgnorableCoordinates(f"system {sys.name!r} declares no ignorable coordinates")
    M, N, _ = derive_mass_decomposition(sys, t0, q0)
    sl = sys.layout.ignorable
    return M[sl, :] @ np.asarray(qdot0, dtype=float) + N[sl]


def build_dynamical_constraint(sys: MultibodySystem, t0: float, q0, qdot0) -> DynamicalConstraint:
    return DynamicalConstraint(sys, initial_generalized_momentum(sys, t0, q0, qdot0))


def dynamical_constraint_eval(dc: DynamicalConstraint, t: float, q, qdot) -> np.ndarray:
    qdot = np.asarray(qdot, dtype=float)
    if not (np.isfinite(q).all() and np.isfinite(qdot).all()):
        raise NonFiniteEvaluation("state is not finite")
    Mp, Np = dc.evaluate(t, q)
    return Mp @ qdot + Np


@dataclass(frozen=True)
class CandidateCheck:
    name: str
    index: int
    max_lagrangian_partial: float
    max_constraint_column: float
    max_nc_force: float
    lagrangian_scale: float
    constraint_scale: float
    force_scale: float
    tol: float = DEFINITION_TOL

    @property
    def lagrangian_independent(self) -> bool:
        return self.max_lagrangian_partial <= self.tol * (1.0 + self.lagrangian_scale)

    @property
    def constraint_column_zero(self) -> bool:
        return self.max_constraint_column <= self.tol * (1.0 + self.constraint_scale)

    @property
    def force_zero(self) -> bool:
        return self.max_nc_force <= self.tol * (1.0 + self.force_scale)

    @property
    def accepted(self) -> bool:
        return self.lagrangian_independent and self.constraint_column_zero and self.force_zero


@dataclass(frozen=True)
class Definition1Report:
    candidates: tuple[CandidateCheck, ...]
    declared: tuple[str, ...]

    @property
    def accepted(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.candidates if c.accepted)

    @property
    def rejected(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.candidates if not c.accepted)

    @property
    def declared_ok(self) -> bool:
        """Every coordinate the layout declares ignorable passed all three tests."""
        ok = set(self.accepted)
        return all(n in ok for n in self.declared)

    def __getitem__(self, name: str) -> CandidateCheck:
        for c in self.candidates:
            if c.name == name:
                return c
        raise KeyError(name)

    def summary(self) -> str:
        lines = []
        for c in self.candidates:
            verdict = "ignorable" if c.accepted else "not ignorable"
            lines.append(
                f"{c.name:>8s}: {verdict:13s} |dL/dq|={c.max_lagrangian_partial:.2e} "
                f"|a col|={c.max_constraint_column:.2e} |Q_nc|={c.max_nc_force:.2e}"
            )
        return "\n".join(lines)


def verify_definition1(
    sys: MultibodySystem,
    samples: Iterable[tuple[float, np.ndarray, np.ndarray]],
    candidates: Optional[Sequence[int]] = None,
    tol: float = DEFINITION_TOL,
) -> Definition1Report:
    """Check the three ignorability conditions for each candidate coordinate.

    A coordinate is accepted when, over all samples, the Lagrangian does not
    depend on it, its constraint-Jacobian column vanishes and its
    non-conservative generalized force vanishes. Candidates default to all
    coordinates, so that the accepted set can be compared with the layout.
    """
    samples = [(float(t), np.asarray(q, dtype=float), np.asarray(qd, dtype=float)) for t, q, qd in samples]
    if not samples:
        raise ValueError("at least one sample state is required")
    layout = sys.layout
    if candidates is None:
        candidates = range(layout.m)
    candidates = list(candidates)

    n = len(candidates)
    dL = np.zeros(n)
    acol = np.zeros(n)
    fcol = np.zeros(n)
    L_scale = a_scale = f_scale = 0.0
    for t, q, qd in samples:
        if not (np.isfinite(q).all() and np.isfinite(qd).all()):
            raise NonFiniteEvaluation("sample state is not finite")
        L_scale = max(L_scale, abs(lagrangian(sys, t, q, qd)))
        grad = gradient(lambda tt, qq: lagrangian(sys, tt, qq, qd), t, q)
        a, _ = constraint_matrices(sys, t, q)
        Q = nonconservative_forces(sys, t, q, qd)
        if a.size:
            a_scale = max(a_scale, float(np.abs(a).max()))
        f_scale = max(f_scale, float(np.abs(Q).max(initial=0.0)))
        for k, j in enumerate(candidates):
            dL[k] = max(dL[k], abs(grad[j]))
            if a.size:
                acol[k] = max(acol[k], float(np.abs(a[:, j]).max()))
            fcol[k] = max(fcol[k], abs(Q[j]))
    checks = tuple(
        CandidateCheck(layout.names[j], j, dL[k], acol[k], fcol[k], L_scale, a_scale, f_scale, tol)
        for k, j in enumerate(candidates)
    )
    return Definition1Report(checks, layout.ignorable_names)
