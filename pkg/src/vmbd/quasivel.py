"""Quasi-velocity maps.

The chosen quasi-velocities ``u = Y qdot + Z`` are stacked with the
dynamical rows ``M' qdot + N' = 0`` and the kinematic rows ``a qdot + b = 0``
into one square system. Solving it gives ``qdot = W u + X``, so every
reconstructed generalized velocity satisfies both constraint families by
construction. With no dynamical rows this is the ordinary map used by Kane's
and Volterra's equations.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import LinAlgWarning, lapack, lu_factor, lu_solve

from .errors import NonFiniteEvaluation, SingularAugmentedMatrix
from .ignorable import DynamicalConstraint
from .model import MultibodySystem, constraint_matrices, derive_mass_decomposition

COND_LIMIT = 1e12


@dataclass(frozen=True)
class QuasiVelocityDef:
    """User choice of quasi-velocities ``u = jac(t, q) qdot + bias(t, q)``."""

    jac: Callable[[float, np.ndarray], np.ndarray]
    bias: Optional[Callable[[float, np.ndarray], np.ndarray]] = None
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))

    def evaluate(self, t: float, q, m: int):
        Y = np.asarray(self.jac(t, q), dtype=float).reshape(-1, m)
        if self.bias is None:
            Z = np.zeros(Y.shape[0])
        else:
            Z = np.asarray(self.bias(t, q), dtype=float).reshape(Y.shape[0])
        if not np.isfinite(Y.sum() + Z.sum()):
            raise NonFiniteEvaluation("quasi-velocity Jacobian or bias is not finite")
        return Y, Z


@dataclass(frozen=True)
class ReducedMap:
    """``qdot = W u + X`` at one ``(t, q)``."""

    W: np.ndarray
    X: np.ndarray
    condition_number: float


def lu_with_condition(A: np.ndarray):
    """Pivoted LU of ``A`` plus a 1-norm condition estimate (inf if singular)."""
    with warnings.catch_warnings():
        # Exact singularity is reported through the returned condition number.
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(A, check_finite=False)
    if np.any(np.diag(lu) == 0.0):
        return (lu, piv), np.inf
    anorm = float(np.abs(A).sum(axis=0).max())
    rcond, info = lapack.dgecon(lu, anorm, norm="1")
    cond = np.inf if rcond == 0.0 or info != 0 else 1.0 / rcond
    return (lu, piv), cond


def solve_augmented(Y, Z, Mp, Np, a, b, *, check_condition: bool = True) -> ReducedMap:
    """Solve ``[Y; M'; a] [W X] = [[I, -Z]; [0, -N']; [0, -b]]``.

    ``check_condition=False`` skips the condition estimate (reported as nan)
    and only rejects exactly singular matrices.
    """
    return solve_stacked(
        np.concatenate((Y, Mp, a)), np.concatenate((Z, Np, b)), Y.shape[0], check_condition=check_condition
    )


def solve_stacked(A, c, k: int, *, check_condition: bool = True) -> ReducedMap:
    """Solve ``A [W X] = [[I_k, -c_1]; [0, -c_2]]`` for an already stacked
    square ``A`` whose first ``k`` rows define the quasi-velocities."""
    n, m = A.shape
    if n != m:
        raise SingularAugmentedMatrix(
            f"augmented matrix is {n}x{m}; need (p - s) quasi-velocities + s + r rows = m"
        )
    rhs = np.zeros((m, k + 1))
    rhs[np.arange(k), np.arange(k)] = 1.0
    rhs[:, k] = -c
    if not check_condition:
        try:
            sol = np.linalg.solve(A, rhs)
        except np.linalg.LinAlgError:
            raise SingularAugmentedMatrix("augmented quasi-velocity matrix is singular") from None
        return ReducedMap(sol[:, :k], sol[:, k], np.nan)
    factor, cond = lu_with_condition(A)
    if not cond <= COND_LIMIT:
        raise SingularAugmentedMatrix(
            f"augmented quasi-velocity matrix is singular or ill-conditioned (cond={cond:.3e})"
        )
    sol = lu_solve(factor, rhs, check_finite=False)
    return ReducedMap(sol[:, :k], sol[:, k], cond)


def build_reduced_map(
    sys: MultibodySystem,
    qv: QuasiVelocityDef,
    dc: Optional[DynamicalConstraint],
    t: float,
    q,
) -> ReducedMap:
    """Velocity map for quasi-velocities ``qv`` under all constraints.

    ``dc=None`` omits the dynamical rows (the standard, non-reduced map).
    """
    q = np.asarray(q, dtype=float)
    m = sys.layout.m
    Y, Z = qv.evaluate(t, q, m)
    a, b = constraint_matrices(sys, t, q)
    if dc is None:
        Mp, Np = np.zeros((0, m)), np.zeros(0)
    else:
        M, N, _ = derive_mass_decomposition(sys, t, q, check=False)
        Mp, Np = dc.rows_from(M, N)
    return solve_augmented(Y, Z, Mp, Np, a, b)


def reconstruct_qdot(rmap: ReducedMap, u) -> np.ndarray:
    u = np.asarray(u, dtype=float).reshape(rmap.W.shape[1])
    if not np.isfinite(u).all():
        raise NonFiniteEvaluation("quasi-velocities are not finite")
    return rmap.W @ u + rmap.X


def quasi_velocities(qv: QuasiVelocityDef, sys: MultibodySystem, t: float, q, qdot) -> np.ndarray:
    Y, Z = qv.evaluate(t, np.asarray(q, dtype=float), sys.layout.m)
    return Y @ np.asarray(qdot, dtype=float) + Z
