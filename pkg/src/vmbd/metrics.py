"""Conservation and drift diagnostics over sampled trajectories."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .errors import EmptySeries
from .ignorable import DynamicalConstraint
from .integrate import Trajectory
from .model import (
    MultibodySystem,
    derive_mass_decomposition,
    kinematic_constraint_eval,
    kinetic_energy,
    linear_momentum,
    potential_energy,
)

ZERO_SCALE = 1e-12


@dataclass(frozen=True)
class SeriesNorm:
    """Max-abs and RMS of a series, plus both divided by a reference magnitude."""

    max_abs: float
    rms: float
    rel_max_abs: float
    rel_rms: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class EnergySeries:
    energy: np.ndarray
    drift: np.ndarray
    percent: Optional[np.ndarray]

    @property
    def initial(self) -> float:
        return float(self.energy[0])


@dataclass(frozen=True)
class ConservationSeries:
    kinematic: np.ndarray
    dynamical: np.ndarray
    momentum: np.ndarray
    momentum_drift: np.ndarray


def _samples(sys: MultibodySystem, traj: Trajectory):
    m = sys.layout.m
    if traj.qdots.shape[1] != m:
        raise ValueError("trajectory carries no reconstructed generalized velocities")
    return zip(traj.times, traj.states[:, :m], traj.qdots)


def energy_error_series(sys: MultibodySystem, traj: Trajectory) -> EnergySeries:
    """``e = T + V - work`` at each sample, its drift from ``e(0)`` and the
    drift in percent of ``|e(0)|`` (``None`` when ``e(0)`` is essentially zero)."""
    e = np.array([kinetic_energy(sys, t, q, qd) + potential_energy(sys, t, q) for t, q, qd in _samples(sys, traj)])
    e = e - traj.work
    drift = e - e[0]
    percent = 100.0 * drift / abs(e[0]) if abs(e[0]) > ZERO_SCALE else None
    return EnergySeries(e, drift, percent)


def conservation_error_series(
    sys: MultibodySystem,
    dc: Optional[DynamicalConstraint],
    traj: Trajectory,
    direction=(1.0, 0.0, 0.0),
) -> ConservationSeries:
    """Constraint residual norms and linear momentum along ``direction``.

    ``dc=None`` (no ignorable coordinates) yields an all-zero dynamical series.
    """
    direction = np.asarray(direction, dtype=float)
    if direction.shape != (3,) or abs(np.linalg.norm(direction) - 1.0) > 1e-12:
        raise ValueError("momentum direction must be a unit 3-vector")
    kin, dyn, mom = [], [], []
    for t, q, qd in _samples(sys, traj):
        kin.append(float(np.linalg.norm(kinematic_constraint_eval(sys, t, q, qd))))
        if dc is None:
            dyn.append(0.0)
        else:
            M, N, _ = derive_mass_decomposition(sys, t, q, check=False)
            Mp, Np = dc.rows_from(M, N)
            dyn.append(float(np.linalg.norm(Mp @ qd + Np)))
        mom.append(float(linear_momentum(sys, t, q, qd) @ direction))
    mom = np.array(mom)
    return ConservationSeries(np.array(kin), np.array(dyn), mom, mom - mom[0])


def series_norm(series, reference: Optional[float] = None) -> SeriesNorm:
    """Norms of ``series``; relative values divide by ``|reference|``, which
    defaults to the magnitude of the first sample (1 when below 1e-12)."""
    x = np.asarray(series, dtype=float).ravel()
    if x.size == 0:
        raise EmptySeries("cannot take the norm of an empty series")
    max_abs = float(np.max(np.abs(x)))
    rms = float(np.sqrt(np.mean(x * x)))
    ref = abs(float(x[0] if reference is None else reference))
    if ref < ZERO_SCALE:
        ref = 1.0
    return SeriesNorm(max_abs, rms, max_abs / ref, rms / ref)
