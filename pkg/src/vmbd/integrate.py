"""Explicit time integration.

``integrate_adaptive`` runs the Dormand-Prince 5(4) pair (local
extrapolation, FSAL) with a PI step-size controller and writes the solution
onto a uniform output grid through the pair's 4th-order continuous
extension. ``integrate_fixed`` is a classical RK4 baseline.

Both optionally carry an extra scalar state, the accumulated
non-conservative work ``w' = Q_nc . qdot``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import NonFiniteEvaluation, StepSizeUnderflow

Rhs = Callable[[float, np.ndarray], np.ndarray]

# Dormand & Prince (1980) tableau.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# 5th-order solution minus embedded 4th-order solution.
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# Continuous extension (Shampine): y(t + s h) = y + h * K' (_P @ [s, s^2, s^3, s^4]).
_P = np.array(
    [
        [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0
# PI controller exponents (Hairer, Norsett & Wanner II.4 for order 5).
_BETA = 0.04
_ALPHA = 1 / 5 - 0.75 * _BETA


@dataclass(frozen=True)
class IntegratorSettings:
    rtol: float = 1e-8
    atol: float = 1e-10
    sample_step: float = 0.01
    t_final: float = 50.0
    max_step: float = np.inf
    method: str = "adaptive"
    first_step: Optional[float] = None

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("rtol and atol must be positive")
        if not self.sample_step > 0:
            raise ValueError("sample_step must be positive")
        if not self.t_final > 0:
            raise ValueError("t_final must be positive")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")
        if self.method not in ("adaptive", "fixed"):
            raise ValueError(f"unknown integration method {self.method!r}")

    def replace(self, **changes) -> "IntegratorSettings":
        from dataclasses import replace

        return replace(self, **changes)


@dataclass
class Trajectory:
    """Solution sampled on a uniform grid.

    ``qdots`` holds the generalized velocities reconstructed at each sample
    (empty columns when no reconstruction was supplied) and ``work`` the
    accumulated non-conservative work.
    """

    times: np.ndarray
    states: np.ndarray
    qdots: np.ndarray
    work: np.ndarray
    stats: dict = field(default_factory=dict)


def sample_grid(t0: float, t_final: float, step: float) -> np.ndarray:
    n = int(round((t_final - t0) / step))
    if n < 1 or abs(t0 + n * step - t_final) > 1e-9 * max(1.0, abs(t_final)):
        raise ValueError(f"sample step {step} does not divide the interval [{t0}, {t_final}]")
    times = t0 + step * np.arange(n + 1)
    times[-1] = t_final
    return times


def _augment(rhs: Rhs, power: Optional[Callable[[float, np.ndarray], float]]):
    if power is None:
        return rhs

    def f(t, y):
        z = y[:-1]
        return np.append(rhs(t, z), power(t, z))

    return f


def _finite(v: np.ndarray, t: float) -> np.ndarray:
    if not np.all(np.isfinite(v)):
        raise NonFiniteEvaluation(f"right-hand side is not finite at t={t}")
    return v


def _error_norm(err, y_old, y_new, rtol, atol) -> float:
    scale = atol + rtol * np.maximum(np.abs(y_old), np.abs(y_new))
    return float(np.max(np.abs(err) / scale))


def _initial_step(f, t0, y0, f0, rtol, atol, t_span, max_step) -> float:
    """Starting step from the Hairer-Wanner heuristic."""
    scale = atol + rtol * np.abs(y0)
    d0 = np.max(np.abs(y0) / scale)
    d1 = np.max(np.abs(f0) / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, t_span, max_step)
    f1 = _finite(f(t0 + h0, y0 + h0 * f0), t0 + h0)
    d2 = np.max(np.abs(f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, t_span, max_step)


def _collect(times, states, qdot, power_on):
    ys = np.asarray(states)
    if power_on:
        zs, work = ys[:, :-1], ys[:, -1].copy()
    else:
        zs, work = ys, np.zeros(len(times))
    if qdot is None:
        qdots = np.zeros((len(times), 0))
    else:
        qdots = np.array([qdot(t, z) for t, z in zip(times, zs)])
    return zs, qdots, work


def integrate_adaptive(
    rhs: Rhs,
    z0,
    settings: IntegratorSettings,
    *,
    t0: float = 0.0,
    qdot: Optional[Callable[[float, np.ndarray], np.ndarray]] = None,
    power: Optional[Callable[[float, np.ndarray], float]] = None,
) -> Trajectory:
    """Integrate ``z' = rhs(t, z)`` from ``t0`` to ``settings.t_final``.

    Parameters
    ----------
    qdot
        Optional map from a state to generalized velocities, evaluated on
        the output grid.
    power
        Optional non-conservative power; its integral is carried as an
        extra state (included in the error control) and reported as ``work``.

    Raises
    ------
    StepSizeUnderflow
        If the controller needs a step below the floating-point resolution.
    """
    if settings.method == "fixed":
        return integrate_fixed(rhs, z0, settings, t0=t0, qdot=qdot, power=power)
    rtol, atol = settings.rtol, settings.atol
    grid = sample_grid(t0, settings.t_final, settings.sample_step)
    f = _augment(rhs, power)
    y = np.asarray(z0, dtype=float).copy()
    if power is not None:
        y = np.append(y, 0.0)
    tf = settings.t_final
    t = t0
    fy = _finite(np.asarray(f(t, y), dtype=float), t)
    n_rhs = 1
    if settings.first_step is not None:
        h = min(settings.first_step, settings.max_step)
    else:
        h = _initial_step(f, t, y, fy, rtol, atol, tf - t0, settings.max_step)
        n_rhs += 1

    out = [y.copy()]
    next_sample = 1
    K = np.empty((7, y.size))
    err_prev = 1e-4
    n_steps = n_rejected = 0
    while t < tf:
        h = min(h, settings.max_step)
        if t + h >= tf or t + 1.01 * h >= tf:
            h = tf - t
        if h <= 16 * np.finfo(float).eps * max(1.0, abs(t)):
            raise StepSizeUnderflow(f"step size underflow at t={t}")
        K[0] = fy
        for s in range(1, 6):
            K[s] = f(t + _C[s] * h, y + h * (_A[s] @ K[:s]))
        y_new = y + h * (_B[:6] @ K[:6])
        t_new = t + h if t + h < tf else tf
        K[6] = f(t_new, y_new)
        n_rhs += 6
        err = _error_norm(h * (_E @ K), y, y_new, rtol, atol)
        if not np.isfinite(err) or not np.all(np.isfinite(y_new)):
            n_rejected += 1
            h *= MIN_FACTOR
            continue
        if err <= 1.0:
            # Dense output onto the sample grid inside (t, t_new].
            while next_sample < grid.size and grid[next_sample] <= t_new + 1e-12 * max(1.0, abs(t_new)):
                theta = (grid[next_sample] - t) / h
                powers = np.array([theta, theta**2, theta**3, theta**4])
                out.append(y + h * (K.T @ (_P @ powers)))
                next_sample += 1
            if next_sample == grid.size:
                out[-1] = y_new.copy()
            factor = MAX_FACTOR if err == 0 else SAFETY * err ** (-_ALPHA) * err_prev**_BETA
            factor = min(MAX_FACTOR, max(MIN_FACTOR, factor))
            err_prev = max(err, 1e-4)
            t, y, fy = t_new, y_new, K[6].copy()
            n_steps += 1
            h *= factor
        else:
            n_rejected += 1
            h *= max(MIN_FACTOR, SAFETY * err ** (-_ALPHA))
    zs, qdots, work = _collect(grid, out, qdot, power is not None)
    return Trajectory(grid, zs, qdots, work, {"steps": n_steps, "rejected": n_rejected, "rhs_evals": n_rhs})


def step_rk4(rhs: Rhs, t: float, z, h: float) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step."""
    if not h > 0:
        raise ValueError("step must be positive")
    z = np.asarray(z, dtype=float)
    k1 = _finite(np.asarray(rhs(t, z), dtype=float), t)
    k2 = _finite(np.asarray(rhs(t + 0.5 * h, z + 0.5 * h * k1), dtype=float), t)
    k3 = _finite(np.asarray(rhs(t + 0.5 * h, z + 0.5 * h * k2), dtype=float), t)
    k4 = _finite(np.asarray(rhs(t + h, z + h * k3), dtype=float), t)
    return z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_fixed(
    rhs: Rhs,
    z0,
    settings: IntegratorSettings,
    *,
    t0: float = 0.0,
    qdot=None,
    power=None,
) -> Trajectory:
    """RK4 with a constant step: the largest step not above ``max_step``
    that divides each output interval."""
    grid = sample_grid(t0, settings.t_final, settings.sample_step)
    f = _augment(rhs, power)
    y = np.asarray(z0, dtype=float).copy()
    if power is not None:
        y = np.append(y, 0.0)
    out = [y.copy()]
    n_sub = max(1, int(np.ceil(settings.sample_step / settings.max_step - 1e-12))) if np.isfinite(settings.max_step) else 1
    for k in range(1, grid.size):
        ta, tb = grid[k - 1], grid[k]
        h = (tb - ta) / n_sub
        for j in range(n_sub):
            y = step_rk4(f, ta + j * h, y, h)
        out.append(y.copy())
    zs, qdots, work = _collect(grid, out, qdot, power is not None)
    return Trajectory(grid, zs, qdots, work, {"steps": n_sub * (grid.size - 1), "rejected": 0, "rhs_evals": 4 * n_sub * (grid.size - 1)})
