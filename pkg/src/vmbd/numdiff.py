"""Finite-difference derivatives of matrix-valued maps ``f(t, q)``.

Every derivative in the package uses central differences with one level of
Richardson extrapolation (steps ``h`` and ``h/2``), giving O(h**4) truncation
error. Stand-alone derivatives use ``h = cbrt(eps) * max(1, |x|)``. The
equations of motion use the larger absolute step ``DYNAMICS_STEP = eps**(1/5)``,
which balances the O(h**4) truncation of the extrapolated formula against
roundoff; with ``cbrt(eps)`` the roundoff of large momenta leaks into the
accelerations as noise that the step-size controller has to chase.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import NonFiniteEvaluation

STEP = float(np.finfo(float).eps) ** (1.0 / 3.0)
DYNAMICS_STEP = float(np.finfo(float).eps) ** (1.0 / 5.0)


def _checked(value) -> np.ndarray:
    out = np.asarray(value, dtype=float)
    if not np.isfinite(out.sum()):
        raise NonFiniteEvaluation("finite-difference probe returned non-finite values")
    return out


def _richardson(probe: Callable[[float], np.ndarray], h: float, levels: int = 1) -> np.ndarray:
    """Richardson-extrapolated central difference of ``s -> probe(s)`` at 0.

    Uses steps ``h, h/2, ..., h/2**levels`` and returns an estimate with
    O(h**(2 * levels + 2)) truncation error. ``h`` must be exactly
    representable as an offset (callers pass steps that were rounded through
    the evaluation point).
    """
    table = []
    for j in range(levels + 1):
        hj = h / 2**j
        table.append((_checked(probe(hj)) - _checked(probe(-hj))) / (2.0 * hj))
    for k in range(1, levels + 1):
        w = 4.0**k
        table = [(w * table[j + 1] - table[j]) / (w - 1.0) for j in range(len(table) - 1)]
    return table[0]


def _exact_step(x: float, h: float) -> float:
    return (x + h) - x


def _partials_q(f, t: float, q: np.ndarray, step: float, relative: bool = True, levels: int = 1) -> list[np.ndarray]:
    out = []
    for j in range(q.size):
        hj = _exact_step(q[j], step * max(1.0, abs(q[j])) if relative else step)

        def probe(s, j=j):
            qp = q.copy()
            qp[j] += s
            return f(t, qp)

        out.append(_richardson(probe, hj, levels))
    return out


def matrix_function_partials(f, t: float, q, *, step: float = STEP):
    """Partial derivatives of ``f(t, q)`` with respect to time and each coordinate.

    Returns
    -------
    dfdt : ndarray
        Same shape as ``f(t, q)``.
    dfdq : list of ndarray
        ``dfdq[j]`` is the partial with respect to ``q[j]``.
    """
    q = np.asarray(q, dtype=float)
    ht = _exact_step(t, step * max(1.0, abs(t)))
    dfdt = _richardson(lambda s: f(t + s, q), ht)
    return dfdt, _partials_q(f, t, q, step)


def gradient(f, t: float, q, *, step: float = STEP, relative: bool = True, levels: int = 1) -> np.ndarray:
    """Gradient of a scalar map ``f(t, q)`` with respect to ``q``.

    ``relative=False`` uses the absolute step ``step`` for every coordinate;
    ``levels`` sets the number of extrapolation levels.
    """
    q = np.asarray(q, dtype=float)
    return np.array([float(np.squeeze(d)) for d in _partials_q(f, t, q, step, relative, levels)])


def total_derivative(f, t: float, q, qdot, *, step: float = DYNAMICS_STEP, levels: int = 1) -> np.ndarray:
    """Rate of change of ``f(t, q)`` along the motion ``(1, qdot)``.

    Equal to ``df/dt + sum_j df/dq_j * qdot_j`` but costs four evaluations of
    ``f`` regardless of the number of coordinates. The time step is chosen so
    that no coordinate moves by more than ``step``.
    """
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    speed = max(1.0, float(np.max(np.abs(qdot), initial=0.0)))
    h = _exact_step(t, step / speed)
    return _richardson(lambda s: f(t + s, q + s * qdot), h, levels)
