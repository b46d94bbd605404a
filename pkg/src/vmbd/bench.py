"""Run case/method pairs and export their series and reports."""
from __future__ import annotations

import json
import os
import tempfile
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .cases import CaseStudy
from .formulations import METHODS, QuasiVelocityFormulation, has_work_channel, make_formulation, method_card
from .ignorable import DynamicalConstraint, build_dynamical_constraint
from .integrate import IntegratorSettings, Trajectory, integrate_adaptive
from .metrics import SeriesNorm, conservation_error_series, energy_error_series, series_norm

NORM_KEYS = ("energy_drift", "kinematic_residual", "dynamical_residual", "momentum_drift")

_NORM_SCHEMA = {
    "type": "object",
    "properties": {k: {"type": "number", "minimum": 0} for k in ("max_abs", "rms", "rel_max_abs", "rel_rms")},
    "required": ["max_abs", "rms", "rel_max_abs", "rel_rms"],
    "additionalProperties": False,
}

REPORT_SCHEMA = {
    "type": "object",
    "properties": {
        "case": {"type": "string"},
        "method": {"enum": list(METHODS)},
        "n_states": {"type": "integer", "minimum": 1},
        "n_equations": {"type": "integer", "minimum": 0},
        "wall_seconds": {"type": "number", "minimum": 0},
        "norms": {
            "type": "object",
            "properties": {k: _NORM_SCHEMA for k in NORM_KEYS},
            "required": list(NORM_KEYS),
            "additionalProperties": False,
        },
    },
    "required": ["case", "method", "n_states", "n_equations", "wall_seconds", "norms"],
    "additionalProperties": False,
}


@dataclass(frozen=True)
class MethodReport:
    case: str
    method: str
    n_states: int
    n_equations: int
    wall_seconds: float
    norms: dict

    def to_dict(self) -> dict:
        return {
            "case": self.case,
            "method": self.method,
            "n_states": self.n_states,
            "n_equations": self.n_equations,
            "wall_seconds": self.wall_seconds,
            "norms": {k: self.norms[k].to_dict() for k in NORM_KEYS},
        }


@dataclass
class RunResult:
    case: CaseStudy
    method: str
    trajectory: Trajectory
    report: MethodReport
    columns: dict

    def csv_header(self) -> list[str]:
        return list(self.columns)

    def table(self) -> np.ndarray:
        return np.column_stack(list(self.columns.values()))


def dynamical_constraint_for(case: CaseStudy) -> Optional[DynamicalConstraint]:
    if case.system.layout.s == 0:
        return None
    return build_dynamical_constraint(case.system, case.t0, case.q0, case.qdot0)


def run_method(case: CaseStudy, method: str, settings: Optional[IntegratorSettings] = None) -> RunResult:
    """Integrate ``case`` with ``method`` and evaluate all diagnostics.

    The dynamical-constraint residual is always measured against the
    momenta of the case's initial state, whichever formulation ran.
    """
    settings = case.settings if settings is None else settings
    sys = case.system
    dc = dynamical_constraint_for(case)
    form = make_formulation(method, sys, case.qv_reduced, case.qv_full, dc)
    z0 = form.initial_state(case.t0, case.q0, case.qdot0)

    start = time.perf_counter()
    traj = integrate_adaptive(
        form.rhs, z0, settings, t0=case.t0, qdot=form.qdot, power=form.power if has_work_channel(sys) else None
    )
    wall = time.perf_counter() - start

    energy = energy_error_series(sys, traj)
    cons = conservation_error_series(sys, dc, traj, case.momentum_direction)
    n_states, n_equations = method_card(method, sys)
    norms = {
        "energy_drift": series_norm(energy.drift, reference=energy.initial),
        "kinematic_residual": series_norm(cons.kinematic, reference=1.0),
        "dynamical_residual": series_norm(cons.dynamical, reference=1.0),
        "momentum_drift": series_norm(cons.momentum_drift, reference=cons.momentum[0]),
    }
    report = MethodReport(case.id, method, n_states, n_equations, wall, norms)

    lay = sys.layout
    m = lay.m
    cols = {"t": traj.times}
    for j in range(m):
        cols[f"q{j + 1}"] = traj.states[:, j]
    for j in range(m):
        cols[f"qd{j + 1}"] = traj.qdots[:, j]
    if isinstance(form, QuasiVelocityFormulation):
        for j in range(form.k):
            cols[f"u{j + 1}"] = traj.states[:, m + j]
    cols["energy_drift"] = energy.drift
    if lay.r > 0:
        cols["kin_residual"] = cons.kinematic
    if lay.s > 0:
        cols["dyn_residual"] = cons.dynamical
    cols["momentum_drift"] = cons.momentum_drift
    return RunResult(case, method, traj, report, cols)


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_csv(result: RunResult) -> str:
    lines = [",".join(result.csv_header())]
    for row in result.table():
        lines.append(",".join("%.17g" % v for v in row))
    return "\n".join(lines) + "\n"


def write_csv(result: RunResult, path: str) -> None:
    _atomic_write(path, format_csv(result))


def write_json(obj, path: str) -> None:
    _atomic_write(path, json.dumps(obj, indent=2, sort_keys=False) + "\n")


def report_from_dict(d: dict) -> MethodReport:
    norms = {k: SeriesNorm(**d["norms"][k]) for k in NORM_KEYS}
    return MethodReport(d["case"], d["method"], d["n_states"], d["n_equations"], d["wall_seconds"], norms)
