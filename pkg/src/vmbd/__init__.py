"""Multibody equations of motion in quasi-velocities, with a reduced form
that eliminates conserved momenta of ignorable coordinates."""
from .bench import MethodReport, RunResult, run_method
from .cases import CASES, CaseStudy, build_boom_satellite, build_case, build_cart_pendulum, build_three_body_spacecraft
from .errors import (
    EmptySeries,
    GimbalProximity,
    InconsistentInitialState,
    NoIgnorableCoordinates,
    NonFiniteEvaluation,
    SingularAugmentedMatrix,
    SingularKKT,
    SingularMass,
    SingularProjection,
    SingularReducedMass,
    StepSizeUnderflow,
    VmbdError,
)
from .formulations import METHODS, Lagrange, Maggi, QuasiVelocityFormulation, make_formulation, method_card
from .ignorable import DynamicalConstraint, build_dynamical_constraint, verify_definition1
from .integrate import IntegratorSettings, Trajectory, integrate_adaptive, integrate_fixed, step_rk4
from .metrics import SeriesNorm, conservation_error_series, energy_error_series, series_norm
from .model import BodyKinematics, CoordinateLayout, ForceModel, KinematicConstraint, MultibodySystem
from .quasivel import QuasiVelocityDef, build_reduced_map

__version__ = "0.1.0"
