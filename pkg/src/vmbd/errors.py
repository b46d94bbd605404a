"""Exception hierarchy shared by every module of the package."""


class VmbdError(Exception):
    """Base class for all modelling and simulation errors."""


class NonFiniteEvaluation(VmbdError):
    pass


class SingularMass(VmbdError):
    pass


class NoIgnorableCoordinates(VmbdError):
    pass


class SingularAugmentedMatrix(VmbdError):
    pass


class SingularReducedMass(VmbdError):
    pass


class SingularKKT(VmbdError):
    pass


class SingularProjection(VmbdError):
    pass


class InconsistentInitialState(VmbdError):
    pass


class StepSizeUnderflow(VmbdError):
    pass


class EmptySeries(VmbdError):
    pass


class GimbalProximity(VmbdError):
    """Euler-angle kinematics evaluated too close to the pitch singularity."""
