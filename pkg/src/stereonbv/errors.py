"""Exception types raised across the package."""


class StereoNbvError(Exception):
    """Base class for all package errors."""


class NonPositiveDepth(StereoNbvError, ValueError):
    """A point lies on or behind the camera plane."""


class NonPositiveDisparity(StereoNbvError, ValueError):
    """Disparity x_L - x_R is zero, negative or below the configured minimum."""


class NotARotation(StereoNbvError, ValueError):
    """A matrix expected to be in SO(3) is not orthonormal."""


class NonPositiveDt(StereoNbvError, ValueError):
    pass


class SingularInnovation(StereoNbvError, ArithmeticError):
    """The KF innovation matrix is numerically singular."""


class SingularInput(StereoNbvError, ArithmeticError):
    pass


class SingularCovariance(StereoNbvError, ArithmeticError):
    pass


class EmptyTargetSet(StereoNbvError, ValueError):
    pass


class DegenerateGoal(StereoNbvError, ValueError):
    """The objective target coincides with the goal position."""


class OutOfFov(StereoNbvError, ValueError):
    """A target left the stereo field of view (some barrier is non-positive)."""


class StepDiverged(StereoNbvError, RuntimeError):
    """The flow integrator could not find a step that decreases the potential."""


class ZeroDisparity(StereoNbvError, ValueError):
    pass


class RankDeficient(StereoNbvError, ArithmeticError):
    pass


class InitialPoseOutOfFov(StereoNbvError, ValueError):
    pass
