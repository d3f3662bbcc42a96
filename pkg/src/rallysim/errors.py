"""Exception types shared across the kernel."""


class RallysimError(Exception):
    """Base class for all kernel errors."""


class NoCrossing(RallysimError):
    """Ball never reaches the requested plane before dropping out."""


class NoLanding(RallysimError):
    """Trajectory never descends to the requested plane."""


class Infeasible(RallysimError):
    """No ballistic solution satisfies the net-clearance constraint."""


class BudgetExceeded(RallysimError):
    """Required paddle speed exceeds the allowed budget."""


class NotApproaching(RallysimError):
    """Ball is not moving toward the paddle face."""


class InsufficientData(RallysimError):
    """Not enough samples for a calibration fit."""


class Degenerate(RallysimError):
    """Samples coincide; the fit is underdetermined."""


class UpdateAfterTerminal(RallysimError):
    """Rally state machine updated after the outcome was set."""


class MissingWeight(RallysimError):
    """A reward term has no matching weight."""


class DimensionMismatch(RallysimError):
    """Inconsistent matrix/vector dimensions."""


class SingleClass(RallysimError):
    """Classifier training data contains a single label."""


class NonConverged(RallysimError):
    """Iterative solver did not converge within its budget."""


class RejectionExhausted(RallysimError):
    """Rejection sampling gave up; parameter ranges are inconsistent."""


class ConfigError(RallysimError):
    """Invalid configuration value."""
