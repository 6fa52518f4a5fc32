"""Exception hierarchy shared by all modules."""


class CMCError(Exception):
    """Base class for every error raised by this package."""

    code = "cmc_error"


class DomainError(CMCError, ValueError):
    code = "domain"


class SingularMetricError(CMCError):
    code = "singular_metric"


class ShapeError(CMCError, ValueError):
    code = "shape"


class ConfigError(CMCError, ValueError):
    """Invalid metric or experiment configuration.

    ``field`` is a dotted path into the config document, e.g.
    ``perturbations[1].decay``.
    """

    code = "config"

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class DegenerateSurfaceError(CMCError):
    code = "degenerate_surface"


class ContainmentError(CMCError):
    code = "containment"


class NewtonDivergenceError(CMCError):
    code = "newton_divergence"


class SmallnessViolation(CMCError):
    code = "smallness_violation"


class GradientMismatchError(CMCError):
    code = "gradient_mismatch"


class NoCriticalPointError(CMCError):
    code = "no_critical_point"


class EigenFailure(CMCError):
    code = "eigen_failure"


class FoliationOrderViolation(CMCError):
    code = "foliation_order"

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class NotCmcError(CMCError):
    code = "not_cmc"


class MassZeroError(CMCError):
    code = "mass_zero"
