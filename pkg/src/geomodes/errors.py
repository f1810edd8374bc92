"""Exception hierarchy shared across the toolkit."""


class GeomodesError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(GeomodesError):
    """Malformed or schema-violating configuration (CLI exit code 2)."""


class NumericalError(GeomodesError):
    """Hard numerical failure: non-finite state, singular system, divergence
    (CLI exit code 3)."""


class MetricError(NumericalError):
    """Metric evaluation produced a non-symmetric or non-positive-definite
    matrix, or could not be inverted."""


class ConvergenceError(NumericalError):
    """An iterative solver (Newton inverse, root find, mode search) failed to
    converge within its iteration budget."""


class ChartDomainError(NumericalError):
    """A query point left the validated domain of a geodesic chart."""


class ToleranceError(GeomodesError):
    """A configured tolerance was breached (CLI exit code 4)."""


class EnergyDriftError(ToleranceError):
    """Relative energy drift of a simulation exceeded the configured bound."""


class CertificationError(ToleranceError):
    """A designed potential failed one of its certification checks."""
