"""Exception hierarchy shared by all modules."""


class FluctMIPTError(Exception):
    """Base class for package errors."""


class ConfigurationError(FluctMIPTError, ValueError):
    """Invalid parameter, site set or configuration value."""


class CapacityError(FluctMIPTError, ValueError):
    """Requested object exceeds a documented size cap."""


class InvalidGateError(FluctMIPTError, ValueError):
    """Gate is not unitary or mixes charge sectors."""


class NumericalError(FluctMIPTError, ArithmeticError):
    """Numerical invariant violated beyond roundoff (e.g. negative eigenvalue)."""


class DegenerateCollapseError(FluctMIPTError, ValueError):
    """Collapse cost needs at least two system sizes overlapping in x."""


class FitFailure(FluctMIPTError, RuntimeError):
    """Collapse cost is non-finite over the whole search box."""
