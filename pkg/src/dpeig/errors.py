class DpeigError(Exception):
    """Base class for all package errors."""


class MeshError(DpeigError, ValueError):
    """Bad mesh construction arguments."""


class MeshMismatchError(DpeigError, ValueError):
    """Inputs are sampled on different meshes (or have inconsistent lengths)."""


class ExpressionError(DpeigError, ValueError):
    """Malformed exponent expression; ``position`` is the 0-based column."""

    def __init__(self, message, position=None, expr=None):
        self.position = position
        self.expr = expr
        if position is not None and expr is not None:
            message = f"{message} at position {position}\n  {expr}\n  {' ' * position}^"
        super().__init__(message)


class ExponentDomainError(DpeigError, ValueError):
    """An exponent field takes a value <= 1 or a non-finite value."""


class ValidationError(DpeigError, ValueError):
    """Exponent triple violates the structural assumptions."""


class ConvergenceError(DpeigError, RuntimeError):
    """Bracketing or root finding exceeded its iteration cap."""


class ConfigError(DpeigError, ValueError):
    """Invalid run configuration."""
