"""Exception types shared across the package."""


class U1BetheError(Exception):
    """Base class for all package errors."""


class UnknownGridPoint(U1BetheError):
    """Table model was evaluated at a (lambda, mu) pair it does not store."""


class ParameterDomain(U1BetheError):
    """Weight evaluation requested at a pole / degenerate parameter point."""


class Singularity(U1BetheError):
    """A denominator or pivot vanished at the evaluation point."""


class IndexOutOfRange(U1BetheError):
    """An operator or amplitude index lies outside its admissible window."""


class NoConvergence(U1BetheError):
    """Newton iteration failed to converge; carries the best residual seen."""

    def __init__(self, message, best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual


class SingularJacobian(U1BetheError):
    """The finite-difference Jacobian was numerically singular."""


class DimensionTooLarge(U1BetheError):
    """Dense operation requested beyond the dense-representation limit."""


class EmptySector(U1BetheError):
    """Requested particle number has no states on this chain."""


class DegenerateParameters(U1BetheError):
    """Too many singular samples were skipped while checking an identity."""


class InvalidOption(U1BetheError):
    """A command-line or config option value is not usable."""


class ConfigError(U1BetheError):
    """Config file could not be parsed; carries the offending line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
