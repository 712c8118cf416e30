"""Exception types shared across the package."""


class SktLabError(Exception):
    """Base class for package errors."""


class ConfigError(SktLabError):
    """Malformed or invalid run configuration.

    Carries the location of the first offending entry so the CLI can report
    it and exit with status 2.
    """

    def __init__(self, message, section=None, key=None, line=None):
        self.section = section
        self.key = key
        self.line = line
        where = ""
        if section is not None:
            where = f"[{section}]"
            if key is not None:
                where += f" {key}"
            where += ": "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


class BracketConstructionError(SktLabError):
    """No admissible bracket exists; names the violated inequality."""

    def __init__(self, message, inequality=None):
        self.inequality = inequality
        super().__init__(message)


class OrderingViolationError(SktLabError):
    """The monotone iterate chain broke beyond tolerance."""

    def __init__(self, message, worst_violation=None, iterate=None):
        self.worst_violation = worst_violation
        self.iterate = iterate
        super().__init__(message)


class ConvergenceError(SktLabError):
    """An iterative solve failed to reach its tolerance."""

    def __init__(self, message, gap=None):
        self.gap = gap
        super().__init__(message)


class NumericalError(SktLabError):
    """A numerical routine could not produce a trustworthy result."""

    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message)
