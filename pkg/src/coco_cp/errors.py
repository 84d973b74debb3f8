"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures onto its
documented exit statuses without a lookup table.
"""


class CocoError(Exception):
    exit_code = 2


class ConfigError(CocoError):
    exit_code = 1


class InvalidProgram(ConfigError):
    """Knowledge program parameters are inconsistent."""


class MissingInput(CocoError):
    """A method was asked for a set it has no way to build."""


class CapExceeded(CocoError):
    """An enumeration would exceed the configured cap."""

    exit_code = 3

    def __init__(self, what: str, size: int, cap: int):
        super().__init__(f"{what}: {size} elements exceeds enumeration cap {cap}")
        self.size = size
        self.cap = cap


class EmptyCalibration(CocoError):
    pass


class EmptyDataset(CocoError):
    pass


class InfeasiblePrior(CocoError):
    pass


class ParseError(CocoError):
    def __init__(self, path, line: int, msg: str):
        super().__init__(f"{path}:{line}: {msg}")
        self.line = line


class DimensionMismatch(CocoError):
    pass


class SupportViolation(CocoError):
    pass


class VerificationFailed(CocoError):
    exit_code = 4
