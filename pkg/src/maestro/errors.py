"""Exception hierarchy shared across the package."""


class MaestroError(Exception):
    """Base class for all package errors."""


class ParameterError(MaestroError, ValueError):
    """An argument is outside its documented domain."""


class UsageError(MaestroError, RuntimeError):
    """An operation was invoked in a state that does not permit it."""


class ConvergenceError(MaestroError, RuntimeError):
    def __init__(self, message: str, exploitability: float):
        super().__init__(f"{message} (final exploitability {exploitability:.3e})")
        self.exploitability = exploitability


class CapacityError(MaestroError, RuntimeError):
    """A tabular computation exceeds its configured state bound."""


class NumericalError(MaestroError, ArithmeticError):
    """A loss or gradient became non-finite."""


class ParseError(MaestroError, ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class ConfigError(MaestroError, ValueError):
    """Invalid experiment configuration."""
