"""Exception hierarchy shared by all coolopt modules."""

from __future__ import annotations


class CoolOptError(Exception):
    """Base class for every error raised by coolopt."""


class DomainError(CoolOptError, ValueError):
    """An argument lies outside the domain of a model function."""


class InfeasibleError(DomainError):
    """No operating point can satisfy the constraints."""


class ContractError(CoolOptError, ValueError):
    """Inputs are individually valid but inconsistent with each other."""


class DatasetError(CoolOptError):
    """A telemetry file could not be read or is structurally invalid."""


class ParseError(DatasetError):
    """Structural CSV problem, tagged with the 1-based line number."""

    def __init__(self, message: str, line_no: int):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no
