"""Exception hierarchy shared by every layer of the package."""

from __future__ import annotations


class HydroVDCError(Exception):
    """Base class for all domain errors raised by hydrovdc."""


class StrokeLimit(HydroVDCError):
    """A piston position left the open interval (0, stroke)."""


class DegenerateTriangle(HydroVDCError):
    """Loop-closure triangle cannot be formed for the given lengths."""


class ClosureSingularity(HydroVDCError):
    """A loop-closure angle is too close to 0 or pi for the rate relations."""


class PressureBound(HydroVDCError):
    """A chamber pressure is at or outside (p_r, p_s)."""


class InvalidTopology(HydroVDCError):
    """The structure sequence does not match any frame-resolution case."""


class SingularSystem(HydroVDCError):
    """The internal-force oracle met a singular 2x2 system."""


class SingularMassMatrix(HydroVDCError):
    """Joint-space mass matrix is singular or not positive definite."""


class Unreachable(HydroVDCError):
    """Inverse kinematics target lies outside the reachable set."""


class ConfigError(HydroVDCError):
    """Base class for configuration problems."""


class ParseError(ConfigError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")


class ValidationError(ConfigError):
    """Carries every validation problem found, each tagged with its key path."""

    def __init__(self, problems: list[tuple[str, str]]):
        self.problems = list(problems)
        lines = [f"{path}: {msg}" for path, msg in self.problems]
        super().__init__("invalid configuration:\n  " + "\n  ".join(lines))
