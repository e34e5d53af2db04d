"""
Error types shared by every CTPP feature.
Each error carries the exit code the command line reports for it.
"""

from pathlib import Path
from typing import Optional


class CtppError(Exception):
    """Base error: a detail message plus the process exit code."""

    exit_code: int = 2

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class ConfigError(CtppError):
    """Invalid or unknown configuration keys."""


class UsageError(CtppError):
    """A command was asked for something its inputs cannot provide."""


class DataFormatError(CtppError):
    """A data file line could not be parsed."""

    def __init__(self, detail: str, line_number: int):
        super().__init__(f"line {line_number}: {detail}")
        self.line_number = line_number


class DataValidationError(CtppError, ValueError):
    """Parsed data violates an event-sequence invariant."""


class SpecError(CtppError, ValueError):
    """Invalid sampler or model argument."""


class StationarityError(SpecError):
    """Hawkes branching ratio alpha/decay is not below one."""


class ShapeError(CtppError, ValueError):
    """Array shapes do not agree."""


class DomainError(CtppError, ValueError):
    """Value outside the domain of a density or kernel."""


class StateError(CtppError, RuntimeError):
    """Optimizer or model used in an invalid state."""


class EvaluationError(CtppError, ArithmeticError):
    """A loss or metric evaluated to a non-finite value."""


class GradCheckFailed(CtppError):
    """Analytic gradients disagree with finite differences."""

    exit_code = 1


class TrainingDiverged(CtppError):
    """Training produced a non-finite loss."""

    exit_code = 3

    def __init__(self, detail: str, checkpoint: Optional[Path] = None):
        super().__init__(detail)
        self.checkpoint = checkpoint


class EmptyRealization(SpecError):
    """A horizon-bounded sampler produced no events."""
