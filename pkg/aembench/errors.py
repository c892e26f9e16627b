"""Error types shared across the benchmark.

Every error carries the process exit code the CLI should return for it:
2 for configuration problems, 3 for numeric failures, 4 for missing or
malformed artifacts.
"""

from __future__ import annotations

from typing import Optional, Sequence, Tuple


class BenchError(Exception):
    """Base class for all benchmark errors."""

    exit_code: int = 1


class ConfigError(BenchError):
    exit_code = 2


class NumericError(BenchError):
    exit_code = 3


class TrainingError(NumericError):
    """Divergent loss or an invalid training sequence."""


class ConvergenceError(NumericError):
    """A series or iteration did not converge."""


class MetricError(NumericError):
    """Metric inputs outside the metric's domain (zero denominators, etc.)."""


class MissingArtifactError(BenchError):
    exit_code = 4


class CheckpointError(MissingArtifactError):
    """Malformed IBCHK file or checkpoint/task mismatch."""


class ReportError(MissingArtifactError):
    """Evaluation reports that cannot be merged (conflicting grids or duplicates)."""


class DomainError(BenchError, ValueError):
    """A design vector outside its task bounds."""

    exit_code = 3


class ShapeError(BenchError, ValueError):
    """Incompatible shapes passed to a tensor operation."""

    exit_code = 3

    def __init__(self, op: str, shapes: Sequence[Optional[Tuple[int, ...]]], detail: str = ""):
        self.op = op
        # absent operands, such as a missing condition, are dropped
        self.shapes = [tuple(s) for s in shapes if s is not None]
        msg = f"{op}: incompatible shapes {self.shapes}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)
