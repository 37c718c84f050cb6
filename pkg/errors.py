"""
Exception hierarchy for the sEMG gesture pipeline.

Every error carries an ``error_type`` string and a ``details`` message so the
command-line front end can render the same ``{"type": ..., "details": ...}``
body for any failure, and an ``exit_code`` telling it how to terminate.
"""

from typing import Any, Dict, Optional


class PipelineError(Exception):
    """Base class for all pipeline failures."""

    error_type = "PIPELINE_ERROR"
    exit_code = 1

    def __init__(self, details: str):
        super().__init__(details)
        self.details = details

    def to_detail(self) -> Dict[str, Any]:
        """Error body in the ``{'type', 'details'}`` shape."""
        return {"type": self.error_type, "details": self.details}


class ArgumentError(PipelineError, ValueError):
    error_type = "ARGUMENT_ERROR"


class DataError(PipelineError, ValueError):
    error_type = "DATA_ERROR"


class IngestionError(PipelineError):
    error_type = "INGESTION_ERROR"

    def __init__(self, details: str, path: Optional[str] = None):
        super().__init__(details)
        self.path = path


class FormatError(PipelineError, ValueError):
    error_type = "FORMAT_ERROR"


class ParseError(PipelineError, ValueError):
    error_type = "PARSE_ERROR"

    def __init__(self, details: str, row: Optional[int] = None):
        super().__init__(details)
        self.row = row


class DegenerateInputError(PipelineError, ValueError):
    """A signal window violates a feature's numeric precondition."""

    error_type = "DEGENERATE_INPUT"

    def __init__(self, details: str, channel: Optional[int] = None, feature: Optional[str] = None):
        super().__init__(details)
        self.channel = channel
        self.feature = feature

    def with_context(self, channel: int, feature: str) -> "DegenerateInputError":
        """Return a copy naming the channel and feature that failed."""
        return DegenerateInputError(
            f"channel ch{channel + 1}, feature {feature}: {self.details}",
            channel=channel,
            feature=feature,
        )


class DivergenceError(PipelineError, ArithmeticError):
    error_type = "DIVERGENCE"
    exit_code = 2

    def __init__(self, details: str, iteration: int, network: Optional[str] = None):
        super().__init__(details)
        self.iteration = iteration
        self.network = network
