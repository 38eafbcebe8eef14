"""
Error handling utilities for the sspb toolkit.
Defines the exception hierarchy and the phase error handler used by the harness.
"""

import json
import logging
import traceback
from dataclasses import dataclass, field
from datetime import datetime
from typing import Dict, Iterable, Optional


class SSPBError(Exception):
    """Base class of every error raised by the toolkit."""


class ShapeError(SSPBError, ValueError):
    """Tensor or image extents do not compose."""


class NumericError(SSPBError, ArithmeticError):
    """A NaN or infinite value appeared where finite values are required."""


class ParameterError(SSPBError, ValueError):
    """An operation parameter is outside its valid range."""


class UsageError(SSPBError):
    """An API or command was used in a way its contract forbids."""


class ConfigError(SSPBError, ValueError):
    """A configuration value is invalid or inconsistent."""


class DomainError(SSPBError, ValueError):
    """A metric received values outside its domain."""


class TransferError(SSPBError):
    """Encoder weights could not be transferred."""

    def __init__(self, message: str, offending: Iterable[str] = ()):
        self.offending = sorted(offending)
        if self.offending:
            message = f"{message}: {', '.join(self.offending)}"
        super().__init__(message)


class IngestionError(SSPBError):
    """A manifest row could not be ingested."""

    def __init__(self, message: str, row: Optional[int] = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class TrainingAbortedError(SSPBError):
    """Training stopped because the loss became non-finite."""

    def __init__(
        self,
        message: str,
        epoch: Optional[int] = None,
        batch: Optional[int] = None
    ):
        self.epoch = epoch
        self.batch = batch
        super().__init__(f"epoch {epoch}, batch {batch}: {message}")


@dataclass
class ErrorResponse:
    """Error response container."""
    error_type: str
    message: str
    timestamp: datetime
    trace: str
    context: Dict = field(default_factory=dict)
    recovery_action: Optional[str] = None

    def to_record(self) -> str:
        """Single machine-readable line for stderr."""
        return json.dumps(
            {'type': self.error_type, 'message': self.message},
            sort_keys=True
        )


class ErrorHandler:
    """
    Error handler for harness phases.

    Features:
    - Error categorization
    - Recovery hints
    - Detailed logging
    - Error tracking
    """

    def __init__(self):
        self.logger = logging.getLogger(__name__)
        self.error_counts: Dict[str, int] = {}

    def handle_phase_error(
        self,
        error: Exception,
        context: Optional[Dict] = None
    ) -> ErrorResponse:
        """
        Record a failed phase and build its response.

        Args:
            error: Encountered error
            context: Phase context (phase name, seed, cell)

        Returns:
            Error response
        """
        response = self.build_response(error, context)
        self._increment_error_count(response.error_type)

        self.logger.error(
            f"Phase error: {response.error_type} - {response.message}",
            extra={'context': response.context}
        )

        return response

    def build_response(
        self,
        error: BaseException,
        context: Optional[Dict] = None
    ) -> ErrorResponse:
        """Describe an error without recording or logging it."""
        error_type = type(error).__name__
        return ErrorResponse(
            error_type=error_type,
            message=str(error),
            timestamp=datetime.now(),
            trace=''.join(traceback.format_exception(
                type(error), error, error.__traceback__
            )),
            context=context or {},
            recovery_action=self._get_recovery_action(error_type)
        )

    def _increment_error_count(self, error_type: str):
        """Track error occurrences."""
        self.error_counts[error_type] = self.error_counts.get(error_type, 0) + 1

    @staticmethod
    def _get_recovery_action(error_type: str) -> Optional[str]:
        """Get appropriate recovery action for error type."""
        recovery_actions = {
            'ShapeError': 'Check image side against the encoder stage count',
            'NumericError': 'Inspect inputs for NaN or infinite values',
            'ParameterError': 'Validate operation parameters',
            'ConfigError': 'Fix the run configuration file',
            'TransferError': 'Use weights trained with the same encoder config',
            'IngestionError': 'Repair the offending manifest row',
            'TrainingAbortedError': 'Lower the learning rate or check preprocessing',
        }
        return recovery_actions.get(error_type)

    def get_error_statistics(self) -> Dict:
        """Get error occurrence statistics."""
        return {
            'total_errors': sum(self.error_counts.values()),
            'error_types': dict(sorted(self.error_counts.items())),
            'most_common': max(
                self.error_counts.items(),
                key=lambda x: x[1]
            )[0] if self.error_counts else None
        }
