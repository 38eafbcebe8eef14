"""Shared utilities: errors, validation, configuration, helpers and monitoring."""

from .error_handler import (
    ErrorHandler,
    ErrorResponse,
    SSPBError,
    ShapeError,
    NumericError,
    ParameterError,
    UsageError,
    ConfigError,
    DomainError,
    TransferError,
    IngestionError,
    TrainingAbortedError,
)
from .validator import Validator
from .config import ConfigManager, StrictModel, parse_config
from .monitor import Monitor

__all__ = [
    'ErrorHandler',
    'ErrorResponse',
    'SSPBError',
    'ShapeError',
    'NumericError',
    'ParameterError',
    'UsageError',
    'ConfigError',
    'DomainError',
    'TransferError',
    'IngestionError',
    'TrainingAbortedError',
    'Validator',
    'ConfigManager',
    'StrictModel',
    'parse_config',
    'Monitor',
]
