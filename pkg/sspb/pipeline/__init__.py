"""Experiment harness: run configuration, stage DAG, matrix runner and reports."""

from .run_config import DataSource, InitKind, Regime, RunConfig
from .stages import (
    PipelineStage,
    PipelineStageError,
    StageExecutor,
    StageManager,
    StageRun,
    StageSkippedError,
)
from .report import CellStatus, MetricsEntry, ReportEncoder, RunReport, Table1Cell
from .experiment_pipeline import (
    CellOutcome,
    DataSplit,
    ExperimentPipeline,
    HeldOutSet,
    PretextEvaluation,
    PretextOutcome,
    worker_limit,
)

__all__ = [
    'DataSource',
    'InitKind',
    'Regime',
    'RunConfig',
    'PipelineStage',
    'PipelineStageError',
    'StageExecutor',
    'StageManager',
    'StageRun',
    'StageSkippedError',
    'CellStatus',
    'MetricsEntry',
    'ReportEncoder',
    'RunReport',
    'Table1Cell',
    'CellOutcome',
    'DataSplit',
    'ExperimentPipeline',
    'HeldOutSet',
    'PretextEvaluation',
    'PretextOutcome',
    'worker_limit',
]
