"""Training loop, validation split and early stopping."""

from .trainer import (
    ArrayDataset,
    EarlyStopDecision,
    EarlyStoppingConfig,
    LossKind,
    TrainConfig,
    TrainHistory,
    Trainer,
    early_stop_decision,
    split_train_val,
    train,
)

__all__ = [
    'ArrayDataset',
    'EarlyStopDecision',
    'EarlyStoppingConfig',
    'LossKind',
    'TrainConfig',
    'TrainHistory',
    'Trainer',
    'early_stop_decision',
    'split_train_val',
    'train',
]
