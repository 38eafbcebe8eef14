"""Evaluation metrics."""

from .metrics import (
    EvalBatch,
    SsimParams,
    SsimWindow,
    aad,
    accuracy_pct,
    mse,
    ssim,
    ssim_batch,
    std_abs_err,
)

__all__ = [
    'EvalBatch',
    'SsimParams',
    'SsimWindow',
    'aad',
    'accuracy_pct',
    'mse',
    'ssim',
    'ssim_batch',
    'std_abs_err',
]
