"""
Evaluation metrics for pretext models and the classifier.

Scalar metrics take values in [0, 1] (rotation labels, class probabilities);
image metrics compare canonical RGB images in [0, 255] pixel units.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import Field, model_validator
from scipy.ndimage import gaussian_filter

from ..processor.imaging import ChannelOrder, Image
from ..utils.config import StrictModel
from ..utils.error_handler import DomainError, ShapeError, UsageError

logger = logging.getLogger(__name__)

DEGREES = 360.0

Value = Union[float, Image]


class SsimWindow(str, Enum):
    GLOBAL = 'global'
    GAUSSIAN = 'gaussian'


class SsimParams(StrictModel):
    """
    SSIM constants and window.

    The global window applies the SSIM formula once to whole-channel
    statistics; the gaussian window averages the local SSIM map.
    """
    k1: float = Field(0.01, gt=0)
    k2: float = Field(0.03, gt=0)
    dynamic_range: float = Field(255.0, gt=0)
    window: SsimWindow = SsimWindow.GLOBAL
    window_size: int = Field(11, ge=1)
    sigma: float = Field(1.5, gt=0)

    @model_validator(mode='after')
    def _odd_window(self) -> 'SsimParams':
        if self.window_size % 2 == 0:
            raise ValueError(f"window_size must be odd, got {self.window_size}")
        return self

    @property
    def c1(self) -> float:
        return (self.k1 * self.dynamic_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.dynamic_range) ** 2


@dataclass(frozen=True, eq=False)
class EvalBatch:
    """Targets and predictions of one evaluation, all scalars or all images."""
    y: Tuple[Value, ...]
    y_hat: Tuple[Value, ...]

    def __post_init__(self):
        y, y_hat = tuple(self.y), tuple(self.y_hat)
        if not y:
            raise UsageError("evaluation batch is empty")
        if len(y) != len(y_hat):
            raise ShapeError(f"{len(y)} targets but {len(y_hat)} predictions")
        kinds = {isinstance(v, Image) for v in y + y_hat}
        if len(kinds) != 1:
            raise UsageError("evaluation batch mixes scalars and images")
        if not isinstance(y[0], Image):
            y = tuple(float(v) for v in y)
            y_hat = tuple(float(v) for v in y_hat)
        object.__setattr__(self, 'y', y)
        object.__setattr__(self, 'y_hat', y_hat)

    @classmethod
    def of(cls, y: Sequence[Value], y_hat: Sequence[Value]) -> 'EvalBatch':
        return cls(tuple(y), tuple(y_hat))

    @property
    def size(self) -> int:
        return len(self.y)

    @property
    def is_image(self) -> bool:
        return isinstance(self.y[0], Image)

    def scalars(self) -> Tuple[np.ndarray, np.ndarray]:
        if self.is_image:
            raise UsageError("metric needs a scalar batch, got images")
        return np.asarray(self.y, dtype=np.float64), np.asarray(self.y_hat, dtype=np.float64)


def _as_batch(batch: Union[EvalBatch, Tuple[Sequence, Sequence]]) -> EvalBatch:
    return batch if isinstance(batch, EvalBatch) else EvalBatch.of(*batch)


def _check_unit_interval(*arrays: np.ndarray):
    for values in arrays:
        if not np.isfinite(values).all() or values.min() < 0 or values.max() > 1:
            raise DomainError("values must lie in [0, 1]")


def accuracy_pct(batch: EvalBatch, threshold: Optional[float] = None) -> float:
    """
    100 − mean|ŷ − y|·100, with ŷ first snapped to {0, 1} when a threshold
    is given (ŷ >= threshold counts as 1).
    """
    batch = _as_batch(batch)
    y, y_hat = batch.scalars()
    _check_unit_interval(y, y_hat)
    if threshold is not None:
        y_hat = (y_hat >= threshold).astype(np.float64)
    # fsum keeps the result exact for short batches such as 0.2/0.4 errors
    error_pct = math.fsum(np.abs(y_hat - y) * 100.0) / batch.size
    return 100.0 - error_pct


def _pair_mse(a: Image, b: Image) -> float:
    if a.pixels.shape != b.pixels.shape:
        raise ShapeError(f"image shapes differ: {a.pixels.shape} vs {b.pixels.shape}")
    return float(np.mean((a.pixels - b.pixels) ** 2))


def mse(batch: EvalBatch) -> Tuple[float, List[float]]:
    """
    Batch mean squared error plus the per-item values.

    For image batches each item is the mean over all pixels and channels
    of one pair; the batch value is the mean of the items.
    """
    batch = _as_batch(batch)
    if batch.is_image:
        per_item = [_pair_mse(a, b) for a, b in zip(batch.y_hat, batch.y)]
    else:
        y, y_hat = batch.scalars()
        per_item = ((y_hat - y) ** 2).tolist()
    return float(np.mean(per_item)), per_item


def std_abs_err(batch: EvalBatch) -> float:
    """Population standard deviation of |ŷ − y|."""
    batch = _as_batch(batch)
    y, y_hat = batch.scalars()
    return float(np.std(np.abs(y_hat - y)))


def aad(batch: EvalBatch, scale_to_degrees: bool = False) -> float:
    """Average absolute difference of [0, 1] labels; ×360 into degrees."""
    batch = _as_batch(batch)
    y, y_hat = batch.scalars()
    _check_unit_interval(y, y_hat)
    value = float(np.mean(np.abs(y_hat - y)))
    return value * DEGREES if scale_to_degrees else value


def _ssim_channel(a: np.ndarray, b: np.ndarray, params: SsimParams) -> float:
    c1, c2 = params.c1, params.c2
    if params.window is SsimWindow.GLOBAL:
        mu_a, mu_b = a.mean(), b.mean()
        var_a = ((a - mu_a) ** 2).mean()
        var_b = ((b - mu_b) ** 2).mean()
        cov = ((a - mu_a) * (b - mu_b)).mean()
        return float(
            ((2 * mu_a * mu_b + c1) * (2 * cov + c2))
            / ((mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2))
        )

    truncate = (params.window_size // 2) / params.sigma

    def blur(values: np.ndarray) -> np.ndarray:
        return gaussian_filter(values, sigma=params.sigma, truncate=truncate, mode='reflect')

    mu_a, mu_b = blur(a), blur(b)
    var_a = blur(a * a) - mu_a ** 2
    var_b = blur(b * b) - mu_b ** 2
    cov = blur(a * b) - mu_a * mu_b
    ssim_map = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / (
        (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    )
    return float(ssim_map.mean())


def ssim(a: Image, b: Image, params: Optional[SsimParams] = None) -> float:
    """Per-channel SSIM averaged over the three channels."""
    params = params or SsimParams()
    if a.pixels.shape != b.pixels.shape:
        raise ShapeError(f"image shapes differ: {a.pixels.shape} vs {b.pixels.shape}")
    if a.channel_order is not ChannelOrder.RGB or b.channel_order is not ChannelOrder.RGB:
        raise UsageError("ssim compares canonical RGB images; deprocess first")
    return float(np.mean([
        _ssim_channel(a.pixels[..., c], b.pixels[..., c], params)
        for c in range(a.channels)
    ]))


def ssim_batch(batch: EvalBatch, params: Optional[SsimParams] = None) -> List[float]:
    """SSIM of every (prediction, target) pair."""
    batch = _as_batch(batch)
    if not batch.is_image:
        raise UsageError("ssim needs an image batch")
    return [ssim(a, b, params) for a, b in zip(batch.y_hat, batch.y)]
