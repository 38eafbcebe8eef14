"""
Mini-batch Adam training with a validation split and early stopping.

Every random choice in a run is drawn from a generator derived from the run
seed and the position in the loop (split, epoch shuffle, dropout per batch),
so a run is bitwise reproducible and independent of what else is running.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np
from pydantic import Field

from ..core.layers import binary_crossentropy, mse_loss
from ..core.optim import Adam
from ..core.tensor import Tensor, gradients
from ..models.model_spec import ModelSpec, ParamSet
from ..processor.dataset import LabeledExample, labeled_arrays
from ..processor.imaging import PreprocessParams
from ..processor.pretext import PretextDataset
from ..utils.config import StrictModel
from ..utils.error_handler import (
    ConfigError,
    NumericError,
    ParameterError,
    ShapeError,
    TrainingAbortedError,
)
from ..utils.helpers import PathLike, atomic_write_text, make_rng
from ..utils.monitor import Monitor

logger = logging.getLogger(__name__)

EVAL_BATCH_SIZE = 64


class LossKind(str, Enum):
    MSE = 'mse'
    BCE = 'bce'


class EarlyStopDecision(str, Enum):
    CONTINUE = 'continue'
    STOP = 'stop'


class EarlyStoppingConfig(StrictModel):
    enabled: bool = False
    patience: int = Field(3, ge=1)
    restore_best: bool = False


class TrainConfig(StrictModel):
    """Optimizer, loop and early-stopping settings for one training run."""
    lr: float = Field(0.01, gt=0)
    beta1: float = Field(0.9, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)
    epsilon: float = Field(1e-7, gt=0)
    epochs: int = Field(100, ge=1)
    val_split: float = Field(0.2, gt=0, lt=1)
    batch_size: int = Field(16, ge=1)
    early_stopping: EarlyStoppingConfig = EarlyStoppingConfig()
    seed: int = 0
    loss: LossKind = LossKind.MSE


@dataclass(frozen=True, eq=False)
class ArrayDataset:
    """Aligned input and target arrays, first axis indexing examples."""
    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        if len(self.inputs) != len(self.targets):
            raise ShapeError(
                f"{len(self.inputs)} inputs but {len(self.targets)} targets"
            )

    def __len__(self) -> int:
        return len(self.inputs)

    def subset(self, indices: Sequence[int]) -> 'ArrayDataset':
        indices = np.asarray(indices, dtype=np.intp)
        return ArrayDataset(self.inputs[indices], self.targets[indices])

    @classmethod
    def from_pretext(
        cls,
        dataset: PretextDataset,
        params: Optional[PreprocessParams] = None
    ) -> 'ArrayDataset':
        return cls(*dataset.arrays(params))

    @classmethod
    def from_labeled(
        cls,
        examples: Sequence[LabeledExample],
        params: Optional[PreprocessParams] = None
    ) -> 'ArrayDataset':
        return cls(*labeled_arrays(examples, params))


@dataclass
class TrainHistory:
    """Per-epoch losses of a finished run; epochs are numbered from 1."""
    train_loss: List[float] = field(default_factory=list)
    val_loss: List[float] = field(default_factory=list)
    stopped_epoch: int = 0
    best_epoch: int = 0
    wall_time: float = 0.0

    @property
    def best_val_loss(self) -> float:
        return self.val_loss[self.best_epoch - 1] if self.best_epoch else math.inf

    def to_csv(self) -> str:
        """`epoch,train_loss,val_loss` rows plus a summary comment line."""
        lines = ['epoch,train_loss,val_loss']
        for epoch, (train, val) in enumerate(zip(self.train_loss, self.val_loss), start=1):
            lines.append(f'{epoch},{train!r},{val!r}')
        lines.append(
            f'# summary stopped_epoch={self.stopped_epoch} best_epoch={self.best_epoch} '
            f'best_val_loss={self.best_val_loss!r}'
        )
        return '\n'.join(lines) + '\n'

    def write_csv(self, path: PathLike):
        atomic_write_text(path, self.to_csv())


SplitT = TypeVar('SplitT')


def split_train_val(
    dataset: SplitT,
    val_split: float,
    seed: int
) -> Tuple[SplitT, SplitT]:
    """
    Seeded shuffle, then the last round(n·val_split) examples validate.

    Works on anything with `len()` and `subset(indices)`, and on plain lists.

    Raises:
        ConfigError: either side of the split would be empty
    """
    n = len(dataset)
    n_val = round(n * val_split)
    if n < 2 or not 0 < val_split < 1 or n_val < 1 or n_val >= n:
        raise ConfigError(
            f"val_split {val_split} leaves an empty side for {n} examples"
        )
    order = make_rng(seed, 'val-split').permutation(n)
    train_idx, val_idx = order[:n - n_val], order[n - n_val:]
    if hasattr(dataset, 'subset'):
        return dataset.subset(train_idx), dataset.subset(val_idx)
    return [dataset[i] for i in train_idx], [dataset[i] for i in val_idx]


def early_stop_decision(val_losses: Sequence[float], patience: int) -> EarlyStopDecision:
    """
    STOP once the last `patience` epochs each failed to strictly beat the
    best validation loss recorded before them.
    """
    if patience < 1:
        raise ParameterError(f"patience must be >= 1, got {patience}")
    best = math.inf
    wait = 0
    for loss in val_losses:
        if loss < best:
            best = loss
            wait = 0
        else:
            wait += 1
    return EarlyStopDecision.STOP if wait >= patience else EarlyStopDecision.CONTINUE


class Trainer:
    """
    Training loop for one model.

    Features:
    - Seeded train/validation split and per-epoch shuffling
    - Dropout randomness derived per (epoch, batch)
    - Validation loss in inference mode, never differentiated
    - Early stopping with optional best-weights restore
    - Abort with epoch and batch on a non-finite loss
    """

    def __init__(self, spec: ModelSpec, config: Optional[TrainConfig] = None):
        self.logger = logging.getLogger(__name__)
        self.spec = spec
        self.config = config or TrainConfig()
        self.loss_fn: Callable[[Tensor, np.ndarray], Tensor] = (
            binary_crossentropy if self.config.loss is LossKind.BCE else mse_loss
        )

    def _check_dataset(self, dataset: ArrayDataset):
        if tuple(dataset.inputs.shape[1:]) != self.spec.input_shape:
            raise ShapeError(
                f"{self.spec.name} expects inputs {self.spec.input_shape}, "
                f"got {dataset.inputs.shape[1:]}"
            )
        if tuple(dataset.targets.shape[1:]) != self.spec.output_shape:
            raise ShapeError(
                f"{self.spec.name} produces {self.spec.output_shape}, "
                f"targets are {dataset.targets.shape[1:]}"
            )

    def evaluate_loss(self, params: ParamSet, dataset: ArrayDataset) -> float:
        """Mean loss over a dataset in inference mode."""
        total = 0.0
        for start in range(0, len(dataset), EVAL_BATCH_SIZE):
            inputs = dataset.inputs[start:start + EVAL_BATCH_SIZE]
            targets = dataset.targets[start:start + EVAL_BATCH_SIZE]
            prediction = self.spec.forward(params, inputs, training=False)
            total += self.loss_fn(prediction, targets).item() * len(inputs)
        return total / len(dataset)

    def _train_batch(
        self,
        params: ParamSet,
        optimizer: Adam,
        inputs: np.ndarray,
        targets: np.ndarray,
        epoch: int,
        batch: int
    ) -> Tuple[ParamSet, float]:
        cfg = self.config
        tensors = params.as_tensors(requires_grad=True)
        try:
            prediction = self.spec.forward(
                tensors, inputs, training=True, rng=make_rng(cfg.seed, 'dropout', epoch, batch)
            )
            loss = self.loss_fn(prediction, targets)
        except NumericError as e:
            raise TrainingAbortedError(str(e), epoch=epoch, batch=batch) from e
        value = loss.item()
        if not math.isfinite(value):
            raise TrainingAbortedError(f"loss became {value}", epoch=epoch, batch=batch)

        grads = gradients(loss, tensors)
        return ParamSet(optimizer.step(params, grads)), value

    @Monitor.memory_guard
    def train(
        self,
        params: ParamSet,
        dataset: ArrayDataset
    ) -> Tuple[ParamSet, TrainHistory]:
        """
        Run the epoch loop.

        Returns:
            Final parameters (or the best-validation ones with restore_best)
            and the loss history

        Raises:
            ShapeError: dataset does not fit the model
            ConfigError: validation split leaves an empty side
            TrainingAbortedError: non-finite loss
        """
        cfg = self.config
        stopping = cfg.early_stopping
        self._check_dataset(dataset)
        train_set, val_set = split_train_val(dataset, cfg.val_split, cfg.seed)
        optimizer = Adam(params, cfg.lr, cfg.beta1, cfg.beta2, cfg.epsilon)

        history = TrainHistory()
        best_params = params
        started = time.perf_counter()

        for epoch in range(1, cfg.epochs + 1):
            order = make_rng(cfg.seed, 'shuffle', epoch).permutation(len(train_set))
            total = 0.0
            for batch, start in enumerate(range(0, len(order), cfg.batch_size)):
                index = order[start:start + cfg.batch_size]
                params, value = self._train_batch(
                    params,
                    optimizer,
                    train_set.inputs[index],
                    train_set.targets[index],
                    epoch,
                    batch,
                )
                total += value * len(index)
                self.logger.debug(f"epoch {epoch} batch {batch} loss {value:.6g}")

            history.train_loss.append(total / len(train_set))
            history.val_loss.append(self.evaluate_loss(params, val_set))
            history.stopped_epoch = epoch
            if history.val_loss[-1] < history.best_val_loss:
                history.best_epoch = epoch
                best_params = params

            self.logger.info(
                f"{self.spec.name} epoch {epoch}/{cfg.epochs}: "
                f"train {history.train_loss[-1]:.6g}, val {history.val_loss[-1]:.6g}"
            )
            if stopping.enabled and early_stop_decision(
                history.val_loss, stopping.patience
            ) is EarlyStopDecision.STOP:
                self.logger.info(
                    f"Early stopping after epoch {epoch} (best epoch {history.best_epoch})"
                )
                break

        history.wall_time = time.perf_counter() - started
        if stopping.restore_best:
            params = best_params
        return params, history


def train(
    spec: ModelSpec,
    params: ParamSet,
    dataset: ArrayDataset,
    cfg: Optional[TrainConfig] = None
) -> Tuple[ParamSet, TrainHistory]:
    """Train `spec` from `params` on `dataset`; see Trainer.train."""
    return Trainer(spec, cfg).train(params, dataset)
