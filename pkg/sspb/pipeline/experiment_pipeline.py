"""
Experiment pipeline: pretext pretraining, classifier cells and the report.

For every seed the labeled data is split into a training part and a held-out
test set. Each pretext task trains an encoder once on the training images;
every (initialization, regime) cell then trains a classifier and reads the
test set exactly once, after training. Stages run on a thread pool capped by
SSPB_THREADS.
"""

import asyncio
import functools
import logging
import math
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from .. import __version__
from ..evaluation.metrics import (
    EvalBatch,
    aad,
    accuracy_pct,
    mse,
    ssim_batch,
    std_abs_err,
)
from ..models.model_spec import ModelSpec, ParamSet
from ..models.network_builder import ENCODER_BLOCK, NetworkBuilder
from ..processor.dataset import (
    LabeledExample,
    generate_synthetic,
    labeled_arrays,
    load_manifest,
    split_by_source,
)
from ..processor.imaging import ChannelOrder, Image, PreprocessParams, deprocess
from ..processor.pretext import PretextDataset, PretextTask, build_pretext_dataset
from ..training.trainer import ArrayDataset, Trainer, TrainHistory
from ..utils.error_handler import ConfigError, ErrorHandler, ShapeError
from ..utils.helpers import PathLike, derive_seed, make_rng
from ..utils.monitor import Monitor
from .report import CellStatus, MetricsEntry, RunReport, Table1Cell
from .run_config import InitKind, Regime, RunConfig
from .stages import PipelineStage, StageManager, StageRun

logger = logging.getLogger(__name__)

THREADS_ENV = 'SSPB_THREADS'
DATA_STAGE = 'data'


def worker_limit() -> int:
    """Worker count from SSPB_THREADS, else the CPU count."""
    raw = os.environ.get(THREADS_ENV)
    if raw is None or not raw.strip():
        return max(1, os.cpu_count() or 1)
    try:
        value = int(raw)
    except ValueError as e:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from e
    if value < 1:
        raise ConfigError(f"{THREADS_ENV} must be >= 1, got {value}")
    return value


class HeldOutSet:
    """Test examples that can only be reached through a logged read()."""

    def __init__(self, examples: Sequence[LabeledExample]):
        self.logger = logging.getLogger(__name__)
        self._examples = tuple(examples)
        self._lock = threading.Lock()
        self.reads: List[str] = []

    def __len__(self) -> int:
        return len(self._examples)

    def read(self, reader: str) -> List[LabeledExample]:
        with self._lock:
            self.reads.append(reader)
        self.logger.info(f"Test set ({len(self)} images) read by {reader}")
        return list(self._examples)


@dataclass
class DataSplit:
    seed: int
    train: List[LabeledExample]
    test: HeldOutSet
    preprocess: PreprocessParams = field(default_factory=PreprocessParams)


@dataclass
class PretextEvaluation:
    """Raw per-example results on a pretext test slice."""
    task: PretextTask
    labels: List[float] = field(default_factory=list)
    predictions: List[float] = field(default_factory=list)
    mse_items: List[float] = field(default_factory=list)
    ssim_items: List[float] = field(default_factory=list)

    @staticmethod
    def pooled(evaluations: Sequence['PretextEvaluation']) -> Dict[str, float]:
        """Metrics over the union of several evaluations of one task."""
        task = evaluations[0].task
        if task is PretextTask.ROTATION:
            batch = EvalBatch.of(
                [y for e in evaluations for y in e.labels],
                [p for e in evaluations for p in e.predictions],
            )
            return {
                'mse': mse(batch)[0],
                'aad_scaled': aad(batch),
                'aad_degrees': aad(batch, scale_to_degrees=True),
                'std_degrees': std_abs_err(batch) * 360.0,
            }
        mse_items = np.array([v for e in evaluations for v in e.mse_items])
        ssim_items = np.array([v for e in evaluations for v in e.ssim_items])
        return {
            'mse_mean': float(mse_items.mean()),
            'mse_std': float(mse_items.std()),
            'ssim_mean': float(ssim_items.mean()),
            'ssim_std': float(ssim_items.std()),
        }


@dataclass
class PretextOutcome:
    task: PretextTask
    encoder: ParamSet
    evaluation: PretextEvaluation
    history: TrainHistory


@dataclass
class CellOutcome:
    init: InitKind
    regime: Regime
    seed: int
    accuracy_pct: float
    history: TrainHistory


def _split_stage(seed: int) -> str:
    return f'seed{seed}/split'


def _pretext_stage(seed: int, task: PretextTask) -> str:
    return f'seed{seed}/pretext/{task.value}'


def _cell_stage(seed: int, init: InitKind, regime: Regime) -> str:
    return f'seed{seed}/cell/{init.value}/{regime.value}'


class ExperimentPipeline:
    """
    Self-supervision experiment runner.

    Features:
    - Pretext encoders trained once per task and seed, shared across regimes
    - Classifier cells for every initialization and regime
    - Held-out test reads logged per cell
    - Failed phases recorded in the report without stopping the run
    - Multi-seed runs with per-seed and mean accuracy
    """

    def __init__(
        self,
        config: RunConfig,
        max_workers: Optional[int] = None,
        examples: Optional[Sequence[LabeledExample]] = None
    ):
        self.logger = logging.getLogger(__name__)
        self.config = config
        self.builder = NetworkBuilder(config.encoder, config.decoder, config.head)
        self.error_handler = ErrorHandler()
        self.monitor = Monitor()
        self.max_workers = max_workers or worker_limit()
        self.splits: Dict[int, DataSplit] = {}
        self._examples = list(examples) if examples is not None else None

    def load_examples(self) -> List[LabeledExample]:
        """Labeled images from the configured source, checked against image_side."""
        if self._examples is not None:
            examples = self._examples
        elif self.config.data.manifest is not None:
            examples = load_manifest(self.config.data.manifest)
        else:
            examples = generate_synthetic(self.config.data.synthetic)

        side = self.config.image_side
        for example in examples:
            if example.image.dimensions != (side, side):
                raise ShapeError(
                    f"image {example.source_id} is {example.image.height}×"
                    f"{example.image.width}, expected {side}×{side}"
                )
        return examples

    def split_data(self, examples: Sequence[LabeledExample], seed: int) -> DataSplit:
        train, test = split_by_source(examples, self.config.data.test_size, seed)
        preprocess = (
            PreprocessParams.from_images(e.image for e in train)
            if self.config.dataset_means else PreprocessParams()
        )
        split = DataSplit(seed, train, HeldOutSet(test), preprocess)
        self.splits[seed] = split
        self.logger.info(f"Seed {seed}: {len(train)} training / {len(test)} test images")
        return split

    def run_pretext_phase(
        self,
        task: PretextTask,
        images: Sequence[Image],
        seed: int,
        preprocess: Optional[PreprocessParams] = None
    ) -> PretextOutcome:
        """
        Train encoder plus task head on generated pretext examples and
        evaluate on a held-out slice of them.
        """
        task = PretextTask(task)
        preprocess = preprocess or PreprocessParams()
        self.logger.info(f"Pretext phase {task.value} (seed {seed}) started")

        dataset = build_pretext_dataset(
            images, task, self.config.pretext, seed=derive_seed(seed, 'pretext', task.value)
        )
        n_test = max(1, round(len(dataset) * self.config.pretext.test_fraction))
        order = make_rng(seed, 'pretext-test', task.value).permutation(len(dataset))
        test_slice = dataset.subset(order[len(dataset) - n_test:].tolist())
        train_slice = dataset.subset(order[:len(dataset) - n_test].tolist())

        spec = self.builder.pretext_model(task)
        params = self.builder.initialize(spec, derive_seed(seed, 'init', task.value))
        train_cfg = self.config.pretext_train.model_copy(
            update={'seed': derive_seed(seed, 'train', task.value)}
        )
        params, history = Trainer(spec, train_cfg).train(
            params, ArrayDataset.from_pretext(train_slice, preprocess)
        )

        evaluation = self.evaluate_pretext(spec, params, test_slice, preprocess)
        self.logger.info(
            f"Pretext phase {task.value} (seed {seed}) finished after "
            f"{history.stopped_epoch} epochs"
        )
        return PretextOutcome(task, params.select(f'{ENCODER_BLOCK}/'), evaluation, history)

    def evaluate_pretext(
        self,
        spec: ModelSpec,
        params: ParamSet,
        dataset: PretextDataset,
        preprocess: Optional[PreprocessParams] = None
    ) -> PretextEvaluation:
        """
        Predict a pretext test slice.

        Rotation predictions are clipped into the label range; image
        predictions are deprocessed and clamped to canonical pixels before
        they are compared with the originals.
        """
        preprocess = preprocess or PreprocessParams()
        inputs, _ = dataset.arrays(preprocess)
        predictions = spec.predict(params, inputs)

        if dataset.task is PretextTask.ROTATION:
            return PretextEvaluation(
                dataset.task,
                labels=[float(e.target) for e in dataset.examples],
                predictions=np.clip(predictions[:, 0].astype(np.float64), 0.0, 1.0).tolist(),
            )

        restored = [
            deprocess(Image(raw, ChannelOrder.BGR), preprocess, clamp=True)
            for raw in predictions
        ]
        batch = EvalBatch.of([e.target for e in dataset.examples], restored)
        return PretextEvaluation(
            dataset.task,
            mse_items=mse(batch)[1],
            ssim_items=ssim_batch(batch, self.config.ssim),
        )

    def run_classification_phase(
        self,
        init: InitKind,
        init_params: Optional[ParamSet],
        regime: Regime,
        split: DataSplit,
        seed: int
    ) -> CellOutcome:
        """
        Train one classifier and score it on the held-out test set.

        The classifier head is seeded the same way for every cell, so cells
        of one seed differ only in encoder initialization and regime.
        """
        init, regime = InitKind(init), Regime(regime)
        spec = self.builder.classifier()
        params = self.builder.classifier_params(init_params, derive_seed(seed, 'classifier'))
        train_cfg = regime.apply(self.config.classifier_train).model_copy(
            update={'seed': derive_seed(seed, 'classifier-train')}
        )
        trained, history = Trainer(spec, train_cfg).train(
            params, ArrayDataset.from_labeled(split.train, split.preprocess)
        )

        test_examples = split.test.read(f'{init.value}/{regime.value}/seed{seed}')
        inputs, labels = labeled_arrays(test_examples, split.preprocess)
        predictions = np.clip(spec.predict(trained, inputs)[:, 0].astype(np.float64), 0.0, 1.0)
        accuracy = accuracy_pct(EvalBatch.of(labels[:, 0], predictions), threshold=0.5)
        self.logger.info(
            f"Cell {init.value}/{regime.value} (seed {seed}): {accuracy:.2f}% "
            f"after {history.stopped_epoch} epochs"
        )
        return CellOutcome(init, regime, seed, accuracy, history)

    def build_stages(self) -> StageManager:
        """Register the data, pretext and cell stages of every seed."""
        manager = StageManager(self.error_handler)
        manager.register_stage(PipelineStage(DATA_STAGE, lambda _: self.load_examples()))

        for seed in self.config.seed_list:
            split_name = _split_stage(seed)
            manager.register_stage(PipelineStage(
                split_name,
                functools.partial(self._split_processor, seed),
                (DATA_STAGE,),
                {'seed': seed},
            ))
            for task in self.config.pretext_tasks:
                manager.register_stage(PipelineStage(
                    _pretext_stage(seed, task),
                    functools.partial(self._pretext_processor, seed, task),
                    (split_name,),
                    {'seed': seed, 'task': task.value},
                ))
            for init in self.config.inits:
                dependencies = [split_name]
                if init.task is not None:
                    dependencies.append(_pretext_stage(seed, init.task))
                for regime in self.config.regimes:
                    manager.register_stage(PipelineStage(
                        _cell_stage(seed, init, regime),
                        functools.partial(self._cell_processor, seed, init, regime),
                        tuple(dependencies),
                        {'seed': seed, 'init': init.value, 'regime': regime.value},
                    ))
        return manager

    def _split_processor(self, seed: int, inputs: Dict[str, Any]) -> DataSplit:
        return self.split_data(inputs[DATA_STAGE], seed)

    def _pretext_processor(
        self,
        seed: int,
        task: PretextTask,
        inputs: Dict[str, Any]
    ) -> PretextOutcome:
        split: DataSplit = inputs[_split_stage(seed)]
        return self.run_pretext_phase(
            task, [e.image for e in split.train], seed, split.preprocess
        )

    def _cell_processor(
        self,
        seed: int,
        init: InitKind,
        regime: Regime,
        inputs: Dict[str, Any]
    ) -> CellOutcome:
        split: DataSplit = inputs[_split_stage(seed)]
        encoder = None
        if init.task is not None:
            encoder = inputs[_pretext_stage(seed, init.task)].encoder
        return self.run_classification_phase(init, encoder, regime, split, seed)

    async def run_matrix(self, out_dir: Optional[PathLike] = None) -> RunReport:
        """
        Run every stage and assemble the report.

        Report files are written to out_dir (or the configured output_dir)
        when one is given.
        """
        started = datetime.now(timezone.utc)
        manager = self.build_stages()
        self.logger.info(
            f"Running matrix with {len(manager.stages)} stages on {self.max_workers} workers",
            extra={'context': self.config.summary()}
        )
        with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
            run = await manager.execute_stages(executor, self.monitor)
        finished = datetime.now(timezone.utc)

        report = self.build_report(run, started, finished)
        target = out_dir or self.config.output_dir
        if target is not None:
            report.write(target)
        if report.failed_cells:
            self.logger.error(
                f"{len(report.failed_cells)} of {len(report.table1)} cells failed",
                extra={'context': self.error_handler.get_error_statistics()}
            )
        return report

    def run(self, out_dir: Optional[PathLike] = None) -> RunReport:
        return asyncio.run(self.run_matrix(out_dir))

    def build_report(
        self,
        run: StageRun,
        started: datetime,
        finished: datetime
    ) -> RunReport:
        cfg = self.config
        seeds = cfg.seed_list

        table1 = []
        for init in cfg.inits:
            for regime in cfg.regimes:
                names = [_cell_stage(seed, init, regime) for seed in seeds]
                failure = next((run.failures[n] for n in names if n in run.failures), None)
                if failure is not None:
                    table1.append(Table1Cell(
                        init.value, regime.value, CellStatus.FAILED,
                        error=f"{failure.error_type}: {failure.message}"
                    ))
                    continue
                outcomes: List[CellOutcome] = [run.results[n] for n in names]
                per_seed = [o.accuracy_pct for o in outcomes]
                table1.append(Table1Cell(
                    init.value,
                    regime.value,
                    CellStatus.OK,
                    accuracy_pct=math.fsum(per_seed) / len(per_seed),
                    per_seed=per_seed,
                    stopped_epochs=(
                        [o.history.stopped_epoch for o in outcomes]
                        if regime.patience is not None else None
                    ),
                ))

        table2 = self._metrics_entry(run, PretextTask.ROTATION)
        table3 = {
            init.value: self._metrics_entry(run, init.task)
            for init in (InitKind.MISSING_PATCH, InitKind.CORRUPTION)
        }
        provenance = {
            'config_hash': cfg.config_hash(),
            'seed': cfg.seed,
            'seeds': seeds,
            'ssim_window': cfg.ssim.window.value,
            'toolkit_version': __version__,
            'started_at': started.isoformat(),
            'finished_at': finished.isoformat(),
        }
        return RunReport(
            table1=table1,
            table2=table2,
            table3=table3,
            regime_labels={
                r.value: r.label(cfg.classifier_train.epochs) for r in cfg.regimes
            },
            provenance=provenance,
        )

    def _metrics_entry(self, run: StageRun, task: PretextTask) -> MetricsEntry:
        if task not in self.config.pretext_tasks:
            return MetricsEntry(CellStatus.SKIPPED)
        names = [_pretext_stage(seed, task) for seed in self.config.seed_list]
        failure = next((run.failures[n] for n in names if n in run.failures), None)
        if failure is not None:
            return MetricsEntry(
                CellStatus.FAILED, error=f"{failure.error_type}: {failure.message}"
            )
        evaluations = [run.results[n].evaluation for n in names]
        return MetricsEntry(CellStatus.OK, PretextEvaluation.pooled(evaluations))
