"""
Pretext example generation for the three self-supervision tasks.

Rotation: the input is the image rotated by a uniform angle in [0, 360) and
the target is angle/360. Inpainting: a black square is masked out and the
target is the original. Corruption: patches are swapped repeatedly and the
target is the original. Every example is a pure function of its source
image, the dataset seed and its index.
"""

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import Field

from ..utils.config import StrictModel
from ..utils.error_handler import IngestionError, ParameterError, UsageError
from ..utils.helpers import PathLike, atomic_write_text, derive_seed, make_rng
from ..utils.monitor import Monitor
from .imaging import (
    Image,
    PreprocessParams,
    corrupt_swap,
    default_mask_side,
    default_swap_patch,
    load_png,
    mask_patch,
    preprocess,
    rotate_image,
    save_png,
    stack_pixels,
)

logger = logging.getLogger(__name__)

PRETEXT_MANIFEST = 'pretext_manifest.csv'
MANIFEST_HEADER = ('input_path', 'target', 'task', 'seed')


class PretextTask(str, Enum):
    ROTATION = 'rotation'
    INPAINT = 'inpaint'
    CORRUPT = 'corrupt'

    @property
    def image_target(self) -> bool:
        return self is not PretextTask.ROTATION


class PretextParams(StrictModel):
    """Generation parameters; None sizes scale with the image side."""
    mask_side: Optional[int] = Field(None, ge=1)
    swap_count: int = Field(100, ge=0)
    swap_patch: Optional[int] = Field(None, ge=1)
    test_fraction: float = Field(0.15, gt=0, lt=1)

    def resolve_mask_side(self, side: int) -> int:
        return self.mask_side if self.mask_side is not None else default_mask_side(side)

    def resolve_swap_patch(self, side: int) -> int:
        return self.swap_patch if self.swap_patch is not None else default_swap_patch(side)


@dataclass(frozen=True, eq=False)
class PretextExample:
    """One (input, target) pair."""
    input: Image
    target: Union[float, Image]
    task: PretextTask
    seed: Optional[int] = None

    def __post_init__(self):
        if self.task is PretextTask.ROTATION:
            if isinstance(self.target, Image) or not 0 <= self.target < 1:
                raise ParameterError(f"rotation label must lie in [0, 1), got {self.target}")
        elif not isinstance(self.target, Image) or self.target.dimensions != self.input.dimensions:
            raise ParameterError("image targets must match the input dimensions")


@dataclass(frozen=True, eq=False)
class PretextDataset:
    """Homogeneous, ordered pretext examples plus the settings that made them."""
    examples: Tuple[PretextExample, ...]
    task: PretextTask
    config: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if any(example.task is not self.task for example in self.examples):
            raise UsageError(f"dataset mixes tasks; expected only {self.task.value}")

    def __len__(self) -> int:
        return len(self.examples)

    def __getitem__(self, index: int) -> PretextExample:
        return self.examples[index]

    def subset(self, indices: Sequence[int]) -> 'PretextDataset':
        return PretextDataset(tuple(self.examples[i] for i in indices), self.task, self.config)

    def arrays(
        self,
        params: Optional[PreprocessParams] = None
    ) -> Tuple[np.ndarray, np.ndarray]:
        """
        Preprocessed float32 training arrays.

        Returns:
            inputs N×H×W×3 and targets N×1 (rotation) or N×H×W×3
        """
        inputs = stack_pixels([preprocess(e.input, params) for e in self.examples])
        if self.task.image_target:
            targets = stack_pixels([preprocess(e.target, params) for e in self.examples])
        else:
            targets = np.array([[e.target] for e in self.examples], dtype=np.float32)
        return inputs, targets


def gen_rotation_example(
    img: Image,
    rng: np.random.Generator,
    angle: Optional[float] = None,
    seed: Optional[int] = None
) -> PretextExample:
    """Rotate by a uniform random angle (or the forced one); label = angle/360."""
    if angle is None:
        angle = float(rng.random() * 360.0)
    rotated = rotate_image(img, angle)
    return PretextExample(rotated, angle / 360.0, PretextTask.ROTATION, seed)


def gen_missing_patch_example(
    img: Image,
    rng: np.random.Generator,
    mask_side: int,
    seed: Optional[int] = None
) -> PretextExample:
    """Black out a uniformly placed mask_side square; the target is the original."""
    if mask_side < 1 or mask_side > min(img.dimensions):
        raise ParameterError(
            f"mask side {mask_side} does not fit a {img.height}×{img.width} image"
        )
    row = int(rng.integers(0, img.height - mask_side + 1))
    col = int(rng.integers(0, img.width - mask_side + 1))
    return PretextExample(mask_patch(img, (row, col), mask_side), img, PretextTask.INPAINT, seed)


def gen_corruption_example(
    img: Image,
    rng: np.random.Generator,
    n_swaps: int = 100,
    patch_side: int = 30,
    seed: Optional[int] = None
) -> PretextExample:
    """Swap patch pairs n_swaps times; the target is the original."""
    corrupted, _ = corrupt_swap(img, n_swaps, patch_side, rng)
    return PretextExample(corrupted, img, PretextTask.CORRUPT, seed)


def _generate_one(
    img: Image,
    task: PretextTask,
    params: PretextParams,
    seed: int,
    index: int
) -> PretextExample:
    rng = make_rng(seed, index)
    example_seed = derive_seed(seed, index)
    side = min(img.dimensions)
    if task is PretextTask.ROTATION:
        return gen_rotation_example(img, rng, seed=example_seed)
    if task is PretextTask.INPAINT:
        return gen_missing_patch_example(
            img, rng, params.resolve_mask_side(side), seed=example_seed
        )
    return gen_corruption_example(
        img, rng, params.swap_count, params.resolve_swap_patch(side), seed=example_seed
    )


@Monitor.timed
def build_pretext_dataset(
    images: Sequence[Image],
    task: Union[PretextTask, str],
    config: Optional[PretextParams] = None,
    seed: int = 0,
    workers: int = 1
) -> PretextDataset:
    """
    One pretext example per source image.

    Example i uses a generator seeded from (seed, i), so the output does not
    depend on worker count or on the other images.
    """
    if not images:
        raise UsageError("cannot build a pretext dataset from an empty image list")
    task = PretextTask(task)
    config = config or PretextParams()

    def generate(index: int) -> PretextExample:
        return _generate_one(images[index], task, config, seed, index)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            examples = list(pool.map(generate, range(len(images))))
    else:
        examples = [generate(i) for i in range(len(images))]

    logger.info(f"Generated {len(examples)} {task.value} examples (seed {seed})")
    snapshot = {'seed': seed, **config.model_dump(mode='json')}
    return PretextDataset(tuple(examples), task, snapshot)


def write_pretext_dataset(dataset: PretextDataset, out_dir: PathLike) -> Path:
    """Write input/target PNGs and the pretext manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    rows: List[List[str]] = []
    for i, example in enumerate(dataset.examples):
        input_name = f'input_{i:05d}.png'
        save_png(example.input, out_dir / input_name)
        if isinstance(example.target, Image):
            target = f'target_{i:05d}.png'
            save_png(example.target, out_dir / target)
        else:
            target = repr(float(example.target))
        rows.append([input_name, target, dataset.task.value, str(example.seed)])

    manifest = out_dir / PRETEXT_MANIFEST
    lines = [','.join(MANIFEST_HEADER)] + [','.join(row) for row in rows]
    atomic_write_text(manifest, '\n'.join(lines) + '\n')
    logger.info(f"Wrote {len(rows)} pretext examples to {out_dir}")
    return manifest


def load_pretext_dataset(data_dir: PathLike) -> PretextDataset:
    """Read a directory written by write_pretext_dataset."""
    data_dir = Path(data_dir)
    manifest = data_dir / PRETEXT_MANIFEST
    if not manifest.exists():
        raise IngestionError(f"pretext manifest not found: {manifest}")

    examples: List[PretextExample] = []
    with open(manifest, 'r', encoding='utf-8', newline='') as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != MANIFEST_HEADER:
            raise IngestionError(f"pretext manifest header must be {','.join(MANIFEST_HEADER)}")
        for row_index, row in enumerate(reader, start=1):
            try:
                task = PretextTask(row['task'])
                target: Union[float, Image]
                if task.image_target:
                    target = load_png(data_dir / row['target'])
                else:
                    target = float(row['target'])
                seed = None if row['seed'] in ('', 'None') else int(row['seed'])
                examples.append(
                    PretextExample(load_png(data_dir / row['input_path']), target, task, seed)
                )
            except (ValueError, IngestionError) as e:
                raise IngestionError(str(e), row=row_index) from e

    if not examples:
        raise UsageError(f"pretext manifest {manifest} has no rows")
    return PretextDataset(tuple(examples), examples[0].task, {'source': str(data_dir)})
