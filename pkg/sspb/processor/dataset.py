"""
Labeled image ingestion and the synthetic lesion generator.

Real data comes in through a CSV manifest (`filepath,label`) next to the
PNG files. The synthetic generator draws benign-looking smooth ellipses and
melanoma-looking lesions with irregular borders and a second colour region,
so the whole pipeline runs without any external dataset.
"""

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import Field
from scipy.ndimage import gaussian_filter

from ..utils.config import StrictModel
from ..utils.error_handler import ConfigError, IngestionError, ParameterError, UsageError
from ..utils.helpers import PathLike, atomic_write_text, make_rng
from ..utils.monitor import Monitor
from .imaging import Image, PreprocessParams, load_png, preprocess, save_png, stack_pixels

logger = logging.getLogger(__name__)

MANIFEST_NAME = 'manifest.csv'
MANIFEST_HEADER = ('filepath', 'label')

SKIN_TONE = np.array([224.0, 172.0, 140.0])
LESION_BROWN = np.array([98.0, 60.0, 38.0])
LESION_BLUE_GREY = np.array([78.0, 84.0, 122.0])


@dataclass(frozen=True, eq=False)
class LabeledExample:
    """Canonical RGB image with a benign (0) / melanoma (1) label."""
    image: Image
    label: int
    source_id: str

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ParameterError(f"label must be 0 or 1, got {self.label}")


class SynthConfig(StrictModel):
    """Synthetic dataset size, resolution, seed and fraction of melanoma images."""
    n: int = Field(700, ge=2)
    side: int = Field(64, ge=16)
    seed: int = 0
    balance: float = Field(0.5, ge=0, le=1)


def load_manifest(path: PathLike) -> List[LabeledExample]:
    """
    Read a `filepath,label` manifest; paths are relative to the manifest.

    Raises:
        IngestionError: missing/unreadable image or bad label, naming the row
        UsageError: manifest without data rows
    """
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"manifest not found: {path}")

    examples: List[LabeledExample] = []
    with open(path, 'r', encoding='utf-8', newline='') as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != MANIFEST_HEADER:
            raise IngestionError(f"manifest header must be {','.join(MANIFEST_HEADER)}")
        for row_index, row in enumerate(reader, start=1):
            label_text = (row.get('label') or '').strip()
            if label_text not in ('0', '1'):
                raise IngestionError(f"label {label_text!r} is not 0 or 1", row=row_index)
            filepath = (row.get('filepath') or '').strip()
            try:
                image = load_png(path.parent / filepath)
            except IngestionError as e:
                raise IngestionError(str(e), row=row_index) from e
            examples.append(LabeledExample(image, int(label_text), Path(filepath).stem))

    if not examples:
        raise UsageError(f"manifest {path} has no rows")
    logger.info(f"Loaded {len(examples)} labeled images from {path}")
    return examples


def write_manifest(examples: Sequence[LabeledExample], out_dir: PathLike) -> Path:
    """Write PNGs named after their source ids plus manifest.csv."""
    out_dir = Path(out_dir)
    lines = [','.join(MANIFEST_HEADER)]
    for example in examples:
        filename = f'{example.source_id}.png'
        save_png(example.image, out_dir / filename)
        lines.append(f'{filename},{example.label}')
    manifest = out_dir / MANIFEST_NAME
    atomic_write_text(manifest, '\n'.join(lines) + '\n')
    return manifest


def _lesion_image(side: int, label: int, rng: np.random.Generator) -> np.ndarray:
    """Render one synthetic dermoscopy-like image."""
    background = SKIN_TONE + rng.normal(0.0, 4.0, 3)
    noise = gaussian_filter(rng.normal(0.0, 8.0, (side, side, 3)), sigma=(1.0, 1.0, 0))
    canvas = background + noise

    centre_y, centre_x = rng.uniform(0.38 * side, 0.62 * side, 2)
    semi_a, semi_b = rng.uniform(0.16 * side, 0.27 * side, 2)
    phi = rng.uniform(0.0, math.pi)

    rows, cols = np.meshgrid(np.arange(side), np.arange(side), indexing='ij')
    y, x = rows - centre_y, cols - centre_x
    u = (x * math.cos(phi) + y * math.sin(phi)) / semi_a
    v = (-x * math.sin(phi) + y * math.cos(phi)) / semi_b
    radius, angle = np.hypot(u, v), np.arctan2(v, u)

    if label == 1:
        amplitude = rng.uniform(0.15, 0.3)
        lobes = int(rng.integers(5, 10))
        shift = rng.uniform(0.0, 2 * math.pi)
        boundary = 1.0 + amplitude * np.sin(lobes * angle + shift)
    else:
        boundary = np.ones_like(radius)
    inside = (radius <= boundary).astype(np.float64)

    lesion = np.broadcast_to(LESION_BROWN + rng.normal(0.0, 6.0, 3), canvas.shape).copy()
    if label == 1:
        beta = rng.uniform(0.0, 2 * math.pi)
        second = (u * math.cos(beta) + v * math.sin(beta)) > rng.uniform(-0.2, 0.2)
        lesion[second] = LESION_BLUE_GREY + rng.normal(0.0, 6.0, 3)
    lesion += rng.normal(0.0, 5.0, canvas.shape)

    weight = gaussian_filter(inside, sigma=0.8)[..., None]
    pixels = canvas * (1.0 - weight) + lesion * weight
    return np.clip(np.rint(pixels), 0.0, 255.0)


@Monitor.timed
def generate_synthetic(
    cfg: SynthConfig,
    out_dir: Optional[PathLike] = None
) -> List[LabeledExample]:
    """
    Deterministic synthetic lesion images.

    Exactly round(n·balance) images are melanoma-like; labels are shuffled
    with the config seed and image i is drawn from a generator seeded with
    (seed, i). With out_dir, PNGs `<class>_<index>.png` and manifest.csv are
    written there.
    """
    n_positive = round(cfg.n * cfg.balance)
    labels = np.array([1] * n_positive + [0] * (cfg.n - n_positive))
    labels = make_rng(cfg.seed, 'labels').permutation(labels)

    examples = []
    for index, label in enumerate(labels.tolist()):
        pixels = _lesion_image(cfg.side, label, make_rng(cfg.seed, index))
        examples.append(LabeledExample(Image(pixels), label, f'{label}_{index:05d}'))

    logger.info(f"Generated {cfg.n} synthetic images ({n_positive} melanoma)")
    if out_dir is not None:
        write_manifest(examples, out_dir)
    return examples


def split_by_source(
    examples: Sequence[LabeledExample],
    test_size: int,
    seed: int
) -> Tuple[List[LabeledExample], List[LabeledExample]]:
    """
    Seeded train/test split that never puts one source id on both sides.

    Whole source groups are moved to the test side until it holds at least
    test_size examples.
    """
    groups: Dict[str, List[int]] = {}
    for index, example in enumerate(examples):
        groups.setdefault(example.source_id, []).append(index)
    if test_size < 1 or test_size >= len(examples) or len(groups) < 2:
        raise ConfigError(
            f"cannot hold out {test_size} of {len(examples)} examples "
            f"from {len(groups)} sources"
        )

    order = make_rng(seed, 'test-split').permutation(len(groups))
    source_ids = list(groups)
    test_indices: List[int] = []
    for position in order:
        if len(test_indices) >= test_size:
            break
        test_indices.extend(groups[source_ids[position]])

    test_set = set(test_indices)
    if len(test_set) == len(examples):
        raise ConfigError("test split consumed every source; lower test_size")
    train = [e for i, e in enumerate(examples) if i not in test_set]
    test = [examples[i] for i in sorted(test_set)]
    return train, test


def labeled_arrays(
    examples: Sequence[LabeledExample],
    params: Optional[PreprocessParams] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """Preprocessed N×H×W×3 inputs and N×1 float32 labels."""
    inputs = stack_pixels([preprocess(e.image, params) for e in examples])
    labels = np.array([[e.label] for e in examples], dtype=np.float32)
    return inputs, labels
