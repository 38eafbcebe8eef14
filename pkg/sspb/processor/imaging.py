"""
Image representation, corruption primitives and preprocessing.

Images are H×W×3 real-valued rasters; canonical images hold RGB values in
[0, 255]. Preprocessing flips to BGR and zero-centres each channel; the tag
on every Image records which of the two layouts it is in.
"""

import io
import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from PIL import Image as PILImage
from PIL import UnidentifiedImageError
from scipy.ndimage import map_coordinates

from ..utils.error_handler import IngestionError, ParameterError, UsageError
from ..utils.helpers import PathLike, atomic_write_bytes
from ..utils.validator import Validator

logger = logging.getLogger(__name__)
_validator = Validator()

IMAGENET_BGR_MEANS = (103.939, 116.779, 123.68)

# Patch sizes relative to image side; 75 px and 30 px at a 224 px side.
MASK_SIDE_RATIO = 75 / 224
SWAP_PATCH_RATIO = 30 / 224
MAX_SWAP_ATTEMPTS = 1000


class ChannelOrder(str, Enum):
    RGB = 'RGB'
    BGR = 'BGR'


@dataclass(frozen=True, eq=False)
class Image:
    """Immutable H×W×3 raster with a channel-order tag."""
    pixels: np.ndarray
    channel_order: ChannelOrder = ChannelOrder.RGB

    def __post_init__(self):
        pixels = np.array(self.pixels, dtype=np.float64, copy=True)
        _validator.validate_pixels(pixels)
        pixels.flags.writeable = False
        object.__setattr__(self, 'pixels', pixels)
        object.__setattr__(self, 'channel_order', ChannelOrder(self.channel_order))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    @property
    def dimensions(self) -> Tuple[int, int]:
        return self.height, self.width

    def is_canonical(self) -> bool:
        return self.channel_order is ChannelOrder.RGB and _validator.is_canonical(self.pixels)

    def same_pixels(self, other: 'Image') -> bool:
        """Bitwise pixel and tag equality."""
        return (
            self.channel_order is other.channel_order
            and self.pixels.shape == other.pixels.shape
            and np.array_equal(self.pixels, other.pixels)
        )

    def with_pixels(self, pixels: np.ndarray) -> 'Image':
        return Image(pixels, self.channel_order)


class SwapEntry(NamedTuple):
    patch_a: Tuple[int, int]
    patch_b: Tuple[int, int]
    side: int


@dataclass(frozen=True)
class SwapRecord:
    """Ordered swaps applied by corrupt_swap, plus the image extents they fit."""
    height: int
    width: int
    entries: Tuple[SwapEntry, ...] = ()

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class PreprocessParams:
    """Per-channel means in B, G, R order."""
    means: Tuple[float, float, float] = IMAGENET_BGR_MEANS

    def __post_init__(self):
        means = tuple(float(m) for m in self.means)
        if len(means) != 3 or not all(math.isfinite(m) for m in means):
            raise ParameterError(f"preprocess means must be three finite reals, got {self.means}")
        object.__setattr__(self, 'means', means)

    @classmethod
    def from_images(cls, images: Iterable[Image]) -> 'PreprocessParams':
        """Dataset channel means of canonical RGB images, in B, G, R order."""
        total = np.zeros(3)
        count = 0
        for img in images:
            _require_order(img, ChannelOrder.RGB, 'from_images')
            total += img.pixels.sum(axis=(0, 1))
            count += img.height * img.width
        if count == 0:
            raise UsageError("cannot compute channel means of an empty image set")
        r, g, b = total / count
        return cls((b, g, r))


def _require_order(img: Image, order: ChannelOrder, op: str):
    if img.channel_order is not order:
        raise UsageError(f"{op} expects a {order.value} image, got {img.channel_order.value}")


def default_mask_side(side: int) -> int:
    return max(1, round(MASK_SIDE_RATIO * side))


def default_swap_patch(side: int) -> int:
    return max(1, round(SWAP_PATCH_RATIO * side))


def _snap(coords: np.ndarray, tolerance: float = 1e-9) -> np.ndarray:
    nearest = np.rint(coords)
    return np.where(np.abs(coords - nearest) < tolerance, nearest, coords)


def rotate_image(img: Image, angle_deg: float) -> Image:
    """
    Rotate about the image centre by angle_deg (counter-clockwise on screen).

    Inverse mapping with bilinear sampling; source positions outside the
    image read as black. Angle 0 returns the pixels untouched.
    """
    if not 0 <= angle_deg < 360:
        raise ParameterError(f"rotation angle must lie in [0, 360), got {angle_deg}")
    _require_order(img, ChannelOrder.RGB, 'rotate_image')
    if angle_deg == 0:
        return Image(img.pixels, img.channel_order)

    theta = math.radians(angle_deg)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    centre_y, centre_x = (img.height - 1) / 2, (img.width - 1) / 2

    rows, cols = np.meshgrid(
        np.arange(img.height, dtype=np.float64),
        np.arange(img.width, dtype=np.float64),
        indexing='ij'
    )
    y, x = rows - centre_y, cols - centre_x
    src_y = _snap(cos_t * y + sin_t * x + centre_y)
    src_x = _snap(cos_t * x - sin_t * y + centre_x)

    rotated = np.stack([
        map_coordinates(
            img.pixels[..., c], [src_y, src_x], order=1, mode='constant', cval=0.0
        )
        for c in range(img.channels)
    ], axis=-1)
    return img.with_pixels(rotated)


def _check_patch(img_shape: Tuple[int, int], top_left: Tuple[int, int], side: int):
    row, col = top_left
    height, width = img_shape
    if side < 1:
        raise ParameterError(f"patch side must be >= 1, got {side}")
    if row < 0 or col < 0 or row + side > height or col + side > width:
        raise ParameterError(
            f"patch at {top_left} with side {side} exceeds image bounds {height}×{width}"
        )


def mask_patch(img: Image, top_left: Tuple[int, int], side: int) -> Image:
    """Set a side×side square to black; everything else is left bitwise intact."""
    _check_patch(img.dimensions, top_left, side)
    row, col = top_left
    pixels = img.pixels.copy()
    pixels[row:row + side, col:col + side, :] = 0.0
    return img.with_pixels(pixels)


def _patches_overlap(a: Tuple[int, int], b: Tuple[int, int], side: int) -> bool:
    return abs(a[0] - b[0]) < side and abs(a[1] - b[1]) < side


def _swap_in_place(pixels: np.ndarray, a: Tuple[int, int], b: Tuple[int, int], side: int):
    block_a = (slice(a[0], a[0] + side), slice(a[1], a[1] + side))
    block_b = (slice(b[0], b[0] + side), slice(b[1], b[1] + side))
    saved = pixels[block_a].copy()
    pixels[block_a] = pixels[block_b]
    pixels[block_b] = saved


def swap_patches(
    img: Image,
    patch_a: Tuple[int, int],
    patch_b: Tuple[int, int],
    side: int
) -> Image:
    """Exchange two disjoint side×side blocks."""
    _check_patch(img.dimensions, patch_a, side)
    _check_patch(img.dimensions, patch_b, side)
    if _patches_overlap(patch_a, patch_b, side):
        raise ParameterError(f"patches {patch_a} and {patch_b} overlap at side {side}")
    pixels = img.pixels.copy()
    _swap_in_place(pixels, patch_a, patch_b, side)
    return img.with_pixels(pixels)


def corrupt_swap(
    img: Image,
    n_swaps: int,
    patch_side: int,
    rng: np.random.Generator
) -> Tuple[Image, SwapRecord]:
    """
    Apply n_swaps sequential swaps of two uniformly placed, disjoint patches.

    Returns the corrupted image and the record that reproduces it.
    """
    if n_swaps < 0:
        raise ParameterError(f"n_swaps must be >= 0, got {n_swaps}")
    if patch_side < 1 or 2 * patch_side > min(img.dimensions):
        raise ParameterError(
            f"swap patch {patch_side} infeasible for a {img.height}×{img.width} image "
            f"(needs 1 <= side <= min extent / 2)"
        )

    pixels = img.pixels.copy()
    max_row, max_col = img.height - patch_side, img.width - patch_side
    entries = []
    for _ in range(n_swaps):
        for _attempt in range(MAX_SWAP_ATTEMPTS):
            a = (int(rng.integers(0, max_row + 1)), int(rng.integers(0, max_col + 1)))
            b = (int(rng.integers(0, max_row + 1)), int(rng.integers(0, max_col + 1)))
            if not _patches_overlap(a, b, patch_side):
                break
        else:
            raise ParameterError(
                f"no disjoint patch pair found in {MAX_SWAP_ATTEMPTS} attempts"
            )
        _swap_in_place(pixels, a, b, patch_side)
        entries.append(SwapEntry(a, b, patch_side))

    record = SwapRecord(img.height, img.width, tuple(entries))
    return img.with_pixels(pixels), record


def uncorrupt(img: Image, record: SwapRecord) -> Image:
    """Undo a swap record by replaying its swaps in reverse order."""
    if img.dimensions != (record.height, record.width):
        raise ParameterError(
            f"swap record made for {record.height}×{record.width}, "
            f"image is {img.height}×{img.width}"
        )
    pixels = img.pixels.copy()
    for entry in reversed(record.entries):
        _swap_in_place(pixels, entry.patch_a, entry.patch_b, entry.side)
    return img.with_pixels(pixels)


def flip_channels(img: Image) -> Image:
    """Reverse the channel axis and toggle the RGB/BGR tag."""
    flipped = (
        ChannelOrder.BGR if img.channel_order is ChannelOrder.RGB else ChannelOrder.RGB
    )
    return Image(img.pixels[..., ::-1], flipped)


def preprocess(img: Image, params: Optional[PreprocessParams] = None) -> Image:
    """RGB -> BGR, then subtract the per-channel means."""
    _require_order(img, ChannelOrder.RGB, 'preprocess')
    params = params or PreprocessParams()
    bgr = img.pixels[..., ::-1] - np.asarray(params.means)
    return Image(bgr, ChannelOrder.BGR)


def deprocess(
    img: Image,
    params: Optional[PreprocessParams] = None,
    clamp: bool = False
) -> Image:
    """Add the means back and return to RGB; optionally clamp to [0, 255]."""
    _require_order(img, ChannelOrder.BGR, 'deprocess')
    params = params or PreprocessParams()
    rgb = (img.pixels + np.asarray(params.means))[..., ::-1]
    if clamp:
        rgb = np.clip(rgb, 0.0, 255.0)
    return Image(rgb, ChannelOrder.RGB)


def stack_pixels(images: Sequence[Image], dtype=np.float32) -> np.ndarray:
    """Batch images into an N×H×W×3 array."""
    if not images:
        raise UsageError("cannot stack an empty image list")
    return np.stack([img.pixels for img in images]).astype(dtype)


def load_png(path: PathLike) -> Image:
    """Read an 8-bit PNG as a canonical RGB image."""
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"image file not found: {path}")
    try:
        with PILImage.open(path) as handle:
            pixels = np.asarray(handle.convert('RGB'), dtype=np.float64)
    except (UnidentifiedImageError, OSError) as e:
        raise IngestionError(f"unreadable image {path}: {e}") from e
    return Image(pixels, ChannelOrder.RGB)


def encode_png(img: Image) -> bytes:
    _require_order(img, ChannelOrder.RGB, 'encode_png')
    raster = np.clip(np.rint(img.pixels), 0, 255).astype(np.uint8)
    buffer = io.BytesIO()
    PILImage.fromarray(raster).save(buffer, format='PNG')
    return buffer.getvalue()


def save_png(img: Image, path: PathLike):
    """Write an 8-bit RGB PNG atomically; values are rounded and clipped."""
    atomic_write_bytes(path, encode_png(img))
