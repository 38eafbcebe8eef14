"""
Validation utilities for the sspb toolkit.
Checks images, tensors and parameter sets before they enter a computation.
"""

import logging
from typing import Mapping, Sequence, Tuple

import numpy as np

from .error_handler import NumericError, ShapeError


class Validator:
    """
    Validator for toolkit values.

    Features:
    - Image layout and range validation
    - Finite-value checks
    - Parameter set shape validation
    """

    CANONICAL_RANGE = (0.0, 255.0)

    def __init__(self):
        self.logger = logging.getLogger(__name__)

    def validate_pixels(self, pixels: np.ndarray) -> np.ndarray:
        """
        Validate an image raster.

        Args:
            pixels: H×W×3 array

        Returns:
            The same array

        Raises:
            ShapeError: wrong rank, empty extents or channel count
            NumericError: NaN or infinite values
        """
        if pixels.ndim != 3 or pixels.shape[2] != 3:
            raise ShapeError(f"images must be H×W×3, got shape {pixels.shape}")
        if pixels.shape[0] < 1 or pixels.shape[1] < 1:
            raise ShapeError(f"image extents must be positive, got {pixels.shape[:2]}")
        if not np.isfinite(pixels).all():
            raise NumericError("image contains NaN or infinite pixel values")
        return pixels

    def is_canonical(self, pixels: np.ndarray) -> bool:
        """True if every value lies in the canonical [0, 255] range."""
        low, high = self.CANONICAL_RANGE
        return bool(pixels.min() >= low and pixels.max() <= high)

    def validate_param_set(
        self,
        params: Mapping[str, np.ndarray],
        slots: Mapping[str, Tuple[int, ...]]
    ) -> Sequence[str]:
        """
        Compare a parameter mapping to the slot shapes of a model.

        Returns:
            Sorted names that are missing or shape-mismatched
        """
        offending = []
        for name, shape in slots.items():
            array = params.get(name)
            if array is None or tuple(array.shape) != tuple(shape):
                offending.append(name)
        if offending:
            self.logger.debug(f"Parameter validation failed for {len(offending)} slots")
        return sorted(offending)
