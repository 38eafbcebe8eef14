"""
Differentiable layer operations.

Image-like tensors are channels-last: H×W×C for a single example or
B×H×W×C for a batch. Vectors are N or B×N. Every operation accepts either
form and returns the matching form.
"""

import math
from typing import Optional, Tuple

import numpy as np
from scipy.special import expit

from ..utils.error_handler import ParameterError, ShapeError, UsageError
from .tensor import ArrayLike, Function, Tensor

PADDING_MODES = ('same', 'valid')


def conv_output_geometry(
    size: int,
    kernel: int,
    stride: int,
    padding: str
) -> Tuple[int, int, int]:
    """Output extent plus leading and trailing padding along one axis."""
    if kernel < 1 or stride < 1:
        raise ParameterError(f"kernel ({kernel}) and stride ({stride}) must be >= 1")
    if padding == 'same':
        out = math.ceil(size / stride)
        total = max((out - 1) * stride + kernel - size, 0)
        return out, total // 2, total - total // 2
    if padding == 'valid':
        out = (size - kernel) // stride + 1
        if size < kernel or out < 1:
            raise ShapeError(f"valid convolution of extent {size} with kernel {kernel}")
        return out, 0, 0
    raise ParameterError(f"padding must be one of {PADDING_MODES}, got {padding!r}")


def _batched(array: np.ndarray, rank: int, op: str) -> Tuple[np.ndarray, bool]:
    """Add a leading batch axis to single examples."""
    if array.ndim == rank:
        return array[None], False
    if array.ndim == rank + 1:
        return array, True
    raise ShapeError(f"{op} expects rank {rank} or {rank + 1}, got shape {array.shape}")


class Conv2D(Function):
    """2-D cross-correlation, channels-last, kernels Kh×Kw×C×F."""

    def forward(self, x, kernels, bias, stride=1, padding='same'):
        x, self.batched = _batched(x, 3, 'conv2d')
        if kernels.ndim != 4:
            raise ShapeError(f"conv2d kernels must be Kh×Kw×C×F, got {kernels.shape}")
        _, height, width, channels = x.shape
        k_h, k_w, k_c, filters = kernels.shape
        if channels != k_c:
            raise ShapeError(
                f"conv2d channel mismatch: input has {channels}, kernels expect {k_c}"
            )
        if bias.shape != (filters,):
            raise ShapeError(f"conv2d bias must have shape ({filters},), got {bias.shape}")

        out_h, top, bottom = conv_output_geometry(height, k_h, stride, padding)
        out_w, left, right = conv_output_geometry(width, k_w, stride, padding)
        padded = np.pad(x, ((0, 0), (top, bottom), (left, right), (0, 0)))

        dtype = np.result_type(x, kernels, bias)
        out = np.empty((x.shape[0], out_h, out_w, filters), dtype=dtype)
        out[...] = bias
        for i, j, window in self._windows(padded.shape, k_h, k_w, out_h, out_w, stride):
            out += padded[window] @ kernels[i, j]

        self.padded = padded
        self.kernels = kernels
        self.geometry = (height, width, top, left, k_h, k_w, out_h, out_w, stride)
        return out if self.batched else out[0]

    @staticmethod
    def _windows(shape, k_h, k_w, out_h, out_w, stride):
        for i in range(k_h):
            for j in range(k_w):
                yield i, j, (
                    slice(None),
                    slice(i, i + stride * (out_h - 1) + 1, stride),
                    slice(j, j + stride * (out_w - 1) + 1, stride),
                    slice(None),
                )

    def backward(self, grad):
        if not self.batched:
            grad = grad[None]
        height, width, top, left, k_h, k_w, out_h, out_w, stride = self.geometry
        padded, kernels = self.padded, self.kernels

        grad_padded = np.zeros_like(padded, dtype=np.result_type(padded, grad))
        grad_kernels = np.empty_like(kernels, dtype=np.result_type(kernels, grad))
        for i, j, window in self._windows(padded.shape, k_h, k_w, out_h, out_w, stride):
            grad_kernels[i, j] = np.tensordot(
                padded[window], grad, axes=([0, 1, 2], [0, 1, 2])
            )
            grad_padded[window] += grad @ kernels[i, j].T

        grad_x = grad_padded[:, top:top + height, left:left + width, :]
        grad_bias = grad.sum(axis=(0, 1, 2))
        return (grad_x if self.batched else grad_x[0]), grad_kernels, grad_bias


class Dense(Function):
    """Affine map input·weights + bias."""

    def forward(self, x, weights, bias):
        x, self.batched = _batched(x, 1, 'dense')
        if weights.ndim != 2 or x.shape[1] != weights.shape[0]:
            raise ShapeError(
                f"dense shape mismatch: input {x.shape[1:]} vs weights {weights.shape}"
            )
        if bias.shape != (weights.shape[1],):
            raise ShapeError(
                f"dense bias must have shape ({weights.shape[1]},), got {bias.shape}"
            )
        self.x, self.weights = x, weights
        out = x @ weights + bias
        return out if self.batched else out[0]

    def backward(self, grad):
        if not self.batched:
            grad = grad[None]
        grad_x = grad @ self.weights.T
        return (
            grad_x if self.batched else grad_x[0],
            self.x.T @ grad,
            grad.sum(axis=0),
        )


class ReLU(Function):
    def forward(self, x):
        self.mask = x > 0
        return np.where(self.mask, x, 0).astype(x.dtype)

    def backward(self, grad):
        return (grad * self.mask,)


class Sigmoid(Function):
    """Logistic squashing into (0, 1)."""

    def forward(self, x):
        self.out = expit(x)
        return self.out

    def backward(self, grad):
        return (grad * self.out * (1 - self.out),)


class GlobalAvgPool(Function):
    """Mean over the spatial axes: H×W×C -> C."""

    def forward(self, x):
        x, self.batched = _batched(x, 3, 'global_avg_pool')
        self.shape = x.shape
        out = x.mean(axis=(1, 2))
        return out if self.batched else out[0]

    def backward(self, grad):
        if not self.batched:
            grad = grad[None]
        _, height, width, _ = self.shape
        grad_x = np.broadcast_to(
            grad[:, None, None, :] / (height * width), self.shape
        ).copy()
        return (grad_x if self.batched else grad_x[0],)


class UpsampleNearest(Function):
    """Nearest-neighbour upsampling by an integer factor on both spatial axes."""

    def forward(self, x, factor=2):
        if int(factor) != factor or factor < 1:
            raise ParameterError(f"upsample factor must be an integer >= 1, got {factor}")
        x, self.batched = _batched(x, 3, 'upsample_nearest')
        self.factor = int(factor)
        self.shape = x.shape
        out = np.repeat(np.repeat(x, self.factor, axis=1), self.factor, axis=2)
        return out if self.batched else out[0]

    def backward(self, grad):
        if not self.batched:
            grad = grad[None]
        batch, height, width, channels = self.shape
        f = self.factor
        grad_x = grad.reshape(batch, height, f, width, f, channels).sum(axis=(2, 4))
        return (grad_x if self.batched else grad_x[0],)


class Dropout(Function):
    """Inverted dropout: survivors are scaled by 1/(1 - rate)."""

    def forward(self, x, rate=0.5, rng=None):
        keep = rng.random(x.shape) >= rate
        self.mask = keep.astype(x.dtype) / x.dtype.type(1 - rate)
        return x * self.mask

    def backward(self, grad):
        return (grad * self.mask,)


class MeanSquaredError(Function):
    """(1/m)·Σ(pred − target)² over all m elements."""

    def forward(self, pred, target):
        if pred.shape != target.shape:
            raise ShapeError(f"mse shape mismatch: {pred.shape} vs {target.shape}")
        self.diff = pred - target
        return np.asarray(np.mean(self.diff ** 2), dtype=self.diff.dtype)

    def backward(self, grad):
        scaled = grad * (2.0 / self.diff.size) * self.diff
        return scaled, -scaled


class BinaryCrossEntropy(Function):
    """Mean binary cross-entropy of probabilities against {0, 1} targets."""

    EPSILON = 1e-7

    def forward(self, pred, target):
        if pred.shape != target.shape:
            raise ShapeError(f"bce shape mismatch: {pred.shape} vs {target.shape}")
        self.inside = (pred > self.EPSILON) & (pred < 1 - self.EPSILON)
        self.pred = np.clip(pred, self.EPSILON, 1 - self.EPSILON)
        self.target = target
        loss = -(target * np.log(self.pred) + (1 - target) * np.log(1 - self.pred))
        return np.asarray(loss.mean(), dtype=self.pred.dtype)

    def backward(self, grad):
        p, t = self.pred, self.target
        grad_pred = grad * (p - t) / (p * (1 - p)) / p.size * self.inside
        return grad_pred, None


def conv2d(
    x: ArrayLike,
    kernels: ArrayLike,
    bias: ArrayLike,
    stride: int = 1,
    padding: str = 'same'
) -> Tensor:
    return Conv2D.apply(x, kernels, bias, stride=stride, padding=padding)


def dense(x: ArrayLike, weights: ArrayLike, bias: ArrayLike) -> Tensor:
    return Dense.apply(x, weights, bias)


def relu(x: ArrayLike) -> Tensor:
    return ReLU.apply(x)


def sigmoid(x: ArrayLike) -> Tensor:
    return Sigmoid.apply(x)


def global_avg_pool(x: ArrayLike) -> Tensor:
    return GlobalAvgPool.apply(x)


def upsample_nearest(x: ArrayLike, factor: int) -> Tensor:
    return UpsampleNearest.apply(x, factor=factor)


def dropout(
    x: ArrayLike,
    rate: float,
    training: bool,
    rng: Optional[np.random.Generator] = None
) -> Tensor:
    """
    Inverted dropout.

    With training=False (or rate 0) the input tensor itself is returned.
    """
    if not 0 <= rate < 1:
        raise ParameterError(f"dropout rate must lie in [0, 1), got {rate}")
    x = x if isinstance(x, Tensor) else Tensor(x)
    if not training or rate == 0:
        return x
    if rng is None:
        raise UsageError("dropout in training mode needs a seeded generator")
    return Dropout.apply(x, rate=rate, rng=rng)


def mse_loss(pred: ArrayLike, target: ArrayLike) -> Tensor:
    return MeanSquaredError.apply(pred, target)


def binary_crossentropy(pred: ArrayLike, target: ArrayLike) -> Tensor:
    return BinaryCrossEntropy.apply(pred, target)


def conv2d_forward(
    x: np.ndarray,
    kernels: np.ndarray,
    bias: np.ndarray,
    stride: int = 1,
    padding: str = 'same'
) -> np.ndarray:
    """Array-in, array-out convolution."""
    return conv2d(x, kernels, bias, stride, padding).data


def dense_forward(x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    return dense(x, weights, bias).data


def dropout_forward(
    x: np.ndarray,
    rate: float,
    training: bool,
    rng: Optional[np.random.Generator] = None
) -> np.ndarray:
    return dropout(x, rate, training, rng).data
