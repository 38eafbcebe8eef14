"""
Dense tensors with reverse-mode gradient computation.

A `Tensor` wraps a read-only NumPy array. Differentiable operations are
`Function` subclasses; applying one records the function as the output's
context so `backward()` can walk the graph from a scalar loss back to every
leaf that requires a gradient.
"""

import logging
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np

from ..utils.error_handler import NumericError, UsageError

logger = logging.getLogger(__name__)

DEFAULT_DTYPE = np.float32
FLOAT_DTYPES = (np.float32, np.float64)

ArrayLike = Union['Tensor', np.ndarray, float, int, list]


def _check_finite(array: np.ndarray, where: str):
    if not np.isfinite(array).all():
        raise NumericError(f"{where} contains NaN or infinite values")


class Tensor:
    """
    Immutable dense N-dimensional real array.

    Values are 32-bit by default; pass a float64 array (or dtype=np.float64)
    for the 64-bit mode used by gradient checks.
    """

    __slots__ = ('data', 'requires_grad', 'grad', 'name', '_ctx')

    def __init__(
        self,
        data: Any,
        requires_grad: bool = False,
        dtype: Optional[np.dtype] = None,
        name: Optional[str] = None
    ):
        if isinstance(data, Tensor):
            data = data.data
        if dtype is None:
            dtype = (
                data.dtype
                if isinstance(data, np.ndarray) and data.dtype.type in FLOAT_DTYPES
                else DEFAULT_DTYPE
            )
        array = np.array(data, dtype=dtype, copy=True)
        _check_finite(array, name or 'tensor')
        array.flags.writeable = False

        self.data = array
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._ctx: Optional['Function'] = None

    @classmethod
    def _result(
        cls,
        array: np.ndarray,
        ctx: Optional['Function'],
        requires_grad: bool
    ) -> 'Tensor':
        """Wrap an operation output without copying."""
        out = cls.__new__(cls)
        array.flags.writeable = False
        out.data = array
        out.requires_grad = requires_grad
        out.grad = None
        out.name = None
        out._ctx = ctx if requires_grad else None
        return out

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        """Writable copy of the values."""
        return self.data.copy()

    def item(self) -> float:
        if self.size != 1:
            raise UsageError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self):
        self.grad = None

    def backward(self):
        """
        Accumulate d(self)/d(leaf) into `.grad` of every leaf requiring grad.

        Raises:
            UsageError: if this tensor is not a scalar
        """
        if self.size != 1:
            raise UsageError(
                f"backward() requires a scalar loss, got shape {self.shape}"
            )
        if not self.requires_grad:
            return

        order = _topological_order(self)
        pending: Dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}

        for node in reversed(order):
            grad = pending.pop(id(node), None)
            if grad is None:
                continue
            if node._ctx is None:
                node.grad = grad if node.grad is None else node.grad + grad
                continue

            parent_grads = node._ctx.backward(grad)
            for parent, parent_grad in zip(node._ctx.parents, parent_grads):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in pending:
                    pending[key] = pending[key] + parent_grad
                else:
                    pending[key] = parent_grad

    def __repr__(self) -> str:
        label = f", name={self.name!r}" if self.name else ''
        return (
            f"Tensor(shape={self.shape}, dtype={self.dtype.name}, "
            f"requires_grad={self.requires_grad}{label})"
        )


def as_tensor(value: ArrayLike) -> Tensor:
    """Pass tensors through, wrap anything else as a constant."""
    return value if isinstance(value, Tensor) else Tensor(value)


def _topological_order(root: Tensor) -> List[Tensor]:
    """Post-order of the graph under `root` (parents before children)."""
    order: List[Tensor] = []
    visited = set()
    stack: List[Tuple[Tensor, bool]] = [(root, False)]

    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        if node._ctx is not None:
            for parent in node._ctx.parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))

    return order


class Function:
    """
    Base class for differentiable operations.

    `forward` receives the parents' arrays plus keyword attributes and may
    stash whatever `backward` needs on `self`. `backward` receives dL/d(out)
    and returns one gradient (or None) per parent, in parent order.
    """

    def __init__(self, *parents: Tensor):
        self.parents = parents

    def forward(self, *arrays: np.ndarray, **attrs: Any) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__}.forward")

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        raise NotImplementedError(f"{type(self).__name__}.backward")

    @classmethod
    def apply(cls, *inputs: ArrayLike, **attrs: Any) -> Tensor:
        parents = tuple(as_tensor(value) for value in inputs)
        ctx = cls(*parents)
        out = ctx.forward(*(p.data for p in parents), **attrs)
        _check_finite(out, f"{cls.__name__} output")
        requires_grad = any(p.requires_grad for p in parents)
        return Tensor._result(out, ctx, requires_grad)


def gradients(
    loss: Tensor,
    params: Mapping[str, Tensor]
) -> Dict[str, np.ndarray]:
    """
    Gradients of a scalar loss for every named parameter.

    Parameters that are not on a path to the loss get zero gradients of
    their own shape.
    """
    for tensor in params.values():
        tensor.zero_grad()
    loss.backward()
    return {
        name: (tensor.grad if tensor.grad is not None else np.zeros_like(tensor.data))
        for name, tensor in params.items()
    }
