"""Numerics core: tensors, layer operations, gradients, Adam and weight files."""

from .tensor import Tensor, Function, as_tensor, gradients
from .layers import (
    conv2d,
    dense,
    relu,
    sigmoid,
    global_avg_pool,
    upsample_nearest,
    dropout,
    mse_loss,
    binary_crossentropy,
    conv2d_forward,
    dense_forward,
    dropout_forward,
    conv_output_geometry,
)
from .optim import Adam, AdamState, adam_step
from .serialization import encode_weights, decode_weights, save_weights, load_weights

__all__ = [
    'Tensor',
    'Function',
    'as_tensor',
    'gradients',
    'conv2d',
    'dense',
    'relu',
    'sigmoid',
    'global_avg_pool',
    'upsample_nearest',
    'dropout',
    'mse_loss',
    'binary_crossentropy',
    'conv2d_forward',
    'dense_forward',
    'dropout_forward',
    'conv_output_geometry',
    'Adam',
    'AdamState',
    'adam_step',
    'encode_weights',
    'decode_weights',
    'save_weights',
    'load_weights',
]
