"""Model descriptions, parameter sets and network builders."""

from .model_spec import LayerKind, LayerSpec, ModelSpec, ParamSet
from .network_builder import (
    DecoderConfig,
    EncoderConfig,
    HeadConfig,
    NetworkBuilder,
    build_classifier_head,
    build_deconv_decoder,
    build_encoder,
    encoder_spec,
    build_rotation_head,
    load_encoder_weights,
    transfer_encoder_weights,
)

__all__ = [
    'LayerKind',
    'LayerSpec',
    'ModelSpec',
    'ParamSet',
    'DecoderConfig',
    'EncoderConfig',
    'HeadConfig',
    'NetworkBuilder',
    'build_classifier_head',
    'build_deconv_decoder',
    'build_encoder',
    'encoder_spec',
    'build_rotation_head',
    'load_encoder_weights',
    'transfer_encoder_weights',
]
