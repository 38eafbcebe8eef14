"""
Builders for the shared encoder, the pretext heads and the classifier.

Every pretext model and the melanoma classifier stack a task head on the
same staged convolutional encoder, so encoder slots (`encoder/...`) carry
over from one model to the next by name.
"""

import logging
from typing import Dict, Optional, Tuple

import numpy as np
from pydantic import Field

from ..processor.pretext import PretextTask
from ..utils.config import StrictModel
from ..utils.error_handler import ConfigError, TransferError
from ..utils.helpers import PathLike
from ..utils.validator import Validator
from .model_spec import LayerKind, LayerSpec, ModelSpec, ParamSet, Shape

logger = logging.getLogger(__name__)

ENCODER_BLOCK = 'encoder'
ROTATION_BLOCK = 'rotation_head'
DECODER_BLOCK = 'decoder'
CLASSIFIER_BLOCK = 'classifier_head'
UPSAMPLE_FACTOR = 2


class EncoderConfig(StrictModel):
    """
    Staged convolutional encoder.

    Each stage is a 3×3 same conv with ReLU followed by a stride-2 3×3 conv
    with ReLU; stage b has min(base_channels·2^b, max_channels) channels.
    """
    n_stages: int = Field(3, ge=1)
    base_channels: int = Field(16, ge=1)
    max_channels: int = Field(256, ge=1)
    input_side: int = Field(64, ge=2)

    def stage_channels(self, stage: int) -> int:
        return min(self.base_channels * 2 ** stage, self.max_channels)


class DecoderConfig(StrictModel):
    """Upsampling decoder; n_blocks defaults to the encoder stage count."""
    n_blocks: Optional[int] = Field(None, ge=1)
    top_channels: int = Field(64, ge=2)


class HeadConfig(StrictModel):
    """Rotation head sizes."""
    hidden_units: int = Field(1024, ge=1)
    dropout_rate: float = Field(0.5, ge=0, lt=1)


def _conv(block: str, name: str, in_dim: int, out_dim: int, stride: int = 1) -> LayerSpec:
    return LayerSpec(LayerKind.CONV2D, block, name, in_dim=in_dim, out_dim=out_dim, stride=stride)


def _relu(block: str, name: str) -> LayerSpec:
    return LayerSpec(LayerKind.RELU, block, name)


def _check_feature_map(shape: Shape, what: str):
    if len(shape) != 3:
        raise ConfigError(f"{what} needs an H×W×C encoder output, got {shape}")


def build_encoder(
    cfg: EncoderConfig,
    seed: int,
    dtype=np.float32
) -> Tuple[ModelSpec, ParamSet]:
    """
    Build and initialize the encoder.

    Raises:
        ConfigError: input side not divisible by 2^n_stages
    """
    spec = encoder_spec(cfg)
    return spec, spec.initialize(seed, dtype)


def encoder_spec(cfg: EncoderConfig) -> ModelSpec:
    side = cfg.input_side
    if side % (2 ** cfg.n_stages):
        raise ConfigError(
            f"input side {side} is not divisible by 2^{cfg.n_stages}"
        )

    layers = []
    in_dim = 3
    for stage in range(cfg.n_stages):
        channels = cfg.stage_channels(stage)
        layers.extend([
            _conv(ENCODER_BLOCK, f'stage{stage}_conv', in_dim, channels),
            _relu(ENCODER_BLOCK, f'stage{stage}_relu'),
            _conv(ENCODER_BLOCK, f'stage{stage}_down', channels, channels, stride=2),
            _relu(ENCODER_BLOCK, f'stage{stage}_down_relu'),
        ])
        in_dim = channels

    spec = ModelSpec(ENCODER_BLOCK, (side, side, 3), tuple(layers))
    logger.debug(f"Encoder output {spec.output_shape}, {spec.param_count()} parameters")
    return spec


def build_rotation_head(
    encoder_out_shape: Shape,
    hidden_units: int = 1024,
    dropout_rate: float = 0.5
) -> ModelSpec:
    """Pool, dense+ReLU, dropout, then a single linear output unit."""
    _check_feature_map(encoder_out_shape, 'rotation head')
    channels = encoder_out_shape[2]
    layers = (
        LayerSpec(LayerKind.GLOBAL_AVG_POOL, ROTATION_BLOCK, 'pool'),
        LayerSpec(LayerKind.DENSE, ROTATION_BLOCK, 'hidden', in_dim=channels, out_dim=hidden_units),
        _relu(ROTATION_BLOCK, 'hidden_relu'),
        LayerSpec(LayerKind.DROPOUT, ROTATION_BLOCK, 'dropout', rate=dropout_rate),
        LayerSpec(LayerKind.DENSE, ROTATION_BLOCK, 'output', in_dim=hidden_units, out_dim=1),
    )
    return ModelSpec(ROTATION_BLOCK, encoder_out_shape, layers)


def build_deconv_decoder(
    encoder_out_shape: Shape,
    n_blocks: int,
    top_channels: int
) -> ModelSpec:
    """
    Conv+ReLU+upsample blocks with halving channel counts, then a linear
    3-channel conv.

    Raises:
        ConfigError: n_blocks < 1, or top_channels not a power of two >= 2^n_blocks
    """
    _check_feature_map(encoder_out_shape, 'decoder')
    if n_blocks < 1:
        raise ConfigError(f"decoder needs at least one block, got {n_blocks}")
    if top_channels < 2 ** n_blocks or top_channels & (top_channels - 1):
        raise ConfigError(
            f"top_channels {top_channels} must be a power of two >= 2^{n_blocks}"
        )

    layers = []
    in_dim = encoder_out_shape[2]
    for block in range(n_blocks):
        channels = top_channels // 2 ** block
        layers.extend([
            _conv(DECODER_BLOCK, f'block{block}_conv', in_dim, channels),
            _relu(DECODER_BLOCK, f'block{block}_relu'),
            LayerSpec(
                LayerKind.UPSAMPLE_NEAREST, DECODER_BLOCK, f'block{block}_up',
                factor=UPSAMPLE_FACTOR
            ),
        ])
        in_dim = channels
    layers.append(_conv(DECODER_BLOCK, 'output', in_dim, 3))
    return ModelSpec(DECODER_BLOCK, encoder_out_shape, tuple(layers))


def build_classifier_head(encoder_out_shape: Shape) -> ModelSpec:
    """Pool, then one logistic unit."""
    _check_feature_map(encoder_out_shape, 'classifier head')
    layers = (
        LayerSpec(LayerKind.GLOBAL_AVG_POOL, CLASSIFIER_BLOCK, 'pool'),
        LayerSpec(
            LayerKind.DENSE, CLASSIFIER_BLOCK, 'output',
            in_dim=encoder_out_shape[2], out_dim=1
        ),
        LayerSpec(LayerKind.SIGMOID, CLASSIFIER_BLOCK, 'output_sigmoid'),
    )
    return ModelSpec(CLASSIFIER_BLOCK, encoder_out_shape, layers)


def transfer_encoder_weights(
    src: ParamSet,
    dst: ModelSpec,
    seed: int,
    dtype=np.float32
) -> ParamSet:
    """
    Copy the encoder slots of `dst` from `src`; initialize the rest afresh.

    Raises:
        TransferError: encoder slots missing from src or shaped differently
    """
    encoder_slots = dst.slots_in(ENCODER_BLOCK)
    if not encoder_slots:
        raise TransferError(f"model {dst.name} has no encoder slots")
    offending = Validator().validate_param_set(src, encoder_slots)
    if offending:
        raise TransferError("source weights do not fit the encoder", offending)

    fresh = dst.initialize(seed, dtype)
    params = fresh.replace({name: src[name] for name in encoder_slots})
    logger.info(
        f"Transferred {len(encoder_slots)} encoder tensors into {dst.name}",
        extra={'context': {'seed': seed}}
    )
    return params


def load_encoder_weights(path: PathLike, encoder: ModelSpec) -> ParamSet:
    """
    Read externally supplied encoder weights from a weight file.

    Only the encoder slots are kept; anything else in the file is ignored.
    """
    params = ParamSet.load(path)
    slots = encoder.slots_in(ENCODER_BLOCK)
    offending = Validator().validate_param_set(params, slots)
    if offending:
        raise TransferError(f"weight file {path} does not fit the encoder", offending)
    return ParamSet({name: params[name] for name in slots})


class NetworkBuilder:
    """
    Assembles full models from the encoder, decoder and head configs.

    Features:
    - One encoder definition shared by every pretext model and the classifier
    - Pretext model per task (rotation head or deconv decoder)
    - Classifier initialization, random or from transferred encoder weights
    """

    def __init__(
        self,
        encoder: EncoderConfig,
        decoder: Optional[DecoderConfig] = None,
        head: Optional[HeadConfig] = None,
        dtype=np.float32
    ):
        self.logger = logging.getLogger(__name__)
        self.encoder_config = encoder
        self.decoder_config = decoder or DecoderConfig()
        self.head_config = head or HeadConfig()
        self.dtype = dtype
        self._models: Dict[str, ModelSpec] = {}

    @property
    def encoder(self) -> ModelSpec:
        if ENCODER_BLOCK not in self._models:
            self._models[ENCODER_BLOCK] = encoder_spec(self.encoder_config)
        return self._models[ENCODER_BLOCK]

    def pretext_model(self, task: PretextTask) -> ModelSpec:
        """Encoder plus the head for `task`."""
        task = PretextTask(task)
        if task.value not in self._models:
            features = self.encoder.output_shape
            if task is PretextTask.ROTATION:
                head = build_rotation_head(
                    features, self.head_config.hidden_units, self.head_config.dropout_rate
                )
            else:
                n_blocks = self.decoder_config.n_blocks or self.encoder_config.n_stages
                head = build_deconv_decoder(features, n_blocks, self.decoder_config.top_channels)
                if head.output_shape != self.encoder.input_shape:
                    raise ConfigError(
                        f"decoder output {head.output_shape} does not match the "
                        f"input {self.encoder.input_shape}"
                    )
            self._models[task.value] = self.encoder.then(head, name=f'{task.value}_model')
        return self._models[task.value]

    def classifier(self) -> ModelSpec:
        if CLASSIFIER_BLOCK not in self._models:
            head = build_classifier_head(self.encoder.output_shape)
            self._models[CLASSIFIER_BLOCK] = self.encoder.then(head, name='classifier')
        return self._models[CLASSIFIER_BLOCK]

    def initialize(self, spec: ModelSpec, seed: int) -> ParamSet:
        return spec.initialize(seed, self.dtype)

    def classifier_params(self, init: Optional[ParamSet], seed: int) -> ParamSet:
        """Random classifier weights, or transferred encoder plus fresh head."""
        spec = self.classifier()
        if init is None:
            return spec.initialize(seed, self.dtype)
        return transfer_encoder_weights(init, spec, seed, self.dtype)
