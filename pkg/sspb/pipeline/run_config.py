"""
Run configuration for the experiment matrix.

A run trains one encoder per pretext task, then trains the melanoma
classifier for every (initialization, regime) cell and evaluates it on a
held-out test set.
"""

from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import Field, model_validator

from ..evaluation.metrics import SsimParams
from ..models.network_builder import DecoderConfig, EncoderConfig, HeadConfig
from ..processor.dataset import SynthConfig
from ..processor.pretext import PretextParams, PretextTask
from ..training.trainer import EarlyStoppingConfig, TrainConfig
from ..utils.config import StrictModel

DESK_EPOCHS = 30
# float32 sigmoid outputs saturate on raw zero-centred pixels at lr 0.01
DESK_LR = 0.001


class Regime(str, Enum):
    """Classifier training regime: full budget, or early stopping at patience 3 / 10."""
    NONE = 'none'
    ES3 = 'es3'
    ES10 = 'es10'

    @property
    def patience(self) -> Optional[int]:
        return {Regime.NONE: None, Regime.ES3: 3, Regime.ES10: 10}[self]

    def apply(self, cfg: TrainConfig) -> TrainConfig:
        stopping = EarlyStoppingConfig(
            enabled=self.patience is not None,
            patience=self.patience or cfg.early_stopping.patience,
            restore_best=cfg.early_stopping.restore_best,
        )
        return cfg.model_copy(update={'early_stopping': stopping})

    def label(self, epochs: int) -> str:
        if self.patience is None:
            return f"{epochs} epochs; no Early Stopping"
        return f"{epochs} epochs; Early Stopping (patience level: {self.patience})"


class InitKind(str, Enum):
    """Where the classifier's encoder weights come from."""
    NONE = 'none'
    ROTATION = 'rotation'
    MISSING_PATCH = 'missing_patch'
    CORRUPTION = 'corruption'

    @property
    def task(self) -> Optional[PretextTask]:
        return {
            InitKind.NONE: None,
            InitKind.ROTATION: PretextTask.ROTATION,
            InitKind.MISSING_PATCH: PretextTask.INPAINT,
            InitKind.CORRUPTION: PretextTask.CORRUPT,
        }[self]


class DataSource(StrictModel):
    """Either a `filepath,label` manifest or the synthetic generator."""
    manifest: Optional[str] = None
    synthetic: Optional[SynthConfig] = None
    test_size: int = Field(100, ge=1)

    @model_validator(mode='after')
    def _one_source(self) -> 'DataSource':
        if (self.manifest is None) == (self.synthetic is None):
            raise ValueError("set exactly one of manifest or synthetic")
        return self


def _desk_train(**overrides: Any) -> TrainConfig:
    return TrainConfig(lr=DESK_LR, epochs=DESK_EPOCHS, **overrides)


class RunConfig(StrictModel):
    """Everything one `sspb matrix` run depends on; hashed into the report."""
    seed: int = 0
    seeds: int = Field(1, ge=1)
    image_side: int = Field(64, ge=2)
    encoder: EncoderConfig = EncoderConfig()
    decoder: DecoderConfig = DecoderConfig()
    head: HeadConfig = HeadConfig()
    pretext: PretextParams = PretextParams()
    pretext_train: TrainConfig = Field(default_factory=_desk_train)
    classifier_train: TrainConfig = Field(default_factory=_desk_train)
    regimes: List[Regime] = Field(
        default_factory=lambda: [Regime.NONE, Regime.ES3, Regime.ES10], min_length=1
    )
    inits: List[InitKind] = Field(default_factory=lambda: list(InitKind), min_length=1)
    data: DataSource = Field(
        default_factory=lambda: DataSource(synthetic=SynthConfig(n=700))
    )
    ssim: SsimParams = SsimParams()
    dataset_means: bool = False
    output_dir: Optional[str] = None

    @model_validator(mode='before')
    @classmethod
    def _propagate_side(cls, data: Any) -> Any:
        """Image side flows into the encoder and the synthetic generator unless set."""
        if not isinstance(data, dict) or 'image_side' not in data:
            return data
        data = dict(data)
        side = data['image_side']
        encoder = dict(data.get('encoder') or {})
        encoder.setdefault('input_side', side)
        data['encoder'] = encoder
        source = data.get('data')
        if isinstance(source, dict) and isinstance(source.get('synthetic'), dict):
            synthetic = dict(source['synthetic'])
            synthetic.setdefault('side', side)
            data['data'] = {**source, 'synthetic': synthetic}
        return data

    @model_validator(mode='before')
    @classmethod
    def _desk_schedules(cls, data: Any) -> Any:
        """Partially given training schedules keep the desk lr and epochs."""
        if not isinstance(data, dict):
            return data
        data = dict(data)
        for key in ('pretext_train', 'classifier_train'):
            if isinstance(data.get(key), dict):
                data[key] = {'lr': DESK_LR, 'epochs': DESK_EPOCHS, **data[key]}
        return data

    @model_validator(mode='after')
    def _consistent(self) -> 'RunConfig':
        if self.encoder.input_side != self.image_side:
            raise ValueError(
                f"encoder.input_side {self.encoder.input_side} != image_side {self.image_side}"
            )
        synthetic = self.data.synthetic
        if synthetic is not None:
            if synthetic.side != self.image_side:
                raise ValueError(
                    f"data.synthetic.side {synthetic.side} != image_side {self.image_side}"
                )
            if synthetic.n <= self.data.test_size:
                raise ValueError("synthetic dataset must be larger than test_size")
        if len(set(self.regimes)) != len(self.regimes):
            raise ValueError("regimes must not repeat")
        if len(set(self.inits)) != len(self.inits):
            raise ValueError("inits must not repeat")
        return self

    @property
    def seed_list(self) -> List[int]:
        return [self.seed + offset for offset in range(self.seeds)]

    @property
    def pretext_tasks(self) -> List[PretextTask]:
        return [init.task for init in self.inits if init.task is not None]

    def summary(self) -> Dict[str, Any]:
        return {
            'seed': self.seed,
            'seeds': self.seeds,
            'image_side': self.image_side,
            'regimes': [r.value for r in self.regimes],
            'inits': [i.value for i in self.inits],
        }
