"""
SSPB: Self-Supervised Pretext Benchmark
A numpy toolkit for pretraining image encoders on rotation prediction,
missing-patch completion and corruption removal, and for measuring how the
pretrained encoders initialize a melanoma classifier.

Version: 1.0.0
License: MIT
"""

__version__ = '1.0.0'

from .core import Tensor, Adam, gradients, save_weights, load_weights
from .processor import Image, PretextTask, build_pretext_dataset, generate_synthetic
from .models import ModelSpec, ParamSet, NetworkBuilder
from .training import TrainConfig, Trainer
from .evaluation import accuracy_pct, aad, mse, ssim, std_abs_err
from .pipeline import ExperimentPipeline, RunConfig, RunReport
from .utils import Validator, ErrorHandler, ConfigManager

__all__ = [
    'Tensor',
    'Adam',
    'gradients',
    'save_weights',
    'load_weights',
    'Image',
    'PretextTask',
    'build_pretext_dataset',
    'generate_synthetic',
    'ModelSpec',
    'ParamSet',
    'NetworkBuilder',
    'TrainConfig',
    'Trainer',
    'accuracy_pct',
    'aad',
    'mse',
    'ssim',
    'std_abs_err',
    'ExperimentPipeline',
    'RunConfig',
    'RunReport',
    'Validator',
    'ErrorHandler',
    'ConfigManager',
]
