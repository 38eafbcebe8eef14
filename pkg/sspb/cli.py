"""
`sspb` command line interface.

Commands:
    synth     write a synthetic labeled image set
    gen       generate a pretext dataset from a manifest
    pretrain  train a pretext model on a generated dataset
    train     train the classifier from pretext weights or random init
    eval      score a trained classifier on a manifest
    matrix    run the full initialization × regime experiment

Exit status is 0 on success, 1 when a run fails and 2 for usage or
configuration errors; failures end with one `error: {...}` JSON line on
stderr.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .evaluation.metrics import EvalBatch, accuracy_pct, mse, std_abs_err
from .models.model_spec import ParamSet
from .models.network_builder import NetworkBuilder, load_encoder_weights
from .pipeline.experiment_pipeline import ExperimentPipeline, worker_limit
from .pipeline.run_config import Regime, RunConfig
from .processor.dataset import MANIFEST_NAME, SynthConfig, generate_synthetic, labeled_arrays, load_manifest
from .processor.imaging import PreprocessParams
from .processor.pretext import (
    PretextParams,
    PretextTask,
    build_pretext_dataset,
    load_pretext_dataset,
    write_pretext_dataset,
)
from .training.trainer import ArrayDataset, Trainer
from .utils.config import ConfigManager, parse_config
from .utils.error_handler import (
    ConfigError,
    ErrorHandler,
    IngestionError,
    SSPBError,
    UsageError,
)
from .utils.helpers import atomic_write_text, canonical_json, derive_seed, setup_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

WEIGHTS_FILE = 'weights.sspw'
MODEL_FILE = 'model.json'
HISTORY_FILE = 'history.csv'
RANDOM_INIT = 'random'


class CommandParser(argparse.ArgumentParser):
    """ArgumentParser that raises UsageError instead of exiting."""

    def error(self, message: str):
        raise UsageError(message)


def build_parser() -> CommandParser:
    parser = CommandParser(prog='sspb', description='Self-supervised pretext benchmark')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    parser.add_argument('--log-level', default='WARNING',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
    parser.add_argument('--log-file', default=None)
    commands = parser.add_subparsers(dest='command', required=True, parser_class=CommandParser)

    synth = commands.add_parser('synth', help='write a synthetic lesion dataset')
    synth.add_argument('--n', type=int, required=True)
    synth.add_argument('--size', type=int, required=True)
    synth.add_argument('--seed', type=int, default=0)
    synth.add_argument('--balance', type=float, default=0.5)
    synth.add_argument('--out', type=Path, required=True)

    gen = commands.add_parser('gen', help='generate pretext examples')
    gen.add_argument('--task', choices=[t.value for t in PretextTask], required=True)
    gen.add_argument('--manifest', type=Path, required=True)
    gen.add_argument('--seed', type=int, default=0)
    gen.add_argument('--out', type=Path, required=True)
    gen.add_argument('--mask-side', type=int, default=None)
    gen.add_argument('--swaps', type=int, default=None)
    gen.add_argument('--swap-patch', type=int, default=None)

    pretrain = commands.add_parser('pretrain', help='train a pretext model')
    pretrain.add_argument('--task', choices=[t.value for t in PretextTask], required=True)
    pretrain.add_argument('--data', type=Path, required=True)
    pretrain.add_argument('--config', type=Path, required=True)
    pretrain.add_argument('--out', type=Path, required=True)
    pretrain.add_argument('--seed', type=int, default=None)

    train = commands.add_parser('train', help='train the melanoma classifier')
    train.add_argument('--init', required=True, help=f'weight file or "{RANDOM_INIT}"')
    train.add_argument('--data', type=Path, required=True)
    train.add_argument('--config', type=Path, required=True)
    train.add_argument('--regime', choices=[r.value for r in Regime], default=Regime.NONE.value)
    train.add_argument('--out', type=Path, required=True)
    train.add_argument('--seed', type=int, default=None)

    evaluate = commands.add_parser('eval', help='evaluate a trained classifier')
    evaluate.add_argument('--model', type=Path, required=True)
    evaluate.add_argument('--manifest', type=Path, required=True)
    evaluate.add_argument('--report', type=Path, required=True)

    matrix = commands.add_parser('matrix', help='run the experiment matrix')
    matrix.add_argument('--config', type=Path, required=True)
    matrix.add_argument('--out', type=Path, required=True)
    matrix.add_argument('--seed', type=int, default=None)
    matrix.add_argument('--seeds', type=int, default=None)
    return parser


def _load_run_config(path: Path, **overrides: Any) -> RunConfig:
    return ConfigManager(path, RunConfig).override(**overrides)


def _emit(summary: Dict[str, Any]):
    print(json.dumps(summary, sort_keys=True, default=str))


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = parse_config(SynthConfig, {
        'n': args.n, 'side': args.size, 'seed': args.seed, 'balance': args.balance
    })
    examples = generate_synthetic(cfg, args.out)
    _emit({'images': len(examples), 'manifest': args.out / MANIFEST_NAME})
    return EXIT_OK


def cmd_gen(args: argparse.Namespace) -> int:
    overrides = {
        'mask_side': args.mask_side, 'swap_count': args.swaps, 'swap_patch': args.swap_patch
    }
    params = parse_config(PretextParams, {k: v for k, v in overrides.items() if v is not None})
    examples = load_manifest(args.manifest)
    dataset = build_pretext_dataset(
        [e.image for e in examples], args.task, params, seed=args.seed, workers=worker_limit()
    )
    manifest = write_pretext_dataset(dataset, args.out)
    _emit({'examples': len(dataset), 'task': dataset.task.value, 'manifest': manifest})
    return EXIT_OK


def cmd_pretrain(args: argparse.Namespace) -> int:
    cfg = _load_run_config(args.config, seed=args.seed)
    task = PretextTask(args.task)
    dataset = load_pretext_dataset(args.data)
    if dataset.task is not task:
        raise UsageError(f"{args.data} holds {dataset.task.value} examples, not {task.value}")

    preprocess = (
        PreprocessParams.from_images(e.input for e in dataset.examples)
        if cfg.dataset_means else PreprocessParams()
    )
    builder = NetworkBuilder(cfg.encoder, cfg.decoder, cfg.head)
    spec = builder.pretext_model(task)
    params = builder.initialize(spec, derive_seed(cfg.seed, 'init', task.value))
    train_cfg = cfg.pretext_train.model_copy(
        update={'seed': derive_seed(cfg.seed, 'train', task.value)}
    )
    params, history = Trainer(spec, train_cfg).train(
        params, ArrayDataset.from_pretext(dataset, preprocess)
    )

    params.save(args.out)
    history_path = args.out.with_name(args.out.name + '.history.csv')
    history.write_csv(history_path)
    _emit({'weights': args.out, 'history': history_path, 'epochs': history.stopped_epoch})
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _load_run_config(args.config, seed=args.seed)
    regime = Regime(args.regime)
    examples = load_manifest(args.data / MANIFEST_NAME)
    preprocess = (
        PreprocessParams.from_images(e.image for e in examples)
        if cfg.dataset_means else PreprocessParams()
    )

    builder = NetworkBuilder(cfg.encoder, cfg.decoder, cfg.head)
    init: Optional[ParamSet] = None
    if args.init != RANDOM_INIT:
        init = load_encoder_weights(args.init, builder.encoder)
    spec = builder.classifier()
    params = builder.classifier_params(init, derive_seed(cfg.seed, 'classifier'))
    train_cfg = regime.apply(cfg.classifier_train).model_copy(
        update={'seed': derive_seed(cfg.seed, 'classifier-train')}
    )
    params, history = Trainer(spec, train_cfg).train(
        params, ArrayDataset.from_labeled(examples, preprocess)
    )

    args.out.mkdir(parents=True, exist_ok=True)
    params.save(args.out / WEIGHTS_FILE)
    history.write_csv(args.out / HISTORY_FILE)
    model = {
        'config': cfg.model_dump(mode='json'),
        'init': args.init,
        'regime': regime.value,
        'preprocess_means': list(preprocess.means),
        'spec': spec.to_dict(),
        'stopped_epoch': history.stopped_epoch,
        'best_epoch': history.best_epoch,
    }
    atomic_write_text(args.out / MODEL_FILE, json.dumps(model, indent=2, sort_keys=True) + '\n')
    _emit({'model': args.out, 'epochs': history.stopped_epoch})
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    model_file = args.model / MODEL_FILE
    if not model_file.exists():
        raise IngestionError(f"no {MODEL_FILE} in {args.model}")
    with open(model_file, 'r', encoding='utf-8') as f:
        model = json.load(f)
    cfg = parse_config(RunConfig, model['config'])
    spec = NetworkBuilder(cfg.encoder, cfg.decoder, cfg.head).classifier()
    if canonical_json(spec.to_dict()) != canonical_json(model['spec']):
        raise ConfigError(f"{model_file} describes a different classifier")
    params = ParamSet.load(args.model / WEIGHTS_FILE)

    examples = load_manifest(args.manifest)
    inputs, labels = labeled_arrays(examples, PreprocessParams(tuple(model['preprocess_means'])))
    predictions = np.clip(spec.predict(params, inputs)[:, 0].astype(np.float64), 0.0, 1.0)
    batch = EvalBatch.of(labels[:, 0], predictions)
    result = {
        'accuracy_pct': accuracy_pct(batch, threshold=0.5),
        'mse': mse(batch)[0],
        'std_abs_err': std_abs_err(batch),
        'count': len(examples),
    }
    atomic_write_text(args.report, json.dumps(result, indent=2, sort_keys=True) + '\n')
    _emit(result)
    return EXIT_OK


def cmd_matrix(args: argparse.Namespace) -> int:
    cfg = _load_run_config(args.config, seed=args.seed, seeds=args.seeds)
    report = ExperimentPipeline(cfg).run(args.out)
    _emit({
        'report': args.out / 'report.json',
        'cells': len(report.table1),
        'failed': len(report.failed_cells),
    })
    return EXIT_FAILURE if report.failed_cells else EXIT_OK


COMMANDS = {
    'synth': cmd_synth,
    'gen': cmd_gen,
    'pretrain': cmd_pretrain,
    'train': cmd_train,
    'eval': cmd_eval,
    'matrix': cmd_matrix,
}

USAGE_ERRORS = (UsageError, ConfigError, IngestionError)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point; returns the process exit status."""
    command: List[str] = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(command)
        setup_logging(args.log_level, args.log_file)
        return COMMANDS[args.command](args)
    except Exception as e:
        response = ErrorHandler().build_response(e, {'argv': command})
        print(f"error: {response.to_record()}", file=sys.stderr)
        if isinstance(e, USAGE_ERRORS):
            return EXIT_USAGE
        if not isinstance(e, SSPBError):
            logger.debug(response.trace)
        return EXIT_FAILURE


if __name__ == '__main__':
    sys.exit(main())
