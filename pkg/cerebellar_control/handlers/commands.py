"""Подкоманды командной строки: по одной на стадию конвейера."""

import argparse
import json
import logging
from typing import Any, Callable, Dict

from cerebellar_control.services.pipeline_service import STAGES, ExperimentPipeline
from cerebellar_control.utils.decorators import error_handler
from cerebellar_control.utils.export_utils import to_builtin

logger = logging.getLogger(__name__)


def emit(result: Dict[str, Any]):
    """Печать результата стадии одной JSON-строкой в stdout."""
    print(json.dumps(to_builtin(result), ensure_ascii=False, sort_keys=True))


def pipeline_from_args(args: argparse.Namespace) -> ExperimentPipeline:
    return ExperimentPipeline(out_dir=args.out_dir, config_path=args.config, seed=args.seed)


@error_handler
async def handle_babble(args: argparse.Namespace):
    """Моторный лепет"""
    emit(await pipeline_from_args(args).cmd_babble())


@error_handler
async def handle_train_dm(args: argparse.Namespace):
    """Обучение DM"""
    emit(await pipeline_from_args(args).cmd_train_dm())


@error_handler
async def handle_optimize(args: argparse.Namespace):
    """Стадия оптимизации гиперпараметров"""
    emit(await pipeline_from_args(args).cmd_optimize(args.stage, args.budget))


@error_handler
async def handle_train_cb(args: argparse.Namespace):
    """Обучение мозжечка"""
    emit(await pipeline_from_args(args).cmd_train_cb())


@error_handler
async def handle_reach(args: argparse.Namespace):
    """Оценка на звезде целей"""
    emit(await pipeline_from_args(args).cmd_reach(args.mode, args.export))


@error_handler
async def handle_deform(args: argparse.Namespace):
    """Оценка на задаче деформации"""
    emit(await pipeline_from_args(args).cmd_deform(args.mode, args.export))


def _common(parser: argparse.ArgumentParser):
    parser.add_argument('--config', default=None, help='файл конфигурации KEY=VALUE')
    parser.add_argument('--seed', type=int, default=None, help='зерно (перекрывает конфигурацию)')
    parser.add_argument('--out-dir', default=None, help='каталог результатов')


def _evaluation(parser: argparse.ArgumentParser):
    parser.add_argument('--mode', choices=['dm_only', 'with_cb', 'both'], default='both')
    parser.add_argument('--export', choices=['none', 'pdf', 'excel'], default='none')


COMMANDS: Dict[str, Callable] = {
    'babble': handle_babble,
    'train-dm': handle_train_dm,
    'optimize': handle_optimize,
    'train-cb': handle_train_cb,
    'reach': handle_reach,
    'deform': handle_deform,
}


def register_commands(parser: argparse.ArgumentParser):
    """Подкоманды стадий; обработчик сохраняется в args.handler"""
    subparsers = parser.add_subparsers(dest='command', required=True)
    for name, handler in COMMANDS.items():
        sub = subparsers.add_parser(name, help=handler.__doc__)
        _common(sub)
        sub.set_defaults(handler=handler)
        if name == 'optimize':
            sub.add_argument('--stage', type=int, choices=list(STAGES), required=True)
            sub.add_argument('--budget', type=int, default=None, help='число испытаний')
        elif name in ('reach', 'deform'):
            _evaluation(sub)
