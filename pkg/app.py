import argparse
import asyncio
import logging
import sys
from typing import Optional, Sequence

from cerebellar_control.config.settings import settings
from cerebellar_control.database.session import dispose_engines
from cerebellar_control.handlers import register_all_handlers
from cerebellar_control.utils.logging.logger import setup_logging


def build_parser() -> argparse.ArgumentParser:
    """Парсер командной строки со всеми стадиями"""
    parser = argparse.ArgumentParser(
        prog='cerebellar_control',
        description='Управление манипулятором: DM, мозжечок и предиктор Смита на импульсных сетях',
    )
    register_all_handlers(parser)
    return parser


async def main(argv: Optional[Sequence[str]] = None) -> int:
    """Основная функция запуска стадии"""
    args = build_parser().parse_args(argv)
    setup_logging(settings.LOG_LEVEL, settings.LOG_FILE)
    try:
        logging.getLogger('cerebellar_control').info(f"Command {args.command} started")
        return await args.handler(args)
    finally:
        await dispose_engines()


if __name__ == "__main__":
    try:
        sys.exit(asyncio.run(main()))
    except KeyboardInterrupt:
        logging.info("Stopped by keyboard interrupt")
        sys.exit(130)
