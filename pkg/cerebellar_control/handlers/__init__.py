import argparse

from .commands import register_commands


def register_all_handlers(parser: argparse.ArgumentParser):
    """Регистрирует все подкоманды"""
    register_commands(parser)
