import functools
import json
import logging
import sys
from typing import Callable

from cerebellar_control.utils.exceptions import (
    ConfigurationError,
    NumericalInstabilityError,
    PlantFault,
    SimulationError,
)
from cerebellar_control.utils.logging.logger import log_error

logger = logging.getLogger(__name__)


def error_handler(func: Callable) -> Callable:
    """
    Декоратор для обработки ошибок в командах.
    Логирует ошибку, печатает одну JSON-строку в stderr и возвращает код 1.
    """
    @functools.wraps(func)
    async def wrapper(*args, **kwargs):
        try:
            result = await func(*args, **kwargs)
            return 0 if result is None else result
        except SimulationError as e:
            logger.error(f"Ошибка в {func.__name__}: {e}")
            print(json.dumps({'error': type(e).__name__, 'message': str(e)}, ensure_ascii=False), file=sys.stderr)
            return 1
        except Exception as e:
            log_error(e, func.__name__, "непредвиденная ошибка")
            print(json.dumps({'error': type(e).__name__, 'message': str(e)}, ensure_ascii=False), file=sys.stderr)
            return 1

    return wrapper


def penalize_faults(penalty: float) -> Callable:
    """
    Декоратор для целевых функций оптимизатора.
    Неустойчивость сети, сбой объекта управления или недопустимая
    для кандидата конфигурация превращаются в штрафную потерю.
    """
    def decorator(func: Callable) -> Callable:
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            try:
                return func(*args, **kwargs)
            except (NumericalInstabilityError, PlantFault, ConfigurationError) as e:
                logger.warning(f"Штраф {penalty} в {func.__name__}: {e}")
                return penalty, {'fault': type(e).__name__}
        return wrapper
    return decorator


def with_session(func: Callable) -> Callable:
    """
    Декоратор для автоматического управления сессией базы данных.
    Создает сессию, передает ее в функцию и закрывает после выполнения.
    URL базы берётся из атрибута database_url первого аргумента.
    """
    @functools.wraps(func)
    async def wrapper(*args, **kwargs):
        from cerebellar_control.database.session import get_session

        database_url = getattr(args[0], 'database_url', None) if args else None
        session_gen = get_session(database_url)
        try:
            session = await session_gen.__anext__()
            return await func(*args, session=session, **kwargs)
        except Exception as e:
            logger.error(f"Ошибка в {func.__name__} с сессией БД: {e}")
            raise
        finally:
            await session_gen.aclose()

    return wrapper
