import logging
from pathlib import Path
from typing import Optional

# Формат логирования
log_format = logging.Formatter(
    '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)

# Корневой логгер пакета
logger = logging.getLogger('cerebellar_control')


def setup_logging(level: str = 'INFO', log_file: Optional[str] = None) -> logging.Logger:
    """
    Настройка логирования пакета

    Args:
        level (str): Уровень логирования
        log_file (str, optional): Путь к файлу журнала
    """
    logger.setLevel(getattr(logging, level.upper(), logging.INFO))

    # Повторный вызов не должен дублировать обработчики
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()

    if log_file:
        log_path = Path(log_file)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(filename=log_path, encoding='utf-8')
        file_handler.setFormatter(log_format)
        logger.addHandler(file_handler)

    console_handler = logging.StreamHandler()
    console_handler.setFormatter(log_format)
    logger.addHandler(console_handler)
    return logger


def log_stage_action(stage: str, action: str, details: str = None):
    """
    Логирование действий стадии конвейера

    Args:
        stage (str): Имя стадии
        action (str): Тип действия
        details (str, optional): Дополнительные детали
    """
    message = f"Stage {stage} - {action}"
    if details:
        message += f" - {details}"
    logger.info(message)



def log_error(error: Exception, stage: str = None, details: str = None):
    """
    Логирование ошибок с трассировкой

    Args:
        error (Exception): Объект исключения
        stage (str, optional): Имя стадии
        details (str, optional): Дополнительные детали
    """
    message = f"Error: {str(error)}"
    if stage:
        message = f"Stage {stage} - {message}"
    if details:
        message += f" - {details}"
    logger.error(message, exc_info=True)
