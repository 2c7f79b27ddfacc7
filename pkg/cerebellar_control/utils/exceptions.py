"""Исключения для приложения."""


class SimulationError(Exception):
    """Базовое исключение симулятора."""
    pass


class ConfigurationError(SimulationError):
    """Исключение для несогласованной конфигурации эксперимента."""
    pass


class NumericalInstabilityError(SimulationError):
    """Исключение для неустойчивого численного интегрирования."""
    pass


class PlantFault(SimulationError):
    """Исключение для ошибок модели объекта управления."""
    pass


class StageOrderError(SimulationError):
    """Исключение для нарушения порядка стадий конвейера."""
    pass


class ValidationError(SimulationError):
    """Исключение для ошибок валидации данных."""
    pass


class DatabaseError(SimulationError):
    """Исключение для ошибок базы данных манифеста."""
    pass
