from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Sequence, Tuple

import numpy as np

from cerebellar_control.utils.exceptions import ConfigurationError


def validate_range(value: Sequence[float]) -> bool:
    """
    Проверка невырожденного диапазона [lo, hi].

    Args:
        value: Пара границ

    Returns:
        bool: True если lo < hi и обе границы конечны
    """
    if len(value) != 2:
        return False
    lo, hi = value
    return bool(np.isfinite(lo) and np.isfinite(hi) and lo < hi)


def validate_divisible(value: Tuple[int, int]) -> bool:
    """Проверка делимости размера популяции на число ансамблей."""
    size, parts = value
    return parts > 0 and size % parts == 0


def validate_positive(value: float) -> bool:
    """Проверка строгой положительности."""
    return bool(np.isfinite(value) and value > 0)


@dataclass(frozen=True)
class Rule:
    """Правило: предикат над значением ключа и сообщение при нарушении."""

    key: str
    predicate: Callable[[Any], bool]
    message: str


@dataclass
class Validator:
    """
    Набор правил для проверки описаний сети и объекта.

    На один ключ можно повесить несколько правил; ключи, отсутствующие
    в данных, пропускаются.
    """

    rules: List[Rule] = field(default_factory=list)

    def add_rule(self, key: str, predicate: Callable[[Any], bool], message: str) -> 'Validator':
        """Добавление правила; возвращает сам валидатор для цепочки вызовов."""
        self.rules.append(Rule(key, predicate, message))
        return self

    def validate(self, data: Mapping[str, Any]) -> List[str]:
        """Сообщения нарушенных правил в порядке добавления."""
        return [rule.message for rule in self.rules if rule.key in data and not rule.predicate(data[rule.key])]

    def check(self, data: Dict[str, Any]) -> None:
        """Проверка с исключением ConfigurationError, объединяющим все ошибки."""
        errors = self.validate(data)
        if errors:
            raise ConfigurationError('; '.join(errors))
