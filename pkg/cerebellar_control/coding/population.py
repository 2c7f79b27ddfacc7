"""Популяционное кодирование гауссовыми кривыми настройки."""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np

from cerebellar_control.utils.exceptions import ConfigurationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TuningCurve:
    """Гауссова кривая настройки одного нейрона."""

    center: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ConfigurationError(f"Радиус кривой настройки должен быть положительным: {self.sigma}")


@dataclass
class Assembly:
    """Упорядоченный набор кривых настройки для одной скалярной переменной."""

    variable: str
    lo: float
    hi: float
    centers: np.ndarray
    sigmas: np.ndarray
    peak: float = 1.0

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=float)
        self.sigmas = np.asarray(self.sigmas, dtype=float)
        if not self.hi > self.lo:
            raise ConfigurationError(f"Вырожденный диапазон {self.variable}: [{self.lo}, {self.hi}]")
        if self.centers.size < 2:
            raise ConfigurationError(f"Ансамбль {self.variable} должен содержать не менее 2 нейронов")
        if self.centers.shape != self.sigmas.shape:
            raise ConfigurationError(f"Число центров и радиусов {self.variable} не совпадает")
        if np.any(np.diff(self.centers) < 0):
            raise ConfigurationError(f"Центры ансамбля {self.variable} должны быть упорядочены")
        if self.centers[0] < self.lo or self.centers[-1] > self.hi:
            raise ConfigurationError(f"Центры ансамбля {self.variable} выходят за диапазон")
        if np.any(self.sigmas <= 0):
            raise ConfigurationError(f"Радиусы ансамбля {self.variable} должны быть положительными")

    @classmethod
    def linear(cls, variable: str, lo: float, hi: float, size: int, peak: float = 1.0) -> 'Assembly':
        """Равномерное размещение центров с радиусом (hi - lo) / size."""
        if size < 2:
            raise ConfigurationError(f"Ансамбль {variable} должен содержать не менее 2 нейронов, получено: {size}")
        if not hi > lo:
            raise ConfigurationError(f"Вырожденный диапазон {variable}: [{lo}, {hi}]")
        centers = np.linspace(lo, hi, size)
        sigmas = np.full(size, (hi - lo) / size)
        return cls(variable=variable, lo=lo, hi=hi, centers=centers, sigmas=sigmas, peak=peak)

    @property
    def size(self) -> int:
        """Число нейронов."""
        return int(self.centers.size)

    @property
    def curves(self):
        """Кривые настройки по отдельности."""
        return [TuningCurve(float(c), float(s)) for c, s in zip(self.centers, self.sigmas)]

    def max_gap(self) -> float:
        """Наибольший промежуток между соседними центрами."""
        return float(np.max(np.diff(self.centers)))

    def nearest(self, value: float) -> int:
        """Индекс ближайшего центра (при равенстве меньший)."""
        return int(np.argmin(np.abs(self.centers - value)))

    def to_dict(self) -> Dict[str, Any]:
        """Сериализация ансамбля."""
        return {
            'variable': self.variable,
            'lo': self.lo,
            'hi': self.hi,
            'peak': self.peak,
            'centers': self.centers.tolist(),
            'sigmas': self.sigmas.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Assembly':
        """Восстановление ансамбля из словаря."""
        return cls(variable=data['variable'], lo=data['lo'], hi=data['hi'], peak=data['peak'],
                   centers=np.asarray(data['centers']), sigmas=np.asarray(data['sigmas']))


def encode(value: float, assembly: Assembly) -> np.ndarray:
    """Входные токи нейронов ансамбля для значения value."""
    value = float(value)
    if not np.isfinite(value):
        raise ConfigurationError(f"Нечисловое значение для кодирования {assembly.variable}: {value}")
    return assembly.peak * np.exp(-((value - assembly.centers) ** 2) / (2.0 * assembly.sigmas ** 2))


def decode_central(rates: np.ndarray, centers: np.ndarray) -> Optional[float]:
    """
    Декодирование по центральным значениям: взвешенное среднее центров.

    Возвращает None при полном отсутствии активности.
    """
    rates = np.asarray(rates, dtype=float)
    centers = np.asarray(centers, dtype=float)
    total = rates.sum()
    if total <= 0:
        return None
    estimate = float(np.dot(rates, centers) / total)
    # Ограничение ошибками округления выпуклой оболочкой центров
    return float(np.clip(estimate, centers.min(), centers.max()))
