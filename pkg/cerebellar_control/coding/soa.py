"""Самоорганизация одномерных кривых настройки по данным моторного лепета."""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from cerebellar_control.coding.population import Assembly
from cerebellar_control.utils.exceptions import ConfigurationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SoaConfig:
    """K итераций, начальная скорость обучения и начальный радиус соседства."""

    K: int = 5000
    rho0: float = 0.1
    theta0: Optional[float] = None

    def __post_init__(self):
        if self.K < 1:
            raise ConfigurationError(f"Число итераций SOA должно быть не меньше 1: {self.K}")
        if not 0 < self.rho0 <= 1:
            raise ConfigurationError(f"Начальная скорость обучения вне (0, 1]: {self.rho0}")
        if self.theta0 is not None and not self.theta0 > 0:
            raise ConfigurationError(f"Начальный радиус соседства должен быть положительным: {self.theta0}")

    @classmethod
    def from_config(cls, block) -> 'SoaConfig':
        """Создание из блока SoaModel."""
        return cls(K=block.k, rho0=block.rho0, theta0=block.theta0)


def learning_rate(k, config: SoaConfig):
    """Скорость обучения на итерации k."""
    return config.rho0 * np.exp(-np.asarray(k, dtype=float) / config.K)


def neighborhood_radius(k, config: SoaConfig, size: int):
    """Радиус соседства (в индексах нейронов) на итерации k."""
    theta0 = config.theta0 if config.theta0 is not None else size / 4.0
    return theta0 * np.exp(-np.asarray(k, dtype=float) / config.K)


def soa_fit(samples: Sequence[float], assembly: Assembly, config: SoaConfig, seed: int = 0) -> Assembly:
    """
    Адаптация центров ансамбля к выборке.

    На каждой итерации случайный образец притягивает победителя и его
    соседей по индексу с гауссовым весом; радиусы задаются расстоянием
    до следующего центра.
    """
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size == 0:
        raise ConfigurationError(f"Пустая выборка для адаптации ансамбля {assembly.variable}")
    rng = np.random.default_rng(seed)
    centers = assembly.centers.copy()
    index = np.arange(centers.size)
    draws = samples[rng.integers(0, samples.size, size=config.K)]

    for k, xi in enumerate(draws):
        bmu = int(np.argmin((centers - xi) ** 2))
        rho = learning_rate(k, config)
        theta = neighborhood_radius(k, config, centers.size)
        nu = np.exp(-((index - bmu) ** 2) / (2.0 * theta ** 2))
        centers += rho * nu * (xi - centers)

    centers = np.sort(np.clip(centers, assembly.lo, assembly.hi))
    floor = 1e-3 * (assembly.hi - assembly.lo) / centers.size
    sigmas = np.empty_like(centers)
    sigmas[:-1] = np.maximum(np.abs(np.diff(centers)), floor)
    sigmas[-1] = sigmas[-2]
    logger.debug(f"SOA {assembly.variable}: центры в [{centers[0]:.4f}, {centers[-1]:.4f}]")
    return Assembly(variable=assembly.variable, lo=assembly.lo, hi=assembly.hi,
                    centers=centers, sigmas=sigmas, peak=assembly.peak)
