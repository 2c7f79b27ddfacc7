"""Пространство гиперпараметров и подмножества для послойной настройки."""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Literal, Sequence, Tuple

import numpy as np

from cerebellar_control.utils.exceptions import ConfigurationError

logger = logging.getLogger(__name__)

Point = Dict[str, Any]


@dataclass(frozen=True)
class Dimension:
    """
    Измерение пространства.

    name совпадает с плоским ключом конфигурации, поэтому точка пространства
    сразу является оверлеем конфигурации.
    """

    name: str
    kind: Literal['float', 'int', 'categorical'] = 'float'
    lo: float = 0.0
    hi: float = 1.0
    choices: Tuple[Any, ...] = ()

    def __post_init__(self):
        if self.kind == 'categorical':
            if not self.choices:
                raise ConfigurationError(f"Категориальное измерение {self.name} без вариантов")
        elif not (np.isfinite(self.lo) and np.isfinite(self.hi) and self.lo < self.hi):
            raise ConfigurationError(f"Некорректные границы измерения {self.name}: [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        """Ширина диапазона."""
        return float(self.hi - self.lo)

    def sample(self, rng: np.random.Generator) -> Any:
        """Равномерная выборка значения."""
        if self.kind == 'categorical':
            return self.choices[int(rng.integers(len(self.choices)))]
        if self.kind == 'int':
            return int(rng.integers(int(self.lo), int(self.hi) + 1))
        return float(rng.uniform(self.lo, self.hi))

    def clip(self, value: Any) -> Any:
        """Приведение значения к границам и типу измерения."""
        if self.kind == 'categorical':
            if value not in self.choices:
                raise ConfigurationError(f"Значение {value!r} не входит в варианты {self.name}")
            return value
        value = float(np.clip(value, self.lo, self.hi))
        return int(round(value)) if self.kind == 'int' else value

    def to_numeric(self, value: Any) -> float:
        """Числовое представление (индекс для категорий)."""
        if self.kind == 'categorical':
            return float(self.choices.index(value))
        return float(value)


@dataclass
class HyperparameterSpace:
    """Упорядоченный набор измерений."""

    dimensions: List[Dimension] = field(default_factory=list)

    def __post_init__(self):
        names = [d.name for d in self.dimensions]
        if len(set(names)) != len(names):
            raise ConfigurationError("Повторяющиеся имена измерений")
        if not self.dimensions:
            raise ConfigurationError("Пустое пространство гиперпараметров")

    def __len__(self) -> int:
        return len(self.dimensions)

    def __iter__(self):
        return iter(self.dimensions)

    @property
    def names(self) -> List[str]:
        """Имена измерений."""
        return [d.name for d in self.dimensions]

    def sample(self, rng: np.random.Generator) -> Point:
        """Равномерная случайная точка."""
        return {d.name: d.sample(rng) for d in self.dimensions}

    def clip(self, point: Point) -> Point:
        """Точка в границах пространства."""
        return {d.name: d.clip(point[d.name]) for d in self.dimensions}

    def contains(self, point: Point) -> bool:
        """Лежит ли точка в пространстве."""
        for d in self.dimensions:
            value = point.get(d.name)
            if d.kind == 'categorical':
                if value not in d.choices:
                    return False
            elif value is None or not d.lo <= value <= d.hi:
                return False
        return True


def _scaled(name: str, value: float, low: float = 0.5, high: float = 1.5) -> Dimension:
    """Измерение вокруг значения по умолчанию с сохранением знака."""
    bounds = sorted((value * low, value * high))
    if bounds[0] == bounds[1]:
        bounds = [value - 1.0, value + 1.0]
    return Dimension(name, 'float', bounds[0], bounds[1])


def _neuron_dims(population: str, config) -> List[Dimension]:
    params = config.cerebellum.neurons[population]
    prefix = f"CEREBELLUM__NEURONS__{population.upper()}"
    return [
        _scaled(f"{prefix}__A", params.a),
        _scaled(f"{prefix}__B", params.b),
        Dimension(f"{prefix}__C", 'float', params.c - 10.0, params.c + 10.0),
        _scaled(f"{prefix}__D", params.d),
    ]


def _weight_dim(projection: str, config) -> Dimension:
    w_init = config.cerebellum.projections[projection].w_init
    return _scaled(f"CEREBELLUM__PROJECTIONS__{projection.upper()}__W_INIT", w_init)


def objective_space(index: int, config) -> HyperparameterSpace:
    """
    Подмножество пространства для целевой функции index.

    1: параметры MF и амплитуда входа; 2: GC/GgC и веса MF→GC/GgC, GC↔GgC;
    3: PC/BC, константы пластичности PF и вес лазящего волокна;
    4: DCN/IO, веса MF→DCN, IO→DCN, PC→DCN и мёртвая зона.
    """
    if index == 1:
        dims = _neuron_dims('mf', config)
        dims.append(Dimension('CEREBELLUM__MF_DRIVE_AMPLITUDE', 'float', 5.0, 40.0))
    elif index == 2:
        dims = _neuron_dims('gc', config) + _neuron_dims('ggc', config)
        dims += [_weight_dim(p, config) for p in ('mf_gc', 'mf_ggc', 'gc_ggc', 'ggc_gc')]
    elif index == 3:
        dims = _neuron_dims('pc', config) + _neuron_dims('bc', config)
        dims += [
            Dimension('CEREBELLUM__PF_RULE__S_A', 'float', 0.01, 0.5),
            Dimension('CEREBELLUM__PF_RULE__S_B', 'float', 0.01, 0.5),
            Dimension('CEREBELLUM__PF_RULE__TAU_A', 'float', 5.0, 50.0),
            Dimension('CEREBELLUM__PF_RULE__TAU_B', 'float', 5.0, 50.0),
            _weight_dim('io_pc', config),
        ]
    elif index == 4:
        dims = _neuron_dims('dcn', config) + _neuron_dims('io', config)
        dims += [_weight_dim(p, config) for p in ('mf_dcn', 'io_dcn', 'pc_dcn')]
        dims += [
            Dimension('CEREBELLUM__DEAD_BAND', 'float', 0.01, 0.3),
            Dimension('CEREBELLUM__IO_DRIVE_MAX', 'float', 4.0, 20.0),
        ]
    else:
        raise ConfigurationError(f"Неизвестная целевая функция: {index}")
    return HyperparameterSpace(dims)


def numeric_matrix(space: HyperparameterSpace, points: Sequence[Point]) -> np.ndarray:
    """Матрица (N, D) числовых значений точек."""
    rows = [[d.to_numeric(p[d.name]) for d in space] for p in points]
    return np.array(rows, dtype=float).reshape(len(points), len(space))
