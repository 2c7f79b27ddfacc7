"""Цикл байесовской оптимизации: случайный старт, затем предложения TPE."""

import asyncio
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from cerebellar_control.hyperopt.space import HyperparameterSpace, Point
from cerebellar_control.hyperopt.tpe import suggest
from cerebellar_control.utils.exceptions import ConfigurationError

logger = logging.getLogger(__name__)

Objective = Callable[[Point], Tuple[float, Dict[str, Any]]]


@dataclass
class HistoryRecord:
    """Одно испытание оптимизатора."""

    index: int
    point: Point
    loss: float
    details: Dict[str, Any] = field(default_factory=dict)
    wall_time: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        """Строка истории для JSON-lines."""
        return {
            'trial': self.index,
            'h': self.point,
            'loss': self.loss,
            'components': self.details.get('components'),
            'fault': self.details.get('fault'),
            'wall_time': self.wall_time,
        }


@dataclass
class TrialHistory:
    """Упорядоченная история испытаний."""

    records: List[HistoryRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def points(self) -> List[Point]:
        return [r.point for r in self.records]

    @property
    def losses(self) -> List[float]:
        return [r.loss for r in self.records]

    @property
    def best(self) -> Optional[HistoryRecord]:
        """Испытание с наименьшей потерей; при равенстве более раннее."""
        if not self.records:
            return None
        return self.records[int(np.argmin(self.losses))]

    def best_so_far(self) -> List[float]:
        """Кривая лучшей потери по испытаниям."""
        return np.minimum.accumulate(self.losses).tolist() if self.records else []

    def append(self, record: HistoryRecord):
        self.records.append(record)


@dataclass
class OptimizationResult:
    """Лучшая точка и полная история."""

    best_point: Point
    best_loss: float
    history: TrialHistory


def _check_budget(budget: int, config):
    if budget < 1:
        raise ConfigurationError(f"Бюджет оптимизации должен быть положительным: {budget}")
    if config.startup_trials < 1:
        raise ConfigurationError("Число случайных стартовых испытаний должно быть положительным")


def _next_points(space: HyperparameterSpace, history: TrialHistory, rng: np.random.Generator,
                 config, count: int) -> List[Point]:
    """Точки следующего пакета; в пакете все предложения строятся по одной истории."""
    points = []
    for _ in range(count):
        n = len(history) + len(points)
        if n < config.startup_trials or len(history) < 2:
            points.append(space.sample(rng))
        else:
            points.append(suggest(space, history.points, history.losses, rng, config))
    return points


def _evaluate(objective: Objective, point: Point) -> Tuple[float, Dict[str, Any], float]:
    start = time.perf_counter()
    loss, details = objective(point)
    return float(loss), details, time.perf_counter() - start


def _record(history: TrialHistory, point: Point, loss: float, details: Dict[str, Any], elapsed: float,
            penalty: float) -> HistoryRecord:
    if not np.isfinite(loss):
        loss, details = penalty, {**details, 'fault': details.get('fault', 'non_finite')}
    record = HistoryRecord(index=len(history), point=point, loss=loss, details=details, wall_time=elapsed)
    history.append(record)
    return record


def optimize(
    objective: Objective,
    space: HyperparameterSpace,
    budget: int,
    seed: int,
    config,
    on_trial: Optional[Callable[[HistoryRecord], None]] = None,
) -> OptimizationResult:
    """
    Минимизация objective на пространстве space за budget испытаний.

    Первые startup_trials точек случайные, далее предложения TPE.

    Args:
        objective: функция точки, возвращающая (потеря, детали)
        space: пространство гиперпараметров
        budget: число испытаний
        seed: зерно
        config: блок OptimizerConfig
        on_trial: обработчик каждого завершённого испытания
    """
    _check_budget(budget, config)
    rng = np.random.default_rng(seed)
    history = TrialHistory()
    while len(history) < budget:
        for point in _next_points(space, history, rng, config, 1):
            loss, details, elapsed = _evaluate(objective, point)
            record = _record(history, point, loss, details, elapsed, config.penalty_loss)
            if on_trial is not None:
                on_trial(record)
    best = history.best
    logger.info(f"Оптимизация завершена: {budget} испытаний, лучшая потеря {best.loss:.6g}")
    return OptimizationResult(best_point=best.point, best_loss=best.loss, history=history)


async def optimize_async(
    objective: Objective,
    space: HyperparameterSpace,
    budget: int,
    seed: int,
    config,
    max_workers: int = 1,
    on_trial: Optional[Callable[[HistoryRecord], Any]] = None,
) -> OptimizationResult:
    """
    Вариант optimize с параллельной оценкой пакета из batch_size точек в пуле потоков.

    Предложения строятся последовательно, результаты добавляются в историю в порядке точек,
    поэтому история не зависит от порядка завершения потоков.
    """
    _check_budget(budget, config)
    rng = np.random.default_rng(seed)
    history = TrialHistory()
    loop = asyncio.get_running_loop()
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        while len(history) < budget:
            count = min(max(config.batch_size, 1), budget - len(history))
            points = _next_points(space, history, rng, config, count)
            results = await asyncio.gather(
                *[loop.run_in_executor(executor, _evaluate, objective, p) for p in points])
            for point, (loss, details, elapsed) in zip(points, results):
                record = _record(history, point, loss, details, elapsed, config.penalty_loss)
                if on_trial is not None:
                    outcome = on_trial(record)
                    if asyncio.iscoroutine(outcome):
                        await outcome
            logger.debug(f"Оптимизация: {len(history)}/{budget}, лучшая потеря {history.best.loss:.6g}")
    best = history.best
    logger.info(f"Оптимизация завершена: {budget} испытаний, лучшая потеря {best.loss:.6g}")
    return OptimizationResult(best_point=best.point, best_loss=best.loss, history=history)
