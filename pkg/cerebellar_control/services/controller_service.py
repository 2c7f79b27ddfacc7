"""Контур управления с предиктором Смита: цели, коррекция предсказания, задержка, испытания."""

import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Deque, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from cerebellar_control.plant.arm import ArmModel, in_workspace
from cerebellar_control.services.cerebellum_service import Cerebellum, cb_predict, cb_train_step
from cerebellar_control.services.dm_service import DmTopology, dm_infer
from cerebellar_control.utils.exceptions import ConfigurationError, PlantFault
from cerebellar_control.utils.utils import angular_error, point_segment_distance, unit_vector

logger = logging.getLogger(__name__)

__all__ = [
    'ControlFrame', 'DelayLine', 'TrialMode', 'TrialRecord', 'angular_error', 'correct_prediction',
    'desired_velocity', 'run_trial', 'spread_targets', 'star_targets',
]

FRAME_COLUMNS = [
    't', 'q1', 'q2', 'x1', 'x2', 'v1', 'v2', 'v_star1', 'v_star2', 'v_pred1', 'v_pred2',
    'v_check1', 'v_check2', 'v_hat1', 'v_hat2', 'e1', 'e2', 'u1', 'u2', 'e_pred',
]


class TrialMode(str, Enum):
    """Режим испытания."""

    DM_ONLY = 'dm_only'
    WITH_CB = 'with_cb'
    TRAIN_CB = 'train_cb'


class TrialOutcome(str, Enum):
    """Исход испытания."""

    REACHED = 'reached'
    TIMEOUT = 'timeout'


def desired_velocity(x: Sequence[float], x_star: Sequence[float], arrival_radius: float) -> Optional[np.ndarray]:
    """
    Единичное направление от текущего положения к цели.

    Returns:
        np.ndarray или None, если цель достигнута
    """
    x, x_star = np.asarray(x, dtype=float), np.asarray(x_star, dtype=float)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(x_star))):
        raise PlantFault(f"Нечисловое положение или цель: {x}, {x_star}")
    delta = x_star - x
    distance = float(np.linalg.norm(delta))
    if distance < arrival_radius:
        return None
    return delta / distance


def correct_prediction(
    v_star: Sequence[float],
    v_future: Sequence[float],
    e: Sequence[float],
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Коррекция предсказания ошибкой прошлого цикла и зеркальная модуляция желаемой скорости.

    Returns:
        Tuple: скорректированное предсказание v̌ = ṽ + e и модулированная скорость v̂ = 2v* - v̌
    """
    v_check = np.asarray(v_future, dtype=float) + np.asarray(e, dtype=float)
    v_hat = 2.0 * np.asarray(v_star, dtype=float) - v_check
    return v_check, v_hat


class DelayLine:
    """Линия задержки на фиксированное число периодов управления."""

    def __init__(self, steps: int, fill: Any = None):
        if steps < 0:
            raise ConfigurationError(f"Задержка не может быть отрицательной: {steps}")
        self.steps = steps
        self._buffer: Deque[Any] = deque([fill] * steps)

    @classmethod
    def from_times(cls, delay_ms: float, period_ms: float, fill: Any = None) -> 'DelayLine':
        """Линия для задержки delay_ms, кратной периоду."""
        steps = delay_ms / period_ms
        if abs(steps - round(steps)) > 1e-9:
            raise ConfigurationError(f"Задержка {delay_ms} мс не кратна периоду {period_ms} мс")
        return cls(int(round(steps)), fill)

    def __len__(self) -> int:
        return len(self._buffer)

    def push(self, item: Any) -> Any:
        """Запись нового элемента; возвращает элемент, выданный steps периодов назад."""
        self._buffer.append(item)
        return self._buffer.popleft()


@dataclass
class ControlFrame:
    """Один период управления."""

    t: float
    q: np.ndarray
    x: np.ndarray
    v: np.ndarray
    v_star: np.ndarray
    u: np.ndarray
    v_pred: Optional[np.ndarray] = None
    v_check: Optional[np.ndarray] = None
    v_hat: Optional[np.ndarray] = None
    e: Optional[np.ndarray] = None
    e_pred: Optional[float] = None

    def row(self) -> List[float]:
        """Строка таблицы кадров; отсутствующие величины как NaN."""
        nan2 = (np.nan, np.nan)
        values = [self.t]
        for vec in (self.q, self.x, self.v, self.v_star, self.v_pred, self.v_check, self.v_hat, self.e, self.u):
            values.extend(nan2 if vec is None else (float(vec[0]), float(vec[1])))
        values.append(np.nan if self.e_pred is None else self.e_pred)
        return values


@dataclass
class TrialRecord:
    """Запись испытания и его метрики."""

    mode: TrialMode
    start: np.ndarray
    target: np.ndarray
    frames: List[ControlFrame] = field(default_factory=list)
    outcome: TrialOutcome = TrialOutcome.TIMEOUT
    final_position: Optional[np.ndarray] = None
    period_s: float = 0.05

    @property
    def max_deviation(self) -> float:
        """Максимальное отклонение от отрезка старт-цель, м."""
        if not self.frames:
            return 0.0
        return max(point_segment_distance(f.x, self.start, self.target) for f in self.frames)

    @property
    def execution_time(self) -> float:
        """Время выполнения, с."""
        return len(self.frames) * self.period_s

    @property
    def final_error(self) -> float:
        """Расстояние от конечного положения до цели, м."""
        end = self.final_position if self.final_position is not None else self.start
        return float(np.linalg.norm(np.asarray(self.target) - end))

    @property
    def mean_e_pred(self) -> float:
        """Средняя угловая ошибка предсказания, рад; NaN без предсказаний."""
        values = [f.e_pred for f in self.frames if f.e_pred is not None]
        return float(np.mean(values)) if values else float('nan')

    @property
    def reached(self) -> bool:
        return self.outcome == TrialOutcome.REACHED

    def to_frame(self) -> pd.DataFrame:
        """Таблица кадров испытания."""
        return pd.DataFrame([f.row() for f in self.frames], columns=FRAME_COLUMNS)

    def summary(self) -> Dict[str, Any]:
        """Сводка испытания."""
        return {
            'mode': self.mode.value,
            'outcome': self.outcome.value,
            'max_deviation': self.max_deviation,
            'execution_time': self.execution_time,
            'final_error': self.final_error,
            'mean_e_pred': self.mean_e_pred,
            'frames': len(self.frames),
        }


def run_trial(
    dm: DmTopology,
    cerebellum: Optional[Cerebellum],
    plant,
    target: Sequence[float],
    mode: TrialMode,
    config,
) -> TrialRecord:
    """
    Испытание от текущей позы объекта управления до цели.

    Args:
        dm: обученная сеть DM
        cerebellum: мозжечок; обязателен для with_cb и train_cb
        plant: ReachPlant или DeformPlant, уже в стартовой позе
        target: цель в пространстве задачи, м
        mode: режим испытания
        config: блок ControllerConfig

    Returns:
        TrialRecord: кадры и метрики
    """
    mode = TrialMode(mode)
    if mode != TrialMode.DM_ONLY and cerebellum is None:
        raise ConfigurationError(f"Режим {mode.value} требует мозжечок")
    period_ms = config.period_ms
    dt = period_ms / 1000.0
    commands = DelayLine.from_times(config.delay_ms, period_ms, fill=np.zeros(2))
    predictions = DelayLine.from_times(config.delay_ms, period_ms)
    max_cycles = int(np.ceil(config.timeout_s * 1000.0 / period_ms))

    target = np.asarray(target, dtype=float)
    reading = plant.sense()
    record = TrialRecord(mode=mode, start=reading.x.copy(), target=target, period_s=dt)
    last_error = np.zeros(2)
    t = 0.0

    for _ in range(max_cycles):
        v_star = desired_velocity(reading.x, target, config.arrival_radius)
        if v_star is None:
            record.outcome = TrialOutcome.REACHED
            break
        v_pred = v_check = None
        if mode == TrialMode.DM_ONLY:
            v_hat = v_star
        else:
            v_pred = cb_predict(cerebellum, reading.q, v_star)
            v_check, v_hat = correct_prediction(v_star, v_pred, last_error)
        u = dm_infer(dm, reading.q, v_hat * config.cruise_speed)

        applied = commands.push(u)
        issued = predictions.push((reading.q.copy(), v_star, v_pred))
        reading = plant.step(applied, dt)

        e = e_pred = None
        direction = unit_vector(reading.v)
        if issued is not None and direction is not None and mode != TrialMode.DM_ONLY:
            q_then, v_star_then, v_pred_then = issued
            if mode == TrialMode.TRAIN_CB:
                result = cb_train_step(cerebellum, q_then, v_star_then, direction)
                e, e_pred = result.e, result.e_pred
            else:
                e = direction - v_pred_then
                e_pred, _ = angular_error(v_pred_then, direction)
            last_error = e

        record.frames.append(ControlFrame(
            t=t, q=reading.q.copy(), x=reading.x.copy(), v=reading.v.copy(), v_star=v_star, u=applied,
            v_pred=v_pred, v_check=v_check, v_hat=None if mode == TrialMode.DM_ONLY else v_hat, e=e, e_pred=e_pred,
        ))
        t += period_ms

    record.final_position = reading.x.copy()
    logger.debug(f"Испытание {mode.value}: {record.outcome.value}, кадров {len(record.frames)}, "
                 f"отклонение {record.max_deviation:.4f} м")
    return record


def star_targets(center: Sequence[float], radius: float = 0.07, arm: Optional[ArmModel] = None) -> List[np.ndarray]:
    """
    Восемь целей звезды через 45° на окружности радиуса radius.

    Цель 0 лежит на оси x от центра.
    """
    center = np.asarray(center, dtype=float)
    targets = []
    for k in range(8):
        angle = np.radians(45.0 * k)
        target = center + radius * np.array([np.cos(angle), np.sin(angle)])
        if arm is not None and not in_workspace(target, arm):
            raise ConfigurationError(f"Цель звезды {k} {target} вне рабочей зоны манипулятора")
        targets.append(target)
    return targets


def spread_targets(
    candidates: np.ndarray,
    count: int,
    min_separation: float,
    rng: np.random.Generator,
    retries: int = 1000,
) -> List[np.ndarray]:
    """
    Случайные цели из исследованной области с попарным расстоянием не меньше min_separation.

    Args:
        candidates: массив (N, 2) положений, посещённых при лепете
        count: число целей
        min_separation: минимальное расстояние между целями, м
        rng: генератор случайных чисел
        retries: число попыток построения набора
    """
    candidates = np.asarray(candidates, dtype=float)
    if len(candidates) < count:
        raise ConfigurationError(f"Недостаточно положений для {count} целей: {len(candidates)}")
    for _ in range(retries):
        chosen: List[np.ndarray] = []
        for index in rng.permutation(len(candidates)):
            point = candidates[index]
            if all(np.linalg.norm(point - other) >= min_separation for other in chosen):
                chosen.append(point.copy())
                if len(chosen) == count:
                    return chosen
    raise ConfigurationError(
        f"Не удалось выбрать {count} целей на расстоянии ≥ {min_separation} м за {retries} попыток")
