"""Моторный лепет: случайные цели в пространстве суставов и запись выборки."""

import logging
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
import pandas as pd

from cerebellar_control.utils.exceptions import ConfigurationError, ValidationError

logger = logging.getLogger(__name__)

BABBLE_COLUMNS = ['t', 'q1', 'q2', 'v1', 'v2', 'qdot1', 'qdot2', 'x1', 'x2', 'target_index']


@dataclass
class BabbleSample:
    """Отсчёт лепета: время (мс), углы (град), скорость (м/с), скорости суставов (град/с), положение (м)."""

    t: float
    q: np.ndarray
    v: np.ndarray
    qdot: np.ndarray
    x: np.ndarray
    target_index: int


def babble(
    plant,
    count: int,
    seed: int = 0,
    speed: float = 10.0,
    period_ms: float = 50.0,
) -> List[BabbleSample]:
    """
    Обход count случайных целей с постоянной скоростью в пространстве суставов.

    Args:
        plant: ReachPlant или DeformPlant
        count: число целей
        seed: зерно выбора целей
        speed: скорость движения, град/с
        period_ms: период записи

    Returns:
        List[BabbleSample]: отсчёты по одному на период управления
    """
    if count < 1:
        raise ConfigurationError(f"Число целей лепета должно быть не меньше 1: {count}")
    if not speed > 0:
        raise ConfigurationError(f"Скорость лепета должна быть положительной: {speed}")
    rng = np.random.default_rng(seed)
    lower, upper = plant.arm.lower, plant.arm.upper
    dt = period_ms / 1000.0
    reading = plant.reset()
    t = 0.0
    samples: List[BabbleSample] = []

    for index in range(count):
        target = rng.uniform(lower, upper)
        while True:
            error = target - plant.state.q
            distance = float(np.linalg.norm(error))
            if distance < 1e-9:
                break
            if distance <= speed * dt:
                qdot = error / dt
            else:
                qdot = speed * error / distance
            q_before, _ = plant.arm.clamp(reading.q)
            reading = plant.step(qdot, dt)
            samples.append(BabbleSample(t=t, q=q_before, v=reading.v, qdot=qdot, x=reading.x, target_index=index))
            t += period_ms
            if distance <= speed * dt:
                break
    logger.info(f"Моторный лепет: {count} целей, {len(samples)} отсчётов")
    return samples


def samples_to_frame(samples: Sequence[BabbleSample]) -> pd.DataFrame:
    """Таблица отсчётов в формате CSV лепета."""
    rows = [
        [s.t, s.q[0], s.q[1], s.v[0], s.v[1], s.qdot[0], s.qdot[1], s.x[0], s.x[1], s.target_index]
        for s in samples
    ]
    df = pd.DataFrame(rows, columns=BABBLE_COLUMNS)
    return df.astype({'target_index': 'int64'})


def frame_to_samples(df: pd.DataFrame) -> List[BabbleSample]:
    """Восстановление отсчётов из таблицы."""
    missing = [c for c in BABBLE_COLUMNS if c not in df.columns]
    if missing:
        raise ValidationError(f"В таблице лепета нет столбцов: {missing}")
    if df.empty:
        raise ValidationError("Таблица лепета пуста")
    return [
        BabbleSample(
            t=float(row.t),
            q=np.array([row.q1, row.q2]),
            v=np.array([row.v1, row.v2]),
            qdot=np.array([row.qdot1, row.qdot2]),
            x=np.array([row.x1, row.x2]),
            target_index=int(row.target_index),
        )
        for row in df.itertuples(index=False)
    ]
