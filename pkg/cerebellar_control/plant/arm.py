"""Плоский двухзвенный манипулятор: кинематика, шаг привода, зашумлённые датчики."""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from cerebellar_control.utils.exceptions import PlantFault
from cerebellar_control.utils.validators import Validator, validate_positive, validate_range

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ArmModel:
    """Геометрия, ограничения суставов и шумы датчиков манипулятора."""

    l1: float
    l2: float
    joint_ranges: Tuple[Tuple[float, float], Tuple[float, float]]
    joint_offsets: Tuple[float, float] = (0.0, 0.0)
    max_joint_speed: float = 30.0
    position_noise: float = 0.0
    angle_noise: float = 0.0
    velocity_noise: float = 0.0

    def __post_init__(self):
        validator = (
            Validator()
            .add_rule('links', lambda v: all(validate_positive(x) for x in v),
                      f"Длины звеньев должны быть положительными: {self.l1}, {self.l2}")
            .add_rule('joint_ranges', lambda v: len(v) == 2, "Ожидается ровно два диапазона суставов")
            .add_rule('joint_ranges', lambda v: all(validate_range(r) for r in v),
                      f"Вырожденный диапазон сустава: {list(self.joint_ranges)}")
            .add_rule('max_joint_speed', validate_positive,
                      f"Предельная скорость сустава должна быть положительной: {self.max_joint_speed}")
            .add_rule('noise', lambda v: min(v) >= 0, "Уровни шума не могут быть отрицательными")
        )
        validator.check({
            'links': (self.l1, self.l2),
            'joint_ranges': self.joint_ranges,
            'max_joint_speed': self.max_joint_speed,
            'noise': (self.position_noise, self.angle_noise, self.velocity_noise),
        })

    @classmethod
    def from_config(cls, config, noise: bool = True) -> 'ArmModel':
        """Создание модели для задачи из ExperimentConfig."""
        plant = config.plant
        offsets = plant.reach_joint_offsets if config.task == 'reach_star' else plant.deform_joint_offsets
        return cls(
            l1=plant.l1,
            l2=plant.l2,
            joint_ranges=tuple(tuple(r) for r in config.joint_ranges),
            joint_offsets=tuple(offsets),
            max_joint_speed=plant.max_joint_speed,
            position_noise=plant.position_noise if noise else 0.0,
            angle_noise=plant.angle_noise if noise else 0.0,
            velocity_noise=plant.velocity_noise if noise else 0.0,
        )

    @property
    def lower(self) -> np.ndarray:
        """Нижние границы суставов."""
        return np.array([r[0] for r in self.joint_ranges])

    @property
    def upper(self) -> np.ndarray:
        """Верхние границы суставов."""
        return np.array([r[1] for r in self.joint_ranges])

    def clamp(self, q: Sequence[float]) -> Tuple[np.ndarray, bool]:
        """Ограничение углов диапазонами; второй элемент сообщает о срабатывании."""
        q = np.asarray(q, dtype=float)
        clamped = np.clip(q, self.lower, self.upper)
        return clamped, bool(np.any(clamped != q))

    def contains(self, q: Sequence[float]) -> bool:
        """Лежат ли углы в диапазонах."""
        q = np.asarray(q, dtype=float)
        return bool(np.all(q >= self.lower) and np.all(q <= self.upper))


def fk(q: Sequence[float], arm: ArmModel, clamp: bool = True) -> Tuple[np.ndarray, bool]:
    """
    Прямая кинематика: положение схвата по углам в градусах.

    Returns:
        Tuple: положение (м) и признак ограничения углов
    """
    q = np.asarray(q, dtype=float)
    if not np.all(np.isfinite(q)):
        raise PlantFault(f"Нечисловые углы суставов: {q}")
    flag = False
    if clamp:
        q, flag = arm.clamp(q)
    t1, t2 = np.radians(q + np.asarray(arm.joint_offsets))
    x = np.array([
        arm.l1 * np.cos(t1) + arm.l2 * np.cos(t1 + t2),
        arm.l1 * np.sin(t1) + arm.l2 * np.sin(t1 + t2),
    ])
    return x, flag


def jacobian(q: Sequence[float], arm: ArmModel) -> np.ndarray:
    """Аналитический якобиан dx/dq в м/рад."""
    t1, t2 = np.radians(np.asarray(q, dtype=float) + np.asarray(arm.joint_offsets))
    s1, c1 = np.sin(t1), np.cos(t1)
    s12, c12 = np.sin(t1 + t2), np.cos(t1 + t2)
    return np.array([
        [-arm.l1 * s1 - arm.l2 * s12, -arm.l2 * s12],
        [arm.l1 * c1 + arm.l2 * c12, arm.l2 * c12],
    ])


def joint_velocity_for(q: Sequence[float], v: Sequence[float], arm: ArmModel) -> np.ndarray:
    """Скорости суставов (град/с), дающие пространственную скорость v; для проверки моделей."""
    J = jacobian(q, arm)
    return np.degrees(np.linalg.lstsq(J, np.asarray(v, dtype=float), rcond=None)[0])


def ik(x: Sequence[float], arm: ArmModel) -> Optional[np.ndarray]:
    """Обратная кинематика: решение в пределах диапазонов или None."""
    x = np.asarray(x, dtype=float)
    r2 = float(x @ x)
    cos_t2 = (r2 - arm.l1 ** 2 - arm.l2 ** 2) / (2.0 * arm.l1 * arm.l2)
    if abs(cos_t2) > 1.0:
        return None
    for sign in (1.0, -1.0):
        t2 = sign * np.arccos(cos_t2)
        t1 = np.arctan2(x[1], x[0]) - np.arctan2(arm.l2 * np.sin(t2), arm.l1 + arm.l2 * np.cos(t2))
        q = np.degrees([t1, t2]) - np.asarray(arm.joint_offsets)
        # Ближайший к середине диапазона эквивалент по модулю 360
        mid = (arm.lower + arm.upper) / 2.0
        candidate = q + 360.0 * np.round((mid - q) / 360.0)
        if arm.contains(candidate):
            return candidate
    return None


def in_workspace(x: Sequence[float], arm: ArmModel) -> bool:
    """Достижима ли точка при заданных диапазонах суставов."""
    return ik(x, arm) is not None


@dataclass
class ArmState:
    """Истинное состояние манипулятора."""

    q: np.ndarray
    x: np.ndarray
    v: np.ndarray

    @classmethod
    def at(cls, q: Sequence[float], arm: ArmModel) -> 'ArmState':
        """Состояние покоя в позе q."""
        q, _ = arm.clamp(q)
        x, _ = fk(q, arm)
        return cls(q=q, x=x, v=np.zeros(2))


@dataclass
class SensorReading:
    """Показания датчиков: углы, положение и скорость в рабочем пространстве."""

    q: np.ndarray
    x: np.ndarray
    v: np.ndarray


def _noise(rng: np.random.Generator, std: float, size: int) -> np.ndarray:
    if std <= 0:
        return np.zeros(size)
    return rng.normal(0.0, std, size)


def sense_arm(state: ArmState, arm: ArmModel, rng: np.random.Generator) -> SensorReading:
    """Показания датчиков с гауссовым шумом."""
    return SensorReading(
        q=state.q + _noise(rng, arm.angle_noise, 2),
        x=state.x + _noise(rng, arm.position_noise, 2),
        v=state.v + _noise(rng, arm.velocity_noise, 2),
    )


def step_arm(
    state: ArmState,
    u: Sequence[float],
    dt: float,
    arm: ArmModel,
    rng: np.random.Generator,
) -> Tuple[ArmState, SensorReading]:
    """
    Кинематический шаг манипулятора.

    Args:
        state: текущее состояние
        u: команда скоростей суставов, град/с
        dt: шаг, с
        arm: модель
        rng: генератор шума датчиков

    Returns:
        Tuple: новое состояние и зашумлённые показания
    """
    if dt <= 0:
        raise PlantFault(f"Шаг манипулятора должен быть положительным: {dt}")
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise PlantFault(f"Нечисловая команда скоростей: {u}")
    u = np.clip(u, -arm.max_joint_speed, arm.max_joint_speed)
    q, _ = arm.clamp(state.q + u * dt)
    x, _ = fk(q, arm)
    new_state = ArmState(q=q, x=x, v=(x - state.x) / dt)
    return new_state, sense_arm(new_state, arm, rng)
