"""Объекты управления для двух задач: достижение точки и перемещение центроида объекта."""

import logging
from typing import Optional, Sequence, Union

import numpy as np

from cerebellar_control.plant.arm import ArmModel, ArmState, SensorReading, fk, sense_arm, step_arm
from cerebellar_control.plant.camera import VirtualCamera, render_and_centroid
from cerebellar_control.plant.deformable import DeformableObject, object_step
from cerebellar_control.utils.exceptions import PlantFault

logger = logging.getLogger(__name__)

Seed = Union[int, Sequence[int]]


class ReachPlant:
    """Манипулятор, положение схвата измеряется напрямую."""

    def __init__(self, arm: ArmModel, home: Sequence[float], seed: int = 0):
        self.arm = arm
        self.home = np.asarray(home, dtype=float)
        self.rng = np.random.default_rng(seed)
        self.state = ArmState.at(self.home, arm)

    @property
    def joint_ranges(self):
        """Диапазоны суставов."""
        return self.arm.joint_ranges

    def reseed(self, seed: Optional[Seed]):
        """Новый поток шума датчиков; None оставляет текущий."""
        if seed is not None:
            self.rng = np.random.default_rng(seed)

    def reset(self, q: Optional[Sequence[float]] = None, seed: Optional[Seed] = None) -> SensorReading:
        """Возврат в позу q (по умолчанию домашнюю); seed задаёт шум испытания."""
        self.reseed(seed)
        self.state = ArmState.at(self.home if q is None else q, self.arm)
        return self.sense()

    def position(self) -> np.ndarray:
        """Истинное положение в рабочем пространстве задачи."""
        return self.state.x.copy()

    def sense(self) -> SensorReading:
        """Показания датчиков без движения."""
        return sense_arm(self.state, self.arm, self.rng)

    def step(self, u: Sequence[float], dt: float) -> SensorReading:
        """Применение команды u (град/с) на dt секунд."""
        self.state, reading = step_arm(self.state, u, dt, self.arm, self.rng)
        return reading


class DeformPlant(ReachPlant):
    """
    Манипулятор, удерживающий угол деформируемого объекта.

    Положением задачи служит центроид объекта, измеренный камерой.
    """

    def __init__(
        self,
        arm: ArmModel,
        home: Sequence[float],
        obj: DeformableObject,
        camera: VirtualCamera,
        seed: int = 0,
    ):
        self.obj = obj
        self.camera = camera
        super().__init__(arm, home, seed)
        self.grip_origin, _ = fk(self.home, arm)
        self._centroid = render_and_centroid(self.obj, self.camera)
        self._velocity = np.zeros(2)

    @classmethod
    def from_config(cls, config, arm: ArmModel, seed: int = 0) -> 'DeformPlant':
        """Сборка объекта, камеры и манипулятора по конфигурации."""
        home = config.plant.deform_home
        grip_rest, _ = fk(home, arm)
        obj = DeformableObject.from_config(config.plant.object, grip_rest)
        camera = VirtualCamera.from_config(config.plant.camera, origin=obj.centroid())
        return cls(arm, home, obj, camera, seed)

    def reset(self, q: Optional[Sequence[float]] = None, seed: Optional[Seed] = None) -> SensorReading:
        """Возврат манипулятора и объекта в покой; захват в домашней позе."""
        self.reseed(seed)
        self.state = ArmState.at(self.home, self.arm)
        self.obj.reset()
        if q is not None:
            # Перевод в позу q с переносом захвата, объект успокаивается
            self.state = ArmState.at(q, self.arm)
            object_step(self.obj, self.state.x - self.grip_origin, 1.0)
        self._centroid = render_and_centroid(self.obj, self.camera)
        self._velocity = np.zeros(2)
        return self.sense()

    def position(self) -> np.ndarray:
        """Истинный центроид объекта."""
        return self.obj.centroid()

    def sense(self) -> SensorReading:
        """Углы с шумом, центроид и его скорость по изображению."""
        arm_reading = sense_arm(self.state, self.arm, self.rng)
        return SensorReading(q=arm_reading.q, x=self._centroid.copy(), v=self._velocity.copy())

    def step(self, u: Sequence[float], dt: float) -> SensorReading:
        """Шаг манипулятора, затем объекта с захватом в новом положении схвата."""
        self.state, _ = step_arm(self.state, u, dt, self.arm, self.rng)
        object_step(self.obj, self.state.x - self.grip_origin, dt)
        try:
            centroid = render_and_centroid(self.obj, self.camera)
        except PlantFault:
            logger.warning("Объект вне поля зрения камеры")
            raise
        self._velocity = (centroid - self._centroid) / dt
        self._centroid = centroid
        return self.sense()


def build_plant(config, seed: int = 0, noise: bool = True) -> ReachPlant:
    """Объект управления для задачи из конфигурации."""
    arm = ArmModel.from_config(config, noise=noise)
    if config.task == 'reach_star':
        return ReachPlant(arm, config.plant.reach_home, seed)
    return DeformPlant.from_config(config, arm, seed)
