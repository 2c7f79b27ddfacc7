"""Деформируемый объект: сетка масс и пружин, симплектический Эйлер."""

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from cerebellar_control.utils.exceptions import ConfigurationError, NumericalInstabilityError

logger = logging.getLogger(__name__)

# Окно контроля роста энергии, мс
ENERGY_WINDOW_MS = 1000.0
ENERGY_GROWTH_LIMIT = 10.0


@dataclass
class DeformableObject:
    """
    Сетка grid × grid узлов.

    Верхний ряд привязан мягкими пружинами к неподвижным якорям,
    узел захвата (нижний левый угол) следует за схватом.
    """

    positions: np.ndarray
    velocities: np.ndarray
    rest_positions: np.ndarray
    anchors: np.ndarray
    anchored_nodes: np.ndarray
    springs: np.ndarray
    rest_lengths: np.ndarray
    stiffness: np.ndarray
    anchor_stiffness: float
    node_mass: float
    damping: float
    substep_ms: float
    grid: int
    grip_node: int
    t_ms: float = 0.0
    energy_history: deque = field(default_factory=deque)

    @classmethod
    def build(
        cls,
        grip_rest: Sequence[float],
        grid: int = 5,
        spacing: float = 0.04,
        node_mass: float = 0.02,
        stiffness: float = 200.0,
        anchor_stiffness: float = 20.0,
        damping: float = 20.0,
        substep_ms: float = 1.0,
    ) -> 'DeformableObject':
        """Построение сетки, у которой узел захвата в покое совпадает с grip_rest."""
        if grid < 2:
            raise ConfigurationError(f"Сетка объекта должна быть не меньше 2×2: {grid}")
        if min(spacing, node_mass, stiffness, anchor_stiffness, substep_ms) <= 0 or damping < 0:
            raise ConfigurationError("Параметры объекта должны быть положительными")
        grip_rest = np.asarray(grip_rest, dtype=float)
        rows, cols = np.meshgrid(np.arange(grid), np.arange(grid), indexing='ij')
        rest = np.stack([cols.ravel() * spacing, (grid - 1 - rows.ravel()) * spacing], axis=1) + grip_rest
        node = np.arange(grid * grid).reshape(grid, grid)

        pairs = []
        for r in range(grid):
            for c in range(grid):
                if c + 1 < grid:
                    pairs.append((node[r, c], node[r, c + 1]))
                if r + 1 < grid:
                    pairs.append((node[r, c], node[r + 1, c]))
                if r + 1 < grid and c + 1 < grid:
                    pairs.append((node[r, c], node[r + 1, c + 1]))
                    pairs.append((node[r, c + 1], node[r + 1, c]))
        springs = np.array(pairs, dtype=np.int64)
        rest_lengths = np.linalg.norm(rest[springs[:, 0]] - rest[springs[:, 1]], axis=1)
        anchored = node[0].copy()

        obj = cls(
            positions=rest.copy(),
            velocities=np.zeros_like(rest),
            rest_positions=rest,
            anchors=rest[anchored].copy(),
            anchored_nodes=anchored,
            springs=springs,
            rest_lengths=rest_lengths,
            stiffness=np.full(len(springs), float(stiffness)),
            anchor_stiffness=float(anchor_stiffness),
            node_mass=float(node_mass),
            damping=float(damping),
            substep_ms=float(substep_ms),
            grid=grid,
            grip_node=int(node[grid - 1, 0]),
        )
        obj.check_stability()
        return obj

    @classmethod
    def from_config(cls, block, grip_rest: Sequence[float]) -> 'DeformableObject':
        """Создание из блока ObjectModel."""
        return cls.build(grip_rest, grid=block.grid, spacing=block.spacing, node_mass=block.node_mass,
                         stiffness=block.stiffness, anchor_stiffness=block.anchor_stiffness,
                         damping=block.damping, substep_ms=block.substep_ms)

    def check_stability(self):
        """Проверка шага интегрирования по оценке Гершгорина наибольшей частоты."""
        per_node = np.zeros(len(self.positions))
        np.add.at(per_node, self.springs[:, 0], self.stiffness)
        np.add.at(per_node, self.springs[:, 1], self.stiffness)
        per_node[self.anchored_nodes] += self.anchor_stiffness
        omega_max = np.sqrt(2.0 * per_node.max() / self.node_mass)
        h = self.substep_ms / 1000.0
        if h * omega_max >= 2.0:
            raise ConfigurationError(
                f"Шаг {self.substep_ms} мс неустойчив при жёсткости объекта (ω_max={omega_max:.1f} рад/с)")

    @property
    def grip_rest(self) -> np.ndarray:
        """Положение узла захвата в покое."""
        return self.rest_positions[self.grip_node]

    def reset(self):
        """Возврат в состояние покоя."""
        self.positions = self.rest_positions.copy()
        self.velocities = np.zeros_like(self.positions)
        self.t_ms = 0.0
        self.energy_history.clear()

    def forces(self) -> np.ndarray:
        """Упругие силы на узлах."""
        d = self.positions[self.springs[:, 1]] - self.positions[self.springs[:, 0]]
        length = np.linalg.norm(d, axis=1)
        direction = np.divide(d, length[:, None], out=np.zeros_like(d), where=length[:, None] > 0)
        f = (self.stiffness * (length - self.rest_lengths))[:, None] * direction
        forces = np.zeros_like(self.positions)
        np.add.at(forces, self.springs[:, 0], f)
        np.add.at(forces, self.springs[:, 1], -f)
        forces[self.anchored_nodes] += self.anchor_stiffness * (self.anchors - self.positions[self.anchored_nodes])
        return forces

    def elastic_energy(self) -> float:
        """Потенциальная энергия пружин."""
        d = self.positions[self.springs[:, 1]] - self.positions[self.springs[:, 0]]
        stretch = np.linalg.norm(d, axis=1) - self.rest_lengths
        anchor = self.positions[self.anchored_nodes] - self.anchors
        return float(0.5 * np.sum(self.stiffness * stretch ** 2) + 0.5 * self.anchor_stiffness * np.sum(anchor ** 2))

    def kinetic_energy(self) -> float:
        """Кинетическая энергия узлов."""
        return float(0.5 * self.node_mass * np.sum(self.velocities ** 2))

    def energy(self) -> float:
        """Полная механическая энергия."""
        return self.elastic_energy() + self.kinetic_energy()

    def centroid(self) -> np.ndarray:
        """Среднее положение узлов."""
        return self.positions.mean(axis=0)

    def quads(self) -> np.ndarray:
        """Четырёхугольники ячеек сетки, массив (n, 4, 2)."""
        g = self.grid
        node = np.arange(g * g).reshape(g, g)
        cells = [(node[r, c], node[r, c + 1], node[r + 1, c + 1], node[r + 1, c])
                 for r in range(g - 1) for c in range(g - 1)]
        return self.positions[np.array(cells)]

    def _energy_floor(self) -> float:
        # Энергия одной пружины, растянутой на длину покоя
        return 0.5 * float(self.stiffness.max()) * float(self.rest_lengths.min()) ** 2

    def _check_energy(self):
        energy = self.energy()
        if not np.isfinite(energy) or not np.all(np.isfinite(self.positions)):
            raise NumericalInstabilityError("Нечисловое состояние деформируемого объекта")
        while self.energy_history and self.t_ms - self.energy_history[0][0] > ENERGY_WINDOW_MS:
            self.energy_history.popleft()
        reference = max(self.energy_history[0][1] if self.energy_history else 0.0, self._energy_floor())
        if energy > ENERGY_GROWTH_LIMIT * reference:
            raise NumericalInstabilityError(
                f"Рост энергии объекта: {energy:.4f} Дж при опорной {reference:.4f} Дж за {ENERGY_WINDOW_MS} мс")
        self.energy_history.append((self.t_ms, energy))


def object_step(
    obj: DeformableObject,
    grip_displacement: Optional[Sequence[float]],
    dt: float,
) -> np.ndarray:
    """
    Продвижение объекта на dt секунд.

    Args:
        obj: объект
        grip_displacement: смещение узла захвата от покоя; None означает, что объект отпущен
        dt: шаг, с

    Returns:
        np.ndarray: новые положения узлов
    """
    if dt <= 0:
        raise ConfigurationError(f"Шаг объекта должен быть положительным: {dt}")
    h = obj.substep_ms / 1000.0
    n_sub = max(1, int(round(dt / h)))
    h = dt / n_sub
    start = obj.positions[obj.grip_node].copy()
    target = None if grip_displacement is None else obj.grip_rest + np.asarray(grip_displacement, dtype=float)

    for k in range(1, n_sub + 1):
        obj.velocities *= np.exp(-h * obj.damping)
        obj.velocities += h * obj.forces() / obj.node_mass
        if target is not None:
            grip = start + (target - start) * k / n_sub
            obj.velocities[obj.grip_node] = (grip - obj.positions[obj.grip_node]) / h
        obj.positions += h * obj.velocities
        obj.t_ms += h * 1000.0
    obj._check_energy()
    return obj.positions.copy()
