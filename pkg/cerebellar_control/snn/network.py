"""Дискретная по времени симуляция сети: нейроны, доставка спайков, онлайн-STDP."""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

from cerebellar_control.snn.neurons import NeuronPopulation
from cerebellar_control.snn.plasticity import clamp_weights
from cerebellar_control.snn.synapses import SynapseSet
from cerebellar_control.utils.exceptions import ConfigurationError

logger = logging.getLogger(__name__)

Drives = Mapping[str, Union[float, np.ndarray]]
DriveSource = Union[Drives, Callable[[float], Drives]]


@dataclass
class SpikeRecord:
    """Времена спайков по популяциям в окне записи [t_start, t_end)."""

    sizes: Dict[str, int]
    t_start: float = 0.0
    t_end: float = 0.0
    neurons: Dict[str, List[np.ndarray]] = field(default_factory=dict)
    times: Dict[str, List[float]] = field(default_factory=dict)

    def add(self, t: float, fired: Mapping[str, np.ndarray], dt: float = 1.0):
        """Добавление спайков одного шага."""
        for name, mask in fired.items():
            idx = np.flatnonzero(mask)
            if idx.size:
                self.neurons.setdefault(name, []).append(idx)
                self.times.setdefault(name, []).append(t)
        self.t_end = t + dt

    @property
    def duration_ms(self) -> float:
        """Длительность окна записи."""
        return self.t_end - self.t_start

    def events(self, population: str) -> tuple:
        """Плоские массивы (индекс нейрона, время) для популяции."""
        chunks = self.neurons.get(population, [])
        if not chunks:
            return np.zeros(0, dtype=np.int64), np.zeros(0)
        idx = np.concatenate(chunks)
        t = np.concatenate([np.full(c.size, t) for c, t in zip(chunks, self.times[population])])
        return idx, t

    def counts(self, population: str) -> np.ndarray:
        """Число спайков каждого нейрона популяции."""
        idx, _ = self.events(population)
        return np.bincount(idx, minlength=self.sizes[population])

    def rates(self, population: str) -> np.ndarray:
        """Частоты нейронов популяции, Гц."""
        if self.duration_ms <= 0:
            return np.zeros(self.sizes[population])
        return self.counts(population) / (self.duration_ms / 1000.0)

    def spike_times(self, population: str) -> List[np.ndarray]:
        """Возрастающие времена спайков для каждого нейрона."""
        idx, t = self.events(population)
        return [t[idx == i] for i in range(self.sizes[population])]

    def total(self) -> int:
        """Общее число спайков."""
        return int(sum(sum(c.size for c in chunks) for chunks in self.neurons.values()))

    def to_frame(self) -> pd.DataFrame:
        """Таблица (population, neuron_index, t_ms)."""
        frames = []
        for name in self.sizes:
            idx, t = self.events(name)
            if idx.size:
                frames.append(pd.DataFrame({'population': name, 'neuron_index': idx, 't_ms': t}))
        if not frames:
            return pd.DataFrame(columns=['population', 'neuron_index', 't_ms'])
        df = pd.concat(frames, ignore_index=True)
        return df.sort_values(['population', 'neuron_index', 't_ms'], kind='stable').reset_index(drop=True)

    def to_csv(self, path: str):
        """Сохранение записи в CSV."""
        self.to_frame().to_csv(path, index=False)


class SpikingNetwork:
    """
    Набор популяций и синапсов с детерминированным порядком обновления.

    На каждом шаге: интегрирование всех нейронов, доставка спайков
    (ток приходит на следующем шаге), затем пластичность.
    """

    def __init__(
        self,
        populations: Sequence[NeuronPopulation],
        synapses: Sequence[SynapseSet],
        dt: float = 1.0,
        syn_tau_ms: float = 0.0,
    ):
        if dt <= 0:
            raise ConfigurationError(f"Шаг симуляции должен быть положительным, получено: {dt}")
        if syn_tau_ms < 0:
            raise ConfigurationError(f"Постоянная затухания тока не может быть отрицательной: {syn_tau_ms}")
        self.populations: Dict[str, NeuronPopulation] = {}
        for pop in populations:
            if pop.name in self.populations:
                raise ConfigurationError(f"Повторное имя популяции: {pop.name}")
            self.populations[pop.name] = pop
        self.synapses: Dict[str, SynapseSet] = {}
        for syn in synapses:
            self._check_synapses(syn)
            self.synapses[syn.name] = syn
        self.dt = dt
        self.syn_tau_ms = syn_tau_ms
        self.reset_state()

    def _check_synapses(self, syn: SynapseSet):
        for role, name, size in (('pre', syn.pre, syn.n_pre), ('post', syn.post, syn.n_post)):
            pop = self.populations.get(name)
            if pop is None:
                raise ConfigurationError(f"Синапсы {syn.name}: нет популяции {name} ({role})")
            if pop.size != size:
                raise ConfigurationError(f"Синапсы {syn.name}: размер {name} {pop.size} != {size}")
        if syn.gate_population is not None and syn.gate_population not in self.populations:
            raise ConfigurationError(f"Синапсы {syn.name}: нет популяции-учителя {syn.gate_population}")
        if syn.name in self.synapses:
            raise ConfigurationError(f"Повторное имя набора синапсов: {syn.name}")

    def reset_state(self):
        """Возврат нейронов в покой, обнуление токов и истории спайков."""
        self.t = 0.0
        for pop in self.populations.values():
            pop.reset()
        self.I_syn = {name: np.zeros(pop.size) for name, pop in self.populations.items()}
        self.last_spike = {name: np.full(pop.size, -np.inf) for name, pop in self.populations.items()}

    def _drive_for(self, name: str, drives: Drives) -> np.ndarray:
        size = self.populations[name].size
        if name not in drives:
            return np.zeros(size)
        drive = np.asarray(drives[name], dtype=float)
        if drive.ndim and drive.shape != (size,):
            raise ConfigurationError(f"Размер входа {name} {drive.shape} не совпадает с популяцией ({size},)")
        return np.broadcast_to(drive, (size,))

    def step(self, drives: Optional[Drives] = None, plasticity: bool = True) -> Dict[str, np.ndarray]:
        """Один шаг сети; возвращает маски спайков по популяциям."""
        drives = drives or {}
        unknown = set(drives) - set(self.populations)
        if unknown:
            raise ConfigurationError(f"Вход для несуществующих популяций: {sorted(unknown)}")

        fired = {}
        for name, pop in self.populations.items():
            fired[name] = pop.step(self.I_syn[name] + self._drive_for(name, drives), self.dt)

        decay = math.exp(-self.dt / self.syn_tau_ms) if self.syn_tau_ms > 0 else 0.0
        next_I = {name: current * decay for name, current in self.I_syn.items()}
        for syn in self.synapses.values():
            next_I[syn.post] += syn.currents(fired[syn.pre])
        self.I_syn = next_I

        previous = {name: last.copy() for name, last in self.last_spike.items()}
        for name, mask in fired.items():
            self.last_spike[name][mask] = self.t

        if plasticity:
            for syn in self.synapses.values():
                if syn.plastic:
                    self._online_stdp(syn, fired, previous)
        self.t += self.dt
        return fired

    def _gate_mask(self, syn: SynapseSet) -> np.ndarray:
        """Маска рёбер, для которых пластичность разрешена учителем."""
        rule = syn.plasticity
        if not rule.gated:
            return np.ones(syn.n_edges, dtype=bool)
        recent = (self.t - self.last_spike[syn.gate_population]) <= rule.window_ms
        if syn.gate_groups is None:
            return np.full(syn.n_edges, bool(np.any(recent)))
        group_active = np.array([bool(np.any(recent[group])) for group in syn.gate_groups] + [False])
        # Номер -1 в gate_map означает нейрон без учителя
        post_active = group_active[syn.gate_map]
        return post_active[syn.post_idx]

    def _online_stdp(self, syn: SynapseSet, fired: Mapping[str, np.ndarray], previous: Mapping[str, np.ndarray]):
        """Пары ближайших соседей, закрываемые спайками текущего шага."""
        rule = syn.plasticity
        post_fired = fired[syn.post][syn.post_idx]
        pre_fired = fired[syn.pre][syn.pre_idx]
        if not (np.any(post_fired) or np.any(pre_fired)):
            return
        allowed = self._gate_mask(syn)
        if not np.any(allowed):
            return
        deltas = np.zeros(syn.n_edges)

        # Постсинаптический спайк с последним строго более ранним пресинаптическим
        dt_pot = self.t - previous[syn.pre][syn.pre_idx]
        mask = allowed & post_fired & (dt_pot <= rule.window_ms)
        if np.any(mask):
            deltas[mask] += rule.delta(dt_pot[mask])

        # Пресинаптический спайк с последним не более поздним постсинаптическим
        dt_dep = self.last_spike[syn.post][syn.post_idx] - self.t
        mask = allowed & pre_fired & (-dt_dep <= rule.window_ms)
        if np.any(mask):
            deltas[mask] += rule.delta(dt_dep[mask])

        syn.weights = clamp_weights(syn.weights + deltas, syn.sign, syn.w_max)

    def run(
        self,
        drives: DriveSource,
        duration_ms: float,
        plasticity: bool = True,
        record: Optional[SpikeRecord] = None,
    ) -> SpikeRecord:
        """Симуляция окна duration_ms с постоянным или зависящим от времени входом."""
        if record is None:
            record = SpikeRecord(sizes={name: pop.size for name, pop in self.populations.items()},
                                 t_start=self.t, t_end=self.t)
        n_steps = int(round(duration_ms / self.dt))
        for _ in range(n_steps):
            current = drives(self.t) if callable(drives) else drives
            step_network(self, current, plasticity=plasticity, record=record)
        return record

    def weights(self) -> Dict[str, Dict]:
        """Снимок всех весов."""
        return {name: syn.to_dict() for name, syn in sorted(self.synapses.items())}

    def load_weights(self, snapshot: Mapping[str, Mapping]):
        """Загрузка весов из снимка."""
        for name, data in snapshot.items():
            if name not in self.synapses:
                raise ConfigurationError(f"В снимке весов неизвестный набор синапсов: {name}")
            self.synapses[name].load_weights(data)


def step_network(
    network: SpikingNetwork,
    drives: Optional[Drives] = None,
    plasticity: bool = True,
    record: Optional[SpikeRecord] = None,
) -> SpikeRecord:
    """Один шаг сети; спайки шага дописываются в record или в новую запись."""
    if record is None:
        record = SpikeRecord(sizes={name: pop.size for name, pop in network.populations.items()},
                             t_start=network.t, t_end=network.t)
    t = network.t
    record.add(t, network.step(drives, plasticity=plasticity), network.dt)
    return record
