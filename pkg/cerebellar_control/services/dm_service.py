"""Сеть дифференциального отображения: (q, v) -> скорости суставов."""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from cerebellar_control.coding.population import Assembly, decode_central, encode
from cerebellar_control.plant.arm import ArmModel, jacobian
from cerebellar_control.plant.babbling import BabbleSample
from cerebellar_control.snn.network import SpikingNetwork
from cerebellar_control.snn.neurons import NeuronParams, NeuronPopulation
from cerebellar_control.snn.plasticity import PlasticityRule, clamp_weights
from cerebellar_control.snn.synapses import SynapseSet, connect_all
from cerebellar_control.utils.exceptions import ConfigurationError, ValidationError

logger = logging.getLogger(__name__)

INPUT = 'dm_in'
OUTPUT = 'dm_out'

Range = Tuple[float, float]


@dataclass
class DmTopology:
    """Двухслойная сеть с входными ансамблями q, v и выходными ансамблями q̇."""

    network: SpikingNetwork
    input_assemblies: List[Assembly]
    output_assemblies: List[Assembly]
    window_ms: float
    teacher_amplitude: float
    normalize: bool = True
    # Суммы входящих весов на выходной нейрон, сохраняемые нормировкой
    target_sums: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def n_l(self) -> int:
        """Число нейронов в ансамбле."""
        return self.input_assemblies[0].size

    def input_drive(self, q: Sequence[float], v: Sequence[float]) -> np.ndarray:
        """Токи входного слоя для (q, v)."""
        values = list(q) + list(v)
        if len(values) != len(self.input_assemblies):
            raise ValidationError(f"Ожидается {len(self.input_assemblies)} входных значений, получено {len(values)}")
        return np.concatenate([encode(value, a) for value, a in zip(values, self.input_assemblies)])

    def teacher_drive(self, qdot: Sequence[float]) -> np.ndarray:
        """Токи выходного слоя при обучении с учителем."""
        drives = []
        for value, assembly in zip(qdot, self.output_assemblies):
            drives.append(self.teacher_amplitude / assembly.peak * encode(value, assembly))
        return np.concatenate(drives)

    def normalize_weights(self):
        """Мультипликативная нормировка входящих пластичных весов каждого выходного нейрона."""
        for name, target in self.target_sums.items():
            syn = self.network.synapses[name]
            sums = np.bincount(syn.post_idx, weights=syn.weights, minlength=syn.n_post)
            scale = np.divide(target, sums, out=np.ones_like(target), where=np.abs(sums) > 1e-12)
            syn.weights = clamp_weights(syn.weights * scale[syn.post_idx], syn.sign, syn.w_max)

    def to_dict(self) -> Dict[str, Any]:
        """Раздел файла весов."""
        return {
            'input_assemblies': [a.to_dict() for a in self.input_assemblies],
            'output_assemblies': [a.to_dict() for a in self.output_assemblies],
            'synapses': self.network.weights(),
        }

    def load(self, data: Dict[str, Any]):
        """Загрузка раздела файла весов."""
        self.input_assemblies = [Assembly.from_dict(a) for a in data['input_assemblies']]
        self.output_assemblies = [Assembly.from_dict(a) for a in data['output_assemblies']]
        self.network.load_weights(data['synapses'])


def lateral_weights(n_l: int, lateral_min: float, lateral_max: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Боковое торможение внутри ансамбля: слабее к близким, сильнее к дальним нейронам."""
    pre, post = np.nonzero(~np.eye(n_l, dtype=bool))
    distance = np.abs(pre - post) / max(n_l - 1, 1)
    weights = -(lateral_min + (lateral_max - lateral_min) * distance)
    return pre, post, weights


def build_dm(
    joint_ranges: Sequence[Range],
    velocity_ranges: Sequence[Range],
    joint_velocity_ranges: Sequence[Range],
    config,
    seed: int = 0,
) -> DmTopology:
    """
    Построение сети по диапазонам переменных.

    Args:
        joint_ranges: диапазоны углов, град
        velocity_ranges: диапазоны скорости в рабочем пространстве, м/с
        joint_velocity_ranges: диапазоны скоростей суставов, град/с
        config: блок DmConfig
        seed: зерно начальных весов
    """
    n_l = config.n_l
    if n_l < 2:
        raise ConfigurationError(f"Размер ансамбля должен быть не меньше 2: {n_l}")
    rng = np.random.default_rng(seed)
    inputs = [Assembly.linear(f"q{i + 1}", lo, hi, n_l, config.input_amplitude)
              for i, (lo, hi) in enumerate(joint_ranges)]
    inputs += [Assembly.linear(f"v{i + 1}", lo, hi, n_l, config.input_amplitude)
               for i, (lo, hi) in enumerate(velocity_ranges)]
    outputs = [Assembly.linear(f"qdot{i + 1}", lo, hi, n_l, 1.0)
               for i, (lo, hi) in enumerate(joint_velocity_ranges)]
    n_in = n_l * len(inputs)
    n_out = n_l * len(outputs)

    params = NeuronParams(config.neuron.a, config.neuron.b, config.neuron.c, config.neuron.d)
    populations = [NeuronPopulation(INPUT, params, n_in), NeuronPopulation(OUTPUT, params, n_out)]
    rule = PlasticityRule.from_config(config.stdp)

    pre, post = connect_all(n_in, n_out)
    exc = SynapseSet(name='dm_exc', pre=INPUT, post=OUTPUT, n_pre=n_in, n_post=n_out,
                     pre_idx=pre, post_idx=post, weights=rng.uniform(0.0, config.w_init_exc, pre.size),
                     sign='excitatory', w_init=config.w_init_exc, w_max=config.w_max_exc, plasticity=rule)
    inh = SynapseSet(name='dm_inh', pre=INPUT, post=OUTPUT, n_pre=n_in, n_post=n_out,
                     pre_idx=pre.copy(), post_idx=post.copy(),
                     weights=rng.uniform(config.w_init_inh, 0.0, pre.size),
                     sign='inhibitory', w_init=config.w_init_inh, w_max=config.w_max_inh, plasticity=rule)

    lat_pre, lat_post, lat_w = [], [], []
    base_pre, base_post, base_w = lateral_weights(n_l, config.lateral_min, config.lateral_max)
    for k in range(len(outputs)):
        lat_pre.append(base_pre + k * n_l)
        lat_post.append(base_post + k * n_l)
        lat_w.append(base_w)
    lateral = SynapseSet(name='dm_lateral', pre=OUTPUT, post=OUTPUT, n_pre=n_out, n_post=n_out,
                         pre_idx=np.concatenate(lat_pre), post_idx=np.concatenate(lat_post),
                         weights=np.concatenate(lat_w), sign='inhibitory', w_init=-config.lateral_min)

    network = SpikingNetwork(populations, [exc, inh, lateral])
    topology = DmTopology(network=network, input_assemblies=inputs, output_assemblies=outputs,
                          window_ms=config.window_ms, teacher_amplitude=config.teacher_amplitude,
                          normalize=config.normalize)
    if config.normalize:
        for syn in (exc, inh):
            topology.target_sums[syn.name] = np.bincount(syn.post_idx, weights=syn.weights, minlength=n_out)
    logger.info(f"Построена сеть DM: {n_in} входных, {n_out} выходных нейронов, {exc.n_edges} рёбер на набор")
    return topology


def train_dm(topology: DmTopology, samples: Sequence[BabbleSample], epochs: int = 1) -> DmTopology:
    """
    Обучение симметричным STDP с принудительной активностью выходного слоя.

    Каждый отсчёт моделируется окном window_ms из состояния покоя.
    """
    network = topology.network
    for epoch in range(epochs):
        for sample in samples:
            network.reset_state()
            drives = {INPUT: topology.input_drive(sample.q, sample.v), OUTPUT: topology.teacher_drive(sample.qdot)}
            network.run(drives, topology.window_ms, plasticity=True)
            if topology.normalize:
                topology.normalize_weights()
        logger.debug(f"DM: эпоха {epoch + 1}/{epochs}, отсчётов {len(samples)}")
    network.reset_state()
    return topology


def dm_infer(topology: DmTopology, q: Sequence[float], v_hat: Sequence[float],
             window_ms: Optional[float] = None) -> np.ndarray:
    """Команда скоростей суставов по (q, v̂); молчащий выходной ансамбль даёт 0."""
    network = topology.network
    network.reset_state()
    drives = {INPUT: topology.input_drive(q, v_hat)}
    record = network.run(drives, window_ms or topology.window_ms, plasticity=False)
    counts = record.counts(OUTPUT)
    network.reset_state()
    u = np.zeros(len(topology.output_assemblies))
    for j, assembly in enumerate(topology.output_assemblies):
        block = counts[j * topology.n_l:(j + 1) * topology.n_l]
        estimate = decode_central(block, assembly.centers)
        u[j] = 0.0 if estimate is None else estimate
    return u


def angle_between(a: np.ndarray, b: np.ndarray) -> Optional[float]:
    """Угол между векторами в градусах; None для нулевого вектора."""
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return None
    return float(np.degrees(np.arccos(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))))


def evaluate_dm(topology: DmTopology, samples: Sequence[BabbleSample], arm: ArmModel) -> Dict[str, float]:
    """
    Ошибка декодирования на отложенных отсчётах.

    Направленная ошибка: угол между J(q)·u и измеренной v.
    """
    angles, abs_errors = [], []
    for sample in samples:
        u = dm_infer(topology, sample.q, sample.v)
        abs_errors.append(float(np.mean(np.abs(u - sample.qdot))))
        angle = angle_between(jacobian(sample.q, arm) @ np.radians(u), sample.v)
        angles.append(180.0 if angle is None else angle)
    if not angles:
        return {'median_direction_error_deg': float('nan'), 'mean_abs_error': float('nan'), 'n': 0}
    return {
        'median_direction_error_deg': float(np.median(angles)),
        'mean_abs_error': float(np.mean(abs_errors)),
        'n': len(angles),
    }


def variable_ranges(samples: Sequence[BabbleSample], margin: float = 0.05) -> Tuple[List[Range], List[Range]]:
    """Симметричные диапазоны v и q̇ по выборке лепета с запасом."""
    if not samples:
        raise ValidationError("Пустая выборка лепета")
    v = np.abs(np.array([s.v for s in samples])).max(axis=0)
    qdot = np.abs(np.array([s.qdot for s in samples])).max(axis=0)
    v = np.maximum(v * (1 + margin), 1e-6)
    qdot = np.maximum(qdot * (1 + margin), 1e-6)
    return [(-float(m), float(m)) for m in v], [(-float(m), float(m)) for m in qdot]


def split_holdout(samples: Sequence[BabbleSample], every: int) -> Tuple[List[BabbleSample], List[BabbleSample]]:
    """Каждый every-й отсчёт откладывается для проверки."""
    if every < 2:
        return list(samples), []
    train = [s for i, s in enumerate(samples) if (i + 1) % every != 0]
    holdout = [s for i, s in enumerate(samples) if (i + 1) % every == 0]
    return train, holdout


def dm_from_weights(section: Dict[str, Any], config) -> DmTopology:
    """Восстановление сети DM из раздела файла весов; диапазоны берутся из ансамблей."""
    inputs = [Assembly.from_dict(a) for a in section['input_assemblies']]
    outputs = [Assembly.from_dict(a) for a in section['output_assemblies']]
    n_js = len(outputs)
    topology = build_dm(
        [(a.lo, a.hi) for a in inputs[:n_js]],
        [(a.lo, a.hi) for a in inputs[n_js:]],
        [(a.lo, a.hi) for a in outputs],
        config,
    )
    topology.load(section)
    return topology
