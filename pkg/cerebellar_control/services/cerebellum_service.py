"""Прямая модель мозжечка: семь популяций, обучение под управлением нижней оливы."""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from cerebellar_control.coding.population import Assembly, encode
from cerebellar_control.coding.soa import SoaConfig, soa_fit
from cerebellar_control.snn.network import SpikeRecord, SpikingNetwork
from cerebellar_control.snn.neurons import NeuronParams, NeuronPopulation
from cerebellar_control.snn.plasticity import PlasticityRule
from cerebellar_control.snn.synapses import (
    SynapseSet,
    connect_all,
    connect_one_to_one,
    connect_probabilistic,
    connect_random,
    sign_of,
)
from cerebellar_control.utils.exceptions import ConfigurationError
from cerebellar_control.utils.utils import angular_error, unit_vector
from cerebellar_control.utils.validators import Validator, validate_divisible, validate_positive

logger = logging.getLogger(__name__)

POPULATIONS = ('mf', 'gc', 'ggc', 'pc', 'bc', 'io', 'dcn')
PROJECTIONS = ('mf_gc', 'mf_ggc', 'mf_dcn', 'gc_ggc', 'ggc_gc', 'gc_pc',
               'io_pc', 'io_dcn', 'pc_dcn', 'pc_bc', 'gc_bc', 'bc_pc')
# Правила пластичности по проекциям
PLASTIC_RULES = {'gc_pc': 'pf_rule', 'io_dcn': 'io_dcn_rule', 'ggc_gc': 'ggc_gc_rule'}
DIRECTIONS = ('+', '-')


@dataclass
class CerebellarSpec:
    """Размеры, параметры нейронов, проекции и раскладка ансамблей."""

    neurons: Dict[str, NeuronParams]
    sizes: Dict[str, int]
    projections: Dict[str, Any]
    rules: Dict[str, PlasticityRule]
    n_js: int = 2
    n_ts: int = 2
    neurons_per_direction: int = 3
    mf_drive_amplitude: float = 20.0
    io_drive_max: float = 12.0
    dead_band: float = 0.05
    v_max: Tuple[float, ...] = (1.0, 1.0)
    window_ms: float = 50.0
    syn_tau_ms: float = 0.0

    @classmethod
    def from_config(cls, block) -> 'CerebellarSpec':
        """Создание из блока CerebellumConfig с проверкой согласованности."""
        neurons = {}
        for name, n in block.neurons.items():
            neurons[name] = NeuronParams(n.a, n.b, n.c, n.d)
        rules = {name: PlasticityRule.from_config(getattr(block, attr)) for name, attr in PLASTIC_RULES.items()}
        spec = cls(
            neurons=neurons,
            sizes=dict(block.sizes),
            projections=dict(block.projections),
            rules=rules,
            n_js=block.n_js,
            n_ts=block.n_ts,
            neurons_per_direction=block.neurons_per_direction,
            mf_drive_amplitude=block.mf_drive_amplitude,
            io_drive_max=block.io_drive_max,
            dead_band=block.dead_band,
            v_max=tuple(block.v_max),
            window_ms=block.window_ms,
            syn_tau_ms=block.syn_tau_ms,
        )
        spec.validate()
        return spec

    @property
    def n_mf_assemblies(self) -> int:
        """Число ансамблей MF: суставы и измерения задачи."""
        return self.n_js + self.n_ts

    @property
    def mf_assembly_size(self) -> int:
        return self.sizes['mf'] // self.n_mf_assemblies

    def validate(self):
        """Проверка инвариантов раскладки и таблицы проекций."""
        missing = [p for p in POPULATIONS if p not in self.sizes or p not in self.neurons]
        if missing:
            raise ConfigurationError(f"Нет параметров популяций: {missing}")
        missing = [p for p in PROJECTIONS if p not in self.projections]
        if missing:
            raise ConfigurationError(f"Нет проекций: {missing}")
        directional = self.n_ts * len(DIRECTIONS) * self.neurons_per_direction

        validator = Validator()
        validator.add_rule('mf', validate_divisible,
                           f"Размер MF {self.sizes['mf']} не делится на {self.n_mf_assemblies} ансамбля")
        for pop in ('pc', 'io', 'dcn'):
            validator.add_rule(pop, lambda v, d=directional: v[0] == d,
                               f"Размер {pop.upper()} {self.sizes[pop]} не равен n_TS·2·{self.neurons_per_direction}")
        validator.add_rule('v_max', lambda v: len(v) == self.n_ts and all(validate_positive(x) for x in v),
                           f"v_max должен содержать {self.n_ts} положительных значений")
        validator.add_rule('window_ms', validate_positive, "Окно декодирования должно быть положительным")
        validator.add_rule('dead_band', lambda v: v >= 0, "Мёртвая зона не может быть отрицательной")
        data = {'mf': (self.sizes['mf'], self.n_mf_assemblies), 'v_max': self.v_max,
                'window_ms': self.window_ms, 'dead_band': self.dead_band}
        data.update({pop: (self.sizes[pop], directional) for pop in ('pc', 'io', 'dcn')})
        errors = validator.validate(data)

        for name in PROJECTIONS:
            proj = self.projections[name]
            if proj.pre not in self.sizes or proj.post not in self.sizes:
                errors.append(f"Проекция {name}: неизвестная популяция {proj.pre}->{proj.post}")
                continue
            if proj.topology == 'O2O' and self.sizes[proj.pre] != self.sizes[proj.post]:
                errors.append(f"Проекция O2O {name} соединяет популяции разного размера")
            if proj.topology == 'Rnd' and (proj.value is None or proj.value < 1 or proj.value != int(proj.value)):
                errors.append(f"Проекция Rnd {name}: V должно быть целым ≥ 1")
            if proj.topology == 'Prb' and (proj.value is None or not 0 <= proj.value <= 1):
                errors.append(f"Проекция Prb {name}: вероятность вне [0, 1]")
            if proj.plastic and name not in PLASTIC_RULES:
                errors.append(f"Для проекции {name} нет правила пластичности")
        if errors:
            raise ConfigurationError('; '.join(errors))


def assembly_index(j: int, s: int, k: int, neurons_per_direction: int) -> int:
    """Индекс нейрона k ансамбля направления s степени свободы j."""
    return (j * len(DIRECTIONS) + s) * neurons_per_direction + k


def assembly_neurons(spec: CerebellarSpec, j: int, s: int) -> np.ndarray:
    """Индексы нейронов ансамбля (j, s) в PC, IO или DCN."""
    start = assembly_index(j, s, 0, spec.neurons_per_direction)
    return np.arange(start, start + spec.neurons_per_direction)


def climbing_fibre_mapping(spec: CerebellarSpec) -> np.ndarray:
    """IO(j, ±) -> PC(j, ∓): лазящее волокно на ансамбль, тормозящий противоположное ядро."""
    mapping = np.empty(spec.sizes['io'], dtype=np.int64)
    for j in range(spec.n_ts):
        for s in range(len(DIRECTIONS)):
            for k in range(spec.neurons_per_direction):
                mapping[assembly_index(j, s, k, spec.neurons_per_direction)] = \
                    assembly_index(j, 1 - s, k, spec.neurons_per_direction)
    return mapping


@dataclass
class Cerebellum:
    """Построенная сеть мозжечка с ансамблями MF и статистикой DCN."""

    spec: CerebellarSpec
    network: SpikingNetwork
    mf_assemblies: List[Assembly] = field(default_factory=list)
    theta_dcn_max: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        """Раздел файла весов."""
        return {
            'mf_assemblies': [a.to_dict() for a in self.mf_assemblies],
            'theta_dcn_max': self.theta_dcn_max,
            'synapses': self.network.weights(),
        }

    def load(self, data: Dict[str, Any]):
        """Загрузка раздела файла весов."""
        self.mf_assemblies = [Assembly.from_dict(a) for a in data['mf_assemblies']]
        self.theta_dcn_max = float(data['theta_dcn_max'])
        self.network.load_weights(data['synapses'])


def _edges(name: str, proj, spec: CerebellarSpec, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    n_pre, n_post = spec.sizes[proj.pre], spec.sizes[proj.post]
    if proj.topology == 'A2A':
        return connect_all(n_pre, n_post)
    if proj.topology == 'Prb':
        return connect_probabilistic(n_pre, n_post, float(proj.value), rng)
    if proj.topology == 'Rnd':
        groups = None
        if proj.pre == 'mf':
            size = spec.mf_assembly_size
            groups = [np.arange(i * size, (i + 1) * size) for i in range(spec.n_mf_assemblies)]
        return connect_random(n_pre, n_post, int(proj.value), rng, pre_groups=groups)
    if name == 'io_pc':
        return connect_one_to_one(climbing_fibre_mapping(spec), n_post)
    return connect_one_to_one(np.arange(n_pre), n_post)


def _gate_for(name: str, spec: CerebellarSpec) -> Dict[str, Any]:
    """Популяция-учитель и группы для правил с разрешающим сигналом."""
    if name == 'gc_pc':
        # PC-ансамбль учится только при активности своего партнёра по лазящему волокну
        mapping = climbing_fibre_mapping(spec)
        groups, gate_map = [], np.full(spec.sizes['pc'], -1, dtype=np.int64)
        for j in range(spec.n_ts):
            for s in range(len(DIRECTIONS)):
                pcs = assembly_neurons(spec, j, s)
                ios = np.flatnonzero(np.isin(mapping, pcs))
                gate_map[pcs] = len(groups)
                groups.append(ios)
        return {'gate_population': 'io', 'gate_groups': groups, 'gate_map': gate_map}
    return {'gate_population': 'io'}


def build_cerebellum(
    spec: CerebellarSpec,
    seed: int = 0,
    populations: Optional[Iterable[str]] = None,
    joint_ranges: Optional[Sequence[Tuple[float, float]]] = None,
) -> Cerebellum:
    """
    Построение микросхемы по таблице проекций.

    Args:
        spec: спецификация
        seed: зерно топологии; у каждой проекции собственный поток случайных чисел
        populations: подмножество популяций (по умолчанию все семь)
        joint_ranges: диапазоны суставов для ансамблей MF, град
    """
    included = set(populations) if populations is not None else set(POPULATIONS)
    unknown = included - set(POPULATIONS)
    if unknown:
        raise ConfigurationError(f"Неизвестные популяции: {sorted(unknown)}")
    pops = [NeuronPopulation(name, spec.neurons[name], spec.sizes[name]) for name in POPULATIONS if name in included]

    synapses = []
    for index, name in enumerate(PROJECTIONS):
        proj = spec.projections[name]
        if proj.pre not in included or proj.post not in included:
            continue
        rng = np.random.default_rng([seed, index])
        pre_idx, post_idx = _edges(name, proj, spec, rng)
        rule = spec.rules.get(name) if proj.plastic else None
        gate = _gate_for(name, spec) if rule is not None and rule.gated else {}
        if gate and 'io' not in included:
            rule, gate = None, {}
        synapses.append(SynapseSet(
            name=name, pre=proj.pre, post=proj.post,
            n_pre=spec.sizes[proj.pre], n_post=spec.sizes[proj.post],
            pre_idx=pre_idx, post_idx=post_idx, weights=np.full(pre_idx.size, proj.w_init),
            sign=sign_of(proj.w_init), w_init=proj.w_init, w_max=proj.w_max,
            plasticity=rule, **gate,
        ))
    network = SpikingNetwork(pops, synapses, syn_tau_ms=spec.syn_tau_ms)
    ranges = joint_ranges if joint_ranges is not None else [(-1.0, 1.0)] * spec.n_js
    mf = default_mf_assemblies(spec, ranges) if 'mf' in included else []
    logger.debug(f"Построен мозжечок: популяции {sorted(included)}, проекций {len(synapses)}")
    return Cerebellum(spec=spec, network=network, mf_assemblies=mf)


def default_mf_assemblies(spec: CerebellarSpec, joint_ranges: Sequence[Tuple[float, float]]) -> List[Assembly]:
    """Линейные ансамбли MF: углы суставов и компоненты направления v*."""
    size = spec.mf_assembly_size
    assemblies = [Assembly.linear(f"q{i + 1}", lo, hi, size, spec.mf_drive_amplitude)
                  for i, (lo, hi) in enumerate(joint_ranges)]
    assemblies += [Assembly.linear(f"v{j + 1}", -1.0, 1.0, size, spec.mf_drive_amplitude) for j in range(spec.n_ts)]
    return assemblies


def adapt_mf_assemblies(
    spec: CerebellarSpec,
    joint_ranges: Sequence[Tuple[float, float]],
    q_samples: np.ndarray,
    direction_samples: np.ndarray,
    soa: SoaConfig,
    seed: int = 0,
) -> List[Assembly]:
    """Самоорганизация кривых настройки MF по углам и направлениям скорости из лепета."""
    assemblies = default_mf_assemblies(spec, joint_ranges)
    data = np.hstack([np.asarray(q_samples, dtype=float), np.asarray(direction_samples, dtype=float)])
    adapted = []
    for i, assembly in enumerate(assemblies):
        adapted.append(soa_fit(data[:, i], assembly, soa, seed=seed + i))
    return adapted


def babble_mf_data(samples) -> Optional[Tuple[np.ndarray, np.ndarray]]:
    """Углы и единичные направления движущихся образцов лепета; None, если движения не было."""
    moving = [(s.q, unit_vector(s.v)) for s in samples if unit_vector(s.v) is not None]
    if not moving:
        return None
    q_samples, directions = zip(*moving)
    return np.array(q_samples, dtype=float), np.array(directions, dtype=float)


def encode_mf(q: Sequence[float], v_star: Sequence[float], assemblies: Sequence[Assembly]) -> np.ndarray:
    """Токи MF: по ансамблю на сустав (из q) и на измерение задачи (из v*)."""
    values = list(q) + list(v_star)
    if len(values) != len(assemblies):
        raise ConfigurationError(f"Ожидается {len(assemblies)} значений для MF, получено {len(values)}")
    return np.concatenate([encode(value, a) for value, a in zip(values, assemblies)])


def io_activity(e: Sequence[float], dead_band: float, io_max: float) -> np.ndarray:
    """
    Ток IO по степеням свободы и направлениям.

    Returns:
        np.ndarray: массив (n_ts, 2), столбцы «+» и «−»
    """
    e = np.asarray(e, dtype=float)
    out = np.zeros((e.size, 2))
    out[e > dead_band, 0] = io_max
    out[e < -dead_band, 1] = io_max
    return out


def io_drive(spec: CerebellarSpec, activity: np.ndarray) -> np.ndarray:
    """Развёртка активности ансамблей IO по нейронам."""
    drive = np.zeros(spec.sizes['io'])
    for j in range(spec.n_ts):
        for s in range(len(DIRECTIONS)):
            drive[assembly_neurons(spec, j, s)] = activity[j, s]
    return drive


@dataclass
class DcnReadout:
    """Число спайков DCN по ансамблям за окно декодирования."""

    counts: np.ndarray  # (n_ts, 2, n_dcn)
    theta_max: float
    n_dcn: int
    v_max: Tuple[float, ...]

    @classmethod
    def from_counts(cls, spec: CerebellarSpec, counts: np.ndarray, theta_max: float) -> 'DcnReadout':
        """Группировка спайков DCN по раскладке ансамблей."""
        shaped = np.asarray(counts).reshape(spec.n_ts, len(DIRECTIONS), spec.neurons_per_direction)
        return cls(counts=shaped, theta_max=theta_max, n_dcn=spec.neurons_per_direction, v_max=spec.v_max)


def decode_dcn(readout: DcnReadout, window_ms: float) -> Tuple[np.ndarray, bool]:
    """
    Двухтактное декодирование DCN в предсказание скорости.

    Returns:
        Tuple: ṽ и признак холодного старта (максимальная частота ещё не наблюдалась)
    """
    if window_ms <= 0:
        raise ConfigurationError(f"Окно декодирования должно быть положительным: {window_ms}")
    v_max = np.asarray(readout.v_max, dtype=float)
    if readout.theta_max <= 0:
        return np.zeros_like(v_max), True
    rates = readout.counts / (window_ms / 1000.0)
    push_pull = rates[:, 0, :].sum(axis=1) - rates[:, 1, :].sum(axis=1)
    v = push_pull / (readout.theta_max * readout.n_dcn) * v_max
    return np.clip(v, -v_max, v_max), False


def simulate_window(cb: Cerebellum, q, v_star, window_ms: float, io: Optional[np.ndarray] = None,
                    plasticity: bool = False) -> SpikeRecord:
    """Окно из состояния покоя с входом MF (и IO, если задан)."""
    network = cb.network
    network.reset_state()
    drives = {'mf': encode_mf(q, v_star, cb.mf_assemblies)}
    if io is not None:
        drives['io'] = io
    record = network.run(drives, window_ms, plasticity=plasticity)
    network.reset_state()
    return record


def cb_predict(cb: Cerebellum, q: Sequence[float], v_star: Sequence[float],
               window_ms: Optional[float] = None) -> np.ndarray:
    """Предсказание скорости ṽ для состояния (q, v*); веса не меняются."""
    window = window_ms or cb.spec.window_ms
    record = simulate_window(cb, q, v_star, window)
    readout = DcnReadout.from_counts(cb.spec, record.counts('dcn'), cb.theta_dcn_max)
    v, _ = decode_dcn(readout, window)
    return v


@dataclass
class TrainStepResult:
    """Итог шага обучения мозжечка."""

    v_pred: np.ndarray
    e: np.ndarray
    e_pred: float
    io: np.ndarray
    prediction: SpikeRecord
    teaching: SpikeRecord


def cb_train_step(cb: Cerebellum, q: Sequence[float], v_star: Sequence[float], v_observed: Sequence[float],
                  window_ms: Optional[float] = None) -> TrainStepResult:
    """
    Шаг обучения: предсказание, ошибка e = v - ṽ, окно с активной IO и пластичностью.

    Максимальная частота DCN обновляется по окну предсказания.
    """
    spec = cb.spec
    window = window_ms or spec.window_ms
    prediction = simulate_window(cb, q, v_star, window)
    dcn_counts = prediction.counts('dcn')
    peak = float(dcn_counts.max()) / (window / 1000.0) if dcn_counts.size else 0.0
    cb.theta_dcn_max = max(cb.theta_dcn_max, peak)
    v_pred, _ = decode_dcn(DcnReadout.from_counts(spec, dcn_counts, cb.theta_dcn_max), window)

    v_observed = np.asarray(v_observed, dtype=float)
    e = v_observed - v_pred
    activity = io_activity(e, spec.dead_band, spec.io_drive_max)
    teaching = simulate_window(cb, q, v_star, window, io=io_drive(spec, activity), plasticity=True)
    e_pred, _ = angular_error(v_pred, v_observed)
    return TrainStepResult(v_pred=v_pred, e=e, e_pred=e_pred, io=activity, prediction=prediction, teaching=teaching)


def assembly_rates(cb_or_spec, record: SpikeRecord, population: str) -> np.ndarray:
    """Средние частоты ансамблей PC, IO или DCN, массив (n_ts, 2)."""
    spec = cb_or_spec.spec if isinstance(cb_or_spec, Cerebellum) else cb_or_spec
    rates = record.rates(population)
    return rates.reshape(spec.n_ts, len(DIRECTIONS), spec.neurons_per_direction).mean(axis=2)


def rate_summary(spec: CerebellarSpec, record: SpikeRecord) -> pd.DataFrame:
    """Сводка частот (population, assembly, mean_hz, max_hz) по записи."""
    rows = []
    for population in POPULATIONS:
        if population not in record.sizes:
            continue
        rates = record.rates(population)
        if population in ('pc', 'io', 'dcn'):
            for j in range(spec.n_ts):
                for s, sign in enumerate(DIRECTIONS):
                    block = rates[assembly_neurons(spec, j, s)]
                    rows.append((population, f"j{j + 1}{sign}", float(block.mean()), float(block.max())))
        elif population == 'mf':
            size = spec.mf_assembly_size
            for i in range(spec.n_mf_assemblies):
                block = rates[i * size:(i + 1) * size]
                rows.append((population, f"a{i + 1}", float(block.mean()), float(block.max())))
        else:
            rows.append((population, 'all', float(rates.mean()), float(rates.max())))
    return pd.DataFrame(rows, columns=['population', 'assembly', 'mean_hz', 'max_hz'])


def cerebellum_from_weights(
    section: Dict[str, Any],
    spec: CerebellarSpec,
    seed: int,
    joint_ranges: Sequence[Tuple[float, float]],
) -> Cerebellum:
    """Сеть с той же топологией (по seed) и весами из файла."""
    cb = build_cerebellum(spec, seed, joint_ranges=joint_ranges)
    cb.load(section)
    return cb
