"""Послойные целевые функции настройки мозжечка."""

import copy
import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from cerebellar_control.coding.soa import SoaConfig
from cerebellar_control.config.settings import ExperimentConfig, apply_overlay
from cerebellar_control.hyperopt.space import Point
from cerebellar_control.plant.environment import build_plant
from cerebellar_control.services.cerebellum_service import (
    CerebellarSpec,
    Cerebellum,
    adapt_mf_assemblies,
    assembly_neurons,
    build_cerebellum,
    io_drive,
    simulate_window,
)
from cerebellar_control.services.controller_service import TrialMode, run_trial, star_targets
from cerebellar_control.services.dm_service import DmTopology
from cerebellar_control.utils.decorators import penalize_faults
from cerebellar_control.utils.exceptions import ConfigurationError
from cerebellar_control.utils.utils import xnor

logger = logging.getLogger(__name__)

MfData = Tuple[np.ndarray, np.ndarray]

WEIGHTS = {
    1: (0.5, 0.5),
    2: (0.1, 0.1, 0.2, 0.6),
    3: (0.2, 0.2, 0.6),
    4: (0.3, 0.1, 0.1, 0.1, 0.2, 0.2),
}
# Популяции подсети для каждой целевой функции
POPULATIONS = {
    1: ('mf',),
    2: ('mf', 'gc', 'ggc'),
    3: ('mf', 'gc', 'ggc', 'pc', 'bc', 'io'),
    4: None,
}
DECREASE_STEP = 0.33
DECREASE_FLOOR = 0.01


@dataclass
class ObjectiveScore:
    """Вектор подцелей и взвешенная сумма."""

    index: int
    components: np.ndarray

    @property
    def weights(self) -> np.ndarray:
        return np.asarray(WEIGHTS[self.index])

    @property
    def value(self) -> float:
        """f_i = O_i · w_i."""
        return float(np.dot(self.components, self.weights))

    def to_dict(self) -> Dict[str, Any]:
        return {'objective': self.index, 'components': self.components.tolist(), 'loss': self.value}


def make_score(index: int, components: Sequence[float]) -> ObjectiveScore:
    """Оценка с проверкой длины вектора подцелей."""
    components = np.asarray(components, dtype=float)
    if components.shape != (len(WEIGHTS[index]),):
        raise ConfigurationError(f"Целевая функция {index}: ожидается {len(WEIGHTS[index])} подцелей")
    return ObjectiveScore(index=index, components=components)


def gaussian_center(counts: Sequence[float]) -> Optional[float]:
    """Среднее гауссианы, подогнанной методом максимального правдоподобия к индексам спайков."""
    counts = np.asarray(counts).astype(int)
    if counts.sum() <= 0:
        return None
    samples = np.repeat(np.arange(counts.size), counts)
    loc, _ = stats.norm.fit(samples)
    return float(loc)


def mf_components(
    counts: Sequence[np.ndarray],
    nearest: Sequence[int],
    window_ms: float,
    fr_desired: float,
) -> Tuple[float, float]:
    """
    Подцели слоя MF по блокам спайков ансамблей.

    Returns:
        Tuple: средние |max rate - fr_desired| и |G_mean - MF_nearest|
    """
    rate_terms, center_terms = [], []
    for block, index in zip(counts, nearest):
        block = np.asarray(block)
        rate_terms.append(abs(block.max() / (window_ms / 1000.0) - fr_desired))
        center = gaussian_center(block)
        center_terms.append(float(block.size) if center is None else abs(center - index))
    return float(np.mean(rate_terms)), float(np.mean(center_terms))


def winner_repetitions(winners: Sequence[int]) -> Tuple[float, float]:
    """Максимальное и среднее число повторов победителей по испытаниям."""
    if len(winners) == 0:
        return 0.0, 0.0
    _, repeats = np.unique(np.asarray(winners), return_counts=True)
    return float(repeats.max()), float(repeats.mean())


def gc_components(
    gc_rates: Sequence[np.ndarray],
    ggc_rates: Sequence[np.ndarray],
    fr_gc: float,
    fr_ggc: float,
    phi: float,
) -> Tuple[float, float, float, float]:
    """
    Подцели гранулярного слоя.

    Активным считается нейрон GC с частотой выше трети целевой. Испытание без активных
    нейронов даёт штраф phi, иначе |λ - 1|. Уникальность: 0.3·μ_max + 0.7·μ_mean
    по повторам нейрона-победителя.
    """
    o1 = float(np.mean([abs(np.max(r) - fr_gc) for r in gc_rates]))
    o2 = float(np.mean([abs(np.max(r) - fr_ggc) for r in ggc_rates]))
    sparsity, winners = [], []
    for rates in gc_rates:
        active = int(np.sum(np.asarray(rates) > fr_gc / 3.0))
        sparsity.append(phi if active == 0 else abs(active - 1))
        if np.max(rates) > 0:
            winners.append(int(np.argmax(rates)))
    o3 = float(np.mean(sparsity))
    if winners:
        mu_max, mu_mean = winner_repetitions(winners)
        o4 = 0.3 * mu_max + 0.7 * mu_mean
    else:
        o4 = float(len(gc_rates))
    return o1, o2, o3, o4


def decrease_score(series: Sequence[float]) -> float:
    """Начиная с 1, вычитание 0.33 за каждое уменьшение между соседними испытаниями; не ниже 0.01."""
    series = np.asarray(series, dtype=float)
    decreases = int(np.sum(np.diff(series) < 0)) if series.size > 1 else 0
    return max(DECREASE_FLOOR, 1.0 - DECREASE_STEP * decreases)


def xnor_mean(pairs: Sequence[Tuple[bool, bool]]) -> float:
    """Среднее XNOR по парам признаков активности."""
    if not pairs:
        return 0.0
    return float(np.mean([xnor(a, b) for a, b in pairs]))


@dataclass
class ObjectiveContext:
    """Базовая конфигурация и обученные модели для оценки кандидатов."""

    config: ExperimentConfig
    dm: Optional[DmTopology] = None
    seed: int = 0
    # Углы и направления из лепета для адаптации MF
    mf_data: Optional[MfData] = None


def probe_states(
    config: ExperimentConfig,
    rng: np.random.Generator,
    count: int,
) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Случайные состояния (q, v*) в диапазонах суставов с единичными направлениями."""
    lower = np.array([r[0] for r in config.joint_ranges])
    upper = np.array([r[1] for r in config.joint_ranges])
    states = []
    for _ in range(count):
        q = rng.uniform(lower, upper)
        angle = rng.uniform(0.0, 2.0 * np.pi)
        states.append((q, np.array([np.cos(angle), np.sin(angle)])))
    return states


def _build(config: ExperimentConfig, index: int, seed: int, mf_data: Optional[MfData] = None) -> Cerebellum:
    """Подсеть целевой функции; ансамбли MF адаптируются по лепету, как при обучении мозжечка."""
    spec = CerebellarSpec.from_config(config.cerebellum)
    cb = build_cerebellum(spec, seed, populations=POPULATIONS[index], joint_ranges=config.joint_ranges)
    if mf_data is not None:
        q_samples, directions = mf_data
        cb.mf_assemblies = adapt_mf_assemblies(spec, config.joint_ranges, q_samples, directions,
                                               SoaConfig.from_config(config.cerebellum.soa), seed=seed)
    return cb


def _one_sided_io(spec: CerebellarSpec, rng: np.random.Generator) -> np.ndarray:
    """Активность IO с одной стороной на каждую степень свободы."""
    activity = np.zeros((spec.n_ts, 2))
    sides = rng.integers(0, 2, spec.n_ts)
    activity[np.arange(spec.n_ts), sides] = spec.io_drive_max
    return activity


def _assembly_stats(spec: CerebellarSpec, rates: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Средняя и максимальная частота ансамблей, массивы (n_ts, 2)."""
    mean, peak = np.zeros((spec.n_ts, 2)), np.zeros((spec.n_ts, 2))
    for j in range(spec.n_ts):
        for s in range(2):
            block = rates[assembly_neurons(spec, j, s)]
            mean[j, s], peak[j, s] = block.mean(), block.max()
    return mean, peak


def objective_f1(config: ExperimentConfig, seed: int = 0, mf_data: Optional[MfData] = None) -> ObjectiveScore:
    """Форма активности MF: пиковая частота и центр колокола на ближайшем нейроне."""
    opt = config.optimizer
    cb = _build(config, 1, seed, mf_data)
    size = cb.spec.mf_assembly_size
    counts, nearest = [], []
    for q, v_star in probe_states(config, np.random.default_rng([seed, 1]), opt.n_test):
        record = simulate_window(cb, q, v_star, opt.probe_window_ms)
        mf = record.counts('mf')
        for i, (value, assembly) in enumerate(zip(list(q) + list(v_star), cb.mf_assemblies)):
            counts.append(mf[i * size:(i + 1) * size])
            nearest.append(assembly.nearest(value))
    o1, o2 = mf_components(counts, nearest, opt.probe_window_ms, config.cerebellum.fr_desired.mf)
    return make_score(1, [o1, o2])


def objective_f2(config: ExperimentConfig, seed: int = 0, mf_data: Optional[MfData] = None) -> ObjectiveScore:
    """Разреженность и уникальность кода GC под торможением GgC."""
    opt = config.optimizer
    if opt.n_test < 2:
        raise ConfigurationError("Для оценки уникальности нужно не меньше двух проб")
    cb = _build(config, 2, seed, mf_data)
    gc_rates, ggc_rates = [], []
    for q, v_star in probe_states(config, np.random.default_rng([seed, 2]), opt.n_test):
        record = simulate_window(cb, q, v_star, opt.probe_window_ms)
        gc_rates.append(record.rates('gc'))
        ggc_rates.append(record.rates('ggc'))
    targets = config.cerebellum.fr_desired
    return make_score(2, gc_components(gc_rates, ggc_rates, targets.gc, targets.ggc, opt.phi))


def objective_f3(config: ExperimentConfig, seed: int = 0, mf_data: Optional[MfData] = None) -> ObjectiveScore:
    """Простые и сложные спайки PC и чередование ансамблей при одностороннем обучении."""
    opt = config.optimizer
    targets = config.cerebellum.fr_desired
    cb = _build(config, 3, seed, mf_data)
    spec = cb.spec
    rng = np.random.default_rng([seed, 3])
    ss_terms, cs_terms, pairs = [], [], []
    for q, v_star in probe_states(config, rng, opt.n_test):
        activity = _one_sided_io(spec, rng)
        record = simulate_window(cb, q, v_star, opt.probe_window_ms, io=io_drive(spec, activity))
        mean, peak = _assembly_stats(spec, record.rates('pc'))
        for j in range(spec.n_ts):
            taught = int(np.argmax(activity[j]))
            # Лазящее волокно IO(j, s) приходит на PC(j, 1 - s)
            cs_terms.append(abs(peak[j, 1 - taught] - targets.pc_cs))
            ss_terms.append(abs(peak[j, taught] - targets.pc_ss))
            pairs.append((mean[j, 0] > targets.pc_ss, mean[j, 1] > targets.pc_ss))
    return make_score(3, [float(np.mean(ss_terms)), float(np.mean(cs_terms)), xnor_mean(pairs)])


def objective_f4(config: ExperimentConfig, dm: DmTopology, seed: int = 0,
                 mf_data: Optional[MfData] = None) -> ObjectiveScore:
    """
    Обучение на повторяемом движении к цели и согласованность DCN.

    Движение к первой цели звезды повторяется f4_repetitions раз с обучением.
    """
    if dm is None:
        raise ConfigurationError("Для четвёртой целевой функции нужна обученная сеть DM")
    opt = config.optimizer
    targets = config.cerebellum.fr_desired
    cb = _build(config, 4, seed, mf_data)
    spec = cb.spec
    plant = build_plant(config, seed=seed)
    target = star_targets(plant.position(), config.controller.star_radius)[0]
    e_preds, times = [], []
    for repetition in range(opt.f4_repetitions):
        plant.reset(seed=[seed, 4, repetition])
        record = run_trial(dm, cb, plant, target, TrialMode.TRAIN_CB, config.controller)
        e_preds.append(record.mean_e_pred if np.isfinite(record.mean_e_pred) else np.pi)
        times.append(record.execution_time)

    rng = np.random.default_rng([seed, 4])
    rate_terms, alternation, inversion = [], [], []
    for q, v_star in probe_states(config, rng, opt.n_test):
        activity = _one_sided_io(spec, rng)
        record = simulate_window(cb, q, v_star, opt.probe_window_ms, io=io_drive(spec, activity))
        dcn_mean, dcn_peak = _assembly_stats(spec, record.rates('dcn'))
        pc_mean, _ = _assembly_stats(spec, record.rates('pc'))
        rate_terms.append(abs(dcn_peak.max() - targets.dcn))
        dcn_active = dcn_mean > targets.dcn
        pc_active = pc_mean > targets.pc_ss
        for j in range(spec.n_ts):
            alternation.append((dcn_active[j, 0], dcn_active[j, 1]))
            for s in range(2):
                inversion.append((dcn_active[j, s], pc_active[j, s]))
    components = [
        float(np.mean(e_preds)),
        decrease_score(e_preds),
        decrease_score(times),
        float(np.mean(rate_terms)),
        xnor_mean(alternation),
        xnor_mean(inversion),
    ]
    return make_score(4, components)


def evaluate_objective(index: int, config: ExperimentConfig, dm: Optional[DmTopology] = None,
                       seed: int = 0, mf_data: Optional[MfData] = None) -> ObjectiveScore:
    """Вычисление целевой функции index для готовой конфигурации."""
    if index == 1:
        return objective_f1(config, seed, mf_data)
    if index == 2:
        return objective_f2(config, seed, mf_data)
    if index == 3:
        return objective_f3(config, seed, mf_data)
    if index == 4:
        return objective_f4(config, dm, seed, mf_data)
    raise ConfigurationError(f"Неизвестная целевая функция: {index}")


def make_objective(index: int, context: ObjectiveContext):
    """
    Функция потерь кандидата для оптимизатора.

    Возвращает (потеря, детали); неустойчивость, сбои объекта и недопустимые
    кандидаты дают штрафную потерю. Ошибки настройки всего запуска
    проверяются до первого испытания.
    """
    if index == 2 and context.config.optimizer.n_test < 2:
        raise ConfigurationError("Для оценки уникальности нужно не меньше двух проб")
    if index == 4 and context.dm is None:
        raise ConfigurationError("Для четвёртой целевой функции нужна обученная сеть DM")
    penalty = context.config.optimizer.penalty_loss

    @penalize_faults(penalty)
    def objective(point: Point) -> Tuple[float, Dict[str, Any]]:
        config = apply_overlay(context.config, point)
        dm = copy.deepcopy(context.dm) if context.dm is not None else None
        score = evaluate_objective(index, config, dm, context.seed, context.mf_data)
        loss = score.value
        if not np.isfinite(loss):
            return penalty, {'components': score.components.tolist(), 'fault': 'non_finite'}
        return min(loss, penalty), {'components': score.components.tolist()}

    return objective
