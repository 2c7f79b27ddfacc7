"""Правила STDP и их применение к наборам синапсов."""

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Literal, Sequence, Union

import numpy as np

from cerebellar_control.utils.exceptions import ConfigurationError

if TYPE_CHECKING:
    from cerebellar_control.snn.synapses import SynapseSet

logger = logging.getLogger(__name__)

DEFAULT_WINDOW_MS = 50.0


@dataclass(frozen=True)
class PlasticityRule:
    """
    Правило пластичности.

    antisymmetric использует S_a, S_b, tau_a, tau_b; symmetric использует S, tau_1, tau_2.
    Для gated-правила изменения весов разрешены только при активной популяции-учителе.
    """

    kind: Literal['antisymmetric', 'symmetric']
    S_a: float = 0.0
    S_b: float = 0.0
    tau_a: float = 20.0
    tau_b: float = 20.0
    S: float = 0.0
    tau_1: float = 20.0
    tau_2: float = 20.0
    gated: bool = False
    window_ms: float = DEFAULT_WINDOW_MS

    def __post_init__(self):
        if self.kind not in ('antisymmetric', 'symmetric'):
            raise ConfigurationError(f"Неизвестный тип правила STDP: {self.kind}")
        for name in ('tau_a', 'tau_b', 'tau_1', 'tau_2', 'window_ms'):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"Постоянная {name} должна быть положительной")
        for name in ('S_a', 'S_b', 'S'):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"Амплитуда {name} не может быть отрицательной")

    @classmethod
    def from_config(cls, block) -> 'PlasticityRule':
        """Создание правила из блока конфигурации StdpModel."""
        return cls(kind=block.kind, S_a=block.s_a, S_b=block.s_b, tau_a=block.tau_a, tau_b=block.tau_b,
                   S=block.s, tau_1=block.tau_1, tau_2=block.tau_2, gated=block.gated,
                   window_ms=block.window_ms)

    def delta(self, dt: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        """Изменение веса для разности времён dt = t_post - t_pre."""
        if self.kind == 'antisymmetric':
            return stdp_antisymmetric(dt, self)
        return stdp_symmetric(dt, self)


def stdp_antisymmetric(dt: Union[float, np.ndarray], rule: PlasticityRule) -> Union[float, np.ndarray]:
    """Антисимметричное окно: депрессия при dt <= 0, потенциация при dt > 0."""
    dt = np.asarray(dt, dtype=float)
    out = np.where(
        dt > 0,
        rule.S_b * np.exp(-np.abs(dt) / rule.tau_b),
        -rule.S_a * np.exp(-np.abs(dt) / rule.tau_a),
    )
    return float(out) if out.ndim == 0 else out


def stdp_symmetric(dt: Union[float, np.ndarray], rule: PlasticityRule) -> Union[float, np.ndarray]:
    """Симметричное окно типа «мексиканская шляпа» с нулями в ±tau_1."""
    dt = np.asarray(dt, dtype=float)
    out = rule.S * (1.0 - (dt / rule.tau_1) ** 2) * np.exp(-np.abs(dt) / rule.tau_2)
    return float(out) if out.ndim == 0 else out


def weight_bounds(sign: str, w_max) -> tuple:
    """Допустимый интервал весов для знака синапса."""
    if sign == 'excitatory':
        return 0.0, (np.inf if w_max is None else float(w_max))
    return (-np.inf if w_max is None else float(w_max)), 0.0


def clamp_weights(weights: np.ndarray, sign: str, w_max) -> np.ndarray:
    """Ограничение весов допустимым интервалом."""
    lo, hi = weight_bounds(sign, w_max)
    return np.clip(weights, lo, hi)


def nearest_pair_deltas(
    pre_times: np.ndarray,
    post_times: np.ndarray,
    rule: PlasticityRule,
) -> float:
    """
    Суммарное изменение веса одной связи при парах ближайших соседей.

    Каждый постсинаптический спайк парируется с последним строго более ранним
    пресинаптическим, каждый пресинаптический с последним не более поздним
    постсинаптическим; пары вне окна отбрасываются.
    """
    pre_times = np.asarray(pre_times, dtype=float)
    post_times = np.asarray(post_times, dtype=float)
    if pre_times.size == 0 or post_times.size == 0:
        return 0.0
    total = 0.0

    idx = np.searchsorted(pre_times, post_times, side='left') - 1
    valid = idx >= 0
    if np.any(valid):
        dts = post_times[valid] - pre_times[idx[valid]]
        dts = dts[dts <= rule.window_ms]
        total += float(np.sum(rule.delta(dts))) if dts.size else 0.0

    idx = np.searchsorted(post_times, pre_times, side='right') - 1
    valid = idx >= 0
    if np.any(valid):
        dts = post_times[idx[valid]] - pre_times[valid]
        dts = dts[np.abs(dts) <= rule.window_ms]
        total += float(np.sum(rule.delta(dts))) if dts.size else 0.0
    return total


def apply_plasticity(
    synapses: 'SynapseSet',
    pre_spikes: Sequence[np.ndarray],
    post_spikes: Sequence[np.ndarray],
    gate_active: Union[bool, np.ndarray] = True,
) -> np.ndarray:
    """
    Применение правила пластичности к набору синапсов по истории спайков.

    Args:
        synapses: набор синапсов с правилом
        pre_spikes: времена спайков каждого пресинаптического нейрона
        post_spikes: времена спайков каждого постсинаптического нейрона
        gate_active: флаг или маска по постсинаптическим нейронам

    Returns:
        np.ndarray: обновлённые веса (также записываются в набор)
    """
    rule = synapses.plasticity
    if rule is None:
        raise ConfigurationError(f"У набора синапсов {synapses.name} нет правила пластичности")
    allowed = np.ones(synapses.n_edges, dtype=bool)
    if rule.gated:
        gate = np.asarray(gate_active, dtype=bool)
        if gate.ndim == 0:
            allowed = np.full(synapses.n_edges, bool(gate))
        else:
            allowed = gate[synapses.post_idx]
    if not np.any(allowed):
        return synapses.weights

    deltas = np.zeros(synapses.n_edges)
    for e in np.flatnonzero(allowed):
        deltas[e] = nearest_pair_deltas(pre_spikes[synapses.pre_idx[e]], post_spikes[synapses.post_idx[e]], rule)
    synapses.weights = clamp_weights(synapses.weights + deltas, synapses.sign, synapses.w_max)
    return synapses.weights
