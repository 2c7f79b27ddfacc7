"""Наборы синапсов и построители топологий связей."""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np

from cerebellar_control.snn.plasticity import PlasticityRule, weight_bounds
from cerebellar_control.utils.exceptions import ConfigurationError

logger = logging.getLogger(__name__)

Edges = Tuple[np.ndarray, np.ndarray]


@dataclass
class SynapseSet:
    """Направленные взвешенные связи между двумя популяциями."""

    name: str
    pre: str
    post: str
    n_pre: int
    n_post: int
    pre_idx: np.ndarray
    post_idx: np.ndarray
    weights: np.ndarray
    sign: Literal['excitatory', 'inhibitory']
    w_init: float
    w_max: Optional[float] = None
    plasticity: Optional[PlasticityRule] = None
    gate_population: Optional[str] = None
    # Группы нейронов-учителей и номер группы для каждого постсинаптического нейрона
    gate_groups: Optional[List[np.ndarray]] = None
    gate_map: Optional[np.ndarray] = None

    def __post_init__(self):
        self.pre_idx = np.asarray(self.pre_idx, dtype=np.int64)
        self.post_idx = np.asarray(self.post_idx, dtype=np.int64)
        self.weights = np.asarray(self.weights, dtype=float)
        if not (self.pre_idx.shape == self.post_idx.shape == self.weights.shape):
            raise ConfigurationError(f"Несогласованные массивы рёбер в {self.name}")
        if self.n_edges and (self.pre_idx.min() < 0 or self.pre_idx.max() >= self.n_pre):
            raise ConfigurationError(f"Индекс пресинаптического нейрона вне популяции {self.pre} в {self.name}")
        if self.n_edges and (self.post_idx.min() < 0 or self.post_idx.max() >= self.n_post):
            raise ConfigurationError(f"Индекс постсинаптического нейрона вне популяции {self.post} в {self.name}")
        if self.sign not in ('excitatory', 'inhibitory'):
            raise ConfigurationError(f"Неизвестный знак синапса: {self.sign}")
        lo, hi = weight_bounds(self.sign, self.w_max)
        if self.n_edges and (self.weights.min() < lo or self.weights.max() > hi):
            raise ConfigurationError(f"Начальные веса {self.name} вне границ [{lo}, {hi}]")
        if self.plasticity is not None and self.plasticity.gated and self.gate_population is None:
            raise ConfigurationError(f"Для gated-правила {self.name} не указана популяция-учитель")

    @property
    def n_edges(self) -> int:
        """Число рёбер."""
        return int(self.weights.size)

    @property
    def plastic(self) -> bool:
        """Есть ли у набора правило пластичности."""
        return self.plasticity is not None

    def currents(self, pre_fired: np.ndarray) -> np.ndarray:
        """Суммарный синаптический ток на постсинаптические нейроны от спайков pre_fired."""
        active = pre_fired[self.pre_idx]
        if not np.any(active):
            return np.zeros(self.n_post)
        return np.bincount(self.post_idx[active], weights=self.weights[active], minlength=self.n_post)

    def fan_in(self) -> np.ndarray:
        """Число входящих связей для каждого постсинаптического нейрона."""
        return np.bincount(self.post_idx, minlength=self.n_post)

    def edge_set(self) -> set:
        """Множество пар (pre, post)."""
        return set(zip(self.pre_idx.tolist(), self.post_idx.tolist()))

    def to_dict(self) -> Dict[str, Any]:
        """Сериализация рёбер и весов."""
        return {
            'pre': self.pre,
            'post': self.post,
            'sign': self.sign,
            'w_max': self.w_max,
            'pre_idx': self.pre_idx.tolist(),
            'post_idx': self.post_idx.tolist(),
            'weights': self.weights.tolist(),
        }

    def load_weights(self, data: Dict[str, Any]):
        """Загрузка весов из сериализованного представления с проверкой топологии."""
        if data['pre_idx'] != self.pre_idx.tolist() or data['post_idx'] != self.post_idx.tolist():
            raise ConfigurationError(f"Топология {self.name} в файле весов не совпадает с построенной")
        self.weights = np.asarray(data['weights'], dtype=float)


def sign_of(w_init: float) -> Literal['excitatory', 'inhibitory']:
    """Знак синапса по начальному весу."""
    return 'inhibitory' if w_init < 0 else 'excitatory'


def connect_random(
    n_pre: int,
    n_post: int,
    fan_in: int,
    rng: np.random.Generator,
    pre_groups: Optional[Sequence[np.ndarray]] = None,
) -> Edges:
    """
    Топология Rnd: ровно fan_in пресинаптических нейронов на каждый постсинаптический.

    Если число групп равно fan_in, берётся по одному нейрону из каждой группы.
    """
    if fan_in < 1:
        raise ConfigurationError(f"Число входов Rnd должно быть положительным, получено: {fan_in}")
    if pre_groups is not None and len(pre_groups) == fan_in:
        pre = np.stack([rng.choice(np.asarray(group), size=n_post) for group in pre_groups], axis=1)
    else:
        if fan_in > n_pre:
            raise ConfigurationError(f"Число входов {fan_in} больше размера популяции {n_pre}")
        pre = np.stack([rng.choice(n_pre, size=fan_in, replace=False) for _ in range(n_post)])
    post = np.repeat(np.arange(n_post), fan_in).reshape(n_post, fan_in)
    return pre.ravel(), post.ravel()


def connect_probabilistic(n_pre: int, n_post: int, p: float, rng: np.random.Generator) -> Edges:
    """Топология Prb: каждая пара соединяется с вероятностью p."""
    if not 0.0 <= p <= 1.0:
        raise ConfigurationError(f"Вероятность связи вне [0, 1]: {p}")
    mask = rng.random((n_pre, n_post)) < p
    pre, post = np.nonzero(mask)
    return pre, post


def connect_all(n_pre: int, n_post: int) -> Edges:
    """Топология A2A: все пары."""
    pre, post = np.meshgrid(np.arange(n_pre), np.arange(n_post), indexing='ij')
    return pre.ravel(), post.ravel()


def connect_one_to_one(mapping: np.ndarray, n_post: int) -> Edges:
    """Топология O2O: пресинаптический нейрон i соединён с постсинаптическим mapping[i]."""
    mapping = np.asarray(mapping, dtype=np.int64)
    if mapping.size != n_post or np.unique(mapping).size != mapping.size:
        raise ConfigurationError("Отображение O2O должно быть биекцией между популяциями равного размера")
    return np.arange(mapping.size), mapping
