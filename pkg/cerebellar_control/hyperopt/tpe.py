"""Суррогат TPE: разбиение истории, оценки Парзена, ожидаемое улучшение, блокировка по Спирмену."""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from cerebellar_control.hyperopt.space import Dimension, HyperparameterSpace, Point, numeric_matrix

logger = logging.getLogger(__name__)


def tpe_split(losses: Sequence[float], gamma: float) -> Tuple[List[int], List[int]]:
    """
    Разбиение истории на лучшие и остальные испытания.

    Лучшими считаются ceil(gamma·N) испытаний с наименьшей потерей; при равенстве первым идёт более раннее.

    Returns:
        Tuple: индексы лучших и остальных испытаний в исходном порядке
    """
    losses = np.asarray(losses, dtype=float)
    n_good = max(1, math.ceil(gamma * len(losses)))
    order = np.argsort(losses, kind='stable')
    good = sorted(order[:n_good].tolist())
    bad = sorted(order[n_good:].tolist())
    return good, bad


def parzen_density(
    x: float,
    centers: Sequence[float],
    eta: float,
    lo: float,
    hi: float,
    prior_weight: float = 0.0,
) -> float:
    """
    Смесь нормальных ядер с шириной eta, усечённых и перенормированных на [lo, hi].

    При prior_weight > 0 добавляется широкое ядро в середине диапазона с этим весом.
    """
    centers = np.asarray(centers, dtype=float)
    mus = list(centers)
    sigmas = [eta] * len(centers)
    weights = [1.0] * len(centers)
    if prior_weight > 0:
        mus.append((lo + hi) / 2.0)
        sigmas.append(hi - lo)
        weights.append(prior_weight)
    mus, sigmas, weights = np.array(mus), np.array(sigmas), np.array(weights)
    if weights.sum() == 0:
        return 0.0
    a, b = (lo - mus) / sigmas, (hi - mus) / sigmas
    pdf = stats.truncnorm.pdf(x, a, b, loc=mus, scale=sigmas)
    return float(np.dot(weights, pdf) / weights.sum())


@dataclass
class ParzenEstimator:
    """Одномерная оценка плотности по значениям одного измерения."""

    dimension: Dimension
    centers: np.ndarray
    eta: float
    prior_weight: float

    @classmethod
    def fit(cls, dimension: Dimension, values: Sequence[float], bandwidth_floor: float,
            prior_weight: float) -> 'ParzenEstimator':
        """Ширина ядра: max(σ значений, доля bandwidth_floor от диапазона)."""
        values = np.asarray(values, dtype=float)
        if dimension.kind == 'categorical':
            return cls(dimension, values, 0.0, prior_weight)
        spread = float(np.std(values)) if values.size > 1 else 0.0
        eta = max(spread, bandwidth_floor * dimension.width)
        return cls(dimension, values, eta, prior_weight)

    def _category_mass(self) -> np.ndarray:
        n = len(self.dimension.choices)
        counts = np.bincount(self.centers.astype(int), minlength=n).astype(float)
        counts += self.prior_weight / n
        total = counts.sum()
        return counts / total if total > 0 else np.full(n, 1.0 / n)

    def pdf(self, x: float) -> float:
        """Плотность (или вероятность категории) в точке x."""
        if self.dimension.kind == 'categorical':
            return float(self._category_mass()[int(x)])
        return parzen_density(x, self.centers, self.eta, self.dimension.lo, self.dimension.hi, self.prior_weight)

    def sample(self, rng: np.random.Generator) -> float:
        """Случайное значение из смеси."""
        d = self.dimension
        if d.kind == 'categorical':
            return float(rng.choice(len(d.choices), p=self._category_mass()))
        n = len(self.centers)
        total = n + self.prior_weight
        pick = rng.uniform(0.0, total)
        if pick >= n:
            mu, sigma = (d.lo + d.hi) / 2.0, d.width
        else:
            mu, sigma = float(self.centers[int(pick)]), self.eta
        a, b = (d.lo - mu) / sigma, (d.hi - mu) / sigma
        return float(stats.truncnorm.rvs(a, b, loc=mu, scale=sigma, random_state=rng))


def ei_score(density_good: float, density_bad: float, gamma: float) -> float:
    """Ожидаемое улучшение с точностью до множителя: (γ + (U/D)(1-γ))⁻¹; 0 при D = 0."""
    if density_good <= 0:
        return 0.0
    ratio = density_bad / density_good
    return 1.0 / (gamma + ratio * (1.0 - gamma))


def ei_rank(
    candidates: Sequence[Point],
    good_models: Dict[str, ParzenEstimator],
    bad_models: Dict[str, ParzenEstimator],
    gamma: float,
) -> Tuple[int, List[float]]:
    """
    Выбор кандидата с наибольшим ожидаемым улучшением.

    Плотности перемножаются по измерениям моделей; при равенстве выигрывает первый.

    Returns:
        Tuple: индекс лучшего кандидата и оценки всех кандидатов
    """
    scores = []
    for candidate in candidates:
        log_good, log_bad, zero = 0.0, 0.0, False
        for name, model in good_models.items():
            x = model.dimension.to_numeric(candidate[name])
            pg, pb = model.pdf(x), bad_models[name].pdf(x)
            if pg <= 0:
                zero = True
                break
            log_good += math.log(pg)
            log_bad += math.log(pb) if pb > 0 else -math.inf
        if zero:
            scores.append(0.0)
            continue
        ratio = math.exp(log_bad - log_good) if log_bad > -math.inf else 0.0
        scores.append(ei_score(1.0, ratio, gamma))
    best = int(np.argmax(scores)) if scores else -1
    return best, scores


def spearman_rho(values: Sequence[float], losses: Sequence[float]) -> float:
    """Ранговая корреляция Спирмена со средними рангами; постоянная выборка даёт 0."""
    values, losses = np.asarray(values, dtype=float), np.asarray(losses, dtype=float)
    if np.ptp(values) == 0 or np.ptp(losses) == 0:
        return 0.0
    rho, _ = stats.spearmanr(values, losses)
    return 0.0 if not np.isfinite(rho) else float(rho)


def spearman_lock(
    space: HyperparameterSpace,
    points: Sequence[Point],
    losses: Sequence[float],
    threshold: float,
) -> Dict[str, bool]:
    """
    Какие измерения варьировать (True), а какие зафиксировать (False).

    Измерения со слабой корреляцией |ρ| < threshold с потерей фиксируются;
    хотя бы одно измерение (с наибольшим |ρ|) всегда варьируется.
    """
    matrix = numeric_matrix(space, points)
    rhos = [abs(spearman_rho(matrix[:, k], losses)) for k in range(len(space))]
    vary = {d.name: rho >= threshold for d, rho in zip(space, rhos)}
    if not any(vary.values()):
        vary[space.dimensions[int(np.argmax(rhos))].name] = True
    return vary


def candidate_count(n_history: int, minimum: int, factor: int) -> int:
    """Число кандидатов на раунд: max(minimum, ceil(√N)·factor)."""
    return max(minimum, math.ceil(math.sqrt(n_history)) * factor)


def suggest(
    space: HyperparameterSpace,
    points: Sequence[Point],
    losses: Sequence[float],
    rng: np.random.Generator,
    config,
    best: Optional[Point] = None,
) -> Point:
    """
    Следующая точка по истории: разбиение, оценки Парзена, блокировка, ожидаемое улучшение.

    Args:
        space: пространство
        points: точки истории
        losses: потери истории
        rng: генератор случайных чисел
        config: блок OptimizerConfig
        best: точка для фиксированных измерений (по умолчанию лучшая в истории)
    """
    good, bad = tpe_split(losses, config.gamma)
    if best is None:
        best = points[int(np.argmin(losses))]
    matrix = numeric_matrix(space, points)

    if len(points) >= 5:
        vary = spearman_lock(space, points, losses, config.lock_threshold)
    else:
        vary = {d.name: True for d in space}

    good_models, bad_models = {}, {}
    for k, d in enumerate(space):
        if not vary[d.name]:
            continue
        good_models[d.name] = ParzenEstimator.fit(d, matrix[good, k], config.bandwidth_floor, config.prior_weight)
        bad_values = matrix[bad, k] if bad else matrix[:, k]
        bad_models[d.name] = ParzenEstimator.fit(d, bad_values, config.bandwidth_floor, config.prior_weight)

    n_candidates = candidate_count(len(points), config.candidates_min, config.candidates_factor)
    candidates = []
    for _ in range(n_candidates):
        candidate = {}
        for d in space:
            if d.name in good_models:
                value = good_models[d.name].sample(rng)
                candidate[d.name] = d.choices[int(value)] if d.kind == 'categorical' else d.clip(value)
            else:
                candidate[d.name] = best[d.name]
        candidates.append(candidate)

    index, scores = ei_rank(candidates, good_models, bad_models, config.gamma)
    locked = [name for name, flag in vary.items() if not flag]
    logger.debug(f"TPE: кандидатов {n_candidates}, зафиксировано {len(locked)}, EI {scores[index]:.4g}")
    return space.clip(candidates[index])
