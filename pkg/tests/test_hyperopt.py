"""Тесты оптимизатора: разбиение истории, оценки Парзена, EI, блокировка и целевые функции."""

import numpy as np
import pytest

from cerebellar_control.coding.soa import SoaConfig
from cerebellar_control.config.settings import apply_overlay
from cerebellar_control.hyperopt import objectives
from cerebellar_control.hyperopt.objectives import (
    ObjectiveContext,
    decrease_score,
    gaussian_center,
    gc_components,
    make_objective,
    make_score,
    mf_components,
    probe_states,
    winner_repetitions,
    xnor_mean,
)
from cerebellar_control.hyperopt.optimizer import optimize, optimize_async
from cerebellar_control.hyperopt.space import Dimension, HyperparameterSpace, objective_space
from cerebellar_control.hyperopt.tpe import (
    ParzenEstimator,
    candidate_count,
    ei_rank,
    ei_score,
    parzen_density,
    spearman_lock,
    tpe_split,
)
from cerebellar_control.services.cerebellum_service import CerebellarSpec, adapt_mf_assemblies
from cerebellar_control.utils.exceptions import ConfigurationError, PlantFault


@pytest.fixture
def unit_space():
    return HyperparameterSpace([Dimension('X', 'float', 0.0, 1.0)])


@pytest.fixture
def optimizer_config(default_config):
    return default_config.optimizer.model_copy(update={'startup_trials': 5})


def quadratic(point):
    return (point['X'] - 0.3) ** 2, {}


class TestSplit:
    def test_ties_prefer_earlier(self):
        good, bad = tpe_split([3.0, 1.0, 2.0, 1.0], 0.25)
        assert good == [1]
        assert bad == [0, 2, 3]

    def test_size_rounds_up(self):
        good, bad = tpe_split([5.0, 4.0, 3.0, 2.0, 1.0], 0.5)
        assert good == [2, 3, 4]
        assert bad == [0, 1]


class TestParzen:
    def test_density_normalized_on_range(self):
        grid = np.linspace(0.0, 1.0, 2001)
        values = [parzen_density(x, [0.2, 0.8], 0.1, 0.0, 1.0, prior_weight=1.0) for x in grid]
        assert np.trapz(values, grid) == pytest.approx(1.0, abs=1e-3)

    def test_zero_outside_range(self):
        assert parzen_density(1.5, [0.5], 0.1, 0.0, 1.0) == 0.0

    def test_bandwidth_floor(self):
        dim = Dimension('X', 'float', 0.0, 10.0)
        model = ParzenEstimator.fit(dim, [2.0, 2.0], bandwidth_floor=0.01, prior_weight=0.0)
        assert model.eta == pytest.approx(0.1)

    def test_samples_in_range(self, rng):
        dim = Dimension('X', 'float', 0.0, 1.0)
        model = ParzenEstimator.fit(dim, [0.05, 0.95], 0.01, 1.0)
        samples = [model.sample(rng) for _ in range(100)]
        assert min(samples) >= 0.0 and max(samples) <= 1.0

    def test_categorical_mass(self):
        dim = Dimension('K', 'categorical', choices=('a', 'b'))
        model = ParzenEstimator.fit(dim, [0.0, 0.0, 0.0], 0.01, 0.0)
        assert model.pdf(0) == pytest.approx(1.0)
        assert model.pdf(1) == 0.0


class TestExpectedImprovement:
    def test_score(self):
        assert ei_score(0.0, 1.0, 0.25) == 0.0
        assert ei_score(1.0, 0.0, 0.25) == pytest.approx(4.0)
        assert ei_score(1.0, 1.0, 0.25) == pytest.approx(1.0)

    def _models(self):
        dim = Dimension('X', 'float', 0.0, 1.0)
        good = {'X': ParzenEstimator(dim, np.array([0.1]), 0.05, 0.0)}
        bad = {'X': ParzenEstimator(dim, np.array([0.9]), 0.05, 0.0)}
        return good, bad

    def test_prefers_good_region(self):
        good, bad = self._models()
        best, scores = ei_rank([{'X': 0.9}, {'X': 0.1}, {'X': 0.5}], good, bad, 0.25)
        assert best == 1
        assert scores[1] > scores[2] > scores[0]

    def test_tie_takes_first(self):
        good, bad = self._models()
        best, _ = ei_rank([{'X': 0.5}, {'X': 0.5}], good, bad, 0.25)
        assert best == 0

    def test_candidate_count(self):
        assert candidate_count(4, 10, 5) == 10
        assert candidate_count(17, 10, 5) == 25


class TestSpearmanLock:
    def test_uncorrelated_dimension_locked(self):
        space = HyperparameterSpace([Dimension('A', 'float', 0.0, 1.0), Dimension('B', 'float', 0.0, 1.0)])
        points = [{'A': a, 'B': 0.5} for a in np.linspace(0.0, 1.0, 10)]
        vary = spearman_lock(space, points, [p['A'] for p in points], 0.2)
        assert vary == {'A': True, 'B': False}

    def test_at_least_one_dimension_varies(self):
        space = HyperparameterSpace([Dimension('A', 'float', 0.0, 1.0), Dimension('B', 'float', 0.0, 1.0)])
        points = [{'A': a, 'B': 1.0 - a} for a in np.linspace(0.0, 1.0, 6)]
        vary = spearman_lock(space, points, [1.0] * 6, 0.2)
        assert vary == {'A': True, 'B': False}


class TestSpace:
    def test_invalid_dimensions(self):
        with pytest.raises(ConfigurationError):
            Dimension('X', 'float', 1.0, 1.0)
        with pytest.raises(ConfigurationError):
            Dimension('K', 'categorical')
        with pytest.raises(ConfigurationError):
            HyperparameterSpace([Dimension('X'), Dimension('X')])

    def test_int_dimension(self, rng):
        dim = Dimension('N', 'int', 1, 3)
        assert all(dim.sample(rng) in (1, 2, 3) for _ in range(20))
        assert dim.clip(2.6) == 3
        assert dim.clip(10.0) == 3

    @pytest.mark.parametrize('index', [1, 2, 3, 4])
    def test_points_are_config_overlays(self, default_config, rng, index):
        space = objective_space(index, default_config)
        point = space.sample(rng)
        assert space.contains(point)
        config = apply_overlay(default_config, point)
        assert config.cerebellum != default_config.cerebellum

    def test_unknown_objective(self, default_config):
        with pytest.raises(ConfigurationError):
            objective_space(5, default_config)


class TestObjectiveHelpers:
    def test_score_is_weighted_sum(self):
        score = make_score(3, [1.0, 2.0, 0.5])
        assert score.value == pytest.approx(0.2 + 0.4 + 0.3)
        with pytest.raises(ConfigurationError):
            make_score(3, [1.0, 2.0])

    def test_gaussian_center(self):
        assert gaussian_center([0, 2, 4, 2, 0]) == pytest.approx(2.0)
        assert gaussian_center([0, 0, 0]) is None

    def test_mf_components(self):
        rate, center = mf_components([np.array([0, 1, 3, 1, 0])], [2], window_ms=100.0, fr_desired=20.0)
        assert rate == pytest.approx(10.0)
        assert center == pytest.approx(0.0)

    def test_winner_repetitions(self):
        assert winner_repetitions([1, 1, 2]) == (2.0, 1.5)
        assert winner_repetitions([]) == (0.0, 0.0)

    def test_gc_components(self):
        gc = [np.array([30.0, 0.0, 0.0]), np.zeros(3)]
        ggc = [np.array([10.0]), np.array([5.0])]
        assert gc_components(gc, ggc, 30.0, 10.0, 100.0) == pytest.approx((15.0, 2.5, 50.0, 1.0))

    def test_decrease_score(self):
        assert decrease_score([1.0, 2.0, 3.0]) == pytest.approx(1.0)
        assert decrease_score([3.0, 2.0, 1.0]) == pytest.approx(0.34)
        assert decrease_score([5.0, 4.0, 3.0, 2.0, 1.0]) == pytest.approx(0.01)

    def test_xnor_mean(self):
        assert xnor_mean([(True, True), (False, True)]) == pytest.approx(0.5)
        assert xnor_mean([]) == 0.0

    def test_probe_states(self, default_config, rng):
        states = probe_states(default_config, rng, 5)
        assert len(states) == 5
        for q, v in states:
            assert all(lo <= x <= hi for x, (lo, hi) in zip(q, default_config.joint_ranges))
            assert np.linalg.norm(v) == pytest.approx(1.0)


@pytest.fixture
def clustered_mf_data(small_config):
    """Лепет, сосредоточенный в середине диапазонов суставов."""
    rng = np.random.default_rng(0)
    lower = np.array([r[0] for r in small_config.joint_ranges])
    upper = np.array([r[1] for r in small_config.joint_ranges])
    q = lower + (upper - lower) * rng.uniform(0.45, 0.55, size=(300, len(lower)))
    angles = rng.uniform(0.0, 2.0 * np.pi, 300)
    return q, np.column_stack([np.cos(angles), np.sin(angles)])


class TestObjectiveCerebellum:
    def test_mf_assemblies_adapted_from_babble(self, small_config, clustered_mf_data):
        q, directions = clustered_mf_data
        cb = objectives._build(small_config, 1, seed=0, mf_data=clustered_mf_data)
        expected = adapt_mf_assemblies(CerebellarSpec.from_config(small_config.cerebellum), small_config.joint_ranges,
                                       q, directions, SoaConfig.from_config(small_config.cerebellum.soa), seed=0)
        for got, want in zip(cb.mf_assemblies, expected):
            assert np.allclose(got.centers, want.centers)
        linear = objectives._build(small_config, 1, seed=0)
        assert not np.allclose(cb.mf_assemblies[0].centers, linear.mf_assemblies[0].centers)

    def test_context_babble_reaches_objective(self, small_config, clustered_mf_data, monkeypatch):
        seen = {}

        def evaluate(index, config, dm, seed, mf_data=None):
            seen['mf_data'] = mf_data
            return make_score(1, [0.0, 0.0])

        monkeypatch.setattr(objectives, 'evaluate_objective', evaluate)
        make_objective(1, ObjectiveContext(small_config, mf_data=clustered_mf_data))({})
        assert seen['mf_data'] is clustered_mf_data


class TestObjectiveWrapper:
    def test_fault_becomes_penalty(self, default_config, monkeypatch):
        def fail(*args, **kwargs):
            raise PlantFault("объект вне кадра")

        monkeypatch.setattr(objectives, 'evaluate_objective', fail)
        loss, details = make_objective(1, ObjectiveContext(default_config))({})
        assert loss == default_config.optimizer.penalty_loss
        assert details['fault'] == 'PlantFault'

    def test_invalid_candidate_becomes_penalty(self, default_config, monkeypatch):
        def reject(*args, **kwargs):
            raise ConfigurationError("Начальные веса gc_pc вне границ")

        monkeypatch.setattr(objectives, 'evaluate_objective', reject)
        loss, details = make_objective(3, ObjectiveContext(default_config))({})
        assert loss == default_config.optimizer.penalty_loss
        assert details['fault'] == 'ConfigurationError'

    def test_run_level_errors_raised_before_trials(self, default_config):
        with pytest.raises(ConfigurationError):
            make_objective(4, ObjectiveContext(default_config))
        optimizer = default_config.optimizer.model_copy(update={'n_test': 1})
        with pytest.raises(ConfigurationError):
            make_objective(2, ObjectiveContext(default_config.model_copy(update={'optimizer': optimizer})))

    def test_non_finite_loss(self, default_config, monkeypatch):
        monkeypatch.setattr(objectives, 'evaluate_objective', lambda *a, **k: make_score(1, [np.nan, 0.0]))
        loss, details = make_objective(1, ObjectiveContext(default_config))({})
        assert loss == default_config.optimizer.penalty_loss
        assert details['fault'] == 'non_finite'

    def test_loss_capped_by_penalty(self, default_config, monkeypatch):
        monkeypatch.setattr(objectives, 'evaluate_objective', lambda *a, **k: make_score(1, [1e6, 1e6]))
        loss, _ = make_objective(1, ObjectiveContext(default_config))({})
        assert loss == default_config.optimizer.penalty_loss


class TestOptimize:
    def test_finds_minimum(self, unit_space, optimizer_config):
        calls = []
        result = optimize(quadratic, unit_space, 30, seed=0, config=optimizer_config, on_trial=calls.append)
        assert len(result.history) == 30
        assert len(calls) == 30
        assert result.best_loss < 0.01
        assert unit_space.contains(result.best_point)

    def test_deterministic(self, unit_space, optimizer_config):
        first = optimize(quadratic, unit_space, 12, seed=3, config=optimizer_config)
        second = optimize(quadratic, unit_space, 12, seed=3, config=optimizer_config)
        assert first.history.losses == second.history.losses

    def test_best_so_far_non_increasing(self, unit_space, optimizer_config):
        curve = optimize(quadratic, unit_space, 10, seed=1, config=optimizer_config).history.best_so_far()
        assert all(b <= a for a, b in zip(curve, curve[1:]))

    def test_non_finite_recorded_as_penalty(self, unit_space, optimizer_config):
        result = optimize(lambda p: (float('nan'), {}), unit_space, 3, seed=0, config=optimizer_config)
        assert result.history.losses == [optimizer_config.penalty_loss] * 3
        assert result.history.records[0].to_dict()['fault'] == 'non_finite'

    def test_invalid_budget(self, unit_space, optimizer_config):
        with pytest.raises(ConfigurationError):
            optimize(quadratic, unit_space, 0, seed=0, config=optimizer_config)

    @pytest.mark.asyncio
    async def test_async_matches_sequential(self, unit_space, optimizer_config):
        sequential = optimize(quadratic, unit_space, 10, seed=2, config=optimizer_config)
        parallel = await optimize_async(quadratic, unit_space, 10, seed=2, config=optimizer_config)
        assert parallel.history.losses == sequential.history.losses

    @pytest.mark.asyncio
    async def test_async_batches(self, unit_space, optimizer_config):
        config = optimizer_config.model_copy(update={'batch_size': 3})
        seen = []

        async def on_trial(record):
            seen.append(record.index)

        result = await optimize_async(quadratic, unit_space, 7, seed=0, config=config, max_workers=2,
                                      on_trial=on_trial)
        assert len(result.history) == 7
        assert seen == list(range(7))
