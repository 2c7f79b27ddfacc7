"""Тесты контура управления: задержка, коррекция предсказания, цели и испытания."""

import numpy as np
import pytest

from cerebellar_control.plant.arm import joint_velocity_for
from cerebellar_control.plant.environment import build_plant
from cerebellar_control.services.cerebellum_service import CerebellarSpec, build_cerebellum
from cerebellar_control.services import controller_service
from cerebellar_control.services.controller_service import (
    ControlFrame,
    DelayLine,
    TrialMode,
    TrialOutcome,
    TrialRecord,
    correct_prediction,
    desired_velocity,
    run_trial,
    spread_targets,
    star_targets,
)
from cerebellar_control.utils.exceptions import ConfigurationError, PlantFault
from cerebellar_control.utils.utils import angular_error


@pytest.fixture
def plant(default_config):
    plant = build_plant(default_config, noise=False)
    plant.reset()
    return plant


@pytest.fixture
def ideal_dm(monkeypatch, plant):
    """Точная обратная кинематика вместо обученной сети."""
    def infer(dm, q, v, window_ms=None):
        return joint_velocity_for(q, v, plant.arm)

    monkeypatch.setattr(controller_service, 'dm_infer', infer)
    return object()


class TestDesiredVelocity:
    def test_unit_direction(self):
        v = desired_velocity([0.0, 0.0], [0.3, 0.4], 0.003)
        assert np.allclose(v, [0.6, 0.8])

    def test_arrival(self):
        assert desired_velocity([0.0, 0.0], [0.001, 0.0], 0.003) is None

    def test_nan_position(self):
        with pytest.raises(PlantFault):
            desired_velocity([np.nan, 0.0], [0.1, 0.0], 0.003)


def test_correct_prediction_mirrors_desired_velocity():
    v_check, v_hat = correct_prediction([1.0, 0.0], [0.8, 0.1], [0.05, -0.02])
    assert np.allclose(v_check, [0.85, 0.08])
    assert np.allclose(v_hat, [1.15, -0.08])


class TestDelayLine:
    def test_fifo_with_fill(self):
        line = DelayLine(2, fill=0)
        assert [line.push(x) for x in (1, 2, 3, 4)] == [0, 0, 1, 2]
        assert len(line) == 2

    def test_zero_delay_passes_through(self):
        assert DelayLine(0).push('a') == 'a'

    def test_from_times(self):
        assert DelayLine.from_times(100.0, 50.0).steps == 2
        with pytest.raises(ConfigurationError):
            DelayLine.from_times(120.0, 50.0)


class TestTargets:
    def test_star(self, plant):
        center = plant.position()
        targets = star_targets(center, 0.07, plant.arm)
        assert len(targets) == 8
        assert np.allclose(targets[0], center + [0.07, 0.0])
        assert np.allclose([np.linalg.norm(t - center) for t in targets], 0.07)

    def test_star_outside_workspace(self, plant):
        with pytest.raises(ConfigurationError):
            star_targets(plant.position(), 2.0, plant.arm)

    def test_spread_separation(self, rng):
        candidates = rng.uniform(0.0, 1.0, size=(200, 2))
        targets = spread_targets(candidates, 5, 0.2, np.random.default_rng(1))
        assert len(targets) == 5
        for i in range(5):
            for j in range(i + 1, 5):
                assert np.linalg.norm(targets[i] - targets[j]) >= 0.2

    def test_spread_deterministic(self, rng):
        candidates = rng.uniform(0.0, 1.0, size=(50, 2))
        first = spread_targets(candidates, 3, 0.1, np.random.default_rng(5))
        second = spread_targets(candidates, 3, 0.1, np.random.default_rng(5))
        assert np.allclose(first, second)

    def test_spread_impossible(self):
        candidates = np.zeros((10, 2))
        with pytest.raises(ConfigurationError):
            spread_targets(candidates, 2, 0.1, np.random.default_rng(0), retries=5)


class TestTrialRecord:
    def _frame(self, x):
        zero = np.zeros(2)
        return ControlFrame(t=0.0, q=zero, x=np.array(x), v=zero, v_star=zero, u=zero)

    def test_metrics(self):
        record = TrialRecord(mode=TrialMode.DM_ONLY, start=np.zeros(2), target=np.array([1.0, 0.0]),
                             frames=[self._frame([0.5, 0.2]), self._frame([0.9, -0.1])],
                             outcome=TrialOutcome.REACHED, final_position=np.array([1.0, 0.0]), period_s=0.05)
        assert record.max_deviation == pytest.approx(0.2)
        assert record.execution_time == pytest.approx(0.1)
        assert record.final_error == pytest.approx(0.0)
        assert np.isnan(record.mean_e_pred)
        assert record.reached
        assert record.summary()['frames'] == 2

    def test_frame_table(self):
        record = TrialRecord(mode=TrialMode.DM_ONLY, start=np.zeros(2), target=np.ones(2),
                             frames=[self._frame([0.1, 0.1])])
        df = record.to_frame()
        assert list(df.columns) == controller_service.FRAME_COLUMNS
        assert df['v_pred1'].isna().all()


class TestRunTrial:
    def test_dm_only_reaches_target(self, default_config, plant, ideal_dm):
        target = plant.position() + [0.03, 0.0]
        record = run_trial(ideal_dm, None, plant, target, TrialMode.DM_ONLY, default_config.controller)
        assert record.outcome == TrialOutcome.REACHED
        assert record.final_error < default_config.controller.arrival_radius
        # Команды доходят до манипулятора через два периода
        assert np.array_equal(record.frames[0].u, [0.0, 0.0])
        assert np.array_equal(record.frames[1].u, [0.0, 0.0])
        assert np.linalg.norm(record.frames[2].u) > 0
        assert record.max_deviation < 0.005

    def test_timeout(self, default_config, plant, ideal_dm):
        config = default_config.controller.model_copy(update={'timeout_s': 0.2})
        record = run_trial(ideal_dm, None, plant, plant.position() + [0.05, 0.0], TrialMode.DM_ONLY, config)
        assert record.outcome == TrialOutcome.TIMEOUT
        assert len(record.frames) == 4

    def test_cerebellum_required(self, default_config, plant, ideal_dm):
        with pytest.raises(ConfigurationError):
            run_trial(ideal_dm, None, plant, plant.position(), TrialMode.WITH_CB, default_config.controller)

    def test_with_cb_records_predictions(self, default_config, plant, ideal_dm, monkeypatch):
        monkeypatch.setattr(controller_service, 'cb_predict', lambda cb, q, v_star: np.asarray(v_star))
        record = run_trial(ideal_dm, object(), plant, plant.position() + [0.0, 0.03], TrialMode.WITH_CB,
                           default_config.controller)
        assert record.outcome == TrialOutcome.REACHED
        assert record.frames[0].v_pred is not None
        # Ошибка появляется после созревания задержанного предсказания
        assert record.frames[0].e is None
        assert any(f.e is not None for f in record.frames)
        assert record.mean_e_pred < 0.2

    def test_with_cb_repeatable_for_same_seed(self, small_config, monkeypatch):
        plant = build_plant(small_config, seed=0)
        monkeypatch.setattr(controller_service, 'dm_infer',
                            lambda dm, q, v, window_ms=None: joint_velocity_for(q, v, plant.arm))
        spec = CerebellarSpec.from_config(small_config.cerebellum)
        cb = build_cerebellum(spec, seed=0, joint_ranges=small_config.joint_ranges)
        plant.reset()
        target = plant.position() + [0.0, 0.02]
        records = []
        for _ in range(2):
            plant.reset(seed=[0, 1])
            records.append(run_trial(object(), cb, plant, target, TrialMode.WITH_CB, small_config.controller))
        first, second = records
        assert first.outcome == second.outcome
        assert first.to_frame().equals(second.to_frame())


class TestAngularError:
    def test_orthogonal(self):
        angle, degenerate = angular_error([1.0, 0.0], [0.0, 2.0])
        assert angle == pytest.approx(np.pi / 2)
        assert not degenerate

    def test_opposite(self):
        assert angular_error([1.0, 1.0], [-1.0, -1.0])[0] == pytest.approx(np.pi)

    def test_zero_vector(self):
        assert angular_error([0.0, 0.0], [1.0, 0.0]) == (0.0, True)
