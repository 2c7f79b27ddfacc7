"""Тесты модели мозжечка: раскладка, построение, декодирование DCN, обучение от IO."""

import numpy as np
import pytest

from cerebellar_control.services.cerebellum_service import (
    POPULATIONS,
    CerebellarSpec,
    DcnReadout,
    assembly_neurons,
    build_cerebellum,
    cb_predict,
    cb_train_step,
    cerebellum_from_weights,
    climbing_fibre_mapping,
    decode_dcn,
    encode_mf,
    io_activity,
    io_drive,
    rate_summary,
    simulate_window,
)
from cerebellar_control.utils.exceptions import ConfigurationError

Q = [-152.5, -40.0]


@pytest.fixture
def spec(small_config):
    return CerebellarSpec.from_config(small_config.cerebellum)


@pytest.fixture
def cb(spec, small_config):
    return build_cerebellum(spec, seed=0, joint_ranges=small_config.joint_ranges)


class TestSpec:
    def test_default_table_is_valid(self, default_config):
        spec = CerebellarSpec.from_config(default_config.cerebellum)
        assert spec.sizes['gc'] == 1500
        assert spec.mf_assembly_size == 10

    def test_directional_sizes_checked(self, small_config):
        block = small_config.cerebellum.model_copy(update={'sizes': {**small_config.cerebellum.sizes, 'pc': 10}})
        with pytest.raises(ConfigurationError):
            CerebellarSpec.from_config(block)

    def test_mf_divisible(self, small_config):
        block = small_config.cerebellum.model_copy(update={'sizes': {**small_config.cerebellum.sizes, 'mf': 42}})
        with pytest.raises(ConfigurationError):
            CerebellarSpec.from_config(block)


class TestLayout:
    def test_assembly_neurons(self, spec):
        assert list(assembly_neurons(spec, 0, 0)) == [0, 1, 2]
        assert list(assembly_neurons(spec, 1, 1)) == [9, 10, 11]

    def test_climbing_fibres_cross_direction(self, spec):
        mapping = climbing_fibre_mapping(spec)
        assert list(mapping[assembly_neurons(spec, 0, 0)]) == list(assembly_neurons(spec, 0, 1))
        assert list(mapping[assembly_neurons(spec, 1, 1)]) == list(assembly_neurons(spec, 1, 0))
        assert sorted(mapping) == list(range(spec.sizes['io']))


class TestBuild:
    def test_all_populations(self, cb, spec):
        assert set(cb.network.populations) == set(POPULATIONS)
        assert len(cb.mf_assemblies) == spec.n_mf_assemblies

    def test_topology_is_seeded(self, spec):
        first = build_cerebellum(spec, seed=4)
        second = build_cerebellum(spec, seed=4)
        for name, syn in first.network.synapses.items():
            assert syn.edge_set() == second.network.synapses[name].edge_set()

    def test_weights_start_at_initial_value(self, cb):
        for syn in cb.network.synapses.values():
            assert np.all(syn.weights == syn.w_init)

    def test_parallel_fibre_edge_count(self, default_config):
        spec = CerebellarSpec.from_config(default_config.cerebellum)
        cb = build_cerebellum(spec, seed=0, populations=['gc', 'pc'])
        n_pairs = spec.sizes['gc'] * spec.sizes['pc']
        p = spec.projections['gc_pc'].value
        sigma = np.sqrt(n_pairs * p * (1.0 - p))
        # Биномиальное число рёбер: 0.8 * 1500 * 12 = 14400
        assert abs(cb.network.synapses['gc_pc'].n_edges - 14400) <= 3 * sigma

    def test_subset_of_populations(self, spec):
        partial = build_cerebellum(spec, populations=['mf', 'gc', 'ggc'])
        assert set(partial.network.synapses) == {'mf_gc', 'mf_ggc', 'gc_ggc', 'ggc_gc'}

    def test_unknown_population(self, spec):
        with pytest.raises(ConfigurationError):
            build_cerebellum(spec, populations=['mf', 'zz'])

    def test_mf_encoding_size(self, cb, spec):
        assert encode_mf(Q, [1.0, 0.0], cb.mf_assemblies).shape == (spec.sizes['mf'],)
        with pytest.raises(ConfigurationError):
            encode_mf(Q, [1.0], cb.mf_assemblies)


class TestReadout:
    def test_io_dead_band(self):
        activity = io_activity([0.3, -0.01], dead_band=0.05, io_max=12.0)
        assert activity.tolist() == [[12.0, 0.0], [0.0, 0.0]]

    def test_io_drive_layout(self, spec):
        drive = io_drive(spec, np.array([[1.0, 0.0], [0.0, 2.0]]))
        assert drive[assembly_neurons(spec, 0, 0)].tolist() == [1.0, 1.0, 1.0]
        assert drive[assembly_neurons(spec, 1, 1)].tolist() == [2.0, 2.0, 2.0]
        assert drive.sum() == pytest.approx(9.0)

    def test_cold_start(self, spec):
        readout = DcnReadout.from_counts(spec, np.ones(spec.sizes['dcn']), theta_max=0.0)
        v, cold = decode_dcn(readout, 50.0)
        assert cold
        assert np.array_equal(v, [0.0, 0.0])

    def test_push_pull(self, spec):
        counts = np.zeros(spec.sizes['dcn'])
        counts[assembly_neurons(spec, 0, 0)] = 2
        counts[assembly_neurons(spec, 1, 1)] = 1
        readout = DcnReadout.from_counts(spec, counts, theta_max=40.0)
        v, cold = decode_dcn(readout, 50.0)
        assert not cold
        assert v[0] == pytest.approx(1.0)
        assert v[1] == pytest.approx(-0.5)

    def test_window_must_be_positive(self, spec):
        readout = DcnReadout.from_counts(spec, np.zeros(spec.sizes['dcn']), theta_max=1.0)
        with pytest.raises(ConfigurationError):
            decode_dcn(readout, 0.0)


class TestLearning:
    def test_prediction_does_not_learn(self, cb):
        before = {name: syn.weights.copy() for name, syn in cb.network.synapses.items()}
        cb_predict(cb, Q, [1.0, 0.0])
        for name, syn in cb.network.synapses.items():
            assert np.array_equal(syn.weights, before[name])

    def test_train_step_drives_io_and_learns(self, cb, spec):
        before = cb.network.synapses['io_dcn'].weights.copy()
        # Предсказание ограничено v_max, поэтому ошибка заведомо вне мёртвой зоны
        result = cb_train_step(cb, Q, [1.0, 0.0], [5.0, -5.0])
        assert result.io.tolist() == [[spec.io_drive_max, 0.0], [0.0, spec.io_drive_max]]
        assert result.e.shape == (2,)
        assert result.teaching.counts('io')[assembly_neurons(spec, 0, 0)].sum() > 0
        assert not np.array_equal(cb.network.synapses['io_dcn'].weights, before)
        assert cb.theta_dcn_max >= 0.0

    def test_rate_summary(self, cb, spec):
        record = simulate_window(cb, Q, [1.0, 0.0], 50.0)
        summary = rate_summary(spec, record)
        assert list(summary.columns) == ['population', 'assembly', 'mean_hz', 'max_hz']
        assert set(summary['population']) == set(POPULATIONS)
        assert len(summary[summary['population'] == 'dcn']) == 4
        assert (summary['max_hz'] >= summary['mean_hz']).all()

    def test_weights_section_restores(self, cb, spec, small_config):
        cb_train_step(cb, Q, [1.0, 0.0], [0.0, 1.0])
        restored = cerebellum_from_weights(cb.to_dict(), spec, 0, small_config.joint_ranges)
        assert restored.theta_dcn_max == cb.theta_dcn_max
        for name, syn in cb.network.synapses.items():
            assert np.allclose(restored.network.synapses[name].weights, syn.weights)

    def test_parallel_fibre_weights_stay_bounded(self, cb):
        syn = cb.network.synapses['gc_pc']
        assert syn.w_max == pytest.approx(24.0)
        syn.weights[:] = syn.w_max
        for _ in range(3):
            cb_train_step(cb, Q, [1.0, 0.0], [5.0, -5.0])
            cb_train_step(cb, Q, [0.0, 1.0], [-5.0, 5.0])
        assert syn.weights.max() <= 24.0
        assert syn.weights.min() >= 0.0
