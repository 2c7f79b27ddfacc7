"""Тесты популяционного кодирования и самоорганизации кривых настройки."""

import numpy as np
import pytest

from cerebellar_control.coding.population import Assembly, decode_central, encode
from cerebellar_control.coding.soa import SoaConfig, learning_rate, neighborhood_radius, soa_fit
from cerebellar_control.utils.exceptions import ConfigurationError


class TestAssembly:
    def test_linear_layout(self):
        assembly = Assembly.linear('q1', 0.0, 10.0, 5, peak=20.0)
        assert np.allclose(assembly.centers, [0.0, 2.5, 5.0, 7.5, 10.0])
        assert np.allclose(assembly.sigmas, 2.0)
        assert assembly.size == 5

    def test_encode_peaks_at_center(self):
        assembly = Assembly.linear('q1', 0.0, 10.0, 5, peak=20.0)
        currents = encode(5.0, assembly)
        assert int(np.argmax(currents)) == 2
        assert currents[2] == pytest.approx(20.0)

    def test_encode_rejects_nan(self):
        with pytest.raises(ConfigurationError):
            encode(float('nan'), Assembly.linear('q1', 0.0, 1.0, 3))

    def test_nearest_tie_takes_lower(self):
        assembly = Assembly.linear('v', -1.0, 1.0, 3)
        assert assembly.nearest(-0.5) == 0
        assert assembly.nearest(0.9) == 2

    def test_invalid_assembly(self):
        with pytest.raises(ConfigurationError):
            Assembly.linear('q', 1.0, 1.0, 4)
        with pytest.raises(ConfigurationError):
            Assembly(variable='q', lo=0.0, hi=1.0, centers=np.array([0.5, 0.2]), sigmas=np.array([0.1, 0.1]))

    def test_dict_preserves_range(self):
        assembly = Assembly.linear('q2', -60.0, 0.0, 4, peak=3.0)
        restored = Assembly.from_dict(assembly.to_dict())
        assert (restored.lo, restored.hi, restored.peak) == (-60.0, 0.0, 3.0)
        assert np.allclose(restored.centers, assembly.centers)


class TestDecode:
    def test_single_active_neuron(self):
        assert decode_central(np.array([0.0, 5.0, 0.0]), np.array([1.0, 2.0, 3.0])) == pytest.approx(2.0)

    def test_weighted_mean_within_hull(self):
        value = decode_central(np.array([1.0, 3.0]), np.array([0.0, 4.0]))
        assert value == pytest.approx(3.0)

    def test_silent_returns_none(self):
        assert decode_central(np.zeros(3), np.array([0.0, 1.0, 2.0])) is None


class TestSoa:
    def test_schedules_decay(self):
        config = SoaConfig(K=100, rho0=0.5)
        assert learning_rate(0, config) == pytest.approx(0.5)
        assert learning_rate(100, config) == pytest.approx(0.5 * np.exp(-1.0))
        assert neighborhood_radius(0, config, 8) == pytest.approx(2.0)

    def test_invalid_config(self):
        with pytest.raises(ConfigurationError):
            SoaConfig(K=0)
        with pytest.raises(ConfigurationError):
            SoaConfig(rho0=1.5)

    def test_centers_move_to_data(self):
        assembly = Assembly.linear('q', 0.0, 10.0, 6)
        rng = np.random.default_rng(0)
        samples = rng.normal(7.0, 0.5, size=500)
        fitted = soa_fit(samples, assembly, SoaConfig(K=2000, rho0=0.2), seed=1)
        assert np.all(np.diff(fitted.centers) >= 0)
        assert fitted.centers[0] >= 0.0 and fitted.centers[-1] <= 10.0
        assert np.median(fitted.centers) == pytest.approx(7.0, abs=1.0)
        assert np.all(fitted.sigmas > 0)

    def test_deterministic_for_seed(self):
        assembly = Assembly.linear('q', 0.0, 1.0, 4)
        samples = np.linspace(0.0, 1.0, 50)
        first = soa_fit(samples, assembly, SoaConfig(K=300), seed=3)
        second = soa_fit(samples, assembly, SoaConfig(K=300), seed=3)
        assert np.array_equal(first.centers, second.centers)

    def test_empty_samples(self):
        with pytest.raises(ConfigurationError):
            soa_fit([], Assembly.linear('q', 0.0, 1.0, 4), SoaConfig(K=10))
