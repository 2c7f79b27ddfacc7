"""Тесты манипулятора, деформируемого объекта, камеры и моторного лепета."""

import numpy as np
import pytest

from cerebellar_control.plant.arm import ArmModel, ArmState, fk, ik, in_workspace, jacobian, step_arm
from cerebellar_control.plant.babbling import babble, frame_to_samples, samples_to_frame
from cerebellar_control.plant.camera import VirtualCamera, centroid_pixels, render_silhouette
from cerebellar_control.plant.deformable import DeformableObject, object_step
from cerebellar_control.plant.environment import DeformPlant, ReachPlant, build_plant
from cerebellar_control.utils.exceptions import ConfigurationError, PlantFault, ValidationError


@pytest.fixture
def arm(default_config):
    return ArmModel.from_config(default_config, noise=False)


class TestArm:
    def test_fk_straight(self):
        arm = ArmModel(l1=0.8, l2=0.8, joint_ranges=((-180.0, 180.0), (-180.0, 180.0)))
        x, clamped = fk([0.0, 0.0], arm)
        assert np.allclose(x, [1.6, 0.0])
        assert not clamped

    def test_fk_clamps(self, arm):
        _, clamped = fk([0.0, 0.0], arm)
        assert clamped

    def test_fk_nan_is_fault(self, arm):
        with pytest.raises(PlantFault):
            fk([np.nan, 0.0], arm)

    def test_ik_inverts_fk(self, arm):
        for q in ([-150.0, -30.0], [-140.0, -10.0], [-165.0, -55.0]):
            x, _ = fk(q, arm)
            assert np.allclose(ik(x, arm), q, atol=1e-6)

    def test_unreachable(self, arm):
        assert ik([5.0, 5.0], arm) is None
        assert not in_workspace([5.0, 5.0], arm)

    def test_jacobian_matches_finite_difference(self, arm):
        q = np.array([-150.0, -30.0])
        h = 1e-4
        numeric = np.column_stack([
            (fk(q + h * e, arm)[0] - fk(q - h * e, arm)[0]) / (2.0 * np.radians(h)) for e in np.eye(2)])
        assert np.allclose(jacobian(q, arm), numeric, atol=1e-6)

    def test_step_limits_speed(self, arm, rng):
        state = ArmState.at([-150.0, -30.0], arm)
        new_state, _ = step_arm(state, [1000.0, 0.0], 0.1, arm, rng)
        assert new_state.q[0] == pytest.approx(-150.0 + arm.max_joint_speed * 0.1)

    def test_step_rejects_nan_command(self, arm, rng):
        with pytest.raises(PlantFault):
            step_arm(ArmState.at([-150.0, -30.0], arm), [np.nan, 0.0], 0.05, arm, rng)

    def test_invalid_model(self):
        with pytest.raises(ConfigurationError):
            ArmModel(l1=0.0, l2=0.8, joint_ranges=((0.0, 1.0), (0.0, 1.0)))


class TestReachPlant:
    def test_reset_to_home(self, default_config):
        plant = build_plant(default_config, noise=False)
        assert isinstance(plant, ReachPlant)
        reading = plant.reset()
        assert np.allclose(reading.q, default_config.plant.reach_home)
        assert np.allclose(reading.v, 0.0)

    def test_step_moves_end_effector(self, default_config):
        plant = build_plant(default_config, noise=False)
        start = plant.reset().x
        reading = plant.step([10.0, 0.0], 0.05)
        assert np.linalg.norm(reading.x - start) > 0
        assert np.allclose(reading.v, (reading.x - start) / 0.05)

    def test_reset_seed_repeats_noise(self, default_config):
        plant = build_plant(default_config, seed=0)
        first = [plant.reset(seed=[0, 3]).q] + [plant.step([10.0, 0.0], 0.05).q for _ in range(3)]
        second = [plant.reset(seed=[0, 3]).q] + [plant.step([10.0, 0.0], 0.05).q for _ in range(3)]
        assert all(np.array_equal(a, b) for a, b in zip(first, second))

    def test_reset_without_seed_continues_stream(self, default_config):
        plant = build_plant(default_config, seed=0)
        assert not np.array_equal(plant.reset().q, plant.reset().q)


class TestDeformable:
    def _object(self, **kwargs):
        return DeformableObject.build([0.0, 0.0], grid=3, spacing=0.05, **kwargs)

    def test_rest_has_no_force(self):
        obj = self._object()
        assert np.allclose(obj.forces(), 0.0)
        assert obj.energy() == pytest.approx(0.0)

    def test_hold_keeps_rest(self):
        obj = self._object()
        object_step(obj, [0.0, 0.0], 0.5)
        assert np.allclose(obj.positions, obj.rest_positions, atol=1e-9)

    def test_displacement_moves_centroid(self):
        obj = self._object()
        before = obj.centroid()
        object_step(obj, [0.02, 0.0], 1.0)
        assert obj.positions[obj.grip_node] == pytest.approx(obj.grip_rest + [0.02, 0.0])
        assert obj.centroid()[0] > before[0]

    def _pull_and_release(self, obj, pull=(0.02, 0.01)):
        """Статическое удержание смещения, затем отпускание; возвращает пиковую упругую энергию."""
        peak = 0.0
        for _ in range(20):
            object_step(obj, pull, 0.05)
            peak = max(peak, obj.elastic_energy())
        for _ in range(80):
            object_step(obj, None, 0.05)
        return peak

    def test_release_returns_toward_rest(self):
        obj = DeformableObject.build([0.0, 0.0])
        peak = self._pull_and_release(obj)
        assert peak > 0.0
        assert obj.elastic_energy() < 0.01 * peak

    def test_anchors_never_move(self):
        obj = DeformableObject.build([0.0, 0.0])
        anchors = obj.anchors.copy()
        self._pull_and_release(obj)
        assert np.array_equal(obj.anchors, anchors)
        assert np.array_equal(obj.anchors, obj.rest_positions[obj.anchored_nodes])
        assert np.allclose(obj.positions[obj.anchored_nodes], anchors, atol=1e-3)

    def test_unstable_step_rejected(self):
        with pytest.raises(ConfigurationError):
            self._object(stiffness=1e6)


class TestCamera:
    def test_projection_inverse(self):
        camera = VirtualCamera(origin=(0.3, -0.2))
        x = np.array([0.35, -0.18])
        assert np.allclose(camera.pixel_to_world(camera.world_to_pixel(x)), x)

    def test_square_centroid(self):
        camera = VirtualCamera(origin=(0.0, 0.0))
        square = np.array([[[-0.05, -0.05], [0.05, -0.05], [0.05, 0.05], [-0.05, 0.05]]]) + [0.02, 0.01]
        mask = render_silhouette(square, camera)
        center = camera.pixel_to_world(centroid_pixels(mask))
        assert np.allclose(center, [0.02, 0.01], atol=3e-3)

    def test_out_of_frame(self):
        camera = VirtualCamera(origin=(0.0, 0.0))
        with pytest.raises(PlantFault):
            render_silhouette(np.array([[[5.0, 5.0], [5.1, 5.0], [5.1, 5.1]]]), camera)


class TestBabbling:
    def test_deterministic(self, small_config):
        first = babble(build_plant(small_config, seed=1), 2, seed=7)
        second = babble(build_plant(small_config, seed=1), 2, seed=7)
        assert len(first) == len(second) > 0
        assert samples_to_frame(first).equals(samples_to_frame(second))
        assert {s.target_index for s in first} == {0, 1}

    def test_samples_stay_in_joint_ranges(self, small_config):
        plant = build_plant(small_config, seed=0, noise=False)
        for sample in babble(plant, 3, seed=2):
            assert plant.arm.contains(sample.q)

    def test_frame_requires_columns(self, small_config):
        frame = samples_to_frame(babble(build_plant(small_config), 1, seed=0)).drop(columns=['x1'])
        with pytest.raises(ValidationError):
            frame_to_samples(frame)

    def test_invalid_count(self, small_config):
        with pytest.raises(ConfigurationError):
            babble(build_plant(small_config), 0)


@pytest.mark.slow
def test_deform_plant_tracks_centroid(small_deform_config):
    plant = build_plant(small_deform_config, noise=False)
    assert isinstance(plant, DeformPlant)
    reading = plant.reset()
    assert np.allclose(reading.x, plant.position(), atol=5e-3)
    for _ in range(10):
        reading = plant.step([10.0, 0.0], 0.05)
    assert np.allclose(reading.x, plant.position(), atol=5e-3)
