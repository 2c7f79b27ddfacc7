from cerebellar_control.plant.arm import ArmModel, ArmState, SensorReading, fk, ik, jacobian, step_arm
from cerebellar_control.plant.babbling import BabbleSample, babble
from cerebellar_control.plant.camera import VirtualCamera, render_and_centroid
from cerebellar_control.plant.deformable import DeformableObject, object_step
from cerebellar_control.plant.environment import DeformPlant, ReachPlant, build_plant

__all__ = [
    'ArmModel', 'ArmState', 'BabbleSample', 'DeformPlant', 'DeformableObject', 'ReachPlant',
    'SensorReading', 'VirtualCamera', 'babble', 'build_plant', 'fk', 'ik', 'jacobian',
    'object_step', 'render_and_centroid', 'step_arm',
]
