from cerebellar_control.snn.network import SpikeRecord, SpikingNetwork, step_network
from cerebellar_control.snn.neurons import NeuronParams, NeuronPopulation, NeuronState, step_neuron
from cerebellar_control.snn.plasticity import (
    PlasticityRule,
    apply_plasticity,
    stdp_antisymmetric,
    stdp_symmetric,
)
from cerebellar_control.snn.synapses import SynapseSet

__all__ = [
    'NeuronParams', 'NeuronPopulation', 'NeuronState', 'PlasticityRule', 'SpikeRecord',
    'SpikingNetwork', 'SynapseSet', 'apply_plasticity', 'stdp_antisymmetric', 'stdp_symmetric',
    'step_network', 'step_neuron',
]
