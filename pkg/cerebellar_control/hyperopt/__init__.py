from cerebellar_control.hyperopt.objectives import (
    ObjectiveContext,
    ObjectiveScore,
    evaluate_objective,
    make_objective,
)
from cerebellar_control.hyperopt.optimizer import OptimizationResult, TrialHistory, optimize, optimize_async
from cerebellar_control.hyperopt.space import Dimension, HyperparameterSpace, objective_space
from cerebellar_control.hyperopt.tpe import ei_rank, parzen_density, spearman_lock, tpe_split

__all__ = [
    'Dimension', 'HyperparameterSpace', 'ObjectiveContext', 'ObjectiveScore', 'OptimizationResult',
    'TrialHistory', 'ei_rank', 'evaluate_objective', 'make_objective', 'objective_space', 'optimize',
    'optimize_async', 'parzen_density', 'spearman_lock', 'tpe_split',
]
