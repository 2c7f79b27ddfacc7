from cerebellar_control.config.settings import (
    ExperimentConfig,
    Settings,
    load_experiment_config,
    settings,
)

__all__ = ['ExperimentConfig', 'Settings', 'load_experiment_config', 'settings']
