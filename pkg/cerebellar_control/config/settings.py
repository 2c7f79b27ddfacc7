"""Настройки приложения и конфигурация эксперимента."""

import hashlib
import json
import logging
import os
from typing import Any, Dict, List, Literal, Mapping, Optional, Sequence, Tuple

from dotenv import dotenv_values, load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError as PydanticValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from cerebellar_control.utils.exceptions import ConfigurationError

logger = logging.getLogger(__name__)

BASE_DIR = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

# Загружаем .env файл проекта, переменные окружения имеют приоритет
load_dotenv(dotenv_path=os.path.join(BASE_DIR, '.env'), override=False)

# Разделитель вложенных ключей в плоском файле конфигурации
KEY_SEPARATOR = '__'


class Settings(BaseSettings):
    """Настройки приложения."""

    BASE_DIR: str = BASE_DIR

    # Настройки логирования
    LOG_LEVEL: str = Field(default='INFO')
    LOG_FILE: str = Field(default='logs/cerebellar_control.log')

    # Каталог результатов и манифест
    OUT_DIR: str = Field(default='runs')
    DATABASE_NAME: str = Field(default='manifest.db')

    # Количество потоков для параллельной оценки целевых функций
    MAX_WORKERS: int = Field(default=1)

    model_config = SettingsConfigDict(
        env_file='.env',
        env_file_encoding='utf-8',
        case_sensitive=False,
        extra='ignore',
    )

    @field_validator('MAX_WORKERS')
    @classmethod
    def validate_workers(cls, v: int) -> int:
        """Валидация числа потоков."""
        if v < 1:
            raise ValueError(f"Число потоков должно быть положительным, получено: {v}")
        return v

    def database_url(self, out_dir: Optional[str] = None) -> str:
        """Получить URL базы данных манифеста для каталога результатов."""
        directory = os.path.abspath(out_dir or self.OUT_DIR)
        return f"sqlite+aiosqlite:///{os.path.join(directory, self.DATABASE_NAME)}"


# Создание экземпляра настроек
settings = Settings()


class _Block(BaseModel):
    """Базовый блок конфигурации: неизвестные ключи запрещены."""

    model_config = ConfigDict(extra='forbid')


class NeuronModel(_Block):
    """Параметры нейрона Ижикевича."""

    a: float
    b: float
    c: float
    d: float


class ProjectionModel(_Block):
    """Описание проекции между популяциями."""

    pre: str
    post: str
    topology: Literal['Rnd', 'Prb', 'A2A', 'O2O']
    value: Optional[float] = None
    w_init: float
    w_max: Optional[float] = None
    plastic: bool = False


class StdpModel(_Block):
    """Константы правила STDP."""

    kind: Literal['antisymmetric', 'symmetric']
    s_a: float = 0.0
    s_b: float = 0.0
    tau_a: float = 20.0
    tau_b: float = 20.0
    s: float = 0.0
    tau_1: float = 20.0
    tau_2: float = 20.0
    gated: bool = False
    window_ms: float = 50.0


class SoaModel(_Block):
    """Параметры самоорганизации кривых настройки."""

    k: int = 5000
    rho0: float = 0.1
    theta0: Optional[float] = None


class RateTargets(_Block):
    """Целевые частоты популяций, Гц."""

    mf: float = 62.0
    gc: float = 86.0
    ggc: float = 40.0
    pc_ss: float = 70.0
    pc_cs: float = 160.0
    dcn: float = 40.0
    io: float = 3.0


def _table_neurons() -> Dict[str, NeuronModel]:
    return {
        'mf': NeuronModel(a=0.2, b=0.17, c=-59.0, d=14.0),
        'gc': NeuronModel(a=0.22, b=0.25, c=-55.0, d=7.0),
        'ggc': NeuronModel(a=0.16, b=1.15, c=-66.0, d=16.0),
        'pc': NeuronModel(a=1.74, b=1.24, c=-59.0, d=6.0),
        'bc': NeuronModel(a=0.95, b=0.4, c=-68.0, d=16.0),
        'io': NeuronModel(a=0.02, b=0.25, c=-65.0, d=6.0),
        'dcn': NeuronModel(a=0.45, b=0.08, c=-56.0, d=17.0),
    }


def _table_sizes() -> Dict[str, int]:
    return {'mf': 40, 'gc': 1500, 'ggc': 7, 'pc': 12, 'bc': 70, 'io': 12, 'dcn': 12}


def _table_projections() -> Dict[str, ProjectionModel]:
    rows = [
        ('mf_gc', 'mf', 'gc', 'Rnd', 4, 3.6, None, False),
        ('mf_ggc', 'mf', 'ggc', 'Rnd', 1, 0.6, None, False),
        ('mf_dcn', 'mf', 'dcn', 'A2A', None, 9.0, None, False),
        ('gc_ggc', 'gc', 'ggc', 'Prb', 0.01, 0.3, None, False),
        ('ggc_gc', 'ggc', 'gc', 'Prb', 0.5, -9.8, -15.0, True),
        ('gc_pc', 'gc', 'pc', 'Prb', 0.8, 0.01, 24.0, True),
        ('io_pc', 'io', 'pc', 'O2O', None, 43.0, None, False),
        ('io_dcn', 'io', 'dcn', 'A2A', None, 0.47, None, True),
        ('pc_dcn', 'pc', 'dcn', 'O2O', None, -13.0, None, False),
        ('pc_bc', 'pc', 'bc', 'Prb', 0.4, 2.4, None, False),
        ('gc_bc', 'gc', 'bc', 'Prb', 0.3, 3.2, None, False),
        ('bc_pc', 'bc', 'pc', 'Prb', 0.5, -45.4, None, False),
    ]
    return {
        name: ProjectionModel(pre=pre, post=post, topology=topology, value=value,
                              w_init=w_init, w_max=w_max, plastic=plastic)
        for name, pre, post, topology, value, w_init, w_max, plastic in rows
    }


class CerebellumConfig(_Block):
    """Блок мозжечковой модели."""

    neurons: Dict[str, NeuronModel] = Field(default_factory=_table_neurons)
    sizes: Dict[str, int] = Field(default_factory=_table_sizes)
    projections: Dict[str, ProjectionModel] = Field(default_factory=_table_projections)
    n_js: int = 2
    n_ts: int = 2
    neurons_per_direction: int = 3
    pf_rule: StdpModel = StdpModel(kind='antisymmetric', s_a=0.1, s_b=0.2, tau_a=20.0, tau_b=20.0, gated=True)
    io_dcn_rule: StdpModel = StdpModel(kind='antisymmetric', s_a=0.02, s_b=0.05, tau_a=20.0, tau_b=20.0, gated=True)
    ggc_gc_rule: StdpModel = StdpModel(kind='antisymmetric', s_a=0.05, s_b=0.05, tau_a=20.0, tau_b=20.0)
    mf_drive_amplitude: float = 20.0
    io_drive_max: float = 12.0
    dead_band: float = 0.05
    v_max: List[float] = Field(default_factory=lambda: [1.0, 1.0])
    window_ms: float = 50.0
    syn_tau_ms: float = 0.0
    fr_desired: RateTargets = RateTargets()
    soa: SoaModel = SoaModel()
    teaching_repetitions: int = 6


class DmConfig(_Block):
    """Блок сети дифференциального отображения."""

    n_l: int = 20
    neuron: NeuronModel = NeuronModel(a=0.02, b=0.2, c=-65.0, d=8.0)
    input_amplitude: float = 20.0
    teacher_amplitude: float = 25.0
    window_ms: float = 50.0
    w_init_exc: float = 0.5
    w_max_exc: float = 6.0
    w_init_inh: float = -0.5
    w_max_inh: float = -6.0
    lateral_min: float = 0.5
    lateral_max: float = 3.0
    stdp: StdpModel = StdpModel(kind='symmetric', s=0.05, tau_1=20.0, tau_2=20.0)
    normalize: bool = True
    epochs: int = 1
    babble_count: Optional[int] = None
    babble_speed: float = 10.0
    holdout_every: int = 10


class ObjectModel(_Block):
    """Параметры деформируемого объекта."""

    grid: int = 5
    spacing: float = 0.04
    node_mass: float = 0.02
    stiffness: float = 200.0
    anchor_stiffness: float = 20.0
    damping: float = 20.0
    substep_ms: float = 1.0


class CameraModel(_Block):
    """Параметры виртуальной камеры."""

    focal_px: float = 600.0
    width: int = 640
    height: int = 480
    depth: float = 1.2
    principal: Optional[Tuple[float, float]] = None
    origin: Optional[Tuple[float, float]] = None


class PlantConfig(_Block):
    """Блок объекта управления."""

    l1: float = 0.8
    l2: float = 0.8
    reach_joint_ranges: List[Tuple[float, float]] = Field(
        default_factory=lambda: [(-170.0, -135.0), (-60.0, 0.0)])
    deform_joint_ranges: List[Tuple[float, float]] = Field(
        default_factory=lambda: [(-45.0, -20.0), (-210.0, -180.0)])
    reach_joint_offsets: Tuple[float, float] = (0.0, 0.0)
    deform_joint_offsets: Tuple[float, float] = (0.0, 270.0)
    reach_home: Tuple[float, float] = (-152.5, -40.0)
    deform_home: Tuple[float, float] = (-32.5, -195.0)
    max_joint_speed: float = 30.0
    position_noise: float = 0.001
    angle_noise: float = 0.1
    velocity_noise: float = 0.002
    object: ObjectModel = ObjectModel()
    camera: CameraModel = CameraModel()


class OptimizerConfig(_Block):
    """Блок байесовского оптимизатора."""

    gamma: float = 0.25
    startup_trials: int = 20
    budgets: Dict[int, int] = Field(default_factory=lambda: {1: 100, 2: 150, 3: 150, 4: 100})
    phi: float = 100.0
    n_test: int = 20
    lock_threshold: float = 0.2
    penalty_loss: float = 1000.0
    bandwidth_floor: float = 0.01
    candidates_min: int = 10
    candidates_factor: int = 5
    prior_weight: float = 1.0
    probe_window_ms: float = 200.0
    batch_size: int = 1
    f4_repetitions: int = 4


class ControllerConfig(_Block):
    """Блок контура управления."""

    period_ms: float = 50.0
    delay_ms: float = 100.0
    arrival_radius: float = 0.003
    timeout_s: float = 30.0
    cruise_speed: float = 0.05
    star_radius: float = 0.07
    repetitions: int = 10
    deform_targets: int = 10
    deform_min_separation: float = 0.05
    target_retries: int = 1000


class ExperimentConfig(_Block):
    """Полная конфигурация эксперимента."""

    task: Literal['reach_star', 'deform'] = 'reach_star'
    seed: int = Field(default=0, ge=0)
    plant: PlantConfig = PlantConfig()
    dm: DmConfig = DmConfig()
    cerebellum: CerebellumConfig = CerebellumConfig()
    optimizer: OptimizerConfig = OptimizerConfig()
    controller: ControllerConfig = ControllerConfig()

    @property
    def babble_count(self) -> int:
        """Число целей моторного лепета для текущей задачи."""
        if self.dm.babble_count is not None:
            return self.dm.babble_count
        return 100 if self.task == 'reach_star' else 300

    @property
    def joint_ranges(self) -> List[Tuple[float, float]]:
        """Диапазоны суставов для текущей задачи."""
        if self.task == 'reach_star':
            return list(self.plant.reach_joint_ranges)
        return list(self.plant.deform_joint_ranges)


def parse_value(raw: Optional[str]) -> Any:
    """Преобразование строкового значения из файла: JSON, иначе строка."""
    if raw is None:
        return None
    try:
        return json.loads(raw)
    except (ValueError, TypeError):
        return raw


def unflatten(flat: Mapping[str, Any]) -> Dict[str, Any]:
    """Преобразование плоских ключей вида A__B__C во вложенный словарь."""
    nested: Dict[str, Any] = {}
    for key, value in flat.items():
        parts = [part.lower() for part in key.split(KEY_SEPARATOR) if part]
        if not parts:
            raise ConfigurationError(f"Пустой ключ конфигурации: {key!r}")
        node = nested
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigurationError(f"Конфликт ключей конфигурации: {key}")
            node = child
        node[parts[-1]] = value
    return nested


def flatten(nested: Mapping[str, Any], prefix: str = '') -> Dict[str, Any]:
    """Преобразование вложенного словаря в плоские ключи."""
    flat: Dict[str, Any] = {}
    for key, value in nested.items():
        path = f"{prefix}{KEY_SEPARATOR}{key}" if prefix else str(key)
        if isinstance(value, Mapping):
            flat.update(flatten(value, path))
        else:
            flat[path.upper()] = value
    return flat


def deep_merge(base: Mapping[str, Any], override: Mapping[str, Any]) -> Dict[str, Any]:
    """Рекурсивное наложение override на base."""
    merged: Dict[str, Any] = dict(base)
    for key, value in override.items():
        key = str(key)
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def read_config_file(path: str) -> Dict[str, Any]:
    """Чтение плоского файла конфигурации."""
    if not os.path.exists(path):
        raise ConfigurationError(f"Файл конфигурации не найден: {path}")
    raw = dotenv_values(path)
    logger.debug(f"Прочитано ключей конфигурации из {path}: {len(raw)}")
    return {key: parse_value(value) for key, value in raw.items()}


def load_experiment_config(
    path: Optional[str] = None,
    overlays: Sequence[Mapping[str, Any]] = (),
    seed: Optional[int] = None,
) -> ExperimentConfig:
    """
    Сборка эффективной конфигурации.

    Порядок наложения: встроенные значения, файл, оверлеи оптимизатора, seed из командной строки.
    """
    merged = ExperimentConfig().model_dump(mode='json')
    if path:
        merged = deep_merge(merged, unflatten(read_config_file(path)))
    for overlay in overlays:
        merged = deep_merge(merged, unflatten(overlay))
    if seed is not None:
        merged['seed'] = seed
    return build_config(merged)


def build_config(data: Mapping[str, Any]) -> ExperimentConfig:
    """Валидация словаря конфигурации."""
    try:
        return ExperimentConfig.model_validate(data)
    except PydanticValidationError as e:
        raise ConfigurationError(f"Некорректная конфигурация: {e.errors()[0]['loc']} {e.errors()[0]['msg']}") from e


def apply_overlay(config: ExperimentConfig, overlay: Mapping[str, Any]) -> ExperimentConfig:
    """Наложение плоского оверлея на готовую конфигурацию."""
    merged = deep_merge(config.model_dump(mode='json'), unflatten(overlay))
    return build_config(merged)


def config_dump(config: ExperimentConfig) -> str:
    """Каноническое JSON-представление конфигурации."""
    return json.dumps(config.model_dump(mode='json'), sort_keys=True, ensure_ascii=False)


def config_hash(config: ExperimentConfig) -> str:
    """SHA-256 от канонического представления конфигурации."""
    return hashlib.sha256(config_dump(config).encode('utf-8')).hexdigest()


def format_overlay(flat: Mapping[str, Any]) -> str:
    """Сериализация плоского оверлея в формат файла конфигурации."""
    lines = [f"{key.upper()}={json.dumps(value)}" for key, value in sorted(flat.items())]
    return '\n'.join(lines) + '\n'
