import os
import sys

import numpy as np
import pytest
from sqlalchemy.ext.asyncio import AsyncSession, async_sessionmaker, create_async_engine
from sqlalchemy.pool import StaticPool

# Добавляем корневую директорию проекта в PYTHONPATH
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from cerebellar_control.config.settings import ExperimentConfig, Settings, build_config  # noqa: E402
from cerebellar_control.database.models import Base  # noqa: E402


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False, help='запускать медленные тесты')


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: длительная симуляция, запускается с --runslow')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='нужен флаг --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


# Создаем тестовые настройки, которые используют SQLite in-memory
class TestSettings(Settings):
    def database_url(self, out_dir=None) -> str:
        """Переопределяем URL для использования SQLite в памяти"""
        return "sqlite+aiosqlite:///:memory:"


test_settings = TestSettings()


@pytest.fixture
async def test_session():
    """Тестовая сессия БД в памяти"""
    # StaticPool держит одно соединение: база :memory: живёт весь тест
    engine = create_async_engine(test_settings.database_url(), future=True, poolclass=StaticPool)
    async with engine.begin() as conn:
        await conn.run_sync(Base.metadata.create_all)
    factory = async_sessionmaker(engine, class_=AsyncSession, expire_on_commit=False, autoflush=False)
    async with factory() as session:
        yield session
    await engine.dispose()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def small_config_data(task: str = 'reach_star') -> dict:
    """Уменьшенная конфигурация для быстрых тестов"""
    data = ExperimentConfig(task=task).model_dump(mode='json')
    data['cerebellum']['sizes'] = {'mf': 40, 'gc': 120, 'ggc': 4, 'pc': 12, 'bc': 10, 'io': 12, 'dcn': 12}
    data['cerebellum']['soa']['k'] = 200
    data['cerebellum']['teaching_repetitions'] = 1
    data['dm']['n_l'] = 10
    data['dm']['babble_count'] = 4
    data['dm']['window_ms'] = 20.0
    data['controller']['timeout_s'] = 1.0
    data['controller']['repetitions'] = 1
    data['controller']['deform_targets'] = 2
    data['controller']['deform_min_separation'] = 0.0
    data['optimizer']['startup_trials'] = 3
    data['optimizer']['probe_window_ms'] = 50.0
    data['optimizer']['n_test'] = 2
    data['optimizer']['f4_repetitions'] = 1
    return data


@pytest.fixture
def small_config() -> ExperimentConfig:
    return build_config(small_config_data())


@pytest.fixture
def small_deform_config() -> ExperimentConfig:
    return build_config(small_config_data('deform'))


@pytest.fixture
def default_config() -> ExperimentConfig:
    return ExperimentConfig()
