"""Тесты конвейера стадий и командной строки."""

import json
import os

import pytest

from app import build_parser, main
from cerebellar_control.config.settings import flatten, format_overlay
from cerebellar_control.database.session import dispose_engines
from cerebellar_control.services.pipeline_service import (
    BABBLE_FILE,
    MANIFEST_FILE,
    ExperimentPipeline,
    overlay_file,
    reduction_pct,
)
from cerebellar_control.utils.exceptions import StageOrderError
from tests.conftest import small_config_data


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / 'small.env'
    path.write_text(format_overlay(flatten(small_config_data())), encoding='utf-8')
    return str(path)


@pytest.fixture
async def engines():
    yield
    await dispose_engines()


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    """Журнал пишется относительно рабочего каталога"""
    monkeypatch.chdir(tmp_path)
    return tmp_path


def test_reduction_pct():
    assert reduction_pct(4.1, 1.0) == pytest.approx(310.0)
    assert reduction_pct(1.0, 1.0) == 0.0
    assert reduction_pct(0.0, 0.0) == 0.0


def test_config_file_matches_fixture(config_path, tmp_path, small_config):
    pipeline = ExperimentPipeline(out_dir=str(tmp_path / 'run'), config_path=config_path)
    assert pipeline.load_config() == small_config


def test_overlays_applied_by_stage(config_path, tmp_path):
    pipeline = ExperimentPipeline(out_dir=str(tmp_path / 'run'), config_path=config_path)
    with open(pipeline.path(overlay_file(1)), 'w', encoding='utf-8') as f:
        f.write(format_overlay({'CEREBELLUM__DEAD_BAND': 0.2}))
    assert pipeline.completed_stages() == [1]
    assert pipeline.load_config(up_to_stage=1).cerebellum.dead_band == pytest.approx(0.05)
    assert pipeline.load_config().cerebellum.dead_band == pytest.approx(0.2)


@pytest.mark.asyncio
async def test_babble_is_reproducible(config_path, tmp_path, engines):
    contents = []
    for name in ('a', 'b'):
        pipeline = ExperimentPipeline(out_dir=str(tmp_path / name), config_path=config_path, seed=3)
        result = await pipeline.cmd_babble()
        assert result['targets'] == 4
        assert result['samples'] > 0
        with open(pipeline.path(BABBLE_FILE), encoding='utf-8') as f:
            contents.append(f.read())
    assert contents[0] == contents[1]

    with open(pipeline.path(MANIFEST_FILE), encoding='utf-8') as f:
        manifest = json.load(f)
    assert len(manifest['runs']) == 1
    run = manifest['runs'][0]
    assert run['seed'] == 3
    assert [o['path'] for o in run['outputs']] == [BABBLE_FILE]
    assert run['stages'] == ['babble']
    assert 'numpy' in run['versions']


@pytest.mark.asyncio
async def test_train_dm_requires_babble(tmp_path, engines):
    with pytest.raises(StageOrderError):
        await ExperimentPipeline(out_dir=str(tmp_path)).cmd_train_dm()


@pytest.mark.asyncio
async def test_optimize_requires_previous_stage(tmp_path, engines):
    with pytest.raises(StageOrderError):
        await ExperimentPipeline(out_dir=str(tmp_path)).cmd_optimize(2, budget=1)


@pytest.mark.asyncio
async def test_optimize_requires_babble(config_path, tmp_path, engines):
    with pytest.raises(StageOrderError):
        await ExperimentPipeline(out_dir=str(tmp_path), config_path=config_path).cmd_optimize(1, budget=1)


@pytest.mark.asyncio
async def test_cli_reports_stage_order_error(workdir, capsys):
    code = await main(['train-dm', '--out-dir', str(workdir / 'run')])
    assert code == 1
    error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert error['error'] == 'StageOrderError'


@pytest.mark.asyncio
async def test_cli_babble(workdir, config_path, capsys):
    code = await main(['babble', '--config', config_path, '--out-dir', str(workdir / 'run'), '--seed', '1'])
    assert code == 0
    result = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert result['stage'] == 'babble'
    assert os.path.exists(result['path'])


def test_cli_requires_stage_for_optimize():
    with pytest.raises(SystemExit):
        build_parser().parse_args(['optimize', '--out-dir', 'run'])


@pytest.mark.slow
@pytest.mark.asyncio
async def test_first_optimization_stage_writes_overlay(config_path, tmp_path, engines):
    pipeline = ExperimentPipeline(out_dir=str(tmp_path), config_path=config_path)
    await pipeline.cmd_babble()
    result = await pipeline.cmd_optimize(1, budget=2)
    assert result['trials'] == 2
    assert pipeline.completed_stages() == [1]
    with open(pipeline.path('history_stage1.jsonl'), encoding='utf-8') as f:
        assert len(f.readlines()) == 2
    with pytest.raises(StageOrderError):
        await pipeline.cmd_optimize(3, budget=1)


@pytest.mark.slow
@pytest.mark.asyncio
async def test_reach_pipeline_end_to_end(config_path, tmp_path, engines):
    pipeline = ExperimentPipeline(out_dir=str(tmp_path), config_path=config_path)
    await pipeline.cmd_babble()
    await pipeline.cmd_train_dm()
    trained = await pipeline.cmd_train_cb()
    assert trained['trials'] == 8
    summary = await pipeline.cmd_reach('both')
    assert len(summary['directions']) == 8
    assert 'deviation_reduction_pct' in summary
    for name in ('reach_frames.csv', 'reach_trials.csv', 'reach_summary.json', 'rates_reach.csv'):
        assert os.path.exists(pipeline.path(name))
