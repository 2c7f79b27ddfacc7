"""Конвейер эксперимента: стадии, файлы результатов и манифест запуска."""

import json
import logging
import os
from importlib import metadata
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from sqlalchemy.ext.asyncio import AsyncSession

from cerebellar_control.coding.soa import SoaConfig
from cerebellar_control.config.settings import (
    ExperimentConfig,
    config_dump,
    config_hash,
    format_overlay,
    load_experiment_config,
    read_config_file,
    settings,
)
from cerebellar_control.database.crud import (
    get_all_runs,
    get_completed_stages,
    get_or_create_run,
    get_stage_outputs,
    record_stage_output,
)
from cerebellar_control.database.session import create_db_session
from cerebellar_control.hyperopt.objectives import ObjectiveContext, make_objective
from cerebellar_control.hyperopt.optimizer import HistoryRecord, optimize_async
from cerebellar_control.hyperopt.space import objective_space
from cerebellar_control.plant.arm import ArmModel
from cerebellar_control.plant.babbling import babble, frame_to_samples, samples_to_frame
from cerebellar_control.plant.environment import build_plant
from cerebellar_control.services.cerebellum_service import (
    CerebellarSpec,
    Cerebellum,
    adapt_mf_assemblies,
    babble_mf_data,
    build_cerebellum,
    cerebellum_from_weights,
    rate_summary,
    simulate_window,
)
from cerebellar_control.services.controller_service import (
    TrialMode,
    run_trial,
    spread_targets,
    star_targets,
)
from cerebellar_control.services.dm_service import (
    DmTopology,
    build_dm,
    dm_from_weights,
    evaluate_dm,
    split_holdout,
    train_dm,
    variable_ranges,
)
from cerebellar_control.utils.decorators import with_session
from cerebellar_control.utils.exceptions import ConfigurationError, StageOrderError
from cerebellar_control.utils.export_utils import (
    append_jsonl,
    export_summary_to_excel,
    export_summary_to_pdf,
    file_sha256,
    read_csv,
    read_weights,
    write_csv,
    write_json,
    write_weights,
)
from cerebellar_control.utils.logging.logger import log_stage_action
from cerebellar_control.utils.utils import unit_vector

logger = logging.getLogger(__name__)

STAGES = (1, 2, 3, 4)
BABBLE_FILE = 'babble.csv'
WEIGHTS_FILE = 'weights.json'
DM_SUMMARY_FILE = 'dm_summary.json'
MANIFEST_FILE = 'manifest.json'
LEARNING_CURVE_FILE = 'learning_curve.csv'
PACKAGES = ('numpy', 'scipy', 'pandas', 'pydantic', 'SQLAlchemy')

# Значения, приводимые для сравнения с результатами на реальном манипуляторе
REFERENCE = {
    'deviation_reduction_pct': 310.0,
    'time_reduction_pct': 235.0,
    'deform_final_error_with_cb': 0.004,
    'deform_final_error_dm_only': 0.007,
    'deform_reached_dm_only': 3,
}

MODES = {
    'dm_only': (TrialMode.DM_ONLY,),
    'with_cb': (TrialMode.WITH_CB,),
    'both': (TrialMode.DM_ONLY, TrialMode.WITH_CB),
}


def overlay_file(stage: int) -> str:
    return f"overlay_stage{stage}.env"


def best_file(stage: int) -> str:
    return f"best_stage{stage}.json"


def history_file(stage: int) -> str:
    return f"history_stage{stage}.jsonl"


def package_versions() -> Dict[str, str]:
    """Версии ключевых пакетов для манифеста."""
    versions = {}
    for name in PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = 'unknown'
    return versions


def reduction_pct(baseline: float, improved: float) -> float:
    """Снижение в процентах относительно улучшенного значения: (base - impr) / impr · 100."""
    if improved <= 0:
        return float('inf') if baseline > 0 else 0.0
    return (baseline - improved) / improved * 100.0


class ExperimentPipeline:
    """Стадии эксперимента в каталоге результатов."""

    def __init__(self, out_dir: Optional[str] = None, config_path: Optional[str] = None, seed: Optional[int] = None):
        self.out_dir = os.path.abspath(out_dir or settings.OUT_DIR)
        self.config_path = config_path
        self.seed = seed
        self.database_url = settings.database_url(self.out_dir)
        os.makedirs(self.out_dir, exist_ok=True)

    def path(self, name: str) -> str:
        """Путь файла в каталоге результатов."""
        return os.path.join(self.out_dir, name)

    def completed_stages(self) -> List[int]:
        """Стадии оптимизации, для которых есть оверлей."""
        return [k for k in STAGES if os.path.exists(self.path(overlay_file(k)))]

    def load_config(self, up_to_stage: Optional[int] = None) -> ExperimentConfig:
        """
        Эффективная конфигурация: файл, оверлеи оптимизатора по порядку, seed.

        Args:
            up_to_stage: учитывать только оверлеи стадий меньше указанной
        """
        overlays = []
        for k in STAGES:
            if up_to_stage is not None and k >= up_to_stage:
                break
            path = self.path(overlay_file(k))
            if os.path.exists(path):
                overlays.append(read_config_file(path))
        return load_experiment_config(self.config_path, overlays, self.seed)

    def require(self, name: str, stage: str):
        """Проверка наличия входного файла стадии."""
        if not os.path.exists(self.path(name)):
            raise StageOrderError(f"Для стадии {stage} нужен файл {name}; выполните предыдущие стадии")

    # Манифест

    @with_session
    async def register(self, stage: str, paths: Sequence[str], config: ExperimentConfig,
                       session: AsyncSession = None):
        """Запись файлов стадии в базу манифеста и обновление manifest.json."""
        run = await get_or_create_run(session, {
            'config_hash': config_hash(config),
            'config_json': config_dump(config),
            'task': config.task,
            'seed': config.seed,
            'versions_json': json.dumps(package_versions(), sort_keys=True),
        })
        for path in paths:
            await record_stage_output(session, run.id, stage, os.path.relpath(path, self.out_dir), file_sha256(path))
        await self.write_manifest(session)
        log_stage_action(stage, 'registered', f"{len(paths)} files, run {run.id}")

    async def write_manifest(self, session: AsyncSession) -> str:
        """manifest.json из базы: запуски, конфигурации, файлы стадий."""
        runs = []
        for run in await get_all_runs(session):
            outputs = await get_stage_outputs(session, run.id)
            runs.append({
                'config_hash': run.config_hash,
                'config': json.loads(run.config_json),
                'task': run.task,
                'seed': run.seed,
                'versions': json.loads(run.versions_json),
                'created_at': run.created_at.isoformat() if run.created_at else None,
                'stages': await get_completed_stages(session, run.id),
                'outputs': [{'stage': o.stage, 'path': o.path, 'sha256': o.sha256} for o in outputs],
            })
        return write_json({'runs': runs}, self.path(MANIFEST_FILE))

    # Загрузка моделей

    def load_dm(self, config: ExperimentConfig) -> DmTopology:
        """Сеть DM из файла весов."""
        self.require(WEIGHTS_FILE, 'train-dm')
        weights = read_weights(self.path(WEIGHTS_FILE))
        if 'dm' not in weights:
            raise StageOrderError("В файле весов нет сети DM; выполните train-dm")
        return dm_from_weights(weights['dm'], config.dm)

    def load_cerebellum(self, config: ExperimentConfig) -> Cerebellum:
        """Мозжечок из файла весов."""
        self.require(WEIGHTS_FILE, 'train-cb')
        weights = read_weights(self.path(WEIGHTS_FILE))
        if 'cerebellum' not in weights:
            raise StageOrderError("В файле весов нет мозжечка; выполните train-cb")
        spec = CerebellarSpec.from_config(config.cerebellum)
        return cerebellum_from_weights(weights['cerebellum'], spec, config.seed, config.joint_ranges)

    def update_weights(self, **sections: Any) -> str:
        """Замена разделов файла весов с сохранением остальных."""
        path = self.path(WEIGHTS_FILE)
        current = read_weights(path) if os.path.exists(path) else {}
        current.pop('format_version', None)
        current.update(sections)
        return write_weights(current, path)

    def load_samples(self):
        """Отсчёты лепета."""
        self.require(BABBLE_FILE, 'babble')
        return frame_to_samples(read_csv(self.path(BABBLE_FILE)))

    def task_targets(self, config: ExperimentConfig, plant, purpose: int) -> List[np.ndarray]:
        """
        Цели задачи.

        Для звезды: восемь целей вокруг домашней позы. Для деформации: случайные
        центроиды из лепета; purpose разделяет наборы обучения и проверки.
        """
        plant.reset()
        if config.task == 'reach_star':
            return star_targets(plant.position(), config.controller.star_radius, plant.arm)
        positions = np.array([s.x for s in self.load_samples()])
        rng = np.random.default_rng([config.seed, purpose])
        return spread_targets(positions, config.controller.deform_targets,
                              config.controller.deform_min_separation, rng, config.controller.target_retries)

    def probe_rates(self, config: ExperimentConfig, cb: Cerebellum, plant, target: np.ndarray) -> pd.DataFrame:
        """Сводка частот для окна в стартовой позе с направлением на цель."""
        reading = plant.reset()
        direction = unit_vector(np.asarray(target) - reading.x)
        if direction is None:
            direction = np.array([1.0, 0.0])
        record = simulate_window(cb, reading.q, direction, config.optimizer.probe_window_ms)
        return rate_summary(cb.spec, record)

    # Стадии

    async def cmd_babble(self) -> Dict[str, Any]:
        """Моторный лепет и запись выборки."""
        await create_db_session(self.database_url)
        config = self.load_config()
        log_stage_action('babble', 'start', f"task={config.task}, targets={config.babble_count}")
        plant = build_plant(config, seed=config.seed)
        samples = babble(plant, config.babble_count, seed=config.seed, speed=config.dm.babble_speed,
                         period_ms=config.controller.period_ms)
        path = write_csv(samples_to_frame(samples), self.path(BABBLE_FILE))
        await self.register('babble', [path], config)
        return {'stage': 'babble', 'targets': config.babble_count, 'samples': len(samples), 'path': path}

    async def cmd_train_dm(self) -> Dict[str, Any]:
        """Обучение DM на лепете с отложенной проверкой."""
        await create_db_session(self.database_url)
        config = self.load_config()
        samples = self.load_samples()
        train, holdout = split_holdout(samples, config.dm.holdout_every)
        v_ranges, qdot_ranges = variable_ranges(samples)
        log_stage_action('train-dm', 'start', f"train={len(train)}, holdout={len(holdout)}")
        dm = build_dm(config.joint_ranges, v_ranges, qdot_ranges, config.dm, seed=config.seed)
        train_dm(dm, train, epochs=config.dm.epochs)
        summary = evaluate_dm(dm, holdout, ArmModel.from_config(config, noise=False))
        summary.update({'train_samples': len(train), 'task': config.task})
        weights_path = self.update_weights(dm=dm.to_dict())
        summary_path = write_json(summary, self.path(DM_SUMMARY_FILE))
        await self.register('train_dm', [weights_path, summary_path], config)
        logger.info(f"DM: медианная ошибка направления {summary['median_direction_error_deg']:.2f}°")
        return {'stage': 'train-dm', **summary}

    async def cmd_optimize(self, stage: int, budget: Optional[int] = None) -> Dict[str, Any]:
        """Стадия послойной настройки с записью истории, лучшей точки и оверлея."""
        if stage not in STAGES:
            raise ConfigurationError(f"Стадия оптимизации должна быть от 1 до 4: {stage}")
        for k in range(1, stage):
            if not os.path.exists(self.path(overlay_file(k))):
                raise StageOrderError(f"Стадия {stage} требует результат стадии {k}: нет {overlay_file(k)}")
        await create_db_session(self.database_url)
        mf_data = babble_mf_data(self.load_samples())
        config = self.load_config(up_to_stage=stage)
        budget = budget or config.optimizer.budgets[stage]
        dm = self.load_dm(config) if stage == 4 else None

        history_path = self.path(history_file(stage))
        if os.path.exists(history_path):
            os.remove(history_path)

        async def on_trial(record: HistoryRecord):
            await append_jsonl([record.to_dict()], history_path)

        log_stage_action(f"optimize-{stage}", 'start', f"budget={budget}")
        context = ObjectiveContext(config=config, dm=dm, seed=config.seed, mf_data=mf_data)
        result = await optimize_async(make_objective(stage, context), objective_space(stage, config), budget,
                                      config.seed, config.optimizer, settings.MAX_WORKERS, on_trial)

        overlay_path = self.path(overlay_file(stage))
        with open(overlay_path, 'w', encoding='utf-8') as f:
            f.write(format_overlay(result.best_point))
        best_path = write_json({
            'stage': stage,
            'best_loss': result.best_loss,
            'h': result.best_point,
            'trials': len(result.history),
            'best_so_far': result.history.best_so_far(),
        }, self.path(best_file(stage)))
        await self.register(f"optimize_{stage}", [history_path, best_path, overlay_path], config)
        return {'stage': f"optimize-{stage}", 'best_loss': result.best_loss, 'trials': len(result.history)}

    async def cmd_train_cb(self) -> Dict[str, Any]:
        """Обучение мозжечка: повторения движений ко всем целям задачи."""
        await create_db_session(self.database_url)
        config = self.load_config()
        dm = self.load_dm(config)
        samples = self.load_samples()
        plant = build_plant(config, seed=config.seed)
        spec = CerebellarSpec.from_config(config.cerebellum)
        cb = build_cerebellum(spec, config.seed, joint_ranges=config.joint_ranges)

        mf_data = babble_mf_data(samples)
        if mf_data is not None:
            q_samples, directions = mf_data
            cb.mf_assemblies = adapt_mf_assemblies(spec, config.joint_ranges, q_samples, directions,
                                                   SoaConfig.from_config(config.cerebellum.soa), seed=config.seed)

        targets = self.task_targets(config, plant, purpose=1)
        repetitions = config.cerebellum.teaching_repetitions
        log_stage_action('train-cb', 'start', f"targets={len(targets)}, repetitions={repetitions}")
        rows = []
        for repetition in range(1, repetitions + 1):
            for direction, target in enumerate(targets):
                plant.reset(seed=[config.seed, direction, repetition])
                record = run_trial(dm, cb, plant, target, TrialMode.TRAIN_CB, config.controller)
                rows.append({'direction': direction, 'repetition': repetition, 'max_deviation': record.max_deviation,
                             'execution_time': record.execution_time, 'mean_e_pred': record.mean_e_pred,
                             'outcome': record.outcome.value})
            logger.info(f"Мозжечок: повторение {repetition}/{repetitions} завершено")

        curve = pd.DataFrame(rows, columns=['direction', 'repetition', 'max_deviation', 'execution_time',
                                            'mean_e_pred', 'outcome'])
        curve_path = write_csv(curve, self.path(LEARNING_CURVE_FILE))
        rates_path = write_csv(self.probe_rates(config, cb, plant, targets[0]), self.path('rates_train_cb.csv'))
        weights_path = self.update_weights(cerebellum=cb.to_dict())
        await self.register('train_cb', [weights_path, curve_path, rates_path], config)
        return {'stage': 'train-cb', 'trials': len(rows), 'theta_dcn_max': cb.theta_dcn_max}

    def _run_modes(self, config, dm, cb, plant, targets, modes, repetitions) -> List[Dict[str, Any]]:
        results = []
        for mode in modes:
            for index, target in enumerate(targets):
                for repetition in range(repetitions):
                    plant.reset(seed=[config.seed, index, repetition])
                    record = run_trial(dm, cb, plant, target, mode, config.controller)
                    results.append({'mode': mode, 'target': index, 'repetition': repetition, 'record': record})
        return results

    @staticmethod
    def _frames(results: List[Dict[str, Any]]) -> pd.DataFrame:
        frames = []
        for item in results:
            df = item['record'].to_frame()
            df.insert(0, 'repetition', item['repetition'])
            df.insert(0, 'target', item['target'])
            df.insert(0, 'mode', item['mode'].value)
            frames.append(df)
        return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame()

    def _export(self, export: str, stage: str, table: pd.DataFrame) -> List[str]:
        if export == 'pdf':
            return [export_summary_to_pdf(f"Сводка: {stage}", table.to_dict('records'), self.path(f"{stage}.pdf"))]
        if export == 'excel':
            return [export_summary_to_excel({stage: table}, self.path(f"{stage}.xlsx"))]
        return []

    def _models(self, config, mode: str):
        if mode not in MODES:
            raise ConfigurationError(f"Неизвестный режим: {mode}")
        modes = MODES[mode]
        dm = self.load_dm(config)
        cb = self.load_cerebellum(config) if TrialMode.WITH_CB in modes else None
        return modes, dm, cb

    async def cmd_reach(self, mode: str = 'both', export: str = 'none') -> Dict[str, Any]:
        """Оценка на звезде из восьми целей: отклонение и время по направлениям."""
        await create_db_session(self.database_url)
        config = self.load_config()
        if config.task != 'reach_star':
            raise ConfigurationError("Команда reach требует task=reach_star")
        modes, dm, cb = self._models(config, mode)
        plant = build_plant(config, seed=config.seed)
        targets = self.task_targets(config, plant, purpose=2)
        log_stage_action('reach', 'start', f"modes={[m.value for m in modes]}")
        results = self._run_modes(config, dm, cb, plant, targets, modes, config.controller.repetitions)

        table = pd.DataFrame([{'mode': r['mode'].value, 'direction': r['target'], **r['record'].summary()}
                              for r in results])
        per_direction = (table.groupby(['mode', 'direction'], as_index=False)
                         .agg(max_deviation=('max_deviation', 'mean'), execution_time=('execution_time', 'mean'),
                              reached=('outcome', lambda s: int((s == 'reached').sum()))))
        summary: Dict[str, Any] = {'stage': 'reach', 'directions': []}
        for direction in range(len(targets)):
            entry: Dict[str, Any] = {'direction': direction}
            rows = per_direction[per_direction['direction'] == direction]
            for row in rows.itertuples(index=False):
                entry[row.mode] = {'max_deviation': row.max_deviation, 'execution_time': row.execution_time,
                                   'reached': row.reached}
            if 'dm_only' in entry and 'with_cb' in entry:
                entry['deviation_ratio'] = entry['dm_only']['max_deviation'] / max(entry['with_cb']['max_deviation'],
                                                                                   1e-12)
                entry['time_ratio'] = entry['dm_only']['execution_time'] / max(entry['with_cb']['execution_time'],
                                                                              1e-12)
            summary['directions'].append(entry)
        if len(modes) == 2:
            means = table.groupby('mode')[['max_deviation', 'execution_time']].mean()
            summary['deviation_reduction_pct'] = reduction_pct(means.loc['dm_only', 'max_deviation'],
                                                               means.loc['with_cb', 'max_deviation'])
            summary['time_reduction_pct'] = reduction_pct(means.loc['dm_only', 'execution_time'],
                                                          means.loc['with_cb', 'execution_time'])
            summary['reference'] = {k: REFERENCE[k] for k in ('deviation_reduction_pct', 'time_reduction_pct')}

        paths = [
            write_csv(self._frames(results), self.path('reach_frames.csv')),
            write_csv(table, self.path('reach_trials.csv')),
            write_json(summary, self.path('reach_summary.json')),
        ]
        if cb is not None:
            paths.append(write_csv(self.probe_rates(config, cb, plant, targets[0]), self.path('rates_reach.csv')))
        paths += self._export(export, 'reach', per_direction)
        await self.register('reach', paths, config)
        return summary

    async def cmd_deform(self, mode: str = 'both', export: str = 'none') -> Dict[str, Any]:
        """Перемещение центроида объекта к случайным целям исследованной области."""
        await create_db_session(self.database_url)
        config = self.load_config()
        if config.task != 'deform':
            raise ConfigurationError("Команда deform требует task=deform")
        modes, dm, cb = self._models(config, mode)
        plant = build_plant(config, seed=config.seed)
        targets = self.task_targets(config, plant, purpose=2)
        log_stage_action('deform', 'start', f"targets={len(targets)}")
        results = self._run_modes(config, dm, cb, plant, targets, modes, 1)

        table = pd.DataFrame([{'mode': r['mode'].value, 'target': r['target'],
                               'target_x1': float(targets[r['target']][0]), 'target_x2': float(targets[r['target']][1]),
                               **r['record'].summary()} for r in results])
        table['success'] = table['outcome'] == 'reached'
        summary: Dict[str, Any] = {'stage': 'deform', 'targets': len(targets), 'modes': {}}
        for mode_name, group in table.groupby('mode'):
            summary['modes'][mode_name] = {
                'mean_final_error': float(group['final_error'].mean()),
                'reached': int(group['success'].sum()),
            }
        summary['reference'] = {k: REFERENCE[k] for k in REFERENCE if k.startswith('deform')}

        paths = [
            write_csv(self._frames(results), self.path('deform_frames.csv')),
            write_csv(table, self.path('deform_trials.csv')),
            write_json(summary, self.path('deform_summary.json')),
        ]
        paths += self._export(export, 'deform', table)
        await self.register('deform', paths, config)
        return summary
