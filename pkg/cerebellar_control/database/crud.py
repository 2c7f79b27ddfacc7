import logging
from typing import Any, Dict, List, Optional

from sqlalchemy import delete, select
from sqlalchemy.exc import SQLAlchemyError
from sqlalchemy.ext.asyncio import AsyncSession

from cerebellar_control.database.models import Run, StageOutput
from cerebellar_control.utils.exceptions import DatabaseError

logger = logging.getLogger(__name__)


# Операции с запусками
async def get_run_by_hash(session: AsyncSession, config_hash: str) -> Optional[Run]:
    """Получение запуска по хешу конфигурации"""
    result = await session.execute(select(Run).where(Run.config_hash == config_hash))
    return result.scalars().first()


async def get_or_create_run(session: AsyncSession, run_data: Dict[str, Any]) -> Run:
    """Получение запуска по хешу или создание нового"""
    run = await get_run_by_hash(session, run_data['config_hash'])
    if run is not None:
        return run
    try:
        run = Run(**run_data)
        session.add(run)
        await session.commit()
        await session.refresh(run)
        return run
    except SQLAlchemyError as e:
        await session.rollback()
        logger.error(f"Ошибка при создании запуска: {str(e)}")
        raise DatabaseError(f"Не удалось создать запуск: {e}") from e


async def get_all_runs(session: AsyncSession) -> List[Run]:
    """Получение всех запусков в порядке создания"""
    result = await session.execute(select(Run).order_by(Run.id))
    return list(result.scalars().all())


# Операции с результатами стадий
async def record_stage_output(session: AsyncSession, run_id: int, stage: str, path: str, sha256: str) -> StageOutput:
    """Запись файла стадии; прежняя запись того же пути заменяется"""
    try:
        await session.execute(
            delete(StageOutput).where(StageOutput.run_id == run_id, StageOutput.path == path))
        output = StageOutput(run_id=run_id, stage=stage, path=path, sha256=sha256)
        session.add(output)
        await session.commit()
        await session.refresh(output)
        return output
    except SQLAlchemyError as e:
        await session.rollback()
        logger.error(f"Ошибка при записи результата стадии {stage}: {str(e)}")
        raise DatabaseError(f"Не удалось записать результат стадии {stage}: {e}") from e


async def get_stage_outputs(session: AsyncSession, run_id: int, stage: Optional[str] = None) -> List[StageOutput]:
    """Получение файлов запуска, при необходимости одной стадии"""
    query = select(StageOutput).where(StageOutput.run_id == run_id)
    if stage is not None:
        query = query.where(StageOutput.stage == stage)
    result = await session.execute(query.order_by(StageOutput.stage, StageOutput.path))
    return list(result.scalars().all())


async def get_completed_stages(session: AsyncSession, run_id: int) -> List[str]:
    """Список стадий, у которых есть записанные результаты"""
    result = await session.execute(
        select(StageOutput.stage).where(StageOutput.run_id == run_id).distinct())
    return sorted(result.scalars().all())
