from typing import AsyncIterator, Dict, Optional

from sqlalchemy.ext.asyncio import AsyncEngine, AsyncSession, async_sessionmaker, create_async_engine
from sqlalchemy.pool import NullPool

from cerebellar_control.config.settings import settings
from .models import Base

# Движки по URL: у каждого каталога результатов своя база манифеста
_engines: Dict[str, AsyncEngine] = {}


def get_engine(database_url: Optional[str] = None) -> AsyncEngine:
    """Асинхронный движок для URL (по умолчанию из настроек)"""
    url = database_url or settings.database_url()
    if url not in _engines:
        _engines[url] = create_async_engine(url, echo=False, future=True, poolclass=NullPool)
    return _engines[url]


def get_session_factory(database_url: Optional[str] = None) -> async_sessionmaker:
    """Фабрика асинхронных сессий"""
    return async_sessionmaker(
        get_engine(database_url),
        class_=AsyncSession,
        expire_on_commit=False,
        autoflush=False,
    )


async def create_db_session(database_url: Optional[str] = None):
    """Создание всех таблиц и подготовка базы данных"""
    async with get_engine(database_url).begin() as conn:
        await conn.run_sync(Base.metadata.create_all)


async def get_session(database_url: Optional[str] = None) -> AsyncIterator[AsyncSession]:
    """Получение сессии для работы с базой данных"""
    async with get_session_factory(database_url)() as session:
        try:
            yield session
        finally:
            await session.close()


async def dispose_engines():
    """Закрытие всех движков"""
    for engine in _engines.values():
        await engine.dispose()
    _engines.clear()
