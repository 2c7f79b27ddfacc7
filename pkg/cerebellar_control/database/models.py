from datetime import datetime

from sqlalchemy import Column, DateTime, ForeignKey, Integer, String, Text
from sqlalchemy.orm import declarative_base, relationship

Base = declarative_base()


class Run(Base):
    """Модель запуска: эффективная конфигурация и её хеш"""
    __tablename__ = 'runs'

    id = Column(Integer, primary_key=True)
    config_hash = Column(String(64), nullable=False, unique=True)
    config_json = Column(Text, nullable=False)
    task = Column(String(32), nullable=False)  # reach_star, deform
    seed = Column(Integer, nullable=False)
    versions_json = Column(Text, nullable=False)
    created_at = Column(DateTime, default=datetime.utcnow)

    # Отношения
    outputs = relationship("StageOutput", back_populates="run", cascade="all, delete-orphan")


class StageOutput(Base):
    """Модель файла, созданного стадией конвейера"""
    __tablename__ = 'stage_outputs'

    id = Column(Integer, primary_key=True)
    run_id = Column(Integer, ForeignKey('runs.id'), nullable=False)
    stage = Column(String(32), nullable=False)  # babble, train_dm, optimize_1..4, train_cb, reach, deform
    path = Column(String(512), nullable=False)
    sha256 = Column(String(64), nullable=False)
    created_at = Column(DateTime, default=datetime.utcnow)

    # Отношения
    run = relationship("Run", back_populates="outputs")
