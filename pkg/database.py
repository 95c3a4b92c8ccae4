import json
from datetime import datetime

from sqlalchemy import Column, DateTime, Integer, String, Text, create_engine
from sqlalchemy.orm import Session, declarative_base, sessionmaker

from config import DATABASE_URL
from schemas import RunVerdict


def make_engine(url: str = DATABASE_URL):
    if url.startswith("sqlite"):
        return create_engine(url, connect_args={"check_same_thread": False})
    return create_engine(url)


# Создание движка базы данных
engine = make_engine()

SessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=engine)

Base = declarative_base()


class Run(Base):
    __tablename__ = "runs"

    id = Column(Integer, primary_key=True, index=True)
    scenario = Column(String, index=True, nullable=False)
    seed = Column(Integer, nullable=False)
    outcome = Column(String, nullable=False)
    verdict = Column(String, nullable=False)
    violations = Column(Integer, default=0)
    trace_digest = Column(String(64), nullable=False)
    responses = Column(Text)
    created_at = Column(DateTime, default=datetime.utcnow)


def init_db(bind=None):
    """Создание таблиц без alembic (тесты, первый запуск)"""
    Base.metadata.create_all(bind=bind or engine)


def get_db():
    db = SessionLocal()
    try:
        yield db
    finally:
        db.close()


def record_run(db: Session, verdict: RunVerdict) -> Run:
    """Сохранение вердикта прогона"""
    summary = {}
    for r in verdict.responses:
        summary.setdefault(str(r.process), []).append(r.kind)
    run = Run(
        scenario=verdict.scenario,
        seed=verdict.seed,
        outcome=verdict.outcome,
        verdict=verdict.verdict,
        violations=sum(1 for p in verdict.probes if p.violated),
        trace_digest=verdict.trace_digest,
        responses=json.dumps(summary, sort_keys=True, ensure_ascii=False),
    )
    db.add(run)
    db.commit()
    db.refresh(run)
    return run
