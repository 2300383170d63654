# ══════════════════════════════════════════════════════════
# app/database.py — acapro
# PostgreSQL (Railway) con fallback a SQLite local.
# Guarda el historial de verificaciones y las filas de bench.
# ══════════════════════════════════════════════════════════

import os
from datetime import datetime, timezone

from sqlalchemy import (JSON, Boolean, Column, DateTime, Integer, String, Text,
                        create_engine)
from sqlalchemy.orm import declarative_base, sessionmaker
from sqlalchemy.pool import StaticPool

# ─── DATABASE URL ───
# Railway entrega postgres://…; SQLAlchemy necesita postgresql://…
DATABASE_URL = os.environ.get("DATABASE_URL", "sqlite:///acapro.db")

if DATABASE_URL.startswith("postgres://"):
    DATABASE_URL = DATABASE_URL.replace("postgres://", "postgresql://", 1)

# ─── ENGINE ───
if DATABASE_URL.startswith("postgresql://"):
    engine = create_engine(
        DATABASE_URL,
        pool_pre_ping=True,
        pool_recycle=300,
        pool_size=5,
        max_overflow=10,
        echo=False,
    )
elif DATABASE_URL in ("sqlite://", "sqlite:///:memory:"):
    # Memoria compartida entre hilos (tests con TestClient)
    engine = create_engine(
        DATABASE_URL,
        connect_args={"check_same_thread": False},
        poolclass=StaticPool,
        echo=False,
    )
elif DATABASE_URL.startswith("sqlite"):
    # SQLite para desarrollo local
    engine = create_engine(DATABASE_URL, connect_args={"check_same_thread": False}, echo=False)
else:
    engine = create_engine(DATABASE_URL, pool_pre_ping=True, echo=False)

SessionLocal = sessionmaker(bind=engine, expire_on_commit=False)
Base = declarative_base()


# ─── MODELS ───

class VerificationRun(Base):
    """Una verificación completa (CLI con --save o POST /api/verify)."""
    __tablename__ = "verification_runs"

    id = Column(Integer, primary_key=True, autoincrement=True)
    machine = Column(String(200), nullable=False, index=True)
    input = Column(String(500), default="")
    construction = Column(Integer, nullable=False)
    gap = Column(Integer)
    seq = Column(String(500), nullable=False)
    match_mode = Column(String(10), default="head")
    tm_steps = Column(Integer, nullable=False)
    budget = Column(Integer, nullable=False)
    verdict = Column(String(20), nullable=False, index=True)
    reason = Column(Text, default="")
    budget_used = Column(Integer, default=0)
    bound_value = Column(Integer)
    bound_ok = Column(Boolean, default=False)
    matches = Column(JSON, default=list)
    created_at = Column(DateTime, default=lambda: datetime.now(timezone.utc), index=True)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "machine": self.machine,
            "input": self.input,
            "construction": self.construction,
            "gap": self.gap,
            "seq": self.seq,
            "match": self.match_mode,
            "tm_steps": self.tm_steps,
            "budget": self.budget,
            "verdict": self.verdict,
            "reason": self.reason,
            "budget_used": self.budget_used,
            "bound_value": self.bound_value,
            "bound_ok": self.bound_ok,
            "matches": self.matches or [],
            "fecha": self.created_at.isoformat() if self.created_at else None,
        }


class BenchRow(Base):
    """Una fila (T, t'_T, cota) de un bench; bench_id agrupa la corrida."""
    __tablename__ = "bench_rows"

    id = Column(Integer, primary_key=True, autoincrement=True)
    bench_id = Column(String(40), nullable=False, index=True)
    machine = Column(String(200), nullable=False)
    T = Column(Integer, nullable=False)
    tprime = Column(Integer)
    bound = Column(Integer, nullable=False)
    ok = Column(Boolean, default=False)
    construction = Column(Integer, nullable=False)
    seq = Column(String(500), nullable=False)
    created_at = Column(DateTime, default=lambda: datetime.now(timezone.utc))

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "tprime": self.tprime,
            "bound": self.bound,
            "ok": self.ok,
            "construction": self.construction,
            "seq": self.seq,
        }


Base.metadata.create_all(bind=engine)


def save_report(db, report) -> VerificationRun:
    row = VerificationRun(
        machine=report.machine,
        input=report.input,
        construction=report.construction_id,
        gap=report.gap,
        seq=report.sequence,
        match_mode=report.match_mode,
        tm_steps=report.tm_steps,
        budget=report.budget,
        verdict=report.verdict.value,
        reason=report.reason,
        budget_used=report.budget_used,
        bound_value=report.bound_value,
        bound_ok=report.bound_ok,
        matches=[[t, k] for t, k in report.matches],
    )
    db.add(row)
    db.commit()
    return row


def save_bench(db, bench_id: str, machine: str, rows) -> int:
    for r in rows:
        db.add(BenchRow(
            bench_id=bench_id,
            machine=machine,
            T=r.T,
            tprime=r.tprime,
            bound=r.bound,
            ok=r.ok,
            construction=r.construction,
            seq=r.seq,
        ))
    db.commit()
    return len(rows)
