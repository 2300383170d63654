# ══════════════════════════════════════════════════════════
# app/routers/simulacion.py — API del simulador
# Rutas bajo /api (máquinas, compile, run, verify, analyze,
# bench, historial) y la página HTML /traza.
# ══════════════════════════════════════════════════════════

import logging
import os
import pathlib
import uuid
from typing import Optional, Tuple

from fastapi import APIRouter, HTTPException, Request
from fastapi.responses import HTMLResponse, Response
from fastapi.templating import Jinja2Templates
from pydantic import BaseModel

from app.cli import CliConfig, compile_from, scatter_from
from app.database import BenchRow, SessionLocal, VerificationRun, save_bench, save_report
from app.services.aca_service import evolve
from app.services.construction_service import rule_manifest
from app.services.render_service import bench_xlsx, render_ascii, trace_to_dict
from app.services.sequence_service import SequenceExhausted, analyze, parse_sequence
from app.services.turing_service import BUILTIN_MACHINES, load_builtin
from app.services.verifier_service import bench, default_budget, verify

logger = logging.getLogger("acapro.api")

MAX_BUDGET = int(os.environ.get("ACA_MAX_BUDGET", "2000000"))

router = APIRouter(prefix="/api", tags=["Simulación"])
pages = APIRouter(tags=["Páginas"])
templates = Jinja2Templates(directory=str(pathlib.Path(__file__).resolve().parent.parent / "templates"))


# ─── Schemas ────────────────────────────────────────────────────
class SimRequest(BaseModel):
    tm: str = "zigzag"
    input: str = ""
    construction: int = 1
    gap: Optional[int] = None
    seq: Optional[str] = None
    seed: Optional[int] = None


class RunRequest(SimRequest):
    steps: int = 20


class VerifyRequest(SimRequest):
    tm_steps: int = 10
    budget: Optional[int] = None
    slack: float = 1.0
    match: str = "head"


class BenchRequest(SimRequest):
    t_min: int = 1
    t_max: int = 10
    slack: float = 1.0
    match: str = "head"


class AnalyzeRequest(BaseModel):
    seq: str
    prefix: int = 100
    window: Tuple[int, int] = (-5, 5)
    seed: Optional[int] = None


# ─── Helpers ────────────────────────────────────────────────────
def _db():
    return SessionLocal()


def _config(command: str, body: BaseModel) -> CliConfig:
    data = body.model_dump()
    if data.get("tm") not in BUILTIN_MACHINES:
        raise HTTPException(status_code=404, detail=f"unknown machine {data.get('tm')!r}")
    try:
        return CliConfig(command=command, **data).validate()
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))


def _check_budget(value: int) -> None:
    if value > MAX_BUDGET:
        raise HTTPException(
            status_code=400,
            detail=f"budget {value} exceeds the service limit {MAX_BUDGET}",
        )


# ─── Máquinas ───────────────────────────────────────────────────
@router.get("/machines")
def listar_maquinas():
    out = []
    for name in BUILTIN_MACHINES:
        tm = load_builtin(name)
        out.append({
            "name": name,
            "states": list(tm.states),
            "input_alphabet": list(tm.input_alphabet),
            "work_alphabet": list(tm.work_alphabet),
            "blank": tm.blank,
            "initial": tm.initial,
            "finals": sorted(tm.finals),
        })
    return out


@router.post("/compile")
def compilar(body: SimRequest):
    cfg = _config("compile", body)
    try:
        _, compiled = compile_from(cfg)
        return rule_manifest(compiled)
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))


@router.post("/run")
def correr(body: RunRequest):
    cfg = _config("run", body)
    if cfg.steps < 0:
        raise HTTPException(status_code=400, detail="steps must be >= 0")
    _check_budget(cfg.steps)
    try:
        _, compiled = compile_from(cfg)
        seq = parse_sequence(cfg.sequence_spec(), seed=cfg.seed, allow_files=False)
        trace = evolve(compiled.initial(cfg.input, scatter_from(cfg)), compiled.rule, seq, cfg.steps)
    except (ValueError, SequenceExhausted) as e:
        raise HTTPException(status_code=400, detail=str(e))
    return trace_to_dict(trace)


@router.post("/verify")
def verificar(body: VerifyRequest):
    cfg = _config("verify", body)
    try:
        tm, compiled = compile_from(cfg)
        # el oráculo corre tm_steps pasos aunque el budget pedido sea chico
        _check_budget(default_budget(compiled.construction_id, cfg.tm_steps, compiled.gap))
        budget = cfg.budget or default_budget(compiled.construction_id, cfg.tm_steps,
                                              compiled.gap, cfg.slack)
        _check_budget(budget)
        seq = parse_sequence(cfg.sequence_spec(), seed=cfg.seed, allow_files=False)
        report = verify(tm, cfg.input, compiled, seq, cfg.tm_steps, budget=budget,
                        match=cfg.match, scatter=scatter_from(cfg), seq_label=seq.spec)
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))

    db = _db()
    try:
        row = save_report(db, report)
        data = report.to_dict()
        data["id"] = row.id
        return data
    except Exception as e:
        db.rollback()
        logger.exception("No se pudo guardar la verificación: %s", e)
        raise HTTPException(status_code=500, detail="could not store the report")
    finally:
        db.close()


@router.post("/analyze")
def analizar(body: AnalyzeRequest):
    _check_budget(body.prefix)
    try:
        seq = parse_sequence(body.seq, seed=body.seed, allow_files=False)
        return analyze(seq, body.prefix, tuple(body.window)).to_dict()
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))


@router.post("/bench")
def medir(body: BenchRequest):
    cfg = _config("bench", body)
    try:
        tm, compiled = compile_from(cfg)
        _check_budget(default_budget(compiled.construction_id, cfg.t_max, compiled.gap,
                                     max(cfg.slack, 1.0)))
        seq = parse_sequence(cfg.sequence_spec(), seed=cfg.seed, allow_files=False)
        rows = bench(tm, cfg.input, compiled, seq, cfg.t_min, cfg.t_max, slack=cfg.slack,
                     scatter=scatter_from(cfg), match=cfg.match, seq_label=seq.spec)
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))

    bench_id = uuid.uuid4().hex[:12]
    db = _db()
    try:
        save_bench(db, bench_id, tm.name, rows)
    except Exception as e:
        db.rollback()
        logger.exception("No se pudo guardar el bench: %s", e)
        raise HTTPException(status_code=500, detail="could not store the bench")
    finally:
        db.close()
    return {"bench_id": bench_id, "rows": [r.to_dict() for r in rows]}


@router.get("/bench/{bench_id}.xlsx")
def exportar_bench(bench_id: str):
    db = _db()
    try:
        rows = (
            db.query(BenchRow)
            .filter(BenchRow.bench_id == bench_id)
            .order_by(BenchRow.T.asc())
            .all()
        )
        if not rows:
            raise HTTPException(status_code=404, detail="bench not found")
        data = bench_xlsx([r.to_dict() for r in rows], title=f"bench {bench_id}")
    finally:
        db.close()
    return Response(
        content=data,
        media_type="application/vnd.openxmlformats-officedocument.spreadsheetml.sheet",
        headers={"Content-Disposition": f'attachment; filename="bench_{bench_id}.xlsx"'},
    )


@router.get("/runs")
def historial(limit: int = 50):
    db = _db()
    try:
        runs = (
            db.query(VerificationRun)
            .order_by(VerificationRun.created_at.desc(), VerificationRun.id.desc())
            .limit(max(1, min(limit, 500)))
            .all()
        )
        return [r.to_dict() for r in runs]
    finally:
        db.close()


# ─── Página de traza ────────────────────────────────────────────
@pages.get("/traza", response_class=HTMLResponse)
def pagina_traza(request: Request, tm: str = "zigzag", input: str = "", construction: int = 1,
                 gap: str = "", seq: str = "", steps: int = 20):
    diagram = None
    error = None
    try:
        gap_value = int(gap) if gap.strip() else None
        cfg = _config("run", RunRequest(tm=tm, input=input, construction=construction,
                                        gap=gap_value, seq=seq or None, steps=steps))
        _check_budget(max(cfg.steps, 0))
        _, compiled = compile_from(cfg)
        sequence = parse_sequence(cfg.sequence_spec(), allow_files=False)
        trace = evolve(compiled.initial(cfg.input, scatter_from(cfg)), compiled.rule,
                       sequence, max(cfg.steps, 0))
        diagram = render_ascii(trace)
    except HTTPException as e:
        error = e.detail
    except (ValueError, SequenceExhausted) as e:
        error = str(e)

    return templates.TemplateResponse(
        request,
        "traza.html",
        {
            "request": request,
            "tm": tm,
            "input": input,
            "construction": construction,
            "gap": gap,
            "seq": seq,
            "steps": steps,
            "diagram": diagram,
            "error": error,
        },
    )
