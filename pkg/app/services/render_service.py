# ══════════════════════════════════════════════════════════
# app/services/render_service.py
# Salidas: diagrama espacio-tiempo ASCII, traza JSON, reportes
# de verificación, análisis de secuencias y filas de bench
# (CSV y hoja de cálculo).
# ══════════════════════════════════════════════════════════

import csv
import io
import json
import logging
import os
from typing import Iterable, List, Optional, Tuple

from openpyxl import Workbook
from openpyxl.styles import Font

from app.services.aca_service import ACATrace, Lattice, ProductSymbol, window_of
from app.services.sequence_service import SeqAnalysis
from app.services.verifier_service import BenchPoint, SimulationReport

logger = logging.getLogger("acapro.render")

ANSI_REVERSE = "\033[7m"
ANSI_BOLD = "\033[1m"
ANSI_RESET = "\033[0m"

BENCH_COLUMNS = ("T", "tprime", "bound", "ok", "construction", "seq")


def color_enabled(stream=None) -> bool:
    if os.environ.get("ACA_COLOR", "1") == "0":
        return False
    return bool(stream is not None and getattr(stream, "isatty", lambda: False)())


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False)


# ─── Diagrama espacio-tiempo ────────────────────────────────────
def render_cell(sym: ProductSymbol, active: bool = False, color: bool = False) -> str:
    """[σ] marca de cabeza, (σ) recién escrita, ' . ' inactiva."""
    if sym.ctl == 3:
        text = " . "
    elif sym.ctl == 1:
        text = f"[{sym.gamma}]"
    elif sym.ctl == 0:
        text = f"({sym.gamma})"
    else:
        text = f" {sym.gamma} "
    if color and active:
        return f"{ANSI_REVERSE}{text}{ANSI_RESET}"
    if color and sym.ctl == 1:
        return f"{ANSI_BOLD}{text}{ANSI_RESET}"
    return text


def render_ascii(trace: ACATrace, window: Optional[Tuple[int, int]] = None,
                 color: bool = False) -> str:
    if window is None:
        window = window_of(trace.initial, trace.final, margin=1) or (-1, 1)
    lo, hi = window
    header = " " * 13 + "|" + "".join(f"{i:^3}" for i in range(lo, hi + 1))
    lines = [header.rstrip()]
    lattice = Lattice(trace.initial)
    updates = iter(trace.updates)
    nxt = next(updates, None)

    def row(k: int, pos: Optional[int]) -> str:
        cells = "".join(
            render_cell(lattice.at(i), active=(i == pos), color=color)
            for i in range(lo, hi + 1)
        )
        where = "" if pos is None else str(pos)
        return f"{k:>7} {where:>5}|" + cells

    lines.append(row(0, None))
    for k, pos in enumerate(trace.positions, start=1):
        while nxt is not None and nxt.t == k:
            lattice.set(nxt.pos, nxt.new)
            nxt = next(updates, None)
        lines.append(row(k, pos))
    return "\n".join(lines) + "\n"


# ─── Traza JSON / CSV ───────────────────────────────────────────
def _cfg_dict(cfg) -> dict:
    return {"lo": cfg.lo, "cells": [s.as_list() for s in cfg.cells]}


def trace_to_dict(trace: ACATrace) -> dict:
    span = window_of(trace.initial, trace.final) or (trace.initial.lo, trace.initial.lo - 1)
    out = {
        "window": list(span),
        "background": trace.initial.background[0].as_list(),
    }
    if trace.initial.period > 1:
        out["background_period"] = [s.as_list() for s in trace.initial.background]
    out.update({
        "initial": _cfg_dict(trace.initial),
        "positions": list(trace.positions),
        "updates": [
            {"t": u.t, "pos": u.pos, "old": u.old.as_list(), "new": u.new.as_list()}
            for u in trace.updates
        ],
        "final": _cfg_dict(trace.final),
    })
    return out


def trace_to_csv(trace: ACATrace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "pos", "old_gamma", "old_state", "old_dir", "old_ctl",
                "new_gamma", "new_state", "new_dir", "new_ctl"])
    for u in trace.updates:
        w.writerow([u.t, u.pos, *u.old, *u.new])
    return buf.getvalue()


# ─── Reportes de verificación ───────────────────────────────────
def report_text(report: SimulationReport) -> str:
    lines = [
        f"verdict: {report.verdict.value}",
        f"machine: {report.machine}  input: {report.input or 'ε'}  "
        f"construction: {report.construction_id}"
        + (f"  gap: {report.gap}" if report.gap else ""),
        f"sequence: {report.sequence}  match: {report.match_mode}",
        f"tm steps: {report.tm_steps}{' (halted)' if report.halted else ''}",
        f"updates used: {report.budget_used} of {report.budget}",
        f"bound {report.bound_formula} = {report.bound_value}  ok: {report.bound_ok}",
        f"initial_ok: {report.initial_ok}  monotone_ok: {report.monotone_ok}",
    ]
    if report.reason:
        lines.append(f"reason: {report.reason}")
    if report.matches:
        lines.append("matches (t, t'): " + " ".join(f"({t},{k})" for t, k in report.matches))
    return "\n".join(lines) + "\n"


def report_csv(report: SimulationReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "tprime"])
    for t, k in report.matches:
        w.writerow([t, k])
    return buf.getvalue()


# ─── Análisis de secuencias ─────────────────────────────────────
def analysis_text(analysis: SeqAnalysis) -> str:
    a, b = analysis.window
    counts = " ".join(f"{k}:{v}" for k, v in analysis.per_cell_counts.items())
    return (
        f"window: {a}..{b}  prefix: {analysis.prefix_len}\n"
        f"counts: {counts}\n"
        f"min_count: {analysis.min_count}  support_gap: {analysis.support_gap}\n"
    )


def analysis_csv(analysis: SeqAnalysis) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["cell", "count"])
    for k, v in analysis.per_cell_counts.items():
        w.writerow([k, v])
    return buf.getvalue()


# ─── Bench ──────────────────────────────────────────────────────
def _bench_values(row) -> List:
    d = row.to_dict() if isinstance(row, BenchPoint) else dict(row)
    return [d.get(c) for c in BENCH_COLUMNS]


def bench_csv(rows: Iterable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BENCH_COLUMNS)
    for r in rows:
        w.writerow(["" if v is None else v for v in _bench_values(r)])
    return buf.getvalue()


def bench_text(rows: Iterable) -> str:
    out = [f"{'T':>5} {'tprime':>8} {'bound':>8}  ok"]
    for r in rows:
        T, tp, bound, ok, _, _ = _bench_values(r)
        out.append(f"{T:>5} {'-' if tp is None else tp:>8} {bound:>8}  {'yes' if ok else 'NO'}")
    return "\n".join(out) + "\n"


def bench_xlsx(rows: Iterable, title: str = "bench") -> bytes:
    wb = Workbook()
    ws = wb.active
    ws.title = title[:31]
    ws.append(list(BENCH_COLUMNS))
    for cell in ws[1]:
        cell.font = Font(bold=True)
    count = 0
    for r in rows:
        ws.append(_bench_values(r))
        count += 1
    buf = io.BytesIO()
    wb.save(buf)
    logger.debug("bench xlsx with %d rows", count)
    return buf.getvalue()
