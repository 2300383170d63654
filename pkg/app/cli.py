# ══════════════════════════════════════════════════════════
# app/cli.py — acapro
# Línea de comandos: compile, run, verify, analyze, bench.
# Códigos de salida: 0 PASS, 2 FAIL, 3 BUDGET_EXCEEDED,
# 1 error de uso o de dominio.
# ══════════════════════════════════════════════════════════

import argparse
import logging
import os
import pathlib
import sys
import uuid
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from dotenv import load_dotenv

from app.services.aca_service import evolve
from app.services.construction_service import (ConstructionError, ScatterMap,
                                               compile_tm, rule_manifest)
from app.services.render_service import (analysis_csv, analysis_text,
                                         bench_csv, bench_text, bench_xlsx,
                                         color_enabled, dumps, render_ascii,
                                         report_csv, report_text, trace_to_csv,
                                         trace_to_dict)
from app.services.sequence_service import (SequenceExhausted, analyze,
                                           parse_sequence)
from app.services.turing_service import TMNotHaltedError, resolve_machine
from app.services.verifier_service import Verdict, bench, verify

logger = logging.getLogger("acapro.cli")

EXIT_CODES = {Verdict.PASS: 0, Verdict.FAIL: 2, Verdict.BUDGET_EXCEEDED: 3}
EXIT_ERROR = 1


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse sale con 2; aquí los errores de uso son código 1."""

    def error(self, message):
        raise UsageError(message)


# ─── Configuración ──────────────────────────────────────────────
@dataclass
class CliConfig:
    command: str
    tm: str = "zigzag"
    input: str = ""
    construction: int = 1
    gap: Optional[int] = None
    seq: Optional[str] = None
    steps: int = 20
    tm_steps: int = 10
    budget: Optional[int] = None
    slack: float = 1.0
    format: str = "ascii"
    window: Optional[Tuple[int, int]] = None
    prefix: int = 100
    seed: Optional[int] = None
    match: str = "head"
    out: Optional[str] = None
    save: bool = False
    t_min: int = 1
    t_max: int = 10

    def validate(self) -> "CliConfig":
        if self.construction not in (1, 2, 3):
            raise ConstructionError(f"unknown construction {self.construction}")
        if self.command in ("compile", "run", "verify", "bench"):
            if self.construction == 3 and self.gap is None:
                raise UsageError("construction 3 requires --gap")
            if self.construction in (1, 2) and self.gap is not None:
                raise UsageError(f"construction {self.construction} does not take --gap")
        if self.command == "analyze" and self.seq is None:
            raise UsageError("analyze requires --seq")
        return self

    def sequence_spec(self) -> str:
        if self.seq:
            return self.seq
        return {1: "quadratic", 2: "sweep", 3: f"scattered:p={self.gap}"}[self.construction]


def _window(text: str) -> Tuple[int, int]:
    a, sep, b = text.partition("..")
    try:
        lo, hi = int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must look like a..b, got {text!r}") from None
    if not sep or lo > hi:
        raise argparse.ArgumentTypeError(f"window must look like a..b with a <= b, got {text!r}")
    return lo, hi


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--tm", default="zigzag", help="builtin name or path to a .tm file")
    common.add_argument("--input", default="", help="input word, one character per symbol")
    common.add_argument("--construction", type=int, default=1, choices=(1, 2, 3))
    common.add_argument("--gap", type=int, default=None, help="scatter gap p (construction 3)")
    common.add_argument("--seq", default=None, help="updating sequence spec")
    common.add_argument("--seed", type=int, default=None, help="overrides the seed of randomwalk")
    common.add_argument("--format", default="ascii", choices=("ascii", "json", "csv"))
    common.add_argument("--out", default=None, help="write output to this file")

    parser = _Parser(prog="acapro", description="ACA simulator, compiler and verifier for Turing machines")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("compile", parents=[common], help="emit the rule manifest")

    p_run = sub.add_parser("run", parents=[common], help="evolve the ACA and render the trace")
    p_run.add_argument("--steps", type=int, default=20)
    p_run.add_argument("--window", type=_window, default=None)

    for name, text in (("verify", "check the simulation against the machine"),
                       ("bench", "measure t'_T for a range of T")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--budget", type=int, default=None)
        p.add_argument("--slack", type=float, default=1.0)
        p.add_argument("--match", default="head", choices=("head", "tape"))
        p.add_argument("--save", action="store_true", help="store results in the database")
        if name == "verify":
            p.add_argument("--tm-steps", type=int, default=10)
        else:
            p.add_argument("--t-min", type=int, default=1)
            p.add_argument("--t-max", type=int, default=10)

    p_an = sub.add_parser("analyze", parents=[common], help="per-cell counts of a sequence prefix")
    p_an.add_argument("--prefix", type=int, default=100)
    p_an.add_argument("--window", type=_window, default=(-5, 5))
    return parser


def parse_config(argv: Sequence[str]) -> CliConfig:
    ns = build_parser().parse_args(list(argv))
    fields = {k: v for k, v in vars(ns).items() if k in CliConfig.__dataclass_fields__}
    return CliConfig(**fields).validate()


# ─── Comandos ───────────────────────────────────────────────────
def _emit(text, cfg: CliConfig) -> None:
    if cfg.out:
        path = pathlib.Path(cfg.out)
        if isinstance(text, bytes):
            path.write_bytes(text)
        else:
            path.write_text(text, encoding="utf-8")
        logger.info("wrote %s", path)
    else:
        sys.stdout.write(text)


def compile_from(cfg: CliConfig):
    tm = resolve_machine(cfg.tm)
    return tm, compile_tm(tm, cfg.construction, cfg.gap)


def scatter_from(cfg: CliConfig) -> Optional[ScatterMap]:
    return ScatterMap(cfg.gap) if cfg.construction == 3 else None


def cmd_compile(cfg: CliConfig) -> int:
    _, compiled = compile_from(cfg)
    _emit(dumps(rule_manifest(compiled)) + "\n", cfg)
    return 0


def cmd_run(cfg: CliConfig) -> int:
    if cfg.steps < 0:
        raise UsageError("--steps must be >= 0")
    tm, compiled = compile_from(cfg)
    seq = parse_sequence(cfg.sequence_spec(), seed=cfg.seed)
    trace = evolve(compiled.initial(cfg.input, scatter_from(cfg)), compiled.rule, seq, cfg.steps)
    if cfg.format == "json":
        _emit(dumps(trace_to_dict(trace)) + "\n", cfg)
    elif cfg.format == "csv":
        _emit(trace_to_csv(trace), cfg)
    else:
        color = cfg.out is None and color_enabled(sys.stdout)
        _emit(render_ascii(trace, window=cfg.window, color=color), cfg)
    return 0


def cmd_verify(cfg: CliConfig) -> int:
    tm, compiled = compile_from(cfg)
    spec = cfg.sequence_spec()
    seq = parse_sequence(spec, seed=cfg.seed)
    report = verify(tm, cfg.input, compiled, seq, cfg.tm_steps, budget=cfg.budget,
                    slack=cfg.slack, match=cfg.match, scatter=scatter_from(cfg), seq_label=seq.spec)
    if cfg.format == "json":
        _emit(dumps(report.to_dict()) + "\n", cfg)
    elif cfg.format == "csv":
        _emit(report_csv(report), cfg)
    else:
        _emit(report_text(report), cfg)
    if cfg.save:
        from app.database import SessionLocal, save_report
        db = SessionLocal()
        try:
            save_report(db, report)
        finally:
            db.close()
    return EXIT_CODES[report.verdict]


def cmd_analyze(cfg: CliConfig) -> int:
    seq = parse_sequence(cfg.seq, seed=cfg.seed)
    result = analyze(seq, cfg.prefix, cfg.window or (-5, 5))
    if cfg.format == "json":
        _emit(dumps(result.to_dict()) + "\n", cfg)
    elif cfg.format == "csv":
        _emit(analysis_csv(result), cfg)
    else:
        _emit(analysis_text(result), cfg)
    return 0


def cmd_bench(cfg: CliConfig) -> int:
    tm, compiled = compile_from(cfg)
    seq = parse_sequence(cfg.sequence_spec(), seed=cfg.seed)
    rows = bench(tm, cfg.input, compiled, seq, cfg.t_min, cfg.t_max, slack=cfg.slack,
                 scatter=scatter_from(cfg), match=cfg.match, seq_label=seq.spec)
    if cfg.out and cfg.out.endswith(".xlsx"):
        _emit(bench_xlsx(rows), cfg)
    elif cfg.format == "json":
        _emit(dumps([r.to_dict() for r in rows]) + "\n", cfg)
    elif cfg.format == "csv":
        _emit(bench_csv(rows), cfg)
    else:
        _emit(bench_text(rows), cfg)
    if cfg.save:
        from app.database import SessionLocal, save_bench
        db = SessionLocal()
        try:
            bench_id = uuid.uuid4().hex[:12]
            save_bench(db, bench_id, tm.name, rows)
            logger.info("bench stored as %s", bench_id)
        finally:
            db.close()
    return 0 if all(r.ok for r in rows) else 2


HANDLERS = {
    "compile": cmd_compile,
    "run": cmd_run,
    "verify": cmd_verify,
    "analyze": cmd_analyze,
    "bench": cmd_bench,
}


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    logging.basicConfig(
        level=os.environ.get("ACA_LOG_LEVEL", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
        return HANDLERS[cfg.command](cfg)
    except (ValueError, KeyError, FileNotFoundError, SequenceExhausted, TMNotHaltedError) as e:
        message = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"error: {message}", file=sys.stderr)
        return EXIT_ERROR
