# ══════════════════════════════════════════════════════════
# app/services/verifier_service.py
# Verificación de la simulación estricta y dispersa: corre la
# máquina de Turing como oráculo y el autómata compilado en
# paralelo, mide t'_t, cotas de ralentización y el invariante
# de control de la construcción 1.
# ══════════════════════════════════════════════════════════

import logging
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from app.services.aca_service import ACATrace, Lattice, ProductSymbol
from app.services.construction_service import (FRESH, HEAD, CompiledACA,
                                               ScatterMap)
from app.services.sequence_service import ExplicitSequence, SequenceExhausted, walk_prefixes
from app.services.turing_service import TuringMachine, tape_window, tm_run, word_text

logger = logging.getLogger("acapro.verifier")

MATCH_MODES = ("head", "tape")


class ScatterError(ValueError):
    pass


class ReportError(ValueError):
    pass


class Verdict(str, Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    BUDGET_EXCEEDED = "BUDGET_EXCEEDED"


# ─── Cotas ──────────────────────────────────────────────────────
BOUND_FORMULAS = {
    1: "3/2*(T^2+7/3*T+4/3)",
    2: "1/2*(T^2+3T+2)",
    3: "6p*(T^2+(1+1/(2p))*T)",
}


def bound_value(construction_id: int, T: int, gap: Optional[int] = None) -> int:
    """Valor exacto de la cota de ralentización (siempre entero)."""
    if construction_id == 1:
        return (3 * T + 4) * (T + 1) // 2
    if construction_id == 2:
        return (T + 1) * (T + 2) // 2
    if construction_id == 3:
        p = gap or 1
        return 3 * T * (2 * p * T + 2 * p + 1)
    raise ValueError(f"unknown construction {construction_id}")


def default_budget(construction_id: int, T: int, gap: Optional[int] = None,
                   slack: float = 1.0) -> int:
    if slack <= 0:
        raise ValueError("slack must be > 0")
    return max(1, math.ceil(slack * bound_value(construction_id, T, gap)))


# ─── Reportes ───────────────────────────────────────────────────
@dataclass
class SimulationReport:
    verdict: Verdict
    reason: str = ""
    matches: List[Tuple[int, int]] = field(default_factory=list)
    monotone_ok: bool = True
    initial_ok: bool = True
    budget_used: int = 0
    budget: int = 0
    bound_formula: str = ""
    bound_value: int = 0
    bound_ok: bool = False
    first_unmatched: Optional[int] = None
    tm_steps: int = 0
    halted: bool = False
    construction_id: int = 1
    gap: Optional[int] = None
    match_mode: str = "head"
    machine: str = ""
    input: str = ""
    sequence: str = ""
    final_tape: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.verdict == Verdict.PASS

    def tprime(self, t: int) -> Optional[int]:
        for tt, k in self.matches:
            if tt == t:
                return k
        return None

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "reason": self.reason,
            "matches": [[t, k] for t, k in self.matches],
            "budget_used": self.budget_used,
            "budget": self.budget,
            "bound": {"formula": self.bound_formula, "value": self.bound_value, "ok": self.bound_ok},
            "initial_ok": self.initial_ok,
            "monotone_ok": self.monotone_ok,
            "first_unmatched": self.first_unmatched,
            "tm_steps": self.tm_steps,
            "halted": self.halted,
            "construction": self.construction_id,
            "gap": self.gap,
            "match": self.match_mode,
            "machine": self.machine,
            "input": self.input,
            "sequence": self.sequence,
            "final_tape": self.final_tape,
        }


@dataclass
class SlowdownProfile:
    per_step_cost: List[int]
    leading_coefficient: Optional[float]
    bound_formula: str
    bound_value: int
    bound_ok: bool


@dataclass
class BenchPoint:
    T: int
    tprime: Optional[int]
    bound: int
    ok: bool
    construction: int
    seq: str

    def to_dict(self) -> dict:
        return asdict(self)


# ─── Condición inicial ──────────────────────────────────────────
def _initial_ok(cfg_at, scatter: ScatterMap, a: int, b: int, blank_tape: Tuple[str, ...]) -> Tuple[bool, str]:
    gammas = tuple(cfg_at(scatter(i)).gamma for i in range(a, b + 1))
    if gammas != blank_tape:
        return False, "initial configuration does not project to the input tape"
    b_parts = [tuple(cfg_at(scatter(i)))[1:] for i in range(a, b + 1)]
    counts = Counter(b_parts)
    if len(counts) > 2 or (len(counts) == 2 and min(counts.values()) != 1):
        return False, "control layer of the support is not constant except one cell"
    if scatter.gap > 1:
        off = {
            tuple(cfg_at(pos))[1:]
            for pos in range(scatter(a), scatter(b) + 1)
            if not scatter.is_support(pos)
        }
        if len(off) > 1:
            return False, "off-support cells do not share one control value"
    return True, ""


def _decode(gammas: Sequence[str], blank: str) -> str:
    idx = [j for j, g in enumerate(gammas) if g != blank]
    if not idx:
        return ""
    return word_text(gammas[idx[0]: idx[-1] + 1])


# ─── Verificación ───────────────────────────────────────────────
def verify(tm: TuringMachine, word: Iterable[str], compiled: CompiledACA, seq: Iterable[int],
           tm_steps: int, budget: Optional[int] = None, slack: float = 1.0,
           match: str = "head", scatter: Optional[ScatterMap] = None,
           seq_label: str = "") -> SimulationReport:
    """
    Corre la máquina T pasos y el autómata hasta `budget` actualizaciones.
    t'_t es la primera actualización tras t'_{t−1} en la que la cinta
    proyectada (por psi) coincide con T_t sobre el cono de luz y, en
    modo "head", la marca de cabeza está donde corresponde.
    """
    if match not in MATCH_MODES:
        raise ValueError(f"match must be one of {MATCH_MODES}")
    if tm_steps < 0:
        raise ValueError("tm_steps must be >= 0")
    symbols = tm.check_word(word)
    cid = compiled.construction_id

    if cid == 3:
        scatter = scatter or ScatterMap(compiled.gap)
        if scatter.gap > compiled.radius:
            raise ScatterError(f"gap exceeds radius ({scatter.gap} > {compiled.radius})")
        if scatter.gap < compiled.radius:
            raise ScatterError(f"radius exceeds gap ({compiled.radius} > {scatter.gap})")
    else:
        if scatter is not None and scatter.gap != 1:
            raise ScatterError("constructions 1 and 2 simulate on every cell; gap must be 1")
        scatter = ScatterMap(1)

    run = tm_run(tm, symbols, tm_steps)
    T = run.steps
    blank = tm.blank
    a, b = -tm_steps - 1, len(symbols) + tm_steps + 1
    width = b - a + 1
    targets = [tape_window(c, blank, a, b) for c in run.configs]
    heads = [-1] + run.heads()  # heads[t + 1] = p_t, con p_{−1} = −1

    gap = compiled.gap if cid == 3 else None
    bound = bound_value(cid, T, gap)
    if budget is None:
        budget = default_budget(cid, T, gap, slack)
    if budget < 1:
        raise ValueError("budget must be >= 1")

    report = SimulationReport(
        verdict=Verdict.PASS,
        budget=budget,
        bound_formula=BOUND_FORMULAS[cid],
        bound_value=bound,
        tm_steps=T,
        halted=run.halted,
        construction_id=cid,
        gap=gap,
        match_mode=match,
        machine=tm.name,
        input=word_text(symbols),
        sequence=seq_label or getattr(seq, "spec", ""),
    )

    cfg0 = compiled.initial(symbols, scatter)
    lattice = Lattice(cfg0)
    ok, why = _initial_ok(lattice.at, scatter, a, b, targets[0])
    report.initial_ok = ok
    if not ok:
        report.verdict, report.reason = Verdict.FAIL, why
        return report

    rule = compiled.rule
    lo_pos, hi_pos = scatter(a), scatter(b)
    gamma = [lattice.at(scatter(i)).gamma for i in range(a, b + 1)]
    outside: Set[int] = set()
    ctl0: Set[int] = set()
    ctl1: Set[int] = set()
    for pos, s in lattice.cells.items():
        if s.gamma != blank and not (lo_pos <= pos <= hi_pos and scatter.is_support(pos)):
            outside.add(pos)
        if s.ctl == FRESH:
            ctl0.add(pos)
        elif s.ctl == HEAD:
            ctl1.add(pos)
    single_marker = cid in (1, 3)

    def slot(pos: int) -> Optional[int]:
        if lo_pos <= pos <= hi_pos:
            idx = scatter.index_of(pos)
            if idx is not None:
                return idx - a
        return None

    def head_ok(t: int) -> bool:
        prev, cur = heads[t], heads[t + 1]
        cell = lattice.at(scatter(prev))
        if cell.ctl != HEAD or cell.state != run.configs[t].state:
            return False
        if cell.dir != ("R" if cur > prev else "L"):
            return False
        if single_marker and (ctl0 or len(ctl1) != 1):
            return False
        return True

    def mismatches(t: int) -> int:
        tgt = targets[t]
        return sum(1 for j in range(width) if gamma[j] != tgt[j])

    matches: List[Tuple[int, int]] = [(0, 0)]
    pending: Dict[Tuple[str, ...], List[int]] = {}
    if match == "tape":
        matches = []
        for t, tape in enumerate(targets):
            pending.setdefault(tape, []).append(t)
        for t in pending.pop(tuple(gamma), []):
            matches.append((t, 0))

    current = 1
    mism = mismatches(1) if T >= 1 else 0
    k = 0
    it = iter(seq)
    done = T == 0 if match == "head" else not pending
    exhausted = False
    final_gamma = list(gamma) if T == 0 else None

    while not done and k < budget:
        try:
            pos = next(it)
        except StopIteration:
            exhausted = True
            break
        k += 1
        old, new = lattice.update(pos, rule)
        if old == new:
            continue

        j = slot(pos)
        if j is not None:
            if match == "head":
                tgt = targets[current][j]
                mism += (new.gamma != tgt) - (old.gamma != tgt)
            gamma[j] = new.gamma
        elif new.gamma != blank:
            outside.add(pos)
        else:
            outside.discard(pos)
        if old.ctl != new.ctl:
            _apply_ctl(ctl0, ctl1, pos, old, new)

        if outside:
            continue
        if match == "head":
            if mism == 0 and head_ok(current):
                matches.append((current, k))
                logger.debug("tm step %d reached at update %d", current, k)
                if current == T:
                    final_gamma = list(gamma)
                    done = True
                else:
                    current += 1
                    mism = mismatches(current)
        else:
            hit = pending.pop(tuple(gamma), None)
            if hit:
                matches.extend((t, k) for t in hit)
                if T in hit:
                    final_gamma = list(gamma)
                done = not pending

    report.budget_used = k
    matches.sort()
    report.matches = matches
    matched_ts = {t for t, _ in matches}
    unmatched = [t for t in range(T + 1) if t not in matched_ts]

    if unmatched:
        report.verdict = Verdict.BUDGET_EXCEEDED
        report.first_unmatched = unmatched[0]
        if exhausted:
            report.reason = f"sequence exhausted after {k} updates before tm step {unmatched[0]}"
            logger.warning(report.reason)
        else:
            report.reason = f"tm step {unmatched[0]} not reached within {budget} updates"
        return report

    tprimes = [kk for _, kk in matches]
    report.monotone_ok = all(x < y for x, y in zip(tprimes, tprimes[1:]))
    if not report.monotone_ok:
        bad = next(t for t in range(1, len(tprimes)) if tprimes[t] <= tprimes[t - 1])
        report.verdict = Verdict.FAIL
        report.reason = (
            f"t' not strictly increasing: tm steps {bad - 1} and {bad} both first reached "
            f"at update {tprimes[bad]}"
        )
        return report

    report.final_tape = _decode(final_gamma, blank)
    report.bound_ok = tprimes[-1] <= bound
    logger.info("verify %s/%s construction %d: PASS, t'_%d = %d (bound %d)",
                tm.name, report.input or "ε", cid, T, tprimes[-1], bound)
    return report


def verify_strict(tm: TuringMachine, word: Iterable[str], compiled: CompiledACA,
                  seq: Iterable[int], tm_steps: int, budget: Optional[int] = None,
                  **kwargs) -> SimulationReport:
    if compiled.construction_id not in (1, 2):
        raise ValueError("verify_strict needs construction 1 or 2")
    return verify(tm, word, compiled, seq, tm_steps, budget, **kwargs)


def verify_scattered(tm: TuringMachine, word: Iterable[str], compiled: CompiledACA,
                     scatter: ScatterMap, seq: Iterable[int], tm_steps: int,
                     budget: Optional[int] = None, **kwargs) -> SimulationReport:
    if compiled.construction_id != 3:
        raise ValueError("verify_scattered needs construction 3")
    return verify(tm, word, compiled, seq, tm_steps, budget, scatter=scatter, **kwargs)


# ─── Perfil de ralentización ────────────────────────────────────
def slowdown_profile(report: SimulationReport) -> SlowdownProfile:
    if report.verdict != Verdict.PASS:
        raise ReportError(f"cannot profile a {report.verdict.value} report")
    ts = [t for t, _ in report.matches]
    tps = [k for _, k in report.matches]
    costs = [y - x for x, y in zip(tps, tps[1:])]
    coef = None
    if len(ts) >= 3:
        coef = float(np.polyfit(np.asarray(ts, dtype=float), np.asarray(tps, dtype=float), 2)[0])
    return SlowdownProfile(
        per_step_cost=costs,
        leading_coefficient=coef,
        bound_formula=report.bound_formula,
        bound_value=report.bound_value,
        bound_ok=report.budget_used <= report.bound_value,
    )


# ─── Invariante de control ──────────────────────────────────────
_ALLOWED = {(0, 1), (1, 1), (1, 0)}


def _marker_state_ok(ctl0: Set[int], ctl1: Set[int]) -> bool:
    if (len(ctl0), len(ctl1)) not in _ALLOWED:
        return False
    if ctl0 and ctl1:
        return abs(next(iter(ctl0)) - next(iter(ctl1))) == 1
    return True


def _apply_ctl(ctl0: Set[int], ctl1: Set[int], pos: int,
               old: ProductSymbol, new: ProductSymbol) -> None:
    for s, add in ((old, False), (new, True)):
        bucket = ctl0 if s.ctl == FRESH else ctl1 if s.ctl == HEAD else None
        if bucket is not None:
            (bucket.add if add else bucket.discard)(pos)


def check_construction1_control_invariant(trace: ACATrace) -> bool:
    ctl0 = {p for p, s in trace.initial.non_background().items() if s.ctl == FRESH}
    ctl1 = {p for p, s in trace.initial.non_background().items() if s.ctl == HEAD}
    if not _marker_state_ok(ctl0, ctl1):
        return False
    for u in trace.updates:
        _apply_ctl(ctl0, ctl1, u.pos, u.old, u.new)
        if not _marker_state_ok(ctl0, ctl1):
            logger.info("control invariant broken at update %d (pos %d)", u.t, u.pos)
            return False
    return True


def control_invariant_run(compiled: CompiledACA, word: Iterable[str], seq: Iterable[int],
                          n: int) -> Optional[int]:
    """Igual que el chequeo sobre trazas pero sin guardarlas. Devuelve el primer t que falla."""
    lattice = Lattice(compiled.initial(word))
    ctl0 = {p for p, s in lattice.cells.items() if s.ctl == FRESH}
    ctl1 = {p for p, s in lattice.cells.items() if s.ctl == HEAD}
    if not _marker_state_ok(ctl0, ctl1):
        return 0
    rule = compiled.rule
    it = iter(seq)
    for t in range(1, n + 1):
        try:
            pos = next(it)
        except StopIteration:
            raise SequenceExhausted(f"sequence exhausted after {t - 1} updates") from None
        old, new = lattice.update(pos, rule)
        if old.ctl != new.ctl:
            _apply_ctl(ctl0, ctl1, pos, old, new)
            if not _marker_state_ok(ctl0, ctl1):
                return t
    return None


# ─── Paseos aleatorios y barridos de T ─────────────────────────
def random_walk_successes(tm: TuringMachine, word: Iterable[str], compiled: CompiledACA,
                          tm_steps: int) -> Tuple[int, int]:
    """Cuenta los prefijos de paseo de largo 3T que simulan T pasos dentro de 3T."""
    symbols = tm.check_word(word)
    n = 3 * tm_steps
    successes = total = 0
    for prefix in walk_prefixes(n):
        total += 1
        report = verify(tm, symbols, compiled, ExplicitSequence(prefix), tm_steps, budget=n)
        if report.passed:
            successes += 1
    logger.info("random walk: %d of %d prefixes simulate %d steps", successes, total, tm_steps)
    return successes, total


def bench(tm: TuringMachine, word: Iterable[str], compiled: CompiledACA, seq: Iterable[int],
          t_min: int, t_max: int, slack: float = 1.0, scatter: Optional[ScatterMap] = None,
          match: str = "head", seq_label: str = "") -> List[BenchPoint]:
    """Una sola verificación hasta t_max; una fila por T."""
    if t_min < 0 or t_max < t_min:
        raise ValueError("need 0 <= t_min <= t_max")
    report = verify(tm, word, compiled, seq, t_max, slack=slack, scatter=scatter,
                    match=match, seq_label=seq_label)
    if report.tm_steps < t_max:
        logger.info("machine halts at step %d, bench stops there", report.tm_steps)
    found = dict(report.matches)
    gap = compiled.gap if compiled.construction_id == 3 else None
    rows = []
    for T in range(t_min, report.tm_steps + 1):
        bound = bound_value(compiled.construction_id, T, gap)
        tp = found.get(T)
        rows.append(BenchPoint(
            T=T,
            tprime=tp,
            bound=bound,
            ok=tp is not None and tp <= bound,
            construction=compiled.construction_id,
            seq=report.sequence,
        ))
    return rows
