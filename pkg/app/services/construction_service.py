# ══════════════════════════════════════════════════════════
# app/services/construction_service.py
# Compila una máquina de Turing en la regla local y la
# configuración inicial de las tres construcciones:
#   1: simulación estricta, radio 1, C = {0,1,2}
#   2: sin seguimiento de cabeza, radio 1, C = {1,2}
#   3: simulación dispersa, radio p, C = {0,1,2,3}
# ══════════════════════════════════════════════════════════

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, List, Optional, Sequence, Tuple

from app.services.aca_service import (Configuration, LocalRule, Neighborhood,
                                      ProductSymbol, assert_background_closure)
from app.services.turing_service import TuringMachine

logger = logging.getLogger("acapro.constructions")

DIRS = ("L", "R")
CTL_VALUES = {1: (0, 1, 2), 2: (1, 2), 3: (0, 1, 2, 3)}

# Control: 0 = celda recién escrita, 1 = marca de cabeza,
# 2 = asentada, 3 = inactiva (solo construcción 3).
FRESH, HEAD, SETTLED, INACTIVE = 0, 1, 2, 3


class ConstructionError(ValueError):
    pass


# ─── Tipos ──────────────────────────────────────────────────────
@dataclass(frozen=True)
class AlphabetSpec:
    gamma: Tuple[str, ...]
    states: Tuple[str, ...]
    dirs: Tuple[str, ...]
    ctl: Tuple[int, ...]

    @property
    def size(self) -> int:
        return len(self.gamma) * len(self.states) * len(self.dirs) * len(self.ctl)

    def symbols(self) -> Iterator[ProductSymbol]:
        for g, q, d, c in itertools.product(self.gamma, self.states, self.dirs, self.ctl):
            yield ProductSymbol(g, q, d, c)

    def to_dict(self) -> dict:
        return {
            "gamma": list(self.gamma),
            "states": list(self.states),
            "dirs": list(self.dirs),
            "ctl": list(self.ctl),
        }


@dataclass(frozen=True)
class Clause:
    name: str
    guard: Callable[[Neighborhood], bool] = field(compare=False)
    output: Callable[[Neighborhood], ProductSymbol] = field(compare=False)


@dataclass(frozen=True)
class ScatterMap:
    """psi(i) = gap·i + offset: inyectiva, creciente, huecos acotados por gap."""
    gap: int
    offset: int = 0

    def __post_init__(self):
        if self.gap < 1:
            raise ConstructionError("scatter gap must be >= 1")

    def __call__(self, i: int) -> int:
        return self.gap * i + self.offset

    def index_of(self, pos: int) -> Optional[int]:
        k, rem = divmod(pos - self.offset, self.gap)
        return k if rem == 0 else None

    def is_support(self, pos: int) -> bool:
        return (pos - self.offset) % self.gap == 0


@dataclass(frozen=True)
class CompiledACA:
    rule: LocalRule
    alphabet: AlphabetSpec
    construction_id: int
    source: TuringMachine
    clauses: Tuple[Clause, ...] = field(compare=False)
    gap: Optional[int] = None
    promote_guard: bool = True

    @property
    def radius(self) -> int:
        return self.rule.radius

    def initial(self, word: Iterable[str], scatter: Optional[ScatterMap] = None) -> Configuration:
        if self.construction_id == 1:
            return construction1_initial(self.source, word)
        if self.construction_id == 2:
            return construction2_initial(self.source, word)
        return construction3_initial(self.source, word, scatter or ScatterMap(self.gap))


def _alphabet(tm: TuringMachine, construction_id: int) -> AlphabetSpec:
    return AlphabetSpec(
        gamma=tm.work_alphabet,
        states=tm.states,
        dirs=DIRS,
        ctl=CTL_VALUES[construction_id],
    )


def _fire(tm: TuringMachine, head: ProductSymbol, target: ProductSymbol, ctl: int) -> ProductSymbol:
    q, sigma, m = tm.delta[(head.state, target.gamma)]
    return ProductSymbol(sigma, q, m, ctl)


def first_match(clauses: Sequence[Clause], nb: Neighborhood) -> ProductSymbol:
    for c in clauses:
        if c.guard(nb):
            return c.output(nb)
    return nb[len(nb) // 2]


def matching_clauses(compiled: CompiledACA, nb: Neighborhood) -> List[str]:
    return [c.name for c in compiled.clauses if c.guard(nb)]


# ─── Construcción 1 ─────────────────────────────────────────────
def _construction1_clauses(tm: TuringMachine, promote_guard: bool) -> Tuple[Clause, ...]:
    def out_fire_left(nb):
        return _fire(tm, nb[0], nb[1], FRESH)

    def out_fire_right(nb):
        return _fire(tm, nb[2], nb[1], FRESH)

    return (
        Clause(
            "fire_right_move",
            lambda nb: nb[0].ctl == HEAD and nb[0].dir == "R" and nb[1].ctl == SETTLED,
            out_fire_left,
        ),
        Clause(
            "demote_right_move",
            lambda nb: nb[1].ctl == HEAD and nb[1].dir == "R" and nb[2].ctl == FRESH,
            lambda nb: nb[1]._replace(dir="R", ctl=SETTLED),
        ),
        Clause(
            "promote_from_left",
            lambda nb: (nb[0].ctl == SETTLED and nb[0].dir == "R" and nb[1].ctl == FRESH
                        and not (promote_guard and nb[2].ctl == HEAD)),
            lambda nb: nb[1]._replace(ctl=HEAD),
        ),
        Clause(
            "fire_left_move",
            lambda nb: nb[2].ctl == HEAD and nb[2].dir == "L" and nb[1].ctl == SETTLED,
            out_fire_right,
        ),
        Clause(
            "demote_left_move",
            lambda nb: nb[1].ctl == HEAD and nb[1].dir == "L" and nb[0].ctl == FRESH,
            lambda nb: nb[1]._replace(dir="L", ctl=SETTLED),
        ),
        Clause(
            "promote_from_right",
            lambda nb: (nb[2].ctl == SETTLED and nb[2].dir == "L" and nb[1].ctl == FRESH
                        and not (promote_guard and nb[0].ctl == HEAD)),
            lambda nb: nb[1]._replace(ctl=HEAD),
        ),
    )


def _construction1_fast(tm: TuringMachine, promote_guard: bool) -> Callable[[Neighborhood], ProductSymbol]:
    """Misma regla que la tabla de cláusulas, ramificada por el control del centro."""
    delta = tm.delta

    def apply(nb: Neighborhood) -> ProductSymbol:
        u, v, z = nb
        c = v.ctl
        if c == SETTLED:
            if u.ctl == HEAD and u.dir == "R":
                q, sigma, m = delta[(u.state, v.gamma)]
                return ProductSymbol(sigma, q, m, FRESH)
            if z.ctl == HEAD and z.dir == "L":
                q, sigma, m = delta[(z.state, v.gamma)]
                return ProductSymbol(sigma, q, m, FRESH)
        elif c == HEAD:
            if v.dir == "R" and z.ctl == FRESH:
                return ProductSymbol(v.gamma, v.state, "R", SETTLED)
            if v.dir == "L" and u.ctl == FRESH:
                return ProductSymbol(v.gamma, v.state, "L", SETTLED)
        elif c == FRESH:
            if u.ctl == SETTLED and u.dir == "R" and not (promote_guard and z.ctl == HEAD):
                return ProductSymbol(v.gamma, v.state, v.dir, HEAD)
            if z.ctl == SETTLED and z.dir == "L" and not (promote_guard and u.ctl == HEAD):
                return ProductSymbol(v.gamma, v.state, v.dir, HEAD)
        return v

    return apply


def construction1(tm: TuringMachine, promote_guard: bool = True) -> CompiledACA:
    """
    Regla estricta de radio 1. Con promote_guard la promoción de la
    celda recién escrita espera a que la marca vieja se haya degradado.
    """
    clauses = _construction1_clauses(tm, promote_guard)
    rule = LocalRule(radius=1, apply=_construction1_fast(tm, promote_guard), name="construction1")
    logger.info("construction1 compiled for %s (guard=%s)", tm.name, promote_guard)
    return CompiledACA(
        rule=rule,
        alphabet=_alphabet(tm, 1),
        construction_id=1,
        source=tm,
        clauses=clauses,
        promote_guard=promote_guard,
    )


def _filler(tm: TuringMachine, ctl: int) -> ProductSymbol:
    return ProductSymbol(tm.blank, tm.states[0], "R", ctl)


def _strict_initial(tm: TuringMachine, word: Iterable[str]) -> Configuration:
    symbols = tm.check_word(word)
    filler = _filler(tm, SETTLED)
    cells = [ProductSymbol(tm.blank, tm.initial, "R", HEAD)]
    cells.extend(filler._replace(gamma=s) for s in symbols)
    return Configuration(lo=-1, cells=tuple(cells), background=(filler,))


def construction1_initial(tm: TuringMachine, word: Iterable[str]) -> Configuration:
    cfg = _strict_initial(tm, word)
    assert_background_closure(construction1(tm).rule, cfg)
    return cfg


# ─── Construcción 2 ─────────────────────────────────────────────
def _construction2_clauses(tm: TuringMachine) -> Tuple[Clause, ...]:
    return (
        Clause(
            "fire_right_move",
            lambda nb: nb[0].ctl == HEAD and nb[0].dir == "R" and nb[2].ctl != HEAD,
            lambda nb: _fire(tm, nb[0], nb[1], HEAD),
        ),
        Clause(
            "fire_left_move",
            lambda nb: nb[2].ctl == HEAD and nb[2].dir == "L" and nb[0].ctl != HEAD,
            lambda nb: _fire(tm, nb[2], nb[1], HEAD),
        ),
    )


def construction2(tm: TuringMachine) -> CompiledACA:
    clauses = _construction2_clauses(tm)

    def apply(nb: Neighborhood) -> ProductSymbol:
        for c in clauses:
            if c.guard(nb):
                return c.output(nb)
        v = nb[1]
        return v if v.ctl == SETTLED else v._replace(ctl=SETTLED)

    logger.info("construction2 compiled for %s", tm.name)
    return CompiledACA(
        rule=LocalRule(radius=1, apply=apply, name="construction2"),
        alphabet=_alphabet(tm, 2),
        construction_id=2,
        source=tm,
        clauses=clauses,
    )


def construction2_initial(tm: TuringMachine, word: Iterable[str]) -> Configuration:
    cfg = _strict_initial(tm, word)
    assert_background_closure(construction2(tm).rule, cfg)
    return cfg


# ─── Construcción 3 ─────────────────────────────────────────────
def _nearest(nb: Neighborhood, r: int, side: int, ctl: int) -> Optional[ProductSymbol]:
    """Vecino más cercano con ese control: j_R = min E_R(k) o j_L = max E_L(k)."""
    for k in range(1, r + 1):
        s = nb[r + side * k]
        if s.ctl == ctl:
            return s
    return None


def _construction3_clauses(tm: TuringMachine, r: int, promote_guard: bool) -> Tuple[Clause, ...]:
    def center(nb):
        return nb[r]

    def fire_from(side: int, direction: str):
        def guard(nb):
            h = _nearest(nb, r, side, HEAD)
            return h is not None and h.dir == direction and center(nb).ctl == SETTLED

        def output(nb):
            return _fire(tm, _nearest(nb, r, side, HEAD), center(nb), FRESH)

        return guard, output

    def demote(direction: str, side: int):
        def guard(nb):
            v = center(nb)
            return v.ctl == HEAD and v.dir == direction and _nearest(nb, r, side, FRESH) is not None

        return guard, lambda nb: center(nb)._replace(dir=direction, ctl=SETTLED)

    def promote(side: int, direction: str):
        def guard(nb):
            s = _nearest(nb, r, side, SETTLED)
            if s is None or s.dir != direction or center(nb).ctl != FRESH:
                return False
            return not (promote_guard and _nearest(nb, r, -side, HEAD) is not None)

        return guard, lambda nb: center(nb)._replace(ctl=HEAD)

    specs = (
        ("fire_right_move", fire_from(-1, "R")),
        ("demote_right_move", demote("R", +1)),
        ("promote_from_left", promote(-1, "R")),
        ("fire_left_move", fire_from(+1, "L")),
        ("demote_left_move", demote("L", -1)),
        ("promote_from_right", promote(+1, "L")),
    )
    return tuple(Clause(name, g, o) for name, (g, o) in specs)


def construction3(tm: TuringMachine, gap: int, promote_guard: bool = True) -> CompiledACA:
    if gap < 1:
        raise ConstructionError("construction 3 needs a gap p >= 1")
    clauses = _construction3_clauses(tm, gap, promote_guard)

    def apply(nb: Neighborhood) -> ProductSymbol:
        if nb[gap].ctl == INACTIVE:
            return nb[gap]
        return first_match(clauses, nb)

    logger.info("construction3 compiled for %s with gap %d", tm.name, gap)
    return CompiledACA(
        rule=LocalRule(radius=gap, apply=apply, name=f"construction3(p={gap})"),
        alphabet=_alphabet(tm, 3),
        construction_id=3,
        source=tm,
        clauses=clauses,
        gap=gap,
        promote_guard=promote_guard,
    )


def construction3_initial(tm: TuringMachine, word: Iterable[str], scatter: ScatterMap) -> Configuration:
    """
    psi(−1) lleva la marca de cabeza, psi(0..n−1) la entrada, el resto
    del soporte el relleno asentado y toda otra celda el relleno inactivo.
    """
    symbols = tm.check_word(word)
    support, inactive = _filler(tm, SETTLED), _filler(tm, INACTIVE)
    p = scatter.gap
    background = tuple(
        support if scatter.is_support(k) else inactive for k in range(p)
    )
    lo, hi = scatter(-1), scatter(max(len(symbols), 1) - 1)
    cells = []
    for pos in range(lo, hi + 1):
        idx = scatter.index_of(pos)
        if idx == -1:
            cells.append(ProductSymbol(tm.blank, tm.initial, "R", HEAD))
        elif idx is not None and 0 <= idx < len(symbols):
            cells.append(support._replace(gamma=symbols[idx]))
        else:
            cells.append(background[pos % p])
    cfg = Configuration(lo=lo, cells=tuple(cells), background=background)
    assert_background_closure(construction3(tm, p).rule, cfg)
    return cfg


# ─── Despacho y diagnóstico ─────────────────────────────────────
def compile_tm(tm: TuringMachine, construction_id: int, gap: Optional[int] = None,
               promote_guard: bool = True) -> CompiledACA:
    if construction_id == 3:
        if gap is None:
            raise ConstructionError("construction 3 requires a gap")
        return construction3(tm, gap, promote_guard)
    if gap is not None:
        raise ConstructionError(f"construction {construction_id} takes no gap")
    if construction_id == 1:
        return construction1(tm, promote_guard)
    if construction_id == 2:
        return construction2(tm)
    raise ConstructionError(f"unknown construction {construction_id}, expected 1, 2 or 3")


def all_neighborhoods(compiled: CompiledACA) -> Iterator[Neighborhood]:
    symbols = list(compiled.alphabet.symbols())
    return itertools.product(symbols, repeat=2 * compiled.radius + 1)


def clause_conflicts(compiled: CompiledACA,
                     neighborhoods: Optional[Iterable[Neighborhood]] = None) -> List[dict]:
    """
    Todo vecindario donde aplican dos o más cláusulas. `agree` indica si
    todas dan la misma salida; solo los que no coinciden dependen del orden.
    """
    out = []
    for nb in neighborhoods if neighborhoods is not None else all_neighborhoods(compiled):
        hits = [(c.name, c.output(nb)) for c in compiled.clauses if c.guard(nb)]
        if len(hits) > 1:
            out.append({
                "neighborhood": nb,
                "clauses": [n for n, _ in hits],
                "agree": len({o for _, o in hits}) == 1,
            })
    return out


def conformance_vectors(compiled: CompiledACA, cap: int = 256, stride: int = 97,
                        word: Sequence[str] = ()) -> List[dict]:
    """Vecindarios de la configuración inicial y una muestra fija del producto."""
    r = compiled.radius
    cfg = compiled.initial(word)
    seen = set()
    nbs: List[Neighborhood] = []
    for pos in range(cfg.lo - r, cfg.hi + r + 1):
        nb = cfg.neighborhood(pos, r)
        if nb not in seen:
            seen.add(nb)
            nbs.append(nb)
    for nb in itertools.islice(all_neighborhoods(compiled), 0, stride * cap, stride):
        if len(nbs) >= cap:
            break
        if nb not in seen:
            seen.add(nb)
            nbs.append(nb)
    return [
        {"neighborhood": [s.as_list() for s in nb], "output": compiled.rule(nb).as_list()}
        for nb in nbs
    ]


def rule_manifest(compiled: CompiledACA) -> dict:
    tm = compiled.source
    return {
        "machine": tm.name,
        "construction": compiled.construction_id,
        "radius": compiled.radius,
        "gap": compiled.gap,
        "promote_guard": compiled.promote_guard,
        "alphabet": compiled.alphabet.to_dict(),
        "blank": tm.blank,
        "initial_state": tm.initial,
        "delta": [
            {"state": q, "read": s, "next": q2, "write": s2, "move": m}
            for (q, s), (q2, s2, m) in tm.delta.items()
        ],
        "clauses": [c.name for c in compiled.clauses] + ["otherwise"],
        "test_vectors": conformance_vectors(compiled),
    }
