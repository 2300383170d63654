# ══════════════════════════════════════════════════════════
# app/services/turing_service.py
# Máquina de Turing determinista de una cinta: parser del formato
# de texto, paso, corrida y salida. Es el oráculo de la verificación.
# ══════════════════════════════════════════════════════════

import logging
import pathlib
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Tuple

logger = logging.getLogger("acapro.turing")

MOVES = ("L", "R")
MACHINES_DIR = pathlib.Path(__file__).resolve().parent.parent / "machines"
BUILTIN_MACHINES = ("zigzag", "unary-inc", "bin-counter", "palindrome")

Transition = Tuple[str, str, str]  # (estado', símbolo', movimiento)


class TMParseError(ValueError):
    """Error del parser con posición (línea y columna empiezan en 1)."""

    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.message = message
        self.line = line
        self.column = column


class TMNotHaltedError(RuntimeError):
    pass


class InputWordError(ValueError):
    pass


# ─── Tipos ──────────────────────────────────────────────────────
@dataclass(frozen=True)
class TuringMachine:
    name: str
    states: Tuple[str, ...]
    input_alphabet: Tuple[str, ...]
    work_alphabet: Tuple[str, ...]
    blank: str
    delta: Mapping[Tuple[str, str], Transition] = field(hash=False)
    initial: str
    finals: FrozenSet[str] = frozenset()

    def check_word(self, word: Iterable[str]) -> Tuple[str, ...]:
        """
        Una cadena con espacios se separa por espacios ("a1 b2"); sin
        espacios, cada carácter es un símbolo ("1011").
        """
        if isinstance(word, str):
            symbols = tuple(word.split()) if any(c.isspace() for c in word) else tuple(word)
        else:
            symbols = tuple(word)
        for i, s in enumerate(symbols):
            if s not in self.input_alphabet:
                raise InputWordError(
                    f"input symbol {s!r} at position {i} is not in the input alphabet"
                )
        return symbols


@dataclass(frozen=True)
class TMConfiguration:
    """Triple (cinta, estado, cabeza). La cinta guarda solo celdas no blancas."""
    tape: Mapping[int, str] = field(hash=False)
    state: str
    head: int

    def symbol_at(self, i: int, blank: str) -> str:
        return self.tape.get(i, blank)


@dataclass(frozen=True)
class RunTrace:
    configs: Tuple[TMConfiguration, ...]
    halted: bool
    steps_to_halt: Optional[int] = None
    blank: str = "_"

    @property
    def steps(self) -> int:
        return len(self.configs) - 1

    def heads(self) -> List[int]:
        return [c.head for c in self.configs]


# ─── Parser ─────────────────────────────────────────────────────
def _tokens(line: str) -> List[Tuple[str, int]]:
    """Tokens con su columna (1-based). Corta comentarios '#'."""
    out = []
    i, n = 0, len(line)
    while i < n:
        if line[i] == "#":
            break
        if line[i].isspace():
            i += 1
            continue
        j = i
        while j < n and not line[j].isspace() and line[j] != "#":
            j += 1
        out.append((line[i:j], i + 1))
        i = j
    return out


def parse_tm(text: str) -> TuringMachine:
    name = "machine"
    blank: Optional[Tuple[str, int, int]] = None
    inputs: Optional[List[Tuple[str, int, int]]] = None
    work: Optional[List[Tuple[str, int, int]]] = None
    states: Optional[List[Tuple[str, int, int]]] = None
    initial: Optional[Tuple[str, int, int]] = None
    finals: List[Tuple[str, int, int]] = []
    rows = []
    last_line = 0

    for lineno, raw in enumerate(text.splitlines(), start=1):
        toks = _tokens(raw)
        if not toks:
            continue
        last_line = lineno
        head, col = toks[0]
        args = [(t, lineno, c) for t, c in toks[1:]]

        if head == "machine":
            if len(args) != 1:
                raise TMParseError("expected 'machine <name>'", lineno, col)
            name = args[0][0]
        elif head == "blank":
            if len(args) != 1:
                raise TMParseError("expected 'blank <sym>'", lineno, col)
            blank = args[0]
        elif head == "input":
            inputs = args
        elif head == "work":
            work = args
        elif head == "states":
            if not args:
                raise TMParseError("expected at least one state", lineno, col)
            states = args
        elif head == "initial":
            if len(args) != 1:
                raise TMParseError("expected 'initial <id>'", lineno, col)
            initial = args[0]
        elif head == "final":
            finals.extend(args)
        elif head == "delta":
            if len(args) != 6 or args[2][0] != "->":
                raise TMParseError(
                    "expected 'delta <q> <sym> -> <q'> <sym'> <L|R>'", lineno, col
                )
            if args[5][0] not in MOVES:
                raise TMParseError(
                    f"movement must be L or R, got {args[5][0]!r}", lineno, args[5][2]
                )
            rows.append(args)
        else:
            raise TMParseError(f"unknown directive {head!r}", lineno, col)

    for label, value in (("blank", blank), ("input", inputs), ("work", work),
                         ("states", states), ("initial", initial)):
        if value is None:
            raise TMParseError(f"missing '{label}' directive", last_line + 1)

    work_syms = [w for w, _, _ in work]
    state_ids = [s for s, _, _ in states]
    b, b_line, b_col = blank

    if b not in work_syms:
        raise TMParseError("blank symbol missing from work alphabet", b_line, b_col)
    for sym, ln, c in inputs:
        if sym == b:
            raise TMParseError("blank in input alphabet", ln, c)
        if sym not in work_syms:
            raise TMParseError(f"unknown symbol {sym!r} in input alphabet", ln, c)
    if initial[0] not in state_ids:
        raise TMParseError(f"unknown state {initial[0]!r}", initial[1], initial[2])
    for q, ln, c in finals:
        if q not in state_ids:
            raise TMParseError(f"unknown state {q!r}", ln, c)

    delta: Dict[Tuple[str, str], Transition] = {}
    for q, sym, _arrow, q2, sym2, move in rows:
        for s, ln, c in (q, q2):
            if s not in state_ids:
                raise TMParseError(f"unknown state {s!r}", ln, c)
        for s, ln, c in (sym, sym2):
            if s not in work_syms:
                raise TMParseError(f"unknown symbol {s!r}", ln, c)
        key = (q[0], sym[0])
        if key in delta:
            raise TMParseError(f"duplicate delta row for {key}", q[1], q[2])
        delta[key] = (q2[0], sym2[0], move[0])

    missing = [(q, s) for q in state_ids for s in work_syms if (q, s) not in delta]
    if missing:
        q, s = missing[0]
        raise TMParseError(
            f"partial transition function: no delta row for ({q}, {s})",
            last_line + 1,
        )

    tm = TuringMachine(
        name=name,
        states=tuple(state_ids),
        input_alphabet=tuple(i for i, _, _ in inputs),
        work_alphabet=tuple(work_syms),
        blank=b,
        delta=delta,
        initial=initial[0],
        finals=frozenset(q for q, _, _ in finals),
    )
    logger.debug("parsed machine %s: |Q|=%d |Γ|=%d", tm.name, len(tm.states), len(tm.work_alphabet))
    return tm


# ─── Máquinas incluidas ─────────────────────────────────────────
def zigzag_machine() -> TuringMachine:
    """Máquina del zigzag: su cabeza pasa infinitas veces por cada celda."""
    delta = {
        ("q_R", "_"): ("q_L", "1", "L"),
        ("q_R", "0"): ("q_R", "1", "R"),
        ("q_R", "1"): ("q_R", "1", "R"),
        ("q_L", "_"): ("q_R", "0", "R"),
        ("q_L", "0"): ("q_L", "0", "L"),
        ("q_L", "1"): ("q_L", "0", "L"),
    }
    return TuringMachine(
        name="zigzag",
        states=("q_R", "q_L"),
        input_alphabet=("0", "1"),
        work_alphabet=("0", "1", "_"),
        blank="_",
        delta=delta,
        initial="q_R",
        finals=frozenset(),
    )


def load_builtin(name: str) -> TuringMachine:
    if name not in BUILTIN_MACHINES:
        raise KeyError(name)
    return parse_tm((MACHINES_DIR / f"{name}.tm").read_text(encoding="utf-8"))


def resolve_machine(ref: str) -> TuringMachine:
    """Nombre incluido primero, ruta de archivo después."""
    if ref in BUILTIN_MACHINES:
        return load_builtin(ref)
    path = pathlib.Path(ref)
    if not path.is_file():
        raise FileNotFoundError(f"no builtin machine or file named {ref!r}")
    return parse_tm(path.read_text(encoding="utf-8"))


# ─── Evolución ──────────────────────────────────────────────────
def initial_configuration(tm: TuringMachine, word: Iterable[str]) -> TMConfiguration:
    symbols = tm.check_word(word)
    tape = {i: s for i, s in enumerate(symbols) if s != tm.blank}
    return TMConfiguration(tape=tape, state=tm.initial, head=0)


def tm_step(tm: TuringMachine, cfg: TMConfiguration) -> TMConfiguration:
    if cfg.state in tm.finals:
        return cfg
    read = cfg.tape.get(cfg.head, tm.blank)
    q2, written, move = tm.delta[(cfg.state, read)]
    tape = dict(cfg.tape)
    if written == tm.blank:
        tape.pop(cfg.head, None)
    else:
        tape[cfg.head] = written
    return TMConfiguration(
        tape=tape,
        state=q2,
        head=cfg.head + (1 if move == "R" else -1),
    )


def tm_run(tm: TuringMachine, word: Iterable[str], max_steps: int) -> RunTrace:
    if max_steps < 0:
        raise ValueError("max_steps must be >= 0")
    cfg = initial_configuration(tm, word)
    configs = [cfg]
    while len(configs) <= max_steps and cfg.state not in tm.finals:
        cfg = tm_step(tm, cfg)
        configs.append(cfg)
    halted = cfg.state in tm.finals
    steps_to_halt = len(configs) - 1 if halted else None
    return RunTrace(configs=tuple(configs), halted=halted, steps_to_halt=steps_to_halt,
                    blank=tm.blank)


def word_text(symbols: Iterable[str]) -> str:
    """Inversa de check_word: separa con espacios si algún símbolo es largo."""
    symbols = tuple(symbols)
    sep = " " if any(len(s) > 1 for s in symbols) else ""
    return sep.join(symbols)


def tm_output(trace: RunTrace, blank: Optional[str] = None) -> str:
    blank = trace.blank if blank is None else blank
    if not trace.halted:
        raise TMNotHaltedError("the run did not reach a final state")
    tape = trace.configs[-1].tape
    cells = [i for i, s in tape.items() if s != blank]
    if not cells:
        return ""
    return word_text(tape.get(i, blank) for i in range(min(cells), max(cells) + 1))


def tape_window(cfg: TMConfiguration, blank: str, lo: int, hi: int) -> Tuple[str, ...]:
    return tuple(cfg.tape.get(i, blank) for i in range(lo, hi + 1))
