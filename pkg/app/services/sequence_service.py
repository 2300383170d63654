# ══════════════════════════════════════════════════════════
# app/services/sequence_service.py
# Secuencias de actualización: cuadrática universal, barrido,
# dispersa, paseo aleatorio, explícita, cíclica e inserciones.
# Incluye el parser de especificaciones y el análisis de prefijos.
# ══════════════════════════════════════════════════════════

import itertools
import logging
import pathlib
import re
from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

logger = logging.getLogger("acapro.sequences")

MASK64 = (1 << 64) - 1


class SequenceExhausted(RuntimeError):
    pass


class SequenceError(ValueError):
    pass


# ─── Bloques ────────────────────────────────────────────────────
def block(i: int) -> Tuple[int, ...]:
    """s_i: enteros de −i a i con paso 2."""
    if i < 0:
        raise ValueError("block index must be >= 0")
    return tuple(range(-i, i + 1, 2))


def mix64(seed: int, t: int) -> int:
    z = (seed + (t + 1) * 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


# ─── Secuencias ─────────────────────────────────────────────────
class UpdateSequence:
    """
    Flujo determinista θ_1, θ_2, … . El acceso por índice es 1-based:
    seq[t] es la posición de la actualización número t.
    """

    kind = "abstract"
    finite = False

    def __iter__(self) -> Iterator[int]:
        raise NotImplementedError

    def __getitem__(self, t: int) -> int:
        if t < 1:
            raise IndexError("sequence indices start at 1")
        for k, pos in enumerate(self, start=1):
            if k == t:
                return pos
        raise IndexError(f"finite sequence has no update {t}")

    def prefix(self, n: int) -> List[int]:
        return list(itertools.islice(iter(self), n))

    @property
    def spec(self) -> str:
        return self.kind

    def __repr__(self) -> str:
        return f"<UpdateSequence {self.spec}>"


class QuadraticSequence(UpdateSequence):
    """s_0 (−1) s_0, luego s_i s_{i−1} s_i para i ≥ 1."""

    kind = "quadratic"

    @staticmethod
    def groups() -> Iterator[Tuple[int, ...]]:
        yield (0, -1, 0)
        i = 1
        while True:
            yield block(i) + block(i - 1) + block(i)
            i += 1

    @staticmethod
    def cumulative_length(i: int) -> int:
        """Largo acumulado tras el grupo i (el grupo 0 es s_0 (−1) s_0)."""
        return 3 + 3 * i * (i + 1) // 2 + 2 * i

    def __iter__(self) -> Iterator[int]:
        for g in self.groups():
            yield from g

    def __getitem__(self, t: int) -> int:
        if t < 1:
            raise IndexError("sequence indices start at 1")
        done = 0
        for g in self.groups():
            if t <= done + len(g):
                return g[t - done - 1]
            done += len(g)


class SweepSequence(UpdateSequence):
    """s_0 s_1 s_2 …"""

    kind = "sweep"

    @staticmethod
    def cumulative_length(T: int) -> int:
        return (T * T + 3 * T + 2) // 2

    def __iter__(self) -> Iterator[int]:
        i = 0
        while True:
            yield from block(i)
            i += 1

    def __getitem__(self, t: int) -> int:
        if t < 1:
            raise IndexError("sequence indices start at 1")
        i = 0
        while self.cumulative_length(i) < t:
            i += 1
        start = self.cumulative_length(i - 1) if i > 0 else 0
        return block(i)[t - start - 1]


class ScatteredSequence(UpdateSequence):
    """
    Soporte p·ℤ. El grupo i ≥ 1 son tres barridos de izquierda a
    derecha sobre los índices [−ip, ip], [−2ip, 2ip] y [−3ip, 3ip],
    emitidos como posiciones p·j. Largo del grupo: 12ip + 3.
    """

    kind = "scattered"

    def __init__(self, p: int):
        if p < 1:
            raise SequenceError("scattered gap p must be >= 1")
        self.p = p

    @property
    def spec(self) -> str:
        return f"scattered:p={self.p}"

    def group(self, i: int) -> Tuple[int, ...]:
        p = self.p
        out: List[int] = []
        for k in (1, 2, 3):
            w = k * i * p
            out.extend(p * j for j in range(-w, w + 1))
        return tuple(out)

    def cumulative_length(self, T: int) -> int:
        """6p(T² + (1 + 1/(2p))T) = 6pT² + 6pT + 3T."""
        p = self.p
        return 6 * p * T * T + 6 * p * T + 3 * T

    def __iter__(self) -> Iterator[int]:
        i = 1
        while True:
            yield from self.group(i)
            i += 1

    def __getitem__(self, t: int) -> int:
        if t < 1:
            raise IndexError("sequence indices start at 1")
        i = 1
        while self.cumulative_length(i) < t:
            i += 1
        return self.group(i)[t - self.cumulative_length(i - 1) - 1]


class RandomWalkSequence(UpdateSequence):
    """
    θ_0 = 0 es la actualización 1; luego θ_t = θ_{t−1} + X_t con
    X_t = +1 si el bit 0 de mix64(seed, t) vale 1, y −1 si no.
    """

    kind = "randomwalk"

    def __init__(self, seed: int = 0):
        self.seed = seed & MASK64
        self._cache: List[int] = [0]

    @property
    def spec(self) -> str:
        return f"randomwalk:seed={self.seed}"

    def step(self, t: int) -> int:
        return 1 if mix64(self.seed, t) & 1 else -1

    def __iter__(self) -> Iterator[int]:
        pos, t = 0, 0
        while True:
            yield pos
            t += 1
            pos += self.step(t)

    def __getitem__(self, t: int) -> int:
        if t < 1:
            raise IndexError("sequence indices start at 1")
        cache = self._cache
        while len(cache) < t:
            k = len(cache)
            cache.append(cache[-1] + self.step(k))
        return cache[t - 1]


class ExplicitSequence(UpdateSequence):
    kind = "explicit"
    finite = True

    def __init__(self, positions: Sequence[int]):
        if not positions:
            raise SequenceError("empty sequence")
        self.positions = tuple(int(p) for p in positions)

    @property
    def spec(self) -> str:
        return "explicit:" + ",".join(str(p) for p in self.positions)

    def __len__(self) -> int:
        return len(self.positions)

    def __iter__(self) -> Iterator[int]:
        return iter(self.positions)

    def __getitem__(self, t: int) -> int:
        if not 1 <= t <= len(self.positions):
            raise IndexError(f"finite sequence has no update {t}")
        return self.positions[t - 1]


class CyclicSequence(UpdateSequence):
    kind = "cyclic"

    def __init__(self, positions: Sequence[int]):
        if not positions:
            raise SequenceError("empty sequence")
        self.positions = tuple(int(p) for p in positions)

    @property
    def spec(self) -> str:
        return "cyclic:" + ",".join(str(p) for p in self.positions)

    def __iter__(self) -> Iterator[int]:
        return itertools.cycle(self.positions)

    def __getitem__(self, t: int) -> int:
        if t < 1:
            raise IndexError("sequence indices start at 1")
        return self.positions[(t - 1) % len(self.positions)]


class InsertedSequence(UpdateSequence):
    """
    La base con posiciones extra. Cada inserción (index, pos) va
    después de los primeros `index` elementos de la base. Si la base es
    finita y más corta, las inserciones que sobran van al final en orden.
    """

    kind = "inserted"

    def __init__(self, base: UpdateSequence, insertions: Sequence[Tuple[int, int]]):
        pairs = [(int(i), int(p)) for i, p in insertions]
        for k in range(1, len(pairs)):
            if pairs[k][0] < pairs[k - 1][0]:
                raise SequenceError("insertion indices must be non-decreasing")
        if pairs and pairs[0][0] < 0:
            raise SequenceError("insertion indices must be >= 0")
        self.base = base
        self.insertions = tuple(pairs)
        self.finite = base.finite

    @property
    def spec(self) -> str:
        tail = ",".join(f"{i}:{p}" for i, p in self.insertions)
        return f"inserted:base={self.base.spec}" + (f",{tail}" if tail else "")

    def __iter__(self) -> Iterator[int]:
        pending = list(self.insertions)
        k = 0
        while pending and pending[0][0] == 0:
            yield pending.pop(0)[1]
        for pos in self.base:
            yield pos
            k += 1
            while pending and pending[0][0] == k:
                yield pending.pop(0)[1]
        if pending:
            logger.debug("base ended after %d updates; appending %d insertions", k, len(pending))
        for _, pos in pending:
            yield pos


# ─── Constructores con nombre ───────────────────────────────────
def quadratic_universal() -> QuadraticSequence:
    return QuadraticSequence()


def sweep_sequence() -> SweepSequence:
    return SweepSequence()


def scattered_sequence(p: int) -> ScatteredSequence:
    return ScatteredSequence(p)


def random_walk_sequence(seed: int) -> RandomWalkSequence:
    return RandomWalkSequence(seed)


def insert_noise(base: UpdateSequence, insertions: Sequence[Tuple[int, int]]) -> UpdateSequence:
    if not insertions:
        return base
    return InsertedSequence(base, insertions)


def walk_prefixes(n_updates: int) -> Iterator[Tuple[int, ...]]:
    """Todos los prefijos θ_0..θ_{n−1} de paseos con θ_0 = 0 (2^{n−1})."""
    if n_updates < 1:
        raise ValueError("n_updates must be >= 1")
    for signs in itertools.product((-1, 1), repeat=n_updates - 1):
        yield tuple(itertools.accumulate(signs, initial=0))


# ─── Análisis ───────────────────────────────────────────────────
@dataclass
class SeqAnalysis:
    window: Tuple[int, int]
    prefix_len: int
    per_cell_counts: Dict[int, int]
    min_count: int
    support_gap: Optional[int]
    universality_witness_k: int

    def to_dict(self) -> dict:
        return {
            "window": list(self.window),
            "prefix_len": self.prefix_len,
            "per_cell_counts": {str(k): v for k, v in self.per_cell_counts.items()},
            "min_count": self.min_count,
            "support_gap": self.support_gap,
            "universality_witness_k": self.universality_witness_k,
        }


def analyze(seq: Iterable[int], prefix_len: int, window: Tuple[int, int]) -> SeqAnalysis:
    if prefix_len < 1:
        raise ValueError("prefix_len must be >= 1")
    a, b = window
    if a > b:
        raise ValueError("empty window")
    prefix = list(itertools.islice(iter(seq), prefix_len))
    if len(prefix) < prefix_len:
        logger.warning("sequence ended after %d of %d updates", len(prefix), prefix_len)
    counts = {k: 0 for k in range(a, b + 1)}
    for pos in prefix:
        if a <= pos <= b:
            counts[pos] += 1
    support = [k for k, c in counts.items() if c > 0]
    gap = None
    if len(support) >= 2:
        gap = max(y - x for x, y in zip(support, support[1:]))
    min_count = min(counts.values())
    return SeqAnalysis(
        window=(a, b),
        prefix_len=len(prefix),
        per_cell_counts=counts,
        min_count=min_count,
        support_gap=gap,
        universality_witness_k=min_count,
    )


# ─── Parser de especificaciones ─────────────────────────────────
_PAIR = re.compile(r"^(-?\d+)\s*:\s*(-?\d+)$")
_RANGE = re.compile(r"^(-?\d+)\.\.(-?\d+)$")


def _ints(text: str) -> List[int]:
    """Enteros y rangos a..b. Los errores dan el número de ítem, no el texto leído."""
    out: List[int] = []
    toks = [tok for tok in re.split(r"[,\s]+", text.strip()) if tok]
    for item, tok in enumerate(toks, start=1):
        m = _RANGE.match(tok)
        if m:
            lo, hi = int(m.group(1)), int(m.group(2))
            if lo > hi:
                raise SequenceError(f"empty range at item {item}")
            out.extend(range(lo, hi + 1))
            continue
        try:
            out.append(int(tok))
        except ValueError:
            raise SequenceError(f"item {item} is not an integer") from None
    return out


def _read_ref(ref: str, allow_files: bool) -> str:
    if not allow_files:
        raise SequenceError("file references (@path) are not accepted here")
    path = pathlib.Path(ref[1:])
    if not path.is_file():
        raise SequenceError(f"sequence file not found: {path}")
    text = path.read_text(encoding="utf-8")
    return "\n".join(line.split("#", 1)[0] for line in text.splitlines())


def _list_arg(arg: str, allow_files: bool) -> List[int]:
    return _ints(_read_ref(arg, allow_files) if arg.startswith("@") else arg)


def _pairs(text: str) -> List[Tuple[int, int]]:
    out = []
    toks = [tok.strip() for tok in re.split(r"[,\n]+", text.strip()) if tok.strip()]
    for item, tok in enumerate(toks, start=1):
        m = _PAIR.match(tok) or re.match(r"^(-?\d+)\s+(-?\d+)$", tok)
        if not m:
            raise SequenceError(f"bad insertion at item {item}, expected index:position")
        out.append((int(m.group(1)), int(m.group(2))))
    return out


def _kv(arg: str, key: str) -> str:
    if arg.startswith(key + "="):
        return arg[len(key) + 1:]
    return arg


def parse_sequence(spec: str, seed: Optional[int] = None, allow_files: bool = True) -> UpdateSequence:
    """
    quadratic | sweep | scattered:p=2 | randomwalk:seed=42 |
    explicit:@file | explicit:0,-1,0 | cyclic:0,-1,0,1 | cyclic:-5..5 |
    inserted:base=quadratic,@file | inserted:base=quadratic,3:7,5:-1

    Con allow_files=False las referencias @archivo se rechazan sin abrir nada.
    """
    spec = spec.strip()
    kind, _, arg = spec.partition(":")
    arg = arg.strip()
    try:
        if kind == "quadratic" and not arg:
            return quadratic_universal()
        if kind == "sweep" and not arg:
            return sweep_sequence()
        if kind == "scattered":
            return scattered_sequence(int(_kv(arg, "p") or "1"))
        if kind == "randomwalk":
            value = seed if seed is not None else int(_kv(arg, "seed") or "0")
            return random_walk_sequence(value)
    except ValueError as e:
        if isinstance(e, SequenceError):
            raise
        raise SequenceError(f"bad sequence spec {spec!r}: {e}") from None
    if kind == "explicit" and arg:
        return ExplicitSequence(_list_arg(arg, allow_files))
    if kind == "cyclic" and arg:
        return CyclicSequence(_list_arg(arg, allow_files))
    if kind == "inserted" and arg.startswith("base="):
        base_spec, _, rest = arg[len("base="):].partition(",")
        base = parse_sequence(base_spec, seed=seed, allow_files=allow_files)
        rest = rest.strip()
        pairs = _pairs(_read_ref(rest, allow_files) if rest.startswith("@") else rest)
        return InsertedSequence(base, pairs)
    raise SequenceError(f"bad sequence spec {spec!r}")
