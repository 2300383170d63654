# ══════════════════════════════════════════════════════════
# app/services/aca_service.py
# Núcleo del autómata celular asíncrono: símbolos producto,
# configuraciones con fondo periódico, regla local, paso
# asíncrono y síncrono, evolución, proyecciones y reindexado.
# ══════════════════════════════════════════════════════════

import logging
from dataclasses import dataclass, field
from typing import (Callable, Dict, Iterable, List, NamedTuple, Optional,
                    Sequence, Tuple)

from app.services.sequence_service import SequenceExhausted

logger = logging.getLogger("acapro.aca")


class ReindexError(ValueError):
    pass


class BackgroundError(ValueError):
    pass


# ─── Símbolos y regla ───────────────────────────────────────────
class ProductSymbol(NamedTuple):
    gamma: str
    state: str
    dir: str
    ctl: int

    def as_list(self) -> list:
        return [self.gamma, self.state, self.dir, self.ctl]


Neighborhood = Tuple[ProductSymbol, ...]

# Alias aceptados por project(); "B" es la parte Q×D×C.
COMPONENTS = {
    "gamma": "gamma", "Γ": "gamma", "G": "gamma",
    "state": "state", "Q": "state",
    "dir": "dir", "D": "dir",
    "ctl": "ctl", "C": "ctl",
    "B": "B",
}


def component_of(sym: ProductSymbol, component: str):
    key = COMPONENTS.get(component)
    if key is None:
        raise ValueError(f"unknown component {component!r}")
    if key == "B":
        return (sym.state, sym.dir, sym.ctl)
    return getattr(sym, key)


@dataclass(frozen=True)
class LocalRule:
    """Regla local de radio r como procedimiento sobre vecindarios de 2r+1 celdas."""
    radius: int
    apply: Callable[[Neighborhood], ProductSymbol] = field(compare=False)
    name: str = ""

    def __post_init__(self):
        if self.radius < 1:
            raise ValueError("radius must be >= 1")

    def __call__(self, neighborhood: Neighborhood) -> ProductSymbol:
        return self.apply(neighborhood)


# ─── Configuración ──────────────────────────────────────────────
@dataclass(frozen=True)
class Configuration:
    """
    Ventana [lo, hi] explícita y fondo periódico: fuera de la ventana
    la celda i vale background[i mod len(background)].
    """
    lo: int
    cells: Tuple[ProductSymbol, ...]
    background: Tuple[ProductSymbol, ...]

    def __post_init__(self):
        if not self.background:
            raise ValueError("background must hold at least one symbol")

    @property
    def hi(self) -> int:
        return self.lo + len(self.cells) - 1

    @property
    def period(self) -> int:
        return len(self.background)

    def background_at(self, i: int) -> ProductSymbol:
        return self.background[i % len(self.background)]

    def at(self, i: int) -> ProductSymbol:
        if self.lo <= i <= self.hi:
            return self.cells[i - self.lo]
        return self.background_at(i)

    def neighborhood(self, i: int, radius: int) -> Neighborhood:
        return tuple(self.at(j) for j in range(i - radius, i + radius + 1))

    def with_cell(self, pos: int, sym: ProductSymbol) -> "Configuration":
        if self.lo <= pos <= self.hi:
            cells = list(self.cells)
            cells[pos - self.lo] = sym
            return Configuration(self.lo, tuple(cells), self.background)
        if sym == self.background_at(pos):
            return self
        if not self.cells:
            return Configuration(pos, (sym,), self.background)
        lo, hi = min(self.lo, pos), max(self.hi, pos)
        cells = [self.at(j) for j in range(lo, hi + 1)]
        cells[pos - lo] = sym
        return Configuration(lo, tuple(cells), self.background)

    def non_background(self) -> Dict[int, ProductSymbol]:
        return {
            self.lo + k: s
            for k, s in enumerate(self.cells)
            if s != self.background_at(self.lo + k)
        }

    def same_as(self, other: "Configuration") -> bool:
        """Igualdad como función de ℤ, independiente de la ventana."""
        if self.period != other.period:
            return False
        if any(self.background_at(k) != other.background_at(k) for k in range(self.period)):
            return False
        return self.non_background() == other.non_background()

    def normalized(self) -> "Configuration":
        nb = self.non_background()
        if not nb:
            return Configuration(0, (), self.background)
        lo, hi = min(nb), max(nb)
        return Configuration(lo, tuple(self.at(j) for j in range(lo, hi + 1)), self.background)


def background_closure_holds(rule: LocalRule, background: Sequence[ProductSymbol]) -> bool:
    """La regla deja fijo el fondo en cada fase del período."""
    bg = tuple(background)
    period = len(bg)
    for phase in range(period):
        nb = tuple(bg[j % period] for j in range(phase - rule.radius, phase + rule.radius + 1))
        if rule(nb) != bg[phase]:
            return False
    return True


def assert_background_closure(rule: LocalRule, cfg: Configuration) -> None:
    if not background_closure_holds(rule, cfg.background):
        raise BackgroundError(f"rule {rule.name or '?'} does not fix the background")


# ─── Motor mutable (camino rápido) ──────────────────────────────
class Lattice:
    """
    Copia mutable de una configuración. Solo guarda las celdas que
    difieren del fondo; la ventana crece con la primera escritura.
    """

    def __init__(self, cfg: Configuration):
        self.background = cfg.background
        self.period = len(cfg.background)
        self.cells: Dict[int, ProductSymbol] = dict(cfg.non_background())
        self.lo = cfg.lo
        self.hi = cfg.hi if cfg.cells else cfg.lo - 1

    def at(self, i: int) -> ProductSymbol:
        s = self.cells.get(i)
        if s is None:
            return self.background[i % self.period]
        return s

    def neighborhood(self, i: int, radius: int) -> Neighborhood:
        get = self.at
        return tuple(get(j) for j in range(i - radius, i + radius + 1))

    def set(self, pos: int, sym: ProductSymbol) -> None:
        if sym == self.background[pos % self.period]:
            self.cells.pop(pos, None)
            return
        self.cells[pos] = sym
        if self.hi < self.lo:
            self.lo = self.hi = pos
        elif pos < self.lo:
            self.lo = pos
        elif pos > self.hi:
            self.hi = pos

    def update(self, pos: int, rule: LocalRule) -> Tuple[ProductSymbol, ProductSymbol]:
        old = self.at(pos)
        new = rule(self.neighborhood(pos, rule.radius))
        if new != old:
            self.set(pos, new)
        return old, new

    def to_configuration(self) -> Configuration:
        if self.hi < self.lo:
            return Configuration(self.lo, (), self.background)
        return Configuration(
            self.lo,
            tuple(self.at(j) for j in range(self.lo, self.hi + 1)),
            self.background,
        )


# ─── Traza ──────────────────────────────────────────────────────
class Update(NamedTuple):
    t: int
    pos: int
    old: ProductSymbol
    new: ProductSymbol


@dataclass(frozen=True)
class ACATrace:
    """positions guarda cada θ_t; updates solo los pasos que cambiaron la celda."""
    initial: Configuration
    positions: Tuple[int, ...]
    updates: Tuple[Update, ...]
    final: Configuration

    @property
    def length(self) -> int:
        return len(self.positions)

    def configuration_at(self, k: int) -> Configuration:
        if not 0 <= k <= self.length:
            raise IndexError(f"time {k} outside trace of length {self.length}")
        lattice = Lattice(self.initial)
        for u in self.updates:
            if u.t > k:
                break
            lattice.set(u.pos, u.new)
        return lattice.to_configuration()

    def replay(self) -> Configuration:
        return self.configuration_at(self.length)


# ─── Operaciones ────────────────────────────────────────────────
def async_step(cfg: Configuration, rule: LocalRule, pos: int) -> Configuration:
    new = rule(cfg.neighborhood(pos, rule.radius))
    if new == cfg.at(pos):
        return cfg
    return cfg.with_cell(pos, new)


def evolve(cfg: Configuration, rule: LocalRule, seq: Iterable[int], n: int) -> ACATrace:
    if n < 0:
        raise ValueError("n must be >= 0")
    lattice = Lattice(cfg)
    positions: List[int] = []
    updates: List[Update] = []
    it = iter(seq)
    for t in range(1, n + 1):
        try:
            pos = next(it)
        except StopIteration:
            raise SequenceExhausted(f"sequence exhausted after {t - 1} updates") from None
        positions.append(pos)
        old, new = lattice.update(pos, rule)
        if old != new:
            updates.append(Update(t, pos, old, new))
    logger.debug("evolve: %d updates, %d effective", n, len(updates))
    return ACATrace(
        initial=cfg,
        positions=tuple(positions),
        updates=tuple(updates),
        final=lattice.to_configuration(),
    )


def sync_step(cfg: Configuration, rule: LocalRule) -> Configuration:
    """Aplica la regla en toda la ventana extendida en r; fuera vale el fondo."""
    r = rule.radius
    if not cfg.cells:
        return cfg
    lo, hi = cfg.lo - r, cfg.hi + r
    cells = tuple(rule(cfg.neighborhood(i, r)) for i in range(lo, hi + 1))
    return Configuration(lo, cells, cfg.background)


def project(cfg: Configuration, component: str, a: int, b: int) -> tuple:
    if a > b:
        raise ValueError("empty range: a must be <= b")
    return tuple(component_of(cfg.at(i), component) for i in range(a, b + 1))


def project_symbols(symbols: Iterable[ProductSymbol], component: str) -> tuple:
    return tuple(component_of(s, component) for s in symbols)


def reindex(cfg: Configuration, psi: Callable[[int], int], a: int, b: int) -> Tuple[ProductSymbol, ...]:
    if a > b:
        raise ValueError("empty range: a must be <= b")
    points = [psi(i) for i in range(a, b + 1)]
    for k in range(1, len(points)):
        if points[k] <= points[k - 1]:
            raise ReindexError(
                f"psi is not strictly increasing: psi({a + k - 1})={points[k - 1]}, "
                f"psi({a + k})={points[k]}"
            )
    return tuple(cfg.at(p) for p in points)


def window_of(*cfgs: Configuration, margin: int = 0) -> Optional[Tuple[int, int]]:
    """Unión de ventanas no vacías, ampliada en margin."""
    spans = [(c.lo, c.hi) for c in cfgs if c.cells]
    if not spans:
        return None
    return min(s[0] for s in spans) - margin, max(s[1] for s in spans) + margin
