"""Seeded simple random walk on the n x n torus, recording first-hit times.

The walker starts at the origin, which counts as hit at time 0. Step ``t``
moves the walker by one lattice unit and the site it lands on is hit at
time ``t`` if it was never occupied before.

Observers
---------
Anything passed in ``observers`` receives every position in time order,
starting with ``(0, origin)``. An observer implements ``observe(time,
position)``; if it also implements ``observe_block(t_first, p0, p1)`` it
is handed whole chunks instead (``p0[i], p1[i]`` is the position at time
``t_first + i``). Observers are called in list order and must not mutate
anything they are given.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ._backend import BACKEND, kernels
from .rng import DIRECTIONS

log = logging.getLogger(__name__)

UNVISITED = np.iinfo(np.uint64).max
TRACE_CHUNK = 1 << 16


@dataclass(frozen=True)
class WalkConfig:
    n: int
    seed: int
    max_steps: int | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"torus side must be >= 1, got {self.n}")
        if not 0 <= self.seed < 1 << 64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.max_steps is not None and self.max_steps < 0:
            raise ValueError("max_steps must be >= 0")


@dataclass
class FirstHitField:
    n: int
    seed: int
    hits: np.ndarray  # uint64, row-major, index x0 * n + x1
    walk_length: int
    covered: bool

    def __eq__(self, other):
        if not isinstance(other, FirstHitField):
            return NotImplemented
        return (self.n == other.n and self.seed == other.seed
                and self.walk_length == other.walk_length
                and self.covered == other.covered
                and np.array_equal(self.hits, other.hits))

    @property
    def cover_time(self) -> int | None:
        if not self.covered:
            return None
        return int(self.hits.max())

    @property
    def visited(self) -> int:
        return int(np.count_nonzero(self.hits != UNVISITED))

    def grid(self) -> np.ndarray:
        return self.hits.reshape(self.n, self.n)

    def truncated(self, t: int) -> "FirstHitField":
        """The field as it stood at time ``t <= walk_length``."""
        if t > self.walk_length:
            raise ValueError("cannot extend a field past its walk length")
        hits = self.hits.copy()
        hits[hits > np.uint64(t)] = UNVISITED
        return FirstHitField(self.n, self.seed, hits, t,
                             bool(np.all(hits != UNVISITED)))


class BudgetExhausted(RuntimeError):
    """Raised by ``run_to_cover`` when ``max_steps`` runs out; carries the partial field."""

    def __init__(self, field: FirstHitField):
        super().__init__(f"step budget {field.walk_length} exhausted before cover "
                         f"({field.n * field.n - field.visited} sites unvisited)")
        self.field = field


def next_position(current: tuple[int, int], direction: int, n: int) -> tuple[int, int]:
    d0, d1 = DIRECTIONS[direction & 3]
    return (current[0] + d0) % n, (current[1] + d1) % n


@dataclass
class _State:
    n: int
    seed: int
    hits: np.ndarray
    x0: int = 0
    x1: int = 0
    t: int = 0
    remaining: int = 0
    observers: Sequence = field(default_factory=tuple)

    @classmethod
    def start(cls, n, seed, observers):
        hits = np.full(n * n, UNVISITED, dtype=np.uint64)
        hits[0] = 0
        st = cls(n, seed, hits, remaining=n * n - 1, observers=tuple(observers))
        for ob in st.observers:
            ob.observe(0, (0, 0))
        return st

    def run(self, t_stop, stop_at_cover):
        if not self.observers:
            self.x0, self.x1, self.t, self.remaining = kernels.advance(
                self.hits, self.n, self.seed, self.x0, self.x1, self.t,
                self.remaining, t_stop, stop_at_cover)
            return
        tr0 = np.empty(TRACE_CHUNK, dtype=np.int32)
        tr1 = np.empty(TRACE_CHUNK, dtype=np.int32)
        while self.t < t_stop and not (stop_at_cover and self.remaining == 0):
            t_first = self.t + 1
            stop = min(t_stop, self.t + TRACE_CHUNK)
            self.x0, self.x1, self.t, self.remaining = kernels.advance(
                self.hits, self.n, self.seed, self.x0, self.x1, self.t,
                self.remaining, stop, stop_at_cover, tr0, tr1)
            span = self.t - t_first + 1
            _dispatch(self.observers, t_first, tr0[:span], tr1[:span])

    def field(self):
        return FirstHitField(self.n, self.seed, self.hits, self.t, self.remaining == 0)


def _dispatch(observers, t_first, p0, p1):
    for ob in observers:
        block = getattr(ob, "observe_block", None)
        if block is not None:
            block(t_first, p0, p1)
        else:
            for i in range(len(p0)):
                ob.observe(t_first + i, (int(p0[i]), int(p1[i])))


def run_to_cover(cfg: WalkConfig, observers: Iterable = ()) -> FirstHitField:
    """Walk until every site is visited; ``walk_length`` is then the cover time."""
    st = _State.start(cfg.n, cfg.seed, observers)
    budget = UNVISITED if cfg.max_steps is None else cfg.max_steps
    st.run(budget, True)
    if st.remaining:
        raise BudgetExhausted(st.field())
    log.debug("n=%d seed=%d covered at %d (%s)", cfg.n, cfg.seed, st.t, BACKEND)
    return st.field()


def run_to_time(cfg: WalkConfig, t: int, observers: Iterable = ()) -> FirstHitField:
    """Walk exactly ``t`` steps (covering early does not stop the walk)."""
    if t < 0:
        raise ValueError("t must be >= 0")
    st = _State.start(cfg.n, cfg.seed, observers)
    st.run(t, False)
    return st.field()


def replay_positions(n: int, seed: int, steps: int) -> np.ndarray:
    """Positions at times ``0..steps`` as an array of shape ``(steps + 1, 2)``."""
    from .rng import directions

    d = directions(seed, 0, steps)
    out = np.zeros((steps + 1, 2), dtype=np.int64)
    out[1:, 0] = np.cumsum(np.array([1, -1, 0, 0])[d])
    out[1:, 1] = np.cumsum(np.array([0, 0, 1, -1])[d])
    return out % n
