"""Concentric-disc excursion bookkeeping and the combinatorics built on it.

A schedule of radii ``r_0 < r_1 < ... < r_L`` around a center splits the
walk into boundary hits. Boundary ``j`` is the exterior boundary of
``D(center, r_j)``; the walker hits it from inside at the first step with
``|y - center|^2 >= r_j^2`` and from outside at the first step into the
closure of ``D(center, r_j)``. Consecutive hits are always of adjacent
boundaries, and a level-``l`` excursion is a hit of boundary ``l`` from
inside, i.e. a traversal from boundary ``l - 1`` out to boundary ``l``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

FREE_LEVEL_CAP = 12

# event kinds
UP = "up"          # boundary hit from inside: one level-l excursion completed
DOWN = "down"      # boundary hit from outside
ENTER = "enter"    # first boundary hit from a start between boundaries
VISIT = "visit"    # occupancy of the center


class IncompleteLedger(ValueError):
    pass


@dataclass(frozen=True)
class RadiiSchedule:
    """Radii ``r_0..r_L``.

    ``factorial``: ``r_0 = 0`` and ``r_k = (k!)^3`` (kept in log form).
    ``geometric``: ``r_k = r0 * base**k``.
    """

    kind: str
    levels: int
    r0: float = 4.0
    base: float = 2.0

    def __post_init__(self):
        if self.kind not in ("factorial", "geometric"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.levels < 1:
            raise ValueError("need at least one level")
        if self.kind == "geometric" and not (self.base > 1 and self.r0 > 0):
            raise ValueError("geometric schedule needs base > 1 and r0 > 0")

    @classmethod
    def for_torus(cls, n: int, r0: float = 4.0, base: float = 2.0) -> "RadiiSchedule":
        """Geometric schedule with the largest top radius not exceeding ``n/2``."""
        if r0 > n / 2:
            raise ValueError("r0 exceeds n/2")
        L = int(math.floor(math.log((n / 2) / r0, base) + 1e-12))
        return cls("geometric", max(L, 1), r0, base)

    def log_radius(self, k: int) -> float:
        if not 0 <= k <= self.levels:
            raise IndexError(f"level {k} outside 0..{self.levels}")
        if self.kind == "factorial":
            return -math.inf if k == 0 else 3.0 * float(gammaln(k + 1))
        return math.log(self.r0) + k * math.log(self.base)

    def radius(self, k: int) -> float:
        if self.kind == "factorial":
            return 0.0 if k == 0 else float(math.factorial(k) ** 3)
        return self.r0 * self.base ** k

    @property
    def radii(self) -> list[float]:
        return [self.radius(k) for k in range(self.levels + 1)]


def n_target(a: float, k: float) -> float:
    """Excursion target ``3 a k^2 ln k``."""
    if k < 2:
        raise ValueError("targets are defined for k >= 2")
    if not a > 0:
        raise ValueError("a must be positive")
    return 3.0 * a * k * k * math.log(k)


def n_hat(a: float, gamma: float, beta: float, n: int, k: float) -> float:
    """Skewed target interpolating ``gamma^2 n_target(a, beta n)`` and ``n_target(a, n)``."""
    if not 0 < gamma * beta < 1:
        raise ValueError("need 0 < gamma*beta < 1")
    if not beta * n - 1e-9 <= k <= n:
        raise ValueError("need beta*n <= k <= n")
    a_star = a * (1.0 - gamma * beta) ** 2 / (1.0 - beta) ** 2
    shift = (beta - gamma * beta) / (1.0 - gamma * beta) * n
    return 3.0 * a_star * (k - shift) ** 2 * math.log(k)


def _in_closure(d0, d1, r2):
    a, b = abs(d0), abs(d1)
    am, bm = max(a - 1, 0), max(b - 1, 0)
    return a * a + b * b < r2 or am * am + b * b < r2 or a * a + bm * bm < r2


@dataclass
class ExcursionLedger:
    """Counts at the completion of each level's target.

    ``counts[k, l]`` is the number of level-``l`` excursions completed by
    ``completion[k]``, the time of the ``targets[k]``-th level-``k``
    excursion; ``counts[k, 0]`` holds center visits before that time.
    Entries of unreached levels are -1.
    """

    center: tuple
    schedule: RadiiSchedule
    a: float
    targets: np.ndarray
    counts: np.ndarray
    completion: np.ndarray

    @classmethod
    def empty(cls, center, schedule, a):
        L = schedule.levels
        targets = np.zeros(L + 1, dtype=np.int64)
        for k in range(2, L + 1):
            targets[k] = math.ceil(n_target(a, k))
        return cls(tuple(center), schedule, a, targets,
                   np.full((L + 1, L + 1), -1, dtype=np.int64),
                   np.full(L + 1, -1, dtype=np.int64))

    def complete_through(self, k: int) -> bool:
        return bool(self.completion[k] >= 0)

    def to_json(self) -> str:
        s = self.schedule
        return json.dumps({
            "center": list(self.center),
            "schedule": {"kind": s.kind, "levels": s.levels, "r0": s.r0, "base": s.base},
            "a": self.a,
            "targets": self.targets.tolist(),
            "counts": self.counts.tolist(),
            "completion_times": self.completion.tolist(),
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExcursionLedger":
        d = json.loads(text)
        return cls(tuple(d["center"]), RadiiSchedule(**d["schedule"]), d["a"],
                   np.array(d["targets"], dtype=np.int64),
                   np.array(d["counts"], dtype=np.int64),
                   np.array(d["completion_times"], dtype=np.int64))


class CrossingMachine:
    """Online boundary-hit tracker for one center; usable as a walk observer.

    Events are ``(time, kind, level)`` tuples with kind ``up``, ``down``,
    ``enter`` or ``visit`` (level 0 for visits). If ``a`` is given, an
    ``ExcursionLedger`` is filled in as targets are reached.
    """

    def __init__(self, n: int, center, schedule: RadiiSchedule, a: float | None = None,
                 keep_log: bool = True):
        radii = schedule.radii
        if radii[-1] > n / 2:
            raise ValueError("top radius exceeds n/2")
        self.n = n
        self.center = (int(center[0]), int(center[1]))
        self.schedule = schedule
        self.r2 = [r * r for r in radii]
        self.L = schedule.levels
        self.current = None
        self.counts = np.zeros(self.L + 1, dtype=np.int64)
        self.visits = 0
        self.keep_log = keep_log
        self.events: list[tuple[int, str, int]] = []
        self._shell = -1
        self.ledger = ExcursionLedger.empty(center, schedule, a) if a is not None else None

    def _delta(self, p):
        n = self.n
        d0 = (p[0] - self.center[0]) % n
        d1 = (p[1] - self.center[1]) % n
        return min(d0, n - d0), min(d1, n - d1)

    def _emit(self, t, kind, level):
        if self.keep_log:
            self.events.append((t, kind, level))

    def observe_block(self, t_first, p0, p1):
        # Only steps where the shell (which radii are exceeded, which closures
        # contain the walker) changes, or the center is occupied, can emit
        # events; everything else is skipped in bulk.
        n = self.n
        a = np.abs(np.asarray(p0, dtype=np.int64) - self.center[0]) % n
        b = np.abs(np.asarray(p1, dtype=np.int64) - self.center[1]) % n
        a = np.minimum(a, n - a)
        b = np.minimum(b, n - b)
        d2 = a * a + b * b
        am, bm = np.maximum(a - 1, 0), np.maximum(b - 1, 0)
        m2 = np.minimum(np.minimum(d2, am * am + b * b), a * a + bm * bm)
        r2 = np.asarray(self.r2)
        shell = np.searchsorted(r2, d2, side="right") * (len(r2) + 1) \
            + np.searchsorted(r2, m2, side="right")
        prev = self._shell
        changed = np.empty(len(shell), dtype=bool)
        if len(shell):
            changed[0] = shell[0] != prev
            changed[1:] = shell[1:] != shell[:-1]
            self._shell = int(shell[-1])
        idx = np.flatnonzero(changed | (d2 == 0)).tolist()
        a, b, d2 = a.tolist(), b.tolist(), d2.tolist()
        step = self._step
        for i in idx:
            step(t_first + i, a[i], b[i], d2[i])

    def observe(self, t, p):
        d0, d1 = self._delta(p)
        self._shell = -1
        self._step(t, d0, d1, d0 * d0 + d1 * d1)

    def _step(self, t, d0, d1, d2):
        if d2 == 0:
            self.visits += 1
            self._emit(t, VISIT, 0)
        c = self.current
        r2 = self.r2
        if c is None:
            for j in range(self.L + 1):
                if d2 >= r2[j] and _in_closure(d0, d1, r2[j]):
                    self.current = j
                    self._emit(t, ENTER, j)
                    break
            return
        if c < self.L and d2 >= r2[c + 1]:
            c += 1
            self.current = c
            self.counts[c] += 1
            self._emit(t, UP, c)
            if self.ledger is not None:
                self._ledger_update(t, c)
        elif c > 0 and _in_closure(d0, d1, r2[c - 1]):
            self.current = c - 1
            self._emit(t, DOWN, c - 1)

    def _ledger_update(self, t, k):
        led = self.ledger
        if k >= 2 and led.completion[k] < 0 and self.counts[k] == led.targets[k]:
            led.completion[k] = t
            led.counts[k, 1:] = self.counts[1:]
            led.counts[k, k:] = -1
            led.counts[k, 0] = self.visits

    def boundary_sequence(self) -> list[int]:
        return boundary_sequence(self.events)

    def events_json(self) -> str:
        return json.dumps({"center": list(self.center),
                           "events": [[t, k, lv] for t, k, lv in self.events]})


def ledger_from_events(events, center, schedule: RadiiSchedule, a: float) -> ExcursionLedger:
    """Rebuild an ``ExcursionLedger`` from a complete event log."""
    led = ExcursionLedger.empty(center, schedule, a)
    counts = np.zeros(schedule.levels + 1, dtype=np.int64)
    visits = 0
    for t, kind, lv in events:
        if kind == VISIT:
            visits += 1
        elif kind == UP:
            counts[lv] += 1
            if lv >= 2 and led.completion[lv] < 0 and counts[lv] == led.targets[lv]:
                led.completion[lv] = t
                led.counts[lv, 1:lv] = counts[1:lv]
                led.counts[lv, 0] = visits
    return led


def boundary_sequence(events) -> list[int]:
    return [lv for _, kind, lv in events if kind in (UP, DOWN, ENTER)]


def offline_events(n, center, schedule, positions, times=None):
    """Brute-force recomputation of the event log from a stored path.

    Works directly from the definitions: at each time it finds which
    boundaries the walker occupies (and whether it is inside each closure),
    and walks the list of hits without any incremental state beyond the
    last boundary hit.
    """
    positions = np.asarray(positions, dtype=np.int64)
    times = np.arange(len(positions)) if times is None else np.asarray(times)
    c = np.asarray(center)
    d = np.abs(positions - c) % n
    d = np.minimum(d, n - d)
    d2 = (d * d).sum(axis=1)
    radii2 = np.array([r * r for r in schedule.radii])
    a, b = d[:, 0], d[:, 1]
    am, bm = np.maximum(a - 1, 0), np.maximum(b - 1, 0)
    m2 = np.minimum(np.minimum(a * a + b * b, am * am + b * b), a * a + bm * bm)
    closure = m2[:, None] < radii2[None, :]
    beyond = d2[:, None] >= radii2[None, :]
    on_boundary = closure & beyond
    events = []
    cur = None
    for i in range(len(positions)):
        t = int(times[i])
        if d2[i] == 0:
            events.append((t, VISIT, 0))
        if cur is None:
            hit = np.flatnonzero(on_boundary[i])
            if len(hit):
                cur = int(hit[0])
                events.append((t, ENTER, cur))
            continue
        if cur + 1 < len(radii2) and beyond[i, cur + 1]:
            cur += 1
            events.append((t, UP, cur))
        elif cur > 0 and closure[i, cur - 1]:
            cur -= 1
            events.append((t, DOWN, cur))
    return events


def history_of(events, lo: int | None = None, hi: int | None = None) -> list[int]:
    """Successive distinct boundaries hit, as level indices.

    With ``lo``/``hi`` the history is restricted to boundaries ``lo-1..hi``,
    starts at the first hit of ``hi - 1`` and stops at the next hit of ``hi``.
    """
    seq = boundary_sequence(events)
    if lo is None and hi is None:
        return seq
    lo = 1 if lo is None else lo
    hi = max(seq) if hi is None else hi
    seq = [s for s in seq if lo - 1 <= s <= hi]
    out = []
    for s in seq:
        if not out or out[-1] != s:
            out.append(s)
    try:
        i = out.index(hi - 1)
    except ValueError:
        return []
    out = out[i:]
    if hi in out:
        out = out[:out.index(hi) + 1]
    return out


def upcrossings(history, lo: int, hi: int) -> dict[int, int]:
    """``m_l`` = number of ``l-1 -> l`` steps in the history, for ``l = lo..hi``."""
    m = {l: 0 for l in range(lo, hi + 1)}
    for u, v in zip(history, history[1:]):
        if v == u + 1 and v in m:
            m[v] += 1
    return m


def _logbinom(N, k):
    if k < 0 or N < k or N < 0:
        return -math.inf
    return float(gammaln(N + 1) - gammaln(k + 1) - gammaln(N - k + 1))


def history_count(m) -> float:
    """Log of the number of histories with up-crossing profile ``m``.

    ``m`` lists ``m_lo, ..., m_hi`` (lowest level first). The count is
    ``prod_l C(m_{l+1} + m_l - 1, m_l)`` over ``l = lo..hi-1``; it vanishes
    (``-inf``) when a level is never crossed but a lower one is.
    """
    m = [int(v) for v in m]
    if any(v < 0 for v in m):
        raise ValueError("up-crossing counts must be nonnegative")
    if m[-1] < 1:
        raise ValueError("the top level must be reached")
    total = 0.0
    for l in range(len(m) - 1):
        lower, upper = m[l], m[l + 1]
        if upper == 0:
            if lower:
                return -math.inf
            continue
        total += _logbinom(upper + lower - 1, lower)
    return total


def crossing_probs(schedule: RadiiSchedule, l: int) -> tuple[float, float]:
    """``(p_l, q_l)``: outward step probability and center-hit probability proxies."""
    if not (2 <= l and l + 1 <= schedule.levels):
        raise IndexError(f"level {l} needs neighbours 1..{schedule.levels}")
    lr = schedule.log_radius
    p = (lr(l + 1) - lr(l)) / (lr(l + 1) - lr(l - 1))
    q = (lr(l) - lr(l - 1)) / lr(l)
    return p, q


def _band(center, half):
    lo = max(math.ceil(center - half), 1)
    hi = math.floor(center + half)
    return list(range(lo, hi + 1))


def q_bar_terms(n: int, a: float, rho: float, schedule: RadiiSchedule | None = None):
    """Ingredients of ``q_bar``: bottom level, bands per free level, top count, p's and q."""
    schedule = schedule or RadiiSchedule("factorial", n + 1)
    lo = max(math.ceil(rho * n), 2)
    if n - lo > FREE_LEVEL_CAP:
        raise ValueError(f"{n - lo} free levels exceeds the cap of {FREE_LEVEL_CAP}")
    if lo >= n:
        raise ValueError("need at least one free level")
    bands = {l: _band(n_target(a, l), l) for l in range(lo, n)}
    top = math.ceil(n_target(a, n))
    p = {l: crossing_probs(schedule, l)[0] for l in range(lo, n)}
    q = crossing_probs(schedule, lo)[1]
    return lo, bands, top, p, q


def _log_factor(l, ml, mup, p):
    return (_logbinom(mup + ml - 1, ml) + ml * math.log(p[l]) + mup * math.log1p(-p[l]))


def q_bar(n: int, a: float, rho: float, schedule: RadiiSchedule | None = None) -> float:
    """Log of the band sum ``q_bar_n`` by dynamic programming over adjacent levels."""
    lo, bands, top, p, q = q_bar_terms(n, a, rho, schedule)
    vals = np.array(bands[lo], dtype=float)
    logv = vals * math.log1p(-q) if q < 1 else np.where(vals == 0, 0.0, -np.inf)
    for l in range(lo, n):
        upper = bands[l + 1] if l + 1 < n else [top]
        new = np.empty(len(upper))
        for j, mu in enumerate(upper):
            terms = [logv[i] + _log_factor(l, ml, mu, p) for i, ml in enumerate(bands[l])]
            new[j] = logsumexp(terms)
        logv = new
    return float(logv[0])


def is_n_successful(ledger: ExcursionLedger, n: int, rho: float | None = None,
                    a: float | None = None) -> bool:
    """Zero center visits before ``R_n`` and ``|N_{n,k} - n_k| <= k`` for ``rho*n <= k < n``."""
    a = ledger.a if a is None else a
    rho = (2.0 - a) / 4.0 if rho is None else rho
    if not 0 < rho < (2.0 - a) / 2.0:
        raise ValueError("need 0 < rho < (2 - a)/2")
    if n >= len(ledger.completion) or not ledger.complete_through(n):
        raise IncompleteLedger(f"ledger not complete through level {n}")
    row = ledger.counts[n]
    if row[0] != 0:
        return False
    for k in range(max(math.ceil(rho * n), 2), n):
        if abs(row[k] - n_target(a, k)) > k:
            return False
    return True


def is_qualified(ledger: ExcursionLedger, n: int, beta: float, gamma: float, a: float,
                 witness_count: int, threshold: float) -> bool:
    """``|N_{n,k} - n_hat_k| <= k`` for ``beta*n <= k < n`` and enough unvisited witnesses."""
    if n >= len(ledger.completion) or not ledger.complete_through(n):
        raise IncompleteLedger(f"ledger not complete through level {n}")
    row = ledger.counts[n]
    for k in range(max(math.ceil(beta * n - 1e-9), 1), n):
        if row[k] < 0:
            raise IncompleteLedger(f"level {k} missing from row {n}")
        if abs(row[k] - n_hat(a, gamma, beta, n, k)) > k:
            return False
    return witness_count >= threshold
