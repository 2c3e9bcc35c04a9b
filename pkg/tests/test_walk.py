import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latepoints import _fallback, fieldio, oracle
from latepoints._backend import BACKEND
from latepoints.walk import (
    UNVISITED, BudgetExhausted, WalkConfig, next_position, replay_positions,
    run_to_cover, run_to_time,
)

try:
    from latepoints import _kernels
except ImportError:  # pragma: no cover - exercised only without a compiler
    _kernels = None

u64 = st.integers(0, (1 << 64) - 1)


def first_hits_by_replay(n, seed, steps):
    """Independent first-hit field from the replayed path."""
    pos = replay_positions(n, seed, steps)
    flat = pos[:, 0] * n + pos[:, 1]
    hits = np.full(n * n, UNVISITED, dtype=np.uint64)
    sites, first = np.unique(flat, return_index=True)
    hits[sites] = first
    return hits


class Recorder:
    def __init__(self):
        self.times, self.pos = [], []

    def observe(self, t, p):
        self.times.append(t)
        self.pos.append(tuple(p))


class BlockRecorder(Recorder):
    def observe_block(self, t_first, p0, p1):
        for i in range(len(p0)):
            self.observe(t_first + i, (int(p0[i]), int(p1[i])))


# next_position ----------------------------------------------------------

def test_next_position_wraps():
    assert next_position((0, 0), 1, 5) == (4, 0)
    assert next_position((4, 4), 0, 5) == (0, 4)
    assert next_position((4, 4), 2, 5) == (4, 0)


def test_next_position_degenerate_n2():
    assert next_position((0, 0), 0, 2) == next_position((0, 0), 1, 2) == (1, 0)


@given(st.integers(1, 50), st.integers(0, 3), st.integers(0, 49), st.integers(0, 49))
def test_next_position_single_coordinate_move(n, d, a, b):
    p = (a % n, b % n)
    q = next_position(p, d, n)
    moved = [(q[i] - p[i]) % n for i in range(2)]
    assert sum(m != 0 for m in moved) <= 1
    assert all(m in (0, 1, n - 1) for m in moved)


# config -----------------------------------------------------------------

@pytest.mark.parametrize("kw", [dict(n=0, seed=1), dict(n=4, seed=-1), dict(n=4, seed=1 << 64),
                                dict(n=4, seed=1, max_steps=-1)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        WalkConfig(**kw)


# cover runs --------------------------------------------------------------

def test_single_site_torus():
    f = run_to_cover(WalkConfig(1, 9))
    assert f.walk_length == 0 and f.covered and f.hits.tolist() == [0]


def test_n2_cover_time_matches_exact_chain():
    times = np.array([run_to_cover(WalkConfig(2, s)).walk_length for s in range(100_000)])
    exact = oracle.expected_cover_time(2)
    # Z_2^2 is a 4-cycle; cover time of a cycle on k vertices has mean k(k-1)/2
    assert exact == pytest.approx(6.0, abs=1e-12)
    se = times.std(ddof=1) / math.sqrt(len(times))
    assert abs(times.mean() - exact) <= 3 * se


def test_cover_field_invariants():
    f = run_to_cover(WalkConfig(24, 11))
    assert f.covered and f.hits[0] == 0
    assert f.cover_time == f.walk_length == int(f.hits.max())
    assert np.array_equal(f.hits, first_hits_by_replay(24, 11, f.walk_length))
    finite = f.hits[f.hits != UNVISITED]
    assert len(np.unique(finite)) == len(finite)


def test_budget_exhausted_carries_partial_field():
    with pytest.raises(BudgetExhausted) as info:
        run_to_cover(WalkConfig(64, 3, max_steps=500))
    part = info.value.field
    assert part.walk_length == 500 and not part.covered
    assert part == run_to_time(WalkConfig(64, 3), 500)


def test_determinism_bytes():
    a = fieldio.to_bytes(run_to_cover(WalkConfig(40, 77)))
    b = fieldio.to_bytes(run_to_cover(WalkConfig(40, 77)))
    assert a == b


# run_to_time -------------------------------------------------------------

def test_time_zero():
    f = run_to_time(WalkConfig(8, 1), 0)
    assert f.visited == 1 and f.hits[0] == 0 and f.walk_length == 0


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 40), u64, st.integers(0, 5000))
def test_prefix_property(n, seed, t):
    long = run_to_time(WalkConfig(n, seed), 2 * t)
    short = run_to_time(WalkConfig(n, seed), t)
    assert short == long.truncated(t)
    assert short.visited <= long.visited
    assert np.all(short.hits[short.hits != UNVISITED] <= t)
    assert short.hits[0] == 0
    assert short.covered == (short.visited == n * n)


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 30), u64, st.integers(0, 3000))
def test_hits_equal_replay(n, seed, t):
    assert np.array_equal(run_to_time(WalkConfig(n, seed), t).hits,
                          first_hits_by_replay(n, seed, t))


def test_run_to_time_continues_past_cover():
    f = run_to_time(WalkConfig(4, 2), 10_000)
    assert f.covered and f.walk_length == 10_000
    assert f.cover_time == run_to_cover(WalkConfig(4, 2)).walk_length


def test_truncated_rejects_extension():
    f = run_to_time(WalkConfig(4, 2), 10)
    with pytest.raises(ValueError):
        f.truncated(11)


# observers -----------------------------------------------------------------

@pytest.mark.parametrize("cls", [Recorder, BlockRecorder])
def test_observers_see_every_position(cls):
    steps = 200_000  # spans several trace chunks
    rec = cls()
    run_to_time(WalkConfig(50, 5), steps, [rec])
    assert rec.times == list(range(steps + 1))
    assert np.array_equal(np.array(rec.pos), replay_positions(50, 5, steps))


def test_observers_do_not_change_the_field():
    plain = run_to_cover(WalkConfig(20, 8))
    watched = run_to_cover(WalkConfig(20, 8), [BlockRecorder(), Recorder()])
    assert plain == watched


def test_observers_stop_at_cover():
    rec = BlockRecorder()
    f = run_to_cover(WalkConfig(6, 4), [rec])
    assert rec.times[-1] == f.walk_length


# backend parity ------------------------------------------------------------

@pytest.mark.skipif(_kernels is None, reason="compiled kernels not built")
@pytest.mark.parametrize("n,seed,stop,cover", [
    (2, 1, 100, True), (7, 2, 10_000, True), (64, 3, 150_000, False),
    (64, 4, 70_000, True), (1, 5, 10, True), (33, 6, 1, False),
])
def test_backends_agree(n, seed, stop, cover):
    states, fields_, traces = [], [], []
    for mod in (_kernels, _fallback):
        hits = np.full(n * n, UNVISITED, dtype=np.uint64)
        hits[0] = 0
        tr0 = np.zeros(stop, dtype=np.int32)
        tr1 = np.zeros(stop, dtype=np.int32)
        st_ = mod.advance(hits, n, seed, 0, 0, 0, n * n - 1, stop, cover, tr0, tr1)
        states.append(tuple(st_))
        fields_.append(hits)
        traces.append((tr0[:st_[2]].copy(), tr1[:st_[2]].copy()))
    assert states[0] == states[1]
    assert np.array_equal(fields_[0], fields_[1])
    assert all(np.array_equal(a, b) for a, b in zip(traces[0], traces[1]))


@pytest.mark.skipif(_kernels is None, reason="compiled kernels not built")
def test_backends_agree_resumed():
    n, seed = 16, 99
    out = []
    for mod in (_kernels, _fallback):
        hits = np.full(n * n, UNVISITED, dtype=np.uint64)
        hits[0] = 0
        state = (0, 0, 0, n * n - 1)
        for stop in (17, 1000, 1001, 5000):
            state = mod.advance(hits, n, seed, *state, stop, False)
        out.append((tuple(state), hits))
    assert out[0][0] == out[1][0] and np.array_equal(out[0][1], out[1][1])


def test_backend_reported():
    assert BACKEND in ("compiled", "python")
