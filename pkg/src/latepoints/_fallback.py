"""Pure-Python twins of the compiled kernels.

The walk is advanced in vectorised chunks: directions for a chunk come
from ``rng.directions``, positions from a cumulative sum, and first visits
from ``np.unique`` over the chunk. Results are identical to
``latepoints._kernels``.
"""
from __future__ import annotations

import numpy as np

from .rng import directions

UNVISITED = np.uint64(np.iinfo(np.uint64).max)
CHUNK = 1 << 16

_D0 = np.array([1, -1, 0, 0], dtype=np.int64)
_D1 = np.array([0, 0, 1, -1], dtype=np.int64)


def advance(hits, n, seed, x0, x1, t, remaining, t_stop, stop_at_cover,
            trace0=None, trace1=None):
    """Walk from step ``t`` to at most ``t_stop``; return ``(x0, x1, t, remaining)``."""
    if trace0 is not None and len(trace0) < t_stop - t:
        raise ValueError("trace buffer shorter than the requested span")
    k = 0
    while t < t_stop:
        if stop_at_cover and remaining == 0:
            break
        span = min(CHUNK, t_stop - t)
        d = directions(seed, t, span)
        p0 = (x0 + np.cumsum(_D0[d])) % n
        p1 = (x1 + np.cumsum(_D1[d])) % n
        idx = p0 * n + p1
        fresh = np.flatnonzero(hits[idx] == UNVISITED)
        sites, first = np.unique(idx[fresh], return_index=True)
        steps = fresh[first]  # offsets within the chunk of each first visit
        if stop_at_cover and len(sites) >= remaining:
            order = np.argsort(steps, kind="stable")
            sites, steps = sites[order][:remaining], steps[order][:remaining]
            span = int(steps[-1]) + 1
        hits[sites] = (t + 1 + steps).astype(np.uint64)
        remaining -= len(sites)
        if trace0 is not None:
            trace0[k:k + span] = p0[:span]
            trace1[k:k + span] = p1[:span]
            k += span
        x0, x1 = int(p0[span - 1]), int(p1[span - 1])
        t += span
    return x0, x1, t, remaining


def pair_count(p0, p1, n, r2):
    """Ordered pairs (diagonal included) at wrapped squared distance <= r2."""
    p0 = np.asarray(p0, dtype=np.int64)
    p1 = np.asarray(p1, dtype=np.int64)
    if len(p0) == 0:
        return 0
    ir = max(int(np.floor(np.sqrt(r2))), 1)
    while (ir + 1) ** 2 <= r2:
        ir += 1
    while ir > 1 and ir * ir > r2:
        ir -= 1
    m = max(n // ir, 1)
    cell = (p0 * m // n) * m + (p1 * m // n)
    order = np.argsort(cell, kind="stable")
    counts = np.bincount(cell, minlength=m * m)
    start = np.concatenate(([0], np.cumsum(counts)))
    s0, s1 = p0[order], p1[order]
    total = 0
    for c in np.flatnonzero(counts):
        cx, cy = divmod(int(c), m)
        a0, a1 = s0[start[c]:start[c + 1]], s1[start[c]:start[c + 1]]
        nbrs = {((cx + dx) % m) * m + (cy + dy) % m for dx in (-1, 0, 1) for dy in (-1, 0, 1)}
        for q in nbrs:
            if counts[q] == 0:
                continue
            b0, b1 = s0[start[q]:start[q + 1]], s1[start[q]:start[q + 1]]
            e0 = np.abs(a0[:, None] - b0[None, :])
            e1 = np.abs(a1[:, None] - b1[None, :])
            e0 = np.minimum(e0, n - e0)
            e1 = np.minimum(e1, n - e1)
            total += int(np.count_nonzero(e0 * e0 + e1 * e1 <= r2))
    return total
