# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: the torus walk and cell-list pair counting.

Semantics match ``latepoints._fallback`` exactly; see ``latepoints.rng``
for the stream layout.
"""
from libc.stdint cimport uint64_t, int64_t, int32_t
from libc.stdlib cimport malloc, free

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t UNVISITED = 0xFFFFFFFFFFFFFFFFULL


cdef inline uint64_t mix64(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


def advance(uint64_t[::1] hits, int64_t n, uint64_t seed,
            int64_t x0, int64_t x1, uint64_t t, int64_t remaining,
            uint64_t t_stop, bint stop_at_cover,
            int32_t[::1] trace0=None, int32_t[::1] trace1=None):
    """Walk from step ``t`` to at most ``t_stop``; return ``(x0, x1, t, remaining)``."""
    cdef bint tracing = trace0 is not None
    cdef uint64_t word = 0
    cdef uint64_t s, d
    cdef int64_t idx
    cdef Py_ssize_t k = 0
    if tracing and <uint64_t>trace0.shape[0] < t_stop - t:
        raise ValueError("trace buffer shorter than the requested span")
    with nogil:
        if t < t_stop and (t & 31) != 0:
            word = mix64(seed + ((t >> 5) + 1) * GOLDEN)
        while t < t_stop:
            if stop_at_cover and remaining == 0:
                break
            s = t
            if (s & 31) == 0:
                word = mix64(seed + ((s >> 5) + 1) * GOLDEN)
            d = (word >> ((s & 31) << 1)) & 3
            if d == 0:
                x0 += 1
                if x0 == n:
                    x0 = 0
            elif d == 1:
                x0 -= 1
                if x0 < 0:
                    x0 = n - 1
            elif d == 2:
                x1 += 1
                if x1 == n:
                    x1 = 0
            else:
                x1 -= 1
                if x1 < 0:
                    x1 = n - 1
            t += 1
            idx = x0 * n + x1
            if hits[idx] == UNVISITED:
                hits[idx] = t
                remaining -= 1
            if tracing:
                trace0[k] = <int32_t>x0
                trace1[k] = <int32_t>x1
                k += 1
    return x0, x1, t, remaining


cdef inline int64_t wrap_abs(int64_t d, int64_t n) nogil:
    if d < 0:
        d = -d
    if d > n - d:
        d = n - d
    return d


def pair_count(int32_t[::1] p0, int32_t[::1] p1, int64_t n, int64_t r2):
    """Ordered pairs (diagonal included) at wrapped squared distance <= r2."""
    cdef Py_ssize_t npts = p0.shape[0]
    cdef int64_t ir = 1
    while (ir + 1) * (ir + 1) <= r2:
        ir += 1
    cdef int64_t m = n // ir if ir > 0 else n
    if m < 1:
        m = 1
    cdef int64_t ncell = m * m
    cdef int64_t *start = <int64_t *> malloc((ncell + 1) * sizeof(int64_t))
    cdef int64_t *order = <int64_t *> malloc((npts + 1) * sizeof(int64_t))
    cdef int64_t *cellof = <int64_t *> malloc((npts + 1) * sizeof(int64_t))
    cdef int64_t nb[9]
    cdef int64_t total = 0
    cdef Py_ssize_t i, j, a, b, u
    cdef int64_t c, cx, cy, dx, dy, nn, q, e0, e1, cnt
    cdef bint dup
    if start == NULL or order == NULL or cellof == NULL:
        free(start); free(order); free(cellof)
        raise MemoryError()
    try:
        with nogil:
            for c in range(ncell + 1):
                start[c] = 0
            for i in range(npts):
                c = (p0[i] * m // n) * m + (p1[i] * m // n)
                cellof[i] = c
                start[c + 1] += 1
            for c in range(ncell):
                start[c + 1] += start[c]
            # counting sort; cellof[i] becomes the slot of point i
            for i in range(npts):
                c = cellof[i]
                cellof[i] = start[c]
                start[c] += 1
            for i in range(npts):
                order[cellof[i]] = i
            for c in range(ncell, 0, -1):
                start[c] = start[c - 1]
            start[0] = 0
            for c in range(ncell):
                cx = c // m
                cy = c % m
                nn = 0
                for dx in range(-1, 2):
                    for dy in range(-1, 2):
                        q = ((cx + dx + m) % m) * m + ((cy + dy + m) % m)
                        dup = False
                        for u in range(nn):
                            if nb[u] == q:
                                dup = True
                        if not dup:
                            nb[nn] = q
                            nn += 1
                for a in range(start[c], start[c + 1]):
                    i = order[a]
                    cnt = 0
                    for u in range(nn):
                        q = nb[u]
                        for b in range(start[q], start[q + 1]):
                            j = order[b]
                            e0 = wrap_abs(p0[i] - p0[j], n)
                            e1 = wrap_abs(p1[i] - p1[j], n)
                            if e0 * e0 + e1 * e1 <= r2:
                                cnt += 1
                    total += cnt
    finally:
        free(start)
        free(order)
        free(cellof)
    return total
