"""Independent brute-force references shared by the unit and acceptance tests."""
import itertools
import math

import numpy as np
from scipy.special import comb, logsumexp

from latepoints import estimators as est
from latepoints.excursions import q_bar_terms, upcrossings


def make_set(n, pts, alpha=0.5):
    pts = np.asarray(sorted({(int(a) % n, int(b) % n) for a, b in pts}), dtype=np.int64)
    pts = pts.reshape(-1, 2)
    return est.LateSet(n, alpha, 1, pts)


def random_set(rng, n, k):
    flat = rng.choice(n * n, size=min(k, n * n), replace=False)
    return make_set(n, np.stack(np.divmod(flat, n), axis=1))


def brute_dist2(n, a, b):
    d0 = abs(a[0] - b[0]) % n
    d1 = abs(a[1] - b[1]) % n
    d0, d1 = min(d0, n - d0), min(d1, n - d1)
    return d0 * d0 + d1 * d1


def brute_disc(s, center, radius):
    return sum(1 for p in s.points if math.sqrt(brute_dist2(s.n, p, center)) < radius)


def brute_pairs(s, radius):
    p = s.points
    d = np.abs(p[:, None, :] - p[None, :, :]) % s.n
    d = np.minimum(d, s.n - d)
    return int(np.count_nonzero(np.sqrt((d ** 2).sum(-1)) <= radius))


def enumerate_histories(m, lo):
    """Count +-1 level sequences from hi-1 to a final hi with up-crossing profile m.

    Depth-first over every path in lo-1..hi that ends on its m[-1]-th step up
    into hi; a branch is cut once some level has more up-steps than m allows.
    """
    hi = lo + len(m) - 1
    want = dict(zip(range(lo, hi + 1), m))
    count = 0
    stack = [[hi - 1]]
    while stack:
        s = stack.pop()
        up = upcrossings(s, lo, hi)
        if any(up[l] > want[l] for l in up):
            continue
        if up[hi] == want[hi]:
            count += up == want
            continue
        for d in (1, -1):
            v = s[-1] + d
            if lo - 1 <= v <= hi:
                stack.append(s + [v])
    return count


def q_bar_nested(n, a, rho):
    """Direct sum over every band choice; no factorisation."""
    lo, bands, top, p, q = q_bar_terms(n, a, rho)
    levels = list(range(lo, n))
    terms = []
    for ms in itertools.product(*(bands[l] for l in levels)):
        m = dict(zip(levels, ms))
        m[n] = top
        t = m[lo] * math.log1p(-q)
        for l in levels:
            t += math.log(comb(m[l + 1] + m[l] - 1, m[l], exact=True))
            t += m[l] * math.log(p[l]) + m[l + 1] * math.log1p(-p[l])
        terms.append(t)
    return float(logsumexp(terms))
