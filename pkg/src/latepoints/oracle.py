"""Exact Markov-chain computations on small planar domains and tori.

Every quantity here comes from a linear solve for the simple random walk
killed on an absorbing set: hitting probabilities, Green's functions,
expected exit and excursion times, exit distributions, and hitting-time
moments. Discs are ``D(0, n) = {z : |z| < n}`` in Z^2 and the boundary of a
set ``A`` is the set of exterior sites adjacent to ``A``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.sparse import linalg as spla

DIRECT_LIMIT = 20_000
CG_RTOL = 1e-12
RESIDUAL_TOL = 1e-10

_STEPS = ((1, 0), (-1, 0), (0, 1), (0, -1))


class SolverFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class DiscreteDomain:
    """Interior/absorbing partition of a finite piece of Z^2 or of a torus.

    ``interior`` and ``boundary`` hold site coordinates (centered at the
    origin for planar domains, in ``[0, K)`` for tori). ``A = I - P_II``
    and ``B = P_IB`` are the sparse blocks of the transition matrix.
    """

    kind: str
    interior: np.ndarray
    boundary: np.ndarray
    A: sp.csr_matrix
    B: sp.csr_matrix
    torus: int | None = None

    def __post_init__(self):
        if len(self.interior) == 0:
            raise ValueError("domain has empty interior")

    def _key(self, pts):
        pts = np.asarray(pts, dtype=np.int64).reshape(-1, 2)
        if self.torus:
            pts = pts % self.torus
        return pts[:, 0] * 1_000_003 + pts[:, 1]

    def _lookup(self, table, pts):
        keys = self._key(table)
        order = np.argsort(keys)
        q = self._key(pts)
        pos = np.searchsorted(keys[order], q)
        pos = np.minimum(pos, len(keys) - 1)
        found = keys[order][pos] == q
        return np.where(found, order[pos], -1)

    def interior_index(self, pts) -> np.ndarray:
        return self._lookup(self.interior, pts)

    def boundary_index(self, pts) -> np.ndarray:
        return self._lookup(self.boundary, pts)


@dataclass
class ChainSolution:
    domain: DiscreteDomain
    values: np.ndarray  # (n_interior,) or (n_interior, k)
    residual: float

    def at(self, x):
        i = int(self.domain.interior_index(x)[0])
        if i < 0:
            raise KeyError(f"{tuple(x)} is not an interior site")
        return self.values[i]


def _build(kind, coords, inside, torus=None):
    """Domain whose interior is ``coords[inside]``; ``coords`` spans a box or a torus."""
    interior = coords[inside]
    ni = len(interior)
    lookup = {}
    for i, (a, b) in enumerate(interior.tolist()):
        lookup[(a, b)] = i
    bnd = {}
    rows_i, cols_i, rows_b, cols_b = [], [], [], []
    for i, (a, b) in enumerate(interior.tolist()):
        for d0, d1 in _STEPS:
            y = (a + d0, b + d1)
            if torus:
                y = (y[0] % torus, y[1] % torus)
            j = lookup.get(y)
            if j is not None:
                rows_i.append(i)
                cols_i.append(j)
            else:
                k = bnd.setdefault(y, len(bnd))
                rows_b.append(i)
                cols_b.append(k)
    P_ii = sp.csr_matrix((np.full(len(rows_i), 0.25), (rows_i, cols_i)), shape=(ni, ni))
    B = sp.csr_matrix((np.full(len(rows_b), 0.25), (rows_b, cols_b)), shape=(ni, len(bnd)))
    A = (sp.identity(ni, format="csr") - P_ii).tocsr()
    boundary = np.array(sorted(bnd, key=bnd.get), dtype=np.int64).reshape(-1, 2)
    return DiscreteDomain(kind, interior, boundary, A, B, torus)


def _box(radius):
    m = int(math.ceil(radius)) + 2
    g = np.arange(-m, m + 1)
    xx, yy = np.meshgrid(g, g, indexing="ij")
    return np.stack([xx.ravel(), yy.ravel()], axis=1)


def _torus_sites(K):
    g = np.arange(K)
    xx, yy = np.meshgrid(g, g, indexing="ij")
    return np.stack([xx.ravel(), yy.ravel()], axis=1)


def _norm2(pts):
    return (pts * pts).sum(axis=1)


def _torus_norm2(pts, K, center=(0, 0)):
    d = np.abs(pts - np.asarray(center)) % K
    d = np.minimum(d, K - d)
    return (d * d).sum(axis=1)


def in_closure(pts, r2):
    """Sites of ``D(0, r)`` together with its exterior boundary (``r2 = r^2``).

    ``pts`` are offsets from the center (already wrapped on a torus).
    """
    a = np.abs(pts[:, 0])
    b = np.abs(pts[:, 1])
    am = np.maximum(a - 1, 0)
    bm = np.maximum(b - 1, 0)
    return (a * a + b * b < r2) | (am * am + b * b < r2) | (a * a + bm * bm < r2)


@lru_cache(maxsize=64)
def disc_domain(n: int, puncture: bool = False) -> DiscreteDomain:
    """``D(0, n)`` in Z^2, optionally with the origin made absorbing."""
    c = _box(n)
    inside = _norm2(c) < n * n
    if puncture:
        inside &= _norm2(c) > 0
    return _build("disc", c, inside)


@lru_cache(maxsize=32)
def annulus_domain(r: int, R: int) -> DiscreteDomain:
    """``D(0, R)`` minus the closure of ``D(0, r)``."""
    c = _box(R)
    inside = (_norm2(c) < R * R) & ~in_closure(c, r * r)
    return _build("annulus", c, inside)


@lru_cache(maxsize=32)
def torus_domain(K: int, absorbing: tuple) -> DiscreteDomain:
    """The K-torus with the listed sites absorbing."""
    c = _torus_sites(K)
    keys = {tuple(p) for p in absorbing}
    inside = np.array([tuple(p) not in keys for p in c.tolist()])
    return _build("torus", c, inside, torus=K)


def solve(A, rhs) -> tuple[np.ndarray, float]:
    """Solve ``A u = rhs`` (``rhs`` 1-D or 2-D); return ``(u, max-norm residual)``."""
    rhs = np.asarray(rhs, dtype=float)
    if A.shape[0] <= DIRECT_LIMIT:
        u = spla.splu(A.tocsc()).solve(rhs)
    else:
        M = spla.LinearOperator(A.shape, matvec=lambda v: v / A.diagonal())
        cols = rhs.reshape(A.shape[0], -1)
        out = np.empty_like(cols)
        for j in range(cols.shape[1]):
            u, info = spla.cg(A, cols[:, j], rtol=CG_RTOL, atol=0.0, M=M, maxiter=100_000)
            if info != 0:
                raise SolverFailure(f"conjugate gradient did not converge (info={info})")
            out[:, j] = u
        u = out.reshape(rhs.shape)
    res = float(np.max(np.abs(A @ u - rhs))) if rhs.size else 0.0
    scale = max(1.0, float(np.max(np.abs(rhs))) if rhs.size else 1.0)
    if not res <= RESIDUAL_TOL * scale:
        raise SolverFailure(f"residual {res:.3g} above tolerance")
    return u, res


@lru_cache(maxsize=64)
def hit_before_exit_solution(n: int) -> ChainSolution:
    """``P^x(T_0 < T_dD(0,n))`` for every ``x`` in the punctured disc."""
    dom = disc_domain(n, puncture=True)
    g = (_norm2(dom.boundary) == 0).astype(float)
    u, res = solve(dom.A, dom.B @ g)
    return ChainSolution(dom, u, res)


def hit_before_exit_prob(n: int, x) -> float:
    if not 0 < _norm2(np.atleast_2d(x))[0] < n * n:
        raise ValueError("need 0 < |x| < n")
    return float(hit_before_exit_solution(n).at(x))


@lru_cache(maxsize=64)
def green_solution(n: int) -> ChainSolution:
    """``G_D(x, 0)``: expected visits to 0 before leaving ``D(0, n)``, from every ``x``."""
    dom = disc_domain(n)
    e0 = np.zeros(len(dom.interior))
    e0[dom.interior_index([0, 0])[0]] = 1.0
    u, res = solve(dom.A, e0)
    return ChainSolution(dom, u, res)


def green_disc(n: int, x) -> float:
    if not 0 < _norm2(np.atleast_2d(x))[0] < n * n:
        raise ValueError("need 0 < |x| < n")
    return float(green_solution(n).at(x))


@lru_cache(maxsize=64)
def exit_time_solution(n: int) -> ChainSolution:
    dom = disc_domain(n)
    u, res = solve(dom.A, np.ones(len(dom.interior)))
    return ChainSolution(dom, u, res)


def expected_exit_time(n: int, x) -> float:
    """``E^x(T_dD(0,n))``."""
    if not _norm2(np.atleast_2d(x))[0] < n * n:
        raise ValueError("need |x| < n")
    return float(exit_time_solution(n).at(x))


def exit_time_bracket(n: int, x) -> tuple[int, int]:
    x2 = int(_norm2(np.atleast_2d(x))[0])
    return n * n - x2, (n + 1) ** 2 - x2


@lru_cache(maxsize=32)
def annulus_solution(r: int, R: int) -> ChainSolution:
    dom = annulus_domain(r, R)
    g = in_closure(dom.boundary, r * r).astype(float)
    u, res = solve(dom.A, dom.B @ g)
    return ChainSolution(dom, u, res)


def annulus_prob(r: int, R: int, x) -> float:
    """``P^x(T_dD(0,r) < T_dD(0,R))``; 1 on the inner boundary, 0 outside ``D(0, R)``."""
    if not r < R:
        raise ValueError("need r < R")
    p = np.atleast_2d(np.asarray(x, dtype=np.int64))
    if _norm2(p)[0] >= R * R:
        return 0.0
    if in_closure(p, r * r)[0]:
        return 1.0
    return float(annulus_solution(r, R).at(x))


@lru_cache(maxsize=16)
def harmonic_measure(n: int) -> ChainSolution:
    """Exit distribution ``H(x, y)`` of ``D(0, n)``: values[i, k] for interior i, boundary k."""
    dom = disc_domain(n)
    u, res = solve(dom.A, dom.B.toarray())
    return ChainSolution(dom, u, res)


def harnack_ratio(n: int, delta: float) -> float:
    """``max |H(x, y) / H(x', y) - 1|`` over ``x, x'`` in ``D(0, delta*n)``, ``y`` on the boundary."""
    if not 0 < delta < 0.5:
        raise ValueError("need 0 < delta < 1/2")
    H = harmonic_measure(n)
    near = _norm2(H.domain.interior) < (delta * n) ** 2
    sub = H.values[near]
    hi, lo = sub.max(axis=0), sub.min(axis=0)
    if np.any(lo <= 0):
        raise SolverFailure("nonpositive harmonic measure inside the disc")
    return float(np.max(hi / lo - 1.0))


def _torus_disc_sets(K, r, center=(0, 0)):
    c = _torus_sites(K)
    d = np.abs(c - np.asarray(center)) % K
    d = np.minimum(d, K - d)
    n2 = (d * d).sum(axis=1)
    closure = in_closure(d, r * r)
    boundary = c[closure & (n2 >= r * r)]
    return c, n2, boundary


@lru_cache(maxsize=16)
def excursion_time_profile(K: int, r: int, R: int) -> tuple[np.ndarray, np.ndarray, float]:
    """``E^y(tau)`` for every ``y`` on the inner boundary ``dD(0, r)`` of the K-torus.

    ``tau`` is the time to reach ``dD(0, R)`` and then return to ``dD(0, r)``.
    Returns ``(inner boundary sites, expectations, worst residual)``.
    """
    if not (0 < 2 * r < R and 6 * R <= K):
        raise ValueError("need 2r < R <= K/6")
    c, n2, inner = _torus_disc_sets(K, r)
    # leg 1: exit of D(0, R) from inside (it ends on dD(0, R))
    dom_out = _build("torus-disc", c, n2 < R * R, torus=K)
    t_out, res1 = solve(dom_out.A, np.ones(len(dom_out.interior)))
    H, res2 = solve(dom_out.A, dom_out.B.toarray())
    # leg 2: hitting time of dD(0, r) from anywhere on the torus
    dom_back = torus_domain(K, tuple(map(tuple, inner.tolist())))
    t_back, res3 = solve(dom_back.A, np.ones(len(dom_back.interior)))
    back_at_outer = t_back[dom_back.interior_index(dom_out.boundary)]
    iy = dom_out.interior_index(inner)
    vals = t_out[iy] + H[iy] @ back_at_outer
    return inner, vals, max(res1, res2, res3)


def expected_excursion_time(K: int, r: int, R: int, y) -> float:
    inner, vals, _ = excursion_time_profile(K, r, R)
    y = np.asarray(y) % K
    hit = np.flatnonzero((inner == y).all(axis=1))
    if len(hit) == 0:
        raise ValueError(f"{tuple(y)} is not on the inner boundary")
    return float(vals[hit[0]])


def excursion_time_scale(K: int, r: int, R: int) -> float:
    return 2.0 / math.pi * K * K * math.log(R / r)


def _torus_transitions(K):
    """Dense transition matrix of the SRW on the K-torus, site index ``a*K + b``."""
    P = np.zeros((K * K, K * K))
    for a in range(K):
        for b in range(K):
            for d0, d1 in _STEPS:
                P[a * K + b, ((a + d0) % K) * K + (b + d1) % K] += 0.25
    return P


@lru_cache(maxsize=16)
def hitting_moments_exact(K: int, target: tuple, max_order: int) -> np.ndarray:
    """``E^y(T^k)`` for all starts ``y`` and ``k = 1..max_order`` by the moment recursion.

    With ``Q`` the walk killed at the target and ``s = 1 - Q 1``,
    ``(I - Q) m_k = sum_{j<k} C(k, j) Q m_j + s`` with ``m_0 = 1``.
    Returns an array of shape ``(max_order, K*K)`` (zero at the target).
    """
    P = _torus_transitions(K)
    t = target[0] % K * K + target[1] % K
    keep = np.array([i for i in range(K * K) if i != t])
    Q = P[np.ix_(keep, keep)]
    s = P[keep, t]
    A = np.eye(len(keep)) - Q
    ms = [np.ones(len(keep))]
    for k in range(1, max_order + 1):
        rhs = s.copy()
        for j in range(k):
            rhs += math.comb(k, j) * (Q @ ms[j])
        ms.append(np.linalg.solve(A, rhs))
    out = np.zeros((max_order, K * K))
    out[:, keep] = np.array(ms[1:])
    return out


def hitting_distribution_moments(K: int, target, start, max_order: int,
                                 tail: float = 1e-15, step_cap: int = 10_000_000):
    """Moments of the hitting time of ``target`` from ``start`` from its distribution.

    The law of ``T`` is propagated until ``P(T > t) < tail``. The neglected
    tail is bounded by a geometric remainder using the contraction factor
    ``theta = max_y P^y(T > m)^(1/m)``. Returns ``(moments, remainder_bounds)``.
    """
    if K > 8:
        raise ValueError("distributional moments are restricted to K <= 8")
    if max_order > 4:
        raise ValueError("max_order must be <= 4")
    P = _torus_transitions(K)
    t_idx = target[0] % K * K + target[1] % K
    y_idx = start[0] % K * K + start[1] % K
    if t_idx == y_idx:
        return np.zeros(max_order), np.zeros(max_order)
    keep = np.array([i for i in range(K * K) if i != t_idx])
    Q = P[np.ix_(keep, keep)]
    s = P[keep, t_idx]
    v = np.zeros(len(keep))
    v[np.flatnonzero(keep == y_idx)[0]] = 1.0
    moments = np.zeros(max_order)
    orders = np.arange(1, max_order + 1)
    step = 0
    while True:
        step += 1
        moments += float(v @ s) * float(step) ** orders
        v = v @ Q
        if v.sum() < tail:
            break
        if step >= step_cap:
            raise SolverFailure("tail bound not reached within the step cap")
    surv = v.sum()
    # contraction: worst-case survival over a block of m steps
    m = max(1, int(math.ceil(hitting_moments_exact(K, tuple(target), 1)[0].max())))
    theta = np.linalg.matrix_power(Q, m).sum(axis=1).max() ** (1.0 / m)
    # sum_{t > step} t^k P(T = t) <= sum_{j>=1} (step + j)^k surv theta^(j-1)
    j = np.arange(1, 200_000, dtype=float)
    weights = surv * np.minimum(1.0, theta ** (j - m))
    rem = np.array([float(np.sum((step + j) ** k * weights)) for k in orders])
    return moments, rem


def kac_moments(K: int, target, start, max_order: int) -> np.ndarray:
    """``E^start(T^k)``, ``k = 1..max_order``, for the hitting time ``T`` of ``target``."""
    m, _ = hitting_distribution_moments(K, target, start, max_order)
    return m


def kac_check(K: int, max_order: int = 4):
    """Check ``E^y(T^k) <= k! E^y(T) ||T||^(k-1)`` for every target, start and order.

    Moments come from the hitting-time distributions; ``||T||`` is the
    largest first moment over starts. Returns a list of
    ``(target, start, order, lhs, rhs)`` rows.
    """
    rows = []
    sites = [(a, b) for a in range(K) for b in range(K)]
    for x in sites:
        mom = {y: kac_moments(K, x, y, max_order) for y in sites}
        norm = max(m[0] for m in mom.values())
        for y in sites:
            m = mom[y]
            for k in range(1, max_order + 1):
                rows.append((x, y, k, float(m[k - 1]),
                             math.factorial(k) * float(m[0]) * norm ** (k - 1)))
    return rows


def expected_cover_time(n: int) -> float:
    """Exact expected cover time of the n-torus from the origin (visited-set chain)."""
    if n * n > 12:
        raise ValueError("visited-set chain is only tractable for n*n <= 12")
    N = n * n
    full = (1 << N) - 1
    nbrs = [[((a + d0) % n) * n + (b + d1) % n for d0, d1 in _STEPS]
            for a in range(n) for b in range(n)]
    states = {}
    order = []
    stack = [(0, 1)]
    while stack:
        st = stack.pop()
        if st in states or st[1] == full:
            continue
        states[st] = len(order)
        order.append(st)
        for y in nbrs[st[0]]:
            stack.append((y, st[1] | (1 << y)))
    if not order:
        return 0.0
    rows, cols, vals = [], [], []
    for i, (x, vis) in enumerate(order):
        rows.append(i)
        cols.append(i)
        vals.append(1.0)
        for y in nbrs[x]:
            nxt = (y, vis | (1 << y))
            j = states.get(nxt)
            if j is not None:
                rows.append(i)
                cols.append(j)
                vals.append(-0.25)
    A = sp.csr_matrix((vals, (rows, cols)), shape=(len(order), len(order)))
    u, _ = solve(A, np.ones(len(order)))
    return float(u[states[(0, 1)]])


def stencil_residual(sol: ChainSolution, source: float = 0.0, fixed=None) -> float:
    """Pointwise check ``u(x) = source + mean of neighbour values`` at interior sites.

    ``fixed`` maps boundary coordinates to their Dirichlet values (default 0).
    """
    dom = sol.domain
    u = sol.values
    worst = 0.0
    for i, p in enumerate(dom.interior.tolist()):
        acc = 0.0
        for d0, d1 in _STEPS:
            y = [p[0] + d0, p[1] + d1]
            j = int(dom.interior_index(y)[0])
            if j >= 0:
                acc += u[j]
            elif fixed is not None:
                key = tuple(np.asarray(y) % dom.torus) if dom.torus else tuple(y)
                acc += fixed.get(key, 0.0)
        worst = max(worst, abs(u[i] - source - acc / 4.0))
    return worst
