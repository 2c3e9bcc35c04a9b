"""Compare the compiled kernels with the numpy fallback.

Both backends advance the same walk and count pairs in the same point set;
outputs are checked for equality before timings are reported.

    python3 benchmarks/bench_kernels.py --n 1024 --steps 20000000
"""
import argparse
import time

import numpy as np

from latepoints import _fallback
from latepoints.walk import UNVISITED

try:
    from latepoints import _kernels
except ImportError:
    _kernels = None


def best_of(repeats, fn):
    times, out = [], None
    for _ in range(repeats):
        start = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - start)
    return min(times), out


def walk_job(mod, n, seed, steps):
    def job():
        hits = np.full(n * n, UNVISITED, dtype=np.uint64)
        hits[0] = 0
        state = mod.advance(hits, n, seed, 0, 0, 0, n * n - 1, steps, False)
        return tuple(state), hits
    return job


def pair_job(mod, pts, n, r2):
    p0 = np.ascontiguousarray(pts[:, 0], dtype=np.int32)
    p1 = np.ascontiguousarray(pts[:, 1], dtype=np.int32)
    return lambda: mod.pair_count(p0, p1, n, r2)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1024)
    ap.add_argument("--steps", type=int, default=20_000_000)
    ap.add_argument("--points", type=int, default=20_000)
    ap.add_argument("--radius", type=float, default=32.0)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args(argv)
    if _kernels is None:
        raise SystemExit("compiled kernels not built; run `pip install -e . --no-build-isolation`")

    rng = np.random.default_rng(args.seed)
    flat = rng.choice(args.n * args.n, size=args.points, replace=False)
    pts = np.stack(np.divmod(flat, args.n), axis=1)
    r2 = int(args.radius ** 2)

    rows = []
    for label, make in (
        (f"walk {args.steps:,} steps n={args.n}",
         lambda m: walk_job(m, args.n, args.seed, args.steps)),
        (f"pair_count {args.points:,} points r={args.radius:g}",
         lambda m: pair_job(m, pts, args.n, r2)),
    ):
        tc, oc = best_of(args.repeats, make(_kernels))
        tp, op = best_of(args.repeats, make(_fallback))
        same = (oc[0] == op[0] and np.array_equal(oc[1], op[1])) if isinstance(oc, tuple) \
            else oc == op
        if not same:
            raise SystemExit(f"{label}: backends disagree")
        rows.append((label, tc, tp))

    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  {'compiled s':>10}  {'fallback s':>10}  {'speedup':>7}")
    for label, tc, tp in rows:
        print(f"{label:<{width}}  {tc:>10.3f}  {tp:>10.3f}  {tp / tc:>6.1f}x")


if __name__ == "__main__":
    main()
