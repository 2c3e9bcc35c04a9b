"""Command-line driver: theory tables, simulation sweeps, analysis and oracle reports.

Modes
-----
theory    exponent tables (``theory.csv``) and rho / rho-hat curves over beta
simulate  run replicas, persist first-hit fields and excursion logs, write ``manifest.json``
analyze   read a manifest, verify digests, write ``stats.csv``, ``fits.csv``, ``summary.json``
          and plot data
sweep     simulate followed by analyze
oracle    exact-chain comparison tables (``oracle.csv``)

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__, estimators, excursions, fieldio, oracle, theory
from .rng import replica_seed
from .walk import WalkConfig, run_to_cover, run_to_time

log = logging.getLogger(__name__)

MODES = ("theory", "simulate", "analyze", "oracle", "sweep")
_SIM_KEYS = {"n", "alpha", "seeds", "master_seed", "workers", "out", "schedule_base",
             "schedule_r0", "cover", "excursions"}
RELEVANT = {
    "theory": {"alpha", "beta", "out"},
    "oracle": {"n", "out"},
    "simulate": _SIM_KEYS,
    "analyze": {"alpha", "beta", "out", "workers"},
    "sweep": _SIM_KEYS | {"beta"},
}
STAT_KINDS = {"late_count": theory.Kind.LATE_COUNT, "fixed_disc": theory.Kind.FIXED_DISC,
              "late_disc": theory.Kind.LATE_DISC, "pair_count": theory.Kind.PAIR_RHO}
ORACLE_RADII = (16, 32, 64)


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    n: tuple = (128, 256, 512)
    alpha: tuple = (0.5,)
    beta: tuple = (0.5,)
    seeds: int = 8
    master_seed: int = 0
    workers: int = 1
    out: str = "latepoints-out"
    schedule_base: float = 2.0
    schedule_r0: float = 4.0
    cover: bool = False
    excursions: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise UsageError(f"unknown mode {self.mode!r}")
        for name in ("n", "alpha", "beta"):
            if len(getattr(self, name)) == 0:
                raise UsageError(f"--{name} must not be empty")
        if any(n < 2 for n in self.n):
            raise UsageError("every n must be >= 2")
        if any(not 0 < a <= 1 for a in self.alpha):
            raise UsageError("alpha values must lie in (0, 1]")
        if any(not 0 < b < 1 for b in self.beta):
            raise UsageError("beta values must lie in (0, 1)")
        if self.seeds < 1:
            raise UsageError("--seeds must be >= 1")
        if self.workers < 1:
            raise UsageError("--workers must be >= 1")
        if not 0 <= self.master_seed < 1 << 64:
            raise UsageError("--master-seed must be an unsigned 64-bit integer")
        if not self.schedule_base > 1:
            raise UsageError("--schedule-base must be > 1")
        if not self.schedule_r0 > 0:
            raise UsageError("--schedule-r0 must be > 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("n", "alpha", "beta"):
            d[k] = list(d[k])
        return d

    @property
    def out_dir(self) -> Path:
        return Path(self.out)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _list(kind):
    def conv(text):
        try:
            return [kind(v) for v in text.split(",") if v.strip()]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    return conv


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="latepoints", description="Late points of random walk on the 2D torus.")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--n", type=_list(int), nargs="+", help="torus sides (or disc radii for oracle)")
    p.add_argument("--alpha", type=_list(float), nargs="+")
    p.add_argument("--beta", type=_list(float), nargs="+")
    p.add_argument("--seeds", type=int, help="replicas per n")
    p.add_argument("--master-seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--config", help="flat JSON object of defaults; flags override it")
    p.add_argument("--schedule-base", type=float)
    p.add_argument("--schedule-r0", type=float)
    p.add_argument("--cover", action=argparse.BooleanOptionalAction, default=None,
                   help="run every replica to cover time (needed for cover_ratio)")
    p.add_argument("--excursions", action=argparse.BooleanOptionalAction, default=None,
                   help="track excursions around the fixed center")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


_FIELD_NAMES = {f.name for f in fields(ExperimentConfig)}


def _normalise(key, value):
    if key in ("n", "alpha", "beta"):
        if not isinstance(value, (list, tuple)):
            value = [value]
        flat = []
        for v in value:
            flat.extend(v if isinstance(v, (list, tuple)) else [v])
        kind = int if key == "n" else float
        return tuple(sorted({kind(v) for v in flat}))
    return value


def parse_config(argv=None) -> ExperimentConfig:
    """Merge defaults, the optional JSON config file and flags (flags win)."""
    ns = build_parser().parse_args(argv)
    values = {}
    if ns.config:
        try:
            data = json.loads(Path(ns.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {ns.config}: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError("config file must hold a flat JSON object")
        unknown = set(data) - _FIELD_NAMES
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        values.update(data)
    flags = {k: v for k, v in vars(ns).items()
             if k in _FIELD_NAMES and v is not None}
    mode = flags.get("mode", values.get("mode"))
    if mode is None:
        raise UsageError("--mode is required")
    if mode in RELEVANT:
        stray = sorted(set(flags) - RELEVANT[mode] - {"mode"})
        if stray:
            raise UsageError(f"option(s) {', '.join('--' + s.replace('_', '-') for s in stray)} "
                             f"do not apply to mode {mode}")
    values.update(flags)
    if mode == "oracle" and "n" not in values:
        values["n"] = ORACLE_RADII
    values = {k: _normalise(k, v) for k, v in values.items()}
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise UsageError(str(exc)) from None


# ---------------------------------------------------------------- formatting

def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.9g" % v


def write_csv(path: Path, header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) if not isinstance(v, str) else v for v in r])
    data = buf.getvalue().encode()
    path.write_bytes(data)
    return fieldio.digest(data)


def write_series(path: Path, pairs, comment: str) -> None:
    lines = [f"# {comment}"] + [f"{fmt(x)} {fmt(y)}" for x, y in pairs]
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------- theory / oracle

def run_theory(cfg: ExperimentConfig) -> dict:
    out = cfg.out_dir
    (out / "plots").mkdir(parents=True, exist_ok=True)
    digest = write_csv(out / "theory.csv", ["alpha", "beta", "kind", "value"],
                       theory.theory_rows(cfg.alpha, cfg.beta))
    for a in cfg.alpha:
        curves = theory.rho_curves(a, 512)
        write_series(out / "plots" / f"rho_alpha{fmt(a)}.dat",
                     [(b, r) for b, r, _ in curves], f"beta rho alpha={fmt(a)}")
        write_series(out / "plots" / f"rho_hat_alpha{fmt(a)}.dat",
                     [(b, r) for b, _, r in curves], f"beta rho_hat alpha={fmt(a)}")
    return {"theory.csv": digest}


def oracle_rows(radii) -> list[tuple]:
    rows = []
    for n in radii:
        hp = oracle.hit_before_exit_solution(n)
        gs = oracle.green_solution(n)
        et = oracle.exit_time_solution(n)
        for k in range(1, n):
            x = (k, 0)
            p, g = hp.at(x), gs.at(x)
            rows.append(("hit_before_exit", f"n={n}", k, 0, p, math.log(n / k) / math.log(n),
                         abs(p * math.log(n) - math.log(n / k))))
            pred = 2 / math.pi * math.log(n / k)
            rows.append(("green", f"n={n}", k, 0, g, pred, abs(g - pred)))
        for k in range(0, n):
            lo, hi = oracle.exit_time_bracket(n, (k, 0))
            e = et.at((k, 0))
            rows.append(("exit_time", f"n={n}", k, 0, e, 0.5 * (lo + hi),
                         max(lo - e, e - hi, 0.0)))
    for r, R in ((8, 64), (16, 128)):
        sol = oracle.annulus_solution(r, R)
        for k in range(r + 1, R):
            p = sol.at((k, 0))
            pred = math.log(R / k) / math.log(R / r)
            rows.append(("annulus", f"r={r};R={R}", k, 0, p, pred, abs(p - pred)))
    for K, r, R in ((64, 4, 10),):
        pts, vals, _ = oracle.excursion_time_profile(K, r, R)
        scale = oracle.excursion_time_scale(K, r, R)
        for (y0, y1), v in zip(pts, vals):
            rows.append(("excursion_time", f"K={K};r={r};R={R}", int(y0), int(y1), v, scale,
                         abs(v / scale - 1)))
    return rows


def run_oracle(cfg: ExperimentConfig) -> dict:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    rows = oracle_rows(cfg.n)
    return {"oracle.csv": write_csv(cfg.out_dir / "oracle.csv",
                                    ["table", "params", "x0", "x1", "exact", "predicted", "error"],
                                    rows)}


# ---------------------------------------------------------------- simulation

def replica_plan(cfg: ExperimentConfig) -> list[dict]:
    """Replicas in sorted ``(n, seed_index)`` order; the ordinal selects the substream."""
    plan = []
    for n in sorted(cfg.n):
        for i in range(cfg.seeds):
            ordinal = len(plan)
            plan.append({"n": n, "seed_index": i, "ordinal": ordinal,
                         "seed": replica_seed(cfg.master_seed, ordinal)})
    return plan


def run_length(cfg: ExperimentConfig, n: int):
    """``None`` for a run to cover, else the number of steps to walk."""
    if cfg.cover or max(cfg.alpha) >= 1:
        return None
    return max(estimators.late_threshold(a, n) for a in cfg.alpha)


def _simulate_one(args):
    cfg, task = args
    n, seed = task["n"], task["seed"]
    out = cfg.out_dir
    stem = f"n{n}_s{task['seed_index']:04d}"
    entry = dict(task)
    try:
        machines = []
        if cfg.excursions and cfg.schedule_r0 * cfg.schedule_base <= n / 2:
            sched = excursions.RadiiSchedule.for_torus(n, cfg.schedule_r0, cfg.schedule_base)
            machines.append(excursions.CrossingMachine(n, estimators.fixed_center(n), sched))
        steps = run_length(cfg, n)
        wc = WalkConfig(n, seed)
        f = run_to_cover(wc, machines) if steps is None else run_to_time(wc, steps, machines)
        rel = f"fields/{stem}.lprw"
        entry.update(field=rel, digest=fieldio.persist(f, out / rel),
                     walk_length=f.walk_length, covered=f.covered)
        if machines:
            m = machines[0]
            doc = {"center": list(m.center), "radii": m.schedule.radii,
                   "counts": m.counts.tolist(), "visits": m.visits,
                   "events": [[t, k, lv] for t, k, lv in m.events]}
            data = json.dumps(doc, sort_keys=True).encode()
            rel = f"excursions/{stem}.json"
            (out / rel).write_bytes(data)
            entry.update(excursions=rel, excursions_digest=fieldio.digest(data))
        entry["status"] = "ok"
    except Exception as exc:  # isolate per-replica failures
        log.exception("replica %s failed", stem)
        entry.update(status="failed", error=f"{type(exc).__name__}: {exc}")
    return entry


def _pool_map(fn, items, workers):
    if workers == 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def run_simulate(cfg: ExperimentConfig) -> dict:
    out = cfg.out_dir
    (out / "fields").mkdir(parents=True, exist_ok=True)
    (out / "excursions").mkdir(exist_ok=True)
    entries = _pool_map(_simulate_one, [(cfg, t) for t in replica_plan(cfg)], cfg.workers)
    entries.sort(key=lambda e: e["ordinal"])
    manifest = {"version": __version__, "config": cfg.to_dict(), "replicas": entries,
                "outputs": {}}
    write_manifest(out, manifest)
    return manifest


def write_manifest(out: Path, manifest: dict) -> None:
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def read_manifest(out: Path) -> dict:
    path = out / "manifest.json"
    if not path.exists():
        raise FileNotFoundError(f"no manifest at {path}; run simulate first")
    return json.loads(path.read_text())


# ---------------------------------------------------------------- analysis

def _analyze_one(args):
    out, entry, alphas, betas = args
    f = fieldio.load(out / entry["field"], entry["digest"])
    usable = [a for a in alphas if f.covered or f.walk_length >= estimators.late_threshold(a, f.n)]
    rows = [(f.n, entry["seed_index"]) + r for r in estimators.field_statistics(f, usable, betas)]
    if "excursions" in entry:
        data = (out / entry["excursions"]).read_bytes()
        if fieldio.digest(data) != entry["excursions_digest"]:
            raise fieldio.DigestMismatch(f"{entry['excursions']}: digest mismatch")
        doc = json.loads(data)
        rows.append((f.n, entry["seed_index"], None, None, "center_visits", doc["visits"]))
        for lv, c in enumerate(doc["counts"][1:], start=1):
            rows.append((f.n, entry["seed_index"], None, None, f"excursions_l{lv}", c))
    return rows


def _key(v):
    return -1.0 if v is None else v


def _predict(kind, a, b):
    try:
        return theory.predicted_exponent(kind, a, b)
    except ValueError:  # alpha = 1 lies outside the exponent formulas
        return None


def summarize_rows(rows) -> list[dict]:
    """Per (statistic, alpha, beta): per-n summaries, a log-log fit and the prediction."""
    groups = {}
    for n, _, a, b, stat, v in rows:
        groups.setdefault((stat, a, b), {}).setdefault(n, []).append(v)
    out = []
    for (stat, a, b) in sorted(groups, key=lambda k: (k[0], _key(k[1]), _key(k[2]))):
        per_n = groups[(stat, a, b)]
        entry = {"statistic": stat, "alpha": a, "beta": b, "per_n": []}
        for n in sorted(per_n):
            s = estimators.summarize(per_n[n])
            entry["per_n"].append({
                "n": n, "seeds": len(s.values), "median": s.median, "mean": s.mean,
                "q1": s.q1, "q3": s.q3, "zeros": int(np.count_nonzero(s.values == 0)),
                "median_exponent": math.log(s.median) / math.log(n) if s.median > 0 else None,
                "mean_exponent": math.log(s.mean) / math.log(n) if s.mean > 0 else None,
            })
        for which in ("median", "mean"):
            try:
                fit = estimators.exponent_fit([(p["n"], p[which]) for p in entry["per_n"]])
                entry[f"{which}_fit"] = {"slope": fit.slope, "intercept": fit.intercept,
                                         "residual": fit.residual, "halfwidth": fit.halfwidth,
                                         "excluded": fit.excluded}
            except ValueError:
                entry[f"{which}_fit"] = None
        if stat in STAT_KINDS:
            entry["predicted_exponent"] = _predict(STAT_KINDS[stat], a, b)
            if stat == "pair_count":
                entry["predicted_mean_exponent"] = _predict(theory.Kind.PAIR_RHO_HAT, a, b)
        elif stat == "cover_ratio":
            entry["predicted_value"] = estimators.COVER_CONSTANT
        out.append(entry)
    return out


def _empirical_exponent(entry):
    fit = entry.get("median_fit")
    if fit is not None:
        return fit["slope"]
    last = entry["per_n"][-1]
    return last["median_exponent"]


FIT_HEADER = ["statistic", "alpha", "beta", "sizes", "median_slope", "predicted_exponent",
              "slope_halfwidth", "mean_slope", "predicted_mean_exponent"]


def fit_rows(summary) -> list[tuple]:
    """One row per summary entry; empirical slopes sit next to their predictions."""
    rows = []
    for e in summary:
        med, mean = e.get("median_fit"), e.get("mean_fit")
        pred = e.get("predicted_exponent", e.get("predicted_value"))
        rows.append((e["statistic"], e["alpha"], e["beta"], len(e["per_n"]),
                     med["slope"] if med else None, pred, med["halfwidth"] if med else None,
                     mean["slope"] if mean else None, e.get("predicted_mean_exponent")))
    return rows


def write_plot_data(out: Path, summary) -> None:
    plots = out / "plots"
    plots.mkdir(exist_ok=True)
    series = {}
    for e in summary:
        if e["statistic"] in STAT_KINDS and e["beta"] is not None:
            series.setdefault((e["statistic"], e["alpha"]), []).append(e)
    for (stat, a), items in sorted(series.items()):
        items.sort(key=lambda e: e["beta"])
        emp = [(e["beta"], _empirical_exponent(e)) for e in items
               if _empirical_exponent(e) is not None]
        write_series(plots / f"{stat}_alpha{fmt(a)}_empirical.dat", emp,
                     f"beta empirical_exponent statistic={stat} alpha={fmt(a)}")
        curve = [(b, _predict(STAT_KINDS[stat], a, b)) for b in np.linspace(0.02, 0.98, 49)]
        curve = [(b, v) for b, v in curve if v is not None]
        write_series(plots / f"{stat}_alpha{fmt(a)}_predicted.dat", curve,
                     f"beta predicted_exponent statistic={stat} alpha={fmt(a)}")


def run_analyze(cfg: ExperimentConfig, manifest: dict | None = None) -> dict:
    out = cfg.out_dir
    manifest = manifest if manifest is not None else read_manifest(out)
    ok = [e for e in manifest["replicas"] if e["status"] == "ok"]
    chunks = _pool_map(_analyze_one, [(out, e, cfg.alpha, cfg.beta) for e in ok], cfg.workers)
    rows = [r for chunk in chunks for r in chunk]
    rows.sort(key=lambda r: (r[0], r[1]))  # stable: per-replica order is fixed
    stats_digest = write_csv(out / "stats.csv",
                             ["n", "seed", "alpha", "beta", "statistic", "value"], rows)
    summary = summarize_rows(rows)
    data = json.dumps({"version": __version__, "entries": summary}, indent=2,
                      sort_keys=True, default=float).encode()
    (out / "summary.json").write_bytes(data)
    fits_digest = write_csv(out / "fits.csv", FIT_HEADER, fit_rows(summary))
    write_plot_data(out, summary)
    manifest["outputs"].update({"stats.csv": stats_digest, "fits.csv": fits_digest,
                                "summary.json": fieldio.digest(data)})
    write_manifest(out, manifest)
    return manifest


def run_sweep(cfg: ExperimentConfig) -> dict:
    """Simulate every replica, then write statistics, summary and plot data."""
    return run_analyze(cfg, run_simulate(cfg))


def run(cfg: ExperimentConfig) -> int:
    if cfg.mode == "theory":
        run_theory(cfg)
    elif cfg.mode == "oracle":
        run_oracle(cfg)
    else:
        if cfg.mode == "sweep":
            manifest = run_sweep(cfg)
        elif cfg.mode == "simulate":
            manifest = run_simulate(cfg)
        else:
            manifest = run_analyze(cfg)
        if any(e["status"] != "ok" for e in manifest["replicas"]):
            return 2
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        argv = sys.argv[1:] if argv is None else list(argv)
        if not argv:
            raise UsageError("no arguments given")
        cfg = parse_config(argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"latepoints: error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.DEBUG if "-v" in argv or "--verbose" in argv
                        else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(cfg)
    except Exception as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
