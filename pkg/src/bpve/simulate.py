"""Monte Carlo simulation of the chain and its visits to a fixed level.

Each replication r owns a Philox stream keyed by ``replication_key(seed, r)``,
so a replication's path never depends on which worker ran it or in what
order.  Ensembles are reduced by replication index.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from numba import njit

from .environment import EnvironmentSpec

MASK64 = (1 << 64) - 1
DEFAULT_POPULATION_CAP = 10**9


def time_zero_in_level_set(a: int) -> bool:
    """Z_0 = 0, so time 0 is in C iff a == 0.  Visit counts cover [1, n] only."""
    return a == 0


def splitmix64(x: int) -> int:
    """SplitMix64 finalizer (Steele, Lea & Flood 2014)."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def replication_key(seed: int, r: int) -> int:
    """64-bit Philox key for replication r: splitmix64(seed XOR splitmix64(r))."""
    return splitmix64((seed & MASK64) ^ splitmix64(r & MASK64))


def replication_rng(seed: int, r: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=replication_key(seed, r)))


@njit(cache=True)
def _step(z_prev, p, rng):
    # 1 + z_prev iid geometric(p) summed: negative binomial(1 + z_prev, p)
    return rng.negative_binomial(1 + z_prev, p)


def step(z_prev: int, p: float, rng: np.random.Generator) -> int:
    """One generation: the offspring of z_prev residents plus one immigrant."""
    if z_prev < 0:
        raise ValueError(f"population must be >= 0, got {z_prev}")
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    return int(_step(int(z_prev), float(p), rng))


@njit(cache=True)
def _path(rng, ps, a, cap, record, checkpoints):
    n = ps.shape[0]
    times = np.empty(n if record else 0, dtype=np.int64)
    marks = np.zeros(checkpoints.shape[0], dtype=np.int64)
    count = 0
    z = 0
    capped = False
    ci = 0
    for t in range(1, n + 1):
        z = rng.negative_binomial(1 + z, ps[t - 1])
        if z == a:
            if record:
                times[count] = t
            count += 1
        while ci < checkpoints.shape[0] and checkpoints[ci] == t:
            marks[ci] = count
            ci += 1
        if z > cap:
            capped = True
            break
    while ci < checkpoints.shape[0]:
        marks[ci] = count
        ci += 1
    return count, z, capped, times[:count] if record else times, marks


@dataclass(frozen=True)
class SimulationConfig:
    env: EnvironmentSpec
    horizon: int
    level: int
    replications: int
    seed: int
    population_cap: int = DEFAULT_POPULATION_CAP
    record_times: bool = False
    # extra horizons at which the running visit count is also reported
    checkpoints: tuple = ()

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if self.level < 0:
            raise ValueError(f"level must be >= 0, got {self.level}")
        if self.replications < 1:
            raise ValueError(f"replications must be >= 1, got {self.replications}")
        if not 0 <= self.seed <= MASK64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.population_cap < 1:
            raise ValueError(f"population_cap must be >= 1, got {self.population_cap}")
        cps = tuple(sorted(set(int(c) for c in self.checkpoints)))
        if cps and not (1 <= cps[0] and cps[-1] <= self.horizon):
            raise ValueError(f"checkpoints must lie in [1, {self.horizon}], got {cps}")
        object.__setattr__(self, "checkpoints", cps)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["env"] = self.env.to_dict()
        d["checkpoints"] = list(self.checkpoints)
        return d


@dataclass(frozen=True)
class LevelHitRecord:
    replication: int
    visit_count: int
    final_population: int
    capped: bool
    visit_times: tuple | None = None
    checkpoint_counts: tuple = field(default=())


def run_replication(config: SimulationConfig, r: int, ps: np.ndarray | None = None) -> LevelHitRecord:
    if not 0 <= r < config.replications:
        raise ValueError(f"replication index {r} outside [0, {config.replications})")
    if ps is None:
        ps = config.env.p_array(config.horizon)
    cps = np.asarray(config.checkpoints, dtype=np.int64)
    count, z, capped, times, marks = _path(
        replication_rng(config.seed, r), ps, config.level, config.population_cap, config.record_times, cps
    )
    return LevelHitRecord(
        replication=r,
        visit_count=int(count),
        final_population=int(z),
        capped=bool(capped),
        visit_times=tuple(int(t) for t in times) if config.record_times else None,
        checkpoint_counts=tuple(int(c) for c in marks),
    )


def _run_block(config: SimulationConfig, start: int, stop: int) -> list[LevelHitRecord]:
    ps = config.env.p_array(config.horizon)
    return [run_replication(config, r, ps) for r in range(start, stop)]


@dataclass
class EnsembleResult:
    config: SimulationConfig
    records: list[LevelHitRecord]
    summary: dict

    def visit_counts(self, include_capped: bool = False) -> np.ndarray:
        return np.array([rec.visit_count for rec in self.records if include_capped or not rec.capped])

    def checkpoint_counts(self) -> np.ndarray:
        """(replications kept) x (checkpoints) array of running visit counts."""
        rows = [rec.checkpoint_counts for rec in self.records if not rec.capped]
        return np.array(rows, dtype=np.int64).reshape(len(rows), len(self.config.checkpoints))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["rep", "visit_count", "final_population", "capped"])
            for rec in self.records:
                w.writerow([rec.replication, rec.visit_count, rec.final_population, int(rec.capped)])

    def write_times_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["rep", "t"])
            for rec in self.records:
                for t in rec.visit_times or ():
                    w.writerow([rec.replication, t])

    def write_summary(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")


def _json_default(x):
    if isinstance(x, np.generic):
        return x.item()
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def summarize(config: SimulationConfig, records: list[LevelHitRecord], pmf_max: int | None = None) -> dict:
    kept = [rec for rec in records if not rec.capped]
    counts = np.array([rec.visit_count for rec in kept], dtype=float)
    finals = np.array([rec.final_population for rec in kept], dtype=np.int64)
    n = len(counts)
    if pmf_max is None:
        pmf_max = max(config.level, 10)
    out = {
        "replications": config.replications,
        "used": n,
        "capped_count": len(records) - n,
        "mean_visit_count": None,
        "var_visit_count": None,
        "se_mean_visit_count": None,
        "se_var_visit_count": None,
        "final_pmf": None,
        "final_pmf_tail": None,
    }
    if n == 0:
        return out
    mean = counts.mean()
    out["mean_visit_count"] = float(mean)
    if n > 1:
        var = counts.var(ddof=1)
        m4 = np.mean((counts - mean) ** 4)
        out["var_visit_count"] = float(var)
        out["se_mean_visit_count"] = math.sqrt(var / n)
        out["se_var_visit_count"] = math.sqrt(max(m4 - var**2, 0.0) / n)
    hist = np.bincount(np.minimum(finals, pmf_max + 1), minlength=pmf_max + 2) / n
    out["final_pmf"] = [float(x) for x in hist[: pmf_max + 1]]
    out["final_pmf_tail"] = float(hist[pmf_max + 1])
    return out


def run_ensemble(config: SimulationConfig, workers: int = 1, pmf_max: int | None = None) -> EnsembleResult:
    """Run every replication and reduce by replication index."""
    reps = config.replications
    if workers <= 1 or reps < 2:
        records = _run_block(config, 0, reps)
    else:
        nblocks = min(reps, 4 * workers)
        edges = np.linspace(0, reps, nblocks + 1).astype(int)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_block, config, int(s), int(e)) for s, e in zip(edges[:-1], edges[1:]) if e > s]
            records = [rec for fut in futures for rec in fut.result()]
    records.sort(key=lambda rec: rec.replication)
    return EnsembleResult(config, records, summarize(config, records, pmf_max))
