"""Finite-versus-infinite classification of the level set, expected-count
asymptotics, and the exponential limit law for the critical process."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .environment import EnvironmentSpec, Explicit, Homogeneous, PolyCritical, is_critical
from .exact import DTable, level_probabilities, visit_count_moments, MAX_MOMENT_HORIZON
from .simulate import SimulationConfig, run_ensemble

FINITE, INFINITE, INDETERMINATE = "finite", "infinite", "indeterminate"
CLOSED_FORM = "closed_form_family"
GROWTH_CHECK = "criterion_with_growth_check"
INSUFFICIENT = "insufficient_hypotheses"


@dataclass(frozen=True)
class ClassificationVerdict:
    verdict: str
    basis: str
    diagnostics: dict

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "basis": self.basis, "diagnostics": self.diagnostics}


def series_diagnostics(table: DTable, horizon: int) -> dict:
    """Partial sums of sum_{n>=2} 1/(D(n) log n) and log(D(N)/(N log N)) on a decade grid."""
    logd = table.log_d_values(horizon)
    ns = np.arange(2, horizon + 1)
    terms = np.exp(-logd[1:]) / np.log(ns)
    partial = np.cumsum(terms)
    grid = sorted({min(10**e, horizon) for e in range(2, int(math.log10(horizon)) + 2)})
    return {
        "partial_sums": {str(N): float(partial[N - 2]) for N in grid},
        # log(D(N) / (N log N)); stays finite when D overflows
        "log_growth_ratio": {str(N): float(logd[N - 1] - math.log(N * math.log(N))) for N in grid},
    }


def classify(env: EnvironmentSpec, horizon: int = 100_000) -> ClassificationVerdict:
    """Decide whether the level set is finite, without inferring convergence
    from partial sums: verdicts come only from the polynomial family or a
    tail rule whose series behaviour is certain."""
    diag = series_diagnostics(DTable(env), horizon)
    if isinstance(env, PolyCritical):
        diag.update(p_limit=0.5, series="convergent" if env.B >= 1 else "divergent",
                    d_growth="c n^B" if env.B > 1 else ("n log n" if env.B == 1 else "n/(1-B)"))
        return ClassificationVerdict(FINITE if env.B >= 1 else INFINITE, CLOSED_FORM, diag)
    if isinstance(env, Homogeneous):
        if env.p == 0.5:
            diag.update(p_limit=0.5, series="divergent", d_growth="n + 1")
            return ClassificationVerdict(INFINITE, CLOSED_FORM, diag)
        diag.update(
            p_limit=env.p,
            series="convergent",
            note="p_n does not tend to 1/2; D(n) grows geometrically so the series converges, "
            "but the criterion's hypotheses fail",
        )
        return ClassificationVerdict(INDETERMINATE, INSUFFICIENT, diag)
    assert isinstance(env, Explicit)
    if env.tail == 0.5:
        # past the list m_k = 1, so D(n) = D(L) + n - L: linear growth, divergent series
        diag.update(p_limit=0.5, series="divergent", d_growth="linear beyond the listed prefix")
        return ClassificationVerdict(INFINITE, GROWTH_CHECK, diag)
    diag.update(
        p_limit=env.tail,
        series="convergent",
        note="tail probability below 1/2: geometric growth of D(n) makes the series converge, "
        "but p_n does not tend to 1/2",
    )
    return ClassificationVerdict(INDETERMINATE, INSUFFICIENT, diag)


def fit_power_constant(B: float, i0: int | None = None, n_fit: int = 10**6) -> float:
    """c in D(n) ~ c n^B for B > 1, read off the exact table at ``n_fit``."""
    table = DTable(PolyCritical(B, i0))
    return math.exp(table.log_d(n_fit) - B * math.log(n_fit))


def d_asymptotics(B: float, n: int, c: float | None = None, i0: int | None = None) -> float:
    """Leading-order D(n) for the polynomial family."""
    if B < 0:
        raise ValueError(f"B must be >= 0, got {B}")
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if B < 1:
        return n / (1.0 - B)
    if B == 1:
        return n * math.log(n)
    if c is None:
        c = fit_power_constant(B, i0)
    return c * n**B


def _family_B(env: EnvironmentSpec) -> float:
    if isinstance(env, PolyCritical):
        return env.B
    if is_critical(env):
        return 0.0
    raise ValueError("expected count profile needs the polynomial family (or p ≡ 1/2)")


@dataclass
class ProfileTable:
    B: float
    a: int
    branch: str
    rows: list
    fitted_constant: float | None = None

    def to_dict(self) -> dict:
        return {"B": self.B, "a": self.a, "branch": self.branch, "fitted_constant": self.fitted_constant, "rows": self.rows}

    def write_csv(self, path) -> None:
        _write_rows(path, ["n", "exact", "prediction", "ratio"], self.rows)


def expected_count_profile(env: EnvironmentSpec, a: int, n_grid) -> ProfileTable:
    """Exact E|C ∩ [1, n]| against its leading-order prediction."""
    B = _family_B(env)
    n_grid = [int(n) for n in n_grid]
    if not n_grid or any(n2 <= n1 for n1, n2 in zip(n_grid, n_grid[1:])) or n_grid[0] < 3:
        raise ValueError(f"n_grid must be increasing with entries >= 3, got {n_grid}")
    cum = np.cumsum(level_probabilities(DTable(env), n_grid[-1], a))
    exact = [float(cum[n - 1]) for n in n_grid]
    fitted = None
    if B < 1:
        branch = "(1-B) log n"
        pred = [(1 - B) * math.log(n) for n in n_grid]
    elif B == 1:
        branch = "log log n"
        pred = [math.log(math.log(n)) for n in n_grid]
    else:
        branch = "c (fitted)"
        fitted = exact[-1]
        pred = [fitted] * len(n_grid)
    rows = [{"n": n, "exact": e, "prediction": p, "ratio": e / p} for n, e, p in zip(n_grid, exact, pred)]
    return ProfileTable(B, a, branch, rows, fitted)


def ks_exponential(samples) -> float:
    """sup_t |F_N(t) - (1 - e^{-t})| for the empirical CDF F_N; ties allowed."""
    x = np.sort(np.asarray(samples, dtype=float))
    N = x.size
    if N == 0:
        raise ValueError("need at least one sample")
    F = -np.expm1(-np.maximum(x, 0.0))
    i = np.arange(1, N + 1)
    return float(max(np.max(i / N - F), np.max(F - (i - 1) / N)))


MIN_REPLICATIONS = 100


@dataclass
class LimitLawReport:
    n_grid: list
    replications: int
    used: int
    rows: list
    trend: dict
    samples: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {"n_grid": self.n_grid, "replications": self.replications, "used": self.used,
                "rows": self.rows, "trend": self.trend}

    def write_csv(self, path) -> None:
        _write_rows(path, ["n", "ks", "mean_over_logn", "second_moment_over_logn2"], self.rows)

    @property
    def passed(self) -> bool:
        ok = all(r.get("mean_agrees", True) and r.get("var_agrees", True) for r in self.rows)
        return ok and self.trend.get("ks_nonincreasing", True) is not False


def _nonincreasing(xs) -> bool | None:
    if len(xs) < 2:
        return None
    return all(b <= a for a, b in zip(xs, xs[1:]))


def limit_law_check(config: SimulationConfig, n_grid, workers: int = 1) -> LimitLawReport:
    """Simulate |C ∩ [1, n]| / log n along ``n_grid`` and compare with Exp(1).

    One ensemble runs to max(n_grid) and reports running counts at each grid
    point.  Where n <= MAX_MOMENT_HORIZON the sample mean and variance are
    also checked against exact moments (3 standard errors).
    """
    if not is_critical(config.env):
        raise ValueError("limit law check needs p ≡ 1/2")
    if config.replications < MIN_REPLICATIONS:
        raise ValueError(f"need at least {MIN_REPLICATIONS} replications, got {config.replications}")
    n_grid = sorted({int(n) for n in n_grid})
    if not n_grid or n_grid[0] < 2:
        raise ValueError(f"n_grid entries must be >= 2, got {n_grid}")
    cfg = replace(config, horizon=n_grid[-1], checkpoints=tuple(n_grid), record_times=False)
    counts = run_ensemble(cfg, workers=workers).checkpoint_counts().astype(float)
    used = counts.shape[0]
    table = DTable(cfg.env)
    rows, samples = [], {}
    for i, n in enumerate(n_grid):
        x = counts[:, i]
        logn = math.log(n)
        s = x / logn
        samples[n] = s
        row = {
            "n": n,
            "ks": ks_exponential(s),
            "mean_over_logn": float(s.mean()),
            "second_moment_over_logn2": float(np.mean(s**2)),
            "sample_mean": float(x.mean()),
            "sample_var": float(x.var(ddof=1)),
        }
        if n <= MAX_MOMENT_HORIZON:
            m1, m2 = visit_count_moments(table, n, cfg.level, 2)
            var = m2 - m1**2
            se_mean = math.sqrt(row["sample_var"] / used)
            m4 = float(np.mean((x - x.mean()) ** 4))
            se_var = math.sqrt(max(m4 - row["sample_var"] ** 2, 0.0) / used)
            row.update(
                exact_mean=float(m1),
                exact_second_moment=float(m2),
                exact_var=float(var),
                se_mean=se_mean,
                se_var=se_var,
                mean_agrees=bool(abs(row["sample_mean"] - m1) <= 3 * se_mean),
                var_agrees=bool(abs(row["sample_var"] - var) <= 3 * se_var),
            )
        rows.append(row)
    trend = {
        "ks_nonincreasing": _nonincreasing([r["ks"] for r in rows]),
        "mean_error_nonincreasing": _nonincreasing([abs(r["mean_over_logn"] - 1) for r in rows]),
        "second_moment_error_nonincreasing": _nonincreasing([abs(r["second_moment_over_logn2"] / 2 - 1) for r in rows]),
    }
    return LimitLawReport(n_grid, config.replications, used, rows, trend, samples)


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(r[h]) for h in header])


def _cell(x):
    if isinstance(x, float):
        return format(x, ".17g")
    return x
