import math

import numpy as np
import pytest
from scipy import stats

from bpve.environment import Explicit, Homogeneous, PolyCritical
from bpve.exact import DTable, level_pmf, level_probability, visit_count_moment
from bpve.simulate import (
    SimulationConfig,
    replication_key,
    replication_rng,
    run_ensemble,
    run_replication,
    splitmix64,
    step,
    time_zero_in_level_set,
)


def test_splitmix64_reference_values():
    # first outputs of the reference SplitMix64 generator seeded with 0
    x, out = 0, []
    for _ in range(3):
        out.append(splitmix64(x))
        x = (x + 0x9E3779B97F4A7C15) & ((1 << 64) - 1)
    assert out == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]


def test_replication_keys_distinct():
    keys = {replication_key(7, r) for r in range(10_000)}
    assert len(keys) == 10_000
    assert replication_key(7, 0) != replication_key(8, 0)


def test_step_deterministic():
    a = [step(3, 0.5, replication_rng(1, 0)) for _ in range(5)]
    assert len(set(a)) == 1
    rng1, rng2 = replication_rng(1, 2), replication_rng(1, 2)
    assert [step(z, 0.4, rng1) for z in range(20)] == [step(z, 0.4, rng2) for z in range(20)]


def test_step_p_one_gives_zero():
    rng = replication_rng(0, 0)
    assert all(step(z, 1.0, rng) == 0 for z in (0, 1, 100))


@pytest.mark.parametrize("z, p", [(-1, 0.5), (0, 0.0), (0, 1.5)])
def test_step_rejects(z, p):
    with pytest.raises(ValueError):
        step(z, p, replication_rng(0, 0))


def test_step_law_from_zero_is_geometric():
    rng = replication_rng(11, 0)
    x = np.array([step(0, 0.5, rng) for _ in range(40_000)])
    k = np.arange(8)
    obs = np.append(np.bincount(np.minimum(x, 8), minlength=9)[:8], np.sum(x >= 8))
    exp = np.append(0.5 ** (k + 1), 0.5**8) * x.size
    assert stats.chisquare(obs, exp).pvalue > 1e-3


@pytest.mark.parametrize("z, p", [(0, 0.3), (4, 0.5), (50, 0.45)])
def test_step_mean(z, p):
    rng = replication_rng(12, z)
    x = np.array([step(z, p, rng) for _ in range(20_000)], dtype=float)
    mean = (1 + z) * (1 - p) / p
    sd = math.sqrt((1 + z) * (1 - p)) / p
    assert abs(x.mean() - mean) < 4 * sd / math.sqrt(x.size)


def test_time_zero_rule():
    assert time_zero_in_level_set(0)
    assert not time_zero_in_level_set(3)


def test_replication_is_order_independent():
    cfg = SimulationConfig(Homogeneous(0.5), 200, 0, 10, seed=5, record_times=True)
    forward = [run_replication(cfg, r) for r in range(10)]
    backward = [run_replication(cfg, r) for r in reversed(range(10))][::-1]
    assert forward == backward


def test_record_times_consistent():
    cfg = SimulationConfig(PolyCritical(0.5), 500, 1, 20, seed=3, record_times=True, checkpoints=(100, 250, 500))
    res = run_ensemble(cfg)
    plain = run_ensemble(SimulationConfig(PolyCritical(0.5), 500, 1, 20, seed=3))
    for rec, other in zip(res.records, plain.records):
        times = np.array(rec.visit_times)
        assert rec.visit_count == len(times) == other.visit_count
        assert np.all(np.diff(times) > 0) and (times.size == 0 or 1 <= times[0] <= times[-1] <= 500)
        assert rec.checkpoint_counts == tuple(int(np.sum(times <= c)) for c in (100, 250, 500))
        assert other.visit_times is None


def test_workers_do_not_change_results():
    cfg = SimulationConfig(PolyCritical(0.5), 300, 0, 40, seed=99)
    assert run_ensemble(cfg, workers=1).records == run_ensemble(cfg, workers=3).records


def test_population_cap_marks_and_excludes():
    cfg = SimulationConfig(Homogeneous(0.3), 100, 0, 30, seed=1, population_cap=50)
    res = run_ensemble(cfg)
    assert all(rec.capped for rec in res.records)
    assert all(rec.final_population > 50 for rec in res.records)
    assert res.summary["used"] == 0 and res.summary["capped_count"] == 30
    assert res.summary["mean_visit_count"] is None
    assert res.visit_counts().size == 0 and res.visit_counts(include_capped=True).size == 30


def test_config_validation():
    env = Homogeneous(0.5)
    for kwargs in (dict(horizon=0), dict(level=-1), dict(replications=0), dict(seed=-1),
                   dict(seed=1 << 64), dict(population_cap=0), dict(checkpoints=(0,)), dict(checkpoints=(11,))):
        base = dict(env=env, horizon=10, level=0, replications=1, seed=0)
        base.update(kwargs)
        with pytest.raises(ValueError):
            SimulationConfig(**base)
    assert SimulationConfig(env, 10, 0, 1, 0, checkpoints=(5, 2, 5)).checkpoints == (2, 5)
    with pytest.raises(ValueError):
        run_replication(SimulationConfig(env, 10, 0, 3, 0), 3)


def test_probability_of_zero_at_ten():
    cfg = SimulationConfig(Homogeneous(0.5), 10, 0, 20_000, seed=20261015)
    res = run_ensemble(cfg, pmf_max=0)
    p = res.summary["final_pmf"][0]
    assert abs(p - 1 / 11) < 4 * math.sqrt((1 / 11) * (10 / 11) / 20_000)


@pytest.mark.parametrize("env", [Homogeneous(0.5), PolyCritical(0.5)], ids=repr)
@pytest.mark.parametrize("n", [1, 10, 100])
def test_final_population_law(env, n):
    reps = 5000
    res = run_ensemble(SimulationConfig(env, n, 0, reps, seed=1000 + n), pmf_max=200_000)
    finals = np.array([rec.final_population for rec in res.records])
    # bin into roughly equal-probability cells of the exact geometric law
    t = DTable(env)
    d = t.d(n)
    edges = sorted({int(d * q) for q in (0.1, 0.3, 0.6, 1.0, 1.6, 2.5)} | {0})
    edges = [e for e in edges if e > 0]
    cells = [0] + edges + [np.inf]
    r = 1 - 1 / d
    cdf = lambda x: 1.0 if np.isinf(x) else 1 - r**x  # P(Z < x)
    obs = [np.sum((finals >= lo) & (finals < hi)) for lo, hi in zip(cells, cells[1:])]
    exp = [reps * (cdf(hi) - cdf(lo)) for lo, hi in zip(cells, cells[1:])]
    assert stats.chisquare(obs, exp).pvalue > 1e-3


def test_mean_visit_count_matches_exact():
    env = PolyCritical(0.5)
    res = run_ensemble(SimulationConfig(env, 200, 1, 4000, seed=8))
    exact = visit_count_moment(DTable(env), 200, 1, 1)
    assert abs(res.summary["mean_visit_count"] - exact) < 4 * res.summary["se_mean_visit_count"]


def test_supercritical_poly_stops_visiting():
    # B = 1.5: finitely many visits, so late visits are rare
    env = PolyCritical(1.5)
    res = run_ensemble(SimulationConfig(env, 5000, 0, 500, seed=4, record_times=True))
    late = sum(sum(1 for t in rec.visit_times if t > 1000) for rec in res.records)
    t = DTable(env)
    expected_late = 500 * sum(level_probability(t, i, 0) for i in range(1001, 5001))
    assert late < 3 * expected_late + 10


def test_summary_pmf_matches_level_pmf():
    env = Explicit([0.3, 0.45], 0.5)
    res = run_ensemble(SimulationConfig(env, 6, 0, 20_000, seed=2), pmf_max=5)
    want = level_pmf(DTable(env), 6, 5)
    se = np.sqrt(want * (1 - want) / 20_000)
    assert np.all(np.abs(np.array(res.summary["final_pmf"]) - want) < 4 * se)
    assert res.summary["final_pmf_tail"] == pytest.approx(1 - sum(res.summary["final_pmf"]))


def test_csv_outputs(tmp_path):
    cfg = SimulationConfig(Homogeneous(0.5), 20, 0, 3, seed=1, record_times=True)
    res = run_ensemble(cfg)
    res.write_csv(tmp_path / "e.csv")
    res.write_times_csv(tmp_path / "t.csv")
    res.write_summary(tmp_path / "s.json")
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines[0] == "rep,visit_count,final_population,capped"
    assert [int(l.split(",")[0]) for l in lines[1:]] == [0, 1, 2]
    tlines = (tmp_path / "t.csv").read_text().splitlines()
    assert tlines[0] == "rep,t" and len(tlines) - 1 == sum(r.visit_count for r in res.records)
