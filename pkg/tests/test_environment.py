import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bpve.environment import (
    EnvSpecError,
    Explicit,
    Homogeneous,
    PolyCritical,
    env_from_dict,
    env_from_json,
    env_to_json,
    is_critical,
    mean_at,
    p_at,
)


def test_poly_critical_values():
    env = PolyCritical(B=1, i0=1)
    assert p_at(env, 1) == 0.5
    assert p_at(env, 2) == 0.375
    assert mean_at(env, 2) == pytest.approx(5 / 3, rel=1e-15)


def test_homogeneous_constant():
    env = Homogeneous(0.5)
    assert all(p_at(env, k) == 0.5 for k in (1, 7, 10**6))
    assert mean_at(env, 3) == 1.0


def test_mean_at_from_p():
    assert mean_at(Explicit([0.375]), 1) == pytest.approx(0.625 / 0.375)


def test_mean_product_grows_like_n_to_the_B():
    # m_1...m_n ~ c n^B: the ratio to n^B levels off
    m = PolyCritical(1.0, 1).p_array(10**6)
    logprod = np.cumsum(np.log((1 - m) / m))
    ratios = [np.exp(logprod[n - 1]) / n for n in (10**4, 10**5, 10**6)]
    assert abs(ratios[2] / ratios[1] - 1) < 1e-4
    assert abs(ratios[1] / ratios[0] - 1) < 1e-3


def test_default_i0():
    assert PolyCritical(1.5).i0 == 3
    assert PolyCritical(0.0).i0 == 1
    assert PolyCritical(4.0).i0 == 5


def test_B_zero_is_critical_homogeneous():
    a = PolyCritical(0.0).p_array(10**4)
    b = Homogeneous(0.5).p_array(10**4)
    np.testing.assert_array_equal(a, b)
    assert is_critical(PolyCritical(0.0))
    assert not is_critical(PolyCritical(0.1))


def test_mean_tends_to_one():
    env = PolyCritical(1.5, 2)
    for k in (11, 100, 1000, 10**5):
        assert abs(mean_at(env, k) - 1) < 10 * env.B / k


@pytest.mark.parametrize(
    "kwargs, field",
    [
        (dict(B=-1), "B"),
        (dict(B=4, i0=2), "i0"),
        (dict(B=1, i0=0), "i0"),
        (dict(B=float("nan")), "B"),
    ],
)
def test_poly_critical_rejects(kwargs, field):
    with pytest.raises(EnvSpecError) as err:
        PolyCritical(**kwargs)
    assert err.value.field == field


@pytest.mark.parametrize("p", [0.0, 0.51, 1.0, -0.2, "x"])
def test_homogeneous_rejects(p):
    with pytest.raises(EnvSpecError):
        Homogeneous(p)


def test_explicit_tail_and_validation():
    env = Explicit([0.4, 0.3], tail=0.45)
    assert [p_at(env, k) for k in (1, 2, 3, 100)] == [0.4, 0.3, 0.45, 0.45]
    np.testing.assert_array_equal(env.p_array(4), [0.4, 0.3, 0.45, 0.45])
    assert Explicit([0.4]).tail == 0.5
    with pytest.raises(EnvSpecError) as err:
        Explicit([0.4, 0.7])
    assert err.value.field == "ps[1]"


def test_p_at_rejects_k_zero():
    with pytest.raises(ValueError):
        p_at(Homogeneous(), 0)


def test_json_round_trip():
    for env in (Homogeneous(0.4), PolyCritical(1.5, 3), Explicit([0.5, 0.25], 0.5)):
        assert env_from_json(env_to_json(env)) == env


def test_json_rejects_unknown_and_malformed():
    with pytest.raises(EnvSpecError) as err:
        env_from_dict({"kind": "homogeneous", "p": 0.5, "B": 1})
    assert err.value.field == "B"
    with pytest.raises(EnvSpecError) as err:
        env_from_dict({"kind": "lognormal"})
    assert err.value.field == "kind"
    with pytest.raises(EnvSpecError) as err:
        env_from_json("{not json")
    assert err.value.field == "env"
    with pytest.raises(EnvSpecError) as err:
        env_from_dict({"kind": "poly_critical"})
    assert err.value.field == "B"
    assert env_from_dict(json.loads('{"kind": "poly_critical", "B": 1, "i0": 2.0}')).i0 == 2


@settings(max_examples=60, deadline=None)
@given(B=st.floats(0, 20), extra=st.integers(0, 5), k=st.integers(1, 10**6))
def test_poly_critical_bounds(B, extra, k):
    env = PolyCritical(B, int(B / 2) + 1 + extra)
    p = p_at(env, k)
    assert 0 < p <= 0.5
    assert mean_at(env, k) >= 1.0
    assert (mean_at(env, k) == 1.0) == (p == 0.5)


@settings(max_examples=60, deadline=None)
@given(ps=st.lists(st.floats(1e-6, 0.5), max_size=20), tail=st.floats(1e-6, 0.5))
def test_explicit_bounds(ps, tail):
    env = Explicit(ps, tail)
    arr = env.p_array(len(ps) + 5)
    assert np.all((arr > 0) & (arr <= 0.5))
    assert np.all((1 - arr) / arr >= 1.0)
