import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_trajectory, random_dataset
from trac import contrastive as cb
from trac.envs import ChainCMDP
from trac.trajectory_store import Dataset


def _dataset(returns, costs):
    return Dataset([make_trajectory(i, [r], [c]) for i, (r, c) in enumerate(zip(returns, costs))], 3, 2)


def test_split_boundary_inclusive():
    safe, unsafe = cb.split_by_cost(_dataset([0, 0, 0], [3, 45, 40]), 40)
    assert safe == {0, 2} and unsafe == {1}


def test_split_zero_threshold_all_zero_costs():
    safe, unsafe = cb.split_by_cost(_dataset([1, 2, 3], [0, 0, 0]), 0)
    assert safe == {0, 1, 2} and not unsafe


def test_split_matches_filter(rng):
    data = random_dataset(rng, 500)
    l = 4.0
    safe, unsafe = cb.split_by_cost(data, l)
    expect_safe = set()
    for tau in data:
        if sum(float(c) for c in tau.costs) <= l:
            expect_safe.add(tau.id)
    assert safe == expect_safe
    assert unsafe == {t.id for t in data} - expect_safe


def test_select_top_half_only():
    desirable, undesirable = cb.select_contrastive(list(range(10)), 50, 0, [10, 11, 12, 13])
    assert desirable == [0, 1, 2, 3, 4]
    assert undesirable == [10, 11, 12, 13]


def test_select_top_and_bottom():
    desirable, undesirable = cb.select_contrastive(list(range(10)), 50, 50, [])
    assert desirable == [0, 1, 2, 3, 4]
    assert undesirable == [5, 6, 7, 8, 9]


def test_select_ceiling_rule_by_enumeration():
    # smallest count c with c >= 0.25 * 7, found by counting up
    c = 0
    while c < 0.25 * 7:
        c += 1
    desirable, _ = cb.select_contrastive(list(range(7)), 25, 0, [99])
    assert len(desirable) == c == 2


def test_select_errors():
    with pytest.raises(cb.ContrastiveError, match="no desirable candidates"):
        cb.select_contrastive([], 50, 0, [1])
    with pytest.raises(cb.ContrastiveError, match="both classes"):
        cb.select_contrastive([0, 1], 50, 0, [])
    with pytest.raises(cb.ContrastiveError):
        cb.select_contrastive([0, 1], 60, 50, [2])


def test_weight_endpoints():
    assert cb.weight_desirable(50, 10, 50, 0.7) == 1.0
    assert cb.weight_desirable(10, 10, 50, 0.7) == 0.7
    assert cb.weight_undesirable_safe(10, 10, 50, 0.7) == 1.0
    assert cb.weight_undesirable_safe(50, 10, 50, 0.7) == 0.7
    assert cb.weight_desirable(30, 10, 50, 0.5) == 0.75
    assert cb.weight_undesirable_safe(30, 10, 50, 0.5) == 0.75


def test_weight_worked_value():
    assert cb.weight_desirable(30, 10, 50, 0.7) == pytest.approx(0.85, abs=1e-12)
    assert cb.weight_undesirable_safe(30, 10, 50, 0.7) == pytest.approx(0.85, abs=1e-12)


def test_weight_unsafe_constant():
    assert cb.weight_unsafe() == 1.0


def test_degenerate_range():
    assert cb.weight_desirable(3, 3, 3, 0.7) == 1.0
    assert cb.weight_undesirable_safe(3, 3, 3, 0.7) == 1.0


def test_delta_one_gives_unit_weights():
    assert cb.weight_desirable(12, 10, 50, 1.0) == 1.0
    assert cb.weight_undesirable_safe(12, 10, 50, 1.0) == 1.0


@given(st.floats(-100, 100), st.floats(-100, 100), st.floats(0.01, 50), st.floats(0, 0.999))
def test_weight_monotone_and_bounded(v1, v2, span, delta):
    lo = min(v1, v2) - span * 0.1
    hi = max(v1, v2) + span
    hi_v, lo_v = max(v1, v2), min(v1, v2)
    wd_hi, wd_lo = cb.weight_desirable(hi_v, lo, hi, delta), cb.weight_desirable(lo_v, lo, hi, delta)
    wu_hi, wu_lo = cb.weight_undesirable_safe(hi_v, lo, hi, delta), cb.weight_undesirable_safe(lo_v, lo, hi, delta)
    assert wd_hi >= wd_lo and wu_hi <= wu_lo
    for w in (wd_hi, wd_lo, wu_hi, wu_lo):
        assert delta - 1e-12 <= w <= 1 + 1e-12


def test_lambdas_symmetric():
    assert cb.compute_lambdas(40, 40, 1.0) == (0.5, 0.5)


def test_lambdas_hand_solved():
    ld, lu = cb.compute_lambdas(100, 50, 0.25)
    assert ld == pytest.approx(1 / 9, abs=1e-15)
    assert lu == pytest.approx(8 / 9, abs=1e-15)


@given(st.integers(1, 10_000), st.integers(1, 10_000), st.floats(1e-3, 1e3))
def test_lambda_identities(n_d, n_u, eta):
    ld, lu = cb.compute_lambdas(n_d, n_u, eta)
    assert abs(ld + lu - 1) <= 1e-12
    assert math.isclose(ld * n_d / (lu * n_u), eta, rel_tol=1e-12)
    assert 0 < ld < 1 and 0 < lu < 1


def test_lambdas_reject_empty_class():
    with pytest.raises(cb.ContrastiveError):
        cb.compute_lambdas(0, 3, 1.0)
    with pytest.raises(cb.ContrastiveError):
        cb.compute_lambdas(3, 2, 0.0)


def test_build_all_safe_identical_returns():
    data = _dataset([5.0] * 6, [0.0] * 6)
    cd = cb.build(data, 1.0, 50, 50, 0.7, 0.25)
    assert cd.n_d == 3 and cd.n_u == 3
    assert all(m.weight == 1.0 for m in cd.members)


def test_build_excludes_costly_from_desirable():
    returns = [10, 9, 8, 7, 6, 5]
    costs = [20, 1, 30, 2, 0, 9]
    cd = cb.build(_dataset(returns, costs), 8, 50, 0, 0.7, 0.25)
    assert {m.traj_id for m in cd.desirable} == {1, 3}
    assert {m.traj_id for m in cd.undesirable} == {0, 2, 5}
    assert cd.v_min == 5 and cd.v_max == 10


def test_build_chain_brute_force():
    chain = ChainCMDP()
    data = chain.enumerate_dataset()
    cd = cb.build(data, 2.0, 50, 0, 0.7, 1.0)
    # every plan with at most two runs is safe; top half of the 11 safe plans by return
    best = chain.optimal_safe_return(2.0)
    assert max(m.ret for m in cd.desirable) == best == 6.0
    assert all(m.cost <= 2.0 for m in cd.desirable)
    assert {m.traj_id for m in cd.undesirable} == {i for i, t in enumerate(data) if t.costs.sum() > 2}


def brute_force_build(data, l, x, y, delta, eta):
    """Straightforward reimplementation used as the oracle for build()."""
    rets = {t.id: sum(t.rewards.tolist()) for t in data}
    costs = {t.id: sum(t.costs.tolist()) for t in data}
    v_min, v_max = min(rets.values()), max(rets.values())
    safe = [i for i in rets if costs[i] <= l]
    unsafe = [i for i in rets if costs[i] > l]
    safe.sort(key=lambda i: (-rets[i], i))
    n = len(safe)
    n_top = max(1, -(-x * n // 100)) if x > 0 else 0
    n_bot = max(1, -(-y * n // 100)) if y > 0 else 0
    n_bot = min(n_bot, n - n_top)
    top, bottom = safe[:n_top], safe[n - n_bot:] if n_bot else []

    def frac(v):
        return 1.0 if v_max == v_min else (v - v_min) / (v_max - v_min)

    out = {}
    for i in top:
        out[i] = (1, frac(rets[i]) * (1 - delta) + delta)
    for i in bottom:
        f = 0.0 if v_max == v_min else frac(rets[i])
        out[i] = (0, (1 - f) * (1 - delta) + delta)
    for i in unsafe:
        out[i] = (0, 1.0)
    n_d = len(top)
    n_u = len(bottom) + len(unsafe)
    ld = eta * n_u / (n_d + eta * n_u)
    return out, ld, 1 - ld


def test_build_properties_and_oracle():
    rng = np.random.default_rng(2024)
    for trial in range(200):
        data = random_dataset(rng, int(rng.integers(4, 40)))
        l = float(rng.uniform(0, 8))
        x = int(rng.integers(1, 80))
        y = int(rng.integers(0, 100 - x + 1))
        delta = float(rng.choice([0.0, 0.4, 0.7, 1.0, rng.uniform(0, 1)]))
        eta = float(rng.uniform(0.1, 3))
        safe, unsafe = cb.split_by_cost(data, l)
        if not safe or (not unsafe and y == 0):
            with pytest.raises(cb.ContrastiveError):
                cb.build(data, l, x, y, delta, eta)
            continue
        cd = cb.build(data, l, x, y, delta, eta)
        des = {m.traj_id for m in cd.desirable}
        und = {m.traj_id for m in cd.undesirable}
        assert not des & und
        assert unsafe <= und
        assert des <= safe
        for m in cd.members:
            assert delta - 1e-12 <= m.weight <= 1 + 1e-12
            if m.origin == cb.UNSAFE:
                assert m.weight == 1.0 and m.label == 0
            if m.label == 1:
                assert m.origin == cb.SAFE_TOP
        assert abs(cd.lambda_d + cd.lambda_u - 1) <= 1e-12
        assert math.isclose(cd.lambda_d * cd.n_d / (cd.lambda_u * cd.n_u), eta, rel_tol=1e-12)
        expect, ld, lu = brute_force_build(data, l, x, y, delta, eta)
        got = {m.traj_id: (m.label, m.weight) for m in cd.members}
        assert got.keys() == expect.keys(), trial
        for i in got:
            assert got[i][0] == expect[i][0]
            assert got[i][1] == pytest.approx(expect[i][1], abs=1e-12)
        assert cd.lambda_d == pytest.approx(ld, abs=1e-12)


def test_build_deterministic_with_ties():
    data = _dataset([1, 1, 1, 1, 0], [0, 0, 0, 0, 9])
    a = cb.build(data, 8, 50, 0, 0.7, 0.25)
    b = cb.build(data, 8, 50, 0, 0.7, 0.25)
    assert a == b
    assert [m.traj_id for m in a.desirable] == [0, 1]


def test_partition_report(tmp_path):
    data = _dataset([3, 2, 1, 0], [0, 0, 0, 9])
    cd = cb.build(data, 8, 25, 0, 0.7, 0.25)
    path = tmp_path / "p.csv"
    cb.write_partition_report(data, cd, path, ["config_hash=abc"])
    lines = path.read_text().splitlines()
    assert lines[0] == "# config_hash=abc"
    assert lines[1] == "traj_id,return,cost,label,weight,origin"
    assert lines[2].endswith("1,1.0,safe_top")
    assert lines[-1].endswith("0,1.0,unsafe")
    assert len(lines) == 2 + 4
