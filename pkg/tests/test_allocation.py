import itertools

import numpy as np
import pytest

from backhaul_mg.allocation import (BackhaulAssignment, DemandModel, allocate, compute_phi,
                                    counts_for_total, demand_curve, phi_from_slack,
                                    priority_order, required_rates, slack_curve, slack_for)
from backhaul_mg.harness.config import build_scenario, preset
from backhaul_mg.harness.runner import _SCENARIO, stream
from backhaul_mg.netmodel import DomainError, total_rates

from conftest import toy_scenario


def test_required_rates_examples():
    dm = DemandModel((np.array([8e6]),), (np.array([2.0]),),
                     (np.array([1e6, 2e6, 3e6]),), (np.ones(3),), (np.ones(3),))
    R, D = required_rates(dm, [0])
    assert R[0] == 4e6 and D[0] == 0.0
    R, D = required_rates(dm, [2])
    assert D[0] == 3e6


@pytest.mark.parametrize("s", [[-1], [4]])
def test_required_rates_range(s):
    dm = DemandModel.from_rates([[1.0]], [[1.0, 1.0, 1.0]])
    with pytest.raises(DomainError):
        required_rates(dm, s)


def test_single_sbs_gets_every_block():
    sc = toy_scenario([[1e6]], [[]], 0.0, mmw_bw=[1e6, 1e6], sub6_bw=[1e6], mmw_power_db=200.0)
    a = allocate(sc, [0])
    assert a.eta.sum() == 3


def test_two_identical_blocks_split_evenly():
    sc = toy_scenario([[5e6], [5e6]], [[], []], 0.0, sub6_bw=[1e6, 1e6],
                      positions=[(10.0, 0.0), (10.0, 0.0)])
    a = allocate(sc, [0, 0])
    assert a.blocks_held().tolist() == [1, 1]


def test_allocation_is_deterministic_and_exclusive():
    sc = build_scenario(preset("default"), stream(2024, 0, _SCENARIO))
    s = counts_for_total(sc.demands, 40)
    a, b = allocate(sc, s), allocate(sc, s)
    assert np.array_equal(a.eta, b.eta)
    a.check(sc.rbs.num_mmw)
    np.testing.assert_allclose(a.wired.sum(), sc.wired.c_max)


def _satisfaction(sc, eta, wired, demand):
    return np.min(np.minimum(total_rates(BackhaulAssignment(eta, wired), sc) / demand, 1.0))


@pytest.mark.parametrize("seed", range(8))
@pytest.mark.parametrize("blocks", [(2, 0), (1, 1)])
def test_greedy_matches_bruteforce_maxmin_on_two_blocks(seed, blocks):
    k1, k2 = blocks
    c_max = float(np.random.default_rng(seed).uniform(1e8, 1e9))
    cfg = preset("default").with_overrides({"mmw.num_blocks": k1, "sub6.num_blocks": k2,
                                            "backhaul.wired.c_max": c_max})
    sc = build_scenario(cfg, seed)
    s = np.minimum(sc.demands.num_predicted, 3)
    a = allocate(sc, s)
    R, D = required_rates(sc.demands, s)
    M, N = sc.num_mbs, sc.num_sbs
    units = [(k, m) for k in range(2) for m in range(M)]
    best = -np.inf
    for choice in itertools.product(range(N + 1), repeat=len(units)):
        eta = np.zeros((2, M, N), dtype=np.int8)
        for (k, m), c in zip(units, choice):
            if c < N:
                eta[k, m, c] = 1
        if k1 and np.any(eta[:k1].any(axis=2).sum(axis=1) > 1):
            continue
        best = max(best, _satisfaction(sc, eta, a.wired, R + D))
    assert _satisfaction(sc, a.eta, a.wired, R + D) == pytest.approx(best, rel=1e-9)


def test_priority_order_round_robin():
    dm = DemandModel.from_rates([[1.0]] * 3, [[1.0] * 2, [], [1.0] * 3])
    assert priority_order(dm).tolist() == [0, 2, 0, 2, 2]
    assert counts_for_total(dm, 3).tolist() == [2, 0, 1]
    with pytest.raises(DomainError):
        counts_for_total(dm, 6)


def test_phi_toy_three_unit_files():
    # wired only: every SBS gets C * load share, so feasibility is sum(load) <= C
    sc = toy_scenario([[2.0], [1.0]], [[1.0] * 4, [1.0] * 4], 3.0 + 3.0 + 0.5, mmw_bw=[1.0])
    assert compute_phi(sc) == 3
    s = counts_for_total(sc.demands, 3)
    R, D = required_rates(sc.demands, s)
    assert np.all(total_rates(allocate(sc, s), sc) >= R + D)


def test_phi_limit_stops_early():
    sc = toy_scenario([[2.0], [1.0]], [[1.0] * 4, [1.0] * 4], 6.5, mmw_bw=[1.0])
    assert compute_phi(sc, limit=2) == 2
    assert compute_phi(sc, limit=5) == 3


def test_phi_matches_slack_curve():
    sc = build_scenario(preset("case1"), stream(2024, 1, _SCENARIO))
    assert phi_from_slack(slack_curve(sc), demand_curve(sc)) == compute_phi(sc)


@pytest.mark.parametrize("run", range(3))
def test_preset_extremes(run):
    low = build_scenario(preset("case2"), stream(2024, run, _SCENARIO))
    assert compute_phi(low) == 0
    high = build_scenario(preset("case3"), stream(2024, run, _SCENARIO))
    assert compute_phi(high) == 150


def test_slack_sign_at_threshold():
    sc = build_scenario(preset("case1"), stream(2024, 0, _SCENARIO))
    phi = compute_phi(sc)
    assert np.all(slack_for(sc, counts_for_total(sc.demands, phi)) >= -1e-6)
    assert np.any(slack_for(sc, counts_for_total(sc.demands, phi + 1)) < 0)
