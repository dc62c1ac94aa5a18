import math

import numpy as np
import pytest

from backhaul_mg.allocation import BackhaulAssignment, DemandModel, allocate
from backhaul_mg.harness.config import build_scenario, preset
from backhaul_mg.netmodel import (DegenerateDemandError, DomainError, MmwParams, ResourceBlockSet,
                                  Sub6Params, WiredBackhaul, db_to_linear, mmw_path_loss,
                                  mmw_snr, sub6_sinr, total_rate, total_rates, wired_share,
                                  wired_shares)

from conftest import toy_scenario


@pytest.mark.parametrize("d,alpha,beta,want", [
    (1.0, 2.0, 70.0, 70.0),
    (10.0, 2.0, 70.0, 90.0),
    (100.0, 3.3, 61.4, 61.4 + 3.3 * 20.0),
])
def test_path_loss_values(d, alpha, beta, want):
    assert mmw_path_loss(d, MmwParams(alpha=alpha, beta=beta)) == pytest.approx(want, abs=1e-12)


def test_path_loss_adds_deviation():
    p = MmwParams()
    assert mmw_path_loss(50.0, p, 3.5) - mmw_path_loss(50.0, p) == pytest.approx(3.5)


def test_path_loss_rejects_short_distance():
    with pytest.raises(DomainError):
        mmw_path_loss(0.5, MmwParams())


def test_snr_values():
    assert mmw_snr(10 ** 9, 90.0, 1.0) == pytest.approx(0.0, abs=1e-12)
    assert mmw_snr(10 ** 10, 90.0, 2.0) == pytest.approx(5.0)


@pytest.mark.parametrize("p,n1", [(0.0, 1.0), (1.0, 0.0), (-1.0, 1.0)])
def test_snr_domain(p, n1):
    with pytest.raises(DomainError):
        mmw_snr(p, 80.0, n1)


def test_scenario_snr_matches_scalar_recomputation():
    sc = build_scenario(preset("default"), 7)
    mp = sc.mmw
    for m in range(sc.num_mbs):
        for n in range(sc.num_sbs):
            d = math.dist(sc.topology.mbs_positions[m], sc.topology.sbs_positions[n])
            loss = mp.beta + mp.alpha * 10 * math.log10(max(d, 1.0)) + sc.mmw_deviation[m, n]
            snr_db = (10 * math.log10(sc.rbs.mmw_power[m, 0, n]) - loss) / mp.noise_n1
            assert sc.mmw_gamma[m, 0, n] == pytest.approx(10 ** (snr_db / 10), rel=1e-12)


def _sub6_only(m, n, k2, gains, noise):
    rbs = ResourceBlockSet(np.zeros(0), np.ones(k2), np.ones((m, 0, n)), np.ones((m, k2, n)))
    return rbs, Sub6Params(noise, gains)


def test_sinr_single_mbs():
    rbs, params = _sub6_only(1, 1, 1, np.full((1, 1, 1), 4.0), 2.0)
    eta = np.ones((1, 1, 1), dtype=np.int8)
    assert sub6_sinr(0, 0, 0, BackhaulAssignment(eta, np.zeros((1, 1))), params, rbs) == 2.0


def test_sinr_symmetric_interferer():
    rbs, params = _sub6_only(2, 2, 1, np.ones((2, 1, 2)), 1.0)
    eta = np.zeros((1, 2, 2), dtype=np.int8)
    eta[0, 0, 0] = eta[0, 1, 1] = 1
    assert sub6_sinr(0, 0, 0, BackhaulAssignment(eta, np.zeros((2, 2))), params, rbs) == 0.5


def test_sinr_idle_mbs_does_not_interfere():
    rbs, params = _sub6_only(2, 2, 1, np.ones((2, 1, 2)), 1.0)
    eta = np.zeros((1, 2, 2), dtype=np.int8)
    eta[0, 0, 0] = 1
    assert sub6_sinr(0, 0, 0, BackhaulAssignment(eta, np.zeros((2, 2))), params, rbs) == 1.0


def test_sinr_rejects_mmw_block():
    rbs = ResourceBlockSet(np.ones(1), np.ones(1), np.ones((1, 1, 1)), np.ones((1, 1, 1)))
    a = BackhaulAssignment(np.zeros((2, 1, 1), dtype=np.int8), np.zeros((1, 1)))
    with pytest.raises(DomainError):
        sub6_sinr(0, 0, 0, a, Sub6Params(1.0, np.ones((1, 1, 1))), rbs)


def test_sinr_matches_bruteforce_interferer_set():
    cfg = preset("default").with_overrides({"mmw.num_blocks": 1, "sub6.num_blocks": 2})
    sc = build_scenario(cfg, 3)
    a = allocate(sc, np.minimum(sc.demands.num_predicted, 5))
    K1 = sc.rbs.num_mmw
    for k in range(K1, sc.rbs.num_blocks):
        j = k - K1
        for m in range(sc.num_mbs):
            for n in range(sc.num_sbs):
                interf = 0.0
                for m2 in range(sc.num_mbs):
                    if m2 != m and any(a.eta[k, m2, n2] for n2 in range(sc.num_sbs)):
                        interf += sc.rbs.sub6_power[m2, j, n] * sc.sub6.channel_gains[m2, j, n]
                want = sc.rbs.sub6_power[m, j, n] * sc.sub6.channel_gains[m, j, n] / (
                    sc.sub6.noise_n2 + interf)
                assert sub6_sinr(m, k, n, a, sc.sub6, sc.rbs) == pytest.approx(want, rel=1e-12)


def test_wired_shares_examples():
    one = DemandModel.from_rates([[5.0]], [[1.0]])
    assert wired_share(0, one, [1]) == 1.0
    same = DemandModel.from_rates([[2.0]] * 4, [[]] * 4)
    np.testing.assert_allclose(wired_shares(same, [0] * 4), 0.25)
    two = DemandModel.from_rates([[2.0], [1.0]], [[1.0], []])
    np.testing.assert_allclose(wired_shares(two, [1, 0]), [0.75, 0.25])


def test_wired_shares_degenerate():
    # from_rates rejects zero-size files, so build zero load through q = 0 and no current files
    dm = DemandModel((np.zeros(0),), (np.zeros(0),), (np.ones(1),), (np.ones(1),), (np.zeros(1),))
    with pytest.raises(DegenerateDemandError):
        wired_shares(dm, [1])


def test_total_rate_trivial_cases():
    sc = toy_scenario([[1.0], [1.0]], [[], []], 0.0, sub6_bw=[1e6])
    eta = np.zeros((1, 1, 2), dtype=np.int8)
    assert total_rate(1, BackhaulAssignment(eta, np.zeros((1, 2))), sc) == 0.0
    # gamma = |h|^2 P / N2 = 1 -> one bit per hertz
    eta[0, 0, 0] = 1
    assert total_rate(0, BackhaulAssignment(eta, np.zeros((1, 2))), sc) == pytest.approx(1e6)


def test_total_rates_term_by_term():
    sc = build_scenario(preset("default"), 11)
    a = allocate(sc, np.minimum(sc.demands.num_predicted, 6))
    K1 = sc.rbs.num_mmw
    want = np.zeros(sc.num_sbs)
    for n in range(sc.num_sbs):
        acc = a.wired[:, n].sum()
        for m in range(sc.num_mbs):
            for k in range(sc.rbs.num_blocks):
                if not a.eta[k, m, n]:
                    continue
                if k < K1:
                    g = sc.mmw_gamma[m, k, n]
                else:
                    g = sub6_sinr(m, k, n, a, sc.sub6, sc.rbs)
                acc += sc.rbs.bandwidths[k] * math.log2(1 + g)
        want[n] = acc
    np.testing.assert_allclose(total_rates(a, sc), want, rtol=1e-12)


def test_wired_backhaul_validation():
    with pytest.raises(DomainError):
        WiredBackhaul(np.array([6.0, 6.0]), 10.0)
    with pytest.raises(DomainError):
        WiredBackhaul(np.array([-1.0]), 10.0)


def test_db_to_linear():
    np.testing.assert_allclose(db_to_linear([0.0, 10.0, -3.0]), [1.0, 10.0, 10 ** -0.3])
