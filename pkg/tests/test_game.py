import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from backhaul_mg.allocation import compute_phi
from backhaul_mg.game import (GameSpec, NoInteriorEquilibrium, bmmg_mixed_strategy, build_game,
                              expected_utility, expected_utility_general, has_monotone_utility,
                              is_pure_ne, pure_equilibria, solve_fair_pmne, utility_bmmg)
from backhaul_mg.harness.config import build_scenario, preset
from backhaul_mg.harness.runner import _SCENARIO, stream

from conftest import random_game, small_config


def enumerate_expected(n, action, p, game):
    """Sum over every opponent profile; the dumbest correct oracle."""
    G = game.g
    others = [i for i in range(G) if i != n]
    total = 0.0
    for bits in itertools.product((0, 1), repeat=G - 1):
        w = 1.0
        for i, b in zip(others, bits):
            w *= p[i] if b else 1.0 - p[i]
        k = sum(bits)
        total += w * (game.u_c_at(k + 1) if action == "c" else game.u_d_at(G - k))
    return total


@pytest.mark.parametrize("g", [1, 2, 5, 9])
def test_expected_utility_matches_enumeration(rng, g):
    game = random_game(rng, g)
    for q in (0.0, 0.3, 0.77, 1.0):
        for a in ("c", "d"):
            assert expected_utility(a, q, game) == pytest.approx(
                enumerate_expected(0, a, [q] * g, game), abs=1e-12)


def test_general_matches_enumeration(rng):
    game = random_game(rng, 7)
    p = rng.random(7)
    for n in range(7):
        for a in ("c", "d"):
            assert expected_utility_general(n, a, p, game) == pytest.approx(
                enumerate_expected(n, a, p, game), abs=1e-12)


def test_general_reduces_to_binomial(rng):
    game = random_game(rng, 10)
    for q in np.linspace(0, 1, 7):
        for a in ("c", "d"):
            assert abs(expected_utility_general(3, a, [q] * 10, game)
                       - expected_utility(a, q, game)) <= 1e-12


def test_expected_utility_rejects_bad_input(rng):
    game = random_game(rng, 3)
    with pytest.raises(ValueError):
        expected_utility("x", 0.5, game)
    with pytest.raises(ValueError):
        expected_utility("c", 1.5, game)


def test_antisymmetry_on_built_game():
    game = build_game(build_scenario(preset("case1"), stream(2024, 0, _SCENARIO)))
    G = game.g
    assert all(game.u_d_at(G - fc) == -game.u_c_at(fc + 1) for fc in range(G))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=30))
def test_antisymmetry_property(table):
    game = GameSpec.from_table(table)
    G = game.g
    for fc in range(G):
        assert game.u_d_at(G - fc) == -game.u_c_at(fc + 1)


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 25), st.integers(0, 2 ** 32 - 1))
def test_fair_pmne_is_root(g, seed):
    game = random_game(np.random.default_rng(seed), g, interior=True)
    p = solve_fair_pmne(game)
    assert 0.0 < p < 1.0
    assert abs(expected_utility("c", p, game)) < 1e-9


def test_fair_pmne_needs_sign_change():
    with pytest.raises(NoInteriorEquilibrium):
        solve_fair_pmne(GameSpec.from_table([-1.0, -2.0]))
    with pytest.raises(NoInteriorEquilibrium):
        solve_fair_pmne(GameSpec.from_table([1.0, 2.0]))


def test_fair_pmne_two_player_closed_form():
    # u(c,1)(1-p) + u(c,2)p = 0  ->  p = a / (a + b)
    a, b = 3.0, 1.0
    assert solve_fair_pmne(GameSpec(2, 1, np.array([a, -b]))) == pytest.approx(0.75, abs=1e-9)


def test_mixed_strategy_is_binomial():
    probs = bmmg_mixed_strategy(4, 0.25)
    assert probs.sum() == pytest.approx(1.0)
    assert probs[0] == pytest.approx(0.75 ** 4)
    assert probs[2] == pytest.approx(6 * 0.25 ** 2 * 0.75 ** 2)
    with pytest.raises(ValueError):
        bmmg_mixed_strategy(3, 1.0)


@pytest.mark.parametrize("run", range(3))
@pytest.mark.parametrize("name", ["case1", "case2", "case3", "default"])
def test_built_game_structure(run, name):
    sc = build_scenario(preset(name), stream(2024, run, _SCENARIO))
    game = build_game(sc)
    assert game.g == sc.demands.total_predicted
    assert game.phi == compute_phi(sc)
    assert game.sign_structure_ok()
    assert game.num_virtual == game.g - np.count_nonzero(sc.demands.num_predicted)
    assert game.asymmetry >= 0.0


def test_build_game_unit_scales_table():
    sc = build_scenario(preset("case1"), 5)
    np.testing.assert_allclose(build_game(sc, unit=1e6).u_c * 1e6, build_game(sc).u_c)


def test_utility_zero_at_threshold():
    sc = build_scenario(small_config(np.random.default_rng(4), wired_only=True), 4)
    phi = compute_phi(sc)
    F = sc.demands.num_predicted
    for s in itertools.product(*(range(f + 1) for f in F)):
        if sum(s) == phi:
            assert all(utility_bmmg(n, s[n], s, sc, phi) == 0.0 for n in range(len(s)))


def test_pure_ne_example_three_sbs():
    # three SBSs, two files each, room for exactly three
    from conftest import toy_scenario
    sc = toy_scenario([[1.0]] * 3, [[1.0, 1.0]] * 3, 6.5, mmw_bw=[1.0])
    phi = compute_phi(sc)
    assert phi == 3
    got = set(pure_equilibria(sc, phi))
    assert got == {s for s in itertools.product(range(3), repeat=3) if sum(s) == 3}
    ok, dev = is_pure_ne((0, 1, 1), sc, phi)
    assert not ok and dev.new_count > [0, 1, 1][dev.sbs] and dev.gain > 0


def test_monotone_hypothesis_gives_exact_pne_set():
    rng = np.random.default_rng(99)
    checked = 0
    for seed in range(60):
        sc = build_scenario(small_config(rng, wired_only=True), seed)
        F = sc.demands.num_predicted
        if F.max() > 3:
            continue
        phi = compute_phi(sc)
        if not has_monotone_utility(sc, phi):
            continue
        checked += 1
        want = {s for s in itertools.product(*(range(f + 1) for f in F)) if sum(s) == phi}
        assert set(pure_equilibria(sc, phi)) == want
    assert checked >= 20
