"""Invariant checks on one concrete scenario instance (the ``verify`` command)."""

from __future__ import annotations

import warnings
from typing import NamedTuple

import numpy as np

from ..allocation import _meets, allocate, counts_for_total, required_rates
from ..game import C, NoInteriorEquilibrium, build_game, expected_utility, solve_fair_pmne
from ..learning import (ContractionWarning, bge_fixed_point, contraction_condition,
                        contraction_modulus, epsilon_bound, max_deviation_gain)
from ..netmodel import total_rates, wired_shares
from .config import ScenarioConfig, build_scenario
from .runner import _SCENARIO, stream


class Check(NamedTuple):
    name: str
    ok: bool
    detail: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.ok else 'FAIL'}  {self.name}" + (f"  ({self.detail})" if self.detail else "")


def verify_instance(config: ScenarioConfig, run: int = 0) -> list[Check]:
    scenario = build_scenario(config, stream(config["run.seed"], run, _SCENARIO))
    demands = scenario.demands
    game = build_game(scenario, unit=config["game.unit"])
    G, phi = game.g, game.phi
    checks = []

    sums = [wired_shares(demands, counts_for_total(demands, f)).sum() for f in {0, phi, G}]
    checks.append(Check("wired shares sum to one", all(abs(s - 1) < 1e-12 for s in sums)))

    s_phi = counts_for_total(demands, phi)
    a1, a2 = allocate(scenario, s_phi), allocate(scenario, s_phi)
    checks.append(Check("allocation is deterministic",
                        np.array_equal(a1.eta, a2.eta) and np.array_equal(a1.wired, a2.wired)))
    try:
        a1.check(scenario.rbs.num_mmw)
        checks.append(Check("allocation respects block exclusivity", True))
    except AssertionError as exc:
        checks.append(Check("allocation respects block exclusivity", False, str(exc)))

    def feasible(f):
        s = counts_for_total(demands, f)
        R, D = required_rates(demands, s)
        return bool(_meets(total_rates(allocate(scenario, s), scenario), R + D).all())

    if phi == 0:
        ok = G == 0 or not feasible(0) or not feasible(1)
    else:
        ok = all(feasible(f) for f in range(phi + 1)) and (phi == G or not feasible(phi + 1))
    checks.append(Check("capacity threshold is the first-failure crossing", ok, f"phi={phi}"))

    checks.append(Check("utility table sign structure", game.sign_structure_ok()))
    anti = all(game.u_d_at(G - fc) == -game.u_c_at(fc + 1) for fc in range(0, G))
    checks.append(Check("defer utility mirrors request utility", anti))

    scale = max(np.abs(game.u_c).max(), 1e-300)
    try:
        p_star = solve_fair_pmne(game)
        grid = np.linspace(0, 1, 101)
        ubar = np.array([expected_utility(C, q, game) for q in grid])
        checks.append(Check("expected request utility decreases in p",
                            bool(np.all(np.diff(ubar) <= 1e-12 * scale))))
        res = abs(expected_utility(C, p_star, game))
        checks.append(Check("fair mixed equilibrium is an indifference point",
                            res <= 1e-9 * scale, f"p*={p_star:.6f}"))
    except NoInteriorEquilibrium as exc:
        checks.append(Check("fair mixed equilibrium", True, f"none interior: {exc}"))

    kappa = float(np.max(np.atleast_1d(config["learning.kappa"])))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ContractionWarning)
        p = bge_fixed_point(game, kappa, tol=1e-10)
    gain = max_deviation_gain(p, game)
    checks.append(Check("logit equilibrium deviation gain within ln2/kappa",
                        gain <= epsilon_bound(kappa) * (1 + 1e-9),
                        f"gain={gain:.4g}, bound={epsilon_bound(kappa):.4g}"))
    checks.append(Check("contraction inequality on kappa", contraction_condition(game, kappa),
                        f"modulus bound={contraction_modulus(game, kappa):.3g}"))
    return checks
