import numpy as np
import pytest

from backhaul_mg.allocation import DemandModel
from backhaul_mg.game import GameSpec
from backhaul_mg.harness.config import preset
from backhaul_mg.netmodel import (MmwParams, ResourceBlockSet, Scenario, Sub6Params, Topology,
                                  WiredBackhaul)


def random_game(rng, g, phi=None, interior=False):
    """Random table with the request/defer sign structure.

    ``interior`` forces u(c,1) > 0 > u(c,G), which needs 2 <= phi < g.
    """
    if phi is None:
        lo = 2 if interior else 0
        phi = int(rng.integers(lo, g)) if g > lo else g
    pos = rng.uniform(0.05, 1.0, phi)
    if 1 <= phi < g:
        pos[-1] = 0.0
    neg = -np.cumsum(rng.uniform(0.05, 1.0, g - phi))
    return GameSpec(g, phi, np.concatenate([pos, neg]))


def small_config(rng, wired_only=False, **extra):
    n = int(rng.integers(1, 4))
    ov = {"topology.num_sbs": n, "topology.num_mbs": 1,
          "demand.predicted_total": int(rng.integers(1, 3 * n + 1)),
          "demand.current_per_sbs": 2,
          "backhaul.wired.c_max": float(rng.uniform(5e6, 60e6))}
    if wired_only:
        # useless radio and identical files: shares follow load exactly
        ov.update({"mmw.num_blocks": 1, "mmw.power_db": -400.0, "sub6.num_blocks": 0,
                   "demand.size_min": 8e6, "demand.size_max": 8e6,
                   "demand.deadline_min": 2.0, "demand.deadline_max": 2.0})
    else:
        ov.update({"mmw.num_blocks": 1, "sub6.num_blocks": 1})
    ov.update(extra)
    return preset("default").with_overrides(ov)


def toy_scenario(current, predicted, c_max, m=1, mmw_bw=(), sub6_bw=(), gains=None,
                 mmw_power_db=-400.0, positions=None):
    """Hand-built scenario; file rates given directly (unit deadlines)."""
    n = len(current)
    sbs = positions if positions is not None else [(10.0 * (i + 1), 0.0) for i in range(n)]
    topo = Topology(np.zeros((m, 2)), np.asarray(sbs, dtype=float), 1000.0)
    k1, k2 = len(mmw_bw), len(sub6_bw)
    if gains is None:
        gains = np.ones((m, k2, n))
    rbs = ResourceBlockSet(np.asarray(mmw_bw, dtype=float), np.asarray(sub6_bw, dtype=float),
                           np.full((m, k1, n), 10 ** (mmw_power_db / 10)), np.ones((m, k2, n)))
    return Scenario(topo, MmwParams(), Sub6Params(1.0, gains), rbs,
                    WiredBackhaul.even_split(c_max, m), DemandModel.from_rates(current, predicted),
                    np.zeros((m, n)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
