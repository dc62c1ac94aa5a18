"""Reference prefetch schedulers the learned policy is compared against.

* ``oca``: a central entity with full knowledge and free signaling admits
  exactly the capacity threshold's worth of files, fairly.
* ``cga``: the same fairness rule, but every admission round costs
  signaling capacity, so the admissible count shrinks as rounds go by.
* ``rfa``: capacity-blind; each predicted file is requested with
  probability one half.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .allocation import compute_phi, counts_for_total, slack_for
from .netmodel import Scenario, WiredBackhaul


@dataclass(frozen=True)
class BaselineResult:
    counts: np.ndarray  # files downloaded per SBS
    requested_bits: float
    slack_bps: float  # total allocated rate minus total demand (signed)
    overhead_bps: float = 0.0

    @property
    def total_files(self) -> int:
        return int(self.counts.sum())


def with_wired_capacity(scenario: Scenario, c_max: float) -> Scenario:
    """Copy of ``scenario`` with the wired capacity rescaled to ``c_max`` (floored at 0)."""
    c_max = max(float(c_max), 0.0)
    old = scenario.wired
    scale = c_max / old.c_max if old.c_max > 0 else 0.0
    wired = WiredBackhaul(old.per_mbs_capacity * scale, c_max)
    return dataclasses.replace(scenario, wired=wired)


def prefix_bits(scenario: Scenario, counts) -> float:
    """Size of the first ``counts[n]`` predicted files of every SBS, bits."""
    sizes = scenario.demands.predicted_sizes
    return float(sum(sizes[n][:k].sum() for n, k in enumerate(counts)))


def _result(scenario, counts, overhead=0.0, bits=None):
    counts = np.asarray(counts, dtype=int)
    slack = float(slack_for(scenario, counts).sum())
    return BaselineResult(counts, prefix_bits(scenario, counts) if bits is None else bits,
                          slack, overhead)


def oca(scenario: Scenario, phi: int = None) -> BaselineResult:
    """Admit the first ``phi`` files of the round-robin priority order."""
    if phi is None:
        phi = compute_phi(scenario)
    f = min(int(phi), scenario.demands.total_predicted)
    return _result(scenario, counts_for_total(scenario.demands, f))


def cga(scenario: Scenario, overhead_per_sbs: float = None, batch: int = 1) -> BaselineResult:
    """Round-based central admission with signaling cost.

    Round ``r`` (from 1) has used ``r * N * overhead_per_sbs`` of wired
    capacity for signaling.  The threshold is recomputed on the reduced
    capacity, then each SBS with the fewest downloads (and files left) gets
    ``batch`` more, lowest id first, without passing the threshold.  Stops
    when the threshold is reached or every file is in.  The default
    overhead is 0.5% of C_max per SBS per round.
    """
    if overhead_per_sbs is None:
        overhead_per_sbs = 0.005 * scenario.wired.c_max
    if overhead_per_sbs < 0:
        raise ValueError("overhead_per_sbs must be non-negative")
    if batch < 1:
        raise ValueError("batch must be at least 1")
    demands = scenario.demands
    F = demands.num_predicted
    N = demands.num_sbs
    counts = np.zeros(N, dtype=int)
    total = demands.total_predicted
    used, reduced, rnd = 0.0, scenario, 0
    while counts.sum() < total:
        rnd += 1
        used = rnd * N * overhead_per_sbs
        reduced = with_wired_capacity(scenario, scenario.wired.c_max - used)
        open_ = counts < F
        low = counts[open_].min()
        chosen = np.flatnonzero(open_ & (counts == low))
        want = int(min(counts.sum() + batch * len(chosen), total))
        limit = compute_phi(reduced, limit=want)
        if limit <= counts.sum():
            break
        for n in chosen:
            room = limit - counts.sum()
            if room <= 0:
                break
            counts[n] += min(batch, F[n] - counts[n], room)
    return _result(reduced, counts, used)


def rfa(scenario: Scenario, seed) -> BaselineResult:
    """Every predicted file requested independently with probability 0.5.

    Slack is evaluated with each SBS's request count taken as a priority
    prefix; the requested bits are those of the files actually drawn.
    """
    rng = np.random.default_rng(seed)
    sizes = scenario.demands.predicted_sizes
    picks = [rng.random(len(L)) < 0.5 for L in sizes]
    counts = np.array([p.sum() for p in picks], dtype=int)
    bits = float(sum(L[p].sum() for L, p in zip(sizes, picks)))
    return _result(scenario, counts, bits=bits)
