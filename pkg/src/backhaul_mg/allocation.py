"""Demand bookkeeping, backhaul block assignment and the capacity threshold.

The block assignment is a deterministic greedy stand-in for a
matching-based allocator: the game and learning layers only depend on the
induced rate curve, not on how blocks are matched.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ._backend import kernels
from .netmodel import DomainError, Scenario, total_rates, wired_shares

_RATE_RTOL = 1e-9


@dataclass(frozen=True)
class DemandModel:
    """Per-SBS current and predicted files.

    Predicted lists are in request-priority order: an SBS that requests
    ``s_n`` files always requests the first ``s_n`` entries.
    """

    current_sizes: tuple  # per SBS: array of L_f (bits)
    current_deadlines: tuple  # per SBS: array of x_f (s)
    predicted_sizes: tuple
    predicted_deadlines: tuple
    predicted_q: tuple  # per SBS: serving rate q_f (bits/s)

    def __post_init__(self):
        fields = ("current_sizes", "current_deadlines", "predicted_sizes",
                  "predicted_deadlines", "predicted_q")
        for name in fields:
            arrs = tuple(np.asarray(a, dtype=float).reshape(-1) for a in getattr(self, name))
            object.__setattr__(self, name, arrs)
        n = len(self.current_sizes)
        if any(len(getattr(self, name)) != n for name in fields):
            raise DomainError("demand lists disagree on the number of SBSs")
        for sizes, deadlines in ((self.current_sizes, self.current_deadlines),
                                 (self.predicted_sizes, self.predicted_deadlines)):
            for L, x in zip(sizes, deadlines):
                if L.shape != x.shape:
                    raise DomainError("file sizes and deadlines differ in length")
                if np.any(L <= 0) or np.any(x <= 0):
                    raise DomainError("file sizes and deadlines must be positive")
        for L, q in zip(self.predicted_sizes, self.predicted_q):
            if q.shape != L.shape or np.any(q < 0):
                raise DomainError("q_f must be given and non-negative for every predicted file")
        # prefix sums, index s -> first s predicted files
        object.__setattr__(self, "_current", np.array(
            [np.sum(L / x) for L, x in zip(self.current_sizes, self.current_deadlines)]))
        object.__setattr__(self, "_cum_d", tuple(
            np.concatenate([[0.0], np.cumsum(L / x)])
            for L, x in zip(self.predicted_sizes, self.predicted_deadlines)))
        object.__setattr__(self, "_cum_q", tuple(np.concatenate([[0.0], np.cumsum(q)])
                                                 for q in self.predicted_q))

    @property
    def num_sbs(self) -> int:
        return len(self.current_sizes)

    @property
    def num_predicted(self) -> np.ndarray:
        return np.array([len(L) for L in self.predicted_sizes], dtype=int)

    @property
    def total_predicted(self) -> int:
        return int(self.num_predicted.sum())

    @property
    def current_rates(self) -> np.ndarray:
        return self._current.copy()

    def predicted_rate(self, s: Sequence[int]) -> np.ndarray:
        """D_n(s_n) for every SBS (no range check)."""
        return np.array([c[k] for c, k in zip(self._cum_d, s)])

    def predicted_q_sum(self, s: Sequence[int]) -> np.ndarray:
        return np.array([c[k] for c, k in zip(self._cum_q, s)])

    @classmethod
    def from_rates(cls, current: Sequence[Sequence[float]],
                   predicted: Sequence[Sequence[float]]) -> "DemandModel":
        """Build a demand model from per-file rates with unit deadlines."""
        cur = tuple(np.asarray(c, dtype=float) for c in current)
        pred = tuple(np.asarray(p, dtype=float) for p in predicted)
        return cls(cur, tuple(np.ones_like(c) for c in cur),
                   pred, tuple(np.ones_like(p) for p in pred), pred)


@dataclass(frozen=True)
class BackhaulAssignment:
    eta: np.ndarray  # (K, M, N) binary
    wired: np.ndarray  # (M, N) bits/s

    def blocks_held(self) -> np.ndarray:
        return self.eta.sum(axis=(0, 1))

    def check(self, num_mmw: int) -> None:
        if np.any(self.eta.sum(axis=2) > 1):
            raise AssertionError("an (m, k) pair serves more than one SBS")
        if num_mmw and np.any(self.eta[:num_mmw].any(axis=2).sum(axis=1) > 1):
            raise AssertionError("a mmW block is used by more than one MBS")


def required_rates(demands: DemandModel, s: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Current-request rates R and predicted-download rates D(s), bits/s."""
    s = np.asarray(s, dtype=int)
    F = demands.num_predicted
    if s.shape != F.shape or np.any(s < 0) or np.any(s > F):
        raise DomainError(f"request counts {s.tolist()} outside [0, {F.tolist()}]")
    return demands.current_rates, demands.predicted_rate(s)


def _meets(rate, demand):
    return rate >= demand - _RATE_RTOL * np.maximum(1.0, demand)


def allocate(scenario: Scenario, s: Sequence[int]) -> BackhaulAssignment:
    """Greedy block assignment for request vector ``s``.

    Each step serves the SBS with the largest unmet rate (its demand minus
    wired share minus wireless rate so far), giving it the free (MBS, block)
    unit with the highest rate for it.  SBSs below the fairness floor of
    ``(K1 + K2) // N`` units are served first.  Stops once every SBS is at
    the floor and every demand is met, or no unit is left.
    """
    demands = scenario.demands
    rbs = scenario.rbs
    N = scenario.num_sbs
    K1, K2 = rbs.num_mmw, rbs.num_sub6
    R, D = required_rates(demands, s)
    demand = R + D
    wired = scenario.wired.per_mbs_capacity[:, None] * wired_shares(demands, s)[None, :]
    wired_n = wired.sum(axis=0)

    mmw_rate = rbs.mmw_bandwidths[None, :, None] * np.log2(1.0 + scenario.mmw_gamma)  # (M, K1, N)
    rx6 = np.transpose(rbs.sub6_power * scenario.sub6.channel_gains, (1, 0, 2))  # (K2, M, N)
    eta = kernels.greedy_assign(np.ascontiguousarray(demand, dtype=float), wired_n,
                                np.ascontiguousarray(mmw_rate), np.ascontiguousarray(rx6),
                                np.ascontiguousarray(rbs.sub6_bandwidths),
                                float(scenario.sub6.noise_n2), (K1 + K2) // N, _RATE_RTOL)
    return BackhaulAssignment(eta, wired)


def priority_order(demands: DemandModel) -> np.ndarray:
    """Global request order: round-robin over the per-SBS priority lists."""
    F = demands.num_predicted
    order = []
    for rank in range(int(F.max(initial=0))):
        order.extend(n for n in range(demands.num_sbs) if F[n] > rank)
    return np.asarray(order, dtype=int)


def counts_for_total(demands: DemandModel, f: int) -> np.ndarray:
    """Per-SBS request counts when the first ``f`` files of the global order are requested."""
    order = priority_order(demands)
    if not 0 <= f <= len(order):
        raise DomainError(f"total request count {f} outside [0, {len(order)}]")
    return np.bincount(order[:f], minlength=demands.num_sbs)


def slack_for(scenario: Scenario, s: Sequence[int]) -> np.ndarray:
    """Per-SBS rate surplus (allocated rate minus R_n + D_n(s_n)), bits/s."""
    R, D = required_rates(scenario.demands, s)
    return total_rates(allocate(scenario, s), scenario) - (R + D)


def slack_curve(scenario: Scenario) -> np.ndarray:
    """Per-SBS slack for every total count f = 0..G in global priority order, shape (G+1, N)."""
    order = priority_order(scenario.demands)
    s = np.zeros(scenario.num_sbs, dtype=int)
    rows = [slack_for(scenario, s)]
    for n in order:
        s[n] += 1
        rows.append(slack_for(scenario, s))
    return np.array(rows)


def demand_curve(scenario: Scenario) -> np.ndarray:
    """Per-SBS demand R_n + D_n for every f = 0..G in global priority order."""
    order = priority_order(scenario.demands)
    s = np.zeros(scenario.num_sbs, dtype=int)
    R, D = required_rates(scenario.demands, s)
    rows = [R + D]
    for n in order:
        s[n] += 1
        R, D = required_rates(scenario.demands, s)
        rows.append(R + D)
    return np.array(rows)


def phi_from_slack(slack: np.ndarray, demand: np.ndarray) -> int:
    """First-failure threshold from a (G+1, N) slack curve."""
    ok = _meets(slack + demand, demand).all(axis=1)
    if not ok[0]:
        return 0
    fails = np.flatnonzero(~ok)
    return int(fails[0] - 1) if fails.size else len(ok) - 1


def compute_phi(scenario: Scenario, limit: Optional[int] = None) -> int:
    """Largest predicted-file count that keeps every SBS's demand met.

    Files are added in global priority order; the search runs upward from
    zero and stops at the first count that leaves some SBS short.  With
    ``limit`` the search stops early and returns ``limit`` when every count
    up to it is feasible.
    """
    demands = scenario.demands
    order = priority_order(demands)
    top = len(order) if limit is None else min(int(limit), len(order))
    s = np.zeros(scenario.num_sbs, dtype=int)
    for f in range(top + 1):
        if f:
            s[order[f - 1]] += 1
        R, D = required_rates(demands, s)
        rates = total_rates(allocate(scenario, s), scenario)
        if not _meets(rates, R + D).all():
            return max(f - 1, 0)
    return top
