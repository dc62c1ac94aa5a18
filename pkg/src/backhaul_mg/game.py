"""Minority-game formulation of the prefetch decision.

Two views of the same game live here:

* the multi-level game, where SBS ``n`` picks how many of its ``F_n``
  predicted files to request and is scored on its own rate surplus;
* the binary game, where every predicted file becomes a player (the SBS's
  own player plus ``F_n - 1`` virtual ones) choosing ``c`` (request) or
  ``d`` (defer) against a shared utility table indexed by the total number
  of requests.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import gammaln, xlog1py, xlogy

from ._backend import kernels
from .allocation import allocate, demand_curve, phi_from_slack, required_rates, slack_curve
from .netmodel import Scenario, total_rates

C, D = "c", "d"


class NoInteriorEquilibrium(ValueError):
    """The sign conditions for an interior fair mixed equilibrium fail."""


@dataclass(frozen=True)
class GameSpec:
    """Binary request/defer game with ``g`` players.

    ``u_c[f - 1]`` is the utility of requesting when ``f`` files are
    requested in total.  Deferring pays ``u_d(f_d) = -u_c(f_c + 1)`` with
    ``f_d = g - f_c``.
    """

    g: int
    phi: int
    u_c: np.ndarray
    owner: np.ndarray = None
    is_virtual: np.ndarray = None
    player_u_c: Optional[np.ndarray] = field(default=None, repr=False)
    unit: float = 1.0  # bits/s per utility unit

    def __post_init__(self):
        u = np.asarray(self.u_c, dtype=float).reshape(-1)
        object.__setattr__(self, "u_c", u)
        if u.shape[0] != self.g:
            raise ValueError(f"utility table has {u.shape[0]} entries, expected {self.g}")
        if self.owner is None:
            object.__setattr__(self, "owner", np.arange(self.g))
        if self.is_virtual is None:
            object.__setattr__(self, "is_virtual", np.zeros(self.g, dtype=bool))

    @classmethod
    def from_table(cls, u_c: Sequence[float], phi: Optional[int] = None) -> "GameSpec":
        """Game from a bare table; ``phi`` defaults to the last non-negative entry."""
        u = np.asarray(u_c, dtype=float)
        if phi is None:
            nonneg = np.flatnonzero(u >= 0)
            phi = int(nonneg[-1] + 1) if nonneg.size else 0
        return cls(len(u), phi, u)

    @property
    def u_d(self) -> np.ndarray:
        """``u_d[f_d - 1]`` for f_d = 1..g."""
        return -self.u_c[::-1]

    def u_c_at(self, f_c: int) -> float:
        return float(self.u_c[f_c - 1])

    def u_d_at(self, f_d: int) -> float:
        return float(self.u_d[f_d - 1])

    @property
    def num_virtual(self) -> int:
        return int(self.is_virtual.sum())

    @property
    def asymmetry(self) -> float:
        """Largest gap between any per-player table and the shared one, relative to the shared scale."""
        if self.player_u_c is None:
            return 0.0
        scale = max(np.abs(self.u_c).max(), 1e-300)
        return float(np.abs(self.player_u_c - self.u_c[None, :]).max() / scale)

    def sign_structure_ok(self) -> bool:
        u = self.u_c
        f = np.arange(1, self.g + 1)
        ok = np.all(u[f <= self.phi] >= 0) and np.all(u[f > self.phi] <= 0)
        if 1 <= self.phi < self.g:
            ok = ok and u[self.phi - 1] == 0 and np.all(np.diff(u[self.phi - 1:]) <= 0)
        return bool(ok)


def build_game(scenario: Scenario, unit: float = 1.0) -> GameSpec:
    """Binary game for a scenario.

    The shared table entry for ``f`` requests is the smallest SBS rate
    surplus when the first ``f`` files of the global priority order are
    requested, expressed in ``unit`` bits/s.  It is pinned to zero at the
    capacity threshold and kept non-increasing beyond it.  Each player's own
    table (its SBS's surplus) is kept for the asymmetry diagnostic.
    """
    demands = scenario.demands
    F = demands.num_predicted
    slack = slack_curve(scenario)
    phi = phi_from_slack(slack, demand_curve(scenario))
    G = int(F.sum())
    per_sbs = slack[1:] / unit  # (G, N)
    shared = per_sbs.min(axis=1)
    if phi:
        shared[:phi] = np.maximum(shared[:phi], 0.0)
    if 1 <= phi < G:
        shared[phi - 1] = 0.0
    for f in range(phi + 1, G + 1):
        cap = 0.0 if f == phi + 1 else shared[f - 2]
        shared[f - 1] = min(shared[f - 1], cap)

    owner = np.repeat(np.arange(demands.num_sbs), F)
    first = np.concatenate([[0], np.cumsum(F)[:-1]])
    is_virtual = np.ones(G, dtype=bool)
    is_virtual[first[F > 0]] = False
    player_u_c = per_sbs[:, owner].T.copy()
    return GameSpec(G, phi, shared, owner, is_virtual, player_u_c, unit)


def utility_bmmg(n: int, s_n: int, profile: Sequence[int], scenario: Scenario, phi: int) -> float:
    """Multi-level utility of SBS ``n`` playing ``s_n`` against ``profile`` (bits/s).

    Above the threshold the SBS earns its rate surplus (negative there);
    below it, the opposite, so idle capacity counts as regret.  Exactly at
    the threshold the two branches meet at zero.
    """
    s = np.array(profile, dtype=int)
    s[n] = s_n
    f_c = int(s.sum())
    if f_c == phi:
        return 0.0
    R, D_ = required_rates(scenario.demands, s)
    rate = total_rates(allocate(scenario, s), scenario)[n]
    surplus = rate - R[n] - D_[n]
    return float(surplus if f_c > phi else -surplus)


@dataclass(frozen=True)
class Deviation:
    sbs: int
    new_count: int
    gain: float


def is_pure_ne(profile: Sequence[int], scenario: Scenario, phi: int,
               rtol: float = 1e-9) -> tuple[bool, Optional[Deviation]]:
    """Check every unilateral deviation; return the first strictly improving one."""
    s = np.asarray(profile, dtype=int)
    F = scenario.demands.num_predicted
    for n in range(len(s)):
        here = utility_bmmg(n, s[n], s, scenario, phi)
        for alt in range(F[n] + 1):
            if alt == s[n]:
                continue
            there = utility_bmmg(n, alt, s, scenario, phi)
            if there - here > rtol * max(1.0, abs(here), abs(there)):
                return False, Deviation(n, alt, there - here)
    return True, None


def pure_equilibria(scenario: Scenario, phi: int) -> list[tuple[int, ...]]:
    """All pure equilibria by exhaustive enumeration (small instances only)."""
    F = scenario.demands.num_predicted
    return [s for s in itertools.product(*(range(f + 1) for f in F))
            if is_pure_ne(s, scenario, phi)[0]]


def has_monotone_utility(scenario: Scenario, phi: int) -> bool:
    """Whether every SBS utility moves toward zero as the total moves toward ``phi``.

    Below the threshold, requesting one more file must strictly help; above
    it, requesting one fewer must strictly help; and no profile off the
    threshold may pay more than zero.  Under this condition the pure
    equilibria are exactly the profiles whose counts sum to ``phi``.
    Exhaustive over all profiles, so small instances only.
    """
    F = scenario.demands.num_predicted
    for s in itertools.product(*(range(f + 1) for f in F)):
        f_c = sum(s)
        if f_c == phi:
            continue
        for n in range(len(s)):
            here = utility_bmmg(n, s[n], s, scenario, phi)
            if here > 0:
                return False
            step = 1 if f_c < phi else -1
            if not 0 <= s[n] + step <= F[n]:
                continue
            if utility_bmmg(n, s[n] + step, s, scenario, phi) <= here:
                return False
    return True


def _binom_pmf(n: int, p: float) -> np.ndarray:
    """Binomial(n, p) pmf over 0..n, evaluated in log space (safe for subnormal p)."""
    k = np.arange(n + 1)
    log_c = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
    return np.exp(log_c + xlogy(k, p) + xlog1py(n - k, -p))


def _check_action(action: str) -> None:
    if action not in (C, D):
        raise ValueError(f"action must be 'c' or 'd', got {action!r}")


def expected_utility(action: str, p: float, game: GameSpec) -> float:
    """Expected utility of ``action`` when every opponent requests with probability ``p``."""
    _check_action(action)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability {p} outside [0, 1]")
    G = game.g
    k = np.arange(G)
    w = _binom_pmf(G - 1, p)
    if action == C:
        return float(w @ game.u_c)  # u_c(k + 1)
    return float(w @ game.u_d[G - k - 1])  # u_d(G - k)


def expected_utility_general(n: int, action: str, profile: Sequence[float], game: GameSpec) -> float:
    """Exact expected utility of player ``n`` under heterogeneous opponent probabilities."""
    _check_action(action)
    p = np.asarray(profile, dtype=float)
    others = np.ascontiguousarray(np.delete(p, n))
    pmf = kernels.poisson_binomial_pmf(others)
    if action == C:
        return float(pmf @ game.u_c)
    G = game.g
    return float(pmf @ game.u_d[G - np.arange(G) - 1])


def expected_utilities_all(profile: Sequence[float], game: GameSpec) -> np.ndarray:
    """Expected utility of requesting for every player at once, shape (G,)."""
    p = np.ascontiguousarray(profile, dtype=float)
    return kernels.loo_expected_c(p, np.ascontiguousarray(game.u_c))


def solve_fair_pmne(game: GameSpec, tol: float = 1e-9) -> float:
    """Common request probability at which requesting and deferring pay the same.

    Bisection on the expected utility of requesting, which is positive at 0,
    negative at 1 and decreasing in between.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not (game.u_c[0] > 0 and game.u_c[-1] < 0):
        raise NoInteriorEquilibrium(
            f"need u(c,1) > 0 > u(c,G); got {game.u_c[0]:.6g} and {game.u_c[-1]:.6g}")
    lo, hi = 0.0, 1.0
    while True:
        mid = 0.5 * (lo + hi)
        v = expected_utility(C, mid, game)
        if abs(v) < tol or mid in (lo, hi):
            return mid
        if v > 0:
            lo = mid
        else:
            hi = mid


def bmmg_mixed_strategy(num_files: int, p: float) -> np.ndarray:
    """Probability of requesting 0..F_n files when each file is requested independently with ``p``."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie strictly inside (0, 1)")
    return _binom_pmf(num_files, p)
