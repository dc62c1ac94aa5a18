"""Decentralized two-timescale learning of request probabilities.

Every player keeps a running estimate of what each action pays and moves
its request probability toward the Boltzmann-Gibbs (softmax) response to
those estimates.  Players only see their own noisy payoff.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import optimize

from ._backend import kernels
from .game import GameSpec, expected_utilities_all, expected_utility

_BLOCK = 256


class NonConvergenceError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class ContractionWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PowerLaw:
    """Step size ``scale / t**exponent``."""

    scale: float = 1.0
    exponent: float = 1.0

    def __call__(self, t):
        return self.scale / np.power(np.asarray(t, dtype=float), self.exponent)

    def __str__(self):
        return f"{self.scale:g}/t^{self.exponent:g}"


@dataclass
class LearnerState:
    u_hat: np.ndarray  # (G, 2): estimates for (c, d)
    p: np.ndarray  # (G,) request probabilities
    t: int = 0  # completed sub-slots

    @classmethod
    def initial(cls, g: int) -> "LearnerState":
        return cls(np.zeros((g, 2)), np.full(g, 0.5), 0)

    def copy(self) -> "LearnerState":
        return LearnerState(self.u_hat.copy(), self.p.copy(), self.t)


@dataclass(frozen=True)
class StepSchedule:
    """Learning rates and softmax sharpness.

    ``kappa_mode`` is ``"constant"`` or ``"inverse_t"`` (sharpness
    ``kappa / t``).
    """

    alpha: Callable = PowerLaw(1.0, 1.0)
    lam: Callable = PowerLaw(1.0, 2.0)
    kappa: Union[float, np.ndarray] = 1.0
    kappa_mode: str = "constant"

    def __post_init__(self):
        if np.any(np.asarray(self.kappa) <= 0):
            raise ValueError("kappa must be positive")
        if self.kappa_mode not in ("constant", "inverse_t"):
            raise ValueError(f"unknown kappa_mode {self.kappa_mode!r}")

    def kappa_vector(self, g: int) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.kappa, dtype=float), (g,)).copy()


@dataclass(frozen=True)
class NoiseModel:
    sigma_eps: float = 0.0

    def __post_init__(self):
        if self.sigma_eps < 0:
            raise ValueError("sigma_eps must be non-negative")


@dataclass(frozen=True)
class ConvergenceCriterion:
    tol: float = 1e-3
    window: int = 50
    max_iter: int = 100_000


def smoothed_best_response(u_hat: Sequence[float], kappa: float) -> tuple[float, float]:
    """Softmax over the two action estimates with sharpness ``kappa``."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    z = kappa * np.asarray(u_hat, dtype=float)
    e = np.exp(z - z.max())
    e /= e.sum()
    return float(e[0]), float(e[1])


def _logistic(x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def rl_step(state: LearnerState, actions: Sequence[bool], observed: Sequence[float],
            schedule: StepSchedule) -> LearnerState:
    """One sub-slot of the estimate/probability update for all players.

    ``actions[i]`` is True when player i requested.  Only the estimate of
    the action actually taken moves; the other one is left as is.
    """
    t = state.t + 1
    act = np.asarray(actions, dtype=bool)
    obs = np.asarray(observed, dtype=float)
    a = float(schedule.alpha(t))
    lam = float(schedule.lam(t))
    u_hat = state.u_hat.copy()
    u_hat[act, 0] += a * (obs[act] - u_hat[act, 0])
    u_hat[~act, 1] += a * (obs[~act] - u_hat[~act, 1])
    kappa = schedule.kappa_vector(len(act))
    if schedule.kappa_mode == "inverse_t":
        kappa = kappa / t
    beta = _logistic(kappa * (u_hat[:, 0] - u_hat[:, 1]))
    p = state.p + lam * (beta - state.p)
    return LearnerState(u_hat, p, t)


def contraction_condition(game: GameSpec, kappa: float) -> bool:
    """Uniqueness check stated for the learning dynamics: kappa <= |sum_k u(c, k+1)|."""
    return bool(kappa <= abs(game.u_c.sum()))


def contraction_modulus(game: GameSpec, kappa: float) -> float:
    """Lipschitz bound (sup norm) of the map p -> softmax response to expected utilities.

    A value below 1 makes the map a contraction, hence a unique fixed point.
    Each opponent's probability moves a player's expected payoff by at most
    the largest one-step change of the table, twice over (the deferring
    payoff mirrors it), and the logistic slope is at most 1/4.
    """
    if game.g < 2:
        return 0.0
    step = np.abs(np.diff(game.u_c)).max()
    return float(0.5 * kappa * (game.g - 1) * step)


def _br_map(p, game, kappa):
    uc = expected_utilities_all(p, game)
    return _logistic(2.0 * kappa * uc)  # deferring pays -uc by antisymmetry


def _symmetric_fixed_point(game, kappa):
    """Common fixed point by bisection down to adjacent doubles."""
    def h(q):
        return q - float(_logistic(2.0 * kappa * expected_utility("c", q, game)))

    lo, hi = 0.0, 1.0  # h(0) < 0 < h(1)
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if h(mid) < 0:
            lo = mid
        else:
            hi = mid
    return lo if abs(h(lo)) <= abs(h(hi)) else hi


def _damped_iteration(p, game, kappa, tol, steps):
    """p <- p + eta (beta(p) - p); eta halves whenever the residual would grow."""
    eta = 1.0
    res = np.max(np.abs(_br_map(p, game, kappa) - p))
    for _ in range(int(steps)):
        if res < tol:
            break
        cand = p + eta * (_br_map(p, game, kappa) - p)
        cand_res = np.max(np.abs(_br_map(cand, game, kappa) - cand))
        if cand_res > res and eta > 1e-6:
            eta *= 0.5
            continue
        p, res = cand, cand_res
    return p, res


def bge_fixed_point(game: GameSpec, kappa: float, tol: float = 1e-10,
                    p0: Optional[Sequence[float]] = None, max_iter: int = 1_000_000) -> np.ndarray:
    """Boltzmann-Gibbs equilibrium: every player's probability equals its softmax response.

    A symmetric start stays symmetric, so it is solved as a scalar root
    (the scalar map is monotone).  When ``kappa`` times the utility scale is
    so large that no double meets ``tol``, the root bracketed between two
    adjacent doubles is returned.  Other starts run a damped fixed-point
    iteration; if that stalls (the map need not contract), a hybrid Newton
    solve takes over from where it stopped, and the damped iteration
    resumes if that fails too.
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    if not contraction_condition(game, kappa):
        warnings.warn(f"kappa={kappa:g} exceeds |sum u_c|={abs(game.u_c.sum()):.4g}; "
                      "uniqueness is not guaranteed", ContractionWarning, stacklevel=2)
    G = game.g
    if p0 is None or np.ptp(np.asarray(p0, dtype=float)) == 0.0:
        q = _symmetric_fixed_point(game, kappa)
        return np.full(G, q)
    first = min(int(max_iter), 500)
    p, res = _damped_iteration(np.array(p0, dtype=float), game, kappa, tol, first)
    if res < tol:
        return p
    sol = optimize.root(lambda x: _br_map(np.clip(x, 0.0, 1.0), game, kappa) - x, p,
                        method="hybr", options={"xtol": tol * 1e-2})
    cand = np.clip(sol.x, 0.0, 1.0)
    if np.max(np.abs(_br_map(cand, game, kappa) - cand)) < tol:
        return cand
    p, res = _damped_iteration(p, game, kappa, tol, int(max_iter) - first)
    if res < tol:
        return p
    raise NonConvergenceError(f"fixed-point iteration did not converge in {max_iter} steps "
                              f"(residual {res:.3g})", res)


def epsilon_bound(kappa: float) -> float:
    """Largest gain any player can get by deviating from the equilibrium: ln 2 / kappa."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    return math.log(2.0) / kappa


def max_deviation_gain(profile: Sequence[float], game: GameSpec) -> float:
    """Largest gain from a unilateral switch to a pure action, over all players."""
    p = np.asarray(profile, dtype=float)
    uc = expected_utilities_all(p, game)
    ud = -uc
    mixed = p * uc + (1.0 - p) * ud
    return float(np.max(np.maximum(uc, ud) - mixed))


@dataclass
class LearningResult:
    p: np.ndarray
    iterations: int
    converged: bool
    steps: int
    u_hat: np.ndarray
    trace: Optional[list] = field(default=None, repr=False)


def run_learning(game: GameSpec, schedule: StepSchedule, noise: NoiseModel, seed,
                 convergence: ConvergenceCriterion = ConvergenceCriterion(),
                 trace: bool = False, backend=None) -> LearningResult:
    """Simulate all players learning simultaneously until the probabilities settle.

    Each sub-slot every player samples an action, the joint request count
    fixes the payoffs, and each player sees only its own payoff plus noise.
    Convergence is declared at the first sub-slot ``t`` after which the
    probabilities stay within ``tol`` (sup norm) over ``window`` sub-slots;
    ``iterations`` reports that ``t``.
    """
    k = kernels if backend is None else backend
    G = game.g
    seq = np.random.SeedSequence(seed) if not isinstance(seed, np.random.SeedSequence) else seed
    act_stream, noise_stream = (np.random.default_rng(s) for s in seq.spawn(2))
    state = LearnerState.initial(G)
    p, u_hat = state.p, state.u_hat
    u_c = np.ascontiguousarray(game.u_c)
    kappa = schedule.kappa_vector(G)
    W = int(convergence.window)
    hist = np.zeros((W + 1, G))
    hist[0] = p
    records = [] if trace else None
    t, conv_at = 0, -1
    dummy_a = np.zeros((1, 1), dtype=np.uint8)
    dummy_f = np.zeros((1, 1))
    while t < convergence.max_iter:
        B = int(min(_BLOCK, convergence.max_iter - t))
        unif = act_stream.random((B, G))
        gauss = noise_stream.standard_normal((B, G))
        ts = np.arange(t + 1, t + B + 1)
        alpha = np.ascontiguousarray(np.broadcast_to(schedule.alpha(ts), (B,)), dtype=float)
        lam = np.ascontiguousarray(np.broadcast_to(schedule.lam(ts), (B,)), dtype=float)
        if trace:
            tr_act = np.zeros((B, G), dtype=np.uint8)
            tr_obs, tr_p = np.zeros((B, G)), np.zeros((B, G))
        else:
            tr_act, tr_obs, tr_p = dummy_a, dummy_f, dummy_f
        done, conv_at = k.learning_block(p, u_hat, u_c, unif, gauss, float(noise.sigma_eps),
                                         alpha, lam, kappa, schedule.kappa_mode == "inverse_t",
                                         t, hist, float(convergence.tol), W, trace,
                                         tr_act, tr_obs, tr_p)
        if trace:
            for b in range(done):
                for i in range(G):
                    records.append((t + b + 1, i, "c" if tr_act[b, i] else "d",
                                    float(tr_obs[b, i]), float(tr_p[b, i])))
        t += done
        if conv_at >= 0:
            break
    converged = conv_at >= 0
    return LearningResult(p.copy(), conv_at if converged else t, converged, t, u_hat.copy(), records)


@dataclass
class ScheduleReport:
    horizon: int
    alpha_sum_diverges: bool
    alpha_sq_sum_converges: bool
    lam_sum_diverges: bool
    lam_sq_sum_converges: bool
    ratio_vanishes: bool
    per_player_ok: bool
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all((self.alpha_sum_diverges, self.alpha_sq_sum_converges, self.lam_sum_diverges,
                    self.lam_sq_sum_converges, self.ratio_vanishes, self.per_player_ok))

    def lines(self) -> list[str]:
        names = [("sum alpha = inf", self.alpha_sum_diverges),
                 ("sum alpha^2 < inf", self.alpha_sq_sum_converges),
                 ("sum lambda = inf", self.lam_sum_diverges),
                 ("sum lambda^2 < inf", self.lam_sq_sum_converges),
                 ("lambda/alpha -> 0", self.ratio_vanishes),
                 ("per-player lambda ordering", self.per_player_ok)]
        return [f"{'PASS' if ok else 'FAIL'}  {name}" for name, ok in names]


def _decade_ratio(values, horizon):
    """Ratio of the partial-sum increment over the last decade to the one before.

    Power laws t^-s give 10^(1-s): at least 1 when the series diverges and
    below 1 when it converges.
    """
    T = int(horizon)
    t = np.arange(1, T + 1, dtype=float)
    v = np.asarray(values(t), dtype=float) * np.ones_like(t)
    S = np.concatenate([[0.0], np.cumsum(v)])
    last = S[T] - S[T // 10]
    prev = S[T // 10] - S[T // 100]
    if last <= 0.0:
        return 0.0, S[T]
    if prev <= 0.0:
        return math.inf, S[T]
    return last / prev, S[T]


def _sum_diverges(values, horizon, threshold=0.99):
    r, total = _decade_ratio(values, horizon)
    return r >= threshold, r, total


def _ratio_vanishes(num, den, horizon, shrink=0.9):
    """Ratio falls at every checkpoint and still shrinks by ``shrink`` per decade at the end."""
    pts = np.array([horizon // 100, horizon // 10, horizon], dtype=float)
    r = np.asarray(num(pts), dtype=float) / np.asarray(den(pts), dtype=float) * np.ones_like(pts)
    decreasing = bool(np.all(np.diff(r) < -1e-12 * np.abs(r[:-1])))
    return decreasing and r[-1] <= shrink * r[-2], r


def validate_schedule(schedule: StepSchedule, horizon: int = 1_000_000,
                      per_player_lams: Optional[Sequence[Callable]] = None) -> ScheduleReport:
    """Numerically check the step-size conditions over ``horizon`` sub-slots.

    Divergence of a partial sum is judged by whether its increment keeps
    growing from one decade to the next; convergence by the increment
    shrinking geometrically.  ``per_player_lams`` (optional) are checked for
    the ordering condition lambda_n / lambda_{n+1} -> 0.
    """
    horizon = int(horizon)
    a_div, a_r, a_sum = _sum_diverges(schedule.alpha, horizon)
    a2_div, a2_r, a2_sum = _sum_diverges(lambda t: np.square(schedule.alpha(t)), horizon)
    l_div, l_r, l_sum = _sum_diverges(schedule.lam, horizon)
    l2_div, l2_r, l2_sum = _sum_diverges(lambda t: np.square(schedule.lam(t)), horizon)
    ratio_ok, ratios = _ratio_vanishes(schedule.lam, schedule.alpha, horizon)
    per_player_ok = True
    if per_player_lams:
        per_player_ok = all(_ratio_vanishes(a, b, horizon)[0]
                            for a, b in zip(per_player_lams, per_player_lams[1:]))
    details = {"alpha_decade_ratio": a_r, "alpha_sum": a_sum,
               "alpha_sq_decade_ratio": a2_r, "alpha_sq_sum": a2_sum,
               "lam_decade_ratio": l_r, "lam_sum": l_sum,
               "lam_sq_decade_ratio": l2_r, "lam_sq_sum": l2_sum,
               "lam_over_alpha": ratios.tolist()}
    return ScheduleReport(horizon, a_div, not a2_div, l_div, not l2_div, ratio_ok, per_player_ok,
                          details)
