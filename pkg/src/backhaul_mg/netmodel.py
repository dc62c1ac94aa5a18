"""Physical-layer model of the heterogeneous backhaul.

Covers the mmW log-distance path loss and SNR, the interference-limited
sub-6 GHz SINR, load-proportional sharing of the wired link, and the total
achievable backhaul rate of an SBS under a given block assignment.

Blocks carry global ids: ``0 .. K1-1`` are mmW blocks and
``K1 .. K1+K2-1`` are sub-6 GHz blocks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .allocation import BackhaulAssignment, DemandModel


class DomainError(ValueError):
    """Raised when an argument lies outside the model's domain."""


class DegenerateDemandError(ValueError):
    """Raised when every SBS has zero traffic load."""


@dataclass(frozen=True)
class Topology:
    mbs_positions: np.ndarray  # (M, 2) meters
    sbs_positions: np.ndarray  # (N, 2) meters
    area_side: float = 2000.0

    def __post_init__(self):
        mbs = np.atleast_2d(np.asarray(self.mbs_positions, dtype=float))
        sbs = np.atleast_2d(np.asarray(self.sbs_positions, dtype=float))
        object.__setattr__(self, "mbs_positions", mbs)
        object.__setattr__(self, "sbs_positions", sbs)
        if mbs.shape[0] < 1 or sbs.shape[0] < 1:
            raise DomainError("topology needs at least one MBS and one SBS")
        for pts in (mbs, sbs):
            if pts.shape[1] != 2:
                raise DomainError("positions must be 2-D coordinates")
            if np.any(pts < 0) or np.any(pts > self.area_side):
                raise DomainError("positions must lie inside [0, area_side]^2")

    @property
    def num_mbs(self) -> int:
        return self.mbs_positions.shape[0]

    @property
    def num_sbs(self) -> int:
        return self.sbs_positions.shape[0]

    def distances(self) -> np.ndarray:
        """Euclidean MBS-to-SBS distances, shape (M, N)."""
        diff = self.mbs_positions[:, None, :] - self.sbs_positions[None, :, :]
        return np.hypot(diff[..., 0], diff[..., 1])

    @classmethod
    def random(cls, num_mbs: int, num_sbs: int, area_side: float,
               rng: np.random.Generator) -> "Topology":
        mbs = rng.uniform(0.0, area_side, size=(num_mbs, 2))
        sbs = rng.uniform(0.0, area_side, size=(num_sbs, 2))
        return cls(mbs, sbs, area_side)


@dataclass(frozen=True)
class MmwParams:
    alpha: float = 2.0
    beta: float = 61.4
    zeta2: float = 5.8 ** 2
    noise_n1: float = 1.0

    def __post_init__(self):
        if self.zeta2 < 0:
            raise DomainError("zeta2 must be non-negative")
        if self.noise_n1 <= 0:
            raise DomainError("noise_n1 must be positive")


@dataclass(frozen=True)
class Sub6Params:
    noise_n2: float
    channel_gains: np.ndarray  # (M, K2, N) |h|^2

    def __post_init__(self):
        gains = np.asarray(self.channel_gains, dtype=float)
        object.__setattr__(self, "channel_gains", gains)
        if self.noise_n2 <= 0:
            raise DomainError("noise_n2 must be positive")
        if np.any(gains < 0):
            raise DomainError("channel gains must be non-negative")


@dataclass(frozen=True)
class ResourceBlockSet:
    """Backhaul resource blocks of both bands.

    ``mmw_power`` has shape (M, K1, N) and holds the linear power whose dB
    value enters the mmW SNR numerator.  ``sub6_power`` has shape (M, K2, N)
    in watts.  The prose aliases P_m1 / P_m2 are the per-band slices of
    these arrays.
    """

    mmw_bandwidths: np.ndarray
    sub6_bandwidths: np.ndarray
    mmw_power: np.ndarray
    sub6_power: np.ndarray

    def __post_init__(self):
        for name in ("mmw_bandwidths", "sub6_bandwidths", "mmw_power", "sub6_power"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        bw = np.concatenate([self.mmw_bandwidths, self.sub6_bandwidths])
        if np.any(bw <= 0):
            raise DomainError("bandwidths must be positive")
        if np.any(self.mmw_power <= 0) or np.any(self.sub6_power <= 0):
            raise DomainError("transmit powers must be positive")
        if self.mmw_power.shape[1] != self.num_mmw:
            raise DomainError("mmw_power block axis does not match mmw_bandwidths")
        if self.sub6_power.shape[1] != self.num_sub6:
            raise DomainError("sub6_power block axis does not match sub6_bandwidths")

    @property
    def num_mmw(self) -> int:
        return self.mmw_bandwidths.shape[0]

    @property
    def num_sub6(self) -> int:
        return self.sub6_bandwidths.shape[0]

    @property
    def num_blocks(self) -> int:
        return self.num_mmw + self.num_sub6

    @property
    def bandwidths(self) -> np.ndarray:
        return np.concatenate([self.mmw_bandwidths, self.sub6_bandwidths])

    def is_mmw(self, k: int) -> bool:
        return 0 <= k < self.num_mmw

    def is_sub6(self, k: int) -> bool:
        return self.num_mmw <= k < self.num_blocks


@dataclass(frozen=True)
class WiredBackhaul:
    per_mbs_capacity: np.ndarray  # c'_m, bits/s
    c_max: float

    def __post_init__(self):
        cap = np.asarray(self.per_mbs_capacity, dtype=float)
        object.__setattr__(self, "per_mbs_capacity", cap)
        if np.any(cap < 0) or self.c_max < 0:
            raise DomainError("wired capacities must be non-negative")
        if cap.sum() > self.c_max * (1 + 1e-12):
            raise DomainError("per-MBS wired capacities exceed C_max")

    @classmethod
    def even_split(cls, c_max: float, num_mbs: int) -> "WiredBackhaul":
        return cls(np.full(num_mbs, c_max / num_mbs), c_max)


def mmw_path_loss(distance_m: float, params: MmwParams, deviation: float = 0.0) -> float:
    """Log-distance mmW path loss in dB; ``deviation`` is the realized fit error X."""
    if np.any(np.asarray(distance_m) < 1.0):
        raise DomainError("mmW path-loss fit is only valid from 1 m")
    return params.beta + params.alpha * 10.0 * np.log10(distance_m) + deviation


def mmw_snr(power: float, path_loss_db: float, noise_n1: float) -> float:
    """dB-domain mmW SNR, ``(10 log10 P - L) / N1``.

    The result is in dB; :func:`db_to_linear` converts it before it enters
    the Shannon term of :func:`total_rate`.
    """
    if noise_n1 <= 0:
        raise DomainError("noise_n1 must be positive")
    if np.any(np.asarray(power) <= 0):
        raise DomainError("transmit power must be positive")
    return (10.0 * np.log10(power) - path_loss_db) / noise_n1


def db_to_linear(value_db):
    return np.power(10.0, np.asarray(value_db) / 10.0)


def transmitting_mbs(k: int, assignment: "BackhaulAssignment") -> np.ndarray:
    """Boolean mask of MBSs that serve some SBS on block ``k``."""
    return assignment.eta[k].any(axis=1)


def sub6_sinr(m: int, k: int, n: int, assignment: "BackhaulAssignment",
              params: Sub6Params, rbs: ResourceBlockSet) -> float:
    """SINR of the MBS ``m`` -> SBS ``n`` link on sub-6 block ``k`` (global id).

    Only MBSs that actively serve some SBS on ``k`` interfere.
    """
    if not rbs.is_sub6(k):
        raise DomainError(f"block {k} is not a sub-6 GHz block")
    j = k - rbs.num_mmw
    rx = rbs.sub6_power[:, j, n] * params.channel_gains[:, j, n]
    active = transmitting_mbs(k, assignment).copy()
    active[m] = False
    return float(rx[m] / (params.noise_n2 + rx[active].sum()))


def wired_shares(demands: "DemandModel", s: Sequence[int]) -> np.ndarray:
    """Load fractions sigma_n for request vector ``s``; they sum to one."""
    from .allocation import required_rates

    R, _ = required_rates(demands, s)
    load = demands.predicted_q_sum(s) + R
    total = load.sum()
    if total <= 0:
        raise DegenerateDemandError("all SBS traffic loads are zero")
    return load / total


def wired_share(n: int, demands: "DemandModel", s: Sequence[int]) -> float:
    return float(wired_shares(demands, s)[n])


def link_gamma(assignment: "BackhaulAssignment", scenario) -> np.ndarray:
    """Linear SNR/SINR of every (k, m, n) triple under ``assignment``.

    Entries where eta is zero are still filled (as if the link were
    activated on top of the current transmitters) but carry no rate.
    """
    rbs = scenario.rbs
    K1 = rbs.num_mmw
    M, N = scenario.topology.num_mbs, scenario.topology.num_sbs
    gamma = np.zeros((rbs.num_blocks, M, N))
    if K1:
        gamma[:K1] = np.transpose(scenario.mmw_gamma, (1, 0, 2))
    if rbs.num_sub6:
        rx = np.transpose(rbs.sub6_power * scenario.sub6.channel_gains, (1, 0, 2))  # (K2, M, N)
        active = assignment.eta[K1:].any(axis=2)  # (K2, M)
        interf_all = (rx * active[:, :, None]).sum(axis=1, keepdims=True)
        interf = interf_all - rx * active[:, :, None]
        gamma[K1:] = rx / (scenario.sub6.noise_n2 + interf)
    return gamma


def wireless_rates(assignment: "BackhaulAssignment", scenario) -> np.ndarray:
    """Per-SBS wireless backhaul rate in bits/s."""
    gamma = link_gamma(assignment, scenario)
    bw = scenario.rbs.bandwidths[:, None, None]
    per_link = bw * np.log2(1.0 + gamma) * assignment.eta
    return per_link.sum(axis=(0, 1))


def total_rates(assignment: "BackhaulAssignment", scenario) -> np.ndarray:
    """Total achievable backhaul rate of every SBS (wired plus wireless), bits/s."""
    return assignment.wired.sum(axis=0) + wireless_rates(assignment, scenario)


def total_rate(n: int, assignment: "BackhaulAssignment", scenario) -> float:
    return float(total_rates(assignment, scenario)[n])


@dataclass(frozen=True)
class Scenario:
    """Immutable physical and demand state of one experiment run."""

    topology: Topology
    mmw: MmwParams
    sub6: Sub6Params
    rbs: ResourceBlockSet
    wired: WiredBackhaul
    demands: "DemandModel"
    mmw_deviation: np.ndarray  # (M, N) realized X in dB
    mmw_gamma: np.ndarray = field(init=False, repr=False)  # (M, K1, N) linear

    def __post_init__(self):
        dev = np.asarray(self.mmw_deviation, dtype=float)
        object.__setattr__(self, "mmw_deviation", dev)
        dist = np.maximum(self.topology.distances(), 1.0)
        loss = mmw_path_loss(dist, self.mmw, dev)  # (M, N)
        snr_db = mmw_snr(self.rbs.mmw_power, loss[:, None, :], self.mmw.noise_n1)
        object.__setattr__(self, "mmw_gamma", db_to_linear(snr_db))
        if self.demands.num_sbs != self.topology.num_sbs:
            raise DomainError("demand model and topology disagree on the SBS count")

    @property
    def num_mbs(self) -> int:
        return self.topology.num_mbs

    @property
    def num_sbs(self) -> int:
        return self.topology.num_sbs
