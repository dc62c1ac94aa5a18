"""Flat ``key = value`` experiment configuration and scenario construction.

Values accept SI suffixes (``1Gbps``, ``40Mbit``, ``10MHz``, ``2km``,
``500ms``).  Unknown keys are rejected so typos never pass silently.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional, Union

import numpy as np

from ..allocation import DemandModel
from ..learning import ConvergenceCriterion, NoiseModel, PowerLaw, StepSchedule
from ..netmodel import (MmwParams, ResourceBlockSet, Scenario, Sub6Params, Topology,
                        WiredBackhaul)


class ConfigError(ValueError):
    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


_PREFIX = {"": 1.0, "p": 1e-12, "n": 1e-9, "u": 1e-6, "m": 1e-3, "k": 1e3, "K": 1e3,
           "M": 1e6, "G": 1e9, "T": 1e12}
_UNITS = {"bps": "rate", "bit/s": "rate", "bit": "bits", "b": "bits", "B": "bytes",
          "Hz": "freq", "m": "length", "s": "time", "W": "power"}
_QTY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-z/]*)\s*$")


def parse_quantity(text: str, dimension: Optional[str] = None) -> float:
    """Parse ``"1Gbps"`` -> 1e9.  A bare number is taken in base units."""
    m = _QTY.match(str(text))
    if not m:
        raise ValueError(f"cannot parse quantity {text!r}")
    value, suffix = float(m.group(1)), m.group(2)
    if not suffix:
        return value
    for unit, dim in sorted(_UNITS.items(), key=lambda kv: -len(kv[0])):
        if suffix.endswith(unit) and suffix[: -len(unit)] in _PREFIX:
            if suffix == "m" and dimension not in (None, "length"):
                continue
            if dimension is not None and dim != dimension and not (dim == "bytes" and dimension == "bits"):
                raise ValueError(f"{text!r} is a {dim} quantity, expected {dimension}")
            scale = _PREFIX[suffix[: -len(unit)]]
            return value * scale * (8.0 if dim == "bytes" else 1.0)
    raise ValueError(f"unknown unit suffix in {text!r}")


def _positions(text):
    if not str(text).strip():
        return None
    pts = [[parse_quantity(c, "length") for c in pair.split(",")] for pair in str(text).split(";")]
    return np.array(pts)


def _flag(text):
    return str(text).strip().lower() in ("1", "true", "yes", "on")


# key -> (parser, default, help)
SCHEMA: dict[str, tuple[Any, Any, str]] = {
    "topology.area_side": ("length", 2000.0, "side of the square deployment area"),
    "topology.num_mbs": (int, 2, "number of macro base stations"),
    "topology.num_sbs": (int, 5, "number of small base stations"),
    "topology.mbs_positions": (_positions, None, "explicit MBS positions 'x,y;x,y' (optional)"),
    "topology.sbs_positions": (_positions, None, "explicit SBS positions (optional)"),
    "mmw.alpha": (float, 2.0, "path-loss slope"),
    "mmw.beta": (float, 61.4, "path loss at 1 m, dB"),
    "mmw.zeta2": (float, 5.8 ** 2, "variance of the fit deviation X, dB^2"),
    "mmw.noise_n1": (float, 1.0, "SNR denominator N1"),
    "mmw.power_db": (float, 140.0, "10 log10 of the mmW transmit power term"),
    "mmw.num_blocks": (int, 3, "number of mmW resource blocks"),
    "mmw.bandwidth": ("freq", 10e6, "bandwidth of each mmW block"),
    "sub6.num_blocks": (int, 2, "number of sub-6 GHz resource blocks"),
    "sub6.bandwidth": ("freq", 5e6, "bandwidth of each sub-6 block"),
    "sub6.power": ("power", 10.0, "sub-6 transmit power"),
    "sub6.noise_n2": ("power", 1e-13, "sub-6 receiver noise power"),
    "sub6.pathloss_db_1m": (float, 38.0, "sub-6 mean path loss at 1 m, dB"),
    "sub6.pathloss_slope": (float, 3.0, "sub-6 path-loss exponent"),
    "backhaul.wired.c_max": ("rate", 1e9, "total wired capacity C_max"),
    "demand.current_per_sbs": (int, 22, "current files per SBS"),
    "demand.predicted_total": (int, 150, "predicted files, spread uniformly at random over SBSs"),
    "demand.size_min": ("bits", 4e6, "smallest file size"),
    "demand.size_max": ("bits", 40e6, "largest file size"),
    "demand.deadline_min": ("time", 1.0, "shortest deadline"),
    "demand.deadline_max": ("time", 10.0, "longest deadline"),
    "game.unit": ("rate", 1.0, "bits/s per utility unit"),
    "learning.kappa": (float, 0.001, "Boltzmann-Gibbs sharpness"),
    "learning.kappa_mode": (str, "constant", "'constant' or 'inverse_t'"),
    "learning.alpha_scale": (float, 1.0, "utility-estimate step: scale / t^exponent"),
    "learning.alpha_exponent": (float, 0.55, ""),
    "learning.lambda_scale": (float, 1.0, "strategy step: scale / t^exponent"),
    "learning.lambda_exponent": (float, 0.8, ""),
    "learning.noise_frac": (float, 0.01, "noise std as a fraction of |u(c,1)|"),
    "learning.harmonic_schedule": (_flag, False,
                                  "use alpha = 1/t, lambda = 1/t^2 regardless of the exponents"),
    "learning.tol": (float, 1e-3, "convergence tolerance on p (sup norm)"),
    "learning.window": (int, 50, "convergence window in sub-slots"),
    "learning.max_iter": (int, 100_000, "sub-slot cap"),
    "cga.overhead_frac": (float, 0.005, "signaling per SBS per round, fraction of C_max"),
    "cga.batch": (int, 1, "files admitted per selected SBS per round"),
    "run.seed": (int, 2024, "master seed"),
    "run.runs": (int, 100, "independent runs per configuration"),
}

# Case 1: the wired link leaves room for roughly 60 predicted files.
# Case 2: current requests alone exceed the backhaul.
# Case 3: everything fits; a soft kappa makes the approach to p = 1 gradual.
PRESETS: dict[str, dict[str, Any]] = {
    "default": {},
    "case1": {"backhaul.wired.c_max": 1e9, "learning.kappa": 0.001},
    "case2": {"backhaul.wired.c_max": 50e6, "learning.kappa": 1.0},
    "case3": {"backhaul.wired.c_max": 3e9, "learning.kappa": 1e-8},
}


def _coerce(key, raw):
    parser = SCHEMA[key][0]
    try:
        if isinstance(parser, str):
            return parse_quantity(raw, parser) if isinstance(raw, str) else float(raw)
        if parser is int and isinstance(raw, str):
            return int(float(raw))
        if parser is _positions and not isinstance(raw, str):
            return None if raw is None else np.asarray(raw, dtype=float)
        return parser(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(key, str(exc)) from None


@dataclass
class ScenarioConfig:
    values: dict = field(default_factory=lambda: {k: v[1] for k, v in SCHEMA.items()})
    name: str = "default"

    def __getitem__(self, key):
        return self.values[key]

    def with_overrides(self, overrides: Mapping[str, Any]) -> "ScenarioConfig":
        vals = dict(self.values)
        for key, raw in overrides.items():
            if key not in SCHEMA:
                raise ConfigError(key, "unknown configuration key")
            vals[key] = _coerce(key, raw)
        cfg = ScenarioConfig(vals, self.name)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        v = self.values
        for key in ("topology.num_mbs", "topology.num_sbs", "run.runs"):
            if v[key] < 1:
                raise ConfigError(key, "must be at least 1")
        for key in ("mmw.num_blocks", "sub6.num_blocks", "demand.current_per_sbs",
                    "demand.predicted_total", "learning.window", "cga.batch"):
            if v[key] < 0:
                raise ConfigError(key, "must be non-negative")
        if v["mmw.num_blocks"] + v["sub6.num_blocks"] < 1:
            raise ConfigError("mmw.num_blocks", "need at least one resource block")
        for lo, hi in (("demand.size_min", "demand.size_max"),
                       ("demand.deadline_min", "demand.deadline_max")):
            if not 0 < v[lo] <= v[hi]:
                raise ConfigError(lo, f"need 0 < {lo} <= {hi}")
        for key in ("learning.kappa", "game.unit", "learning.tol"):
            if v[key] <= 0:
                raise ConfigError(key, "must be positive")
        if v["learning.kappa_mode"] not in ("constant", "inverse_t"):
            raise ConfigError("learning.kappa_mode", "must be 'constant' or 'inverse_t'")
        for key, count_key in (("topology.mbs_positions", "topology.num_mbs"),
                               ("topology.sbs_positions", "topology.num_sbs")):
            if v[key] is not None and len(v[key]) != v[count_key]:
                raise ConfigError(key, f"expected {v[count_key]} positions")

    def schedule(self) -> StepSchedule:
        v = self.values
        if v["learning.harmonic_schedule"]:
            return StepSchedule(PowerLaw(1.0, 1.0), PowerLaw(1.0, 2.0), v["learning.kappa"],
                                v["learning.kappa_mode"])
        return StepSchedule(PowerLaw(v["learning.alpha_scale"], v["learning.alpha_exponent"]),
                            PowerLaw(v["learning.lambda_scale"], v["learning.lambda_exponent"]),
                            v["learning.kappa"], v["learning.kappa_mode"])

    def convergence(self) -> ConvergenceCriterion:
        v = self.values
        return ConvergenceCriterion(v["learning.tol"], v["learning.window"], v["learning.max_iter"])

    def noise_for(self, u_c1: float) -> NoiseModel:
        return NoiseModel(self.values["learning.noise_frac"] * abs(u_c1))

    def to_text(self) -> str:
        lines = [f"# preset: {self.name}"]
        for key in SCHEMA:
            val = self.values[key]
            if isinstance(val, np.ndarray):
                val = ";".join(",".join(f"{c:g}" for c in row) for row in val)
            lines.append(f"{key} = {'' if val is None else val}")
        return "\n".join(lines) + "\n"


def preset(name: str) -> ScenarioConfig:
    if name not in PRESETS:
        raise ConfigError("preset", f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    cfg = ScenarioConfig().with_overrides(PRESETS[name])
    cfg.name = name
    return cfg


def parse_config_text(text: str) -> ScenarioConfig:
    """Parse ``key = value`` lines; ``preset = caseN`` selects the starting point."""
    pairs: dict[str, str] = {}
    base = "default"
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", "expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key == "preset":
            base = raw
        else:
            pairs[key] = raw
    return preset(base).with_overrides(pairs)


def load_config(source: Union[str, Path]) -> ScenarioConfig:
    """Load a config file, or a preset when ``source`` names one."""
    if str(source) in PRESETS:
        return preset(str(source))
    path = Path(source)
    if not path.exists():
        raise ConfigError("config", f"no such file or preset: {source}")
    return parse_config_text(path.read_text())


def _draw_demands(v, num_sbs, rng):
    def files(count):
        L = rng.uniform(v["demand.size_min"], v["demand.size_max"], count)
        x = rng.uniform(v["demand.deadline_min"], v["demand.deadline_max"], count)
        return L, x

    cur = [files(v["demand.current_per_sbs"]) for _ in range(num_sbs)]
    total = v["demand.predicted_total"]
    owners = rng.integers(0, num_sbs, total)
    L, x = files(total)
    pred_L = tuple(L[owners == n] for n in range(num_sbs))
    pred_x = tuple(x[owners == n] for n in range(num_sbs))
    # priority: files needed sooner come first
    order = [np.argsort(px, kind="stable") for px in pred_x]
    pred_L = tuple(a[o] for a, o in zip(pred_L, order))
    pred_x = tuple(a[o] for a, o in zip(pred_x, order))
    return DemandModel(tuple(c[0] for c in cur), tuple(c[1] for c in cur), pred_L, pred_x,
                       tuple(a / b for a, b in zip(pred_L, pred_x)))


def build_scenario(config: ScenarioConfig, seed: Union[int, np.random.SeedSequence]) -> Scenario:
    """Draw topology, channels and demands for one run.

    Independent streams keep, e.g., the demand draw unchanged when only a
    channel parameter changes.
    """
    v = config.values
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    topo_rng, chan_rng, dem_rng = (np.random.default_rng(s) for s in seq.spawn(3))
    M, N = v["topology.num_mbs"], v["topology.num_sbs"]
    side = v["topology.area_side"]
    mbs = v["topology.mbs_positions"]
    sbs = v["topology.sbs_positions"]
    mbs = topo_rng.uniform(0, side, (M, 2)) if mbs is None else mbs
    sbs = topo_rng.uniform(0, side, (N, 2)) if sbs is None else sbs
    topology = Topology(mbs, sbs, side)

    mmw = MmwParams(v["mmw.alpha"], v["mmw.beta"], v["mmw.zeta2"], v["mmw.noise_n1"])
    K1, K2 = v["mmw.num_blocks"], v["sub6.num_blocks"]
    deviation = chan_rng.normal(0.0, np.sqrt(mmw.zeta2), (M, N))
    dist = np.maximum(topology.distances(), 1.0)
    mean_gain = 10.0 ** (-(v["sub6.pathloss_db_1m"] + 10 * v["sub6.pathloss_slope"] * np.log10(dist)) / 10)
    gains = mean_gain[:, None, :] * chan_rng.exponential(1.0, (M, K2, N))  # Rayleigh power
    sub6 = Sub6Params(v["sub6.noise_n2"], gains)
    rbs = ResourceBlockSet(np.full(K1, v["mmw.bandwidth"]), np.full(K2, v["sub6.bandwidth"]),
                           np.full((M, K1, N), 10.0 ** (v["mmw.power_db"] / 10)),
                           np.full((M, K2, N), v["sub6.power"]))
    wired = WiredBackhaul.even_split(v["backhaul.wired.c_max"], M)
    demands = _draw_demands(v, N, dem_rng)
    return Scenario(topology, mmw, sub6, rbs, wired, demands, deviation)
