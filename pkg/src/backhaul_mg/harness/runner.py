"""Seeded experiment execution, sweeps, aggregation, CSV and trace I/O."""

from __future__ import annotations

import csv
import datetime as _dt
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from ..allocation import counts_for_total, slack_for
from ..baselines import cga, oca, rfa
from ..game import build_game
from ..learning import LearningResult, run_learning
from .config import ConfigError, ScenarioConfig, build_scenario, parse_config_text, parse_quantity

ALGORITHMS = ("bmrl", "oca", "cga", "rfa")
CSV_HEADER = ["axis_value", "algorithm", "mean_requested_bits", "std_requested_bits",
              "mean_slack_bps", "iterations_mean", "oca_match_fraction"]
AXES = {"file_count": ("demand.predicted_total", None),
        "capacity": ("backhaul.wired.c_max", "rate"),
        "kappa": ("learning.kappa", None)}

# seed streams per run
_SCENARIO, _LEARN, _RFA = 0, 1, 2


class ComparisonError(ValueError):
    pass


def stream(master: int, run: int, which: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master, spawn_key=(run, which))


@dataclass
class RunMetrics:
    algorithm: str
    run: int
    phi: int
    requested_files: float
    requested_bits: float
    slack_bps: float
    current_served: float  # share of current-request rate the backhaul still carries
    oca_files: int
    iterations: float = math.nan
    converged: bool = True
    p: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def matches_oca(self) -> bool:
        """Usage within one file of the optimal centralized schedule."""
        return abs(self.requested_files - self.oca_files) <= 1.0


def _served(scenario, counts):
    slack = slack_for(scenario, counts)
    R = scenario.demands.current_rates
    return float(slack.sum()), float(np.clip(slack + R, 0.0, R).sum() / max(R.sum(), 1e-300))


def bmrl_metrics(scenario, game, result: LearningResult, run: int, oca_files: int) -> RunMetrics:
    """Metrics of a learned profile.

    Requested data is the expectation under the final probabilities
    (player ``i`` stands for the ``i``-th predicted file, SBS-major, in
    priority order).  Slack is evaluated at each SBS's rounded expected
    request count.
    """
    sizes = np.concatenate(scenario.demands.predicted_sizes)
    p = result.p
    counts = np.rint(np.bincount(game.owner, weights=p, minlength=scenario.num_sbs)).astype(int)
    counts = np.minimum(counts, scenario.demands.num_predicted)
    slack, served = _served(scenario, counts)
    return RunMetrics("bmrl", run, game.phi, float(p.sum()), float(p @ sizes), slack, served,
                      oca_files, float(result.iterations), result.converged, p.copy())


def _baseline_metrics(name, scenario, res, run, phi, oca_files):
    R = scenario.demands.current_rates
    slack_n = slack_for(scenario, res.counts)
    served = float(np.clip(slack_n + R, 0.0, R).sum() / max(R.sum(), 1e-300))
    return RunMetrics(name, run, phi, float(res.total_files), res.requested_bits, res.slack_bps,
                      served, oca_files)


def run_all(config: ScenarioConfig, run: int, algorithms: Sequence[str] = ALGORITHMS,
            trace: bool = False) -> dict:
    """Every requested algorithm on the scenario of run ``run`` (shared draw).

    Returns ``{algorithm: RunMetrics}``; with ``trace`` the BMRL learning
    trace is attached under ``"_trace"``.
    """
    for a in algorithms:
        if a not in ALGORITHMS:
            raise ConfigError("algorithm", f"unknown algorithm {a!r}")
    v = config.values
    master = v["run.seed"]
    scenario = build_scenario(config, stream(master, run, _SCENARIO))
    game = build_game(scenario, unit=v["game.unit"])
    phi = game.phi
    oca_res = oca(scenario, phi)
    out = {}
    if "oca" in algorithms:
        out["oca"] = _baseline_metrics("oca", scenario, oca_res, run, phi, oca_res.total_files)
    if "cga" in algorithms:
        res = cga(scenario, v["cga.overhead_frac"] * v["backhaul.wired.c_max"], v["cga.batch"])
        out["cga"] = _baseline_metrics("cga", scenario, res, run, phi, oca_res.total_files)
    if "rfa" in algorithms:
        res = rfa(scenario, stream(master, run, _RFA))
        out["rfa"] = _baseline_metrics("rfa", scenario, res, run, phi, oca_res.total_files)
    if "bmrl" in algorithms:
        noise = config.noise_for(game.u_c[0]) if game.g else config.noise_for(0.0)
        result = run_learning(game, config.schedule(), noise, stream(master, run, _LEARN),
                              config.convergence(), trace=trace)
        out["bmrl"] = bmrl_metrics(scenario, game, result, run, oca_res.total_files)
        if trace:
            out["_trace"] = result.trace
            out["_game"] = game
    return out


def run_scenario(config: ScenarioConfig, algorithm: str, seed: int) -> RunMetrics:
    """One algorithm on one seeded run; deterministic per (config, seed)."""
    return run_all(config, seed, (algorithm,))[algorithm]


def _task(args):
    text, run, algorithms = args
    return run_all(parse_config_text(text), run, algorithms)


def _workers() -> int:
    env = os.environ.get("BMMG_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError("BMMG_THREADS", f"not an integer: {env!r}") from None
    return os.cpu_count() or 1


def run_many(config: ScenarioConfig, runs: Optional[Iterable[int]] = None,
             algorithms: Sequence[str] = ALGORITHMS) -> dict:
    """``{algorithm: [RunMetrics per run]}`` over ``runs`` (default all configured runs)."""
    runs = list(range(config["run.runs"])) if runs is None else list(runs)
    workers = min(_workers(), len(runs))
    if workers <= 1:
        results = [run_all(config, r, algorithms) for r in runs]
    else:
        text = config.to_text()
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_task, [(text, r, tuple(algorithms)) for r in runs],
                                    chunksize=max(1, len(runs) // (4 * workers))))
    return {a: [res[a] for res in results] for a in algorithms}


@dataclass
class Aggregate:
    axis_value: float
    algorithm: str
    mean_requested_bits: float
    std_requested_bits: float
    mean_slack_bps: float
    iterations_mean: float
    oca_match_fraction: float
    runs: int

    def row(self) -> list[str]:
        return [f"{self.axis_value:.10g}", self.algorithm, f"{self.mean_requested_bits:.10g}",
                f"{self.std_requested_bits:.10g}", f"{self.mean_slack_bps:.10g}",
                f"{self.iterations_mean:.10g}", f"{self.oca_match_fraction:.10g}"]


def aggregate(axis_value: float, algorithm: str, metrics: Sequence[RunMetrics]) -> Aggregate:
    """Mean and (population) std over runs."""
    bits = np.array([m.requested_bits for m in metrics])
    its = np.array([m.iterations for m in metrics])
    return Aggregate(float(axis_value), algorithm, float(bits.mean()), float(bits.std()),
                     float(np.mean([m.slack_bps for m in metrics])),
                     float(its.mean()) if np.isfinite(its).all() else math.nan,
                     float(np.mean([m.matches_oca for m in metrics])), len(metrics))


def axis_values(axis: str, values: Sequence) -> list[float]:
    if axis not in AXES:
        raise ConfigError("axis", f"unknown axis {axis!r}; choose from {sorted(AXES)}")
    dim = AXES[axis][1]
    return [parse_quantity(v, dim) if isinstance(v, str) else float(v) for v in values]


@dataclass
class SweepResult:
    axis: str
    rows: list  # Aggregate
    per_run: dict  # axis value -> {algorithm: [RunMetrics]}
    master_seed: int


def sweep(config: ScenarioConfig, axis: str, values: Sequence,
          algorithms: Sequence[str] = ALGORITHMS) -> SweepResult:
    """All algorithms at every axis value; runs share seeds across values."""
    key, _ = AXES.get(axis, (None, None))
    vals = axis_values(axis, values)
    rows, per_run = [], {}
    for x in vals:
        raw = int(round(x)) if axis == "file_count" else x
        cfg = config.with_overrides({key: raw})
        metrics = run_many(cfg, algorithms=algorithms)
        per_run[x] = metrics
        rows.extend(aggregate(x, a, metrics[a]) for a in algorithms)
    return SweepResult(axis, rows, per_run, config["run.seed"])


def write_csv(result: SweepResult, out, deterministic: bool = False) -> None:
    """CSV with the fixed header; comment lines carry the seed and (optionally) a timestamp."""
    own = isinstance(out, (str, Path))
    fh = open(out, "w", newline="") if own else out
    try:
        if not deterministic:
            stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
            fh.write(f"# generated {stamp}\n")
        fh.write(f"# axis={result.axis} master_seed={result.master_seed}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for row in result.rows:
            w.writerow(row.row())
    finally:
        if own:
            fh.close()


def read_csv(source) -> list[dict]:
    text = Path(source).read_text() if isinstance(source, (str, Path)) else source.read()
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


@dataclass
class CompareSummary:
    match_fraction: float
    improvement_over_cga: float  # max relative gain in requested data
    improvement_over_rfa: float  # max relative gain in current-request service
    runs: int

    def lines(self) -> list[str]:
        return [f"BMRL within one file of OCA: {self.match_fraction:.1%} of {self.runs} runs",
                f"max BMRL gain over CGA (requested data): {self.improvement_over_cga:+.1%}",
                f"max BMRL gain over RFA (current-request service): {self.improvement_over_rfa:+.1%}"]


def _check_aligned(a, b):
    if [m.run for m in a] != [m.run for m in b]:
        raise ComparisonError("runs are not aligned across algorithms")


def compare_report(groups) -> CompareSummary:
    """Summary over one or more ``{algorithm: [RunMetrics]}`` groups (sweep points).

    ``groups`` may be a single mapping or a sequence of them.  The match
    fraction pools all runs; the improvements take the best sweep point.
    """
    if isinstance(groups, dict):
        groups = [groups]
    matched, total = 0, 0
    gain_cga, gain_rfa = -math.inf, -math.inf
    for g in groups:
        bm, ref = g["bmrl"], g.get("oca", g["bmrl"])
        _check_aligned(bm, ref)
        ref_files = [m.requested_files for m in ref]
        matched += sum(abs(m.requested_files - r) <= 1.0 for m, r in zip(bm, ref_files))
        total += len(bm)
        bm_bits = np.mean([m.requested_bits for m in bm])
        if "cga" in g:
            _check_aligned(bm, g["cga"])
            c = np.mean([m.requested_bits for m in g["cga"]])
            if c > 0:
                gain_cga = max(gain_cga, (bm_bits - c) / c)
        if "rfa" in g:
            _check_aligned(bm, g["rfa"])
            r = np.mean([m.current_served for m in g["rfa"]])
            if r > 0:
                gain_rfa = max(gain_rfa, (np.mean([m.current_served for m in bm]) - r) / r)
    return CompareSummary(matched / max(total, 1), gain_cga, gain_rfa, total)


# ---- traces -------------------------------------------------------------

def write_trace(path, config: ScenarioConfig, run: int, records, game) -> None:
    """JSON lines: a header (config, run, owner map) then one record per player per sub-slot."""
    with open(path, "w") as fh:
        header = {"type": "header", "config": config.to_text(), "run": run,
                  "players": int(game.g), "phi": int(game.phi),
                  "owner": game.owner.tolist()}
        fh.write(json.dumps(header) + "\n")
        for t, i, a, u, p in records:
            fh.write(json.dumps({"t": t, "player": i, "action": a, "observed_u": u, "p": p}) + "\n")


def read_trace(path):
    with open(path) as fh:
        header = json.loads(fh.readline())
        records = [json.loads(line) for line in fh if line.strip()]
    return header, records


def metrics_from_trace(path) -> RunMetrics:
    """Rebuild the BMRL RunMetrics from a trace alone.

    Final probabilities and the convergence point come from the recorded
    ``p`` history; the scenario is redrawn from the embedded config and run
    index to evaluate data and slack.
    """
    header, records = read_trace(path)
    config = parse_config_text(header["config"])
    G = header["players"]
    T = max((r["t"] for r in records), default=0)
    hist = np.empty((T + 1, G))
    hist[0] = 0.5
    for r in records:
        hist[r["t"], r["player"]] = r["p"]
    conv = config.convergence()
    W = conv.window
    iterations, converged = T, False
    for t in range(W, T + 1):
        if np.max(np.abs(hist[t] - hist[t - W])) < conv.tol:
            iterations, converged = t - W, True
            break
    run = header["run"]
    scenario = build_scenario(config, stream(config["run.seed"], run, _SCENARIO))
    game = build_game(scenario, unit=config["game.unit"])
    oca_files = int(counts_for_total(scenario.demands, min(game.phi, game.g)).sum())
    result = LearningResult(hist[T].copy(), iterations, converged, T, np.zeros((G, 2)))
    return bmrl_metrics(scenario, game, result, run, oca_files)
