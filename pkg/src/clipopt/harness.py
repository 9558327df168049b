"""Multi-seed experiment orchestration and guarantee validation.

``run_trials`` fans a config out over independent seeds (seed i = base_seed
+ i), evaluates the schedule's explicit high-probability bound from the same
constants the schedule itself used, and reports the fraction of seeds whose
summary exceeds it.  ``fit_rate`` sweeps a horizon grid and fits a log-log
slope to the per-horizon median metric; medians rather than means because
the noise may have infinite variance and the guarantees are quantile
statements.  ``compare_clipped_vanilla`` runs the clipped and unclipped
gradient loops on identical per-seed noise and compares final gaps.

Outputs: one CSV per experiment (row per seed) under
``<out>/<id>/<algorithm>/<pXX>/seed-results.csv`` plus a JSON-lines summary;
rows are deterministic so a rerun of the same config is byte-identical.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import algorithms as algos
from .config import (ExperimentConfig, build_noise, build_problem, build_schedule,
                     config_digest, p_tag)
from .schedules import theorem_bound

# Cap on n_seeds * horizon * dim held in memory at once; larger sweeps are chunked.
_CHUNK_BUDGET = 30_000_000


@dataclass
class TrialSummary:
    digest: str
    algorithm: str
    mode: str
    p: float
    horizon: int
    n_seeds: int
    metrics: np.ndarray
    final_gaps: np.ndarray
    median: float
    upper_quantile: float
    bound: float
    failure_rate: float
    failure_stderr: float
    diverged: int

    def row(self) -> dict:
        return {
            "digest": self.digest, "algorithm": self.algorithm, "mode": self.mode,
            "p": self.p, "horizon": self.horizon, "seeds": self.n_seeds,
            "median": self.median, "upper_quantile": self.upper_quantile,
            "bound": self.bound, "failure_rate": self.failure_rate,
            "failure_stderr": self.failure_stderr, "diverged": self.diverged,
        }


@dataclass
class RateFit:
    horizons: np.ndarray
    medians: np.ndarray
    slope: float
    intercept: float
    r_squared: float
    exponent: float
    deviation: float


@dataclass
class VanillaComparison:
    n_pairs: int
    clipped_median: float
    vanilla_median: float
    clipped_upper: float
    vanilla_upper: float
    median_ratio: float
    vanilla_diverged: int


def _seed_list(cfg: ExperimentConfig) -> np.ndarray:
    return cfg.base_seed + np.arange(cfg.n_seeds)


def _batch(cfg: ExperimentConfig, problem, x1, noise_model, horizon: int,
           seeds: np.ndarray) -> algos.BatchResult:
    """One lockstep batch for a seed chunk, dispatched on the algorithm."""
    if cfg.algorithm == "vanilla-sgd":
        eta = cfg.vanilla_eta
        if eta is None:
            eta = build_schedule(cfg, problem, x1, horizon=horizon).eta(1)
        return algos.run_vanilla_sgd_batch(problem, noise_model, eta, horizon, x1, seeds)
    schedule = build_schedule(cfg, problem, x1, horizon=horizon)
    runner = {"smd": algos.run_smd_batch, "asmd": algos.run_asmd_batch,
              "sgd": algos.run_sgd_batch}[cfg.algorithm]
    return runner(problem, noise_model, schedule, horizon, x1, seeds)


def _run_all_seeds(cfg: ExperimentConfig, problem, x1, noise_model,
                   horizon: int) -> algos.BatchResult:
    """All seeds, chunked for memory; chunk fan-out is order-independent."""
    seeds = _seed_list(cfg)
    chunk = max(1, min(cfg.n_seeds, _CHUNK_BUDGET // max(1, horizon * problem.dim)))
    parts = [seeds[i:i + chunk] for i in range(0, len(seeds), chunk)]
    if cfg.jobs > 1 and len(parts) > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(
                lambda part: _batch(cfg, problem, x1, noise_model, horizon, part), parts))
    else:
        results = [_batch(cfg, problem, x1, noise_model, horizon, part) for part in parts]
    return algos.BatchResult(
        algorithm=results[0].algorithm,
        seeds=np.concatenate([r.seeds for r in results]),
        summary=np.concatenate([r.summary for r in results]),
        final_gap=np.concatenate([r.final_gap for r in results]),
        clipped_fraction=np.concatenate([r.clipped_fraction for r in results]),
        diverged=np.concatenate([r.diverged for r in results]),
    )


def run_trials(cfg: ExperimentConfig, write: bool = True) -> TrialSummary:
    """N seeded runs, quantiles, and the failure rate against the explicit bound."""
    if cfg.n_seeds < 30:
        warnings.warn("fewer than 30 seeds: the binomial failure-rate interval is wide",
                      stacklevel=2)
    problem, x1 = build_problem(cfg)
    noise_model = build_noise(cfg)
    result = _run_all_seeds(cfg, problem, x1, noise_model, cfg.horizon)
    if cfg.algorithm == "vanilla-sgd":
        bound = math.inf  # the baseline carries no guarantee
    else:
        schedule = build_schedule(cfg, problem, x1, horizon=cfg.horizon)
        bound = theorem_bound(schedule, cfg.horizon)
    metrics = result.summary
    failures = float(np.mean(metrics > bound))
    stderr = math.sqrt(max(failures * (1 - failures), 1e-12) / cfg.n_seeds)
    summary = TrialSummary(
        digest=config_digest(cfg), algorithm=cfg.algorithm, mode=cfg.mode, p=cfg.p,
        horizon=cfg.horizon, n_seeds=cfg.n_seeds, metrics=metrics,
        final_gaps=result.final_gap, median=float(np.median(metrics)),
        upper_quantile=float(np.quantile(metrics, 1.0 - cfg.delta)), bound=bound,
        failure_rate=failures, failure_stderr=stderr,
        diverged=int(np.sum(result.diverged)),
    )
    if write and cfg.out_dir:
        write_experiment_outputs(cfg, result, summary)
    return summary


def experiment_dir(cfg: ExperimentConfig) -> str:
    return os.path.join(cfg.out_dir, cfg.experiment_id, cfg.algorithm, p_tag(cfg.p))


def write_experiment_outputs(cfg: ExperimentConfig, result: algos.BatchResult,
                             summary: TrialSummary) -> str:
    """Per-seed CSV (schema-versioned, byte-stable) plus a JSON-lines summary."""
    out = experiment_dir(cfg)
    os.makedirs(out, exist_ok=True)
    csv_path = os.path.join(out, "seed-results.csv")
    with open(csv_path, "w", newline="") as fh:
        fh.write("# schema=1\n")
        writer = csv.writer(fh)
        writer.writerow(["seed", "summary", "final_gap", "clipped_fraction", "diverged"])
        for i in range(result.seeds.size):
            writer.writerow([int(result.seeds[i]), repr(float(result.summary[i])),
                             repr(float(result.final_gap[i])),
                             repr(float(result.clipped_fraction[i])),
                             int(result.diverged[i])])
    with open(os.path.join(out, "summary.jsonl"), "w") as fh:
        fh.write(json.dumps(summary.row()) + "\n")
    return csv_path


# -- rate fitting -----------------------------------------------------------------


def theoretical_exponent(cfg: ExperimentConfig) -> float:
    """Predicted log-log slope of the median metric in the horizon."""
    if cfg.algorithm in ("smd",):
        return (1.0 - cfg.p) / cfg.p
    if cfg.algorithm == "asmd":
        # interpolation: the small-noise branch decays quadratically
        return -2.0 if cfg.sigma == 0 else (1.0 - cfg.p) / cfg.p
    return (2.0 - 2.0 * cfg.p) / (3.0 * cfg.p - 2.0)


def fit_power_law(horizons, values) -> tuple[float, float, float]:
    """OLS slope/intercept/R^2 of log(values) against log(horizons)."""
    horizons = np.asarray(horizons, dtype=float)
    values = np.asarray(values, dtype=float)
    if np.any(values <= 0):
        raise ValueError("nonpositive metric: log-log fit undefined")
    res = stats.linregress(np.log(horizons), np.log(values))
    return float(res.slope), float(res.intercept), float(res.rvalue ** 2)


def fit_rate(cfg: ExperimentConfig) -> RateFit:
    """Median-metric slope over the config's horizon grid versus the prediction."""
    if cfg.horizon_grid is None or len(cfg.horizon_grid) < 4:
        raise ValueError("rate fitting needs a horizon grid with at least 4 points")
    if cfg.n_seeds < 100:
        raise ValueError("rate fitting needs at least 100 seeds per horizon")
    problem, x1 = build_problem(cfg)
    noise_model = build_noise(cfg)
    medians = []
    for horizon in cfg.horizon_grid:
        result = _run_all_seeds(cfg, problem, x1, noise_model, horizon)
        medians.append(float(np.median(result.summary)))
    slope, intercept, r2 = fit_power_law(cfg.horizon_grid, medians)
    exponent = theoretical_exponent(cfg)
    return RateFit(
        horizons=np.asarray(cfg.horizon_grid), medians=np.asarray(medians),
        slope=slope, intercept=intercept, r_squared=r2, exponent=exponent,
        deviation=slope - exponent,
    )


# -- clipped versus unclipped -------------------------------------------------------


def compare_clipped_vanilla(cfg: ExperimentConfig) -> VanillaComparison:
    """Paired-seed comparison of final gaps; identical noise per seed.

    The baseline reuses the clipped schedule's step size, so clipping is the
    only difference.  Requires a heavy-tailed configuration (p < 2) unless
    the noise is switched off entirely.
    """
    if cfg.sigma > 0 and cfg.p >= 2.0:
        raise ValueError("the comparison targets heavy tails: configure p < 2 (or sigma = 0)")
    problem, x1 = build_problem(cfg)
    noise_model = build_noise(cfg)
    clip_cfg = cfg if cfg.algorithm == "sgd" else _with(cfg, algorithm="sgd")
    schedule = build_schedule(clip_cfg, problem, x1, horizon=cfg.horizon)
    seeds = _seed_list(cfg)
    clipped = algos.run_sgd_batch(problem, noise_model, schedule, cfg.horizon, x1, seeds)
    eta = cfg.vanilla_eta if cfg.vanilla_eta is not None else schedule.eta(1)
    vanilla = algos.run_vanilla_sgd_batch(problem, noise_model, eta, cfg.horizon, x1, seeds)
    up = 1.0 - cfg.delta
    with np.errstate(invalid="ignore"):  # quantiles over inf gaps of diverged runs
        clipped_upper = float(np.quantile(clipped.final_gap, up))
        vanilla_upper = float(np.quantile(vanilla.final_gap, up))
    vanilla_median = float(np.median(vanilla.final_gap))
    clipped_median = float(np.median(clipped.final_gap))
    return VanillaComparison(
        n_pairs=cfg.n_seeds,
        clipped_median=clipped_median,
        vanilla_median=vanilla_median,
        clipped_upper=clipped_upper,
        vanilla_upper=vanilla_upper,
        median_ratio=clipped_median / vanilla_median if vanilla_median > 0 else math.nan,
        vanilla_diverged=int(np.sum(vanilla.diverged)),
    )


def _with(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    return dataclasses.replace(cfg, **kw)
