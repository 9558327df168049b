"""Experiment configuration: a flat, sectioned key = value format.

Sections are ``[experiment]``, ``[problem]``, ``[noise]``, ``[schedule]`` and
``[diagnostics]``; ``#`` starts a comment.  Loading is parse-then-validate:
every constraint of the underlying modules (moment order range, tail index,
step-size caps, mode/algorithm compatibility) is re-checked at load time and
reported with the offending section.key.  ``dumps_config`` writes a canonical
form whose reload compares equal, so configs round-trip.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import math
from dataclasses import dataclass

import numpy as np

from . import noise as noise_mod
from . import problems as problems_mod
from . import schedules as schedules_mod

ALGORITHMS = ("smd", "asmd", "sgd", "vanilla-sgd")
MODE_FOR_ALGORITHM = {
    "smd": schedules_mod.SMD_MODES,
    "asmd": schedules_mod.ASMD_MODES,
    "sgd": schedules_mod.SGD_MODES,
    "vanilla-sgd": schedules_mod.SGD_MODES,  # baseline borrows the clipped step size
}


class ConfigError(ValueError):
    """Invalid configuration; carries the offending field path."""

    def __init__(self, field_path: str, message: str):
        self.field_path = field_path
        super().__init__(f"{field_path}: {message}")


@dataclass
class ExperimentConfig:
    # experiment
    experiment_id: str = "exp"
    algorithm: str = "smd"
    horizon: int = 1024
    horizon_grid: tuple[int, ...] | None = None
    n_seeds: int = 100
    base_seed: int = 0
    delta: float = 0.1
    out_dir: str | None = None
    jobs: int = 1
    # problem
    problem: str = "quadratic"
    dim: int = 2
    diag: tuple[float, ...] | None = None
    shift: tuple[float, ...] | None = None
    target: tuple[float, ...] | None = None
    coef: float = 0.25
    x1: tuple[float, ...] | None = None
    # noise
    noise: str = "two_point"
    p: float = 2.0
    sigma: float = 1.0
    q: float = 0.1
    tail_index: float = 1.75
    # schedule
    mode: str = "smd_known_t"
    c1: float = 1.0
    c2: float = 1.0
    c_override: float | None = None
    eta_scale: float = 1.0
    lambda_scale: float = 1.0
    vanilla_eta: float | None = None
    mu: float = 0.0
    # diagnostics
    pathwise: bool = False
    error_bounds: bool = False
    martingale: bool = False
    resamples: int = 128


# (section, key) -> (attribute, type tag)
_SCHEMA = {
    ("experiment", "id"): ("experiment_id", "str"),
    ("experiment", "algorithm"): ("algorithm", "str"),
    ("experiment", "t"): ("horizon", "int"),
    ("experiment", "t_grid"): ("horizon_grid", "int_tuple"),
    ("experiment", "seeds"): ("n_seeds", "int"),
    ("experiment", "base_seed"): ("base_seed", "int"),
    ("experiment", "delta"): ("delta", "float"),
    ("experiment", "out"): ("out_dir", "str"),
    ("experiment", "jobs"): ("jobs", "int"),
    ("problem", "kind"): ("problem", "str"),
    ("problem", "dim"): ("dim", "int"),
    ("problem", "diag"): ("diag", "float_tuple"),
    ("problem", "shift"): ("shift", "float_tuple"),
    ("problem", "target"): ("target", "float_tuple"),
    ("problem", "coef"): ("coef", "float"),
    ("problem", "x1"): ("x1", "float_tuple"),
    ("noise", "kind"): ("noise", "str"),
    ("noise", "p"): ("p", "float"),
    ("noise", "sigma"): ("sigma", "float"),
    ("noise", "q"): ("q", "float"),
    ("noise", "tail_index"): ("tail_index", "float"),
    ("schedule", "mode"): ("mode", "str"),
    ("schedule", "c1"): ("c1", "float"),
    ("schedule", "c2"): ("c2", "float"),
    ("schedule", "c_override"): ("c_override", "float"),
    ("schedule", "eta_scale"): ("eta_scale", "float"),
    ("schedule", "lambda_scale"): ("lambda_scale", "float"),
    ("schedule", "vanilla_eta"): ("vanilla_eta", "float"),
    ("schedule", "mu"): ("mu", "float"),
    ("diagnostics", "pathwise"): ("pathwise", "bool"),
    ("diagnostics", "error_bounds"): ("error_bounds", "bool"),
    ("diagnostics", "martingale"): ("martingale", "bool"),
    ("diagnostics", "resamples"): ("resamples", "int"),
}

def _parse_value(raw: str, kind: str, path: str):
    raw = raw.strip()
    try:
        if kind == "str":
            return raw
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            if raw.lower() in ("true", "1", "yes", "on"):
                return True
            if raw.lower() in ("false", "0", "no", "off"):
                return False
            raise ValueError("expected a boolean")
        if kind == "int_tuple":
            return tuple(int(s) for s in raw.split(",") if s.strip())
        if kind == "float_tuple":
            return tuple(float(s) for s in raw.split(",") if s.strip())
    except ValueError as exc:
        raise ConfigError(path, f"cannot parse {raw!r} as {kind}") from exc
    raise ConfigError(path, f"unknown value kind {kind}")


def _format_value(value, kind: str) -> str:
    if kind in ("int_tuple", "float_tuple"):
        return ",".join(repr(v) for v in value)
    if kind == "bool":
        return "true" if value else "false"
    if kind == "float":
        return repr(value)
    return str(value)


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a config document; raises ConfigError on any problem."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("<document>", str(exc)) from exc
    cfg = ExperimentConfig()
    for section in parser.sections():
        for key, raw in parser.items(section):
            path = f"{section}.{key}"
            if (section, key.lower()) not in _SCHEMA:
                raise ConfigError(path, "unknown configuration key")
            attr, kind = _SCHEMA[(section, key.lower())]
            setattr(cfg, attr, _parse_value(raw, kind, path))
    validate_config(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def dumps_config(cfg: ExperimentConfig) -> str:
    """Canonical serialization; reloading it yields an equal config."""
    out = configparser.ConfigParser()
    for section in ("experiment", "problem", "noise", "schedule", "diagnostics"):
        out.add_section(section)
    for (section, key), (attr, kind) in _SCHEMA.items():
        value = getattr(cfg, attr)
        if value is None:
            continue
        out.set(section, key, _format_value(value, kind))
    buf = io.StringIO()
    out.write(buf)
    return buf.getvalue()


def apply_override(cfg: ExperimentConfig, assignment: str) -> ExperimentConfig:
    """Apply one ``section.key=value`` override string."""
    if "=" not in assignment:
        raise ConfigError("<override>", f"expected section.key=value, got {assignment!r}")
    path, raw = assignment.split("=", 1)
    path = path.strip()
    if "." not in path:
        raise ConfigError(path, "override key must be section.key")
    section, key = path.split(".", 1)
    if (section, key.lower()) not in _SCHEMA:
        raise ConfigError(path, "unknown configuration key")
    attr, kind = _SCHEMA[(section, key.lower())]
    setattr(cfg, attr, _parse_value(raw, kind, path))
    return cfg


def config_digest(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(dumps_config(cfg).encode()).hexdigest()[:16]


def p_tag(p: float) -> str:
    """Directory tag for the moment order, e.g. 1.5 -> p15."""
    return f"p{round(p * 10):02d}"


def validate_config(cfg: ExperimentConfig) -> None:
    if cfg.algorithm not in ALGORITHMS:
        raise ConfigError("experiment.algorithm", f"must be one of {ALGORITHMS}")
    if cfg.horizon < 1:
        raise ConfigError("experiment.t", "horizon must be >= 1")
    if cfg.horizon_grid is not None and any(t < 1 for t in cfg.horizon_grid):
        raise ConfigError("experiment.t_grid", "all horizons must be >= 1")
    if cfg.n_seeds < 1:
        raise ConfigError("experiment.seeds", "need at least one seed")
    if not (0.0 < cfg.delta < 1.0):
        raise ConfigError("experiment.delta", "delta must lie in (0, 1)")
    if cfg.jobs < 1:
        raise ConfigError("experiment.jobs", "jobs must be >= 1")
    if not (1.0 < cfg.p <= 2.0):
        raise ConfigError("noise.p", "moment order p must lie in (1, 2]")
    if cfg.sigma < 0:
        raise ConfigError("noise.sigma", "sigma must be >= 0")
    if cfg.noise == "two_point" and not (0.0 < cfg.q <= 1.0):
        raise ConfigError("noise.q", "spike probability must lie in (0, 1]")
    if cfg.noise == "radial_pareto":
        if cfg.tail_index <= cfg.p:
            raise ConfigError("noise.tail_index", "tail index must exceed p")
        if cfg.tail_index > 2.0:
            raise ConfigError("noise.tail_index", "tail index must lie in (p, 2]")
    if cfg.noise not in ("two_point", "radial_pareto", "none"):
        raise ConfigError("noise.kind", "unknown noise kind")
    if cfg.mode not in schedules_mod.ALL_MODES:
        raise ConfigError("schedule.mode", f"must be one of {schedules_mod.ALL_MODES}")
    if cfg.mode not in MODE_FOR_ALGORITHM[cfg.algorithm]:
        raise ConfigError("schedule.mode",
                          f"mode {cfg.mode!r} does not drive algorithm {cfg.algorithm!r}")
    if cfg.resamples < 100:
        raise ConfigError("diagnostics.resamples", "need at least 100 resamples")
    # build everything once so module-level constraints surface at load time
    try:
        problem, x1 = build_problem(cfg)
        build_noise(cfg)
        build_schedule(cfg, problem, x1, horizon=cfg.horizon)
    except ConfigError:
        raise
    except (ValueError, RuntimeError) as exc:
        raise ConfigError("<config>", str(exc)) from exc


def build_problem(cfg: ExperimentConfig):
    """Instantiate the problem and its start point."""
    if cfg.problem == "quadratic":
        diag = cfg.diag if cfg.diag is not None else tuple(1.0 for _ in range(cfg.dim))
        if len(diag) != cfg.dim:
            raise ConfigError("problem.diag", "length must equal problem.dim")
        shift = cfg.shift if cfg.shift is not None else tuple(0.0 for _ in range(cfg.dim))
        if len(shift) != cfg.dim:
            raise ConfigError("problem.shift", "length must equal problem.dim")
        try:
            prob = problems_mod.make_quadratic(diag, shift)
        except ValueError as exc:
            raise ConfigError("problem.diag", str(exc)) from exc
        x1 = np.asarray(shift) + np.ones(cfg.dim) / math.sqrt(cfg.dim)
    elif cfg.problem == "simplex_quadratic":
        target = cfg.target
        if target is None:
            # interior but non-uniform, so the start point is not the minimizer
            raw = np.arange(1, cfg.dim + 1, dtype=float)
            target = tuple(raw / raw.sum())
        if len(target) != cfg.dim:
            raise ConfigError("problem.target", "length must equal problem.dim")
        try:
            prob = problems_mod.make_simplex_quadratic(target)
        except ValueError as exc:
            raise ConfigError("problem.target", str(exc)) from exc
        x1 = np.ones(cfg.dim) / cfg.dim
    elif cfg.problem == "nonconvex_ratio":
        prob = problems_mod.make_nonconvex_ratio(cfg.dim)
        x1 = np.ones(cfg.dim)
    elif cfg.problem == "quadratic_plus_norm":
        prob = problems_mod.make_quadratic_plus_norm(cfg.dim, cfg.coef)
        x1 = np.ones(cfg.dim) / math.sqrt(cfg.dim)
    else:
        raise ConfigError("problem.kind", f"unknown problem {cfg.problem!r}")
    if cfg.x1 is not None:
        if len(cfg.x1) != cfg.dim:
            raise ConfigError("problem.x1", "length must equal problem.dim")
        x1 = np.asarray(cfg.x1, dtype=float)
        if not prob.geometry.contains(x1):
            raise ConfigError("problem.x1", "start point outside the domain")
    return prob, x1


def build_noise(cfg: ExperimentConfig):
    try:
        return noise_mod.make_noise(cfg.noise, cfg.p, cfg.sigma, q=cfg.q,
                                    tail_index=cfg.tail_index)
    except ValueError as exc:
        raise ConfigError("noise.kind", str(exc)) from exc


def build_schedule(cfg: ExperimentConfig, problem, x1, horizon: int | None = None):
    """Schedule for this config at the given horizon (known-horizon modes need it)."""
    try:
        inputs = schedules_mod.derive_inputs(
            problem, x1, p=cfg.p, sigma=cfg.sigma, delta=cfg.delta,
            horizon=horizon if horizon is not None else cfg.horizon,
            mu=cfg.mu, c1=cfg.c1, c2=cfg.c2, c_override=cfg.c_override,
        )
        return schedules_mod.make_schedule(cfg.mode, inputs, norm=problem.geometry.norm,
                                           eta_scale=cfg.eta_scale,
                                           lambda_scale=cfg.lambda_scale)
    except ValueError as exc:
        raise ConfigError("schedule.mode", str(exc)) from exc
