"""Step-size and clipping-level schedules with verifiable conditions.

Seven modes are provided, one per convergence guarantee:

* ``smd_known_t`` / ``smd_anytime``: mirror descent with a horizon-dependent
  constant pair or the horizon-free substitution ``T -> 2t(1+log t)^2``;
* ``smd_param_free``: mirror descent without knowledge of sigma, delta or the
  initial distance, driven online by the running maximum of the trajectory's
  displacement from the start;
* ``asmd_known_t`` / ``asmd_anytime``: the accelerated three-sequence method;
* ``sgd_known_t`` / ``sgd_anytime``: nonconvex gradient descent on l2 space.

Every schedule exposes the proof-level constants (C1, C2, C3, A, Q) that its
guarantee is built on, and :func:`verify_schedule_conditions` checks the
corresponding inequalities numerically over a horizon.  Logarithms are
natural throughout.  ``eta_scale`` is a fault-injection knob for the
condition checker: values other than 1 deliberately break the guarantees.
``lambda_scale`` rescales the emitted clipping level without touching the
step size; it exists for baseline contrasts where clipping must engage
below the guarantee level, and is equally off-guarantee.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .problems import Problem

SMD_MODES = ("smd_known_t", "smd_anytime", "smd_param_free")
ASMD_MODES = ("asmd_known_t", "asmd_anytime")
SGD_MODES = ("sgd_known_t", "sgd_anytime")
ALL_MODES = SMD_MODES + ASMD_MODES + SGD_MODES


def horizon_proxy(t: int) -> float:
    """The anytime substitution ``2 t (1 + log t)^2`` (natural log)."""
    return 2.0 * t * (1.0 + math.log(t)) ** 2


def log_weight_tail_sum(t_max: int) -> float:
    """Partial sum of ``1 / (2 t (1 + log t)^2)``; stays below 1 for all t."""
    t = np.arange(1, t_max + 1, dtype=float)
    return float(np.sum(1.0 / (2.0 * t * (1.0 + np.log(t)) ** 2)))


@dataclass(frozen=True)
class ScheduleInputs:
    """Problem and confidence constants a schedule is built from.

    ``r1`` and ``r0`` are the Bregman radii ``sqrt(2 D(x*, x1))`` and
    ``sqrt(2 D(x*, x0))``; ``delta1`` is the initial value gap (nonconvex
    modes); ``grad1_bound`` upper-bounds the dual norm of the gradient at the
    start (parameter-free mode); ``c1``/``c2`` are its dimension constants.
    ``c_override`` replaces the accelerated modes' internal constant
    ``max(1e4, ...)`` and is off-guarantee, for illustrative runs only.
    """

    p: float
    sigma: float
    smoothness: float
    delta: float = 0.1
    horizon: int | None = None
    r1: float | None = None
    r0: float = 0.0
    mu: float = 0.0
    g0_norm: float = 0.0
    delta1: float | None = None
    grad1_bound: float | None = None
    c1: float = 1.0
    c2: float = 1.0
    c_override: float | None = None

    def __post_init__(self):
        if not (1.0 < self.p <= 2.0):
            raise ValueError("p must lie in (1, 2]")
        if self.sigma < 0 or self.smoothness <= 0:
            raise ValueError("sigma must be >= 0 and the smoothness constant positive")
        if not (0.0 < self.delta < 1.0):
            raise ValueError("failure probability delta must lie in (0, 1)")
        if self.c1 <= 0 or self.c2 <= 0:
            raise ValueError("dimension constants c1, c2 must be positive")

    @property
    def gamma(self) -> float:
        return max(math.log(1.0 / self.delta), 1.0)


def derive_inputs(problem: Problem, x1, *, p: float, sigma: float, delta: float = 0.1,
                  horizon: int | None = None, x0=None, g0=None, mu: float = 0.0,
                  c1: float = 1.0, c2: float = 1.0, c_override: float | None = None) -> ScheduleInputs:
    """Compute schedule inputs from a problem instance and a start point.

    Defaults take the reference point ``x0`` at the minimizer with ``g0 = 0``
    and ``mu = 0``, which is exact for instances whose minimizer has zero
    gradient.  Convex quantities (r1, r0) require a known minimizer; the
    value gap ``delta1`` and gradient bound are always available.
    """
    x1 = np.asarray(x1, dtype=float)
    geom = problem.geometry
    r1 = r0 = None
    if problem.minimizer is not None:
        r1 = math.sqrt(2.0 * geom.bregman(problem.minimizer, x1))
        if x0 is None:
            x0 = problem.minimizer
        r0 = math.sqrt(2.0 * geom.bregman(problem.minimizer, np.asarray(x0, dtype=float)))
    g0_norm = 0.0 if g0 is None else geom.dual_norm(np.asarray(g0, dtype=float))
    return ScheduleInputs(
        p=p, sigma=sigma, smoothness=problem.smoothness, delta=delta, horizon=horizon,
        r1=r1, r0=0.0 if r0 is None else r0, mu=mu, g0_norm=g0_norm,
        delta1=problem.gap(x1), grad1_bound=geom.dual_norm(problem.grad(x1)),
        c1=c1, c2=c2, c_override=c_override,
    )


class Schedule:
    """Per-iteration ``(eta_t, lambda_t)`` generator for one mode.

    Known-horizon and anytime modes are pure; the parameter-free mode carries
    trajectory state and must be fed each iterate through :meth:`observe`
    before its pair for that step is requested (one instance per run).
    """

    def __init__(self, mode: str, inputs: ScheduleInputs, norm=None, eta_scale: float = 1.0,
                 lambda_scale: float = 1.0):
        if mode not in ALL_MODES:
            raise ValueError(f"unknown schedule mode {mode!r}")
        if lambda_scale <= 0:
            raise ValueError("lambda_scale must be positive")
        self.mode = mode
        self.inputs = inputs
        self.eta_scale = eta_scale
        self.lambda_scale = lambda_scale
        self._norm = norm  # primal norm for the parameter-free displacement
        self._validate()
        self.reset()

    def _validate(self):
        s = self.inputs
        if self.mode in ("smd_known_t", "asmd_known_t", "sgd_known_t") and s.horizon is None:
            raise ValueError(f"{self.mode} requires a known horizon")
        if self.mode in SMD_MODES + ASMD_MODES and self.mode != "smd_param_free":
            if s.r1 is None or s.r1 <= 0:
                raise ValueError("convex modes need a positive initial Bregman radius r1")
        if self.mode == "smd_param_free" and (s.grad1_bound is None):
            raise ValueError("parameter-free mode needs an upper bound on the initial gradient norm")
        if self.mode in SGD_MODES and (s.delta1 is None or s.delta1 <= 0):
            raise ValueError("nonconvex modes need a positive initial value gap delta1")

    # -- trajectory state (parameter-free mode) -----------------------------

    def reset(self):
        self._t_seen = 0
        self._x1 = None
        self._dev_max = 0.0

    @property
    def stateful(self) -> bool:
        return self.mode == "smd_param_free"

    def observe(self, t: int, x) -> None:
        """Record iterate ``x_t``; required before ``pair(t)`` in stateful mode."""
        if not self.stateful:
            return
        if t != self._t_seen + 1:
            raise ValueError(f"trajectory state not updated monotonically: got t={t} after t={self._t_seen}")
        x = np.asarray(x, dtype=float)
        if t == 1:
            self._x1 = x.copy()
        else:
            nrm = self._norm if self._norm is not None else (lambda v: float(np.linalg.norm(v)))
            self._dev_max = max(self._dev_max, float(nrm(x - self._x1)))
        self._t_seen = t

    # -- per-step values ------------------------------------------------------

    def alpha(self, t: int) -> float:
        """Momentum weight ``2 / (t + 1)`` of the accelerated modes."""
        if self.mode not in ASMD_MODES:
            raise ValueError("alpha is defined for accelerated modes only")
        return 2.0 / (t + 1)

    def _accel_c(self, t: int) -> float:
        s = self.inputs
        if s.c_override is not None:
            return float(s.c_override)
        gamma, L = s.gamma, s.smoothness
        if self.mode == "asmd_known_t":
            grow = 4.0 * (s.horizon + 1) * (26.0 * s.horizon / gamma) ** (1.0 / s.p) * s.sigma
        else:
            grow = 4.0 * (t + 1) * (26.0 * horizon_proxy(t) / gamma) ** (1.0 / s.p) * s.sigma
        return max(1e4, grow / (gamma * L * s.r1))

    def lam(self, t: int) -> float:
        return self.lambda_scale * self._lam_raw(t)

    def _lam_raw(self, t: int) -> float:
        if t < 1:
            raise ValueError("steps are 1-based")
        s = self.inputs
        gamma, L, p, sigma = s.gamma, s.smoothness, s.p, s.sigma
        if self.mode == "smd_known_t":
            det = 2.0 * (2.0 * L * s.r1 + L * s.r0 + s.mu * sigma + s.g0_norm)
            return max((26.0 * s.horizon / gamma) ** (1.0 / p) * sigma, det)
        if self.mode == "smd_anytime":
            det = 2.0 * (2.0 * L * s.r1 + L * s.r0 + s.mu * sigma + s.g0_norm)
            return max((26.0 * horizon_proxy(t) / gamma) ** (1.0 / p) * sigma, det)
        if self.mode == "smd_param_free":
            if t > self._t_seen:
                raise ValueError(f"trajectory state missing for t={t}; call observe() first")
            return max(
                (26.0 * horizon_proxy(t) * s.c2) ** (1.0 / p),
                2.0 * (L * self._dev_max + s.grad1_bound),
                L * s.c1 / 6.0,
            )
        if self.mode in ASMD_MODES:
            return self._accel_c(t) * s.r1 * gamma * L * self.alpha(t) / 8.0
        # nonconvex modes
        tau = float(s.horizon) if self.mode == "sgd_known_t" else horizon_proxy(t)
        d1 = s.delta1
        return max(
            (8.0 * gamma / math.sqrt(L * d1)) ** (1.0 / (p - 1.0)) * tau ** (1.0 / (3 * p - 2)) * sigma ** (p / (p - 1.0)),
            2.0 * math.sqrt(90.0 * L * d1),
            32.0 ** (1.0 / p) * sigma * tau ** (1.0 / (3 * p - 2)),
        )

    def eta(self, t: int) -> float:
        s = self.inputs
        if self.mode in SMD_MODES:
            num = s.r1 / (24.0 * s.gamma) if self.mode != "smd_param_free" else s.c1 / 24.0
            return self.eta_scale * num / self._lam_raw(t)
        if self.mode in ASMD_MODES:
            return self.eta_scale / (3.0 * self._accel_c(t) * s.gamma ** 2 * s.smoothness * self.alpha(t))
        tau = float(s.horizon) if self.mode == "sgd_known_t" else horizon_proxy(t)
        num = math.sqrt(s.delta1) * tau ** ((1.0 - s.p) / (3 * s.p - 2))
        return self.eta_scale * num / (8.0 * self._lam_raw(t) * math.sqrt(s.smoothness) * s.gamma)

    def pair(self, t: int) -> tuple[float, float]:
        lam = self.lam(t)
        return self.eta(t), lam

    @property
    def off_guarantee(self) -> bool:
        return (self.eta_scale != 1.0 or self.lambda_scale != 1.0
                or (self.mode in ASMD_MODES and self.inputs.c_override is not None))

    # -- proof-level constants -------------------------------------------------

    def constants(self) -> dict:
        """The (C1, C2, C3, A, Q) pack the mode's guarantee is proved with.

        Sigma-scaled entries are infinite in the noiseless case; the
        condition checker reports the corresponding inequalities as vacuous.
        """
        s = self.inputs
        gamma, p, sigma = s.gamma, s.p, s.sigma
        sp = sigma ** p
        if self.mode == "smd_param_free":
            a_const = gamma + 2.0 * sp / s.c2
            return {"C1": s.c1 / 24.0, "C2": 1.0 / (26.0 * s.c2), "C3": 1.0 / (52.0 * s.c2),
                    "A": a_const, "Q": a_const}
        if self.mode in SMD_MODES + ASMD_MODES:
            c2 = gamma / (26.0 * sp) if sp > 0 else math.inf
            if self.mode in ("smd_known_t", "asmd_known_t"):
                c3 = gamma / (26.0 * s.horizon * sp) if sp > 0 else math.inf
            else:
                c3 = gamma / (52.0 * sp) if sp > 0 else math.inf
            return {"C1": s.r1 / (24.0 * gamma), "C2": c2, "C3": c3, "A": 3.0 * gamma, "Q": 3.0 * gamma}
        c2 = 1.0 / sp if sp > 0 else math.inf
        c3 = s.delta1 / (2048.0 * sp * gamma) if sp > 0 else math.inf
        return {"C1": math.sqrt(s.delta1) / (4.0 * math.sqrt(2.0) * gamma),
                "C2": c2, "C3": c3, "A": 256.0 * gamma ** 2, "Q": None}


def smd_known_t(inputs: ScheduleInputs) -> Schedule:
    return Schedule("smd_known_t", inputs)


def smd_anytime(inputs: ScheduleInputs) -> Schedule:
    return Schedule("smd_anytime", inputs)


def smd_param_free(inputs: ScheduleInputs, norm=None) -> Schedule:
    return Schedule("smd_param_free", inputs, norm=norm)


def asmd_known_t(inputs: ScheduleInputs) -> Schedule:
    return Schedule("asmd_known_t", inputs)


def asmd_anytime(inputs: ScheduleInputs) -> Schedule:
    return Schedule("asmd_anytime", inputs)


def sgd_known_t(inputs: ScheduleInputs) -> Schedule:
    return Schedule("sgd_known_t", inputs)


def sgd_anytime(inputs: ScheduleInputs) -> Schedule:
    return Schedule("sgd_anytime", inputs)


def make_schedule(mode: str, inputs: ScheduleInputs, norm=None, eta_scale: float = 1.0,
                  lambda_scale: float = 1.0) -> Schedule:
    return Schedule(mode, inputs, norm=norm, eta_scale=eta_scale, lambda_scale=lambda_scale)


# -- condition verification -----------------------------------------------------


@dataclass
class ConditionCheck:
    name: str
    passed: bool
    margin: float
    note: str = ""


@dataclass
class ConditionReport:
    mode: str
    horizon: int
    checks: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def rows(self) -> list[dict]:
        return [{"condition": c.name, "passed": c.passed, "margin": c.margin, "note": c.note}
                for c in self.checks]


def verify_schedule_conditions(schedule: Schedule, horizon: int) -> ConditionReport:
    """Numerically check the gap-recursion conditions over ``[1, horizon]``.

    Mirror-descent modes are checked against: a constant ``eta*lambda``
    product, the summed inverse clipping levels against C2, the 2p-versus-p
    power bound against C3, the lower bound defining A, and the step-size
    cap.  Nonconvex modes use their own condition set (product cap against
    C1, the inverse-step moment bound, the weighted power sum, the squared-A
    lower bound, and the cap ``eta <= 1/L``).  Noiseless runs make the
    sigma-scaled conditions vacuous; they are reported as passed with a note.
    """
    s = schedule.inputs
    consts = schedule.constants()
    gamma, p, sigma, L = s.gamma, s.p, s.sigma, s.smoothness
    sp = sigma ** p
    report = ConditionReport(mode=schedule.mode, horizon=horizon)
    ts = np.arange(1, horizon + 1)
    lams = np.array([schedule.lam(int(t)) for t in ts])
    etas = np.array([schedule.eta(int(t)) for t in ts])
    log_term = math.log(1.0 / s.delta)

    def add(name, passed, margin, note=""):
        report.checks.append(ConditionCheck(name, bool(passed), float(margin), note))

    if schedule.mode in SMD_MODES + ASMD_MODES:
        c1, c2, c3, a_const = consts["C1"], consts["C2"], consts["C3"], consts["A"]
        prod_dev = np.max(np.abs(etas * lams - c1)) / c1
        add("eta_lambda_constant", prod_dev <= 1e-9, prod_dev,
            "max relative deviation of eta_t * lambda_t from C1")

        power_sum = float(np.sum(lams ** (-p)))
        if math.isinf(c2):
            add("lambda_power_sum", True, math.inf, "vacuous: sigma = 0")
        else:
            add("lambda_power_sum", power_sum <= c2 * (1 + 1e-12), c2 - power_sum)

        max_inv = float(np.max(lams ** (-p)))
        if math.isinf(c3):
            add("lambda_2p_vs_p", True, math.inf, "vacuous: sigma = 0")
        else:
            add("lambda_2p_vs_p", max_inv <= c3 * (1 + 1e-12), c3 - max_inv)

        if sp == 0:
            rhs = max(log_term, 1.0)
        else:
            rhs = max(log_term + 26.0 * sp * c2 + 2.0 * sigma ** (2 * p) * c2 * c3 / a_const, 1.0)
        add("A_lower_bound", a_const >= rhs * (1 - 1e-12), a_const - rhs)

        if schedule.mode in ASMD_MODES:
            alphas = 2.0 / (ts + 1)
            cap = float(np.max(etas * alphas * L))
            add("eta_cap", cap <= 0.5 * (1 + 1e-12), 0.5 - cap, "eta_t <= 1/(2 L alpha_t)")
            if horizon >= 2:
                lhs = etas[:-1] / alphas[:-1]
                rhs_m = etas[1:] * (1.0 - alphas[1:]) / alphas[1:]
                worst = float(np.min(lhs - rhs_m))
                add("momentum_monotone", worst >= -1e-12 * np.max(lhs), worst,
                    "eta_{t-1}/alpha_{t-1} >= eta_t (1-alpha_t)/alpha_t")
        else:
            cap = float(np.max(etas)) * L
            add("eta_cap", cap <= 0.25 * (1 + 1e-12), 0.25 - cap, "eta_t <= 1/(4L)")
    else:
        c1, c2, c3, a_const = consts["C1"], consts["C2"], consts["C3"], consts["A"]
        prod = float(np.max(etas * lams)) * math.sqrt(2.0 * L)
        add("eta_lambda_sqrt2L_cap", prod <= c1 * (1 + 1e-9), c1 - prod)

        stat = float(np.max(lams ** (-p) / (L * etas)))
        if math.isinf(c2):
            add("inverse_step_moment", True, math.inf, "vacuous: sigma = 0")
        else:
            add("inverse_step_moment", stat <= c2 * (1 + 1e-9), c2 - stat)

        wsum = float(np.sum(L * lams ** (2.0 - p) * etas ** 2))
        if math.isinf(c3):
            add("weighted_power_sum", True, math.inf, "vacuous: sigma = 0")
        else:
            add("weighted_power_sum", wsum <= c3 * (1 + 1e-9), c3 - wsum)

        if sp == 0:
            rhs = max(64.0 * log_term ** 2, 1.0)
        else:
            rhs = max(64.0 * (log_term + 60.0 * sp * c3 / c1 ** 2) ** 2
                      + (48.0 * sigma ** (2 * p) * c2 * c3 + 140.0 * sp * c3) / c1 ** 2, 1.0)
        add("A_lower_bound", a_const >= rhs * (1 - 1e-12), a_const - rhs)

        cap = float(np.max(etas)) * L
        add("eta_cap", cap <= 1.0 * (1 + 1e-12), 1.0 - cap, "eta_t <= 1/L")

    return report


# -- guarantee right-hand sides ---------------------------------------------------


def theorem_bound(schedule: Schedule, horizon: int) -> float:
    """Explicit high-probability bound on the run's summary metric.

    Mirror-descent modes bound the average gap over the horizon, accelerated
    modes the final gap, nonconvex modes the average squared gradient norm.
    Pure function of the schedule inputs; no trajectory quantities enter.
    """
    s = schedule.inputs
    gamma, p, sigma, L = s.gamma, s.p, s.sigma, s.smoothness
    T = horizon
    if schedule.mode == "smd_known_t":
        det = 2.0 * (2.0 * L * s.r1 + L * s.r0 + s.mu * sigma + s.g0_norm)
        return 48.0 * s.r1 * max(
            26.0 ** (1.0 / p) * T ** ((1.0 - p) / p) * sigma * gamma ** ((p - 1.0) / p),
            det * gamma / T,
        )
    if schedule.mode == "smd_anytime":
        det = 2.0 * (2.0 * L * s.r1 + L * s.r0 + s.mu * sigma + s.g0_norm)
        return 48.0 * s.r1 * max(
            52.0 ** (1.0 / p) * T ** ((1.0 - p) / p) * (1.0 + math.log(T)) ** (2.0 / p)
            * sigma * gamma ** ((p - 1.0) / p),
            det * gamma / T,
        )
    if schedule.mode == "smd_param_free":
        a_const = gamma + 2.0 * sigma ** p / s.c2
        lead = (8.0 / (T * s.c1)) * (s.r1 + s.c1 / 3.0 * a_const) ** 2
        return lead * max(
            (52.0 * T * (1.0 + math.log(T)) ** 2 * s.c2) ** (1.0 / p),
            4.0 * s.r1 * L + (2.0 * s.c1 / 3.0) * L * a_const + 2.0 * s.grad1_bound,
            L * s.c1 / 6.0,
        )
    if schedule.mode == "asmd_known_t":
        return 6.0 * max(
            1e4 * L * gamma ** 2 * s.r1 ** 2 * (T + 1) ** -2,
            4.0 * s.r1 * (26.0 * T) ** (1.0 / p) * gamma ** ((p - 1.0) / p) * sigma / (T + 1),
        )
    if schedule.mode == "asmd_anytime":
        return 6.0 * max(
            1e4 * L * gamma ** 2 * s.r1 ** 2 * (T + 1) ** -2,
            4.0 * s.r1 * (26.0 * horizon_proxy(T)) ** (1.0 / p) * gamma ** ((p - 1.0) / p) * sigma / (T + 1),
        )
    d1 = s.delta1
    tau = float(T) if schedule.mode == "sgd_known_t" else horizon_proxy(T)
    lam_T = max(
        (8.0 * gamma / math.sqrt(L * d1)) ** (1.0 / (p - 1.0)) * tau ** (1.0 / (3 * p - 2)) * sigma ** (p / (p - 1.0)),
        2.0 * math.sqrt(90.0 * L * d1),
        32.0 ** (1.0 / p) * sigma * tau ** (1.0 / (3 * p - 2)),
    )
    # 90 * delta1 / (eta_T * T) with eta_T = sqrt(delta1) tau^{(1-p)/(3p-2)} / (8 lam_T sqrt(L) gamma)
    return 720.0 * math.sqrt(d1 * L) * gamma * lam_T * tau ** ((p - 1.0) / (3 * p - 2)) / T
