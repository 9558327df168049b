"""Diagnostics oracles: MGF bound, clipping-error bounds, pathwise checks, traces."""

import math

import numpy as np
import pytest

from clipopt import diagnostics as diag
from clipopt import problems, schedules
from clipopt.noise import Oracle, TwoPointNoise, make_rng

GAMMA_ONE = math.exp(-1.0)


def test_series_partial_sums():
    assert diag.check_log_weight_series(1) == pytest.approx(0.5)
    assert diag.check_log_weight_series(2) == pytest.approx(
        0.5 + 1.0 / (4.0 * (1.0 + math.log(2.0)) ** 2))


# -- MGF bound ------------------------------------------------------------------


def test_mgf_rademacher_at_endpoint():
    rep = diag.check_mgf_bound(1.0, [1.0], diag.rademacher(1.0))
    entry = rep.entries[0]
    assert entry.lhs == pytest.approx(math.cosh(1.0))
    assert entry.lhs == pytest.approx(1.54308063, abs=1e-7)
    assert entry.rhs == pytest.approx(math.exp(0.75))
    assert entry.rhs == pytest.approx(2.11700002, abs=1e-7)
    assert rep.passed


def test_mgf_equality_at_zero():
    rep = diag.check_mgf_bound(2.0, [0.0], diag.rademacher(2.0))
    assert rep.entries[0].lhs == 1.0
    assert rep.entries[0].rhs == 1.0


def test_mgf_degenerate_law():
    still = diag.DiscreteLaw(np.array([0.0]), np.array([1.0]))
    rep = diag.check_mgf_bound(5.0, np.linspace(0, 0.2, 7), still)
    assert all(e.lhs == 1.0 and e.rhs == 1.0 for e in rep.entries)


def test_mgf_grid_discrete_laws():
    radius = 2.0
    lambdas = np.linspace(0.0, 1.0 / radius, 20)
    for law in (diag.rademacher(radius), diag.asymmetric_two_point(radius, 0.1),
                diag.asymmetric_two_point(radius, 0.5)):
        rep = diag.check_mgf_bound(radius, lambdas, law)
        assert rep.passed
        assert all(not e.skipped for e in rep.entries)


def test_mgf_out_of_range_grid_points_skipped():
    rep = diag.check_mgf_bound(1.0, [0.5, 2.0], diag.rademacher(1.0))
    assert not rep.entries[0].skipped
    assert rep.entries[1].skipped
    assert rep.passed


def test_mgf_monte_carlo_law():
    rng = make_rng(0)
    draws = rng.uniform(-1.0, 1.0, size=1_000_000)
    draws -= draws.mean()  # re-center so the sample is exactly zero-mean
    rep = diag.check_mgf_bound(1.01, np.linspace(0, 1.0 / 1.01, 10), draws)
    assert rep.passed
    assert rep.mc_samples == 1_000_000


def test_mgf_strict_inequality_inside_range():
    radius = 1.0
    rep = diag.check_mgf_bound(radius, np.linspace(0.05, 1.0, 10), diag.rademacher(radius))
    for e in rep.entries:
        assert e.lhs < e.rhs


# -- clipping error bounds ---------------------------------------------------------


def test_clip_error_bounds_noiseless_pass():
    prob = problems.make_quadratic([1.0, 1.0])
    oracle = Oracle(prob, TwoPointNoise(p=1.5, sigma=0.0, q=1.0), seed=0)
    rep = diag.check_clipping_error_bounds(oracle, np.array([0.5, 0.0]), level=2.0,
                                           samples=10_000, rng=make_rng(1))
    assert rep.applicable
    assert rep.u_violations == 0
    assert rep.passed


def test_clip_error_bounds_spiky_noise():
    prob = problems.make_quadratic([1.0, 1.0])
    model = TwoPointNoise(p=1.5, sigma=1.0, q=0.01)
    oracle = Oracle(prob, model, seed=2)
    rep = diag.check_clipping_error_bounds(oracle, prob.minimizer, level=50.0,
                                           samples=200_000, rng=make_rng(3))
    assert rep.applicable
    assert rep.u_violations == 0
    assert rep.bias_bound == pytest.approx(4.0 * 50.0 ** -0.5)
    assert rep.bias_norm < rep.bias_bound
    assert rep.passed


def test_clip_error_bounds_not_applicable_branch():
    prob = problems.make_quadratic([1.0, 1.0])
    oracle = Oracle(prob, TwoPointNoise(p=1.5, sigma=1.0, q=0.1), seed=4)
    x = np.array([10.0, 0.0])  # gradient norm 10 > level/2
    rep = diag.check_clipping_error_bounds(oracle, x, level=3.0, samples=10_000,
                                           rng=make_rng(5))
    assert not rep.applicable
    assert rep.u_violations == 0
    assert rep.passed


# -- pathwise checks -----------------------------------------------------------------


def _smd_setup(prob, x1, sigma, horizon, seed, q=0.2, p=1.5):
    s = schedules.derive_inputs(prob, x1, p=p, sigma=sigma, delta=0.1, horizon=horizon)
    sched = schedules.smd_known_t(s)
    oracle = Oracle(prob, TwoPointNoise(p=p, sigma=sigma, q=q), seed=seed)
    return sched, oracle


def test_pathwise_smd_noiseless_and_noisy():
    prob = problems.make_quadratic([1.0, 2.0])
    x1 = np.array([1.0, 0.5])
    sched, oracle = _smd_setup(prob, x1, 0.0, 200, seed=0)
    assert diag.check_pathwise_smd(prob, oracle, sched, 200, x1).passed
    sched, oracle = _smd_setup(prob, x1, 1.0, 1000, seed=1)
    rep = diag.check_pathwise_smd(prob, oracle, sched, 1000, x1)
    assert rep.passed, rep.violations[:3]


def test_pathwise_smd_nonsmooth_term():
    prob = problems.make_quadratic_plus_norm(2, 0.25)  # condition constant 0.5
    x1 = np.array([0.7, 0.7])
    for sigma, seed in ((0.0, 0), (1.0, 7)):
        sched, oracle = _smd_setup(prob, x1, sigma, 1000, seed=seed)
        rep = diag.check_pathwise_smd(prob, oracle, sched, 1000, x1)
        assert rep.passed, rep.violations[:3]


def test_pathwise_asmd_simplex_run():
    prob = problems.make_simplex_quadratic([0.2, 0.3, 0.5])
    y1 = np.ones(3) / 3
    s = schedules.derive_inputs(prob, y1, p=1.5, sigma=0.5, delta=0.1, horizon=1000)
    sched = schedules.asmd_known_t(s)
    oracle = Oracle(prob, TwoPointNoise(p=1.5, sigma=0.5, q=0.2), seed=3)
    rep = diag.check_pathwise_asmd(prob, oracle, sched, 1000, y1)
    assert rep.passed, rep.violations[:3]


def test_pathwise_asmd_noiseless():
    prob = problems.make_quadratic([1.0, 1.0])
    y1 = np.array([1.0, 0.0])
    s = schedules.derive_inputs(prob, y1, p=1.5, sigma=0.0, delta=0.1, horizon=300)
    sched = schedules.asmd_known_t(s)
    oracle = Oracle(prob, TwoPointNoise(p=1.5, sigma=0.0, q=1.0), seed=0)
    assert diag.check_pathwise_asmd(prob, oracle, sched, 300, y1).passed


def test_pathwise_sgd_runs():
    prob = problems.make_nonconvex_ratio(2)
    x1 = np.array([1.0, 1.0])
    s = schedules.derive_inputs(prob, x1, p=1.5, sigma=1.0, delta=0.1, horizon=1000)
    sched = schedules.sgd_known_t(s)
    oracle = Oracle(prob, TwoPointNoise(p=1.5, sigma=1.0, q=0.2), seed=5)
    rep = diag.check_pathwise_sgd(prob, oracle, sched, 1000, x1)
    assert rep.passed, rep.violations[:3]


def test_pathwise_sgd_boundary_step_size():
    # eta = 1/L exactly: the inner-product coefficient vanishes
    prob = problems.make_quadratic([1.0, 1.0])
    x1 = np.array([1.0, 0.0])
    s = schedules.derive_inputs(prob, x1, p=1.5, sigma=1.0, delta=0.1, horizon=100)
    base = schedules.sgd_known_t(s)
    sched = schedules.make_schedule("sgd_known_t", s, eta_scale=1.0 / (base.eta(1) * 1.0))
    assert sched.eta(1) == pytest.approx(1.0)
    oracle = Oracle(prob, TwoPointNoise(p=1.5, sigma=1.0, q=0.2), seed=6)
    rep = diag.check_pathwise_sgd(prob, oracle, sched, 100, x1)
    assert rep.passed, rep.violations[:3]


def test_pathwise_rejects_oversized_steps():
    prob = problems.make_quadratic([1.0, 1.0])
    x1 = np.array([1.0, 0.0])
    s = schedules.derive_inputs(prob, x1, p=1.5, sigma=0.0, delta=0.1, horizon=10)
    sched = schedules.make_schedule("smd_known_t", s, eta_scale=1000.0)
    oracle = Oracle(prob, TwoPointNoise(p=1.5, sigma=0.0, q=1.0), seed=0)
    with pytest.raises(ValueError, match="1/\\(4L\\)"):
        diag.check_pathwise_smd(prob, oracle, sched, 10, x1)


# -- martingale traces ----------------------------------------------------------------


def test_martingale_smd_noiseless_never_crosses():
    prob = problems.make_quadratic([1.0, 1.0])
    x1 = np.array([1.0, 0.0])
    sched, oracle = _smd_setup(prob, x1, 0.0, 100, seed=0)
    trace = diag.martingale_trace_smd(prob, oracle, sched, 100, x1, delta=0.1,
                                      resamples=128, rng=make_rng(1))
    assert not trace.crossed
    assert np.max(trace.running_sum) <= 1e-12
    assert np.all(np.diff(trace.weights) <= 1e-15)  # z_t nonincreasing
    np.testing.assert_allclose(np.cumsum(trace.increments), trace.running_sum)


def test_martingale_smd_noisy_trace_fields():
    prob = problems.make_quadratic([1.0, 1.0])
    x1 = np.array([1.0, 0.0])
    sched, oracle = _smd_setup(prob, x1, 1.0, 150, seed=9)
    trace = diag.martingale_trace_smd(prob, oracle, sched, 150, x1, delta=0.1,
                                      resamples=200, rng=make_rng(2))
    assert trace.threshold == pytest.approx(math.log(10.0))
    assert trace.weights.size == 150
    assert np.all(trace.cond_second_moment >= 0)
    assert np.all(np.diff(trace.weights) <= 1e-15)


def test_martingale_sgd_noiseless_never_crosses():
    prob = problems.make_nonconvex_ratio(2)
    x1 = np.array([1.0, 1.0])
    s = schedules.derive_inputs(prob, x1, p=1.5, sigma=0.0, delta=0.1, horizon=100)
    sched = schedules.sgd_known_t(s)
    oracle = Oracle(prob, TwoPointNoise(p=1.5, sigma=0.0, q=1.0), seed=0)
    trace = diag.martingale_trace_sgd(prob, oracle, sched, 100, x1, delta=0.1,
                                      resamples=128, rng=make_rng(3))
    assert not trace.crossed
    assert np.max(trace.running_sum) <= 1e-12


def test_martingale_sgd_rejects_off_guarantee_schedule():
    prob = problems.make_nonconvex_ratio(2)
    x1 = np.array([1.0, 1.0])
    s = schedules.derive_inputs(prob, x1, p=1.5, sigma=1.0, delta=0.1, horizon=100)
    sched = schedules.make_schedule("sgd_known_t", s, eta_scale=10.0)
    oracle = Oracle(prob, TwoPointNoise(p=1.5, sigma=1.0, q=0.2), seed=0)
    with pytest.raises(ValueError, match="trace undefined"):
        diag.martingale_trace_sgd(prob, oracle, sched, 100, x1, delta=0.1,
                                  resamples=128, rng=make_rng(4))


def test_martingale_smd_first_step_exponential_moment():
    # at t = 1 the conditioning is trivial, so the exponential-moment property
    # E[exp(Z_1)] <= 1 is directly testable across independent seeds
    prob = problems.make_quadratic([1.0, 1.0])
    x1 = np.array([4.0, 0.0])
    model = TwoPointNoise(p=1.5, sigma=1.0, q=0.3)
    s = schedules.derive_inputs(prob, x1, p=1.5, sigma=1.0, delta=0.1, horizon=64)
    sched = schedules.smd_known_t(s)
    draws = []
    for seed in range(2000):
        trace = diag.martingale_trace_smd(prob, Oracle(prob, model, seed=seed), sched,
                                          1, x1, delta=0.1, resamples=200,
                                          rng=make_rng(6_000_000 + seed))
        draws.append(trace.increments[0])
    e = np.exp(np.array(draws))
    stderr = e.std(ddof=1) / math.sqrt(e.size)
    assert e.mean() <= 1.0 + 3.0 * stderr
    assert e.mean() < 1.0  # strictly below: the compensator leaves real slack


def test_pathwise_smd_detects_dropped_nonsmooth_term():
    # sensitivity control: with the additive constant zeroed out, the same
    # run violates the inequality wherever a step overshoots across the kink
    import dataclasses
    nonsmooth = problems.make_quadratic_plus_norm(2, 0.25)
    wrong = dataclasses.replace(nonsmooth, lipschitz_g=0.0)
    xn = np.array([0.05, 0.0])
    oracle = lambda prob: Oracle(prob, TwoPointNoise(p=1.5, sigma=0.0, q=1.0), seed=0)
    for prob, expect_clean in ((wrong, False), (nonsmooth, True)):
        s = schedules.derive_inputs(prob, xn, p=1.5, sigma=0.0, delta=0.1, horizon=200)
        base = schedules.smd_known_t(s)
        sched = schedules.make_schedule("smd_known_t", s, eta_scale=0.25 / base.eta(1))
        rep = diag.check_pathwise_smd(prob, oracle(prob), sched, 200, xn)
        assert rep.passed == expect_clean


# -- serialization ---------------------------------------------------------------------


def test_report_serialization(tmp_path):
    prob = problems.make_quadratic([1.0, 1.0])
    x1 = np.array([1.0, 0.0])
    sched, oracle = _smd_setup(prob, x1, 1.0, 50, seed=0)
    reports = [
        diag.check_pathwise_smd(prob, oracle, sched, 50, x1),
        diag.check_mgf_bound(1.0, [0.0, 0.5, 1.0], diag.rademacher(1.0)),
    ]
    csv_path = tmp_path / "reports.csv"
    jsonl_path = tmp_path / "reports.jsonl"
    diag.write_reports_csv(reports, csv_path)
    diag.write_reports_jsonl(reports, jsonl_path)
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "# schema=1"
    assert lines[1].split(",") == list(diag.REPORT_COLUMNS)
    assert len(lines) == 4
    import json
    rows = [json.loads(line) for line in jsonl_path.read_text().splitlines()]
    assert rows[0]["name"] == "pathwise_smd"
    assert rows[0]["violations"] == 0
