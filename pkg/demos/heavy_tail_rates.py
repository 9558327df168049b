"""Convergence-rate exponents under heavy-tailed spikes.

Sweeps the horizon for clipped mirror descent (convex) and clipped gradient
descent (nonconvex) at two moment orders, fits the log-log slope of the
median metric over seeds, and prints it against the predicted exponent
((1-p)/p and (2-2p)/(3p-2)).  Smaller than the acceptance run; a couple of
seconds per row.
"""

from clipopt import harness
from clipopt.config import ExperimentConfig, validate_config

CASES = [
    ("smd", 1.5, dict(sigma=0.12, x1=(8.0, 0.0), problem="quadratic")),
    ("smd", 2.0, dict(sigma=0.25, x1=(4.0, 0.0), problem="quadratic")),
    ("sgd", 1.5, dict(sigma=0.1, x1=(0.5, 0.5), problem="nonconvex_ratio")),
    ("sgd", 2.0, dict(sigma=0.1, x1=(0.1, 0.1), problem="nonconvex_ratio")),
]


def main():
    import math
    for algorithm, p, knobs in CASES:
        cfg = ExperimentConfig(
            experiment_id="rates-demo", algorithm=algorithm,
            mode=f"{algorithm}_known_t", horizon=256,
            horizon_grid=(256, 1024, 4096, 16384), n_seeds=100, base_seed=0,
            delta=math.exp(-1.0), noise="two_point", p=p, q=0.1, dim=2, **knobs)
        validate_config(cfg)
        fit = harness.fit_rate(cfg)
        print(f"{algorithm} p={p}: slope={fit.slope:+.3f} "
              f"target={fit.exponent:+.3f} r2={fit.r_squared:.4f} "
              f"medians={[f'{m:.2e}' for m in fit.medians]}")


if __name__ == "__main__":
    main()
