"""Monte Carlo harness comparing estimator variance with the efficiency bound ``1 / I*``.

Replication ``r`` draws its randomness from ``make_rng(mix64(seed, r))``, so
results do not depend on execution order or on the number of worker threads.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .estimators import (
    TwoStepConfig,
    mle_from_counts,
    method_of_moments,
    preliminary_channel,
    two_step_estimate,
    warner_estimator,
)
from .fisher import fisher_info_private
from .kernels import LaplaceMechanism, laplace_sanitize, make_rng, randomized_response, sample_many
from .models import DiscreteModel, discretize, fisher_info_raw, model_from_name
from .staircase import solve_optimal_mechanism

__all__ = [
    "ESTIMATORS",
    "CSV_HEADER",
    "mix64",
    "SimulationConfig",
    "SimulationSummary",
    "run_replication",
    "run_experiment",
    "efficiency_bound",
    "bound_table",
    "write_csv",
]

ESTIMATORS = ("two-step", "warner", "mom", "private-mle")
CSV_HEADER = ["rep", "seed", "theta_tilde", "theta_hat", "k_hat", "i_star_hat"]
MASK64 = 0xFFFFFFFFFFFFFFFF


def mix64(seed: int, rep: int) -> int:
    """SplitMix64 finalizer applied to ``seed + (rep + 1) * 0x9E3779B97F4A7C15`` (mod 2^64)."""
    z = (int(seed) + (int(rep) + 1) * 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


@dataclass
class SimulationConfig:
    model: str
    theta0: float
    alpha: float
    n: int
    reps: int
    estimator: str = "two-step"
    seed: int = 0
    n1_exponent: float = 0.7
    threads: int = 1
    out_csv: str | None = None
    out_json: str | None = None

    def validate(self):
        if self.reps < 1:
            raise ValueError(f"reps must be >= 1, got {self.reps}")
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"unknown estimator {self.estimator!r}; choose from {', '.join(ESTIMATORS)}")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        model = model_from_name(self.model)
        model.check_theta(self.theta0)
        if self.estimator == "warner" and getattr(model, "name", "") != "bernoulli":
            raise ValueError("the warner estimator only applies to the bernoulli model")
        return model


@dataclass
class SimulationSummary:
    """Replication-level estimates and variance vs the efficiency bound.

    ``n_var`` is the unbiased sample variance of ``sqrt(n) (theta_hat - theta0)``;
    it and ``ratio`` are ``None`` when ``reps == 1``.
    """

    config: dict
    estimates: list[float]
    mean: float
    bias: float
    n_var: float | None
    bound: float
    ratio: float | None
    std_error: float | None
    wall_clock: float
    manifest: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _labels_of(model, idx):
    return np.asarray(model.labels)[idx]


def _mom_setup(model, alpha):
    """Laplace moment estimator of the mean with ``g(x) = x``."""
    a, b = model.theta_domain
    if isinstance(model, DiscreteModel):
        m = max(model.labels)
        # Binomial(m, theta): E[X] = m theta, range [0, m]
        return LaplaceMechanism(tau=float(m), alpha=alpha), (lambda y: y / m), 0.0, float(m)
    sigma = float(model.name.split(":", 1)[1]) if ":" in model.name else 1.0
    tau = max(abs(a), abs(b)) + 5.0 * sigma
    return LaplaceMechanism(tau=tau, alpha=alpha), (lambda y: y), a, b


def run_replication(config: SimulationConfig, model, rep: int) -> dict:
    seed = mix64(config.seed, rep)
    rng = make_rng(seed)
    row = {"rep": rep, "seed": seed, "theta_tilde": None, "theta_hat": None, "k_hat": None, "i_star_hat": None}
    if isinstance(model, DiscreteModel):
        x = _labels_of(model, model.sample(config.theta0, config.n, rng))
    else:
        x = model.sample(config.theta0, config.n, rng)

    if config.estimator == "two-step":
        res = two_step_estimate(x, model, TwoStepConfig(n=config.n, alpha=config.alpha, n1_exponent=config.n1_exponent), rng)
        row.update(theta_tilde=res.theta_tilde, theta_hat=res.theta_hat, k_hat=res.k_hat, i_star_hat=res.i_star_hat)
    elif config.estimator == "warner":
        q0 = randomized_response(2, config.alpha, model.labels)
        z = sample_many(q0, model.index_of(x), rng)
        row["theta_hat"] = warner_estimator(z, config.alpha)
    elif config.estimator == "private-mle":
        q0, coarse, to_cell = preliminary_channel(model, config.alpha)
        z = sample_many(q0, to_cell(x), rng)
        counts = np.bincount(z, minlength=q0.shape[0])
        row["theta_hat"] = mle_from_counts(counts, q0.matrix, coarse)
        row["k_hat"] = q0.shape[1]
    else:
        mech, f_inv, lo, hi = _mom_setup(model, config.alpha)
        z = laplace_sanitize(np.asarray(x, dtype=float), mech, rng)
        row["theta_hat"] = float(method_of_moments(z, f_inv, mech, lo if not math.isinf(lo) else None, hi if not math.isinf(hi) else None))
    return row


BOUND_CELLS = 14


def efficiency_bound(model, theta: float, alpha: float) -> float:
    """``sup_Q I_theta(QP)``.

    Continuous models are first cut into ``BOUND_CELLS`` equal cells between
    the ``5e-9`` and ``1 - 5e-9`` quantiles at ``theta`` (plus the tail cell),
    which gives a slight underestimate of the supremum.
    """
    if not isinstance(model, DiscreteModel):
        lo = model.quantile(theta, 5e-9)
        hi = model.quantile(theta, 1 - 5e-9)
        model, _ = discretize(model, theta, 1.0, tail_mass=1e-8, cell_width=(hi - lo) / BOUND_CELLS)
    return solve_optimal_mechanism(model, theta, alpha).i_star


def _manifest(subcommand: str, config: dict, seed) -> dict:
    return {
        "subcommand": subcommand,
        "config": config,
        "library_version": __version__,
        "seed": seed,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }


def _fmt(v):
    if v is None:
        return ""
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def write_csv(path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(row.get(h)) for h in header])
    Path(path).write_text(buf.getvalue())


def run_experiment(config: SimulationConfig, threads: int | None = None) -> SimulationSummary:
    """Run ``config.reps`` replications and summarize; writes CSV/JSON when paths are set.

    Any failing replication aborts the run with its seed in the message.
    """
    model = config.validate()
    threads = max(1, threads if threads is not None else config.threads)
    start = time.perf_counter()

    def one(rep):
        try:
            return run_replication(config, model, rep)
        except Exception as exc:
            raise RuntimeError(f"replication {rep} (seed {mix64(config.seed, rep)}) failed: {exc}") from exc

    if threads == 1:
        rows = [one(r) for r in range(config.reps)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, range(config.reps)))
    elapsed = time.perf_counter() - start

    est = np.array([r["theta_hat"] for r in rows], dtype=float)
    bound = 1.0 / efficiency_bound(model, config.theta0, config.alpha)
    if config.reps > 1:
        n_var = float(config.n * np.var(est, ddof=1))
        ratio = n_var / bound
        se = float(np.std(est, ddof=1) / math.sqrt(config.reps))
    else:
        n_var = ratio = se = None
    cfg = asdict(config)
    summary = SimulationSummary(
        config=cfg,
        estimates=est.tolist(),
        mean=float(est.mean()),
        bias=float(est.mean() - config.theta0),
        n_var=n_var,
        bound=bound,
        ratio=ratio,
        std_error=se,
        wall_clock=elapsed,
        manifest=_manifest("simulate", cfg, config.seed),
    )
    if config.out_csv:
        write_csv(config.out_csv, CSV_HEADER, rows)
        Path(str(config.out_csv) + ".manifest.json").write_text(json.dumps(summary.manifest, indent=2) + "\n")
    if config.out_json:
        Path(config.out_json).write_text(json.dumps(summary.to_dict(), indent=2) + "\n")
    return summary


def bound_table(model, theta_grid, alpha_grid) -> list[dict]:
    """Per ``(theta, alpha)``: optimal information, its inverse, raw information, randomized-response baseline."""
    if not isinstance(model, DiscreteModel):
        raise ValueError("bound_table needs a finite model; discretize continuous models first")
    rows = []
    for theta in theta_grid:
        raw = fisher_info_raw(model, theta)
        for alpha in alpha_grid:
            i_star = solve_optimal_mechanism(model, theta, alpha).i_star
            rr = fisher_info_private(randomized_response(model.k, alpha, model.labels), model, theta)
            rows.append(
                {
                    "theta": float(theta),
                    "alpha": float(alpha),
                    "i_star": i_star,
                    "inv_i_star": 1.0 / i_star if i_star > 0 else math.inf,
                    "i_raw": raw,
                    "rr_info": rr,
                }
            )
    return rows
