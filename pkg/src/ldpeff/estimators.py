"""Private estimators: non-interactive MLE, Warner's linear estimator,
Laplace method of moments, and the two-step sequentially interactive MLE.

The two-step procedure:

1. the first ``n1`` individuals sanitize through a fixed preliminary channel
   ``Q0`` and a non-interactive private MLE ``theta_tilde`` is computed;
2. the model is discretized around ``theta_tilde`` (identity for finite models);
3. the Fisher-optimal channel ``Q_hat`` for the discretized model at
   ``theta_tilde`` is found by the staircase LP;
4. the remaining ``n2`` individuals discretize and sanitize through ``Q_hat``;
5. ``theta_hat`` maximizes the likelihood of the group-2 outputs.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, InvalidChannelError
from .fisher import fisher_info_private
from .kernels import Channel, LaplaceMechanism, compose_pre, make_rng, randomized_response, sample_many
from .models import ContinuousModel, DiscreteModel, DiscretizationMap, discretize
from .staircase import solve_optimal_mechanism

__all__ = [
    "private_mle",
    "mle_from_counts",
    "warner_estimator",
    "method_of_moments",
    "preliminary_channel",
    "TwoStepConfig",
    "TwoStepResult",
    "two_step_estimate",
]

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _search_interval(model, margin: float | None) -> tuple[float, float]:
    a, b = model.theta_domain
    m = 1e-3 * (b - a) if margin is None else margin
    if not 0 < m < (b - a) / 2:
        raise ValueError(f"clipping margin {m!r} must lie in (0, (b - a)/2)")
    return a + m, b - m


def _log_likelihood(matrix, model, counts, theta):
    q = matrix @ model.pmf(theta)
    obs = counts > 0
    qo = q[obs]
    if np.any(qo <= 0):
        return -math.inf
    return float(counts[obs] @ np.log(qo))


def mle_from_counts(
    counts,
    matrix: np.ndarray,
    model: DiscreteModel,
    interval: tuple[float, float] | None = None,
    grid_size: int = 200,
    xtol: float = 1e-8,
) -> float:
    """Maximize ``sum_z counts[z] log (matrix[z] . p_theta)`` over ``interval``.

    Coarse grid search, then golden-section refinement between the grid
    neighbours of the best point.
    """
    counts = np.asarray(counts, dtype=float)
    matrix = np.asarray(matrix, dtype=float)
    observed_dead = (counts > 0) & (matrix.max(axis=1) <= 0)
    if np.any(observed_dead):
        raise InvalidChannelError(
            f"outputs {np.flatnonzero(observed_dead).tolist()} were observed but have zero probability for every input"
        )
    lo, hi = _search_interval(model, None) if interval is None else interval
    grid = np.linspace(lo, hi, grid_size)
    ll = np.array([_log_likelihood(matrix, model, counts, t) for t in grid])
    if not np.any(np.isfinite(ll)):
        raise InvalidChannelError("log-likelihood is -inf on the whole search grid")
    i = int(np.argmax(ll))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, grid_size - 1)]

    def f(t):
        return _log_likelihood(matrix, model, counts, t)

    c, d = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > xtol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def private_mle(
    z_samples,
    channel: Channel,
    model: DiscreteModel,
    *,
    margin: float | None = None,
    grid_size: int = 200,
    xtol: float = 1e-8,
) -> float:
    """Non-interactive private MLE from released labels ``z_samples``."""
    if channel.input_labels != model.labels:
        raise ValueError("channel inputs do not match model labels")
    lookup = {lab: i for i, lab in enumerate(channel.output_labels)}
    try:
        idx = np.fromiter((lookup[z] for z in np.asarray(z_samples).tolist()), dtype=np.int64)
    except KeyError as exc:
        raise ValueError(f"sample {exc.args[0]!r} is not an output of the channel") from None
    counts = np.bincount(idx, minlength=channel.shape[0])
    return mle_from_counts(counts, channel.matrix, model, _search_interval(model, margin), grid_size, xtol)


def warner_estimator(z_samples, alpha: float) -> float:
    """Unbiased linear estimator ``(e^a + 1)/(e^a - 1) * (mean(z) - 1/(e^a + 1))``; not clipped."""
    z = np.asarray(z_samples, dtype=float)
    if z.size == 0:
        raise ValueError("warner_estimator needs at least one sample")
    ea = math.exp(alpha)
    return (ea + 1.0) / (ea - 1.0) * (float(z.mean()) - 1.0 / (ea + 1.0))


def method_of_moments(
    z_vectors,
    f_inverse: Callable,
    mech: LaplaceMechanism,
    lower=None,
    upper=None,
):
    """Average Laplace-sanitized moment vectors, project onto the box ``[lower, upper]``, invert.

    The box stands in for the closure of the moment range ``G``; omitted bounds
    mean that side is unconstrained.
    """
    z = np.asarray(z_vectors, dtype=float)
    if z.size == 0:
        raise ValueError("method_of_moments needs at least one sample")
    if z.ndim == 1:
        z = z[:, None] if mech.dim == 1 else z[None, :]
    if z.shape[-1] != mech.dim:
        raise ValueError(f"expected vectors of dimension {mech.dim}, got shape {z.shape}")
    avg = z.mean(axis=0)
    if lower is not None or upper is not None:
        avg = np.clip(avg, lower, upper)
    return f_inverse(avg[0] if mech.dim == 1 else avg)


# -- two-step procedure -------------------------------------------------------


@dataclass
class TwoStepConfig:
    """Settings for :func:`two_step_estimate`.

    ``n1`` defaults to ``ceil(n ** n1_exponent)``, ``eps`` to
    ``1 / log(n1 + e)`` and the clipping margin to ``1e-3 * (b - a)``.
    ``local_radius`` confines the final MLE to ``theta_tilde`` plus or minus
    that many preliminary standard errors; ``None`` searches the whole interval.
    """

    n: int
    alpha: float
    n1_exponent: float = 0.7
    n1: int | None = None
    eps: float | None = None
    q0_cells: int = 8
    theta_clip: float | None = None
    grid_size: int = 200
    xtol: float = 1e-8
    min_n: int = 1000
    local_radius: float | None = 8.0
    seed: int | None = None

    def resolved_n1(self) -> int:
        n1 = self.n1 if self.n1 is not None else math.ceil(self.n**self.n1_exponent)
        if not 0 < n1 < self.n:
            raise ValueError(f"need 0 < n1 < n, got n1={n1}, n={self.n}")
        return int(n1)

    def resolved_eps(self, n1: int) -> float:
        eps = self.eps if self.eps is not None else 1.0 / math.log(n1 + math.e)
        if not eps > 0:
            raise ValueError(f"eps must be positive, got {eps!r}")
        return float(eps)

    def validate(self) -> None:
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha!r}")
        if self.n < self.min_n:
            raise ValueError(f"two-step estimation needs n >= {self.min_n}, got {self.n}")
        self.resolved_eps(self.resolved_n1())
        if self.local_radius is not None and not self.local_radius > 0:
            raise ValueError("local_radius must be positive")
        if self.theta_clip is not None and not self.theta_clip > 0:
            raise ValueError("theta_clip must be positive")


@dataclass
class TwoStepResult:
    theta_tilde: float
    k_hat: int
    channel_hat: Channel
    i_star_hat: float
    i_star_tilde: float
    theta_hat: float
    n1: int
    n2: int
    discretization: DiscretizationMap | None = None
    log: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "theta_tilde": self.theta_tilde,
            "k_hat": self.k_hat,
            "channel_hat": self.channel_hat.to_dict(),
            "i_star_hat": self.i_star_hat,
            "i_star_tilde": self.i_star_tilde,
            "theta_hat": self.theta_hat,
            "n1": self.n1,
            "n2": self.n2,
            "discretization": None if self.discretization is None else self.discretization.to_dict(),
            "log": self.log,
        }


def _coarse_cell_model(model: ContinuousModel, edges: np.ndarray, h: float = 1e-6) -> DiscreteModel:
    """Cell masses for cells with possibly infinite end points, via the cdf."""

    def pmf(theta):
        return np.clip(np.diff(model.cdf_at(theta, edges)), 0.0, None)

    def pmf_dot(theta):
        return (pmf(theta + h) - pmf(theta - h)) / (2 * h)

    return DiscreteModel(tuple(range(len(edges) - 1)), model.theta_domain, pmf, pmf_dot, name=f"{model.name}/coarse")


def _equal_mass_groups(p: np.ndarray, n_groups: int) -> np.ndarray:
    """Contiguous grouping of labels into ``n_groups`` blocks of roughly equal mass under ``p``."""
    k = len(p)
    if n_groups >= k:
        return np.arange(k)
    cum = np.cumsum(p)
    # block i starts at label cuts[i - 1]; nudge cuts so every block is nonempty
    cuts = np.searchsorted(cum, np.arange(1, n_groups) / n_groups * cum[-1], side="right")
    for i in range(n_groups - 1):
        lo = cuts[i - 1] + 1 if i > 0 else 1
        cuts[i] = max(cuts[i], lo)
    for i in reversed(range(n_groups - 1)):
        cuts[i] = min(cuts[i], k - (n_groups - 1 - i))
    groups = np.zeros(k, dtype=np.int64)
    for c in cuts:
        groups[c:] += 1
    return groups


def preliminary_channel(model, alpha: float, n_cells: int = 8):
    """Default group-1 mechanism: randomized response on a coarse equal-mass partition.

    Returns ``(channel, coarse_model, to_cell)`` where ``channel`` acts on
    ``coarse_model``'s labels and ``to_cell`` maps raw samples to those labels.
    The partition is built at the midpoint of the parameter interval.
    """
    a, b = model.theta_domain
    mid = 0.5 * (a + b)
    if isinstance(model, DiscreteModel):
        groups = _equal_mass_groups(model.pmf(mid), min(model.k, n_cells))
        k0 = int(groups.max()) + 1
        if k0 == model.k:
            coarse = model
            to_cell = model.index_of
        else:
            onehot = np.zeros((k0, model.k))
            onehot[groups, np.arange(model.k)] = 1.0
            coarse = DiscreteModel(
                tuple(range(k0)),
                model.theta_domain,
                lambda t: onehot @ model.pmf(t),
                lambda t: onehot @ model.pmf_dot(t),
                name=f"{model.name}/coarse",
            )
            to_cell = lambda x: groups[model.index_of(x)]  # noqa: E731
    else:
        inner = np.array([model.quantile(mid, i / n_cells) for i in range(1, n_cells)])
        edges = np.concatenate([[-np.inf], inner, [np.inf]])
        coarse = _coarse_cell_model(model, edges)
        k0 = n_cells
        to_cell = lambda x: np.clip(np.searchsorted(inner, np.asarray(x, float), side="right"), 0, k0 - 1)  # noqa: E731
    return randomized_response(k0, alpha, coarse.labels), coarse, to_cell


def check_identifiable(channel: Channel, model: DiscreteModel, interval, n_grid: int = 101, tol: float = 1e-9) -> None:
    """Raise if two grid parameters give output pmfs within ``tol`` in l1."""
    grid = np.linspace(*interval, n_grid)
    q = np.array([channel.matrix @ model.pmf(t) for t in grid])
    dist = np.abs(q[:, None, :] - q[None, :, :]).sum(axis=-1)
    np.fill_diagonal(dist, np.inf)
    if dist.min() <= tol:
        i, j = np.unravel_index(np.argmin(dist), dist.shape)
        raise ValueError(
            f"preliminary channel is not identifiable: theta={grid[i]:.6g} and {grid[j]:.6g} give the same output law"
        )


def two_step_estimate(x_samples, model, config: TwoStepConfig, rng: np.random.Generator | None = None) -> TwoStepResult:
    """Run the two-step private MLE on raw data ``x_samples``.

    For a :class:`DiscreteModel`, ``x_samples`` are sample-space labels; for a
    :class:`ContinuousModel`, real numbers. Only the sanitized outputs of group
    1 influence the mechanism used by group 2.
    """
    config.validate()
    if rng is None:
        if config.seed is None:
            raise ValueError("two_step_estimate needs an rng or config.seed")
        rng = make_rng(config.seed)
    x = np.asarray(x_samples)
    n = len(x)
    if n != config.n:
        raise ValueError(f"config.n={config.n} but {n} samples were given")
    n1 = config.resolved_n1()
    n2 = n - n1
    alpha = config.alpha
    interval = _search_interval(model, config.theta_clip)
    log = []

    # step 1: preliminary estimate from group 1
    q0, coarse, to_cell = preliminary_channel(model, alpha, config.q0_cells)
    check_identifiable(q0, coarse, interval)
    z1 = sample_many(q0, to_cell(x[:n1]), rng)
    counts1 = np.bincount(z1, minlength=q0.shape[0])
    theta_tilde = mle_from_counts(counts1, q0.matrix, coarse, interval, config.grid_size, config.xtol)
    theta_tilde = float(np.clip(theta_tilde, *interval))
    if not interval[0] <= theta_tilde <= interval[1]:
        raise DomainError(f"preliminary estimate {theta_tilde!r} escaped the clipped interval")
    log.append(
        {
            "stage": "preliminary",
            "n1": n1,
            "q0": q0.to_dict(),
            "q0_counts": counts1.tolist(),
            "theta_tilde": theta_tilde,
        }
    )

    # step 2: discretize around theta_tilde
    eps = config.resolved_eps(n1)
    if isinstance(model, DiscreteModel):
        work_model, tmap = model, None
        y2 = model.index_of(x[n1:])
    else:
        work_model, tmap = discretize(model, theta_tilde, eps, alpha=alpha)
        y2 = tmap(x[n1:].astype(float))
    k_hat = work_model.k
    log.append(
        {"stage": "discretize", "eps": eps, "k_hat": k_hat, "edges": None if tmap is None else tmap.to_dict()["edges"]}
    )

    # step 3: optimal channel for the discretized model at theta_tilde
    opt = solve_optimal_mechanism(work_model, theta_tilde, alpha)
    q_hat = opt.channel.strip_zero_rows()
    log.append(
        {
            "stage": "optimize",
            "theta": theta_tilde,
            "active_patterns": list(opt.active_patterns),
            "i_star_tilde": opt.i_star,
            "iterations": opt.iterations,
            "q_hat": q_hat.to_dict(),
            "depends_on": "group-1 outputs only",
        }
    )

    # step 4: group 2 sanitizes through Q_hat composed with the discretization
    z2 = sample_many(q_hat, y2, rng)
    counts2 = np.bincount(z2, minlength=q_hat.shape[0])
    log.append({"stage": "sanitize", "n2": n2, "counts": counts2.tolist()})

    # step 5: MLE from group-2 outputs. A coarse discretization can make distant
    # parameters indistinguishable (e.g. a far tail pooled with the opposite
    # half-line), so by default the search stays near the consistent theta_tilde.
    search = interval
    if config.local_radius is not None:
        i0 = fisher_info_private(q0, coarse, theta_tilde)
        half = config.local_radius / math.sqrt(n1 * i0) if i0 > 0 else math.inf
        search = (max(interval[0], theta_tilde - half), min(interval[1], theta_tilde + half))
    theta_hat = mle_from_counts(counts2, q_hat.matrix, work_model, search, config.grid_size, config.xtol)
    i_star_hat = fisher_info_private(q_hat, work_model, theta_hat)
    log.append({"stage": "final", "search_interval": list(search), "theta_hat": theta_hat, "i_star_hat": i_star_hat})

    if isinstance(model, DiscreteModel):
        channel_hat = compose_pre(q_hat, {lab: lab for lab in model.labels})
    else:
        channel_hat = q_hat
    return TwoStepResult(
        theta_tilde=theta_tilde,
        k_hat=k_hat,
        channel_hat=channel_hat,
        i_star_hat=i_star_hat,
        i_star_tilde=opt.i_star,
        theta_hat=theta_hat,
        n1=n1,
        n2=n2,
        discretization=tmap,
        log=log,
    )


def config_dict(config: TwoStepConfig) -> dict:
    return asdict(config)
