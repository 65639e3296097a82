"""One-parameter statistical models on finite (or discretizable) sample spaces.

A :class:`DiscreteModel` carries the pmf ``p_theta`` and its derivative
``pdot_theta = s_theta * p_theta``; everything downstream (Fisher information,
the staircase LP, the likelihoods) only needs these two vectors.

Continuous models are turned into discrete ones by :func:`discretize`, which
builds a histogram partition: one tail cell plus equal-width cells covering a
high-probability interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import special

from .errors import DomainError, NumericalError, ResourceLimitError

__all__ = [
    "DiscreteModel",
    "ContinuousModel",
    "DiscretizationMap",
    "fisher_info_raw",
    "bernoulli_model",
    "binomial_model",
    "gaussian_location_model",
    "tabulated_model",
    "discretize",
    "model_from_name",
]


@dataclass(frozen=True)
class DiscreteModel:
    """A one-parameter family of pmfs on ``len(labels)`` points.

    Attributes:
        labels: ordered sample-space points.
        theta_domain: open parameter interval ``(a, b)``.
        pmf: ``theta -> p_theta`` as a length-k array.
        pmf_dot: ``theta -> d p_theta / d theta`` as a length-k array.
        name: identifier used in CLI output and manifests.
    """

    labels: tuple
    theta_domain: tuple[float, float]
    pmf: Callable[[float], np.ndarray] = field(repr=False)
    pmf_dot: Callable[[float], np.ndarray] = field(repr=False)
    name: str = "custom"

    def __post_init__(self):
        a, b = self.theta_domain
        if not a < b:
            raise ValueError(f"theta_domain must satisfy a < b, got {self.theta_domain}")
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def k(self) -> int:
        return len(self.labels)

    def check_theta(self, theta: float) -> float:
        a, b = self.theta_domain
        theta = float(theta)
        if not a < theta < b:
            raise DomainError(f"theta={theta!r} outside parameter interval ({a}, {b})")
        return theta

    def score(self, theta: float) -> np.ndarray:
        """Score ``s_theta(x) = pdot/p`` where ``p > 0`` and 0 elsewhere."""
        p = self.pmf(theta)
        pdot = self.pmf_dot(theta)
        out = np.zeros_like(p)
        pos = p > 0
        out[pos] = pdot[pos] / p[pos]
        return out

    def index_of(self, values) -> np.ndarray:
        """Map an array of labels to their positions in ``labels``."""
        lookup = {lab: i for i, lab in enumerate(self.labels)}
        try:
            return np.fromiter((lookup[v] for v in np.asarray(values).tolist()), dtype=np.int64)
        except KeyError as exc:
            raise ValueError(f"unknown sample-space label {exc.args[0]!r}") from None

    def sample(self, theta: float, size: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``size`` label indices from ``p_theta``."""
        cdf = np.cumsum(self.pmf(self.check_theta(theta)))
        cdf[-1] = 1.0
        return np.searchsorted(cdf, rng.random(size), side="right")


@dataclass(frozen=True)
class ContinuousModel:
    """A one-parameter family of densities on the real line.

    Only used as input to :func:`discretize` and for drawing raw samples.
    """

    density: Callable[[float, float], float] = field(repr=False)
    density_dot: Callable[[float, float], float] = field(repr=False)
    quantile: Callable[[float, float], float] = field(repr=False)
    theta_domain: tuple[float, float] = (-math.inf, math.inf)
    name: str = "continuous"
    cdf: Callable[[float, np.ndarray], np.ndarray] | None = field(default=None, repr=False)

    def cdf_at(self, theta: float, x) -> np.ndarray:
        """cdf at points ``x``; inverts the quantile function by bisection if no cdf was given."""
        x = np.asarray(x, dtype=float)
        if self.cdf is not None:
            return np.asarray(self.cdf(theta, x), dtype=float)
        out = np.empty(x.shape)
        for i, xi in np.ndenumerate(x):
            if math.isinf(xi):
                out[i] = 0.0 if xi < 0 else 1.0
                continue
            lo, hi = 0.0, 1.0
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if self.quantile(theta, mid) <= xi:
                    lo = mid
                else:
                    hi = mid
            out[i] = 0.5 * (lo + hi)
        return out

    def check_theta(self, theta: float) -> float:
        a, b = self.theta_domain
        theta = float(theta)
        if not a < theta < b:
            raise DomainError(f"theta={theta!r} outside parameter interval ({a}, {b})")
        return theta

    def sample(self, theta: float, size: int, rng: np.random.Generator) -> np.ndarray:
        theta = self.check_theta(theta)
        u = rng.random(size)
        return np.array([self.quantile(theta, ui) for ui in u])


def fisher_info_raw(model: DiscreteModel, theta: float) -> float:
    """Fisher information ``sum_x pdot(x)^2 / p(x)`` over the support."""
    theta = model.check_theta(theta)
    p = model.pmf(theta)
    pdot = model.pmf_dot(theta)
    pos = p > 0
    return float(np.sum(pdot[pos] ** 2 / p[pos]))


def binomial_model(m: int) -> DiscreteModel:
    """Binomial(m, theta) on ``{0, ..., m}``; ``m = 1`` is the Bernoulli model."""
    if int(m) != m or m < 1:
        raise ValueError(f"binomial_model needs m >= 1, got {m!r}")
    m = int(m)
    x = np.arange(m + 1, dtype=float)
    coef = np.array([math.comb(m, int(i)) for i in x], dtype=float)

    def pmf(theta):
        return coef * theta**x * (1.0 - theta) ** (m - x)

    def pmf_dot(theta):
        # d/dtheta [theta^x (1-theta)^(m-x)], written without dividing by theta
        up = np.where(x > 0, x * theta ** np.maximum(x - 1, 0) * (1.0 - theta) ** (m - x), 0.0)
        down = np.where(
            x < m, (m - x) * theta**x * (1.0 - theta) ** np.maximum(m - x - 1, 0), 0.0
        )
        return coef * (up - down)

    name = "bernoulli" if m == 1 else f"binomial:{m}"
    return DiscreteModel(tuple(range(m + 1)), (0.0, 1.0), pmf, pmf_dot, name=name)


def bernoulli_model() -> DiscreteModel:
    return binomial_model(1)


def tabulated_model(labels: Sequence, p: Sequence[float], pdot: Sequence[float]) -> DiscreteModel:
    """A model frozen at a single parameter value, exposed on ``theta_domain=(-1, 1)``.

    Handy for optimizing over arbitrary ``(p, pdot)`` pairs; pmf and derivative
    ignore ``theta``.
    """
    p = np.asarray(p, dtype=float).copy()
    pdot = np.asarray(pdot, dtype=float).copy()
    if p.shape != pdot.shape or p.shape != (len(labels),):
        raise ValueError("labels, p and pdot must have the same length")
    return DiscreteModel(tuple(labels), (-1.0, 1.0), lambda t: p.copy(), lambda t: pdot.copy(), "tabulated")


def gaussian_location_model(sigma: float = 1.0, theta_domain=(-5.0, 5.0)) -> ContinuousModel:
    """N(theta, sigma^2) with ``theta`` restricted to a bounded interval."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma!r}")
    sigma = float(sigma)
    norm = 1.0 / (sigma * math.sqrt(2.0 * math.pi))

    def density(theta, x):
        z = (x - theta) / sigma
        return norm * np.exp(-0.5 * z * z)

    def density_dot(theta, x):
        z = (x - theta) / sigma
        return norm * np.exp(-0.5 * z * z) * z / sigma

    def quantile(theta, u):
        return theta + sigma * float(special.ndtri(u))

    def cdf(theta, x):
        return special.ndtr((np.asarray(x, dtype=float) - theta) / sigma)

    return ContinuousModel(
        density, density_dot, quantile, tuple(theta_domain), name=f"gaussian-location:{sigma:g}", cdf=cdf
    )


# -- discretization ---------------------------------------------------------


@dataclass(frozen=True)
class DiscretizationMap:
    """Sends a raw point to its histogram cell: 0 for the tail, 1..k inside ``[edges[0], edges[-1]]``."""

    edges: np.ndarray

    @property
    def k(self) -> int:
        """Number of interior cells (the tail cell is extra)."""
        return len(self.edges) - 1

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        lo, hi = self.edges[0], self.edges[-1]
        idx = np.searchsorted(self.edges, x, side="right")
        idx = np.clip(idx, 1, self.k)
        return np.where((x < lo) | (x > hi), 0, idx).astype(np.int64)

    def to_dict(self) -> dict:
        return {"edges": [float(e) for e in self.edges]}


def _adaptive_simpson(f, a, b, tol, max_depth=50):
    """Integrate ``f`` on ``[a, b]`` to absolute tolerance ``tol``."""

    def simpson(fa, fm, fb, a, b):
        return (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    stack = [(a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 0)]
    total = 0.0
    while stack:
        a, b, fa, fm, fb, whole, eps, depth = stack.pop()
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = simpson(fa, flm, fm, a, m)
        right = simpson(fm, frm, fb, m, b)
        delta = left + right - whole
        if abs(delta) <= 15.0 * eps:
            total += left + right + delta / 15.0
        elif depth >= max_depth:
            raise NumericalError(
                f"adaptive Simpson did not converge on [{a!r}, {b!r}] (error estimate {abs(delta):.3g}, tol {eps:.3g})"
            )
        else:
            stack.append((a, m, fa, flm, fm, left, eps / 2.0, depth + 1))
            stack.append((m, b, fm, frm, fb, right, eps / 2.0, depth + 1))
    return total


def _cell_model(model: ContinuousModel, edges: np.ndarray, quad_tol: float) -> DiscreteModel:
    k = len(edges) - 1
    cells = list(zip(edges[:-1], edges[1:]))

    def masses(f, theta):
        inner = np.array([_adaptive_simpson(lambda x: f(theta, x), a, b, quad_tol) for a, b in cells])
        return inner

    def pmf(theta):
        inner = np.clip(masses(model.density, theta), 0.0, None)
        tail = max(0.0, 1.0 - inner.sum())
        return np.concatenate([[tail], inner])

    def pmf_dot(theta):
        inner = masses(model.density_dot, theta)
        return np.concatenate([[-inner.sum()], inner])

    return DiscreteModel(tuple(range(k + 1)), model.theta_domain, pmf, pmf_dot, name=f"{model.name}/k={k}")


def default_tail_mass(eps: float, alpha: float) -> float:
    """Tail mass ``eps/3 * (5 e^{5 alpha})^{-2}`` used when none is given."""
    return eps / 3.0 * (5.0 * math.exp(5.0 * alpha)) ** -2


def discretize(
    model: ContinuousModel,
    theta: float,
    eps: float,
    tail_mass: float | None = None,
    cell_width: float | None = None,
    *,
    alpha: float = 1.0,
    max_cells: int = 19,
    quad_tol: float = 1e-10,
) -> tuple[DiscreteModel, DiscretizationMap]:
    """Histogram discretization of ``model`` built around ``theta``.

    The interval ``K`` runs between the ``tail_mass/2`` and ``1 - tail_mass/2``
    quantiles at ``theta`` and is split into ``ceil(|K| / cell_width)``
    equal cells. Without ``cell_width``, the width starts at ``|K|/2`` and is
    halved until the raw Fisher information of the discretized model moves by
    less than ``eps``; the coarser of the last two grids is returned.

    Returns the pushforward model on labels ``0..k`` (0 is the tail cell) and
    the map from raw points to cells.
    """
    theta = model.check_theta(theta)
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps!r}")
    if tail_mass is None:
        tail_mass = default_tail_mass(eps, alpha)
    if not 0 < tail_mass < 1:
        raise ValueError(f"tail_mass must lie in (0, 1), got {tail_mass!r}")
    lo = model.quantile(theta, tail_mass / 2.0)
    hi = model.quantile(theta, 1.0 - tail_mass / 2.0)
    width = hi - lo

    def build(n_cells):
        edges = np.linspace(lo, hi, n_cells + 1)
        return _cell_model(model, edges, quad_tol), DiscretizationMap(edges)

    if cell_width is not None:
        if not cell_width > 0:
            raise ValueError(f"cell_width must be positive, got {cell_width!r}")
        n_cells = max(1, math.ceil(width / cell_width - 1e-12))
        return build(n_cells)

    n_cells = 2
    current = build(n_cells)
    info = fisher_info_raw(current[0], theta)
    while True:
        if 2 * n_cells > max_cells:
            raise ResourceLimitError(
                f"discretization needs more than {max_cells} cells to reach eps={eps:g}; use a larger eps"
            )
        finer = build(2 * n_cells)
        finer_info = fisher_info_raw(finer[0], theta)
        if abs(finer_info - info) < eps:
            return current
        n_cells, current, info = 2 * n_cells, finer, finer_info


def model_from_name(spec: str):
    """Parse ``bernoulli``, ``binomial:m`` or ``gaussian-location:sigma``."""
    name, _, arg = spec.strip().partition(":")
    try:
        if name == "bernoulli" and not arg:
            return bernoulli_model()
        if name == "binomial":
            return binomial_model(int(arg))
        if name == "gaussian-location":
            return gaussian_location_model(float(arg) if arg else 1.0)
    except ValueError as exc:
        raise ValueError(f"bad model spec {spec!r}: {exc}") from None
    raise ValueError(f"unknown model {spec!r}; expected bernoulli, binomial:m or gaussian-location:sigma")
