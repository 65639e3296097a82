"""Fisher-information-optimal alpha-private channels via staircase patterns.

Every row of an alpha-private ``l x k`` channel lies in the cone of nonnegative
vectors whose entries differ by at most a factor ``e^alpha``. The extreme rays
of that cone are the staircase patterns ``v_S`` (``e^alpha`` on a subset ``S``,
1 elsewhere), and the per-row information ``g(v) = (v.pdot)^2 / (v.p)`` is
convex and positively homogeneous. Splitting any row into pattern rows can
therefore only increase the total information, so the optimum solves the LP

    maximize   sum_S t_S g(v_S)
    subject to sum_S t_S v_S = 1,  t >= 0,

whose basic solutions use at most ``k`` patterns. The rows of the optimal
channel are ``t_S v_S``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, ResourceLimitError
from .fisher import fisher_info_private
from .kernels import Channel, randomized_response
from .models import DiscreteModel, binomial_model

__all__ = [
    "MAX_K",
    "StaircasePattern",
    "OptimalMechanismResult",
    "enumerate_patterns",
    "pattern_objective",
    "solve_optimal_mechanism",
    "binomial2_candidates",
    "binomial2_threshold",
    "binomial2_reference",
    "regime_map",
]

MAX_K = 20
REDUCED_COST_RTOL = 1e-11
DROP_WEIGHT = 1e-14


@dataclass(frozen=True)
class StaircasePattern:
    """Row direction with ``e^alpha`` on the inputs in ``mask`` and 1 elsewhere."""

    mask: int
    k: int
    alpha: float

    @property
    def members(self) -> tuple[int, ...]:
        return tuple(j for j in range(self.k) if self.mask >> j & 1)

    @property
    def vector(self) -> np.ndarray:
        return _pattern_column(self.mask, self.k, math.exp(self.alpha))


def _check_k(k: int) -> None:
    if k < 2:
        raise ValueError(f"need at least 2 sample-space points, got {k}")
    if k > MAX_K:
        raise ResourceLimitError(
            f"k={k} exceeds the pattern-enumeration cap {MAX_K} (2^k patterns); use a coarser discretization"
        )


def enumerate_patterns(k: int, alpha: float) -> list[StaircasePattern]:
    """All ``2^k`` staircase patterns, ordered by bitmask (bit ``j`` is input ``j``)."""
    _check_k(k)
    return [StaircasePattern(mask, k, float(alpha)) for mask in range(1 << k)]


def _pattern_column(mask: int, k: int, ea: float) -> np.ndarray:
    bits = (mask >> np.arange(k)) & 1
    return np.where(bits == 1, ea, 1.0)


def _subset_sums(w: np.ndarray) -> np.ndarray:
    """``out[mask] = sum of w[j] over the bits j set in mask``."""
    out = np.zeros(1)
    for wj in w:
        out = np.concatenate([out, out + wj])
    return out


def pattern_objective(p: np.ndarray, pdot: np.ndarray, alpha: float) -> np.ndarray:
    """``g(v_S)`` for every bitmask ``S``, vectorized."""
    ea = math.exp(alpha)
    mass = p.sum() + (ea - 1.0) * _subset_sums(p)
    slope = pdot.sum() + (ea - 1.0) * _subset_sums(pdot)
    out = np.zeros_like(mass)
    pos = mass > 0
    out[pos] = slope[pos] ** 2 / mass[pos]
    return out


@dataclass(frozen=True)
class OptimalMechanismResult:
    """Optimal channel, its information, the patterns it uses and the simplex iteration count."""

    channel: Channel
    i_star: float
    active_patterns: tuple[int, ...]
    weights: np.ndarray = field(repr=False)
    iterations: int
    lp_objective: float

    def to_dict(self) -> dict:
        return {
            "i_star": self.i_star,
            "lp_objective": self.lp_objective,
            "active_patterns": list(self.active_patterns),
            "weights": self.weights.tolist(),
            "iterations": self.iterations,
            "channel": self.channel.to_dict(),
        }


def _basis_matrix(basis, k, ea):
    return np.column_stack([_pattern_column(m, k, ea) for m in basis])


def _simplex(c: np.ndarray, k: int, ea: float, max_iter: int, pricing: str = "dantzig"):
    """Revised simplex on ``max c.t, A t = 1, t >= 0``.

    The columns of ``A`` are the staircase patterns, indexed by bitmask.
    Starts from the randomized-response basis (all singletons).

    ``pricing="bland"`` uses Bland's rule for every pivot. ``"dantzig"`` enters
    the column with the largest reduced cost, but falls back to Bland's rule
    after any degenerate (zero-step) pivot until the objective moves again.
    A cycle consists only of degenerate pivots, so it would be run entirely
    under Bland's rule, which cannot cycle.
    """
    if pricing not in ("bland", "dantzig"):
        raise ValueError(f"unknown pricing rule {pricing!r}")
    use_bland = pricing == "bland"
    ones = np.ones(k)
    basis = [1 << j for j in range(k)]
    start = _basis_matrix(basis, k, ea) @ np.full(k, 1.0 / (ea + k - 1))
    if np.max(np.abs(start - 1.0)) > 1e-12:
        raise NumericalError("randomized-response starting basis is infeasible")
    tol = REDUCED_COST_RTOL * max(float(np.max(np.abs(c))), np.finfo(float).tiny)
    for it in range(max_iter):
        B = _basis_matrix(basis, k, ea)
        xB = np.linalg.solve(B, ones)
        y = np.linalg.solve(B.T, c[basis])
        reduced = c - (y.sum() + (ea - 1.0) * _subset_sums(y))
        entering = np.flatnonzero(reduced > tol)
        if entering.size == 0:
            return basis, it
        if use_bland:
            e = int(entering[0])  # lowest-index improving column
        else:
            e = int(entering[np.argmax(reduced[entering])])
        d = np.linalg.solve(B, _pattern_column(e, k, ea))
        pivots = np.flatnonzero(d > 1e-12)
        if pivots.size == 0:
            raise NumericalError("LP reported unbounded on a bounded polytope")
        ratios = np.maximum(xB[pivots], 0.0) / d[pivots]
        best = ratios.min()
        tied = pivots[ratios <= best + 1e-13 * max(1.0, best)]
        leave = min(tied, key=lambda i: basis[i])  # lowest-index leaving variable
        basis[leave] = e
        if pricing == "dantzig":
            use_bland = best <= 1e-13
    raise NumericalError(f"simplex exceeded {max_iter} iterations (k={k}, e^alpha={ea!r})")


def solve_optimal_mechanism(
    model: DiscreteModel, theta: float, alpha: float, *, pricing: str = "dantzig"
) -> OptimalMechanismResult:
    """Maximize ``I_theta(QP)`` over alpha-private channels on ``model``'s sample space.

    Returns a channel with at most ``k`` nonzero rows, sorted by pattern bitmask;
    degenerate basic patterns with weight below ``1e-14`` are dropped.
    ``pricing`` selects the simplex entering rule (see :func:`_simplex`).
    """
    theta = model.check_theta(theta)
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha!r}")
    k = model.k
    _check_k(k)
    ea = math.exp(alpha)
    p = model.pmf(theta)
    pdot = model.pmf_dot(theta)
    c = pattern_objective(p, pdot, alpha)
    basis, iterations = _simplex(c, k, ea, max_iter=10 * (1 << k), pricing=pricing)

    # recompute the weights from the sorted final basis so identical bases give identical bits
    basis = sorted(basis)
    weights = np.linalg.solve(_basis_matrix(basis, k, ea), np.ones(k))
    keep = weights > DROP_WEIGHT
    active = tuple(m for m, kp in zip(basis, keep) if kp)
    weights = weights[keep]
    rows = np.array([w * _pattern_column(m, k, ea) for m, w in zip(active, weights)])
    residual = 1.0 - rows.sum(axis=0)
    top = rows.argmax(axis=0)
    rows[top, np.arange(k)] += residual

    channel = Channel(rows, alpha, model.labels, tuple(range(len(active))))
    return OptimalMechanismResult(
        channel=channel,
        i_star=fisher_info_private(channel, model, theta),
        active_patterns=active,
        weights=weights,
        iterations=iterations,
        lp_objective=float(weights @ c[list(active)]),
    )


# -- Binomial(2, theta) closed-form mechanisms -------------------------------


def binomial2_candidates(alpha: float) -> dict[str, Channel]:
    """The three candidate channels for Binomial(2, theta): ``low``, ``middle`` and ``high``."""
    ea = math.exp(alpha)
    low = np.array([[ea, 1, 1], [1, ea, ea], [0, 0, 0]], dtype=float) / (ea + 1)
    high = np.array([[ea, ea, 1], [1, 1, ea], [0, 0, 0]], dtype=float) / (ea + 1)
    middle = randomized_response(3, alpha).matrix
    labels = (0, 1, 2)
    return {name: Channel(q, alpha, labels, labels) for name, q in (("low", low), ("middle", middle), ("high", high))}


def binomial2_threshold(alpha: float, tol: float = 1e-13) -> float:
    """Half-width ``c_alpha`` of the parameter region where 3-ary randomized response is optimal.

    Bisection on ``(0, 1/2)`` for the point where the low and middle
    candidates carry equal information; 0 when the low candidate wins all the
    way up to ``theta = 1/2``.
    """
    model = binomial_model(2)
    cand = binomial2_candidates(alpha)

    def gap(theta):
        return fisher_info_private(cand["low"], model, theta) - fisher_info_private(cand["middle"], model, theta)

    if gap(0.5) >= -1e-14:
        return 0.0
    lo, hi = 1e-9, 0.5
    if gap(lo) <= 0:
        return 0.5 - lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if gap(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 - 0.5 * (lo + hi)


def binomial2_reference(theta: float, alpha: float, c_alpha: float | None = None) -> Channel:
    """Regime-appropriate optimal channel for Binomial(2, theta)."""
    if not 0 < theta < 1:
        raise ValueError(f"theta must lie in (0, 1), got {theta!r}")
    c = binomial2_threshold(alpha) if c_alpha is None else c_alpha
    cand = binomial2_candidates(alpha)
    if theta <= 0.5 - c:
        return cand["low"]
    if theta < 0.5 + c:
        return cand["middle"]
    return cand["high"]


def regime_map(model: DiscreteModel, theta_grid, alpha: float) -> list[dict]:
    """Optimal information vs the k-ary randomized-response baseline along a parameter grid."""
    baseline = randomized_response(model.k, alpha, model.labels)
    rows = []
    for theta in theta_grid:
        res = solve_optimal_mechanism(model, theta, alpha)
        rr = fisher_info_private(baseline, model, theta)
        rows.append(
            {
                "theta": float(theta),
                "i_star": res.i_star,
                "active_patterns": list(res.active_patterns),
                "n_active": len(res.active_patterns),
                "rr_info": rr,
                "ratio": rr / res.i_star if res.i_star > 0 else math.nan,
            }
        )
    return rows
