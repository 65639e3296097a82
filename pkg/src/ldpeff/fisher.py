"""Fisher information of privatized models.

For a finite model with pmf ``p`` and derivative ``pdot`` and a channel ``Q``,
the released ``Z`` has pmf ``q(z) = Q[z] . p`` and score
``t(z) = (Q[z] . pdot) / q(z)``, so the information is
``sum_z (Q[z] . pdot)^2 / (Q[z] . p)``, one term per channel row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernels import Channel
from .models import DiscreteModel, fisher_info_raw

__all__ = [
    "g_theta",
    "row_information",
    "fisher_info_private",
    "PrivateScoreTable",
    "private_score",
    "continuity_bound",
]


def g_theta(v, p, pdot) -> float:
    """Information carried by one unnormalized channel row: ``(v.pdot)^2 / (v.p)``, 0 if ``v.p == 0``."""
    v = np.asarray(v, dtype=float)
    if np.any(v < 0):
        raise ValueError("g_theta is defined on nonnegative rows only")
    mass = float(v @ np.asarray(p, dtype=float))
    if mass <= 0.0:
        return 0.0
    return float(v @ np.asarray(pdot, dtype=float)) ** 2 / mass


def row_information(matrix: np.ndarray, p: np.ndarray, pdot: np.ndarray) -> np.ndarray:
    """Vector of per-row contributions ``g_theta(row_i)``."""
    mass = matrix @ p
    slope = matrix @ pdot
    out = np.zeros(matrix.shape[0])
    pos = mass > 0
    out[pos] = slope[pos] ** 2 / mass[pos]
    return out


def _check_labels(channel: Channel, model: DiscreteModel):
    if channel.input_labels != model.labels:
        raise ValueError(
            f"channel inputs {channel.input_labels!r} do not match model labels {model.labels!r}"
        )


def fisher_info_private(channel: Channel, model: DiscreteModel, theta: float) -> float:
    """Fisher information ``I_theta(QP)`` of the sanitized model."""
    _check_labels(channel, model)
    theta = model.check_theta(theta)
    return float(np.sum(row_information(channel.matrix, model.pmf(theta), model.pmf_dot(theta))))


@dataclass(frozen=True)
class PrivateScoreTable:
    """Per-output private score ``t`` and output pmf ``q``; rows with ``q = 0`` get ``t = 0``."""

    output_labels: tuple
    t: np.ndarray
    q: np.ndarray

    @property
    def mean(self) -> float:
        return float(self.t @ self.q)

    @property
    def variance(self) -> float:
        return float((self.t - self.mean) ** 2 @ self.q)


def private_score(channel: Channel, model: DiscreteModel, theta: float) -> PrivateScoreTable:
    """Conditional expectation of the raw score given each output."""
    _check_labels(channel, model)
    theta = model.check_theta(theta)
    q = channel.matrix @ model.pmf(theta)
    slope = channel.matrix @ model.pmf_dot(theta)
    t = np.zeros_like(q)
    pos = q > 0
    t[pos] = slope[pos] / q[pos]
    return PrivateScoreTable(channel.output_labels, t, q)


def continuity_bound(model: DiscreteModel, theta: float, theta2: float, alpha: float) -> float:
    """Uniform bound on ``|I_theta(QP) - I_theta2(QP)|`` over all alpha-private ``Q``.

    ``e^{2 alpha} max(I_theta, I_theta2, 1) (2 |pdot - pdot'|_1 + 3 |p - p'|_1)``.
    """
    theta = model.check_theta(theta)
    theta2 = model.check_theta(theta2)
    scale = max(fisher_info_raw(model, theta), fisher_info_raw(model, theta2), 1.0)
    dp = np.abs(model.pmf(theta) - model.pmf(theta2)).sum()
    ddot = np.abs(model.pmf_dot(theta) - model.pmf_dot(theta2)).sum()
    return float(math.exp(2.0 * alpha) * scale * (2.0 * ddot + 3.0 * dp))
