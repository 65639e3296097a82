"""alpha-private Markov kernels between finite spaces.

A :class:`Channel` is an ``l x k`` column-stochastic matrix whose entry
``(i, j)`` is the probability of releasing output ``i`` given input ``j``.
alpha-differential privacy means that within every row, entries differ by at
most a factor ``e^alpha``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "TOL",
    "Channel",
    "DPReport",
    "LaplaceMechanism",
    "validate_alpha_dp",
    "randomized_response",
    "compose_post",
    "compose_pre",
    "deterministic_kernel",
    "sample",
    "sample_many",
    "laplace_sanitize",
    "laplace_density",
    "make_rng",
]

TOL = 1e-12


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based Philox generator keyed by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF))


@dataclass(frozen=True)
class DPReport:
    ok: bool
    reason: str = ""
    row: int | None = None
    col: int | None = None
    other_col: int | None = None

    def __bool__(self):
        return self.ok


def validate_alpha_dp(matrix, alpha: float, tol: float = TOL) -> DPReport:
    """Check column-stochasticity and the ``e^alpha`` row-ratio bound.

    Never raises on a bad matrix; the report names the first offending entry.
    """
    q = np.asarray(matrix, dtype=float)
    if q.ndim != 2 or q.size == 0:
        return DPReport(False, f"expected a non-empty 2-d matrix, got shape {q.shape}")
    if not np.all(np.isfinite(q)):
        return DPReport(False, "matrix has non-finite entries")
    neg = np.argwhere(q < -tol)
    if len(neg):
        i, j = neg[0]
        return DPReport(False, f"negative entry {q[i, j]!r}", int(i), int(j))
    sums = q.sum(axis=0)
    bad = np.flatnonzero(np.abs(sums - 1.0) > tol)
    if len(bad):
        j = int(bad[0])
        return DPReport(False, f"column {j} sums to {sums[j]!r}", None, j)
    ea = math.exp(alpha)
    # per row, the worst pair is (argmax, argmin)
    hi = q.argmax(axis=1)
    lo = q.argmin(axis=1)
    rows = np.arange(q.shape[0])
    excess = q[rows, hi] - (ea * q[rows, lo] + tol)
    viol = np.flatnonzero(excess > 0)
    if len(viol):
        i = int(viol[0])
        return DPReport(
            False,
            f"row {i}: entry {q[i, hi[i]]!r} exceeds e^alpha * {q[i, lo[i]]!r}",
            i,
            int(hi[i]),
            int(lo[i]),
        )
    return DPReport(True)


@dataclass(frozen=True, eq=False)
class Channel:
    """An alpha-private channel from ``input_labels`` to ``output_labels``."""

    matrix: np.ndarray
    alpha: float
    input_labels: tuple = None
    output_labels: tuple = None

    def __post_init__(self):
        q = np.array(self.matrix, dtype=float)
        if q.ndim != 2:
            raise ValueError(f"channel matrix must be 2-d, got shape {q.shape}")
        q.setflags(write=False)
        object.__setattr__(self, "matrix", q)
        ins = tuple(range(q.shape[1])) if self.input_labels is None else tuple(self.input_labels)
        outs = tuple(range(q.shape[0])) if self.output_labels is None else tuple(self.output_labels)
        if len(ins) != q.shape[1] or len(outs) != q.shape[0]:
            raise ValueError(
                f"label counts ({len(outs)} outputs, {len(ins)} inputs) do not match matrix shape {q.shape}"
            )
        object.__setattr__(self, "input_labels", ins)
        object.__setattr__(self, "output_labels", outs)
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def validate(self, alpha: float | None = None) -> DPReport:
        return validate_alpha_dp(self.matrix, self.alpha if alpha is None else alpha)

    def nonzero_rows(self, tol: float = TOL) -> np.ndarray:
        return np.flatnonzero(self.matrix.max(axis=1) > tol)

    def strip_zero_rows(self, tol: float = TOL) -> "Channel":
        keep = self.nonzero_rows(tol)
        return Channel(self.matrix[keep], self.alpha, self.input_labels, tuple(self.output_labels[i] for i in keep))

    def __eq__(self, other):
        if not isinstance(other, Channel):
            return NotImplemented
        return (
            self.alpha == other.alpha
            and self.input_labels == other.input_labels
            and self.output_labels == other.output_labels
            and self.matrix.shape == other.matrix.shape
            and bool(np.all(self.matrix == other.matrix))
        )

    __hash__ = None

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "input_labels": list(self.input_labels),
            "output_labels": list(self.output_labels),
            "matrix": self.matrix.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Channel":
        try:
            return cls(
                np.array(d["matrix"], dtype=float),
                float(d["alpha"]),
                tuple(_hashable(x) for x in d["input_labels"]),
                tuple(_hashable(x) for x in d["output_labels"]),
            )
        except KeyError as exc:
            raise ValueError(f"channel JSON is missing field {exc.args[0]!r}") from None

    def to_json(self, **extra) -> str:
        # json emits floats via repr, the shortest string that round-trips exactly
        return json.dumps({**self.to_dict(), **extra}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "Channel":
        return cls.from_dict(json.loads(text))

    def save(self, path, **extra) -> None:
        Path(path).write_text(self.to_json(**extra) + "\n")

    @classmethod
    def load(cls, path) -> "Channel":
        return cls.from_json(Path(path).read_text())


def _hashable(x):
    return tuple(_hashable(y) for y in x) if isinstance(x, list) else x


def randomized_response(k: int, alpha: float, labels: Sequence | None = None) -> Channel:
    """k-ary randomized response: ``e^alpha`` on the diagonal, 1 elsewhere, over ``e^alpha + k - 1``."""
    if int(k) != k or k < 2:
        raise ValueError(f"randomized_response needs k >= 2, got {k!r}")
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha!r}")
    k = int(k)
    ea = math.exp(alpha)
    q = np.full((k, k), 1.0 / (ea + k - 1))
    np.fill_diagonal(q, ea / (ea + k - 1))
    return Channel(q, alpha, labels, labels)


def compose_post(post: Channel, channel: Channel) -> Channel:
    """Post-process ``channel`` by the stochastic kernel ``post`` (matrix product ``post @ channel``)."""
    if post.shape[1] != channel.shape[0]:
        raise ValueError(
            f"cannot compose: post-processing kernel has {post.shape[1]} inputs, channel has {channel.shape[0]} outputs"
        )
    return Channel(post.matrix @ channel.matrix, channel.alpha, channel.input_labels, post.output_labels)


def compose_pre(channel: Channel, mapping, input_labels: Sequence | None = None) -> Channel:
    """Pre-process with a deterministic map: column ``j`` of the result is ``channel``'s column ``mapping[j]``.

    ``mapping`` holds, for each new input, a label from ``channel.input_labels``
    (a dict ``new_label -> old_label`` is also accepted).
    """
    if isinstance(mapping, dict):
        input_labels = tuple(mapping) if input_labels is None else tuple(input_labels)
        targets = [mapping[lab] for lab in input_labels]
    else:
        targets = list(mapping)
        input_labels = tuple(range(len(targets))) if input_labels is None else tuple(input_labels)
    lookup = {lab: i for i, lab in enumerate(channel.input_labels)}
    try:
        cols = [lookup[t] for t in targets]
    except KeyError as exc:
        raise ValueError(f"pre-processing map sends an input to {exc.args[0]!r}, outside the channel's domain") from None
    return Channel(channel.matrix[:, cols], channel.alpha, input_labels, channel.output_labels)


def deterministic_kernel(assign: Sequence[int], n_out: int, alpha: float = math.inf) -> Channel:
    """0/1 stochastic matrix sending input ``j`` to output ``assign[j]``.

    Only meant as a post-processing step; it is not itself alpha-private.
    """
    q = np.zeros((n_out, len(assign)))
    q[np.asarray(assign), np.arange(len(assign))] = 1.0
    return Channel(q, alpha)


def _output_cdf(channel: Channel):
    keep = channel.nonzero_rows()
    cdf = np.cumsum(channel.matrix[keep], axis=0)
    cdf[-1] = 1.0
    return keep, cdf


def sample_many(channel: Channel, x_index, rng: np.random.Generator) -> np.ndarray:
    """Vectorized sampling; ``x_index`` are input positions, returns output row positions.

    All-zero rows are dropped before sampling and can never be drawn.
    """
    x_index = np.asarray(x_index, dtype=np.int64)
    if x_index.size and (x_index.min() < 0 or x_index.max() >= channel.shape[1]):
        raise ValueError("input index out of range for channel")
    keep, cdf = _output_cdf(channel)
    u = rng.random(x_index.shape)
    cols = cdf[:, x_index]
    pos = (u[None, ...] >= cols).sum(axis=0)
    pos = np.minimum(pos, len(keep) - 1)
    return keep[pos]


def sample(channel: Channel, x, rng: np.random.Generator):
    """Draw one output label for input label ``x``."""
    try:
        j = channel.input_labels.index(x)
    except ValueError:
        raise ValueError(f"unknown input label {x!r}") from None
    i = sample_many(channel, np.array([j]), rng)[0]
    return channel.output_labels[i]


# -- Laplace mechanism ------------------------------------------------------


@dataclass(frozen=True)
class LaplaceMechanism:
    """l1-truncation to radius ``tau`` followed by Laplace noise of scale ``2 tau / alpha``."""

    tau: float
    alpha: float
    dim: int = 1
    scale: float = field(init=False)

    def __post_init__(self):
        if not (self.tau > 0 and self.alpha > 0 and self.dim >= 1):
            raise ValueError(f"need tau > 0, alpha > 0, dim >= 1; got tau={self.tau!r}, alpha={self.alpha!r}, dim={self.dim!r}")
        object.__setattr__(self, "scale", 2.0 * self.tau / self.alpha)

    def truncate(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        norms = np.abs(y).sum(axis=-1, keepdims=True)
        return np.where(norms <= self.tau, y, 0.0)


def laplace_sanitize(g_value, mech: LaplaceMechanism, rng: np.random.Generator) -> np.ndarray:
    """Return ``trunc_tau(g_value) + (2 tau / alpha) W`` with iid standard Laplace ``W``.

    ``g_value`` may be a single vector of length ``mech.dim`` or a stack of them.
    """
    y = np.asarray(g_value, dtype=float)
    if mech.dim == 1 and (y.ndim == 0 or y.shape[-1] != 1):
        y = y[..., None]
    if y.shape[-1] != mech.dim:
        raise ValueError(f"expected vectors of dimension {mech.dim}, got shape {y.shape}")
    return mech.truncate(y) + rng.laplace(0.0, mech.scale, size=y.shape)


def laplace_density(z, y, mech: LaplaceMechanism) -> float:
    """Conditional density of the sanitized vector ``z`` given raw value ``y``."""
    z = np.asarray(z, dtype=float)
    center = mech.truncate(np.asarray(y, dtype=float))
    return float(np.prod(np.exp(-np.abs(z - center) / mech.scale) / (2.0 * mech.scale)))
