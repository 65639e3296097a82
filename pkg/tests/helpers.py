"""Shared generators and independent oracles for the test suite."""

from __future__ import annotations

import itertools
import math

import numpy as np

from ldpeff.kernels import Channel, randomized_response
from ldpeff.models import tabulated_model
from ldpeff.staircase import solve_optimal_mechanism


def random_stochastic(rows: int, cols: int, rng) -> np.ndarray:
    """Column-stochastic matrix with Dirichlet(1) columns, a few entries zeroed."""
    m = rng.dirichlet(np.ones(rows), size=cols).T
    if rows > 1 and rng.random() < 0.3:
        # sparsify one column to exercise zero entries in post-processing kernels
        j = rng.integers(cols)
        i = rng.integers(rows)
        m[:, j] = 0.0
        m[i, j] = 1.0
    return m


def random_model(k: int, rng):
    """Tabulated model with strictly positive pmf and a zero-sum derivative."""
    p = rng.dirichlet(np.ones(k)) * 0.9 + 0.1 / k
    pdot = rng.normal(size=k)
    pdot -= pdot.mean()
    return tabulated_model(tuple(range(k)), p, pdot)


def random_channel(k: int, alpha: float, rng, labels=None) -> Channel:
    """A random alpha-private channel on ``k`` inputs.

    Mixes a post-processed randomized response at a random budget ``<= alpha``
    with the LP-optimal channel for a random model, padding both to a common
    number of outputs. Convex mixtures of alpha-private channels with the same
    output set stay alpha-private.
    """
    a1 = alpha * rng.uniform(0.05, 1.0)
    ell = int(rng.integers(1, 2 * k + 1))
    post = random_stochastic(ell, k, rng) @ randomized_response(k, a1).matrix
    vertex = solve_optimal_mechanism(random_model(k, rng), 0.0, alpha).channel.matrix
    rows = max(post.shape[0], vertex.shape[0])
    pad = lambda m: np.vstack([m, np.zeros((rows - m.shape[0], k))])
    lam = rng.random()
    q = lam * pad(post) + (1 - lam) * pad(vertex)
    return Channel(q, alpha, labels)


def fisher_reference(q: np.ndarray, p: np.ndarray, pdot: np.ndarray) -> float:
    """Plain-loop private Fisher information: sum over outputs of (Q_i.pdot)^2 / (Q_i.p)."""
    total = 0.0
    for i in range(q.shape[0]):
        mass = sum(q[i, j] * p[j] for j in range(q.shape[1]))
        slope = sum(q[i, j] * pdot[j] for j in range(q.shape[1]))
        if mass > 0:
            total += slope * slope / mass
    return total


def channel_polytope_vertices(k: int, alpha: float, chunk: int = 40000) -> np.ndarray:
    """All vertices of the set of alpha-private ``k x k`` channels, by brute force.

    Variables are the ``k^2`` entries (row-major). Equalities: column sums are 1.
    Inequalities: ``-q_ij <= 0`` and ``q_ij - e^alpha q_ij' <= 0``. A vertex makes
    ``k^2 - k`` independent inequalities tight; every such subset is solved.
    """
    ea = math.exp(alpha)
    nv = k * k
    eq = np.zeros((k, nv))
    for j in range(k):
        eq[j, j::k] = 1.0
    ineq = []
    for i in range(k):
        for j in range(k):
            row = np.zeros(nv)
            row[i * k + j] = -1.0
            ineq.append(row)
    for i in range(k):
        for j, jj in itertools.permutations(range(k), 2):
            row = np.zeros(nv)
            row[i * k + j] = 1.0
            row[i * k + jj] = -ea
            ineq.append(row)
    ineq = np.array(ineq)
    rhs = np.concatenate([np.ones(k), np.zeros(nv - k)])
    found = []
    combos = itertools.combinations(range(len(ineq)), nv - k)
    while True:
        batch = np.array(list(itertools.islice(combos, chunk)))
        if batch.size == 0:
            break
        systems = np.concatenate([np.broadcast_to(eq, (len(batch), k, nv)), ineq[batch]], axis=1)
        ok = np.abs(np.linalg.det(systems)) > 1e-9
        if not ok.any():
            continue
        x = np.linalg.solve(systems[ok], np.broadcast_to(rhs, (ok.sum(), nv))[..., None])[..., 0]
        feasible = np.all(x @ ineq.T <= 1e-9, axis=1)
        found.append(x[feasible])
    verts = np.concatenate(found)
    verts = np.unique(np.round(verts, 12), axis=0)
    return verts.reshape(-1, k, k)


def brute_force_optimum(vertices: np.ndarray, p: np.ndarray, pdot: np.ndarray) -> float:
    """Maximum of the (convex) private information over polytope vertices."""
    mass = vertices @ p
    slope = vertices @ pdot
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(mass > 0, slope**2 / np.where(mass > 0, mass, 1.0), 0.0)
    return float(terms.sum(axis=1).max())


def warner_info(theta: float, alpha: float) -> float:
    ea = math.exp(alpha)
    return 1.0 / (ea / (ea - 1.0) ** 2 + theta * (1.0 - theta))
