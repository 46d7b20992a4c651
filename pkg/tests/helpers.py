"""Shared test utilities: independent oracles and instance factories.

The oracles here are deliberately written as plain Python double loops (no
shared code with the package's kernels) so they can serve as independent
references for the fast paths.
"""

from __future__ import annotations

import numpy as np

from sawt_qap.core import QapInstance


def naive_objective(flow, distance, sigma) -> float:
    """Textbook double-sum objective; the independent reference."""
    n = len(sigma)
    total = 0.0
    for i in range(n):
        for j in range(n):
            total += float(flow[i][j]) * float(distance[sigma[i]][sigma[j]])
    return total


def naive_trace_objective(flow, distance, sigma) -> float:
    """trace(F X D X^T) assembled from an explicitly constructed X."""
    n = len(sigma)
    x = np.zeros((n, n))
    for i in range(n):
        x[i, sigma[i]] = 1.0
    return float(np.trace(np.asarray(flow) @ x @ np.asarray(distance) @ x.T))


def random_asymmetric_instance(rng, n, scale=1.0, name=None) -> QapInstance:
    """Dense asymmetric instance (exercises the general delta formula)."""
    flow = rng.random((n, n)) * scale
    distance = rng.random((n, n)) * scale
    np.fill_diagonal(flow, 0.0)
    np.fill_diagonal(distance, 0.0)
    return QapInstance(name or f"asym{n}", flow, distance)


def random_integer_instance(rng, n, high=10, name=None) -> QapInstance:
    """Symmetric integer-valued instance (exact float arithmetic)."""

    def sym(mat):
        upper = np.triu(mat, k=1)
        return upper + upper.T

    flow = sym(rng.integers(0, high + 1, size=(n, n))).astype(np.float64)
    distance = sym(rng.integers(0, high + 1, size=(n, n))).astype(np.float64)
    return QapInstance(name or f"int{n}", flow, distance)


def exhaustive_best(flow, distance):
    """Global optimum by literal enumeration (oracle for brute_force)."""
    import itertools

    n = flow.shape[0]
    best_cost = float("inf")
    best_perm = None
    for perm in itertools.permutations(range(n)):
        cost = naive_objective(flow, distance, perm)
        if cost < best_cost:
            best_cost = cost
            best_perm = perm
    return np.array(best_perm, dtype=np.int64), best_cost
