"""Hot numerical kernels, in two interchangeable flavors.

Every kernel here exists twice:

* a scalar-loop implementation compiled with numba ``@njit`` (fast path), and
* a vectorized pure-numpy implementation (fallback path).

The active default is chosen at import time by the ``SAWT_QAP_NUMBA``
environment variable: unset or ``"1"`` selects numba when it is importable,
``"0"`` forces the numpy path.  Both flavors are always exported (``*_numba``
may be ``None`` when numba is unavailable) so tests and benchmarks can compare
them directly; ``benchmarks/kernel_bench.py`` does exactly that.

Conventions shared by all kernels:

* ``flow`` and ``distance`` are square ``float64`` arrays of the same shape.
* ``sigma`` is an ``int64`` permutation vector; ``sigma[i]`` is the location
  assigned to facility ``i``.
* The objective is ``sum_{i,j} flow[i, j] * distance[sigma[i], sigma[j]]``.
* A "swap (i, j)" exchanges the locations of facilities ``i`` and ``j``.
* No symmetry is assumed anywhere: deltas use the general asymmetric update.
"""

from __future__ import annotations

import itertools
import os

import numpy as np

USE_NUMBA = os.environ.get("SAWT_QAP_NUMBA", "1") != "0"

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None
    HAS_NUMBA = False

if not HAS_NUMBA:
    USE_NUMBA = False


# ---------------------------------------------------------------------------
# Scalar-loop implementations (numba-compilable, also valid plain Python).
# ---------------------------------------------------------------------------


def _objective_loop(flow, distance, sigma):
    n = sigma.shape[0]
    total = 0.0
    for i in range(n):
        si = sigma[i]
        for j in range(n):
            total += flow[i, j] * distance[si, sigma[j]]
    return total


def _swap_delta_loop(flow, distance, sigma, i, j):
    si = sigma[i]
    sj = sigma[j]
    n = sigma.shape[0]
    delta = (flow[i, i] - flow[j, j]) * (distance[sj, sj] - distance[si, si])
    delta += (flow[i, j] - flow[j, i]) * (distance[sj, si] - distance[si, sj])
    for k in range(n):
        if k == i or k == j:
            continue
        sk = sigma[k]
        delta += (flow[i, k] - flow[j, k]) * (distance[sj, sk] - distance[si, sk])
        delta += (flow[k, i] - flow[k, j]) * (distance[sk, sj] - distance[sk, si])
    return delta


def _all_swap_deltas_loop(flow, distance, sigma):
    n = sigma.shape[0]
    deltas = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        for j in range(i + 1, n):
            d = _swap_delta_loop(flow, distance, sigma, i, j)
            deltas[i, j] = d
            deltas[j, i] = d
    return deltas


def _greedy_loop(flow, distance, sigma, max_steps):
    n = sigma.shape[0]
    sigma = sigma.copy()
    cost = _objective_loop(flow, distance, sigma)
    steps = 0
    while steps < max_steps:
        best_delta = 0.0
        best_i = -1
        best_j = -1
        for i in range(n):
            for j in range(i + 1, n):
                d = _swap_delta_loop(flow, distance, sigma, i, j)
                if d < best_delta:
                    best_delta = d
                    best_i = i
                    best_j = j
        if best_i < 0:
            break
        tmp = sigma[best_i]
        sigma[best_i] = sigma[best_j]
        sigma[best_j] = tmp
        cost += best_delta
        steps += 1
    return sigma, cost, steps


def _tabu_loop(flow, distance, sigma, max_steps, tenure, aspiration):
    n = sigma.shape[0]
    current = sigma.copy()
    current_cost = _objective_loop(flow, distance, current)
    best = current.copy()
    best_cost = current_cost
    expiry = np.zeros((n, n), dtype=np.int64)
    history = np.empty(max_steps, dtype=np.float64)
    for step in range(1, max_steps + 1):
        pick_i = -1
        pick_j = -1
        pick_delta = np.inf
        esc_i = -1
        esc_j = -1
        esc_delta = np.inf
        for i in range(n):
            for j in range(i + 1, n):
                d = _swap_delta_loop(flow, distance, current, i, j)
                if d < esc_delta:
                    esc_delta = d
                    esc_i = i
                    esc_j = j
                admissible = expiry[i, j] < step
                if not admissible and aspiration:
                    admissible = current_cost + d < best_cost
                if admissible and d < pick_delta:
                    pick_delta = d
                    pick_i = i
                    pick_j = j
        if pick_i < 0:
            # Every move is tabu and none aspirates: take the best tabu move
            # so the search keeps moving (deterministic escape).
            pick_i = esc_i
            pick_j = esc_j
            pick_delta = esc_delta
        tmp = current[pick_i]
        current[pick_i] = current[pick_j]
        current[pick_j] = tmp
        current_cost += pick_delta
        expiry[pick_i, pick_j] = step + tenure
        if current_cost < best_cost:
            best_cost = current_cost
            best = current.copy()
        history[step - 1] = best_cost
    return best, best_cost, current, current_cost, history


def _brute_force_loop(flow, distance, init_bound):
    """Exact search: lexicographic DFS with admissible partial-cost pruning.

    Requires ``flow >= 0`` and ``distance >= 0`` element-wise so that partial
    assignment cost is monotone non-decreasing, which makes the
    ``partial >= best`` prune exact.  Because the DFS visits permutations in
    lexicographic order and only a strict improvement replaces the incumbent,
    the returned optimum is the lexicographically smallest one.

    ``init_bound`` primes the incumbent cost (``np.inf`` for a cold start).
    Any leaf strictly below the bound is still reachable, so passing
    ``known_optimum + 0.5`` on integer-valued data is a safe accelerator.
    Returns ``(perm, cost, leaves)``; ``cost == inf`` and an identity ``perm``
    mean nothing beat the bound.
    """
    n = flow.shape[0]
    perm = np.full(n, -1, dtype=np.int64)
    used = np.zeros(n, dtype=np.bool_)
    partial = np.zeros(n + 1, dtype=np.float64)
    cand = np.zeros(n, dtype=np.int64)
    best_perm = np.arange(n)
    best = init_bound
    leaves = 0
    k = 0
    while k >= 0:
        loc = -1
        c = cand[k]
        while c < n:
            if not used[c]:
                loc = c
                break
            c += 1
        if loc < 0:
            k -= 1
            if k >= 0:
                prev = perm[k]
                used[prev] = False
                perm[k] = -1
                cand[k] = prev + 1
            continue
        add = flow[k, k] * distance[loc, loc]
        for i in range(k):
            pi = perm[i]
            add += flow[i, k] * distance[pi, loc] + flow[k, i] * distance[loc, pi]
        new_partial = partial[k] + add
        if new_partial >= best:
            cand[k] = loc + 1
            continue
        if k == n - 1:
            leaves += 1
            best = new_partial
            perm[k] = loc
            best_perm = perm.copy()
            perm[k] = -1
            cand[k] = loc + 1
            continue
        perm[k] = loc
        used[loc] = True
        partial[k + 1] = new_partial
        k += 1
        cand[k] = 0
    return best_perm, best, leaves


# ---------------------------------------------------------------------------
# Vectorized numpy implementations.
# ---------------------------------------------------------------------------


def objective_numpy(flow, distance, sigma):
    """Objective value via fancy indexing: sum(F * D[sigma][:, sigma])."""
    return float(np.sum(flow * distance[np.ix_(sigma, sigma)]))


def swap_delta_numpy(flow, distance, sigma, i, j):
    """O(n) swap delta from row/column slices (general asymmetric form)."""
    si = int(sigma[i])
    sj = int(sigma[j])
    row_j = distance[sj, sigma]
    row_i = distance[si, sigma]
    col_j = distance[sigma, sj]
    col_i = distance[sigma, si]
    row = (flow[i, :] - flow[j, :]) * (row_j - row_i)
    col = (flow[:, i] - flow[:, j]) * (col_j - col_i)
    row_sum = row.sum() - row[i] - row[j]
    col_sum = col.sum() - col[i] - col[j]
    corner = (flow[i, i] - flow[j, j]) * (distance[sj, sj] - distance[si, si])
    corner += (flow[i, j] - flow[j, i]) * (distance[sj, si] - distance[si, sj])
    return float(row_sum + col_sum + corner)


def all_swap_deltas_numpy(flow, distance, sigma):
    """All-pairs swap deltas as a symmetric (n, n) matrix via two matmuls.

    Expanding the general delta over all pairs gives, with
    ``P = D[sigma][:, sigma]``, ``A = F @ P.T`` and ``B = F.T @ P``,
    a closed form per pair plus corrections for the excluded ``k in {i, j}``
    terms.  Zero diagonal by construction (swapping i with i is a no-op).
    """
    perm_d = distance[np.ix_(sigma, sigma)]
    a = flow @ perm_d.T
    b = flow.T @ perm_d
    da = np.diag(a)
    db = np.diag(b)
    full_row = a + a.T - da[:, None] - da[None, :]
    full_col = b + b.T - db[:, None] - db[None, :]
    f_diag = np.diag(flow)
    p_diag = np.diag(perm_d)
    # Terms with k == i or k == j that the full sums wrongly include.
    excl_row = (f_diag[:, None] - flow.T) * (perm_d.T - p_diag[:, None]) + (
        flow - f_diag[None, :]
    ) * (p_diag[None, :] - perm_d)
    excl_col = (f_diag[:, None] - flow) * (perm_d - p_diag[:, None]) + (
        flow.T - f_diag[None, :]
    ) * (p_diag[None, :] - perm_d.T)
    corner = (f_diag[:, None] - f_diag[None, :]) * (
        p_diag[None, :] - p_diag[:, None]
    ) + (flow - flow.T) * (perm_d.T - perm_d)
    deltas = full_row - excl_row + full_col - excl_col + corner
    np.fill_diagonal(deltas, 0.0)
    return deltas


def _lex_best_pair(deltas):
    """Index (i, j), i < j, of the smallest delta, lexicographic tie-break."""
    n = deltas.shape[0]
    masked = np.where(np.triu(np.ones_like(deltas, dtype=bool), k=1), deltas, np.inf)
    flat = int(np.argmin(masked))  # argmin returns the first minimum row-major
    return flat // n, flat % n


def greedy_numpy(flow, distance, sigma, max_steps):
    """Best-improvement 2-swap descent (vectorized delta scans)."""
    sigma = sigma.copy()
    cost = objective_numpy(flow, distance, sigma)
    steps = 0
    while steps < max_steps:
        deltas = all_swap_deltas_numpy(flow, distance, sigma)
        i, j = _lex_best_pair(deltas)
        if deltas[i, j] >= 0.0:
            break
        sigma[i], sigma[j] = sigma[j], sigma[i]
        cost += float(deltas[i, j])
        steps += 1
    return sigma, cost, steps


def tabu_numpy(flow, distance, sigma, max_steps, tenure, aspiration):
    """Tabu search step loop (vectorized scans); see ``tabu`` for semantics."""
    n = sigma.shape[0]
    current = sigma.copy()
    current_cost = objective_numpy(flow, distance, current)
    best = current.copy()
    best_cost = current_cost
    expiry = np.zeros((n, n), dtype=np.int64)
    upper = np.triu(np.ones((n, n), dtype=bool), k=1)
    history = np.empty(max_steps, dtype=np.float64)
    for step in range(1, max_steps + 1):
        deltas = all_swap_deltas_numpy(flow, distance, current)
        admissible = expiry < step
        if aspiration:
            admissible |= current_cost + deltas < best_cost
        admissible &= upper
        if admissible.any():
            masked = np.where(admissible, deltas, np.inf)
        else:
            masked = np.where(upper, deltas, np.inf)
        flat = int(np.argmin(masked))
        i, j = flat // n, flat % n
        delta = float(masked[i, j])
        current[i], current[j] = current[j], current[i]
        current_cost += delta
        expiry[i, j] = step + tenure
        if current_cost < best_cost:
            best_cost = current_cost
            best = current.copy()
        history[step - 1] = best_cost
    return best, best_cost, current, current_cost, history


def brute_force_numpy(flow, distance, init_bound=np.inf, chunk=8192):
    """Exact search by chunked vectorized enumeration in lexicographic order."""
    n = flow.shape[0]
    best = float(init_bound)
    best_perm = np.arange(n)
    found = False
    it = itertools.permutations(range(n))
    while True:
        block = np.array(list(itertools.islice(it, chunk)), dtype=np.int64)
        if block.size == 0:
            break
        gathered = distance[block[:, :, None], block[:, None, :]]
        costs = np.einsum("ij,kij->k", flow, gathered)
        k = int(np.argmin(costs))
        if costs[k] < best:
            best = float(costs[k])
            best_perm = block[k].copy()
            found = True
    if not found and not np.isfinite(init_bound):
        raise ValueError("empty search space")
    return best_perm, best, 0


# ---------------------------------------------------------------------------
# Backend selection.
# ---------------------------------------------------------------------------

if HAS_NUMBA:
    _jit = njit(cache=True, nogil=True)
    objective_numba = _jit(_objective_loop)
    swap_delta_numba = _jit(_swap_delta_loop)
    # Re-bind so the jitted inner call is used by the compiled callers below.
    _swap_delta_loop = swap_delta_numba
    _objective_loop = objective_numba
    all_swap_deltas_numba = _jit(_all_swap_deltas_loop)
    greedy_numba = _jit(_greedy_loop)
    tabu_numba = _jit(_tabu_loop)
    brute_force_numba = _jit(_brute_force_loop)
else:  # pragma: no cover - exercised only when numba is absent
    objective_numba = None
    swap_delta_numba = None
    all_swap_deltas_numba = None
    greedy_numba = None
    tabu_numba = None
    brute_force_numba = None

if USE_NUMBA:
    ACTIVE_BACKEND = "numba"
    objective = objective_numba
    swap_delta = swap_delta_numba
    all_swap_deltas = all_swap_deltas_numba
    greedy = greedy_numba
    tabu = tabu_numba
    _brute = brute_force_numba
else:
    ACTIVE_BACKEND = "numpy"
    objective = objective_numpy
    swap_delta = swap_delta_numpy
    all_swap_deltas = all_swap_deltas_numpy
    greedy = greedy_numpy
    tabu = tabu_numpy
    _brute = brute_force_numpy


def brute_force(flow, distance, init_bound=np.inf):
    """Dispatch to the active exact-search kernel; returns (perm, cost, leaves)."""
    return _brute(flow, distance, init_bound)
