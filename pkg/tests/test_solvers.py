"""Classical solver semantics and cross-checks against enumeration."""

from __future__ import annotations

import itertools

import numpy as np
import pytest

import sawt_qap as sq
import sawt_qap.solvers as sv
from helpers import (
    exhaustive_best,
    random_asymmetric_instance,
    random_integer_instance,
)
from sawt_qap.errors import SizeLimitError, ValidationError


class TestBruteForce:
    def test_matches_enumeration(self, rng):
        for n in (2, 4, 6):
            inst = random_asymmetric_instance(rng, n)
            best = sv.brute_force(inst)
            perm, cost = exhaustive_best(inst.flow, inst.distance)
            assert best.cost == pytest.approx(cost, rel=1e-12)
            assert np.array_equal(best.sigma, perm)

    def test_cost_cache_consistent(self, rng):
        inst = random_asymmetric_instance(rng, 6)
        best = sv.brute_force(inst)
        assert best.cost == pytest.approx(sq.objective(inst, best.sigma), rel=1e-12)

    def test_size_guard(self):
        inst = sq.QapInstance("big", np.zeros((11, 11)), np.zeros((11, 11)))
        with pytest.raises(SizeLimitError):
            sv.brute_force(inst)

    def test_lexicographic_tie_break(self):
        inst = sq.QapInstance("ties", np.zeros((6, 6)), np.ones((6, 6)))
        assert np.array_equal(sv.brute_force(inst).sigma, np.arange(6))


class TestGreedy:
    def test_local_optimum(self, rng):
        for _ in range(10):
            inst = random_asymmetric_instance(rng, 8)
            start = sq.random_assignment(inst, rng)
            out = sv.greedy_descent(inst, start)
            deltas = sq.all_swap_deltas(inst, out.sigma)
            assert float(deltas.min()) >= 0.0  # no improving swap remains
            assert out.cost <= start.cost

    def test_budget_zero_returns_start(self, rng):
        inst = random_asymmetric_instance(rng, 7)
        start = sq.random_assignment(inst, rng)
        out = sv.greedy_descent(inst, start, max_steps=0)
        assert np.array_equal(out.sigma, start.sigma)
        assert out.cost == pytest.approx(start.cost, rel=1e-12)

    def test_deterministic_and_default_start(self, rng):
        inst = random_integer_instance(rng, 9)
        a = sv.greedy_descent(inst)
        b = sv.greedy_descent(inst)
        assert np.array_equal(a.sigma, b.sigma) and a.cost == b.cost

    def test_negative_budget_rejected(self, rng):
        inst = random_asymmetric_instance(rng, 5)
        with pytest.raises(ValidationError):
            sv.greedy_descent(inst, max_steps=-1)


class TestTabu:
    def test_best_monotone_history(self, rng):
        inst = random_integer_instance(rng, 10)
        start = sq.random_assignment(inst, rng)
        best, hist = sv.tabu_search(
            inst, start, sv.TabuConfig(max_steps=300), return_history=True
        )
        assert len(hist) == 300
        assert np.all(np.diff(hist) <= 0.0)
        assert best.cost == hist[-1] <= start.cost

    def test_zero_steps_returns_start(self, rng):
        inst = random_integer_instance(rng, 8)
        start = sq.random_assignment(inst, rng)
        out = sv.tabu_search(inst, start, sv.TabuConfig(max_steps=0))
        assert np.array_equal(out.sigma, start.sigma)

    def test_deterministic(self, rng):
        inst = random_integer_instance(rng, 9)
        start = sq.random_assignment(inst, rng)
        cfg = sv.TabuConfig(max_steps=250, tenure=5)
        a = sv.tabu_search(inst, start, cfg)
        b = sv.tabu_search(inst, start, cfg)
        assert np.array_equal(a.sigma, b.sigma) and a.cost == b.cost

    def test_escapes_local_optimum(self, rng):
        # Tabu must match or beat pure descent given the same start.
        wins = 0
        for _ in range(10):
            inst = random_integer_instance(rng, 10)
            start = sq.random_assignment(inst, rng)
            g = sv.greedy_descent(inst, start)
            t = sv.tabu_search(inst, start, sv.TabuConfig(max_steps=400))
            assert t.cost <= g.cost + 1e-9
            wins += t.cost < g.cost
        assert wins >= 3  # it should actually escape sometimes

    def test_finds_optimum_small(self, rng):
        hits = 0
        for _ in range(10):
            inst = random_integer_instance(rng, 7)
            opt = sv.brute_force(inst)
            t = sv.tabu_search(
                inst, sq.random_assignment(inst, rng), sv.TabuConfig(max_steps=500)
            )
            hits += t.cost == opt.cost
        assert hits >= 8

    def test_cost_cache_consistent(self, rng):
        inst = random_asymmetric_instance(rng, 9)
        out = sv.tabu_search(inst, config=sv.TabuConfig(max_steps=200))
        assert out.cost == pytest.approx(sq.objective(inst, out.sigma), rel=1e-9)

    def test_config_validation(self):
        with pytest.raises(ValidationError):
            sv.TabuConfig(max_steps=-1)
        with pytest.raises(ValidationError):
            sv.TabuConfig(tenure=-2)

    def test_default_tenure(self):
        assert sv.default_tenure(12) == 7
        assert sv.default_tenure(40) == 10

    def test_multistart(self, rng):
        inst = random_integer_instance(rng, 8)
        cfg = sv.TabuConfig(max_steps=150, rng_seed=5)
        best = sv.tabu_multistart(inst, restarts=4, config=cfg)
        again = sv.tabu_multistart(inst, restarts=4, config=cfg)
        assert np.array_equal(best.sigma, again.sigma)
        single = sv.tabu_search(inst, config=cfg)
        assert best.cost <= single.cost + 1e-9
        with pytest.raises(ValidationError):
            sv.tabu_multistart(inst, restarts=0, config=cfg)


class TestAssociationGraph:
    def test_entries(self, rng):
        inst = random_asymmetric_instance(rng, 4)
        k = sv.association_graph(inst)
        assert k.shape == (16, 16)
        for _ in range(20):
            i, j, a, b = rng.integers(0, 4, size=4)
            assert k[i * 4 + a, j * 4 + b] == pytest.approx(
                inst.flow[i, j] * inst.distance[a, b], rel=1e-12
            )

    def test_quadratic_form_equals_objective(self, rng):
        inst = random_asymmetric_instance(rng, 5)
        k = sv.association_graph(inst)
        for _ in range(5):
            sigma = rng.permutation(5).astype(np.int64)
            x = sq.permutation_matrix(sigma).ravel()
            assert x @ k @ x == pytest.approx(sq.objective(inst, sigma), rel=1e-9)

    def test_size_guard(self):
        inst = sq.QapInstance("big", np.zeros((33, 33)), np.zeros((33, 33)))
        with pytest.raises(SizeLimitError):
            sv.association_graph(inst)


class TestPowerIteration:
    def test_against_dense_eig(self, rng):
        mat = rng.random((12, 12))
        mat = mat + mat.T  # symmetric non-negative
        vec, iters, converged = sv.power_iteration(mat, tol=1e-10, max_iter=5000)
        assert converged
        w, v = np.linalg.eigh(mat)
        lead = v[:, np.argmax(w)]
        lead = lead * np.sign(lead.sum() or 1.0)
        assert np.allclose(np.abs(vec), np.abs(lead), atol=1e-5)

    def test_perron_nonnegative(self, rng):
        inst = sq.generate_instance(5, seed=2)
        k = sv.association_graph(inst)
        vec, _, _ = sv.power_iteration(k)
        assert np.all(vec >= -1e-12)
        assert np.linalg.norm(vec) == pytest.approx(1.0, rel=1e-9)

    def test_zero_matrix(self):
        vec, iters, converged = sv.power_iteration(np.zeros((9, 9)))
        assert converged and iters == 1
        assert np.allclose(vec, 1.0 / 3.0)

    def test_non_convergence_reported(self):
        # A rotation has complex leading eigenvalues: power iteration cycles.
        rot = np.array([[0.0, 1.0], [1e-12, 0.0]])
        _, iters, converged = sv.power_iteration(rot, tol=1e-15, max_iter=50)
        assert not converged and iters == 50


class TestHungarianProjection:
    def test_maximizes_linear_score(self, rng):
        # Dual route: compare against literal enumeration at n <= 6.
        for n in (2, 4, 6):
            scores = rng.random((n, n))
            sigma = sv.hungarian_projection(scores)
            value = float(scores[np.arange(n), sigma].sum())
            best = max(
                float(scores[np.arange(n), list(p)].sum())
                for p in itertools.permutations(range(n))
            )
            assert value == pytest.approx(best, rel=1e-12)


class TestSpectralMatching:
    def test_feasible_and_deterministic(self, rng):
        inst = sq.generate_instance(10, seed=21)
        res = sv.spectral_matching(inst)
        assert sq.core.is_permutation(res.assignment.sigma, 10)
        assert res.converged
        assert res.scores.shape == (10, 10)
        again = sv.spectral_matching(inst)
        assert np.array_equal(res.assignment.sigma, again.assignment.sigma)

    def test_cost_cache(self, rng):
        inst = sq.generate_instance(8, seed=22)
        res = sv.spectral_matching(inst)
        assert res.assignment.cost == pytest.approx(
            sq.objective(inst, res.assignment.sigma), rel=1e-12
        )

    def test_zero_flow_instance(self):
        inst = sq.QapInstance("z", np.zeros((6, 6)), np.ones((6, 6)))
        res = sv.spectral_matching(inst)
        assert res.assignment.cost == 0.0
