import math

import pytest

from margmap import (
    AnytimeResult,
    BudgetExhaustedError,
    SolverConfig,
    anytime_inference,
    assignment_value,
    brute_force_mmap,
    gap,
    prepare_inputs,
)
from conftest import random_problem


def solve(problem, **kwargs):
    tree, family = prepare_inputs(problem)
    return anytime_inference(tree, family, SolverConfig(**kwargs))


def rel_close(a, b, tol=1e-9):
    return abs(a.ratio_to(b) - 1.0) <= tol if not b.is_zero else a.is_zero


class TestConvergence:
    def test_reaches_the_exact_optimum(self, problem_corpus):
        for p in problem_corpus[:15]:
            result = solve(p)
            best, winners = brute_force_mmap(p)
            assert result.status == "converged"
            assert rel_close(result.z_lower, best)
            assert rel_close(result.z_upper, best)
            if not best.is_zero:
                assert result.assignment in [dict(w) for w in winners]

    def test_growing_every_node_also_converges(self, problem_corpus):
        for p in problem_corpus[:8]:
            result = solve(p, growth="all")
            best, _ = brute_force_mmap(p)
            assert result.status == "converged"
            assert rel_close(result.z_lower, best)

    def test_convexity_pruning_preserves_the_answer(self, problem_corpus):
        for p in problem_corpus[:8]:
            result = solve(p, convexity=True)
            best, _ = brute_force_mmap(p)
            assert result.status == "converged"
            assert rel_close(result.z_lower, best)

    def test_final_gap_is_one(self, tiny_chain):
        result = solve(tiny_chain)
        assert gap(result.trace[-1]) == pytest.approx(1.0, rel=1e-11)
        assert result.z_lower.to_float() == pytest.approx(1.1)
        assert result.assignment == {1: 0}


class TestTraceInvariants:
    def test_folded_bounds_are_monotone(self, problem_corpus):
        for p in problem_corpus[:10]:
            result = solve(p, k_init=1, c=1)
            for earlier, later in zip(result.trace, result.trace[1:]):
                assert earlier.z_lower <= later.z_lower
                assert later.z_upper <= earlier.z_upper

    def test_every_step_sandwiches_the_optimum(self, problem_corpus):
        for p in problem_corpus[:10]:
            best, _ = brute_force_mmap(p)
            result = solve(p, k_init=1, c=1)
            for entry in result.trace:
                assert entry.step_lower <= best or rel_close(entry.step_lower, best)
                assert best <= entry.step_upper or rel_close(entry.step_upper, best)

    def test_reported_assignments_are_feasible(self, problem_corpus):
        # each step's lower bound must be reproducible by exact evaluation
        for p in problem_corpus[:10]:
            result = solve(p, k_init=1, c=1)
            for entry in result.trace:
                assert set(entry.assignment) == set(p.decisions)
                exact = assignment_value(p, entry.assignment)
                assert rel_close(entry.step_lower, exact)

    def test_caps_recorded_per_step(self, problem_corpus):
        p = problem_corpus[0]
        result = solve(p, k_init=1, c=3, growth="all")
        if result.steps > 1:
            assert all(c == 1 for c in result.trace[0].caps)
            assert all(c == 4 for c in result.trace[1].caps)

    def test_worst_growth_touches_one_node(self):
        p = random_problem(4)
        result = solve(p, k_init=1, c=2, growth="worst")
        for earlier, later in zip(result.trace, result.trace[1:]):
            grown = sum(1 for a, b in zip(earlier.caps, later.caps) if b > a)
            n = len(earlier.caps)
            assert grown == 1 or grown == n  # progress guard may widen everywhere

    def test_sink_sees_every_step(self, tiny_chain):
        seen = []
        tree, family = prepare_inputs(tiny_chain)
        result = anytime_inference(tree, family, sink=seen.append)
        assert [s.step for s in seen] == [s.step for s in result.trace]


class TestBudgets:
    def test_time_limit_zero_still_reports_first_bounds(self, problem_corpus):
        p = problem_corpus[0]
        result = solve(p, time_limit=0.0)
        assert result.steps == 1
        assert result.status in ("converged", "interrupted")
        if result.status == "interrupted":
            assert result.detail == "time limit reached"

    def test_interrupt_before_first_pass_is_an_error(self, tiny_chain):
        tree, family = prepare_inputs(tiny_chain)
        with pytest.raises(BudgetExhaustedError):
            anytime_inference(tree, family, interrupt=lambda: True)

    def test_interrupt_after_first_pass_keeps_bounds(self, problem_corpus):
        p = problem_corpus[1]
        calls = {"n": 0}

        def later():
            calls["n"] += 1
            return calls["n"] > 40

        result = solve_with_interrupt(p, later)
        assert isinstance(result, AnytimeResult)
        assert result.steps >= 1
        assert result.z_lower <= result.z_upper

    def test_tiny_memory_cap_is_an_error(self, tiny_chain):
        tree, family = prepare_inputs(tiny_chain)
        with pytest.raises(BudgetExhaustedError, match="memory"):
            anytime_inference(tree, family, SolverConfig(memory_cap=1))

    def test_generous_memory_cap_is_harmless(self, tiny_chain):
        result = solve(tiny_chain, memory_cap=1 << 30)
        assert result.status == "converged"


def solve_with_interrupt(problem, interrupt):
    tree, family = prepare_inputs(problem)
    return anytime_inference(tree, family, interrupt=interrupt)


class TestConfigValidation:
    def test_rejects_zero_k_init(self):
        with pytest.raises(ValueError):
            SolverConfig(k_init=0)

    def test_rejects_zero_increment(self):
        with pytest.raises(ValueError):
            SolverConfig(c=0)

    def test_rejects_unknown_growth(self):
        with pytest.raises(ValueError, match="growth"):
            SolverConfig(growth="fastest")

    def test_rejects_negative_time_limit(self):
        with pytest.raises(ValueError):
            SolverConfig(time_limit=-1.0)

    def test_rejects_non_positive_memory_cap(self):
        with pytest.raises(ValueError):
            SolverConfig(memory_cap=0)


class TestGap:
    def test_gap_handles_zero_lower_bound(self, problem_corpus):
        for p in problem_corpus[:10]:
            result = solve(p, k_init=1, c=1)
            for entry in result.trace:
                g = gap(entry)
                assert g >= 1.0 - 1e-12 or math.isinf(g)
