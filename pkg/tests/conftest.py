"""Shared fixtures: seeded random problem corpus small enough to brute force."""

from __future__ import annotations

import numpy as np
import pytest

from margmap import Factor, GraphicalModel, MmapProblem, Scope


def random_model(rng: np.random.Generator, n_vars: int | None = None,
                 max_card: int = 3, zero_prob: float = 0.15) -> GraphicalModel:
    """Connected random model: spanning edges plus extra pairwise and unary factors."""
    n = n_vars if n_vars is not None else int(rng.integers(3, 10))
    cards = tuple(int(rng.integers(2, max_card + 1)) for _ in range(n))
    factors = []
    for v in range(1, n):
        u = int(rng.integers(0, v))
        t = 1.0 - rng.random((cards[u], cards[v]))
        if rng.random() < zero_prob:
            t = t.copy()
            t[tuple(int(rng.integers(0, s)) for s in t.shape)] = 0.0
        factors.append(Factor(Scope((u, v), (cards[u], cards[v])), t))
    for _ in range(int(rng.integers(0, n))):
        u, v = sorted(rng.choice(n, size=2, replace=False).tolist())
        factors.append(Factor(Scope((u, v), (cards[u], cards[v])), 1.0 - rng.random((cards[u], cards[v]))))
    for v in range(n):
        if rng.random() < 0.5:
            factors.append(Factor(Scope((v,), (cards[v],)), 1.0 - rng.random(cards[v])))
    covered = set()
    for f in factors:
        covered.update(f.vars)
    for v in sorted(set(range(n)) - covered):
        factors.append(Factor(Scope((v,), (cards[v],)), np.ones(cards[v])))
    return GraphicalModel(n, cards, tuple(factors))


def random_problem(seed: int, max_decisions: int = 5, with_evidence: bool = True) -> MmapProblem:
    rng = np.random.default_rng(seed)
    model = random_model(rng)
    n = model.n_vars
    n_dec = int(rng.integers(1, min(n, max_decisions) + 1))
    decisions = tuple(sorted(rng.choice(n, size=n_dec, replace=False).tolist()))
    evidence = {}
    rest = [v for v in range(n) if v not in decisions]
    if with_evidence and rest and rng.random() < 0.4:
        v = int(rng.choice(rest))
        evidence[v] = int(rng.integers(0, model.cards[v]))
    return MmapProblem(model, decisions, evidence)


@pytest.fixture(scope="session")
def problem_corpus() -> list[MmapProblem]:
    """Thirty varied problems, all small enough for the brute-force reference."""
    return [random_problem(seed) for seed in range(30)]


@pytest.fixture
def tiny_chain() -> MmapProblem:
    """Three binary variables in a chain, middle one decided; hand-checkable."""
    f01 = Factor(Scope((0, 1), (2, 2)), np.array([[0.9, 0.1], [0.2, 0.8]]))
    f12 = Factor(Scope((1, 2), (2, 2)), np.array([[0.7, 0.3], [0.4, 0.6]]))
    model = GraphicalModel(3, (2, 2, 2), (f01, f12))
    return MmapProblem(model, (1,))
