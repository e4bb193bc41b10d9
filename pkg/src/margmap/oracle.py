"""Brute-force reference answers for small models.

Everything here works on raw numpy arrays and deliberately shares no code with the
clique-tree machinery, so the two paths can validate each other. Evidence and decision
states are applied by slicing factor tables, not through the factor algebra.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .model import GraphicalModel, MmapProblem
from .scaling import Scaled

_TIE_RTOL = 1e-12


class OracleCapError(RuntimeError):
    """The requested brute-force expansion exceeds the configured state cap."""


def _fold_factor(joint: np.ndarray, table: np.ndarray, axes: list[int], n_axes: int) -> np.ndarray:
    """Multiply `table` (axes listed in `axes`, any order) into an n_axes-dim joint."""
    if axes:
        order = np.argsort(axes)
        t = np.transpose(table, order)
        view = [1] * n_axes
        for a in axes:
            view[a] = table.shape[axes.index(a)]
        t = t.reshape(view)
    else:
        t = table  # scalar
    return joint * t


def brute_force_partition(model: GraphicalModel, cap: int = 1 << 24) -> Scaled:
    """Sum of the factor product over every joint configuration.

    The running joint is renormalized by a power of two after each factor so that
    models far outside double range still sum exactly (numpy pairwise summation).
    """
    n_states = 1
    for c in model.cards:
        n_states *= c
        if n_states > cap:
            raise OracleCapError(f"joint table needs {n_states}+ states, cap is {cap}")
    joint = np.ones(tuple(model.cards))
    exp = 0
    for f in model.factors:
        joint = _fold_factor(joint, np.asarray(f.table), list(f.vars), model.n_vars)
        m = float(joint.max()) if joint.size else 0.0
        if m <= 0.0:
            return Scaled.zero()
        _, e = math.frexp(m)
        joint = np.ldexp(joint, -e)
        exp += e
    return Scaled(float(np.sum(joint)), exp).normalized()


def _clamped_value(problem: MmapProblem, free: list[int], assignment: dict[int, int]) -> Scaled:
    """Partition value with evidence plus one full decision assignment applied."""
    model = problem.model
    fixed = dict(problem.evidence)
    fixed.update(assignment)
    pos = {v: i for i, v in enumerate(free)}
    joint = np.ones(tuple(model.cards[v] for v in free))
    exp = 0
    for f in model.factors:
        t = np.asarray(f.table)
        kept: list[int] = []
        for v in f.vars:
            if v in fixed:
                t = np.take(t, fixed[v], axis=len(kept))
            else:
                kept.append(pos[v])
        joint = _fold_factor(joint, t, kept, len(free))
        m = float(joint.max()) if joint.size else 0.0
        if m <= 0.0:
            return Scaled.zero()
        _, e = math.frexp(m)
        joint = np.ldexp(joint, -e)
        exp += e
    return Scaled(float(np.sum(joint)), exp).normalized()


def brute_force_mmap(
    problem: MmapProblem, cap: int = 1 << 24
) -> tuple[Scaled, tuple[dict[int, int], ...]]:
    """Exhaustive search over decision assignments.

    Returns the best clamped partition value and every assignment within relative
    tolerance 1e-12 of it (integer-profit models tie often). The work is bounded by
    (decision states) x (free states) <= cap.
    """
    model = problem.model
    dec = list(problem.decisions)
    n_dec = 1
    for v in dec:
        n_dec *= model.cards[v]
    free = [v for v in range(model.n_vars) if v not in problem.evidence and v not in set(dec)]
    n_free = 1
    for v in free:
        n_free *= model.cards[v]
    if n_dec * n_free > cap:
        raise OracleCapError(
            f"{n_dec} decision states x {n_free} free states exceeds the cap {cap}"
        )

    combos = list(itertools.product(*(range(model.cards[v]) for v in dec)))
    values = [_clamped_value(problem, free, dict(zip(dec, c))) for c in combos]
    best = values[0]
    for v in values[1:]:
        if best < v:
            best = v
    winners = tuple(
        dict(zip(dec, c))
        for c, v in zip(combos, values)
        if v.ratio_to(best) >= 1.0 - _TIE_RTOL
    )
    return best, winners
