"""Exact message passing on a clique tree for a single factor selection.

Messages flow leaves-to-root. At each node the local factors and child messages are
multiplied, fresh variables (those leaving scope at this node) are eliminated, and the
result is expanded onto the full separator in ascending variable order. Each message
carries a base-2 exponent and its table is renormalized so the largest entry sits in
[0.5, 1), which keeps long products of small potentials away from underflow.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .cliquetree import CliqueTree
from .factors import (
    Factor,
    VariableId,
    max_marginalize,
    product,
    product_all,
    sum_marginalize,
)
from .model import FactorSetFamily
from .scaling import Scaled


def reduce_to_separator(
    prod: Factor,
    index_set: frozenset[VariableId],
    separator: frozenset[VariableId],
    cards: Sequence[int],
    max_vars: frozenset[VariableId] = frozenset(),
) -> Factor:
    """Eliminate the fresh variables of one node and land on the separator.

    Fresh variables present in the product scope are summed out (or maximized for
    `max_vars`), summed-out variables absent from the scope contribute a factor of
    their cardinality (a constant summed over its range), and maximized absent
    variables contribute nothing. The result is broadcast onto the full separator
    with variables in ascending order, so messages from different selections always
    share an identical scope.
    """
    scope = set(prod.vars)
    if not scope <= index_set:
        raise ValueError(f"product scope {sorted(scope)} escapes the clique {sorted(index_set)}")
    fresh = index_set - separator
    out = sum_marginalize(prod, [v for v in prod.vars if v in fresh and v not in max_vars])
    out = max_marginalize(out, [v for v in out.vars if v in fresh and v in max_vars])
    mult = 1.0
    for v in fresh - scope:
        if v not in max_vars:
            mult *= cards[v]
    table = out.table if mult == 1.0 else out.table * mult
    out = Factor(out.scope, table)
    sep_sorted = tuple(sorted(separator))
    missing = [v for v in sep_sorted if v not in out.vars]
    if missing:
        out = product(out, Factor.ones(missing, tuple(cards[v] for v in missing)))
    return out.transpose_to(sep_sorted)


def renormalize(table: np.ndarray) -> tuple[np.ndarray, int]:
    """Scale a non-negative table by a power of two so its max lands in [0.5, 1)."""
    m = float(table.max()) if table.size else 0.0
    if m <= 0.0:
        return table, 0
    _, e = math.frexp(m)
    return np.ldexp(table, -e), e


def _selected_factors(family: FactorSetFamily, node_sets: tuple[int, ...], selection: Sequence[int]) -> list[Factor]:
    out = []
    for s in node_sets:
        fset = family.sets[s]
        idx = selection[s]
        if not (0 <= idx < len(fset)):
            raise ValueError(f"selection {idx} out of range for set {s} with {len(fset)} members")
        out.append(fset.factors[idx])
    return out


def factor_elimination(tree: CliqueTree, family: FactorSetFamily, selection: Sequence[int]) -> Scaled:
    """Partition value of the model given one member choice per candidate set."""
    if len(selection) != len(family.sets):
        raise ValueError("selection must pick one member per set")
    cards = family.cards
    messages: dict[int, tuple[Factor, int]] = {}
    for i in tree.postorder():
        node = tree.nodes[i]
        parts = _selected_factors(family, node.assigned_sets, selection)
        exp = 0
        for c in node.children:
            f, e = messages.pop(c)
            parts.append(f)
            exp += e
        prod = product_all(parts)
        out = reduce_to_separator(prod, node.index_set, tree.separator(i), cards)
        table, e = renormalize(out.table)
        messages[i] = (Factor(out.scope, table), exp + e)
    root_msg, exp = messages[tree.root]
    return Scaled(float(root_msg.table.item()), exp).normalized()


def factor_max_elimination(tree: CliqueTree, family: FactorSetFamily) -> Scaled:
    """Upper bound on the best decision value by per-node max over decision variables.

    Fresh non-decision variables are summed first, then fresh decision variables are
    maximized; decision indicator sets contribute nothing (their variable is left free
    to be maximized). The result is exact when no latent variables exist or when the
    root clique contains every decision variable; otherwise it can overshoot because
    maximization is pushed inside the sum.
    """
    cards = family.cards
    max_vars = frozenset(family.decisions)
    messages: dict[int, tuple[Factor, int]] = {}
    for i in tree.postorder():
        node = tree.nodes[i]
        parts = []
        for s in node.assigned_sets:
            fset = family.sets[s]
            if fset.decision_var is None:
                parts.append(fset.factors[0])
        exp = 0
        for c in node.children:
            f, e = messages.pop(c)
            parts.append(f)
            exp += e
        prod = product_all(parts)
        out = reduce_to_separator(prod, node.index_set, tree.separator(i), cards, max_vars=max_vars)
        table, e = renormalize(out.table)
        messages[i] = (Factor(out.scope, table), exp + e)
    root_msg, exp = messages[tree.root]
    return Scaled(float(root_msg.table.item()), exp).normalized()


def evaluate_assignment(tree: CliqueTree, family: FactorSetFamily, d: dict[VariableId, int]) -> Scaled:
    """Exact value of a full decision assignment (evidence already part of the family)."""
    missing = set(family.decisions) - set(d)
    if missing:
        raise ValueError(f"assignment misses decision variables {sorted(missing)}")
    extra = set(d) - set(family.decisions)
    if extra:
        raise ValueError(f"assignment fixes non-decision variables {sorted(extra)}")
    selection = []
    for fset in family.sets:
        if fset.decision_var is None:
            selection.append(0)
        else:
            state = d[fset.decision_var]
            if not (0 <= state < len(fset)):
                raise ValueError(f"state {state} out of range for decision {fset.decision_var}")
            selection.append(state)
    return factor_elimination(tree, family, selection)
