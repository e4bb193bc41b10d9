"""Propagation of candidate-factor sets up a clique tree with bounded set sizes.

Instead of one message per node, every node carries a set of labeled messages, one per
surviving combination of candidate choices in its subtree. Each member holds

* ``value``: the exact message table its combination would produce,
* ``bound``: an optimistic envelope that also covers every combination pruned into it,
* ``trace``: the decision states committed in the subtree,
* ``scale``: a shared base-2 exponent for both tables.

At the root, the best member value is a feasible lower bound on the optimum and the
best bound is an upper bound. Pruning keeps member counts at each node within a cap:
dominated members are dropped (their bounds folded into the dominating survivor),
optional convex-combination members are dropped via a linear feasibility test, and any
remaining surplus is clustered onto representative members, recording the worst
multiplicative gap as the node's quality.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .cliquetree import CliqueTree
from .elimination import reduce_to_separator, renormalize
from .factors import Factor, Scope, divergence_tables, product_all
from .model import FactorSetFamily
from .scaling import Scaled


class TraceCollisionError(RuntimeError):
    """Two subtrees committed the same decision variable differently (tree bug)."""


class IncompleteTraceError(RuntimeError):
    """A root combination failed to commit every decision variable (tree bug)."""


class StepInterrupted(RuntimeError):
    """Raised out of a propagation when the caller's stop signal fires."""

    def __init__(self, reason: str = "interrupt"):
        self.reason = reason
        super().__init__(reason)


class MemoryBudgetExceeded(RuntimeError):
    """Live member tables outgrew the configured byte budget."""


@dataclass(frozen=True)
class LabeledFactor:
    """One surviving combination at a node: exact value, optimistic bound, trace."""

    value: Factor
    bound: Factor
    trace: dict[int, int]
    scale: int


@dataclass(frozen=True)
class NodeSet:
    """Pruned member set of one node plus its clustering quality (>= 1, may be inf)."""

    members: tuple[LabeledFactor, ...]
    quality: float
    raw_count: int


@dataclass(frozen=True)
class NodeStat:
    raw_count: int
    kept: int
    quality: float
    combo_bound: int


@dataclass(frozen=True)
class PropagationResult:
    z_lower: Scaled
    z_upper: Scaled
    best_trace: dict[int, int]
    per_node_quality: tuple[float, ...]
    node_stats: tuple[NodeStat, ...]


class _Work:
    """Mutable scratch member used inside prune."""

    __slots__ = ("value", "bound", "trace", "order")

    def __init__(self, value: np.ndarray, bound: np.ndarray, trace: dict[int, int], order: int):
        self.value = value
        self.bound = bound
        self.trace = trace
        self.order = order


def _align_members(members: Sequence[LabeledFactor]) -> tuple[list[_Work], int, Scope]:
    """Rescale all members to one shared exponent and sort them canonically.

    The shared exponent is picked so the largest bound entry over the whole set lands
    in [0.5, 1); members many orders of magnitude smaller may underflow to zero, which
    only ever discards combinations already hopeless relative to the set's best.
    """
    scope = members[0].value.scope
    target = None
    for m in members:
        if m.value.scope != scope or m.bound.scope != scope:
            raise ValueError("members of one node set must share a scope")
        top = float(m.bound.table.max()) if m.bound.table.size else 0.0
        if top > 0.0:
            e = m.scale + math.frexp(top)[1]
            target = e if target is None else max(target, e)
    if target is None:
        target = max(m.scale for m in members)
    work = []
    for i, m in enumerate(members):
        shift = m.scale - target
        if shift == 0:
            v, b = m.value.table.copy(), m.bound.table.copy()
        else:
            v, b = np.ldexp(m.value.table, shift), np.ldexp(m.bound.table, shift)
        work.append(_Work(v, b, m.trace, i))
    work.sort(key=lambda w: (w.value.tobytes(), w.bound.tobytes(), sorted(w.trace.items())))
    for i, w in enumerate(work):
        w.order = i
    return work, target, scope


def _dominance_filter(work: list[_Work]) -> list[_Work]:
    """Drop weakly dominated members, folding their bounds into the dominator.

    On exact table equality the earlier member in canonical order survives. Folding
    keeps the invariant that every combination ever absorbed into a dropped member is
    still covered by some survivor's bound.
    """
    survivors: list[_Work] = []
    for cand in work:
        absorbed = False
        for s in survivors:
            if np.all(s.value >= cand.value):
                np.maximum(s.bound, cand.bound, out=s.bound)
                absorbed = True
                break
        if absorbed:
            continue
        keep = []
        for s in survivors:
            if np.all(cand.value >= s.value):
                np.maximum(cand.bound, s.bound, out=cand.bound)
            else:
                keep.append(s)
        keep.append(cand)
        survivors = keep
    survivors.sort(key=lambda w: w.order)
    return survivors


def _in_convex_hull(target: np.ndarray, others: list[np.ndarray], rtol: float = 1e-10) -> bool:
    """Linear feasibility: is target a convex combination of the other tables?"""
    from scipy.optimize import linprog

    k = len(others)
    if k < 2:
        return False
    a = np.stack([o.reshape(-1) for o in others], axis=1)  # (T, k)
    mu = target.reshape(-1)
    norm = max(float(np.max(np.abs(a))) if a.size else 0.0, float(np.max(np.abs(mu))) if mu.size else 0.0)
    if norm == 0.0:
        return True  # everything all-zero
    a = a / norm
    mu = mu / norm
    t_dim = mu.size
    # variables: lambda_1..k, t ; minimize t subject to |A lam - mu| <= t, sum lam = 1
    c = np.zeros(k + 1)
    c[-1] = 1.0
    ones_col = -np.ones((t_dim, 1))
    a_ub = np.vstack([np.hstack([a, ones_col]), np.hstack([-a, ones_col])])
    b_ub = np.concatenate([mu, -mu])
    a_eq = np.zeros((1, k + 1))
    a_eq[0, :k] = 1.0
    res = linprog(
        c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0],
        bounds=[(0.0, 1.0)] * k + [(0.0, None)], method="highs",
    )
    return bool(res.success) and float(res.x[-1]) <= rtol


def _convexity_filter(work: list[_Work], size_limit: int) -> list[_Work]:
    """Drop members expressible as convex combinations of the remaining ones.

    Skipped entirely above size_limit (the LP cost grows fast). A dropped member's
    bound is folded into the first survivor only when it exceeds the member's own
    value somewhere, i.e. when it still carries earlier pruning debt.
    """
    if len(work) > size_limit or len(work) < 3:
        return work
    kept = list(work)
    i = 0
    while i < len(kept):
        others = [w.value for j, w in enumerate(kept) if j != i]
        if _in_convex_hull(kept[i].value, others):
            dropped = kept.pop(i)
            if np.any(dropped.bound > dropped.value):
                target = kept[0]
                np.maximum(target.bound, dropped.bound, out=target.bound)
        else:
            i += 1
    return kept


def greedy_cluster(tables: Sequence[np.ndarray], cap: int) -> tuple[list[int], list[int], float]:
    """Cluster value tables onto at most cap representative members.

    Returns (representative indices ascending, representative index per member,
    quality). Quality is the worst divergence of any member to its representative; it
    is +inf when some member has no finite divergence to any representative, in which
    case that member is attached to the representative sharing the most support.

    Seeding is farthest-point: the first seed maximizes total table mass, each next
    seed maximizes its divergence to the current representatives (infinite divergence
    sorts last, i.e. wins). A local search then swaps representatives while any swap
    strictly improves quality.
    """
    n = len(tables)
    if cap >= n:
        return list(range(n)), list(range(n)), 1.0
    if cap < 1:
        raise ValueError("cap must be at least 1")
    div = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            div[i, j] = 1.0 if i == j else divergence_tables(tables[i], tables[j])

    def quality_of(reps: list[int]) -> float:
        return float(np.max(np.min(div[:, reps], axis=1)))

    sums = [float(t.sum()) for t in tables]
    first = max(range(n), key=lambda i: (sums[i], -i))
    reps = [first]
    while len(reps) < cap:
        dist = np.min(div[:, reps], axis=1)
        dist[reps] = -np.inf
        reps.append(int(np.argmax(dist)))
    reps.sort()

    current = quality_of(reps)
    improved = True
    while improved:
        improved = False
        best_swap = None
        best_q = current
        rep_set = set(reps)
        for out_pos in range(len(reps)):
            for cand in range(n):
                if cand in rep_set:
                    continue
                trial = reps[:out_pos] + [cand] + reps[out_pos + 1:]
                q = quality_of(trial)
                if q < best_q:
                    best_q = q
                    best_swap = (out_pos, cand)
        if best_swap is not None:
            out_pos, cand = best_swap
            reps[out_pos] = cand
            reps.sort()
            current = best_q
            improved = True

    assign: list[int] = []
    for i in range(n):
        col = div[i, reps]
        if np.min(col) == np.inf:
            # no finite divergence anywhere: attach to the rep sharing the most support
            overlaps = [int(np.count_nonzero((tables[i] > 0) & (tables[r] > 0))) for r in reps]
            j = int(np.argmax(overlaps))
        else:
            j = int(np.argmin(col))
        assign.append(j)
    quality = float(np.max([div[i, reps[assign[i]]] for i in range(n)]))
    return reps, assign, quality


def prune(
    members: Sequence[LabeledFactor],
    cap: int | None,
    *,
    dominance: bool = True,
    convexity: bool = False,
    convexity_limit: int = 64,
) -> NodeSet:
    """Reduce a node's member set to at most cap members, preserving soundness.

    Stages: weak-dominance filter (bounds folded into survivors), optional convex
    combination filter, then divergence clustering down to cap with representative
    bounds raised to the cluster maximum. cap=None skips clustering entirely.
    """
    raw_count = len(members)
    if raw_count == 0:
        raise ValueError("a node produced no members")
    work, scale, scope = _align_members(members)
    if dominance:
        work = _dominance_filter(work)
    if convexity:
        work = _convexity_filter(work, convexity_limit)
    quality = 1.0
    if cap is not None and len(work) > cap:
        tables = [w.value for w in work]
        reps, assign, quality = greedy_cluster(tables, cap)
        for i, w in enumerate(work):
            rep = work[reps[assign[i]]]
            if rep is not w:
                np.maximum(rep.bound, w.bound, out=rep.bound)
        work = [work[r] for r in reps]
    out = tuple(
        LabeledFactor(Factor(scope, w.value), Factor(scope, w.bound), w.trace, scale)
        for w in work
    )
    return NodeSet(out, quality, raw_count)


def _merge_traces(parts: Sequence[dict[int, int]]) -> dict[int, int]:
    out: dict[int, int] = {}
    for p in parts:
        for v, s in p.items():
            if v in out and out[v] != s:
                raise TraceCollisionError(
                    f"decision variable {v} committed to both {out[v]} and {s}"
                )
            out[v] = s
    return out


def factor_set_elimination(
    tree: CliqueTree,
    family: FactorSetFamily,
    caps: Sequence[int] | None = None,
    *,
    dominance: bool = True,
    convexity: bool = False,
    convexity_limit: int = 64,
    should_stop: Callable[[], bool] | None = None,
    memory_cap: int | None = None,
) -> PropagationResult:
    """One full bottom-up propagation of candidate sets under per-node caps.

    caps[i] limits the surviving member count at node i (None means unlimited
    everywhere). The root is never clustered and never convexity-filtered: its members
    are scalars, so dominance alone already collapses it to the single best survivor
    while folding every bound. Raises StepInterrupted when should_stop fires between
    nodes and MemoryBudgetExceeded when live member tables outgrow memory_cap bytes.
    """
    if caps is not None and len(caps) != len(tree.nodes):
        raise ValueError("caps must give one entry per tree node")
    cards = family.cards
    # decision variables are maximized, not summed, when they leave a scope: value
    # tables always carry an indicator clamp (max == the clamped slice), while folded
    # bound tables may have lost theirs, and summing those would loosen the bound
    max_vars = frozenset(family.decisions)
    node_sets: dict[int, NodeSet] = {}
    live_bytes = 0
    stats: dict[int, NodeStat] = {}

    for i in tree.postorder():
        if should_stop is not None and should_stop():
            raise StepInterrupted()
        node = tree.nodes[i]
        local_sets = [family.sets[s] for s in node.assigned_sets]
        child_ids = sorted(node.children)
        child_sets = [node_sets[c] for c in child_ids]
        sep = tree.separator(i)
        combo_bound = 1
        for s in local_sets:
            combo_bound *= len(s)
        for c, ns in zip(child_ids, child_sets):
            combo_bound *= (len(ns.members) if caps is None else min(len(ns.members), caps[c]))

        members: list[LabeledFactor] = []
        ranges = [range(len(s)) for s in local_sets] + [range(len(ns.members)) for ns in child_sets]
        for combo in itertools.product(*ranges):
            local_choice = combo[: len(local_sets)]
            child_choice = combo[len(local_sets):]
            parts = [s.factors[idx] for s, idx in zip(local_sets, local_choice)]
            traces = [
                {s.decision_var: idx}
                for s, idx in zip(local_sets, local_choice)
                if s.decision_var is not None
            ]
            scale = 0
            bound_parts = list(parts)
            for ns, idx in zip(child_sets, child_choice):
                m = ns.members[idx]
                parts.append(m.value)
                bound_parts.append(m.bound)
                traces.append(m.trace)
                scale += m.scale
            value = reduce_to_separator(product_all(parts), node.index_set, sep, cards, max_vars)
            bound = reduce_to_separator(product_all(bound_parts), node.index_set, sep, cards, max_vars)
            btab, e = renormalize(bound.table)
            vtab = np.ldexp(value.table, -e) if e else value.table
            members.append(
                LabeledFactor(
                    Factor(value.scope, vtab),
                    Factor(bound.scope, btab),
                    _merge_traces(traces),
                    scale + e,
                )
            )
        if len(members) > combo_bound:
            raise AssertionError(
                f"node {i} built {len(members)} members, over its cap product {combo_bound}"
            )
        if memory_cap is not None:
            new_bytes = sum(m.value.table.nbytes + m.bound.table.nbytes for m in members)
            if live_bytes + new_bytes > memory_cap:
                raise MemoryBudgetExceeded(
                    f"live tables would reach {live_bytes + new_bytes} bytes at node {i}"
                )

        is_root = i == tree.root
        cap_i = None if (is_root or caps is None) else caps[i]
        pruned = prune(
            members,
            cap_i,
            dominance=dominance,
            convexity=convexity and not is_root,
            convexity_limit=convexity_limit,
        )
        node_sets[i] = pruned
        stats[i] = NodeStat(pruned.raw_count, len(pruned.members), pruned.quality, combo_bound)
        if memory_cap is not None:
            live_bytes += sum(m.value.table.nbytes + m.bound.table.nbytes for m in pruned.members)
            for c in child_ids:
                live_bytes -= sum(
                    m.value.table.nbytes + m.bound.table.nbytes for m in node_sets[c].members
                )
        for c in child_ids:
            del node_sets[c]

    root_set = node_sets[tree.root]
    best = max(root_set.members, key=lambda m: float(m.value.table.item()))
    z_lower = Scaled(float(best.value.table.item()), best.scale).normalized()
    z_upper_val = max(float(m.bound.table.item()) for m in root_set.members)
    z_upper = Scaled(z_upper_val, root_set.members[0].scale).normalized()
    missing = set(family.decisions) - set(best.trace)
    if missing:
        raise IncompleteTraceError(f"best combination never fixed decisions {sorted(missing)}")
    per_node_quality = tuple(stats[i].quality for i in range(len(tree.nodes)))
    node_stats = tuple(stats[i] for i in range(len(tree.nodes)))
    return PropagationResult(z_lower, z_upper, dict(best.trace), per_node_quality, node_stats)


def extract_assignment(result: PropagationResult) -> dict[int, int]:
    """Decision assignment behind the lower bound of a propagation."""
    return dict(result.best_trace)
