"""Clique trees over the model's interaction graph.

The interaction graph joins all variables that share a factor scope. A greedy min-fill
order triangulates it; elimination cliques (with non-maximal ones absorbed) become tree
nodes, joined by a maximum-separator spanning tree so the running-intersection property
holds. Each candidate factor set is assigned to the first node whose index set covers
its scope.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from .factors import VariableId
from .model import FactorSetFamily, GraphicalModel


def _interaction_adj(n_vars: int, scopes) -> dict[int, set[int]]:
    adj: dict[int, set[int]] = {v: set() for v in range(n_vars)}
    for vs in scopes:
        for i, a in enumerate(vs):
            for b in vs[i + 1:]:
                adj[a].add(b)
                adj[b].add(a)
    return adj


def min_fill_order(model: GraphicalModel, decisions: frozenset[VariableId] = frozenset()) -> list[VariableId]:
    """Greedy elimination order minimizing fill-in edges.

    Each round first flushes every currently zero-fill (simplicial) vertex in ascending
    id: removing one such vertex can only shrink other neighborhoods, so the whole batch
    stays fill-free. Remaining rounds pick the vertex minimizing (fill edges, resulting
    clique size, id). Decision variables get no special treatment here; the argument
    only documents which query produced the graph.
    """
    adj = _interaction_adj(model.n_vars, (f.vars for f in model.factors))

    def fill_count(v: int) -> int:
        nbrs = list(adj[v])
        missing = 0
        for i, a in enumerate(nbrs):
            for b in nbrs[i + 1:]:
                if b not in adj[a]:
                    missing += 1
        return missing

    def eliminate(v: int):
        nbrs = list(adj[v])
        for i, a in enumerate(nbrs):
            for b in nbrs[i + 1:]:
                adj[a].add(b)
                adj[b].add(a)
        for a in nbrs:
            adj[a].discard(v)
        del adj[v]

    order: list[int] = []
    while adj:
        fills = {v: fill_count(v) for v in adj}
        zero = sorted(v for v, c in fills.items() if c == 0)
        if zero:
            for v in zero:
                eliminate(v)
            order.extend(zero)
            continue
        best = min(adj, key=lambda v: (fills[v], len(adj[v]) + 1, v))
        eliminate(best)
        order.append(best)
    return order


@dataclass(frozen=True)
class CliqueNode:
    index_set: frozenset[VariableId]
    assigned_sets: tuple[int, ...]
    parent: int | None
    children: tuple[int, ...]


@dataclass(frozen=True)
class CliqueTree:
    """Rooted clique tree; node ids index into `nodes`."""

    nodes: tuple[CliqueNode, ...]
    root: int

    def separator(self, i: int) -> frozenset[VariableId]:
        node = self.nodes[i]
        if node.parent is None:
            return frozenset()
        return node.index_set & self.nodes[node.parent].index_set

    def width(self) -> int:
        return max(len(n.index_set) for n in self.nodes) - 1

    def postorder(self) -> list[int]:
        """Children before parents; children visited in ascending id."""
        out: list[int] = []
        stack = [(self.root, False)]
        while stack:
            i, expanded = stack.pop()
            if expanded:
                out.append(i)
            else:
                stack.append((i, True))
                for c in sorted(self.nodes[i].children, reverse=True):
                    stack.append((c, False))
        return out

    def subtree_vars(self, i: int) -> frozenset[VariableId]:
        """Union of index sets over node i and its descendants."""
        acc: set[int] = set()
        stack = [i]
        while stack:
            j = stack.pop()
            acc |= self.nodes[j].index_set
            stack.extend(self.nodes[j].children)
        return frozenset(acc)

    def validate(self) -> None:
        """Structural checks: tree shape and running intersection."""
        n = len(self.nodes)
        seen = set()
        stack = [self.root]
        while stack:
            i = stack.pop()
            if i in seen:
                raise AssertionError("cycle in clique tree")
            seen.add(i)
            for c in self.nodes[i].children:
                if self.nodes[c].parent != i:
                    raise AssertionError(f"child {c} does not point back to parent {i}")
                stack.append(c)
        if seen != set(range(n)):
            raise AssertionError("clique tree is not connected")
        all_vars = set().union(*(n_.index_set for n_ in self.nodes))
        for v in all_vars:
            holders = [i for i, n_ in enumerate(self.nodes) if v in n_.index_set]
            # running intersection: holders induce a connected subtree
            hset = set(holders)
            comp = {holders[0]}
            frontier = [holders[0]]
            while frontier:
                i = frontier.pop()
                node = self.nodes[i]
                nbrs = list(node.children) + ([node.parent] if node.parent is not None else [])
                for j in nbrs:
                    if j in hset and j not in comp:
                        comp.add(j)
                        frontier.append(j)
            if comp != hset:
                raise AssertionError(f"variable {v} violates running intersection")


def _elimination_cliques(n_vars: int, scopes, order: Sequence[VariableId]) -> list[frozenset[int]]:
    adj = _interaction_adj(n_vars, scopes)
    cliques = []
    for v in order:
        nbrs = list(adj[v])
        cliques.append(frozenset([v] + nbrs))
        for i, a in enumerate(nbrs):
            for b in nbrs[i + 1:]:
                adj[a].add(b)
                adj[b].add(a)
        for a in nbrs:
            adj[a].discard(v)
        del adj[v]
    return cliques


def build_tree(order: Sequence[VariableId], family: FactorSetFamily) -> CliqueTree:
    """Clique tree from an elimination order, rooted at the decision-heaviest node.

    The interaction graph is derived from the family's factor scopes (indicator sets
    are unary, so they add no edges). Non-maximal elimination cliques are absorbed.
    Edges come from a maximum-weight spanning tree on separator sizes (deterministic
    tie order), which preserves running intersection; zero-weight edges stitch
    disconnected components into one tree.
    """
    n_vars = len(family.cards)
    if sorted(order) != list(range(n_vars)):
        raise ValueError("elimination order must be a permutation of all variables")
    scopes = [s.factors[0].vars for s in family.sets]
    cliques = _elimination_cliques(n_vars, scopes, order)
    maximal: list[tuple[int, frozenset[int]]] = []
    for idx, c in enumerate(cliques):
        if any(c <= m for _, m in maximal):
            continue
        maximal = [(i0, m) for i0, m in maximal if not (m < c)]
        maximal.append((idx, c))
    maximal.sort()  # creation order of the surviving maximal cliques
    maximal = [c for _, c in maximal]

    n = len(maximal)
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            edges.append((-len(maximal[i] & maximal[j]), i, j))
    edges.sort()
    parent_uf = list(range(n))

    def find(x):
        while parent_uf[x] != x:
            parent_uf[x] = parent_uf[parent_uf[x]]
            x = parent_uf[x]
        return x

    adj: dict[int, list[int]] = {i: [] for i in range(n)}
    for w, i, j in edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent_uf[ri] = rj
            adj[i].append(j)
            adj[j].append(i)

    assigned: dict[int, list[int]] = {i: [] for i in range(n)}
    for s_idx, fset in enumerate(family.sets):
        scope = set(fset.factors[0].vars)
        for i in range(n):
            if scope <= maximal[i]:
                assigned[i].append(s_idx)
                break
        else:
            raise AssertionError(f"no clique covers factor set {s_idx} with scope {sorted(scope)}")

    decisions = set(family.decisions)
    root = max(range(n), key=lambda i: (len(maximal[i] & decisions), -i))

    nodes = [
        CliqueNode(maximal[i], tuple(assigned[i]), None, ())
        for i in range(n)
    ]
    tree = CliqueTree(tuple(nodes), root)
    return _orient(tree, adj, root)


def _orient(tree: CliqueTree, adj: dict[int, list[int]], root: int) -> CliqueTree:
    parent: dict[int, int | None] = {root: None}
    children: dict[int, list[int]] = {i: [] for i in range(len(tree.nodes))}
    frontier = [root]
    seen = {root}
    while frontier:
        i = frontier.pop()
        for j in sorted(adj[i]):
            if j not in seen:
                seen.add(j)
                parent[j] = i
                children[i].append(j)
                frontier.append(j)
    nodes = tuple(
        replace(tree.nodes[i], parent=parent[i], children=tuple(sorted(children[i])))
        for i in range(len(tree.nodes))
    )
    return CliqueTree(nodes, root)


def _undirected_adj(tree: CliqueTree) -> dict[int, list[int]]:
    adj: dict[int, list[int]] = {i: [] for i in range(len(tree.nodes))}
    for i, node in enumerate(tree.nodes):
        if node.parent is not None:
            adj[i].append(node.parent)
            adj[node.parent].append(i)
    return adj


def root_at(tree: CliqueTree, r: int) -> CliqueTree:
    """Same tree re-oriented so r is the root."""
    if not (0 <= r < len(tree.nodes)):
        raise ValueError(f"no node {r}")
    return _orient(tree, _undirected_adj(tree), r)


def binarize(tree: CliqueTree, max_children: int = 2) -> CliqueTree:
    """Cap each node's child count by chaining surplus children under copy nodes.

    A copy node duplicates its parent's index set and carries no factor sets, so
    message semantics are unchanged; only the combination fan-in shrinks.
    """
    if max_children < 2:
        raise ValueError("max_children must be at least 2")
    nodes: list[CliqueNode] = list(tree.nodes)
    parent: dict[int, int | None] = {i: n.parent for i, n in enumerate(tree.nodes)}
    children: dict[int, list[int]] = {i: sorted(n.children) for i, n in enumerate(tree.nodes)}

    queue = list(range(len(nodes)))
    while queue:
        i = queue.pop(0)
        kids = children[i]
        if len(kids) <= max_children:
            continue
        keep = kids[: max_children - 1]
        rest = kids[max_children - 1:]
        copy_id = len(nodes)
        nodes.append(CliqueNode(nodes[i].index_set, (), None, ()))
        children[copy_id] = rest
        parent[copy_id] = i
        for c in rest:
            parent[c] = copy_id
        children[i] = keep + [copy_id]
        queue.append(copy_id)

    final = tuple(
        CliqueNode(nodes[i].index_set, nodes[i].assigned_sets, parent[i], tuple(sorted(children[i])))
        for i in range(len(nodes))
    )
    return CliqueTree(final, tree.root)
