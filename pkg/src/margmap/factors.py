"""Dense non-negative factors over discrete variables.

A factor holds an ordered scope (variable ids with their cardinalities) and a dense
table stored as a numpy array of shape == cardinalities in C order. The flat view is
therefore row-major with the *last* scope variable varying fastest, which is also the
table convention of the UAI text format.

All tables are non-negative and finite; magnitude control is the caller's job (see
scaling.Scaled and the per-message exponents in elimination/propagation). Factors are
immutable: every operation returns a new factor and the underlying arrays are marked
read-only, so factors can be shared freely across threads.
"""

from __future__ import annotations

from typing import Iterable, NamedTuple, Sequence

import numpy as np

VariableId = int


class Scope(NamedTuple):
    """Ordered variable ids with aligned cardinalities."""

    vars: tuple[VariableId, ...]
    cards: tuple[int, ...]

    def n_configs(self) -> int:
        n = 1
        for c in self.cards:
            n *= c
        return n

    def card_of(self, v: VariableId) -> int:
        return self.cards[self.vars.index(v)]


class Factor:
    """Immutable dense table over a Scope."""

    __slots__ = ("scope", "table")

    def __init__(self, scope: Scope, table: np.ndarray):
        vars_, cards = scope
        if len(vars_) != len(cards):
            raise ValueError("scope vars and cards length mismatch")
        if len(set(vars_)) != len(vars_):
            raise ValueError(f"duplicate variable in scope {vars_}")
        if any(c < 1 for c in cards):
            raise ValueError(f"cardinalities must be positive, got {cards}")
        table = np.asarray(table, dtype=np.float64)
        if table.shape != tuple(cards):
            if table.size == scope.n_configs():
                table = table.reshape(tuple(cards))
            else:
                raise ValueError(
                    f"table has {table.size} entries, scope {vars_} with cards {cards} "
                    f"needs {scope.n_configs()}"
                )
        if not np.all(np.isfinite(table)):
            raise ValueError("table entries must be finite")
        if table.size and float(table.min()) < 0.0:
            raise ValueError("table entries must be non-negative")
        table = np.ascontiguousarray(table)
        table.flags.writeable = False
        self.scope = Scope(tuple(vars_), tuple(cards))
        self.table = table

    # -- constructors -------------------------------------------------------

    @staticmethod
    def unit() -> "Factor":
        """Zero-ary factor with the single entry 1 (multiplicative identity)."""
        return Factor(Scope((), ()), np.array(1.0))

    @staticmethod
    def ones(vars_: Sequence[VariableId], cards: Sequence[int]) -> "Factor":
        return Factor(Scope(tuple(vars_), tuple(cards)), np.ones(tuple(cards)))

    # -- basic views ---------------------------------------------------------

    @property
    def vars(self) -> tuple[VariableId, ...]:
        return self.scope.vars

    @property
    def cards(self) -> tuple[int, ...]:
        return self.scope.cards

    def flat(self) -> np.ndarray:
        """Row-major table, last scope variable fastest."""
        return self.table.reshape(-1)

    def __repr__(self):
        return f"Factor(vars={self.vars}, cards={self.cards})"

    def transpose_to(self, order: Sequence[VariableId]) -> "Factor":
        """Same factor with scope reordered to `order` (a permutation of vars)."""
        order = tuple(order)
        if sorted(order) != sorted(self.vars):
            raise ValueError(f"{order} is not a permutation of {self.vars}")
        if order == self.vars:
            return self
        perm = tuple(self.vars.index(v) for v in order)
        cards = tuple(self.cards[p] for p in perm)
        return Factor(Scope(order, cards), np.transpose(self.table, perm))


def indicator(var: VariableId, state: int, card: int) -> Factor:
    """Unary 0/1 factor selecting one state of a variable."""
    if not (0 <= state < card):
        raise ValueError(f"state {state} out of range for cardinality {card}")
    t = np.zeros(card)
    t[state] = 1.0
    return Factor(Scope((var,), (card,)), t)


def _broadcast_shape(f: Factor, out_vars: tuple[VariableId, ...]) -> np.ndarray:
    """View of f.table transposed/reshaped so it broadcasts over out_vars' axes."""
    pos = {v: i for i, v in enumerate(out_vars)}
    axes = sorted(range(len(f.vars)), key=lambda i: pos[f.vars[i]])
    t = np.transpose(f.table, axes) if axes != list(range(len(f.vars))) else f.table
    shape = [1] * len(out_vars)
    for i in axes:
        shape[pos[f.vars[i]]] = f.cards[i]
    return t.reshape(shape)


def product(a: Factor, b: Factor) -> Factor:
    """Pointwise product; result scope is the ordered union (a's vars then b's new ones)."""
    cards = {}
    for v, c in zip(a.vars, a.cards):
        cards[v] = c
    for v, c in zip(b.vars, b.cards):
        if v in cards and cards[v] != c:
            raise ValueError(f"variable {v} has cardinality {cards[v]} vs {c}")
        cards[v] = c
    out_vars = a.vars + tuple(v for v in b.vars if v not in a.vars)
    out_cards = tuple(cards[v] for v in out_vars)
    table = _broadcast_shape(a, out_vars) * _broadcast_shape(b, out_vars)
    return Factor(Scope(out_vars, out_cards), np.broadcast_to(table, out_cards).copy())


def product_all(factors: Iterable[Factor]) -> Factor:
    out = Factor.unit()
    for f in factors:
        out = product(out, f)
    return out


def _drop_axes(f: Factor, drop: Iterable[VariableId]) -> tuple[tuple[int, ...], Scope]:
    drop = set(drop)
    missing = drop - set(f.vars)
    if missing:
        raise ValueError(f"cannot marginalize variables {sorted(missing)} absent from scope {f.vars}")
    axes = tuple(i for i, v in enumerate(f.vars) if v in drop)
    keep_vars = tuple(v for v in f.vars if v not in drop)
    keep_cards = tuple(c for v, c in zip(f.vars, f.cards) if v not in drop)
    return axes, Scope(keep_vars, keep_cards)


def sum_marginalize(f: Factor, drop: Iterable[VariableId]) -> Factor:
    """Sum the table over the dropped variables; scope order of the rest is kept."""
    axes, scope = _drop_axes(f, drop)
    if not axes:
        return f
    return Factor(scope, np.sum(f.table, axis=axes))


def max_marginalize(f: Factor, drop: Iterable[VariableId]) -> Factor:
    """Maximize the table over the dropped variables; scope order of the rest is kept."""
    axes, scope = _drop_axes(f, drop)
    if not axes:
        return f
    return Factor(scope, np.max(f.table, axis=axes))


def restrict(f: Factor, var: VariableId, state: int) -> Factor:
    """Slice the table at var=state and drop var from the scope."""
    if var not in f.vars:
        raise ValueError(f"variable {var} not in scope {f.vars}")
    i = f.vars.index(var)
    if not (0 <= state < f.cards[i]):
        raise ValueError(f"state {state} out of range for variable {var} (card {f.cards[i]})")
    idx = [slice(None)] * len(f.vars)
    idx[i] = state
    keep_vars = f.vars[:i] + f.vars[i + 1:]
    keep_cards = f.cards[:i] + f.cards[i + 1:]
    return Factor(Scope(keep_vars, keep_cards), f.table[tuple(idx)])


def _aligned_pair(a: Factor, b: Factor) -> tuple[np.ndarray, np.ndarray]:
    if set(a.vars) != set(b.vars):
        raise ValueError(f"scope mismatch: {a.vars} vs {b.vars}")
    b = b.transpose_to(a.vars)
    if a.cards != b.cards:
        raise ValueError(f"cardinality mismatch: {a.cards} vs {b.cards}")
    return a.table, b.table


def pointwise_max(a: Factor, b: Factor) -> Factor:
    """Entrywise max of two factors over identical scopes."""
    ta, tb = _aligned_pair(a, b)
    return Factor(a.scope, np.maximum(ta, tb))


def dominates(a: Factor, b: Factor) -> bool:
    """True when a >= b entrywise (weak dominance; equal factors dominate each other)."""
    ta, tb = _aligned_pair(a, b)
    return bool(np.all(ta >= tb))


def divergence_tables(ta: np.ndarray, tb: np.ndarray) -> float:
    """max over entries of ta/tb with 0/0 -> 1 and positive/0 -> +inf."""
    if ta.size == 0:
        return 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        r = ta / tb
    # 0/0 gives nan -> ratio 1 by convention; x/0 for x>0 gives +inf already.
    r = np.where(np.isnan(r), 1.0, r)
    return float(np.max(r))


def divergence(a: Factor, b: Factor) -> float:
    """Worst-case multiplicative gap max_x a(x)/b(x); 0/0 counts as 1, pos/0 as +inf."""
    ta, tb = _aligned_pair(a, b)
    return divergence_tables(ta, tb)
