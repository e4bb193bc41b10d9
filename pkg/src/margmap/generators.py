"""Random benchmark instances: decision grids and multi-bag packing chains."""

from __future__ import annotations

import math

import numpy as np

from .factors import Factor, Scope
from .model import GraphicalModel, MmapProblem
from .oracle import OracleCapError
from .scaling import Scaled


class GeneratorError(ValueError):
    pass


def _positive_table(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    # 1 - U[0,1) lands in (0, 1]: strictly positive tables keep divergences finite
    return 1.0 - rng.random(shape)


def gen_grid(
    rows: int, cols: int, planes: int = 1, states: int = 2, seed: int = 0
) -> tuple[MmapProblem, dict]:
    """Random positive grid with decisions on the border (or on a second plane).

    planes=1: one rows x cols lattice of `states`-ary variables with unary factors on
    every cell and pairwise factors on every horizontal and vertical edge; the border
    cells are the decision variables. planes=2 (requires states=4): the lattice keeps
    its unary and edge factors, and every cell is tied to its own quaternary decision
    variable on a second plane through a pairwise factor.
    """
    if rows < 1 or cols < 1:
        raise GeneratorError("grid needs at least one row and one column")
    if states < 2:
        raise GeneratorError("grid variables need at least two states")
    if planes not in (1, 2):
        raise GeneratorError("planes must be 1 or 2")
    if planes == 2 and states != 4:
        raise GeneratorError("the two-plane variant is defined for exactly four states")

    rng = np.random.default_rng(seed)
    n_cells = rows * cols
    n_vars = n_cells * planes
    cards = tuple([states] * n_vars)

    def cell(r: int, c: int) -> int:
        return r * cols + c

    factors: list[Factor] = []
    for v in range(n_cells):
        factors.append(Factor(Scope((v,), (states,)), _positive_table(rng, (states,))))
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                sc = Scope((cell(r, c), cell(r, c + 1)), (states, states))
                factors.append(Factor(sc, _positive_table(rng, (states, states))))
            if r + 1 < rows:
                sc = Scope((cell(r, c), cell(r + 1, c)), (states, states))
                factors.append(Factor(sc, _positive_table(rng, (states, states))))

    if planes == 1:
        decisions = tuple(
            v for v in range(n_cells)
            if v // cols in (0, rows - 1) or v % cols in (0, cols - 1)
        )
    else:
        for v in range(n_cells):
            sc = Scope((v, n_cells + v), (states, states))
            factors.append(Factor(sc, _positive_table(rng, (states, states))))
        decisions = tuple(range(n_cells, 2 * n_cells))

    model = GraphicalModel(n_vars, cards, tuple(factors))
    problem = MmapProblem(model, decisions)
    meta = {
        "kind": "grid",
        "rows": rows,
        "cols": cols,
        "planes": planes,
        "states": states,
        "seed": seed,
        "n_vars": n_vars,
        "decision_vars": list(decisions),
    }
    return problem, meta


def _decode_loads(n_load: int, bags: int, per_bag: int) -> np.ndarray:
    codes = np.arange(n_load)
    return (codes[:, None] // per_bag ** np.arange(bags)[None, :]) % per_bag


def gen_knapsack(
    bags: int, items: int, seed: int = 0, capacity: int | None = None
) -> tuple[MmapProblem, dict]:
    """Multi-bag packing as a deterministic chain model.

    Item i gets a decision variable with states {0 = leave out, b = put in bag b}. A
    chain of load-tracking variables carries the per-bag loads left to right; each
    transition factor emits 2**(profit_i / 8) when item i is packed, 1 when skipped,
    and 0 whenever a bag would overflow. The value of a full decision assignment is
    therefore 2**(total profit / 8) when feasible and 0 otherwise.

    Weights are uniform on {1,2,3}, profits uniform on {1..20}, and the shared bag
    capacity defaults to half the total weight split across bags, clamped to 4 so the
    load state space stays tractable.
    """
    if bags < 1 or items < 1:
        raise GeneratorError("need at least one bag and one item")
    rng = np.random.default_rng(seed)
    weights = rng.integers(1, 4, size=items)
    profits = rng.integers(1, 21, size=items)
    if capacity is None:
        capacity = min(math.ceil(0.5 * int(weights.sum()) / bags), 4)
    if capacity < 1:
        raise GeneratorError("capacity must be at least 1")

    per_bag = capacity + 1
    n_load = per_bag ** bags
    d_card = bags + 1
    # ids: decisions 0..items-1, then start, load_1..load_items, end
    start = items
    loads_of = lambda i: items + i  # noqa: E731  (load variable after item i)
    end = 2 * items + 1
    cards = [d_card] * items + [1] + [n_load] * items + [1]

    loads = _decode_loads(n_load, bags, per_bag)
    powers = per_bag ** np.arange(bags)

    def transition(i: int) -> Factor:
        prev = start if i == 1 else loads_of(i - 1)
        prev_card = cards[prev]
        w, p = int(weights[i - 1]), int(profits[i - 1])
        gain = 2.0 ** (p / 8.0)
        t = np.zeros((prev_card, d_card, n_load))
        for lp in range(prev_card):
            base = loads[lp] if prev_card == n_load else np.zeros(bags, dtype=np.int64)
            t[lp, 0, int(base @ powers)] = 1.0
            for b in range(bags):
                if base[b] + w <= capacity:
                    t[lp, b + 1, int(base @ powers) + w * int(powers[b])] = gain
        sc = Scope((prev, i - 1, loads_of(i)), (prev_card, d_card, n_load))
        return Factor(sc, t)

    factors = [Factor(Scope((start,), (1,)), np.ones(1))]
    factors += [transition(i) for i in range(1, items + 1)]
    factors.append(
        Factor(Scope((loads_of(items), end), (n_load, 1)), np.ones((n_load, 1)))
    )

    model = GraphicalModel(len(cards), tuple(cards), tuple(factors))
    problem = MmapProblem(model, tuple(range(items)))
    meta = {
        "kind": "knapsack",
        "bags": bags,
        "items": items,
        "capacity": int(capacity),
        "weights": [int(w) for w in weights],
        "profits": [int(p) for p in profits],
        "seed": seed,
        "n_vars": len(cards),
        "decision_vars": list(range(items)),
    }
    return problem, meta


def knapsack_optimum(meta: dict, enumeration_cap: int = 1 << 21) -> tuple[int, tuple[dict[int, int], ...], Scaled]:
    """Best feasible profit by direct enumeration of every item-to-bag assignment.

    Independent of the chain encoding: works straight off the weight/profit lists.
    Returns (best profit, all optimal assignments keyed by decision variable, the
    model value 2**(profit/8) that the chain gives that profit).
    """
    bags, items, capacity = meta["bags"], meta["items"], meta["capacity"]
    weights = np.asarray(meta["weights"])
    profits = np.asarray(meta["profits"])
    dvars = meta["decision_vars"]
    n = (bags + 1) ** items
    if n > enumeration_cap:
        raise OracleCapError(f"{n} packing assignments exceed the cap {enumeration_cap}")
    codes = np.arange(n)
    digits = (codes[:, None] // (bags + 1) ** np.arange(items)[None, :]) % (bags + 1)
    feasible = np.ones(n, dtype=bool)
    for b in range(bags):
        feasible &= ((digits == b + 1) * weights[None, :]).sum(axis=1) <= capacity
    profit = np.where(feasible, ((digits >= 1) * profits[None, :]).sum(axis=1), -1)
    best = int(profit.max())
    idx = np.nonzero(profit == best)[0]
    assignments = tuple(
        {int(dvars[j]): int(digits[i, j]) for j in range(items)} for i in idx
    )
    value = Scaled(2.0 ** ((best % 8) / 8.0), best // 8).normalized()
    return best, assignments, value
