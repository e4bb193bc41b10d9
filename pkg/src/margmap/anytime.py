"""Anytime outer loop: repeated bounded propagations under growing member caps.

Each pass over the clique tree yields a feasible decision assignment (a lower bound on
the optimum) and a sound upper bound. Between passes the per-node member caps grow, so
the bounds tighten; the loop stops when they meet, when a time or memory budget runs
out, or when the caller interrupts.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

from .cliquetree import CliqueTree, binarize, build_tree, min_fill_order
from .model import FactorSetFamily, MmapProblem, build_factor_sets
from .propagation import (
    MemoryBudgetExceeded,
    PropagationResult,
    StepInterrupted,
    factor_set_elimination,
)
from .scaling import Scaled

_REL_TOL = 1e-12


class BudgetExhaustedError(RuntimeError):
    """The very first propagation could not finish, so no bounds exist at all."""

    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(reason)


@dataclass(frozen=True)
class SolverConfig:
    k_init: int = 1
    c: int = 2
    growth: str = "worst"  # "worst" grows the lowest-quality node, "all" grows every node
    time_limit: float | None = None
    memory_cap: int | None = None
    convexity: bool = False
    convexity_limit: int = 64

    def __post_init__(self):
        if self.k_init < 1:
            raise ValueError("k_init must be at least 1")
        if self.c < 1:
            raise ValueError("growth increment must be at least 1")
        if self.growth not in ("worst", "all"):
            raise ValueError(f"unknown growth policy {self.growth!r}")
        if self.time_limit is not None and self.time_limit < 0:
            raise ValueError("time limit must be non-negative")
        if self.memory_cap is not None and self.memory_cap <= 0:
            raise ValueError("memory cap must be positive")


@dataclass(frozen=True)
class TraceStep:
    """Bounds after one completed propagation.

    z_lower / z_upper fold the best bounds seen so far; step_lower / step_upper are the
    raw bounds of this pass alone (each pass is sound on its own). `assignment` is the
    decision assignment behind step_lower, so every reported lower bound can be
    re-checked by exact evaluation.
    """

    step: int
    wall_clock: float
    z_lower: Scaled
    z_upper: Scaled
    step_lower: Scaled
    step_upper: Scaled
    caps: tuple[int, ...]
    max_quality: float
    assignment: dict[int, int]


@dataclass(frozen=True)
class AnytimeResult:
    assignment: dict[int, int]
    z_lower: Scaled
    z_upper: Scaled
    trace: tuple[TraceStep, ...]
    status: str  # "converged" or "interrupted"
    detail: str

    @property
    def steps(self) -> int:
        return len(self.trace)


def gap(step: TraceStep) -> float:
    """Multiplicative bound gap of a trace step: 1.0 at convergence, may be inf."""
    return step.z_upper.ratio_to(step.z_lower)


def _converged(lower: Scaled, upper: Scaled) -> bool:
    if upper.is_zero:
        return True
    slack = Scaled(upper.mantissa * (1.0 - _REL_TOL), upper.exponent).normalized()
    return not (lower < slack)


def prepare_inputs(problem: MmapProblem, max_children: int = 2) -> tuple[CliqueTree, FactorSetFamily]:
    """Candidate sets plus a rooted, binarized clique tree for a problem."""
    family = build_factor_sets(problem)
    order = min_fill_order(problem.model, frozenset(problem.decisions))
    tree = build_tree(order, family)
    return binarize(tree, max_children), family


def _grow(caps: list[int], result: PropagationResult, config: SolverConfig) -> None:
    if config.growth == "all":
        for i in range(len(caps)):
            caps[i] += config.c
        return
    qualities = result.per_node_quality
    worst = max(range(len(caps)), key=lambda i: (qualities[i], -i))
    if qualities[worst] <= 1.0:
        # nothing was clustered yet the bounds still disagree (convexity folds can do
        # this); grow everywhere so the loop is guaranteed to make progress
        for i in range(len(caps)):
            caps[i] += config.c
        return
    caps[worst] += config.c


def anytime_inference(
    tree: CliqueTree,
    family: FactorSetFamily,
    config: SolverConfig | None = None,
    interrupt: Callable[[], bool] | None = None,
    sink: Callable[[TraceStep], None] | None = None,
) -> AnytimeResult:
    """Tighten lower and upper bounds on the best decision value until they meet.

    The time limit is only consulted once the first pass has finished, so even
    time_limit=0 reports the cheapest bounds. An interrupt or memory blow-up during
    the first pass raises BudgetExhaustedError: there is nothing to report yet.
    `sink` receives each TraceStep as soon as it exists (for live progress output).
    """
    config = config or SolverConfig()
    caps = [config.k_init] * len(tree.nodes)
    start = time.perf_counter()

    best_lower: Scaled | None = None
    best_upper: Scaled | None = None
    best_assignment: dict[int, int] = {}
    trace: list[TraceStep] = []
    status = "interrupted"
    detail = ""

    step = 0
    while True:

        def stop() -> bool:
            if interrupt is not None and interrupt():
                return True
            if step > 0 and config.time_limit is not None:
                return time.perf_counter() - start >= config.time_limit
            return False

        watched = interrupt is not None or config.time_limit is not None
        try:
            result = factor_set_elimination(
                tree,
                family,
                caps,
                dominance=True,
                convexity=config.convexity,
                convexity_limit=config.convexity_limit,
                should_stop=stop if watched else None,
                memory_cap=config.memory_cap,
            )
        except StepInterrupted:
            if step == 0:
                raise BudgetExhaustedError(
                    "interrupted before the first bounds were available"
                ) from None
            detail = "interrupted mid-pass; bounds are from the last completed pass"
            break
        except MemoryBudgetExceeded as exc:
            if step == 0:
                raise BudgetExhaustedError(
                    f"memory budget too small for any propagation: {exc}"
                ) from None
            detail = f"memory budget reached: {exc}"
            break

        if best_lower is None or best_lower < result.z_lower:
            best_lower = result.z_lower
            best_assignment = dict(result.best_trace)
        if best_upper is None or result.z_upper < best_upper:
            best_upper = result.z_upper
        entry = TraceStep(
            step=step,
            wall_clock=time.perf_counter() - start,
            z_lower=best_lower,
            z_upper=best_upper,
            step_lower=result.z_lower,
            step_upper=result.z_upper,
            caps=tuple(caps),
            max_quality=max(result.per_node_quality),
            assignment=dict(result.best_trace),
        )
        trace.append(entry)
        if sink is not None:
            sink(entry)

        if _converged(best_lower, best_upper):
            status = "converged"
            detail = ""
            break
        if interrupt is not None and interrupt():
            detail = "interrupt requested"
            break
        if config.time_limit is not None and time.perf_counter() - start >= config.time_limit:
            detail = "time limit reached"
            break
        _grow(caps, result, config)
        step += 1

    assert best_lower is not None and best_upper is not None
    return AnytimeResult(
        assignment=best_assignment,
        z_lower=best_lower,
        z_upper=best_upper,
        trace=tuple(trace),
        status=status,
        detail=detail,
    )
