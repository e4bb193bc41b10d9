"""Anytime marginal MAP bounds for discrete graphical models.

The solver walks a clique tree carrying *sets* of candidate messages instead of single
messages: decision variables contribute one candidate per state, and pruning the sets
to a size budget yields a feasible lower bound plus a sound upper bound on the best
decision value. Growing the budget tightens both until they meet.
"""

from .anytime import (
    AnytimeResult,
    BudgetExhaustedError,
    SolverConfig,
    TraceStep,
    anytime_inference,
    gap,
    prepare_inputs,
)
from .cliquetree import (
    CliqueNode,
    CliqueTree,
    binarize,
    build_tree,
    min_fill_order,
    root_at,
)
from .elimination import (
    evaluate_assignment,
    factor_elimination,
    factor_max_elimination,
    reduce_to_separator,
)
from .factors import (
    Factor,
    Scope,
    divergence,
    dominates,
    indicator,
    max_marginalize,
    pointwise_max,
    product,
    product_all,
    restrict,
    sum_marginalize,
)
from .generators import GeneratorError, gen_grid, gen_knapsack, knapsack_optimum
from .model import (
    FactorSet,
    FactorSetFamily,
    GraphicalModel,
    MmapProblem,
    QueryFormatError,
    UaiFormatError,
    assignment_value,
    build_factor_sets,
    dump_query,
    dump_uai,
    load_evidence,
    load_query,
    load_uai,
)
from .oracle import OracleCapError, brute_force_mmap, brute_force_partition
from .propagation import (
    LabeledFactor,
    MemoryBudgetExceeded,
    NodeSet,
    PropagationResult,
    StepInterrupted,
    TraceCollisionError,
    extract_assignment,
    factor_set_elimination,
    greedy_cluster,
    prune,
)
from .scaling import Scaled, scaled_max, scaled_product

__version__ = "0.1.0"

__all__ = [
    "AnytimeResult",
    "BudgetExhaustedError",
    "CliqueNode",
    "CliqueTree",
    "Factor",
    "FactorSet",
    "FactorSetFamily",
    "GeneratorError",
    "GraphicalModel",
    "LabeledFactor",
    "MemoryBudgetExceeded",
    "MmapProblem",
    "NodeSet",
    "OracleCapError",
    "PropagationResult",
    "QueryFormatError",
    "Scaled",
    "Scope",
    "SolverConfig",
    "StepInterrupted",
    "TraceCollisionError",
    "TraceStep",
    "UaiFormatError",
    "anytime_inference",
    "assignment_value",
    "binarize",
    "brute_force_mmap",
    "brute_force_partition",
    "build_factor_sets",
    "build_tree",
    "divergence",
    "dominates",
    "dump_query",
    "dump_uai",
    "evaluate_assignment",
    "extract_assignment",
    "factor_elimination",
    "factor_max_elimination",
    "factor_set_elimination",
    "gap",
    "gen_grid",
    "gen_knapsack",
    "greedy_cluster",
    "indicator",
    "knapsack_optimum",
    "load_evidence",
    "load_query",
    "load_uai",
    "max_marginalize",
    "min_fill_order",
    "pointwise_max",
    "prepare_inputs",
    "product",
    "product_all",
    "prune",
    "reduce_to_separator",
    "restrict",
    "root_at",
    "scaled_max",
    "scaled_product",
    "sum_marginalize",
]
