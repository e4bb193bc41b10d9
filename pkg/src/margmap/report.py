"""Solve reports: JSON documents, CSV bound traces, and rendered bound figures."""

from __future__ import annotations

import csv
import json
import math
from typing import Iterable, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned before pyplot)

from .anytime import AnytimeResult, SolverConfig, TraceStep, gap
from .scaling import Scaled

_LOG10_2 = math.log10(2.0)


def scaled_payload(s: Scaled) -> dict:
    """Exact (mantissa, exp2) pair plus a best-effort plain double."""
    n = s.normalized()
    return {"mantissa": n.mantissa, "exp2": n.exponent, "value": _finite_or_none(n.to_float())}


def log10_of(s: Scaled) -> float:
    """log10 of a scaled value without leaving double range; -inf for zero."""
    n = s.normalized()
    if n.is_zero:
        return -math.inf
    return math.log10(n.mantissa) + n.exponent * _LOG10_2


def _finite_or_none(x: float):
    return x if math.isfinite(x) else None


def build_report(
    *,
    problem_info: dict,
    config: SolverConfig,
    result: AnytimeResult,
    elapsed: float,
    verification: dict | None = None,
) -> dict:
    doc = {
        "problem": problem_info,
        "config": {
            "k_init": config.k_init,
            "growth_increment": config.c,
            "growth": config.growth,
            "time_limit": config.time_limit,
            "memory_cap": config.memory_cap,
            "convexity": config.convexity,
            "convexity_limit": config.convexity_limit,
        },
        "status": result.status,
        "detail": result.detail,
        "steps": result.steps,
        "elapsed_seconds": elapsed,
        "lower_bound": scaled_payload(result.z_lower),
        "upper_bound": scaled_payload(result.z_upper),
        "bound_gap": _finite_or_none(result.z_upper.ratio_to(result.z_lower)),
        "assignment": [[v, s] for v, s in sorted(result.assignment.items())],
        "trace": [
            {
                "step": t.step,
                "wall_clock": t.wall_clock,
                "lower": scaled_payload(t.z_lower),
                "upper": scaled_payload(t.z_upper),
                "step_lower": scaled_payload(t.step_lower),
                "step_upper": scaled_payload(t.step_upper),
                "max_quality": _finite_or_none(t.max_quality),
                "gap": _finite_or_none(gap(t)),
            }
            for t in result.trace
        ],
    }
    if verification is not None:
        doc["verification"] = verification
    return doc


def dump_report(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


_TRACE_HEADER = [
    "step",
    "wall_clock",
    "lower_mantissa",
    "lower_exp2",
    "lower_value",
    "upper_mantissa",
    "upper_exp2",
    "upper_value",
    "step_lower_value",
    "step_upper_value",
    "gap",
    "max_quality",
]


def write_trace_csv(path, trace: Sequence[TraceStep]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_TRACE_HEADER)
        for t in trace:
            lo, up = t.z_lower.normalized(), t.z_upper.normalized()
            w.writerow(
                [
                    t.step,
                    f"{t.wall_clock:.6f}",
                    repr(lo.mantissa),
                    lo.exponent,
                    repr(lo.to_float()),
                    repr(up.mantissa),
                    up.exponent,
                    repr(up.to_float()),
                    repr(t.step_lower.to_float()),
                    repr(t.step_upper.to_float()),
                    repr(gap(t)),
                    repr(t.max_quality),
                ]
            )


def render_bounds_figure(path, trace: Sequence[TraceStep], title: str = "Bound convergence") -> None:
    """Upper/lower bound curves per refinement step, on a log10 value axis."""

    def safe(y: float) -> float:
        return y if math.isfinite(y) else math.nan

    steps = [t.step for t in trace]
    lo = [safe(log10_of(t.z_lower)) for t in trace]
    up = [safe(log10_of(t.z_upper)) for t in trace]
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.plot(steps, up, marker="v", color="tab:red", label="upper bound")
    ax.plot(steps, lo, marker="^", color="tab:blue", label="lower bound")
    ax.set_xlabel("refinement step")
    ax.set_ylabel("log10 bound value")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


_BENCH_HEADER = ["instance", "step", "wall_clock", "lower_value", "upper_value", "gap", "status"]


def write_bench_csv(path, rows: Iterable[dict]) -> None:
    """Combined per-step trace of a whole benchmark run, one block per instance."""
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=_BENCH_HEADER)
        w.writeheader()
        for row in rows:
            w.writerow(row)
