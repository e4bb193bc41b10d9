"""Graphical models, decision problems, and the UAI text formats.

Model files follow the UAI convention: a MARKOV/BAYES header, variable count,
cardinalities, factor count, one scope line per factor ("k v_1 ... v_k"), then each
table preceded by its entry count, entries row-major with the last scope variable
fastest. Whitespace is free-form and '#' starts a comment.

Query files carry the decision set on line one ("k i_1 ... i_k") and optional evidence
on line two ("e v_1 s_1 ... v_e s_e").
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .factors import Factor, Scope, VariableId, indicator
from .scaling import Scaled


class UaiFormatError(ValueError):
    """Malformed model file; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{where}")


class QueryFormatError(ValueError):
    """Malformed query or evidence file."""


@dataclass(frozen=True)
class GraphicalModel:
    """Non-negative factors over discrete variables 0..n_vars-1.

    Every variable is covered by at least one factor scope; loaders patch uncovered
    variables with all-ones unary factors so the invariant holds by construction.
    """

    n_vars: int
    cards: tuple[int, ...]
    factors: tuple[Factor, ...]

    def __post_init__(self):
        if self.n_vars < 1:
            raise ValueError("model needs at least one variable")
        if len(self.cards) != self.n_vars:
            raise ValueError("cards length != n_vars")
        covered = set()
        for i, f in enumerate(self.factors):
            for v, c in zip(f.vars, f.cards):
                if not (0 <= v < self.n_vars):
                    raise ValueError(f"factor {i} mentions unknown variable {v}")
                if c != self.cards[v]:
                    raise ValueError(
                        f"factor {i} gives variable {v} cardinality {c}, model says {self.cards[v]}"
                    )
                covered.add(v)
        missing = set(range(self.n_vars)) - covered
        if missing:
            raise ValueError(f"variables {sorted(missing)} appear in no factor scope")


@dataclass(frozen=True)
class MmapProblem:
    """A model split into decision, latent, and evidenced variables."""

    model: GraphicalModel
    decisions: tuple[VariableId, ...]
    evidence: dict[VariableId, int] = field(default_factory=dict)

    def __post_init__(self):
        n = self.model.n_vars
        object.__setattr__(self, "decisions", tuple(sorted(self.decisions)))
        seen = set(self.decisions)
        if len(seen) != len(self.decisions):
            raise ValueError("duplicate decision variable")
        for v in self.decisions:
            if not (0 <= v < n):
                raise ValueError(f"decision variable {v} out of range")
        for v, s in self.evidence.items():
            if not (0 <= v < n):
                raise ValueError(f"evidence variable {v} out of range")
            if v in seen:
                raise ValueError(f"variable {v} is both decided and evidenced")
            if not (0 <= s < self.model.cards[v]):
                raise ValueError(f"evidence state {s} out of range for variable {v}")

    @property
    def latents(self) -> tuple[VariableId, ...]:
        fixed = set(self.decisions) | set(self.evidence)
        return tuple(v for v in range(self.model.n_vars) if v not in fixed)


@dataclass(frozen=True)
class FactorSet:
    """One candidate set: alternatives for a single slot of the model.

    Model factors and evidence clamps are singletons; a decision variable contributes
    one indicator per state, with member index == state.
    """

    factors: tuple[Factor, ...]
    decision_var: VariableId | None = None

    def __len__(self):
        return len(self.factors)


@dataclass(frozen=True)
class FactorSetFamily:
    """All candidate sets of a problem in deterministic order."""

    sets: tuple[FactorSet, ...]
    decisions: tuple[VariableId, ...]
    cards: tuple[int, ...]

    def decision_set_index(self, var: VariableId) -> int:
        for i, s in enumerate(self.sets):
            if s.decision_var == var:
                return i
        raise KeyError(f"no decision set for variable {var}")


def build_factor_sets(problem: MmapProblem) -> FactorSetFamily:
    """Candidate sets: model factors (file order), evidence clamps, decision indicators.

    Evidence and decisions are both expressed as indicator factors so downstream
    propagation treats every set uniformly.
    """
    model = problem.model
    sets: list[FactorSet] = [FactorSet((f,)) for f in model.factors]
    for v in sorted(problem.evidence):
        sets.append(FactorSet((indicator(v, problem.evidence[v], model.cards[v]),)))
    for v in problem.decisions:
        members = tuple(indicator(v, s, model.cards[v]) for s in range(model.cards[v]))
        sets.append(FactorSet(members, decision_var=v))
    return FactorSetFamily(tuple(sets), problem.decisions, model.cards)


def assignment_value(problem: MmapProblem, d: dict[VariableId, int]) -> Scaled:
    """Exact value of one decision assignment, by clique-tree elimination."""
    from . import cliquetree, elimination  # local import: avoids a module cycle

    family = build_factor_sets(problem)
    order = cliquetree.min_fill_order(problem.model, frozenset(problem.decisions))
    tree = cliquetree.build_tree(order, family)
    return elimination.evaluate_assignment(tree, family, d)


# -- UAI text format ----------------------------------------------------------


def _tokens_with_lines(text: str):
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0]
        for tok in body.split():
            yield tok, lineno


class _TokenReader:
    def __init__(self, text: str):
        self._it = _tokens_with_lines(text)
        self.line = 0

    def next(self, what: str) -> str:
        try:
            tok, self.line = next(self._it)
        except StopIteration:
            raise UaiFormatError(f"unexpected end of file while reading {what}", self.line)
        return tok

    def next_int(self, what: str) -> int:
        tok = self.next(what)
        try:
            return int(tok)
        except ValueError:
            raise UaiFormatError(f"expected integer for {what}, got {tok!r}", self.line)

    def next_float(self, what: str) -> float:
        tok = self.next(what)
        try:
            return float(tok)
        except ValueError:
            raise UaiFormatError(f"expected number for {what}, got {tok!r}", self.line)

def _read_source(source) -> str:
    if hasattr(source, "read"):
        data = source.read()
    else:
        data = source
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return data


def load_uai(source) -> GraphicalModel:
    """Parse a model from text, bytes, or a file-like object.

    Variables no declared factor covers get an implicit all-ones unary factor appended,
    so the returned model always satisfies the coverage invariant.
    """
    r = _TokenReader(_read_source(source))
    header = r.next("header").upper()
    if header not in ("MARKOV", "BAYES"):
        raise UaiFormatError(f"expected MARKOV or BAYES header, got {header!r}", r.line)
    n = r.next_int("variable count")
    if n < 1:
        raise UaiFormatError("variable count must be positive", r.line)
    cards = tuple(r.next_int(f"cardinality of variable {i}") for i in range(n))
    for i, c in enumerate(cards):
        if c < 1:
            raise UaiFormatError(f"variable {i} has non-positive cardinality {c}")
    m = r.next_int("factor count")
    if m < 0:
        raise UaiFormatError("factor count must be non-negative", r.line)
    scopes: list[tuple[int, ...]] = []
    for j in range(m):
        k = r.next_int(f"scope size of factor {j}")
        if k < 0:
            raise UaiFormatError(f"factor {j} has negative scope size", r.line)
        vs = []
        for _ in range(k):
            v = r.next_int(f"scope of factor {j}")
            if not (0 <= v < n):
                raise UaiFormatError(f"factor {j} scope index {v} out of range", r.line)
            if v in vs:
                raise UaiFormatError(f"factor {j} repeats variable {v} in its scope", r.line)
            vs.append(v)
        scopes.append(tuple(vs))
    factors = []
    for j, vs in enumerate(scopes):
        declared = r.next_int(f"entry count of factor {j}")
        expected = 1
        for v in vs:
            expected *= cards[v]
        if declared != expected:
            raise UaiFormatError(
                f"factor {j} declares {declared} entries but its scope needs {expected}", r.line
            )
        entries = np.empty(expected)
        for t in range(expected):
            entries[t] = r.next_float(f"entry {t} of factor {j}")
        if np.any(entries < 0):
            raise UaiFormatError(f"factor {j} has negative entries", r.line)
        factors.append(Factor(Scope(vs, tuple(cards[v] for v in vs)), entries))
    covered = {v for f in factors for v in f.vars}
    for v in range(n):
        if v not in covered:
            factors.append(Factor.ones((v,), (cards[v],)))
    return GraphicalModel(n, cards, tuple(factors))


def dump_uai(model: GraphicalModel) -> str:
    """Render a model back to UAI text (inverse of load_uai, deterministic)."""
    out = io.StringIO()
    out.write("MARKOV\n")
    out.write(f"{model.n_vars}\n")
    out.write(" ".join(str(c) for c in model.cards) + "\n")
    out.write(f"{len(model.factors)}\n")
    for f in model.factors:
        out.write(" ".join([str(len(f.vars))] + [str(v) for v in f.vars]) + "\n")
    for f in model.factors:
        flat = f.flat()
        out.write(f"\n{flat.size}\n")
        out.write(" ".join(repr(float(x)) for x in flat) + "\n")
    return out.getvalue()


def _parse_evidence_tokens(toks: Sequence[str], model: GraphicalModel, where: str) -> dict[int, int]:
    if not toks:
        return {}
    try:
        count = int(toks[0])
    except ValueError:
        raise QueryFormatError(f"{where}: expected evidence count, got {toks[0]!r}")
    if len(toks) != 1 + 2 * count:
        raise QueryFormatError(f"{where}: evidence line declares {count} pairs but has {len(toks) - 1} values")
    ev: dict[int, int] = {}
    for i in range(count):
        try:
            v, s = int(toks[1 + 2 * i]), int(toks[2 + 2 * i])
        except ValueError:
            raise QueryFormatError(f"{where}: evidence pairs must be integers")
        if not (0 <= v < model.n_vars):
            raise QueryFormatError(f"{where}: evidence variable {v} out of range")
        if not (0 <= s < model.cards[v]):
            raise QueryFormatError(f"{where}: evidence state {s} out of range for variable {v}")
        if v in ev and ev[v] != s:
            raise QueryFormatError(f"{where}: variable {v} evidenced with conflicting states")
        ev[v] = s
    return ev


def load_query(source, model: GraphicalModel) -> tuple[tuple[VariableId, ...], dict[VariableId, int]]:
    """Parse (decision variables, evidence) for a model from a query file."""
    text = _read_source(source)
    lines = []
    for raw in text.splitlines():
        body = raw.split("#", 1)[0].strip()
        if body:
            lines.append(body)
    if not lines:
        raise QueryFormatError("query file is empty")
    if len(lines) > 2:
        raise QueryFormatError("query file has more than two content lines")
    toks = lines[0].split()
    try:
        k = int(toks[0])
    except ValueError:
        raise QueryFormatError(f"expected decision count, got {toks[0]!r}")
    if len(toks) != 1 + k:
        raise QueryFormatError(f"decision line declares {k} variables but has {len(toks) - 1}")
    decisions = []
    for t in toks[1:]:
        try:
            v = int(t)
        except ValueError:
            raise QueryFormatError(f"decision indices must be integers, got {t!r}")
        if not (0 <= v < model.n_vars):
            raise QueryFormatError(f"decision variable {v} out of range")
        if v in decisions:
            raise QueryFormatError(f"decision variable {v} listed twice")
        decisions.append(v)
    evidence = _parse_evidence_tokens(lines[1].split(), model, "query") if len(lines) == 2 else {}
    overlap = set(decisions) & set(evidence)
    if overlap:
        raise QueryFormatError(f"variables {sorted(overlap)} are both decided and evidenced")
    return tuple(sorted(decisions)), evidence


def load_evidence(source, model: GraphicalModel) -> dict[VariableId, int]:
    """Parse a standalone evidence file ("e v_1 s_1 ... v_e s_e")."""
    text = _read_source(source)
    toks = []
    for raw in text.splitlines():
        toks.extend(raw.split("#", 1)[0].split())
    return _parse_evidence_tokens(toks, model, "evidence")


def dump_query(decisions: Sequence[VariableId], evidence: dict[VariableId, int] | None = None) -> str:
    lines = [" ".join([str(len(decisions))] + [str(v) for v in sorted(decisions)])]
    if evidence:
        pairs = []
        for v in sorted(evidence):
            pairs.extend([str(v), str(evidence[v])])
        lines.append(" ".join([str(len(evidence))] + pairs))
    return "\n".join(lines) + "\n"
