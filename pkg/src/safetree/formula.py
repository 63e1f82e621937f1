"""Constraint formula in disjunctive normal form.

A formula is a disjunction of conjunctions of threshold literals; it
evaluates true exactly where the tree's safe set (intersected with the
observed feature bounds) does NOT cover the point. Violating a conjunction
is credited to the simplest one that fires, and those counts drive pruning.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ParseError
from .features import FeatureBounds
from .octree import Tree, TreeNode

OPS = ("<", ">", "<=", ">=")


@dataclass(frozen=True)
class Literal:
    dim: int
    op: str  # one of OPS
    threshold: float

    def __post_init__(self):
        if self.op not in OPS:
            raise DomainError(f"unknown operator {self.op!r}")
        if not np.isfinite(self.threshold):
            raise DomainError("literal threshold must be finite")
        object.__setattr__(self, "threshold", float(self.threshold))

    def holds(self, value: float) -> bool:
        if self.op == "<":
            return value < self.threshold
        if self.op == ">":
            return value > self.threshold
        if self.op == "<=":
            return value <= self.threshold
        return value >= self.threshold


@dataclass(frozen=True)
class Conjunction:
    literals: tuple[Literal, ...]

    def __post_init__(self):
        if not self.literals:
            raise DomainError("a conjunction needs at least one literal")
        object.__setattr__(self, "literals", tuple(self.literals))

    @property
    def complexity(self) -> int:
        return len(self.literals)

    def holds(self, point: np.ndarray) -> bool:
        return all(lit.holds(point[lit.dim]) for lit in self.literals)


@dataclass(frozen=True)
class DnfFormula:
    conjunctions: tuple[Conjunction, ...]
    dim: int

    def __post_init__(self):
        # Stable sort: ascending complexity, construction order within ties.
        ordered = tuple(
            sorted(self.conjunctions, key=lambda c: c.complexity)
        )
        object.__setattr__(self, "conjunctions", ordered)

    def __len__(self) -> int:
        return len(self.conjunctions)


class ConjunctionStats:
    """Evaluation/violation counters, one slot per conjunction.

    Instances for the same formula can be merged by addition, so parallel
    rollout workers may keep private stats and combine them afterwards.
    """

    def __init__(self, n_conjunctions: int):
        self.evaluations = np.zeros(n_conjunctions, dtype=np.int64)
        self.violations = np.zeros(n_conjunctions, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.evaluations)

    def merge(self, other: "ConjunctionStats") -> "ConjunctionStats":
        if len(other) != len(self):
            raise DomainError("cannot merge stats of different lengths")
        merged = ConjunctionStats(len(self))
        merged.evaluations = self.evaluations + other.evaluations
        merged.violations = self.violations + other.violations
        return merged

    def ratios(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            r = np.where(
                self.evaluations > 0, self.violations / self.evaluations, 0.0
            )
        return r


def _tighter(a: Literal, b: Literal) -> Literal:
    """Of two same-direction literals on one dimension, keep the stricter."""
    upper = a.op in ("<", "<=")
    if a.threshold != b.threshold:
        keep_a = a.threshold < b.threshold if upper else a.threshold > b.threshold
        return a if keep_a else b
    # Equal thresholds: the strict comparison is tighter.
    return a if a.op in ("<", ">") else b


def _normalize(literals) -> Conjunction:
    by_side: dict[tuple[int, bool], Literal] = {}
    order: list[tuple[int, bool]] = []
    for lit in literals:
        key = (lit.dim, lit.op in ("<", "<="))
        if key in by_side:
            by_side[key] = _tighter(by_side[key], lit)
        else:
            by_side[key] = lit
            order.append(key)
    return Conjunction(literals=tuple(by_side[k] for k in order))


def extract_formula(tree: Tree, bounds: FeatureBounds) -> DnfFormula:
    """Rules flagging everything outside the tree's leaf boxes and the
    observed per-dimension bounds.

    At a split on dimension j with child intervals [L_0,R_0]..[L_N-1,R_N-1],
    one rule per non-empty gap between intervals is emitted (strict
    comparisons), and recursion into child n appends the closed path
    condition L_n <= phi_j <= R_n. Leaves add nothing. Two bound rules per
    dimension flag values outside the observed min/max. Duplicate rules are
    emitted once.
    """
    if len(bounds.lo) != tree.dim:
        raise DomainError("bounds dimension does not match tree")
    raw: list[Conjunction] = []
    _emit(tree.root, [], raw)
    for j in range(tree.dim):
        raw.append(_normalize([Literal(j, "<", bounds.lo[j])]))
        raw.append(_normalize([Literal(j, ">", bounds.hi[j])]))
    seen = set()
    unique = []
    for conj in raw:
        key = tuple((l.dim, l.op, l.threshold) for l in conj.literals)
        if key not in seen:
            seen.add(key)
            unique.append(conj)
    return DnfFormula(conjunctions=tuple(unique), dim=tree.dim)


def _emit(node: TreeNode, path: list[Literal], out: list[Conjunction]) -> None:
    if node.is_leaf:
        return
    j = node.split_dim
    intervals = [iv for iv, _ in node.children]
    first_l = intervals[0][0]
    out.append(_normalize(path + [Literal(j, "<", first_l)]))
    for (_, r), (l_next, _) in zip(intervals, intervals[1:]):
        if l_next > r:  # empty gaps (touching intervals) produce no rule
            out.append(
                _normalize(path + [Literal(j, ">", r), Literal(j, "<", l_next)])
            )
    last_r = intervals[-1][1]
    out.append(_normalize(path + [Literal(j, ">", last_r)]))
    for (l, r), child in node.children:
        _emit(
            child,
            path + [Literal(j, ">=", l), Literal(j, "<=", r)],
            out,
        )


def evaluate(
    formula: DnfFormula,
    point,
    stats: ConjunctionStats | None = None,
    count_all: bool = False,
):
    """Check conjunctions in ascending-complexity order with short-circuit.

    Returns (violated, credited_index). The first true conjunction is
    credited and checking stops; with `count_all` every conjunction is
    still checked (and counted) but credit stays with the first.
    """
    p = np.asarray(point, dtype=float)
    if p.shape != (formula.dim,):
        raise DomainError(f"point has shape {p.shape}, expected ({formula.dim},)")
    if stats is not None and len(stats) != len(formula):
        raise DomainError("stats not aligned with formula")
    credited = None
    for idx, conj in enumerate(formula.conjunctions):
        if stats is not None:
            stats.evaluations[idx] += 1
        if conj.holds(p):
            credited = idx
            if stats is not None:
                stats.violations[idx] += 1
            if not count_all:
                break
    return credited is not None, credited


def cost(formula: DnfFormula, point, stats: ConjunctionStats | None = None) -> int:
    """1 when the point violates the formula, else 0."""
    violated, _ = evaluate(formula, point, stats)
    return 1 if violated else 0


def prune(
    formula: DnfFormula, stats: ConjunctionStats, threshold: float
) -> DnfFormula:
    """Keep conjunctions whose violation/evaluation ratio reaches the
    threshold; never-evaluated conjunctions are dropped."""
    if len(stats) != len(formula):
        raise DomainError("stats not aligned with formula")
    if not (0.0 <= threshold <= 1.0):
        raise DomainError("threshold must lie in [0, 1]")
    kept = [
        conj
        for conj, evals, viols in zip(
            formula.conjunctions, stats.evaluations, stats.violations
        )
        if evals > 0 and viols / evals >= threshold
    ]
    return DnfFormula(conjunctions=tuple(kept), dim=formula.dim)


# --- text format ---------------------------------------------------------

def render_text(formula: DnfFormula) -> str:
    r"""Human-readable DNF: `phi0 < 0.1 /\ phi1 > 0.3 \/ ...`; `false` when empty."""
    if not formula.conjunctions:
        return "false"
    parts = []
    for conj in formula.conjunctions:
        lits = " /\\ ".join(
            f"phi{l.dim} {l.op} {l.threshold!r}" for l in conj.literals
        )
        parts.append(lits)
    return " \\/ ".join(parts)


_TOKEN = re.compile(
    r"\s*(?:(?P<var>phi\d+)|(?P<op><=|>=|<|>)|(?P<num>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)"
    r"|(?P<and>/\\)|(?P<or>\\/)|(?P<false>false))"
)


def parse_text(text: str, dim: int | None = None) -> DnfFormula:
    """Inverse of render_text. `dim` defaults to 1 + the largest mentioned
    dimension. Raises ParseError with the offending position."""
    tokens = []
    pos = 0
    stripped = text.strip()
    if not stripped:
        raise ParseError("position 0: empty formula text")
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ParseError(f"position {pos}: unexpected character {text[pos]!r}")
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()

    if len(tokens) == 1 and tokens[0][0] == "false":
        return DnfFormula(conjunctions=(), dim=dim if dim is not None else 0)

    conjunctions: list[Conjunction] = []
    literals: list[Literal] = []
    i = 0

    def expect(kind: str):
        nonlocal i
        if i >= len(tokens):
            raise ParseError(f"position {len(text)}: expected {kind}, found end of input")
        got_kind, value, at = tokens[i]
        if got_kind != kind:
            raise ParseError(f"position {at}: expected {kind}, found {value!r}")
        i += 1
        return value

    while True:
        var = expect("var")
        op = expect("op")
        num = expect("num")
        literals.append(Literal(dim=int(var[3:]), op=op, threshold=float(num)))
        if i >= len(tokens):
            break
        kind, value, at = tokens[i]
        i += 1
        if kind == "and":
            continue
        if kind == "or":
            conjunctions.append(Conjunction(literals=tuple(literals)))
            literals = []
            continue
        raise ParseError(f"position {at}: expected /\\ or \\/, found {value!r}")
    conjunctions.append(Conjunction(literals=tuple(literals)))

    max_dim = max(l.dim for c in conjunctions for l in c.literals)
    k = dim if dim is not None else max_dim + 1
    if max_dim >= k:
        raise ParseError(f"position 0: literal dimension {max_dim} exceeds k={k}")
    return DnfFormula(conjunctions=tuple(conjunctions), dim=k)


# --- JSON / CSV ----------------------------------------------------------

def formula_to_json(formula: DnfFormula) -> str:
    doc = {
        "k": formula.dim,
        "conjunctions": [
            {
                "literals": [
                    {"dim": l.dim, "op": l.op, "threshold": l.threshold}
                    for l in conj.literals
                ]
            }
            for conj in formula.conjunctions
        ],
    }
    return json.dumps(doc, sort_keys=True, indent=1)


def formula_from_json(text: str) -> DnfFormula:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid formula JSON: {exc.msg} at position {exc.pos}") from exc
    try:
        conjunctions = tuple(
            Conjunction(
                literals=tuple(
                    Literal(dim=int(l["dim"]), op=l["op"], threshold=float(l["threshold"]))
                    for l in entry["literals"]
                )
            )
            for entry in doc["conjunctions"]
        )
        return DnfFormula(conjunctions=conjunctions, dim=int(doc["k"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed formula document: {exc}") from exc


def stats_to_csv(formula: DnfFormula, stats: ConjunctionStats) -> str:
    if len(stats) != len(formula):
        raise DomainError("stats not aligned with formula")
    lines = ["conjunction_id,complexity,evaluations,violations,ratio"]
    ratios = stats.ratios()
    for idx, conj in enumerate(formula.conjunctions):
        lines.append(
            f"{idx},{conj.complexity},{stats.evaluations[idx]},"
            f"{stats.violations[idx]},{ratios[idx]!r}"
        )
    return "\n".join(lines) + "\n"


def stats_from_csv(text: str, formula: DnfFormula) -> ConjunctionStats:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != "conjunction_id,complexity,evaluations,violations,ratio":
        raise ParseError("line 1: bad stats header")
    stats = ConjunctionStats(len(formula))
    if len(lines) - 1 != len(formula):
        raise DomainError(
            f"stats rows ({len(lines) - 1}) not aligned with formula ({len(formula)})"
        )
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 5:
            raise ParseError(f"line {lineno}: expected 5 columns")
        try:
            idx = int(parts[0])
            stats.evaluations[idx] = int(parts[2])
            stats.violations[idx] = int(parts[3])
        except (ValueError, IndexError) as exc:
            raise ParseError(f"line {lineno}: {exc}") from exc
    if np.any(stats.violations > stats.evaluations):
        raise DomainError("violations exceed evaluations")
    return stats
