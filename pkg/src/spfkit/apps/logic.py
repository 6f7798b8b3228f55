"""Propositional logic on SPFs: satisfiability, model counting, MAX-SAT."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from ..engine import Engine, EngineConfig, make_deterministic_decomposable
from ..graph import Const, Leaf, Product, SpfError, SpfGraph, Sum, VariableTable, build_graph, evaluate
from ..semiring import BOOLEAN, COUNTING, MAX_SUM
from ..summation import sum_decomposable
from ..translate import translate

__all__ = [
    "DimacsError",
    "Cnf",
    "SatResult",
    "SatNumberResult",
    "parse_dimacs",
    "cnf_to_spf",
    "sat",
    "model_count",
    "max_sat",
    "clauses_satisfied",
]


class DimacsError(SpfError):
    def __init__(self, msg: str, line: Optional[int] = None):
        super().__init__(msg if line is None else f"line {line}: {msg}")
        self.line = line


@dataclass(frozen=True)
class Cnf:
    n: int
    clauses: Tuple[Tuple[int, ...], ...]

    def __post_init__(self):
        if self.n < 0:
            raise SpfError("variable count must be non-negative")
        object.__setattr__(self, "clauses", tuple(tuple(int(l) for l in c) for c in self.clauses))
        for c in self.clauses:
            for lit in c:
                if lit == 0 or abs(lit) > self.n:
                    raise SpfError(f"literal {lit} out of range for {self.n} variables")

    @property
    def has_empty_clause(self) -> bool:
        return any(len(c) == 0 for c in self.clauses)

    def variables(self) -> VariableTable:
        return VariableTable.finite([2] * self.n)

    def to_dimacs(self) -> str:
        lines = [f"p cnf {self.n} {len(self.clauses)}"]
        lines += [" ".join(map(str, c + (0,))) for c in self.clauses]
        return "\n".join(lines) + "\n"


def parse_dimacs(text: str) -> Cnf:
    """Parse DIMACS CNF. Clauses may span lines; each ends with 0."""
    header = None
    clauses: List[Tuple[int, ...]] = []
    current: List[int] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("%"):  # end marker used by some benchmark sets
            break
        if line.startswith("p"):
            if header is not None:
                raise DimacsError("second problem line", lineno)
            m = re.fullmatch(r"p\s+cnf\s+(\d+)\s+(\d+)", line)
            if not m:
                raise DimacsError(f"malformed problem line {line!r}", lineno)
            header = (int(m.group(1)), int(m.group(2)))
            continue
        if header is None:
            raise DimacsError("clause before the 'p cnf' line", lineno)
        for tok in line.split():
            try:
                lit = int(tok)
            except ValueError:
                raise DimacsError(f"bad literal {tok!r}", lineno) from None
            if lit == 0:
                clauses.append(tuple(current))
                current = []
            elif abs(lit) > header[0]:
                raise DimacsError(f"literal {lit} exceeds variable count {header[0]}", lineno)
            else:
                current.append(lit)
    if header is None:
        raise DimacsError("missing 'p cnf' line")
    if current:
        raise DimacsError("last clause is not terminated by 0")
    if len(clauses) != header[1]:
        raise DimacsError(f"header declares {header[1]} clauses, found {len(clauses)}")
    return Cnf(header[0], tuple(clauses))


def _literal_table(lit: int, false, true):
    return (false, true) if lit > 0 else (true, false)


def _cnf_graph(cnf: Cnf, semiring, false, true, empty_clause) -> SpfGraph:
    nodes: List = []
    ids: Dict = {}

    def add(node) -> int:
        if node not in ids:
            ids[node] = len(nodes)
            nodes.append(node)
        return ids[node]

    clause_ids = []
    for c in cnf.clauses:
        lits = sorted(set(c), key=lambda l: (abs(l), l < 0))
        if not lits:
            clause_ids.append(add(Const(empty_clause)))
            continue
        leaves = [add(Leaf((abs(l) - 1,), _literal_table(l, false, true))) for l in lits]
        clause_ids.append(add(Sum(tuple(leaves))))
    if not clause_ids:
        root = add(Const(semiring.one))
    else:
        root = add(Product(tuple(clause_ids)))
    return build_graph(semiring, cnf.variables(), nodes, root)


def cnf_to_spf(cnf: Cnf) -> SpfGraph:
    """Boolean SPF: product over clauses, each a sum of shared literal leaves."""
    return _cnf_graph(cnf, BOOLEAN, False, True, False)


def _sat_number_spf(cnf: Cnf) -> SpfGraph:
    # literal leaves are 1 if satisfied else 0; OR -> max, AND -> +
    return _cnf_graph(cnf, MAX_SUM, 0.0, 1.0, 0.0)


def clauses_satisfied(cnf: Cnf, x: Dict[int, int]) -> int:
    """Number of clauses satisfied by assignment ``x`` (0-based variable index -> 0/1)."""
    count = 0
    for c in cnf.clauses:
        if any((x[abs(l) - 1] == 1) == (l > 0) for l in c):
            count += 1
    return count


def _named(vars: VariableTable, x: Dict[int, object]) -> Dict[str, object]:
    return {vars[i].name: x[i] for i in sorted(x)}


@dataclass
class SatResult:
    satisfiable: bool
    witness: Optional[Dict[str, int]] = None
    stats: dict = field(default_factory=dict)


@dataclass
class SatNumberResult:
    value: int
    witness: Dict[str, int]
    stats: dict = field(default_factory=dict)


def sat(cnf: Cnf, config: EngineConfig = EngineConfig()) -> SatResult:
    graph = cnf_to_spf(cnf)
    eng = Engine(graph, config)
    value = eng.run()
    stats = eng.stats.as_dict()
    if not value:
        return SatResult(False, None, stats)
    x = eng.extract_argument()
    if evaluate(graph, x) is not True or clauses_satisfied(cnf, x) != len(cnf.clauses):
        raise SpfError("extracted witness does not satisfy the formula")
    return SatResult(True, _named(graph.vars, x), stats)


def model_count(cnf: Cnf, config: EngineConfig = EngineConfig()) -> int:
    """Exact number of satisfying assignments over all ``cnf.n`` variables."""
    compiled = make_deterministic_decomposable(cnf_to_spf(cnf), config)
    counting = translate(compiled, COUNTING, unchecked=True)
    value = sum_decomposable(counting).value
    free = cnf.n - len(counting.scopes[counting.root])
    return value * 2 ** free


def max_sat(cnf: Cnf, config: EngineConfig = EngineConfig()) -> SatNumberResult:
    """Largest number of simultaneously satisfiable clauses, with a witness."""
    graph = _sat_number_spf(cnf)
    eng = Engine(graph, config)
    value = eng.run()
    x = eng.extract_argument()
    got = clauses_satisfied(cnf, x)
    if got != int(round(value)) or evaluate(graph, x) != value:
        raise SpfError(f"witness satisfies {got} clauses, summation reported {value}")
    return SatNumberResult(int(round(value)), _named(graph.vars, x), eng.stats.as_dict())
