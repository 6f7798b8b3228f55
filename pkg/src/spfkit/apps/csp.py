"""Constraint satisfaction as a Boolean OR-AND network."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from ..engine import Engine, EngineConfig
from ..graph import Const, Product, SpfError, SpfGraph, Sum, VariableTable, build_graph, evaluate, indicator
from ..semiring import BOOLEAN

__all__ = ["Constraint", "CspInstance", "CspResult", "csp_to_spf", "solve_csp", "csp_from_json", "csp_to_json"]


@dataclass(frozen=True)
class Constraint:
    scope: Tuple[int, ...]
    tuples: frozenset  # satisfying value tuples, aligned with scope

    def holds(self, x: Mapping[int, int]) -> bool:
        return tuple(x[v] for v in self.scope) in self.tuples


@dataclass(frozen=True)
class CspInstance:
    vars: VariableTable
    constraints: Tuple[Constraint, ...]

    def __post_init__(self):
        for c in self.constraints:
            if len(set(c.scope)) != len(c.scope):
                raise SpfError(f"constraint scope {c.scope} repeats a variable")
            for v in c.scope:
                if not 0 <= v < len(self.vars) or not self.vars[v].finite:
                    raise SpfError(f"constraint mentions unknown or non-finite variable {v}")
            for t in c.tuples:
                if len(t) != len(c.scope) or any(
                    not 0 <= a < self.vars.card(v) for a, v in zip(t, c.scope)
                ):
                    raise SpfError(f"tuple {t} outside the joint domain of {c.scope}")

    @classmethod
    def build(cls, sizes: Sequence[int], constraints) -> "CspInstance":
        """``constraints`` is an iterable of (scope, tuples) with 0-based indices."""
        vars = VariableTable.finite(sizes)
        cons = tuple(Constraint(tuple(s), frozenset(tuple(t) for t in ts)) for s, ts in constraints)
        return cls(vars, cons)

    @classmethod
    def from_predicate(cls, sizes: Sequence[int], scopes, pred) -> "CspInstance":
        """Constraints whose tuples are those values of each scope where ``pred(scope, values)`` holds."""
        vars = VariableTable.finite(sizes)
        cons = []
        for s in scopes:
            ts = [t for t in itertools.product(*(range(sizes[v]) for v in s)) if pred(s, t)]
            cons.append(Constraint(tuple(s), frozenset(ts)))
        return cls(vars, tuple(cons))

    def satisfied(self, x: Mapping[int, int]) -> bool:
        return all(c.holds(x) for c in self.constraints)


def csp_to_spf(csp: CspInstance) -> SpfGraph:
    """AND over constraints of OR over satisfying tuples of AND of indicators."""
    vars = csp.vars
    nodes: List = []
    ids: Dict = {}

    def add(node) -> int:
        if node not in ids:
            ids[node] = len(nodes)
            nodes.append(node)
        return ids[node]

    def ind(v, t):
        return add(indicator(v, t, vars.card(v), False, True))

    cons = []
    for c in csp.constraints:
        if not c.tuples:
            cons.append(add(Const(False)))
            continue
        if not c.scope:
            cons.append(add(Const(True)))
            continue
        rows = [add(Product(tuple(ind(v, a) for v, a in zip(c.scope, t)))) for t in sorted(c.tuples)]
        cons.append(add(Sum(tuple(rows))))
    root = add(Product(tuple(cons))) if cons else add(Const(True))
    return build_graph(BOOLEAN, vars, nodes, root)


@dataclass
class CspResult:
    satisfiable: bool
    solution: Optional[Dict[str, int]] = None
    stats: dict = field(default_factory=dict)


def solve_csp(csp: CspInstance, config: EngineConfig = EngineConfig()) -> CspResult:
    graph = csp_to_spf(csp)
    eng = Engine(graph, config)
    if not eng.run():
        return CspResult(False, None, eng.stats.as_dict())
    x = eng.extract_argument()
    if not csp.satisfied(x) or evaluate(graph, x) is not True:
        raise SpfError("extracted solution violates a constraint")
    return CspResult(True, {csp.vars[i].name: x[i] for i in sorted(x)}, eng.stats.as_dict())


def csp_from_json(obj: Mapping) -> CspInstance:
    """``{"vars": [names], "domains": [sizes] | {name: size}, "constraints": [{scope, tuples}]}``."""
    names = obj.get("vars")
    doms = obj.get("domains")
    if names is None or doms is None:
        raise SpfError("CSP JSON needs 'vars' and 'domains'")
    if isinstance(doms, Mapping):
        sizes = [int(doms[n]) for n in names]
    else:
        sizes = [int(d) for d in doms]
    if len(sizes) != len(names):
        raise SpfError("'vars' and 'domains' differ in length")
    if any(d < 1 for d in sizes):
        raise SpfError("domain sizes must be positive")
    from ..graph import Finite, Variable

    vars = VariableTable(Variable(str(n), Finite(d)) for n, d in zip(names, sizes))
    cons = []
    for c in obj.get("constraints", []):
        scope = tuple(vars.index(v) for v in c["scope"])
        cons.append(Constraint(scope, frozenset(tuple(int(a) for a in t) for t in c["tuples"])))
    return CspInstance(vars, tuple(cons))


def csp_to_json(csp: CspInstance) -> dict:
    return {
        "vars": [v.name for v in csp.vars],
        "domains": [v.domain.size for v in csp.vars],
        "constraints": [
            {"scope": [csp.vars[v].name for v in c.scope], "tuples": [list(t) for t in sorted(c.tuples)]}
            for c in csp.constraints
        ],
    }
