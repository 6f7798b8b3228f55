"""Sum-product networks: probability of evidence and MPE."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Mapping, Optional

from ..graph import (
    Finite,
    Product,
    SpfError,
    SpfGraph,
    Sum,
    Variable,
    VariableTable,
    build_graph,
    evaluate,
    indicator,
    is_decomposable,
)
from ..semiring import MAX_PRODUCT, SUM_PRODUCT
from ..summation import extract_argument, set_evidence, sum_decomposable
from ..translate import translate

__all__ = ["probability_of_evidence", "augment_selective", "mpe", "MpeResult"]


def _require_spn(spn: SpfGraph):
    if spn.semiring is not SUM_PRODUCT:
        raise SpfError(f"expected a sum-product graph, got {spn.semiring.name}")
    check = is_decomposable(spn)
    if not check:
        raise SpfError(
            f"graph is not decomposable: product node {check.node} shares {spn.vars[check.variable].name}"
        )


def probability_of_evidence(spn: SpfGraph, evidence: Mapping, normalize: bool = False) -> float:
    """Unnormalized probability of ``evidence``; divided by the partition
    function (the value for empty evidence) when ``normalize``."""
    _require_spn(spn)
    value = sum_decomposable(set_evidence(spn, evidence)).value
    if normalize:
        z = sum_decomposable(spn).value
        if z == 0:
            raise SpfError("partition function is zero")
        return value / z
    return value


def augment_selective(spn: SpfGraph, prefix: str = "H"):
    """Give every sum node a fresh hidden variable whose value names the chosen
    child, multiplying child k by the indicator [H = k].

    Returns ``(graph, hidden)`` where ``hidden`` maps sum node id -> variable index.
    """
    taken = {v.name for v in spn.vars}
    vars = list(spn.vars)
    hidden: Dict[int, int] = {}
    for i in spn.order:
        n = spn.nodes[i]
        if isinstance(n, Sum):
            name = f"{prefix}{i}"
            while name in taken:
                name = "_" + name
            taken.add(name)
            hidden[i] = len(vars)
            vars.append(Variable(name, Finite(len(n.children))))
    table = VariableTable(vars)
    s = spn.semiring
    nodes = dict(spn.nodes)
    nxt = max(nodes) + 1
    for i, h in hidden.items():
        kids = []
        for k, c in enumerate(spn.nodes[i].children):
            nodes[nxt] = indicator(h, k, len(spn.nodes[i].children), s.zero, s.one)
            nodes[nxt + 1] = Product((c, nxt))
            kids.append(nxt + 1)
            nxt += 2
        nodes[i] = Sum(tuple(kids))
    return build_graph(s, table, nodes, spn.root), hidden


@dataclass
class MpeResult:
    state: Dict[str, object]  # observed, unobserved and hidden variables
    value: float


def mpe(spn: SpfGraph, evidence: Optional[Mapping] = None) -> MpeResult:
    """Most probable joint state of all variables (including one hidden
    selector per sum node) consistent with ``evidence``."""
    _require_spn(spn)
    aug, _ = augment_selective(spn)
    e = aug.vars.normalize(evidence or {})
    conditioned = set_evidence(aug, e)
    # selective by construction, so the max-product sum is exact
    maxp = translate(conditioned, MAX_PRODUCT, value_map=lambda a: a, unchecked=True)
    result = sum_decomposable(maxp)
    x = extract_argument(maxp, result)
    x.update(e)
    full = translate(aug, MAX_PRODUCT, value_map=lambda a: a, unchecked=True)
    value = evaluate(full, x)
    if abs(value - result.value) > 1e-9 * max(1.0, abs(result.value)):
        raise SpfError(f"MPE state evaluates to {value}, summation gave {result.value}")
    return MpeResult({aug.vars[i].name: x[i] for i in sorted(x)}, value)
