"""Integration and global minimization of decomposable SPFs over boxes."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional

from ..graph import SpfError, SpfGraph, evaluate
from ..semiring import MIN_SUM, SUM_PRODUCT
from ..summation import extract_argument, sum_decomposable

__all__ = ["integrate", "minimize_msf", "MinResult"]


def integrate(graph: SpfGraph) -> float:
    """Definite integral over the box of the root scope's interval domains."""
    if graph.semiring is not SUM_PRODUCT:
        raise SpfError(f"integration needs the sum-product semiring, got {graph.semiring.name}")
    return sum_decomposable(graph).value


@dataclass
class MinResult:
    argmin: Dict[str, float]
    value: float  # the graph evaluated at argmin
    summed: float  # value reported by the upward pass
    starts: int = 0  # local searches run across all leaves


def minimize_msf(graph: SpfGraph, restarts: int = 16, seed: int = 0,
                 leaf_budget: Optional[float] = None, tol: float = 1e-6) -> MinResult:
    """Minimize each leaf over its own box by multi-start local search, then
    combine by the min-sum upward pass and read back the argument."""
    if graph.semiring is not MIN_SUM:
        raise SpfError(f"minimization needs the min-sum semiring, got {graph.semiring.name}")
    res = sum_decomposable(graph, leaf_restarts=restarts, seed=seed, leaf_budget=leaf_budget)
    x = extract_argument(graph, res)
    value = evaluate(graph, x)
    # other sum branches may undercut the chosen one at x when leaf minima are
    # approximate, so only an evaluation above the upward value is an error
    if value > res.value + tol * max(1.0, abs(res.value)):
        raise SpfError(f"argmin evaluates to {value}, upward pass gave {res.value}")
    return MinResult({graph.vars[i].name: x[i] for i in sorted(x)}, value, res.value, res.op_counts.leaf_starts)
