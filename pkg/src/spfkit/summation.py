"""Single-pass summation of decomposable SPFs and the operations built on it."""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from . import registry
from .graph import (
    Const,
    Finite,
    Leaf,
    Product,
    SpfError,
    SpfGraph,
    Sum,
    build_graph,
    condition_leaf,
    is_decomposable,
)
from .optimize import multistart_minimize
from .semiring import Value

__all__ = [
    "OpCounts",
    "SummationResult",
    "CostEstimate",
    "NoWitness",
    "sum_decomposable",
    "sum_leaf",
    "set_evidence",
    "extract_argument",
    "estimate_cost",
]


class NoWitness(SpfError):
    """The summation is zero, so no satisfying argument exists."""


@dataclass
class OpCounts:
    adds: int = 0
    muls: int = 0
    leaf_evals: int = 0
    # cost-model breakdown: one combine per edge, leaf work, sum-node corrections
    edge_ops: int = 0
    leaf_adds: int = 0
    correction_ops: int = 0
    leaf_starts: int = 0  # local searches run by continuous leaf minimization

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class SummationResult:
    value: Value
    memo: Dict[int, Value]
    op_counts: OpCounts = field(default_factory=OpCounts)
    # for continuous leaves: the argument achieving the leaf's summed value
    leaf_args: Dict[int, Tuple[float, ...]] = field(default_factory=dict)


@dataclass(frozen=True)
class LeafOptions:
    restarts: int = 16
    seed: int = 0
    budget: Optional[float] = None  # wall-clock seconds per leaf


def _leaf_rng(leaf: Leaf, seed: int) -> np.random.Generator:
    key = repr((leaf.fn.name, leaf.fn.params, leaf.fn.bound, leaf.scope)).encode()
    return np.random.default_rng([seed, zlib.crc32(key)])


def _box(graph: SpfGraph, scope):
    lo, hi = [], []
    for v in scope:
        d = graph.vars[v].domain
        if isinstance(d, Finite):
            raise SpfError(f"registered leaf over finite variable {graph.vars[v].name} cannot be summed")
        lo.append(d.lo)
        hi.append(d.hi)
    return np.array(lo), np.array(hi)


def sum_leaf(graph: SpfGraph, leaf: Leaf, counts: Optional[OpCounts] = None,
             options: LeafOptions = LeafOptions()) -> Tuple[Value, Optional[Tuple[float, ...]]]:
    """Summation of one leaf over its own scope; also returns the maximizing /
    minimizing argument for continuous leaves."""
    s = graph.semiring
    counts = counts if counts is not None else OpCounts()
    if leaf.table is not None:
        acc = s.zero
        for a in leaf.table:
            counts.leaf_evals += 1
            acc = s.add(acc, a)
            counts.adds += 1
            counts.leaf_adds += 1
        return acc, None
    fn = registry.get_function(leaf.fn.name)
    params = np.asarray(leaf.fn.params)
    lo, hi = _box(graph, leaf.scope)
    counts.leaf_evals += 1
    if s.name == "sum-product":
        if fn.integral is None:
            raise SpfError(f"leaf function {fn.name} has no closed-form integral")
        if leaf.fn.bound:
            raise SpfError("integration of partially bound leaves is not supported")
        return s.check(float(fn.integral(params, lo, hi))), None
    if s.name in ("min-sum", "max-sum"):
        sign = 1.0 if s.name == "min-sum" else -1.0
        reg = leaf.fn

        def f(y):
            return sign * fn.value(params, reg.full_args(y))

        grad = None
        if fn.gradient is not None:
            pos = reg.free_positions(len(leaf.scope))

            def grad(y):
                return sign * np.asarray(fn.gradient(params, reg.full_args(y)))[pos]

        x, v, used = multistart_minimize(f, grad, lo, hi, options.restarts, _leaf_rng(leaf, options.seed),
                                         budget=options.budget)
        counts.leaf_starts += used
        return sign * v, tuple(float(t) for t in x)
    raise SpfError(f"continuous leaves cannot be summed in the {s.name} semiring")


def _corrections(graph: SpfGraph, v: int, node: Sum):
    """Sizes |X_v \\ X_c| per child, and the uniform cardinality if there is one."""
    scopes = graph.scopes
    missing = [scopes[v] - scopes[c] for c in node.children]
    cards = set()
    for m in missing:
        for x in m:
            d = graph.vars[x].domain
            cards.add(d.size if isinstance(d, Finite) else None)
    return missing, cards


def sum_decomposable(graph: SpfGraph, leaf_restarts: int = 16, seed: int = 0,
                     leaf_budget: Optional[float] = None) -> SummationResult:
    """Sum ``graph`` over the joint domain of its root scope in one upward pass."""
    check = is_decomposable(graph)
    if not check:
        raise SpfError(
            f"graph is not decomposable: product node {check.node} shares variable "
            f"{graph.vars[check.variable].name}"
        )
    s = graph.semiring
    counts = OpCounts()
    memo: Dict[int, Value] = {}
    leaf_args: Dict[int, Tuple[float, ...]] = {}
    options = LeafOptions(leaf_restarts, seed, leaf_budget)
    for i in graph.order:
        n = graph.nodes[i]
        if isinstance(n, Const):
            memo[i] = n.value
        elif isinstance(n, Leaf):
            memo[i], arg = sum_leaf(graph, n, counts, options)
            if arg is not None:
                leaf_args[i] = arg
        elif isinstance(n, Product):
            acc = s.one
            for c in n.children:
                acc = s.mul(acc, memo[c])
                counts.muls += 1
                counts.edge_ops += 1
            memo[i] = acc
        else:
            memo[i] = _sum_node(graph, i, n, memo, counts)
    return SummationResult(memo[graph.root], memo, counts, leaf_args)


def _sum_node(graph: SpfGraph, i: int, n: Sum, memo, counts: OpCounts) -> Value:
    s = graph.semiring
    acc = s.zero
    if s.idempotent_add:
        for c in n.children:
            acc = s.add(acc, memo[c])
            counts.adds += 1
            counts.edge_ops += 1
        return acc
    missing, cards = _corrections(graph, i, n)
    if None in cards:
        raise SpfError(
            f"sum node {i}: a child misses a continuous variable and the {s.name} sum is not "
            "idempotent, so the sum of ones over it is unbounded"
        )
    if len(cards) <= 1:
        # uniform cardinality d: ladder P[j] = sum of d^j ones, built by additions
        d = next(iter(cards)) if cards else 1
        k = max(len(m) for m in missing)
        ladder = [s.add(s.zero, s.one)]
        counts.adds += 1
        counts.correction_ops += 1
        for _ in range(k):
            p = s.zero
            for _ in range(d):
                p = s.add(p, ladder[-1])
                counts.adds += 1
                counts.correction_ops += 1
            ladder.append(p)
        factors = [ladder[len(m)] for m in missing]
    else:
        factors = [s.ones(math.prod(graph.vars.card(x) for x in m)) for m in missing]
    for c, m, f in zip(n.children, missing, factors):
        term = memo[c]
        if m:
            term = s.mul(term, f)
            counts.muls += 1
        acc = s.add(acc, term)
        counts.adds += 1
        counts.edge_ops += 1
    return acc


# --- evidence --------------------------------------------------------------

def set_evidence(graph: SpfGraph, evidence: Mapping) -> SpfGraph:
    """Replace every leaf touching an evidence variable by its conditioned
    version; the graph structure and node ids are otherwise unchanged."""
    e = graph.vars.normalize(evidence)
    if not e:
        return graph
    nodes = {}
    for i, n in graph.nodes.items():
        if isinstance(n, Leaf) and any(v in e for v in n.scope):
            nodes[i] = condition_leaf(graph.vars, n, e)
        else:
            nodes[i] = n
    return build_graph(graph.semiring, graph.vars, nodes, graph.root)


# --- argument extraction ---------------------------------------------------

def _default_value(graph: SpfGraph, v: int):
    d = graph.vars[v].domain
    return 0 if isinstance(d, Finite) else d.lo


def extract_argument(graph: SpfGraph, result: SummationResult) -> Dict[int, object]:
    """Downward pass: all children of products, the first child of a sum whose
    value equals the sum's value, and an optimal entry of each selected leaf."""
    s = graph.semiring
    if not s.idempotent_add:
        raise SpfError(f"argument extraction needs an idempotent sum; {s.name} is not")
    memo = result.memo
    if s.name == "boolean" and memo[graph.root] == s.zero:
        raise NoWitness("the function is unsatisfiable")
    x: Dict[int, object] = {}

    def assign(v, val):
        if v in x and x[v] != val:
            raise SpfError(f"conflicting choices for {graph.vars[v].name}: selected subcircuit is not decomposable")
        x[v] = val

    seen = set()
    stack = [graph.root]
    while stack:
        i = stack.pop()
        if i in seen:
            continue
        seen.add(i)
        n = graph.nodes[i]
        if isinstance(n, Product):
            stack.extend(n.children)
        elif isinstance(n, Sum):
            target = memo[i]
            for c in n.children:
                if c in memo and memo[c] == target:
                    stack.append(c)
                    break
            else:
                raise SpfError(f"sum node {i}: no child attains the node value")
        elif isinstance(n, Leaf):
            if n.table is not None:
                target = memo[i]
                shape = graph.leaf_shape(n)
                best = None
                for flat, a in enumerate(n.table):
                    if a == target:
                        best = flat
                        break
                if best is None:  # float sums never reach here for idempotent semirings
                    raise SpfError(f"leaf {i}: no entry attains the summed value")
                vals = list(np.unravel_index(best, shape)) if shape else []
                for v, t in zip(n.scope, vals):
                    assign(v, int(t))
            else:
                arg = result.leaf_args.get(i)
                if arg is None:
                    raise SpfError(f"leaf {i}: no recorded argument")
                for v, t in zip(n.scope, arg):
                    assign(v, t)
    for v in range(len(graph.vars)):
        if v not in x:
            x[v] = _default_value(graph, v)
    return x


# --- cost model ------------------------------------------------------------

@dataclass(frozen=True)
class CostEstimate:
    total: float
    edges: float  # |S| * c
    leaves: float  # sum over function leaves of d^|scope| (e + c)
    sums: float  # sum over sum nodes of (c + k_v d c); 0 for idempotent sums
    k: int  # max over sum nodes v, children j of |X_v \ X_j|
    d: int
    bound: float  # |S| c + |S_leaf| d (e + c) + |S_sum| (c + k d c)


def estimate_cost(graph: SpfGraph, c: float = 1.0, e: float = 1.0) -> CostEstimate:
    cards = set()
    for v in graph.scopes[graph.root]:
        dom = graph.vars[v].domain
        if not isinstance(dom, Finite):
            raise SpfError("the cost model assumes finite domains")
        cards.add(dom.size)
    if len(cards) > 1:
        raise SpfError(f"the cost model assumes a uniform cardinality, found {sorted(cards)}")
    d = cards.pop() if cards else 1
    scopes = graph.scopes
    k = 0
    sums = 0.0
    leaves = 0.0
    n_leaf = n_sum = 0
    idem = graph.semiring.idempotent_add
    for i, n in graph.nodes.items():
        if isinstance(n, Sum):
            n_sum += 1
            kv = max(len(scopes[i] - scopes[ch]) for ch in n.children)
            k = max(k, kv)
            if not idem:
                sums += c + kv * d * c
        elif isinstance(n, Leaf):
            n_leaf += 1
            leaves += d ** len(n.scope) * (e + c)
    edges = graph.size * c
    bound = edges + n_leaf * d * (e + c) + (0.0 if idem else n_sum * (c + k * d * c))
    return CostEstimate(edges + leaves + sums, edges, leaves, sums, k, d, bound)
