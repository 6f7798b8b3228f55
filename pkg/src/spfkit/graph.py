"""Sum-product functions as immutable rooted DAGs.

A graph holds a semiring, a variable table and a mapping from node ids to
nodes. Children always refer to existing ids; cycles, dangling references and
values outside the semiring carrier are rejected by :func:`build_graph`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from . import registry
from .semiring import CarrierError, Semiring, Value, get_semiring, values_close

__all__ = [
    "SpfError",
    "CycleError",
    "Finite",
    "Interval",
    "Variable",
    "VariableTable",
    "Sum",
    "Product",
    "Const",
    "Leaf",
    "Registered",
    "SpfGraph",
    "build_graph",
    "scope",
    "evaluate",
    "evaluate_all",
    "is_decomposable",
    "is_deterministic",
    "compatible",
    "simplify",
    "build_flat_mixture",
    "indicator",
    "graph_to_json",
    "graph_from_json",
]


class SpfError(ValueError):
    """Malformed graph or an operation whose precondition does not hold."""


class CycleError(SpfError):
    pass


# --- variables -------------------------------------------------------------

@dataclass(frozen=True)
class Finite:
    size: int

    def __post_init__(self):
        if self.size < 1:
            raise SpfError(f"finite domain needs at least one value, got {self.size}")

    def contains(self, v) -> bool:
        return isinstance(v, (int, np.integer)) and not isinstance(v, bool) and 0 <= v < self.size


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise SpfError(f"interval needs lo < hi, got [{self.lo}, {self.hi}]")

    def contains(self, v) -> bool:
        return isinstance(v, (int, float, np.floating, np.integer)) and self.lo <= v <= self.hi


Domain = Union[Finite, Interval]


@dataclass(frozen=True)
class Variable:
    name: str
    domain: Domain

    @property
    def finite(self) -> bool:
        return isinstance(self.domain, Finite)


class VariableTable(tuple):
    """Ordered, immutable tuple of :class:`Variable` with name lookup."""

    def __new__(cls, variables: Iterable[Variable]):
        self = super().__new__(cls, tuple(variables))
        names = [v.name for v in self]
        if len(set(names)) != len(names):
            raise SpfError("variable names must be unique")
        return self

    @classmethod
    def finite(cls, sizes: Sequence[int], prefix: str = "X") -> "VariableTable":
        return cls(Variable(f"{prefix}{i + 1}", Finite(d)) for i, d in enumerate(sizes))

    @classmethod
    def intervals(cls, bounds: Sequence[Tuple[float, float]], prefix: str = "Y") -> "VariableTable":
        return cls(Variable(f"{prefix}{i}", Interval(float(lo), float(hi))) for i, (lo, hi) in enumerate(bounds))

    @cached_property
    def _index(self) -> Dict[str, int]:
        return {v.name: i for i, v in enumerate(self)}

    def index(self, key) -> int:  # type: ignore[override]
        if isinstance(key, str):
            try:
                return self._index[key]
            except KeyError:
                raise SpfError(f"unknown variable {key!r}") from None
        if isinstance(key, (int, np.integer)) and 0 <= key < len(self):
            return int(key)
        raise SpfError(f"unknown variable {key!r}")

    def card(self, i: int) -> int:
        d = self[i].domain
        if not isinstance(d, Finite):
            raise SpfError(f"variable {self[i].name} is continuous")
        return d.size

    def normalize(self, assignment: Mapping) -> Dict[int, object]:
        """Key an assignment by variable index and check values lie in their domains."""
        out = {}
        for k, v in assignment.items():
            i = self.index(k)
            if not self[i].domain.contains(v):
                raise SpfError(f"value {v!r} outside the domain of {self[i].name}")
            out[i] = int(v) if self[i].finite else float(v)
        return out


# --- nodes -----------------------------------------------------------------

@dataclass(frozen=True)
class Sum:
    children: Tuple[int, ...]


@dataclass(frozen=True)
class Product:
    children: Tuple[int, ...]


@dataclass(frozen=True)
class Const:
    value: Value


@dataclass(frozen=True)
class Registered:
    """Reference to a registry function. ``bound`` fixes some argument
    positions; the remaining positions are fed by the leaf scope in order."""

    name: str
    params: Tuple[float, ...] = ()
    bound: Tuple[Tuple[int, float], ...] = ()

    def arity(self) -> int:
        fn = registry.get_function(self.name)
        return fn.arity(np.asarray(self.params)) if fn.arity else None

    def full_args(self, free) -> np.ndarray:
        if not self.bound:
            return np.asarray(free, dtype=float)
        n = len(free) + len(self.bound)
        out = np.empty(n)
        fixed = dict(self.bound)
        it = iter(free)
        for p in range(n):
            out[p] = fixed[p] if p in fixed else next(it)
        return out

    def free_positions(self, n_free: int):
        fixed = {p for p, _ in self.bound}
        return [p for p in range(n_free + len(self.bound)) if p not in fixed]

    def __call__(self, free) -> float:
        fn = registry.get_function(self.name)
        return fn.value(np.asarray(self.params), self.full_args(free))


@dataclass(frozen=True)
class Leaf:
    """Leaf function over ``scope`` (variable indices).

    Exactly one of ``table`` (row-major values over the joint finite domain of
    the scope) or ``fn`` is set.
    """

    scope: Tuple[int, ...]
    table: Optional[Tuple[Value, ...]] = None
    fn: Optional[Registered] = None


Node = Union[Sum, Product, Const, Leaf]


def indicator(var: int, value: int, card: int, zero, one) -> Leaf:
    """Leaf ``[X_var = value]``."""
    return Leaf((var,), tuple(one if t == value else zero for t in range(card)))


def table_index(shape: Sequence[int], values: Sequence[int]) -> int:
    idx = 0
    for d, v in zip(shape, values):
        idx = idx * d + v
    return idx


# --- graph -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SpfGraph:
    semiring: Semiring
    vars: VariableTable
    nodes: Mapping[int, Node]
    root: int
    order: Tuple[int, ...] = field(repr=False)  # children before parents

    @cached_property
    def scopes(self) -> Dict[int, frozenset]:
        out: Dict[int, frozenset] = {}
        for i in self.order:
            n = self.nodes[i]
            if isinstance(n, Leaf):
                out[i] = frozenset(n.scope)
            elif isinstance(n, Const):
                out[i] = frozenset()
            else:
                out[i] = frozenset().union(*(out[c] for c in n.children))
        return out

    @property
    def size(self) -> int:
        return sum(len(n.children) for n in self.nodes.values() if isinstance(n, (Sum, Product)))

    def __len__(self) -> int:
        return len(self.nodes)

    def count(self, kind) -> int:
        return sum(isinstance(n, kind) for n in self.nodes.values())

    def leaf_shape(self, leaf: Leaf) -> Tuple[int, ...]:
        return tuple(self.vars.card(v) for v in leaf.scope)

    def parents(self) -> Dict[int, list]:
        out = {i: [] for i in self.nodes}
        for i in self.order:
            n = self.nodes[i]
            if isinstance(n, (Sum, Product)):
                for c in n.children:
                    out[c].append(i)
        return out


def _topological_order(nodes: Mapping[int, Node], root: int) -> Tuple[int, ...]:
    if root not in nodes:
        raise SpfError(f"root {root!r} is not a node")
    order = []
    state: Dict[int, int] = {}  # 1 = on stack, 2 = done
    stack = [(root, False)]
    while stack:
        i, expanded = stack.pop()
        if expanded:
            state[i] = 2
            order.append(i)
            continue
        s = state.get(i)
        if s == 2:
            continue
        if s == 1:
            raise CycleError(f"cycle through node {i}")
        state[i] = 1
        stack.append((i, True))
        n = nodes[i]
        if isinstance(n, (Sum, Product)):
            for c in reversed(n.children):
                if c not in nodes:
                    raise SpfError(f"node {i} references unknown child {c!r}")
                cs = state.get(c)
                if cs == 1:
                    raise CycleError(f"cycle through node {c}")
                if cs is None:
                    stack.append((c, False))
    return tuple(order)


def _validate_node(i, n, semiring: Semiring, vars: VariableTable):
    if isinstance(n, (Sum, Product)):
        if len(n.children) == 0:
            raise SpfError(f"node {i}: sum/product nodes need at least one child")
    elif isinstance(n, Const):
        try:
            semiring.check(n.value)
        except CarrierError as e:
            raise SpfError(f"node {i}: {e}") from None
    elif isinstance(n, Leaf):
        if len(set(n.scope)) != len(n.scope):
            raise SpfError(f"node {i}: repeated variable in leaf scope")
        for v in n.scope:
            if not (isinstance(v, int) and 0 <= v < len(vars)):
                raise SpfError(f"node {i}: unknown variable {v!r}")
        if (n.table is None) == (n.fn is None):
            raise SpfError(f"node {i}: a leaf needs exactly one of table / fn")
        if n.table is not None:
            size = 1
            for v in n.scope:
                if not vars[v].finite:
                    raise SpfError(f"node {i}: table leaf over continuous variable {vars[v].name}")
                size *= vars[v].domain.size
            if len(n.table) != size:
                raise SpfError(f"node {i}: table has {len(n.table)} entries, expected {size}")
            for a in n.table:
                if not semiring.contains(a):
                    raise SpfError(f"node {i}: table value {a!r} not in the {semiring.name} carrier")
        else:
            try:
                arity = n.fn.arity()
            except KeyError as e:
                raise SpfError(f"node {i}: {e}") from None
            if arity is not None and arity != len(n.scope) + len(n.fn.bound):
                raise SpfError(f"node {i}: function {n.fn.name} takes {arity} arguments")
    else:
        raise SpfError(f"node {i}: unknown node type {type(n).__name__}")


def build_graph(semiring, vars, nodes, root) -> SpfGraph:
    """Validate and freeze a graph. ``nodes`` is a mapping id -> node or a
    sequence (ids are positions). Nodes unreachable from the root are dropped."""
    semiring = get_semiring(semiring)
    if not isinstance(vars, VariableTable):
        vars = VariableTable(vars)
    if not isinstance(nodes, Mapping):
        nodes = dict(enumerate(nodes))
    order = _topological_order(nodes, root)
    kept = {i: nodes[i] for i in order}
    for i, n in kept.items():
        _validate_node(i, n, semiring, vars)
    return SpfGraph(semiring, vars, kept, root, order)


def scope(graph: SpfGraph, node: Optional[int] = None) -> frozenset:
    return graph.scopes[graph.root if node is None else node]


# --- evaluation ------------------------------------------------------------

def leaf_value(graph: SpfGraph, leaf: Leaf, x: Mapping[int, object]) -> Value:
    if leaf.table is not None:
        return leaf.table[table_index(graph.leaf_shape(leaf), [x[v] for v in leaf.scope])]
    return leaf.fn([x[v] for v in leaf.scope])


def condition_leaf(vars: VariableTable, leaf: Leaf, x: Mapping[int, object]):
    """Leaf with the variables in ``x`` fixed: a :class:`Const` when the whole
    scope is assigned, otherwise a curried leaf over the remaining variables."""
    assigned = [v in x for v in leaf.scope]
    if not any(assigned):
        return leaf
    if all(assigned):
        if leaf.table is not None:
            shape = [vars.card(v) for v in leaf.scope]
            return Const(leaf.table[table_index(shape, [x[v] for v in leaf.scope])])
        return Const(leaf.fn([x[v] for v in leaf.scope]))
    rest = tuple(v for v in leaf.scope if v not in x)
    if leaf.table is not None:
        shape = [vars.card(v) for v in leaf.scope]
        table = []
        for vals in itertools.product(*(range(vars.card(v)) for v in rest)):
            full = dict(zip(rest, vals))
            full.update({v: x[v] for v in leaf.scope if v in x})
            table.append(leaf.table[table_index(shape, [full[v] for v in leaf.scope])])
        return Leaf(rest, tuple(table))
    fn = leaf.fn
    bound = dict(fn.bound)
    for p, v in zip(fn.free_positions(len(leaf.scope)), leaf.scope):
        if v in x:
            bound[p] = float(x[v])
    return Leaf(rest, fn=Registered(fn.name, fn.params, tuple(sorted(bound.items()))))


def _eval_nodes(graph: SpfGraph, order, x) -> Dict[int, Value]:
    s = graph.semiring
    memo: Dict[int, Value] = {}
    for i in order:
        n = graph.nodes[i]
        if isinstance(n, Sum):
            acc = s.zero
            for c in n.children:
                acc = s.add(acc, memo[c])
        elif isinstance(n, Product):
            acc = s.one
            for c in n.children:
                acc = s.mul(acc, memo[c])
        elif isinstance(n, Const):
            acc = n.value
        else:
            acc = leaf_value(graph, n, x)
        memo[i] = acc
    return memo


def _full_assignment(graph: SpfGraph, assignment: Mapping, needed) -> Dict[int, object]:
    x = graph.vars.normalize(assignment)
    missing = sorted(set(needed) - set(x))
    if missing:
        raise SpfError("assignment is missing variable " + ", ".join(graph.vars[m].name for m in missing))
    return x


def evaluate_all(graph: SpfGraph, assignment: Mapping) -> Dict[int, Value]:
    """Value of every node at ``assignment``; each node is computed exactly once."""
    x = _full_assignment(graph, assignment, graph.scopes[graph.root])
    return _eval_nodes(graph, graph.order, x)


def evaluate(graph: SpfGraph, assignment: Mapping) -> Value:
    return evaluate_all(graph, assignment)[graph.root]


# --- structural checks -----------------------------------------------------

@dataclass(frozen=True)
class Decomposability:
    ok: bool
    node: Optional[int] = None
    variable: Optional[int] = None

    def __bool__(self) -> bool:
        return self.ok


def product_shared_variable(scopes, children) -> Optional[int]:
    """Smallest variable index occurring in two or more child scopes."""
    seen = set()
    shared = None
    for c in children:
        overlap = seen & scopes[c]
        if overlap:
            m = min(overlap)
            shared = m if shared is None else min(shared, m)
        seen |= scopes[c]
    return shared


def is_decomposable(graph: SpfGraph) -> Decomposability:
    scopes = graph.scopes
    for i in graph.order:
        n = graph.nodes[i]
        if isinstance(n, Product):
            v = product_shared_variable(scopes, n.children)
            if v is not None:
                return Decomposability(False, i, v)
    return Decomposability(True)


DEFAULT_ENUMERATION_LIMIT = 2 ** 20


def _joint_assignments(graph: SpfGraph, variables, limit: int):
    variables = sorted(variables)
    total = 1
    for v in variables:
        if not graph.vars[v].finite:
            raise SpfError(f"cannot enumerate continuous variable {graph.vars[v].name}")
        total *= graph.vars[v].domain.size
    if total > limit:
        raise SpfError(f"{total} joint assignments exceed the enumeration limit {limit}")
    ranges = [range(graph.vars[v].domain.size) for v in variables]
    for values in itertools.product(*ranges):
        yield dict(zip(variables, values))


def _sub_order(graph: SpfGraph, node: int):
    reach = {node}
    for i in reversed(graph.order):
        if i in reach:
            n = graph.nodes[i]
            if isinstance(n, (Sum, Product)):
                reach.update(n.children)
    return [i for i in graph.order if i in reach]


def is_deterministic(graph: SpfGraph, enumeration_limit: int = DEFAULT_ENUMERATION_LIMIT) -> bool:
    """Brute force: every sum node has at most one nonzero child at each joint
    assignment of its scope."""
    s = graph.semiring
    for i in graph.order:
        n = graph.nodes[i]
        if not isinstance(n, Sum) or len(n.children) < 2:
            continue
        sub = _sub_order(graph, i)
        for x in _joint_assignments(graph, graph.scopes[i], enumeration_limit):
            memo = _eval_nodes(graph, sub, x)
            if sum(memo[c] != s.zero for c in n.children) > 1:
                return False
    return True


def compatible(g1: SpfGraph, g2: SpfGraph, enumeration_limit: int = DEFAULT_ENUMERATION_LIMIT) -> bool:
    """True iff both graphs compute the same mapping (enumerated)."""
    if g1.semiring is not g2.semiring:
        raise SpfError("graphs are over different semirings")
    if tuple(g1.vars) != tuple(g2.vars):
        raise SpfError("graphs are over different variable tables")
    variables = g1.scopes[g1.root] | g2.scopes[g2.root]
    for x in _joint_assignments(g1, variables, enumeration_limit):
        a = _eval_nodes(g1, g1.order, x)[g1.root]
        b = _eval_nodes(g2, g2.order, x)[g2.root]
        if not values_close(g1.semiring, a, b):
            return False
    return True


def simplify(graph: SpfGraph, partial: Mapping) -> SpfGraph:
    """Restrict ``graph`` to a partial assignment and simplify.

    Fully assigned leaves become constants, zeros are dropped from sums,
    products with a zero child collapse, single-child nodes are inlined.
    """
    from .store import Store

    st = Store.from_graph(graph)
    x = graph.vars.normalize(partial)
    root = st.restrict(st.root, x)
    return st.to_graph(root)


# --- fixtures --------------------------------------------------------------

def build_flat_mixture(semiring, r: int, n: int, tables, vars: Optional[VariableTable] = None) -> SpfGraph:
    """Sum of ``r`` products of ``n`` univariate leaves; ``tables[j][i]`` is the
    value list of leaf (j, i) over variable i."""
    semiring = get_semiring(semiring)
    if r < 1 or n < 1:
        raise SpfError("need r >= 1 and n >= 1")
    if len(tables) != r or any(len(row) != n for row in tables):
        raise SpfError(f"expected an {r} x {n} grid of tables")
    if vars is None:
        vars = VariableTable.finite([len(tables[0][i]) for i in range(n)])
    if len(vars) != n:
        raise SpfError("variable table does not match n")
    nodes = []
    prods = []
    for j in range(r):
        kids = []
        for i in range(n):
            t = tuple(tables[j][i])
            if len(t) != vars.card(i):
                raise SpfError(f"table ({j}, {i}) has {len(t)} entries, domain has {vars.card(i)}")
            nodes.append(Leaf((i,), t))
            kids.append(len(nodes) - 1)
        nodes.append(Product(tuple(kids)))
        prods.append(len(nodes) - 1)
    nodes.append(Sum(tuple(prods)))
    return build_graph(semiring, vars, nodes, len(nodes) - 1)


# --- JSON interchange ------------------------------------------------------

def _domain_to_json(d: Domain):
    return {"finite": d.size} if isinstance(d, Finite) else {"interval": [d.lo, d.hi]}


def variables_to_json(vars: VariableTable):
    return [{"name": v.name, "domain": _domain_to_json(v.domain)} for v in vars]


def variables_from_json(items) -> VariableTable:
    out = []
    for item in items:
        d = item["domain"]
        if "finite" in d:
            out.append(Variable(item["name"], Finite(int(d["finite"]))))
        elif "interval" in d:
            lo, hi = d["interval"]
            out.append(Variable(item["name"], Interval(float(lo), float(hi))))
        else:
            raise SpfError(f"bad domain {d!r}")
    return VariableTable(out)


def graph_to_json(graph: SpfGraph) -> dict:
    s = graph.semiring
    names = [v.name for v in graph.vars]
    out_nodes = []
    for i in graph.order:
        n = graph.nodes[i]
        item = {"id": i}
        if isinstance(n, (Sum, Product)):
            item["kind"] = "sum" if isinstance(n, Sum) else "product"
            item["children"] = list(n.children)
        elif isinstance(n, Const):
            item["kind"] = "const"
            item["value"] = s.to_json(n.value)
        else:
            item["kind"] = "leaf"
            item["scope"] = [names[v] for v in n.scope]
            if n.table is not None:
                item["table"] = [s.to_json(a) for a in n.table]
            else:
                reg = {"name": n.fn.name, "params": list(n.fn.params)}
                if n.fn.bound:
                    reg["bound"] = [list(b) for b in n.fn.bound]
                item["registered"] = reg
        out_nodes.append(item)
    return {
        "type": "spf",
        "semiring": s.name,
        "variables": variables_to_json(graph.vars),
        "nodes": out_nodes,
        "root": graph.root,
    }


def graph_from_json(data: Mapping, semiring=None) -> SpfGraph:
    """Inverse of :func:`graph_to_json`; ``semiring`` overrides the declared one."""
    try:
        return _graph_from_json(data, semiring)
    except KeyError as e:
        raise SpfError(f"SPF JSON is missing field {e.args[0]!r}") from None


def _graph_from_json(data: Mapping, semiring) -> SpfGraph:
    s = get_semiring(semiring if semiring is not None else data["semiring"])
    vars = variables_from_json(data["variables"])
    nodes: Dict[int, Node] = {}
    for item in data["nodes"]:
        kind = item["kind"]
        i = item["id"]
        if i in nodes:
            raise SpfError(f"duplicate node id {i!r}")
        if kind == "sum":
            nodes[i] = Sum(tuple(item["children"]))
        elif kind == "product":
            nodes[i] = Product(tuple(item["children"]))
        elif kind == "const":
            nodes[i] = Const(s.coerce(item["value"]))
        elif kind == "leaf":
            sc = tuple(vars.index(v) for v in item["scope"])
            if "table" in item:
                nodes[i] = Leaf(sc, tuple(s.coerce(a) for a in item["table"]))
            else:
                reg = item["registered"]
                bound = tuple((int(p), float(v)) for p, v in reg.get("bound", ()))
                nodes[i] = Leaf(sc, fn=Registered(reg["name"], tuple(map(float, reg["params"])), bound))
        else:
            raise SpfError(f"unknown node kind {kind!r}")
    return build_graph(s, vars, nodes, data["root"])
