"""Mutable, hash-consed node store used while transforming graphs.

Structurally identical nodes share one id, so simplified residual subgraphs
that coincide are recognised as the same node (and hit summation caches).
"""

from __future__ import annotations

from typing import Dict, List, Mapping, Optional

from .graph import (
    Const,
    Leaf,
    Product,
    SpfGraph,
    Sum,
    VariableTable,
    build_graph,
    condition_leaf,
    indicator,
)
from .semiring import Semiring


class ResourceError(RuntimeError):
    """The node budget of a transformation was exhausted."""

    def __init__(self, msg, stats=None):
        super().__init__(msg)
        self.stats = stats


class Store:
    def __init__(self, semiring: Semiring, vars: VariableTable, budget: Optional[int] = None):
        self.semiring = semiring
        self.vars = vars
        self.nodes: List = []
        self.scopes: List[frozenset] = []
        self._ids: Dict[object, int] = {}
        self.budget = budget
        self.created = 0  # nodes interned after `seal()`
        self._sealed = False
        self.root: Optional[int] = None
        self.zero = self.intern(Const(semiring.zero))
        self.one = self.intern(Const(semiring.one))

    # -- construction -------------------------------------------------------

    def intern(self, node) -> int:
        i = self._ids.get(node)
        if i is not None:
            return i
        if self._sealed:
            self.created += 1
            if self.budget is not None and self.created > self.budget:
                raise ResourceError(f"node budget of {self.budget} exceeded")
        i = len(self.nodes)
        self.nodes.append(node)
        if isinstance(node, Leaf):
            sc = frozenset(node.scope)
        elif isinstance(node, Const):
            sc = frozenset()
        else:
            sc = frozenset().union(*(self.scopes[c] for c in node.children))
        self.scopes.append(sc)
        self._ids[node] = i
        return i

    def seal(self):
        """Start counting newly created nodes against the budget."""
        self._sealed = True

    @classmethod
    def from_graph(cls, graph: SpfGraph, budget: Optional[int] = None) -> "Store":
        st = cls(graph.semiring, graph.vars, budget)
        remap: Dict[int, int] = {}
        for i in graph.order:
            n = graph.nodes[i]
            if isinstance(n, Sum):
                n = Sum(tuple(remap[c] for c in n.children))
            elif isinstance(n, Product):
                n = Product(tuple(remap[c] for c in n.children))
            remap[i] = st.intern(n)
        st.root = remap[graph.root]
        st.remap = remap
        st.seal()
        return st

    def is_const(self, i: int) -> bool:
        return isinstance(self.nodes[i], Const)

    def const(self, value) -> int:
        return self.intern(Const(value))

    def indicator(self, var: int, value: int) -> int:
        s = self.semiring
        return self.intern(indicator(var, value, self.vars.card(var), s.zero, s.one))

    def make_sum(self, children) -> int:
        s = self.semiring
        kids = []
        consts = []
        for c in children:
            n = self.nodes[c]
            if isinstance(n, Const):
                if n.value == s.zero:
                    continue
                if s.add_absorbing is not None and n.value == s.add_absorbing:
                    return self.const(n.value)
                consts.append(n.value)
            else:
                kids.append(c)
        if consts:
            kids.insert(0, self.const(s.fold_add(consts)))
        if not kids:
            return self.zero
        if len(kids) == 1:
            return kids[0]
        return self.intern(Sum(tuple(kids)))

    def make_product(self, children) -> int:
        s = self.semiring
        kids = []
        acc = s.one
        for c in children:
            n = self.nodes[c]
            if isinstance(n, Const):
                if n.value == s.zero:
                    return self.zero
                acc = s.mul(acc, n.value)
            else:
                kids.append(c)
        if acc == s.zero:
            return self.zero
        if acc != s.one:
            kids.insert(0, self.const(acc))
        if not kids:
            return self.one
        if len(kids) == 1:
            return kids[0]
        return self.intern(Product(tuple(kids)))

    # -- conditioning -------------------------------------------------------

    def restrict_leaf(self, leaf: Leaf, x: Mapping[int, object]) -> int:
        return self.intern(condition_leaf(self.vars, leaf, x))

    def restrict(self, node: int, x: Mapping[int, object], memo: Optional[Dict[int, int]] = None) -> int:
        """Id of the simplified restriction of ``node`` to the partial assignment ``x``."""
        if memo is None:
            memo = {}
        keys = set(x)
        # iterative post-order to survive deep graphs
        stack = [(node, False)]
        while stack:
            i, expanded = stack.pop()
            if i in memo:
                continue
            if not (self.scopes[i] & keys):
                memo[i] = i
                continue
            n = self.nodes[i]
            if isinstance(n, Leaf):
                memo[i] = self.restrict_leaf(n, x)
                continue
            if not expanded:
                stack.append((i, True))
                stack.extend((c, False) for c in n.children if c not in memo)
                continue
            kids = [memo[c] for c in n.children]
            if isinstance(n, Sum):
                memo[i] = self.make_sum(kids)
            else:
                memo[i] = self.make_product(kids)
        return memo[node]

    # -- export -------------------------------------------------------------

    def reachable(self, root: int) -> List[int]:
        order = []
        seen = set()
        stack = [(root, False)]
        while stack:
            i, expanded = stack.pop()
            if expanded:
                order.append(i)
                continue
            if i in seen:
                continue
            seen.add(i)
            stack.append((i, True))
            n = self.nodes[i]
            if isinstance(n, (Sum, Product)):
                stack.extend((c, False) for c in reversed(n.children) if c not in seen)
        return order

    def to_graph(self, root: int) -> SpfGraph:
        return self.export(root)[0]

    def export(self, root: int):
        """Graph rooted at ``root`` plus the map from store ids to its node ids."""
        order = self.reachable(root)
        new = {old: k for k, old in enumerate(order)}
        nodes = []
        for old in order:
            n = self.nodes[old]
            if isinstance(n, Sum):
                n = Sum(tuple(new[c] for c in n.children))
            elif isinstance(n, Product):
                n = Product(tuple(new[c] for c in n.children))
            nodes.append(n)
        return build_graph(self.semiring, self.vars, nodes, new[root]), new
