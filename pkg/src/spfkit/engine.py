"""Summation of arbitrary SPFs by conditioning on shared variables.

Non-decomposable products are replaced by a sum over the values of a shared
variable; each branch is the product restricted to that value and guarded by
an indicator. Results are cached per node of a hash-consed working store, so
identical residual subproblems are summed once.
"""

from __future__ import annotations

import sys
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List

from .graph import Const, Finite, Leaf, Product, SpfError, SpfGraph, Sum
from .semiring import BOOLEAN, Value
from .store import ResourceError, Store
from .summation import LeafOptions, NoWitness, sum_leaf

__all__ = [
    "EngineConfig",
    "EngineStats",
    "Engine",
    "sum_spf",
    "decompose",
    "make_deterministic_decomposable",
    "ResourceError",
]

HEURISTICS = ("most-shared", "first-index")
ORDERS = ("absorbing-first", "declaration")


@dataclass(frozen=True)
class EngineConfig:
    variable_heuristic: str = "most-shared"
    child_order: str = "absorbing-first"
    enforce_determinism: bool = False
    node_budget: int = 10 ** 6

    def __post_init__(self):
        if self.variable_heuristic not in HEURISTICS:
            raise ValueError(f"variable_heuristic must be one of {HEURISTICS}")
        if self.child_order not in ORDERS:
            raise ValueError(f"child_order must be one of {ORDERS}")
        if self.node_budget <= 0:
            raise ValueError("node_budget must be positive")


@dataclass
class EngineStats:
    cache_hits: int = 0
    nodes_created: int = 0
    decompositions: int = 0
    early_exits: int = 0
    branches: int = 0  # conditioned copies attempted, before zero branches are dropped

    def as_dict(self) -> dict:
        return dict(self.__dict__)


class Engine:
    """One query's private working copy of a graph."""

    def __init__(self, graph: SpfGraph, config: EngineConfig = EngineConfig()):
        self.graph = graph
        self.config = config
        self.semiring = graph.semiring
        self.store = Store.from_graph(graph, budget=config.node_budget)
        self.cache: Dict[int, Value] = {}
        self.replaced: Dict[int, int] = {}
        self.created_sums: List[int] = []
        self.stats = EngineStats()
        self._compiled: Dict[int, int] = {}
        self._guards: Dict[int, frozenset] = {}

    # -- helpers ------------------------------------------------------------

    def _ordered(self, children):
        if self.config.child_order == "declaration":
            return list(children)
        st = self.store

        def key(c):
            n = st.nodes[c]
            kind = 0 if isinstance(n, Const) else 1 if isinstance(n, Leaf) else 2
            return kind, len(st.scopes[c])

        return sorted(children, key=key)

    def _ones(self, missing) -> Value:
        s = self.semiring
        if not missing:
            return s.one
        if s.idempotent_add:
            return s.one
        k = 1
        for v in missing:
            d = self.graph.vars[v].domain
            if not isinstance(d, Finite):
                raise SpfError(f"cannot sum ones over continuous {self.graph.vars[v].name} in {s.name}")
            k *= d.size
        return s.ones(k)

    def _shared_counts(self, children) -> Counter:
        cnt = Counter()
        for c in children:
            cnt.update(self.store.scopes[c])
        return cnt

    def _choose(self, counts: Counter, candidates) -> int:
        finite = [v for v in candidates if self.graph.vars[v].finite]
        if not finite:
            raise SpfError("no finite variable to condition on (continuous conditioning is not supported)")
        if self.config.variable_heuristic == "first-index":
            return min(finite)
        return min(finite, key=lambda v: (-counts[v], v))

    def _is_decomposable(self, children) -> bool:
        seen = set()
        for c in children:
            sc = self.store.scopes[c]
            if seen & sc:
                return False
            seen |= sc
        return True

    # -- conditioning -------------------------------------------------------

    def condition(self, v: int, var: int) -> int:
        """Sum over values t of ``var`` of (node v restricted to t) x [var = t]."""
        st = self.store
        branches = []
        for t in range(self.graph.vars.card(var)):
            self.stats.branches += 1
            r = st.restrict(v, {var: t}, {})
            if r == st.zero:
                continue
            ind = st.indicator(var, t)
            rn = st.nodes[r]
            if isinstance(rn, Product):
                branches.append(st.make_product(rn.children + (ind,)))
            else:
                branches.append(st.make_product((r, ind)))
        s = st.make_sum(branches)
        if isinstance(st.nodes[s], Sum):
            self.created_sums.append(s)
        self.stats.nodes_created = st.created
        return s

    def decompose(self, v: int) -> int:
        st = self.store
        n = st.nodes[v]
        if not isinstance(n, Product):
            raise SpfError(f"node {v} is not a product")
        counts = self._shared_counts(n.children)
        shared = [x for x, k in counts.items() if k >= 2]
        if not shared:
            raise SpfError(f"product node {v} is already decomposable")
        var = self._choose(counts, shared)
        self.stats.decompositions += 1
        s = self.condition(v, var)
        self.replaced[v] = s
        return s

    # -- summation ----------------------------------------------------------

    def sum(self, v: int) -> Value:
        if v in self.cache:
            self.stats.cache_hits += 1
            return self.cache[v]
        s = self.semiring
        st = self.store
        n = st.nodes[v]
        if isinstance(n, Const):
            acc = n.value
        elif isinstance(n, Leaf):
            acc, _ = sum_leaf(self.graph, n, options=LeafOptions())
        elif isinstance(n, Sum):
            acc = s.zero
            sc = st.scopes[v]
            kids = self._ordered(n.children)
            for j, c in enumerate(kids):
                term = s.mul(self.sum(c), self._ones(sc - st.scopes[c]))
                acc = s.add(acc, term)
                if s.add_absorbing is not None and acc == s.add_absorbing and j < len(kids) - 1:
                    self.stats.early_exits += 1
                    break
        elif self._is_decomposable(n.children):
            acc = s.one
            kids = self._ordered(n.children)
            for j, c in enumerate(kids):
                acc = s.mul(acc, self.sum(c))
                if acc == s.zero:
                    # a zero summation means the child is identically zero
                    if j < len(kids) - 1:
                        self.stats.early_exits += 1
                    self.replaced[v] = st.zero
                    break
        else:
            new = self.decompose(v)
            acc = s.mul(self.sum(new), self._ones(st.scopes[v] - st.scopes[new]))
        self.cache[v] = acc
        return acc

    def run(self) -> Value:
        limit = sys.getrecursionlimit()
        sys.setrecursionlimit(max(limit, 50000))
        try:
            return self.sum(self.store.root)
        except ResourceError as e:
            self.stats.nodes_created = self.store.created
            e.stats = self.stats
            raise
        finally:
            self.stats.nodes_created = self.store.created
            sys.setrecursionlimit(limit)

    def resolve(self, i: int) -> int:
        while i in self.replaced:
            i = self.replaced[i]
        return i

    def final_graph(self) -> SpfGraph:
        return self.export()[0]

    def export(self):
        """The working graph with every decomposed product replaced, and a map
        from working ids to exported ids."""
        st = self.store
        memo: Dict[int, int] = {}
        order = []
        stack = [(st.root, False)]
        while stack:
            i, expanded = stack.pop()
            i = self.resolve(i)
            if i in memo:
                continue
            n = st.nodes[i]
            if not isinstance(n, (Sum, Product)):
                memo[i] = i
                continue
            if not expanded:
                stack.append((i, True))
                stack.extend((c, False) for c in n.children)
                continue
            kids = [memo[self.resolve(c)] for c in n.children]
            if list(kids) == list(n.children):
                memo[i] = i
            else:
                memo[i] = st.make_sum(kids) if isinstance(n, Sum) else st.make_product(kids)
            order.append(i)
        graph, new = st.export(memo[self.resolve(st.root)])
        return graph, {i: new[m] for i, m in memo.items() if m in new}

    def extract_argument(self) -> Dict[int, object]:
        """Downward pass over the summed working graph (idempotent sums only)."""
        s = self.semiring
        if not s.idempotent_add:
            raise SpfError(f"argument extraction needs an idempotent sum; {s.name} is not")
        st = self.store
        root = st.root
        if s is BOOLEAN and self.cache.get(root) == s.zero:
            raise NoWitness("the function is unsatisfiable")
        x: Dict[int, object] = {}
        stack = [root]
        seen = set()
        while stack:
            i = self.resolve(stack.pop())
            if i in seen:
                continue
            seen.add(i)
            n = st.nodes[i]
            if isinstance(n, Product):
                stack.extend(n.children)
            elif isinstance(n, Sum):
                target = self.cache[i]
                for c in n.children:
                    c2 = self.resolve(c)
                    if c in self.cache and self.cache[c] == target:
                        stack.append(c)
                        break
                    if c2 in self.cache and self.cache[c2] == target:
                        stack.append(c2)
                        break
                else:
                    raise SpfError(f"sum node {i}: no summed child attains the node value")
            elif isinstance(n, Leaf):
                if n.table is None:
                    raise SpfError("argument extraction over registered leaves is not supported here")
                target = self.cache[i]
                flat = n.table.index(target)
                shape = [self.graph.vars.card(v) for v in n.scope]
                for v, d in zip(reversed(n.scope), reversed(shape)):
                    val = flat % d
                    flat //= d
                    if v in x and x[v] != val:
                        raise SpfError(f"conflicting choices for {self.graph.vars[v].name}")
                    x[v] = val
        for v, var in enumerate(self.graph.vars):
            if v not in x:
                x[v] = 0 if var.finite else var.domain.lo
        return x

    # -- deterministic, decomposable compilation ---------------------------

    def guard(self, i: int) -> frozenset:
        """(variable, value) pairs that hold wherever node i is nonzero."""
        g = self._guards.get(i)
        if g is not None:
            return g
        st = self.store
        n = st.nodes[i]
        z = self.semiring.zero
        if isinstance(n, Leaf):
            g = frozenset()
            if n.table is not None:
                nz = [k for k, a in enumerate(n.table) if a != z]
                if len(nz) == 1:
                    flat = nz[0]
                    pairs = []
                    for v in reversed(n.scope):
                        d = self.graph.vars.card(v)
                        pairs.append((v, flat % d))
                        flat //= d
                    g = frozenset(pairs)
        elif isinstance(n, Product):
            g = frozenset().union(*(self.guard(c) for c in n.children))
        elif isinstance(n, Sum):
            g = frozenset.intersection(*(self.guard(c) for c in n.children))
        else:
            g = frozenset()
        self._guards[i] = g
        return g

    def _disjoint(self, a: int, b: int) -> bool:
        ga = dict(self.guard(a))
        for v, t in self.guard(b):
            if v in ga and ga[v] != t:
                return True
        return False

    def deterministic_by_guards(self, i: int) -> bool:
        kids = self.store.nodes[i].children
        return all(self._disjoint(kids[p], kids[q]) for p in range(len(kids)) for q in range(p + 1, len(kids)))

    def compile(self, v: int) -> int:
        done = self._compiled.get(v)
        if done is not None:
            return done
        st = self.store
        n = st.nodes[v]
        if isinstance(n, (Leaf, Const)):
            out = v
        elif isinstance(n, Product):
            p = st.make_product([self.compile(c) for c in n.children])
            pn = st.nodes[p]
            if isinstance(pn, Product) and not self._is_decomposable(pn.children):
                out = self.compile(self.decompose(p))
            elif p != v:
                out = self.compile(p)
            else:
                out = p
        else:
            s = st.make_sum([self.compile(c) for c in n.children])
            sn = st.nodes[s]
            if isinstance(sn, Sum) and not self.deterministic_by_guards(s):
                counts = self._shared_counts(sn.children)
                var = self._choose(counts, st.scopes[s])
                self.stats.decompositions += 1
                out = self.compile(self.condition(s, var))
            elif s != v:
                out = self.compile(s)
            else:
                out = s
        self._compiled[v] = out
        return out

    def compile_root(self) -> SpfGraph:
        limit = sys.getrecursionlimit()
        sys.setrecursionlimit(max(limit, 50000))
        try:
            root = self.compile(self.store.root)
        except ResourceError as e:
            e.stats = self.stats
            raise
        finally:
            self.stats.nodes_created = self.store.created
            sys.setrecursionlimit(limit)
        return self.store.to_graph(root)


def decompose(graph: SpfGraph, v: int, config: EngineConfig = EngineConfig()):
    """Replace product node ``v`` by a sum over the values of a shared variable.

    Returns ``(id, graph)``: the new graph and the id of the node standing in
    for ``v`` (a sum, or what it simplified to; None if it vanished)."""
    eng = Engine(graph, config)
    s = eng.decompose(eng.store.remap[v])
    out, ids = eng.export()
    return ids.get(s), out


def make_deterministic_decomposable(graph: SpfGraph, config: EngineConfig = EngineConfig()) -> SpfGraph:
    """Compatible Boolean graph whose products are decomposable and whose sums
    have pairwise-disjoint supports."""
    if graph.semiring is not BOOLEAN:
        raise SpfError("make_deterministic_decomposable works on Boolean graphs")
    for v in graph.vars:
        if not v.finite:
            raise SpfError("make_deterministic_decomposable needs finite domains")
    return Engine(graph, config).compile_root()


def sum_spf(graph: SpfGraph, config: EngineConfig = EngineConfig()):
    """Sum ``graph`` over its root scope. Returns ``(value, stats, final_graph)``.

    With ``enforce_determinism`` the graph's 0/1 leaves are read as a Boolean
    function, compiled to deterministic decomposable form, and summed back in
    the graph's own semiring (model counting when that semiring is counting).
    """
    if config.enforce_determinism:
        from .summation import sum_decomposable
        from .translate import translate

        source = graph.semiring
        boolean = graph if source is BOOLEAN else translate(graph, BOOLEAN, unchecked=True)
        eng = Engine(boolean, config)
        compiled = eng.compile_root()
        back = compiled if source is BOOLEAN else translate(compiled, source, unchecked=True)
        value = sum_decomposable(back).value
        value = source.mul(value, _ones_over(back, graph))
        return value, eng.stats, back
    eng = Engine(graph, config)
    value = eng.run()
    return value, eng.stats, eng.final_graph()


def _ones_over(compiled: SpfGraph, original: SpfGraph):
    """Sum of ones over variables the compilation dropped from the root scope."""
    s = original.semiring
    missing = original.scopes[original.root] - compiled.scopes[compiled.root]
    if not missing or s.idempotent_add:
        return s.one
    k = 1
    for v in missing:
        k *= original.vars.card(v)
    return s.ones(k)
