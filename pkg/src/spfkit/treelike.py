"""Junction trees and the tree-like SPFs built from them."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .graph import Const, Product, SpfError, Sum, VariableTable, build_graph, indicator
from .semiring import Semiring, get_semiring

__all__ = [
    "JunctionTree",
    "TreeReport",
    "TreelikeIndex",
    "validate_junction_tree",
    "treewidth",
    "build_treelike",
    "size_bound",
    "treelike_edge_count",
    "junction_tree_from_json",
    "junction_tree_to_json",
]


@dataclass(frozen=True)
class JunctionTree:
    """Rooted tree over vertices 0..m-1; ``parent[root]`` is None."""

    clusters: Tuple[Tuple[int, ...], ...]
    parent: Tuple[Optional[int], ...]

    def __post_init__(self):
        if len(self.clusters) != len(self.parent):
            raise SpfError("clusters and parent lists differ in length")
        object.__setattr__(self, "clusters", tuple(tuple(sorted(set(c))) for c in self.clusters))

    def __len__(self):
        return len(self.clusters)

    @property
    def roots(self) -> List[int]:
        return [i for i, p in enumerate(self.parent) if p is None]

    @property
    def root(self) -> int:
        r = self.roots
        if len(r) != 1:
            raise SpfError(f"a junction tree needs exactly one root, found {len(r)}")
        return r[0]

    def children(self, i: int) -> List[int]:
        return [j for j, p in enumerate(self.parent) if p == i]

    def separator(self, i: int) -> Tuple[int, ...]:
        """Separator between vertex i and its parent (empty at the root)."""
        p = self.parent[i]
        if p is None:
            return ()
        return tuple(sorted(set(self.clusters[i]) & set(self.clusters[p])))

    def ancestors(self, i: int) -> List[int]:
        out = []
        seen = {i}
        p = self.parent[i]
        while p is not None:
            if p in seen:
                raise SpfError("parent pointers contain a cycle")
            seen.add(p)
            out.append(p)
            p = self.parent[p]
        return out

    def path(self, i: int, j: int) -> List[int]:
        ai = [i] + self.ancestors(i)
        aj = [j] + self.ancestors(j)
        common = set(ai) & set(aj)
        up = []
        for v in ai:
            up.append(v)
            if v in common:
                break
        lca = up[-1]
        down = []
        for v in aj:
            if v == lca:
                break
            down.append(v)
        return up + down[::-1]

    def postorder(self) -> List[int]:
        order = []
        stack = [(self.root, False)]
        while stack:
            i, done = stack.pop()
            if done:
                order.append(i)
                continue
            stack.append((i, True))
            stack.extend((c, False) for c in self.children(i))
        return order


@dataclass(frozen=True)
class TreeReport:
    ok: bool
    kind: Optional[str] = None  # structure | coverage | running-intersection | separator
    vertex: Optional[int] = None
    detail: str = ""

    def __bool__(self):
        return self.ok


def validate_junction_tree(jt: JunctionTree, vars: VariableTable,
                           separators: Optional[Mapping[int, Sequence[int]]] = None) -> TreeReport:
    """Report the first violated junction-tree condition, or ok."""
    m = len(jt)
    if m == 0:
        return TreeReport(False, "structure", None, "no vertices")
    roots = jt.roots
    if len(roots) != 1:
        return TreeReport(False, "structure", None, f"expected one root, found {len(roots)}")
    for i, p in enumerate(jt.parent):
        if p is not None and not 0 <= p < m:
            return TreeReport(False, "structure", i, f"parent {p} does not exist")
        try:
            jt.ancestors(i)
        except SpfError:
            return TreeReport(False, "structure", i, "cycle through parent pointers")
    for i, c in enumerate(jt.clusters):
        for v in c:
            if not 0 <= v < len(vars):
                return TreeReport(False, "structure", i, f"unknown variable index {v}")
    covered = set().union(*map(set, jt.clusters))
    missing = [v for v in range(len(vars)) if v not in covered]
    if missing:
        return TreeReport(False, "coverage", None, f"{vars[missing[0]].name} is in no cluster")
    for i in range(m):
        for j in range(i + 1, m):
            shared = set(jt.clusters[i]) & set(jt.clusters[j])
            if not shared:
                continue
            for k in jt.path(i, j):
                lost = shared - set(jt.clusters[k])
                if lost:
                    name = vars[min(lost)].name
                    return TreeReport(False, "running-intersection", k,
                                      f"{name} is in vertices {i} and {j} but not in {k} between them")
    if separators:
        for i, sep in separators.items():
            if tuple(sorted(sep)) != jt.separator(i):
                return TreeReport(False, "separator", i, "stated separator differs from the cluster intersection")
    return TreeReport(True)


def treewidth(jt: JunctionTree) -> int:
    return max(len(c) for c in jt.clusters) - 1


def _values(vars: VariableTable, scope) -> List[Tuple[int, ...]]:
    return list(itertools.product(*(range(vars.card(v)) for v in scope)))


@dataclass(frozen=True)
class TreelikeIndex:
    """Node ids of the built graph by role."""

    root: int
    products: Dict[Tuple[int, Tuple[int, ...]], int]  # (vertex, cluster value) -> c node
    sums: Dict[Tuple[int, Tuple[int, ...]], int]  # (vertex, separator value) -> s node to its parent
    indicators: Dict[Tuple[int, int], int]


def build_treelike(jt: JunctionTree, psi: Mapping[int, Sequence], semiring, vars: VariableTable,
                   return_index: bool = False):
    """Tree-like SPF whose value at x is the product of psi_i(x restricted to C_i).

    ``psi[i]`` is a row-major table over the (sorted) cluster of vertex i.
    """
    s: Semiring = get_semiring(semiring)
    report = validate_junction_tree(jt, vars)
    if not report:
        raise SpfError(f"invalid junction tree: {report.detail}")
    for v in range(len(vars)):
        if not vars[v].finite:
            raise SpfError("tree-like SPFs need finite domains")
    for i, c in enumerate(jt.clusters):
        expect = math.prod(vars.card(v) for v in c)
        if i not in psi:
            raise SpfError(f"no table for vertex {i}")
        if len(psi[i]) != expect:
            raise SpfError(f"table for vertex {i} has {len(psi[i])} entries, cluster needs {expect}")

    nodes: List = []

    def add(node) -> int:
        nodes.append(node)
        return len(nodes) - 1

    ind = {}
    for v in range(len(vars)):
        for t in range(vars.card(v)):
            ind[v, t] = add(indicator(v, t, vars.card(v), s.zero, s.one))

    products: Dict = {}
    sums: Dict = {}
    for j in jt.postorder():
        cj = jt.clusters[j]
        p = jt.parent[j]
        introduced = [v for v in cj if p is None or v not in jt.clusters[p]]
        kids = jt.children(j)
        for flat, val in enumerate(_values(vars, cj)):
            x = dict(zip(cj, val))
            a = add(Const(s.check(psi[j][flat])))
            ch = [sums[i, tuple(x[v] for v in jt.separator(i))] for i in kids]
            ch += [a] + [ind[v, x[v]] for v in introduced]
            products[j, val] = add(Product(tuple(ch)))
        if p is not None:
            sep = jt.separator(j)
            pos = [cj.index(v) for v in sep]
            groups: Dict[Tuple[int, ...], List[int]] = {sv: [] for sv in _values(vars, sep)}
            for val in _values(vars, cj):
                groups[tuple(val[k] for k in pos)].append(products[j, val])
            for sv, members in groups.items():
                sums[j, sv] = add(Sum(tuple(members)))
    r = jt.root
    root = add(Sum(tuple(products[r, val] for val in _values(vars, jt.clusters[r]))))
    graph = build_graph(s, vars, nodes, root)
    # unreachable indicators are dropped by build_graph; ids of kept nodes are unchanged
    if return_index:
        return graph, TreelikeIndex(root, products, sums, ind)
    return graph


def size_bound(jt: JunctionTree, d: int) -> int:
    """d^a + sum over tree edges (j, k) of 2 d^a (a + 1) |Ch(k)|, a = treewidth + 1."""
    a = treewidth(jt) + 1
    total = d ** a
    for j, k in enumerate(jt.parent):
        if k is not None:
            total += 2 * d ** a * (a + 1) * len(jt.children(k))
    return total


def treelike_edge_count(jt: JunctionTree, vars: VariableTable) -> int:
    """Exact number of edges of ``build_treelike`` on ``jt``."""
    def card(scope):
        return math.prod(vars.card(v) for v in scope)

    r = jt.root
    total = card(jt.clusters[r])
    for j in range(len(jt)):
        p = jt.parent[j]
        cj = jt.clusters[j]
        introduced = sum(1 for v in cj if p is None or v not in jt.clusters[p])
        total += card(cj) * (1 + introduced + len(jt.children(j)))
        if p is not None:
            total += card(cj)  # each c_j has exactly one parent sum
    return total


# --- JSON ------------------------------------------------------------------

def junction_tree_from_json(obj: Mapping, vars: VariableTable):
    """Parse ``{"vertices": [{id, cluster, parent}], "psi": {id: table}}``.

    Returns ``(JunctionTree, psi)`` with vertices renumbered 0..m-1 in file order.
    """
    verts = obj.get("vertices")
    if not isinstance(verts, list) or not verts:
        raise SpfError("junction tree JSON needs a non-empty 'vertices' list")
    ids = [v["id"] for v in verts]
    if len(set(map(str, ids))) != len(ids):
        raise SpfError("duplicate vertex ids")
    pos = {str(i): k for k, i in enumerate(ids)}
    clusters, parent = [], []
    for v in verts:
        clusters.append(tuple(vars.index(x) for x in v.get("cluster", [])))
        p = v.get("parent")
        if p is None:
            parent.append(None)
        elif str(p) not in pos:
            raise SpfError(f"vertex {v['id']}: unknown parent {p}")
        else:
            parent.append(pos[str(p)])
    psi_in = obj.get("psi", {})
    psi = {}
    for key, table in psi_in.items():
        if str(key) not in pos:
            raise SpfError(f"psi given for unknown vertex {key}")
        psi[pos[str(key)]] = list(table)
    jt = JunctionTree(tuple(clusters), tuple(parent))
    return jt, psi


def junction_tree_to_json(jt: JunctionTree, vars: VariableTable, psi: Optional[Mapping] = None, semiring=None) -> dict:
    out = {
        "vertices": [
            {"id": i, "cluster": [vars[v].name for v in c], "parent": p}
            for i, (c, p) in enumerate(zip(jt.clusters, jt.parent))
        ]
    }
    if psi is not None:
        s = get_semiring(semiring) if semiring is not None else None
        out["psi"] = {str(i): [s.to_json(a) if s else a for a in t] for i, t in psi.items()}
    return out
