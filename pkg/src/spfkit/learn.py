"""Learning decomposable SPFs from data by alternating variable partitioning
(correlation components) and instance clustering (k-means)."""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.stats import spearmanr

from .graph import Finite, Interval, Leaf, Product, Registered, SpfError, SpfGraph, Sum, Variable, VariableTable, build_graph, is_decomposable
from .semiring import get_semiring

__all__ = [
    "Dataset",
    "LearnConfig",
    "LearnResult",
    "spearman",
    "correlation_matrix",
    "variable_partition",
    "cluster_instances",
    "estimate_leaf",
    "learn_spf",
    "load_dataset_csv",
    "LEAF_ESTIMATORS",
]

LEAF_ESTIMATORS = ("table-average", "oracle-restriction", "cluster-mean-quadratic")

# oracle(scope, instance indices) -> Leaf over that scope
Oracle = Callable[[Tuple[int, ...], np.ndarray], Leaf]


@dataclass
class Dataset:
    """Instances over ``vars``.

    ``points[i]`` holds the values of the learned variables for instance i
    (an assignment in value-labelled mode, the optimal y in structured mode).
    ``labels`` are the target values in value-labelled mode.
    """

    vars: VariableTable
    points: np.ndarray
    labels: Optional[np.ndarray] = None
    params: Optional[np.ndarray] = None
    oracle: Optional[Oracle] = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2 or self.points.shape[1] != len(self.vars):
            raise SpfError(f"points must be (instances, {len(self.vars)})")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=float)
            if self.labels.shape != (len(self.points),):
                raise SpfError("one label per instance expected")

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class LearnConfig:
    t: int = 30
    v: int = 2
    rho_min: float = 0.3
    k: int = 2
    seed: int = 0
    leaf_estimator: str = "table-average"
    semiring: str = "min-sum"
    kmeans_restarts: int = 10

    def __post_init__(self):
        if self.t < 1 or self.v < 1:
            raise ValueError("t and v must be at least 1")
        if self.k < 2:
            raise ValueError("k must be at least 2")
        if not 0.0 <= self.rho_min < 1.0:
            raise ValueError("rho_min must lie in [0, 1)")
        if self.leaf_estimator not in LEAF_ESTIMATORS:
            raise ValueError(f"unknown leaf estimator {self.leaf_estimator!r}; choose from {LEAF_ESTIMATORS}")


# --- statistics ------------------------------------------------------------

def spearman(a: Sequence[float], b: Sequence[float]) -> float:
    """Rank correlation; 0 when either vector is constant."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise SpfError("spearman needs two vectors of equal length")
    if len(a) < 3:
        raise SpfError("spearman needs at least 3 observations")
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        return 0.0
    return float(spearmanr(a, b).statistic)


def correlation_matrix(points: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    m, p = points.shape
    if m < 3:
        raise SpfError("need at least 3 instances")
    if p == 1:
        return np.ones((1, 1))
    const = np.ptp(points, axis=0) == 0
    rho = np.zeros((p, p))
    live = np.flatnonzero(~const)
    if len(live) >= 2:
        r = spearmanr(points[:, live]).statistic
        rho[np.ix_(live, live)] = np.atleast_2d(r)
    np.fill_diagonal(rho, 1.0)
    return np.nan_to_num(rho)


def variable_partition(points: np.ndarray, rho_min: float) -> List[List[int]]:
    """Connected components of the graph linking columns with |rho| >= rho_min."""
    rho = correlation_matrix(points)
    adj = np.abs(rho) >= rho_min
    n, labels = connected_components(csr_matrix(adj), directed=False)
    comps: Dict[int, List[int]] = {}
    for col, lab in enumerate(labels):
        comps.setdefault(lab, []).append(col)
    return sorted(comps.values())


def _kmeans_once(x: np.ndarray, k: int, rng: np.random.Generator, max_iter: int = 300):
    m = len(x)
    centers = x[rng.choice(m, size=k, replace=False)].copy()
    labels = None
    for _ in range(max_iter):
        d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new = d2.argmin(axis=1)  # ties go to the lowest cluster index
        new = _fill_empty(x, new, d2, k)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        centers = np.stack([x[labels == j].mean(axis=0) for j in range(k)])
    d2 = ((x - centers[labels]) ** 2).sum(axis=1)
    return labels, float(d2.sum())


def _fill_empty(x, labels, d2, k):
    """Move the points farthest from their centres into empty clusters."""
    labels = labels.copy()
    for j in range(k):
        if np.any(labels == j):
            continue
        dist = d2[np.arange(len(x)), labels]
        counts = np.bincount(labels, minlength=k)
        movable = counts[labels] > 1
        cand = np.flatnonzero(movable)
        p = cand[np.argmax(dist[cand])]
        labels[p] = j
    return labels


def cluster_instances(points: np.ndarray, k: int, seed=0, restarts: int = 10) -> List[np.ndarray]:
    """k-means (Euclidean) with ``restarts`` random initialisations; returns
    the index arrays of the k non-empty clusters of the lowest-inertia run."""
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if len(x) < k:
        raise SpfError(f"cannot form {k} clusters from {len(x)} instances")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max(1, restarts)):
        labels, inertia = _kmeans_once(x, k, rng)
        if best is None or inertia < best[1]:
            best = (labels, inertia)
    labels = best[0]
    return [np.flatnonzero(labels == j) for j in range(k)]


# --- leaves ----------------------------------------------------------------

def estimate_leaf(data: Dataset, idx: np.ndarray, scope: Tuple[int, ...], strategy: str, semiring=None) -> Leaf:
    if strategy == "table-average":
        if data.labels is None:
            raise SpfError("table-average needs labels")
        shape = []
        for v in scope:
            var = data.vars[v]
            if not var.finite:
                raise SpfError(f"table-average needs finite variables, {var.name} is continuous")
            shape.append(var.domain.size)
        size = math.prod(shape)
        sums = np.zeros(size)
        counts = np.zeros(size)
        cells = np.ravel_multi_index(tuple(data.points[idx][:, list(scope)].astype(int).T), shape) if scope else np.zeros(len(idx), int)
        np.add.at(sums, cells, data.labels[idx])
        np.add.at(counts, cells, 1)
        # cells without data fall back to 0
        table = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)
        if semiring is not None:
            s = get_semiring(semiring)
            table = [s.check(float(a)) for a in table]
        return Leaf(tuple(scope), tuple(float(a) for a in table))
    if strategy == "oracle-restriction":
        if data.oracle is None:
            raise SpfError("oracle-restriction needs a dataset oracle")
        return data.oracle(tuple(scope), idx)
    if strategy == "cluster-mean-quadratic":
        centre = data.points[idx][:, list(scope)].mean(axis=0)
        return Leaf(tuple(scope), fn=Registered("quadratic", (0.0, 1.0, *map(float, centre))))
    raise SpfError(f"unknown leaf estimator {strategy!r}")


# --- structure learning ----------------------------------------------------

@dataclass
class LearnResult:
    graph: SpfGraph
    clusters: Dict[int, List[np.ndarray]]  # sum node id -> training indices per child
    n_instances: int

    def path(self, i: int) -> Tuple[Tuple[int, int], ...]:
        """Sum-node choices that training instance ``i`` follows."""
        return tuple(self._walk(i)[0])

    def partition(self, i: int) -> frozenset:
        """Leaf scopes reached by training instance ``i``."""
        return frozenset(self._walk(i)[1])

    def _walk(self, i: int):
        g = self.graph
        choices, scopes = [], []
        stack = [g.root]
        while stack:
            u = stack.pop()
            n = g.nodes[u]
            if isinstance(n, Product):
                stack.extend(n.children)
            elif isinstance(n, Sum):
                for j, members in enumerate(self.clusters[u]):
                    if i in members:
                        choices.append((u, j))
                        stack.append(n.children[j])
                        break
            elif isinstance(n, Leaf):
                scopes.append(frozenset(n.scope))
        choices.sort()
        return choices, scopes

    def cluster_groups(self) -> Dict[Tuple, List[int]]:
        groups: Dict[Tuple, List[int]] = {}
        for i in range(self.n_instances):
            groups.setdefault(self.path(i), []).append(i)
        return groups

    def structure_recovery(self, true_partitions: Sequence[frozenset]) -> float:
        """Fraction of terminal clusters whose leaf scopes equal the most common
        true partition among the cluster's instances."""
        groups = self.cluster_groups()
        hits = 0
        for members in groups.values():
            truth = Counter(true_partitions[i] for i in members).most_common(1)[0][0]
            if self.partition(members[0]) == truth:
                hits += 1
        return hits / len(groups)


def learn_spf(data: Dataset, config: LearnConfig = LearnConfig(), return_result: bool = False):
    """Recursively split variables into correlation components (product) or
    instances into k-means clusters (sum) until a size threshold is hit."""
    if len(data) == 0:
        raise SpfError("empty dataset")
    s = get_semiring(config.semiring)
    nodes: List = []
    clusters: Dict[int, List[np.ndarray]] = {}

    def add(node) -> int:
        nodes.append(node)
        return len(nodes) - 1

    def rec(idx: np.ndarray, cols: Tuple[int, ...], seq: np.random.SeedSequence) -> int:
        if len(idx) <= config.t or len(cols) <= config.v or len(idx) < 3:
            return add(estimate_leaf(data, idx, cols, config.leaf_estimator, s))
        parts = variable_partition(data.points[np.ix_(idx, cols)], config.rho_min)
        if len(parts) > 1:
            kids = [rec(idx, tuple(cols[c] for c in part), child)
                    for part, child in zip(parts, seq.spawn(len(parts)))]
            return add(Product(tuple(kids)))
        k = min(config.k, len(idx))
        km_seed, *children = seq.spawn(k + 1)
        groups = cluster_instances(data.points[np.ix_(idx, cols)], k,
                                   np.random.default_rng(km_seed), config.kmeans_restarts)
        kids = [rec(idx[g], cols, child) for g, child in zip(groups, children)]
        u = add(Sum(tuple(kids)))
        clusters[u] = [idx[g] for g in groups]
        return u

    root = rec(np.arange(len(data)), tuple(range(len(data.vars))), np.random.SeedSequence(config.seed))
    graph = build_graph(s, data.vars, nodes, root)
    check = is_decomposable(graph)
    if not check:
        raise SpfError(f"learned graph is not decomposable at node {check.node}")
    if return_result:
        return LearnResult(graph, clusters, len(data))
    return graph


# --- CSV -------------------------------------------------------------------

def load_dataset_csv(text: str, domain: Optional[Tuple[float, float]] = None) -> Dataset:
    """Header names the variables, then label columns ``y`` (value-labelled
    mode) or ``y_1..y_m`` (structured mode).

    Value-labelled mode learns over the named variables, which must hold
    non-negative integers (domain size = max value + 1). Structured mode learns
    over ``y_1..y_m`` as interval variables (``domain`` or the data range) and
    keeps the named columns as instance parameters.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise SpfError("empty CSV") from None
    rows = [r for r in reader if any(c.strip() for c in r)]
    if not rows:
        raise SpfError("CSV has no data rows")
    try:
        data = np.array([[float(c) for c in r] for r in rows])
    except ValueError as e:
        raise SpfError(f"non-numeric CSV cell: {e}") from None
    if data.shape[1] != len(header):
        raise SpfError("rows and header differ in width")
    ycols = [i for i, h in enumerate(header) if h == "y" or (h.startswith("y_") and h[2:].isdigit())]
    xcols = [i for i in range(len(header)) if i not in ycols]
    if not ycols:
        raise SpfError("CSV needs a 'y' column or 'y_1..y_m' columns")
    if header[ycols[0]] == "y":
        if len(ycols) != 1:
            raise SpfError("mixing 'y' with 'y_i' columns")
        pts = data[:, xcols]
        if np.any(pts < 0) or np.any(pts != np.round(pts)):
            raise SpfError("value-labelled variables must be non-negative integers")
        sizes = (pts.max(axis=0).astype(int) + 1) if len(pts) else []
        vars = VariableTable(Variable(header[i], Finite(int(d))) for i, d in zip(xcols, sizes))
        return Dataset(vars, pts, labels=data[:, ycols[0]])
    ycols.sort(key=lambda i: int(header[i][2:]))
    pts = data[:, ycols]
    if domain is None:
        lo, hi = float(pts.min()), float(pts.max())
        if lo == hi:
            lo, hi = lo - 1.0, hi + 1.0
        domain = (lo, hi)
    vars = VariableTable(Variable(header[i], Interval(*domain)) for i in ycols)
    return Dataset(vars, pts, params=data[:, xcols] if xcols else None)
