"""Rastrigin-style test functions with hidden pairwise structure, and the
learned-structure versus direct minimization benchmark.

Each pair term is ``c0 [(yi - xi)^2 + (yj - xj)^2] + c1 (1 - cos(yi - xi) cos(yj - xj))``,
with a "+" between the squares so every term is bounded below by 0 at (xi, xj).
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .apps.continuous import minimize_msf
from .graph import Leaf, Registered, SpfGraph, VariableTable
from .learn import Dataset, LearnConfig, learn_spf
from .optimize import multistart_minimize
from .registry import restriction_params
from .store import Store

__all__ = [
    "C0",
    "C1",
    "BOX",
    "RastriginInstance",
    "build_instance",
    "full_value",
    "full_gradient",
    "generate_dataset",
    "bind_to_instance",
    "multistart_descent",
    "BenchConfig",
    "BenchRow",
    "BenchReport",
    "run_benchmark",
]

C0 = 0.1
C1 = 20.0
BOX = (-5.12, 5.12)
NOISE = 0.1


def block_pairs(block: int, k: int) -> List[Tuple[int, int]]:
    b = 4 * block
    return [(b, b + k), (b + 3, b + 3 - k)]


@dataclass(frozen=True)
class RastriginInstance:
    n: int
    x: Tuple[float, ...]
    k_pattern: Tuple[int, ...]
    c0: float = C0
    c1: float = C1

    def __post_init__(self):
        if self.n <= 0 or self.n % 4:
            raise ValueError(f"n must be a positive multiple of 4, got {self.n}")
        if len(self.x) != self.n or len(self.k_pattern) != self.n // 4:
            raise ValueError("parameter vector or block pattern has the wrong length")
        if any(k not in (1, 2) for k in self.k_pattern):
            raise ValueError("block patterns must be 1 or 2")

    @property
    def pairs(self) -> List[Tuple[int, int]]:
        out = []
        for b, k in enumerate(self.k_pattern):
            out += block_pairs(b, k)
        return out

    @property
    def partner(self) -> np.ndarray:
        p = np.empty(self.n, dtype=int)
        for i, j in self.pairs:
            p[i], p[j] = j, i
        return p

    @property
    def partition(self) -> frozenset:
        return frozenset(frozenset(p) for p in self.pairs)


def build_instance(n: int, rng: np.random.Generator, c0: float = C0, c1: float = C1) -> RastriginInstance:
    if n <= 0 or n % 4:
        raise ValueError(f"n must be a positive multiple of 4, got {n}")
    x = np.empty(n)
    ks = []
    for b in range(n // 4):
        k = 1 if rng.random() < 0.5 else 2
        ks.append(k)
        for i, j in block_pairs(b, k):
            s = rng.uniform(-1.0, 1.0)
            x[i] = s + rng.normal(0.0, NOISE)
            x[j] = s + rng.normal(0.0, NOISE)
    return RastriginInstance(n, tuple(float(v) for v in x), tuple(ks), c0, c1)


def _pair_arrays(inst: RastriginInstance):
    p = np.array(inst.pairs)
    return p[:, 0], p[:, 1], np.asarray(inst.x)


def full_value(inst: RastriginInstance, y) -> float:
    i, j, x = _pair_arrays(inst)
    y = np.asarray(y, dtype=float)
    di, dj = y[i] - x[i], y[j] - x[j]
    return float(np.sum(inst.c0 * (di ** 2 + dj ** 2) + inst.c1 * (1.0 - np.cos(di) * np.cos(dj))))


def full_gradient(inst: RastriginInstance, y) -> np.ndarray:
    i, j, x = _pair_arrays(inst)
    y = np.asarray(y, dtype=float)
    di, dj = y[i] - x[i], y[j] - x[j]
    g = np.zeros(inst.n)
    np.add.at(g, i, 2 * inst.c0 * di + inst.c1 * np.sin(di) * np.cos(dj))
    np.add.at(g, j, 2 * inst.c0 * dj + inst.c1 * np.cos(di) * np.sin(dj))
    return g


def _restriction_leaf(inst: RastriginInstance, scope: Tuple[int, ...]) -> Leaf:
    params = restriction_params(inst.c0, inst.c1, inst.x, inst.partner, scope)
    return Leaf(tuple(scope), fn=Registered("rastrigin-restriction", params))


def generate_dataset(m: int, n: int, rng: np.random.Generator) -> Tuple[List[RastriginInstance], Dataset]:
    """``m`` instances; each label is the instance's argmin, which equals its
    parameter vector. Oracle leaves restrict the first instance of a cluster."""
    if m < 1:
        raise ValueError("m must be positive")
    insts = [build_instance(n, rng) for _ in range(m)]
    xs = np.array([inst.x for inst in insts])
    vars = VariableTable.intervals([BOX] * n)

    def oracle(scope, idx):
        return _restriction_leaf(insts[int(idx[0])], scope)

    return insts, Dataset(vars, xs.copy(), params=xs, oracle=oracle)


def bind_to_instance(graph: SpfGraph, inst: RastriginInstance) -> SpfGraph:
    """Re-target every restriction leaf at ``inst``; identical leaves merge."""
    nodes = {}
    for i, n in graph.nodes.items():
        if isinstance(n, Leaf) and n.fn is not None and n.fn.name == "rastrigin-restriction":
            nodes[i] = _restriction_leaf(inst, n.scope)
        else:
            nodes[i] = n
    from .graph import build_graph

    fresh = build_graph(graph.semiring, graph.vars, nodes, graph.root)
    st = Store.from_graph(fresh)
    return st.to_graph(st.root)


def multistart_descent(fn, grad, lo, hi, restarts: int = 16, budget: Optional[float] = None, rng=None):
    """Best of ``restarts`` bounded local descents from uniform starts.
    Returns ``(y, value, starts_used)``."""
    lo, hi = np.broadcast_arrays(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
    return multistart_minimize(fn, grad, lo, hi, restarts, rng, budget=budget)


@dataclass(frozen=True)
class BenchConfig:
    dims: Tuple[int, ...] = (4, 8, 12, 16)
    train: int = 300
    test: int = 50
    budget_secs: float = 2.0
    seed: int = 0
    # cap on restarts per learned leaf; None leaves it to the time budget
    leaf_restarts: Optional[int] = None
    t: int = 30
    v: int = 2
    rho_min: float = 0.3
    k: int = 2

    def __post_init__(self):
        if self.train <= 0 or self.test <= 0:
            raise ValueError("train and test sizes must be positive")
        if self.budget_secs < 0:
            raise ValueError("budget must be non-negative")
        if self.leaf_restarts is not None and self.leaf_restarts < 1:
            raise ValueError("leaf_restarts must be positive")
        for n in self.dims:
            if n <= 0 or n % 4:
                raise ValueError(f"dimension {n} is not a positive multiple of 4")


@dataclass
class BenchRow:
    n: int
    method: str  # learned-msf | direct
    mean_min: float
    stderr: float
    wall_secs: float
    restarts_used: int


@dataclass
class BenchReport:
    rows: List[BenchRow] = field(default_factory=list)
    minima: Dict[Tuple[int, str], np.ndarray] = field(default_factory=dict)
    structure_recovery: Dict[int, float] = field(default_factory=dict)
    instance_recovery: Dict[int, float] = field(default_factory=dict)

    def row(self, n: int, method: str) -> BenchRow:
        for r in self.rows:
            if r.n == n and r.method == method:
                return r
        raise KeyError((n, method))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "method", "mean_min", "stderr", "wall_secs", "restarts_used"])
        for r in self.rows:
            w.writerow([r.n, r.method, repr(r.mean_min), repr(r.stderr), f"{r.wall_secs:.3f}", r.restarts_used])
        return buf.getvalue()


def _stats(values: np.ndarray) -> Tuple[float, float]:
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / math.sqrt(len(values))) if len(values) > 1 else 0.0
    return mean, se


def run_benchmark(config: BenchConfig = BenchConfig(), log=None) -> BenchReport:
    """For each n: learn an MSF structure on training argmins, then per test
    instance compare (a) minimizing the learned MSF and scoring the true
    function at its argmin against (b) multi-start descent on the true
    function, each capped at ``budget_secs``."""
    report = BenchReport()
    lcfg = LearnConfig(t=config.t, v=config.v, rho_min=config.rho_min, k=config.k,
                       seed=config.seed, leaf_estimator="oracle-restriction")
    for n in config.dims:
        rng = np.random.default_rng([config.seed, n])
        insts, data = generate_dataset(config.train + config.test, n, rng)
        train = Dataset(data.vars, data.points[: config.train], params=data.params[: config.train],
                        oracle=data.oracle)
        learned = learn_spf(train, lcfg, return_result=True)
        truth = [inst.partition for inst in insts[: config.train]]
        report.structure_recovery[n] = learned.structure_recovery(truth)
        report.instance_recovery[n] = float(np.mean([learned.partition(i) == truth[i] for i in range(config.train)]))
        lo = np.full(n, BOX[0])
        hi = np.full(n, BOX[1])
        got = {"learned-msf": [], "direct": []}
        wall = {"learned-msf": 0.0, "direct": 0.0}
        starts = {"learned-msf": 0, "direct": 0}
        for s, inst in enumerate(insts[config.train:]):
            t0 = time.perf_counter()
            g = bind_to_instance(learned.graph, inst)
            n_leaves = max(1, g.count(Leaf))
            # the learned side gets the same wall budget as direct descent,
            # shared evenly by the distinct leaves
            left = max(0.0, config.budget_secs - (time.perf_counter() - t0))
            res = minimize_msf(g, restarts=config.leaf_restarts or 10 ** 9, seed=config.seed,
                               leaf_budget=left / n_leaves)
            y = np.array([res.argmin[v.name] for v in g.vars])
            got["learned-msf"].append(full_value(inst, y))
            wall["learned-msf"] += time.perf_counter() - t0
            starts["learned-msf"] += res.starts

            t0 = time.perf_counter()
            srng = np.random.default_rng([config.seed, n, s])
            _, val, used = multistart_descent(
                lambda z, inst=inst: full_value(inst, z), lambda z, inst=inst: full_gradient(inst, z),
                lo, hi, restarts=10 ** 9, budget=config.budget_secs, rng=srng)
            got["direct"].append(val)
            wall["direct"] += time.perf_counter() - t0
            starts["direct"] += used
        for method in ("learned-msf", "direct"):
            vals = np.array(got[method])
            report.minima[n, method] = vals
            mean, se = _stats(vals)
            report.rows.append(BenchRow(n, method, mean, se, wall[method], starts[method]))
        if log is not None:
            log(f"n={n} learned={report.row(n, 'learned-msf').mean_min:.4g} "
                f"direct={report.row(n, 'direct').mean_min:.4g} recovery={report.structure_recovery[n]:.2f}")
    return report
