"""Sum-product functions over commutative semirings."""

from .engine import EngineConfig, EngineStats, decompose, make_deterministic_decomposable, sum_spf
from .graph import (
    Const,
    Finite,
    Interval,
    Leaf,
    Product,
    Registered,
    SpfError,
    SpfGraph,
    Sum,
    Variable,
    VariableTable,
    build_flat_mixture,
    build_graph,
    compatible,
    evaluate,
    graph_from_json,
    graph_to_json,
    is_decomposable,
    is_deterministic,
    scope,
    simplify,
)
from .semiring import SEMIRINGS, CarrierError, Semiring, get_semiring
from .store import ResourceError
from .summation import (
    NoWitness,
    estimate_cost,
    extract_argument,
    set_evidence,
    sum_decomposable,
)
from .translate import translate

__version__ = "0.1.0"
