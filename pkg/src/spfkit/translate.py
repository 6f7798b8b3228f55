"""Moving an SPF between semirings by relabelling its operations."""

from __future__ import annotations

from typing import Callable, Mapping, Union

from .graph import Const, Leaf, SpfError, SpfGraph, build_graph, is_deterministic
from .semiring import get_semiring


def translate(graph: SpfGraph, target, value_map: Union[Mapping, Callable, None] = None,
              unchecked: bool = False, enumeration_limit: int = 2 ** 20) -> SpfGraph:
    """Relabel sums/products for ``target`` and map leaf zeros/ones to the
    target's zero/one. Other leaf values need an explicit ``value_map``.

    When exactly one of the two semirings has an idempotent sum, the graph
    must be deterministic; this is checked by enumeration unless ``unchecked``.
    """
    src = graph.semiring
    dst = get_semiring(target)

    def conv(a):
        if callable(value_map):
            return dst.check(value_map(a))
        if value_map is not None and a in value_map:
            return dst.check(value_map[a])
        if a == src.zero:
            return dst.zero
        if a == src.one:
            return dst.one
        raise SpfError(f"leaf value {a!r} is neither zero nor one; pass a value map")

    if src.idempotent_add != dst.idempotent_add and not unchecked:
        if not is_deterministic(graph, enumeration_limit):
            raise SpfError(
                f"translating {src.name} -> {dst.name} changes sum idempotence; the graph must be "
                "deterministic (sum children with disjoint supports) for the summation to carry over"
            )
    nodes = {}
    for i, n in graph.nodes.items():
        if isinstance(n, Const):
            nodes[i] = Const(conv(n.value))
        elif isinstance(n, Leaf):
            if n.table is None:
                raise SpfError("registered leaves cannot be translated")
            nodes[i] = Leaf(n.scope, tuple(conv(a) for a in n.table))
        else:
            nodes[i] = n
    return build_graph(dst, graph.vars, nodes, graph.root)
