"""Commutative semirings used throughout the package.

Values are plain Python scalars: ``bool`` for the Boolean semiring, ``int``
(arbitrary precision) for counting, and ``float`` (possibly infinite) for the
real-valued semirings.
"""

from __future__ import annotations

import math
import operator
from dataclasses import dataclass
from typing import Any, Callable, Optional

Value = Any

__all__ = [
    "CarrierError",
    "Semiring",
    "SEMIRINGS",
    "BOOLEAN",
    "COUNTING",
    "SUM_PRODUCT",
    "MAX_PRODUCT",
    "MAX_SUM",
    "MIN_SUM",
    "FUZZY",
    "WEIGHTED_CSP",
    "get_semiring",
    "add",
    "mul",
    "sum_of_ones",
    "values_close",
]


class CarrierError(TypeError):
    """A value does not belong to the carrier set of a semiring."""


@dataclass(frozen=True)
class Semiring:
    name: str
    zero: Value
    one: Value
    idempotent_add: bool
    add: Callable[[Value, Value], Value]
    mul: Callable[[Value, Value], Value]
    contains: Callable[[Value], bool]
    # absorbing element of the sum, if any (e.g. True for disjunction)
    add_absorbing: Optional[Value] = None
    exact: bool = False
    # +1 when "better" means larger (max-*), -1 for min-*, 0 otherwise
    order: int = 0

    def __repr__(self) -> str:
        return f"Semiring({self.name!r})"

    def check(self, a: Value) -> Value:
        if not self.contains(a):
            raise CarrierError(f"{a!r} is not in the carrier of the {self.name} semiring")
        return a

    def coerce(self, a: Value) -> Value:
        """Convert a JSON-ish scalar into this semiring's carrier."""
        if self.name == "boolean":
            if a in (0, 1, True, False):
                return bool(a)
        elif self.name == "counting":
            if isinstance(a, str):
                a = int(a)
            if isinstance(a, bool):
                a = int(a)
            if isinstance(a, float) and a.is_integer():
                a = int(a)
        else:
            if isinstance(a, str):
                a = float(a)  # accepts "inf" / "-inf"
            if isinstance(a, (int, float)) and not isinstance(a, bool):
                a = float(a)
        return self.check(a)

    def to_json(self, a: Value) -> Any:
        if self.name == "counting":
            return str(a)
        if self.name == "boolean":
            return int(a)
        if math.isinf(a):
            return "inf" if a > 0 else "-inf"
        return a

    def fold_add(self, values) -> Value:
        acc = self.zero
        for v in values:
            acc = self.add(acc, v)
        return acc

    def fold_mul(self, values) -> Value:
        acc = self.one
        for v in values:
            acc = self.mul(acc, v)
        return acc

    def ones(self, k: int) -> Value:
        """Sum of ``k`` copies of one, computed in closed form (k >= 0)."""
        if k == 0:
            return self.zero
        if self.idempotent_add:
            return self.one
        if self.name == "counting":
            return k
        return float(k)


def _is_bool(a):
    return isinstance(a, bool)


def _is_nat(a):
    return isinstance(a, int) and not isinstance(a, bool) and a >= 0


def _is_float(a):
    return isinstance(a, float) and not math.isnan(a)


def _nonneg_finite(a):
    return _is_float(a) and 0.0 <= a < math.inf


def _max_sum_carrier(a):
    return _is_float(a) and a < math.inf


def _min_sum_carrier(a):
    return _is_float(a) and a > -math.inf


def _fuzzy_carrier(a):
    return _is_float(a) and 0.0 <= a <= 1.0


def _wcsp_carrier(a):
    return _is_float(a) and a >= 0.0


BOOLEAN = Semiring("boolean", False, True, True, operator.or_, operator.and_, _is_bool,
                   add_absorbing=True, exact=True, order=1)
COUNTING = Semiring("counting", 0, 1, False, operator.add, operator.mul, _is_nat, exact=True)
SUM_PRODUCT = Semiring("sum-product", 0.0, 1.0, False, operator.add, operator.mul, _nonneg_finite)
MAX_PRODUCT = Semiring("max-product", 0.0, 1.0, True, max, operator.mul, _nonneg_finite, order=1)
MAX_SUM = Semiring("max-sum", -math.inf, 0.0, True, max, operator.add, _max_sum_carrier, order=1)
MIN_SUM = Semiring("min-sum", math.inf, 0.0, True, min, operator.add, _min_sum_carrier, order=-1)
FUZZY = Semiring("fuzzy", 0.0, 1.0, True, max, min, _fuzzy_carrier, add_absorbing=1.0, order=1)
WEIGHTED_CSP = Semiring("weighted-csp", math.inf, 0.0, True, min, operator.add, _wcsp_carrier,
                        add_absorbing=0.0, order=-1)

SEMIRINGS = {
    s.name: s
    for s in (BOOLEAN, COUNTING, SUM_PRODUCT, MAX_PRODUCT, MAX_SUM, MIN_SUM, FUZZY, WEIGHTED_CSP)
}


def get_semiring(name: str | Semiring) -> Semiring:
    if isinstance(name, Semiring):
        return name
    try:
        return SEMIRINGS[name]
    except KeyError:
        raise ValueError(f"unknown semiring {name!r}; expected one of {sorted(SEMIRINGS)}") from None


def add(s: Semiring, a: Value, b: Value) -> Value:
    return s.add(s.check(a), s.check(b))


def mul(s: Semiring, a: Value, b: Value) -> Value:
    return s.mul(s.check(a), s.check(b))


def sum_of_ones(s: Semiring, k: int) -> Value:
    """The sum of ``k >= 1`` copies of the semiring one."""
    if not isinstance(k, int) or k < 1:
        raise ValueError(f"sum_of_ones needs k >= 1, got {k!r}")
    return s.ones(k)


def values_close(s: Semiring, a: Value, b: Value, rel: float = 1e-9, abs_floor: float = 1e-12) -> bool:
    """Equality for semiring values: exact for discrete carriers, relative otherwise."""
    if s.exact:
        return a == b
    if a == b:
        return True
    if math.isinf(a) or math.isinf(b):
        return False
    return abs(a - b) <= max(rel * max(abs(a), abs(b)), abs_floor)
