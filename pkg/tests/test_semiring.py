import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from spfkit.semiring import (
    BOOLEAN, COUNTING, FUZZY, MIN_SUM, SEMIRINGS, CarrierError, add, get_semiring, mul,
    sum_of_ones, values_close,
)

from oracles import close, random_value

IDEMPOTENT = {"boolean", "max-product", "max-sum", "min-sum", "fuzzy", "weighted-csp"}


def test_eight_semirings_with_expected_idempotence():
    assert len(SEMIRINGS) == 8
    for name, s in SEMIRINGS.items():
        assert s.zero != s.one
        assert s.idempotent_add == (name in IDEMPOTENT)


@pytest.mark.parametrize("s,a,b,want", [
    (BOOLEAN, True, True, True),
    (COUNTING, 2, 3, 5),
    (MIN_SUM, math.inf, 4.0, 4.0),
])
def test_add_examples(s, a, b, want):
    assert add(s, a, b) == want


@pytest.mark.parametrize("s,a,b,want", [
    (BOOLEAN, True, False, False),
    (MIN_SUM, 3.0, 4.0, 7.0),
    (FUZZY, 0.4, 0.7, 0.4),
])
def test_mul_examples(s, a, b, want):
    assert mul(s, a, b) == want


@pytest.mark.parametrize("s,k,want", [(BOOLEAN, 5, True), (COUNTING, 5, 5), (MIN_SUM, 3, 0.0)])
def test_sum_of_ones_examples(s, k, want):
    assert sum_of_ones(s, k) == want


@pytest.mark.parametrize("name", sorted(SEMIRINGS))
def test_sum_of_ones_matches_explicit_fold(name):
    s = SEMIRINGS[name]
    for k in range(1, 101):
        assert values_close(s, sum_of_ones(s, k), s.fold_add([s.one] * k))


@pytest.mark.parametrize("k", [0, -1, 2.0])
def test_sum_of_ones_rejects_bad_k(k):
    with pytest.raises(ValueError):
        sum_of_ones(COUNTING, k)


@pytest.mark.parametrize("s,bad", [
    (COUNTING, -1), (COUNTING, 1.5), (BOOLEAN, 2), (FUZZY, 1.5),
    (SEMIRINGS["sum-product"], -0.1), (SEMIRINGS["max-sum"], math.inf),
    (SEMIRINGS["min-sum"], -math.inf), (SEMIRINGS["weighted-csp"], -1.0),
])
def test_carrier_mismatch_raises(s, bad):
    with pytest.raises(CarrierError):
        add(s, bad, s.one)
    with pytest.raises(CarrierError):
        mul(s, s.one, bad)


def test_unknown_semiring_name():
    with pytest.raises(ValueError, match="unknown semiring"):
        get_semiring("tropical")


def test_json_round_trip_of_infinities():
    for s in SEMIRINGS.values():
        for v in (s.zero, s.one):
            assert s.coerce(s.to_json(v)) == v


@settings(max_examples=300, deadline=None)
@given(name=st.sampled_from(sorted(SEMIRINGS)), seed=st.integers(0, 2 ** 32 - 1))
def test_axioms_hold_on_random_triples(name, seed):
    s = SEMIRINGS[name]
    rng = random.Random(seed)
    a, b, c = (random_value(s, rng) for _ in range(3))
    A, M = s.add, s.mul
    assert close(s, A(A(a, b), c), A(a, A(b, c)))
    assert close(s, M(M(a, b), c), M(a, M(b, c)))
    assert A(a, b) == A(b, a)
    assert M(a, b) == M(b, a)
    assert close(s, M(a, A(b, c)), A(M(a, b), M(a, c)))
    assert A(a, s.zero) == a
    assert M(a, s.one) == a
    assert M(a, s.zero) == s.zero
