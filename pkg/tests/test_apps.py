import itertools
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spfkit.apps import (
    Cnf, CspInstance, DimacsError, augment_selective, clauses_satisfied, cnf_to_spf, csp_from_json,
    csp_to_json, csp_to_spf, integrate, max_sat, minimize_msf, model_count, mpe, parse_dimacs,
    probability_of_evidence, sat, solve_csp,
)
from spfkit.engine import make_deterministic_decomposable
from spfkit.graph import (
    Const, Leaf, Product, Registered, SpfError, Sum, VariableTable, build_graph, evaluate,
    is_decomposable,
)
from spfkit.registry import rastrigin_pair
from spfkit.semiring import BOOLEAN, COUNTING, MIN_SUM, SUM_PRODUCT
from spfkit.summation import sum_decomposable
from spfkit.translate import translate

from oracles import (
    assignments, brute_cnf, gauss_cell_integral, node_scope, oracle_eval, quad_leaf, quadrature_integral,
    random_binary_csp, random_cnf_clauses, random_continuous_spf, random_graph, random_quadratic_msf,
)


# --- DIMACS ------------------------------------------------------------------

def test_parse_simple_clause():
    cnf = parse_dimacs("p cnf 2 1\n1 2 0\n")
    assert cnf.n == 2 and cnf.clauses == ((1, 2),)


def test_parse_contradiction_and_comments():
    cnf = parse_dimacs("c two units\np cnf 1 2\n1 0\n-1 0\n")
    assert cnf.clauses == ((1,), (-1,))
    assert not sat(cnf).satisfiable


def test_parse_clause_spanning_lines_and_empty_clause():
    cnf = parse_dimacs("p cnf 3 2\n1 -2\n3 0\n0\n")
    assert cnf.clauses == ((1, -2, 3), ())
    assert cnf.has_empty_clause


@pytest.mark.parametrize("text,line", [
    ("p cnf 2 2\n1 2 0\n", None),
    ("p cnf 2 1\n1 3 0\n", 2),
    ("p cnf x 1\n1 0\n", 1),
    ("1 0\n", 1),
    ("p cnf 2 1\n1 2\n", None),
    ("p cnf 2 1\n1 q 0\n", 2),
])
def test_parse_errors_carry_line_numbers(text, line):
    with pytest.raises(DimacsError) as info:
        parse_dimacs(text)
    assert info.value.line == line


def test_dimacs_round_trip():
    cnf = Cnf(4, random_cnf_clauses(random.Random(1), 4, 6))
    assert parse_dimacs(cnf.to_dimacs()) == cnf


# --- logic ----------------------------------------------------------------------

def test_single_clause_graph_shape():
    g = cnf_to_spf(parse_dimacs("p cnf 2 1\n1 2 0\n"))
    root = g.nodes[g.root]
    assert isinstance(root, Product) and len(root.children) == 1
    clause = g.nodes[root.children[0]]
    assert isinstance(clause, Sum) and all(isinstance(g.nodes[c], Leaf) for c in clause.children)


def test_unit_clauses_are_decomposable():
    assert is_decomposable(cnf_to_spf(Cnf(3, ((1,), (-2,), (3,)))))


def test_two_clause_witness():
    r = sat(Cnf(2, ((1, 2), (-1, 2))))
    assert r.satisfiable and r.witness["X2"] == 1


@pytest.mark.parametrize("cnf,count", [
    (Cnf(2, ((1, 2),)), 3),
    (Cnf(4, ()), 16),
    (Cnf(1, ((1,), (-1,))), 0),
    (Cnf(3, ((),)), 0),
    (Cnf(5, ((1, 2),)), 24),  # 3 models of the clause times 2^3 free variables
])
def test_model_count_examples(cnf, count):
    assert model_count(cnf) == count


def test_max_sat_of_contradiction_is_one():
    r = max_sat(Cnf(1, ((1,), (-1,))))
    assert r.value == 1 and clauses_satisfied(Cnf(1, ((1,), (-1,))), {0: r.witness["X1"]}) == 1


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10 ** 9))
def test_logic_queries_match_brute_force(seed):
    rng = random.Random(seed)
    n = rng.randint(1, 9)
    cnf = Cnf(n, random_cnf_clauses(rng, n, rng.randint(0, 14)))
    count, best = brute_cnf(n, cnf.clauses)
    r = sat(cnf)
    assert r.satisfiable == (count > 0)
    if r.satisfiable:
        x = {int(k[1:]) - 1: v for k, v in r.witness.items()}
        assert clauses_satisfied(cnf, x) == len(cnf.clauses)
    assert model_count(cnf) == count
    m = max_sat(cnf)
    assert m.value == best
    assert clauses_satisfied(cnf, {int(k[1:]) - 1: v for k, v in m.witness.items()}) == best


def test_satisfiable_max_sat_equals_clause_count():
    cnf = Cnf(3, ((1, 2), (-1, 3), (2, -3)))
    assert max_sat(cnf).value == 3


# --- translate --------------------------------------------------------------------

def test_translate_constant_one():
    g = build_graph(BOOLEAN, VariableTable.finite([2]), [Const(True)], 0)
    assert translate(g, COUNTING).nodes[0] == Const(1)


def test_translate_rejects_nondeterministic_clause():
    g = cnf_to_spf(Cnf(2, ((1, 2),)))
    with pytest.raises(SpfError, match="deterministic"):
        translate(g, COUNTING)
    # relabelling anyway counts (1, 1) twice: 4 instead of 3 models
    assert sum_decomposable(translate(g, COUNTING, unchecked=True)).value == 4


def test_translate_needs_value_map_for_other_values():
    g = build_graph(COUNTING, VariableTable.finite([2]), [Leaf((0,), (2, 1))], 0)
    with pytest.raises(SpfError, match="value map"):
        translate(g, SUM_PRODUCT)
    assert translate(g, SUM_PRODUCT, value_map={2: 2.0}).nodes[0].table == (2.0, 1.0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10 ** 9))
def test_translated_compilation_counts_models(seed):
    rng = random.Random(seed)
    cnf = Cnf(5, random_cnf_clauses(rng, 5, rng.randint(1, 8)))
    g = make_deterministic_decomposable(cnf_to_spf(cnf))
    c = translate(g, COUNTING)
    assert (c.size, len(c.nodes), bool(is_decomposable(c))) == (g.size, len(g.nodes), True)
    free = 5 - len(c.scopes[c.root])
    assert sum_decomposable(c).value * 2 ** free == brute_cnf(5, cnf.clauses)[0]


# --- CSP ---------------------------------------------------------------------------

def neq(scope, t):
    return t[0] != t[1]


def test_path_two_coloring():
    csp = CspInstance.from_predicate([2, 2, 2], [(0, 1), (1, 2)], neq)
    r = solve_csp(csp)
    x = [r.solution[f"X{i}"] for i in (1, 2, 3)]
    assert r.satisfiable and x[0] != x[1] != x[2]


def test_triangle_two_coloring_is_unsat():
    csp = CspInstance.from_predicate([2, 2, 2], [(0, 1), (1, 2), (0, 2)], neq)
    assert not solve_csp(csp).satisfiable


def test_no_constraints_any_assignment():
    r = solve_csp(CspInstance.build([3, 2], []))
    assert r.satisfiable and set(r.solution) == {"X1", "X2"}


def test_single_constraint_graph_shape():
    g = csp_to_spf(CspInstance.from_predicate([2, 2], [(0, 1)], neq))
    clause = g.nodes[g.nodes[g.root].children[0]]
    assert isinstance(clause, Sum) and len(clause.children) == 2


def test_full_and_empty_constraints():
    full = CspInstance.from_predicate([2, 3], [(0, 1)], lambda s, t: True)
    g = csp_to_spf(full)
    assert all(evaluate(g, x) for x in assignments(g, range(2)))
    empty = CspInstance.build([2, 2], [((0, 1), [])])
    g = csp_to_spf(empty)
    assert Const(False) in g.nodes.values()
    assert not any(evaluate(g, x) for x in assignments(g, range(2)))
    assert not solve_csp(empty).satisfiable


def test_csp_json_round_trip_and_errors():
    csp = CspInstance.from_predicate([2, 3, 2], [(0, 1), (1, 2)], neq)
    assert csp_from_json(csp_to_json(csp)) == csp
    with pytest.raises(SpfError):
        csp_from_json({"vars": ["a"]})
    with pytest.raises(SpfError):
        csp_from_json({"vars": ["a"], "domains": [2], "constraints": [{"scope": ["a"], "tuples": [[5]]}]})


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10 ** 9))
def test_csp_matches_brute_force(seed):
    csp = random_binary_csp(random.Random(seed))
    n = len(csp.vars)
    truth = any(csp.satisfied(dict(enumerate(x)))
                for x in itertools.product(*(range(v.domain.size) for v in csp.vars)))
    r = solve_csp(csp)
    assert r.satisfiable == truth
    if truth:
        assert csp.satisfied({i: r.solution[csp.vars[i].name] for i in range(n)})


# --- probabilistic queries -----------------------------------------------------------

def uniform_spn():
    vars = VariableTable.finite([2, 2])
    return build_graph(SUM_PRODUCT, vars, [Leaf((0,), (0.5, 0.5)), Leaf((1,), (0.5, 0.5)), Product((0, 1))], 2)


def test_evidence_on_uniform_spn():
    g = uniform_spn()
    z = probability_of_evidence(g, {})
    assert z == pytest.approx(1.0)
    assert probability_of_evidence(g, {"X1": 1}) == pytest.approx(z / 2)
    assert probability_of_evidence(g, {"X1": 1, "X2": 0}) == pytest.approx(evaluate(g, {0: 1, 1: 0}))
    assert probability_of_evidence(g, {"X1": 1}, normalize=True) == pytest.approx(0.5)


def test_evidence_requires_decomposable_spn():
    g = build_graph(SUM_PRODUCT, VariableTable.finite([2]), [Leaf((0,), (1.0, 2.0)), Leaf((0,), (1.0, 1.0)), Product((0, 1))], 2)
    with pytest.raises(SpfError, match="decomposable"):
        probability_of_evidence(g, {})
    with pytest.raises(SpfError, match="decomposable"):
        mpe(g)


def mixture():
    vars = VariableTable.finite([2, 2])
    nodes = [Leaf((0,), (0.9, 0.1)), Leaf((1,), (0.6, 0.4)), Const(0.3), Product((0, 1, 2)),
             Leaf((0,), (0.2, 0.8)), Leaf((1,), (0.3, 0.7)), Const(0.7), Product((4, 5, 6)), Sum((3, 7))]
    return build_graph(SUM_PRODUCT, vars, nodes, 8)


def test_mpe_picks_heavier_component_mode():
    r = mpe(mixture())
    assert r.state["H8"] == 1 and (r.state["X1"], r.state["X2"]) == (1, 1)
    assert r.value == pytest.approx(0.7 * 0.8 * 0.7)


def test_mpe_with_full_evidence():
    g = mixture()
    r = mpe(g, {"X1": 0, "X2": 0})
    assert r.state["H8"] == 0
    assert r.value == pytest.approx(0.3 * 0.9 * 0.6)
    assert r.value <= evaluate(g, {0: 0, 1: 0})


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10 ** 9))
def test_mpe_matches_augmented_brute_force(seed):
    rng = random.Random(seed)
    g = random_graph("sum-product", rng, n_vars=5, cards=(2,), zero_rate=0.05)
    e = {v: rng.randrange(2) for v in rng.sample(range(5), rng.randint(0, 2))}
    r = mpe(g, e)
    aug, hidden = augment_selective(g)
    free = node_scope(aug, aug.root) - set(e)
    best = max(oracle_eval(aug, {**x, **e}) for x in assignments(aug, free))
    assert r.value == pytest.approx(best, rel=1e-9, abs=1e-300)
    # the max over selections never exceeds the full sum at the same observed state
    x = {i: r.state[g.vars[i].name] for i in range(5)}
    assert r.value <= evaluate(g, x) * (1 + 1e-9)
    for v, t in e.items():
        assert r.state[g.vars[v].name] == t


# --- integration --------------------------------------------------------------------

def lin(c0=0.0, c1=1.0):
    return Registered("poly", (c0, c1))


def test_separable_integral():
    vars = VariableTable.intervals([(0, 1), (0, 1)])
    g = build_graph(SUM_PRODUCT, vars, [Leaf((0,), fn=lin()), Leaf((1,), fn=lin()), Product((0, 1))], 2)
    assert integrate(g) == pytest.approx(0.25, rel=1e-12)


def test_mixture_integral_is_linear():
    vars = VariableTable.intervals([(0, 1), (0, 2)])
    nodes = [Leaf((0,), fn=lin()), Leaf((1,), fn=lin()), Product((0, 1)),
             Leaf((0,), fn=lin(1.0, 0.0)), Leaf((1,), fn=Registered("poly", (0.0, 0.0, 3.0))), Product((3, 4)),
             Sum((2, 5))]
    g = build_graph(SUM_PRODUCT, vars, nodes, 6)
    assert integrate(g) == pytest.approx(0.5 * 2.0 + 1.0 * 8.0, rel=1e-12)


def test_integrate_needs_sum_product():
    g = build_graph(MIN_SUM, VariableTable.intervals([(0, 1)]), [Leaf((0,), fn=lin())], 0)
    with pytest.raises(SpfError, match="sum-product"):
        integrate(g)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10 ** 9))
def test_integral_matches_quadrature(seed):
    rng = random.Random(seed)
    g = random_continuous_spf(rng, rng.randint(1, 4))
    assert integrate(g) == pytest.approx(quadrature_integral(g), rel=1e-6)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10 ** 9))
def test_integral_matches_cellwise_gauss_rule(seed):
    rng = random.Random(seed)
    g = random_continuous_spf(rng, rng.randint(1, 2))
    assert integrate(g) == pytest.approx(gauss_cell_integral(g), rel=1e-9)


# --- minimization ---------------------------------------------------------------------


def test_two_parabolas():
    vars = VariableTable.intervals([(-5, 5), (-5, 5)])
    g = build_graph(MIN_SUM, vars, [quad_leaf([0], [1.0]), quad_leaf([1], [-2.0]), Product((0, 1))], 2)
    r = minimize_msf(g)
    assert r.value == pytest.approx(0.0, abs=1e-9)
    assert r.argmin["Y0"] == pytest.approx(1.0, abs=1e-6)
    assert r.argmin["Y1"] == pytest.approx(-2.0, abs=1e-6)


def test_rastrigin_pair_leaf_minimum():
    vars = VariableTable.intervals([(-5.12, 5.12)] * 2)
    xi, xj = 0.4, 0.55
    g = build_graph(MIN_SUM, vars, [Leaf((0, 1), fn=Registered("rastrigin-pair", (xi, xj, 0.1, 20.0)))], 0)
    r = minimize_msf(g)
    assert r.value == pytest.approx(0.0, abs=1e-3)
    assert rastrigin_pair(xi, xj, xi, xj) == 0.0


def test_two_leaf_msf_against_grid():
    vars = VariableTable.intervals([(-5.12, 5.12)] * 2)
    g = build_graph(MIN_SUM, vars, [Leaf((0, 1), fn=Registered("rastrigin-pair", (1.2, -0.7, 0.1, 20.0))),
                                    quad_leaf([0, 1], [0.0, 0.0], 0.0, 0.05), Product((0, 1))], 2)
    # not decomposable: both leaves share the scope, so sum them as one leaf instead
    assert not is_decomposable(g)
    with pytest.raises(SpfError):
        minimize_msf(g)
    h = build_graph(MIN_SUM, VariableTable.intervals([(-5.12, 5.12)] * 4),
                    [Leaf((0, 1), fn=Registered("rastrigin-pair", (1.2, -0.7, 0.1, 20.0))),
                     Leaf((2, 3), fn=Registered("rastrigin-pair", (-2.0, 3.0, 0.1, 20.0))), Product((0, 1))], 2)
    r = minimize_msf(h)
    ys = np.linspace(-5.12, 5.12, 200)
    Y0, Y1 = np.meshgrid(ys, ys)
    grid = rastrigin_pair(Y0, Y1, 1.2, -0.7).min() + rastrigin_pair(Y0, Y1, -2.0, 3.0).min()
    assert r.value <= grid + 1e-3
    assert abs(r.value - grid) < 1e-1  # 200-point grid spacing limits the oracle


def test_minimize_needs_min_sum():
    with pytest.raises(SpfError, match="min-sum"):
        minimize_msf(uniform_spn())


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10 ** 9))
def test_minimum_of_quadratic_msf(seed):
    rng = random.Random(seed)
    g, value, arg = random_quadratic_msf(rng, rng.randint(1, 6))
    r = minimize_msf(g, restarts=4)
    assert r.value == pytest.approx(value, abs=1e-6)
    for v, c in arg.items():
        assert r.argmin[g.vars[v].name] == pytest.approx(c, abs=1e-4)
