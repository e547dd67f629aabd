from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trickledown.acceptance import catalan_marginals, path_area_sum
from trickledown.exact_oracle import routing_hit, routing_states
from trickledown.routing_chains import (
    BernoulliWalk,
    CatalanUrn,
    CrpBlocks,
    DirichletUrn,
    MallowsUrn,
    QBinomialUrn,
    RoutingError,
    RoutingState,
    SingleTrailHalf,
    as_rational,
    catalan_number,
    catalan_table,
    crp_path_probability,
    dirichlet_urn_hit,
    gaussian_binomial,
    mallows_hit,
    qbinomial_hit,
    spec_from_name,
)
from trickledown.trickle_engine import routing_paths

P = RoutingState.pair
THIRD = F(1, 3)

FAMILIES = [
    DirichletUrn((1, 1)),
    DirichletUrn((F(1, 2), 3, 2)),
    BernoulliWalk((THIRD, 1 - THIRD)),
    CrpBlocks(0, 1),
    CrpBlocks(F(1, 2), F(1, 2)),
    CrpBlocks(F(-1, 2), 1),
    MallowsUrn(THIRD),
    QBinomialUrn(F(1, 2), THIRD),
    CatalanUrn(),
    SingleTrailHalf(),
]


def test_transition_examples():
    assert DirichletUrn((1, 1)).transitions(P(2, 0)) == [(0, F(3, 4)), (1, F(1, 4))]
    p = F(2, 7)
    assert MallowsUrn(p).transitions(P(2, 0)) == [(0, 1 - p), (1, p)]
    assert MallowsUrn(p).transitions(P(2, 1)) == [(1, 1)]
    assert CatalanUrn().transitions(P(0, 0)) == [(0, F(1, 2)), (1, F(1, 2))]


@pytest.mark.parametrize("spec", FAMILIES, ids=lambda s: s.describe())
def test_rows_sum_to_one_and_are_positive(spec):
    for size in range(7):
        for x in routing_states(spec, size):
            row = spec.transitions(x)
            assert sum(p for _, p in row) == 1
            assert all(p > 0 for _, p in row)


def test_dirichlet_hit_examples():
    w = (1, 1)
    assert dirichlet_urn_hit(P(0, 0), P(1, 1), w) == THIRD
    assert dirichlet_urn_hit(P(0, 0), P(2, 0), w) == THIRD
    assert dirichlet_urn_hit(P(2, 3), P(2, 3), w) == 1
    assert dirichlet_urn_hit(P(2, 0), P(1, 3), w) == 0


def test_crp_path_examples():
    assert crp_path_probability((), (1,), 0, 1) == 1
    assert crp_path_probability((1,), (1, 1), 0, 1) == F(1, 2)
    assert crp_path_probability((1,), (2,), 0, 1) == F(1, 2)


def test_mallows_hit_examples():
    for p in (F(1, 4), THIRD, F(3, 5)):
        assert mallows_hit((0, 0), (2, 0), p) == (1 - p) ** 2
        assert mallows_hit((0, 0), (2, 3), p) == (1 - p) ** 2 * p
        assert mallows_hit((1, 2), (1, 5), p) == 1


def test_gaussian_binomial_examples():
    for q in (F(1, 2), THIRD, F(5, 7)):
        assert gaussian_binomial(2, 1, q) == 1 + q
        assert gaussian_binomial(4, 2, q) == 1 + q + 2 * q**2 + q**3 + q**4
        assert gaussian_binomial(6, 0, q) == 1
        assert gaussian_binomial(2, 3, q) == 0


def test_qbinomial_hit_examples():
    q, r = F(1, 2), THIRD
    assert qbinomial_hit((0, 0), (1, 1), q, r) == r * (1 - r) * (1 + q)
    assert qbinomial_hit((2, 1), (2, 1), q, r) == 1
    assert qbinomial_hit((0, 0), (0, 2), q, r) == (1 - r) * (1 - r * q)
    assert qbinomial_hit((1, 0), (0, 2), q, r) == 0


def test_catalan_table_examples():
    t = catalan_table(4)
    assert t.step_second(0, 0) == F(1, 2)
    assert t.step_second(0, 1) == F(4, 5)
    assert catalan_marginals(2)[2][P(1, 1)] == F(1, 5)
    # mirror symmetry of the table
    for i in range(5):
        for j in range(5 - i):
            assert t.step_second(i, j) == 1 - t.step_second(j, i)


def test_catalan_first_column_formula():
    t = catalan_table(40)
    for j in range(40):
        assert t.step_second(0, j) == F((j + 3) * (2 * j + 1), (j + 2) * (2 * j + 3))


def test_catalan_entries_are_probabilities():
    t = catalan_table(60)
    for (i, j), *_ in t.rows(60):
        assert 0 <= t.step_second(i, j) <= 1


def test_catalan_marginals_to_ten():
    marg = catalan_marginals(10)
    for n in range(11):
        for k in range(n + 1):
            assert marg[n][P(k, n - k)] == F(catalan_number(k) * catalan_number(n - k), catalan_number(n + 1))


def test_catalan_numbers():
    assert [catalan_number(n) for n in (0, 3, 5)] == [1, 5, 42]


def _all_pairs(spec, max_total):
    states = [s for k in range(max_total + 1) for s in routing_states(spec, k)]
    return [(x, y) for x in states for y in states]


def test_dirichlet_hit_matches_path_sum():
    for w in [(1, 1), (F(1, 2), F(5, 2)), (1, 2, 3)]:
        spec = DirichletUrn(w)
        for x, y in _all_pairs(spec, 8 if len(w) == 2 else 5):
            assert dirichlet_urn_hit(x, y, w) == routing_hit(spec, x, y)


def test_mallows_hit_matches_path_sum():
    for p in (F(1, 4), THIRD, F(1, 2)):
        spec = MallowsUrn(p)
        for x, y in _all_pairs(spec, 8):
            assert mallows_hit(x.as_pair(), y.as_pair(), p) == routing_hit(spec, x, y)


def test_qbinomial_hit_matches_path_sum():
    for q, r in [(F(1, 2), F(1, 2)), (THIRD, F(3, 4)), (F(4, 5), F(1, 5))]:
        spec = QBinomialUrn(q, r)
        for x, y in _all_pairs(spec, 8):
            assert qbinomial_hit(x.as_pair(), y.as_pair(), q, r) == routing_hit(spec, x, y)


@pytest.mark.parametrize("alpha,theta", [(0, 1), (F(1, 2), F(1, 2)), (F(-1, 2), 1), (F(-1, 3), 1)])
def test_crp_path_probability_matches_path_sum(alpha, theta):
    spec = CrpBlocks(alpha, theta)
    for x, y in _all_pairs(spec, 8):
        assert crp_path_probability(x.as_blocks(), y.as_blocks(), alpha, theta) == routing_hit(spec, x, y)


def test_negative_alpha_caps_block_count():
    spec = CrpBlocks(F(-1, 2), F(3, 2))
    for x in routing_states(spec, 6):
        assert len(x.as_blocks()) <= 3


@given(st.integers(0, 10), st.integers(0, 10), st.fractions(min_value=0, max_value=1, max_denominator=20))
def test_gaussian_binomial_is_path_area_sum(n, k, q):
    if k <= n and n <= 10:
        assert gaussian_binomial(n, k, q) == path_area_sum(k, n - k, q)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 19).map(lambda k: F(k, 20)), st.integers(0, 2**32 - 1))
def test_mallows_paths_freeze_structurally(p, seed):
    paths = routing_paths(MallowsUrn(p), 200, 50, seed)
    for row in paths:
        first = np.argmax(row) if row.any() else len(row)
        assert row[first:].all()


def test_parameter_checks():
    with pytest.raises(RoutingError):
        CrpBlocks(F(-1, 2), F(3, 4))
    with pytest.raises(RoutingError):
        CrpBlocks(1, 1)
    with pytest.raises(RoutingError):
        CrpBlocks(F(1, 2), F(-1, 2))
    with pytest.raises(RoutingError):
        MallowsUrn(1)
    with pytest.raises(RoutingError):
        BernoulliWalk((F(1, 2), F(1, 3)))
    with pytest.raises(RoutingError):
        DirichletUrn((1, 0))
    with pytest.raises((RoutingError, TypeError)):
        as_rational(0.5)


def test_states_outside_family_rejected():
    with pytest.raises(RoutingError):
        MallowsUrn(THIRD).transitions(P(0, 0).add(2))
    with pytest.raises(RoutingError):
        SingleTrailHalf().transitions(P(1, 1))
    with pytest.raises(RoutingError):
        CrpBlocks(0, 1).transitions(RoutingState({2: 1}))


def test_spec_from_name():
    assert spec_from_name("mallows", p="1/3").describe() == "mallows(1/3)"
    assert spec_from_name("crp", alpha="1/2", theta="1/2").describe() == "crp(1/2,1/2)"
    assert spec_from_name("bst").describe() == "dirichlet(1/1,1/1)"
    with pytest.raises(RoutingError):
        spec_from_name("polya-tree")
