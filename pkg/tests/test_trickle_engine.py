import math
from collections import Counter
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trickledown.exact_oracle import enumerate_trees
from trickledown.graph_substrate import BinaryTree, Grid2D, HarrisUlam, SubstrateError
from trickledown.routing_chains import (
    BernoulliWalk,
    CatalanUrn,
    CrpBlocks,
    DirichletUrn,
    MallowsUrn,
    QBinomialUrn,
    RoutingState,
    SingleTrailHalf,
)
from trickledown.trickle_engine import (
    EngineError,
    Tree,
    TrickleState,
    VertexStreams,
    project,
    replay,
    replay_clocks,
    settle_order,
    simulate,
    simulate_within,
    state_to_tree,
    step,
    subtree_count,
    subtree_sizes_to_depth,
    tree_to_state,
)

P = RoutingState.pair
B, G, H = BinaryTree(), Grid2D(), HarrisUlam()

# routing prefix of the quincunx example, as successive routing states
QUINCUNX = {
    (0, 0): [P(0, 1), P(0, 2), P(1, 2), P(2, 2)],
    (0, 1): [P(0, 1)],
    (1, 0): [P(1, 0), P(2, 0)],
    (1, 1): [P(0, 1)],
}


def quincunx(extra):
    sigma = {u: list(v) for u, v in QUINCUNX.items()}
    for u, more in extra.items():
        sigma[u] = sigma.get(u, []) + more
    return sigma


def test_quincunx_clock_sequence():
    # one more root instruction so that time 5 is defined
    sigma = quincunx({(0, 0): [P(2, 3)], (0, 1): [P(1, 1)]})
    at_10 = [replay_clocks(G, sigma, n).get((1, 0), 0) for n in range(6)]
    at_01 = [replay_clocks(G, sigma, n).get((0, 1), 0) for n in range(6)]
    # the example's sequence shows up at the mirrored vertex under this slot order
    assert at_10 == [0, 0, 0, 0, 1, 1]
    assert at_01 == [0, 0, 1, 1, 1, 2]


def test_quincunx_state_at_five():
    sigma = quincunx({(0, 0): [P(2, 3)], (0, 1): [P(1, 1)]})
    x5 = replay(G, sigma, 5)
    assert x5.per_vertex == {(0, 0): P(2, 3), (0, 1): P(1, 1), (1, 0): P(1, 0)}
    assert x5.occupied() == {(0, 0), (0, 1), (1, 0), (0, 2), (2, 0), (1, 1)}


@pytest.mark.parametrize("mirror", [False, True])
def test_quincunx_printed_state_is_inconsistent(mirror):
    printed = {(0, 0): (2, 2), (1, 0): (0, 1), (0, 1): (2, 0), (1, 1): (0, 1)}
    if mirror:
        printed = {(j, i): (b, a) for (i, j), (a, b) in printed.items()}
    per = {u: P(*c) for u, c in printed.items()}
    with pytest.raises(EngineError):
        TrickleState(G, per, fed=6)
    assert not TrickleState(G, per).is_consistent()


def test_quincunx_thirteen_particles():
    sigma = {u: [0, 1] * 6 for u in G.vertices_to_depth(12)}
    sigma[(0, 0)] = [1, 1, 0, 0, 0, 1, 0, 1, 0, 1, 0, 1]
    sigma[(1, 0)] = [0, 0, 1, 1, 1]
    sigma[(0, 1)] = [1, 0, 0, 1, 0]
    sigma[(1, 1)] = [1, 0, 1, 0, 1]
    clocks = replay_clocks(G, sigma, 12)
    assert clocks[(0, 0)] == 12
    assert clocks[(1, 0)] == 5 and clocks[(0, 1)] == 5
    x = replay(G, sigma, 12)
    assert x.at((0, 0)) == P(6, 6)
    assert x.at((1, 0)) == P(2, 3)
    assert x.at((0, 1)) == P(3, 2)
    assert len(x.occupied()) == 13


def test_replay_time_zero_and_bad_instructions():
    assert replay(G, {}, 0) == TrickleState.initial(G)
    with pytest.raises(EngineError):
        replay(G, {(0, 0): [P(0, 1), P(1, 2)]}, 2)
    with pytest.raises(EngineError):
        replay(G, {(0, 0): [0]}, 2)


def test_step_from_empty_occupies_root():
    for kind, spec in [(B, CatalanUrn()), (G, BernoulliWalk((F(1, 2), F(1, 2)))), (H, CrpBlocks(0, 1))]:
        x = step(kind, spec, TrickleState.empty(kind), np.random.default_rng(0))
        assert x == TrickleState.initial(kind)
        assert x.occupied() == {kind.root}
        assert x.per_vertex == {}


def test_tree_state_examples():
    assert tree_to_state(B, Tree(B, [(), (0,), (1,)])).per_vertex == {(): P(1, 1)}
    assert tree_to_state(B, Tree(B, [()])).per_vertex == {}
    assert tree_to_state(B, Tree(B, [(), (1,), (1, 0)])).per_vertex == {(): P(0, 2), (1,): P(1, 0)}


def test_subtree_count_examples():
    t = Tree(B, [(), (0,), (1,)])
    assert subtree_count(t, ()) == 3
    assert subtree_count(t, (0,)) == 1
    assert subtree_count(Tree(B, [(), (1,), (1, 0), (1, 1)]), (1,)) == 3


def test_tree_state_bijection():
    for n in range(1, 9):
        for t in enumerate_trees(B, n):
            x = tree_to_state(B, t)
            assert x.is_consistent() and state_to_tree(x) == t
    for n in range(1, 7):
        for t in enumerate_trees(H, n):
            assert state_to_tree(tree_to_state(H, t)) == t


def test_tree_rejects_non_trees():
    with pytest.raises(SubstrateError):
        Tree(B, [(), (0, 1)])
    with pytest.raises(SubstrateError):
        Tree(H, [(), (2,)])
    with pytest.raises(SubstrateError):
        Tree(G, [(0, 0)])


def test_tree_serialization():
    t = Tree(H, [(), (1,), (2,), (1, 1)])
    assert t.format() == "e,1,2,11"
    assert Tree.parse(H, t.format()) == t


SPECS = [
    (B, DirichletUrn((1, 1))),
    (B, MallowsUrn(F(1, 3))),
    (B, QBinomialUrn(F(1, 2), F(1, 2))),
    (B, CatalanUrn()),
    (B, SingleTrailHalf()),
    (G, BernoulliWalk((F(1, 3), F(2, 3)))),
    (G, DirichletUrn((1, 2))),
    (H, CrpBlocks(F(1, 2), F(1, 2))),
    (H, CrpBlocks(F(-1, 2), 2)),
]


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(SPECS), st.integers(0, 2**63 - 1), st.integers(1, 40))
def test_paths_are_monotone_and_consistent(case, seed, n):
    kind, spec = case
    rng = VertexStreams(seed)
    x = TrickleState.empty(kind)
    for _ in range(n):
        y = step(kind, spec, x, rng)
        y.check_consistency()
        assert x.leq(y)
        assert len(y.occupied()) == len(x.occupied()) + 1
        x = y


def test_simulation_is_reproducible():
    a, rec_a = simulate(B, DirichletUrn((1, 1)), 200, VertexStreams(11, 3), record=True)
    b, rec_b = simulate(B, DirichletUrn((1, 1)), 200, VertexStreams(11, 3), record=True)
    assert a == b and rec_a == rec_b
    assert rec_a[0] == {"n": 0, "new_vertex": "e", "occupied_count": 1}
    assert rec_a[-1]["occupied_count"] == 201


def test_vectorized_runner_matches_engine():
    seed, n, replicas = 99, 300, 4
    sizes = subtree_sizes_to_depth(DirichletUrn((1, 1)), n, 2, replicas, seed)
    for r in range(replicas):
        state, _ = simulate(B, DirichletUrn((1, 1)), n, VertexStreams(seed, r))
        t = state_to_tree(state)
        for u, arr in sizes.items():
            assert arr[r] == t.count(u)


def test_settle_order_matches_simulate():
    state, order = settle_order(B, CatalanUrn(), 50, VertexStreams(5))
    assert state == simulate(B, CatalanUrn(), 50, VertexStreams(5))[0]
    assert order[0] == () and len(set(order)) == 51


def test_restriction_to_downward_closed_set():
    within = [(), (0,), (1,)]
    n, replicas = 5, 100_000
    spec = DirichletUrn((1, 1))
    rng_full, rng_direct = np.random.default_rng(1), np.random.default_rng(2)
    full, direct = Counter(), Counter()
    for _ in range(replicas):
        x, _ = simulate(B, spec, n, rng_full)
        full[project(x, within)] += 1
        direct[project(simulate_within(B, spec, within, n, rng_direct), within)] += 1
    for key in set(full) | set(direct):
        p1, p2 = full[key] / replicas, direct[key] / replicas
        pooled = (p1 + p2) / 2
        se = math.sqrt(2 * pooled * (1 - pooled) / replicas)
        assert abs(p1 - p2) <= 3 * se
