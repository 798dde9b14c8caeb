import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import path_net, projection_trial, random_net
from sgpursuit.graph import AttributedNetwork, induced_subgraph_connected
from sgpursuit.projections import (
    ProjectionSizeError,
    TopologyConstraint,
    connected_subsets,
    exact_project_oracle,
    head_project,
    pcst_project,
    tail_project,
    top_s_select,
)

X = np.array([5.0, 0.0, 4.0])


def test_tail_k1_on_path():
    r = exact_project_oracle(X, 1, path_net(3), "tail")
    assert r.support.tolist() == [0]
    assert r.residual == pytest.approx(4.0)


def test_tail_k2_tie_prefers_smaller_support():
    # {0} and {0, 1} both leave residual 4; tail ties go to the smaller set
    r = exact_project_oracle(X, 2, path_net(3), "tail")
    assert r.residual == pytest.approx(4.0)
    assert r.support.tolist() == [0]


def test_zero_vector_is_degenerate():
    for mode in ("head", "tail"):
        r = exact_project_oracle(np.zeros(3), 2, path_net(3), mode)
        assert r.support.size == 0 and r.captured_mass == 0.0 and r.degenerate
        r = pcst_project(np.zeros(3), 2, path_net(3), mode)
        assert r.support.size == 0 and r.captured_mass == 0.0


def test_head_k1_and_k2_on_path():
    r1 = exact_project_oracle(X, 1, path_net(3), "head")
    assert r1.support.tolist() == [0] and r1.captured_mass == pytest.approx(5.0)
    r2 = exact_project_oracle(X, 2, path_net(3), "head")
    assert r2.support.tolist() == [0, 1] and r2.captured_mass == pytest.approx(5.0)


def test_head_star_center_leaf_pair():
    net = AttributedNetwork(np.zeros((5, 1)), [[0, i] for i in range(1, 5)])
    r = exact_project_oracle(np.ones(5), 2, net, "head")
    assert 0 in r.support and r.support.size == 2
    assert r.captured_mass == pytest.approx(math.sqrt(2))


def test_triangle_examples():
    tri = AttributedNetwork(np.zeros((3, 1)), [[0, 1], [1, 2], [0, 2]])
    x = np.array([3.0, 2.0, 1.0])
    h = exact_project_oracle(x, 2, tri, "head")
    assert h.support.tolist() == [0, 1] and h.captured_mass == pytest.approx(math.sqrt(13))
    t = exact_project_oracle(x, 3, tri, "tail")
    assert t.support.tolist() == [0, 1, 2] and t.residual == 0.0


def test_edgeless_pair_gives_singleton():
    net = AttributedNetwork(np.zeros((2, 1)))
    r = exact_project_oracle(np.ones(2), 2, net, "head")
    assert r.support.size == 1 and r.captured_mass == pytest.approx(1.0)
    r = pcst_project(np.ones(2), 2, net, "head")
    assert r.support.size == 1 and r.captured_mass == pytest.approx(1.0)


def test_pcst_single_supported_node():
    net = path_net(6)
    x = np.zeros(6)
    x[3] = 2.0
    for mode in ("head", "tail"):
        assert pcst_project(x, 1, net, mode).support.tolist() == [3]


def test_connected_subset_count():
    # a path on 4 nodes has 4 + 3 + 2 + 1 connected subsets
    assert len(list(connected_subsets(path_net(4), 4))) == 10


def test_exact_cap_enforced():
    net = path_net(16)
    with pytest.raises(ProjectionSizeError, match="n <= 15"):
        head_project(np.ones(16), TopologyConstraint(3, backend="exact"), net)


def test_constraint_validation():
    with pytest.raises(ValueError):
        TopologyConstraint(0)
    with pytest.raises(ValueError):
        TopologyConstraint(3, backend="greedy")
    with pytest.raises(ValueError):
        TopologyConstraint(3, kind="dense")
    with pytest.raises(ValueError):
        head_project(np.ones(3), TopologyConstraint(4), path_net(3))


def test_exact_backend_is_optimal(rng):
    net = random_net(rng, 9, 1, density=0.3)
    x = rng.standard_normal(9)
    c = TopologyConstraint(3, backend="exact")
    best = max(np.sum(x[list(S)] ** 2) for S in connected_subsets(net, 3))
    assert head_project(x, c, net).captured_mass ** 2 == pytest.approx(best)
    assert tail_project(x, c, net).residual ** 2 == pytest.approx(np.sum(x**2) - best)


def test_pcst_contracts_seeded(rng):
    results = [projection_trial(rng) for _ in range(60)]
    assert all(all(r) for r in results)


def test_pcst_large_graph_respects_budget(rng):
    net = random_net(rng, 400, 1, density=0.01)
    x = rng.standard_normal(400)
    r = pcst_project(x, 20, net, "tail")
    assert 1 <= r.support.size <= 40
    assert induced_subgraph_connected(net, r.support)


@pytest.mark.parametrize("v, s, expected", [((0.5, -2, 1, 0.1), 2, [1, 2]), ((1, 1, 1), 2, [0, 1])])
def test_top_s(v, s, expected):
    assert top_s_select(np.array(v, dtype=float), s).tolist() == expected


def test_top_s_degenerate():
    idx, flag = top_s_select(np.zeros(4), 1, with_flag=True)
    assert idx.tolist() == [0] and flag


def test_top_s_tiebreak():
    assert top_s_select(np.ones(3), 1, tiebreak=np.array([0.0, 2.0, 1.0])).tolist() == [1]


def test_top_s_bad_s():
    with pytest.raises(ValueError):
        top_s_select(np.ones(3), 4)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=1, max_size=30), st.data())
def test_top_s_property(values, data):
    v = np.array(values)
    s = data.draw(st.integers(1, v.size))
    idx = top_s_select(v, s)
    assert idx.size == s and np.all(np.diff(idx) > 0)
    rest = np.setdiff1d(np.arange(v.size), idx)
    if rest.size:
        assert np.abs(v[idx]).min() >= np.abs(v[rest]).max()


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000))
def test_pcst_contract_property(seed):
    assert all(projection_trial(np.random.default_rng(seed)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 100_000))
def test_exact_head_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 10))
    net = random_net(rng, n, 1)
    x = rng.standard_normal(n)
    k = int(rng.integers(1, n + 1))
    perm = rng.permutation(n)
    inv = np.argsort(perm)
    pnet = AttributedNetwork(net.W[perm], inv[net.edges])
    a = exact_project_oracle(x, k, net, "head")
    b = exact_project_oracle(x[perm], k, pnet, "head")
    assert b.captured_mass == pytest.approx(a.captured_mass, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 8))
def test_search_region_matches_pairwise_distances(seed, limit):
    from itertools import combinations

    from scipy.sparse.csgraph import shortest_path

    from sgpursuit._pcst import path_region

    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 25))
    net = random_net(rng, n, 1)
    adj = net.adjacency
    D = shortest_path(adj, unweighted=True)
    src = np.sort(rng.choice(n, int(rng.integers(1, n + 1)), replace=False))
    nodes, hops = path_region(n, adj.indptr.astype(np.int64), adj.indices.astype(np.int64), src, limit)
    want = [v for v in range(n) if v in src or any(D[v, a] + D[v, b] <= limit for a, b in combinations(src, 2))]
    assert nodes.tolist() == want
    np.testing.assert_array_equal(hops, D[np.ix_(nodes, src)].min(axis=1))
