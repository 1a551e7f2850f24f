import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gbpath.errors import InstanceTooLarge, InvalidInput
from gbpath.graph import Network, Origin, VertexId, edge_key, generate_map
from gbpath.preprocess import (
    Step,
    empirical_privacy_ratio,
    initial_relation,
    preprocess_edges,
    preprocess_vertices,
    same_branch_probability,
    sub_count_distribution,
)


def test_cyclic_path_is_relabelled(cyclic_map):
    net, path = cyclic_map
    pn = preprocess_vertices(net, path, None)
    b0, b1, c0, c1 = VertexId(1, 0), VertexId(1, 1), VertexId(2, 0), VertexId(2, 1)
    assert pn.path == (VertexId(0), b0, c0, VertexId(3), VertexId(4), b1, c1, VertexId(5))
    # sub-vertices inherit the base connection, only consecutive visits are path edges
    assert pn.network.has_edge(b0, c1)
    assert edge_key(b0, c0) in pn.path_edges
    assert edge_key(b1, c1) in pn.path_edges
    assert edge_key(b0, c1) not in pn.path_edges
    assert all(pn.lineage.origin(v) is Origin.REAL for v in pn.path)


@given(st.integers(3, 8), st.integers(0, 10_000), st.sampled_from([0.5, 1.0, 3.0]))
def test_injected_duplicates_extend_the_path(n, seed, eps):
    net, path = generate_map(n, n + 1 if n > 3 else 3, seed, cyclic=1)
    pn = preprocess_vertices(net, path, eps, np.random.default_rng(seed))
    visits = Counter(path)
    hi = max(max(visits.values()), 2)
    assert pn.path[: len(path)] == tuple(VertexId(v.base, i) for v, i in _with_visit_index(path))
    assert all(pn.lineage.origin(v) is Origin.INJECTED for v in pn.path[len(path) :])
    for v in net.vertices:
        subs = [u for u in pn.path if u.base == v.base]
        assert visits[v] <= len(subs) <= hi
    # links that touch a duplicate are path links of the processed path
    for a, b in zip(pn.path[len(path) - 1 :], pn.path[len(path) :]):
        assert edge_key(a, b) in pn.path_edges


def _with_visit_index(path):
    seen = Counter()
    for v in path:
        yield v, seen[v]
        seen[v] += 1


def test_sub_count_range_and_probabilities():
    net = Network.from_indices(3, [(0, 1), (1, 2)])
    path = (VertexId(0), VertexId(1), VertexId(2))
    dist = sub_count_distribution(net, path, 1.0)
    counts, probs = dist[VertexId(0)]
    assert counts == [1, 2]
    # fewer duplicates have higher quality by exactly one step
    assert probs[0] == pytest.approx(math.exp(0.5) / (1 + math.exp(0.5)))
    assert sub_count_distribution(net, path, None)[VertexId(1)][0] == [1]


def test_initial_relation_follows_network(sample_map):
    net, path = sample_map
    pn = preprocess_vertices(net, path, None)
    rel = initial_relation(pn)
    a, b, c, d = (VertexId(i) for i in range(4))
    assert rel.r(a, a) == -1
    assert rel.r(a, b) == 1
    assert rel.r(a, c) == 2
    assert rel.r(a, d) == 0


def test_edge_step_fills_every_non_edge(sample_map):
    net, path = sample_map
    pn = preprocess_vertices(net, path, None)
    base = initial_relation(pn)
    off = preprocess_edges(pn, None)
    assert off.is_randomized()
    assert np.all(off.entries[base.entries == 0] == 1)
    dp = preprocess_edges(pn, 1.0, np.random.default_rng(0))
    assert dp.is_randomized()
    known = base.entries != 0
    assert np.array_equal(dp.entries[known], base.entries[known])
    assert np.array_equal(dp.entries, dp.entries.T)


def test_same_branch_probability_closed_form(sample_map):
    pn = preprocess_vertices(*sample_map, None)
    for eps in (0.5, 1.0):
        assert same_branch_probability(pn, eps) == pytest.approx(1 / (1 + math.exp(-eps / 2)))


def test_budgets_need_a_generator(sample_map):
    net, path = sample_map
    with pytest.raises(InvalidInput):
        preprocess_vertices(net, path, 1.0, None)
    with pytest.raises(InvalidInput):
        preprocess_edges(preprocess_vertices(net, path, None), 1.0, None)


def test_invalid_maps_are_rejected():
    net = Network.from_indices(3, [(0, 1), (1, 2)])
    with pytest.raises(InvalidInput):
        preprocess_vertices(net, (VertexId(0), VertexId(2), VertexId(1)), None)


# -- exact privacy ratios ---------------------------------------------------


def _neighbours(n, m, seed, cyclic=0):
    net, path = generate_map(n, m, seed, cyclic=cyclic)
    a, b = path[len(path) // 2 - 1], path[len(path) // 2]
    return (net, path), (net.without_edge(a, b), path)


@pytest.mark.parametrize("step", list(Step))
def test_identical_inputs_have_ratio_one(step):
    inst = generate_map(4, 4, 1)
    assert empirical_privacy_ratio(step, (inst, inst), 0.5) == pytest.approx(1.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 5), st.integers(0, 10_000), st.sampled_from([0.5, 1.0]), st.integers(0, 1))
def test_vertex_step_ratio_bound(n, seed, eps, cyclic):
    m = min(n + 1, n * (n - 1) // 2)
    pair = _neighbours(n, m, seed, cyclic)
    assert empirical_privacy_ratio(Step.VERTEX, pair, eps) <= math.exp(eps) + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 4), st.integers(0, 10_000), st.sampled_from([0.5, 1.0]))
def test_edge_step_ratio_bound(n, seed, eps):
    pair = _neighbours(n, n, seed)
    ratio = empirical_privacy_ratio(Step.EDGE, pair, eps)
    assert ratio <= 2 * math.exp(eps) + 1e-12
    # worst output: the withheld pair lands on the path side
    assert ratio == pytest.approx(1 + math.exp(eps / 2))


def test_ratio_enumeration_is_capped():
    net, path = generate_map(6, 7, 0)
    with pytest.raises(InstanceTooLarge):
        empirical_privacy_ratio(Step.VERTEX, ((net, path), (net, path)), 1.0)
