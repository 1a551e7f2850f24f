import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gbpath.errors import FormatError, InconsistentView, UnknownEdge
from gbpath.graph import VertexId, edge_key, generate_map, path_edges
from gbpath.publish import publish
from gbpath.recover import (
    AdversaryView,
    EdgeStatus,
    OrderKind,
    Reconstruction,
    adversary_infer,
    participant_edge_status,
    reconstruct_path,
    score_good_output,
    true_edge_rank,
    withhold,
)


def base_path_edges(path):
    return {edge_key(VertexId(a.base), VertexId(b.base)) for a, b in path_edges(path)}


def test_participants_learn_their_status(sample_map):
    net, path = sample_map
    g = publish(net, path, None, None, 0)
    a, b, c, d = (VertexId(i) for i in range(4))
    assert participant_edge_status(g, (b, c), net) is EdgeStatus.IN_PATH
    assert participant_edge_status(g, (d, b), net) is EdgeStatus.NOT_IN_PATH
    with pytest.raises(UnknownEdge):
        participant_edge_status(g, (a, d), net)


def test_sample_map_order_is_confirmed(sample_map):
    net, path = sample_map
    rec = reconstruct_path(publish(net, path, None, None, 0), net)
    assert rec.kind is OrderKind.CONFIRMED
    assert rec.order == path
    assert score_good_output(rec, path) == 1.0


@pytest.mark.parametrize("n", [3, 5, 8])
def test_bare_path_order_is_ambiguous(n):
    # with no off-path relations every vertex is a root and a leaf
    net, path = generate_map(n, n - 1, n)
    rec = reconstruct_path(publish(net, path, None, None, 0), net)
    assert rec.kind is OrderKind.AMBIGUOUS
    assert path in rec.candidates
    assert score_good_output(rec, path) == 0.5


def test_cyclic_walk_is_recovered(cyclic_map):
    net, path = cyclic_map
    for seed in range(20):
        rec = reconstruct_path(publish(net, path, 0.5, 0.5, seed), net)
        assert rec.edge_set == base_path_edges(path)
        assert rec.kind is not OrderKind.FAILED
        assert path in rec.candidates


@settings(max_examples=150, deadline=None)
@given(st.integers(3, 10), st.integers(0, 2**32 - 1), st.sampled_from([None, 0.5, 1.0]), st.integers(0, 2))
def test_path_edges_are_recovered_exactly(n, seed, eps, cyclic):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(n - 1, n * (n - 1) // 2 + 1))
    net, path = generate_map(n, m, rng, cyclic=cyclic)
    g = publish(net, path, eps, eps, rng)
    rec = reconstruct_path(g, net)
    assert rec.edge_set == base_path_edges(path)
    for e in net.edges:
        want = EdgeStatus.IN_PATH if e in rec.edge_set else EdgeStatus.NOT_IN_PATH
        assert participant_edge_status(g, e, net) is want
    # a confirmed order may still start from the wrong end
    if rec.kind is not OrderKind.FAILED:
        assert path in rec.candidates or path[::-1] in rec.candidates


def test_scores():
    p = (VertexId(0), VertexId(1), VertexId(2))
    q = p[::-1]
    assert score_good_output(Reconstruction(frozenset(), OrderKind.CONFIRMED, (q,)), p) == 0.0
    assert score_good_output(Reconstruction(frozenset(), OrderKind.AMBIGUOUS, (p, q)), p) == 0.5
    assert score_good_output(Reconstruction(frozenset(), OrderKind.FAILED), p) == 0.0


def test_reconstruction_text_round_trip(sample_map):
    net, path = sample_map
    rec = reconstruct_path(publish(net, path, 1.0, 1.0, 3), net)
    assert Reconstruction.loads(rec.dumps()) == rec
    with pytest.raises(FormatError):
        Reconstruction.loads("EDGES 0-1\n")
    with pytest.raises(FormatError):
        Reconstruction.loads("ORDER sure\n")


# -- missing-edge adversary -------------------------------------------------


@settings(max_examples=100, deadline=None)
@given(st.integers(4, 9), st.integers(0, 2**32 - 1), st.sampled_from([0.5, 1.0]))
def test_withheld_edge_is_always_a_candidate(n, seed, eps):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(n - 1, n * (n - 1) // 2 + 1))
    net, path = generate_map(n, m, rng)
    g = publish(net, path, eps, eps, rng)
    hidden = edge_key(*path[int(rng.integers(len(path) - 1)) :][:2])
    cands = adversary_infer(withhold(net, path, g, hidden))
    assert hidden in cands
    assert sum(cands.values()) == pytest.approx(1.0)
    assert all(not net.without_edge(*hidden).has_edge(*e) for e in cands)
    assert true_edge_rank(cands, hidden) == 1


def test_withholding_needs_a_network_edge(sample_map):
    net, path = sample_map
    g = publish(net, path, None, None, 0)
    with pytest.raises(UnknownEdge):
        withhold(net, path, g, (VertexId(0), VertexId(3)))


def test_two_missing_path_edges_are_inconsistent(sample_map):
    net, path = sample_map
    g = publish(net, path, None, None, 0)
    # one added pair cannot reconnect a path that lost two links
    view = withhold(net, path, g, (path[0], path[1]))
    view = AdversaryView(view.network_minus_edge.without_edge(path[4], path[5]), view.path_vertices, g)
    with pytest.raises(InconsistentView):
        adversary_infer(view)


def test_rank_of_missing_truth():
    assert true_edge_rank({(VertexId(0), VertexId(1)): 1.0}, (VertexId(1), VertexId(2))) is None
