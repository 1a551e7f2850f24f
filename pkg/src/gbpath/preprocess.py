"""Private ring removal (vertex step) and private relation matrix (edge step)."""

from __future__ import annotations

import enum
import itertools
from collections import Counter
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from gbpath.errors import CyclicPath, InstanceTooLarge, InvalidInput
from gbpath.graph import (
    Edge,
    Lineage,
    LineageEntry,
    Network,
    Origin,
    PathSeq,
    RelationMatrix,
    VertexId,
    edge_key,
    validate,
)
from gbpath.mechanism import (
    VERTEX_SENSITIVITY,
    ScoredCandidate,
    check_budget,
    edge_sensitivity,
    exp_mechanism,
    exp_mechanism_many,
    quality_edge,
    quality_vertex,
    selection_probabilities,
)

MAX_RATIO_BASES = 5
MAX_RATIO_OUTPUTS = 1 << 16


@dataclass(frozen=True)
class ProcessedNetwork:
    """Network with sub-vertices and an acyclic path through all of them.

    ``path`` is the relabelled walk followed by any injected duplicates.
    """

    network: Network
    path: PathSeq
    lineage: Lineage

    @cached_property
    def path_edges(self) -> frozenset[Edge]:
        """Consecutive path pairs counted as path edges.

        A consecutive pair between two real visits must also be a network edge; links
        that reach an injected duplicate exist only inside the processed path.
        """
        out = set()
        for a, b in zip(self.path, self.path[1:]):
            fake = Origin.INJECTED in (self.lineage.origin(a), self.lineage.origin(b))
            if fake or self.network.has_edge(a, b):
                out.add(edge_key(a, b))
        return frozenset(out)

    @property
    def injected(self) -> tuple[VertexId, ...]:
        return tuple(v for v in self.path if self.lineage.origin(v) is Origin.INJECTED)


def sub_count_distribution(
    network: Network, path: PathSeq, eps_v: float | None
) -> dict[VertexId, tuple[list[int], np.ndarray]]:
    """Per base vertex: the candidate sub-vertex counts and their sampling probabilities."""
    appearances = Counter(path)
    hi = max(max(appearances.values(), default=1), 2)
    max_d = max((network.degree(v) for v in network.vertices), default=0)
    out = {}
    for v in network.vertices:
        lo = appearances[v]
        if eps_v is None:
            out[v] = ([lo], np.ones(1))
            continue
        counts = list(range(lo, hi + 1))
        q = [quality_vertex(n, hi, network.degree(v), max_d) for n in counts]
        out[v] = (counts, selection_probabilities(q, eps_v, VERTEX_SENSITIVITY))
    return out


def preprocess_vertices(
    network: Network, path: PathSeq, eps_v: float | None, rng: np.random.Generator | None = None
) -> ProcessedNetwork:
    """Relabel repeated visits as sub-vertices and inject private duplicates.

    ``eps_v=None`` disables the injection (every base keeps exactly its visit count).
    """
    problems = validate(network, path)
    if problems:
        raise InvalidInput("; ".join(f"{p.kind} {p.detail}".strip() for p in problems))
    if eps_v is not None:
        check_budget(eps_v)
        if rng is None:
            raise InvalidInput("a random generator is required when eps_v is set")
    appearances = Counter(path)
    hi = max(max(appearances.values()), 2)
    max_d = max(network.degree(v) for v in network.vertices)

    sub_num: dict[VertexId, int] = {}
    for v in network.vertices:
        lo = appearances[v]
        if eps_v is None:
            sub_num[v] = lo
            continue
        cands = [ScoredCandidate(n, quality_vertex(n, hi, network.degree(v), max_d)) for n in range(lo, hi + 1)]
        sub_num[v] = exp_mechanism(cands, eps_v, VERTEX_SENSITIVITY, rng)

    seen: Counter[VertexId] = Counter()
    relabelled = []
    for v in path:
        relabelled.append(VertexId(v.base, seen[v]))
        seen[v] += 1
    entries = [LineageEntry(VertexId(v.base, i), Origin.REAL) for v in network.vertices for i in range(appearances[v])]
    for v in network.vertices:
        for i in range(appearances[v], sub_num[v]):
            sub = VertexId(v.base, i)
            relabelled.append(sub)
            entries.append(LineageEntry(sub, Origin.INJECTED))

    subs = {v: [VertexId(v.base, i) for i in range(sub_num[v])] for v in network.vertices}
    edges = [(a, b) for u, v in network.edges for a in subs[u] for b in subs[v]]
    vertices = [s for v in network.vertices for s in subs[v]]
    return ProcessedNetwork(Network.build(vertices, edges), tuple(relabelled), Lineage.build(entries))


def initial_relation(pn: ProcessedNetwork) -> RelationMatrix:
    """Relation matrix before randomization, indexed in processed-path order."""
    ids = pn.path
    if len(set(ids)) != len(ids):
        raise CyclicPath("processed path repeats a vertex")
    n = len(ids)
    mat = np.zeros((n, n), dtype=np.int8)
    np.fill_diagonal(mat, -1)
    idx = {v: i for i, v in enumerate(ids)}
    for u, v in pn.network.edges:
        if u in idx and v in idx:
            mat[idx[u], idx[v]] = mat[idx[v], idx[u]] = 2
    for u, v in pn.path_edges:
        mat[idx[u], idx[v]] = mat[idx[v], idx[u]] = 1
    return RelationMatrix(ids, mat)


def same_branch_probability(pn: ProcessedNetwork, eps_e: float) -> float:
    """Probability that a non-edge is turned into a same-branch (r=2) pair."""
    # the quality formula degenerates below three edges; its two-candidate
    # distribution does not depend on |E|, so three stands in for smaller counts
    m = max(len(pn.network.edges), 3)
    probs = selection_probabilities([quality_edge(1, m), quality_edge(2, m)], eps_e, edge_sensitivity(m))
    return float(probs[1])


def preprocess_edges(pn: ProcessedNetwork, eps_e: float | None, rng: np.random.Generator | None = None) -> RelationMatrix:
    """Fill every non-edge of the relation matrix with 1 or 2.

    Pairs are drawn independently in row-major order. ``eps_e=None`` disables the
    randomization and sends every non-edge to the path side (1).
    """
    base = initial_relation(pn)
    mat = base.entries.copy()
    iu, ju = np.triu_indices(base.order, 1)
    zero = mat[iu, ju] == 0
    zi, zj = iu[zero], ju[zero]
    if eps_e is None:
        vals = np.ones(len(zi), dtype=np.int8)
    else:
        check_budget(eps_e)
        if rng is None:
            raise InvalidInput("a random generator is required when eps_e is set")
        m = max(len(pn.network.edges), 3)
        cands = [ScoredCandidate(x, quality_edge(x, m)) for x in (1, 2)]
        vals = np.array(exp_mechanism_many(cands, eps_e, edge_sensitivity(m), rng, len(zi)), dtype=np.int8)
    mat[zi, zj] = vals
    mat[zj, zi] = vals
    return RelationMatrix(base.ids, mat)


class Step(enum.Enum):
    VERTEX = "vertex"
    EDGE = "edge"


def empirical_privacy_ratio(
    step: Step | str,
    instance_pair: tuple[tuple[Network, PathSeq], tuple[Network, PathSeq]],
    eps: float,
) -> float:
    """Exact max over outputs of Pr[out | first] / Pr[out | second].

    Both inputs are enumerated exhaustively with the analytic sampling probabilities;
    the paths need not be valid in their networks (the second input is usually the
    adversary's view with one path edge missing).
    """
    step = Step(step)
    (net_a, path_a), (net_b, path_b) = instance_pair
    for net in (net_a, net_b):
        if len({v.base for v in net.vertices}) > MAX_RATIO_BASES:
            raise InstanceTooLarge(f"exact enumeration is capped at {MAX_RATIO_BASES} base vertices")
    if step is Step.VERTEX:
        return _vertex_ratio(net_a, path_a, net_b, path_b, eps)
    return _edge_ratio(net_a, path_a, net_b, path_b, eps)


def _ratio(pa: float, pb: float) -> float:
    if pa == 0.0:
        return 0.0
    return np.inf if pb == 0.0 else pa / pb


def _vertex_ratio(net_a, path_a, net_b, path_b, eps) -> float:
    da = sub_count_distribution(net_a, path_a, eps)
    db = sub_count_distribution(net_b, path_b, eps)
    if set(da) != set(db):
        raise InvalidInput("vertex-step inputs must share a vertex set")
    verts = sorted(da)
    supports = [sorted(set(da[v][0]) | set(db[v][0])) for v in verts]
    if np.prod([len(s) for s in supports], dtype=float) > MAX_RATIO_OUTPUTS:
        raise InstanceTooLarge("too many vertex-step outputs to enumerate")

    def prob(dist, v, n):
        counts, probs = dist[v]
        return float(probs[counts.index(n)]) if n in counts else 0.0

    worst = 0.0
    for out in itertools.product(*supports):
        pa = float(np.prod([prob(da, v, n) for v, n in zip(verts, out)]))
        pb = float(np.prod([prob(db, v, n) for v, n in zip(verts, out)]))
        worst = max(worst, _ratio(pa, pb))
    return worst


def _pair_distributions(net: Network, path: PathSeq, eps: float) -> tuple[tuple[VertexId, ...], list[dict[int, float]]]:
    pn = _identity_processing(net, path)
    init = initial_relation(pn)
    p2 = same_branch_probability(pn, eps)
    iu, ju = np.triu_indices(init.order, 1)
    dists = []
    for i, j in zip(iu.tolist(), ju.tolist()):
        r = int(init.entries[i, j])
        dists.append({1: 1.0 - p2, 2: p2} if r == 0 else {r: 1.0})
    return init.ids, dists


def _identity_processing(net: Network, path: PathSeq) -> ProcessedNetwork:
    # the edge step is analysed on a fixed vertex set, so no duplicates are injected
    entries = [LineageEntry(v, Origin.REAL) for v in net.vertices]
    return ProcessedNetwork(net, tuple(path), Lineage.build(entries))


def _edge_ratio(net_a, path_a, net_b, path_b, eps) -> float:
    ids_a, da = _pair_distributions(net_a, path_a, eps)
    ids_b, db = _pair_distributions(net_b, path_b, eps)
    if ids_a != ids_b:
        raise InvalidInput("edge-step inputs must share the processed vertex order")
    supports = [sorted(set(a) | set(b)) for a, b in zip(da, db)]
    if np.prod([len(s) for s in supports], dtype=float) > MAX_RATIO_OUTPUTS:
        raise InstanceTooLarge("too many edge-step outputs to enumerate")
    worst = 0.0
    for out in itertools.product(*supports):
        pa = float(np.prod([d.get(x, 0.0) for d, x in zip(da, out)]))
        pb = float(np.prod([d.get(x, 0.0) for d, x in zip(db, out)]))
        worst = max(worst, _ratio(pa, pb))
    return worst
