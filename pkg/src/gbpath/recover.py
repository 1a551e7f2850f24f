"""Path recovery by legitimate participants, order scoring, and the missing-edge attack."""

from __future__ import annotations

import enum
import itertools
from collections import defaultdict
from dataclasses import dataclass

from gbpath.errors import FormatError, InconsistentView, UnknownEdge
from gbpath.graph import Edge, Lineage, Network, Origin, PathSeq, VertexId, edge_key
from gbpath.publish import LayeredGraph


class EdgeStatus(enum.Enum):
    IN_PATH = "in-path"
    NOT_IN_PATH = "not-in-path"


class OrderKind(enum.Enum):
    CONFIRMED = "confirmed"
    AMBIGUOUS = "ambiguous"
    FAILED = "failed"


@dataclass(frozen=True)
class Reconstruction:
    edge_set: frozenset[Edge]  # base-vertex pairs
    kind: OrderKind
    candidates: tuple[PathSeq, ...] = ()  # one when confirmed, two when ambiguous

    @property
    def order(self) -> PathSeq | None:
        return self.candidates[0] if self.kind is OrderKind.CONFIRMED else None

    def dumps(self) -> str:
        edges = " ".join(f"{a}-{b}" for a, b in sorted(self.edge_set))
        lines = [f"EDGES {edges}".rstrip(), f"ORDER {self.kind.value}"]
        lines += ["SEQ " + " ".join(str(v) for v in seq) for seq in self.candidates]
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> Reconstruction:
        edges: set[Edge] = set()
        kind = None
        seqs = []
        try:
            for line in filter(None, (l.strip() for l in text.splitlines())):
                tag, *rest = line.split()
                if tag == "EDGES":
                    for tok in rest:
                        a, b = tok.split("-")
                        edges.add(edge_key(VertexId.parse(a), VertexId.parse(b)))
                elif tag == "ORDER":
                    kind = OrderKind(rest[0])
                elif tag == "SEQ":
                    seqs.append(tuple(VertexId.parse(t) for t in rest))
                else:
                    raise ValueError(f"unrecognised record {line!r}")
        except (ValueError, IndexError) as exc:
            raise FormatError(str(exc)) from None
        if kind is None:
            raise FormatError("missing ORDER record")
        return cls(frozenset(edges), kind, tuple(seqs))


def _base(v: VertexId) -> VertexId:
    return VertexId(v.base)


def _real_units(lineage: Lineage, base: int) -> list[VertexId]:
    return lineage.real_units(base)


def _separated(g: LayeredGraph, a: VertexId, b: VertexId) -> bool:
    """No piece of unit a shares a branch with any piece of unit b."""
    pieces = g.lineage.pieces
    return not any(g.comparable(x, y) for x in pieces[a] for y in pieces[b])


def path_unit_pairs(g: LayeredGraph, e: Edge) -> list[tuple[VertexId, VertexId]]:
    """Real sub-vertex pairs of base edge e whose pieces never share a branch."""
    a, b = e
    lin = g.lineage
    return [(x, y) for x in _real_units(lin, a.base) for y in _real_units(lin, b.base) if _separated(g, x, y)]


def participant_edge_status(g: LayeredGraph, e: Edge, network: Network) -> EdgeStatus:
    """Whether the network edge e lies on the published path.

    Injected duplicates are public and excluded; every real sub-vertex pair of a
    network edge is related, so a fully separated pair can only be a path step.
    """
    e = edge_key(_base(e[0]), _base(e[1]))
    if not network.has_edge(*e):
        raise UnknownEdge(f"{e[0]}-{e[1]} is not an edge of the network")
    return EdgeStatus.IN_PATH if path_unit_pairs(g, e) else EdgeStatus.NOT_IN_PATH


def _chain(units: set[VertexId], links: list[tuple[VertexId, VertexId]]) -> list[VertexId] | None:
    """The unique simple path through all units using exactly these links, else None."""
    adj: dict[VertexId, list[VertexId]] = defaultdict(list)
    for a, b in links:
        adj[a].append(b)
        adj[b].append(a)
    if len(units) == 1 and not links:
        return list(units)
    if len(links) != len(units) - 1 or set(adj) != units or any(len(n) > 2 for n in adj.values()):
        return None
    ends = sorted(u for u in units if len(adj[u]) == 1)
    if len(ends) != 2:
        return None
    seq, prev = [ends[0]], None
    while len(seq) < len(units):
        nxt = [w for w in adj[seq[-1]] if w != prev]
        if not nxt:
            return None
        prev = seq[-1]
        seq.append(nxt[0])
    return seq


def recovered_units(g: LayeredGraph, network: Network) -> tuple[set[VertexId], list[tuple[VertexId, VertexId]]]:
    lin = g.lineage
    units = {u for u in lin.pieces if lin.origin(u) is Origin.REAL}
    links = [pair for e in sorted(network.edges) for pair in path_unit_pairs(g, e)]
    return units, links


def reconstruct_path(g: LayeredGraph, network: Network) -> Reconstruction:
    """Recover the path edges, then pick the chain end nearer to a root as the start."""
    units, links = recovered_units(g, network)
    edge_set = frozenset(edge_key(_base(a), _base(b)) for a, b in links)
    seq = _chain(units, links)
    if seq is None:
        return Reconstruction(edge_set, OrderKind.FAILED)
    lin = g.lineage
    root_idx = [i for i, u in enumerate(seq) if any(p in g.roots for p in lin.pieces[u])]
    if not root_idx:
        return Reconstruction(edge_set, OrderKind.FAILED)
    head = min(root_idx)
    tail = len(seq) - 1 - max(root_idx)
    forward = tuple(_base(u) for u in seq)
    backward = forward[::-1]
    if head < tail:
        return Reconstruction(edge_set, OrderKind.CONFIRMED, (forward,))
    if tail < head:
        return Reconstruction(edge_set, OrderKind.CONFIRMED, (backward,))
    return Reconstruction(edge_set, OrderKind.AMBIGUOUS, (forward, backward))


def score_good_output(rec: Reconstruction, truth: PathSeq) -> float:
    truth = tuple(_base(v) for v in truth)
    if rec.kind is OrderKind.CONFIRMED:
        return 1.0 if rec.candidates[0] == truth else 0.0
    if rec.kind is OrderKind.AMBIGUOUS:
        return 0.5 if truth in rec.candidates else 0.0
    return 0.0


# -- missing-edge adversary -------------------------------------------------


@dataclass(frozen=True)
class AdversaryView:
    network_minus_edge: Network
    path_vertices: frozenset[VertexId]
    published: LayeredGraph

    @property
    def lineage(self) -> Lineage:
        return self.published.lineage


def withhold(network: Network, path: PathSeq, g: LayeredGraph, e: Edge) -> AdversaryView:
    e = edge_key(_base(e[0]), _base(e[1]))
    if not network.has_edge(*e):
        raise UnknownEdge(f"{e[0]}-{e[1]} is not an edge of the network")
    return AdversaryView(network.without_edge(*e), frozenset(_base(v) for v in path), g)


def adversary_infer(view: AdversaryView) -> dict[Edge, float]:
    """Absent pairs whose addition makes the publication decode to one full path.

    Decoding uses the same rules as a participant: a real sub-vertex pair of a
    network edge that never shares a branch is a path step. Returns the
    consistent candidates with uniform weights.
    """
    g = view.published
    net = view.network_minus_edge
    units, known = recovered_units(g, net)
    if not view.path_vertices <= {_base(u) for u in units}:
        raise InconsistentView("path vertices missing from the published lineage")
    out = []
    for a, b in itertools.combinations(sorted(net.vertices), 2):
        if net.has_edge(a, b):
            continue
        extra = path_unit_pairs(g, (a, b))
        if _chain(units, known + extra) is not None:
            out.append((a, b))
    if not out:
        raise InconsistentView("no absent pair is consistent with the publication")
    return {e: 1.0 / len(out) for e in out}


def true_edge_rank(candidates: dict[Edge, float], truth: Edge) -> int | None:
    """1-based rank of the withheld edge by weight (ties share the best rank)."""
    truth = edge_key(_base(truth[0]), _base(truth[1]))
    if truth not in candidates:
        return None
    return 1 + sum(1 for w in candidates.values() if w > candidates[truth])
