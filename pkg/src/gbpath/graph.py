"""Network/path data model, synthetic maps, relation matrices and the map file format."""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, NamedTuple

import numpy as np

from gbpath.errors import FormatError, OutOfRangeEdges, TooFewVertices, UnrandomizedMatrix


class VertexId(NamedTuple):
    """A base vertex (``sub == 0``) or one of its duplicates / split pieces."""

    base: int
    sub: int = 0

    def __str__(self) -> str:
        return str(self.base) if self.sub == 0 else f"{self.base}.{self.sub}"

    @classmethod
    def parse(cls, token: str) -> VertexId:
        try:
            if "." in token:
                base, sub = token.split(".", 1)
                vid = cls(int(base), int(sub))
            else:
                vid = cls(int(token), 0)
        except ValueError:
            raise FormatError(f"bad vertex token {token!r}") from None
        if vid.base < 0 or vid.sub < 0:
            raise FormatError(f"negative vertex token {token!r}")
        return vid


Edge = tuple[VertexId, VertexId]
PathSeq = tuple[VertexId, ...]


def edge_key(u: VertexId, v: VertexId) -> Edge:
    return (u, v) if u <= v else (v, u)


@dataclass(frozen=True)
class Network:
    """Undirected simple graph. Edges are stored as sorted pairs."""

    vertices: tuple[VertexId, ...]
    edges: frozenset[Edge]

    @classmethod
    def build(cls, vertices: Iterable[VertexId], edges: Iterable[tuple[VertexId, VertexId]]) -> Network:
        return cls(tuple(sorted(set(vertices))), frozenset(edge_key(u, v) for u, v in edges))

    @classmethod
    def from_indices(cls, n: int, edges: Iterable[tuple[int, int]]) -> Network:
        return cls.build((VertexId(i) for i in range(n)), ((VertexId(u), VertexId(v)) for u, v in edges))

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)

    @cached_property
    def adjacency(self) -> dict[VertexId, frozenset[VertexId]]:
        adj: dict[VertexId, set[VertexId]] = {v: set() for v in self.vertices}
        for u, v in self.edges:
            adj.setdefault(u, set()).add(v)
            adj.setdefault(v, set()).add(u)
        return {v: frozenset(ns) for v, ns in adj.items()}

    def degree(self, v: VertexId) -> int:
        return len(self.adjacency.get(v, ()))

    def has_edge(self, u: VertexId, v: VertexId) -> bool:
        return edge_key(u, v) in self.edges

    def is_connected(self) -> bool:
        if not self.vertices:
            return True
        seen = {self.vertices[0]}
        queue = deque(seen)
        while queue:
            for w in self.adjacency[queue.popleft()]:
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        return len(seen) == len(self.vertices)

    def without_edge(self, u: VertexId, v: VertexId) -> Network:
        return Network(self.vertices, self.edges - {edge_key(u, v)})

    def with_edge(self, u: VertexId, v: VertexId) -> Network:
        return Network(self.vertices, self.edges | {edge_key(u, v)})


def path_edges(path: PathSeq) -> set[Edge]:
    return {edge_key(a, b) for a, b in zip(path, path[1:])}


class Origin(enum.Enum):
    REAL = "real"
    INJECTED = "injected"
    SPLIT = "split"


@dataclass(frozen=True)
class LineageEntry:
    vertex: VertexId
    origin: Origin
    # sub-vertex a split piece was carved from; None otherwise
    parent: VertexId | None = None


@dataclass(frozen=True)
class Lineage:
    """Public base-vertex -> sub-vertex table."""

    entries: tuple[LineageEntry, ...]

    @classmethod
    def build(cls, entries: Iterable[LineageEntry]) -> Lineage:
        return cls(tuple(sorted(entries, key=lambda e: e.vertex)))

    @cached_property
    def by_vertex(self) -> dict[VertexId, LineageEntry]:
        return {e.vertex: e for e in self.entries}

    @cached_property
    def table(self) -> dict[int, tuple[VertexId, ...]]:
        out: dict[int, list[VertexId]] = {}
        for e in self.entries:
            out.setdefault(e.vertex.base, []).append(e.vertex)
        return {b: tuple(vs) for b, vs in out.items()}

    def origin(self, v: VertexId) -> Origin:
        return self.by_vertex[v].origin

    def unit(self, v: VertexId) -> VertexId:
        """The pre-split sub-vertex that ``v`` stands for (itself unless a split piece)."""
        entry = self.by_vertex[v]
        return entry.parent if entry.origin is Origin.SPLIT else v

    @cached_property
    def pieces(self) -> dict[VertexId, tuple[VertexId, ...]]:
        """Pre-split sub-vertex -> every published vertex representing it."""
        out: dict[VertexId, list[VertexId]] = {}
        for e in self.entries:
            out.setdefault(self.unit(e.vertex), []).append(e.vertex)
        return {u: tuple(vs) for u, vs in out.items()}

    def real_units(self, base: int) -> list[VertexId]:
        """Pre-split sub-vertices of ``base`` that are real path visits."""
        return [u for u in self.pieces if u.base == base and self.by_vertex[u].origin is Origin.REAL]

    def with_entries(self, extra: Iterable[LineageEntry]) -> Lineage:
        return Lineage.build((*self.entries, *extra))


@dataclass(frozen=True)
class RelationMatrix:
    """Symmetric table over {-1, 0, 1, 2} with a side table of vertex ids.

    2: edge of the network off the path, 1: path edge, 0: non-edge, -1: diagonal.
    """

    ids: tuple[VertexId, ...]
    entries: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        arr = np.array(self.entries, dtype=np.int8)
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def order(self) -> int:
        return len(self.ids)

    @cached_property
    def index(self) -> dict[VertexId, int]:
        return {v: i for i, v in enumerate(self.ids)}

    def r(self, u: VertexId, v: VertexId) -> int:
        return int(self.entries[self.index[u], self.index[v]])

    def is_randomized(self) -> bool:
        off = ~np.eye(self.order, dtype=bool)
        return not np.any(self.entries[off] == 0)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RelationMatrix):
            return NotImplemented
        return self.ids == other.ids and np.array_equal(self.entries, other.entries)

    def __hash__(self) -> int:
        return hash((self.ids, self.entries.tobytes()))

    def dumps(self) -> str:
        lines = [f"R {self.order}"]
        lines += [" ".join(str(int(x)) for x in row) for row in self.entries]
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str, ids: tuple[VertexId, ...] | None = None) -> RelationMatrix:
        rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        if not rows or rows[0][0] != "R" or len(rows[0]) != 2:
            raise FormatError("matrix dump must start with 'R <n>'")
        n = int(rows[0][1])
        body = np.array([[int(x) for x in row] for row in rows[1:]], dtype=np.int8)
        if body.shape != (n, n):
            raise FormatError(f"expected {n}x{n} entries, got {body.shape}")
        return cls(ids or tuple(VertexId(i) for i in range(n)), body)


def derive_subgraphs(matrix: RelationMatrix) -> tuple[set[Edge], set[Edge]]:
    """Split a randomized matrix into G (same-branch pairs) and H (path-like pairs)."""
    if not matrix.is_randomized():
        raise UnrandomizedMatrix("off-diagonal zero entries remain")
    g: set[Edge] = set()
    h: set[Edge] = set()
    ids = matrix.ids
    iu, ju = np.triu_indices(matrix.order, 1)
    for i, j in zip(iu.tolist(), ju.tolist()):
        (g if matrix.entries[i, j] == 2 else h).add(edge_key(ids[i], ids[j]))
    return g, h


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str = ""


def validate(network: Network, path: PathSeq) -> list[Violation]:
    out: list[Violation] = []
    vset = set(network.vertices)
    for u, v in sorted(network.edges):
        if u == v:
            out.append(Violation("SelfLoop", str(u)))
        for w in (u, v):
            if w not in vset:
                out.append(Violation("UnknownEndpoint", f"{u}-{v}"))
                break
    n, m = network.vertex_count, len(network.edges)
    if n > 1 and not (n - 1 <= m <= n * (n - 1) // 2):
        out.append(Violation("EdgeCount", f"|E|={m} outside [{n - 1}, {n * (n - 1) // 2}]"))
    if not network.is_connected():
        out.append(Violation("Disconnected"))
    for i, (a, b) in enumerate(zip(path, path[1:])):
        if not network.has_edge(a, b):
            out.append(Violation("NonEdgeStep", str(i)))
    for v in path:
        if v not in vset:
            out.append(Violation("UnknownPathVertex", str(v)))
    missing = vset - set(path)
    if missing:
        out.append(Violation("UncoveredVertex", " ".join(map(str, sorted(missing)))))
    return out


def generate_map(
    num_vertices: int,
    num_edges: int,
    rng: np.random.Generator | int | None,
    cyclic: int = 0,
) -> tuple[Network, PathSeq]:
    """Random connected map holding a path through every vertex.

    The path is a uniform vertex permutation; the remaining edges are drawn uniformly
    from the non-path pairs. ``cyclic`` splices that many revisits into the path.
    """
    if num_vertices < 2:
        raise TooFewVertices(f"need at least 2 vertices, got {num_vertices}")
    lo, hi = num_vertices - 1, num_vertices * (num_vertices - 1) // 2
    if not lo <= num_edges <= hi:
        raise OutOfRangeEdges(f"{num_edges} edges outside [{lo}, {hi}] for {num_vertices} vertices")
    rng = np.random.default_rng(rng)
    order = [int(x) for x in rng.permutation(num_vertices)]
    chosen = {tuple(sorted(p)) for p in zip(order, order[1:])}
    rest = [(i, j) for i in range(num_vertices) for j in range(i + 1, num_vertices) if (i, j) not in chosen]
    extra = num_edges - lo
    if extra:
        picks = rng.choice(len(rest), size=extra, replace=False)
        chosen.update(rest[int(k)] for k in sorted(picks))
    network = Network.from_indices(num_vertices, chosen)
    path = [VertexId(v) for v in order]
    for _ in range(cyclic):
        path = _splice_revisit(network, path, rng)
    return network, tuple(path)


def _splice_revisit(network: Network, path: list[VertexId], rng: np.random.Generator) -> list[VertexId]:
    # insert an already-visited vertex w between path[i-1] and path[i] (or at the end)
    i = int(rng.integers(1, len(path) + 1))
    prev = path[i - 1]
    nxt = path[i] if i < len(path) else None
    earlier = set(path[: i - 1])
    cands = sorted(
        w
        for w in earlier
        if w != prev and w != nxt and network.has_edge(prev, w) and (nxt is None or network.has_edge(w, nxt))
    )
    if not cands:
        return path
    w = cands[int(rng.integers(len(cands)))]
    return path[:i] + [w] + path[i:]


# -- map file format -------------------------------------------------------


def dumps_map(network: Network, path: PathSeq) -> str:
    bases = {v.base for v in network.vertices}
    if network.vertices != tuple(VertexId(i) for i in range(len(bases))):
        raise FormatError("map files hold raw networks over vertices 0..n-1")
    lines = [f"V {network.vertex_count}"]
    lines += [f"E {u} {v}" for u, v in sorted(network.edges)]
    lines.append("P " + " ".join(str(v) for v in path))
    return "\n".join(lines) + "\n"


def loads_map(text: str) -> tuple[Network, PathSeq]:
    n: int | None = None
    edges: list[tuple[VertexId, VertexId]] = []
    path: PathSeq | None = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tag, *rest = line.split()
        if tag == "V" and len(rest) == 1:
            n = _int(rest[0], lineno)
        elif tag == "E" and len(rest) == 2:
            edges.append((VertexId.parse(rest[0]), VertexId.parse(rest[1])))
        elif tag == "P":
            path = tuple(VertexId.parse(t) for t in rest)
        else:
            raise FormatError(f"line {lineno}: unrecognised record {line!r}")
    if n is None:
        raise FormatError("missing 'V <n>' header")
    if path is None:
        raise FormatError("missing 'P ...' line")
    return Network.build((VertexId(i) for i in range(n)), edges), path


def _int(token: str, lineno: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise FormatError(f"line {lineno}: expected integer, got {token!r}") from None
