"""Build the published layered graph from a randomized relation matrix.

Vertices are inserted one at a time in processed-path order. A vertex placed on a
layer is in the same branch as every vertex on another layer that it has r=2 with,
so a placement is legal when no r=2 pair shares a layer and the induced
"above + r=2" relation stays transitive. Dead ends are handled by backtracking
over layer choices; when the whole search is exhausted the vertex that could not
be placed is split into pieces that each carry part of its relations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterable

import numpy as np

from gbpath.errors import FormatError, InternalNontermination, InvalidInput, UnrandomizedMatrix, UnusableMap
from gbpath.graph import (
    Lineage,
    LineageEntry,
    Network,
    Origin,
    PathSeq,
    RelationMatrix,
    VertexId,
)
from gbpath.mechanism import BudgetLedger
from gbpath.preprocess import ProcessedNetwork, preprocess_edges, preprocess_vertices

TRANSITION_CAP = 1_000_000
SEARCH_MODES = ("pruned", "exhaustive")


# -- published graph --------------------------------------------------------


@dataclass(frozen=True)
class LayeredGraph:
    """Layered graph; each edge is stored as (upper, lower) with upper on the smaller layer."""

    vertices: tuple[tuple[VertexId, int], ...]
    edges: frozenset[tuple[VertexId, VertexId]]
    lineage: Lineage

    @cached_property
    def layer(self) -> dict[VertexId, int]:
        return dict(self.vertices)

    @property
    def layer_count(self) -> int:
        return 1 + max(self.layer.values()) - min(self.layer.values()) if self.vertices else 0

    @cached_property
    def _children(self) -> dict[VertexId, tuple[VertexId, ...]]:
        out: dict[VertexId, list[VertexId]] = {v: [] for v, _ in self.vertices}
        for a, b in sorted(self.edges):
            out[a].append(b)
        return {v: tuple(cs) for v, cs in out.items()}

    @cached_property
    def _parents(self) -> dict[VertexId, tuple[VertexId, ...]]:
        out: dict[VertexId, list[VertexId]] = {v: [] for v, _ in self.vertices}
        for a, b in sorted(self.edges):
            out[b].append(a)
        return {v: tuple(ps) for v, ps in out.items()}

    def children(self, v: VertexId) -> tuple[VertexId, ...]:
        return self._children[v]

    def parents(self, v: VertexId) -> tuple[VertexId, ...]:
        return self._parents[v]

    @cached_property
    def roots(self) -> frozenset[VertexId]:
        return frozenset(v for v, ps in self._parents.items() if not ps)

    @cached_property
    def leaves(self) -> frozenset[VertexId]:
        return frozenset(v for v, cs in self._children.items() if not cs)

    @cached_property
    def descendants(self) -> dict[VertexId, frozenset[VertexId]]:
        out: dict[VertexId, frozenset[VertexId]] = {}
        for v, _ in sorted(self.vertices, key=lambda x: -x[1]):
            acc: set[VertexId] = set()
            for c in self._children[v]:
                acc.add(c)
                acc |= out[c]
            out[v] = frozenset(acc)
        return out

    def comparable(self, u: VertexId, v: VertexId) -> bool:
        """True when u and v lie on a common branch (monotone edge chain)."""
        return u != v and (v in self.descendants[u] or u in self.descendants[v])

    def reversed(self) -> LayeredGraph:
        flipped = {(b, a) for a, b in self.edges}
        return _relayer([v for v, _ in self.vertices], flipped, self.lineage)

    def dumps(self) -> str:
        by_layer: dict[int, list[VertexId]] = {}
        for v, l in self.vertices:
            by_layer.setdefault(l, []).append(v)
        lines = [f"GP {self.layer_count}"]
        for l in sorted(by_layer):
            lines.append(f"L {l} " + " ".join(str(v) for v in sorted(by_layer[l])))
        lines += sorted(f"E {a} {b}" for a, b in self.edges)
        lin = []
        for e in self.lineage.entries:
            tail = f" {e.parent.sub}" if e.origin is Origin.SPLIT else ""
            lin.append(f"LIN {e.vertex.base} {e.vertex.sub} {e.origin.value}{tail}")
        lines += sorted(lin)
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> LayeredGraph:
        vertices: list[tuple[VertexId, int]] = []
        edges: set[tuple[VertexId, VertexId]] = set()
        entries: list[LineageEntry] = []
        declared = None
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tag, *rest = line.split()
            try:
                if tag == "GP" and len(rest) == 1:
                    declared = int(rest[0])
                elif tag == "L" and rest:
                    layer = int(rest[0])
                    vertices += [(VertexId.parse(t), layer) for t in rest[1:]]
                elif tag == "E" and len(rest) == 2:
                    edges.add((VertexId.parse(rest[0]), VertexId.parse(rest[1])))
                elif tag == "LIN" and len(rest) in (3, 4):
                    vid = VertexId(int(rest[0]), int(rest[1]))
                    origin = Origin(rest[2])
                    parent = VertexId(vid.base, int(rest[3])) if len(rest) == 4 else None
                    if (origin is Origin.SPLIT) != (parent is not None):
                        raise ValueError("split entries carry exactly one parent sub index")
                    entries.append(LineageEntry(vid, origin, parent))
                else:
                    raise ValueError(f"unrecognised record {line!r}")
            except ValueError as exc:
                raise FormatError(f"line {lineno}: {exc}") from None
        if declared is None:
            raise FormatError("missing 'GP <n_layers>' header")
        g = cls(tuple(sorted(vertices)), frozenset(edges), Lineage.build(entries))
        if {v for v, _ in vertices} != set(g.lineage.by_vertex):
            raise FormatError("layer and lineage sections list different vertices")
        if g.layer_count != declared:
            raise FormatError(f"header declares {declared} layers, found {g.layer_count}")
        return g


def _relayer(vertices: Iterable[VertexId], edges: set[tuple[VertexId, VertexId]], lineage: Lineage) -> LayeredGraph:
    """Assign each vertex the length of the longest edge chain above it."""
    verts = sorted(vertices)
    parents: dict[VertexId, list[VertexId]] = {v: [] for v in verts}
    for a, b in edges:
        parents[b].append(a)
    height: dict[VertexId, int] = {}

    def h(v: VertexId) -> int:
        if v not in height:
            height[v] = 1 + max((h(p) for p in parents[v]), default=-1)
        return height[v]

    for v in verts:
        h(v)
    return LayeredGraph(tuple((v, height[v]) for v in verts), frozenset(edges), lineage)


# -- insertion machinery (bitmask core) ------------------------------------


@lru_cache(maxsize=1 << 16)
def _bits(mask: int) -> tuple[int, ...]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return tuple(out)


class _Layering:
    """Partial placement over vertex indices; ``two2[i]`` is the r=2 row of i.

    Layers are kept as an ordered list of bitmask levels (top first). A position
    ``p`` in ``0..2L`` is either a gap (even: a new level inserted at index p//2)
    or an existing level (odd: index p//2), so a vertex can also go between two
    occupied layers. Larger positions are lower in the graph.
    """

    def __init__(self, two2: list[int]):
        self.two2 = two2
        self.layer: list[int | None] = [None] * len(two2)
        self.levels: list[int] = []
        self.placed = 0

    def place(self, u: int, p: int) -> None:
        i = p // 2
        if p % 2 == 0:
            self.levels.insert(i, 0)
            for level in self.levels[i + 1 :]:
                for j in _bits(level):
                    self.layer[j] += 1
        self.levels[i] |= 1 << u
        self.layer[u] = i
        self.placed |= 1 << u

    def unplace(self, u: int) -> None:
        i = self.layer[u]
        self.layer[u] = None
        self.placed &= ~(1 << u)
        self.levels[i] &= ~(1 << u)
        if not self.levels[i]:
            del self.levels[i]
            for level in self.levels[i:]:
                for j in _bits(level):
                    self.layer[j] -= 1

    def _sweeps(self) -> tuple[list[int], list[int]]:
        # pre[k]: union of levels[:k]; suf[k]: union of levels[k:]
        n = len(self.levels)
        pre, suf = [0] * (n + 1), [0] * (n + 1)
        for k, level in enumerate(self.levels):
            pre[k + 1] = pre[k] | level
        for k in range(n - 1, -1, -1):
            suf[k] = suf[k + 1] | self.levels[k]
        return pre, suf

    def _bad(self, rel: int, pre: list[int], suf: list[int]) -> tuple[int, int]:
        """Members of rel whose ancestors (resp. descendants) are not all in rel."""
        two2, layer = self.two2, self.layer
        bad_up = bad_down = 0
        for a in _bits(rel & self.placed):
            la = layer[a]
            if two2[a] & pre[la] & ~rel:
                bad_up |= 1 << a
            if two2[a] & suf[la + 1] & ~rel:
                bad_down |= 1 << a
        return bad_up, bad_down

    def _ok(self, rel: int, p: int, pre, suf, bad_up: int, bad_down: int) -> bool:
        if p % 2 and rel & self.levels[p // 2]:
            return False
        up, down = rel & pre[p // 2], rel & suf[(p + 1) // 2]
        if up & bad_up or down & bad_down:
            return False
        two2 = self.two2
        return not (down and any(down & ~two2[a] for a in _bits(up)))

    def candidates(self, u: int, rel: int | None = None) -> list[int]:
        """Legal positions for u, largest first."""
        rel = self.two2[u] if rel is None else rel
        pre, suf = self._sweeps()
        bad_up, bad_down = self._bad(rel, pre, suf)
        return [p for p in range(2 * len(self.levels), -1, -1) if self._ok(rel, p, pre, suf, bad_up, bad_down)]

    def all_placeable(self, us: list[int]) -> bool:
        """Whether every vertex in us still has at least one legal position."""
        if not us:
            return True
        pre, suf = self._sweeps()
        top = 2 * len(self.levels)
        for u in us:
            rel = self.two2[u]
            bad_up, bad_down = self._bad(rel, pre, suf)
            if not any(self._ok(rel, p, pre, suf, bad_up, bad_down) for p in range(top, -1, -1)):
                return False
        return True

    def fits(self, u: int, p: int, rel: int | None = None) -> bool:
        rel = self.two2[u] if rel is None else rel
        pre, suf = self._sweeps()
        return self._ok(rel, p, pre, suf, *self._bad(rel, pre, suf))

    def cover_at(self, rel: int, p: int, sweeps: tuple[list[int], list[int]] | None = None) -> int:
        """Largest subset C of rel's placed members that a fresh piece at position p can relate to."""
        pre, suf = sweeps or self._sweeps()
        two2, layer = self.two2, self.layer
        pool = rel & self.placed
        if p % 2:
            pool &= ~self.levels[p // 2]
        up = down = 0
        for a in _bits(pool & pre[p // 2]):
            if not (two2[a] & pre[layer[a]] & ~pool):
                up |= 1 << a
        for b in _bits(pool & suf[(p + 1) // 2]):
            if not (two2[b] & suf[layer[b] + 1] & ~pool):
                down |= 1 << b
        keep_down = down
        for a in _bits(up):
            keep_down &= two2[a]
        keep_up = up
        for b in _bits(down):
            keep_up &= two2[b]
        first, second = up | keep_down, keep_up | down
        return first if _popcount(first) >= _popcount(second) else second

    @property
    def positions(self) -> range:
        return range(2 * len(self.levels) + 1)

    def snapshot(self) -> tuple:
        return (list(self.two2), list(self.layer), list(self.levels), self.placed)

    def restore(self, snap: tuple) -> None:
        two2, layer, levels, placed = snap
        self.two2, self.layer, self.levels, self.placed = list(two2), list(layer), list(levels), placed


def _popcount(x: int) -> int:
    return x.bit_count()


@dataclass
class _Pieces:
    """Bookkeeping for split pieces: new index -> the index it was carved from."""

    ids: list[VertexId]
    origin_of: dict[int, int] = field(default_factory=dict)
    next_sub: dict[int, int] = field(default_factory=dict)

    def new(self, of: int) -> int:
        root = self.origin_of.get(of, of)
        base = self.ids[root].base
        if base not in self.next_sub:
            self.next_sub[base] = 1 + max(v.sub for v in self.ids if v.base == base)
        self.ids.append(VertexId(base, self.next_sub[base]))
        self.next_sub[base] += 1
        k = len(self.ids) - 1
        self.origin_of[k] = root
        return k


def _resolve(state: _Layering, pieces: _Pieces, v0: int) -> list[int]:
    """Split v0 (and, where needed, its uncoverable neighbours) and place every piece.

    Returns the indices placed, in placement order.
    """
    two2 = state.two2
    rel = two2[v0] & state.placed
    future = two2[v0] & ~state.placed & ~(1 << v0)
    uncovered = rel
    placed_now: list[int] = []
    main_done = False
    # greedy set cover over per-position feasible neighbour subsets
    while uncovered:
        best, best_gain, best_pos = 0, 0, 0
        sweeps = state._sweeps()
        for p in state.positions:
            c = state.cover_at(rel, p, sweeps)
            gain = _popcount(c & uncovered)
            if gain > best_gain:
                best, best_gain, best_pos = c, gain, p
        if not best_gain:
            break
        k = v0 if not main_done else _grow(state, pieces, v0)
        _set_row(state, k, best | (future if k == v0 else 0), clear=(k == v0))
        assert state.fits(k, best_pos)
        state.place(k, best_pos)
        placed_now.append(k)
        main_done = True
        uncovered &= ~best
    if not main_done:
        _set_row(state, v0, future, clear=True)
        state.place(v0, state.positions[-1])
        placed_now.append(v0)
    # neighbours no layer can reach get a dedicated two-vertex tree
    for x in _bits(uncovered):
        xp = _grow(state, pieces, x)
        vp = _grow(state, pieces, v0)
        two2[x] &= ~(1 << v0)
        _set_row(state, xp, 1 << vp, clear=True)
        _set_row(state, vp, 1 << xp, clear=True)
        state.place(xp, 1 if state.levels else 0)
        state.place(vp, 2 * state.layer[xp] + 2)
        placed_now += [xp, vp]
    return placed_now


def _grow(state: _Layering, pieces: _Pieces, of: int) -> int:
    k = pieces.new(of)
    state.two2.append(0)
    state.layer.append(None)
    return k


def _set_row(state: _Layering, k: int, row: int, clear: bool) -> None:
    two2 = state.two2
    if clear:
        for j in _bits(two2[k]):
            two2[j] &= ~(1 << k)
    two2[k] = row
    for j in _bits(row):
        two2[j] |= 1 << k


@dataclass(frozen=True)
class InsertionResult:
    graph: LayeredGraph
    relation: RelationMatrix  # over graph vertices, pieces included
    splits: int
    transitions: int


def _masks(matrix: RelationMatrix) -> list[int]:
    ent = matrix.entries
    out = []
    for i in range(matrix.order):
        row = 0
        for j in np.flatnonzero(ent[i] == 2).tolist():
            row |= 1 << j
        out.append(row)
    return out


def insertion_order(n: int) -> list[int]:
    """First path vertex, then the rest taken from the back of the path."""
    return [0] + list(range(n - 1, 0, -1)) if n else []


class _ArcParity:
    """Union-find over r=2 pairs with a parity bit per pair.

    Each unordered pair {a, b} (a < b) carries one orientation variable: 0 means
    a is above b. Forcing rules and fixed directions become parity constraints;
    a contradiction means the pairs cannot be oriented transitively. Vertices
    are added one at a time, so the largest consistent prefix costs one pass.
    """

    def __init__(self, two2: list[int]):
        self.two2 = two2
        self.n = len(two2)
        self.ground = self.n * self.n
        self.parent = list(range(self.ground + 1))
        self.parity = [0] * (self.ground + 1)
        self.members = 0

    def _find(self, x: int) -> tuple[int, int]:
        parent, parity = self.parent, self.parity
        path = []
        while parent[x] != x:
            path.append(x)
            x = parent[x]
        acc = 0
        for y in reversed(path):
            acc ^= parity[y]
            parity[y] = acc
            parent[y] = x
        return x, (parity[path[0]] if path else 0)

    def _union(self, x: int, y: int, d: int) -> bool:
        """Require var(x) xor var(y) == d."""
        rx, px = self._find(x)
        ry, py = self._find(y)
        if rx == ry:
            return px ^ py == d
        if rx == self.ground:
            rx, ry, px, py = ry, rx, py, px
        self.parent[rx] = ry
        self.parity[rx] = px ^ py ^ d
        return True

    def _pair(self, a: int, b: int) -> tuple[int, int]:
        # pair id and the variable value meaning "a above b"
        return (a * self.n + b, 0) if a < b else (b * self.n + a, 1)

    def add(self, v: int, layer: list[int | None] | None = None) -> bool:
        """Add v's forcing constraints; with ``layer``, also fix v's arcs to placed members."""
        two2, members = self.two2, self.members
        nv = two2[v] & members
        nbrs = _bits(nv)
        for i, b in enumerate(nbrs):
            xb, ob = self._pair(v, b)
            # v above b forces v above c for every c unrelated to b
            for c in _bits(nv & ~two2[b] & ~((1 << (b + 1)) - 1)):
                xc, oc = self._pair(v, c)
                if not self._union(xb, xc, ob ^ oc):
                    return False
            # a above v forces a above c for every c of a's unrelated to v
            for c in _bits(two2[b] & members & ~nv):
                xc, oc = self._pair(b, c)
                if not self._union(xb, xc, (ob ^ 1) ^ oc):
                    return False
        if layer is not None:
            for b in nbrs:
                x, o = self._pair(v, b) if layer[v] < layer[b] else self._pair(b, v)
                if not self._union(x, self.ground, o):
                    return False
        self.members = members | 1 << v
        return True

    def classes(self) -> dict[tuple[int, int], int]:
        """Class id of every arc inside the members; (a, b) and (b, a) get paired ids."""
        out = {}
        for a in _bits(self.members):
            for b in _bits(self.two2[a] & self.members):
                x, o = self._pair(a, b)
                root, p = self._find(x)
                out[a, b] = 2 * root + (p ^ o)
        return out


class _Forcing:
    """Direction already fixed for each implication class (+1 down, -1 up)."""

    def __init__(self, classes: dict[tuple[int, int], int]):
        self.classes = classes
        self.status: dict[int, int] = {}

    def fix(self, state: _Layering, v: int) -> list[int] | None:
        """Record v's arcs to placed neighbours; None (and no change) on a contradiction."""
        layer, cls, status = state.layer, self.classes, self.status
        changed: list[int] = []
        for w in _bits(state.two2[v] & state.placed & ~(1 << v)):
            a, b = (w, v) if layer[w] < layer[v] else (v, w)
            for c, d in ((cls[a, b], 1), (cls[b, a], -1)):
                got = status.get(c)
                if got is None:
                    status[c] = d
                    changed.append(c)
                elif got != d:
                    self.undo(changed)
                    return None
        return changed

    def undo(self, changed: list[int]) -> None:
        for c in changed:
            del self.status[c]


class _NoForcing:
    def fix(self, state: _Layering, v: int) -> list[int]:
        return []

    def undo(self, changed: list[int]) -> None:
        pass


def _reachable_prefix(state: _Layering, order: list[int], pos: int) -> tuple[int, _Forcing]:
    """Largest k >= pos for which placed + order[pos:k] can still be oriented.

    The test is monotone in k; before any split it is exact.
    """
    def seeded() -> _ArcParity:
        arcs = _ArcParity(state.two2)
        for v in _bits(state.placed):
            ok = arcs.add(v, state.layer)
            assert ok, "a placed layering always passes its own test"
        return arcs

    arcs, k = seeded(), pos
    for v in order[pos:]:
        if not arcs.add(v):
            # a failed add leaves partial unions behind; replay the good prefix
            arcs = seeded()
            for u in order[pos:k]:
                arcs.add(u)
            break
        k += 1
    forcing = _Forcing(arcs.classes())
    for v in _bits(state.placed):
        forcing.fix(state, v)
    return k, forcing


def build_layers(
    path: PathSeq,
    matrix: RelationMatrix,
    lineage: Lineage | None = None,
    *,
    allow_split: bool = True,
    cap: int = TRANSITION_CAP,
    search: str = "pruned",
) -> InsertionResult:
    """Insert the path's vertices one at a time, splitting vertices when stuck.

    ``search="exhaustive"`` is plain backtracking over every candidate position.
    ``search="pruned"`` bounds each round with an orientability test and prunes
    placements that contradict forced arc directions or strand a later vertex;
    it returns the same layering as plain backtracking until the first split.
    """
    if search not in SEARCH_MODES:
        raise InvalidInput(f"search must be one of {SEARCH_MODES}, got {search!r}")
    pruned = search == "pruned"
    if not matrix.is_randomized():
        raise UnrandomizedMatrix("insertion needs a fully randomized relation matrix")
    if len(set(path)) != len(path):
        raise InvalidInput("insertion needs an acyclic path")
    if set(path) != set(matrix.ids):
        raise InvalidInput("path and matrix cover different vertices")
    if lineage is None:
        lineage = Lineage.build(LineageEntry(v, Origin.REAL) for v in matrix.ids)
    idx = [matrix.index[v] for v in path]
    order = [idx[i] for i in insertion_order(len(idx))]

    state = _Layering(_masks(matrix))
    pieces = _Pieces(list(matrix.ids))
    transitions = 0
    splits = 0
    # stack of (vertex, untried positions, forcing changes); entries below `frozen` stay put
    stack: list[tuple[int, list[int], list[int]]] = []
    frozen = 0
    pos = 0
    while pos < len(order):
        # no extension can reach past `limit`; before any split this bound is exact
        if pruned:
            limit, forcing = _reachable_prefix(state, order, pos)
        else:
            limit, forcing = len(order), _NoForcing()
        best_pos, backup = pos, (state.snapshot(), list(stack))
        cands: list[int] | None = None
        while pos < limit:
            v = order[pos]
            if cands is None:
                cands = state.candidates(v)
            changed = None
            while cands:
                state.place(v, cands.pop(0))
                transitions += 1
                changed = forcing.fix(state, v)
                if changed is not None and (not pruned or state.all_placeable(order[pos + 1 : limit])):
                    break
                if changed is not None:
                    forcing.undo(changed)
                    changed = None
                state.unplace(v)
                transitions += 1
            if changed is not None:
                stack.append((v, cands, changed))
                pos += 1
                cands = None
                if pos > best_pos:
                    best_pos, backup = pos, (state.snapshot(), [e[:2] + ([],) for e in stack])
            elif len(stack) > frozen:
                w, cands, undo = stack.pop()
                forcing.undo(undo)
                state.unplace(w)
                pos -= 1
                transitions += 1
            else:
                break
            if transitions > cap:
                raise InternalNontermination(f"insertion exceeded {cap} transitions")
        if pos == len(order):
            break
        if not allow_split:
            raise UnusableMap(f"no layer assignment exists for vertex {matrix.ids[order[best_pos]]}")
        if pos < limit:
            snap, saved = backup
            state.restore(snap)
            stack, pos = saved, best_pos
        placed_now = _resolve(state, pieces, order[pos])
        stack += [(k, [], []) for k in placed_now]
        frozen = len(stack)
        pos += 1
        splits += 1
        transitions += len(placed_now)

    ids = pieces.ids
    entries = list(lineage.entries)
    for k, root in pieces.origin_of.items():
        entries.append(LineageEntry(ids[k], Origin.SPLIT, lineage.unit(ids[root])))
    full_lineage = Lineage.build(entries)
    graph = _graph_from_layers(ids, state.layer, state.two2, full_lineage)
    return InsertionResult(graph, _relation_from_masks(ids, state.two2), splits, transitions)


def _relation_from_masks(ids: list[VertexId], two2: list[int]) -> RelationMatrix:
    n = len(ids)
    mat = np.ones((n, n), dtype=np.int8)
    for i in range(n):
        for j in _bits(two2[i]):
            mat[i, j] = 2
    np.fill_diagonal(mat, -1)
    return RelationMatrix(tuple(ids), mat)


def _graph_from_layers(ids: list[VertexId], layer: list[int], two2: list[int], lineage: Lineage) -> LayeredGraph:
    n = len(ids)
    below = []
    for i in range(n):
        m = 0
        for j in _bits(two2[i]):
            if layer[j] > layer[i]:
                m |= 1 << j
        below.append(m)
    above = [0] * n
    for i in range(n):
        for j in _bits(below[i]):
            above[j] |= 1 << i
    # transitive reduction: keep i->j unless some k sits strictly between them
    edges = set()
    for i in range(n):
        for j in _bits(below[i]):
            if not (below[i] & above[j]):
                edges.add((ids[i], ids[j]))
    return _relayer(ids, edges, lineage)


def insert_vertices(
    path: PathSeq, matrix: RelationMatrix, *, allow_split: bool = True, search: str = "pruned"
) -> LayeredGraph:
    """Unoriented layered graph for an acyclic path and a randomized matrix."""
    return build_layers(path, matrix, allow_split=allow_split, search=search).graph


# -- public views of the insertion state -----------------------------------


@dataclass(frozen=True)
class InsertionState:
    """Placed vertices in insertion (stack) order with their layers."""

    placed: tuple[tuple[VertexId, int], ...] = ()

    @property
    def top(self) -> int:
        return min((l for _, l in self.placed), default=0)

    @property
    def bottom(self) -> int:
        return max((l for _, l in self.placed), default=0)


def _state_layering(state: InsertionState, matrix: RelationMatrix) -> tuple[_Layering, list[int]]:
    lay = _Layering(_masks(matrix))
    distinct = sorted({l for _, l in state.placed})
    lay.levels = [0] * len(distinct)
    for v, l in state.placed:
        i, k = matrix.index[v], distinct.index(l)
        lay.levels[k] |= 1 << i
        lay.layer[i] = k
        lay.placed |= 1 << i
    return lay, distinct


def _position(distinct: list[int], layer: int) -> int:
    # an occupied integer layer joins that level; any other value opens a new one
    below = sum(1 for l in distinct if l < layer)
    return 2 * below + 1 if layer in distinct else 2 * below


def test_insertion_layer(state: InsertionState, u: VertexId, matrix: RelationMatrix, layer: int) -> bool:
    """Whether u may be placed on ``layer`` without breaking the branch rules."""
    if not state.top - 1 <= layer <= state.bottom + 1:
        raise InvalidInput(f"layer {layer} outside [{state.top - 1}, {state.bottom + 1}]")
    lay, distinct = _state_layering(state, matrix)
    return lay.fits(matrix.index[u], _position(distinct, layer))


test_insertion_layer.__test__ = False  # not a pytest test despite the name


def resolve_conflicts(
    state: InsertionState, matrix: RelationMatrix, v0: VertexId, lineage: Lineage | None = None
) -> tuple[InsertionState, RelationMatrix, Lineage]:
    """Split v0 (and neighbours no layer can reach) so that every relation is realised."""
    if lineage is None:
        lineage = Lineage.build(LineageEntry(v, Origin.REAL) for v in matrix.ids)
    lay, distinct = _state_layering(state, matrix)
    pieces = _Pieces(list(matrix.ids))
    placed_now = _resolve(lay, pieces, matrix.index[v0])
    ids = pieces.ids
    offset = distinct[0] if distinct else 0
    order = [matrix.index[v] for v, _ in state.placed] + placed_now
    placed = [(ids[k], offset + lay.layer[k]) for k in order]
    extra = [LineageEntry(ids[k], Origin.SPLIT, lineage.unit(ids[r])) for k, r in pieces.origin_of.items()]
    return InsertionState(tuple(placed)), _relation_from_masks(ids, lay.two2), lineage.with_entries(extra)


# -- orientation and the full pipeline -------------------------------------


def path_positions(path: PathSeq, lineage: Lineage) -> dict[VertexId, int]:
    pos = {v: i for i, v in enumerate(path)}
    return {v: pos[lineage.unit(v)] for v in lineage.by_vertex if lineage.unit(v) in pos}


def group_distance(group: Iterable[VertexId], origin: int, pos: dict[VertexId, int]) -> float:
    return min((abs(pos[v] - origin) for v in group if v in pos), default=math.inf)


def orient(graph: LayeredGraph, first_vertex: VertexId, path: PathSeq) -> LayeredGraph:
    """Put the root/leaf group nearest the first path vertex on top (ties keep)."""
    pos = path_positions(path, graph.lineage)
    origin = pos[first_vertex]
    if group_distance(graph.leaves, origin, pos) < group_distance(graph.roots, origin, pos):
        return graph.reversed()
    return graph


@dataclass(frozen=True)
class Publication:
    graph: LayeredGraph
    processed: ProcessedNetwork
    relation: RelationMatrix  # randomized, before any splitting
    final_relation: RelationMatrix  # over the published vertices
    splits: int
    transitions: int
    budget: float | None


def publish_full(
    network: Network,
    path: PathSeq,
    eps_v: float | None,
    eps_e: float | None,
    rng: np.random.Generator | int | None,
    *,
    allow_split: bool = True,
    search: str = "pruned",
) -> Publication:
    """Vertex step, edge step, insertion and orientation. ``None`` budgets disable a step."""
    rng = np.random.default_rng(rng)
    pn = preprocess_vertices(network, path, eps_v, rng)
    rel = preprocess_edges(pn, eps_e, rng)
    ins = build_layers(pn.path, rel, pn.lineage, allow_split=allow_split, search=search)
    graph = orient(ins.graph, pn.path[0], pn.path)
    budget = BudgetLedger(eps_v, eps_e).total() if eps_v is not None and eps_e is not None else None
    return Publication(graph, pn, rel, ins.relation, ins.splits, ins.transitions, budget)


def publish(
    network: Network,
    path: PathSeq,
    eps_v: float | None,
    eps_e: float | None,
    rng: np.random.Generator | int | None,
    *,
    allow_split: bool = True,
    search: str = "pruned",
) -> LayeredGraph:
    return publish_full(network, path, eps_v, eps_e, rng, allow_split=allow_split, search=search).graph


# -- rule checker -----------------------------------------------------------


def check_rules(graph: LayeredGraph, relation: RelationMatrix, max_chains: int = 100_000) -> list[str]:
    """Every violated structural rule, as readable strings (empty when sound)."""
    out: list[str] = []
    layer = graph.layer
    if set(layer) != set(relation.ids):
        return ["vertex sets of graph and relation differ"]
    for a, b in graph.edges:
        if layer[a] >= layer[b]:
            out.append(f"edge {a}-{b} does not go down a layer")
    ids = sorted(layer)
    for i, u in enumerate(ids):
        for v in ids[i + 1 :]:
            r = relation.r(u, v)
            comp = graph.comparable(u, v)
            if r == 2 and not comp:
                out.append(f"r=2 pair {u},{v} not on a common branch")
            elif r == 1 and comp:
                out.append(f"r=1 pair {u},{v} on a common branch")
    # every root-to-leaf chain must be pairwise r=2
    count = 0
    stack = [(r,) for r in sorted(graph.roots)]
    while stack and count < max_chains:
        chain = stack.pop()
        kids = graph.children(chain[-1])
        if not kids:
            count += 1
            for i, u in enumerate(chain):
                for v in chain[i + 1 :]:
                    if relation.r(u, v) != 2:
                        out.append(f"branch {'-'.join(map(str, chain))} holds r=1 pair {u},{v}")
            continue
        stack.extend(chain + (c,) for c in kids)
    if len(ids) >= 2:
        roots = sorted(graph.roots)
        if len(roots) < 2:
            out.append("fewer than two roots")
        elif not any(relation.r(a, b) == 1 for i, a in enumerate(roots) for b in roots[i + 1 :]):
            out.append("no two roots are path-related")
    return out
