from __future__ import annotations

import itertools

import networkx as nx
import pytest

from gbpath.graph import Network, VertexId

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: dict[int, str] = {}


def record(criterion: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES[criterion] = f"criterion {criterion}: {'PASS' if passed else 'FAIL'} {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


def vid(*xs: int) -> tuple[VertexId, ...]:
    return tuple(VertexId(x) for x in xs)


# six-vertex worked example: path a..f plus eight off-path edges
A, B, C, D, E, F = range(6)
SAMPLE_OFF_PATH = [(A, C), (A, F), (B, D), (B, E), (B, F), (C, E), (C, F), (D, F)]
SAMPLE_PATH_EDGES = [(A, B), (B, C), (C, D), (D, E), (E, F)]


@pytest.fixture
def sample_map() -> tuple[Network, tuple[VertexId, ...]]:
    return Network.from_indices(6, SAMPLE_OFF_PATH + SAMPLE_PATH_EDGES), vid(*range(6))


@pytest.fixture
def cyclic_map() -> tuple[Network, tuple[VertexId, ...]]:
    a, b, c, d, e, f = range(6)
    edges = [(a, b), (a, e), (b, e), (b, c), (b, f), (e, f), (e, d), (c, d), (c, f)]
    return Network.from_indices(6, edges), vid(a, b, c, d, e, b, c, f)


def comparability_oracle(graph) -> nx.Graph:
    """Pairs on a common branch, via networkx transitive closure."""
    dg = nx.DiGraph()
    dg.add_nodes_from(v for v, _ in graph.vertices)
    dg.add_edges_from(graph.edges)
    tc = nx.transitive_closure_dag(dg)
    return nx.Graph(tc.to_undirected())


def is_comparability_graph(n: int, edges: set[tuple[int, int]]) -> bool:
    """Brute force: some vertex order orients the edges transitively."""
    adj = [set() for _ in range(n)]
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    for perm in itertools.permutations(range(n)):
        rank = {v: i for i, v in enumerate(perm)}
        ok = True
        for a in range(n):
            for b in adj[a]:
                if rank[b] <= rank[a]:
                    continue
                for c in adj[b]:
                    if rank[c] > rank[b] and c not in adj[a]:
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                break
        if ok:
            return True
    return False
