from __future__ import annotations

import itertools

from cavitycarve.qstate import GraphSpec


def iter_connected_graphs(n_vertices: int):
    """Every connected labeled graph on ``n_vertices`` vertices."""
    pairs = list(itertools.combinations(range(n_vertices), 2))
    for bits in range(2 ** len(pairs)):
        edges = [pairs[i] for i in range(len(pairs)) if (bits >> i) & 1]
        g = GraphSpec.from_edges(n_vertices, edges)
        if g.is_connected():
            yield g


def greedy_back_degrees(graph: GraphSpec, order) -> list[int]:
    placed: set[int] = set()
    degrees = []
    for v in order:
        degrees.append(sum(1 for u in graph.neighbors(v) if u in placed))
        placed.add(v)
    return degrees
