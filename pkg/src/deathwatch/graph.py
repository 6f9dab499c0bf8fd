"""Aggregate scene records into the weighted social network and export it.

Every scene is treated as a clique: each unordered pair of participants gets
its tie strength raised by one. Edge weights are therefore exact shared-scene
counts (integers), and the total edge weight of a build equals
sum over scenes of C(|participants|, 2).
"""

from __future__ import annotations

import csv
import io
from collections import Counter
from itertools import combinations
from typing import Iterable, Mapping

from .transcripts import SceneRecord

EXPORT_FORMATS = ("edge-csv", "dot")


class SocialGraph:
    """Immutable undirected weighted graph keyed by character id.

    Edge keys are lexicographically ordered pairs; self-loops are rejected
    and weights must be positive integers.
    """

    def __init__(self, nodes: Iterable[str], edges: Mapping[tuple[str, str], int]):
        node_set = set(nodes)
        normalized: dict[tuple[str, str], int] = {}
        for (a, b), weight in edges.items():
            if a == b:
                raise ValueError(f"self-loop on {a!r}")
            if not isinstance(weight, int) or weight < 1:
                raise ValueError(f"edge {a!r}-{b!r} has non-positive weight {weight!r}")
            key = (a, b) if a <= b else (b, a)
            if key in normalized and normalized[key] != weight:
                raise ValueError(f"conflicting weights for edge {key}")
            normalized[key] = weight
            node_set.add(a)
            node_set.add(b)
        self._nodes = frozenset(node_set)
        self._edges = normalized
        self._adj: dict[str, dict[str, int]] = {v: {} for v in node_set}
        for (a, b), weight in normalized.items():
            self._adj[a][b] = weight
            self._adj[b][a] = weight

    @property
    def nodes(self) -> frozenset[str]:
        return self._nodes

    @property
    def edges(self) -> dict[tuple[str, str], int]:
        return dict(self._edges)

    def sorted_nodes(self) -> list[str]:
        return sorted(self._nodes)

    def sorted_edges(self) -> list[tuple[str, str, int]]:
        return [(a, b, w) for (a, b), w in sorted(self._edges.items())]

    def has_node(self, v: str) -> bool:
        return v in self._nodes

    def neighbors(self, v: str) -> dict[str, int]:
        """Neighbor -> edge weight map for ``v`` (do not mutate)."""
        if v not in self._adj:
            raise KeyError(f"unknown node {v!r}")
        return self._adj[v]

    def degree(self, v: str) -> int:
        return len(self.neighbors(v))

    def strength(self, v: str) -> int:
        return sum(self.neighbors(v).values())

    def node_count(self) -> int:
        return len(self._nodes)

    def edge_count(self) -> int:
        return len(self._edges)

    def total_edge_weight(self) -> int:
        return sum(self._edges.values())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SocialGraph):
            return NotImplemented
        return self._nodes == other._nodes and self._edges == other._edges

    def __repr__(self) -> str:
        return f"SocialGraph(nodes={len(self._nodes)}, edges={len(self._edges)})"


def build_graph(scenes: list[SceneRecord]) -> SocialGraph:
    """Aggregate scene cliques into the weighted co-occurrence graph."""
    weights: Counter[tuple[str, str]] = Counter()
    nodes: set[str] = set()
    for scene in scenes:
        nodes.update(scene.participants)
        for pair in combinations(sorted(scene.participants), 2):
            weights[pair] += 1
    return SocialGraph(nodes, weights)


def filter_min_degree(g: SocialGraph, min_degree: int) -> SocialGraph:
    """Iteratively drop nodes with degree < min_degree until a fixpoint.

    The result is the ``min_degree``-core of the graph (a single pass is not
    enough: removals can push surviving nodes under the bar).
    """
    if min_degree < 0:
        raise ValueError(f"min_degree must be >= 0, got {min_degree}")
    adj = {v: dict(g.neighbors(v)) for v in g.nodes}
    doomed = [v for v, nbrs in adj.items() if len(nbrs) < min_degree]
    while doomed:
        for v in doomed:
            for u in adj.pop(v):
                del adj[u][v]
        doomed = [v for v, nbrs in adj.items() if len(nbrs) < min_degree]
    edges = {
        (a, b): w for a, nbrs in adj.items() for b, w in nbrs.items() if a < b
    }
    return SocialGraph(adj.keys(), edges)


def _dot_quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_graph(
    g: SocialGraph,
    format: str,
    node_attrs: Mapping[str, Mapping[str, str]] | None = None,
) -> str:
    """Serialize the graph for external tools, deterministically.

    ``edge-csv`` emits a ``source,target,weight`` table with endpoints in
    lexicographic order per row and rows sorted. ``dot`` emits an undirected
    graph with a ``strength`` attribute per node, a ``weight`` attribute per
    edge, and a ``house`` node attribute when ``node_attrs`` provides one.
    """
    if node_attrs is not None:
        unknown = sorted(set(node_attrs) - g.nodes)
        if unknown:
            raise ValueError(f"node_attrs for nodes not in graph: {unknown}")
    if format == "edge-csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["source", "target", "weight"])
        for a, b, w in g.sorted_edges():
            writer.writerow([a, b, w])
        return buf.getvalue()
    if format == "dot":
        lines = ["graph social {"]
        for v in g.sorted_nodes():
            attrs = [f"strength={g.strength(v)}"]
            house = (node_attrs or {}).get(v, {}).get("house")
            if house is not None:
                attrs.append(f"house={_dot_quote(house)}")
            lines.append(f"  {_dot_quote(v)} [{', '.join(attrs)}];")
        for a, b, w in g.sorted_edges():
            lines.append(f"  {_dot_quote(a)} -- {_dot_quote(b)} [weight={w}];")
        lines.append("}")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown export format {format!r}; expected one of {EXPORT_FORMATS}")
