"""Per-node network features and the standardized feature matrix.

Seven features per character: degree, strength (weighted degree), local
clustering, betweenness, harmonic closeness, eigenvector centrality, and
core number. Betweenness, clustering, closeness, and core number are
computed on the unweighted topology; strength and eigenvector centrality
consume edge weights. Betweenness is reported as raw unordered-pair
dependency sums (downstream z-scoring makes any fixed normalization
immaterial, and raw counts test exactly against enumeration).

All iteration is in sorted node order so results are bit-stable.
"""

from __future__ import annotations

import csv
import io
import warnings
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .graph import SocialGraph

FEATURE_NAMES = (
    "degree",
    "strength",
    "clustering",
    "betweenness",
    "closeness",
    "eigencentrality",
    "core_number",
)

EIGEN_TOLERANCE = 1e-10
EIGEN_MAX_ITERATIONS = 10_000


def degree(g: SocialGraph, v: str) -> int:
    """Number of contacts of ``v``."""
    return g.degree(v)


def strength(g: SocialGraph, v: str) -> int:
    """Sum of edge weights incident to ``v``."""
    return g.strength(v)


def clustering(g: SocialGraph, v: str) -> float:
    """Fraction of neighbor pairs of ``v`` that are themselves connected.

    Weights are ignored; nodes with fewer than two neighbors score 0.
    """
    nbrs = sorted(g.neighbors(v))
    d = len(nbrs)
    if d < 2:
        return 0.0
    links = 0
    for i, u in enumerate(nbrs):
        u_nbrs = g.neighbors(u)
        for w in nbrs[i + 1:]:
            if w in u_nbrs:
                links += 1
    return links / (d * (d - 1) / 2)


def betweenness_all(g: SocialGraph) -> dict[str, float]:
    """Brandes' algorithm on hop-count distances, unordered-pair counts.

    Each reachable pair {s, t} contributes its shortest-path fraction to
    every intermediate node; disconnected pairs contribute nothing.
    """
    nodes = g.sorted_nodes()
    accum = {v: 0.0 for v in nodes}
    for s in nodes:
        stack: list[str] = []
        preds: dict[str, list[str]] = {s: []}
        sigma = {s: 1}
        dist = {s: 0}
        queue = deque([s])
        while queue:
            v = queue.popleft()
            stack.append(v)
            for w in sorted(g.neighbors(v)):
                if w not in dist:
                    dist[w] = dist[v] + 1
                    queue.append(w)
                    preds[w] = []
                    sigma[w] = 0
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
                    preds[w].append(v)
        delta = {v: 0.0 for v in stack}
        for w in reversed(stack):
            for v in preds[w]:
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w])
            if w != s:
                accum[w] += delta[w]
    # Source loop counts every pair from both endpoints.
    return {v: accum[v] / 2.0 for v in nodes}


def closeness_all(g: SocialGraph) -> dict[str, float]:
    """Harmonic closeness: sum of reciprocal hop distances to reachable nodes.

    Well-defined on disconnected graphs; isolated nodes score 0.
    """
    result = {}
    for s in g.sorted_nodes():
        dist = {s: 0}
        queue = deque([s])
        total = 0.0
        while queue:
            v = queue.popleft()
            if v != s:
                total += 1.0 / dist[v]
            for w in sorted(g.neighbors(v)):
                if w not in dist:
                    dist[w] = dist[v] + 1
                    queue.append(w)
        result[s] = total
    return result


def _components(g: SocialGraph) -> list[list[str]]:
    seen: set[str] = set()
    components = []
    for s in g.sorted_nodes():
        if s in seen:
            continue
        comp = [s]
        seen.add(s)
        queue = deque([s])
        while queue:
            v = queue.popleft()
            for w in sorted(g.neighbors(v)):
                if w not in seen:
                    seen.add(w)
                    comp.append(w)
                    queue.append(w)
        components.append(sorted(comp))
    return components


def eigencentrality_all(g: SocialGraph) -> dict[str, float]:
    """Dominant eigenvector of the weighted adjacency, per component.

    Power iteration with an identity shift (x + Ax), which has the same
    eigenvectors as A but converges on bipartite components where plain
    iteration oscillates. Values are max-normalized within each component;
    isolated nodes score 0.
    """
    result = {v: 0.0 for v in g.nodes}
    for comp in _components(g):
        if len(comp) == 1:
            continue
        x = {v: 1.0 for v in comp}
        converged = False
        for _ in range(EIGEN_MAX_ITERATIONS):
            nxt = {}
            for v in comp:
                acc = x[v]
                nbrs = g.neighbors(v)
                for u in sorted(nbrs):
                    acc += nbrs[u] * x[u]
                nxt[v] = acc
            top = max(nxt.values())
            nxt = {v: val / top for v, val in nxt.items()}
            if max(abs(nxt[v] - x[v]) for v in comp) < EIGEN_TOLERANCE:
                x = nxt
                converged = True
                break
            x = nxt
        if not converged:
            warnings.warn(
                f"eigencentrality did not converge in {EIGEN_MAX_ITERATIONS} "
                f"iterations on a {len(comp)}-node component; using last iterate"
            )
        result.update(x)
    return result


def core_number_all(g: SocialGraph) -> dict[str, int]:
    """k-core decomposition on the unweighted topology (min-degree peeling)."""
    degrees = {v: g.degree(v) for v in g.nodes}
    adj = {v: set(g.neighbors(v)) for v in g.nodes}
    core: dict[str, int] = {}
    level = 0
    while degrees:
        v = min(degrees, key=lambda u: (degrees[u], u))
        level = max(level, degrees[v])
        core[v] = level
        del degrees[v]
        for u in adj.pop(v):
            adj[u].discard(v)
            degrees[u] -= 1
    return core


@dataclass(frozen=True)
class ColumnStats:
    """Per-feature population mean/std used for z-scoring (std 0 = constant)."""

    means: tuple[float, ...]
    stds: tuple[float, ...]


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    roster: tuple[str, ...]
    values: np.ndarray  # shape (len(roster), len(feature_names)), float64
    standardized: bool = False
    column_stats: ColumnStats | None = None
    feature_names: tuple[str, ...] = FEATURE_NAMES


def feature_table(g: SocialGraph, roster: Iterable[str]) -> FeatureMatrix:
    """Compute the raw seven-feature row for every roster character."""
    roster = tuple(roster)
    if not roster:
        raise ValueError("roster is empty")
    for v in roster:
        if not g.has_node(v):
            raise ValueError(f"roster character {v!r} is not a node of the graph")
    betweenness = betweenness_all(g)
    closeness = closeness_all(g)
    eigen = eigencentrality_all(g)
    core = core_number_all(g)
    rows = [
        [
            float(g.degree(v)),
            float(g.strength(v)),
            clustering(g, v),
            betweenness[v],
            closeness[v],
            eigen[v],
            float(core[v]),
        ]
        for v in roster
    ]
    return FeatureMatrix(roster, np.array(rows, dtype=np.float64))


def standardize(matrix: FeatureMatrix) -> FeatureMatrix:
    """Z-score each column with population statistics.

    Constant columns map to all-zeros instead of dividing by zero; the
    mean/std pair is kept so the same transform can be applied to new rows.
    """
    means = matrix.values.mean(axis=0)
    stds = matrix.values.std(axis=0)
    scaled = np.zeros_like(matrix.values)
    nonconstant = stds > 0.0
    scaled[:, nonconstant] = (
        matrix.values[:, nonconstant] - means[nonconstant]
    ) / stds[nonconstant]
    stats = ColumnStats(tuple(float(m) for m in means), tuple(float(s) for s in stds))
    return FeatureMatrix(
        matrix.roster,
        scaled,
        standardized=True,
        column_stats=stats,
        feature_names=matrix.feature_names,
    )


def destandardize(matrix: FeatureMatrix) -> FeatureMatrix:
    """Invert ``standardize`` (constant columns come back as their mean)."""
    if not matrix.standardized or matrix.column_stats is None:
        raise ValueError("matrix is not standardized")
    means = np.array(matrix.column_stats.means)
    stds = np.array(matrix.column_stats.stds)
    raw = matrix.values * stds + means
    return FeatureMatrix(matrix.roster, raw, feature_names=matrix.feature_names)


def apply_column_stats(stats: ColumnStats, row: np.ndarray) -> np.ndarray:
    """Apply a stored z-score transform to a raw feature row."""
    means = np.asarray(stats.means)
    stds = np.asarray(stats.stds)
    out = np.zeros_like(row, dtype=np.float64)
    nonconstant = stds > 0.0
    out[nonconstant] = (row[nonconstant] - means[nonconstant]) / stds[nonconstant]
    return out


def assemble_features(g: SocialGraph, roster: Iterable[str]) -> FeatureMatrix:
    """Raw features for the roster, z-scored, with the transform recorded."""
    return standardize(feature_table(g, roster))


def read_roster(path: str | Path) -> list[str]:
    """One character id per line; blank lines and '#' comments are skipped."""
    roster = []
    seen = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        entry = line.split("#", 1)[0].strip().lower()
        if not entry:
            continue
        if entry in seen:
            raise ValueError(f"{path}: duplicate roster entry {entry!r}")
        seen.add(entry)
        roster.append(entry)
    if not roster:
        raise ValueError(f"{path}: roster is empty")
    return roster


_INTEGER_COLUMNS = {"degree", "strength", "core_number"}


def format_features_csv(matrix: FeatureMatrix) -> str:
    """Raw (unstandardized) feature table as CSV, one row per character."""
    if matrix.standardized:
        raise ValueError("features.csv stores raw values; got a standardized matrix")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["character"] + list(matrix.feature_names))
    for character, row in zip(matrix.roster, matrix.values):
        cells: list[object] = [character]
        for name, value in zip(matrix.feature_names, row):
            cells.append(int(value) if name in _INTEGER_COLUMNS else repr(float(value)))
        writer.writerow(cells)
    return buf.getvalue()


def read_features_csv(path: str | Path) -> FeatureMatrix:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[0] != "character":
            raise ValueError(f"{path}: expected a 'character,...' feature header")
        names = tuple(header[1:])
        roster = []
        rows = []
        for record in reader:
            if len(record) != len(names) + 1:
                raise ValueError(f"{path}: row for {record[:1]} has wrong arity")
            roster.append(record[0])
            rows.append([float(cell) for cell in record[1:]])
    if not roster:
        raise ValueError(f"{path}: no feature rows")
    return FeatureMatrix(tuple(roster), np.array(rows, dtype=np.float64), feature_names=names)
