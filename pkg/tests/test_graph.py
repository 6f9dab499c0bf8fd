from __future__ import annotations

import random
import re

import pytest

from deathwatch.graph import SocialGraph, build_graph, export_graph, filter_min_degree
from deathwatch.transcripts import SceneRecord

from oracles import random_graph


def scene(episode: str, index: int, *participants: str) -> SceneRecord:
    return SceneRecord(episode, index, frozenset(participants))


def test_single_scene_is_a_clique():
    g = build_graph([scene("e", 0, "a", "b", "c")])
    assert g.edges == {("a", "b"): 1, ("a", "c"): 1, ("b", "c"): 1}


def test_repeated_scene_doubles_tie_strength():
    g = build_graph([scene("e", 0, "a", "b"), scene("e", 1, "a", "b")])
    assert g.edges == {("a", "b"): 2}


def test_solo_scenes_contribute_nodes_but_no_edges():
    g = build_graph([scene("e", 0, "ghost")])
    assert g.nodes == {"ghost"}
    assert g.edge_count() == 0


def test_total_weight_matches_pair_arithmetic():
    # Oracle: sum of C(k, 2) computed from the scene list alone.
    rng = random.Random(600)
    cast = [f"c{i}" for i in range(40)]
    scenes = [
        scene("e", i, *rng.sample(cast, rng.randint(1, 8))) for i in range(600)
    ]
    expected = sum(
        len(s.participants) * (len(s.participants) - 1) // 2 for s in scenes
    )
    assert build_graph(scenes).total_edge_weight() == expected


def test_build_graph_is_order_invariant():
    rng = random.Random(7)
    cast = [f"c{i}" for i in range(12)]
    scenes = [scene("e", i, *rng.sample(cast, rng.randint(2, 5))) for i in range(80)]
    shuffled = scenes[:]
    rng.shuffle(shuffled)
    g1, g2 = build_graph(scenes), build_graph(shuffled)
    assert g1 == g2
    assert export_graph(g1, "edge-csv") == export_graph(g2, "edge-csv")


def test_toy_corpus_graph_hand_counts(toy_records):
    # Hand-derived from data/toy/scenes.txt after alias resolution.
    g = build_graph(toy_records)
    assert g.node_count() == 13
    assert g.edge_count() == 17
    assert g.total_edge_weight() == 22
    assert g.edges[("cersei", "ned")] == 2
    assert g.edges[("dany", "jorah")] == 2
    assert g.edges[("arya", "hound")] == 2
    assert g.edges[("jon", "ygritte")] == 2
    assert g.degree("ned") == 5 and g.strength("ned") == 6


def test_min_degree_zero_is_identity():
    g = build_graph([scene("e", 0, "a", "b", "c"), scene("e", 1, "d")])
    assert filter_min_degree(g, 0) == g


def test_path_collapses_entirely_at_min_degree_two():
    g = SocialGraph([], {("a", "b"): 1, ("b", "c"): 1})
    filtered = filter_min_degree(g, 2)
    assert filtered.node_count() == 0 and filtered.edge_count() == 0


def test_filtered_nodes_all_meet_the_bar():
    for seed in range(5):
        g = random_graph(seed, 50, 0.08)
        filtered = filter_min_degree(g, 3)
        # Post-hoc scan on the result, not the input.
        assert all(filtered.degree(v) >= 3 for v in filtered.nodes)


def test_filter_is_a_subgraph_and_a_fixpoint():
    for seed in range(5):
        g = random_graph(seed + 100, 30, 0.1)
        filtered = filter_min_degree(g, 2)
        assert filtered.nodes <= g.nodes
        for edge, weight in filtered.edges.items():
            assert g.edges[edge] == weight
        assert filter_min_degree(filtered, 2) == filtered


def test_strength_at_least_degree_with_equality_iff_unit_weights():
    for seed in range(5):
        g = random_graph(seed + 200, 20, 0.2, max_weight=4)
        for v in g.nodes:
            assert g.strength(v) >= g.degree(v)
            unit = all(w == 1 for w in g.neighbors(v).values())
            assert (g.strength(v) == g.degree(v)) == unit


def test_edge_csv_single_edge_bit_exact():
    g = SocialGraph([], {("b", "a"): 2})
    assert export_graph(g, "edge-csv") == "source,target,weight\na,b,2\n"


def test_edge_csv_empty_graph_is_header_only():
    assert export_graph(SocialGraph([], {}), "edge-csv") == "source,target,weight\n"


DOT_NODE_RE = re.compile(r'^\s*"(?P<id>[^"]+)" \[(?P<attrs>[^\]]*)\];$')
DOT_EDGE_RE = re.compile(r'^\s*"(?P<a>[^"]+)" -- "(?P<b>[^"]+)" \[weight=(?P<w>\d+)\];$')


def parse_dot(text: str):
    """Minimal independent reader for the exported dot dialect."""
    lines = text.strip().splitlines()
    assert lines[0] == "graph social {" and lines[-1] == "}"
    nodes, edges = {}, {}
    for line in lines[1:-1]:
        edge = DOT_EDGE_RE.match(line)
        if edge:
            edges[(edge["a"], edge["b"])] = int(edge["w"])
            continue
        node = DOT_NODE_RE.match(line)
        assert node, f"unparseable dot line: {line!r}"
        attrs = dict(part.split("=", 1) for part in node["attrs"].split(", "))
        nodes[node["id"]] = attrs
    return nodes, edges


def test_dot_triangle_structure_via_independent_reader():
    g = SocialGraph([], {("a", "b"): 1, ("a", "c"): 1, ("b", "c"): 1})
    nodes, edges = parse_dot(export_graph(g, "dot"))
    assert set(nodes) == {"a", "b", "c"}
    assert all(attrs["strength"] == "2" for attrs in nodes.values())
    assert edges == {("a", "b"): 1, ("a", "c"): 1, ("b", "c"): 1}


def test_dot_house_attribute_round_trips():
    g = SocialGraph([], {("arya", "jon"): 3})
    text = export_graph(g, "dot", {"arya": {"house": "stark"}})
    nodes, edges = parse_dot(text)
    assert nodes["arya"]["house"] == '"stark"'
    assert "house" not in nodes["jon"]
    assert edges == {("arya", "jon"): 3}


def test_export_rejects_unknown_format():
    with pytest.raises(ValueError, match="unknown export format"):
        export_graph(SocialGraph([], {}), "graphml")


def test_export_rejects_attrs_for_missing_nodes():
    g = SocialGraph([], {("a", "b"): 1})
    with pytest.raises(ValueError, match="zzz"):
        export_graph(g, "dot", {"zzz": {"house": "none"}})


def test_graph_rejects_self_loops_and_bad_weights():
    with pytest.raises(ValueError, match="self-loop"):
        SocialGraph([], {("a", "a"): 1})
    with pytest.raises(ValueError, match="weight"):
        SocialGraph([], {("a", "b"): 0})


def test_unknown_node_lookup_raises():
    g = SocialGraph([], {("a", "b"): 1})
    with pytest.raises(KeyError):
        g.degree("nobody")
