from __future__ import annotations

import math
import random

import numpy as np
import pytest

from deathwatch.centrality import (
    FEATURE_NAMES,
    FeatureMatrix,
    assemble_features,
    betweenness_all,
    closeness_all,
    clustering,
    core_number_all,
    degree,
    destandardize,
    eigencentrality_all,
    feature_table,
    format_features_csv,
    read_features_csv,
    read_roster,
    standardize,
    strength,
)
from deathwatch.graph import SocialGraph, build_graph
from deathwatch.transcripts import SceneRecord

from oracles import (
    brute_betweenness,
    brute_clustering,
    brute_harmonic_closeness,
    core_by_iterative_deletion,
    random_graph,
)

TRIANGLE = SocialGraph([], {("a", "b"): 1, ("a", "c"): 1, ("b", "c"): 1})
PATH = SocialGraph([], {("a", "b"): 1, ("b", "c"): 1})


def test_degree_and_strength_basics():
    assert degree(TRIANGLE, "a") == 2 and strength(TRIANGLE, "a") == 2
    heavy = SocialGraph([], {("a", "b"): 5})
    assert degree(heavy, "a") == 1 and strength(heavy, "a") == 5
    lonely = SocialGraph(["x"], {})
    assert degree(lonely, "x") == 0 and strength(lonely, "x") == 0


def test_unknown_node_raises_lookup_error():
    with pytest.raises(KeyError):
        degree(TRIANGLE, "zzz")
    with pytest.raises(KeyError):
        clustering(TRIANGLE, "zzz")


def test_clustering_extremes():
    assert clustering(TRIANGLE, "a") == 1.0
    assert clustering(PATH, "b") == 0.0
    assert clustering(PATH, "a") == 0.0  # degree 1


def test_clustering_ignores_weights():
    weighted = SocialGraph([], {("a", "b"): 9, ("a", "c"): 1, ("b", "c"): 4})
    assert clustering(weighted, "a") == 1.0


def test_clustering_matches_triangle_enumeration_oracle():
    for seed in range(100):
        g = random_graph(seed, random.Random(seed).randint(2, 10), 0.4)
        for v in g.nodes:
            assert clustering(g, v) == brute_clustering(g, v)


def test_betweenness_path_and_star():
    assert betweenness_all(PATH) == {"a": 0.0, "b": 1.0, "c": 0.0}
    star = SocialGraph([], {("c", f"l{i}"): 1 for i in range(4)})
    result = betweenness_all(star)
    assert result["c"] == 6.0  # all C(4,2) leaf pairs
    assert all(result[f"l{i}"] == 0.0 for i in range(4))


def test_betweenness_matches_path_enumeration_oracle():
    for seed in range(100):
        g = random_graph(seed, random.Random(seed ^ 0xBEEF).randint(2, 10), 0.4)
        expected = brute_betweenness(g)
        actual = betweenness_all(g)
        for v in g.nodes:
            assert actual[v] == pytest.approx(expected[v], abs=1e-9)


def test_tree_betweenness_counts_pairs_through_each_node():
    # On a tree every pair has a unique path, so the oracle reduces to
    # counting pairs whose path crosses the node.
    rng = random.Random(31)
    names = [f"t{i}" for i in range(9)]
    edges = {}
    for i in range(1, len(names)):
        parent = names[rng.randrange(i)]
        edges[tuple(sorted((parent, names[i])))] = 1
    tree = SocialGraph(names, edges)
    expected = brute_betweenness(tree)
    for v, value in betweenness_all(tree).items():
        assert value == pytest.approx(expected[v], abs=1e-9)
        assert value == pytest.approx(round(value), abs=1e-9)  # whole pair counts


def test_harmonic_closeness_examples():
    edge = SocialGraph([], {("a", "b"): 1})
    assert closeness_all(edge) == {"a": 1.0, "b": 1.0}
    assert closeness_all(PATH) == {"a": 1.5, "b": 2.0, "c": 1.5}
    two_edges = SocialGraph([], {("a", "b"): 1, ("c", "d"): 1})
    assert set(closeness_all(two_edges).values()) == {1.0}
    assert closeness_all(SocialGraph(["iso"], {}))["iso"] == 0.0


def test_closeness_matches_bfs_distance_oracle():
    for seed in range(100):
        g = random_graph(seed + 500, random.Random(seed).randint(2, 10), 0.4)
        expected = brute_harmonic_closeness(g)
        actual = closeness_all(g)
        for v in g.nodes:
            assert actual[v] == pytest.approx(expected[v], abs=1e-12)


def test_eigencentrality_symmetric_cases():
    result = eigencentrality_all(TRIANGLE)
    assert all(abs(value - 1.0) < 1e-9 for value in result.values())
    edge = SocialGraph([], {("a", "b"): 1})
    assert eigencentrality_all(edge) == {"a": 1.0, "b": 1.0}


def test_eigencentrality_weighted_star_analytic():
    # Dominant eigenvector of the unit-weight 3-leaf star: center sqrt(3),
    # leaves 1 (check: A v = sqrt(3) v), so max-normalized leaves are
    # 1/sqrt(3) = 0.5773502691896258.
    star = SocialGraph([], {("c", "l1"): 1, ("c", "l2"): 1, ("c", "l3"): 1})
    result = eigencentrality_all(star)
    assert result["c"] == pytest.approx(1.0, abs=1e-9)
    for leaf in ("l1", "l2", "l3"):
        assert result[leaf] == pytest.approx(0.5773502691896258, abs=1e-8)
    # Direct multiplication: (A v)_center = 3 * leaf, (A v)_leaf = center.
    lam = math.sqrt(3.0)
    assert 3 * result["l1"] == pytest.approx(lam * result["c"], abs=1e-7)
    assert result["c"] == pytest.approx(lam * result["l1"], abs=1e-7)


def test_eigencentrality_is_componentwise_and_zero_for_isolates():
    g = SocialGraph(["iso"], {("a", "b"): 2, ("x", "y"): 1, ("y", "z"): 1})
    result = eigencentrality_all(g)
    assert result["iso"] == 0.0
    assert result["a"] == result["b"] == 1.0  # own component's max
    assert result["y"] == 1.0 and result["x"] == pytest.approx(result["z"], abs=1e-9)


def test_eigencentrality_satisfies_eigen_equation_on_random_graphs():
    for seed in range(20):
        g = random_graph(seed + 900, 8, 0.5, max_weight=3)
        result = eigencentrality_all(g)
        nodes = g.sorted_nodes()
        a = np.zeros((len(nodes), len(nodes)))
        index = {v: i for i, v in enumerate(nodes)}
        for (u, v), w in g.edges.items():
            a[index[u], index[v]] = w
            a[index[v], index[u]] = w
        vec = np.array([result[v] for v in nodes])
        if vec.max() == 0.0:
            continue
        image = a @ vec
        lam = image[vec.argmax()] / vec[vec.argmax()]
        # Same direction per component; compare where the vector is nonzero.
        live = vec > 0
        assert np.allclose(image[live], lam * vec[live], atol=1e-6)


def test_core_numbers_examples():
    assert core_number_all(TRIANGLE) == {"a": 2, "b": 2, "c": 2}
    star = SocialGraph([], {("c", f"l{i}"): 1 for i in range(4)})
    expected = {"c": 1, "l0": 1, "l1": 1, "l2": 1, "l3": 1}
    assert core_number_all(star) == expected


def test_core_numbers_match_iterative_deletion_oracle():
    for seed in range(100):
        g = random_graph(seed + 300, random.Random(seed).randint(2, 10), 0.4)
        assert core_number_all(g) == core_by_iterative_deletion(g)


def relabeled(g: SocialGraph, mapping: dict[str, str]) -> SocialGraph:
    return SocialGraph(
        [mapping[v] for v in g.nodes],
        {(mapping[a], mapping[b]): w for (a, b), w in g.edges.items()},
    )


def test_features_depend_on_structure_only():
    g = random_graph(42, 9, 0.45, max_weight=3)
    mapping = {v: f"renamed_{v[::-1]}" for v in g.nodes}
    h = relabeled(g, mapping)
    bc_g, bc_h = betweenness_all(g), betweenness_all(h)
    cl_g, cl_h = closeness_all(g), closeness_all(h)
    ec_g, ec_h = eigencentrality_all(g), eigencentrality_all(h)
    core_g, core_h = core_number_all(g), core_number_all(h)
    for v in g.nodes:
        assert bc_h[mapping[v]] == pytest.approx(bc_g[v], abs=1e-9)
        assert cl_h[mapping[v]] == pytest.approx(cl_g[v], abs=1e-9)
        assert ec_h[mapping[v]] == pytest.approx(ec_g[v], abs=1e-8)
        assert core_h[mapping[v]] == core_g[v]
        assert clustering(h, mapping[v]) == clustering(g, v)


def test_weight_scaling_only_moves_strength():
    g = random_graph(77, 8, 0.5, max_weight=3)
    scaled = SocialGraph(g.nodes, {e: w * 3 for e, w in g.edges.items()})
    assert betweenness_all(scaled) == betweenness_all(g)
    assert closeness_all(scaled) == closeness_all(g)
    assert core_number_all(scaled) == core_number_all(g)
    ec_g, ec_s = eigencentrality_all(g), eigencentrality_all(scaled)
    for v in g.nodes:
        assert degree(scaled, v) == degree(g, v)
        assert clustering(scaled, v) == clustering(g, v)
        assert strength(scaled, v) == 3 * strength(g, v)
        assert ec_s[v] == pytest.approx(ec_g[v], abs=1e-8)


def test_singleton_roster_standardizes_to_zeros():
    g = SocialGraph([], {("a", "b"): 1})
    matrix = assemble_features(g, ["a"])
    assert matrix.standardized
    assert np.all(matrix.values == 0.0)


def test_two_point_degree_column_is_plus_minus_one():
    g = SocialGraph([], {("a", "b"): 1, ("b", "c"): 1})
    matrix = assemble_features(g, ["a", "b"])  # degrees 1 and 2
    col = list(matrix.feature_names).index("degree")
    assert matrix.values[0, col] == pytest.approx(-1.0)
    assert matrix.values[1, col] == pytest.approx(1.0)


def test_feature_matrix_shape_for_94_characters():
    rng = random.Random(94)
    names = [f"ch{i:03d}" for i in range(94)]
    edges = {}
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            if rng.random() < 0.05:
                edges[(a, b)] = rng.randint(1, 5)
    g = SocialGraph(names, edges)
    matrix = assemble_features(g, names)
    assert matrix.values.shape == (94, 7)
    assert matrix.feature_names == FEATURE_NAMES


def test_standardized_columns_have_zero_mean_unit_std():
    g = random_graph(5, 20, 0.3, max_weight=4)
    matrix = assemble_features(g, g.sorted_nodes())
    means = matrix.values.mean(axis=0)
    stds = matrix.values.std(axis=0)
    for name, mean, std in zip(matrix.feature_names, means, stds):
        assert abs(mean) < 1e-9, name
        assert std == pytest.approx(1.0, abs=1e-9) or std == 0.0, name


def test_standardization_inverts_from_column_stats():
    g = random_graph(6, 15, 0.3)
    raw = feature_table(g, g.sorted_nodes())
    back = destandardize(standardize(raw))
    assert np.allclose(back.values, raw.values, atol=1e-12)


def test_missing_roster_node_is_named_in_error():
    g = SocialGraph([], {("a", "b"): 1})
    with pytest.raises(ValueError, match="'ghost'"):
        feature_table(g, ["a", "ghost"])
    with pytest.raises(ValueError, match="empty"):
        feature_table(g, [])


def test_features_csv_round_trip(toy_records):
    g = build_graph(toy_records)
    roster = sorted(g.nodes)
    matrix = feature_table(g, roster)
    text = format_features_csv(matrix)
    assert text.splitlines()[0] == "character," + ",".join(FEATURE_NAMES)
    reread = read_features_csv_from_text(text)
    assert reread.roster == matrix.roster
    assert np.array_equal(reread.values, matrix.values)


def read_features_csv_from_text(text: str) -> FeatureMatrix:
    import tempfile
    from pathlib import Path

    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "features.csv"
        path.write_text(text, encoding="utf-8")
        return read_features_csv(path)


def test_roster_file_parsing(tmp_path):
    path = tmp_path / "roster.txt"
    path.write_text("# cast\narya\n\nJON  # promoted\n", encoding="utf-8")
    assert read_roster(path) == ["arya", "jon"]
    path.write_text("arya\narya\n", encoding="utf-8")
    with pytest.raises(ValueError, match="duplicate"):
        read_roster(path)
