import math

import numpy as np
import pytest

from cone.analysis import (
    DegenerateContentError,
    UndefinedMetricError,
    analyze,
    average_similarity,
    density,
    distribution,
    half_sigmoid,
    homogeneity,
)
from cone.communities import Community, CommunitySet
from cone.encoding import NodeAttributes
from cone.graph import build_graph


def sigma(t):
    return (1 - math.exp(-t)) / (1 + math.exp(-t))


def test_half_sigmoid_matches_definition():
    for t in (0.0, 0.5, 1.0, 3.0, -2.0):
        assert half_sigmoid(t) == pytest.approx(sigma(t), abs=1e-15)
    assert half_sigmoid(1.0) == pytest.approx(0.4621, abs=1e-4)


def test_density_clique():
    g = build_graph([(i, j) for i in range(4) for j in range(i + 1, 4)])
    assert density(range(4), g) == 1.0


def test_density_no_edges():
    g = build_graph([(0, 1)], nodes=range(6))
    assert density({2, 3, 4, 5}, g) == 0.0


def test_density_star(star4):
    assert density(set(range(5)), star4) == pytest.approx(0.4)


def test_density_directed_counts_pair_once():
    g = build_graph([(0, 1), (1, 0), (1, 2)], directed=True)
    assert density({0, 1, 2}, g) == pytest.approx(2 * 2 / 6)


def test_density_singleton_undefined(triangle):
    with pytest.raises(UndefinedMetricError):
        density({0}, triangle)


def _attrs_with_uniform_similarity():
    # Rows share one attribute each with every other row: all pair similarities equal.
    return NodeAttributes(np.ones((4, 1)))


def test_homogeneity_average_pairs_is_sigma_one():
    attrs = _attrs_with_uniform_similarity()
    g = build_graph([(0, 1), (2, 3)])
    assert homogeneity({0, 1, 2}, g, attrs) == pytest.approx(sigma(1.0), abs=1e-12)


def test_homogeneity_zero_similarity():
    attrs = NodeAttributes(np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 0, 0]], dtype=float))
    g = build_graph([(0, 1), (2, 3)])
    assert homogeneity({0, 1}, g, attrs) == 0.0


def test_homogeneity_three_times_average():
    g = build_graph([(0, 1), (2, 3)])
    avg = 1.0
    a = np.zeros((4, 3))
    a[0] = [1, 1, 1]
    a[1] = [1, 1, 1]
    attrs = NodeAttributes(a)
    assert homogeneity({0, 1}, g, attrs, avg=avg) == pytest.approx(sigma(3.0), abs=1e-12)
    assert sigma(3.0) == pytest.approx(0.9051, abs=1e-4)


def test_average_similarity_matches_pair_loop(rng):
    a = (rng.random((12, 7)) < 0.4).astype(float)
    expect = np.mean([a[i] @ a[j] for i in range(12) for j in range(12) if i != j])
    got = average_similarity(NodeAttributes(a))
    assert got.value == pytest.approx(expect, abs=1e-12)
    assert got.pairs == 12 * 11


def test_homogeneity_degenerate_content():
    g = build_graph([(0, 1)])
    with pytest.raises(DegenerateContentError):
        homogeneity({0, 1}, g, NodeAttributes(np.zeros((2, 3))))


def test_homogeneity_singleton(triangle):
    with pytest.raises(UndefinedMetricError):
        homogeneity({1}, triangle, NodeAttributes(np.ones((3, 1))))


def test_distribution_basic():
    assert distribution([0.1, 0.9], 2).counts.tolist() == [1, 1]


def test_distribution_empty():
    assert distribution([], 4).counts.tolist() == [0, 0, 0, 0]


def test_distribution_boundary_goes_up():
    assert distribution([0.5], 2).counts.tolist() == [0, 1]
    assert distribution([0.6], 10).counts.tolist()[6] == 1
    assert distribution([1.0], 4).counts.tolist() == [0, 0, 0, 1]


def test_distribution_rejects_out_of_range():
    with pytest.raises(ValueError):
        distribution([1.2], 3)


def test_analyze_excludes_singletons(tmp_path, star4):
    cs = CommunitySet([Community("s", frozenset(range(5))), Community("one", frozenset({0}))])
    attrs = NodeAttributes(np.ones((5, 2)))
    reports = analyze(cs, star4, attrs, bins=5)
    assert reports["density"].excluded == ["one"]
    assert reports["density"].counts.sum() == 1
    assert reports["homogeneity"].counts.sum() == 1
    reports["density"].write_values(tmp_path / "d.csv", "density")
    reports["density"].write_histogram(tmp_path / "h.csv")
    assert (tmp_path / "d.csv").read_text().splitlines() == ["community_id,density", "s,0.4"]
    assert (tmp_path / "h.csv").read_text().splitlines()[0] == "bin_lo,bin_hi,count"


def test_analyze_identical_attribute_clique_above_sigma_one():
    # A clique whose members share every attribute, inside a graph with other content.
    g = build_graph([(i, j) for i in range(4) for j in range(i + 1, 4)] + [(4, 5), (5, 6)])
    a = np.zeros((7, 6))
    a[:4, :3] = 1
    a[4, 3] = a[5, 4] = a[6, 5] = 1
    reports = analyze(CommunitySet([Community("q", frozenset(range(4)))]), g, NodeAttributes(a))
    (_, value), = reports["homogeneity"].values
    assert value > sigma(1.0)
