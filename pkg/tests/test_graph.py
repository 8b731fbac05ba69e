import networkx as nx
import numpy as np
import pytest

from decoherent_walk.errors import GapCollisionError, GraphFormatError, GraphGenerationError
from decoherent_walk.families import draw_graph, random_tree, sample_graph
from decoherent_walk.graph import (
    Graph,
    build_laplacian,
    check_gap_uniqueness,
    degeneracy_tolerance,
    eigendecompose,
    fix_phases
)

from conftest import spectrum_of


def test_edge_list_roundtrip_and_comments():

    text = "# a triangle\n3\n0 1  # first edge\n\n1 2\n2 0\n"
    g = Graph.from_edge_list(text)

    assert g.n == 3
    assert g.sorted_edges() == [(0, 1), (0, 2), (1, 2)]
    assert g.has_edge(0, 2) and g.has_edge(2, 0)
    assert g.degree(0) == 2
    assert Graph.from_edge_list(g.to_edge_list()) == g


@pytest.mark.parametrize("text, fragment", [
    ("", "vertex count"),
    ("3\n0 0\n", "Self-loop"),
    ("3\n0 3\n", "out of range"),
    ("3\n0 1\n1 0\n", "Duplicate"),
    ("3\n0 x\n", "Line 2"),
    ("3\n0 1 2\n", "Line 2"),
    ("3 4\n", "Line 1"),
])
def test_edge_list_errors(text, fragment):

    with pytest.raises(GraphFormatError, match=fragment):
        Graph.from_edge_list(text)


def test_networkx_conversion():

    G = nx.relabel_nodes(nx.cycle_graph(4), {0: "a", 1: "b", 2: "c", 3: "d"})
    g = Graph.from_networkx(G)

    assert g.n == 4
    assert len(g.edges) == 4
    assert nx.is_isomorphic(g.to_networkx(), nx.cycle_graph(4))
    assert g.connected_components() == 1


def test_laplacian_p3(p3):

    L = build_laplacian(p3)

    assert np.array_equal(L.entries, np.array([[1, -1, 0], [-1, 2, -1], [0, -1, 1]]))
    assert np.allclose(L.entries.sum(axis=1), 0)

    # Stored read-only
    with pytest.raises(ValueError):
        L.entries[0, 0] = 5


def test_laplacian_edgeless():

    g = Graph(n=3)
    L = build_laplacian(g)

    assert np.array_equal(L.entries, np.zeros((3, 3)))

    spec = eigendecompose(L)
    assert np.allclose(spec.lambdas, 0)
    assert spec.zero_count() == 3
    assert g.connected_components() == 3


def test_spectrum_k2(k2):

    spec = spectrum_of(k2)

    assert np.allclose(spec.lambdas, [0, 2], atol=1e-12)
    assert np.allclose(spec.phis[:, 0], np.array([1, 1]) / np.sqrt(2), atol=1e-12)
    assert np.allclose(spec.phis[:, 1], np.array([1, -1]) / np.sqrt(2), atol=1e-12)


def test_spectrum_p3(p3):

    spec = spectrum_of(p3)

    assert np.allclose(spec.lambdas, [0, 1, 3], atol=1e-12)
    assert np.allclose(spec.phis.T @ spec.phis, np.eye(3), atol=1e-12)
    assert spec.zero_count() == 1


def test_spectrum_c4(c4):

    spec = spectrum_of(c4)

    assert np.allclose(spec.lambdas, [0, 2, 2, 4], atol=1e-12)


def test_zero_eigenvalues_count_components():

    g = Graph(n=5, edges=[(0, 1), (2, 3)])
    assert spectrum_of(g).zero_count() == 3


def test_fix_phases():

    vectors = np.array([[0.6, 0.5j], [-0.8, -0.5j]])
    fixed = fix_phases(vectors)

    # Largest entry real positive
    assert np.allclose(fixed[:, 0], [-0.6, 0.8])

    # Ties go to the lowest index
    assert np.isclose(fixed[0, 1], 0.5)
    assert np.isclose(fixed[1, 1], -0.5)


def test_degeneracy_tolerance_scales_with_spread():

    assert degeneracy_tolerance([0.0]) == pytest.approx(1e-9)
    assert degeneracy_tolerance([0.0, 4.0]) == pytest.approx(5e-9)


def test_gap_uniqueness_p3(p3):

    report = check_gap_uniqueness(spectrum_of(p3))

    assert report.unique_gaps
    assert report.colliding_pairs == []
    assert report.min_separation == pytest.approx(1.0)
    report.raise_if_colliding()


def test_gap_uniqueness_c4(c4):

    report = check_gap_uniqueness(spectrum_of(c4))

    assert not report.unique_gaps
    assert (1, 2) in report.repeated_eigenvalues

    # lambda_1 - lambda_0 = lambda_2 - lambda_0
    assert ((1, 0), (2, 0)) in report.colliding_pairs
    assert "(1,0,2,0)" in report.describe()

    with pytest.raises(GapCollisionError) as err:
        report.raise_if_colliding()

    assert err.value.report is report
    assert err.value.exit_code == 4


def test_gap_uniqueness_star(star4):

    report = check_gap_uniqueness(spectrum_of(star4))

    assert not report.unique_gaps
    assert len(report.repeated_eigenvalues) > 0


def test_gap_uniqueness_path4():

    # 2 - (2 - sqrt 2) = (2 + sqrt 2) - 2
    report = check_gap_uniqueness(spectrum_of(draw_graph("path", 4, np.random.default_rng(0))))

    assert not report.unique_gaps
    assert len(report.repeated_eigenvalues) == 0


def test_gap_report_to_dict(c4):

    dat = check_gap_uniqueness(spectrum_of(c4)).to_dict()

    assert dat["unique_gaps"] is False
    assert [[1, 0], [2, 0]] in dat["colliding_pairs"]


def test_random_tree_is_tree():

    g = random_tree(9, np.random.default_rng(3))

    assert g.n == 9
    assert len(g.edges) == 8
    assert g.connected_components() == 1


def test_sample_graph_is_seeded():

    g1, r1 = sample_graph("erdos-renyi", 6, np.random.default_rng(11), max_retries=5000)
    g2, r2 = sample_graph("erdos-renyi", 6, np.random.default_rng(11), max_retries=5000)

    assert g1 == g2
    assert r1 == r2
    assert g1.connected_components() == 1
    assert check_gap_uniqueness(spectrum_of(g1)).unique_gaps


def test_sample_graph_gives_up_on_paths():

    with pytest.raises(GraphGenerationError, match="path"):
        sample_graph("path", 5, np.random.default_rng(0))
