import numpy as np
import pytest

from decoherent_walk.filelib import FileLib
from decoherent_walk.families import sample_graph
from decoherent_walk.graph import Graph, build_laplacian, eigendecompose

# Random graphs used by the oracle suites need well separated eigenvalue gaps
MIN_SEPARATION = 0.05


def named_graph(name:str) -> Graph:
    """One of the bundled example graphs."""
    return Graph.from_edge_list(FileLib().read_graph_text(name))


def spectrum_of(g:Graph):
    return eigendecompose(build_laplacian(g))


def random_unique_gap_graphs(count:int, seed:int, sizes=(5, 6, 7)) -> list:
    """Seeded connected Erdos-Renyi graphs whose eigenvalue gaps are unique and separated."""

    rng = np.random.default_rng(seed)
    return [
        sample_graph(
            "erdos-renyi",
            sizes[ix % len(sizes)],
            rng,
            min_separation=MIN_SEPARATION,
            max_retries=5000
        )[0]
        for ix in range(count)
    ]


@pytest.fixture(scope="session")
def k2():
    return named_graph("k2")


@pytest.fixture(scope="session")
def p3():
    return named_graph("p3")


@pytest.fixture(scope="session")
def c4():
    return named_graph("c4")


@pytest.fixture(scope="session")
def star4():
    return named_graph("star4")


@pytest.fixture(scope="session")
def oracle_graphs(p3):
    """P3 and five seeded random graphs with unique gaps."""
    return [p3] + random_unique_gap_graphs(5, seed=2024)


@pytest.fixture(scope="session")
def invariant_graphs():
    """Twenty seeded random graphs with unique gaps, n <= 8."""
    return random_unique_gap_graphs(20, seed=7, sizes=(5, 6, 7, 8))
