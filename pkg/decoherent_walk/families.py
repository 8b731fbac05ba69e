"""Seeded graph families used by the benchmark and the test suite."""

from typing import Tuple
import logging

import networkx as nx
import numpy as np

from .errors import GraphGenerationError
from .graph import Graph, build_laplacian, check_gap_uniqueness, eigendecompose

logger = logging.getLogger(__name__)

FAMILIES = ["path", "random-tree", "erdos-renyi"]

# Edge probability used for Erdos-Renyi graphs unless told otherwise
DEFAULT_Q = 0.5


def path_graph(n:int) -> Graph:
    return Graph.from_networkx(nx.path_graph(n))


def random_tree(n:int, rng:np.random.Generator) -> Graph:
    """Uniform random labelled tree, drawn through a Pruefer sequence."""

    if n < 3:
        return path_graph(n)

    sequence = [int(x) for x in rng.integers(0, n, size=n - 2)]
    return Graph.from_networkx(nx.from_prufer_sequence(sequence))


def erdos_renyi(n:int, q:float, rng:np.random.Generator, max_retries:int=100) -> Graph:
    """G(n, q) conditioned on being connected."""

    assert 0 < q <= 1, f"Edge probability must be in (0, 1], not {q}"

    for _ in range(max_retries):
        G = nx.gnp_random_graph(n, q, seed=int(rng.integers(2**31)))
        if nx.is_connected(G):
            return Graph.from_networkx(G)

    raise GraphGenerationError(f"No connected G({n}, {q}) graph after {max_retries} draws")


def draw_graph(family:str, n:int, rng:np.random.Generator, q:float=DEFAULT_Q) -> Graph:
    """Draw one graph from a family."""

    assert family in FAMILIES, f"Unknown graph family '{family}' (options: {', '.join(FAMILIES)})"

    if family == "path":
        return path_graph(n)
    elif family == "random-tree":
        return random_tree(n, rng)
    else:
        return erdos_renyi(n, q, rng)


def sample_graph(
    family:str,
    n:int,
    rng:np.random.Generator,
    q:float=DEFAULT_Q,
    require_unique_gaps:bool=True,
    min_separation:float=0.0,
    max_retries:int=200
) -> Tuple[Graph, int]:
    """
    Draw a graph from `family`, resampling until its Laplacian spectrum has
    unique gaps separated by at least `min_separation`.

    Returns the graph and the number of rejected draws.
    """

    for attempt in range(max_retries):

        g = draw_graph(family, n, rng, q=q)

        if not require_unique_gaps:
            return g, attempt

        report = check_gap_uniqueness(eigendecompose(build_laplacian(g)))

        if report.unique_gaps and report.min_separation >= min_separation:
            if attempt > 0:
                logger.info(f"Resampled {family} graph with n={n} {attempt} time(s)")
            return g, attempt

        # Path graphs are deterministic, so another draw cannot help
        if family == "path":
            break

    raise GraphGenerationError(
        f"Could not generate a {family} graph with n={n} and unique eigenvalue gaps "
        f"after {attempt + 1} attempt(s)"
    )
