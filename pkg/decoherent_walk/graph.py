"""
Graph ingestion, the combinatorial Laplacian, its eigendecomposition, and the
gap-uniqueness check which the perturbative walk relies on.
"""

from dataclasses import dataclass, field
from itertools import combinations
from typing import FrozenSet, Iterable, List, Tuple
import logging

import networkx as nx
import numpy as np
from scipy import linalg

from .errors import GapCollisionError, GraphFormatError, NumericalError

logger = logging.getLogger(__name__)

Edge = Tuple[int, int]
GapPair = Tuple[int, int]

# Relative Frobenius bound on ||Phi Lambda Phi^T - L||
RECONSTRUCTION_TOL = 1e-10


def degeneracy_tolerance(values) -> float:
    """Scale-aware tolerance used to decide that two eigenvalues coincide."""

    values = np.asarray(values)

    # An empty spectrum has no scale
    if values.size == 0:
        return 1e-9

    spread = np.ptp(values.real) + np.ptp(values.imag)
    return 1e-9 * (spread + 1.0)


def fix_phases(vectors:np.ndarray, atol:float=1e-12) -> np.ndarray:
    """
    Apply the deterministic phase convention to every column.

    Each column is rotated so that its entry of largest magnitude is real and
    positive; when several entries share the largest magnitude (within `atol`)
    the lowest index wins. For real input this is a sign flip.
    """

    vectors = np.array(vectors, copy=True)

    for col in range(vectors.shape[1]):
        magnitudes = np.abs(vectors[:, col])
        top = magnitudes.max()

        # All-zero columns carry no phase
        if top == 0:
            continue

        # First index whose magnitude ties with the maximum
        pivot = int(np.flatnonzero(magnitudes >= top - atol)[0])
        entry = vectors[pivot, col]
        vectors[:, col] = vectors[:, col] * (np.conj(entry) / np.abs(entry))

    return vectors


def _read_only(array:np.ndarray) -> np.ndarray:
    """Return a copy of `array` which cannot be modified in place."""
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Graph:
    """Undirected, unweighted graph on the vertices 0..n-1."""

    n: int
    edges: FrozenSet[Edge] = field(default_factory=frozenset)

    def __post_init__(self):

        if isinstance(self.n, bool) or not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise GraphFormatError(f"Vertex count must be a positive integer, not {self.n!r}")

        # Store every edge as (min, max) so that (u, v) and (v, u) coincide
        raw_edges = list(self.edges)
        normalized = set()

        for edge in raw_edges:

            if len(edge) != 2:
                raise GraphFormatError(f"Edge must be a pair of vertices: {edge!r}")

            u, v = int(edge[0]), int(edge[1])

            if u == v:
                raise GraphFormatError(f"Self-loop on vertex {u} is not allowed")

            if not (0 <= u < self.n and 0 <= v < self.n):
                raise GraphFormatError(f"Edge ({u}, {v}) is out of range for n={self.n}")

            key = (min(u, v), max(u, v))

            if key in normalized:
                raise GraphFormatError(f"Duplicate edge ({u}, {v})")

            normalized.add(key)

        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "edges", frozenset(normalized))

    def has_edge(self, u:int, v:int) -> bool:
        return (min(u, v), max(u, v)) in self.edges

    def degree(self, v:int) -> int:
        return sum(1 for edge in self.edges if v in edge)

    def sorted_edges(self) -> List[Edge]:
        return sorted(self.edges)

    @classmethod
    def from_edge_list(cls, text:str) -> "Graph":
        """
        Parse the edge-list text format: the first non-comment line holds `n`,
        each following line holds one whitespace-separated `u v` pair (0-based).
        Everything after a `#` is a comment.
        """

        n = None
        edges = []

        for lineno, line in enumerate(text.splitlines(), start=1):

            # Strip comments and surrounding whitespace
            content = line.split("#", 1)[0].strip()

            # Skip blank lines
            if len(content) == 0:
                continue

            fields = content.split()

            # The first data line is the vertex count
            if n is None:
                if len(fields) != 1:
                    raise GraphFormatError(f"Line {lineno}: expected the vertex count, found '{content}'")
                n = _parse_int(fields[0], lineno)
                continue

            if len(fields) != 2:
                raise GraphFormatError(f"Line {lineno}: expected 'u v', found '{content}'")

            edges.append((_parse_int(fields[0], lineno), _parse_int(fields[1], lineno)))

        if n is None:
            raise GraphFormatError("Edge list is empty: the vertex count is missing")

        return cls(n=n, edges=edges)

    def to_edge_list(self) -> str:
        """Serialize in the same format read by from_edge_list()."""

        lines = [str(self.n)]
        lines.extend(f"{u} {v}" for u, v in self.sorted_edges())
        return "\n".join(lines) + "\n"

    @classmethod
    def from_networkx(cls, G:nx.Graph) -> "Graph":
        """Relabel the nodes of a networkx graph to 0..n-1 in sorted order."""

        mapping = {node: ix for ix, node in enumerate(sorted(G.nodes()))}
        return cls(
            n=G.number_of_nodes(),
            edges=[(mapping[u], mapping[v]) for u, v in G.edges()]
        )

    def to_networkx(self) -> nx.Graph:
        G = nx.Graph()
        G.add_nodes_from(range(self.n))
        G.add_edges_from(self.sorted_edges())
        return G

    def connected_components(self) -> int:
        """Number of connected components."""
        return nx.number_connected_components(self.to_networkx())


def _parse_int(token:str, lineno:int) -> int:
    try:
        return int(token)
    except ValueError:
        raise GraphFormatError(f"Line {lineno}: '{token}' is not an integer")


@dataclass(frozen=True)
class LaplacianMatrix:
    """Combinatorial Laplacian L = D - A, stored read-only."""

    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "entries", _read_only(np.asarray(self.entries, dtype=float)))

    @property
    def n(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class LaplacianSpectrum:
    """Ascending eigenvalues of L with orthonormal eigenvectors as columns."""

    lambdas: np.ndarray
    phis: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lambdas", _read_only(self.lambdas))
        object.__setattr__(self, "phis", _read_only(self.phis))

    @property
    def n(self) -> int:
        return self.lambdas.shape[0]

    @property
    def default_tol(self) -> float:
        return degeneracy_tolerance(self.lambdas)

    def zero_count(self, tol:float=None) -> int:
        """Number of eigenvalues equal to zero within `tol`."""

        if tol is None:
            tol = self.default_tol

        return int(np.sum(np.abs(self.lambdas) <= tol))


def build_laplacian(g:Graph) -> LaplacianMatrix:
    """Return L = D - A for an unweighted undirected graph."""

    assert isinstance(g, Graph), f"Expected a Graph, not {type(g)}"

    # Adjacency matrix
    adjacency = np.zeros((g.n, g.n))
    for u, v in g.edges:
        adjacency[u, v] = 1.0
        adjacency[v, u] = 1.0

    # Degree matrix minus adjacency
    return LaplacianMatrix(np.diag(adjacency.sum(axis=1)) - adjacency)


def eigendecompose(L:LaplacianMatrix) -> LaplacianSpectrum:
    """Symmetric eigendecomposition of the Laplacian, with the column sign convention applied."""

    entries = L.entries if isinstance(L, LaplacianMatrix) else np.asarray(L, dtype=float)

    if not np.allclose(entries, entries.T, rtol=0, atol=1e-12):
        raise ValueError("The Laplacian must be symmetric")

    try:
        lambdas, phis = linalg.eigh(entries)
    except linalg.LinAlgError as err:
        raise NumericalError(f"Symmetric eigensolver did not converge: {err}")

    # eigh returns ascending eigenvalues already; make the columns deterministic
    phis = fix_phases(phis)

    # Check the reconstruction before handing the spectrum out
    scale = max(1.0, linalg.norm(entries, "fro"))
    residual = linalg.norm(phis @ np.diag(lambdas) @ phis.T - entries, "fro")
    if residual > RECONSTRUCTION_TOL * scale:
        raise NumericalError(f"Eigendecomposition residual {residual:.3e} exceeds tolerance")

    logger.debug(f"Laplacian spectrum: {np.array2string(lambdas, precision=6)}")

    return LaplacianSpectrum(lambdas=lambdas, phis=phis)


@dataclass(frozen=True)
class GapReport:
    """Outcome of the gap-uniqueness check."""

    unique_gaps: bool
    colliding_pairs: List[Tuple[GapPair, GapPair]]
    repeated_eigenvalues: List[GapPair]
    tol: float
    # Smallest distance between two distinct values of {lambda_j - lambda_k} and 0
    min_separation: float

    def describe(self, limit:int=10) -> str:
        """Human-readable summary naming the colliding index quadruples."""

        if self.unique_gaps:
            return f"All eigenvalue gaps are unique (tol={self.tol:.3e}, min separation={self.min_separation:.3e})"

        parts = []

        if len(self.repeated_eigenvalues) > 0:
            repeated = ", ".join(f"lambda_{j}=lambda_{k}" for j, k in self.repeated_eigenvalues[:limit])
            parts.append(f"repeated eigenvalues: {repeated}")

        quads = ", ".join(
            f"({j},{k},{l},{m})"
            for (j, k), (l, m) in self.colliding_pairs[:limit]
        )
        more = len(self.colliding_pairs) - limit
        if more > 0:
            quads += f" and {more} more"
        parts.append(f"{len(self.colliding_pairs)} colliding gap pairs (j,k,l,m): {quads}")

        return "Eigenvalue gaps are not unique; " + "; ".join(parts)

    def to_dict(self) -> dict:
        return dict(
            unique_gaps=self.unique_gaps,
            colliding_pairs=[[list(a), list(b)] for a, b in self.colliding_pairs],
            repeated_eigenvalues=[list(pair) for pair in self.repeated_eigenvalues],
            tol=self.tol,
            min_separation=self.min_separation
        )

    def raise_if_colliding(self) -> None:
        """Refuse with a GapCollisionError when the gaps are not unique."""

        if not self.unique_gaps:
            raise GapCollisionError(self.describe(), report=self)


def check_gap_uniqueness(spec:LaplacianSpectrum, tol:float=None) -> GapReport:
    """
    Verify that the eigenvalues of L are simple and that all differences
    lambda_j - lambda_k (j != k) are pairwise distinct beyond `tol`.
    """

    lambdas = np.asarray(spec.lambdas)
    n = lambdas.shape[0]

    if tol is None:
        tol = degeneracy_tolerance(lambdas)

    # Simple spectrum
    repeated = [
        (j, k)
        for j, k in combinations(range(n), 2)
        if abs(lambdas[j] - lambdas[k]) <= tol
    ]

    # Every ordered pair j != k, in lexicographic order
    pairs = [(j, k) for j in range(n) for k in range(n) if j != k]
    gaps = np.array([lambdas[j] - lambdas[k] for j, k in pairs])

    # Single-linkage clusters of the sorted gaps
    collisions = []
    order = np.argsort(gaps, kind="stable")
    start = 0
    for ix in range(1, len(order) + 1):
        if ix == len(order) or gaps[order[ix]] - gaps[order[ix - 1]] > tol:
            cluster = sorted(order[start:ix])
            collisions.extend(
                (pairs[a], pairs[b])
                for a, b in combinations(cluster, 2)
            )
            start = ix

    # The degenerate zero eigenvalue of the super-operator sits among the gaps
    values = np.sort(np.concatenate([gaps, [0.0]]))
    spacings = np.diff(values)
    spacings = spacings[spacings > tol]
    min_separation = float(spacings.min()) if spacings.size > 0 else float("inf")

    report = GapReport(
        unique_gaps=len(collisions) == 0 and len(repeated) == 0,
        colliding_pairs=collisions,
        repeated_eigenvalues=repeated,
        tol=float(tol),
        min_separation=min_separation
    )

    if not report.unique_gaps:
        logger.info(report.describe())

    return report
