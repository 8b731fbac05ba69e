"""
Exact reference dynamics: the vectorized super-operator, its dense evolution,
and the pure quantum and classical walks.

vec() stacks rows (numpy C order), so vec(A rho B^T) = (A kron B) vec(rho) and
the generator -i(L kron I - I kron L) acts as -i[L, rho].
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional
import logging
import math

import numpy as np
from scipy import linalg

from .errors import NumericalError, StateError
from .graph import LaplacianMatrix, LaplacianSpectrum, eigendecompose

logger = logging.getLogger(__name__)

# Eigenvector condition number above which exact_evolve switches to expm
MAX_EIGENBASIS_CONDITION = 1e8


def vec(rho:np.ndarray) -> np.ndarray:
    """Stack the rows of an n x n matrix into a length n^2 vector."""

    rho = np.asarray(rho)
    assert rho.ndim == 2 and rho.shape[0] == rho.shape[1], f"Expected a square matrix, not {rho.shape}"
    return rho.reshape(-1).copy()


def unvec(v:np.ndarray) -> np.ndarray:
    """Inverse of vec()."""

    v = np.asarray(v)
    n = math.isqrt(v.shape[0])
    assert n * n == v.shape[0], f"Length {v.shape[0]} is not a perfect square"
    return v.reshape(n, n).copy()


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite n x n state."""

    rho: np.ndarray

    def __post_init__(self):

        rho = np.array(self.rho, dtype=complex)

        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise StateError(f"A density matrix must be square, not {rho.shape}")
        if np.max(np.abs(rho - rho.conj().T)) > 1e-10:
            raise StateError("A density matrix must be Hermitian")
        if abs(np.trace(rho) - 1) > 1e-10:
            raise StateError(f"A density matrix must have unit trace, not {np.trace(rho).real:.12g}")
        if linalg.eigvalsh(rho).min() < -1e-9:
            raise StateError("A density matrix must be positive semidefinite")

        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    @property
    def n(self) -> int:
        return self.rho.shape[0]

    @property
    def probabilities(self) -> np.ndarray:
        return np.real(np.diag(self.rho)).copy()

    @classmethod
    def from_node(cls, n:int, node:int) -> "DensityMatrix":
        """Walker localized on one vertex, rho = |node><node|."""

        if not 0 <= node < n:
            raise StateError(f"Start node {node} is out of range for n={n}")

        rho = np.zeros((n, n), dtype=complex)
        rho[node, node] = 1
        return cls(rho)

    @classmethod
    def uniform(cls, n:int) -> "DensityMatrix":
        """Maximally mixed state I/n."""
        return cls(np.eye(n, dtype=complex) / n)

    @classmethod
    def from_pure(cls, psi) -> "DensityMatrix":
        """Outer product |psi><psi| of a normalized state vector."""

        psi = _normalized_state(psi)
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def from_probabilities(cls, probs) -> "DensityMatrix":
        """Classical mixture of localized walkers."""
        return cls(np.diag(_probability_vector(probs)).astype(complex))


def _normalized_state(psi) -> np.ndarray:

    psi = np.asarray(psi, dtype=complex).reshape(-1)

    if abs(linalg.norm(psi) - 1) > 1e-10:
        raise StateError(f"State vector must have unit norm, not {linalg.norm(psi):.12g}")

    return psi


def _probability_vector(probs) -> np.ndarray:

    probs = np.asarray(probs)

    if np.iscomplexobj(probs):
        if np.any(probs.imag != 0):
            raise StateError("A probability vector must be real")
        probs = probs.real

    probs = probs.astype(float).reshape(-1)

    if np.any(probs < 0):
        raise StateError("A probability vector must not have negative entries")
    if abs(probs.sum() - 1) > 1e-10:
        raise StateError(f"A probability vector must sum to 1, not {probs.sum():.12g}")

    return probs


@dataclass(frozen=True)
class Superoperator:
    """Dense n^2 x n^2 generator of vec(rho) at decoherence rate p."""

    M: np.ndarray
    p: float

    @property
    def n(self) -> int:
        return math.isqrt(self.M.shape[0])


@dataclass
class EvolutionTrace:
    """Node occupation probabilities on a time grid."""

    times: np.ndarray
    node_probs: np.ndarray
    method: str
    metadata: dict = field(default_factory=dict)
    # Full states, kept for the density-matrix methods
    states: Optional[List[np.ndarray]] = None

    @property
    def n(self) -> int:
        return self.node_probs.shape[1]

    def check(self, atol:float=1e-8) -> None:
        """Verify that every row is a probability vector; violations are logged and recorded."""

        if not np.all(np.isfinite(self.node_probs)):
            raise NumericalError(f"Non-finite probabilities in the {self.method} trace")

        sum_error = float(np.max(np.abs(self.node_probs.sum(axis=1) - 1))) if len(self.times) else 0.0
        min_prob = float(self.node_probs.min()) if self.node_probs.size else 0.0

        self.metadata["max_sum_error"] = sum_error
        self.metadata["min_probability"] = min_prob

        if sum_error > atol or min_prob < -atol:
            logger.warning(
                f"The {self.method} trace is not a probability distribution within {atol:g} "
                f"(sum error {sum_error:.3e}, min entry {min_prob:.3e})"
            )
            self.metadata["invariant_violation"] = True


def time_grid(times) -> np.ndarray:
    """Validate an ascending, non-negative grid of times."""

    times = np.atleast_1d(np.asarray(times, dtype=float))

    if np.any(np.diff(times) < 0):
        raise ValueError("Times must be ascending")
    if np.any(times < 0):
        raise ValueError("Times must be non-negative")

    return times


def _laplacian_entries(L) -> np.ndarray:
    return L.entries if isinstance(L, LaplacianMatrix) else np.asarray(L, dtype=float)


def build_superoperator(L:LaplacianMatrix, p:float) -> Superoperator:
    """
    M = -i (L kron I + I kron -L) + p (sum_v E_vv kron E_vv - I kron I).

    The assembled operator is checked against -i[L, rho] - p rho + p P(rho)
    on a fixed random state before it is returned.
    """

    assert p >= 0, f"Decoherence rate must be non-negative, not {p}"

    Lm = _laplacian_entries(L)
    n = Lm.shape[0]
    eye = np.eye(n)

    coherent = -1j * (np.kron(Lm, eye) + np.kron(eye, -Lm))

    # sum_v E_vv kron E_vv is diagonal, with ones at the flat positions (v, v)
    projector = np.diag(vec(eye))
    noise = p * (projector - np.eye(n * n))

    S = Superoperator(M=coherent + noise, p=float(p))

    _check_commutator_form(S, Lm)

    return S


def _check_commutator_form(S:Superoperator, Lm:np.ndarray, seed:int=0) -> None:

    n = Lm.shape[0]
    rng = np.random.default_rng(seed)

    rho = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rho = rho + rho.conj().T

    expected = -1j * (Lm @ rho - rho @ Lm) - S.p * rho + S.p * np.diag(np.diag(rho))
    actual = unvec(S.M @ vec(rho))

    scale = max(1.0, linalg.norm(expected))
    if linalg.norm(actual - expected) > 1e-10 * scale:
        raise NumericalError("Super-operator does not reproduce -i[L, rho] - p rho + p P(rho)")


def _map_times(func:Callable, times:np.ndarray, threads:int) -> list:
    """Evaluate `func` at every time, in order, on up to `threads` workers."""

    if threads <= 1 or len(times) <= 1:
        return [func(t) for t in times]

    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(func, times))


def _symmetrize(rho:np.ndarray):
    """Return ((rho + rho^H)/2, ||rho - rho^H||_F)."""

    drift = float(linalg.norm(rho - rho.conj().T, "fro"))
    return (rho + rho.conj().T) / 2, drift


def exact_evolve(S:Superoperator, rho0:DensityMatrix, times, threads:int=1) -> EvolutionTrace:
    """
    vec(rho(t)) = exp(M t) vec(rho0).

    The eigendecomposition of M is reused for every time when its eigenvectors
    are well conditioned; otherwise each time point falls back to a
    scaling-and-squaring matrix exponential.
    """

    times = time_grid(times)
    v0 = vec(rho0.rho)

    assert rho0.n == S.n, f"State has n={rho0.n}, the super-operator has n={S.n}"

    backend = "eigen"
    condition = None

    try:
        mu, V = linalg.eig(S.M)
        condition = float(np.linalg.cond(V))
    except linalg.LinAlgError as err:
        logger.warning(f"Eigendecomposition of the super-operator failed ({err})")
        backend = "expm"

    if backend == "eigen" and not (np.isfinite(condition) and condition < MAX_EIGENBASIS_CONDITION):
        logger.warning(f"Super-operator eigenbasis is ill-conditioned (cond={condition:.3e}); using expm")
        backend = "expm"

    if backend == "eigen":
        coefficients = linalg.solve(V, v0)
        propagate = lambda t: V @ (np.exp(mu * t) * coefficients)
    else:
        propagate = lambda t: linalg.expm(S.M * t) @ v0

    states = []
    max_drift = 0.0
    max_trace_error = 0.0

    for v in _map_times(propagate, times, threads):
        rho, drift = _symmetrize(unvec(v))
        max_drift = max(max_drift, drift)
        max_trace_error = max(max_trace_error, abs(np.trace(rho) - 1))
        states.append(rho)

    logger.info(f"Exact evolution ({backend}): max Hermitian drift {max_drift:.3e}, max trace error {max_trace_error:.3e}")

    trace = EvolutionTrace(
        times=times,
        node_probs=np.array([np.real(np.diag(rho)) for rho in states]).reshape(len(times), S.n),
        method="exact",
        metadata=dict(
            p=S.p,
            backend=backend,
            expm_fallback=backend == "expm",
            eigenbasis_condition=condition,
            max_hermitian_drift=max_drift,
            max_trace_error=float(max_trace_error)
        ),
        states=states
    )
    trace.check()
    return trace


def pure_ctqw_evolve(spec:LaplacianSpectrum, psi0, times) -> EvolutionTrace:
    """psi(t) = Phi exp(-i Lambda t) Phi^T psi0, probabilities |alpha_u(t)|^2."""

    times = time_grid(times)
    psi0 = _normalized_state(psi0)

    assert psi0.shape[0] == spec.n, f"State has length {psi0.shape[0]}, the graph has n={spec.n}"

    coefficients = spec.phis.T @ psi0

    amplitudes = np.array([
        spec.phis @ (np.exp(-1j * spec.lambdas * t) * coefficients)
        for t in times
    ]).reshape(len(times), spec.n)

    trace = EvolutionTrace(
        times=times,
        node_probs=np.abs(amplitudes) ** 2,
        method="pure",
        metadata=dict(max_norm_error=float(np.max(np.abs(np.sum(np.abs(amplitudes) ** 2, axis=1) - 1))))
    )
    trace.check()
    return trace


def classical_ctrw_evolve(L:LaplacianMatrix, p0, times, spec:LaplacianSpectrum=None) -> EvolutionTrace:
    """p(t) = Phi exp(-Lambda t) Phi^T p0."""

    times = time_grid(times)
    p0 = _probability_vector(p0)

    if spec is None:
        spec = eigendecompose(L)

    assert p0.shape[0] == spec.n, f"Probability vector has length {p0.shape[0]}, the graph has n={spec.n}"

    coefficients = spec.phis.T @ p0

    probs = np.array([
        spec.phis @ (np.exp(-spec.lambdas * t) * coefficients)
        for t in times
    ]).reshape(len(times), spec.n)

    trace = EvolutionTrace(times=times, node_probs=probs, method="classical")
    trace.check()
    return trace
