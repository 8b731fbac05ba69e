"""
First-order eigensystem of the decoherent walk super-operator

    A(p) = M_0 + p A',   M_0 = -i (L kron I - I kron L),   A' = P - I,

rebuilt from the Laplacian spectrum alone, and the evolution it implies.

The unperturbed eigenvectors are xi_jk = phi_j kron phi_k at flat position
j*n + k with eigenvalue pi_jk = i(lambda_k - lambda_j). The n coordinates
(j, j) share the eigenvalue 0; they are rotated by the eigenvectors Gamma_2
of Xi = O - I, and rotated coordinate c (Xi eigenvalues in descending order)
occupies flat position c*n + c.

In that basis the perturbation projects to W - I, where
W[(jk), (lm)] = sum_v phi_jv phi_kv phi_lv phi_mv.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple
import logging
import math

import numpy as np
from scipy import linalg

from .config import MAX_N_MATERIALIZE, MAX_N_ORACLE
from .eigen_perturb import rotate_degenerate_block, solve_cross_blocks
from .errors import GapCollisionError, NumericalError, SizeLimitError
from .graph import Graph, LaplacianSpectrum, build_laplacian, check_gap_uniqueness, eigendecompose
from .lindblad import (
    DensityMatrix,
    EvolutionTrace,
    build_superoperator,
    exact_evolve,
    time_grid,
    unvec,
    vec
)

logger = logging.getLogger(__name__)

Pair = Tuple[int, int]


@dataclass(frozen=True)
class UnperturbedSpectrum:
    """Eigenvalues of M_0 indexed by ordered pairs; eigenvectors stay implicit."""

    pi: np.ndarray
    phis: np.ndarray

    @property
    def n(self) -> int:
        return self.phis.shape[0]

    @property
    def degenerate_positions(self) -> np.ndarray:
        """Flat positions of the pairs (j, j)."""
        return np.arange(self.n) * (self.n + 1)

    @property
    def nondegenerate_positions(self) -> np.ndarray:
        return np.setdiff1d(np.arange(self.n * self.n), self.degenerate_positions)

    def index(self, j:int, k:int) -> int:
        return j * self.n + k

    def pair(self, position:int) -> Pair:
        return divmod(int(position), self.n)

    def xi(self, j:int, k:int) -> np.ndarray:
        """Materialize phi_j kron phi_k."""
        return np.kron(self.phis[:, j], self.phis[:, k])


def unperturbed_spectrum(spec:LaplacianSpectrum, spot_checks:int=10, seed:int=0) -> UnperturbedSpectrum:
    """All n^2 values pi_jk = i(lambda_k - lambda_j), spot-checked against M_0."""

    lam = np.asarray(spec.lambdas)
    n = spec.n

    pi = (1j * (lam[None, :] - lam[:, None])).reshape(-1)
    unperturbed = UnperturbedSpectrum(pi=pi, phis=np.asarray(spec.phis))

    # M_0 vec(V) = vec(-i (L V - V L)), with L rebuilt from its spectrum
    L = spec.phis @ np.diag(lam) @ spec.phis.T
    scale = max(1.0, float(np.max(np.abs(lam))))

    rng = np.random.default_rng(seed)
    n_checks = min(spot_checks, n * n)
    for position in rng.choice(n * n, size=n_checks, replace=False):
        j, k = unperturbed.pair(position)
        V = np.outer(spec.phis[:, j], spec.phis[:, k])
        residual = vec(-1j * (L @ V - V @ L)) - pi[position] * vec(V)
        if linalg.norm(residual) > 1e-10 * scale:
            raise NumericalError(f"xi_({j},{k}) is not an eigenvector of the unperturbed super-operator")

    return unperturbed


@dataclass(frozen=True)
class CoObservation:
    """O, Xi = O - I and the eigensystem Xi Gamma = Gamma diag(XiEigs)."""

    O: np.ndarray
    Xi: np.ndarray
    Gamma: np.ndarray
    XiEigs: np.ndarray
    # False when two eigenvalues of Xi coincide
    distinct: bool = True

    @property
    def stochastic_error(self) -> float:
        """Largest deviation of a row or column sum of O from 1."""
        return float(max(
            np.max(np.abs(self.O.sum(axis=0) - 1)),
            np.max(np.abs(self.O.sum(axis=1) - 1))
        ))


def co_observation(spec:LaplacianSpectrum) -> CoObservation:
    """o_jk = sum_v phi_jv^2 phi_kv^2 and the rotation of the zero block."""

    squares = np.asarray(spec.phis) ** 2
    O = squares.T @ squares

    Xi = O - np.eye(spec.n)

    # Symmetric block; ascending from eigh, reversed to put the zero mode first
    gamma, xi_eigs, distinct = rotate_degenerate_block(Xi, hermitian=True)
    xi_eigs = xi_eigs.real
    order = np.argsort(-xi_eigs, kind="stable")

    coobs = CoObservation(
        O=O,
        Xi=Xi,
        Gamma=gamma[:, order].real,
        XiEigs=xi_eigs[order],
        distinct=distinct
    )

    if coobs.stochastic_error > 1e-12:
        logger.warning(f"Co-observation matrix is not doubly stochastic (error {coobs.stochastic_error:.3e})")

    return coobs


def _require_unique_gaps(spec:LaplacianSpectrum, tol:float=None) -> None:
    check_gap_uniqueness(spec, tol=tol).raise_if_colliding()


def eigenvalue_derivatives(spec:LaplacianSpectrum, coobs:CoObservation, tol:float=None) -> np.ndarray:
    """
    n x n array with pi'_jk = o_jk - 1 off the diagonal; entry (c, c) holds
    the c-th eigenvalue of Xi, the derivative of rotated coordinate c.
    """

    _require_unique_gaps(spec, tol)

    pi_prime = coobs.O - 1.0
    np.fill_diagonal(pi_prime, coobs.XiEigs)
    return pi_prime


def _fourth_moments(phis:np.ndarray) -> np.ndarray:
    """Q[(jk), v] = phi_jv phi_kv, so that W = Q Q^T."""

    n = phis.shape[0]
    return (phis.T[:, None, :] * phis.T[None, :, :]).reshape(n * n, n)


@dataclass(frozen=True)
class MixingTensor:
    """
    First-order eigenvector mixing, X(p) ~ X Gamma (I + p B).

    B holds the columns `columns` (flat target positions) of the full
    n^2 x n^2 tensor; entry [(jk), (lm)] says how much of xi_jk goes into the
    derivative of xi_lm.
    """

    B: np.ndarray
    columns: np.ndarray
    n: int

    @property
    def full(self) -> bool:
        return len(self.columns) == self.n * self.n

    def entry(self, j:int, k:int, l:int, m:int) -> complex:
        """b_jk^lm; for j == k (or l == m) the pair names a rotated degenerate coordinate."""

        target = np.flatnonzero(self.columns == l * self.n + m)
        assert len(target) == 1, f"Pair ({l}, {m}) is not among the computed columns"
        return self.B[j * self.n + k, target[0]]


def mixing_coefficients(
    spec:LaplacianSpectrum,
    coobs:CoObservation,
    pairs:Optional[Iterable[Pair]]=None,
    threads:int=1,
    tol:float=None
) -> MixingTensor:
    """
    b_jk^lm = W[(jk), (lm)] / i(lambda_m + lambda_j - lambda_l - lambda_k) between
    non-degenerate pairs. Couplings into and out of the zero block come from
    the cross-block equations with lambda_bar = 0, Gamma_1 = I and Gamma_2
    from `coobs`; the block itself stays zero because A(p) is linear in p.

    Rows are computed in one chunk per first index j, so the tensor is the
    same for any number of `threads`.
    """

    check_gap_uniqueness(spec, tol=tol).raise_if_colliding()

    n = spec.n
    unperturbed = unperturbed_spectrum(spec, spot_checks=0)
    pi = unperturbed.pi
    diag_pos = unperturbed.degenerate_positions
    nondeg = unperturbed.nondegenerate_positions

    if pairs is None:
        columns = np.arange(n * n)
    else:
        columns = np.array(sorted({j * n + k for j, k in pairs}), dtype=int)
        assert len(columns) > 0, "No target pairs requested"
        assert columns.min() >= 0 and columns.max() < n * n, f"Target pairs out of range for n={n}"

    if tol is None:
        tol = spec.default_tol

    Q = _fourth_moments(np.asarray(spec.phis))
    is_degenerate = np.zeros(n * n, dtype=bool)
    is_degenerate[diag_pos] = True

    B = np.zeros((n * n, len(columns)), dtype=complex)
    target_nondeg = ~is_degenerate[columns]

    def fill_rows(j:int) -> None:

        rows = j * n + np.arange(n)
        rows = rows[~is_degenerate[rows]]

        W = Q[rows] @ Q[columns[target_nondeg]].T
        denominators = pi[columns[target_nondeg]][None, :] - pi[rows][:, None]

        # The pair itself has no denominator
        same = rows[:, None] == columns[target_nondeg][None, :]
        collide = (np.abs(denominators) <= tol) & ~same
        if np.any(collide):
            r, c = np.argwhere(collide)[0]
            jk = unperturbed.pair(rows[r])
            lm = unperturbed.pair(columns[target_nondeg][c])
            raise GapCollisionError(f"Zero denominator for (j,k,l,m)=({jk[0]},{jk[1]},{lm[0]},{lm[1]})")

        block = np.zeros_like(denominators)
        block[~same] = W[~same] / denominators[~same]
        B[np.ix_(rows, np.flatnonzero(target_nondeg))] = block

    if threads <= 1:
        for j in range(n):
            fill_rows(j)
    else:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            list(executor.map(fill_rows, range(n)))

    # Couplings with the rotated zero block
    W12 = Q[nondeg] @ Q[diag_pos].T
    B12, B21 = solve_cross_blocks(
        W12,
        W12.T,
        pi[nondeg],
        0.0,
        gamma2=coobs.Gamma
    )

    # Place the needed columns of B12 and B21; B_22 and the diagonal stay zero
    lookup = {position: ix for ix, position in enumerate(columns)}
    for c, position in enumerate(diag_pos):
        if position in lookup:
            B[nondeg, lookup[position]] = B12[:, c]
    nondeg_lookup = [(ix, lookup[position]) for ix, position in enumerate(nondeg) if position in lookup]
    if len(nondeg_lookup) > 0:
        src, dst = (np.array(x) for x in zip(*nondeg_lookup))
        B[np.ix_(diag_pos, dst)] = B21[:, src]

    logger.debug(f"Mixing tensor: {B.shape[0]} x {B.shape[1]} entries with {threads} thread(s)")

    return MixingTensor(B=B, columns=columns, n=n)


@dataclass
class PerturbedSpectrumApprox:
    """
    Factored first-order eigensystem of A(p):

        X(p) = (Phi kron Phi) Gamma (I + p B),   Y(p) = (I - p B) Gamma^T (Phi kron Phi)^T

    Gamma acts on the n degenerate flat coordinates only; nothing of size
    n^2 x n^2 other than B is stored.
    """

    unperturbed: UnperturbedSpectrum
    coobs: CoObservation
    mixing: MixingTensor
    p: float
    pi_prime: np.ndarray
    b_norm: float = 0.0
    validity_warning: bool = False
    metadata: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.unperturbed.n

    @property
    def phis(self) -> np.ndarray:
        return self.unperturbed.phis

    def eigenvalues(self) -> np.ndarray:
        """pi_jk + p pi'_jk in flat order."""
        return self.unperturbed.pi + self.p * self.pi_prime.reshape(-1)

    def _to_modes(self, v:np.ndarray) -> np.ndarray:
        """Gamma^T (Phi kron Phi)^T v, as two n x n products."""

        w = vec(self.phis.T @ unvec(v) @ self.phis).astype(complex)
        diag_pos = self.unperturbed.degenerate_positions
        w[diag_pos] = self.coobs.Gamma.T @ w[diag_pos]
        return w

    def _from_modes(self, w:np.ndarray) -> np.ndarray:
        """(Phi kron Phi) Gamma w."""

        w = np.array(w, dtype=complex)
        diag_pos = self.unperturbed.degenerate_positions
        w[diag_pos] = self.coobs.Gamma @ w[diag_pos]
        return vec(self.phis @ unvec(w) @ self.phis.T)

    def apply_eigenbasis(self, w:np.ndarray) -> np.ndarray:
        """X(p) w."""

        w = np.asarray(w, dtype=complex)
        if self.p != 0:
            w = w + self.p * (self.mixing.B @ w)
        return self._from_modes(w)

    def apply_inverse_eigenbasis(self, v:np.ndarray) -> np.ndarray:
        """Y(p) v, the first-order inverse of X(p)."""

        w = self._to_modes(np.asarray(v, dtype=complex))
        if self.p != 0:
            w = w - self.p * (self.mixing.B @ w)
        return w

    def eigenvectors(self) -> np.ndarray:
        """Materialized columns of X(p); only for small graphs."""

        if self.n > MAX_N_MATERIALIZE:
            raise SizeLimitError(f"Refusing to materialize {self.n ** 2} x {self.n ** 2} eigenvectors (n > {MAX_N_MATERIALIZE})")

        eye = np.eye(self.n * self.n, dtype=complex)
        return np.column_stack([self.apply_eigenbasis(eye[:, i]) for i in range(self.n * self.n)])


def assemble(
    spec:LaplacianSpectrum,
    coobs:CoObservation,
    B:MixingTensor,
    p:float,
    tol:float=None
) -> PerturbedSpectrumApprox:
    """Bundle the first-order factors for one decoherence rate."""

    assert p >= 0, f"Decoherence rate must be non-negative, not {p}"
    assert B.full, "assemble() needs the full mixing tensor"
    assert B.n == spec.n, f"Mixing tensor has n={B.n}, the spectrum has n={spec.n}"

    pi_prime = eigenvalue_derivatives(spec, coobs, tol=tol)
    b_norm = float(linalg.norm(B.B, "fro"))

    approx = PerturbedSpectrumApprox(
        unperturbed=unperturbed_spectrum(spec),
        coobs=coobs,
        mixing=B,
        p=float(p),
        pi_prime=pi_prime,
        b_norm=b_norm,
        validity_warning=p * b_norm >= 1
    )

    if approx.validity_warning:
        logger.warning(f"p ||B|| = {p * b_norm:.3g} >= 1; the first-order approximation is doubtful")

    if not coobs.distinct:
        logger.warning("Xi has repeated eigenvalues; the rotation of the zero block is not unique")

    approx.metadata.update(
        p=float(p),
        b_norm=b_norm,
        validity_warning=approx.validity_warning,
        xi_distinct=coobs.distinct
    )

    return approx


def perturbative_model(spec:LaplacianSpectrum, p:float, threads:int=1, tol:float=None) -> PerturbedSpectrumApprox:
    """Gap check, co-observation, mixing tensor and assembly in one call."""

    check_gap_uniqueness(spec, tol=tol).raise_if_colliding()
    coobs = co_observation(spec)
    B = mixing_coefficients(spec, coobs, threads=threads, tol=tol)
    return assemble(spec, coobs, B, p, tol=tol)


def perturb_evolve(approx:PerturbedSpectrumApprox, rho0:DensityMatrix, times) -> EvolutionTrace:
    """
    vec(rho(t)) ~ X(p) diag(exp(mu t)) Y(p) vec(rho0) with mu = pi + p pi'.
    Each state is made Hermitian and divided by its trace; both corrections are logged.
    """

    assert isinstance(rho0, DensityMatrix), f"Expected a DensityMatrix, not {type(rho0)}"
    assert rho0.n == approx.n, f"State has n={rho0.n}, the graph has n={approx.n}"

    times = time_grid(times)
    mu = approx.eigenvalues()
    coefficients = approx.apply_inverse_eigenbasis(vec(rho0.rho))

    states = []
    max_drift = 0.0
    max_renormalization = 0.0

    with np.errstate(over="raise", invalid="raise"):
        for t in times:

            try:
                rho = unvec(approx.apply_eigenbasis(np.exp(mu * t) * coefficients))
            except FloatingPointError as err:
                raise NumericalError(f"Overflow in the perturbative evolution at t={t:g}, p={approx.p:g}: {err}")

            if not np.all(np.isfinite(rho)):
                raise NumericalError(f"Non-finite state in the perturbative evolution at t={t:g}, p={approx.p:g}")

            drift = float(linalg.norm(rho - rho.conj().T, "fro"))
            rho = (rho + rho.conj().T) / 2

            trace = np.trace(rho).real
            if trace == 0:
                raise NumericalError(f"Perturbative state has zero trace at t={t:g}")

            max_drift = max(max_drift, drift)
            max_renormalization = max(max_renormalization, abs(trace - 1))
            states.append(rho / trace)

    logger.info(
        f"Perturbative evolution: max trace renormalization {max_renormalization:.3e}, "
        f"max Hermitian drift {max_drift:.3e}"
    )

    result = EvolutionTrace(
        times=times,
        node_probs=np.array([np.real(np.diag(rho)) for rho in states]).reshape(len(times), approx.n),
        method="perturb",
        metadata=dict(
            approx.metadata,
            max_trace_renormalization=max_renormalization,
            max_hermitian_drift=max_drift
        ),
        states=states
    )
    result.check()
    return result


def greedy_match(approx:np.ndarray, exact:np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Pair two spectra by repeatedly matching the globally closest remaining
    values. Returns (indices into `exact` for every entry of `approx`, errors).
    """

    approx = np.asarray(approx)
    exact = np.asarray(exact)
    assert approx.shape == exact.shape, "Spectra must have the same size"

    distances = np.abs(approx[:, None] - exact[None, :]).astype(float)
    match = np.full(approx.shape[0], -1, dtype=int)

    for _ in range(approx.shape[0]):
        i, j = np.unravel_index(np.argmin(distances), distances.shape)
        match[i] = j
        distances[i, :] = np.inf
        distances[:, j] = np.inf

    return match, np.abs(approx - exact[match])


@dataclass
class OracleReport:
    """Comparison of the perturbative eigensystem and evolution with the dense oracle."""

    n: int
    p: float
    refused: bool = False
    reason: Optional[str] = None
    eig_err: Optional[float] = None
    evo_err: Optional[float] = None
    vec_residual: Optional[float] = None
    # Errors at p / 2, and the ratios error(p) / error(p / 2)
    eig_err_half: Optional[float] = None
    evo_err_half: Optional[float] = None
    halves: dict = field(default_factory=dict)
    order_estimate: Optional[float] = None

    def to_dict(self) -> dict:
        return dict(
            n=self.n,
            p=self.p,
            refused=self.refused,
            reason=self.reason,
            eig_err=self.eig_err,
            evo_err=self.evo_err,
            vec_residual=self.vec_residual,
            eig_err_half=self.eig_err_half,
            evo_err_half=self.evo_err_half,
            halves=self.halves,
            order_estimate=self.order_estimate
        )


def _oracle_errors(spec, L, coobs, B, p, rho0, times, tol) -> Tuple[float, float, float]:
    """Eigenvalue error, evolution error and eigenvector residual at one p."""

    approx = assemble(spec, coobs, B, p, tol=tol)
    S = build_superoperator(L, p)

    try:
        exact_values = linalg.eigvals(S.M)
    except linalg.LinAlgError as err:
        raise NumericalError(f"Oracle eigensolver did not converge: {err}")

    _, errors = greedy_match(approx.eigenvalues(), exact_values)

    perturbed = perturb_evolve(approx, rho0, times)
    exact = exact_evolve(S, rho0, times)
    evo_err = float(np.max(np.abs(perturbed.node_probs - exact.node_probs)))

    # Column residuals ||A(p) x - mu x|| / ||x||
    X = approx.eigenvectors()
    residuals = linalg.norm(S.M @ X - X * approx.eigenvalues()[None, :], axis=0) / linalg.norm(X, axis=0)

    return float(errors.max()), evo_err, float(residuals.max())


def _ratio(a:float, b:float) -> Optional[float]:
    return a / b if b > 0 else None


def validate_against_oracle(
    graph:Graph,
    p:float,
    times,
    rho0:DensityMatrix=None,
    tol:float=None,
    max_n:int=MAX_N_ORACLE
) -> OracleReport:
    """
    Compare the first-order model with the dense super-operator at p and p / 2.

    The order estimate is log2 of the eigenvalue error ratio; it is left unset
    when either error vanishes (p = 0).
    """

    if graph.n > max_n:
        raise SizeLimitError(f"The dense oracle is limited to n <= {max_n}, not n={graph.n}")

    L = build_laplacian(graph)
    spec = eigendecompose(L)
    report = OracleReport(n=graph.n, p=float(p))

    gaps = check_gap_uniqueness(spec, tol=tol)
    if not gaps.unique_gaps:
        report.refused = True
        report.reason = gaps.describe()
        logger.info(f"Oracle validation refused: {report.reason}")
        return report

    if rho0 is None:
        rho0 = DensityMatrix.from_node(graph.n, 0)

    times = time_grid(times)
    coobs = co_observation(spec)
    B = mixing_coefficients(spec, coobs, tol=tol)

    report.eig_err, report.evo_err, report.vec_residual = _oracle_errors(spec, L, coobs, B, p, rho0, times, tol)

    if p > 0:
        report.eig_err_half, report.evo_err_half, vec_half = _oracle_errors(spec, L, coobs, B, p / 2, rho0, times, tol)

        report.halves = dict(
            eig=_ratio(report.eig_err, report.eig_err_half),
            evo=_ratio(report.evo_err, report.evo_err_half),
            vec=_ratio(report.vec_residual, vec_half)
        )

        if report.halves["eig"] is not None and report.eig_err > 0:
            report.order_estimate = float(math.log2(report.halves["eig"]))

    logger.info(
        f"Oracle validation (n={graph.n}, p={p:g}): eigenvalue error {report.eig_err:.3e}, "
        f"evolution error {report.evo_err:.3e}, order estimate {report.order_estimate}"
    )

    return report
