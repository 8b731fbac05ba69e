"""
First-order perturbation of the eigensystem of a diagonalizable matrix
A(t) ~ A + t A' (+ t^2 A''/2).

Conventions:
  A X = X diag(Lambda)         right eigenvectors are the columns of X
  Y X = I                      left eigenvectors are the rows of Y
  diag(X^H X) = 1              unit right eigenvectors
  X' = X B,  Y' = C Y,  C = -B

A repeated eigenvalue is handled by rotating the observed basis, X -> X Gamma,
where Gamma is block diagonal and solves Y_2 A' X_2 Gamma_2 = Gamma_2 Lambda_2'.
Only a single repeated cluster is supported.

The `solve_*` functions work on projected blocks (Y_a A' X_b) so that callers
who know those blocks in closed form never need the full matrices.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple
import logging

import numpy as np
from scipy import linalg
from scipy.cluster.hierarchy import fclusterdata

from .errors import DegeneracyError, NotSupportedError, NumericalError
from .graph import degeneracy_tolerance, fix_phases

logger = logging.getLogger(__name__)

# Largest acceptable condition number for the right eigenvector matrix
MAX_EIGENVECTOR_CONDITION = 1e10


@dataclass(frozen=True)
class DiagonalizableSystem:
    """Eigensystem of A at t=0 together with the derivatives of A(t)."""

    A: np.ndarray
    Aprime: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    Lambda: np.ndarray
    Adoubleprime: Optional[np.ndarray] = None
    tol: float = None
    hermitian: bool = False

    def __post_init__(self):

        if self.tol is None:
            object.__setattr__(self, "tol", degeneracy_tolerance(self.Lambda))

    @property
    def n(self) -> int:
        return self.Lambda.shape[0]

    @classmethod
    def from_matrices(cls, A, Aprime, Adoubleprime=None, tol:float=None) -> "DiagonalizableSystem":
        """Diagonalize A with a general eigensolver; Y is computed as X^{-1}."""

        A = np.asarray(A, dtype=complex)

        try:
            Lambda, X = linalg.eig(A)
        except linalg.LinAlgError as err:
            raise NumericalError(f"Eigensolver did not converge: {err}")

        # Sort by real part, then imaginary part
        order = np.lexsort((Lambda.imag, Lambda.real))
        Lambda = Lambda[order]
        X = X[:, order]

        # Unit columns with the deterministic phase
        X = fix_phases(X / linalg.norm(X, axis=0))

        condition = np.linalg.cond(X)
        if not np.isfinite(condition) or condition > MAX_EIGENVECTOR_CONDITION:
            raise NumericalError(f"A is not numerically diagonalizable (cond(X)={condition:.3e})")

        return cls(
            A=A,
            Aprime=np.asarray(Aprime, dtype=complex),
            Adoubleprime=None if Adoubleprime is None else np.asarray(Adoubleprime, dtype=complex),
            X=X,
            Y=linalg.inv(X),
            Lambda=Lambda,
            tol=tol
        )

    @classmethod
    def from_hermitian(cls, A, Aprime, Adoubleprime=None, tol:float=None) -> "DiagonalizableSystem":
        """Diagonalize a Hermitian A; X is unitary and Y = X^H."""

        A = np.asarray(A, dtype=complex)

        if not np.allclose(A, A.conj().T, rtol=0, atol=1e-12 * max(1.0, linalg.norm(A))):
            raise ValueError("A must be Hermitian")

        Lambda, X = linalg.eigh(A)
        X = fix_phases(X)

        return cls(
            A=A,
            Aprime=np.asarray(Aprime, dtype=complex),
            Adoubleprime=None if Adoubleprime is None else np.asarray(Adoubleprime, dtype=complex),
            X=X,
            Y=X.conj().T,
            Lambda=Lambda.astype(complex),
            tol=tol,
            hermitian=True
        )

    def projected(self, rows:Sequence[int], cols:Sequence[int], second:bool=False) -> np.ndarray:
        """Return Y[rows] A' X[:, cols] (or A'' when `second`)."""

        M = self.Adoubleprime if second else self.Aprime
        return self.Y[rows, :] @ M @ self.X[:, cols]

    def check(self, atol:float=1e-8) -> None:
        """Raise NumericalError if the eigensystem invariants are violated."""

        scale = max(1.0, linalg.norm(self.A))
        if linalg.norm(self.A @ self.X - self.X * self.Lambda) > atol * scale:
            raise NumericalError("A X != X Lambda")
        if linalg.norm(self.Y @ self.X - np.eye(self.n)) > atol:
            raise NumericalError("Y X != I")
        if np.max(np.abs(np.sum(np.abs(self.X) ** 2, axis=0) - 1)) > atol:
            raise NumericalError("Columns of X are not normalized")

    def clusters(self) -> List[np.ndarray]:
        """Group eigenvalue indices by single-linkage clustering within `tol`."""

        if self.n == 1:
            return [np.array([0])]

        points = np.column_stack([self.Lambda.real, self.Lambda.imag])
        labels = fclusterdata(points, t=self.tol, criterion="distance", method="single")

        groups = [np.flatnonzero(labels == label) for label in np.unique(labels)]
        return sorted(groups, key=lambda group: group[0])


@dataclass(frozen=True)
class RepeatedBlock:
    """Rotation of one repeated eigenvalue's eigenspace."""

    indices: np.ndarray
    lambda_bar: complex
    gamma: np.ndarray
    lambda_prime: np.ndarray
    # False when the derivatives themselves coincide (Gamma is not unique)
    distinct: bool


@dataclass(frozen=True)
class PerturbationResult:
    """First-order eigensystem derivatives, expressed in the rotated basis X Gamma."""

    LambdaPrime: np.ndarray
    B: np.ndarray
    C: np.ndarray
    Gamma: np.ndarray
    LambdaPrimeRepeated: Dict[Tuple[int, ...], np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        assert np.array_equal(self.C, -self.B), "C must equal -B"

    def eigenvalues(self, sys:DiagonalizableSystem, t:float) -> np.ndarray:
        """First-order eigenvalues Lambda + t Lambda'."""
        return sys.Lambda + t * self.LambdaPrime

    def eigenvectors(self, sys:DiagonalizableSystem, t:float) -> np.ndarray:
        """First-order right eigenvectors X Gamma (I + t B)."""
        XG = sys.X @ self.Gamma
        return XG + t * (XG @ self.B)

    def left_eigenvectors(self, sys:DiagonalizableSystem, t:float) -> np.ndarray:
        """First-order left eigenvectors (I + t C) Gamma^{-1} Y."""
        GY = linalg.solve(self.Gamma, sys.Y)
        return GY + t * (self.C @ GY)


def _require_simple(sys:DiagonalizableSystem) -> None:

    repeated = [group for group in sys.clusters() if len(group) > 1]

    if len(repeated) > 0:
        raise DegeneracyError(
            f"Repeated eigenvalues at indices {[group.tolist() for group in repeated]}; "
            "use the repeated-eigenvalue path (repeated_block_solve)"
        )


def _inverse_gaps(Lambda_rows:np.ndarray, Lambda_cols:np.ndarray, tol:float) -> np.ndarray:
    """Matrix of 1 / (lambda_j - lambda_i) with zeros where i and j coincide."""

    gaps = Lambda_cols[None, :] - Lambda_rows[:, None]
    inverse = np.zeros_like(gaps)
    mask = np.abs(gaps) > tol
    inverse[mask] = 1.0 / gaps[mask]
    return inverse


def normalization_diagonal(gram:np.ndarray, B:np.ndarray) -> np.ndarray:
    """
    Diagonal of B fixed by the unit-norm constraint:
    Re(b_ii) = -sum_{k != i} Re(G_ik b_ki), Im(b_ii) = 0, with G the Gram matrix
    of the (rotated) right eigenvectors.
    """

    terms = gram * B.T
    np.fill_diagonal(terms, 0)
    return -terms.sum(axis=1).real


def eigenvalue_derivatives_distinct(sys:DiagonalizableSystem) -> np.ndarray:
    """lambda'_i = y_i^H A' x_i for a simple spectrum."""

    _require_simple(sys)
    return np.einsum("ij,jk,ki->i", sys.Y, sys.Aprime, sys.X)


def mixing_matrix_distinct(sys:DiagonalizableSystem) -> np.ndarray:
    """B with b_ij = y_i^H A' x_j / (lambda_j - lambda_i) and the normalized diagonal."""

    _require_simple(sys)

    everything = np.arange(sys.n)
    B = sys.projected(everything, everything) * _inverse_gaps(sys.Lambda, sys.Lambda, 0.0)

    np.fill_diagonal(B, normalization_diagonal(sys.X.conj().T @ sys.X, B))
    return B


def rotate_degenerate_block(
    P22:np.ndarray,
    X2:np.ndarray=None,
    hermitian:bool=None,
    tol:float=None
) -> Tuple[np.ndarray, np.ndarray, bool]:
    """
    Solve P22 Gamma_2 = Gamma_2 Lambda_2' for the projected block P22 = Y_2 A' X_2.

    Columns of Gamma_2 are scaled so that X_2 Gamma_2 has unit columns (plain
    unit columns when X_2 is not given) and carry the deterministic phase.
    A Hermitian block (detected when `hermitian` is None) is solved with eigh,
    which makes Gamma_2 unitary.
    Returns (Gamma_2, Lambda_2', distinct).
    """

    if hermitian is None:
        hermitian = np.allclose(P22, P22.conj().T, rtol=0, atol=1e-12 * max(1.0, linalg.norm(P22)))

    if hermitian:
        lambda_prime, gamma = linalg.eigh(P22)
        lambda_prime = lambda_prime.astype(complex)
    else:
        lambda_prime, gamma = linalg.eig(P22)
        order = np.lexsort((lambda_prime.imag, lambda_prime.real))
        lambda_prime = lambda_prime[order]
        gamma = gamma[:, order]

    # Unit rotated eigenvectors
    rotated = gamma if X2 is None else X2 @ gamma
    gamma = fix_phases(gamma / linalg.norm(rotated, axis=0))

    if tol is None:
        tol = degeneracy_tolerance(lambda_prime)

    gaps = np.abs(lambda_prime[:, None] - lambda_prime[None, :])
    np.fill_diagonal(gaps, np.inf)
    distinct = bool(np.all(gaps > tol))

    if not distinct:
        logger.warning(
            "Derivatives of the repeated eigenvalue coincide; the rotation of the "
            "degenerate block is not unique"
        )

    return gamma, lambda_prime, distinct


def repeated_block_solve(sys:DiagonalizableSystem, block:Sequence[int]) -> RepeatedBlock:
    """Rotation Gamma_2 and derivatives Lambda_2' of one repeated eigenvalue."""

    block = np.asarray(block)
    values = sys.Lambda[block]
    lambda_bar = values.mean()

    if np.max(np.abs(values - lambda_bar)) > sys.tol:
        raise ValueError(f"Indices {block.tolist()} do not share one eigenvalue")

    gamma, lambda_prime, distinct = rotate_degenerate_block(
        sys.projected(block, block),
        X2=sys.X[:, block]
    )

    return RepeatedBlock(
        indices=block,
        lambda_bar=lambda_bar,
        gamma=gamma,
        lambda_prime=lambda_prime,
        distinct=distinct
    )


def solve_cross_blocks(
    P12:np.ndarray,
    P21:np.ndarray,
    lambda1:np.ndarray,
    lambda_bar:complex,
    gamma1:np.ndarray=None,
    gamma2:np.ndarray=None
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Couplings between the repeated block and the rest of the spectrum:

      B_12 = (lambda_bar I - Lambda_1)^{-1} Gamma_1^{-1} Y_1 A' X_2 Gamma_2
      B_21 = -Gamma_2^{-1} Y_2 A' X_1 Gamma_1 (lambda_bar I - Lambda_1)^{-1}

    `gamma1` / `gamma2` default to the identity.
    """

    shift = lambda_bar - np.asarray(lambda1)

    if np.any(shift == 0):
        raise DegeneracyError("lambda_bar I - Lambda_1 is singular")

    try:
        left = P12 if gamma1 is None else linalg.solve(gamma1, P12)
        right = P21 if gamma2 is None else linalg.solve(gamma2, P21)
    except linalg.LinAlgError as err:
        raise NumericalError(f"Singular Gamma block: {err}")

    if gamma2 is not None:
        left = left @ gamma2
    if gamma1 is not None:
        right = right @ gamma1

    B12 = left / shift[:, None]
    B21 = -right / shift[None, :]

    return B12, B21


def cross_blocks(
    sys:DiagonalizableSystem,
    Gamma1:np.ndarray,
    Gamma2:np.ndarray,
    blocks:Tuple[Sequence[int], Sequence[int]]
) -> Tuple[np.ndarray, np.ndarray]:
    """B_12 and B_21 for the partition `blocks` = (rest, repeated)."""

    rest, repeated = (np.asarray(block) for block in blocks)

    return solve_cross_blocks(
        sys.projected(rest, repeated),
        sys.projected(repeated, rest),
        sys.Lambda[rest],
        sys.Lambda[repeated].mean(),
        gamma1=Gamma1,
        gamma2=Gamma2
    )


def solve_second_order_block(
    gamma2:np.ndarray,
    lambda_prime2:np.ndarray,
    P22_second:np.ndarray=None,
    gram:np.ndarray=None
) -> np.ndarray:
    """
    B_22 inside the repeated block.

    Off-diagonal: (Gamma_2^{-1} Y_2 A'' X_2 Gamma_2)_ij / (2 (lambda'_j - lambda'_i)),
    identically zero when A'' is absent (A(t) linear in t). Diagonal: the
    normalization constraint with `gram` = (X_2 Gamma_2)^H (X_2 Gamma_2),
    restricted to the block.
    """

    r = gamma2.shape[0]
    B22 = np.zeros((r, r), dtype=complex)

    if P22_second is not None and np.any(P22_second != 0):

        gaps = lambda_prime2[None, :] - lambda_prime2[:, None]
        off = ~np.eye(r, dtype=bool)

        if np.any(np.abs(gaps[off]) <= degeneracy_tolerance(lambda_prime2)):
            raise DegeneracyError(
                "Derivatives of the repeated eigenvalue coincide; B_22 needs a deeper expansion"
            )

        rotated = linalg.solve(gamma2, P22_second @ gamma2)
        B22[off] = rotated[off] / (2.0 * gaps[off])

    if gram is None:
        gram = np.eye(r)

    np.fill_diagonal(B22, normalization_diagonal(gram, B22))
    return B22


def second_order_block(
    sys:DiagonalizableSystem,
    Gamma2:np.ndarray,
    LambdaPrime2:np.ndarray,
    block:Sequence[int]
) -> np.ndarray:
    """B_22 for the repeated `block` of a system."""

    block = np.asarray(block)
    rotated = sys.X[:, block] @ Gamma2

    return solve_second_order_block(
        Gamma2,
        LambdaPrime2,
        P22_second=None if sys.Adoubleprime is None else sys.projected(block, block, second=True),
        gram=rotated.conj().T @ rotated
    )


def _single_repeated_block(sys:DiagonalizableSystem):
    """Return (rest, repeated) indices, or None for a simple spectrum."""

    repeated = [group for group in sys.clusters() if len(group) > 1]

    if len(repeated) == 0:
        return None

    if len(repeated) > 1:
        raise NotSupportedError(
            f"{len(repeated)} repeated eigenvalue clusters found; only one level of "
            "degenerate partitioning is supported"
        )

    block = repeated[0]
    rest = np.setdiff1d(np.arange(sys.n), block)
    return rest, block


def perturb(sys:DiagonalizableSystem) -> PerturbationResult:
    """Full first-order result, routing through the repeated-eigenvalue path when needed."""

    if sys.hermitian:
        return hermitian_specialize(sys)

    partition = _single_repeated_block(sys)

    if partition is None:
        B = mixing_matrix_distinct(sys)
        return PerturbationResult(
            LambdaPrime=eigenvalue_derivatives_distinct(sys),
            B=B,
            C=-B,
            Gamma=np.eye(sys.n, dtype=complex)
        )

    rest, block = partition
    repeated = repeated_block_solve(sys, block)

    Gamma = np.eye(sys.n, dtype=complex)
    Gamma[np.ix_(block, block)] = repeated.gamma

    B = np.zeros((sys.n, sys.n), dtype=complex)

    # Rest of the spectrum keeps Gamma_1 = I and the distinct-eigenvalue formula
    P11 = sys.projected(rest, rest)
    B[np.ix_(rest, rest)] = P11 * _inverse_gaps(sys.Lambda[rest], sys.Lambda[rest], 0.0)

    B12, B21 = cross_blocks(sys, None, repeated.gamma, (rest, block))
    B[np.ix_(rest, block)] = B12
    B[np.ix_(block, rest)] = B21
    B[np.ix_(block, block)] = second_order_block(sys, repeated.gamma, repeated.lambda_prime, block)

    # The diagonal couples every block through the rotated Gram matrix
    XG = sys.X @ Gamma
    np.fill_diagonal(B, 0)
    np.fill_diagonal(B, normalization_diagonal(XG.conj().T @ XG, B))

    LambdaPrime = np.einsum("ij,jk,ki->i", sys.Y, sys.Aprime, sys.X)
    LambdaPrime[block] = repeated.lambda_prime

    return PerturbationResult(
        LambdaPrime=LambdaPrime,
        B=B,
        C=-B,
        Gamma=Gamma,
        LambdaPrimeRepeated={tuple(block.tolist()): repeated.lambda_prime}
    )


def hermitian_specialize(sys:DiagonalizableSystem) -> PerturbationResult:
    """
    Hermitian A: X is unitary and Y = X^H, so no left eigenproblem is solved,
    lambda'_i = x_i^H A' x_i and b_ii = 0.
    """

    if not np.allclose(sys.A, sys.A.conj().T, rtol=0, atol=1e-12 * max(1.0, linalg.norm(sys.A))):
        raise ValueError("A must be Hermitian")

    X = sys.X
    XH = X.conj().T
    P = XH @ sys.Aprime @ X

    partition = _single_repeated_block(sys)

    Gamma = np.eye(sys.n, dtype=complex)
    LambdaPrime = np.diag(P).copy()
    repeated_derivatives = {}

    if partition is None:
        B = P * _inverse_gaps(sys.Lambda, sys.Lambda, 0.0)
    else:
        rest, block = partition

        gamma2, lambda_prime2, _ = rotate_degenerate_block(P[np.ix_(block, block)])
        Gamma[np.ix_(block, block)] = gamma2
        LambdaPrime[block] = lambda_prime2
        repeated_derivatives[tuple(block.tolist())] = lambda_prime2

        B = np.zeros((sys.n, sys.n), dtype=complex)
        B[np.ix_(rest, rest)] = P[np.ix_(rest, rest)] * _inverse_gaps(sys.Lambda[rest], sys.Lambda[rest], 0.0)

        B12, B21 = solve_cross_blocks(
            P[np.ix_(rest, block)],
            P[np.ix_(block, rest)],
            sys.Lambda[rest],
            sys.Lambda[block].mean(),
            gamma2=gamma2
        )
        B[np.ix_(rest, block)] = B12
        B[np.ix_(block, rest)] = B21
        B[np.ix_(block, block)] = solve_second_order_block(
            gamma2,
            lambda_prime2,
            P22_second=None if sys.Adoubleprime is None else (XH @ sys.Adoubleprime @ X)[np.ix_(block, block)],
            gram=gamma2.conj().T @ gamma2
        )

    # Unitary X Gamma makes every b_ii vanish; a non-Hermitian A' block can leave Gamma_2 non-unitary
    np.fill_diagonal(B, 0)
    if not np.allclose(Gamma.conj().T @ Gamma, np.eye(sys.n), rtol=0, atol=1e-12):
        np.fill_diagonal(B, normalization_diagonal(Gamma.conj().T @ Gamma, B))

    return PerturbationResult(
        LambdaPrime=LambdaPrime,
        B=B,
        C=-B,
        Gamma=Gamma,
        LambdaPrimeRepeated=repeated_derivatives
    )
