import dataclasses

import numpy as np
import pytest
from scipy import linalg, stats

from decoherent_walk.dqw import greedy_match
from decoherent_walk.eigen_perturb import (
    DiagonalizableSystem,
    eigenvalue_derivatives_distinct,
    mixing_matrix_distinct,
    perturb,
    repeated_block_solve,
    rotate_degenerate_block,
    solve_second_order_block
)
from decoherent_walk.errors import DegeneracyError, NotSupportedError

H = 1e-3


def random_complex(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def random_general(rng, eigenvalues):
    """A = S diag(eigenvalues) S^{-1} with a well conditioned S."""

    n = len(eigenvalues)
    S = np.eye(n) + 0.3 * random_complex(rng, n, n)
    return S @ np.diag(eigenvalues) @ linalg.inv(S), S


def random_hermitian(rng, eigenvalues):

    n = len(eigenvalues)
    Q, _ = linalg.qr(random_complex(rng, n, n))
    A = Q @ np.diag(eigenvalues) @ Q.conj().T
    return (A + A.conj().T) / 2


def hermitian_part(M):
    return (M + M.conj().T) / 2


def eigenvalue_error(sys, result, h):
    """Largest distance between the first-order and the true eigenvalues of A + h A'."""

    A = sys.A + h * sys.Aprime
    if sys.Adoubleprime is not None:
        A = A + h ** 2 / 2 * sys.Adoubleprime

    _, errors = greedy_match(result.eigenvalues(sys, h), linalg.eigvals(A))
    return errors.max()


def eigenvector_residual(sys, result, h):
    """max_i ||A(h) x_i(h) - mu_i(h) x_i(h)|| for the first-order pairs."""

    A = sys.A + h * sys.Aprime
    X = result.eigenvectors(sys, h)
    mu = result.eigenvalues(sys, h)
    return linalg.norm(A @ X - X * mu[None, :], axis=0).max()


def eigenvector_error(sys, result, h):
    """Distance between the predicted and the true unit eigenvectors, after phase alignment."""

    A = sys.A + h * sys.Aprime
    if sys.Adoubleprime is not None:
        A = A + h ** 2 / 2 * sys.Adoubleprime

    values, vectors = linalg.eig(A)
    match, _ = greedy_match(result.eigenvalues(sys, h), values)

    predicted = result.eigenvectors(sys, h)
    predicted = predicted / linalg.norm(predicted, axis=0)

    worst = 0.0
    for i, j in enumerate(match):
        true = vectors[:, j] / linalg.norm(vectors[:, j])
        inner = np.vdot(true, predicted[:, i])
        true = true * inner / abs(inner)
        worst = max(worst, linalg.norm(true - predicted[:, i]))

    return worst


def halving_ratio(func, sys, result, h=H):
    return func(sys, result, h) / func(sys, result, h / 2)


def halving_ratios(func, sys, result, h=H):
    """Error ratios over the steps h, h/2, h/4."""
    return [halving_ratio(func, sys, result, h), halving_ratio(func, sys, result, h / 2)]


def converges_quadratically(func, sys, result):
    return all(3.5 <= ratio <= 4.5 for ratio in halving_ratios(func, sys, result))


def distinct_system(seed, n):

    rng = np.random.default_rng(seed)
    eigenvalues = np.arange(n) * 1.5 + 0.3j * rng.normal(size=n)
    A, _ = random_general(rng, eigenvalues)
    return DiagonalizableSystem.from_matrices(A, random_complex(rng, n, n))


def repeated_system(seed, n, second=False, block_diagonal=False):
    """One eigenvalue of multiplicity 2 (indices 0, 1 after sorting)."""

    rng = np.random.default_rng(seed)
    eigenvalues = np.array([0.0, 0.0] + [1.5 * (k + 1) for k in range(n - 2)]) + 0.0j
    A, S = random_general(rng, eigenvalues)

    P = random_complex(rng, n, n)
    if block_diagonal:
        P[:2, 2:] = 0
        P[2:, :2] = 0
    Aprime = S @ P @ linalg.inv(S)

    Adoubleprime = random_complex(rng, n, n) if second else None

    return DiagonalizableSystem.from_matrices(A, Aprime, Adoubleprime=Adoubleprime)


@pytest.mark.parametrize("seed", range(20))
def test_distinct_first_order(seed):

    n = 3 + seed % 4
    sys = distinct_system(seed, n)
    sys.check()

    result = perturb(sys)

    assert np.array_equal(result.C, -result.B)
    assert np.array_equal(result.Gamma, np.eye(n))

    assert converges_quadratically(eigenvalue_error, sys, result)
    assert converges_quadratically(eigenvector_residual, sys, result)
    assert 3 <= halving_ratio(eigenvector_error, sys, result) <= 5


@pytest.mark.parametrize("seed", range(5))
def test_distinct_eigenvalue_derivative_matches_finite_difference(seed):

    sys = distinct_system(seed, 4)
    derivatives = eigenvalue_derivatives_distinct(sys)

    h = 1e-6
    plus = linalg.eigvals(sys.A + h * sys.Aprime)
    minus = linalg.eigvals(sys.A - h * sys.Aprime)

    # Central difference, matched to the unperturbed order
    plus = plus[greedy_match(sys.Lambda, plus)[0]]
    minus = minus[greedy_match(sys.Lambda, minus)[0]]

    assert np.allclose((plus - minus) / (2 * h), derivatives, atol=1e-6)


@pytest.mark.parametrize("seed", range(5))
def test_distinct_unit_norm_preserved_to_first_order(seed):

    sys = distinct_system(seed, 5)
    B = mixing_matrix_distinct(sys)
    XB = sys.X @ B

    # d/dt ||x_i||^2 = 2 Re(x_i^H x_i') vanishes
    assert np.allclose(np.real(np.sum(sys.X.conj() * XB, axis=0)), 0, atol=1e-10)


def test_distinct_path_refuses_repeated():

    sys = repeated_system(0, 4)

    with pytest.raises(DegeneracyError):
        eigenvalue_derivatives_distinct(sys)

    with pytest.raises(DegeneracyError):
        mixing_matrix_distinct(sys)


@pytest.mark.parametrize("seed", range(20))
def test_repeated_first_order(seed):

    n = 3 + seed % 4
    sys = repeated_system(seed, n)

    clusters = [group.tolist() for group in sys.clusters() if len(group) > 1]
    assert clusters == [[0, 1]]

    result = perturb(sys)
    block = repeated_block_solve(sys, [0, 1])

    assert block.distinct
    assert np.allclose(result.LambdaPrime[:2], block.lambda_prime)
    assert np.allclose(result.Gamma[:2, :2], block.gamma)

    assert converges_quadratically(eigenvalue_error, sys, result)
    assert converges_quadratically(eigenvector_residual, sys, result)


@pytest.mark.parametrize("seed", range(5))
def test_repeated_rotation_solves_projected_problem(seed):

    sys = repeated_system(seed, 5)
    block = repeated_block_solve(sys, [0, 1])

    P22 = sys.projected([0, 1], [0, 1])
    assert np.allclose(P22 @ block.gamma, block.gamma * block.lambda_prime[None, :])

    # Rotated eigenvectors keep unit length
    assert np.allclose(linalg.norm(sys.X[:, :2] @ block.gamma, axis=0), 1)


@pytest.mark.parametrize("seed", range(5))
def test_second_order_block(seed):

    sys = repeated_system(seed, 4, second=True, block_diagonal=True)
    result = perturb(sys)

    assert np.allclose(result.B[:2, 2:], 0, atol=1e-12)
    assert np.allclose(result.B[2:, :2], 0, atol=1e-12)

    # A'' shapes the eigenvector derivative inside the repeated block
    assert np.abs(result.B[0, 1]) > 0

    assert converges_quadratically(eigenvalue_error, sys, result)
    assert 3 <= halving_ratio(eigenvector_error, sys, result) <= 5


def test_second_order_block_needs_distinct_derivatives():

    gamma = np.eye(2, dtype=complex)

    with pytest.raises(DegeneracyError):
        solve_second_order_block(gamma, np.array([1.0, 1.0]), P22_second=np.ones((2, 2)))

    # A linear A(t) leaves the block at zero
    assert np.array_equal(solve_second_order_block(gamma, np.array([1.0, 1.0])), np.zeros((2, 2)))


@pytest.mark.filterwarnings("error")
def test_second_order_block_divides_off_diagonal_only():

    gamma = np.eye(2, dtype=complex)
    B22 = solve_second_order_block(gamma, np.array([1.0, -1.0]), P22_second=np.ones((2, 2), dtype=complex))

    assert np.all(np.isfinite(B22))
    assert B22[0, 1] == pytest.approx(-0.25)
    assert B22[1, 0] == pytest.approx(0.25)


def test_rotate_degenerate_block_flags_coincident_derivatives():

    gamma, lambda_prime, distinct = rotate_degenerate_block(np.eye(3))

    assert not distinct
    assert np.allclose(lambda_prime, 1)
    assert np.allclose(gamma.conj().T @ gamma, np.eye(3))


def test_two_repeated_clusters_not_supported():

    rng = np.random.default_rng(0)
    A, _ = random_general(rng, np.array([0, 0, 2, 2], dtype=complex))
    sys = DiagonalizableSystem.from_matrices(A, random_complex(rng, 4, 4))

    with pytest.raises(NotSupportedError):
        perturb(sys)


@pytest.mark.parametrize("seed", range(10))
def test_hermitian_matches_general_path(seed):

    rng = np.random.default_rng(seed)
    n = 3 + seed % 4
    A = random_hermitian(rng, np.arange(n) * 1.5 + 0.1 * rng.normal(size=n))
    Aprime = hermitian_part(random_complex(rng, n, n))

    sys = DiagonalizableSystem.from_hermitian(A, Aprime)
    result = perturb(sys)
    general = perturb(dataclasses.replace(sys, hermitian=False))

    assert np.allclose(result.LambdaPrime, general.LambdaPrime, atol=1e-10)
    assert np.allclose(result.B, general.B, atol=1e-10)

    # Hermitian derivatives are real, B is anti-Hermitian with a zero diagonal
    assert np.allclose(result.LambdaPrime.imag, 0, atol=1e-12)
    assert np.allclose(result.B, -result.B.conj().T, atol=1e-12)
    assert np.array_equal(np.diag(result.B), np.zeros(n))

    assert converges_quadratically(eigenvalue_error, sys, result)
    assert converges_quadratically(eigenvector_residual, sys, result)


@pytest.mark.parametrize("seed", range(5))
def test_hermitian_repeated(seed):

    rng = np.random.default_rng(seed)
    A = random_hermitian(rng, np.array([1.0, 1.0, 3.0, 5.5]))
    Aprime = hermitian_part(random_complex(rng, 4, 4))

    sys = DiagonalizableSystem.from_hermitian(A, Aprime)
    result = perturb(sys)

    # Gamma_2 is unitary, so X Gamma stays unitary
    XG = sys.X @ result.Gamma
    assert np.allclose(XG.conj().T @ XG, np.eye(4), atol=1e-10)
    assert np.allclose(result.B, -result.B.conj().T, atol=1e-10)

    assert converges_quadratically(eigenvalue_error, sys, result)
    assert converges_quadratically(eigenvector_residual, sys, result)


def test_left_eigenvectors_invert_right_to_first_order():

    sys = distinct_system(3, 4)
    result = perturb(sys)

    residuals = []
    for h in [H, H / 2]:
        product = result.left_eigenvectors(sys, h) @ result.eigenvectors(sys, h)
        residuals.append(linalg.norm(product - np.eye(4)))

    assert 3.5 <= residuals[0] / residuals[1] <= 4.5


def test_order_fit_on_eigenvalue_errors():

    sys = distinct_system(1, 5)
    result = perturb(sys)

    steps = H / 2 ** np.arange(4)
    errors = [eigenvalue_error(sys, result, h) for h in steps]
    fit = stats.linregress(np.log(steps), np.log(errors))

    assert 1.8 <= fit.slope <= 2.2
