import numpy as np
import pytest
from scipy import linalg

from decoherent_walk.errors import NumericalError, StateError
from decoherent_walk.graph import build_laplacian, eigendecompose
from decoherent_walk.lindblad import (
    DensityMatrix,
    EvolutionTrace,
    Superoperator,
    build_superoperator,
    classical_ctrw_evolve,
    exact_evolve,
    pure_ctqw_evolve,
    unvec,
    vec
)

from conftest import named_graph


def test_vec_stacks_rows():

    E00 = np.zeros((2, 2))
    E00[0, 0] = 1

    assert np.array_equal(vec(E00), [1, 0, 0, 0])
    assert np.array_equal(vec(np.array([[1, 2], [3, 4]])), [1, 2, 3, 4])
    assert np.array_equal(unvec(vec(np.arange(9).reshape(3, 3))), np.arange(9).reshape(3, 3))


def test_vec_kronecker_identity():

    rng = np.random.default_rng(0)
    A, rho, B = (rng.normal(size=(3, 3)) for _ in range(3))

    assert np.allclose(vec(A @ rho @ B.T), np.kron(A, B) @ vec(rho))


def test_unvec_needs_square_length():

    with pytest.raises(AssertionError):
        unvec(np.zeros(5))


def test_superoperator_k2_p0(k2):

    S = build_superoperator(build_laplacian(k2), 0.0)

    assert S.M.shape == (4, 4)
    assert S.n == 2
    assert np.allclose(S.M, S.M.T)
    assert np.allclose(np.sort(linalg.eigvals(S.M).imag), [-2, 0, 0, 2])


@pytest.mark.parametrize("name", ["k2", "p3", "c4", "star4"])
@pytest.mark.parametrize("p", [0.0, 0.3])
def test_superoperator_matches_commutator_form(name, p):

    L = build_laplacian(named_graph(name)).entries
    S = build_superoperator(L, p)

    rng = np.random.default_rng(1)
    n = L.shape[0]
    rho = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))

    expected = -1j * (L @ rho - rho @ L) - p * rho + p * np.diag(np.diag(rho))
    assert np.allclose(unvec(S.M @ vec(rho)), expected, atol=1e-12)


def test_superoperator_rejects_negative_rate(k2):

    with pytest.raises(AssertionError):
        build_superoperator(build_laplacian(k2), -0.1)


@pytest.mark.parametrize("name", ["k2", "p3", "c4", "star4"])
@pytest.mark.parametrize("p", [0.0, 0.3, 1.0])
def test_superoperator_annihilates_uniform_state(name, p):

    S = build_superoperator(build_laplacian(named_graph(name)), p)
    n = S.n

    assert np.allclose(S.M @ vec(np.eye(n) / n), 0, atol=1e-12)


@pytest.mark.parametrize("name", ["k2", "p3", "star4"])
def test_superoperator_diagonal_dephases_coherences(name):

    p = 0.4
    S = build_superoperator(build_laplacian(named_graph(name)), p)
    n = S.n

    diagonal = np.real(np.diag(S.M)).reshape(n, n)
    populations = np.eye(n, dtype=bool)

    assert np.allclose(diagonal[populations], 0)
    assert np.allclose(diagonal[~populations], -p)


def test_density_matrix_validation():

    with pytest.raises(StateError, match="square"):
        DensityMatrix(np.ones((2, 3)))

    with pytest.raises(StateError, match="Hermitian"):
        DensityMatrix(np.array([[0.5, 0.1], [0.2, 0.5]]))

    with pytest.raises(StateError, match="trace"):
        DensityMatrix(np.eye(2))

    with pytest.raises(StateError, match="semidefinite"):
        DensityMatrix(np.array([[1.5, 0], [0, -0.5]]))

    with pytest.raises(StateError, match="out of range"):
        DensityMatrix.from_node(3, 3)

    with pytest.raises(StateError, match="unit norm"):
        DensityMatrix.from_pure([1, 1])

    with pytest.raises(StateError, match="sum to 1"):
        DensityMatrix.from_probabilities([0.5, 0.6])


def test_density_matrix_constructors():

    rho = DensityMatrix.from_node(3, 1)
    assert np.array_equal(rho.probabilities, [0, 1, 0])

    assert np.allclose(DensityMatrix.uniform(4).probabilities, 0.25)
    assert np.allclose(DensityMatrix.from_pure(np.ones(2) / np.sqrt(2)).rho, 0.5)
    assert np.allclose(DensityMatrix.from_probabilities([0.2, 0.8]).rho, np.diag([0.2, 0.8]))

    with pytest.raises(ValueError):
        rho.rho[0, 0] = 1


def test_exact_evolve_p0_matches_pure(p3):

    L = build_laplacian(p3)
    spec = eigendecompose(L)
    times = np.linspace(0, 5, 11)

    psi0 = np.zeros(3, dtype=complex)
    psi0[0] = 1

    exact = exact_evolve(build_superoperator(L, 0.0), DensityMatrix.from_pure(psi0), times)
    pure = pure_ctqw_evolve(spec, psi0, times)

    assert np.allclose(exact.node_probs, pure.node_probs, atol=1e-9)


@pytest.mark.parametrize("name", ["k2", "p3", "c4", "star4"])
def test_exact_evolve_preserves_state(name):

    L = build_laplacian(named_graph(name))
    n = L.n
    trace = exact_evolve(build_superoperator(L, 0.2), DensityMatrix.from_node(n, 0), [0, 0.5, 1, 2, 5], threads=2)

    assert trace.metadata["max_trace_error"] <= 1e-9
    assert trace.metadata["max_hermitian_drift"] <= 1e-9
    assert not trace.metadata.get("invariant_violation", False)

    for rho in trace.states:
        assert abs(np.trace(rho) - 1) <= 1e-9
        assert np.allclose(rho, rho.conj().T, atol=1e-12)
        assert linalg.eigvalsh(rho).min() >= -1e-9


def test_exact_evolve_threads_agree(p3):

    S = build_superoperator(build_laplacian(p3), 0.1)
    rho0 = DensityMatrix.from_node(3, 0)
    times = np.linspace(0, 3, 7)

    one = exact_evolve(S, rho0, times, threads=1)
    four = exact_evolve(S, rho0, times, threads=4)

    assert np.array_equal(one.node_probs, four.node_probs)


@pytest.mark.parametrize("name, n", [("k2", 2), ("p3", 3)])
def test_exact_evolve_long_time_uniform(name, n):

    L = build_laplacian(named_graph(name))
    S = build_superoperator(L, 0.1)

    # The slowest coherence decays like exp(-p t / 2) on K2, so t = 50 is only close
    near = exact_evolve(S, DensityMatrix.from_node(n, 0), [50.0])
    assert np.allclose(near.node_probs[0], 1 / n, atol=0.1)

    far = exact_evolve(S, DensityMatrix.from_node(n, 0), [400.0])
    assert np.allclose(far.node_probs[0], 1 / n, atol=1e-6)


def test_exact_evolve_strong_dephasing_k2(k2):

    S = build_superoperator(build_laplacian(k2), 1.0)
    trace = exact_evolve(S, DensityMatrix.from_node(2, 0), [0.0, 50.0])

    assert np.allclose(trace.node_probs[0], [1, 0], atol=1e-12)
    assert np.allclose(trace.node_probs[-1], 0.5, atol=1e-6)


def test_exact_evolve_fixes_uniform_state(c4):

    S = build_superoperator(build_laplacian(c4), 0.5)
    trace = exact_evolve(S, DensityMatrix.uniform(4), [0, 1, 10])

    assert np.allclose(trace.node_probs, 0.25, atol=1e-10)


def test_exact_evolve_expm_fallback(k2, monkeypatch):

    import decoherent_walk.lindblad as lindblad

    monkeypatch.setattr(lindblad, "MAX_EIGENBASIS_CONDITION", 0.5)

    S = build_superoperator(build_laplacian(k2), 0.1)
    times = [0, 1, 2]
    trace = exact_evolve(S, DensityMatrix.from_node(2, 0), times)

    assert trace.metadata["backend"] == "expm"
    assert trace.metadata["expm_fallback"]

    monkeypatch.undo()
    reference = exact_evolve(S, DensityMatrix.from_node(2, 0), times)
    assert np.allclose(trace.node_probs, reference.node_probs, atol=1e-10)


def test_exact_evolve_rejects_bad_times(k2):

    S = build_superoperator(build_laplacian(k2), 0.1)

    with pytest.raises(ValueError, match="ascending"):
        exact_evolve(S, DensityMatrix.from_node(2, 0), [1, 0])

    with pytest.raises(ValueError, match="non-negative"):
        exact_evolve(S, DensityMatrix.from_node(2, 0), [-1, 0])


def test_pure_k2_cosine(k2):

    spec = eigendecompose(build_laplacian(k2))
    times = np.linspace(0, np.pi, 5)

    trace = pure_ctqw_evolve(spec, [1, 0], times)

    assert np.allclose(trace.node_probs[:, 0], np.cos(times) ** 2, atol=1e-10)
    assert np.allclose(trace.node_probs[:, 1], np.sin(times) ** 2, atol=1e-10)
    assert trace.metadata["max_norm_error"] <= 1e-12


def test_pure_rejects_unnormalized_state(k2):

    spec = eigendecompose(build_laplacian(k2))

    with pytest.raises(StateError):
        pure_ctqw_evolve(spec, [1, 1], [0])


def test_classical_k2(k2):

    times = np.linspace(0, 3, 7)
    trace = classical_ctrw_evolve(build_laplacian(k2), [1, 0], times)

    assert np.allclose(trace.node_probs[:, 0], (1 + np.exp(-2 * times)) / 2, atol=1e-10)
    assert np.allclose(trace.node_probs[:, 1], (1 - np.exp(-2 * times)) / 2, atol=1e-10)


def test_classical_rejects_negative_probabilities(k2):

    with pytest.raises(StateError):
        classical_ctrw_evolve(build_laplacian(k2), [1.5, -0.5], [0])


def test_trace_check_flags_violations():

    trace = EvolutionTrace(times=np.array([0.0]), node_probs=np.array([[0.7, 0.7]]), method="test")
    trace.check()
    assert trace.metadata["invariant_violation"]

    broken = EvolutionTrace(times=np.array([0.0]), node_probs=np.array([[np.nan, 1.0]]), method="test")
    with pytest.raises(NumericalError):
        broken.check()


def test_superoperator_n():

    assert Superoperator(M=np.zeros((9, 9)), p=0.0).n == 3
