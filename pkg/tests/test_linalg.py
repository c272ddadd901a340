import numpy as np
import pytest

from bforge import fixtures
from bforge.errors import DimensionMismatch, NotDensity, NotUnitary, ZeroOperator
from bforge.linalg import (
    BipartiteOp,
    choi_distance,
    choi_of_unitary,
    cluster_values,
    distinct_values,
    expand_in,
    fourier,
    operator_schmidt,
    partial_trace,
    perm_matrix,
    random_unitary,
    schmidt_rank,
    shift,
    span_rank,
    swap_sides,
    tensor,
    von_neumann_entropy,
)


@pytest.mark.parametrize(
    "name,rank", [("identity", 1), ("cnot", 2), ("swap", 4), ("uketbra11", 3), ("example4", 4)]
)
def test_schmidt_rank_of_fixtures(name, rank):
    u = fixtures.fixture(name)
    osd = operator_schmidt(u)
    assert osd.rank == rank
    assert np.abs(osd.reconstruct() - u.matrix).max() < 1e-10


def test_product_of_random_unitaries_has_rank_one():
    rng = np.random.default_rng(3)
    u = BipartiteOp(tensor(random_unitary(3, rng), random_unitary(4, rng)), 3, 4)
    assert schmidt_rank(u) == 1
    assert u.is_unitary()


def test_zero_operator_rejected():
    with pytest.raises(ZeroOperator):
        operator_schmidt(BipartiteOp(np.zeros((4, 4)), 2, 2))


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        BipartiteOp(np.eye(5), 2, 2)


def test_require_unitary():
    with pytest.raises(NotUnitary):
        BipartiteOp(2 * np.eye(4), 2, 2).require_unitary()


def test_from_perm_matches_from_blocks():
    cnot = fixtures.cnot()
    entries = [(0, 0), (1, 1), (2, 3), (3, 2)]
    assert np.abs(BipartiteOp.from_perm(2, 2, entries).matrix - cnot.matrix).max() < 1e-15


def test_partial_trace_of_product_state():
    rng = np.random.default_rng(0)
    a = rng.normal(size=2) + 1j * rng.normal(size=2)
    b = rng.normal(size=3) + 1j * rng.normal(size=3)
    a /= np.linalg.norm(a)
    b /= np.linalg.norm(b)
    rho = np.outer(np.kron(a, b), np.kron(a, b).conj())
    assert np.abs(partial_trace(rho, [2, 3], [0]) - np.outer(a, a.conj())).max() < 1e-12
    assert np.abs(partial_trace(rho, [2, 3], [1]) - np.outer(b, b.conj())).max() < 1e-12


@pytest.mark.parametrize("d", [2, 3, 5])
def test_entropy_of_maximally_mixed(d):
    assert abs(von_neumann_entropy(np.eye(d) / d) - np.log2(d)) < 1e-12


def test_density_checks():
    with pytest.raises(NotDensity):
        von_neumann_entropy(np.array([[0.5, 1.0], [0.0, 0.5]]))
    with pytest.raises(NotDensity):
        von_neumann_entropy(np.eye(2))


def test_entropy_density_tolerance():
    rho = np.diag([0.5, 0.5 + 1e-6])
    with pytest.raises(NotDensity):
        von_neumann_entropy(rho)
    assert abs(von_neumann_entropy(rho, tol=1e-5) - 1) < 1e-5


def test_choi_distance_ignores_global_phase():
    u = fixtures.cnot().matrix
    c1 = choi_of_unitary(u)
    c2 = choi_of_unitary(np.exp(0.7j) * u)
    assert choi_distance(c1, c2) < 1e-12
    assert choi_distance(c1, choi_of_unitary(fixtures.swap())) > 0.1


def test_swap_sides_is_involution():
    u = fixtures.uketbra11()
    back = swap_sides(swap_sides(u))
    assert (back.dA, back.dB) == (3, 2)
    assert np.abs(back.matrix - u.matrix).max() < 1e-15
    assert schmidt_rank(swap_sides(u)) == 3


def test_cluster_values():
    labels = cluster_values([1.0, 1.0 + 1e-12, 2.0, 1.0 - 1e-12, 2.0 + 1e-11])
    assert labels == [0, 0, 1, 0, 1]
    assert distinct_values([1j, -1j, 1j]) == 2


def test_expand_in_residual():
    basis = [np.eye(2), np.diag([1.0, -1.0])]
    coeffs, res = expand_in(basis, np.diag([3.0, 1.0]))
    assert res < 1e-12
    assert np.abs(coeffs - [2.0, 1.0]).max() < 1e-12
    _, res = expand_in(basis, np.array([[0, 1], [1, 0]]))
    assert res > 1.0
    assert span_rank(basis + [np.diag([5.0, 2.0])]) == 2


@pytest.mark.parametrize("n", [2, 3, 6])
def test_shift_and_fourier_are_unitary(n):
    for mat in (shift(n), fourier(n)):
        assert np.abs(mat.conj().T @ mat - np.eye(n)).max() < 1e-12
    assert np.abs(shift(n) @ np.eye(n)[:, 0] - np.eye(n)[:, 1 % n]).max() == 0


def test_perm_matrix_sends_k_to_mapping():
    p = perm_matrix([2, 0, 1])
    assert np.abs(p @ np.eye(3)[:, 0] - np.eye(3)[:, 2]).max() == 0
