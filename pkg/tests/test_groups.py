import itertools

import numpy as np
import pytest

from bforge import fixtures
from bforge.enums import Side
from bforge.errors import DimensionMismatch, ExpansionResidual, GroupError
from bforge.groups import (
    FiniteGroup,
    Representation,
    dihedral_group,
    dihedral_representation,
    klein_four,
    pauli_group,
    solve_group_expansion,
    trivial_group,
)
from bforge.linalg import BipartiteOp, tensor, unitarity_residual


@pytest.mark.parametrize("n", [1, 3, 5])
def test_dihedral_table(n):
    grp = dihedral_group(n)
    assert grp.order == 2 * n
    assert grp.identity == 0
    # reflections are involutions
    for i in range(n):
        assert grp.inverses[n + i] == n + i
        assert grp.mul(i, grp.inverses[i]) == 0


def test_bad_tables_are_rejected():
    with pytest.raises(GroupError):
        FiniteGroup("bad", ["a", "b"], [[0, 0], [1, 1]])
    with pytest.raises(GroupError):
        FiniteGroup("bad", ["a", "b"], [[0, 1], [1, 2]])
    # a Latin square that is not associative
    table = [[0, 1, 2, 3, 4], [1, 0, 3, 4, 2], [2, 4, 0, 1, 3], [3, 2, 4, 0, 1], [4, 3, 1, 2, 0]]
    with pytest.raises(GroupError):
        FiniteGroup("loop", list("abcde"), table)


@pytest.mark.parametrize("dB", [2, 3, 4, 5])
def test_dihedral_representation_is_ordinary(dB):
    rep = dihedral_representation(dB)
    assert rep.dim == dB
    sigma = rep.factor_system()
    assert np.abs(sigma - 1).max() < 1e-10


def test_pauli_factor_system():
    rep = pauli_group(3)
    sigma = rep.factor_system()
    assert np.abs(np.abs(sigma) - 1).max() < 1e-12
    assert np.abs(sigma - 1).max() > 0.5
    # the vectorized operators span every 3 x 3 matrix
    vmat = np.array([m.reshape(-1) for m in rep.mats])
    assert np.linalg.matrix_rank(vmat) == 9


def test_klein_four_anticommuting_sign():
    rep = klein_four(fixtures.PAULI_Z, fixtures.PAULI_X)
    sigma = rep.factor_system()
    # Z X = -(X Z) gives sigma(a, b) / sigma(b, a) = -1
    assert abs(sigma[1, 2] / sigma[2, 1] + 1) < 1e-12


def test_non_projective_matrices_are_rejected():
    hadamard = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    with pytest.raises(GroupError):
        klein_four(fixtures.PAULI_Z, hadamard).factor_system()
    with pytest.raises(GroupError):
        Representation(dihedral_group(3), [np.eye(2)] * 5)


def test_right_regular_shares_the_factor_system():
    rep = pauli_group(2)
    sigma = rep.factor_system()
    regular = rep.right_regular(sigma)
    grp = rep.group
    for f, g in itertools.product(range(grp.order), repeat=2):
        lhs = regular[f] @ regular[g]
        rhs = sigma[f, g] * regular[grp.mul(f, g)]
        assert np.abs(lhs - rhs).max() < 1e-12


def test_cnot_over_paulis():
    u = fixtures.cnot()
    exp = solve_group_expansion(u, pauli_group(2), Side.A)
    assert exp.completion_rank == 0
    assert np.abs(exp.reconstruct() - u.matrix).max() < 1e-10
    assert unitarity_residual(exp.completed) < 1e-10
    assert len(exp.w_ops) == 4


def test_klein_four_on_b_for_anticommuting_blocks():
    u = fixtures.example1()
    blocks = [u.tensor4[j, :, j, :] for j in range(u.dA)]
    exp = solve_group_expansion(u, klein_four(blocks[1], blocks[2]), Side.B)
    assert np.abs(exp.reconstruct() - u.matrix).max() < 1e-9
    assert unitarity_residual(exp.completed) < 1e-9


@pytest.mark.parametrize("name", ["diag_rank3", "example2", "example1"])
def test_dihedral_completion(name):
    from bforge.protocols import rank3_group_setup

    u = fixtures.fixture(name)
    rep, post = rank3_group_setup(u)
    inner = tensor(*post).conj().T @ u.matrix
    exp = solve_group_expansion(BipartiteOp(inner, u.dA, u.dB), rep, Side.B)
    # the two-dimensional span of a rank-3 operator never uses every irrep
    assert exp.completion_rank > 0
    assert np.abs(exp.reconstruct() - inner).max() < 1e-8
    assert unitarity_residual(exp.completed) < 1e-8


def test_trivial_group_handles_products():
    hadamard = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    u = BipartiteOp(tensor(np.eye(2), hadamard), 2, 2)
    exp = solve_group_expansion(u, trivial_group(2), Side.A)
    assert np.abs(exp.w_ops[0] - hadamard).max() < 1e-12


def test_expansion_failures():
    with pytest.raises(ExpansionResidual):
        solve_group_expansion(fixtures.cnot(), trivial_group(2), Side.A)
    with pytest.raises(DimensionMismatch):
        solve_group_expansion(fixtures.identity(2, 3), pauli_group(3), Side.A)
