import math

import numpy as np
import pytest

from bforge import fixtures
from bforge.costs import (
    NO_CONSTANT_BOUND,
    bell,
    bell_numbers,
    bound_classical,
    bound_controlled,
    bound_permutation,
    bound_rank3,
    ceil_log2,
    permutation_crossover,
    permutation_first_term_wins,
    recommend,
)
from bforge.enums import ProtocolId
from bforge.errors import InvalidInput
from bforge.linalg import BipartiteOp, random_unitary, tensor


def test_bell_numbers():
    assert [bell(n) for n in range(7)] == [1, 1, 2, 5, 15, 52, 203]
    assert bell_numbers(10)[10] == 115975
    with pytest.raises(InvalidInput):
        bell(-1)


def test_ceil_log2():
    assert [ceil_log2(n) for n in (1, 2, 3, 4, 5, 52, 64, 65)] == [0, 1, 2, 2, 3, 6, 6, 7]


@pytest.mark.parametrize(
    "dA, dB, ebits, cbits",
    [
        (100, 2, 2.0, 4.0),
        (3, 2, math.log2(3), 2 * math.log2(3)),
        (100, 3, math.log2(6), 2 * math.log2(9)),
        (100, 7, math.log2(14), 2 * math.log2(14)),
        (5, 4, math.log2(5), 2 * math.log2(5)),
    ],
)
def test_bound_rank3_values(dA, dB, ebits, cbits):
    rep = bound_rank3(dA, dB)
    assert abs(rep.ebits - ebits) < 1e-12
    assert abs(rep.cbits - cbits) < 1e-12


def test_bound_rank3_grid():
    for dA in (3, 4, 6, 10, 40):
        for dB in (2, 3, 5, 8):
            rep = bound_rank3(dA, dB)
            want = math.log2(min(dA, dB**2, 4 * (dB // 2) + 2))
            assert abs(rep.ebits - want) < 1e-12
            assert rep.cbits >= rep.ebits


def test_bound_rank3_domain():
    with pytest.raises(InvalidInput):
        bound_rank3(2, 5)
    with pytest.raises(InvalidInput):
        bound_rank3(5, 1)


def test_bound_rank3_protocol_choice():
    assert bound_rank3(3, 5).applicable_protocol is ProtocolId.CT
    assert bound_rank3(100, 2).applicable_protocol is ProtocolId.GROUP
    assert bound_rank3(100, 3).source == "rank3-dihedral-group"


def test_bound_permutation_small_ranks():
    assert bound_permutation(1).ebits == 0
    assert bound_permutation(2).ebits == 1
    rep = bound_permutation(3)
    assert rep.ebits == 2 and rep.cbits == 4


def test_bound_permutation_rank4():
    rep = bound_permutation(4)
    assert abs(rep.ebits - math.log2(1664)) < 1e-9
    assert rep.ebits < 10.71
    assert rep.expr == "log2(1664)"
    assert rep.source == "permutation-rank4-cases"


def test_bound_permutation_rank5():
    rep = bound_permutation(5)
    assert abs(rep.ebits - (math.log2(203) + 5 + math.log2(5))) < 1e-12
    assert rep.applicable_protocol is ProtocolId.PTL2
    assert [a.ebits for a in rep.alternatives] == sorted(a.ebits for a in rep.alternatives)


def test_bound_permutation_monotone():
    values = [bound_permutation(r).ebits for r in range(1, 13)]
    assert all(b >= a for a, b in zip(values, values[1:]))


def test_bound_permutation_cbits_twice_ebits():
    for r in range(1, 9):
        rep = bound_permutation(r)
        assert abs(rep.cbits - 2 * rep.ebits) < 1e-12


def test_permutation_crossover():
    assert all(permutation_first_term_wins(r) for r in (4, 10, 100, 1099))
    assert permutation_crossover(1100) is None


@pytest.mark.parametrize(
    "r, restore, count",
    [(1, True, 0), (1, False, 0), (2, True, 8), (2, False, 2), (4, True, 24), (4, False, 6)],
)
def test_bound_classical(r, restore, count):
    assert bound_classical(r, restore) == count


def test_bound_classical_regime_gap():
    for r in range(2, 10):
        assert bound_classical(r, False) <= bound_classical(r, True)


def test_bound_controlled():
    rep = bound_controlled(2)
    assert rep.ebits == 1 and rep.cbits == 2
    assert bound_controlled(1).ebits == 0
    assert bound_controlled(8).ebits == 3
    with pytest.raises(InvalidInput):
        bound_controlled(0)


def test_recommend_example4():
    rep = recommend(fixtures.example4())
    assert rep.applicable_protocol is ProtocolId.PTL2
    assert abs(rep.ebits - math.log2(12)) < 1e-12
    assert rep.expr == "log2(12)"
    teleport = [a for a in rep.alternatives if a.protocol is ProtocolId.TELEPORT]
    assert abs(teleport[0].ebits - 2 * math.log2(5)) < 1e-12
    assert rep.ebits < teleport[0].ebits


def test_recommend_cnot():
    rep = recommend(fixtures.cnot())
    assert rep.ebits == 1 and rep.cbits == 2
    assert rep.applicable_protocol is ProtocolId.CT


def test_recommend_identity_is_local():
    rep = recommend(fixtures.identity(3, 2))
    assert rep.ebits == 0 and rep.applicable_protocol is ProtocolId.LOCAL


def test_recommend_rank3_permutations():
    assert recommend(fixtures.perm_u_4terms(0, 2, 2)).ebits == 2
    for seed in range(6):
        for kind in ("controlled-3", "controlled-4", "product+two"):
            u = fixtures.random_rank3_permutation(kind, seed)
            assert recommend(u).ebits <= 2 + 1e-12


def test_recommend_diagonal_rank3_two_values():
    rep = recommend(fixtures.diag_rank3())
    two = [a for a in rep.alternatives if a.source == "diagonal-rank3-two-values"]
    assert two and two[0].ebits == 2
    # a diagonal unitary is also controlled from B, here with three terms
    assert abs(rep.ebits - math.log2(3)) < 1e-12
    assert not rep.notes


def test_recommend_diagonal_rank3_without_constant_bound():
    w = np.exp(2j * np.pi / 3)
    d = np.diag([1, w, w * w])
    mat = sum(tensor(np.diag(np.eye(3)[j]), np.linalg.matrix_power(d, j)) for j in range(3))
    u = BipartiteOp(mat, 3, 3)
    rep = recommend(u)
    assert NO_CONSTANT_BOUND in rep.notes
    assert abs(rep.ebits - math.log2(3)) < 1e-12


def test_recommend_generic_unitary_teleports():
    rng = np.random.default_rng(3)
    u = BipartiteOp(random_unitary(4, rng), 2, 2)
    rep = recommend(u)
    assert rep.applicable_protocol is ProtocolId.TELEPORT
    assert abs(rep.ebits - 2) < 1e-12 and abs(rep.cbits - 4) < 1e-12


def test_recommend_rank3_controlled_unitary():
    rep = recommend(fixtures.example1())
    assert abs(rep.ebits - math.log2(6)) < 1e-12
    assert rep.applicable_protocol is ProtocolId.CT
    assert "rank3-controlled-levels" in {a.source for a in rep.alternatives}
