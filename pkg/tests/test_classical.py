import numpy as np
import pytest

from bforge import fixtures
from bforge.classical import (
    NonlocalCnot,
    ReversibleMap,
    check_synthesis,
    classical_schmidt_rank,
    quantum_replay,
    replay,
    synthesize,
    table_from_text,
    table_to_text,
)
from bforge.costs import bound_classical
from bforge.enums import Party, Regime
from bforge.errors import DimensionMismatch, InputError, InvalidInput, SynthesisError

IDENTITY = ReversibleMap.from_function(2, 2, lambda a, b: (a, b))
CNOT = ReversibleMap.from_function(1, 1, lambda a, b: (a, a ^ b))
DCNOT = ReversibleMap.from_function(1, 1, lambda a, b: (b, a ^ b))
SWAP = ReversibleMap.from_function(1, 1, lambda a, b: (b, a))
# Toffoli with both controls on A
TOFFOLI = ReversibleMap.from_function(2, 1, lambda a, b: (a, b ^ (a == 3)))


def _random_map(n_a, n_b, seed):
    rng = np.random.default_rng(seed)
    return ReversibleMap(n_a, n_b, rng.permutation(1 << (n_a + n_b)))


def _maps():
    return [
        IDENTITY,
        CNOT,
        DCNOT,
        SWAP,
        TOFFOLI,
        _random_map(1, 2, 0),
        _random_map(2, 2, 1),
        _random_map(2, 2, 2),
        _random_map(3, 2, 3),
    ]


@pytest.mark.parametrize("m,rank", [(IDENTITY, 1), (CNOT, 2), (DCNOT, 4), (SWAP, 4)])
def test_classical_schmidt_rank(m, rank):
    assert classical_schmidt_rank(m) == rank


def test_operator_matches_fixtures():
    assert np.abs(DCNOT.as_operator().matrix - fixtures.dcnot().matrix).max() < 1e-12
    assert np.abs(CNOT.as_operator().matrix - fixtures.cnot().matrix).max() < 1e-12


def test_map_validation():
    with pytest.raises(InvalidInput):
        ReversibleMap(1, 1, [0, 0, 1, 2])
    with pytest.raises(DimensionMismatch):
        ReversibleMap(1, 1, [0, 1, 2])


@pytest.mark.parametrize("regime", [Regime.RESTORE, Regime.NO_RESTORE])
def test_identity_needs_no_cnots(regime):
    assert synthesize(IDENTITY, regime).nonlocal_count == 0


def test_cnot_without_restoring():
    s = synthesize(CNOT, Regime.NO_RESTORE)
    assert s.nonlocal_count == 1
    assert replay(s, "10") == "11"
    assert replay(s, "01") == "01"


def test_dcnot_counts():
    loose = synthesize(DCNOT, Regime.NO_RESTORE)
    assert loose.nonlocal_count == 2
    restored = synthesize(DCNOT, Regime.RESTORE)
    assert restored.nonlocal_count <= 24
    assert loose.nonlocal_count <= restored.nonlocal_count
    table = {"00": "00", "01": "11", "10": "01", "11": "10"}
    for s in (loose, restored):
        assert {x: replay(s, x) for x in table} == table


def test_replay_width_is_checked():
    s = synthesize(CNOT, Regime.RESTORE)
    with pytest.raises(DimensionMismatch):
        replay(s, "101")
    with pytest.raises(DimensionMismatch):
        replay(s, "1x")
    assert replay(synthesize(IDENTITY), "1010") == "1010"


@pytest.mark.parametrize("m", _maps())
def test_synthesis_stays_within_bounds(m):
    rank = classical_schmidt_rank(m)
    loose = synthesize(m, Regime.NO_RESTORE)
    restored = synthesize(m, Regime.RESTORE)
    assert loose.nonlocal_count <= bound_classical(rank, restore_ancillas=False)
    assert restored.nonlocal_count <= bound_classical(rank, restore_ancillas=True)
    assert loose.nonlocal_count == sum(isinstance(g, NonlocalCnot) for g in loose.gates)


@pytest.mark.parametrize("m", _maps())
def test_restored_ancillas_come_back_clean(m):
    s = synthesize(m, Regime.RESTORE)
    # check_synthesis covers every input and every ancilla bit
    check_synthesis(s)
    op = quantum_replay(s)
    assert np.abs(op.matrix - m.as_operator().matrix).max() < 1e-12


def test_no_restore_leaves_ancillas_dirty():
    s = synthesize(DCNOT, Regime.NO_RESTORE)
    assert s.ancilla_spec[Party.ALICE] > 0
    with pytest.raises(InvalidInput):
        quantum_replay(s)


def test_tampered_circuit_is_caught():
    s = synthesize(DCNOT, Regime.RESTORE)
    broken = s._replace(gates=s.gates[:-1])
    with pytest.raises(SynthesisError):
        check_synthesis(broken)


def test_table_text_round_trip():
    text = table_to_text(TOFFOLI)
    assert text.splitlines()[-1] == "111 110"
    parsed = table_from_text("# toffoli\n" + text + "\n", 2, 1)
    assert parsed.table == TOFFOLI.table


@pytest.mark.parametrize(
    "text",
    ["00 01\n01 00\n10 10", "00 01\n00 00\n10 10\n11 11", "0 1\n1 0", "00 0a\n01 00\n10 10\n11 11"],
)
def test_table_text_errors(text):
    with pytest.raises(InputError):
        table_from_text(text, 1, 1)


def test_table_text_rejects_non_bijection():
    with pytest.raises(InvalidInput):
        table_from_text("00 00\n01 00\n10 10\n11 11", 1, 1)


def test_synthesis_as_dict():
    out = synthesize(CNOT, Regime.RESTORE).as_dict()
    assert out["regime"] == "restore"
    assert out["nonlocal_count"] == sum(g["kind"] == "cnot" for g in out["gates"])


@pytest.mark.parametrize("m", [CNOT, DCNOT, SWAP, TOFFOLI])
def test_restoring_never_costs_less(m):
    loose = synthesize(m, Regime.NO_RESTORE)
    assert loose.nonlocal_count <= synthesize(m, Regime.RESTORE).nonlocal_count
