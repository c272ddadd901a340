import math

import numpy as np
import pytest

from bforge import fixtures
from bforge.enums import Mode, Party, ProtocolId
from bforge.errors import DimensionMismatch, LedgerMismatch, LocalityViolation, ProtocolError
from bforge.linalg import BipartiteOp, shift, tensor
from bforge.locc import LoccMachine, check_ledger, verify_channel
from bforge.util import SimConfig


def test_idle_machine_is_identity():
    vm = LoccMachine(2, 3, ProtocolId.LOCAL)
    trace = vm.finish()
    assert len(trace.branches) == 1
    assert np.abs(trace.branches[0].operator - np.eye(6)).max() < 1e-12
    check = verify_channel(trace, fixtures.identity(2, 3))
    assert check.passed and check.max_distance < 1e-12
    assert trace.ebits == 0 and trace.cbits == 0


def test_local_gates_compose():
    x = shift(2)
    vm = LoccMachine(2, 2, ProtocolId.LOCAL)
    vm.apply(Party.ALICE, ["A"], x)
    vm.apply(Party.BOB, ["B"], x)
    trace = vm.finish()
    assert verify_channel(trace, BipartiteOp(tensor(x, x), 2, 2)).passed
    assert not verify_channel(trace, fixtures.cnot()).passed


def test_locality_is_enforced():
    vm = LoccMachine(2, 2, ProtocolId.LOCAL)
    with pytest.raises(LocalityViolation):
        vm.apply(Party.ALICE, ["B"], np.eye(2))
    with pytest.raises(LocalityViolation):
        vm.apply(Party.ALICE, ["A", "B"], np.eye(4))
    vm.share("x", "y", 2)
    vm.measure(Party.BOB, "y")
    with pytest.raises(LocalityViolation):
        vm.apply(Party.ALICE, ["x"], lambda o: shift(2, o["y"]), uses=["y"])
    with pytest.raises(LocalityViolation):
        vm.send("y", Party.BOB)
    vm.send("y", Party.ALICE)
    vm.apply(Party.ALICE, ["x"], lambda o: shift(2, o["y"]), uses=["y"])


def test_ledger_counts_resources_and_messages():
    vm = LoccMachine(2, 2, ProtocolId.CT)
    vm.share("x", "y", 4)
    vm.measure(Party.ALICE, "x")
    vm.send("x", Party.BOB)
    vm.measure(Party.BOB, "y")
    trace = vm.finish()
    assert trace.ebits == 2 and trace.cbits == 2
    assert [e.kind for e in trace.events] == ["share", "measure", "send", "measure"]
    check_ledger(trace, 2, 2)
    with pytest.raises(LedgerMismatch):
        check_ledger(trace, 1, 2)


def test_enumerate_and_sample():
    vm = LoccMachine(2, 2, ProtocolId.CT)
    vm.share("x", "y", 3)
    vm.measure(Party.ALICE, "x")
    vm.measure(Party.BOB, "y")
    trace = vm.finish()
    assert len(trace.branches) == 3
    assert abs(trace.total_probability - 1) < 1e-12
    assert all(b.outcomes["x"] == b.outcomes["y"] for b in trace.branches)
    assert all(abs(b.outcome_probability - 1 / 3) < 1e-12 for b in trace.branches)


@pytest.mark.parametrize("seed", range(8))
def test_sampled_outcomes_agree(seed):
    vm = LoccMachine(2, 2, ProtocolId.CT, SimConfig(mode=Mode.SAMPLE, seed=seed))
    vm.share("x", "y", 3)
    vm.measure(Party.ALICE, "x")
    vm.measure(Party.BOB, "y")
    trace = vm.finish()
    assert len(trace.branches) == 1
    branch = trace.branches[0]
    assert branch.outcomes["x"] == branch.outcomes["y"]
    assert branch.outcomes["x"] in (0, 1, 2)
    assert abs(branch.probability - 1 / 3) < 1e-12
    assert abs(branch.outcome_probability - 1 / 3) < 1e-12


def test_fourier_measurement_of_fresh_register():
    vm = LoccMachine(1, 1, ProtocolId.LOCAL)
    vm.add_register("z", Party.ALICE, 4)
    vm.measure(Party.ALICE, "z", fourier_basis=True)
    trace = vm.finish()
    assert sorted(b.outcomes["z"] for b in trace.branches) == [0, 1, 2, 3]
    assert all(abs(b.probability - 0.25) < 1e-12 for b in trace.branches)


def test_dirty_ancilla_fails_verification():
    vm = LoccMachine(2, 2, ProtocolId.LOCAL)
    vm.add_register("z", Party.BOB, 2)
    vm.apply(Party.BOB, ["z"], shift(2))
    trace = vm.finish()
    assert abs(trace.ancilla_residual - 1) < 1e-12
    assert not verify_channel(trace, fixtures.identity()).passed


def test_entangled_ancilla_is_caught():
    vm = LoccMachine(2, 2, ProtocolId.LOCAL)
    vm.add_register("z", Party.ALICE, 2)
    vm.apply(Party.ALICE, ["A", "z"], fixtures.cnot().matrix)
    trace = vm.finish()
    assert abs(trace.ancilla_residual - math.sqrt(0.5)) < 1e-12
    assert not verify_channel(trace, fixtures.identity()).passed


def test_teleport_moves_register():
    vm = LoccMachine(2, 3, ProtocolId.TELEPORT)
    vm.teleport("A", Party.BOB)
    assert vm.owner("A") is Party.BOB
    vm.apply(Party.BOB, ["A", "B"], np.eye(6))
    with pytest.raises(ProtocolError):
        vm.teleport("A", Party.BOB)
    vm.teleport("A", Party.ALICE)
    trace = vm.finish()
    assert trace.ebits == 2 and trace.cbits == 4


def test_bad_gates_and_registers():
    vm = LoccMachine(2, 2, ProtocolId.LOCAL)
    with pytest.raises(ProtocolError):
        vm.apply(Party.ALICE, ["A"], np.array([[1, 1], [0, 1]]))
    with pytest.raises(DimensionMismatch):
        vm.apply(Party.ALICE, ["A"], np.eye(3))
    with pytest.raises(ProtocolError):
        vm.add_register("A", Party.ALICE, 2)
    with pytest.raises(ProtocolError):
        vm.measure(Party.ALICE, "nope")
    with pytest.raises(DimensionMismatch):
        vm.add_register("w", Party.ALICE, 2, state=[1, 0, 0])


def test_finish_checks_outputs():
    vm = LoccMachine(2, 2, ProtocolId.LOCAL)
    vm.add_register("w", Party.ALICE, 3)
    with pytest.raises(DimensionMismatch):
        vm.finish(outputs=("w", "B"))
    with pytest.raises(LocalityViolation):
        vm.finish(outputs=("B", "A"))
