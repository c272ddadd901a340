"""A small LOCC machine with two parties, named registers and branching measurements.

The state is kept as a tensor whose leading axes are the live registers and whose
last axis runs over the computational basis of the data input ``A (x) B``, so one
run follows every input column at once. A measurement either splits the run into
one branch per outcome or, when sampling, keeps a single seeded branch.
"""
import logging
import math
from typing import Callable, Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from .enums import Mode, Party, ProtocolId, Role
from .errors import DimensionMismatch, LedgerMismatch, LocalityViolation, ProtocolError
from .linalg import BipartiteOp, Matrix, choi_distance, choi_of_operator, fourier
from .util import DEFAULT_TOL, SimConfig, _fmt_repr

Gate = Union[Matrix, Callable[[Dict[str, int]], Matrix]]


class Register(NamedTuple):
    name: str
    party: Party
    dim: int
    role: Role

    def __repr__(self) -> str:
        return _fmt_repr("Register", self._asdict())


class Event(NamedTuple):
    kind: str
    party: Optional[Party]
    detail: str

    def __str__(self) -> str:
        who = f"{self.party}: " if self.party is not None else ""
        return f"[{self.kind}] {who}{self.detail}"


class _Branch:
    __slots__ = ("outcomes", "tensor", "chance")

    def __init__(self, outcomes: Dict[str, int], tensor: np.ndarray, chance: float = 1.0) -> None:
        self.outcomes = outcomes
        self.tensor = tensor
        # probability of the recorded outcomes
        self.chance = chance


class BranchResult(NamedTuple):
    """``probability`` is the weight kept with every ancilla in 0; ``outcome_probability``
    is the chance of observing ``outcomes`` at all, which is also the sampling probability
    """

    outcomes: Dict[str, int]
    probability: float
    operator: Matrix
    ancilla_residual: float
    outcome_probability: float = 1.0

    def __repr__(self) -> str:
        return _fmt_repr(
            "BranchResult",
            {"outcomes": self.outcomes, "probability": round(self.probability, 12)},
        )


class ProtocolTrace(NamedTuple):
    protocol: ProtocolId
    dA: int
    dB: int
    ebits: float
    cbits: float
    events: List[Event]
    branches: List[BranchResult]
    mode: Mode

    @property
    def ancilla_residual(self) -> float:
        return max((b.ancilla_residual for b in self.branches), default=0.0)

    @property
    def total_probability(self) -> float:
        return float(sum(b.probability for b in self.branches))

    def as_dict(self) -> dict:
        return {
            "protocol": str(self.protocol),
            "ebits": self.ebits,
            "cbits": self.cbits,
            "branches": len(self.branches),
            "mode": str(self.mode),
            "events": [str(e) for e in self.events],
        }

    def __repr__(self) -> str:
        return _fmt_repr(
            "ProtocolTrace",
            {
                "protocol": self.protocol,
                "ebits": round(self.ebits, 12),
                "cbits": round(self.cbits, 12),
                "branches": len(self.branches),
            },
        )


class ChannelCheck(NamedTuple):
    max_distance: float
    ancilla_residual: float
    total_probability: float
    branches: int
    passed: bool

    def as_dict(self) -> dict:
        return self._asdict()

    def __repr__(self) -> str:
        return _fmt_repr("ChannelCheck", self._asdict())


def _log2(n: int) -> float:
    return math.log2(n) if n > 1 else 0.0


class LoccMachine:
    """Alice holds data register ``A`` and Bob holds ``B``; everything else is added by the run"""

    def __init__(
        self,
        dA: int,
        dB: int,
        protocol: ProtocolId,
        config: SimConfig = SimConfig(),
        gate_tol: float = DEFAULT_TOL.unitary,
    ) -> None:
        self.dA = dA
        self.dB = dB
        self.protocol = ProtocolId(protocol)
        self.config = config
        self.gate_tol = gate_tol
        self.registers: List[Register] = [
            Register("A", Party.ALICE, dA, Role.DATA),
            Register("B", Party.BOB, dB, Role.DATA),
        ]
        n = dA * dB
        self.branches = [_Branch({}, np.eye(n, dtype=complex).reshape(dA, dB, n))]
        self.known: Dict[Party, set] = {Party.ALICE: set(), Party.BOB: set()}
        self.alphabets: Dict[str, int] = {}
        self.ebits = 0.0
        self.cbits = 0.0
        self.events: List[Event] = []
        self._rng = np.random.default_rng(config.seed)

    def __repr__(self) -> str:
        return _fmt_repr(
            "LoccMachine",
            {
                "protocol": self.protocol,
                "registers": len(self.registers),
                "branches": len(self.branches),
            },
        )

    def _log(self, kind: str, party: Optional[Party], detail: str) -> None:
        event = Event(kind, party, detail)
        self.events.append(event)
        logging.debug(f"{self.protocol}: {event}")

    def _index(self, name: str) -> int:
        for i, reg in enumerate(self.registers):
            if reg.name == name:
                return i
        raise ProtocolError(self.protocol, f"lookup of {name}", msg=f"no register named {name}")

    def register(self, name: str) -> Register:
        return self.registers[self._index(name)]

    def owner(self, name: str) -> Party:
        return self.register(name).party

    def _new_axis(self, name: str, party: Party, dim: int, role: Role) -> None:
        if any(reg.name == name for reg in self.registers):
            raise ProtocolError(self.protocol, f"add {name}", msg=f"register {name} exists")
        self.registers.append(Register(name, Party(party), dim, Role(role)))

    def add_register(
        self,
        name: str,
        party: Party,
        dim: int,
        role: Role = Role.ANCILLA,
        state: Optional[Sequence[complex]] = None,
    ) -> None:
        """Local ancilla, in ``|0>`` unless a normalized ``state`` is given"""
        vec = np.zeros(dim, dtype=complex)
        if state is None:
            vec[0] = 1.0
        else:
            vec = np.asarray(state, dtype=complex)
            if vec.shape != (dim,):
                raise DimensionMismatch(dim, vec.shape)
        self._new_axis(name, party, dim, role)
        for br in self.branches:
            br.tensor = np.moveaxis(np.multiply.outer(br.tensor, vec), -1, -2)
        self._log("prepare", Party(party), f"{name} ({dim} levels)")

    def share(self, name_alice: str, name_bob: str, rank: int) -> None:
        """Maximally entangled pair of the given Schmidt rank, one half per party"""
        pair = np.eye(rank, dtype=complex) / np.sqrt(rank)
        self._new_axis(name_alice, Party.ALICE, rank, Role.RESOURCE)
        self._new_axis(name_bob, Party.BOB, rank, Role.RESOURCE)
        for br in self.branches:
            br.tensor = np.moveaxis(np.multiply.outer(br.tensor, pair), -3, -1)
        self.ebits += _log2(rank)
        self._log("share", None, f"{name_alice}~{name_bob} rank {rank}")

    def _check_local(self, party: Party, names: Iterable[str], uses: Iterable[str]) -> None:
        for name in names:
            owner = self.owner(name)
            if owner is not party:
                raise LocalityViolation(
                    self.protocol, "apply", msg=f"{party} touched {name} held by {owner}"
                )
        for label in uses:
            if label not in self.known[party]:
                raise LocalityViolation(
                    self.protocol, "apply", msg=f"{party} used outcome {label} it never received"
                )

    def apply(
        self, party: Party, names: Sequence[str], gate: Gate, uses: Sequence[str] = ()
    ) -> None:
        """Local unitary on ``names`` (kron order), possibly chosen from earlier outcomes"""
        party = Party(party)
        names = list(names)
        self._check_local(party, names, uses)
        axes = [self._index(n) for n in names]
        dims = [self.registers[a].dim for a in axes]
        size = int(np.prod(dims))
        for br in self.branches:
            mat = gate({k: br.outcomes[k] for k in uses}) if callable(gate) else gate
            mat = np.asarray(mat, dtype=complex)
            if mat.shape != (size, size):
                raise DimensionMismatch((size, size), mat.shape)
            if np.linalg.norm(mat.conj().T @ mat - np.eye(size)) > self.gate_tol * np.sqrt(size):
                raise ProtocolError(self.protocol, f"gate on {names}", msg="gate is not unitary")
            front = np.moveaxis(br.tensor, axes, list(range(len(axes))))
            shape = front.shape
            front = (mat @ front.reshape(size, -1)).reshape(shape)
            br.tensor = np.moveaxis(front, list(range(len(axes))), axes)
        self._log("gate", party, ",".join(names))

    def measure(self, party: Party, name: str, fourier_basis: bool = False) -> None:
        """Measure and discard ``name``; the outcome is recorded under the same name"""
        party = Party(party)
        if fourier_basis:
            self.apply(party, [name], fourier(self.register(name).dim))
        self._check_local(party, [name], ())
        axis = self._index(name)
        dim = self.registers[axis].dim
        branches = []
        for br in self.branches:
            slices = [np.take(br.tensor, k, axis=axis) for k in range(dim)]
            weights = np.array([np.vdot(s, s).real for s in slices])
            total = weights.sum()
            if self.config.mode is Mode.SAMPLE:
                pick = int(self._rng.choice(dim, p=weights / total)) if total > 0 else 0
                options = [pick]
            else:
                options = [k for k in range(dim) if weights[k] > 1e-24]
            for k in options:
                chance = br.chance * weights[k] / total if total > 0 else 0.0
                branches.append(_Branch({**br.outcomes, name: k}, slices[k], chance))
        if not branches:
            raise ProtocolError(self.protocol, f"measure {name}", msg="every branch vanished")
        self.branches = branches
        del self.registers[axis]
        self.known[party].add(name)
        self.alphabets[name] = dim
        basis = "Fourier" if fourier_basis else "computational"
        self._log("measure", party, f"{name} in the {basis} basis")

    def send(self, label: str, to: Party) -> None:
        to = Party(to)
        sender = to.other
        if label not in self.known[sender]:
            raise LocalityViolation(
                self.protocol, "send", msg=f"{sender} cannot send unknown outcome {label}"
            )
        self.known[to].add(label)
        self.cbits += _log2(self.alphabets[label])
        self._log("send", sender, f"{label} ({self.alphabets[label]} values) to {to}")

    def teleport(self, name: str, to: Party) -> None:
        """Move a register across, charging the usual teleportation cost"""
        to = Party(to)
        idx = self._index(name)
        reg = self.registers[idx]
        if reg.party is to:
            raise ProtocolError(self.protocol, f"teleport {name}", msg=f"{name} is already there")
        self.registers[idx] = reg._replace(party=to)
        self.ebits += _log2(reg.dim)
        self.cbits += 2 * _log2(reg.dim)
        self._log("teleport", reg.party, f"{name} ({reg.dim} levels) to {to}")

    def finish(self, outputs: Tuple[str, str] = ("A", "B")) -> ProtocolTrace:
        """Close the run; every non-output register should be back in ``|0>``"""
        out_a, out_b = outputs
        if self.owner(out_a) is not Party.ALICE or self.owner(out_b) is not Party.BOB:
            raise LocalityViolation(self.protocol, "finish", msg="outputs on the wrong side")
        dims = (self.register(out_a).dim, self.register(out_b).dim)
        if dims != (self.dA, self.dB):
            raise DimensionMismatch((self.dA, self.dB), dims)
        order = [self._index(out_a), self._index(out_b)]
        rest = [i for i in range(len(self.registers)) if i not in order]
        n = self.dA * self.dB
        results = []
        for br in self.branches:
            tens = np.moveaxis(br.tensor, order + rest, list(range(len(order) + len(rest))))
            total = float(np.vdot(tens, tens).real)
            kept = tens[(slice(None), slice(None)) + (0,) * len(rest)]
            norm2 = float(np.vdot(kept, kept).real)
            residual = math.sqrt(max(total - norm2, 0.0) / total) if total > 0 else 0.0
            op = kept.reshape(n, n)
            scale = math.sqrt(n / norm2) if norm2 > 0 else 0.0
            results.append(
                BranchResult(dict(br.outcomes), norm2 / n, op * scale, residual, br.chance)
            )
        trace = ProtocolTrace(
            self.protocol,
            self.dA,
            self.dB,
            self.ebits,
            self.cbits,
            list(self.events),
            results,
            self.config.mode,
        )
        logging.debug(f"finish: {trace}")
        return trace


def verify_channel(
    trace: ProtocolTrace,
    target: Union[BipartiteOp, Matrix],
    tol: float = DEFAULT_TOL.channel,
) -> ChannelCheck:
    """Compare every branch with ``target`` on normalized Choi matrices"""
    mat = target.matrix if isinstance(target, BipartiteOp) else np.asarray(target, dtype=complex)
    n = mat.shape[0]
    want = choi_of_operator(mat) / n
    worst = 0.0
    for br in trace.branches:
        worst = max(worst, choi_distance(choi_of_operator(br.operator) / n, want))
    total = trace.total_probability
    passed = worst <= tol and trace.ancilla_residual <= tol
    if trace.mode is Mode.ENUMERATE:
        passed = passed and abs(total - 1.0) <= tol * 10
    check = ChannelCheck(worst, trace.ancilla_residual, total, len(trace.branches), passed)
    logging.debug(f"verify_channel: {check}")
    return check


def check_ledger(
    trace: ProtocolTrace, ebits: float, cbits: float, tol: float = 1e-9
) -> ProtocolTrace:
    if abs(trace.ebits - ebits) > tol or abs(trace.cbits - cbits) > tol:
        raise LedgerMismatch(trace.protocol, (ebits, cbits), (trace.ebits, trace.cbits))
    return trace
