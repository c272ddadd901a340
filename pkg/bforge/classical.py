"""Bipartite classical reversible maps, written as local reversible gates on each
party plus nonlocal CNOTs across the cut.

Bits are listed most significant first and A's bits come before B's. Each party
owns a register of its data bits followed by its ancilla bits, and every
ancilla starts at 0.
"""
import logging
from typing import Callable, Dict, Iterable, List, NamedTuple, Sequence, Tuple, Union

from .costs import bound_classical, ceil_log2
from .enums import Party, Regime
from .errors import DimensionMismatch, InputError, InvalidInput, SynthesisError
from .linalg import BipartiteOp, schmidt_rank
from .protocols import loose_maps, permutation_tables
from .util import DEFAULT_TOL, _fmt_repr

LOOSE_EXCHANGE = "loose-exchange"
TYPE_LABELS = "type-labels"
LOOSE_ROUND_TRIP = "loose-round-trip"


def _bits(value: int, width: int) -> str:
    return format(value, f"0{width}b") if width else ""


class ReversibleMap:
    """Bijection on ``n_a + n_b`` bits given by its truth table"""

    n_a: int
    n_b: int
    table: Tuple[int, ...]

    def __init__(self, n_a: int, n_b: int, table: Sequence[int]) -> None:
        if n_a < 0 or n_b < 0:
            raise InvalidInput(f"bit counts must be non-negative, got {n_a}, {n_b}")
        size = 1 << (n_a + n_b)
        if len(table) != size:
            raise DimensionMismatch(size, len(table))
        table = tuple(int(x) for x in table)
        if sorted(table) != list(range(size)):
            raise InvalidInput("truth table is not a bijection")
        self.n_a = n_a
        self.n_b = n_b
        self.table = table

    @classmethod
    def from_function(
        cls, n_a: int, n_b: int, func: Callable[[int, int], Tuple[int, int]]
    ) -> "ReversibleMap":
        table = []
        for a in range(1 << n_a):
            for b in range(1 << n_b):
                a2, b2 = func(a, b)
                table.append((a2 << n_b) | b2)
        return cls(n_a, n_b, table)

    @property
    def dA(self) -> int:
        return 1 << self.n_a

    @property
    def dB(self) -> int:
        return 1 << self.n_b

    @property
    def n_bits(self) -> int:
        return self.n_a + self.n_b

    def __call__(self, a: int, b: int) -> Tuple[int, int]:
        out = self.table[(a << self.n_b) | b]
        return out >> self.n_b, out & (self.dB - 1)

    def as_operator(self) -> BipartiteOp:
        return BipartiteOp.from_perm(self.dA, self.dB, enumerate(self.table))

    def __repr__(self) -> str:
        return f"<ReversibleMap n_a={self.n_a} n_b={self.n_b}>"


def classical_schmidt_rank(m: ReversibleMap, tol: float = DEFAULT_TOL.rank) -> int:
    return schmidt_rank(m.as_operator(), tol)


def table_from_text(text: str, n_a: int, n_b: int) -> ReversibleMap:
    """Parse ``<in-bits> <out-bits>`` lines; blank lines and ``#`` comments are skipped"""
    width = n_a + n_b
    table: Dict[int, int] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2 or any(len(p) != width or set(p) - {"0", "1"} for p in parts):
            raise InputError("truth table", f"line {lineno}: expected two {width}-bit words")
        src, dst = int(parts[0], 2), int(parts[1], 2)
        if src in table:
            raise InputError("truth table", f"line {lineno}: input {parts[0]} repeated")
        table[src] = dst
    if len(table) != 1 << width:
        raise InputError("truth table", f"{len(table)} of {1 << width} inputs listed")
    return ReversibleMap(n_a, n_b, [table[x] for x in range(1 << width)])


def table_to_text(m: ReversibleMap) -> str:
    return "\n".join(f"{_bits(x, m.n_bits)} {_bits(y, m.n_bits)}" for x, y in enumerate(m.table))


class LocalGate(NamedTuple):
    party: Party
    bits: Tuple[int, ...]
    mapping: Tuple[int, ...]
    label: str

    def as_dict(self) -> dict:
        return {
            "kind": "local",
            "party": str(self.party),
            "bits": list(self.bits),
            "label": self.label,
        }


class NonlocalCnot(NamedTuple):
    control: Party
    control_bit: int
    target_bit: int

    @property
    def target(self) -> Party:
        return self.control.other

    def as_dict(self) -> dict:
        return {
            "kind": "cnot",
            "control": [str(self.control), self.control_bit],
            "target": [str(self.target), self.target_bit],
        }


Gate = Union[LocalGate, NonlocalCnot]


class CnotSynthesis(NamedTuple):
    map: ReversibleMap
    regime: Regime
    construction: str
    widths: Dict[Party, int]
    gates: List[Gate]

    @property
    def nonlocal_count(self) -> int:
        return sum(isinstance(g, NonlocalCnot) for g in self.gates)

    @property
    def ancilla_spec(self) -> Dict[Party, int]:
        data = {Party.ALICE: self.map.n_a, Party.BOB: self.map.n_b}
        return {p: self.widths[p] - data[p] for p in data}

    def as_dict(self) -> dict:
        return {
            "regime": str(self.regime),
            "construction": self.construction,
            "nonlocal_count": self.nonlocal_count,
            "ancillas": {str(p): n for p, n in self.ancilla_spec.items()},
            "gates": [g.as_dict() for g in self.gates],
        }

    def __repr__(self) -> str:
        return _fmt_repr(
            "CnotSynthesis",
            {
                "regime": self.regime,
                "construction": self.construction,
                "cnots": self.nonlocal_count,
                "gates": len(self.gates),
            },
        )


class _Builder:
    def __init__(self, m: ReversibleMap, regime: Regime) -> None:
        self.map = m
        self.regime = regime
        self.widths = {Party.ALICE: m.n_a, Party.BOB: m.n_b}
        self.gates: List[Gate] = []

    def data(self, party: Party) -> Tuple[int, ...]:
        return tuple(range(self.map.n_a if party is Party.ALICE else self.map.n_b))

    def alloc(self, party: Party, width: int) -> Tuple[int, ...]:
        start = self.widths[party]
        self.widths[party] += width
        return tuple(range(start, start + width))

    def permute(
        self, party: Party, bits: Sequence[int], func: Callable[[int], int], label: str
    ) -> None:
        if not bits:
            return
        mapping = tuple(func(v) for v in range(1 << len(bits)))
        if sorted(mapping) != list(range(len(mapping))):
            raise SynthesisError(self.regime, "", msg=f"local gate {label} is not reversible")
        self.gates.append(LocalGate(party, tuple(bits), mapping, label))

    def xor_into(
        self,
        party: Party,
        src: Sequence[int],
        dst: Sequence[int],
        func: Callable[[int], int],
        label: str,
    ) -> None:
        """dst ^= func(src); always reversible"""
        if not dst:
            return
        width = len(dst)
        mask = (1 << width) - 1

        def step(v: int) -> int:
            x, y = v >> width, v & mask
            return (x << width) | (y ^ (func(x) & mask))

        self.permute(party, tuple(src) + tuple(dst), step, label)

    def swap(self, party: Party, left: Sequence[int], right: Sequence[int], label: str) -> None:
        width = len(right)
        mask = (1 << width) - 1

        def step(v: int) -> int:
            return ((v & mask) << width) | v >> width

        self.permute(party, tuple(left) + tuple(right), step, label)

    def copy(self, control: Party, src: Sequence[int], dst: Sequence[int]) -> None:
        for s, d in zip(src, dst):
            self.gates.append(NonlocalCnot(control, s, d))

    def build(self, construction: str) -> CnotSynthesis:
        return CnotSynthesis(self.map, self.regime, construction, dict(self.widths), self.gates)


def _or_zero(table: Sequence, index: int, default=0):
    return table[index] if index < len(table) else default


def _loose_exchange(m: ReversibleMap, op: BipartiteOp, tol: float) -> CnotSynthesis:
    """Each side sends its loose type and computes its output next to a copy of the input"""
    bld = _Builder(m, Regime.NO_RESTORE)
    type_a, type_b, a_maps, b_maps = loose_maps(op, tol)
    wa, wb = ceil_log2(max(type_a) + 1), ceil_log2(max(type_b) + 1)
    da, db = bld.data(Party.ALICE), bld.data(Party.BOB)
    ta, tb_copy = bld.alloc(Party.ALICE, wa), bld.alloc(Party.ALICE, wb)
    tb, ta_copy = bld.alloc(Party.BOB, wb), bld.alloc(Party.BOB, wa)
    out_a, out_b = bld.alloc(Party.ALICE, m.n_a), bld.alloc(Party.BOB, m.n_b)

    bld.xor_into(Party.ALICE, da, ta, lambda a: type_a[a], "type A")
    bld.xor_into(Party.BOB, db, tb, lambda b: type_b[b], "type B")
    bld.copy(Party.ALICE, ta, ta_copy)
    bld.copy(Party.BOB, tb, tb_copy)
    bld.xor_into(
        Party.ALICE,
        da + tb_copy,
        out_a,
        lambda v: int(_or_zero(a_maps, v & ((1 << wb) - 1), [0] * m.dA)[v >> wb]),
        "output A",
    )
    bld.xor_into(
        Party.BOB,
        db + ta_copy,
        out_b,
        lambda v: int(_or_zero(b_maps, v & ((1 << wa) - 1), [0] * m.dB)[v >> wa]),
        "output B",
    )
    bld.swap(Party.ALICE, da, out_a, "keep A input")
    bld.swap(Party.BOB, db, out_b, "keep B input")
    return bld.build(LOOSE_EXCHANGE)


def _loose_round_trip(m: ReversibleMap, op: BipartiteOp, tol: float) -> CnotSynthesis:
    """Loose types forward with the map, then back with its inverse to clear the inputs"""
    bld = _Builder(m, Regime.RESTORE)
    da, db = bld.data(Party.ALICE), bld.data(Party.BOB)
    out_a, out_b = bld.alloc(Party.ALICE, m.n_a), bld.alloc(Party.BOB, m.n_b)
    stages = [(op, da, db, out_a, out_b), (op.dagger(), out_a, out_b, da, db)]
    for stage, (u, src_a, src_b, dst_a, dst_b) in enumerate(stages):
        type_a, type_b, a_maps, b_maps = loose_maps(u, tol)
        wa, wb = ceil_log2(max(type_a) + 1), ceil_log2(max(type_b) + 1)
        ta, tb_copy = bld.alloc(Party.ALICE, wa), bld.alloc(Party.ALICE, wb)
        tb, ta_copy = bld.alloc(Party.BOB, wb), bld.alloc(Party.BOB, wa)

        def mark_a(a: int, type_a=type_a) -> int:
            return type_a[a]

        def mark_b(b: int, type_b=type_b) -> int:
            return type_b[b]

        def out_alice(v: int, a_maps=a_maps, wb=wb) -> int:
            return int(_or_zero(a_maps, v & ((1 << wb) - 1), [0] * m.dA)[v >> wb])

        def out_bob(v: int, b_maps=b_maps, wa=wa) -> int:
            return int(_or_zero(b_maps, v & ((1 << wa) - 1), [0] * m.dB)[v >> wa])

        bld.xor_into(Party.ALICE, src_a, ta, mark_a, f"type A {stage}")
        bld.xor_into(Party.BOB, src_b, tb, mark_b, f"type B {stage}")
        bld.copy(Party.ALICE, ta, ta_copy)
        bld.copy(Party.BOB, tb, tb_copy)
        bld.xor_into(Party.ALICE, src_a + tb_copy, dst_a, out_alice, f"output A {stage}")
        bld.xor_into(Party.BOB, src_b + ta_copy, dst_b, out_bob, f"output B {stage}")
        bld.copy(Party.ALICE, ta, ta_copy)
        bld.copy(Party.BOB, tb, tb_copy)
        bld.xor_into(Party.ALICE, src_a, ta, mark_a, f"untype A {stage}")
        bld.xor_into(Party.BOB, src_b, tb, mark_b, f"untype B {stage}")
    bld.swap(Party.ALICE, da, out_a, "move A output")
    bld.swap(Party.BOB, db, out_b, "move B output")
    return bld.build(LOOSE_ROUND_TRIP)


def _complete(partial: Dict[int, int], size: int) -> List[int]:
    free_in = [i for i in range(size) if i not in partial]
    used = set(partial.values())
    free_out = [i for i in range(size) if i not in used]
    mapping = dict(partial)
    mapping.update(zip(free_in, free_out))
    return [mapping[i] for i in range(size)]


def _type_labels(m: ReversibleMap, op: BipartiteOp, tol: float) -> CnotSynthesis:
    """Input type of A to Bob, a block label back to Alice, then the output type of B
    to Alice for erasure; every transfer is undone with a second pass of CNOTs
    """
    bld = _Builder(m, Regime.RESTORE)
    tables = permutation_tables(op, tol)
    w1, w2, w3 = ceil_log2(tables.d1), ceil_log2(tables.width), ceil_log2(tables.d3)
    da, db = bld.data(Party.ALICE), bld.data(Party.BOB)
    ta = bld.alloc(Party.ALICE, w1)
    fa = bld.alloc(Party.ALICE, w2)
    ha = bld.alloc(Party.ALICE, w3)
    e = bld.alloc(Party.BOB, w1)
    fo = bld.alloc(Party.BOB, w2)
    h = bld.alloc(Party.BOB, w3)

    bld.xor_into(Party.ALICE, da, ta, lambda a: tables.type_of[a], "input type")
    bld.copy(Party.ALICE, ta, e)

    # Bob: (t, 0, b) -> (t, f, b'); the label field and B together
    bob_maps = [
        _complete({b: (f << m.n_b) | row for b, (f, row) in table.items()}, 1 << (w2 + m.n_b))
        for table in tables.bob
    ]

    def bob_step(v: int) -> int:
        t, rest = v >> (w2 + m.n_b), v & ((1 << (w2 + m.n_b)) - 1)
        if t >= len(bob_maps):
            return v
        return (t << (w2 + m.n_b)) | bob_maps[t][rest]

    bld.permute(Party.BOB, e + fo + db, bob_step, "label")
    bld.copy(Party.BOB, fo, fa)
    bld.copy(Party.ALICE, fa, fo)

    alice_maps = {key: _complete(partial, m.dA) for key, partial in tables.alice.items()}

    def alice_step(v: int) -> int:
        t, f, a = v >> (w2 + m.n_a), (v >> m.n_a) & ((1 << w2) - 1), v & (m.dA - 1)
        mapping = alice_maps.get((t, f))
        return v if mapping is None else (v & ~(m.dA - 1)) | mapping[a]

    bld.permute(Party.ALICE, ta + fa + da, alice_step, "row")
    bld.copy(Party.ALICE, ta, e)

    bld.xor_into(Party.BOB, db, h, lambda b: tables.hclass[b], "output type")
    bld.copy(Party.BOB, h, ha)

    def unlabel(v: int) -> int:
        r, hv = v >> w3, v & ((1 << w3) - 1)
        t, f = tables.erase.get((r, hv), (0, 0))
        return (t << w2) | f

    bld.xor_into(Party.ALICE, da + ha, ta + fa, unlabel, "erase labels")
    bld.copy(Party.BOB, h, ha)
    bld.xor_into(Party.BOB, db, h, lambda b: tables.hclass[b], "erase output type")
    return bld.build(TYPE_LABELS)


def _registers(s: CnotSynthesis, a: int, b: int) -> Dict[Party, List[int]]:
    m = s.map
    regs = {p: [0] * w for p, w in s.widths.items()}
    regs[Party.ALICE][: m.n_a] = [int(c) for c in _bits(a, m.n_a)]
    regs[Party.BOB][: m.n_b] = [int(c) for c in _bits(b, m.n_b)]
    for gate in s.gates:
        if isinstance(gate, NonlocalCnot):
            regs[gate.target][gate.target_bit] ^= regs[gate.control][gate.control_bit]
            continue
        reg = regs[gate.party]
        value = 0
        for bit in gate.bits:
            value = (value << 1) | reg[bit]
        value = gate.mapping[value]
        for bit in reversed(gate.bits):
            reg[bit] = value & 1
            value >>= 1
    return regs


def _read(reg: Iterable[int]) -> int:
    value = 0
    for bit in reg:
        value = (value << 1) | bit
    return value


def replay(s: CnotSynthesis, bits: str) -> str:
    """Run the circuit on one input word and return the output word"""
    m = s.map
    if len(bits) != m.n_bits or set(bits) - {"0", "1"}:
        raise DimensionMismatch(m.n_bits, len(bits), msg=f"input {bits!r} is not {m.n_bits} bits")
    x = int(bits, 2) if bits else 0
    regs = _registers(s, x >> m.n_b, x & (m.dB - 1))
    a = _read(regs[Party.ALICE][: m.n_a])
    b = _read(regs[Party.BOB][: m.n_b])
    return _bits((a << m.n_b) | b, m.n_bits)


def check_synthesis(s: CnotSynthesis) -> None:
    """Replay every input; in the restore regime every ancilla must come back to 0"""
    m = s.map
    for x, expected in enumerate(m.table):
        regs = _registers(s, x >> m.n_b, x & (m.dB - 1))
        a = _read(regs[Party.ALICE][: m.n_a])
        b = _read(regs[Party.BOB][: m.n_b])
        if (a << m.n_b) | b != expected:
            raise SynthesisError(s.regime, _bits(x, m.n_bits))
        if s.regime is Regime.RESTORE and (
            any(regs[Party.ALICE][m.n_a :]) or any(regs[Party.BOB][m.n_b :])
        ):
            raise SynthesisError(
                s.regime, _bits(x, m.n_bits), msg=f"ancillas left dirty on input {x}"
            )


def quantum_replay(s: CnotSynthesis) -> BipartiteOp:
    """The circuit as a permutation unitary on the data qubits, ancillas starting at 0"""
    if s.regime is not Regime.RESTORE:
        raise InvalidInput("only a circuit that restores its ancillas acts as a unitary")
    m = s.map
    entries = []
    for x in range(1 << m.n_bits):
        regs = _registers(s, x >> m.n_b, x & (m.dB - 1))
        if any(regs[Party.ALICE][m.n_a :]) or any(regs[Party.BOB][m.n_b :]):
            raise SynthesisError(s.regime, _bits(x, m.n_bits), msg="ancillas left dirty")
        y = (_read(regs[Party.ALICE][: m.n_a]) << m.n_b) | _read(regs[Party.BOB][: m.n_b])
        entries.append((x, y))
    return BipartiteOp.from_perm(m.dA, m.dB, entries)


def synthesize(
    m: ReversibleMap, regime: Regime = Regime.RESTORE, tol: float = DEFAULT_TOL.rank
) -> CnotSynthesis:
    op = m.as_operator()
    if regime is Regime.NO_RESTORE:
        result = _loose_exchange(m, op, tol)
    else:
        candidates = [_type_labels(m, op, tol), _loose_round_trip(m, op, tol)]
        result = min(candidates, key=lambda s: s.nonlocal_count)
    check_synthesis(result)
    rank = schmidt_rank(op, tol)
    bound = bound_classical(rank, regime is Regime.RESTORE)
    if result.nonlocal_count > bound:
        logging.warning(f"synthesize: {result.nonlocal_count} CNOTs exceeds the bound {bound}")
    logging.debug(f"synthesize: rank {rank}, {result}")
    return result
