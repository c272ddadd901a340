"""LOCC protocols run on :class:`~bforge.locc.LoccMachine`.

Every runner returns the finished trace and, unless the config turns it off,
checks the entanglement and communication it used against the protocol's ledger.
"""
import logging
import math
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .enums import Party, ProtocolId, Role, Side
from .errors import (
    InvalidInput,
    LedgerMismatch,
    NotControlled,
    NotPermutation,
    ProtocolError,
    RankMismatch,
)
from .groups import Representation, dihedral_representation, solve_group_expansion
from .linalg import (
    BipartiteOp,
    Matrix,
    fourier,
    operator_schmidt,
    perm_matrix,
    projector,
    schmidt_rank,
    shift,
    tensor,
)
from .locc import LoccMachine, ProtocolTrace, check_ledger
from .structure import (
    ControlledForm,
    TwoLevelDecomposition,
    block_profile,
    detect_controlled,
    loose_type_partition,
    permutation_type_partitions,
    rank3_standard_form,
    two_level_decomposition,
)
from .util import DEFAULT_TOL, SimConfig

Terms = List[Tuple[Tuple[int, ...], Matrix]]


def _log2(n: int) -> float:
    return math.log2(n) if n > 1 else 0.0


def _ket(n: int, k: int) -> Matrix:
    return projector(n, [k])


def _phase(n: int, m: int, sign: int = -1) -> np.ndarray:
    return np.exp(sign * 2j * np.pi * m * np.arange(n) / n)


def _is_identity(mat: Matrix) -> bool:
    return np.allclose(mat, np.eye(mat.shape[0]), atol=1e-12)


def _local(vm: LoccMachine, party: Party, name: str, mat: Matrix) -> None:
    if not _is_identity(mat):
        vm.apply(party, [name], mat)


def _finish(
    vm: LoccMachine, ebits: float, cbits: float, config: SimConfig, outputs=("A", "B")
) -> ProtocolTrace:
    trace = vm.finish(outputs)
    if config.check_ledger:
        check_ledger(trace, ebits, cbits)
    logging.info(f"{trace.protocol}: {trace.ebits:.4f} ebits, {trace.cbits:.4f} cbits")
    return trace


def _complete_terms(form: ControlledForm, levels: Sequence[int]) -> Terms:
    """Terms whose supports partition ``levels``; stray levels join an identity term"""
    terms: Terms = [(tuple(sup), op) for sup, op in form.terms]
    covered = {i for sup, _ in terms for i in sup}
    stray = tuple(i for i in levels if i not in covered)
    if not stray:
        return terms
    for k, (sup, op) in enumerate(terms):
        if _is_identity(op):
            terms[k] = (tuple(sorted(sup + stray)), op)
            return terms
    return terms + [(stray, np.eye(form.target_dim, dtype=complex))]


def run_controlled(
    u: BipartiteOp,
    side: Optional[Side] = None,
    form: Optional[ControlledForm] = None,
    n_terms: Optional[int] = None,
    config: SimConfig = SimConfig(),
    tol: float = DEFAULT_TOL.rank,
) -> ProtocolTrace:
    """Controlled unitary ``sum_j P_j (x) V_j`` with one maximally entangled pair of rank N"""
    if form is None:
        sides = [Side(side)] if side is not None else [Side.A, Side.B]
        found = [f for f in (detect_controlled(u, s, tol) for s in sides) if f is not None]
        if not found:
            raise NotControlled(side or "A or B")
        form = min(found, key=lambda f: f.n_terms)
    if form.residual(u) > tol * max(1.0, np.sqrt(u.dim)):
        raise InvalidInput(f"{form} does not reproduce the operator")

    terms = _complete_terms(form, range(form.controller_dim))
    if n_terms is not None:
        if n_terms < len(terms):
            raise InvalidInput(f"cannot fit {len(terms)} terms into {n_terms}")
        eye = np.eye(form.target_dim, dtype=complex)
        terms = terms + [((), eye)] * (n_terms - len(terms))
    n = len(terms)
    padded = any(not sup for sup, _ in terms)
    protocol = ProtocolId.CT_EXT if padded else ProtocolId.CT

    ctrl = Party.ALICE if form.side is Side.A else Party.BOB
    other = ctrl.other
    data = {Party.ALICE: "A", Party.BOB: "B"}
    cd = form.controller_dim
    vm = LoccMachine(u.dA, u.dB, protocol, config)
    _local(vm, Party.ALICE, "A", form.pre[0])
    _local(vm, Party.BOB, "B", form.pre[1])

    names = {ctrl: "c", other: "t"}
    vm.share(names[Party.ALICE], names[Party.BOB], n)
    projs = [projector(cd, sup) for sup, _ in terms]
    vm.apply(ctrl, [data[ctrl], "c"], sum(tensor(p, shift(n, -j)) for j, p in enumerate(projs)))
    vm.measure(ctrl, "c")
    vm.send("c", other)

    vm.apply(other, ["t"], lambda o: shift(n, -o["c"]), uses=["c"])
    vm.apply(
        other,
        ["t", data[other]],
        sum(tensor(_ket(n, j), op) for j, (_, op) in enumerate(terms)),
    )
    vm.measure(other, "t", fourier_basis=True)
    vm.send("t", ctrl)
    vm.apply(
        ctrl,
        [data[ctrl]],
        lambda o: sum(ph * p for ph, p in zip(_phase(n, o["t"]), projs)),
        uses=["t"],
    )

    _local(vm, Party.ALICE, "A", form.post[0])
    _local(vm, Party.BOB, "B", form.post[1])
    return _finish(vm, _log2(n), 2 * _log2(n), config)


def run_two_level(
    u: BipartiteOp,
    decomposition: Optional[TwoLevelDecomposition] = None,
    pieces: Optional[Sequence[Tuple[Sequence[int], Side]]] = None,
    mixed_sides: bool = False,
    config: SimConfig = SimConfig(),
    tol: float = DEFAULT_TOL.rank,
) -> ProtocolTrace:
    """Higher-level control on A pieces, then a controlled unitary inside each piece.

    Pieces controlled from different sides need dummy registers, prepared in the
    uniform superposition, so that each measured register looks the same whichever
    piece the input sits in.
    """
    dec = decomposition or two_level_decomposition(u, pieces, mixed_sides, tol)
    dA, dB = u.dA, u.dB
    big_m = dec.higher_terms
    lower = [
        _complete_terms(f, idx if s is Side.A else range(dB))
        for idx, s, f in zip(dec.pieces, dec.sides, dec.forms)
    ]
    n = max(len(t) for t in lower)
    for k, terms in enumerate(lower):
        eye = np.eye(dA if dec.sides[k] is Side.B else dB, dtype=complex)
        lower[k] = terms + [((), eye)] * (n - len(terms))

    a_side = [k for k in range(big_m) if dec.sides[k] is Side.A]
    b_side = [k for k in range(big_m) if dec.sides[k] is Side.B]
    mixed = bool(a_side and b_side)
    protocol = ProtocolId.TWO_LEVEL_MIXED if mixed else ProtocolId.TWO_LEVEL
    vm = LoccMachine(dA, dB, protocol, config)

    piece = [projector(dA, idx) for idx in dec.pieces]
    on_a = sum((piece[k] for k in a_side), np.zeros((dA, dA), dtype=complex))
    on_b = sum((piece[k] for k in b_side), np.zeros((dA, dA), dtype=complex))
    eye_n = np.eye(n, dtype=complex)

    def alice_blocks(ops: Sequence[Matrix]) -> Matrix:
        return sum(piece[k] @ ops[k] @ piece[k] for k in range(big_m))

    def bob_blocks(ops: Dict[int, Matrix], size: int) -> Matrix:
        eye = np.eye(size, dtype=complex)
        return sum(tensor(_ket(big_m, k), ops.get(k, eye)) for k in range(big_m))

    # Bob learns the piece index coherently
    vm.share("a", "b", big_m)
    vm.apply(
        Party.ALICE,
        ["A", "a"],
        sum(tensor(piece[k], shift(big_m, -k)) for k in range(big_m)),
    )
    vm.measure(Party.ALICE, "a")
    vm.send("a", Party.BOB)
    vm.apply(Party.BOB, ["b"], lambda o: shift(big_m, -o["a"]), uses=["a"])

    vm.apply(Party.ALICE, ["A"], alice_blocks([f.pre[0] for f in dec.forms]))
    vm.apply(Party.BOB, ["b", "B"], bob_blocks(dict(enumerate(f.pre[1] for f in dec.forms)), dB))

    vm.share("qa", "qb", n)
    uniform = np.ones(n, dtype=complex) / np.sqrt(n)
    swap = perm_matrix([(i % n) * n + i // n for i in range(n * n)])
    if mixed:
        vm.add_register("da", Party.ALICE, n, state=uniform)
        vm.add_register("db", Party.BOB, n, state=uniform)
    keep_a = "da" if mixed else "qa"
    keep_b = "db" if mixed else "qb"

    if a_side:
        gate = tensor(on_b, eye_n)
        for k in a_side:
            for j, (sup, _) in enumerate(lower[k]):
                gate = gate + tensor(projector(dA, sup), shift(n, -j))
        vm.apply(Party.ALICE, ["A", "qa"], gate)
        if mixed:
            vm.apply(
                Party.ALICE,
                ["A", "qa", "da"],
                tensor(on_b, swap) + tensor(on_a, np.eye(n * n)),
            )
        vm.measure(Party.ALICE, "qa")
        vm.send("qa", Party.BOB)
    if b_side:
        ops = {
            k: sum(tensor(projector(dB, sup), shift(n, -j)) for j, (sup, _) in enumerate(lower[k]))
            for k in b_side
        }
        vm.apply(Party.BOB, ["b", "B", "qb"], bob_blocks(ops, dB * n))
        if mixed:
            vm.apply(Party.BOB, ["b", "qb", "db"], bob_blocks({k: swap for k in a_side}, n * n))
        vm.measure(Party.BOB, "qb")
        vm.send("qb", Party.ALICE)

    if a_side:
        vm.apply(
            Party.BOB,
            ["b", keep_b],
            lambda o: bob_blocks({k: shift(n, -o["qa"]) for k in a_side}, n),
            uses=["qa"],
        )
        ops = {
            k: sum(tensor(_ket(n, j), op) for j, (_, op) in enumerate(lower[k])) for k in a_side
        }
        vm.apply(Party.BOB, ["b", keep_b, "B"], bob_blocks(ops, n * dB))
        vm.apply(Party.BOB, ["b", keep_b], bob_blocks({k: fourier(n) for k in a_side}, n))
        vm.measure(Party.BOB, keep_b)
        vm.send(keep_b, Party.ALICE)
    if b_side:
        vm.apply(
            Party.ALICE,
            ["A", keep_a],
            lambda o: tensor(on_b, shift(n, -o["qb"])) + tensor(on_a, eye_n),
            uses=["qb"],
        )
        gate = sum(
            tensor(sum((piece[k] @ lower[k][j][1] @ piece[k] for k in b_side), on_a), _ket(n, j))
            for j in range(n)
        )
        vm.apply(Party.ALICE, ["A", keep_a], gate)
        vm.apply(Party.ALICE, ["A", keep_a], tensor(on_b, fourier(n)) + tensor(on_a, eye_n))
        vm.measure(Party.ALICE, keep_a)
        vm.send(keep_a, Party.BOB)

    if a_side:

        def fix_alice(o: Dict[str, int]) -> Matrix:
            ph = _phase(n, o[keep_b])
            out = on_b.copy()
            for k in a_side:
                for j, (sup, _) in enumerate(lower[k]):
                    out = out + ph[j] * projector(dA, sup)
            return out

        vm.apply(Party.ALICE, ["A"], fix_alice, uses=[keep_b])
    if b_side:

        def fix_bob(o: Dict[str, int]) -> Matrix:
            ph = _phase(n, o[keep_a])
            fixes = {
                k: sum(ph[j] * projector(dB, sup) for j, (sup, _) in enumerate(lower[k]))
                for k in b_side
            }
            return bob_blocks(fixes, dB)

        vm.apply(Party.BOB, ["b", "B"], fix_bob, uses=[keep_a])

    vm.apply(Party.ALICE, ["A"], alice_blocks([f.post[0] for f in dec.forms]))
    vm.apply(Party.BOB, ["b", "B"], bob_blocks(dict(enumerate(f.post[1] for f in dec.forms)), dB))
    vm.measure(Party.BOB, "b", fourier_basis=True)
    vm.send("b", Party.ALICE)
    vm.apply(
        Party.ALICE,
        ["A"],
        lambda o: sum(ph * p for ph, p in zip(_phase(big_m, o["b"]), piece)),
        uses=["b"],
    )

    lower_cbits = (4 if mixed else 2) * _log2(n)
    return _finish(vm, _log2(big_m) + _log2(n), 2 * _log2(big_m) + lower_cbits, config)


def run_group(
    u: BipartiteOp,
    rep: Representation,
    side: Side = Side.A,
    pre: Optional[Tuple[Matrix, Matrix]] = None,
    post: Optional[Tuple[Matrix, Matrix]] = None,
    config: SimConfig = SimConfig(),
) -> ProtocolTrace:
    """``post [sum_f V(f) (x) W(f)] pre`` with ``V`` a projective representation on ``side``"""
    side = Side(side)
    eye = (np.eye(u.dA, dtype=complex), np.eye(u.dB, dtype=complex))
    pre = eye if pre is None else pre
    post = eye if post is None else post
    inner = BipartiteOp(tensor(*post).conj().T @ u.matrix @ tensor(*pre).conj().T, u.dA, u.dB)
    expansion = solve_group_expansion(inner, rep, side)
    order = rep.order

    holder = Party.ALICE if side is Side.A else Party.BOB
    other = holder.other
    data = {Party.ALICE: "A", Party.BOB: "B"}
    vm = LoccMachine(u.dA, u.dB, ProtocolId.GROUP, config)
    _local(vm, Party.ALICE, "A", pre[0])
    _local(vm, Party.BOB, "B", pre[1])

    names = {holder: "g", other: "h"}
    vm.share(names[Party.ALICE], names[Party.BOB], order)
    vm.apply(
        holder,
        [data[holder], "g"],
        sum(tensor(v, _ket(order, f)) for f, v in enumerate(rep.mats)),
    )
    vm.measure(holder, "g", fourier_basis=True)
    vm.send("g", other)
    vm.apply(other, ["h"], lambda o: np.diag(_phase(order, o["g"])), uses=["g"])
    vm.apply(other, ["h", data[other]], expansion.completed)
    vm.measure(other, "h")
    vm.send("h", holder)
    vm.apply(holder, [data[holder]], lambda o: rep.mats[o["h"]].conj().T, uses=["h"])

    _local(vm, Party.ALICE, "A", post[0])
    _local(vm, Party.BOB, "B", post[1])
    return _finish(vm, _log2(order), 2 * _log2(order), config)


def rank3_group_setup(
    u: BipartiteOp,
) -> Tuple[Representation, Tuple[Matrix, Matrix]]:
    """Dihedral representation on B fitted to the block structure of a rank-3 standard form"""
    std = rank3_standard_form(u)
    if not std.has_blocks:
        raise ProtocolError(ProtocolId.GROUP, "standard form", msg="no block structure on B")
    rep = dihedral_representation(u.dB).conjugated(std.basis)
    return rep, (std.post[0], std.v1)


def run_rank3_group(u: BipartiteOp, config: SimConfig = SimConfig()) -> ProtocolTrace:
    rep, post = rank3_group_setup(u)
    return run_group(u, rep, Side.B, post=post, config=config)


def _labelled_columns(u: BipartiteOp, tol: float) -> List[List[Tuple[int, Matrix]]]:
    """Per big column, its nonzero blocks as (row, block) in a type-wide label order"""
    profile = block_profile(u, tol)
    columns = []
    for c in range(u.dA):
        found = [(r, profile.block(r, c)) for r in range(u.dA)]
        found = [(r, blk) for r, blk in found if np.abs(blk).max() > tol]
        found.sort(key=lambda rb: np.round(np.abs(rb[1]), 6).astype(np.int8).tobytes())
        columns.append(found)
    return columns


def _complete_perm(partial: Dict[int, int], size: int) -> Matrix:
    """Permutation matrix extending the injective map ``partial``"""
    free_in = [i for i in range(size) if i not in partial]
    free_out = [i for i in range(size) if i not in set(partial.values())]
    mapping = dict(partial)
    mapping.update(zip(free_in, free_out))
    return perm_matrix([mapping[i] for i in range(size)])


def _swap_with_zero(size: int, k: int) -> Matrix:
    mapping = list(range(size))
    mapping[0], mapping[k] = k, 0
    return perm_matrix(mapping)


def _require_real_permutation(u: BipartiteOp, tol: float) -> None:
    if not block_profile(u, tol).is_permutation:
        raise NotPermutation()


class PermTables(NamedTuple):
    """Lookup tables of the type-based permutation construction"""

    d1: int
    width: int
    d3: int
    type_of: Dict[int, int]
    hclass: Dict[int, int]
    # per input type t: b -> (label f, output row of B)
    bob: List[Dict[int, Tuple[int, int]]]
    # (t, f) -> {input column of A: output row of A}
    alice: Dict[Tuple[int, int], Dict[int, int]]
    # (output row of A, output type of B) -> (t, f)
    erase: Dict[Tuple[int, int], Tuple[int, int]]


def permutation_tables(u: BipartiteOp, tol: float = DEFAULT_TOL.rank) -> PermTables:
    _require_real_permutation(u, tol)
    report = permutation_type_partitions(u, tol)
    type_of = {c: t for t, cls in enumerate(report.input_a.classes) for c in cls}
    hclass = {b: h for h, cls in enumerate(report.output_b.classes) for b in cls}
    columns = _labelled_columns(u, tol)
    width = report.relative_output_a

    bob = []
    for cls in report.input_a.classes:
        table = {}
        for f, (_, blk) in enumerate(columns[cls[0]]):
            for b in range(u.dB):
                rows = np.flatnonzero(np.abs(blk[:, b]) > tol)
                if rows.size:
                    table[b] = (f, int(rows[0]))
        bob.append(table)
    alice = {
        (t, f): {c: columns[c][f][0] for c in cls if f < len(columns[c])}
        for t, cls in enumerate(report.input_a.classes)
        for f in range(width)
    }
    erase: Dict[Tuple[int, int], Tuple[int, int]] = {}
    for c in range(u.dA):
        for f, (r, blk) in enumerate(columns[c]):
            for b in range(u.dB):
                rows = np.flatnonzero(np.abs(blk[:, b]) > tol)
                if not rows.size:
                    continue
                key = (r, hclass[int(rows[0])])
                if erase.setdefault(key, (type_of[c], f)) != (type_of[c], f):
                    raise ProtocolError(ProtocolId.PTL2, "erasure", msg=f"ambiguous at {key}")
    return PermTables(
        report.input_a.n_classes,
        width,
        report.output_b.n_classes,
        type_of,
        hclass,
        bob,
        alice,
        erase,
    )


def run_permutation_types(
    u: BipartiteOp, config: SimConfig = SimConfig(), tol: float = DEFAULT_TOL.rank
) -> ProtocolTrace:
    """Permutation unitary through the input types of A, the relative output types of A
    and the output types of B
    """
    dA, dB = u.dA, u.dB
    tables = permutation_tables(u, tol)
    d1, width, d3 = tables.d1, tables.width, tables.d3
    type_of, hclass, erase = tables.type_of, tables.hclass, tables.erase

    # Bob's W_t and Alice's V_(t, f)
    w_gates = [
        _complete_perm({b: f * dB + row for b, (f, row) in table.items()}, width * dB)
        for table in tables.bob
    ]
    v_gates = {key: _complete_perm(partial, dA) for key, partial in tables.alice.items()}

    vm = LoccMachine(dA, dB, ProtocolId.PTL2, config)
    vm.add_register("ta", Party.ALICE, d1)
    mark = sum(tensor(_ket(dA, c), shift(d1, type_of[c])) for c in range(dA))
    vm.apply(Party.ALICE, ["A", "ta"], mark)

    vm.share("e", "e2", d1)
    vm.apply(Party.ALICE, ["ta", "e"], sum(tensor(_ket(d1, t), shift(d1, -t)) for t in range(d1)))
    vm.measure(Party.ALICE, "e")
    vm.send("e", Party.BOB)
    vm.apply(Party.BOB, ["e2"], lambda o: shift(d1, -o["e"]), uses=["e"])

    vm.add_register("fo", Party.BOB, width)
    w_gate = sum(tensor(_ket(d1, t), w) for t, w in enumerate(w_gates))
    vm.apply(Party.BOB, ["e2", "fo", "B"], w_gate)
    vm.measure(Party.BOB, "e2", fourier_basis=True)
    vm.send("e2", Party.ALICE)
    vm.apply(Party.ALICE, ["ta"], lambda o: np.diag(_phase(d1, o["e2"])), uses=["e2"])
    vm.teleport("fo", Party.ALICE)

    vm.apply(
        Party.ALICE,
        ["ta", "fo", "A"],
        sum(tensor(tensor(_ket(d1, t), _ket(width, f)), g) for (t, f), g in v_gates.items()),
    )

    # copy of the B output type on Alice's half of a fresh pair
    vm.share("h", "h2", d3)
    mark = sum(tensor(_ket(dB, b), shift(d3, -hclass[b])) for b in range(dB))
    vm.apply(Party.BOB, ["B", "h2"], mark)
    vm.measure(Party.BOB, "h2")
    vm.send("h2", Party.ALICE)
    vm.apply(Party.ALICE, ["h"], lambda o: shift(d3, -o["h2"]), uses=["h2"])
    size = d1 * width
    gate = np.zeros((dA * size * d3, dA * size * d3), dtype=complex)
    for r in range(dA):
        for hv in range(d3):
            t, f = erase.get((r, hv), (0, 0))
            inner = tensor(tensor(_ket(dA, r), _swap_with_zero(size, t * width + f)), _ket(d3, hv))
            gate += inner
    vm.apply(Party.ALICE, ["A", "ta", "fo", "h"], gate)
    vm.measure(Party.ALICE, "h", fourier_basis=True)
    vm.send("h", Party.BOB)
    vm.apply(
        Party.BOB,
        ["B"],
        lambda o: np.diag(_phase(d3, o["h"])[[hclass[b] for b in range(dB)]]),
        uses=["h"],
    )

    ebits = _log2(d1) + _log2(width) + _log2(d3)
    return _finish(vm, ebits, 2 * ebits, config)


def loose_maps(u: BipartiteOp, tol: float) -> Tuple[List[int], List[int], list, list]:
    """Loose types of both sides, with the A map of each B type and the B map of each A type"""
    tens = u.tensor4
    part_a = loose_type_partition(u, Side.A, tol)
    part_b = loose_type_partition(u, Side.B, tol)
    type_a = [0] * u.dA
    type_b = [0] * u.dB
    for t, cls in enumerate(part_a.classes):
        for c in cls:
            type_a[c] = t
    for s, cls in enumerate(part_b.classes):
        for b in cls:
            type_b[b] = s
    # block sums: B map for an A type, A map for a B type
    b_maps = [np.abs(tens[:, :, cls[0], :].sum(axis=0)).argmax(axis=0) for cls in part_a.classes]
    a_maps = [np.abs(tens[:, :, :, cls[0]].sum(axis=1)).argmax(axis=0) for cls in part_b.classes]
    return type_a, type_b, a_maps, b_maps


def run_permutation_loose(
    u: BipartiteOp, config: SimConfig = SimConfig(), tol: float = DEFAULT_TOL.rank
) -> ProtocolTrace:
    """Permutation unitary through loose types, forward with ``U`` and back with ``U^dag``"""
    _require_real_permutation(u, tol)
    dA, dB = u.dA, u.dB
    forward = loose_maps(u, tol)
    backward = loose_maps(u.dagger(), tol)

    vm = LoccMachine(dA, dB, ProtocolId.PTL3, config)
    vm.add_register("A2", Party.ALICE, dA, Role.OUTPUT)
    vm.add_register("B2", Party.BOB, dB, Role.OUTPUT)
    total = 1
    for stage, (src_a, src_b, dst_a, dst_b, maps) in enumerate(
        [("A", "B", "A2", "B2", forward), ("A2", "B2", "A", "B", backward)]
    ):
        type_a, type_b, a_maps, b_maps = maps
        la, lb = max(type_a) + 1, max(type_b) + 1
        total *= la * lb
        na, nb = f"ta{stage}", f"tb{stage}"
        vm.add_register(na, Party.ALICE, la)
        vm.add_register(nb, Party.BOB, lb)
        mark_a = sum(tensor(_ket(dA, c), shift(la, type_a[c])) for c in range(dA))
        mark_b = sum(tensor(_ket(dB, b), shift(lb, type_b[b])) for b in range(dB))
        vm.apply(Party.ALICE, [src_a, na], mark_a)
        vm.apply(Party.BOB, [src_b, nb], mark_b)
        vm.teleport(na, Party.BOB)
        vm.teleport(nb, Party.ALICE)
        # forward: write the outputs into A2, B2; backward: the inputs A, B are set back to |0>
        alice = sum(
            tensor(tensor(_ket(dA, c), _ket(lb, s)), _swap_with_zero(dA, int(a_maps[s][c])))
            for c in range(dA)
            for s in range(lb)
        )
        bob = sum(
            tensor(tensor(_ket(dB, b), _ket(la, t)), _swap_with_zero(dB, int(b_maps[t][b])))
            for b in range(dB)
            for t in range(la)
        )
        vm.apply(Party.ALICE, [src_a, nb, dst_a], alice)
        vm.apply(Party.BOB, [src_b, na, dst_b], bob)
        vm.teleport(nb, Party.BOB)
        vm.teleport(na, Party.ALICE)
        vm.apply(Party.ALICE, [src_a, na], mark_a.conj().T)
        vm.apply(Party.BOB, [src_b, nb], mark_b.conj().T)

    e = 2 * _log2(total)
    trace = _finish(vm, e, 2 * e, config, outputs=("A2", "B2"))
    if config.check_ledger:
        r = schmidt_rank(u, tol)
        if trace.ebits > 8 * r - 8 + 1e-9:
            msg = f"{trace.ebits:.4f} ebits exceed 8r-8 for r={r}"
            raise LedgerMismatch(trace.protocol, 8 * r - 8, trace.ebits, msg=msg)
    return trace


def run_teleport(u: BipartiteOp, config: SimConfig = SimConfig()) -> ProtocolTrace:
    """Move the smaller side over, apply ``U`` locally, move it back"""
    vm = LoccMachine(u.dA, u.dB, ProtocolId.TELEPORT, config)
    if u.dB <= u.dA:
        mover, host, small = "B", Party.ALICE, u.dB
    else:
        mover, host, small = "A", Party.BOB, u.dA
    vm.teleport(mover, host)
    vm.apply(host, ["A", "B"], u.matrix)
    vm.teleport(mover, host.other)
    return _finish(vm, 2 * _log2(small), 4 * _log2(small), config)


def run_local(u: BipartiteOp, config: SimConfig = SimConfig()) -> ProtocolTrace:
    decomp = operator_schmidt(u)
    if decomp.rank != 1:
        raise RankMismatch([1], decomp.rank)
    a_op = decomp.a_ops[0] * np.sqrt(u.dA)
    b_op = decomp.b_ops[0] * decomp.coefficients[0] / np.sqrt(u.dA)
    vm = LoccMachine(u.dA, u.dB, ProtocolId.LOCAL, config)
    vm.apply(Party.ALICE, ["A"], a_op)
    vm.apply(Party.BOB, ["B"], b_op)
    return _finish(vm, 0.0, 0.0, config)
