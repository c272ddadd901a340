"""Upper bounds on the entanglement and classical communication needed to
implement a bipartite unitary with LOCC, and a recommender picking the
cheapest applicable construction for a concrete operator.

Every bound is carried twice: as a float and as an exact expression over
logarithms of integers (``expr``), so reports stay comparable across
platforms.
"""
import logging
import math
from functools import lru_cache
from typing import List, NamedTuple, Optional, Tuple

import numpy as np

from .enums import ProtocolId, Side
from .errors import InvalidInput
from .linalg import BipartiteOp, schmidt_rank
from .structure import (
    BlockProfile,
    complex_rank3_profile,
    detect_controlled,
    loose_type_partition,
    permutation_type_partitions,
    persch_analysis,
)
from .util import DEFAULT_TOL, Tolerances, _fmt_repr

NO_CONSTANT_BOUND = "no constant bound known"


@lru_cache(maxsize=8)
def bell_numbers(n: int) -> Tuple[int, ...]:
    """B_0 .. B_n from the Bell triangle, exact"""
    if n < 0:
        raise InvalidInput(f"Bell numbers need n >= 0, got {n}")
    out = [1]
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for val in row:
            nxt.append(nxt[-1] + val)
        row = nxt
        out.append(row[0])
    return tuple(out)


def bell(n: int) -> int:
    return bell_numbers(n)[n]


def ceil_log2(n: int) -> int:
    if n < 1:
        raise InvalidInput(f"log2 of {n}")
    return (n - 1).bit_length()


def _log2_expr(n: int, factor: int = 1) -> str:
    if n == 1:
        return "0"
    body = f"log2({n})"
    return body if factor == 1 else f"{factor}*{body}"


class Alternative(NamedTuple):
    source: str
    ebits: float
    cbits: float
    protocol: ProtocolId
    expr: str = ""

    def __repr__(self) -> str:
        return _fmt_repr("Alternative", self._asdict())


class CostReport(NamedTuple):
    ebits: float
    cbits: float
    source: str
    applicable_protocol: ProtocolId
    alternatives: List[Alternative]
    expr: str = ""
    notes: Tuple[str, ...] = ()

    @classmethod
    def best_of(cls, alternatives: List[Alternative], notes: Tuple[str, ...] = ()) -> "CostReport":
        if not alternatives:
            raise InvalidInput("no applicable bound")
        ranked = sorted(alternatives, key=lambda a: (round(a.ebits, 12), round(a.cbits, 12)))
        best = ranked[0]
        return cls(best.ebits, best.cbits, best.source, best.protocol, ranked, best.expr, notes)

    def as_dict(self) -> dict:
        return {
            "ebits": self.ebits,
            "cbits": self.cbits,
            "source": self.source,
            "applicable_protocol": str(self.applicable_protocol),
            "expr": self.expr,
            "alternatives": [
                {
                    "source": a.source,
                    "ebits": a.ebits,
                    "cbits": a.cbits,
                    "protocol": str(a.protocol),
                    "expr": a.expr,
                }
                for a in self.alternatives
            ],
            "notes": list(self.notes),
        }

    def __repr__(self) -> str:
        return _fmt_repr(
            "CostReport",
            {"ebits": round(self.ebits, 6), "source": self.source, "protocol": self.protocol_name},
        )

    @property
    def protocol_name(self) -> str:
        return str(self.applicable_protocol)


def _controlled_alt(n_terms: int, source: str = "controlled") -> Alternative:
    e = math.log2(n_terms)
    return Alternative(source, e, 2 * e, ProtocolId.CT, _log2_expr(n_terms))


def bound_controlled(n_terms: int) -> CostReport:
    if n_terms < 1:
        raise InvalidInput(f"a controlled unitary has at least one term, got {n_terms}")
    if n_terms == 1:
        return CostReport.best_of([Alternative("product", 0.0, 0.0, ProtocolId.LOCAL, "0")])
    return CostReport.best_of([_controlled_alt(n_terms)])


def bound_rank3(dA: int, dB: int) -> CostReport:
    """Rank-3 unitary controlled from A; dA is the controlling dimension"""
    if dA < 3 or dB < 2:
        raise InvalidInput(f"rank-3 bound needs dA >= 3 and dB >= 2, got {dA} x {dB}")
    dihedral = 4 * (dB // 2) + 2
    options = [
        (dA, ProtocolId.CT, "rank3-controlled-levels"),
        (dB * dB, ProtocolId.GROUP, "rank3-pauli-group"),
        (dihedral, ProtocolId.GROUP, "rank3-dihedral-group"),
    ]
    size, protocol, source = min(options, key=lambda o: o[0])
    c_size = min(dA, dB * dB, max(12, dihedral))
    alt = Alternative(source, math.log2(size), 2 * math.log2(c_size), protocol, _log2_expr(size))
    logging.debug(f"bound_rank3({dA}, {dB}): ebits log2({size}), cbits 2*log2({c_size})")
    return CostReport.best_of([alt])


def _permutation_general(r: int) -> List[Alternative]:
    b = bell(r + 1)
    first = math.log2(b) + r + math.log2(r)
    first_expr = f"log2({b * r * 2 ** r})"
    linear = float(8 * r - 8)
    return [
        Alternative("permutation-types", first, 2 * first, ProtocolId.PTL2, first_expr),
        Alternative("permutation-loose-types", linear, 2 * linear, ProtocolId.PTL3, str(8 * r - 8)),
    ]


def bound_permutation(r: int) -> CostReport:
    """Bound for any permutation unitary of Schmidt rank ``r``"""
    if r < 1:
        raise InvalidInput(f"Schmidt rank must be positive, got {r}")
    if r == 1:
        return CostReport.best_of([Alternative("product", 0.0, 0.0, ProtocolId.LOCAL, "0")])
    alternatives = _permutation_general(r)
    if r == 2:
        alternatives.append(Alternative("permutation-rank2", 1.0, 2.0, ProtocolId.CT, "1"))
    elif r == 3:
        alternatives.append(Alternative("permutation-rank3", 2.0, 4.0, ProtocolId.TWO_LEVEL, "2"))
    elif r == 4:
        worst = bell(5) * 2 * 2**4
        e = math.log2(worst)
        alternatives.append(
            Alternative("permutation-rank4-cases", e, 2 * e, ProtocolId.PTL2, f"log2({worst})")
        )
    return CostReport.best_of(alternatives)


def permutation_first_term_wins(r: int) -> bool:
    """Exact test of log2 B_{r+1} + r + log2 r < 8r - 8, i.e. B_{r+1} r < 2^(7r-8)"""
    if r < 2:
        return False
    return bell(r + 1) * r < 2 ** (7 * r - 8)


def permutation_crossover(limit: int = 1100) -> Optional[int]:
    """Smallest r in [4, limit) where the linear bound is no larger, if any"""
    bells = bell_numbers(limit + 1)
    for r in range(4, limit):
        if not bells[r + 1] * r < 2 ** (7 * r - 8):
            return r
    return None


def bound_classical(r: int, restore_ancillas: bool = True) -> int:
    """Nonlocal CNOT count for a bipartite reversible map of Schmidt rank ``r``"""
    if r < 1:
        raise InvalidInput(f"Schmidt rank must be positive, got {r}")
    if not restore_ancillas:
        return 2 * r - 2
    first = 2 * ceil_log2(bell(r + 1)) + 2 * r + 2 * ceil_log2(r)
    return min(first, 8 * r - 8)


def teleportation_alt(dA: int, dB: int) -> Alternative:
    d = min(dA, dB)
    e = 2 * math.log2(d)
    return Alternative("two-way-teleportation", e, 2 * e, ProtocolId.TELEPORT, _log2_expr(d, 2))


def _ptl2_ledger(u: BipartiteOp, tol: float) -> Alternative:
    report = permutation_type_partitions(u, tol)
    dims = (report.input_a.n_classes, report.relative_output_a, report.output_b.n_classes)
    total = int(np.prod(dims))
    e = math.log2(total)
    return Alternative("permutation-types-ledger", e, 2 * e, ProtocolId.PTL2, _log2_expr(total))


def _ptl3_ledger(u: BipartiteOp, tol: float) -> Alternative:
    inverse = u.dagger()
    counts = [
        loose_type_partition(op, side, tol).n_classes
        for op in (u, inverse)
        for side in (Side.A, Side.B)
    ]
    total = int(np.prod(counts))
    e = 2 * math.log2(total)
    return Alternative(
        "permutation-loose-types-ledger", e, 2 * e, ProtocolId.PTL3, _log2_expr(total, 2)
    )


def _rank4_cases(profile: BlockProfile) -> Alternative:
    most = max(int(profile.column_counts.max()), int(profile.row_counts.max()))
    if most >= 4:
        return Alternative("permutation-rank4-four-blocks", 2.0, 4.0, ProtocolId.CT, "2")
    if most == 3:
        return Alternative("permutation-rank4-three-blocks", 3.0, 6.0, ProtocolId.TWO_LEVEL, "3")
    worst = bell(5) * 2 * 2**4
    e = math.log2(worst)
    return Alternative("permutation-rank4-two-blocks", e, 2 * e, ProtocolId.PTL2, f"log2({worst})")


def _permutation_alternatives(
    u: BipartiteOp, rank: int, profile: BlockProfile, tol: float
) -> Tuple[List[Alternative], Tuple[str, ...]]:
    alternatives: List[Alternative] = []
    notes: Tuple[str, ...] = ()
    persch = persch_analysis(u, tol)
    if persch.bound is not None:
        e = persch.bound
        alternatives.append(Alternative(f"block-count-{persch.line}", e, 2 * e, ProtocolId.CT))

    if profile.is_permutation:
        if rank == 4:
            alternatives.append(_rank4_cases(profile))
        elif rank <= 3:
            alternatives.extend(
                a for a in bound_permutation(rank).alternatives if a.source.endswith(f"rank{rank}")
            )
        alternatives.extend(_permutation_general(rank))
        alternatives.append(_ptl2_ledger(u, tol))
        alternatives.append(_ptl3_ledger(u, tol))
        return alternatives, notes

    if rank == 2:
        alternatives.append(Alternative("complex-permutation-rank2", 1.0, 2.0, ProtocolId.CT, "1"))
    elif rank == 3:
        shape = complex_rank3_profile(u, tol)
        if not shape.diagonal:
            alternatives.append(
                Alternative("complex-permutation-rank3", 3.0, 6.0, ProtocolId.TWO_LEVEL, "3")
            )
        elif shape.two_values:
            alternatives.append(
                Alternative("diagonal-rank3-two-values", 2.0, 4.0, ProtocolId.CT, "2")
            )
        else:
            notes = (NO_CONSTANT_BOUND,)
    return alternatives, notes


def recommend(u: BipartiteOp, tol: Tolerances = DEFAULT_TOL) -> CostReport:
    """Cheapest known construction among those that apply to ``u``"""
    u.require_unitary(tol.unitary)
    rank = schmidt_rank(u, tol.rank)
    if rank == 1:
        return CostReport.best_of([Alternative("product", 0.0, 0.0, ProtocolId.LOCAL, "0")])

    alternatives = [teleportation_alt(u.dA, u.dB)]
    notes: Tuple[str, ...] = ()
    controlled = {}
    for side in (Side.A, Side.B):
        form = detect_controlled(u, side, tol.rank)
        if form is not None:
            controlled[side] = form
            alternatives.append(_controlled_alt(form.n_terms, f"controlled-{side}"))

    if rank == 3:
        # every rank-3 unitary is controlled from one side, possibly in another basis
        sides = list(controlled) or [Side.A, Side.B]
        bounds = []
        for side in sides:
            dims = (u.dA, u.dB) if side is Side.A else (u.dB, u.dA)
            if dims[0] >= 3:
                bounds.append(bound_rank3(*dims).alternatives[0])
        if controlled:
            alternatives.extend(bounds)
        elif bounds:
            alternatives.append(max(bounds, key=lambda a: a.ebits))

    profile = BlockProfile(u, tol.rank)
    if profile.is_complex_permutation:
        extra, notes = _permutation_alternatives(u, rank, profile, tol.rank)
        alternatives.extend(extra)

    report = CostReport.best_of(alternatives, notes)
    logging.debug(f"recommend: {report} from {len(alternatives)} alternative(s)")
    return report
