"""Structural analysis of bipartite operators.

Everything here works on the block picture of ``U``: the dA x dA grid of
dB x dB blocks ``<j|_A U |k>_A``. Questions about side B are answered on
``swap_sides(U)`` and mapped back.
"""
import itertools
import logging
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .enums import PermClass, Rank3Kind, Side, Traits, TypeKind
from .errors import (
    CapExceeded,
    DimensionMismatch,
    GaugeFailure,
    InvalidInput,
    NotControlled,
    NotPermutation,
    RankMismatch,
    VerificationFailed,
)
from .linalg import (
    BipartiteOp,
    Matrix,
    cluster_values,
    expand_in,
    matrix_rank,
    normal_eig,
    null_space,
    operator_schmidt,
    perm_matrix,
    projector,
    schmidt_rank,
    span_rank,
    swap_sides,
    tensor,
)
from .util import DEFAULT_TOL, Tolerances, _fmt_repr, get_settings

Indices = Tuple[int, ...]


class BlockProfile:
    """Nonzero-block pattern and permutation flags of a unitary"""

    def __init__(self, u: BipartiteOp, tol: float = DEFAULT_TOL.rank) -> None:
        self.u = u
        self.dA = u.dA
        self.dB = u.dB
        grid = u.tensor4.transpose(0, 2, 1, 3)
        self.norms = np.linalg.norm(grid, axis=(2, 3))
        self.nonzero_block_grid = self.norms > tol

        mags = np.abs(u.matrix)
        nz = mags > tol
        one_per_line = bool(np.all(nz.sum(axis=0) == 1) and np.all(nz.sum(axis=1) == 1))
        self.is_complex_permutation = one_per_line and bool(np.all(np.abs(mags[nz] - 1) <= tol))
        self.is_permutation = self.is_complex_permutation and bool(
            np.all(np.abs(u.matrix[nz] - 1) <= tol)
        )
        self.is_diagonal = bool(np.all(nz == np.diag(np.diag(nz))))

    def block(self, row: int, col: int) -> Matrix:
        return self.u.block(row, col)

    @property
    def row_counts(self) -> np.ndarray:
        return self.nonzero_block_grid.sum(axis=1)

    @property
    def column_counts(self) -> np.ndarray:
        return self.nonzero_block_grid.sum(axis=0)

    def column_blocks(self, col: int) -> List[Matrix]:
        return [self.u.block(r, col) for r in range(self.dA) if self.nonzero_block_grid[r, col]]

    def row_blocks(self, row: int) -> List[Matrix]:
        return [self.u.block(row, c) for c in range(self.dA) if self.nonzero_block_grid[row, c]]

    def __repr__(self) -> str:
        return _fmt_repr(
            "BlockProfile",
            {
                "dA": self.dA,
                "dB": self.dB,
                "permutation": self.is_permutation,
                "complex_permutation": self.is_complex_permutation,
            },
        )


def block_profile(u: BipartiteOp, tol: float = DEFAULT_TOL.rank) -> BlockProfile:
    u.require_unitary()
    return BlockProfile(u, tol)


def _require_permutation(
    u: BipartiteOp, complex_ok: bool = False, tol: float = DEFAULT_TOL.rank
) -> BlockProfile:
    profile = block_profile(u, tol)
    ok = profile.is_complex_permutation if complex_ok else profile.is_permutation
    if not ok:
        raise NotPermutation(complex_ok)
    return profile


def _block_key(mat: Matrix) -> bytes:
    # adding 0.0 folds -0.0 into 0.0 so equal blocks hash equal
    return (np.round(np.asarray(mat, dtype=complex), 8) + 0.0).tobytes()


def _classes_by_key(keys: Sequence) -> List[Indices]:
    """Group positions with equal keys, ordered by smallest member"""
    groups: Dict = {}
    for idx, key in enumerate(keys):
        groups.setdefault(key, []).append(idx)
    return sorted((tuple(g) for g in groups.values()), key=lambda g: g[0])


def _embed(mat: Matrix, indices: Sequence[int], n: int) -> Matrix:
    """``mat`` acting on span(indices) of an n-level system, identity elsewhere"""
    out = np.eye(n, dtype=complex)
    idx = list(indices)
    out[np.ix_(idx, idx)] = mat
    return out


class ControlledForm:
    """``U = (post_A (x) post_B) [sum_k P_k (x) V_k] (pre_A (x) pre_B)``

    With ``side`` B the projectors act on B and the operators on A.
    """

    def __init__(
        self,
        side: Side,
        dA: int,
        dB: int,
        terms: Sequence[Tuple[Sequence[int], Matrix]],
        pre: Optional[Tuple[Matrix, Matrix]] = None,
        post: Optional[Tuple[Matrix, Matrix]] = None,
    ) -> None:
        self.side = Side(side)
        self.dA = dA
        self.dB = dB
        self.terms = [
            (tuple(int(i) for i in sup), np.asarray(op, dtype=complex)) for sup, op in terms
        ]
        eye = (np.eye(dA, dtype=complex), np.eye(dB, dtype=complex))
        self.pre = eye if pre is None else (np.asarray(pre[0]), np.asarray(pre[1]))
        self.post = eye if post is None else (np.asarray(post[0]), np.asarray(post[1]))

        seen: set = set()
        for sup, _ in self.terms:
            if seen & set(sup):
                raise InvalidInput("controlled form supports overlap")
            seen |= set(sup)

    @property
    def controller_dim(self) -> int:
        return self.dA if self.side is Side.A else self.dB

    @property
    def target_dim(self) -> int:
        return self.dB if self.side is Side.A else self.dA

    @property
    def n_terms(self) -> int:
        return len(self.terms)

    @property
    def supports(self) -> List[Indices]:
        return [sup for sup, _ in self.terms]

    @property
    def operators(self) -> List[Matrix]:
        return [op for _, op in self.terms]

    def projectors(self) -> List[Matrix]:
        return [projector(self.controller_dim, sup) for sup in self.supports]

    def term_matrix(self, k: int) -> Matrix:
        sup, op = self.terms[k]
        proj = projector(self.controller_dim, sup)
        return tensor(proj, op) if self.side is Side.A else tensor(op, proj)

    def core(self) -> Matrix:
        """Sum of the terms; controller levels outside every support act trivially"""
        dim = self.dA * self.dB
        out = np.zeros((dim, dim), dtype=complex)
        for k in range(self.n_terms):
            out += self.term_matrix(k)
        rest = [i for i in range(self.controller_dim) if not any(i in s for s in self.supports)]
        if rest:
            idle = projector(self.controller_dim, rest)
            eye = np.eye(self.target_dim)
            out += tensor(idle, eye) if self.side is Side.A else tensor(eye, idle)
        return out

    def reconstruct(self) -> Matrix:
        return tensor(*self.post) @ self.core() @ tensor(*self.pre)

    def residual(self, u: BipartiteOp) -> float:
        return float(np.linalg.norm(self.reconstruct() - u.matrix))

    def level_ops(self) -> List[Matrix]:
        """Operator applied for each controller level"""
        out: List[Optional[Matrix]] = [None] * self.controller_dim
        for sup, op in self.terms:
            for i in sup:
                out[i] = op
        eye = np.eye(self.target_dim, dtype=complex)
        return [eye if op is None else op for op in out]

    def padded(self, n_terms: int) -> "ControlledForm":
        """Same operator with identity terms of empty support appended"""
        eye = np.eye(self.target_dim, dtype=complex)
        extra = [((), eye)] * max(0, n_terms - self.n_terms)
        return ControlledForm(self.side, self.dA, self.dB, self.terms + extra, self.pre, self.post)

    def swapped(self) -> "ControlledForm":
        """The form of ``swap_sides(U)``"""
        return ControlledForm(
            self.side.other,
            self.dB,
            self.dA,
            self.terms,
            pre=(self.pre[1], self.pre[0]),
            post=(self.post[1], self.post[0]),
        )

    def embedded(self, indices: Sequence[int], dA: int) -> "ControlledForm":
        """Lift a form found on span(indices) of A up to a dA-level A system"""
        idx = list(indices)
        if self.side is Side.A:
            terms = [(tuple(idx[i] for i in sup), op) for sup, op in self.terms]
        else:
            terms = [(sup, _embed(op, idx, dA)) for sup, op in self.terms]
        pre = (_embed(self.pre[0], idx, dA), self.pre[1])
        post = (_embed(self.post[0], idx, dA), self.post[1])
        return ControlledForm(self.side, dA, self.dB, terms, pre, post)

    def __repr__(self) -> str:
        return _fmt_repr(
            "ControlledForm",
            {"side": self.side, "dA": self.dA, "dB": self.dB, "terms": self.n_terms},
        )


def _group_equal(mats: Sequence[Matrix], tol: float) -> List[int]:
    """Labels of equal matrices, numbered by first appearance"""
    reps: List[Matrix] = []
    labels = []
    for mat in mats:
        for label, rep in enumerate(reps):
            if np.linalg.norm(mat - rep) <= tol * max(1.0, np.sqrt(mat.shape[0])):
                labels.append(label)
                break
        else:
            labels.append(len(reps))
            reps.append(mat)
    return labels


def detect_controlled(
    u: BipartiteOp, side: Side = Side.A, tol: float = DEFAULT_TOL.rank
) -> Optional[ControlledForm]:
    """Controlled form from ``side`` in the computational basis, up to local permutations"""
    side = Side(side)
    u.require_unitary()
    if side is Side.B:
        form = detect_controlled(swap_sides(u), Side.A, tol)
        return None if form is None else form.swapped()

    grid = BlockProfile(u, tol).nonzero_block_grid
    if not (np.all(grid.sum(axis=0) == 1) and np.all(grid.sum(axis=1) == 1)):
        logging.debug(f"detect_controlled: {u} has a big row or column with several blocks")
        return None
    rows = [int(r) for r in grid.argmax(axis=0)]
    blocks = [u.block(rows[c], c) for c in range(u.dA)]
    labels = _group_equal(blocks, tol)
    terms = []
    for label in range(max(labels) + 1):
        sup = tuple(c for c in range(u.dA) if labels[c] == label)
        terms.append((sup, blocks[sup[0]].copy()))
    post = (perm_matrix(rows), np.eye(u.dB, dtype=complex))
    form = ControlledForm(Side.A, u.dA, u.dB, terms, post=post)
    logging.debug(f"detect_controlled: {form}")
    return form


def restrict(u: BipartiteOp, indices: Sequence[int], side: Side = Side.A) -> BipartiteOp:
    """Compression of ``U`` onto span(indices) of one side, the other side kept whole"""
    if Side(side) is Side.B:
        return swap_sides(restrict(swap_sides(u), indices, Side.A))
    idx = list(indices)
    b_all = list(range(u.dB))
    sub = u.tensor4[np.ix_(idx, b_all, idx, b_all)]
    n = len(idx) * u.dB
    return BipartiteOp(sub.reshape(n, n), len(idx), u.dB)


def assemble_direct_sum(
    side: Side, dA: int, dB: int, pieces: Sequence[Tuple[Sequence[int], Matrix]]
) -> Matrix:
    """Inverse of ``restrict``: place each piece on its own index set of ``side``"""
    if Side(side) is Side.B:
        swapped = []
        for idx, mat in pieces:
            k = len(idx)
            op = swap_sides(BipartiteOp(mat, dA, k))
            swapped.append((idx, op.matrix))
        return swap_sides(
            BipartiteOp(assemble_direct_sum(Side.A, dB, dA, swapped), dB, dA)
        ).matrix
    out = np.zeros((dA, dB, dA, dB), dtype=complex)
    b_all = list(range(dB))
    for idx, mat in pieces:
        idx = list(idx)
        k = len(idx)
        out[np.ix_(idx, b_all, idx, b_all)] = np.asarray(mat).reshape(k, dB, k, dB)
    return out.reshape(dA * dB, dA * dB)


def direct_sum_decompose(
    u: BipartiteOp, side: Side = Side.A, tol: float = DEFAULT_TOL.rank
) -> List[Tuple[Indices, BipartiteOp]]:
    """Finest direct-sum splitting of ``U`` along the basis of ``side``"""
    side = Side(side)
    if side is Side.B:
        comps = direct_sum_decompose(swap_sides(u), Side.A, tol)
        return [(idx, swap_sides(op)) for idx, op in comps]
    u.require_unitary()
    grid = BlockProfile(u, tol).nonzero_block_grid
    n_comp, labels = connected_components(csr_matrix(grid.astype(int)), directed=False)
    comps = sorted(tuple(int(i) for i in np.flatnonzero(labels == k)) for k in range(n_comp))
    logging.debug(f"direct_sum_decompose: {n_comp} component(s) on side A")
    return [(idx, restrict(u, idx, Side.A)) for idx in comps]


class Lm2Block(NamedTuple):
    """One irreducible 2x2 block of the pair (T2, T3)"""

    indices: Indices
    t2: Matrix
    t3: Matrix
    alpha: float

    def __repr__(self) -> str:
        return _fmt_repr("Lm2Block", {"indices": self.indices, "alpha": round(self.alpha, 12)})


class BlockGauge(NamedTuple):
    basis: Matrix
    blocks: List[Lm2Block]
    block1: Indices
    beta2: float
    beta3: float
    residuals: Dict[str, float]


class Rank3StandardForm(NamedTuple):
    """``U = (a_perm diag(e^{i theta}) (x) v1 basis) [sum_j |j><j| (x) T'_j] (I (x) basis^dag)``

    with ``T'_j = c_j1 I + c_j2 t2 + c_j3 t3`` and ``c_j1`` real and non-negative.
    """

    kind: Rank3Kind
    dA: int
    dB: int
    a_partition: Tuple[Indices, Indices, Indices]
    piece_ranks: Tuple[int, int, int]
    w3_rank: int
    has_blocks: bool
    blocks: List[Lm2Block]
    block1: Indices
    basis: Matrix
    t2: Matrix
    t3: Matrix
    coefficients: np.ndarray
    a_phases: np.ndarray
    a_perm: Matrix
    v1: Matrix
    beta: Tuple[float, float]
    residuals: Dict[str, float]

    def level_op(self, j: int) -> Matrix:
        c1, c2, c3 = self.coefficients[j]
        return c1 * np.eye(self.dB) + c2 * self.t2 + c3 * self.t3

    def core(self) -> Matrix:
        dim = self.dA * self.dB
        out = np.zeros((dim, dim), dtype=complex)
        for j in range(self.dA):
            out += tensor(projector(self.dA, [j]), self.level_op(j))
        return out

    @property
    def post(self) -> Tuple[Matrix, Matrix]:
        return self.a_perm @ np.diag(np.exp(1j * self.a_phases)), self.v1 @ self.basis

    @property
    def pre(self) -> Tuple[Matrix, Matrix]:
        return np.eye(self.dA, dtype=complex), self.basis.conj().T

    def reconstruct(self) -> Matrix:
        return tensor(*self.post) @ self.core() @ tensor(*self.pre)

    def __repr__(self) -> str:
        return _fmt_repr(
            "Rank3StandardForm",
            {"kind": self.kind, "blocks": len(self.blocks), "block1": len(self.block1)},
        )


def _half_range(angle: float) -> float:
    """Map ``angle`` into (-pi/2, pi/2] modulo pi"""
    angle = float(np.angle(np.exp(2j * angle))) / 2
    return np.pi / 2 if angle <= -np.pi / 2 + 1e-15 else angle


def _in_half_range(angle: float) -> bool:
    return -np.pi / 2 < angle <= np.pi / 2 + 1e-12


def commutant(mats: Sequence[Matrix], tol: float = DEFAULT_TOL.rank) -> List[Matrix]:
    """Basis of the matrices commuting with every member of ``mats``"""
    d = mats[0].shape[0]
    eye = np.eye(d)
    eqs = np.vstack([np.kron(eye, m.T) - np.kron(m, eye) for m in mats])
    basis = null_space(eqs, tol)
    return [basis[:, k].reshape(d, d) for k in range(basis.shape[1])]


def _block_gauge(t2: Matrix, t3: Matrix, tol: Tolerances) -> BlockGauge:
    """Split H_B into irreducible subspaces of (T2, T3) and fix the phase gauges"""
    d = t2.shape[0]
    comm = commutant([t2, t3], tol.rank)
    rng = np.random.default_rng(0)
    mix = sum(complex(*rng.normal(size=2)) * x for x in comm)
    evals, evecs = np.linalg.eigh(mix + mix.conj().T)
    labels = cluster_values(evals, 1e-6 * max(1.0, float(np.abs(evals).max())))

    residuals: Dict[str, float] = {}
    singles: List[np.ndarray] = []
    pairs: List[Tuple[np.ndarray, np.ndarray]] = []
    invariance = 0.0
    for label in range(max(labels) + 1):
        sub = evecs[:, [k for k, lab in enumerate(labels) if lab == label]]
        for t in (t2, t3):
            leak = t @ sub - sub @ (sub.conj().T @ t @ sub)
            invariance = max(invariance, float(np.linalg.norm(leak)))
        if sub.shape[1] == 1:
            singles.append(sub[:, 0])
        elif sub.shape[1] == 2:
            lam, vecs = normal_eig(sub.conj().T @ t2 @ sub)
            pairs.append((lam, sub @ vecs))
        else:
            raise GaugeFailure({"irreducible_dimension": float(sub.shape[1])})
    residuals["invariance"] = invariance

    beta2 = beta3 = 0.0
    if pairs:
        t3_pairs = [v.conj().T @ t3 @ v for _, v in pairs]
        products = [t[0, 1] * t[1, 0] for t in t3_pairs]
        lead = int(np.argmax(np.abs(products)))
        beta3 = _half_range(-float(np.angle(products[lead])) / 2)
        lam = pairs[lead][0]
        beta2 = _half_range(float(np.angle(-np.conj(lam[0] * lam[1]))) / 2)

    found = []
    t2_res = t3_res = 0.0
    for order, (lam, v) in enumerate(pairs):
        lam = lam * np.exp(1j * beta2)
        if not _in_half_range(float(np.angle(lam[0]))):
            lam = lam[::-1]
            v = v[:, ::-1]
        v = v.copy()
        x = (v.conj().T @ t3 @ v)[0, 1] * np.exp(1j * beta3)
        v[:, 1] *= np.exp(-1j * np.angle(x))
        t2b = np.exp(1j * beta2) * (v.conj().T @ t2 @ v)
        t3b = np.exp(1j * beta3) * (v.conj().T @ t3 @ v)
        alpha = float(np.angle(lam[0]))
        want = np.diag([np.exp(1j * alpha), -np.exp(-1j * alpha)])
        t2_res = max(t2_res, float(np.linalg.norm(t2b - want)))
        off = np.array([t3b[0, 1], t3b[1, 0]])
        t3_res = max(
            t3_res,
            float(abs(off[0] - off[1]) + np.abs(off.imag).sum() + max(0.0, -off.real.min())),
        )
        found.append((alpha, order, v))
    residuals["t2_block"] = t2_res
    residuals["t3_offdiagonal"] = t3_res

    found.sort(key=lambda item: (round(item[0], 9), item[1]))
    columns = [v[:, k] for _, _, v in found for k in range(2)] + singles
    basis = np.array(columns).T.reshape(d, d)
    t2s = np.exp(1j * beta2) * (basis.conj().T @ t2 @ basis)
    t3s = np.exp(1j * beta3) * (basis.conj().T @ t3 @ basis)
    blocks = []
    for k, (alpha, _, _) in enumerate(found):
        idx = [2 * k, 2 * k + 1]
        blocks.append(Lm2Block(tuple(idx), t2s[np.ix_(idx, idx)], t3s[np.ix_(idx, idx)], alpha))
    block1 = tuple(range(2 * len(found), d))

    mask = np.zeros((d, d), dtype=bool)
    for blk in blocks:
        mask[np.ix_(blk.indices, blk.indices)] = True
    for i in block1:
        mask[i, i] = True
    leaks = [np.abs(t[~mask]).max(initial=0.0) for t in (t2s, t3s)]
    residuals["block_diagonal"] = float(max(leaks))

    worst = max(residuals.values())
    logging.debug(f"_block_gauge: {len(blocks)} block(s), {len(block1)} singles, worst {worst:.3e}")
    if worst > tol.gauge * max(1.0, np.sqrt(d)):
        raise GaugeFailure(residuals)
    return BlockGauge(basis, blocks, block1, beta2, beta3, residuals)


def rank3_standard_form(u: BipartiteOp, tol: Tolerances = DEFAULT_TOL) -> Rank3StandardForm:
    """Standard form of a Schmidt-rank-3 unitary controlled from A"""
    u.require_unitary(tol.unitary)
    rank = schmidt_rank(u, tol.rank)
    if rank != 3:
        raise RankMismatch([3], rank)
    form = detect_controlled(u, Side.A, tol.rank)
    if form is None:
        raise NotControlled(Side.A)

    dA, dB = u.dA, u.dB
    eye = np.eye(dB, dtype=complex)
    ops = form.level_ops()
    v1 = ops[0]
    ts = [v1.conj().T @ op for op in ops]
    t2 = next(t for t in ts if span_rank([eye, t], tol.rank) == 2)
    t3 = next(t for t in ts if span_rank([eye, t2, t], tol.rank) == 3)

    raw = []
    for j, t in enumerate(ts):
        coeffs, res = expand_in([eye, t2, t3], t)
        if res > tol.gauge * max(1.0, np.sqrt(dB)):
            raise GaugeFailure({f"expansion_level_{j}": res})
        raw.append(coeffs)
    raw_arr = np.array(raw)

    s1 = tuple(j for j in range(dA) if abs(raw_arr[j, 2]) <= tol.rank)
    s2 = tuple(j for j in range(dA) if j not in s1 and abs(raw_arr[j, 1]) <= tol.rank)
    s3 = tuple(j for j in range(dA) if j not in s1 and j not in s2)
    piece_ranks = tuple(span_rank([ts[j] for j in piece], tol.rank) for piece in (s1, s2, s3))
    w3_rank = piece_ranks[2]
    kind = Rank3Kind.B_DIRECT_SUM if w3_rank == 3 else Rank3Kind.A_DIRECT_SUM
    logging.debug(f"rank3_standard_form: S1={s1} S2={s2} S3={s3} ranks={piece_ranks} -> {kind}")

    gauge: Optional[BlockGauge]
    try:
        gauge = _block_gauge(t2, t3, tol)
    except GaugeFailure as exc:
        if kind is Rank3Kind.B_DIRECT_SUM:
            raise
        logging.info(f"rank3_standard_form: A-direct-sum input without block structure ({exc})")
        gauge = None

    if gauge is None:
        basis, beta2, beta3, blocks, block1, residuals = eye, 0.0, 0.0, [], (), {}
    else:
        basis, beta2, beta3 = gauge.basis, gauge.beta2, gauge.beta3
        blocks, block1, residuals = gauge.blocks, gauge.block1, dict(gauge.residuals)
    t2s = np.exp(1j * beta2) * (basis.conj().T @ t2 @ basis)
    t3s = np.exp(1j * beta3) * (basis.conj().T @ t3 @ basis)

    coefficients = raw_arr * np.exp(-1j * np.array([0.0, beta2, beta3]))
    a_phases = np.array([np.angle(c[0]) if abs(c[0]) > tol.rank else 0.0 for c in coefficients])
    coefficients = coefficients * np.exp(-1j * a_phases)[:, None]
    c1 = coefficients[:, 0]
    coefficients[:, 0] = np.where(np.abs(c1) > tol.rank, c1.real, 0.0)

    result = Rank3StandardForm(
        kind=kind,
        dA=dA,
        dB=dB,
        a_partition=(s1, s2, s3),
        piece_ranks=piece_ranks,
        w3_rank=w3_rank,
        has_blocks=gauge is not None,
        blocks=blocks,
        block1=block1,
        basis=basis,
        t2=t2s,
        t3=t3s,
        coefficients=coefficients,
        a_phases=a_phases,
        a_perm=form.post[0],
        v1=v1,
        beta=(beta2, beta3),
        residuals=residuals,
    )
    recon = float(np.linalg.norm(result.reconstruct() - u.matrix))
    result.residuals["reconstruction"] = recon
    if recon > tol.gauge * max(1.0, np.sqrt(u.dim)):
        raise GaugeFailure(result.residuals)
    return result


class TypePartition(NamedTuple):
    kind: TypeKind
    classes: List[Indices]

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def __repr__(self) -> str:
        return _fmt_repr("TypePartition", {"kind": self.kind, "classes": self.n_classes})


class TypeReport(NamedTuple):
    input_a: TypePartition
    relative_output_a: int
    relative_counts: List[int]
    output_b: TypePartition

    def __repr__(self) -> str:
        return _fmt_repr(
            "TypeReport",
            {
                "input_a": self.input_a.n_classes,
                "relative_output_a": self.relative_output_a,
                "output_b": self.output_b.n_classes,
            },
        )


def independent_blocks(u: BipartiteOp, tol: float = DEFAULT_TOL.rank) -> List[Matrix]:
    """Greedy basis of the span of all blocks, scanned row by row"""
    rank = schmidt_rank(u, tol)
    basis: List[Matrix] = []
    for row, col in itertools.product(range(u.dA), repeat=2):
        blk = u.block(row, col)
        if np.linalg.norm(blk) <= tol:
            continue
        if span_rank(basis + [blk], tol) > len(basis):
            basis.append(blk)
            if len(basis) == rank:
                break
    return basis


def permutation_type_partitions(u: BipartiteOp, tol: float = DEFAULT_TOL.rank) -> TypeReport:
    profile = _require_permutation(u, tol=tol)
    keys = [
        tuple(sorted(_block_key(blk) for blk in profile.column_blocks(c))) for c in range(u.dA)
    ]
    input_a = TypePartition(TypeKind.INPUT_A, _classes_by_key(keys))
    counts = profile.column_counts
    relative_counts = [int(counts[cls[0]]) for cls in input_a.classes]

    basis = independent_blocks(u, tol)
    patterns = [
        tuple(bool(np.any(np.abs(blk[b, :]) > tol)) for blk in basis) for b in range(u.dB)
    ]
    output_b = TypePartition(TypeKind.OUTPUT_B, _classes_by_key(patterns))
    report = TypeReport(input_a, int(counts.max()), relative_counts, output_b)
    logging.debug(f"permutation_type_partitions: {report}")
    return report


def loose_type_partition(
    u: BipartiteOp, side: Side = Side.A, tol: float = DEFAULT_TOL.rank
) -> TypePartition:
    """Big columns of ``side`` grouped by their block sums"""
    side = Side(side)
    op = u if side is Side.A else swap_sides(u)
    _require_permutation(op, tol=tol)
    sums = [sum(op.block(r, c) for r in range(op.dA)) for c in range(op.dA)]
    kind = TypeKind.LOOSE_A if side is Side.A else TypeKind.LOOSE_B
    return TypePartition(kind, _classes_by_key([_block_key(s) for s in sums]))


def is_partial_permutation(mat: Matrix, tol: float = DEFAULT_TOL.rank) -> bool:
    mat = np.asarray(mat)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        return False
    ones = np.abs(mat - 1) <= tol
    zeros = np.abs(mat) <= tol
    if not np.all(ones | zeros) or not ones.any():
        return False
    return bool(ones.sum(axis=0).max() <= 1 and ones.sum(axis=1).max() <= 1)


def covering_subsets(
    s: Sequence[Matrix], cap: Optional[int] = None, tol: float = DEFAULT_TOL.rank
) -> List[Indices]:
    """Subsets of ``s`` whose members occupy disjoint column sets covering every column"""
    from .costs import bell

    mats = [np.asarray(m) for m in s]
    if not mats:
        raise InvalidInput("covering_subsets: empty input")
    cap = get_settings().covering_cap if cap is None else cap
    if len(mats) > cap:
        raise CapExceeded(len(mats), cap)
    shape = mats[0].shape
    for idx, mat in enumerate(mats):
        if mat.shape != shape:
            raise InvalidInput(f"covering_subsets: member {idx} has shape {mat.shape}, not {shape}")
        if not is_partial_permutation(mat, tol):
            raise InvalidInput(f"covering_subsets: member {idx} is not a partial permutation")
    cols = [frozenset(np.flatnonzero(np.abs(m).sum(axis=0) > 0.5).tolist()) for m in mats]
    full = frozenset(range(shape[1]))
    missing = full - frozenset().union(*cols)
    if missing:
        raise InvalidInput(f"covering_subsets: column(s) {sorted(missing)} occupied by no member")

    found: List[Indices] = []

    def search(cover: frozenset, chosen: Tuple[int, ...]) -> None:
        if cover == full:
            found.append(tuple(sorted(chosen)))
            return
        col = min(full - cover)
        for i, occupied in enumerate(cols):
            if col in occupied and not occupied & cover:
                search(cover | occupied, chosen + (i,))

    search(frozenset(), ())
    found.sort()
    rank = span_rank(mats, tol)
    limit = bell(rank + 1)
    logging.debug(f"covering_subsets: {len(found)} subset(s) for span rank {rank}, limit {limit}")
    if len(found) > limit:
        raise VerificationFailed(f"{len(found)} covering subsets exceed B_{rank + 1} = {limit}")
    return found


def partial_permutations_in_span(
    mats: Sequence[Matrix], cap: Optional[int] = None, tol: float = DEFAULT_TOL.rank
) -> List[np.ndarray]:
    """Every nonzero partial permutation matrix in span(mats)

    A basis reduced to the identity on r pivot entries fixes each 0/1 member
    by its values there, so 2^r - 1 candidates are checked.
    """
    mats = [np.asarray(m, dtype=complex) for m in mats]
    n = mats[0].shape[0]
    stack = np.array([m.reshape(-1) for m in mats])
    rows = scipy.linalg.orth(stack.T, rcond=tol).T
    r = rows.shape[0]
    cap = get_settings().covering_cap if cap is None else cap
    if r > cap:
        raise CapExceeded(r, cap)
    _, _, piv = scipy.linalg.qr(rows, pivoting=True)
    key = piv[:r]
    reduced = np.linalg.solve(rows[:, key], rows)
    found = []
    for bits in itertools.product((0, 1), repeat=r):
        if not any(bits):
            continue
        cand = (np.array(bits, dtype=complex) @ reduced).reshape(n, n)
        if is_partial_permutation(cand, 1e-6):
            found.append(np.rint(cand.real).astype(int))
    logging.debug(f"partial_permutations_in_span: {len(found)} of {2 ** r - 1} candidates")
    return found


Levels = Tuple[Indices, Indices]


class Rank3PermWitness(NamedTuple):
    """How a rank-3 permutation unitary falls into one of the three classes

    For the product-plus-two class the pieces are given on ``side`` as
    (input levels, output levels), so local permutations that move a piece
    onto other output levels are part of the witness.
    """

    tag: PermClass
    side: Side
    dA: int
    dB: int
    form: Optional[ControlledForm] = None
    product_levels: Levels = ((), ())
    product_factors: Optional[Tuple[Matrix, Matrix]] = None
    rest_levels: Levels = ((), ())
    rest_form: Optional[ControlledForm] = None

    def reconstruct(self) -> Matrix:
        if self.form is not None:
            return self.form.reconstruct()
        assert self.product_factors is not None and self.rest_form is not None
        pieces = [
            (self.product_levels, tensor(*self.product_factors)),
            (self.rest_levels, self.rest_form.reconstruct()),
        ]
        if self.side is Side.A:
            return _assemble_levels(self.dA, self.dB, pieces)
        return swap_sides(
            BipartiteOp(_assemble_levels(self.dB, self.dA, pieces), self.dB, self.dA)
        ).matrix

    def __repr__(self) -> str:
        return _fmt_repr("Rank3PermWitness", {"tag": self.tag, "side": self.side})


def level_components(u: BipartiteOp, tol: float = DEFAULT_TOL.rank) -> List[Levels]:
    """Connected pieces of the A level graph joining input k to output j when <j|U|k> != 0"""
    grid = BlockProfile(u, tol).nonzero_block_grid
    n = u.dA
    adj = np.zeros((2 * n, 2 * n), dtype=int)
    adj[:n, n:] = grid
    n_comp, labels = connected_components(csr_matrix(adj), directed=False)
    comps = []
    for k in range(n_comp):
        outs = tuple(int(j) for j in np.flatnonzero(labels[:n] == k))
        ins = tuple(int(c) for c in np.flatnonzero(labels[n:] == k))
        comps.append((ins, outs))
    return sorted(comps)


def restrict_levels(u: BipartiteOp, levels: Levels) -> BipartiteOp:
    """Block of ``U`` from the input levels to the output levels of A"""
    ins, outs = levels
    if len(ins) != len(outs):
        raise DimensionMismatch(len(ins), len(outs))
    b_all = list(range(u.dB))
    sub = u.tensor4[np.ix_(list(outs), b_all, list(ins), b_all)]
    n = len(ins) * u.dB
    return BipartiteOp(sub.reshape(n, n), len(ins), u.dB)


def _assemble_levels(dA: int, dB: int, pieces: Sequence[Tuple[Levels, Matrix]]) -> Matrix:
    out = np.zeros((dA, dB, dA, dB), dtype=complex)
    b_all = list(range(dB))
    for (ins, outs), mat in pieces:
        k = len(ins)
        out[np.ix_(list(outs), b_all, list(ins), b_all)] = np.asarray(mat).reshape(k, dB, k, dB)
    return out.reshape(dA * dB, dA * dB)


def _product_factors(op: BipartiteOp, tol: float) -> Tuple[Matrix, Matrix]:
    osd = operator_schmidt(op, tol)
    return osd.coefficients[0] * osd.a_ops[0], osd.b_ops[0]


def _merge(comps: Sequence[Levels]) -> Levels:
    ins = tuple(sorted(i for c in comps for i in c[0]))
    outs = tuple(sorted(j for c in comps for j in c[1]))
    return ins, outs


def _product_plus_two(u: BipartiteOp, side: Side, tol: float) -> Optional[Rank3PermWitness]:
    v = u if side is Side.A else swap_sides(u)
    comps = level_components(v, tol)
    if not 2 <= len(comps) <= 16:
        return None
    for mask in range(1, 2 ** len(comps) - 1):
        first = _merge([c for k, c in enumerate(comps) if mask >> k & 1])
        second = _merge([c for k, c in enumerate(comps) if not mask >> k & 1])
        op1, op2 = restrict_levels(v, first), restrict_levels(v, second)
        if schmidt_rank(op1, tol) != 1 or schmidt_rank(op2, tol) != 2:
            continue
        for inner in (Side.A, Side.B):
            rest = detect_controlled(op2, inner, tol)
            if rest is not None and rest.n_terms == 2:
                logging.debug(f"classify_rank3_permutation: product on {side} levels {first}")
                return Rank3PermWitness(
                    PermClass.PRODUCT_PLUS_TWO,
                    side,
                    u.dA,
                    u.dB,
                    product_levels=first,
                    product_factors=_product_factors(op1, tol),
                    rest_levels=second,
                    rest_form=rest,
                )
    return None


def classify_rank3_permutation(u: BipartiteOp, tol: float = DEFAULT_TOL.rank) -> Rank3PermWitness:
    _require_permutation(u, tol=tol)
    rank = schmidt_rank(u, tol)
    if rank != 3:
        raise RankMismatch([3], rank)

    for side in (Side.A, Side.B):
        form = detect_controlled(u, side, tol)
        if form is not None and form.n_terms in (3, 4):
            tag = PermClass.CONTROLLED_3 if form.n_terms == 3 else PermClass.CONTROLLED_4
            logging.debug(f"classify_rank3_permutation: {tag} from {side}")
            return Rank3PermWitness(tag, side, u.dA, u.dB, form=form)

    for side in (Side.A, Side.B):
        witness = _product_plus_two(u, side, tol)
        if witness is not None:
            return witness
    raise NotControlled("A or B", msg="no rank-3 permutation class matched")


def rank2_standard_form(
    u: BipartiteOp, complex_ok: bool = False, tol: float = DEFAULT_TOL.rank
) -> ControlledForm:
    """Two-term controlled form of a Schmidt-rank-2 (complex) permutation unitary"""
    _require_permutation(u, complex_ok, tol)
    rank = schmidt_rank(u, tol)
    if rank != 2:
        raise RankMismatch([2], rank)
    for side in (Side.A, Side.B):
        form = detect_controlled(u, side, tol)
        if form is not None and form.n_terms == 2:
            return form
    raise NotControlled("A or B", msg="no two-term controlled form found")


class PartialTransposeCheck(NamedTuple):
    lhs_rank: int
    rhs_rank: int
    k: int
    holds: bool


def partial_transpose_check(
    u: BipartiteOp, k: Optional[int] = None, tol: float = DEFAULT_TOL.rank
) -> PartialTransposeCheck:
    """rank(U) <= k rank(U^T_B)"""
    k = schmidt_rank(u, tol) if k is None else k
    pt = u.tensor4.transpose(0, 3, 2, 1).reshape(u.dim, u.dim)
    lhs, rhs = matrix_rank(u.matrix, tol), matrix_rank(pt, tol)
    return PartialTransposeCheck(lhs, rhs, k, lhs <= k * rhs)


class PerschReport(NamedTuple):
    rank: int
    max_blocks: int
    line: str
    is_real: bool
    costs: Dict[str, float]
    bound: Optional[float]

    def __repr__(self) -> str:
        return _fmt_repr(
            "PerschReport", {"rank": self.rank, "max_blocks": self.max_blocks, "bound": self.bound}
        )


def persch_analysis(u: BipartiteOp, tol: float = DEFAULT_TOL.rank) -> PerschReport:
    """Costs from the largest set of nonzero blocks in one big row or column"""
    profile = _require_permutation(u, complex_ok=True, tol=tol)
    rank = schmidt_rank(u, tol)
    rows = [span_rank(profile.row_blocks(j), tol) for j in range(u.dA)]
    cols = [span_rank(profile.column_blocks(j), tol) for j in range(u.dA)]
    line = "row" if max(rows) >= max(cols) else "column"
    most = max(max(rows), max(cols))

    costs: Dict[str, float] = {}
    bound: Optional[float] = None
    if most == rank:
        costs["full"] = float(np.log2(rank))
        bound = costs["full"]
    elif most == rank - 1 and rank >= 2:
        costs["one_less_n_full"] = 1 + float(np.log2(rank - 1))
        costs["one_less_n0"] = 2 + float(np.log2(rank - 1))
        if profile.is_permutation:
            costs["one_less_n0_real"] = 1 + float(np.log2(rank - 1))
        if rank >= 4:
            costs["one_less_mid"] = max(
                2 + max(float(np.log2(n)), float(np.log2(rank - n - 1))) for n in range(2, rank - 1)
            )
        # n is not recovered, so only the worst applicable case is a bound
        skip = "one_less_n0" if profile.is_permutation else None
        applicable = [v for key, v in costs.items() if key != skip]
        bound = max(applicable)
    return PerschReport(rank, most, line, profile.is_permutation, costs, bound)


class ComplexRank3Profile(NamedTuple):
    diagonal: bool
    two_values: bool
    side: Optional[Side]


def complex_rank3_profile(u: BipartiteOp, tol: float = DEFAULT_TOL.rank) -> ComplexRank3Profile:
    """Whether a rank-3 complex permutation is diagonal up to local permutations"""
    _require_permutation(u, complex_ok=True, tol=tol)
    rank = schmidt_rank(u, tol)
    if rank != 3:
        raise RankMismatch([3], rank)
    for side in (Side.A, Side.B):
        form = detect_controlled(u, side, tol)
        if form is None:
            continue
        ops = form.level_ops()
        pattern = np.abs(ops[0]) > tol
        if not all(np.array_equal(np.abs(op) > tol, pattern) for op in ops):
            continue
        first = ops[0]
        diags = [np.diag(first.conj().T @ op) for op in ops]
        two = any(len(set(cluster_values(d, tol))) == 2 for d in diags)
        return ComplexRank3Profile(True, two, side)
    return ComplexRank3Profile(False, False, None)


class TwoLevelDecomposition(NamedTuple):
    """``U = sum_k (P_k (x) I) S_k`` with each ``S_k`` a controlled unitary"""

    dA: int
    dB: int
    pieces: List[Indices]
    sides: List[Side]
    forms: List[ControlledForm]

    @property
    def higher_terms(self) -> int:
        return len(self.pieces)

    @property
    def lower_terms(self) -> int:
        return max(f.n_terms for f in self.forms)

    @property
    def mixed(self) -> bool:
        return len(set(self.sides)) > 1

    def reconstruct(self) -> Matrix:
        eye_b = np.eye(self.dB)
        return sum(
            tensor(projector(self.dA, idx), eye_b) @ form.reconstruct()
            for idx, form in zip(self.pieces, self.forms)
        )

    def __repr__(self) -> str:
        return _fmt_repr(
            "TwoLevelDecomposition",
            {"M": self.higher_terms, "N": self.lower_terms, "mixed": self.mixed},
        )


def _default_pieces(u: BipartiteOp, tol: float) -> List[Indices]:
    comps = [idx for idx, _ in direct_sum_decompose(u, Side.A, tol)]
    if len(comps) > 1:
        return comps
    form = detect_controlled(u, Side.A, tol)
    if form is None or schmidt_rank(u, tol) != 3:
        return comps
    if not np.allclose(form.post[0], np.eye(u.dA)):
        return comps
    std = rank3_standard_form(u)
    if std.kind is Rank3Kind.A_DIRECT_SUM:
        return [piece for piece in std.a_partition if piece]
    return comps


def two_level_decomposition(
    u: BipartiteOp,
    pieces: Optional[Sequence[Tuple[Sequence[int], Side]]] = None,
    mixed_sides: bool = False,
    tol: float = DEFAULT_TOL.rank,
) -> TwoLevelDecomposition:
    """Split ``U`` along A into pieces that are each controlled from one side"""
    u.require_unitary()
    if pieces is None:
        supports = _default_pieces(u, tol)
        found = {
            idx: {side: detect_controlled(restrict(u, idx), side, tol) for side in (Side.B, Side.A)}
            for idx in supports
        }
        chosen: List[Side] = []
        if mixed_sides:
            for idx in supports:
                options = [(f.n_terms, s) for s, f in found[idx].items() if f is not None]
                if not options:
                    raise NotControlled("A or B", msg=f"piece {idx} is not controlled")
                chosen.append(min(options, key=lambda o: o[0])[1])
        else:
            best = None
            for side in (Side.B, Side.A):
                forms = [found[idx][side] for idx in supports]
                if all(f is not None for f in forms):
                    n = max(f.n_terms for f in forms)
                    if best is None or n < best[0]:
                        best = (n, side)
            if best is None:
                raise NotControlled("A or B", msg="pieces are not controlled from a common side")
            chosen = [best[1]] * len(supports)
        spec = list(zip(supports, chosen))
    else:
        spec = [(tuple(int(i) for i in idx), Side(side)) for idx, side in pieces]

    covered = sorted(i for idx, _ in spec for i in idx)
    if covered != list(range(u.dA)):
        raise InvalidInput(f"pieces {[idx for idx, _ in spec]} do not partition the A levels")

    forms = []
    for idx, side in spec:
        form = detect_controlled(restrict(u, idx), side, tol)
        if form is None:
            raise NotControlled(side, msg=f"piece {tuple(idx)} is not controlled from {side}")
        forms.append(form.embedded(idx, u.dA))
    n_lower = max(f.n_terms for f in forms)
    result = TwoLevelDecomposition(
        u.dA,
        u.dB,
        [tuple(idx) for idx, _ in spec],
        [side for _, side in spec],
        [f.padded(n_lower) for f in forms],
    )
    res = float(np.linalg.norm(result.reconstruct() - u.matrix))
    if res > tol * max(1.0, np.sqrt(u.dim)):
        raise InvalidInput(f"pieces do not split the operator (residual {res:.3e})")
    logging.debug(f"two_level_decomposition: {result}")
    return result


def traits(u: BipartiteOp, tol: float = DEFAULT_TOL.rank) -> Traits:
    if not u.is_unitary():
        return Traits.NONE
    profile = BlockProfile(u, tol)
    flags = Traits.UNITARY
    if profile.is_complex_permutation:
        flags |= Traits.COMPLEX_PERMUTATION
    if profile.is_permutation:
        flags |= Traits.PERMUTATION
    if profile.is_diagonal:
        flags |= Traits.DIAGONAL
    if detect_controlled(u, Side.A, tol) is not None:
        flags |= Traits.CONTROLLED_A
    if detect_controlled(u, Side.B, tol) is not None:
        flags |= Traits.CONTROLLED_B
    if schmidt_rank(u, tol) == 1:
        flags |= Traits.PRODUCT
    return flags
