"""Finite groups given by multiplication tables, their projective representations,
and group-type expansions ``U = sum_f V(f) (x) W(f)``.
"""
import itertools
import logging
from functools import lru_cache
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .enums import Side
from .errors import DimensionMismatch, ExpansionResidual, GroupError
from .linalg import (
    BipartiteOp,
    Matrix,
    clock,
    null_space,
    reshuffle,
    shift,
    swap_sides,
    tensor,
    unitarity_residual,
)
from .util import DEFAULT_TOL, _fmt_repr


class FiniteGroup:
    """Elements are ``0 .. order-1``; ``table[f, g]`` is the index of ``fg``"""

    def __init__(self, name: str, labels: Sequence[str], table) -> None:
        self.name = name
        self.labels = list(labels)
        self.table = np.asarray(table, dtype=int)
        n = len(self.labels)
        if self.table.shape != (n, n):
            raise GroupError(f"{name}: table shape {self.table.shape} for {n} elements")
        if self.table.min() < 0 or self.table.max() >= n:
            raise GroupError(f"{name}: table entries out of range")
        ids = [e for e in range(n) if np.array_equal(self.table[e], np.arange(n))]
        if not ids:
            raise GroupError(f"{name}: no identity element")
        self.identity = ids[0]
        self.inverses = []
        for f in range(n):
            inv = [g for g in range(n) if self.table[f, g] == self.identity]
            if len(inv) != 1:
                raise GroupError(f"{name}: element {self.labels[f]} has no unique inverse")
            self.inverses.append(inv[0])
        self.assert_is_group()

    @property
    def order(self) -> int:
        return len(self.labels)

    def mul(self, f: int, g: int) -> int:
        return int(self.table[f, g])

    def assert_is_group(self) -> None:
        t = self.table
        for f, g, h in itertools.product(range(self.order), repeat=3):
            if t[t[f, g], h] != t[f, t[g, h]]:
                raise GroupError(f"{self.name}: multiplication is not associative")
        for f in range(self.order):
            if t[self.identity, f] != f or t[self.inverses[f], f] != self.identity:
                raise GroupError(f"{self.name}: identity or inverse fails on {self.labels[f]}")

    def __repr__(self) -> str:
        return f"<FiniteGroup {self.name} order={self.order}>"


class Representation:
    """Projective unitary representation ``f -> V(f)`` of a finite group"""

    def __init__(self, group: FiniteGroup, mats: Sequence[Matrix]) -> None:
        if len(mats) != group.order:
            raise GroupError(f"{group.name}: {len(mats)} matrices for {group.order} elements")
        self.group = group
        self.mats = [np.asarray(m, dtype=complex) for m in mats]
        dims = {m.shape for m in self.mats}
        if len(dims) != 1:
            raise GroupError(f"{group.name}: matrices of different shapes {sorted(dims)}")

    @property
    def dim(self) -> int:
        return self.mats[0].shape[0]

    @property
    def order(self) -> int:
        return self.group.order

    def factor_system(self, tol: float = DEFAULT_TOL.unitary) -> np.ndarray:
        """``sigma[f, g]`` with ``V(f) V(g) = sigma[f, g] V(fg)``"""
        n, d = self.order, self.dim
        scale = max(1.0, np.sqrt(d))
        for f, mat in enumerate(self.mats):
            if unitarity_residual(mat) > tol * scale:
                raise GroupError(f"{self.group.name}: V({self.group.labels[f]}) is not unitary")
        sigma = np.zeros((n, n), dtype=complex)
        for f, g in itertools.product(range(n), repeat=2):
            prod = self.mats[f] @ self.mats[g]
            fg = self.mats[self.group.mul(f, g)]
            s = np.trace(fg.conj().T @ prod) / d
            if abs(abs(s) - 1) > tol * 10 or np.linalg.norm(prod - s * fg) > tol * scale:
                raise GroupError(
                    f"{self.group.name}: not a projective representation at "
                    f"({self.group.labels[f]}, {self.group.labels[g]})"
                )
            sigma[f, g] = s / abs(s)
        return sigma

    def right_regular(self, sigma: Optional[np.ndarray] = None) -> List[Matrix]:
        """Twisted right regular representation with the same factor system"""
        sigma = self.factor_system() if sigma is None else sigma
        grp = self.group
        n = grp.order
        out = []
        for f in range(n):
            mat = np.zeros((n, n), dtype=complex)
            for g in range(n):
                h = grp.mul(g, grp.inverses[f])
                mat[h, g] = sigma[h, f]
            out.append(mat)
        return out

    def conjugated(self, basis: Matrix) -> "Representation":
        basis = np.asarray(basis, dtype=complex)
        return Representation(self.group, [basis @ m @ basis.conj().T for m in self.mats])

    def __repr__(self) -> str:
        return f"<Representation {self.group.name} dim={self.dim}>"


def trivial_group(d: int = 1) -> Representation:
    return Representation(FiniteGroup("1", ["e"], [[0]]), [np.eye(d, dtype=complex)])


def pauli_group(d: int) -> Representation:
    """``X^j Z^k`` over Z_d x Z_d; spans every d x d matrix"""
    labels = [f"X{j}Z{k}" for j in range(d) for k in range(d)]
    table = [
        [((j1 + j2) % d) * d + (k1 + k2) % d for j2 in range(d) for k2 in range(d)]
        for j1 in range(d)
        for k1 in range(d)
    ]
    mats = [shift(d, j) @ clock(d, k) for j in range(d) for k in range(d)]
    return Representation(FiniteGroup(f"Z{d}xZ{d}", labels, table), mats)


def klein_four(t2: Matrix, t3: Matrix) -> Representation:
    """``{I, T2, T3, T2 T3}`` for two involutions that commute or anticommute"""
    t2 = np.asarray(t2, dtype=complex)
    labels = ["e", "a", "b", "ab"]
    table = [[f ^ g for g in range(4)] for f in range(4)]
    mats = [np.eye(t2.shape[0], dtype=complex), t2, np.asarray(t3, dtype=complex), t2 @ t3]
    return Representation(FiniteGroup("Z2xZ2", labels, table), mats)


@lru_cache(maxsize=None)
def dihedral_group(n: int) -> FiniteGroup:
    """Order 2n; ``r_i`` at index i and ``s_i = r_i s`` at index n + i"""
    if n < 1:
        raise GroupError(f"dihedral group needs n >= 1, got {n}")
    labels = [f"r{i}" for i in range(n)] + [f"s{i}" for i in range(n)]
    table = np.zeros((2 * n, 2 * n), dtype=int)
    for i, j in itertools.product(range(n), repeat=2):
        table[i, j] = (i + j) % n
        table[i, j + n] = n + (i + j) % n
        table[i + n, j] = n + (i - j) % n
        table[i + n, j + n] = (i - j) % n
    return FiniteGroup(f"D{2 * n}", labels, table)


def dihedral_irrep(n: int, k: int) -> List[Matrix]:
    """Two-dimensional irrep ``r -> diag(w^k, w^-k)``, ``s -> [[0, 1], [1, 0]]``"""
    omega = np.exp(2j * np.pi * k / n)
    flip = np.array([[0, 1], [1, 0]], dtype=complex)
    rots = [np.diag([omega**i, omega ** (-i)]) for i in range(n)]
    return rots + [r @ flip for r in rots]


def dihedral_representation(dB: int) -> Representation:
    """Every two-dimensional irrep of D_2n with n = 2 floor(dB/2) + 1, plus a trivial one for odd dB

    Consecutive pairs of levels carry distinct irreps, so the span covers every
    operator that is block diagonal in those pairs.
    """
    if dB < 1:
        raise GroupError(f"dimension must be positive, got {dB}")
    half = dB // 2
    n = 2 * half + 1
    grp = dihedral_group(n)
    irreps = [dihedral_irrep(n, k) for k in range(1, half + 1)]
    mats = []
    for f in range(grp.order):
        parts = [irr[f] for irr in irreps]
        if dB % 2:
            parts.append(np.ones((1, 1), dtype=complex))
        mats.append(scipy.linalg.block_diag(*parts))
    logging.debug(f"dihedral_representation: dB={dB} on {grp}")
    return Representation(grp, mats)


class GroupExpansion(NamedTuple):
    rep: Representation
    side: Side
    w_ops: List[Matrix]
    regular: List[Matrix]
    completed: Matrix
    completion_rank: int
    residual: float

    @property
    def order(self) -> int:
        return self.rep.order

    def reconstruct(self) -> Matrix:
        if self.side is Side.A:
            return sum(tensor(v, w) for v, w in zip(self.rep.mats, self.w_ops))
        return sum(tensor(w, v) for v, w in zip(self.rep.mats, self.w_ops))

    def __repr__(self) -> str:
        return _fmt_repr(
            "GroupExpansion",
            {
                "group": self.rep.group.name,
                "side": self.side,
                "completion_rank": self.completion_rank,
            },
        )


def _ideal_projector(vmat: Matrix, regular: Sequence[Matrix], tol: float) -> Tuple[Matrix, int]:
    """Unit of the ideal of the group algebra that ``rep`` sends to zero"""
    n = len(regular)
    kernel = null_space(vmat, tol)
    if kernel.shape[1] == 0:
        return np.zeros((n, n), dtype=complex), 0
    members = [sum(kernel[f, i] * regular[f] for f in range(n)) for i in range(kernel.shape[1])]
    span = scipy.linalg.orth(np.hstack(members), rcond=tol)
    return span @ span.conj().T, span.shape[1]


def solve_group_expansion(
    u: BipartiteOp,
    rep: Representation,
    side: Side = Side.A,
    tol: float = DEFAULT_TOL.reconstruction,
) -> GroupExpansion:
    """Find ``W`` with ``U = sum_f V(f) (x) W(f)`` (``V`` on ``side``).

    When the span of ``V`` misses some irreps the expansion is not unique; the
    returned one makes ``sum_f K(f) (x) W(f)`` unitary, ``K`` being the twisted
    right regular representation, by acting as the identity on the missing irreps.
    """
    side = Side(side)
    op = u if side is Side.A else swap_sides(u)
    if rep.dim != op.dA:
        raise DimensionMismatch(op.dA, rep.dim, msg=f"representation acts on {rep.dim} levels")
    sigma = rep.factor_system()
    n, dW = rep.order, op.dB
    scale = max(1.0, np.sqrt(op.dim))

    vmat = np.array([v.reshape(-1) for v in rep.mats]).T
    target = reshuffle(op)
    w0, *_ = np.linalg.lstsq(vmat, target, rcond=None)
    residual = float(np.linalg.norm(vmat @ w0 - target))
    if residual > tol * scale * 10:
        raise ExpansionResidual(residual)

    regular = rep.right_regular(sigma)
    ideal, rank = _ideal_projector(vmat, regular, DEFAULT_TOL.rank)
    eye_w = np.eye(dW, dtype=complex)
    first = sum(tensor(regular[f], w0[f].reshape(dW, dW)) for f in range(n))
    completed = tensor(np.eye(n) - ideal, eye_w) @ first + tensor(ideal, eye_w)

    blocks = completed.reshape(n, dW, n, dW)
    w_ops = [np.einsum("ij,iajb->ab", regular[f].conj(), blocks) / n for f in range(n)]
    result = GroupExpansion(rep, side, w_ops, regular, completed, rank, residual)

    recon = float(np.linalg.norm(result.reconstruct() - u.matrix))
    if recon > tol * scale * 10:
        raise ExpansionResidual(recon)
    if unitarity_residual(completed) > DEFAULT_TOL.unitary * max(1.0, np.sqrt(n * dW)):
        raise ExpansionResidual(
            unitarity_residual(completed), msg="completed expansion is not unitary"
        )
    logging.debug(f"solve_group_expansion: {result} residual {recon:.3e}")
    return result
