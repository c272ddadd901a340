"""Dense complex linear algebra on bipartite operators.

Composite basis index is zero-based and A-major: ``i = a * dB + b``.
"""
import logging
from typing import Iterable, List, NamedTuple, Optional, Sequence, Union

import numpy as np
import scipy.linalg
from scipy.stats import unitary_group

from .errors import DimensionMismatch, NotDensity, NotUnitary, ZeroOperator
from .util import DEFAULT_TOL

Matrix = np.ndarray


class BipartiteOp:
    dA: int
    dB: int
    matrix: Matrix

    def __init__(self, matrix, dA: int, dB: int) -> None:
        mat = np.array(matrix, dtype=complex)
        if mat.shape != (dA * dB, dA * dB):
            raise DimensionMismatch((dA * dB, dA * dB), mat.shape)
        if not np.all(np.isfinite(mat)):
            raise ValueError("operator has non-finite entries")
        mat.setflags(write=False)
        self.dA = dA
        self.dB = dB
        self.matrix = mat

    @classmethod
    def from_perm(cls, dA: int, dB: int, entries: Iterable) -> "BipartiteOp":
        """Build from (col, row[, phase]) triples"""
        dim = dA * dB
        mat = np.zeros((dim, dim), dtype=complex)
        for entry in entries:
            col, row = int(entry[0]), int(entry[1])
            phase = complex(entry[2]) if len(entry) > 2 else 1.0
            if not (0 <= col < dim and 0 <= row < dim):
                raise DimensionMismatch(dim, max(col, row) + 1)
            mat[row, col] = phase
        return cls(mat, dA, dB)

    @classmethod
    def from_blocks(cls, blocks: Sequence[Sequence[Optional[Matrix]]], dB: int) -> "BipartiteOp":
        """Assemble from a dA x dA grid of dB x dB blocks (None is a zero block)"""
        dA = len(blocks)
        zero = np.zeros((dB, dB), dtype=complex)
        rows = [
            [zero if blk is None else np.asarray(blk, dtype=complex) for blk in row]
            for row in blocks
        ]
        return cls(np.block(rows), dA, dB)

    @property
    def dim(self) -> int:
        return self.dA * self.dB

    @property
    def tensor4(self) -> Matrix:
        """View with axes (a_out, b_out, a_in, b_in)"""
        return self.matrix.reshape(self.dA, self.dB, self.dA, self.dB)

    def block(self, row: int, col: int) -> Matrix:
        dB = self.dB
        return self.matrix[row * dB : (row + 1) * dB, col * dB : (col + 1) * dB]

    def unitarity_residual(self) -> float:
        return unitarity_residual(self.matrix)

    def is_unitary(self, tol: float = DEFAULT_TOL.unitary) -> bool:
        return self.unitarity_residual() <= tol * max(1.0, np.sqrt(self.dim))

    def require_unitary(self, tol: float = DEFAULT_TOL.unitary) -> None:
        res = self.unitarity_residual()
        if res > tol * max(1.0, np.sqrt(self.dim)):
            raise NotUnitary(res)

    def local(self, a_op: Optional[Matrix] = None, b_op: Optional[Matrix] = None) -> Matrix:
        a_op = np.eye(self.dA) if a_op is None else a_op
        b_op = np.eye(self.dB) if b_op is None else b_op
        return tensor(a_op, b_op)

    def __matmul__(self, other: "BipartiteOp") -> "BipartiteOp":
        if (self.dA, self.dB) != (other.dA, other.dB):
            raise DimensionMismatch((self.dA, self.dB), (other.dA, other.dB))
        return BipartiteOp(self.matrix @ other.matrix, self.dA, self.dB)

    def dagger(self) -> "BipartiteOp":
        return BipartiteOp(self.matrix.conj().T, self.dA, self.dB)

    def __repr__(self) -> str:
        return f"<BipartiteOp dA={self.dA} dB={self.dB}>"


class OperatorSchmidt(NamedTuple):
    rank: int
    coefficients: np.ndarray
    a_ops: List[Matrix]
    b_ops: List[Matrix]

    def reconstruct(self) -> Matrix:
        return sum(c * tensor(a, b) for c, a, b in zip(self.coefficients, self.a_ops, self.b_ops))

    def __repr__(self) -> str:
        return f"<OperatorSchmidt rank={self.rank}>"


def tensor(a, b) -> Matrix:
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def unitarity_residual(mat: Matrix) -> float:
    mat = np.asarray(mat)
    return float(np.linalg.norm(mat.conj().T @ mat - np.eye(mat.shape[1])))


def reshuffle(u: BipartiteOp) -> Matrix:
    """dA^2 x dB^2 matrix with row (a, a') and column (b, b')"""
    return u.tensor4.transpose(0, 2, 1, 3).reshape(u.dA * u.dA, u.dB * u.dB)


def operator_schmidt(u: BipartiteOp, tol: float = DEFAULT_TOL.rank) -> OperatorSchmidt:
    mat = reshuffle(u)
    xs, svals, yh = np.linalg.svd(mat, full_matrices=False)
    if svals.size == 0 or svals[0] == 0.0:
        raise ZeroOperator()
    rank = int(np.sum(svals > tol * svals[0]))
    a_ops = [xs[:, j].reshape(u.dA, u.dA) for j in range(rank)]
    b_ops = [yh[j, :].reshape(u.dB, u.dB) for j in range(rank)]
    logging.debug(f"operator_schmidt: dA={u.dA} dB={u.dB} rank={rank}")
    return OperatorSchmidt(rank, svals[:rank].copy(), a_ops, b_ops)


def schmidt_rank(u: BipartiteOp, tol: float = DEFAULT_TOL.rank) -> int:
    return operator_schmidt(u, tol).rank


def check_density(rho: Matrix, tol: float = 1e-9) -> np.ndarray:
    """Eigenvalues of ``rho`` after checking it is a density matrix"""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise NotDensity("square", float("nan"))
    herm = float(np.abs(rho - rho.conj().T).max())
    if herm > tol:
        raise NotDensity("hermitian", herm)
    trace = float(np.real(np.trace(rho)))
    if abs(trace - 1.0) > tol:
        raise NotDensity("trace", trace)
    evals = np.linalg.eigvalsh((rho + rho.conj().T) / 2)
    if evals.min() < -tol:
        raise NotDensity("positive", float(evals.min()))
    return evals


def von_neumann_entropy(rho: Matrix, tol: float = 1e-9, cutoff: float = 1e-12) -> float:
    """Entropy in bits; eigenvalues below ``cutoff`` count as zero"""
    evals = check_density(rho, tol)
    evals = evals[evals > cutoff]
    return float(max(0.0, -np.sum(evals * np.log2(evals))))


def partial_trace(state: Matrix, dims: Sequence[int], keep: Iterable[int]) -> Matrix:
    state = np.asarray(state, dtype=complex)
    dims = list(dims)
    total = int(np.prod(dims))
    if state.shape != (total, total):
        raise DimensionMismatch((total, total), state.shape)
    keep = sorted(set(keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise DimensionMismatch(len(dims), keep)
    n = len(dims)
    tens = state.reshape(dims + dims)
    # trace from the last factor so earlier axis numbers stay valid
    for idx in reversed(range(n)):
        if idx in keep:
            continue
        cur = tens.ndim // 2
        tens = np.trace(tens, axis1=idx, axis2=idx + cur)
    dk = int(np.prod([dims[k] for k in keep])) if keep else 1
    return tens.reshape(dk, dk)


def choi_of_operator(mat: Matrix) -> Matrix:
    mat = np.asarray(mat, dtype=complex)
    vec = mat.T.reshape(-1)
    return np.outer(vec, vec.conj())


def choi_of_unitary(u: Union[BipartiteOp, Matrix], tol: float = DEFAULT_TOL.unitary) -> Matrix:
    mat = u.matrix if isinstance(u, BipartiteOp) else np.asarray(u, dtype=complex)
    res = unitarity_residual(mat)
    if res > tol * max(1.0, np.sqrt(mat.shape[0])):
        raise NotUnitary(res)
    return choi_of_operator(mat)


def choi_distance(c1: Matrix, c2: Matrix) -> float:
    """Frobenius distance after aligning the global phase of ``c1`` to ``c2``"""
    overlap = np.vdot(c1, c2)
    phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0
    return float(np.linalg.norm(c1 * phase - c2))


def cluster_values(values: Sequence[complex], tol: float = DEFAULT_TOL.cluster) -> List[int]:
    """Single-linkage cluster labels, numbered by first appearance"""
    vals = np.asarray(list(values), dtype=complex)
    n = len(vals)
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(vals[i] - vals[j]) <= tol:
                parent[find(j)] = find(i)
    labels: dict = {}
    out = []
    for i in range(n):
        root = find(i)
        if root not in labels:
            labels[root] = len(labels)
        out.append(labels[root])
    return out


def distinct_values(values: Sequence[complex], tol: float = DEFAULT_TOL.cluster) -> int:
    labels = cluster_values(values, tol)
    return max(labels) + 1 if labels else 0


def span_rank(mats: Sequence[Matrix], tol: float = DEFAULT_TOL.rank) -> int:
    if not len(mats):
        return 0
    stack = np.array([np.asarray(m, dtype=complex).reshape(-1) for m in mats])
    svals = np.linalg.svd(stack, compute_uv=False)
    if svals[0] == 0.0:
        return 0
    return int(np.sum(svals > tol * svals[0]))


def expand_in(basis: Sequence[Matrix], target: Matrix) -> tuple:
    """Least-squares coefficients of ``target`` in ``basis`` and the residual norm"""
    stack = np.array([np.asarray(m, dtype=complex).reshape(-1) for m in basis]).T
    vec = np.asarray(target, dtype=complex).reshape(-1)
    coeffs, *_ = np.linalg.lstsq(stack, vec, rcond=None)
    return coeffs, float(np.linalg.norm(stack @ coeffs - vec))


def matrix_rank(mat: Matrix, tol: float = DEFAULT_TOL.rank) -> int:
    svals = np.linalg.svd(np.asarray(mat, dtype=complex), compute_uv=False)
    if svals.size == 0 or svals[0] == 0.0:
        return 0
    return int(np.sum(svals > tol * svals[0]))


def swap_sides(u: BipartiteOp) -> BipartiteOp:
    """The same operator with the A and B factors exchanged"""
    mat = u.tensor4.transpose(1, 0, 3, 2).reshape(u.dim, u.dim)
    return BipartiteOp(mat, u.dB, u.dA)


def shift(n: int, power: int = 1) -> Matrix:
    """X^power with X|k> = |k+1 mod n>"""
    return np.roll(np.eye(n, dtype=complex), power % n if n else 0, axis=0)


def clock(n: int, power: int = 1) -> Matrix:
    omega = np.exp(2j * np.pi / n)
    return np.diag(omega ** (power * np.arange(n)))


def fourier(n: int) -> Matrix:
    jk = np.outer(np.arange(n), np.arange(n))
    return np.exp(2j * np.pi * jk / n) / np.sqrt(n)


def perm_matrix(mapping: Sequence[int]) -> Matrix:
    """Permutation matrix sending |k> to |mapping[k]>"""
    n = len(mapping)
    mat = np.zeros((n, n), dtype=complex)
    mat[list(mapping), list(range(n))] = 1.0
    return mat


def projector(n: int, support: Iterable[int]) -> Matrix:
    diag = np.zeros(n, dtype=complex)
    diag[list(support)] = 1.0
    return np.diag(diag)


def random_unitary(d: int, rng: Optional[np.random.Generator] = None) -> Matrix:
    rng = np.random.default_rng() if rng is None else rng
    if d == 1:
        return np.exp(2j * np.pi * rng.random()) * np.ones((1, 1), dtype=complex)
    return np.asarray(unitary_group.rvs(d, random_state=rng), dtype=complex)


def normal_eig(mat: Matrix) -> tuple:
    """Eigen-decomposition of a normal matrix through the complex Schur form"""
    tri, vecs = scipy.linalg.schur(np.asarray(mat, dtype=complex), output="complex")
    return np.diag(tri).copy(), vecs


def null_space(mat: Matrix, tol: float = DEFAULT_TOL.rank) -> Matrix:
    mat = np.asarray(mat, dtype=complex)
    if mat.size == 0:
        return np.eye(mat.shape[1], dtype=complex)
    return scipy.linalg.null_space(mat, rcond=tol)
