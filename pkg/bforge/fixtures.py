"""Generators for the named bipartite operators used throughout the test-suite and CLI"""
import logging
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .errors import FixtureError
from .linalg import BipartiteOp, perm_matrix, schmidt_rank, shift, swap_sides, tensor

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def controlled_from_a(blocks: Sequence[np.ndarray]) -> BipartiteOp:
    """Sum of |j><j| (x) blocks[j]"""
    dA = len(blocks)
    dB = np.asarray(blocks[0]).shape[0]
    grid: List[List[Optional[np.ndarray]]] = [[None] * dA for _ in range(dA)]
    for j, blk in enumerate(blocks):
        grid[j][j] = blk
    return BipartiteOp.from_blocks(grid, dB)


def _direct_sum(*mats: np.ndarray) -> np.ndarray:
    size = sum(m.shape[0] for m in mats)
    out = np.zeros((size, size), dtype=complex)
    pos = 0
    for m in mats:
        k = m.shape[0]
        out[pos : pos + k, pos : pos + k] = m
        pos += k
    return out


def _eye(n: int) -> np.ndarray:
    return np.eye(n, dtype=complex)


def identity(dA: int = 2, dB: int = 2) -> BipartiteOp:
    return BipartiteOp(np.eye(dA * dB), dA, dB)


def cnot() -> BipartiteOp:
    return controlled_from_a([_eye(2), PAULI_X])


def swap() -> BipartiteOp:
    entries = [(a * 2 + b, b * 2 + a) for a in range(2) for b in range(2)]
    return BipartiteOp.from_perm(2, 2, entries)


def dcnot() -> BipartiteOp:
    """|a, b> -> |b, a xor b>"""
    entries = [(a * 2 + b, b * 2 + (a ^ b)) for a in range(2) for b in range(2)]
    return BipartiteOp.from_perm(2, 2, entries)


def uketbra11() -> BipartiteOp:
    """Product permutation on A level 0 plus a two-term controlled permutation on levels 1, 2"""
    p12 = np.diag([0, 1, 1]).astype(complex)
    x12 = np.zeros((3, 3), dtype=complex)
    x12[1, 2] = x12[2, 1] = 1
    p0 = np.diag([1, 0, 0]).astype(complex)
    mat = tensor(p0, PAULI_X) + tensor(p12, np.diag([1, 0])) + tensor(x12, np.diag([0, 1]))
    return BipartiteOp(mat, 3, 2)


def example4() -> BipartiteOp:
    t1 = np.diag([1, 1, 1, 0, 0, 0]).astype(complex)
    t2 = np.zeros((6, 6), dtype=complex)
    for k in range(3):
        t2[k, k + 3] = 1
    t3 = t2.T.copy()
    t4 = np.zeros((6, 6), dtype=complex)
    t4[3, 4] = t4[4, 3] = t4[5, 5] = 1
    grid = [
        [t1, t3, None, None, None],
        [t2, None, t3, None, None],
        [None, t2, None, t3, None],
        [None, None, t2, None, t3],
        [None, None, None, t2, t4],
    ]
    return BipartiteOp.from_blocks(grid, 6)


def m_family(r: int = 3) -> BipartiteOp:
    """Controlled permutation with 2^(r-1) distinct diagonal blocks and Schmidt rank r"""
    if r < 2:
        raise FixtureError("m_family", "r must be at least 2")
    dB = 2 * r - 2
    blocks = []
    for bits in range(2 ** (r - 1)):
        mapping = list(range(dB))
        for k in range(r - 1):
            if bits >> k & 1:
                mapping[2 * k], mapping[2 * k + 1] = 2 * k + 1, 2 * k
        blocks.append(perm_matrix(mapping))
    return controlled_from_a(blocks)


def b_controlled(r: int = 3) -> BipartiteOp:
    """r-term permutation controlled from B: sum_k X^k (x) |k><k|"""
    if r < 1:
        raise FixtureError("b_controlled", "r must be positive")
    mat = sum(tensor(shift(r, k), np.diag(np.eye(r)[k])) for k in range(r))
    return BipartiteOp(mat, r, r)


def case_i1(m: int = 0, n: int = 2, q: int = 2) -> BipartiteOp:
    """Three-term controlled permutation D1(x)I + D2(x)(I+I+V1) + D3(x)(I+V3+I)"""
    if n < 2 or q < 2 or m < 0:
        raise FixtureError("case_i1", "need m >= 0 and n, q >= 2")
    blocks = [
        _eye(m + n + q),
        _direct_sum(_eye(m), _eye(n), shift(q)),
        _direct_sum(_eye(m), shift(n), _eye(q)),
    ]
    return controlled_from_a([b for b in blocks])


def case_i3(n: int = 2, q: int = 2, p: int = 2) -> BipartiteOp:
    """Three-term controlled permutation whose two non-identity blocks share a shift"""
    if min(n, q, p) < 2:
        raise FixtureError("case_i3", "need n, q, p >= 2")
    blocks = [
        _eye(n + q + p),
        _direct_sum(_eye(n), shift(q), shift(p)),
        _direct_sum(shift(n), _eye(q), shift(p)),
    ]
    return controlled_from_a(blocks)


def perm_u_4terms(m: int = 0, n: int = 2, q: int = 2) -> BipartiteOp:
    if n < 2 or q < 2 or m < 0:
        raise FixtureError("perm_u_4terms", "need m >= 0 and n, q >= 2")
    blocks = [
        _eye(m + n + q),
        _direct_sum(_eye(m), _eye(n), shift(q)),
        _direct_sum(_eye(m), shift(n), _eye(q)),
        _direct_sum(_eye(m), shift(n), shift(q)),
    ]
    return controlled_from_a(blocks)


def example1(
    n: int = 2,
    ts: Sequence[float] = (0.0, 1.0),
    thetas: Sequence[float] = (0.3, 0.7, 1.1),
    phis: Sequence[float] = (0.4, 0.9, 1.3),
) -> BipartiteOp:
    """Rank-3 controlled unitary whose B operators anticommute pairwise"""
    if len(ts) != n:
        raise FixtureError("example1", f"need {n} values of t, got {len(ts)}")
    if len(thetas) != len(phis):
        raise FixtureError("example1", "thetas and phis differ in length")
    t2 = _direct_sum(*[PAULI_Z] * n)
    t3 = _direct_sum(*[np.cos(t) * PAULI_X + np.sin(t) * PAULI_Y for t in ts])
    blocks = [_eye(2 * n), t2, t3]
    for theta, phi in zip(thetas, phis):
        mix = np.cos(phi) * t2 + np.sin(phi) * t3
        blocks.append(np.cos(theta) * _eye(2 * n) + 1j * np.sin(theta) * mix)
    return controlled_from_a(blocks)


def example2_coefficients(y: float, t: float) -> Tuple[float, complex, complex]:
    if not 0 < t < 1:
        raise FixtureError("example2", f"t must lie in (0, 1), got {t}")
    if y <= 1 / t:
        raise FixtureError("example2", f"y must exceed 1/t = {1 / t}, got {y}")
    ty = t * y
    c1 = (ty - 1) / np.sqrt((1 + y * y) * (ty - 1) ** 2 + ty * ty)
    return c1, 1j * c1 * ty / (ty - 1), 1j * c1 * y


def example2_relation(y: float, t: float, b: float) -> float:
    """Left side minus right side of the unit-modulus condition on the diagonal entries"""
    c1, c2, c3 = example2_coefficients(y, t)
    c2t, c3t = c2.imag, c3.imag
    cross = -2 * c1 * c2t * b - 2 * c1 * c3t * t * b + 2 * c2t * c3t * t * b
    return c1**2 + c2t**2 + c3t**2 + cross - 1


def _example2_blocks(t: float, b: float) -> Tuple[np.ndarray, np.ndarray]:
    if not 0 < b <= 1:
        raise FixtureError("example2", f"b must lie in (0, 1], got {b}")
    re2 = np.sqrt(1 - b * b)
    t2 = np.diag([re2 + 1j * b, -re2 + 1j * b])
    re3 = t * b * np.sqrt((1 - b) / (1 + b))
    d3 = re3 + 1j * t * b
    off = np.sqrt(max(0.0, 1 - abs(d3) ** 2))
    t3 = np.array([[d3, off], [off, -re3 + 1j * t * b]])
    return t2, t3


def example2(
    t: float = 0.5, ys: Sequence[float] = (3.0, 4.0, 6.0), bs: Sequence[float] = (0.3, 0.7)
) -> BipartiteOp:
    """Rank-3 controlled unitary built from 2x2 blocks only"""
    for y in ys:
        for b in bs:
            res = example2_relation(y, t, b)
            if abs(res) > 1e-12:
                raise FixtureError("example2", f"relation fails for y={y}, b={b} ({res:.3e})")
    pairs = [_example2_blocks(t, b) for b in bs]
    t2 = _direct_sum(*[p[0] for p in pairs])
    t3 = _direct_sum(*[p[1] for p in pairs])
    dB = t2.shape[0]
    blocks = [_eye(dB), t2, t3]
    for y in ys:
        c1, c2, c3 = example2_coefficients(y, t)
        blocks.append(c1 * _eye(dB) + c2 * t2 + c3 * t3)
    u = controlled_from_a(blocks)
    if not u.is_unitary():
        raise FixtureError("example2", f"result is not unitary ({u.unitarity_residual():.3e})")
    return u


def diag_rank3() -> BipartiteOp:
    """Rank-3 diagonal controlled unitary on 6 x 3 with a rank-3 mixed part"""
    blocks = [
        np.diag([1, 1, 1]),
        np.diag([1, -1, 1]),
        np.diag([1, 1, -1]),
        np.diag([1, -1, -1]),
        np.diag([1, 1j, -1]),
        np.diag([1j, 1, 1]),
    ]
    return controlled_from_a([np.asarray(b, dtype=complex) for b in blocks])


FIRST_STANDARD_FORM_PIECES = (((0, 1), "A"), ((2, 3), "B"), ((4, 5), "A"))


def first_standard_form() -> BipartiteOp:
    """Three rank-two pieces stacked along A: two controlled from A, one from B"""
    blocks = [
        _eye(2),
        PAULI_Z,
        np.diag([1, 1j]),
        np.diag([1j, 1]),
        _eye(2),
        PAULI_X,
    ]
    return controlled_from_a([np.asarray(b, dtype=complex) for b in blocks])


def local_permute(u: BipartiteOp, rng: np.random.Generator) -> BipartiteOp:
    pa = [perm_matrix(rng.permutation(u.dA)) for _ in range(2)]
    pb = [perm_matrix(rng.permutation(u.dB)) for _ in range(2)]
    mat = tensor(pa[0], pb[0]) @ u.matrix @ tensor(pa[1], pb[1])
    return BipartiteOp(mat, u.dA, u.dB)


def random_permutation(dA: int = 3, dB: int = 3, seed: int = 0) -> BipartiteOp:
    rng = np.random.default_rng(seed)
    mapping = rng.permutation(dA * dB)
    return BipartiteOp(perm_matrix(mapping), dA, dB)


def random_controlled_permutation(
    dA: int = 3, dB: int = 3, terms: int = 2, seed: int = 0, rank: Optional[int] = None
) -> BipartiteOp:
    """Locally permuted controlled permutation with ``terms`` distinct blocks"""
    if terms > dA:
        raise FixtureError("random_controlled_permutation", "more terms than A levels")
    rng = np.random.default_rng(seed)
    for _ in range(200):
        perms: List[np.ndarray] = []
        while len(perms) < terms:
            cand = perm_matrix(rng.permutation(dB))
            if not any(np.array_equal(cand, p) for p in perms):
                perms.append(cand)
        levels = list(range(terms)) + list(rng.integers(0, terms, size=dA - terms))
        u = local_permute(controlled_from_a([perms[k] for k in levels]), rng)
        if rank is None or schmidt_rank(u) == rank:
            return u
    raise FixtureError("random_controlled_permutation", f"no rank-{rank} instance found")


def random_rank3_permutation(kind: str = "controlled-3", seed: int = 0) -> BipartiteOp:
    """Random rank-3 permutation unitary of a chosen structural class"""
    rng = np.random.default_rng(seed)
    if kind == "controlled-3":
        n, q = (int(x) for x in rng.integers(2, 4, size=2))
        m = int(rng.integers(0, 2))
        base = case_i1(m, n, q)
        if rng.random() < 0.5:
            base = controlled_from_a([base.block(j, j) for j in (0, 1, 2, 1)])
    elif kind == "controlled-4":
        n, q = (int(x) for x in rng.integers(2, 4, size=2))
        base = perm_u_4terms(int(rng.integers(0, 2)), n, q)
    elif kind == "product+two":
        base = _random_product_plus_two(rng)
    else:
        raise FixtureError("random_rank3_permutation", f"unknown kind {kind}")
    u = local_permute(base, rng)
    if rng.random() < 0.5 and kind != "product+two":
        u = swap_sides(u)
    return u


def _random_product_plus_two(rng: np.random.Generator) -> BipartiteOp:
    """P (x) V  plus  (I - P) (x) Q + W (x) (I - Q) on the complementary A levels"""
    p_dim = int(rng.integers(1, 3))
    w_dim = int(rng.integers(2, 4))
    dB = int(rng.integers(2, 4))
    dA = p_dim + w_dim
    v = shift(dB, int(rng.integers(1, dB)))
    split = int(rng.integers(1, dB))
    q = np.diag([1.0] * split + [0.0] * (dB - split)).astype(complex)
    w = shift(w_dim, int(rng.integers(1, w_dim)))
    mat = tensor(_direct_sum(_eye(p_dim), np.zeros((w_dim, w_dim))), v)
    mat = mat + tensor(_direct_sum(np.zeros((p_dim, p_dim)), _eye(w_dim)), q)
    mat = mat + tensor(_direct_sum(np.zeros((p_dim, p_dim)), w), _eye(dB) - q)
    return BipartiteOp(mat, dA, dB)


class FixtureInfo(NamedTuple):
    builder: Callable[..., BipartiteOp]
    params: Dict[str, type]
    doc: str

    def __repr__(self) -> str:
        return f"<FixtureInfo {self.builder.__name__} params={sorted(self.params)}>"


FIXTURES: Dict[str, FixtureInfo] = {
    "identity": FixtureInfo(identity, {"dA": int, "dB": int}, "identity operator"),
    "cnot": FixtureInfo(cnot, {}, "CNOT controlled from A"),
    "swap": FixtureInfo(swap, {}, "two-qubit SWAP"),
    "dcnot": FixtureInfo(dcnot, {}, "double CNOT"),
    "uketbra11": FixtureInfo(uketbra11, {}, "product plus two-term controlled permutation on 3x2"),
    "example4": FixtureInfo(example4, {}, "rank-4 transposition product on 5x6"),
    "m_family": FixtureInfo(m_family, {"r": int}, "2^(r-1) distinct diagonal blocks"),
    "b_controlled": FixtureInfo(b_controlled, {"r": int}, "r-term permutation controlled from B"),
    "case_i1": FixtureInfo(case_i1, {"m": int, "n": int, "q": int}, "three-term family I.1"),
    "case_i3": FixtureInfo(case_i3, {"n": int, "q": int, "p": int}, "three-term family I.3"),
    "perm_u_4terms": FixtureInfo(perm_u_4terms, {"m": int, "n": int, "q": int}, "four-term family"),
    "example1": FixtureInfo(example1, {"n": int}, "anticommuting rank-3 controlled unitary"),
    "example2": FixtureInfo(example2, {"t": float}, "rank-3 controlled unitary of 2x2 blocks"),
    "diag_rank3": FixtureInfo(diag_rank3, {}, "diagonal rank-3 controlled unitary"),
    "first_standard_form": FixtureInfo(first_standard_form, {}, "three rank-2 pieces along A"),
    "random_permutation": FixtureInfo(
        random_permutation, {"dA": int, "dB": int, "seed": int}, "uniform random permutation"
    ),
}


def fixture(name: str, **params) -> BipartiteOp:
    try:
        info = FIXTURES[name]
    except KeyError:
        raise FixtureError(name, f"unknown fixture, choose from {', '.join(sorted(FIXTURES))}")
    unknown = set(params) - set(info.params)
    if unknown:
        raise FixtureError(name, f"unknown parameter(s) {', '.join(sorted(unknown))}")
    typed = {k: info.params[k](v) for k, v in params.items()}
    logging.debug(f"building fixture {name} with {typed}")
    return info.builder(**typed)
