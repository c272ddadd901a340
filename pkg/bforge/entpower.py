"""Entangling power: the largest entanglement a bipartite unitary creates from a product
input, with local ancillas allowed on both sides.
"""
import concurrent.futures
import logging
import math
from typing import Dict, List, NamedTuple, Optional, Tuple

import numpy as np
import scipy.optimize
import scipy.stats

from .enums import EntCase
from .errors import DimensionMismatch, FixtureError, InvalidInput, VerificationFailed
from .linalg import BipartiteOp, Matrix, cluster_values, schmidt_rank
from .structure import block_profile
from .util import EntPowerConfig, _fmt_repr, get_settings

EIG_FLOOR = 1e-12


def _cvec(vec: np.ndarray) -> List[List[float]]:
    return [[float(z.real), float(z.imag)] for z in np.asarray(vec, dtype=complex).ravel()]


class ProductInput(NamedTuple):
    """``alpha`` on ``A R_A`` and ``beta`` on ``B R_B``, system index major"""

    alpha: np.ndarray
    beta: np.ndarray
    dRA: int = 1
    dRB: int = 1

    def as_dict(self) -> dict:
        return {
            "alpha": _cvec(self.alpha),
            "beta": _cvec(self.beta),
            "ancilla_dims": [self.dRA, self.dRB],
        }

    def __repr__(self) -> str:
        return _fmt_repr(
            "ProductInput",
            {"alpha": len(self.alpha), "beta": len(self.beta), "ancillas": (self.dRA, self.dRB)},
        )


class EntPowerResult(NamedTuple):
    best_value: float
    best_input: ProductInput
    restarts: int
    converged: bool
    history: List[float]

    def as_dict(self) -> dict:
        return {
            "best_value": self.best_value,
            "restarts": self.restarts,
            "converged": self.converged,
            "history": list(self.history),
            "best_input": self.best_input.as_dict(),
        }

    def __repr__(self) -> str:
        return _fmt_repr(
            "EntPowerResult",
            {"best_value": round(self.best_value, 9), "converged": self.converged},
        )


def _output_matrix(u4: np.ndarray, a: Matrix, b: Matrix) -> Matrix:
    """Coefficients of ``(U (x) I)(a (x) b)`` as an ``(A R_A) x (B R_B)`` matrix"""
    psi = np.einsum("pqab,ax,by->pxqy", u4, a, b)
    return psi.reshape(u4.shape[0] * a.shape[1], u4.shape[1] * b.shape[1])


def _entropy(mat: Matrix) -> float:
    probs = np.linalg.svd(mat, compute_uv=False) ** 2
    probs = probs[probs > 1e-300]
    return float(scipy.stats.entropy(probs, base=2)) if probs.size else 0.0


def output_entanglement(u: BipartiteOp, inp: ProductInput) -> float:
    """Entanglement between ``A R_A`` and ``B R_B`` after applying ``U (x) I``"""
    alpha = np.asarray(inp.alpha, dtype=complex).ravel()
    beta = np.asarray(inp.beta, dtype=complex).ravel()
    if alpha.size != u.dA * inp.dRA:
        raise DimensionMismatch(u.dA * inp.dRA, alpha.size, msg="alpha does not fit A R_A")
    if beta.size != u.dB * inp.dRB:
        raise DimensionMismatch(u.dB * inp.dRB, beta.size, msg="beta does not fit B R_B")
    for name, vec in (("alpha", alpha), ("beta", beta)):
        if abs(np.linalg.norm(vec) - 1) > 1e-12:
            raise InvalidInput(f"{name} has norm {np.linalg.norm(vec):.15f}, expected 1")
    a = alpha.reshape(u.dA, inp.dRA)
    b = beta.reshape(u.dB, inp.dRB)
    return _entropy(_output_matrix(u.tensor4, a, b))


def _entropy_gradient(mat: Matrix) -> Matrix:
    """Wirtinger derivative of the entropy in bits with respect to ``conj(mat)``"""
    evals, evecs = np.linalg.eigh(mat @ mat.conj().T)
    logs = (np.log(np.clip(evals, EIG_FLOOR, None)) + 1) / math.log(2)
    return -((evecs * logs) @ evecs.conj().T) @ mat


def _split(x: np.ndarray, shapes: Tuple[Tuple[int, int], Tuple[int, int]]):
    n_a = shapes[0][0] * shapes[0][1]
    z = x[: x.size // 2] + 1j * x[x.size // 2 :]
    return z[:n_a].reshape(shapes[0]), z[n_a:].reshape(shapes[1])


def _pack(za: Matrix, zb: Matrix) -> np.ndarray:
    z = np.concatenate([za.ravel(), zb.ravel()])
    return np.concatenate([z.real, z.imag])


def _value_and_tangents(u4: np.ndarray, a: Matrix, b: Matrix) -> Tuple[float, Matrix, Matrix]:
    """Entropy at unit ``a, b`` and its gradient projected onto both spheres"""
    mat = _output_matrix(u4, a, b)
    dA, dB = u4.shape[0], u4.shape[1]
    grad_psi = _entropy_gradient(mat).reshape(dA, a.shape[1], dB, b.shape[1])
    ga = np.einsum("pqab,by,pxqy->ax", u4.conj(), b.conj(), grad_psi)
    gb = np.einsum("pqab,ax,pxqy->by", u4.conj(), a.conj(), grad_psi)
    ta = 2 * (ga - np.vdot(ga, a).real * a)
    tb = 2 * (gb - np.vdot(gb, b).real * b)
    return _entropy(mat), ta, tb


def _negated(x: np.ndarray, u4: np.ndarray, shapes) -> Tuple[float, np.ndarray]:
    za, zb = _split(x, shapes)
    na, nb = np.linalg.norm(za), np.linalg.norm(zb)
    value, ta, tb = _value_and_tangents(u4, za / na, zb / nb)
    return -value, -_pack(ta / na, tb / nb)


def _random_state(rng: np.random.Generator, rows: int, cols: int) -> Matrix:
    vec = rng.normal(size=(rows, cols)) + 1j * rng.normal(size=(rows, cols))
    return vec / np.linalg.norm(vec)


class _Run(NamedTuple):
    value: float
    a: Matrix
    b: Matrix
    iterations: int
    converged: bool


def _restart(
    u4: np.ndarray, ancillas: Tuple[int, int], config: EntPowerConfig, seed: np.random.SeedSequence
) -> _Run:
    rng = np.random.default_rng(seed)
    shapes = ((u4.shape[0], ancillas[0]), (u4.shape[1], ancillas[1]))
    x0 = _pack(_random_state(rng, *shapes[0]), _random_state(rng, *shapes[1]))
    res = scipy.optimize.minimize(
        _negated,
        x0,
        args=(u4, shapes),
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": config.max_iter, "gtol": config.tol * 1e-2, "ftol": 0.0},
    )
    za, zb = _split(res.x, shapes)
    a, b = za / np.linalg.norm(za), zb / np.linalg.norm(zb)
    value, ta, tb = _value_and_tangents(u4, a, b)
    grad = math.hypot(np.linalg.norm(ta), np.linalg.norm(tb))
    logging.debug(f"restart: {value:.12f} after {res.nit} iterations, gradient {grad:.2e}")
    return _Run(value, a, b, int(res.nit), grad <= config.tol)


def maximize(u: BipartiteOp, config: EntPowerConfig = EntPowerConfig()) -> EntPowerResult:
    """Best output entanglement over ``config.restarts`` independent ascents"""
    u.require_unitary()
    if config.restarts < 1:
        raise InvalidInput(f"need at least one restart, got {config.restarts}")
    ancillas = tuple(config.ancilla_dims) if config.ancilla_dims else (u.dA, u.dB)
    u4 = u.tensor4
    seeds = np.random.SeedSequence(config.seed).spawn(config.restarts)
    workers = max(1, min(get_settings().threads, config.restarts))
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
        futures = [executor.submit(_restart, u4, ancillas, config, s) for s in seeds]
        runs = [f.result() for f in futures]

    history = [run.value for run in runs]
    best = max(runs, key=lambda run: run.value)
    ceiling = math.log2(schmidt_rank(u))
    value = best.value
    if value > ceiling + 1e-9:
        raise VerificationFailed(f"entanglement {value:.12f} exceeds log2 of the Schmidt rank")
    top = sorted(history, reverse=True)
    converged = abs(top[0] - top[1]) <= 1e-6 if len(top) > 1 else best.converged
    logging.debug(
        f"maximize: best {value:.9f} after {best.iterations} iterations, "
        f"{sum(run.converged for run in runs)}/{len(runs)} restarts converged"
    )
    inp = ProductInput(best.a.ravel(), best.b.ravel(), ancillas[0], ancillas[1])
    return EntPowerResult(value, inp, config.restarts, converged, history)


def _alternating(length: int, gap: float, norm2: float) -> np.ndarray:
    """Real ``(e, f, e, f, ...)`` with ``e - f = gap`` and squared norm ``norm2``"""
    ce, cf = (length + 1) // 2, length // 2
    qa, qb, qc = ce + cf, -2 * cf * gap, cf * gap**2 - norm2
    disc = qb * qb - 4 * qa * qc
    if disc < -1e-12:
        raise FixtureError("alternating input", f"no real solution for length {length}")
    e = (-qb + math.sqrt(max(disc, 0.0))) / (2 * qa)
    f = e - gap
    return np.array([e if i % 2 == 0 else f for i in range(length)], dtype=complex)


def _uniform(n: int) -> np.ndarray:
    return np.ones(n, dtype=complex) / math.sqrt(n)


def _shift_pair_input(m: int, n: int, q: int) -> np.ndarray:
    for name, val in (("n", n), ("q", q)):
        if val < 2:
            raise FixtureError("fixture input", f"{name} must be at least 2, got {val}")
    if m < 0:
        raise FixtureError("fixture input", f"m must be non-negative, got {m}")
    parts = [
        np.zeros(m, dtype=complex),
        _alternating(n, 2 / math.sqrt(6 * (n // 2)), 0.5),
        _alternating(q, 2 / math.sqrt(6 * (q // 2)), 0.5),
    ]
    return np.concatenate(parts)


def _maximally_entangled(weights: np.ndarray) -> np.ndarray:
    d = weights.size
    out = np.zeros((d, d), dtype=complex)
    out[np.arange(d), np.arange(d)] = weights
    return out.ravel()


def _case_iii_input(u: BipartiteOp, tol: float = 1e-9) -> ProductInput:
    """Weighted maximally entangled inputs for ``P (x) V + (I-P) (x) Q + W (x) (I-Q)``"""
    grid = block_profile(u, tol).nonzero_block_grid
    counts = grid.sum(axis=0)
    eye = np.eye(u.dB)
    pairs = [c for c in range(u.dA) if counts[c] == 2]
    singles = [c for c in range(u.dA) if counts[c] == 1 and grid[c, c]]
    if not pairs or any(counts[c] not in (1, 2) for c in range(u.dA)):
        raise FixtureError("III", "operator does not have the product-plus-two shape")
    p_levels = [c for c in singles if not np.allclose(u.block(c, c), eye, atol=tol)]
    if not p_levels:
        raise FixtureError("III", "no level carries the product part")
    v = u.block(p_levels[0], p_levels[0])
    q = np.diag(u.block(pairs[0], pairs[0])).real > 0.5
    if any(np.abs(u.block(c, c) - v).max() > tol for c in p_levels):
        raise FixtureError("III", "product part differs between levels")

    mu = np.zeros(u.dA)
    mu[p_levels] = math.sqrt(1 / (3 * len(p_levels)))
    mu[pairs] = math.sqrt(2 / (3 * len(pairs)))
    free = np.abs(np.diag(v)) <= tol
    in_q = [k for k in range(u.dB) if free[k] and q[k]]
    out_q = [k for k in range(u.dB) if free[k] and not q[k]]
    if not in_q or not out_q:
        raise FixtureError("III", "V has no free diagonal level on both sides of Q")
    nu = np.zeros(u.dB)
    nu[in_q] = math.sqrt(1 / (2 * len(in_q)))
    nu[out_q] = math.sqrt(1 / (2 * len(out_q)))
    return ProductInput(_maximally_entangled(mu), _maximally_entangled(nu), u.dA, u.dB)


def fixture_inputs(case: EntCase, u: Optional[BipartiteOp] = None, **params: int) -> ProductInput:
    """Closed-form optimal inputs for the rank-three permutation families.

    ``I.1`` and ``II`` take ``m, n, q`` as in :func:`~bforge.fixtures.case_i1` and
    :func:`~bforge.fixtures.perm_u_4terms`; ``I.3`` takes ``n, q, p``; ``III`` takes the
    operator itself (``uketbra11`` by default).
    """
    case = EntCase(case)
    if case is EntCase.III:
        if params:
            raise FixtureError("III", f"unexpected parameters {sorted(params)}")
        if u is None:
            from .fixtures import uketbra11

            u = uketbra11()
        return _case_iii_input(u)

    if case is EntCase.I3:
        sizes = [params.pop(k, 2) for k in ("n", "q", "p")]
        if params:
            raise FixtureError("I.3", f"unexpected parameters {sorted(params)}")
        if min(sizes) < 2:
            raise FixtureError("I.3", f"n, q, p must be at least 2, got {sizes}")
        beta = np.concatenate(
            [_alternating(t, 1 / math.sqrt(2 * (t // 2)), 1 / 3) for t in sizes]
        )
        return ProductInput(_uniform(3), beta)

    m, n, q = (params.pop(k, d) for k, d in (("m", 0), ("n", 2), ("q", 2)))
    if params:
        raise FixtureError(str(case), f"unexpected parameters {sorted(params)}")
    beta = _shift_pair_input(m, n, q)
    return ProductInput(_uniform(3 if case is EntCase.I1 else 4), beta)


class SweepReport(NamedTuple):
    values: Dict[str, float]
    clusters: List[List[str]]

    def as_dict(self) -> dict:
        return {"values": dict(self.values), "clusters": [list(c) for c in self.clusters]}


def conjecture_sweep(
    ops: Dict[str, BipartiteOp], config: EntPowerConfig = EntPowerConfig(), tol: float = 1e-4
) -> SweepReport:
    """Maximize every operator and group the values that agree within ``tol``"""
    values = {name: maximize(op, config).best_value for name, op in ops.items()}
    names = list(values)
    labels = cluster_values([values[n] for n in names], tol) if names else []
    clusters: Dict[int, List[str]] = {}
    for name, label in zip(names, labels):
        clusters.setdefault(label, []).append(name)
    report = SweepReport(values, list(clusters.values()))
    logging.info(f"conjecture_sweep: {len(names)} operators, {len(report.clusters)} value(s)")
    return report
