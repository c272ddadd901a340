import math

import numpy as np
import pytest

from bforge import entpower, fixtures
from bforge.entpower import (
    ProductInput,
    conjecture_sweep,
    fixture_inputs,
    maximize,
    output_entanglement,
)
from bforge.enums import EntCase
from bforge.errors import DimensionMismatch, FixtureError, InvalidInput, VerificationFailed
from bforge.linalg import BipartiteOp, random_unitary, schmidt_rank, tensor
from bforge.util import EntPowerConfig

I1_VALUE = math.log2(9) - 16 / 9
QUICK = EntPowerConfig(restarts=12, max_iter=800, seed=1)


def _state(rng, n):
    vec = rng.normal(size=n) + 1j * rng.normal(size=n)
    return vec / np.linalg.norm(vec)


def test_identity_creates_nothing():
    rng = np.random.default_rng(0)
    inp = ProductInput(_state(rng, 4), _state(rng, 6), 2, 3)
    assert abs(output_entanglement(fixtures.identity(2, 2), inp)) < 1e-12


def test_cnot_on_plus_zero():
    inp = ProductInput(np.array([1, 1]) / np.sqrt(2), np.array([1, 0]))
    assert abs(output_entanglement(fixtures.cnot(), inp) - 1) < 1e-12


def test_input_checks():
    with pytest.raises(DimensionMismatch):
        output_entanglement(fixtures.cnot(), ProductInput(np.ones(3) / np.sqrt(3), np.ones(2)))
    with pytest.raises(InvalidInput):
        output_entanglement(fixtures.cnot(), ProductInput(np.ones(2), np.array([1, 0])))


def test_case_i1_closed_form():
    inp = fixture_inputs(EntCase.I1)
    g = (math.sqrt(3) + math.sqrt(6)) / 6
    h = (math.sqrt(3) - math.sqrt(6)) / 6
    assert np.abs(inp.beta - np.array([g, h, g, h])).max() < 1e-12
    assert np.abs(inp.alpha - 1 / math.sqrt(3)).max() < 1e-12
    assert abs(output_entanglement(fixtures.case_i1(), inp) - I1_VALUE) < 1e-12


@pytest.mark.parametrize("m,n,q", [(0, 3, 2), (1, 2, 4), (0, 5, 3)])
def test_case_i1_longer_shifts(m, n, q):
    inp = fixture_inputs(EntCase.I1, m=m, n=n, q=q)
    assert abs(output_entanglement(fixtures.case_i1(m, n, q), inp) - I1_VALUE) < 1e-12


@pytest.mark.parametrize("n,q,p", [(2, 2, 2), (3, 2, 2), (2, 4, 3)])
def test_case_i3_reaches_log2_3(n, q, p):
    inp = fixture_inputs(EntCase.I3, n=n, q=q, p=p)
    assert abs(np.linalg.norm(inp.beta[:n]) - 1 / math.sqrt(3)) < 1e-12
    assert abs(output_entanglement(fixtures.case_i3(n, q, p), inp) - math.log2(3)) < 1e-12


def test_case_i3_default_vector():
    g = (1 + math.sqrt(3)) / (2 * math.sqrt(6))
    beta = fixture_inputs(EntCase.I3).beta
    assert abs(beta[0] - g) < 1e-12 and abs(beta[4] - g) < 1e-12


@pytest.mark.parametrize("m,n,q", [(0, 2, 2), (1, 3, 2)])
def test_case_ii_reaches_log2_3(m, n, q):
    inp = fixture_inputs(EntCase.II, m=m, n=n, q=q)
    value = output_entanglement(fixtures.perm_u_4terms(m, n, q), inp)
    assert abs(value - math.log2(3)) < 1e-12


def test_case_iii_uketbra11():
    inp = fixture_inputs(EntCase.III)
    assert (inp.dRA, inp.dRB) == (3, 2)
    assert abs(output_entanglement(fixtures.uketbra11(), inp) - math.log2(3)) < 1e-12


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_case_iii_product_plus_two(seed):
    u = fixtures._random_product_plus_two(np.random.default_rng(seed))
    inp = fixture_inputs(EntCase.III, u)
    assert abs(output_entanglement(u, inp) - math.log2(3)) < 1e-12


def test_fixture_input_errors():
    with pytest.raises(FixtureError):
        fixture_inputs(EntCase.I1, n=1)
    with pytest.raises(FixtureError):
        fixture_inputs(EntCase.I3, r=2)
    with pytest.raises(FixtureError):
        fixture_inputs(EntCase.III, fixtures.cnot())


def test_random_inputs_respect_the_rank_bound():
    rng = np.random.default_rng(5)
    for u in [fixtures.case_i1(), fixtures.example4(), fixtures.uketbra11()]:
        ceiling = math.log2(schmidt_rank(u))
        for _ in range(200):
            inp = ProductInput(_state(rng, u.dA * 2), _state(rng, u.dB * 2), 2, 2)
            assert output_entanglement(u, inp) <= ceiling + 1e-9


@pytest.mark.parametrize(
    "u", [fixtures.cnot(), fixtures.b_controlled(2), fixtures.random_controlled_permutation(2, 3)]
)
def test_rank2_permutations_reach_one_ebit(u):
    result = maximize(u, QUICK)
    assert abs(result.best_value - 1) <= 1e-6
    assert result.converged
    assert len(result.history) == QUICK.restarts
    assert abs(output_entanglement(u, result.best_input) - result.best_value) < 1e-9


def test_case_i3_maximum():
    result = maximize(fixtures.case_i3(), EntPowerConfig(restarts=16, max_iter=1500, seed=2))
    assert abs(result.best_value - math.log2(3)) < 1e-5


def test_case_i1_reaches_the_closed_form():
    result = maximize(fixtures.case_i1(), EntPowerConfig(restarts=16, max_iter=1500, seed=3))
    assert result.best_value >= I1_VALUE - 1e-5
    assert result.best_value <= math.log2(3) + 1e-9


def test_case_i1_without_ancillas_stays_below_log2_3():
    config = EntPowerConfig(restarts=16, max_iter=1500, seed=4, ancilla_dims=(1, 1))
    result = maximize(fixtures.case_i1(), config)
    assert result.best_value <= math.log2(3) - 0.15


def test_local_unitaries_do_not_change_the_estimate():
    rng = np.random.default_rng(8)
    u = fixtures.cnot()
    left = tensor(random_unitary(2, rng), random_unitary(2, rng))
    right = tensor(random_unitary(2, rng), random_unitary(2, rng))
    dressed = BipartiteOp(left @ u.matrix @ right, 2, 2)
    a = maximize(u, QUICK).best_value
    b = maximize(dressed, QUICK._replace(seed=9)).best_value
    assert abs(a - b) < 1e-5


def test_maximize_is_deterministic():
    config = EntPowerConfig(restarts=3, max_iter=50, seed=6)
    a = maximize(fixtures.cnot(), config)
    b = maximize(fixtures.cnot(), config)
    assert a.history == b.history


def test_conjecture_sweep_groups_values():
    ops = {"cnot": fixtures.cnot(), "b2": fixtures.b_controlled(2), "id": fixtures.identity()}
    report = conjecture_sweep(ops, EntPowerConfig(restarts=6, max_iter=400, seed=0))
    assert sorted(map(sorted, report.clusters)) == [["b2", "cnot"], ["id"]]
    assert report.values["id"] < 1e-9


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(11)
    u = BipartiteOp(random_unitary(6, rng), 2, 3)
    shapes = ((2, 2), (3, 3))
    x = rng.normal(size=2 * (4 + 9))
    d = rng.normal(size=x.size)
    _, grad = entpower._negated(x, u.tensor4, shapes)
    h = 1e-6
    plus, _ = entpower._negated(x + h * d, u.tensor4, shapes)
    minus, _ = entpower._negated(x - h * d, u.tensor4, shapes)
    assert abs((plus - minus) / (2 * h) - grad @ d) < 1e-6 * max(1.0, abs(grad @ d))


def test_restarts_on_cnot_converge():
    u = fixtures.cnot()
    seeds = np.random.SeedSequence(1).spawn(4)
    runs = [entpower._restart(u.tensor4, (2, 2), QUICK, s) for s in seeds]
    assert all(run.converged for run in runs)
    assert all(abs(run.value - 1) <= 1e-6 for run in runs)


def test_values_above_the_rank_bound_are_rejected(monkeypatch):
    plus = np.eye(2, dtype=complex) / np.sqrt(2)

    def inflated(u4, ancillas, config, seed):
        return entpower._Run(1.5, plus, plus, 1, True)

    monkeypatch.setattr(entpower, "_restart", inflated)
    with pytest.raises(VerificationFailed):
        maximize(fixtures.cnot(), EntPowerConfig(restarts=2))
