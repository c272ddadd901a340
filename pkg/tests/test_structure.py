import numpy as np
import pytest

from bforge import fixtures
from bforge.costs import bell
from bforge.enums import PermClass, Rank3Kind, Side, Traits, TypeKind
from bforge.errors import (
    CapExceeded,
    InvalidInput,
    NotControlled,
    NotPermutation,
    RankMismatch,
)
from bforge.linalg import BipartiteOp, operator_schmidt, random_unitary, swap_sides, tensor
from bforge.structure import (
    assemble_direct_sum,
    block_profile,
    classify_rank3_permutation,
    complex_rank3_profile,
    covering_subsets,
    detect_controlled,
    direct_sum_decompose,
    level_components,
    loose_type_partition,
    partial_permutations_in_span,
    partial_transpose_check,
    permutation_type_partitions,
    persch_analysis,
    rank2_standard_form,
    rank3_standard_form,
    traits,
    two_level_decomposition,
)


def test_block_profile_example4():
    prof = block_profile(fixtures.example4())
    assert prof.nonzero_block_grid.shape == (5, 5)
    assert list(prof.column_counts) == [2] * 5
    assert prof.is_permutation and prof.is_complex_permutation


def test_block_profile_identity_and_swap():
    prof = block_profile(fixtures.identity(3, 3))
    assert np.array_equal(prof.nonzero_block_grid, np.eye(3, dtype=bool))
    assert list(prof.row_counts) == [1, 1, 1]
    assert block_profile(fixtures.swap()).nonzero_block_grid.all()


def test_block_profile_flags_complex_permutation():
    u = BipartiteOp(np.diag([1, 1j, 1, -1]), 2, 2)
    prof = block_profile(u)
    assert prof.is_complex_permutation and not prof.is_permutation


def test_detect_controlled_cnot():
    u = fixtures.cnot()
    form = detect_controlled(u, Side.A)
    assert form.n_terms == 2
    assert form.supports == [(0,), (1,)]
    assert form.residual(u) < 1e-12
    assert detect_controlled(u, Side.B) is None


def test_detect_controlled_swap():
    assert detect_controlled(fixtures.swap(), Side.A) is None
    assert detect_controlled(fixtures.swap(), Side.B) is None


def test_detect_controlled_m_family():
    u = fixtures.m_family(3)
    form = detect_controlled(u, Side.A)
    assert form.n_terms == 4
    assert form.residual(u) < 1e-12


def test_detect_controlled_from_b_after_local_permutations():
    rng = np.random.default_rng(11)
    u = fixtures.local_permute(fixtures.b_controlled(3), rng)
    form = detect_controlled(u, Side.B)
    assert form.side is Side.B
    assert form.n_terms == 3
    assert form.residual(u) < 1e-12
    assert detect_controlled(u, Side.A) is None


def test_direct_sum_uketbra11():
    u = fixtures.uketbra11()
    comps = direct_sum_decompose(u, Side.A)
    assert [idx for idx, _ in comps] == [(0,), (1, 2)]
    rebuilt = assemble_direct_sum(Side.A, 3, 2, [(idx, op.matrix) for idx, op in comps])
    assert np.abs(rebuilt - u.matrix).max() < 1e-15


def test_direct_sum_example1_side_b():
    u = fixtures.example1()
    comps = direct_sum_decompose(u, Side.B)
    assert [idx for idx, _ in comps] == [(0, 1), (2, 3)]
    rebuilt = assemble_direct_sum(Side.B, u.dA, u.dB, [(idx, op.matrix) for idx, op in comps])
    assert np.abs(rebuilt - u.matrix).max() < 1e-14


def test_direct_sum_generic_is_single():
    u = BipartiteOp(random_unitary(6, np.random.default_rng(2)), 3, 2)
    assert len(direct_sum_decompose(u, Side.A)) == 1


def _check_lm2_blocks(std):
    for blk in std.blocks:
        want = np.diag([np.exp(1j * blk.alpha), -np.exp(-1j * blk.alpha)])
        assert np.abs(blk.t2 - want).max() < 1e-8
        assert abs(blk.t3[0, 1] - blk.t3[1, 0]) < 1e-8
        assert blk.t3[0, 1].real > 0 and abs(blk.t3[0, 1].imag) < 1e-8
        assert -np.pi / 2 < blk.alpha <= np.pi / 2 + 1e-12


def test_rank3_standard_form_example1():
    u = fixtures.example1()
    std = rank3_standard_form(u)
    assert std.kind is Rank3Kind.B_DIRECT_SUM
    assert len(std.blocks) == 2 and std.block1 == ()
    assert all(abs(blk.alpha) < 1e-8 for blk in std.blocks)
    _check_lm2_blocks(std)
    assert np.abs(std.reconstruct() - u.matrix).max() < 1e-9
    assert np.all(std.coefficients[:, 0].imag == 0)
    assert np.all(std.coefficients[:, 0].real >= 0)


def test_rank3_standard_form_diagonal():
    u = fixtures.diag_rank3()
    std = rank3_standard_form(u)
    assert std.kind is Rank3Kind.B_DIRECT_SUM
    assert std.blocks == [] and len(std.block1) == 3
    assert np.abs(std.t2 - np.diag(np.diag(std.t2))).max() < 1e-8
    assert np.abs(std.t3 - np.diag(np.diag(std.t3))).max() < 1e-8
    assert np.abs(std.reconstruct() - u.matrix).max() < 1e-9


def test_rank3_standard_form_example2():
    u = fixtures.example2(t=0.5, bs=(0.3, 0.7))
    std = rank3_standard_form(u)
    assert std.kind is Rank3Kind.B_DIRECT_SUM
    assert len(std.blocks) == 2 and std.block1 == ()
    alphas = [blk.alpha for blk in std.blocks]
    assert np.abs(np.array(alphas) - np.arcsin([0.3, 0.7])).max() < 1e-8
    _check_lm2_blocks(std)
    assert np.abs(std.reconstruct() - u.matrix).max() < 1e-9


def test_rank3_standard_form_a_branch():
    u = fixtures.first_standard_form()
    std = rank3_standard_form(u)
    assert std.kind is Rank3Kind.A_DIRECT_SUM
    assert all(r <= 2 for r in std.piece_ranks)
    assert sorted(i for piece in std.a_partition for i in piece) == list(range(6))
    assert np.abs(std.reconstruct() - u.matrix).max() < 1e-9


def test_rank3_standard_form_errors():
    with pytest.raises(RankMismatch):
        rank3_standard_form(fixtures.cnot())
    with pytest.raises(NotControlled):
        rank3_standard_form(swap_sides(fixtures.example1()))


def test_type_partitions_example4():
    rep = permutation_type_partitions(fixtures.example4())
    assert rep.input_a.n_classes == 3
    assert rep.input_a.classes == [(0,), (1, 2, 3), (4,)]
    assert rep.relative_output_a == 2
    assert rep.output_b.n_classes == 2
    assert rep.output_b.classes == [(0, 1, 2), (3, 4, 5)]


def test_type_partitions_identity_and_m_family():
    rep = permutation_type_partitions(fixtures.identity(3, 3))
    assert (rep.input_a.n_classes, rep.relative_output_a, rep.output_b.n_classes) == (1, 1, 1)
    assert permutation_type_partitions(fixtures.m_family(3)).input_a.n_classes == 4


def test_type_partitions_need_permutation():
    with pytest.raises(NotPermutation):
        permutation_type_partitions(fixtures.example1())


@pytest.mark.parametrize("r", [2, 3, 4])
def test_loose_partition_is_tight_on_m_family(r):
    part = loose_type_partition(fixtures.m_family(r), Side.A)
    assert part.kind is TypeKind.LOOSE_A
    assert part.n_classes == 2 ** (r - 1)


def test_loose_partition_identity_and_example4():
    assert loose_type_partition(fixtures.identity(3, 3)).n_classes == 1
    assert loose_type_partition(fixtures.example4(), Side.A).n_classes == 3


def test_covering_subsets_small():
    assert covering_subsets([np.eye(3)]) == [(0,)]
    s = [np.diag([1, 0]), np.diag([0, 1]), np.eye(2)]
    assert covering_subsets(s) == [(0, 1), (2,)]


def test_covering_subsets_of_diagonal_span():
    u = fixtures.b_controlled(3)
    s = partial_permutations_in_span(operator_schmidt(u).b_ops)
    subsets = covering_subsets(s)
    # set partitions of three columns
    assert len(subsets) == 5
    assert len(subsets) <= bell(4)


def test_covering_subsets_errors():
    s = [np.diag([1, 0]), np.diag([0, 1]), np.eye(2)]
    with pytest.raises(CapExceeded):
        covering_subsets(s, cap=2)
    with pytest.raises(InvalidInput):
        covering_subsets([2 * np.eye(2)])
    with pytest.raises(InvalidInput):
        covering_subsets([np.diag([1, 0])])


@pytest.mark.parametrize("r", [2, 3, 4, 5])
def test_partial_permutations_in_span(r):
    u = fixtures.b_controlled(r)
    found = partial_permutations_in_span(operator_schmidt(u).b_ops)
    assert len(found) == 2**r - 1


def test_classify_uketbra11():
    u = fixtures.uketbra11()
    wit = classify_rank3_permutation(u)
    assert wit.tag is PermClass.PRODUCT_PLUS_TWO
    assert wit.product_levels == ((0,), (0,))
    assert np.abs(wit.reconstruct() - u.matrix).max() < 1e-9


def test_classify_controlled_families():
    assert classify_rank3_permutation(fixtures.perm_u_4terms(0, 2, 2)).tag is PermClass.CONTROLLED_4
    assert classify_rank3_permutation(fixtures.case_i1(0, 2, 2)).tag is PermClass.CONTROLLED_3


@pytest.mark.parametrize(
    "kind,tag",
    [
        ("controlled-3", PermClass.CONTROLLED_3),
        ("controlled-4", PermClass.CONTROLLED_4),
        ("product+two", PermClass.PRODUCT_PLUS_TWO),
    ],
)
@pytest.mark.parametrize("seed", range(20))
def test_classify_random(kind, tag, seed):
    u = fixtures.random_rank3_permutation(kind, seed)
    wit = classify_rank3_permutation(u)
    assert wit.tag is tag
    assert np.abs(wit.reconstruct() - u.matrix).max() < 1e-9


def test_level_components_follow_local_permutations():
    rng = np.random.default_rng(7)
    base = fixtures._random_product_plus_two(rng)
    u = fixtures.local_permute(base, rng)
    comps = level_components(u)
    assert len(comps) == len(level_components(base)) >= 2
    assert sorted(i for ins, _ in comps for i in ins) == list(range(u.dA))
    assert all(len(ins) == len(outs) for ins, outs in comps)


def test_classify_errors():
    with pytest.raises(RankMismatch):
        classify_rank3_permutation(fixtures.cnot())
    with pytest.raises(NotPermutation):
        classify_rank3_permutation(fixtures.example1())


def test_rank2_standard_form_cnot():
    form = rank2_standard_form(fixtures.cnot())
    assert form.side is Side.A and form.n_terms == 2


def test_rank2_standard_form_from_b():
    p = np.diag([1, 0, 0])
    x = np.array([[0, 1], [1, 0]])
    u = BipartiteOp(tensor(x, p) + tensor(np.eye(2), np.eye(3) - p), 2, 3)
    form = rank2_standard_form(u)
    assert form.side is Side.B and form.n_terms == 2
    assert form.residual(u) < 1e-12


def test_rank2_standard_form_complex():
    p = np.diag([1, 0])
    d2 = np.diag([1j, 1j, 1])
    u = BipartiteOp(tensor(p, np.eye(3)) + tensor(np.eye(2) - p, d2), 2, 3)
    with pytest.raises(NotPermutation):
        rank2_standard_form(u)
    form = rank2_standard_form(u, complex_ok=True)
    assert form.n_terms == 2
    assert form.residual(u) < 1e-12


@pytest.mark.parametrize("seed", range(20))
def test_rank2_standard_form_random(seed):
    dA, dB = 2 + seed % 3, 2 + seed % 2
    u = fixtures.random_controlled_permutation(dA, dB, terms=2, seed=seed, rank=2)
    if seed % 2:
        u = swap_sides(u)
    form = rank2_standard_form(u)
    assert form.n_terms == 2
    assert np.abs(form.reconstruct() - u.matrix).max() < 1e-12


def test_rank2_standard_form_rank_check():
    with pytest.raises(RankMismatch):
        rank2_standard_form(fixtures.swap())


def test_partial_transpose_check():
    assert tuple(partial_transpose_check(fixtures.swap())) == (4, 1, 4, True)
    assert tuple(partial_transpose_check(fixtures.identity())) == (4, 4, 1, True)
    assert partial_transpose_check(fixtures.m_family(3)).holds


def test_persch_analysis():
    rep = persch_analysis(fixtures.b_controlled(3))
    assert rep.max_blocks == 3 and abs(rep.bound - np.log2(3)) < 1e-12
    rep = persch_analysis(fixtures.cnot())
    assert rep.rank == 2 and rep.max_blocks == 1
    assert abs(rep.bound - 1.0) < 1e-12


def test_complex_rank3_profile():
    prof = complex_rank3_profile(fixtures.diag_rank3())
    assert prof.diagonal and prof.two_values
    prof = complex_rank3_profile(fixtures.case_i1(0, 2, 2))
    assert not prof.diagonal


def test_two_level_uketbra11():
    u = fixtures.uketbra11()
    dec = two_level_decomposition(u)
    assert dec.higher_terms == 2 and dec.lower_terms == 2
    assert set(dec.sides) == {Side.B}
    assert np.abs(dec.reconstruct() - u.matrix).max() < 1e-12


def test_two_level_explicit_mixed_pieces():
    u = fixtures.first_standard_form()
    dec = two_level_decomposition(u, pieces=fixtures.FIRST_STANDARD_FORM_PIECES)
    assert dec.higher_terms == 3 and dec.lower_terms == 2
    assert dec.mixed
    assert np.abs(dec.reconstruct() - u.matrix).max() < 1e-12
    for form in dec.forms:
        mat = form.reconstruct()
        assert np.abs(mat.conj().T @ mat - np.eye(12)).max() < 1e-12


def test_two_level_bad_pieces():
    with pytest.raises(InvalidInput):
        two_level_decomposition(fixtures.first_standard_form(), pieces=[((0, 1), "A")])


def test_traits():
    flags = traits(fixtures.cnot())
    assert Traits.PERMUTATION in flags and Traits.CONTROLLED_A in flags
    assert Traits.CONTROLLED_B not in flags and Traits.PRODUCT not in flags
    assert traits(BipartiteOp(2 * np.eye(4), 2, 2)) is Traits.NONE
    assert Traits.PRODUCT in traits(fixtures.identity())
