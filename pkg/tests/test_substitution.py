import math
from math import gcd

import numpy as np
import pytest

from latsub.errors import DisjointnessViolation
from latsub.lattice import ExpansionMatrix, LatticeBasis
from latsub.specfile import load_bundled
from latsub.substitution import (
    Box,
    Cluster,
    apply,
    apply_n,
    compute_Lprime,
    generate_patch,
    is_primitive,
    legality_check,
    pf_data,
    substitution_matrix,
    supertile,
    verify_fixed_point,
)


def mat_power(m, k):
    out = np.array(m, dtype=object)
    return np.linalg.matrix_power(out, k)


def word_of(patch, sys, lo, hi):
    """1-d patch as a string over color labels; '.' marks gaps."""
    colors = patch.point_colors()
    return "".join(
        sys.colors[colors[(x,)]] if (x,) in colors else "." for x in range(lo, hi + 1)
    )


# ---------------------------------------------------------------------------
# substitution matrix and PF data


def test_substitution_matrix_gasket(gasket):
    assert substitution_matrix(gasket) == (
        (2, 1, 1, 0),
        (1, 2, 0, 1),
        (1, 0, 2, 1),
        (0, 1, 1, 2),
    )


def test_substitution_matrix_abcd(abcd):
    assert substitution_matrix(abcd) == (
        (1, 0, 1, 1),
        (1, 1, 0, 1),
        (1, 1, 1, 0),
        (0, 1, 1, 1),
    )


def bare_system(digits, colors=("a", "b", "c", "d"), dim=1, q=((2,),), seed=None):
    """Minimal system holder for counting-level tests (skips validation)."""
    from latsub.substitution import SubstitutionSystem

    if dim == 1 and q == ((2,),):
        q = [[2]]
    return SubstitutionSystem(
        name="stub",
        dim=dim,
        colors=tuple(colors),
        lattice=LatticeBasis.standard(dim),
        expansion=ExpansionMatrix.from_rows(q),
        digits=tuple(tuple(tuple(tuple(v) for v in cell) for cell in row) for row in digits),
        seed=Cluster.build(seed if seed is not None else [[] for _ in colors]),
    )


def test_substitution_matrix_padding():
    only_first = bare_system(
        digits=[[[(0,)], [], [], []], [[], [], [], []], [[], [], [], []], [[], [], [], []]]
    )
    assert substitution_matrix(only_first) == (
        (1, 0, 0, 0),
        (0, 0, 0, 0),
        (0, 0, 0, 0),
        (0, 0, 0, 0),
    )


def test_is_primitive_identity_false():
    rep = is_primitive(((1, 0), (0, 1)))
    assert not rep.primitive


def test_is_primitive_witnesses(gasket, abcd):
    for sys in (gasket, abcd):
        s = substitution_matrix(sys)
        rep = is_primitive(s)
        assert rep.primitive and rep.witness_power == 2
        # oracle: direct squaring
        sq = mat_power(s, 2)
        assert all(x > 0 for x in sq.flat)
        assert any(x == 0 for x in np.array(s, dtype=object).flat)


def test_pf_data_abcd(abcd):
    s = substitution_matrix(abcd)
    data, consistent = pf_data(s, abcd.expansion)
    assert consistent
    assert abs(data.eigenvalue - 3.0) < 1e-9
    for x in data.right_vector:
        assert abs(x - 0.25) < 1e-9  # right vector proportional to (1,1,1,1)
    assert data.residual < 1e-9


def test_pf_data_gasket(gasket):
    data, consistent = pf_data(substitution_matrix(gasket), gasket.expansion)
    assert consistent
    assert abs(data.eigenvalue - 4.0) < 1e-9


def test_pf_data_period_doubling(period_doubling):
    s = substitution_matrix(period_doubling)
    assert s == ((1, 2), (1, 0))
    data, consistent = pf_data(s, period_doubling.expansion)
    assert consistent
    assert abs(data.eigenvalue - 2.0) < 1e-9
    # solve S v = 2 v exactly: v proportional to (2, 1)
    assert abs(data.right_vector[0] - 2 / 3) < 1e-9
    assert abs(data.right_vector[1] - 1 / 3) < 1e-9


def test_pf_data_rejects_nonprimitive():
    with pytest.raises(ValueError):
        pf_data(((1, 0), (0, 1)), ExpansionMatrix.from_rows([[2]]))


def test_pf_consistency_all_bundled(systems):
    for sys in systems.values():
        data, consistent = pf_data(substitution_matrix(sys), sys.expansion)
        assert consistent, sys.name
        assert abs(data.eigenvalue - sys.expansion.absdet) <= 1e-6


# ---------------------------------------------------------------------------
# applying the substitution


def test_apply_period_doubling_step(period_doubling):
    image = apply(period_doubling, Cluster.build([[(0,)], []]))
    assert image.points == (((0,),), ((1,),))


def test_apply_empty_cluster(abcd):
    image = apply(abcd, Cluster.build([[], [], [], []]))
    assert image.is_empty()


def test_apply_gasket_counts(gasket):
    image = apply(gasket, gasket.seed)
    assert gasket.seed.counts == (2, 1, 1, 0)
    assert image.counts == (6, 4, 4, 2)
    assert image.total == 16


def test_count_homomorphism_exact(systems):
    # color counts of Phi^n(C) equal S^n * counts(C), n <= 4, zero collisions
    for sys in systems.values():
        s = np.array(substitution_matrix(sys), dtype=object)
        counts = np.array(sys.seed.counts, dtype=object)
        patch = sys.seed
        for n in range(1, 5):
            patch = apply(sys, patch)
            counts = s @ counts
            assert patch.counts == tuple(counts), (sys.name, n)


def test_disjointness_violation_fixture(abcd):
    # duplicating the digit 0 -> 6 in D[a][a] collides once two a-points
    # at distance 2 exist in the patch
    from latsub.substitution import SubstitutionSystem

    digits = [list(row) for row in abcd.digits]
    digits[0] = list(digits[0])
    digits[0][0] = ((0,), (6,))
    corrupt = SubstitutionSystem(
        name="abcd-corrupt",
        dim=1,
        colors=abcd.colors,
        lattice=abcd.lattice,
        expansion=abcd.expansion,
        digits=tuple(tuple(row) for row in digits),
        seed=abcd.seed,
    )
    with pytest.raises(DisjointnessViolation) as err:
        apply_n(corrupt, corrupt.seed, 5)
    assert err.value.color == 0


def test_apply_never_collides_on_valid_patches(systems):
    for sys in systems.values():
        apply_n(sys, sys.seed, 4)  # would raise on any collision


# ---------------------------------------------------------------------------
# fixed points and patches


def test_verify_fixed_point_examples(systems, period_doubling):
    for sys in systems.values():
        assert verify_fixed_point(sys), sys.name
    # seed ({1}, {}) is not a generating multiset for period doubling
    from latsub.substitution import SubstitutionSystem

    shifted = SubstitutionSystem(
        name="pd-shifted",
        dim=1,
        colors=period_doubling.colors,
        lattice=period_doubling.lattice,
        expansion=period_doubling.expansion,
        digits=period_doubling.digits,
        seed=Cluster.build([[(1,)], []]),
        seed_power=1,
    )
    assert not verify_fixed_point(shifted)


def test_generate_patch_n0_is_seed(abcd):
    region = Box((-10,), (10,))
    assert generate_patch(abcd, 0, region) == abcd.seed


def test_generate_patch_abcd_word(abcd):
    # positions -6..8 of the fixed point read cdadcbabcdcbcda
    patch = generate_patch(abcd, 2, Box((-6,), (8,)))
    assert patch.total == 15
    assert word_of(patch, abcd, -6, 8) == "cdadcbabcdcbcda"


def test_generate_patch_example310_word(example310):
    # lattice coordinate n is the real point n/2; the displayed b/a pattern
    # on half-integers over [-3, 4] is bbaabbaabbaabba
    patch = generate_patch(example310, 2, Box((-6,), (8,)))
    assert word_of(patch, example310, -6, 8) == "bbaabbaabbaabba"


def test_monotone_generation(systems):
    region_by_dim = {1: Box((-30,), (30,)), 2: Box((-12, -12), (12, 12))}
    for sys in systems.values():
        region = region_by_dim[sys.dim]
        step = sys.seed_power
        prev = None
        for n in range(0, 9, step):
            cur = generate_patch(sys, n, region)
            if prev is not None:
                assert cur.contains(prev), (sys.name, n)
            prev = cur


# ---------------------------------------------------------------------------
# legality


def test_legality_gasket_seed(gasket):
    report = legality_check(gasket, gasket.seed, 4)
    assert report.found
    assert report.power <= 3
    # the witness is exact: the translated seed sits inside the supertile
    st = supertile(gasket, report.color, report.power)
    assert st.contains(gasket.seed.translate(report.translation))


def test_legality_example310_seed_not_found(example310):
    report = legality_check(example310, example310.seed, 6)
    assert not report.found
    assert report.searched_up_to == 6
    assert report.describe(example310) == "NotFoundUpTo(6)"


def test_legality_single_point_trivial(abcd):
    report = legality_check(abcd, Cluster.build([[(0,)], [], [], []]), 2)
    assert report.found and report.power == 0


def test_legality_stability(period_doubling):
    base = legality_check(period_doubling, period_doubling.seed, 8)
    assert base.found
    for k_max in range(base.power, 11):
        again = legality_check(period_doubling, period_doubling.seed, k_max)
        assert again.found and again.power == base.power


def test_legality_all_bundled_seeds_except_example310(systems):
    for name, sys in systems.items():
        report = legality_check(sys, sys.seed, 6)
        if name == "example310":
            assert not report.found
        else:
            assert report.found, name


# ---------------------------------------------------------------------------
# the difference lattice L'


def test_lprime_abcd_is_2Z(abcd):
    rep = compute_Lprime(abcd)
    assert rep.stabilized
    assert rep.subgroup.rows == ((2,),)
    assert rep.inflation_compatible


def test_lprime_period_doubling_is_Z(period_doubling):
    rep = compute_Lprime(period_doubling)
    assert rep.stabilized
    assert rep.subgroup.rows == ((1,),)
    # oracle: gcd of observed same-color differences is 1
    patch = apply_n(period_doubling, period_doubling.seed, 6)
    diffs = [
        b[0] - a[0]
        for pts in patch.points
        for a, b in zip(pts, pts[1:])
    ]
    assert math.gcd(*diffs) == 1


def test_lprime_example310_full_lattice(example310):
    rep = compute_Lprime(example310)
    assert rep.stabilized
    assert rep.subgroup.rows == ((1,),)  # all of (1/2)Z in lattice coordinates


def test_lprime_gasket_and_chair_even_sum(gasket, chair):
    for sys in (gasket, chair):
        rep = compute_Lprime(sys)
        assert rep.stabilized, sys.name
        assert rep.subgroup.index_in_lattice() == 2
        assert rep.subgroup.contains((1, 1))
        assert rep.subgroup.contains((2, 0))
        assert not rep.subgroup.contains((1, 0))


def test_lprime_thue_morse_is_Z(thue_morse):
    rep = compute_Lprime(thue_morse)
    assert rep.stabilized
    assert rep.subgroup.rows == ((1,),)
