from fractions import Fraction

import numpy as np
import pytest

from cubeforms import (
    BudgetExceeded,
    CubeSubset,
    ModPForm,
    build_bias_cover,
    check_equidistribution_bound,
    check_nonzero_probability_bound,
    default_radius,
    subset_from_constraints,
    tv_to_uniform,
)
from cubeforms.cover import biased_mask, covered_mask, span_matrix
from cubeforms.cube import all_form_counts, all_forms_matrix
from cubeforms.sweeps import (
    random_dense_subset,
    sweep_equidistribution_k1,
    sweep_equidistribution_k2,
    sweep_nonzero_probability,
    sweep_nonzero_probability_exhaustive_k1,
)


def test_tv_to_uniform_examples():
    full = CubeSubset.full(4)
    assert tv_to_uniform(full, ModPForm.coordinate(4, 2, 0)) == 0
    assert tv_to_uniform(full, ModPForm.coordinate(4, 3, 0)) == Fraction(2, 3)
    f = ModPForm(3, 4, (1, 1, 0, 0))
    K = subset_from_constraints([(f, 0)], 4, 3)
    assert tv_to_uniform(K, f) == 2 * (1 - Fraction(1, 3))


def test_default_radius_monotone():
    assert default_radius(2, Fraction(1)) <= default_radius(2, Fraction(1, 10))
    r = default_radius(3, Fraction(1, 2))
    # p (1 - 1/p^2)^r <= alpha/2 at the returned radius, not at r - 1
    assert 3 * (Fraction(8, 9) ** r) <= Fraction(1, 4)
    assert 3 * (Fraction(8, 9) ** (r - 1)) > Fraction(1, 4)


def test_cover_full_cube_no_biased_forms():
    A = CubeSubset.full(6)
    # alpha above the maximum possible TV: nothing is biased
    cov = build_bias_cover(A, 2, Fraction(51, 50), r=1)
    assert cov.l == 0 and cov.biased_count == 0 and cov.certified
    # exhaustive scan: every TV on the full cube is below p (1-1/p^2)^support
    counts = all_form_counts(A, 2)
    forms = all_forms_matrix(6, 2)
    size = A.size
    for row in range(forms.shape[0]):
        supp = int((forms[row] != 0).sum())
        l1 = sum(abs(int(c) * 2 - size) for c in counts[row])
        # TV = l1 / (p * size) <= p (1 - 1/p^2)^supp
        assert l1 * 4**supp <= 2 * 2 * size * 3**supp


def test_cover_halfcube_example():
    A = subset_from_constraints([(ModPForm.coordinate(6, 2, 0), 0)], 6, 2)
    cov = build_bias_cover(A, 2, Fraction(1, 2), r=1)
    assert cov.certified
    assert cov.l <= 1
    # biased forms here are exactly the zero form and x1, both within
    # distance 1 of the span
    counts = all_form_counts(A, 2)
    mask = biased_mask(counts, A.size, 2, Fraction(1, 2))
    assert int(mask.sum()) == 2
    centers = span_matrix(list(cov.generators), 6, 2)
    assert covered_mask(all_forms_matrix(6, 2), centers, 1)[mask].all()


def test_cover_trivial_full_density():
    cov = build_bias_cover(CubeSubset.full(4), 3, Fraction(1, 2), r=2)
    assert cov.certified and cov.biased_count >= 1  # the zero form is always biased
    assert cov.l == 0  # but it sits inside the span already


def test_cover_monotone_in_alpha():
    rng = np.random.default_rng(61)
    A = random_dense_subset(rng, 6, Fraction(1, 4))
    low = build_bias_cover(A, 2, Fraction(1, 10), r=2)
    high = build_bias_cover(A, 2, Fraction(1, 2), r=2)
    assert high.biased_count <= low.biased_count
    # the cover built for the lower alpha also certifies at the higher one
    centers = span_matrix(list(low.generators), 6, 2)
    counts = all_form_counts(A, 2)
    mask = biased_mask(counts, A.size, 2, Fraction(1, 2))
    assert covered_mask(all_forms_matrix(6, 2), centers, 2)[mask].all()


def test_equidistribution_parity_example():
    par = ModPForm(2, 8, (1,) * 8)
    v = check_equidistribution_bound([par], r=8)
    assert v.hypothesis_held and v.violations == 0
    assert v.bound == Fraction(3, 4) ** 8


def test_equidistribution_hypothesis_fail():
    v = check_equidistribution_bound([ModPForm.zero(8, 2)], r=1)
    assert not v.hypothesis_held
    assert v.min_combination_support == 0


def test_equidistribution_exhaustive_k1():
    for p, n in [(2, 8), (3, 7)]:
        assert sweep_equidistribution_k1(p, n).violations == 0


def test_equidistribution_k2_pairs():
    res = sweep_equidistribution_k2(3, 7, trials=200, seed=5)
    assert res.violations == 0


def test_nonzero_probability_examples():
    v = check_nonzero_probability_bound([ModPForm(5, 2, (1, 1))], [2])
    assert v.lower_bounded == 1 and v.violations == 0
    v2 = check_nonzero_probability_bound(
        [ModPForm(5, 2, (1, 0)), ModPForm(5, 2, (1, 1))], [0, 2]
    )
    assert v2.zero_branch == 1 and v2.violations == 0
    # all p^k value tuples at once
    v3 = check_nonzero_probability_bound([ModPForm(3, 5, (1, 2, 1, 0, 0))])
    assert v3.violations == 0
    assert v3.zero_branch + v3.lower_bounded == 3


def test_nonzero_probability_sweeps():
    assert sweep_nonzero_probability_exhaustive_k1(3, 7).violations == 0
    assert sweep_nonzero_probability(5, 2, 7, trials=200, seed=6).violations == 0


def test_cover_budget():
    A = CubeSubset.full(6)
    with pytest.raises(BudgetExceeded):
        build_bias_cover(A, 3, Fraction(1, 2), r=1, budget=10)
