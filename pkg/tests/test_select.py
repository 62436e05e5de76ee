import math
from fractions import Fraction

import numpy as np
import pytest

from cubeforms import (
    CubeSubset,
    FuncFamily,
    ModPForm,
    PreconditionFailed,
    SelectionParams,
    check_overlap_proposition,
    check_proximity_proposition,
    common_element_metric,
    common_element_sets,
    iterated_extraction,
    pipeline_bounded_support,
    pipeline_correlation,
    pipeline_overlap,
    subset_from_constraints,
    support_distance,
    verify_theorem_correlation,
    verify_theorem_overlap,
)
from cubeforms import fixture_negative_correlation, fixture_no_close_distributions
from cubeforms.cube import coordinate_fn, form_fn, joint_counts
from cubeforms.dist import Dist, tv
from cubeforms.select import enumerate_tuples
from cubeforms.sweeps import (
    overlap_proposition_instance,
    random_dense_family,
    sweep_overlap_proposition,
    sweep_proximity,
)
from cubeforms.verifiers import recheck_report


def F(a, b=1):
    return Fraction(a, b)


# ---------------------------------------------------------------------------
# common element lemma


def test_common_element_all_equal():
    res = common_element_sets([frozenset({7})] * 5, F(1, 2))
    assert res.indices == tuple(range(5))
    assert res.element == 7


def test_common_element_disjoint_none():
    sets = [frozenset({1}), frozenset({2}), frozenset({3})]
    assert common_element_sets(sets, F(1, 2)) is None


def test_common_element_spec_example():
    sets = [frozenset({1, 2}), frozenset({1, 3}), frozenset({4}), frozenset({1, 5})]
    res = common_element_sets(sets, F(3, 10))
    # ordered pairs (diagonal included): 4 diagonal + 6 cross = 10 of 16
    assert res.pair_fraction == F(10, 16)
    assert res.element == 1
    assert res.indices == (0, 1, 3)
    assert len(res.indices) >= F(3, 10) / 2 * 4


def test_common_element_size_bound_random():
    rng = np.random.default_rng(71)
    for _ in range(100):
        L = int(rng.integers(2, 10))
        sets = [
            frozenset(rng.choice(8, size=rng.integers(1, 4), replace=False).tolist())
            for _ in range(L)
        ]
        eps = F(int(rng.integers(1, 10)), 10)
        res = common_element_sets(sets, eps)
        if res is None:
            continue
        C = max(len(S) for S in sets)
        assert F(len(res.indices)) >= eps / C * L
        assert all(res.element in sets[j] for j in res.indices)


def _random_forms(rng, n, p, count):
    return [
        ModPForm(p, n, tuple(int(c) for c in rng.integers(0, p, size=n)))
        for _ in range(count)
    ]


def test_metric_r0_matches_set_version():
    rng = np.random.default_rng(72)
    for _ in range(50):
        L = int(rng.integers(2, 8))
        form_sets = [
            sorted(set(_random_forms(rng, 5, 2, int(rng.integers(1, 4)))), key=lambda f: f.coeffs)
            for _ in range(L)
        ]
        eps = F(int(rng.integers(1, 10)), 10)
        rs = common_element_sets([frozenset(S) for S in form_sets], eps)
        rm = common_element_metric(form_sets, eps, 0)
        if rs is None:
            assert rm is None
        else:
            assert rm is not None
            assert rs.indices == rm.indices
            assert rs.element == rm.element


def test_metric_two_far_clusters():
    # two clusters at mutual support distance above 2r: no extraction when
    # eps exceeds the within-cluster pair fraction
    n, p, r = 6, 2, 1
    a = ModPForm(p, n, (1, 1, 1, 0, 0, 0))
    b = ModPForm(p, n, (0, 0, 0, 1, 1, 1))
    assert support_distance(a, b) > 2 * r
    sets = [[a], [a], [b], [b]]
    # within-cluster ordered pairs: 8 of 16
    assert common_element_metric(sets, F(9, 16), r) is None
    res = common_element_metric(sets, F(1, 2), r)
    assert res is not None and len(res.indices) == 2


def test_iterated_extraction_identical_families():
    fam = [frozenset({1, 2, 3})] * 6
    log = iterated_extraction(fam, F(1, 10), mode="set")
    assert set(log.extracted) == {1, 2, 3}
    assert log.surviving == tuple(range(6))
    assert log.final_fraction < F(1, 10)


def test_iterated_extraction_disjoint_families():
    fam = [frozenset({i}) for i in range(10)]
    log = iterated_extraction(fam, F(1, 2), mode="set")
    assert log.extracted == ()
    assert log.surviving == tuple(range(10))


def test_iterated_extraction_planted_center():
    rng = np.random.default_rng(73)
    center = ModPForm(2, 8, (1, 1, 1, 1, 0, 0, 0, 0))
    sets = []
    for _ in range(40):
        c = list(center.coeffs)
        c[int(rng.integers(0, 8))] ^= 1
        sets.append([ModPForm(2, 8, tuple(c))])
    log = iterated_extraction(sets, F(1, 10), r=1, mode="metric")
    assert log.extracted
    assert support_distance(log.extracted[0], center) <= 2
    assert len(log.surviving) == 40


# ---------------------------------------------------------------------------
# proximity proposition


def test_proximity_identical_subsets():
    fam = FuncFamily(5, 2)
    A = subset_from_constraints([(ModPForm.coordinate(5, 2, 0), 0)], 5, 2)
    v = check_proximity_proposition(A, A, fam, 2, F(1, 10))
    assert v.hypotheses_held and v.ok
    assert v.max_tv == 0


def test_proximity_hypothesis_fail_paths():
    fam = FuncFamily(4, 2)
    A = subset_from_constraints([(ModPForm.coordinate(4, 2, 0), 0)], 4, 2)
    B = subset_from_constraints([(ModPForm.coordinate(4, 2, 0), 1)], 4, 2)
    # same support {x1} but the joint distribution on it differs maximally
    v = check_proximity_proposition(A, B, fam, 1, F(1, 10))
    assert not v.hypotheses_held
    C = subset_from_constraints([(ModPForm.coordinate(4, 2, 1), 0)], 4, 2)
    v2 = check_proximity_proposition(A, C, fam, 1, F(1, 10))
    assert not v2.hypotheses_held and "differ" in v2.hypothesis_note


def test_proximity_sweep():
    res = sweep_proximity(120, seed=74, n=6, p=2, k=2)
    assert res.violations == 0
    assert res.detail["exercised"] >= 30


# ---------------------------------------------------------------------------
# bounded-support selection


def test_bounded_support_identical_family():
    fam = FuncFamily(5, 2)
    A = subset_from_constraints([(ModPForm.coordinate(5, 2, 0), 0)], 5, 2)
    rep = pipeline_bounded_support([A] * 8, fam, 2, 100, F(1, 10))
    assert rep.selected == tuple(range(8))
    assert rep.max_diameter == 0
    assert rep.ok


def test_bounded_support_two_groups():
    n = 6
    fam = FuncFamily(n, 2)
    ga = subset_from_constraints([(ModPForm.coordinate(n, 2, 0), 0)], n, 2)
    gb = subset_from_constraints([(ModPForm.coordinate(n, 2, 1), 0)], n, 2)
    rep = pipeline_bounded_support([ga] * 7 + [gb] * 5, fam, 1, 100, F(1, 10))
    assert rep.selected == tuple(range(7))
    assert rep.support == frozenset({0})
    assert rep.ok


def test_bounded_support_random_family_spec_instance():
    # coordinate family specialization: K = (k+1)! (ln(2/delta)/eta)^k
    n, k = 8, 2
    eta, delta = F(1, 10), F(1, 4)
    K = math.factorial(k + 1) * (math.log(2 / float(delta)) / float(eta)) ** k
    fam = FuncFamily(n, 2)
    subsets = random_dense_family(100, n, 2, delta, seed=75)
    rep = pipeline_bounded_support(subsets, fam, k, int(K), eta)
    assert rep.selected
    assert not rep.excluded
    assert rep.ok


def test_data_processing_inequality_on_random_postcompositions():
    # TV of g-distributions is dominated by TV of the joint when g = F(T)
    rng = np.random.default_rng(76)
    n = 5
    for _ in range(40):
        A, B = random_dense_family(2, n, 2, F(1, 4), seed=int(rng.integers(1 << 30)))
        T = [coordinate_fn(n, 0), coordinate_fn(n, 2)]
        ca, cod = joint_counts(A, T)
        cb, _ = joint_counts(B, T)
        joint_tv = tv(Dist.from_counts(ca.tolist(), A.size), Dist.from_counts(cb.tolist(), B.size))
        table = rng.integers(0, 3, size=cod)
        ga = np.zeros(3, dtype=np.int64)
        gb = np.zeros(3, dtype=np.int64)
        for val in range(cod):
            ga[table[val]] += ca[val]
            gb[table[val]] += cb[val]
        g_tv = tv(Dist.from_counts(ga.tolist(), A.size), Dist.from_counts(gb.tolist(), B.size))
        assert g_tv <= joint_tv


# ---------------------------------------------------------------------------
# the two selections end to end (small instances; the acceptance suite
# runs the full regime)


def test_pipeline_identical_subsets():
    A = subset_from_constraints([(ModPForm.coordinate(6, 2, 0), 0)], 6, 2)
    params = SelectionParams(p=2, n=6)
    rep = pipeline_correlation([A] * 10, params)
    assert rep.selected == tuple(range(10))
    assert rep.ok
    th = verify_theorem_correlation([A] * 10, rep.selected, params)
    assert th.fraction == 1
    assert th.worst_value >= 0


def test_pipeline_single_subset_trivial():
    A = CubeSubset.full(5)
    params = SelectionParams(p=2, n=5)
    rep = pipeline_correlation([A], params)
    assert rep.ok and rep.warnings


def test_pipeline_density_precondition():
    thin = CubeSubset.from_indices(5, [1])
    with pytest.raises(PreconditionFailed):
        pipeline_correlation([thin, thin], SelectionParams(p=2, n=5, delta=F(1, 4)))


def test_pipeline_stage_sizes_monotone():
    fam = random_dense_family(25, 6, 2, F(1, 4), seed=77)
    rep = pipeline_correlation(fam, SelectionParams(p=2, n=6))
    sizes = [entry["size"] for entry in rep.stage_log]
    assert all(a >= b for a, b in zip(sizes, sizes[1:]))
    payload = rep.to_json()
    assert payload["mode"] == "R"


def test_pipeline_on_kernel_fixture():
    fx = fixture_no_close_distributions(2, 8)
    subsets = list(fx.subsets)
    params = SelectionParams(p=2, n=8, delta=F(1, 2))
    rep = pipeline_correlation(subsets, params)
    assert rep.selected  # some non-empty index set comes back
    assert rep.ok
    chk = recheck_report(subsets, rep)
    assert chk.ok
    th = verify_theorem_correlation(subsets, rep.selected, params)
    assert th.passed
    # close distributions are NOT achieved on this family: the defining
    # forms stay far apart across distinct kernels
    Xi = Dist.from_counts(
        joint_counts(subsets[0], [form_fn(fx.forms[0])])[0].tolist(), subsets[0].size
    )
    Xj = Dist.from_counts(
        joint_counts(subsets[1], [form_fn(fx.forms[0])])[0].tolist(), subsets[1].size
    )
    assert tv(Xi, Xj) >= F(1, 4)


def test_pipeline_overlap_planted_support():
    # most subsets share the anomaly {x1}; the extraction recovers it and
    # keeps the planted majority
    n = 6
    planted = subset_from_constraints([(ModPForm.coordinate(n, 2, 0), 0)], n, 2)
    odd = subset_from_constraints([(ModPForm.coordinate(n, 2, 1), 0)], n, 2)
    subsets = [planted] * 17 + [odd] * 3
    params = SelectionParams(p=2, n=n, delta=F(1, 4), eta=F(1, 10), k=1)
    rep = pipeline_overlap(subsets, params)
    assert 0 in rep.support
    assert set(range(17)) <= set(rep.selected)
    assert rep.ok


def test_theorem_correlation_fixture_counterexample():
    # the disjoint-block pair fed directly: the worst form reaches exactly
    # -1/12, so nu below 1/12 fails on the off-diagonal pairs
    fx = fixture_negative_correlation(3, 6)
    pair = [fx.subsets[0], fx.subsets[1]]
    params = SelectionParams(p=3, n=6, nu=F(1, 20))
    th = verify_theorem_correlation(pair, [0, 1], params)
    assert th.worst_value == F(-1, 12)
    assert th.fraction == F(1, 2)  # only the diagonal tuples pass
    assert not th.passed
    # nu above 1/12 clears it
    th2 = verify_theorem_correlation(pair, [0, 1], params, nu=F(1, 10))
    assert th2.fraction == 1


def test_theorem_overlap_identical_sets():
    A = subset_from_constraints([(ModPForm.coordinate(6, 2, 0), 0)], 6, 2)
    params = SelectionParams(p=2, n=6)
    th = verify_theorem_overlap([A, A], [0, 1], params)
    assert th.fraction == 1 and th.worst_value == 1


def test_theorem_overlap_kernel_fixture_survives():
    fx = fixture_no_close_distributions(2, 8)
    subsets = list(fx.subsets)
    params = SelectionParams(p=2, n=8, delta=F(1, 2), nu=F(1, 20))
    th = verify_theorem_overlap(subsets, list(range(len(subsets))), params)
    assert th.threshold == F(1, 8) - F(1, 20)
    assert th.fraction == 1
    assert th.worst_value >= F(1, 2)


# ---------------------------------------------------------------------------
# overlap proposition


def test_overlap_proposition_identical_pair():
    # identical subsets: the common anomaly {x1} sits in the shared part
    A = subset_from_constraints([(ModPForm.coordinate(6, 2, 0), 0)], 6, 2)
    psi = ModPForm(2, 6, (0, 0, 1, 1, 1, 1))
    v = check_overlap_proposition(
        [A, A], [psi], [frozenset({0}), frozenset(), frozenset()], 2, F(1, 100), 1
    )
    assert v.hypotheses_held and v.ok
    assert v.min_overlap is not None and v.min_overlap >= F(1, 8)


def test_overlap_proposition_constructed_instance():
    subsets, phi, parts = overlap_proposition_instance(6, 2)
    v = check_overlap_proposition(subsets, phi, parts, 2, F(1, 100), 1)
    assert v.hypotheses_held
    assert v.violations == 0
    assert v.forms_checked > 0
    assert v.min_overlap >= F(1, 8)  # comfortably above the bound here


def test_overlap_proposition_hypothesis_fail():
    subsets, phi, parts = overlap_proposition_instance(6, 2)
    bad_parts = [frozenset({0}), frozenset({0}), frozenset({1})]
    v = check_overlap_proposition(subsets, phi, bad_parts, 2, F(1, 100), 1)
    assert not v.hypotheses_held


def test_overlap_proposition_eta_trend():
    res = sweep_overlap_proposition()
    assert res.ok and res.detail["monotone_trend"]


# ---------------------------------------------------------------------------
# tuple enumeration plumbing


def test_enumerate_tuples_exhaustive_and_sampled():
    grid, sampled = enumerate_tuples(5, 2, max_tuples=100, sample_size=10, seed=0)
    assert not sampled and len(grid) == 25
    sample, sampled2 = enumerate_tuples(100, 3, max_tuples=1000, sample_size=64, seed=0)
    assert sampled2 and sample.shape == (64, 3)
    again, _ = enumerate_tuples(100, 3, max_tuples=1000, sample_size=64, seed=0)
    assert np.array_equal(sample, again)
