from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cubeforms import (
    CubeSubset,
    Dist,
    DomainMismatch,
    ModPForm,
    PreconditionFailed,
    check_hierarchy,
    correlation,
    diameter,
    distribution_on,
    metric_report,
    overlap,
    subset_from_constraints,
    tv,
)
from cubeforms.cube import form_fn
from cubeforms.sweeps import random_dist
import numpy as np


def F(a, b):
    return Fraction(a, b)


def test_distribution_on_examples():
    full = CubeSubset.full(2)
    f = form_fn(ModPForm(5, 2, (1, 1)))
    assert distribution_on(full, f).probs == (F(1, 4), F(1, 2), F(1, 4), 0, 0)
    half = subset_from_constraints([(ModPForm(5, 2, (1, 0)), 0)], 2, 5)
    assert distribution_on(half, f).probs == (F(1, 2), F(1, 2), 0, 0, 0)
    point = CubeSubset.from_indices(2, [0b11])
    assert distribution_on(point, f).probs == (0, 0, 1, 0, 0)


def test_distribution_requires_nonempty():
    empty = CubeSubset.from_indices(2, [])
    with pytest.raises(PreconditionFailed):
        distribution_on(empty, form_fn(ModPForm(2, 2, (1, 0))))


def test_tv_examples():
    u2 = Dist.uniform(2)
    assert tv(u2, u2) == 0
    assert tv(Dist.point(3, 0), Dist.point(3, 2)) == 2
    assert tv(u2, Dist.point(2, 0)) == 1
    with pytest.raises(DomainMismatch):
        tv(u2, Dist.uniform(3))


def test_diameter_examples():
    u3 = Dist.uniform(3)
    assert diameter([u3, u3, u3]) == 0
    assert diameter([u3, Dist.point(3, 0), Dist.point(3, 1)]) == 2
    assert diameter([Dist.uniform(2), Dist.point(2, 0)]) == 1
    with pytest.raises(PreconditionFailed):
        diameter([u3])


def test_correlation_examples():
    p = 5
    u = Dist.uniform(p)
    assert correlation([u, u, u]) == 0
    assert correlation([Dist.point(4, 0), Dist.point(4, 1)]) == F(-1, 4)
    X = Dist((F(1, 2), 0, F(1, 2)))
    Y = Dist((F(1, 2), F(1, 2), 0))
    assert correlation([X, Y]) == F(1, 4) - F(1, 3) == F(-1, 12)


def test_overlap_examples():
    X = Dist((F(1, 3), F(2, 3), 0))
    assert overlap([X, X]) == 1
    assert overlap([Dist.point(3, 0), Dist.point(3, 1)]) == 0
    assert overlap([Dist.uniform(5), Dist.point(5, 2)]) == F(1, 5)


def test_dist_validation():
    with pytest.raises(DomainMismatch):
        Dist((F(1, 2), F(1, 3)))
    with pytest.raises(DomainMismatch):
        Dist((F(3, 2), F(-1, 2)))


def test_check_hierarchy_examples():
    u = Dist.uniform(3)
    v = check_hierarchy([u, u], F(1, 10), F(1, 10))
    assert v.ok and v.exercised_a and v.exercised_b
    # point masses at distinct values: diameter 2 exceeds eta, so (a) is vacuous
    v2 = check_hierarchy([Dist.point(2, 0), Dist.point(2, 1)], F(1, 2), F(1, 2))
    assert not v2.exercised_a
    assert v2.ok


def test_hierarchy_sweep_small():
    rng = np.random.default_rng(11)
    for _ in range(300):
        d = int(rng.integers(2, 6))
        m = int(rng.integers(2, 5))
        dists = [random_dist(rng, d) for _ in range(m)]
        eta = diameter(dists)
        nu = max(Fraction(0), -correlation(dists)) + F(1, 1000)
        assert check_hierarchy(dists, eta, nu).ok


def test_correlation_lower_bound_and_overlap_tv_bound():
    rng = np.random.default_rng(12)
    for _ in range(200):
        d = int(rng.integers(2, 6))
        m = int(rng.integers(2, 5))
        dists = [random_dist(rng, d) for _ in range(m)]
        assert correlation(dists) >= F(-1, d ** (m - 1))
        om = overlap(dists)
        for i in range(m):
            for j in range(i + 1, m):
                assert om <= 1 - tv(dists[i], dists[j]) / 2


@st.composite
def dist_tuple(draw):
    d = draw(st.integers(2, 5))
    m = draw(st.integers(2, 4))
    dists = []
    for _ in range(m):
        cuts = draw(
            st.lists(st.integers(0, 30), min_size=d, max_size=d).filter(
                lambda v: sum(v) > 0
            )
        )
        dists.append(Dist.from_counts(cuts))
    return dists


@given(dist_tuple(), st.permutations(range(4)))
@settings(max_examples=100, deadline=None)
def test_metrics_permutation_invariant(dists, perm):
    order = [i for i in perm if i < len(dists)]
    shuffled = [dists[i] for i in order]
    if len(shuffled) < 2:
        return
    base = [dists[i] for i in sorted(order)]
    assert correlation(base) == correlation(shuffled)
    assert overlap(base) == overlap(shuffled)
    assert diameter(base) == diameter(shuffled)


def test_metric_report_ranges():
    rep = metric_report([Dist.uniform(3), Dist.point(3, 1)])
    assert 0 <= rep.diameter <= 2
    assert F(-1, 3) <= rep.correlation <= 1 - F(1, 3)
    assert 0 <= rep.overlap <= 1
    payload = rep.to_json()
    assert payload["diameter"]["num"] == rep.diameter.numerator
