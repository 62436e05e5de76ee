from fractions import Fraction

import pytest

from cubeforms import (
    ModPForm,
    PreconditionFailed,
    correlation,
    distribution_on,
    fixture_bounded_support_lower,
    fixture_intro_dependence,
    fixture_negative_correlation,
    fixture_no_close_distributions,
    tv,
)
from cubeforms.cube import form_fn
from cubeforms.fixtures import (
    negative_correlation_value,
    verify_bounded_support_lower,
    verify_intro_dependence,
    verify_negative_correlation,
    verify_no_close_distributions,
)


def F(a, b=1):
    return Fraction(a, b)


def test_intro_dependence_values():
    for p in (3, 5):
        fx = fixture_intro_dependence(p)
        rep = verify_intro_dependence(fx)
        assert rep.ok
        assert fx.expected["unconditional"] == F(1, 4)
        assert fx.expected["conditioned"] == 0


def test_intro_dependence_contrast_p2():
    fx = fixture_intro_dependence(2)
    assert fx.expected["unconditional"] == F(1, 2)
    assert fx.expected["conditioned"] == F(1, 2)
    assert verify_intro_dependence(fx).ok


def test_no_close_distributions_p2():
    fx = fixture_no_close_distributions(2, 8)
    rep = verify_no_close_distributions(fx)
    assert rep.ok, rep.first_failure()
    assert fx.expected["tv_floor"] == F(1, 4)
    assert all(A.density() >= F(1, 2) for A in fx.subsets)


def test_no_close_distributions_p3():
    fx = fixture_no_close_distributions(3, 12)
    rep = verify_no_close_distributions(fx)
    assert rep.ok, rep.first_failure()
    assert fx.expected["tv_floor"] == F(1, 16)
    assert all(A.density() >= F(1, 4) for A in fx.subsets)


def test_no_close_distributions_diagonal_sanity():
    fx = fixture_no_close_distributions(2, 8)
    X = distribution_on(fx.subsets[0], form_fn(fx.forms[0]))
    assert tv(X, X) == 0


def test_no_close_distributions_too_small_n():
    with pytest.raises(PreconditionFailed):
        fixture_no_close_distributions(2, 6)


def test_bounded_support_gap_exact_p2():
    fx = fixture_bounded_support_lower(2, 6, 1)
    rep = verify_bounded_support_lower(fx)
    assert rep.ok, rep.first_failure()
    # the specific pair I={1}, J={2} realizes the bound with equality
    Pi = distribution_on(fx.subsets[0], form_fn(fx.forms[0])).probs[0]
    Pj = distribution_on(fx.subsets[1], form_fn(fx.forms[0])).probs[0]
    assert Pi - Pj == F(1, 2)


def test_bounded_support_p3_k2():
    fx = fixture_bounded_support_lower(3, 6, 2)
    rep = verify_bounded_support_lower(fx)
    assert rep.ok, rep.first_failure()


def test_bounded_support_k_cap():
    with pytest.raises(PreconditionFailed):
        fixture_bounded_support_lower(2, 6, 4)


def test_negative_correlation_exact_values():
    fx3 = fixture_negative_correlation(3, 6)
    assert fx3.expected["correlation"] == F(-1, 12)
    assert verify_negative_correlation(fx3).ok
    fx5 = fixture_negative_correlation(5, 10)
    assert fx5.expected["correlation"] == F(-11, 80)
    assert verify_negative_correlation(fx5).ok


def test_negative_correlation_refuses_p2():
    with pytest.raises(PreconditionFailed):
        fixture_negative_correlation(2, 8)
    # the formula itself lands at zero for p = 2
    assert negative_correlation_value(2) == 0


def test_negative_correlation_densities():
    fx = fixture_negative_correlation(3, 6)
    floor = F(1, 2 ** (3 - 1))
    assert all(A.density() >= floor for A in fx.subsets)


def test_fixture_expected_rederived_from_scratch():
    # the expected table must match a direct metric-layer recomputation
    fx = fixture_negative_correlation(3, 9)
    expected = fx.expected["correlation"]
    s = len(fx.subsets)
    keys = sorted((i, j) for i in range(s) for j in range(s) if i != j)
    for form, (i, j) in zip(fx.forms, keys):
        Xi = distribution_on(fx.subsets[i], form_fn(form))
        Xj = distribution_on(fx.subsets[j], form_fn(form))
        assert correlation([Xi, Xj]) == expected


def test_fixture_json_roundtrip():
    from cubeforms.serialize import subset_from_json

    fx = fixture_no_close_distributions(2, 8)
    payload = fx.to_json()
    A0, p = subset_from_json(payload["subsets"][0])
    assert p == 2 and A0 == fx.subsets[0]
