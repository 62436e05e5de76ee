"""Deterministic counterexample constructions with exact expected constants.

Each fixture builds explicit subsets and forms witnessing a separation:
kernel families on which no pair has close distributions, coordinate-
pattern families defeating polynomial selection rates for bounded-support
forms, and disjoint-zero-set families with exactly computable negative
correlation.  Every expected value is re-derived from scratch by the
metrics layer and compared as an exact rational.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

from .cube import CubeSubset, ModPForm, eval_form, form_fn, subset_from_constraints
from .dist import Dist, correlation, distribution_on, tv
from .errors import PreconditionFailed
from .serialize import form_json, rational_json, subset_json


@dataclass(frozen=True)
class Fixture:
    name: str
    p: int
    n: int
    subsets: tuple[CubeSubset, ...]
    forms: tuple[ModPForm, ...]
    expected: dict = field(default_factory=dict)
    notes: tuple[str, ...] = ()
    block_vectors: tuple[tuple[int, ...], ...] = ()
    index_sets: tuple[tuple[int, ...], ...] = ()

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "p": self.p,
            "n": self.n,
            "subsets": [subset_json(A, self.p) for A in self.subsets],
            "forms": [form_json(f) for f in self.forms],
            "expected": {k: rational_json(v) for k, v in self.expected.items()},
            "notes": list(self.notes),
        }


@dataclass(frozen=True)
class FixtureCheck:
    label: str
    passed: bool
    value: str = ""


@dataclass(frozen=True)
class FixtureReport:
    name: str
    checks: tuple[FixtureCheck, ...]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def first_failure(self) -> str | None:
        for c in self.checks:
            if not c.passed:
                return c.label
        return None

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "ok": self.ok,
            "checks": [
                {"label": c.label, "passed": c.passed, "value": c.value}
                for c in self.checks
            ],
        }


# ---------------------------------------------------------------------------
# kernel family: no pair of subsets has close distributions


def _independent_block_vectors(p: int, d: int, cap: int) -> list[tuple[int, ...]]:
    """Greedy lexicographic selection of pairwise non-proportional nonzero
    vectors in F_p^d."""
    chosen: list[tuple[int, ...]] = []
    for vec in itertools.product(range(p), repeat=d):
        if not any(vec):
            continue
        if len(chosen) >= cap:
            break
        prop = False
        for old in chosen:
            for a in range(1, p):
                if tuple((a * c) % p for c in old) == vec:
                    prop = True
                    break
            if prop:
                break
        if not prop:
            chosen.append(vec)
    return chosen


def fixture_no_close_distributions(p: int, n: int, max_forms: int = 64) -> Fixture:
    """Block-constant forms whose kernels in the cube are pairwise
    non-nested: each form is exactly zero on its own kernel but visibly
    non-zero on every other, so distributions stay far apart."""
    if n < 4 * p:
        raise PreconditionFailed(f"need n >= 4p = {4 * p} for two block pairs, got {n}")
    d = n // (2 * p)
    cap = min(p ** (d - 1), max_forms)
    if cap < 2:
        raise PreconditionFailed("need at least two non-proportional block forms")
    vectors = _independent_block_vectors(p, d, cap)
    forms = []
    for vec in vectors:
        coeffs = [0] * n
        for u, b in enumerate(vec):
            for z in range(2 * p * u, 2 * p * (u + 1)):
                coeffs[z] = b
        forms.append(ModPForm(p, n, tuple(coeffs)))
    subsets = tuple(subset_from_constraints([(f, 0)], n, p) for f in forms)
    return Fixture(
        name="no-close-distributions",
        p=p,
        n=n,
        subsets=subsets,
        forms=tuple(forms),
        expected={
            "density_floor": Fraction(1, 2 ** (p - 1)),
            "tv_floor": Fraction(1, 2 ** (2 * (p - 1))),
        },
        block_vectors=tuple(vectors),
    )


def _separating_vertex(fx: Fixture, i: int, j: int) -> int:
    """The explicit vertex in kernel i but outside kernel j."""
    p, n = fx.p, fx.n
    d = n // (2 * p)
    bi, bj = fx.block_vectors[i], fx.block_vectors[j]
    pair = None
    for u1 in range(d):
        for u2 in range(u1 + 1, d):
            det = (bi[u1] * bj[u2] - bi[u2] * bj[u1]) % p
            if det:
                pair = (u1, u2)
                break
        if pair:
            break
    if pair is None:
        raise PreconditionFailed("block vectors are proportional")
    u1, u2 = pair
    bits = 0
    for u in range(d):
        for z in range(2 * p * u + p, 2 * p * (u + 1)):
            bits |= 1 << z
    # add b_i[u2] ones in the odd block of pair u1, drop b_i[u1] ones from
    # the even block of pair u2; the form i contribution cancels exactly
    for z in range(2 * p * u1, 2 * p * u1 + bi[u2]):
        bits |= 1 << z
    for z in range(2 * p * u2 + p, 2 * p * u2 + p + bi[u1]):
        bits &= ~(1 << z)
    return bits


def verify_no_close_distributions(fx: Fixture) -> FixtureReport:
    checks = []
    floor_density = fx.expected["density_floor"]
    floor_tv = fx.expected["tv_floor"]
    for i, A in enumerate(fx.subsets):
        ok = A.density() >= floor_density
        checks.append(
            FixtureCheck(f"density[{i}] >= {floor_density}", ok, str(A.density()))
        )
    for i in range(len(fx.subsets)):
        for j in range(len(fx.subsets)):
            if i == j:
                continue
            Xi = distribution_on(fx.subsets[i], form_fn(fx.forms[i]))
            Xj = distribution_on(fx.subsets[j], form_fn(fx.forms[i]))
            gap = Xi.probs[0] - Xj.probs[0]
            dist = tv(Xi, Xj)
            checks.append(
                FixtureCheck(
                    f"tv[{i},{j}] >= {floor_tv}",
                    dist >= gap and gap >= floor_tv,
                    str(dist),
                )
            )
            y = _separating_vertex(fx, i, j)
            sep = eval_form(fx.forms[i], y) == 0 and eval_form(fx.forms[j], y) != 0
            checks.append(FixtureCheck(f"kernel[{i}] not within kernel[{j}]", sep))
    return FixtureReport(fx.name, tuple(checks))


# ---------------------------------------------------------------------------
# coordinate-pattern family: bounded-support forms, polynomial rates fail


def fixture_bounded_support_lower(p: int, n: int, k: int, max_sets: int = 64) -> Fixture:
    """For each k-set of coordinates, the subset forcing them to zero and
    the form summing them; distinct index sets give probability gaps of
    at least one half."""
    if k < 1 or 2 * k > n:
        raise PreconditionFailed(f"need 1 <= k <= n/2, got k={k}, n={n}")
    index_sets = list(itertools.combinations(range(n), k))[:max_sets]
    forms = []
    subsets = []
    for I in index_sets:
        coeffs = [0] * n
        constraints = []
        for z in I:
            coeffs[z] = 1
            constraints.append((ModPForm.coordinate(n, p, z), 0))
        forms.append(ModPForm(p, n, tuple(coeffs)))
        subsets.append(subset_from_constraints(constraints, n, p))
    notes = ()
    if k > p - 1:
        notes = (
            "k above p-1: the single-form density constant does not apply; "
            "the k-constraint floor 2^(-k(p-1)) is asserted instead",
        )
    return Fixture(
        name="bounded-support",
        p=p,
        n=n,
        subsets=tuple(subsets),
        forms=tuple(forms),
        expected={
            "gap_floor": Fraction(1, 2),
            "density_exact": Fraction(1, 2**k),
        },
        notes=notes,
        index_sets=tuple(index_sets),
    )


def verify_bounded_support_lower(fx: Fixture) -> FixtureReport:
    checks = []
    k = len(fx.index_sets[0])
    exact = fx.expected["density_exact"]
    for i, A in enumerate(fx.subsets):
        checks.append(
            FixtureCheck(f"density[{i}] == {exact}", A.density() == exact, str(A.density()))
        )
        if k <= fx.p - 1:
            floor = Fraction(1, 2 ** (fx.p - 1))
            checks.append(
                FixtureCheck(f"density[{i}] >= {floor}", A.density() >= floor)
            )
        floor_k = Fraction(1, 2 ** (k * (fx.p - 1)))
        checks.append(FixtureCheck(f"density[{i}] >= {floor_k}", A.density() >= floor_k))
    gap_floor = fx.expected["gap_floor"]
    for i in range(len(fx.subsets)):
        for j in range(len(fx.subsets)):
            if i == j:
                continue
            Pi = distribution_on(fx.subsets[i], form_fn(fx.forms[i])).probs[0]
            Pj = distribution_on(fx.subsets[j], form_fn(fx.forms[i])).probs[0]
            checks.append(
                FixtureCheck(
                    f"gap[{i},{j}] >= 1/2", Pi - Pj >= gap_floor, str(Pi - Pj)
                )
            )
    return FixtureReport(fx.name, tuple(checks))


# ---------------------------------------------------------------------------
# disjoint-zero-set family: exactly computable negative correlation


def negative_correlation_value(p: int) -> Fraction:
    """2^(-(p-1)) - 1/p; negative for every odd prime, zero at p = 2."""
    return Fraction(1, 2 ** (p - 1)) - Fraction(1, p)


def fixture_negative_correlation(p: int, n: int) -> Fixture:
    """Subsets avoiding disjoint coordinate blocks of size (p-1)/2, with
    difference-count forms whose pairwise correlation is exactly
    2^(-(p-1)) - 1/p."""
    if p == 2:
        raise PreconditionFailed(
            "construction needs an odd prime: at p=2 the analogous correlation is zero"
        )
    if p not in (3, 5, 7, 11, 13):
        raise PreconditionFailed(f"p={p} is not a supported prime")
    s = n // p
    if s < 2:
        raise PreconditionFailed(f"need n >= 2p = {2 * p} for two blocks, got {n}")
    h = (p - 1) // 2
    blocks = [tuple(range(i * h, (i + 1) * h)) for i in range(s)]
    subsets = []
    for Z in blocks:
        constraints = [(ModPForm.coordinate(n, p, z), 0) for z in Z]
        subsets.append(subset_from_constraints(constraints, n, p))
    forms = {}
    for i in range(s):
        for j in range(s):
            if i == j:
                continue
            coeffs = [0] * n
            for z in blocks[i]:
                coeffs[z] = 1
            for z in blocks[j]:
                coeffs[z] = p - 1
            forms[(i, j)] = ModPForm(p, n, tuple(coeffs))
    ordered = tuple(forms[key] for key in sorted(forms))
    return Fixture(
        name="negative-correlation",
        p=p,
        n=n,
        subsets=tuple(subsets),
        forms=ordered,
        expected={"correlation": negative_correlation_value(p)},
        index_sets=tuple(blocks),
    )


def verify_negative_correlation(fx: Fixture) -> FixtureReport:
    expected = fx.expected["correlation"]
    s = len(fx.subsets)
    keys = [(i, j) for i in range(s) for j in range(s) if i != j]
    checks = []
    for form, (i, j) in zip(fx.forms, sorted(keys)):
        Xi = distribution_on(fx.subsets[i], form_fn(form))
        Xj = distribution_on(fx.subsets[j], form_fn(form))
        value = correlation([Xi, Xj])
        checks.append(
            FixtureCheck(
                f"correlation[{i},{j}] == {expected}", value == expected, str(value)
            )
        )
    return FixtureReport(fx.name, tuple(checks))


# ---------------------------------------------------------------------------
# two-coordinate dependence of linearly independent forms


def fixture_intro_dependence(p: int) -> Fixture:
    """On {0,1}^2 the forms x1 and x1+x2 are linearly independent, yet for
    p >= 3 conditioning on x1 = 0 kills the event x1+x2 = 2.  At p = 2 the
    analogous event keeps probability one half: the contrast case."""
    n = 2
    form = ModPForm(p, n, (1, 1))
    full = CubeSubset.full(n)
    half = subset_from_constraints([(ModPForm.coordinate(n, p, 0), 0)], n, p)
    if p >= 3:
        expected = {
            "target": Fraction(2),
            "unconditional": Fraction(1, 4),
            "conditioned": Fraction(0),
        }
        notes = ()
    else:
        expected = {
            "target": Fraction(0),
            "unconditional": Fraction(1, 2),
            "conditioned": Fraction(1, 2),
        }
        notes = ("contrast case: over F_2 the events stay independent",)
    return Fixture(
        name="intro-dependence",
        p=p,
        n=n,
        subsets=(full, half),
        forms=(form,),
        expected=expected,
        notes=notes,
    )


def verify_intro_dependence(fx: Fixture) -> FixtureReport:
    target = int(fx.expected["target"])
    full_dist = distribution_on(fx.subsets[0], form_fn(fx.forms[0]))
    cond_dist = distribution_on(fx.subsets[1], form_fn(fx.forms[0]))
    checks = (
        FixtureCheck(
            f"P[form = {target}] == {fx.expected['unconditional']}",
            full_dist.probs[target] == fx.expected["unconditional"],
            str(full_dist.probs[target]),
        ),
        FixtureCheck(
            f"P[form = {target} | x1 = 0] == {fx.expected['conditioned']}",
            cond_dist.probs[target] == fx.expected["conditioned"],
            str(cond_dist.probs[target]),
        ),
    )
    return FixtureReport(fx.name, checks)


FIXTURES = {
    "intro-dependence": (fixture_intro_dependence, verify_intro_dependence),
    "no-close-distributions": (
        fixture_no_close_distributions,
        verify_no_close_distributions,
    ),
    "bounded-support": (fixture_bounded_support_lower, verify_bounded_support_lower),
    "negative-correlation": (
        fixture_negative_correlation,
        verify_negative_correlation,
    ),
}
