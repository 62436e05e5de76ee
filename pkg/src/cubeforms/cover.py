"""Covering the biased mod-p forms of a dense subset with few balls.

A form is biased at level alpha on a subset when the unnormalized L1
distance between its distribution there and the uniform distribution on
F_p is at least alpha.  All biased forms get certified to lie within a
fixed support distance of the linear span of a small generator set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Sequence

import numpy as np

from .cube import (
    DEFAULT_FORM_BUDGET,
    CubeSubset,
    ModPForm,
    all_form_counts,
    all_forms_matrix,
    bits_matrix,
    ensure_prime,
    form_from_row,
    joint_counts,
    form_fn,
)
from .errors import BudgetExceeded, PreconditionFailed


def tv_to_uniform(A: CubeSubset, form: ModPForm) -> Fraction:
    """sum_c |P_A[form = c] - 1/p|, exactly."""
    A.require_nonempty()
    counts, _ = joint_counts(A, [form_fn(form)])
    p = form.p
    total = sum(abs(int(c) * p - A.size) for c in counts)
    return Fraction(total, p * A.size)


def biased_mask(counts: np.ndarray, size: int, p: int, alpha: Fraction) -> np.ndarray:
    """Boolean vector over all forms: TV to uniform >= alpha, exact integers."""
    alpha = Fraction(alpha)
    l1 = np.abs(counts.astype(np.int64) * p - size).sum(axis=1)
    if alpha.denominator * 2 * p * size >= 1 << 62:
        raise BudgetExceeded("alpha denominator too large for exact integer bias test")
    return l1 * alpha.denominator >= alpha.numerator * p * size


def default_radius(p: int, alpha: Fraction) -> int:
    """Smallest r with p * (1 - 1/p^2)^r <= alpha/2.

    A stand-in scale: at this radius, any form far from the span is forced
    to be unbiased on the full cube, which anchors covers built on dense
    subsets.  Reported with every cover, never asserted as optimal.
    """
    ensure_prime(p)
    alpha = Fraction(alpha)
    if alpha <= 0:
        raise PreconditionFailed("alpha must be positive")
    r = 0
    # p * ((p^2-1)/p^2)^r <= alpha/2, cross-multiplied to integers
    while 2 * p * (p * p - 1) ** r * alpha.denominator > alpha.numerator * p ** (2 * r):
        r += 1
        if r > 512:
            raise BudgetExceeded("radius derivation did not converge")
    return r


def span_matrix(generators: Sequence[ModPForm], n: int, p: int, cap: int = 1_000_000) -> np.ndarray:
    """(p^l, n) coefficient matrix of every linear combination of the generators."""
    l = len(generators)
    if p**l > cap:
        raise BudgetExceeded(f"span of size {p**l} exceeds cap {cap}")
    if l == 0:
        return np.zeros((1, n), dtype=np.int16)
    gen = np.array([g.coeffs for g in generators], dtype=np.int16)
    combos = np.array(list(product(range(p), repeat=l)), dtype=np.int16)
    return (combos @ gen) % p


def covered_mask(
    forms: np.ndarray, centers: np.ndarray, radius: int
) -> np.ndarray:
    """Which rows of `forms` lie within Hamming distance `radius` of some center."""
    out = np.zeros(forms.shape[0], dtype=bool)
    for center in centers:
        out |= (forms != center).sum(axis=1) <= radius
    return out


@dataclass(frozen=True)
class BiasCover:
    """Certified cover of all alpha-biased forms by radius-r balls on a span."""

    alpha: Fraction
    r: int
    generators: tuple[ModPForm, ...]
    l: int
    span_size: int
    biased_count: int
    certified: bool
    violations: tuple[ModPForm, ...] = ()
    # advisory bound l <= 2 ln(1/delta) / c(alpha) + 1 with c(alpha) = alpha^2 / 2
    generator_bound: float | None = None
    generator_bound_exceeded: bool = False

    def centers(self, n: int, p: int) -> np.ndarray:
        return span_matrix(self.generators, n, p)

    def to_json(self) -> dict:
        from .serialize import form_json, rational_json

        return {
            "alpha": rational_json(self.alpha),
            "r": self.r,
            "generators": [form_json(g) for g in self.generators],
            "l": self.l,
            "span_size": self.span_size,
            "biased_count": self.biased_count,
            "certified": self.certified,
            "violations": [form_json(g) for g in self.violations],
            "generator_bound": self.generator_bound,
            "generator_bound_exceeded": self.generator_bound_exceeded,
        }


def build_bias_cover(
    A: CubeSubset,
    p: int,
    alpha: Fraction,
    r: int | None = None,
    delta: Fraction | None = None,
    budget: int = DEFAULT_FORM_BUDGET,
) -> BiasCover:
    """Greedy cover of the biased forms, then an exhaustive certification.

    Generators are picked lexicographically-smallest-first among biased
    forms not yet within distance r of the current span; by construction
    every nonzero combination of the generators has support above r.
    """
    ensure_prime(p)
    alpha = Fraction(alpha)
    if r is None:
        r = default_radius(p, alpha)
    counts = all_form_counts(A, p, budget=budget)
    biased = biased_mask(counts, A.size, p, alpha)
    forms = all_forms_matrix(A.n, p, budget=budget)

    generators: list[ModPForm] = []
    covered = covered_mask(forms, span_matrix([], A.n, p), r)
    while True:
        uncovered = biased & ~covered
        idx = np.flatnonzero(uncovered)
        if idx.size == 0:
            break
        new_gen = form_from_row(forms[idx[0]], p)
        generators.append(new_gen)
        covered = covered_mask(forms, span_matrix(generators, A.n, p), r)

    # certification pass, recomputed from the final span
    final_covered = covered_mask(forms, span_matrix(generators, A.n, p), r)
    violation_rows = np.flatnonzero(biased & ~final_covered)
    violations = tuple(form_from_row(forms[i], p) for i in violation_rows[:16])

    gen_bound = None
    exceeded = False
    if delta is not None and alpha > 0:
        c_alpha = float(alpha) ** 2 / 2
        gen_bound = 2 * math.log(1 / float(delta)) / c_alpha + 1
        exceeded = len(generators) > gen_bound
    return BiasCover(
        alpha=alpha,
        r=r,
        generators=tuple(generators),
        l=len(generators),
        span_size=p ** len(generators),
        biased_count=int(biased.sum()),
        certified=violation_rows.size == 0,
        violations=violations,
        generator_bound=gen_bound,
        generator_bound_exceeded=exceeded,
    )


@dataclass(frozen=True)
class EquidistributionVerdict:
    """Joint near-uniformity of a well-separated form tuple on the full cube."""

    hypothesis_held: bool
    min_combination_support: int
    r: int
    bound: Fraction
    violations: int

    @property
    def ok(self) -> bool:
        return self.hypothesis_held and self.violations == 0

    def to_json(self) -> dict:
        from .serialize import rational_json

        return {
            "hypothesis_held": self.hypothesis_held,
            "min_combination_support": self.min_combination_support,
            "r": self.r,
            "bound": rational_json(self.bound),
            "violations": self.violations,
        }


def check_equidistribution_bound(
    forms: Sequence[ModPForm], r: int, budget: int = DEFAULT_FORM_BUDGET
) -> EquidistributionVerdict:
    """|P[forms = y] - p^-k| <= (1 - 1/p^2)^r for every value tuple y,
    whenever every nonzero combination of the forms has support >= r.

    A failing hypothesis is reported, not asserted against.
    """
    if not forms:
        raise PreconditionFailed("need at least one form")
    p, n, k = forms[0].p, forms[0].n, len(forms)
    gen = np.array([f.coeffs for f in forms], dtype=np.int64)
    min_supp = n + 1
    for combo in product(range(p), repeat=k):
        if not any(combo):
            continue
        vec = (np.array(combo, dtype=np.int64) @ gen) % p
        min_supp = min(min_supp, int(np.count_nonzero(vec)))
    hypothesis = min_supp >= r
    # exact comparison: |p^k * count - 2^n| * p^(2r) <= p^k * 2^n * (p^2-1)^r
    counts, cod = joint_counts(CubeSubset.full(n), [form_fn(f) for f in forms])
    size = 1 << n
    pk = p**k
    lhs_scale = (p * p) ** r
    rhs = pk * size * (p * p - 1) ** r
    violations = 0
    if hypothesis:
        for c in counts.tolist():
            if abs(pk * c - size) * lhs_scale > rhs:
                violations += 1
    bound = Fraction((p * p - 1) ** r, (p * p) ** r)
    return EquidistributionVerdict(hypothesis, min_supp, r, bound, violations)


@dataclass(frozen=True)
class NonzeroProbabilityVerdict:
    """Every joint value probability is zero or at least 2^(-k(p-1))."""

    zero_branch: int
    lower_bounded: int
    violations: int

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def to_json(self) -> dict:
        return {
            "zero_branch": self.zero_branch,
            "lower_bounded": self.lower_bounded,
            "violations": self.violations,
        }


def check_nonzero_probability_bound(
    forms: Sequence[ModPForm],
    targets: Sequence[int] | None = None,
) -> NonzeroProbabilityVerdict:
    """Exact dichotomy on the full cube, for one value tuple or all of them."""
    if not forms:
        raise PreconditionFailed("need at least one form")
    p, n, k = forms[0].p, forms[0].n, len(forms)
    counts, cod = joint_counts(CubeSubset.full(n), [form_fn(f) for f in forms])
    size = 1 << n
    threshold_den = 2 ** (k * (p - 1))
    if targets is not None:
        encoded = 0
        for t in targets:
            encoded = encoded * p + (int(t) % p)
        items = [int(counts[encoded])]
    else:
        items = counts.tolist()
    zero = bounded = violations = 0
    for c in items:
        if c == 0:
            zero += 1
        elif c * threshold_den >= size:
            bounded += 1
        else:
            violations += 1
    return NonzeroProbabilityVerdict(zero, bounded, violations)
