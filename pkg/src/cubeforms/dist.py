"""Exact finite distributions and three ways to compare a tuple of them.

Throughout, "total variation" is the unnormalized L1 distance
sum_d |P(d) - Q(d)|, with range [0, 2].  All three functionals (diameter,
correlation, overlap) are computed in exact rational arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .cube import CubeFn, CubeSubset, joint_counts
from .errors import DomainMismatch, PreconditionFailed


@dataclass(frozen=True)
class Dist:
    """A probability distribution on {0, ..., |D|-1} with exact rational masses."""

    probs: tuple[Fraction, ...]

    def __post_init__(self):
        probs = tuple(Fraction(q) for q in self.probs)
        if not probs:
            raise DomainMismatch("empty domain")
        if any(q < 0 for q in probs):
            raise DomainMismatch("negative probability")
        if sum(probs) != 1:
            raise DomainMismatch(f"probabilities sum to {sum(probs)}, not 1")
        object.__setattr__(self, "probs", probs)

    @property
    def domain_size(self) -> int:
        return len(self.probs)

    @classmethod
    def from_counts(cls, counts: Sequence[int], total: int | None = None) -> "Dist":
        counts = [int(c) for c in counts]
        tot = int(total) if total is not None else sum(counts)
        if tot <= 0:
            raise PreconditionFailed("empty sample space")
        return cls(tuple(Fraction(c, tot) for c in counts))

    @classmethod
    def uniform(cls, d: int) -> "Dist":
        return cls(tuple(Fraction(1, d) for _ in range(d)))

    @classmethod
    def point(cls, d: int, at: int) -> "Dist":
        return cls(tuple(Fraction(1) if i == at else Fraction(0) for i in range(d)))


def distribution_on(A: CubeSubset, fns: "CubeFn | Sequence[CubeFn]") -> Dist:
    """Exact distribution of a function (or joint tuple) on a non-empty subset."""
    if isinstance(fns, CubeFn):
        fns = [fns]
    counts, _ = joint_counts(A.require_nonempty(), list(fns))
    return Dist.from_counts(counts.tolist(), A.size)


def _check_same_domain(dists: Sequence[Dist]) -> int:
    d = dists[0].domain_size
    for X in dists[1:]:
        if X.domain_size != d:
            raise DomainMismatch(f"domains of size {d} and {X.domain_size}")
    return d


def tv(X: Dist, Y: Dist) -> Fraction:
    _check_same_domain([X, Y])
    return sum((abs(p - q) for p, q in zip(X.probs, Y.probs)), Fraction(0))


def _check_tuple(dists: Sequence[Dist]) -> int:
    if len(dists) < 2:
        raise PreconditionFailed("need an m-tuple with m >= 2")
    return _check_same_domain(dists)


def diameter(dists: Sequence[Dist]) -> Fraction:
    """Largest pairwise total variation distance within the tuple."""
    _check_tuple(dists)
    return max(tv(X, Y) for i, X in enumerate(dists) for Y in dists[i + 1 :])


def correlation(dists: Sequence[Dist]) -> Fraction:
    """sum_d prod_i P[X_i = d], centred by subtracting 1/|D|^(m-1).

    Zero whenever all but one of the distributions are uniform; can dip to
    -1/|D|^(m-1) and never lower.
    """
    d = _check_tuple(dists)
    m = len(dists)
    total = Fraction(0)
    for c in range(d):
        prod = Fraction(1)
        for X in dists:
            prod *= X.probs[c]
        total += prod
    return total - Fraction(1, d ** (m - 1))


def overlap(dists: Sequence[Dist]) -> Fraction:
    """sum_d min_i P[X_i = d]; positive iff the supports share a point."""
    d = _check_tuple(dists)
    return sum((min(X.probs[c] for X in dists) for c in range(d)), Fraction(0))


@dataclass(frozen=True)
class MetricReport:
    """All three proximity functionals of one m-tuple, exactly."""

    m: int
    domain_size: int
    diameter: Fraction
    correlation: Fraction
    overlap: Fraction

    def to_json(self) -> dict:
        from .serialize import rational_json

        return {
            "m": self.m,
            "domain_size": self.domain_size,
            "diameter": rational_json(self.diameter),
            "correlation": rational_json(self.correlation),
            "overlap": rational_json(self.overlap),
        }


def metric_report(dists: Sequence[Dist]) -> MetricReport:
    d = _check_tuple(dists)
    return MetricReport(
        m=len(dists),
        domain_size=d,
        diameter=diameter(dists),
        correlation=correlation(dists),
        overlap=overlap(dists),
    )


@dataclass(frozen=True)
class HierarchyVerdict:
    """Which hierarchy implications were exercised on a tuple, and held.

    (a) diameter <= eta        implies correlation >= -|D|^(m-2) * eta
    (b) correlation >= -nu     implies overlap >= 1/|D|^m - nu/|D|
    (c) overlap >= A > 0       implies overlap > 0
    """

    exercised_a: bool
    held_a: bool
    exercised_b: bool
    held_b: bool
    exercised_c: bool
    held_c: bool
    diameter: Fraction
    correlation: Fraction
    overlap: Fraction

    @property
    def ok(self) -> bool:
        return (
            (self.held_a or not self.exercised_a)
            and (self.held_b or not self.exercised_b)
            and (self.held_c or not self.exercised_c)
        )

    def to_json(self) -> dict:
        from .serialize import rational_json

        return {
            "a": {"exercised": self.exercised_a, "held": self.held_a},
            "b": {"exercised": self.exercised_b, "held": self.held_b},
            "c": {"exercised": self.exercised_c, "held": self.held_c},
            "diameter": rational_json(self.diameter),
            "correlation": rational_json(self.correlation),
            "overlap": rational_json(self.overlap),
            "ok": self.ok,
        }


def check_hierarchy(dists: Sequence[Dist], eta: Fraction, nu: Fraction) -> HierarchyVerdict:
    """Exact check of the two proved implications between the proximity notions."""
    d = _check_tuple(dists)
    m = len(dists)
    eta = Fraction(eta)
    nu = Fraction(nu)
    diam = diameter(dists)
    cor = correlation(dists)
    om = overlap(dists)

    exercised_a = diam <= eta
    held_a = (not exercised_a) or cor >= -Fraction(d ** (m - 2)) * eta
    exercised_b = cor >= -nu
    held_b = (not exercised_b) or om >= Fraction(1, d**m) - nu / d
    exercised_c = om > 0
    held_c = (not exercised_c) or om > 0
    return HierarchyVerdict(
        exercised_a, held_a, exercised_b, held_b, exercised_c, held_c, diam, cor, om
    )
