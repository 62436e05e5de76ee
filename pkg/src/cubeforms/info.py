"""Shannon entropy and negentropy of functions on cube subsets.

Negentropy J(X) = ln|D| - H(X) measures distance from uniformity on the
codomain; it is zero exactly at the uniform distribution, superadditive
over tuples, and has the conditional version J(X|Y) = J(X,Y) - J(Y).
This is the one corner of the package that uses floating point: counts
stay exact integers and enter the logarithm once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .cube import CubeFn, CubeSubset, joint_counts, joint_values
from .dist import Dist
from .errors import PreconditionFailed

TOL_ABS = 1e-10
TOL_REL = 1e-9

# inputs with J above this are refused by the quadratic-bound checker;
# the expansion constant is only trusted well inside the uniform regime
NEGENTROPY_GUARD = 0.01


def leq(lhs: float, rhs: float) -> bool:
    """lhs <= rhs up to the package's float tolerance."""
    return lhs <= rhs + TOL_ABS + TOL_REL * max(abs(lhs), abs(rhs))


def geq(lhs: float, rhs: float) -> bool:
    return leq(rhs, lhs)


@dataclass(frozen=True)
class Negentropy:
    value: float
    domain_size: int

    def __post_init__(self):
        if self.value < -TOL_ABS or self.value > math.log(self.domain_size) + 1e-6:
            raise PreconditionFailed(
                f"negentropy {self.value} outside [0, ln {self.domain_size}]"
            )
        object.__setattr__(self, "value", max(0.0, self.value))


def entropy_from_counts(counts: np.ndarray, total: int) -> float:
    """H = ln(total) - (1/total) * sum c*ln(c), in nats; 0*ln(0) := 0."""
    if total <= 0:
        raise PreconditionFailed("entropy of an empty sample space")
    c = np.asarray(counts, dtype=np.int64)
    c = c[c > 0]
    return math.log(total) - float(np.sum(c * np.log(c))) / total


def entropy(X: Dist) -> float:
    """-sum p ln p over the domain, converting each exact mass to float once."""
    h = 0.0
    for q in X.probs:
        if q:
            fq = float(q)
            h -= fq * math.log(fq)
    return h


def negentropy(X: Dist) -> Negentropy:
    d = X.domain_size
    return Negentropy(max(0.0, math.log(d) - entropy(X)), d)


def negentropy_on(A: CubeSubset, fns: "CubeFn | Sequence[CubeFn]") -> float:
    """Joint negentropy of a function tuple on a non-empty subset, in nats."""
    if isinstance(fns, CubeFn):
        fns = [fns]
    fns = list(fns)
    if not fns:
        return 0.0
    counts, cod = joint_counts(A, fns)
    return max(0.0, math.log(cod) - entropy_from_counts(counts, A.size))


def conditional_negentropy(
    A: CubeSubset, T: Sequence[CubeFn], U: Sequence[CubeFn]
) -> float:
    """J(T|U) = J(joint(T, U)) - J(U) on the subset."""
    return negentropy_on(A, list(T) + list(U)) - negentropy_on(A, list(U))


def conditional_negentropy_pointwise(
    A: CubeSubset, T: Sequence[CubeFn], U: Sequence[CubeFn]
) -> float:
    """E_{y ~ U} J(T | U = y); equals J(T|U) up to float noise."""
    U = list(U)
    if not U:
        return negentropy_on(A, T)
    uvals, _ = joint_values(U)
    total = 0.0
    for y in np.unique(uvals[A.members()]):
        sub = CubeSubset(A.n, A.membership & (uvals == y))
        total += (sub.size / A.size) * negentropy_on(sub, T)
    return total


@dataclass(frozen=True)
class LowNegentropyVerdict:
    """Quadratic near-uniformity bounds certified for one low-J distribution."""

    j_value: float
    sq_deviation: float
    quadratic_held: bool
    pointwise_held: bool

    @property
    def ok(self) -> bool:
        return self.quadratic_held and self.pointwise_held

    def to_json(self) -> dict:
        return {
            "j": self.j_value,
            "sq_deviation": self.sq_deviation,
            "quadratic_held": self.quadratic_held,
            "pointwise_held": self.pointwise_held,
            "ok": self.ok,
        }


def check_low_negentropy_equidistribution(
    X: Dist, eta: float, guard: float = NEGENTROPY_GUARD
) -> LowNegentropyVerdict:
    """For J(X) <= eta small: sum_d (P(d) - 1/|D|)^2 <= (8/|D|) J(X),
    and every |P(d) - 1/|D|| <= sqrt(8 eta / |D|).

    Refuses eta above the guard rather than certify outside the regime
    where the expansion constant is safe.
    """
    if eta > guard:
        raise PreconditionFailed(f"eta={eta} above guard {guard}; refusing to certify")
    j = negentropy(X).value
    if j > eta + TOL_ABS:
        raise PreconditionFailed(f"J(X)={j} exceeds eta={eta}")
    d = X.domain_size
    sq = float(sum((q - Fraction(1, d)) ** 2 for q in X.probs))
    quadratic = leq(sq, (8.0 / d) * j)
    bound = math.sqrt(8.0 * eta / d)
    pointwise = all(leq(abs(float(q) - 1.0 / d), bound) for q in X.probs)
    return LowNegentropyVerdict(j, sq, quadratic, pointwise)


@dataclass(frozen=True)
class MarkovVerdict:
    """J(T|Y) >= P[Y=y] * J(T | Y=y), checked up to float tolerance.

    J(T|Y) averages the pointwise conditional negentropies over the values
    of Y, so conditioning on an event of probability q inflates J(T|Y) by
    at most a factor 1/q.  Note the unconditional J(T) does NOT bound the
    pointwise term (take T = Y uniform: J(T) = 0 but J(T|Y=y) = ln 2).
    """

    j_given_y: float
    event_probability: Fraction
    j_at_point: float
    held: bool

    @property
    def ok(self) -> bool:
        return self.held

    def to_json(self) -> dict:
        from .serialize import rational_json

        return {
            "j_given_y": self.j_given_y,
            "event_probability": rational_json(self.event_probability),
            "j_at_point": self.j_at_point,
            "held": self.held,
        }


def negentropy_markov(
    A: CubeSubset, T: Sequence[CubeFn], Y: CubeFn, y: int
) -> MarkovVerdict:
    A.require_nonempty()
    event_mask = A.membership & (Y.values == y)
    event_size = int(event_mask.sum())
    if event_size == 0:
        raise PreconditionFailed(f"conditioning event {Y.label}={y} has probability 0")
    prob = Fraction(event_size, A.size)
    lhs = conditional_negentropy(A, list(T), [Y])
    at_point = negentropy_on(CubeSubset(A.n, event_mask), T)
    return MarkovVerdict(lhs, prob, at_point, geq(lhs, float(prob) * at_point))
