"""Seeded randomized and exhaustive verification sweeps.

Each sweep runs one quantitative claim over many exact instances and
counts violations; the CLI's `verify` subcommand and the acceptance tests
both drive these.  Identical seeds give identical instances and reports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .cube import (
    CubeSubset,
    ModPForm,
    all_form_counts,
    all_forms_matrix,
    coordinate_fn,
    form_fn,
    form_from_row,
    subset_from_constraints,
)
from .cover import check_equidistribution_bound, check_nonzero_probability_bound
from .dist import Dist, check_hierarchy, tv
from .errors import PreconditionFailed
from .info import (
    NEGENTROPY_GUARD,
    check_low_negentropy_equidistribution,
    conditional_negentropy,
    geq,
    negentropy,
    negentropy_markov,
    negentropy_on,
)
from .irreducible import FuncFamily, irreducible_support, reduction_chain
from .select import check_overlap_proposition, check_proximity_proposition


@dataclass(frozen=True)
class SweepResult:
    claim: str
    instances: int
    violations: int
    detail: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def to_json(self) -> dict:
        return {
            "claim": self.claim,
            "instances": self.instances,
            "violations": self.violations,
            "ok": self.ok,
            "detail": self.detail,
        }


def random_dense_subset(
    rng: np.random.Generator, n: int, delta: Fraction, max_tries: int = 64
) -> CubeSubset:
    """Include each vertex independently with q = min(2 delta, 0.9); retry
    until the density floor holds, so the floor is guaranteed exactly."""
    q = min(2 * float(delta), 0.9)
    for _ in range(max_tries):
        A = CubeSubset(n, rng.random(1 << n) < q)
        if A.size and A.density() >= delta:
            return A
    raise PreconditionFailed(f"could not reach density {delta} at n={n}")


def random_dense_family(
    s: int, n: int, p: int, delta: Fraction, seed: int
) -> list[CubeSubset]:
    rng = np.random.default_rng(seed)
    return [random_dense_subset(rng, n, Fraction(delta)) for _ in range(s)]


def random_dist(rng: np.random.Generator, d: int, grain: int = 60) -> Dist:
    """Exact rational distribution: a multinomial count vector over d cells."""
    counts = rng.multinomial(grain, [1.0 / d] * d)
    return Dist.from_counts(counts.tolist(), grain)


def sweep_hierarchy(trials: int, seed: int = 0, max_domain: int = 5, max_m: int = 4) -> SweepResult:
    """Both proved hierarchy implications on random exact tuples, with the
    thresholds chosen per instance so each implication is exercised."""
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(trials):
        d = int(rng.integers(2, max_domain + 1))
        m = int(rng.integers(2, max_m + 1))
        dists = [random_dist(rng, d) for _ in range(m)]
        from .dist import correlation, diameter

        eta = diameter(dists)  # hypothesis (a) holds with equality
        nu = max(Fraction(0), -correlation(dists))  # hypothesis (b) holds
        verdict = check_hierarchy(dists, eta, nu if nu > 0 else Fraction(1, 10**9))
        if not verdict.ok:
            bad += 1
    return SweepResult("hierarchy", trials, bad)


def sweep_low_negentropy(
    trials: int, seed: int = 0, max_domain: int = 7, guard: float = NEGENTROPY_GUARD
) -> SweepResult:
    rng = np.random.default_rng(seed)
    bad = 0
    done = 0
    grain = 20000
    while done < trials:
        d = int(rng.integers(2, max_domain + 1))
        base = grain // d
        jitter = rng.integers(-base // 20, base // 20 + 1, size=d)
        jitter[-1] -= jitter.sum()
        counts = base + jitter
        if (counts <= 0).any():
            continue
        X = Dist.from_counts(counts.tolist(), int(counts.sum()))
        j = negentropy(X).value
        if j > guard:
            continue
        verdict = check_low_negentropy_equidistribution(X, guard, guard=guard)
        if not verdict.ok:
            bad += 1
        done += 1
    return SweepResult("low-negentropy", trials, bad)


def _random_fn_tuple(rng: np.random.Generator, n: int, p: int, max_len: int = 2):
    fns = []
    length = int(rng.integers(1, max_len + 1))
    for _ in range(length):
        if rng.random() < 0.5:
            fns.append(coordinate_fn(n, int(rng.integers(0, n))))
        else:
            coeffs = rng.integers(0, p, size=n)
            fns.append(form_fn(ModPForm(p, n, tuple(int(c) for c in coeffs))))
    return fns


def sweep_markov(trials: int, seed: int = 0, n: int = 6, p: int = 3) -> SweepResult:
    rng = np.random.default_rng(seed)
    bad = 0
    done = 0
    while done < trials:
        A = random_dense_subset(rng, n, Fraction(1, 4))
        T = _random_fn_tuple(rng, n, p)
        Y = coordinate_fn(n, int(rng.integers(0, n)))
        y = int(rng.integers(0, 2))
        if not (A.membership & (Y.values == y)).any():
            continue
        if not negentropy_markov(A, T, Y, y).ok:
            bad += 1
        done += 1
    return SweepResult("negentropy-markov", trials, bad)


def sweep_superadditivity(trials: int, seed: int = 0, n: int = 6, p: int = 3) -> SweepResult:
    """J(X,Y) >= J(X) + J(Y) and J(X|Y) >= J(X) over random instances."""
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(trials):
        A = random_dense_subset(rng, n, Fraction(1, 4))
        X = _random_fn_tuple(rng, n, p)
        Y = _random_fn_tuple(rng, n, p)
        joint = negentropy_on(A, X + Y)
        jx = negentropy_on(A, X)
        jy = negentropy_on(A, Y)
        if not geq(joint, jx + jy):
            bad += 1
        if not geq(conditional_negentropy(A, X, Y), jx):
            bad += 1
    return SweepResult("negentropy-superadditivity", trials, bad)


def sweep_reduction_chain(
    trials: int,
    seed: int = 0,
    n: int = 6,
    k: int = 3,
    etas: Sequence[float] = (0.05, 0.2),
) -> SweepResult:
    """The conditional negentropy bound (2k-1) eta over random instances
    with the unconditioned part drawn outside the anomaly support."""
    rng = np.random.default_rng(seed)
    family_cache: dict = {}
    bad = 0
    done = 0
    skipped = 0
    while done < trials and skipped < trials * 50:
        A = random_dense_subset(rng, n, Fraction(1, 4))
        eta = float(etas[int(rng.integers(0, len(etas)))])
        family = FuncFamily(n, 2)
        support = irreducible_support(A, family, k, eta)
        free = [i for i in range(n) if i not in support]
        if not free:
            skipped += 1
            continue
        t_len = int(rng.integers(1, min(len(free), k) + 1))
        T = list(rng.choice(free, size=t_len, replace=False))
        rest = [i for i in range(n) if i not in T]
        u_max = min(len(rest), k - t_len)
        u_len = int(rng.integers(0, u_max + 1)) if u_max else 0
        U = list(rng.choice(rest, size=u_len, replace=False)) if u_len else []
        res = reduction_chain(A, family, T, U, k, eta)
        if not res.ok:
            bad += 1
        done += 1
    return SweepResult("reduction-chain", done, bad, {"skipped": skipped})


def sweep_equidistribution_k1(p: int, n: int) -> SweepResult:
    """Exhaustive scan of every single form at its own support size."""
    size = 1 << n
    counts = all_form_counts(CubeSubset.full(n), p)
    forms = all_forms_matrix(n, p)
    supports = (forms != 0).sum(axis=1)
    bad = 0
    for row in range(forms.shape[0]):
        r = int(supports[row])
        lhs_scale = (p * p) ** r
        rhs = p * size * (p * p - 1) ** r
        for c in counts[row].tolist():
            if abs(p * c - size) * lhs_scale > rhs:
                bad += 1
    return SweepResult(f"equidistribution-k1-p{p}-n{n}", forms.shape[0], bad)


def sweep_equidistribution_k2(p: int, n: int, trials: int, seed: int = 0) -> SweepResult:
    """Random form pairs, each checked at the exact minimum combination
    support, so the hypothesis holds by construction."""
    rng = np.random.default_rng(seed)
    bad = 0
    hypothesis_failures = 0
    for _ in range(trials):
        f1 = ModPForm(p, n, tuple(int(c) for c in rng.integers(0, p, size=n)))
        f2 = ModPForm(p, n, tuple(int(c) for c in rng.integers(0, p, size=n)))
        probe = check_equidistribution_bound([f1, f2], r=0)
        verdict = check_equidistribution_bound([f1, f2], r=probe.min_combination_support)
        if not verdict.hypothesis_held:
            hypothesis_failures += 1
        elif verdict.violations:
            bad += 1
    return SweepResult(
        f"equidistribution-k2-p{p}-n{n}",
        trials,
        bad,
        {"hypothesis_failures": hypothesis_failures},
    )


def sweep_nonzero_probability(
    p: int, k: int, n: int, trials: int, seed: int = 0
) -> SweepResult:
    """Exact dichotomy over random form tuples: every joint probability on
    the cube is zero or at least 2^(-k(p-1))."""
    rng = np.random.default_rng(seed)
    bad = 0
    zero_branch = 0
    for _ in range(trials):
        forms = [
            ModPForm(p, n, tuple(int(c) for c in rng.integers(0, p, size=n)))
            for _ in range(k)
        ]
        verdict = check_nonzero_probability_bound(forms)
        bad += verdict.violations
        zero_branch += verdict.zero_branch
    return SweepResult(
        f"nonzero-probability-p{p}-k{k}-n{n}", trials, bad, {"zero_branch": zero_branch}
    )


def sweep_nonzero_probability_exhaustive_k1(p: int, n: int) -> SweepResult:
    """Every single form, every target value, exact counts."""
    size = 1 << n
    counts = all_form_counts(CubeSubset.full(n), p)
    den = 2 ** (p - 1)
    ok_zero = counts == 0
    ok_low = counts * den >= size
    bad = int((~(ok_zero | ok_low)).sum())
    return SweepResult(f"nonzero-probability-exhaustive-k1-p{p}-n{n}", counts.shape[0], bad)


def sweep_proximity(
    trials: int,
    seed: int = 0,
    n: int = 6,
    p: int = 2,
    k: int = 2,
    eta: Fraction = Fraction(1, 10),
) -> SweepResult:
    """Pairs passing the matching-support hypotheses never violate the
    proximity bound; random pairs are filtered, plus constructed identical
    and near-identical pairs so the hypothesis branch is well fed."""
    rng = np.random.default_rng(seed)
    family = FuncFamily(n, p)
    bad = 0
    exercised = 0
    filtered = 0
    done = 0
    while done < trials:
        roll = rng.random()
        A = random_dense_subset(rng, n, Fraction(1, 4))
        if roll < 0.3:
            B = A
        elif roll < 0.6:
            # near copy: flip membership of a few vertices
            membership = A.membership.copy()
            for _ in range(int(rng.integers(1, 4))):
                v = int(rng.integers(0, 1 << n))
                membership[v] = not membership[v]
            if not membership.any():
                continue
            B = CubeSubset(n, membership)
        else:
            B = random_dense_subset(rng, n, Fraction(1, 4))
        verdict = check_proximity_proposition(A, B, family, k, Fraction(eta))
        done += 1
        if verdict.hypotheses_held:
            exercised += 1
            if verdict.violations:
                bad += 1
        else:
            filtered += 1
    return SweepResult(
        "proximity", done, bad, {"exercised": exercised, "filtered": filtered}
    )


def overlap_proposition_instance(
    n: int = 6, p: int = 2, eta: Fraction = Fraction(1, 100)
):
    """A two-subset instance with disjoint private anomaly supports and a
    shared high-support form, ready for the overlap lower-bound check."""
    A1 = subset_from_constraints([(ModPForm.coordinate(n, p, 0), 0)], n, p)
    A2 = subset_from_constraints([(ModPForm.coordinate(n, p, 1), 0)], n, p)
    coeffs = [0, 0] + [1] * (n - 2)
    psi = ModPForm(p, n, tuple(coeffs))
    parts = [frozenset(), frozenset({0}), frozenset({1})]
    return [A1, A2], [psi], parts


def sweep_overlap_proposition(
    etas: Sequence[Fraction] = (Fraction(1, 5), Fraction(1, 20), Fraction(1, 100)),
    n: int = 6,
    p: int = 2,
    r: int = 1,
) -> SweepResult:
    subsets, phi, parts = overlap_proposition_instance(n, p)
    k = len(phi) + r
    bad = 0
    minima = []
    for eta in etas:
        verdict = check_overlap_proposition(subsets, phi, parts, k, Fraction(eta), r)
        if not verdict.ok:
            bad += 1
        minima.append(
            float(verdict.min_overlap) if verdict.min_overlap is not None else None
        )
    trend_ok = all(
        a is None or b is None or b >= a - 1e-12 for a, b in zip(minima, minima[1:])
    )
    return SweepResult(
        "overlap-proposition",
        len(list(etas)),
        bad,
        {"min_overlaps": minima, "monotone_trend": trend_ok},
    )
