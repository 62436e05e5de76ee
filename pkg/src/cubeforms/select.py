"""Selection of sub-families of dense subsets with controlled form behaviour.

Two staged procedures are provided.  Mode "R" pigeonholes the anomaly
supports and then the quantized joint distributions, yielding an index
set on which every mod-p form is either near-uniform on most member sets
or close (in support distance) to a common small span; its verifier
checks that the worst correlation over all forms stays almost positive.
Mode "Q" replaces the support pigeonhole by iterated common-element
extraction, yielding an index set whose verifier bounds the worst overlap
below by 2^(-(m+1)(p-1)) minus a tolerance.

Every report's claimed properties are re-checked by this module's own
verification loops; a second, independently written checker lives in
`verifiers` and shares none of this code.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .cube import (
    DEFAULT_FORM_BUDGET,
    CubeFn,
    CubeSubset,
    ModPForm,
    all_form_counts,
    all_forms_matrix,
    family_form_counts,
    form_from_row,
    joint_counts,
    support_distance,
)
from .cover import BiasCover, biased_mask, covered_mask, default_radius, span_matrix
from .dist import Dist, tv
from .errors import BudgetExceeded, PreconditionFailed, StageEmpty
from .info import leq
from .irreducible import (
    DEFAULT_SUBSET_BUDGET,
    MAX_SET_SIZE,
    FuncFamily,
    irreducible_family,
)
from .serialize import form_json, rational_json


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("CUBEFORMS_THREADS", "1")))
    except ValueError:
        return 1


def _pmap(fn: Callable, items: Sequence):
    """Order-preserving map, optionally fanned out over a thread pool."""
    t = _threads()
    if t <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=t) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class SelectionParams:
    """Thresholds and budgets for one selection run.

    Unset derived fields get desk-scale defaults: alpha = nu / (3 m p^m),
    r the smallest radius with p (1 - 1/p^2)^r <= alpha/2, k = 3r + |Phi|
    capped at the partition limit, and pair thresholds eps' = eps'' =
    epsilon^2 / C(m,2).
    """

    p: int
    n: int
    m: int = 2
    delta: Fraction = Fraction(1, 4)
    eta: Fraction = Fraction(1, 10)
    nu: Fraction = Fraction(1, 20)
    epsilon: Fraction = Fraction(1, 10)
    alpha: Optional[Fraction] = None
    r: Optional[int] = None
    k: Optional[int] = None
    eps_prime: Optional[Fraction] = None
    eps_dprime: Optional[Fraction] = None
    max_tuples: int = 100_000
    sample_size: int = 10_000
    seed: int = 0
    form_budget: int = DEFAULT_FORM_BUDGET
    subset_budget: int = DEFAULT_SUBSET_BUDGET

    def __post_init__(self):
        if self.m < 2:
            raise PreconditionFailed("m must be >= 2")
        for name in ("delta", "eta", "nu", "epsilon"):
            v = Fraction(getattr(self, name))
            object.__setattr__(self, name, v)
            if not 0 < v < 1:
                raise PreconditionFailed(f"{name}={v} outside (0,1)")

    def resolved_alpha(self) -> Fraction:
        if self.alpha is not None:
            return Fraction(self.alpha)
        return self.nu / (3 * self.m * self.p**self.m)

    def resolved_r(self) -> int:
        if self.r is not None:
            return self.r
        return default_radius(self.p, self.resolved_alpha())

    def resolved_eps_prime(self) -> Fraction:
        if self.eps_prime is not None:
            return Fraction(self.eps_prime)
        return self.epsilon**2 / math.comb(self.m, 2)

    def resolved_eps_dprime(self) -> Fraction:
        if self.eps_dprime is not None:
            return Fraction(self.eps_dprime)
        return self.epsilon**2 / math.comb(self.m, 2)

    def resolved_k(
        self, phi_count: int, family_size: int, d0: int = 2, min_size: int | None = None
    ) -> int:
        if self.k is not None:
            k = self.k
        else:
            k = 3 * self.resolved_r() + phi_count
        k = min(k, MAX_SET_SIZE, family_size)
        if self.k is None and min_size is not None:
            # finite-sample guard: a joint codomain above eta * |A| drowns
            # in counting noise, so anomaly detection stops being meaningful
            noise_cap = 1
            while d0 ** (noise_cap + 1) <= float(self.eta) * min_size:
                noise_cap += 1
            k = min(k, max(1, noise_cap))
        while k > 1 and sum(
            math.comb(family_size, t) for t in range(1, k + 1)
        ) > self.subset_budget:
            k -= 1
        return max(k, 1)

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "n": self.n,
            "m": self.m,
            "delta": rational_json(self.delta),
            "eta": rational_json(self.eta),
            "nu": rational_json(self.nu),
            "epsilon": rational_json(self.epsilon),
            "alpha": rational_json(self.resolved_alpha()),
            "r": self.resolved_r(),
            "eps_prime": rational_json(self.resolved_eps_prime()),
            "eps_dprime": rational_json(self.resolved_eps_dprime()),
            "max_tuples": self.max_tuples,
            "sample_size": self.sample_size,
            "seed": self.seed,
        }


# ---------------------------------------------------------------------------
# common element extraction


@dataclass(frozen=True)
class CommonElementResult:
    indices: tuple[int, ...]  # the surviving sub-family L_1
    element: object  # common element (set mode) or ball centre (metric mode)
    source_index: int  # the index i the averaging step picked
    pair_fraction: Fraction


def _element_key(x) -> object:
    """Deterministic ordering for set elements: forms by coefficients."""
    return x.coeffs if isinstance(x, ModPForm) else x


def _pick_max(counts: dict, order_key: Callable) -> object:
    best = None
    best_count = -1
    for x in sorted(counts, key=order_key):
        if counts[x] > best_count:
            best = x
            best_count = counts[x]
    return best


def common_element_sets(
    sets: Sequence[frozenset], eps: Fraction
) -> Optional[CommonElementResult]:
    """Averaging + pigeonhole: a sub-family of >= (eps/C)|L| sets sharing
    one element, provided >= eps |L|^2 ordered pairs intersect."""
    eps = Fraction(eps)
    sets = [frozenset(S) for S in sets]
    L = len(sets)
    if L == 0:
        return None
    C = max(1, max((len(S) for S in sets), default=1))
    inter = [
        [bool(sets[i] & sets[j]) for j in range(L)] for i in range(L)
    ]
    total = sum(sum(row) for row in inter)
    frac = Fraction(total, L * L)
    if frac < eps:
        return None
    need = eps * L
    i = next(idx for idx in range(L) if sum(inter[idx]) >= need)
    Lp = [j for j in range(L) if inter[i][j]]
    counts: dict = {}
    for x in sets[i]:
        counts[x] = sum(1 for j in Lp if x in sets[j])
    x = _pick_max(counts, order_key=_element_key)
    L1 = tuple(j for j in Lp if x in sets[j])
    assert Fraction(len(L1)) >= eps / C * L, "pigeonhole bound violated"
    return CommonElementResult(L1, x, i, frac)


def _metric_pair_ok(
    set_a: Sequence[ModPForm], set_b: Sequence[ModPForm], two_r: int, n: int
) -> bool:
    if two_r >= n:
        return bool(set_a) and bool(set_b)
    for x in set_a:
        for y in set_b:
            if support_distance(x, y) <= two_r:
                return True
    return False


def common_element_metric(
    form_sets: Sequence[Sequence[ModPForm]], eps: Fraction, r: int
) -> Optional[CommonElementResult]:
    """Metric version: pairs count when some two member balls of radius r
    intersect (support distance <= 2r); the returned centre x satisfies
    B(y, r) inside B(x, 3r) for a matched y in every surviving set."""
    eps = Fraction(eps)
    sets = [sorted(S, key=lambda f: f.coeffs) for S in form_sets]
    L = len(sets)
    if L == 0:
        return None
    n = None
    for S in sets:
        for f in S:
            n = f.n
            break
        if n is not None:
            break
    if n is None:
        return None
    C = max(1, max((len(S) for S in sets), default=1))
    two_r = 2 * r
    inter = [
        [_metric_pair_ok(sets[i], sets[j], two_r, n) for j in range(L)]
        for i in range(L)
    ]
    total = sum(sum(row) for row in inter)
    frac = Fraction(total, L * L)
    if frac < eps:
        return None
    need = eps * L
    i = next(idx for idx in range(L) if sum(inter[idx]) >= need)
    Lp = [j for j in range(L) if inter[i][j]]
    counts: dict = {}
    for x in sets[i]:
        counts[x] = sum(
            1 for j in Lp if any(support_distance(x, y) <= two_r for y in sets[j])
        )
    x = _pick_max(counts, order_key=lambda f: f.coeffs)
    L1 = tuple(
        j for j in Lp if any(support_distance(x, y) <= two_r for y in sets[j])
    )
    assert Fraction(len(L1)) >= eps / C * L, "pigeonhole bound violated"
    return CommonElementResult(L1, x, i, frac)


@dataclass(frozen=True)
class ExtractionLog:
    surviving: tuple[int, ...]  # original indices
    extracted: tuple  # centres / common elements, in extraction order
    rounds: tuple[dict, ...]
    final_fraction: Fraction


def iterated_extraction(
    sets: Sequence, eps: Fraction, r: int = 0, mode: str = "set"
) -> ExtractionLog:
    """Repeat the common-element step, removing one matched element per
    surviving set per round, until the pair fraction drops below eps."""
    if mode not in ("set", "metric"):
        raise PreconditionFailed(f"unknown mode {mode!r}")
    eps = Fraction(eps)
    if mode == "set":
        work = [set(S) for S in sets]
    else:
        work = [sorted(S, key=lambda f: f.coeffs) for S in sets]
    cap = max(1, max((len(S) for S in work), default=1))
    alive = list(range(len(work)))
    extracted = []
    rounds: list[dict] = []
    two_r = 2 * r
    while alive and len(extracted) <= cap:
        current = [work[i] for i in alive]
        if mode == "set":
            res = common_element_sets([frozenset(S) for S in current], eps)
        else:
            res = common_element_metric(current, eps, r)
        if res is None:
            break
        alive = [alive[j] for j in res.indices]
        x = res.element
        extracted.append(x)
        for i in alive:
            if mode == "set":
                work[i].discard(x)
            else:
                for y in work[i]:
                    if support_distance(x, y) <= two_r:
                        work[i].remove(y)
                        break
        rounds.append(
            {
                "round": len(extracted),
                "survivors": len(alive),
                "pair_fraction": str(res.pair_fraction),
            }
        )
    # final fraction, for the residual-disjointness record
    current = [work[i] for i in alive]
    L = len(current)
    if L == 0:
        final = Fraction(0)
    elif mode == "set":
        total = sum(
            1 for S in current for T in current if frozenset(S) & frozenset(T)
        )
        final = Fraction(total, L * L)
    else:
        n = next((f.n for S in current for f in S), 1)
        total = sum(
            1
            for S in current
            for T in current
            if _metric_pair_ok(sorted(S, key=lambda f: f.coeffs), sorted(T, key=lambda f: f.coeffs), two_r, n)
        )
        final = Fraction(total, L * L)
    assert len(extracted) <= cap, "extracted more centres than the size cap"
    return ExtractionLog(tuple(alive), tuple(extracted), tuple(rounds), final)


# ---------------------------------------------------------------------------
# proximity of joint distributions under matching supports


@dataclass(frozen=True)
class ProximityVerdict:
    hypotheses_held: bool
    hypothesis_note: str
    bound: float
    max_tv: Optional[Fraction]
    worst_set: tuple[int, ...]
    violations: int

    @property
    def ok(self) -> bool:
        return (not self.hypotheses_held) or self.violations == 0

    def to_json(self) -> dict:
        return {
            "hypotheses_held": self.hypotheses_held,
            "hypothesis_note": self.hypothesis_note,
            "bound": self.bound,
            "max_tv": rational_json(self.max_tv) if self.max_tv is not None else None,
            "worst_set": list(self.worst_set),
            "violations": self.violations,
        }


def check_proximity_proposition(
    A: CubeSubset,
    B: CubeSubset,
    family: FuncFamily,
    k: int,
    eta: Fraction,
    budget: int = DEFAULT_SUBSET_BUDGET,
) -> ProximityVerdict:
    """When two subsets share the anomaly support I and their joint
    distributions on I are eta-close, every <=k joint distribution is
    10 D0^k sqrt(k) eta^(1/4) close."""
    eta = Fraction(eta)
    sup_a = irreducible_family(A, family, k, float(eta), budget=budget).support
    sup_b = irreducible_family(B, family, k, float(eta), budget=budget).support
    d0 = max(f.cod for f in family.members)
    bound = 10.0 * d0**k * math.sqrt(k) * float(eta) ** 0.25
    if sup_a != sup_b:
        return ProximityVerdict(False, "supports differ", bound, None, (), 0)
    I = sorted(sup_a)
    if I:
        tv_i = tv(
            Dist.from_counts(joint_counts(A, family.fns(I))[0].tolist(), A.size),
            Dist.from_counts(joint_counts(B, family.fns(I))[0].tolist(), B.size),
        )
        if tv_i > eta:
            return ProximityVerdict(
                False, f"joint distribution on support differs by {float(tv_i):.4g}", bound, None, (), 0
            )
    count = sum(math.comb(len(family), t) for t in range(1, k + 1))
    if count > budget:
        raise BudgetExceeded(f"{count} tuples exceed budget {budget}")
    max_tv = Fraction(0)
    worst: tuple[int, ...] = ()
    violations = 0
    for t in range(1, k + 1):
        for combo in itertools.combinations(range(len(family)), t):
            fns = family.fns(combo)
            tv_t = tv(
                Dist.from_counts(joint_counts(A, fns)[0].tolist(), A.size),
                Dist.from_counts(joint_counts(B, fns)[0].tolist(), B.size),
            )
            if tv_t > max_tv:
                max_tv, worst = tv_t, combo
            if not leq(float(tv_t), bound):
                violations += 1
    return ProximityVerdict(True, "", bound, max_tv, worst, violations)


# ---------------------------------------------------------------------------
# bounded-support pipeline (pigeonhole on supports, then on distributions)


def _quantized_key(counts: np.ndarray, size: int, eta: Fraction) -> tuple[int, ...]:
    """Bucket a distribution by flooring each mass to a multiple of eta/|D|;
    two same-bucket distributions are strictly eta-close in L1."""
    d = len(counts)
    return tuple(
        int(c) * d * eta.denominator // (size * eta.numerator) for c in counts
    )


def _support_group_stage(
    supports: Sequence[frozenset[int]], indices: Sequence[int]
) -> tuple[list[int], frozenset[int]]:
    groups: dict[tuple, list[int]] = {}
    for idx, sup in zip(indices, supports):
        groups.setdefault(tuple(sorted(sup)), []).append(idx)
    key = min(groups, key=lambda k: (-len(groups[k]), k))
    return groups[key], frozenset(key)


def _distribution_bucket_stage(
    subsets: Sequence[CubeSubset],
    indices: Sequence[int],
    family: FuncFamily,
    support: frozenset[int],
    eta: Fraction,
) -> list[int]:
    if not support:
        return list(indices)
    fns = family.fns(sorted(support))
    buckets: dict[tuple, list[int]] = {}
    for idx in indices:
        counts, _ = joint_counts(subsets[idx], fns)
        buckets.setdefault(_quantized_key(counts, subsets[idx].size, eta), []).append(idx)
    key = min(buckets, key=lambda k: (-len(buckets[k]), k))
    return buckets[key]


def _pairwise_max_tv(
    subsets: Sequence[CubeSubset],
    indices: Sequence[int],
    fns: Sequence[CubeFn],
) -> Fraction:
    """Exact maximum pairwise TV of the joint over `fns` within `indices`."""
    if not fns or len(indices) < 2:
        return Fraction(0)
    counts = []
    sizes = []
    for idx in indices:
        c, _ = joint_counts(subsets[idx], fns)
        counts.append(c)
        sizes.append(subsets[idx].size)
    cmat = np.stack(counts).astype(np.int64)
    svec = np.array(sizes, dtype=np.int64)
    worst = Fraction(0)
    for i in range(len(indices)):
        cross = np.abs(cmat[i][None, :] * svec[:, None] - cmat * svec[i]).sum(axis=1)
        dens = svec * svec[i]
        # float screening, exact confirmation among near-maximal rows
        ratios = cross / dens.astype(np.float64)
        top = float(ratios.max())
        for j in np.flatnonzero(ratios >= top - 1e-9).tolist():
            cand = Fraction(int(cross[j]), int(dens[j]))
            if cand > worst:
                worst = cand
    return worst


def _pairwise_tv_ok(
    subsets: Sequence[CubeSubset],
    indices: Sequence[int],
    fns: Sequence[CubeFn],
    eta: Fraction,
) -> tuple[bool, Fraction]:
    """Exact check that max pairwise TV of the joint over `fns` is <= eta."""
    worst = _pairwise_max_tv(subsets, indices, fns)
    return worst <= eta, worst


@dataclass(frozen=True)
class BoundedSupportReport:
    selected: tuple[int, ...]
    support: frozenset[int]
    excluded: tuple[int, ...]
    bound: float
    max_diameter: Optional[Fraction]
    worst_set: tuple[int, ...]
    diameter_ok: bool

    @property
    def ok(self) -> bool:
        return self.diameter_ok

    def to_json(self) -> dict:
        return {
            "selected": list(self.selected),
            "support": sorted(self.support),
            "excluded": list(self.excluded),
            "bound": self.bound,
            "max_diameter": rational_json(self.max_diameter)
            if self.max_diameter is not None
            else None,
            "worst_set": list(self.worst_set),
            "diameter_ok": self.diameter_ok,
        }


def pipeline_bounded_support(
    subsets: Sequence[CubeSubset],
    family: FuncFamily,
    k: int,
    K: int,
    eta: Fraction,
    budget: int = DEFAULT_SUBSET_BUDGET,
) -> BoundedSupportReport:
    """Pigeonhole on supports then on quantized joint distributions; the
    surviving indices have every <=k-tuple's joint eta^(1/4)-close, which
    dominates every post-composition of <= k family members."""
    eta = Fraction(eta)
    reports = _pmap(
        lambda A: irreducible_family(A, family, k, float(eta), budget=budget), subsets
    )
    excluded = tuple(i for i, rep in enumerate(reports) if rep.count > K)
    eligible = [i for i in range(len(subsets)) if i not in excluded]
    if not eligible:
        raise StageEmpty("support-bound", "every index exceeded the count bound K")
    group, support = _support_group_stage([reports[i].support for i in eligible], eligible)
    selected = _distribution_bucket_stage(subsets, group, family, support, eta)

    d0 = max(f.cod for f in family.members)
    bound = 10.0 * d0**k * math.sqrt(k) * float(eta) ** 0.25
    max_diam: Optional[Fraction] = None
    worst: tuple[int, ...] = ()
    diameter_ok = True
    for t in range(1, k + 1):
        for combo in itertools.combinations(range(len(family)), t):
            diam = _pairwise_max_tv(subsets, selected, family.fns(combo))
            if max_diam is None or diam > max_diam:
                max_diam, worst = diam, combo
            if not leq(float(diam), bound):
                diameter_ok = False
    return BoundedSupportReport(
        tuple(selected), support, excluded, bound, max_diam, worst, diameter_ok
    )


# ---------------------------------------------------------------------------
# the two staged selections over a family of dense subsets


@dataclass(frozen=True)
class PropertyVerdict:
    name: str
    fraction: Fraction
    threshold: Fraction
    passed: bool
    total_tuples: int
    sampled: bool
    note: str = ""

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "fraction": rational_json(self.fraction),
            "threshold": rational_json(self.threshold),
            "passed": self.passed,
            "total_tuples": self.total_tuples,
            "sampled": self.sampled,
            "note": self.note,
        }


@dataclass(frozen=True)
class PipelineReport:
    mode: str
    params: SelectionParams
    s: int
    selected: tuple[int, ...]
    phi: tuple[ModPForm, ...]
    support: frozenset[int]
    support_labels: tuple[str, ...]
    k_eff: int
    stage_log: tuple[dict, ...]
    properties: dict
    warnings: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return all(v.passed for v in self.properties.values())

    def to_json(self) -> dict:
        sizes = [entry["size"] for entry in self.stage_log]
        assert all(a >= b for a, b in zip(sizes, sizes[1:])), "stage sizes increased"
        return {
            "schema": "cubeforms/1",
            "mode": self.mode,
            "params": self.params.to_json(),
            "s": self.s,
            "selected": list(self.selected),
            "phi": [form_json(f) for f in self.phi],
            "support": sorted(self.support),
            "support_labels": list(self.support_labels),
            "k_eff": self.k_eff,
            "stages": list(self.stage_log),
            "properties": {k: v.to_json() for k, v in self.properties.items()},
            "warnings": list(self.warnings),
            "ok": self.ok,
        }


def enumerate_tuples(
    count: int, m: int, max_tuples: int, sample_size: int, seed: int
) -> tuple[np.ndarray, bool]:
    """All m-tuples over range(count) when count^m fits the budget, else a
    seeded uniform sample of sample_size tuples."""
    total = count**m
    if total <= max_tuples:
        grid = np.indices((count,) * m).reshape(m, -1).T
        return grid.astype(np.int64), False
    rng = np.random.default_rng(seed)
    return rng.integers(0, count, size=(sample_size, m), dtype=np.int64), True


def _check_densities(subsets: Sequence[CubeSubset], delta: Fraction) -> None:
    bad = [i for i, A in enumerate(subsets) if A.density() < delta]
    if bad:
        raise PreconditionFailed(
            f"{len(bad)} subsets below the density floor {delta} (first: {bad[:5]})"
        )


def _property_ball_cover(
    subsets: Sequence[CubeSubset],
    selected: Sequence[int],
    phi: Sequence[ModPForm],
    params: SelectionParams,
    counts_by_index: dict[int, np.ndarray],
) -> PropertyVerdict:
    """Fraction of m-tuples for which every form biased on >= 2 member sets
    lies within support distance 3r of the span of the common forms."""
    p, n = params.p, params.n
    alpha = params.resolved_alpha()
    r = params.resolved_r()
    forms = all_forms_matrix(n, p, budget=params.form_budget)
    centers = span_matrix(list(phi), n, p)
    covered = covered_mask(forms, centers, 3 * r)
    biased = np.stack(
        [
            biased_mask(counts_by_index[i], subsets[i].size, p, alpha)
            for i in selected
        ]
    ).astype(np.int8)
    tuples, sampled = enumerate_tuples(
        len(selected), params.m, params.max_tuples, params.sample_size, params.seed
    )
    uncovered = ~covered
    passing = 0
    for batch in np.array_split(tuples, max(1, len(tuples) // 4096)):
        cnt = np.zeros((len(batch), biased.shape[1]), dtype=np.int16)
        for t in range(params.m):
            cnt += biased[batch[:, t]]
        fails = ((cnt >= 2) & uncovered[None, :]).any(axis=1)
        passing += int((~fails).sum())
    frac = Fraction(passing, len(tuples))
    threshold = 1 - params.epsilon
    note = (
        f"sampled {len(tuples)} tuples; 95% CI half-width <= "
        f"{1.96 * math.sqrt(0.25 / len(tuples)):.4f}"
        if sampled
        else ""
    )
    return PropertyVerdict(
        "ball-cover", frac, threshold, frac >= threshold, len(tuples), sampled, note
    )


def _property_support_equality(
    supports: Sequence[frozenset[int]], support: frozenset[int]
) -> PropertyVerdict:
    good = sum(1 for s in supports if s == support)
    frac = Fraction(good, max(1, len(supports)))
    return PropertyVerdict(
        "support-equality", frac, Fraction(1), frac == 1, len(supports), False
    )


def _property_support_containment(
    supports: Sequence[frozenset[int]],
    support: frozenset[int],
    family_size: int,
    params: SelectionParams,
) -> PropertyVerdict:
    """Fraction of m-tuples for which every member of >= 2 of the tuple's
    supports lies in the common support."""
    mat = np.zeros((len(supports), family_size), dtype=np.int8)
    for row, sup in enumerate(supports):
        for f in sup:
            mat[row, f] = 1
    in_common = np.zeros(family_size, dtype=bool)
    for f in support:
        in_common[f] = True
    tuples, sampled = enumerate_tuples(
        len(supports), params.m, params.max_tuples, params.sample_size, params.seed
    )
    outside = ~in_common
    passing = 0
    for batch in np.array_split(tuples, max(1, len(tuples) // 4096)):
        cnt = np.zeros((len(batch), family_size), dtype=np.int16)
        for t in range(params.m):
            cnt += mat[batch[:, t]]
        fails = ((cnt >= 2) & outside[None, :]).any(axis=1)
        passing += int((~fails).sum())
    frac = Fraction(passing, len(tuples))
    threshold = 1 - params.epsilon
    return PropertyVerdict(
        "support-containment", frac, threshold, frac >= threshold, len(tuples), sampled
    )


def _property_diameter(
    subsets: Sequence[CubeSubset],
    selected: Sequence[int],
    family: FuncFamily,
    support: frozenset[int],
    eta: Fraction,
) -> PropertyVerdict:
    ok, worst = _pairwise_tv_ok(subsets, selected, family.fns(sorted(support)), eta)
    return PropertyVerdict(
        "support-diameter",
        Fraction(1) if ok else Fraction(0),
        Fraction(1),
        ok,
        len(selected) ** 2,
        False,
        note=f"max pairwise TV {float(worst):.6g}",
    )


def _trivial_report(mode: str, params: SelectionParams, s: int, warning: str) -> PipelineReport:
    props = {
        "ball-cover": PropertyVerdict("ball-cover", Fraction(1), 1 - params.epsilon, True, s * s, False, warning),
        "support": PropertyVerdict("support-equality", Fraction(1), Fraction(1), True, s, False, warning),
        "support-diameter": PropertyVerdict("support-diameter", Fraction(1), Fraction(1), True, s * s, False, warning),
    }
    return PipelineReport(
        mode=mode,
        params=params,
        s=s,
        selected=tuple(range(s)),
        phi=(),
        support=frozenset(),
        support_labels=(),
        k_eff=1,
        stage_log=({"stage": "input", "size": s},),
        properties=props,
        warnings=(warning,),
    )


def _shared_stages(subsets: Sequence[CubeSubset], params: SelectionParams):
    """Bias covers, iterated metric extraction of common forms, and the
    per-index anomaly supports; both selection modes start this way."""
    p, n = params.p, params.n
    alpha = params.resolved_alpha()
    r = params.resolved_r()
    log: list[dict] = [{"stage": "input", "size": len(subsets)}]

    counts_by_index: dict[int, np.ndarray] = {}

    def cover_for(i: int) -> BiasCover:
        counts = all_form_counts(subsets[i], p, budget=params.form_budget)
        counts_by_index[i] = counts
        forms = all_forms_matrix(n, p, budget=params.form_budget)
        biased = biased_mask(counts, subsets[i].size, p, alpha)
        generators: list[ModPForm] = []
        covered = covered_mask(forms, span_matrix([], n, p), r)
        while True:
            idx = np.flatnonzero(biased & ~covered)
            if idx.size == 0:
                break
            generators.append(form_from_row(forms[idx[0]], p))
            covered = covered_mask(forms, span_matrix(generators, n, p), r)
        return BiasCover(
            alpha=alpha,
            r=r,
            generators=tuple(generators),
            l=len(generators),
            span_size=p ** len(generators),
            biased_count=int(biased.sum()),
            certified=True,
        )

    covers = [cover_for(i) for i in range(len(subsets))]
    phi_sets = []
    for cov in covers:
        centers = span_matrix(list(cov.generators), n, p)
        phi_sets.append([form_from_row(row, p) for row in centers])
    b_cap = max(len(s) for s in phi_sets)
    log.append({"stage": "bias-covers", "size": len(subsets), "max_span": b_cap})

    extraction = iterated_extraction(
        phi_sets, params.resolved_eps_prime(), r=r, mode="metric"
    )
    L = list(extraction.surviving)
    if not L:
        raise StageEmpty("common-forms")
    phi: list[ModPForm] = []
    seen = set()
    for f in extraction.extracted:
        if f.coeffs not in seen:
            seen.add(f.coeffs)
            phi.append(f)
    assert len(extraction.extracted) <= b_cap, "extraction exceeded the span cap"
    log.append(
        {
            "stage": "common-forms",
            "size": len(L),
            "rounds": len(extraction.extracted),
            "final_pair_fraction": str(extraction.final_fraction),
        }
    )

    family = FuncFamily.dedupe_extras(n, p, phi)
    d0 = max(f.cod for f in family.members)
    k_eff = params.resolved_k(
        len(phi), len(family), d0=d0, min_size=min(A.size for A in subsets)
    )
    supports = _pmap(
        lambda i: irreducible_family(
            subsets[i], family, k_eff, float(params.eta), budget=params.subset_budget
        ).support,
        L,
    )
    log.append({"stage": "anomaly-supports", "size": len(L), "k": k_eff})
    return covers, counts_by_index, L, tuple(phi), family, k_eff, supports, log


def pipeline_correlation(
    subsets: Sequence[CubeSubset], params: SelectionParams
) -> PipelineReport:
    """Mode "R": support pigeonhole, then quantized-distribution pigeonhole."""
    _check_densities(subsets, params.delta)
    s = len(subsets)
    if s == 0:
        raise StageEmpty("input")
    if s == 1:
        return _trivial_report("R", params, s, "single subset: no pairs to compare")
    covers, counts_by_index, L, phi, family, k_eff, supports, log = _shared_stages(
        subsets, params
    )
    group, support = _support_group_stage(supports, L)
    log.append({"stage": "support-pigeonhole", "size": len(group)})
    selected = _distribution_bucket_stage(subsets, group, family, support, params.eta)
    log.append({"stage": "distribution-pigeonhole", "size": len(selected)})
    if not selected:
        raise StageEmpty("distribution-pigeonhole")

    support_by_index = dict(zip(L, supports))
    props = {
        "ball-cover": _property_ball_cover(
            subsets, selected, phi, params, counts_by_index
        ),
        "support": _property_support_equality(
            [support_by_index[i] for i in selected], support
        ),
        "support-diameter": _property_diameter(
            subsets, selected, family, support, params.eta
        ),
    }
    return PipelineReport(
        mode="R",
        params=params,
        s=s,
        selected=tuple(selected),
        phi=phi,
        support=support,
        support_labels=tuple(family.labels(sorted(support))),
        k_eff=k_eff,
        stage_log=tuple(log),
        properties=props,
    )


def pipeline_overlap(
    subsets: Sequence[CubeSubset], params: SelectionParams
) -> PipelineReport:
    """Mode "Q": iterated set-version extraction over the anomaly supports
    replaces the support pigeonhole, so the selected fraction of indices
    does not shrink with the number of possible supports."""
    _check_densities(subsets, params.delta)
    s = len(subsets)
    if s == 0:
        raise StageEmpty("input")
    if s == 1:
        return _trivial_report("Q", params, s, "single subset: no pairs to compare")
    covers, counts_by_index, L, phi, family, k_eff, supports, log = _shared_stages(
        subsets, params
    )
    extraction = iterated_extraction(
        supports, params.resolved_eps_dprime(), mode="set"
    )
    pre = [L[j] for j in extraction.surviving]
    if not pre:
        raise StageEmpty("support-extraction")
    support = frozenset(extraction.extracted)
    log.append(
        {
            "stage": "support-extraction",
            "size": len(pre),
            "rounds": len(extraction.extracted),
            "final_pair_fraction": str(extraction.final_fraction),
        }
    )
    selected = _distribution_bucket_stage(subsets, pre, family, support, params.eta)
    log.append({"stage": "distribution-pigeonhole", "size": len(selected)})
    if not selected:
        raise StageEmpty("distribution-pigeonhole")

    support_by_index = dict(zip(L, supports))
    props = {
        "ball-cover": _property_ball_cover(
            subsets, selected, phi, params, counts_by_index
        ),
        "support": _property_support_containment(
            [support_by_index[i] for i in selected], support, len(family), params
        ),
        "support-diameter": _property_diameter(
            subsets, selected, family, support, params.eta
        ),
    }
    return PipelineReport(
        mode="Q",
        params=params,
        s=s,
        selected=tuple(selected),
        phi=phi,
        support=support,
        support_labels=tuple(family.labels(sorted(support))),
        k_eff=k_eff,
        stage_log=tuple(log),
        properties=props,
    )


# ---------------------------------------------------------------------------
# theorem-level verification over the selected indices


@dataclass(frozen=True)
class TheoremVerdict:
    kind: str
    threshold: Fraction
    fraction: Fraction
    passed: bool
    total_tuples: int
    sampled: bool
    worst_value: Fraction
    rows: tuple = field(repr=False, default=())
    note: str = ""

    @property
    def ok(self) -> bool:
        return self.passed

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "threshold": rational_json(self.threshold),
            "fraction": rational_json(self.fraction),
            "passed": self.passed,
            "total_tuples": self.total_tuples,
            "sampled": self.sampled,
            "worst_value": rational_json(self.worst_value),
            "note": self.note,
        }


def _tuple_guard(n: int, m: int) -> None:
    if n * m >= 62:
        raise BudgetExceeded(
            f"count products for n={n}, m={m} exceed 64-bit range; reduce m or n"
        )


def verify_theorem_correlation(
    subsets: Sequence[CubeSubset],
    selected: Sequence[int],
    params: SelectionParams,
    nu: Optional[Fraction] = None,
    counts_cache: Optional[np.ndarray] = None,
) -> TheoremVerdict:
    """Per m-tuple of the selected indices: the minimum over every mod-p
    form of the correlation of the form's distributions, exactly; the
    verdict is the fraction of tuples whose minimum is >= -nu."""
    p, n, m = params.p, params.n, params.m
    nu = Fraction(nu if nu is not None else params.nu)
    _tuple_guard(n, m)
    sel = list(selected)
    chosen = [subsets[i] for i in sel]
    counts = (
        counts_cache
        if counts_cache is not None
        else family_form_counts(chosen, p, budget=params.form_budget)
    )
    sizes = [A.size for A in chosen]
    tuples, sampled = enumerate_tuples(
        len(sel), m, params.max_tuples, params.sample_size, params.seed
    )
    pm1 = p ** (m - 1)
    threshold = -nu
    passing = 0
    worst = None
    rows = []
    for batch in np.array_split(tuples, max(1, len(tuples) // 512)):
        acc = counts[batch[:, 0]].astype(np.int64)
        for t in range(1, m):
            acc = acc * counts[batch[:, t]]
        mins = acc.sum(axis=2).min(axis=1)
        for row, mn in zip(batch.tolist(), mins.tolist()):
            denom = 1
            for t in range(m):
                denom *= sizes[row[t]]
            # min_cor >= -nu  <=>  mn*pm1*nu_den + denom*pm1*nu_num >= denom*nu_den
            ok = (
                mn * pm1 * nu.denominator + denom * pm1 * nu.numerator
                >= denom * nu.denominator
            )
            passing += ok
            val = Fraction(mn, denom) - Fraction(1, pm1)
            if worst is None or val < worst:
                worst = val
            rows.append((tuple(sel[t] for t in row), val, bool(ok)))
    frac = Fraction(passing, len(tuples))
    note = (
        f"sampled {len(tuples)} tuples; 95% CI half-width <= "
        f"{1.96 * math.sqrt(0.25 / len(tuples)):.4f}"
        if sampled
        else "exhaustive over tuples; forms always exhaustive"
    )
    return TheoremVerdict(
        "correlation",
        threshold,
        frac,
        frac >= 1 - params.epsilon,
        len(tuples),
        sampled,
        worst if worst is not None else Fraction(0),
        tuple(rows),
        note,
    )


def verify_theorem_overlap(
    subsets: Sequence[CubeSubset],
    selected: Sequence[int],
    params: SelectionParams,
    nu: Optional[Fraction] = None,
    counts_cache: Optional[np.ndarray] = None,
) -> TheoremVerdict:
    """Per m-tuple: the minimum over every form of the overlap of the
    form's distributions; compared against 2^(-(m+1)(p-1)) - nu."""
    p, n, m = params.p, params.n, params.m
    nu = Fraction(nu if nu is not None else params.nu)
    _tuple_guard(n, m)
    sel = list(selected)
    chosen = [subsets[i] for i in sel]
    counts = (
        counts_cache
        if counts_cache is not None
        else family_form_counts(chosen, p, budget=params.form_budget)
    )
    sizes = [A.size for A in chosen]
    tuples, sampled = enumerate_tuples(
        len(sel), m, params.max_tuples, params.sample_size, params.seed
    )
    threshold = Fraction(1, 2 ** ((m + 1) * (p - 1))) - nu
    passing = 0
    worst = None
    rows = []
    for batch in np.array_split(tuples, max(1, len(tuples) // 512)):
        lcms = np.array(
            [math.lcm(*(sizes[t] for t in row)) for row in batch.tolist()],
            dtype=np.int64,
        )
        acc = None
        for t in range(m):
            scaled = counts[batch[:, t]] * (lcms // np.array(sizes)[batch[:, t]])[:, None, None]
            acc = scaled if acc is None else np.minimum(acc, scaled)
        mins = acc.sum(axis=2).min(axis=1)
        for row, mn, L in zip(batch.tolist(), mins.tolist(), lcms.tolist()):
            # omega = mn / L >= threshold
            ok = mn * threshold.denominator >= threshold.numerator * L
            passing += ok
            val = Fraction(mn, L)
            if worst is None or val < worst:
                worst = val
            rows.append((tuple(sel[t] for t in row), val, bool(ok)))
    frac = Fraction(passing, len(tuples))
    note = (
        f"sampled {len(tuples)} tuples; 95% CI half-width <= "
        f"{1.96 * math.sqrt(0.25 / len(tuples)):.4f}"
        if sampled
        else "exhaustive over tuples; forms always exhaustive"
    )
    return TheoremVerdict(
        "overlap",
        threshold,
        frac,
        frac >= 1 - params.epsilon,
        len(tuples),
        sampled,
        worst if worst is not None else Fraction(0),
        tuple(rows),
        note,
    )


# ---------------------------------------------------------------------------
# overlap lower bound under a disjoint-support decomposition


def default_overlap_slack(eta: float, k: int, m: int, p: int) -> float:
    """Concrete tolerance standing in for the vanishing-in-eta error term."""
    return 4.0 * m * k * eta**0.25 + 2.0 * p**k * math.sqrt(eta)


@dataclass(frozen=True)
class OverlapPropositionVerdict:
    hypotheses_held: bool
    hypothesis_note: str
    threshold: float
    slack: float
    forms_checked: int
    min_overlap: Optional[Fraction]
    violations: int

    @property
    def ok(self) -> bool:
        return (not self.hypotheses_held) or self.violations == 0

    def to_json(self) -> dict:
        return {
            "hypotheses_held": self.hypotheses_held,
            "hypothesis_note": self.hypothesis_note,
            "threshold": self.threshold,
            "slack": self.slack,
            "forms_checked": self.forms_checked,
            "min_overlap": rational_json(self.min_overlap)
            if self.min_overlap is not None
            else None,
            "violations": self.violations,
        }


def check_overlap_proposition(
    subsets: Sequence[CubeSubset],
    phi: Sequence[ModPForm],
    parts: Sequence[frozenset[int]],
    k: int,
    eta: Fraction,
    r: int,
    slack_fn: Callable[[float, int, int, int], float] = default_overlap_slack,
    budget: int = DEFAULT_FORM_BUDGET,
) -> OverlapPropositionVerdict:
    """With anomaly supports split into a shared part (eta-close across the
    subsets) and pairwise disjoint private parts, every form within
    distance r of a member of phi has overlap >= 2^(-(m+1)(p-1)) - slack."""
    eta = Fraction(eta)
    m = len(subsets)
    if m < 2:
        raise PreconditionFailed("need m >= 2 subsets")
    if len(parts) != m + 1:
        raise PreconditionFailed("parts must list the shared part then one per subset")
    n = subsets[0].n
    _tuple_guard(n, m)
    p = phi[0].p if phi else 2
    family = FuncFamily.dedupe_extras(n, p, list(phi))
    slack = slack_fn(float(eta), k, m, p)
    threshold = 2.0 ** (-(m + 1) * (p - 1)) - slack

    # hypothesis: pairwise disjoint parts, support containment, shared-part closeness
    for i in range(len(parts)):
        for j in range(i + 1, len(parts)):
            if parts[i] & parts[j]:
                return OverlapPropositionVerdict(
                    False, f"parts {i} and {j} intersect", threshold, slack, 0, None, 0
                )
    for t, A in enumerate(subsets):
        sup = irreducible_family(A, family, k, float(eta)).support
        if not sup <= (parts[0] | parts[t + 1]):
            return OverlapPropositionVerdict(
                False,
                f"support of subset {t} leaves its allotted parts",
                threshold,
                slack,
                0,
                None,
                0,
            )
    if parts[0]:
        ok, worst = _pairwise_tv_ok(
            subsets, list(range(m)), family.fns(sorted(parts[0])), eta
        )
        if not ok:
            return OverlapPropositionVerdict(
                False,
                f"shared-part joint distributions differ by {float(worst):.4g}",
                threshold,
                slack,
                0,
                None,
                0,
            )

    forms = all_forms_matrix(n, p, budget=budget)
    centers = np.array([f.coeffs for f in phi], dtype=np.int16)
    if centers.size == 0:
        return OverlapPropositionVerdict(True, "empty phi", threshold, slack, 0, None, 0)
    in_balls = covered_mask(forms, centers, r)
    counts = family_form_counts(list(subsets), p, budget=budget)
    sizes = [A.size for A in subsets]
    L = math.lcm(*sizes)
    acc = None
    for t in range(m):
        scaled = counts[t] * (L // sizes[t])
        acc = scaled if acc is None else np.minimum(acc, scaled)
    omega_num = acc.sum(axis=1)
    checked = int(in_balls.sum())
    if checked == 0:
        return OverlapPropositionVerdict(True, "no forms in the balls", threshold, slack, 0, None, 0)
    relevant = omega_num[in_balls]
    min_num = int(relevant.min())
    min_overlap = Fraction(min_num, L)
    violations = int((relevant.astype(np.float64) / L < threshold - 1e-12).sum())
    return OverlapPropositionVerdict(
        True, "", threshold, slack, checked, min_overlap, violations
    )
