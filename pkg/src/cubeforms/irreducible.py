"""Irreducible sets of a function family on a cube subset.

A non-empty set T of functions is irreducible at level eta when its joint
negentropy beats the part-sums of every partition by at least eta (for
singletons: J(f) >= eta).  The union of all irreducible sets of size at
most k is the family's anomaly support; the number of irreducible sets is
bounded through a sunflower extraction argument.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import combinations
from typing import Iterator, Optional, Sequence

from .cube import CubeFn, CubeSubset, ModPForm, coordinate_fn, form_fn
from .errors import BudgetExceeded, PreconditionFailed
from .info import TOL_ABS, geq, leq, negentropy_on

# classification tolerance: a gap within 1e-9 of eta counts as irreducible
GAP_TOL = 1e-9

# Bell(6) = 203 partitions; beyond size 6 classification cost explodes
MAX_SET_SIZE = 6

DEFAULT_SUBSET_BUDGET = 200_000


@dataclass(frozen=True)
class FuncFamily:
    """An ordered family: all n coordinate functions, then extra mod-p forms.

    Coordinate functions keep codomain {0,1}; the extras keep codomain F_p.
    Members must be pairwise distinct as functions (codomain included);
    extras that duplicate an existing member are rejected.
    """

    n: int
    p: int
    extras: tuple[ModPForm, ...] = ()

    @cached_property
    def members(self) -> tuple[CubeFn, ...]:
        fns = [coordinate_fn(self.n, z) for z in range(self.n)]
        for j, form in enumerate(self.extras):
            if form.n != self.n or form.p != self.p:
                raise PreconditionFailed("extra form has mismatched n or p")
            fns.append(form_fn(form, label=f"g{j + 1}[{form}]"))
        keys = {f.key() for f in fns}
        if len(keys) != len(fns):
            raise PreconditionFailed("family members must be distinct as functions")
        return tuple(fns)

    def __len__(self) -> int:
        return self.n + len(self.extras)

    def fns(self, indices: Sequence[int]) -> list[CubeFn]:
        members = self.members
        return [members[i] for i in sorted(indices)]

    def labels(self, indices: Sequence[int]) -> list[str]:
        members = self.members
        return [members[i].label for i in sorted(indices)]

    @staticmethod
    def dedupe_extras(n: int, p: int, forms: Sequence[ModPForm]) -> "FuncFamily":
        """Build a family, silently dropping extras that duplicate a member."""
        kept: list[ModPForm] = []
        seen = {coordinate_fn(n, z).key() for z in range(n)}
        for form in forms:
            key = form_fn(form).key()
            if key not in seen:
                seen.add(key)
                kept.append(form)
        return FuncFamily(n, p, tuple(kept))


class NegentropyCache:
    """Memoised joint negentropies of index sets, per (subset, family)."""

    def __init__(self, A: CubeSubset, family: FuncFamily):
        self.A = A.require_nonempty()
        self.family = family
        self._memo: dict[frozenset[int], float] = {frozenset(): 0.0}

    def j(self, T: frozenset[int]) -> float:
        got = self._memo.get(T)
        if got is None:
            got = negentropy_on(self.A, self.family.fns(T))
            self._memo[T] = got
        return got


def partitions(items: Sequence[int]) -> Iterator[list[list[int]]]:
    """All set partitions, by restricted-growth strings in lexicographic order."""
    items = list(items)
    n = len(items)
    if n == 0:
        yield []
        return
    a = [0] * n
    while True:
        blocks = max(a) + 1
        part = [[] for _ in range(blocks)]
        for i, b in enumerate(a):
            part[b].append(items[i])
        yield part
        j = n - 1
        while j > 0 and a[j] > max(a[:j]):
            j -= 1
        if j == 0:
            return
        a[j] += 1
        for i in range(j + 1, n):
            a[i] = 0


@dataclass(frozen=True)
class IrreducibilityWitness:
    irreducible: bool
    # smallest partition gap when irreducible (singletons: J itself)
    gap: float | None = None
    # a partition violating the gap when reducible; [] means "reduces to empty"
    failing_partition: tuple[tuple[int, ...], ...] | None = None

    def to_json(self) -> dict:
        out: dict = {"irreducible": self.irreducible}
        if self.gap is not None:
            out["gap"] = self.gap
        if self.failing_partition is not None:
            out["failing_partition"] = [list(b) for b in self.failing_partition]
        return out


def is_irreducible(
    A: CubeSubset,
    family: FuncFamily,
    T: Sequence[int],
    eta: float,
    k: int,
    cache: NegentropyCache | None = None,
) -> tuple[bool, IrreducibilityWitness]:
    """Classify one index set, enumerating every partition into >= 2 parts.

    A gap within GAP_TOL of eta counts as meeting it, so classification is
    deterministic under float noise.
    """
    T = frozenset(T)
    if not T:
        raise PreconditionFailed("empty set cannot be classified")
    if len(T) > k:
        raise PreconditionFailed(f"|T|={len(T)} exceeds k={k}")
    if len(T) > MAX_SET_SIZE:
        raise BudgetExceeded(f"|T|={len(T)} above partition cap {MAX_SET_SIZE}")
    cache = cache or NegentropyCache(A, family)
    j_T = cache.j(T)
    if len(T) == 1:
        if j_T >= eta - GAP_TOL:
            return True, IrreducibilityWitness(True, gap=j_T)
        return False, IrreducibilityWitness(False, failing_partition=())
    # a reducible witness exists iff some partition gap falls short of eta;
    # J(T) < eta already fails against the all-singletons partition
    min_gap = math.inf
    for part in partitions(sorted(T)):
        if len(part) < 2:
            continue
        gap = j_T - sum(cache.j(frozenset(block)) for block in part)
        if gap < eta - GAP_TOL:
            witness = tuple(tuple(block) for block in part)
            return False, IrreducibilityWitness(False, failing_partition=witness)
        min_gap = min(min_gap, gap)
    return True, IrreducibilityWitness(True, gap=min_gap)


@dataclass(frozen=True)
class IrreducibleReport:
    """Every irreducible set of size <= k, with witnesses, and their union."""

    k: int
    eta: float
    irreducible_sets: tuple[frozenset[int], ...]
    support: frozenset[int]
    witnesses: dict = field(repr=False, default_factory=dict)

    @property
    def count(self) -> int:
        return len(self.irreducible_sets)

    def to_json(self, family: FuncFamily | None = None) -> dict:
        out = {
            "k": self.k,
            "eta": self.eta,
            "count": self.count,
            "irreducible_sets": [sorted(T) for T in self.irreducible_sets],
            "support": sorted(self.support),
            "witnesses": {
                ",".join(map(str, sorted(T))): w.to_json()
                for T, w in self.witnesses.items()
            },
        }
        if family is not None:
            out["support_labels"] = family.labels(sorted(self.support))
        return out


def irreducible_family(
    A: CubeSubset,
    family: FuncFamily,
    k: int,
    eta: float,
    budget: int = DEFAULT_SUBSET_BUDGET,
    witnesses: bool = False,
) -> IrreducibleReport:
    """Classify every subset of size <= k, in size-then-lex order."""
    if k < 1:
        raise PreconditionFailed("k must be >= 1")
    k = min(k, len(family))
    if k > MAX_SET_SIZE:
        raise BudgetExceeded(f"k={k} above partition cap {MAX_SET_SIZE}")
    total = sum(math.comb(len(family), t) for t in range(1, k + 1))
    if total > budget:
        raise BudgetExceeded(f"{total} candidate sets exceed budget {budget}")
    cache = NegentropyCache(A, family)
    found: list[frozenset[int]] = []
    wit: dict[frozenset[int], IrreducibilityWitness] = {}
    indices = range(len(family))
    for t in range(1, k + 1):
        for combo in combinations(indices, t):
            T = frozenset(combo)
            # quick reject: every partition gap is at most J(T)
            if t > 1 and cache.j(T) < eta - GAP_TOL:
                continue
            ok, w = is_irreducible(A, family, T, eta, k, cache=cache)
            if ok:
                found.append(T)
                if witnesses:
                    wit[T] = w
    support = frozenset().union(*found) if found else frozenset()
    return IrreducibleReport(k, eta, tuple(found), support, wit)


def irreducible_support(
    A: CubeSubset, family: FuncFamily, k: int, eta: float, budget: int = DEFAULT_SUBSET_BUDGET
) -> frozenset[int]:
    return irreducible_family(A, family, k, eta, budget=budget).support


@dataclass(frozen=True)
class ReductionChainResult:
    """Outcome of the select/deselect reduction process started at {T u U}."""

    final_partition: tuple[frozenset[int], ...]
    steps: int
    step_bound: int
    conditional_j: float
    bound: float
    parts_in_support: bool
    bound_held: bool
    steps_within_bound: bool

    @property
    def ok(self) -> bool:
        return self.parts_in_support and self.bound_held and self.steps_within_bound

    def to_json(self) -> dict:
        return {
            "final_partition": [sorted(T) for T in self.final_partition],
            "steps": self.steps,
            "step_bound": self.step_bound,
            "conditional_j": self.conditional_j,
            "bound": self.bound,
            "parts_in_support": self.parts_in_support,
            "bound_held": self.bound_held,
            "steps_within_bound": self.steps_within_bound,
            "ok": self.ok,
        }


def reduction_chain(
    A: CubeSubset,
    family: FuncFamily,
    T: Sequence[int],
    U: Sequence[int],
    k: int,
    eta: float,
) -> ReductionChainResult:
    """Reduce {T u U} until every selected set is irreducible.

    Requires T disjoint from U, 1 <= |T|+|U| <= k, and T disjoint from the
    size-<=k irreducible support.  The surviving parts then sit inside
    U intersect support, and J(T|U) <= (2k-1) * eta.
    """
    T = frozenset(T)
    U = frozenset(U)
    if T & U:
        raise PreconditionFailed("T and U must be disjoint")
    if not 1 <= len(T) + len(U) <= k:
        raise PreconditionFailed(f"need 1 <= |T|+|U| <= k, got {len(T) + len(U)}")
    support = irreducible_support(A, family, k, eta)
    if T & support:
        raise PreconditionFailed("T intersects the irreducible support")
    cache = NegentropyCache(A, family)

    selected: list[frozenset[int]] = [T | U]
    steps = 0
    changed = True
    while changed:
        changed = False
        for idx, S in enumerate(selected):
            ok, w = is_irreducible(A, family, S, eta, k, cache=cache)
            if ok:
                continue
            steps += 1
            del selected[idx]
            if w.failing_partition:
                selected[idx:idx] = [frozenset(b) for b in w.failing_partition]
            changed = True
            break

    budget = 2 * len(T | U) - 1
    cond_j = cache.j(T | U) - cache.j(U)
    bound = (2 * k - 1) * eta
    in_support = all(part <= (U & support) for part in selected)
    return ReductionChainResult(
        final_partition=tuple(selected),
        steps=steps,
        step_bound=budget,
        conditional_j=cond_j,
        bound=bound,
        parts_in_support=in_support,
        bound_held=leq(cond_j, bound),
        steps_within_bound=steps <= budget,
    )


def _is_sunflower(sets: Sequence[frozenset[int]]) -> bool:
    core = frozenset.intersection(*sets)
    for i, S in enumerate(sets):
        for R in sets[i + 1 :]:
            if S & R != core:
                return False
    return True


def find_sunflower(
    sets: Sequence[frozenset[int]], r: int, exhaustive_budget: int = 100_000
) -> Optional[tuple[frozenset[int], tuple[frozenset[int], ...]]]:
    """r distinct sets whose pairwise intersections all equal one core.

    Greedy-recursive extraction in the classic counting style, with a
    bounded exhaustive fallback so that a miss at desk scale really means
    no sunflower of size r exists among the input.
    """
    family = sorted({frozenset(S) for S in sets}, key=lambda S: (len(S), sorted(S)))
    if r < 1:
        raise PreconditionFailed("need r >= 1 petals")
    found = _greedy_sunflower(family, r)
    if found is not None:
        return found
    if math.comb(len(family), r) <= exhaustive_budget:
        for combo in combinations(family, r):
            if _is_sunflower(combo):
                core = frozenset.intersection(*combo)
                return core, tuple(combo)
        return None
    return None


def _greedy_sunflower(
    family: list[frozenset[int]], r: int
) -> Optional[tuple[frozenset[int], tuple[frozenset[int], ...]]]:
    if len(family) < r:
        return None
    # maximal pairwise-disjoint subfamily, greedily in canonical order
    disjoint: list[frozenset[int]] = []
    taken: set[int] = set()
    for S in family:
        if not (S & taken):
            disjoint.append(S)
            taken |= set(S)
        if len(disjoint) == r:
            return frozenset(), tuple(disjoint)
    # recurse on popular elements; a sunflower through x lifts from one on
    # the x-reduced family (distinctness is preserved by removing x)
    freq: dict[int, int] = {}
    for S in family:
        for x in S:
            freq[x] = freq.get(x, 0) + 1
    for x in sorted(freq, key=lambda v: (-freq[v], v)):
        if freq[x] < r:
            continue
        reduced = sorted(
            {S - {x} for S in family if x in S}, key=lambda S: (len(S), sorted(S))
        )
        sub = _greedy_sunflower(reduced, r)
        if sub is not None:
            core, petals = sub
            return core | {x}, tuple(P | {x} for P in petals)
    return None


@dataclass(frozen=True)
class CountBoundVerdict:
    """Instance check of the two displayed irreducible-count inequalities."""

    count: int
    family_j: float
    lower_bound_held: bool  # J_A(F) >= eta * ((K/k)/k!)^(1/k)
    upper_bound: float  # (k+1)! * (ln(|D|/delta)/eta)^k
    upper_bound_held: bool

    @property
    def ok(self) -> bool:
        return self.lower_bound_held and self.upper_bound_held

    def to_json(self) -> dict:
        return {
            "count": self.count,
            "family_j": self.family_j,
            "lower_bound_held": self.lower_bound_held,
            "upper_bound": self.upper_bound,
            "upper_bound_held": self.upper_bound_held,
            "ok": self.ok,
        }


def check_irreducible_count_bound(
    A: CubeSubset,
    family: FuncFamily,
    k: int,
    eta: float,
    delta: Fraction,
    budget: int = DEFAULT_SUBSET_BUDGET,
) -> CountBoundVerdict:
    """K = #(irreducible sets of size <= k) against both displayed bounds.

    The codomain factor |D| is the joint codomain of the extras, or 2 for
    a bare coordinate family.
    """
    delta = Fraction(delta)
    if A.density() < delta:
        raise PreconditionFailed(f"density {A.density()} below floor {delta}")
    report = irreducible_family(A, family, k, eta, budget=budget)
    K = report.count
    j_family = negentropy_on(A, family.members)
    d_extra = 1
    for form in family.extras:
        d_extra *= family.p
    d_factor = d_extra if family.extras else 2
    lower = eta * ((K / k) / math.factorial(k)) ** (1.0 / k)
    upper = math.factorial(k + 1) * (math.log(float(1 / delta) * d_factor) / eta) ** k
    return CountBoundVerdict(
        count=K,
        family_j=j_family,
        lower_bound_held=geq(j_family, lower),
        upper_bound=upper,
        upper_bound_held=K <= upper + TOL_ABS,
    )
