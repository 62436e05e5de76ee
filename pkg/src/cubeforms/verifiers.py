"""From-scratch re-verification of selection reports.

This module deliberately shares no computation code with `select`: form
value tables are grown by doubling over coefficient digits rather than by
matrix products, joint counts come from sorting and run-length grouping
instead of bincount, entropies from scipy, set partitions from a
recursive insertion scheme instead of restricted-growth strings, and
total variation from plain Fraction sums.  It consumes only the immutable
data types (subsets, forms, reports), so a bug in the pipeline's
arithmetic cannot propagate into these verdicts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, product
from typing import Iterator, Sequence

import numpy as np
from scipy import stats

from .cube import CubeSubset, ModPForm
from .select import PipelineReport, SelectionParams, enumerate_tuples


def _value_vector(form: ModPForm) -> np.ndarray:
    idx = np.arange(1 << form.n, dtype=np.int64)
    total = np.zeros(1 << form.n, dtype=np.int64)
    for z, c in enumerate(form.coeffs):
        if c:
            total += c * ((idx >> z) & 1)
    return total % form.p


def _coordinate_vector(n: int, z: int) -> np.ndarray:
    idx = np.arange(1 << n, dtype=np.int64)
    return (idx >> z) & 1


@dataclass(frozen=True)
class CheckMember:
    """One family member: a value vector plus its codomain size."""

    values: np.ndarray
    cod: int


def build_check_family(n: int, p: int, extras: Sequence[ModPForm]) -> list[CheckMember]:
    members = [CheckMember(_coordinate_vector(n, z), 2) for z in range(n)]
    seen = {(m.cod, m.values.tobytes()) for m in members}
    for form in extras:
        cand = CheckMember(_value_vector(form), p)
        key = (cand.cod, cand.values.tobytes())
        if key not in seen:
            seen.add(key)
            members.append(cand)
    return members


def _all_form_values_on(members_bits: np.ndarray, p: int) -> np.ndarray:
    """(p^n, width) value table grown digit by digit over coefficients.

    The z-th processed coordinate digit lands at significance p^z; the
    order is internally consistent with `_span_rows` lookups because the
    coefficient rows themselves are rebuilt through the same recursion.
    """
    width = members_bits.shape[1]
    table = np.zeros((1, width), dtype=np.int16)
    for z in range(members_bits.shape[0]):
        bit_row = members_bits[z][None, :]
        stacked = [table]
        for c in range(1, p):
            stacked.append((table + c * bit_row) % p)
        table = np.concatenate(stacked, axis=0)
    return table


def _group_counts(values: np.ndarray) -> np.ndarray:
    """Counts of each distinct value, via sorting and run-length grouping."""
    if values.size == 0:
        return np.zeros(0, dtype=np.int64)
    s = np.sort(values)
    edges = np.flatnonzero(np.diff(s)) + 1
    return np.diff(np.concatenate([[0], edges, [s.size]]))


def _joint_on(
    members: Sequence[CheckMember], A: CubeSubset, T: Sequence[int]
) -> tuple[np.ndarray, int]:
    cod = 1
    vals = np.zeros(1 << A.n, dtype=np.int64)
    for i in sorted(T):
        vals = vals * members[i].cod + members[i].values
        cod *= members[i].cod
    return vals[A.members()], cod


def check_negentropy(
    members: Sequence[CheckMember],
    A: CubeSubset,
    T: Sequence[int],
    memo: dict | None = None,
) -> float:
    """ln(codomain) - H, with H from scipy's entropy on grouped counts."""
    T = tuple(sorted(T))
    if not T:
        return 0.0
    if memo is not None and T in memo:
        return memo[T]
    vals, cod = _joint_on(members, A, T)
    counts = _group_counts(vals)
    out = max(0.0, math.log(cod) - float(stats.entropy(counts)))
    if memo is not None:
        memo[T] = out
    return out


def _insertion_partitions(items: list[int]) -> Iterator[list[list[int]]]:
    """All set partitions by recursive insertion of the first element."""
    if not items:
        yield []
        return
    head, rest = items[0], items[1:]
    for part in _insertion_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[head] + part[i]] + part[i + 1 :]
        yield [[head]] + part


def check_irreducible(
    members: Sequence[CheckMember],
    A: CubeSubset,
    T: Sequence[int],
    eta: float,
    memo: dict | None = None,
) -> bool:
    T = sorted(T)
    if len(T) == 1:
        return check_negentropy(members, A, T, memo) >= eta - 1e-9
    j_top = check_negentropy(members, A, T, memo)
    if j_top < eta - 1e-9:
        return False
    for part in _insertion_partitions(T):
        if len(part) < 2:
            continue
        gap = j_top - sum(check_negentropy(members, A, block, memo) for block in part)
        if gap < eta - 1e-9:
            return False
    return True


def check_support(
    members: Sequence[CheckMember], A: CubeSubset, k: int, eta: float
) -> frozenset[int]:
    out: set[int] = set()
    memo: dict = {}
    for t in range(1, k + 1):
        for T in combinations(range(len(members)), t):
            if set(T) <= out:
                continue
            if check_irreducible(members, A, T, eta, memo):
                out |= set(T)
    return frozenset(out)


def check_tv(
    members: Sequence[CheckMember],
    A: CubeSubset,
    B: CubeSubset,
    T: Sequence[int],
) -> Fraction:
    """Plain-Fraction total variation of the joint of T on two subsets."""
    if not T:
        return Fraction(0)
    vals_a, _ = _joint_on(members, A, sorted(T))
    vals_b, _ = _joint_on(members, B, sorted(T))
    table_a: dict[int, int] = {}
    for v in vals_a.tolist():
        table_a[v] = table_a.get(v, 0) + 1
    table_b: dict[int, int] = {}
    for v in vals_b.tolist():
        table_b[v] = table_b.get(v, 0) + 1
    total = Fraction(0)
    for v in set(table_a) | set(table_b):
        total += abs(
            Fraction(table_a.get(v, 0), A.size) - Fraction(table_b.get(v, 0), B.size)
        )
    return total


def _span_rows(phi: Sequence[ModPForm], n: int, p: int) -> list[tuple[int, ...]]:
    rows = set()
    coeff_lists = [f.coeffs for f in phi]
    for combo in product(range(p), repeat=len(phi)):
        acc = [0] * n
        for a, coeffs in zip(combo, coeff_lists):
            if a:
                for z, c in enumerate(coeffs):
                    acc[z] = (acc[z] + a * c) % p
        rows.add(tuple(acc))
    return sorted(rows)


@dataclass(frozen=True)
class IndependentCheck:
    ball_cover_fraction: Fraction
    ball_cover_ok: bool
    support_ok: bool
    diameter: Fraction
    diameter_ok: bool

    @property
    def ok(self) -> bool:
        return self.ball_cover_ok and self.support_ok and self.diameter_ok

    def to_json(self) -> dict:
        from .serialize import rational_json

        return {
            "ball_cover_fraction": rational_json(self.ball_cover_fraction),
            "ball_cover_ok": self.ball_cover_ok,
            "support_ok": self.support_ok,
            "diameter": rational_json(self.diameter),
            "diameter_ok": self.diameter_ok,
            "ok": self.ok,
        }


def recheck_report(
    subsets: Sequence[CubeSubset], report: PipelineReport
) -> IndependentCheck:
    """Re-verify a selection report's three properties from first principles."""
    params: SelectionParams = report.params
    p, n, m = params.p, params.n, params.m
    alpha = params.resolved_alpha()
    r = params.resolved_r()
    selected = list(report.selected)
    members = build_check_family(n, p, list(report.phi))

    if len(selected) <= 1 or report.s <= 1:
        return IndependentCheck(Fraction(1), True, True, Fraction(0), True)

    # value table of every form, grown by coefficient doubling
    full_bits = np.stack([_coordinate_vector(n, z) for z in range(n)]).astype(np.int16)
    table = _all_form_values_on(full_bits, p)

    # covered: within 3r of the span (coefficient Hamming distance)
    span = np.array(_span_rows(list(report.phi), n, p), dtype=np.int16)
    coeff_rows = _all_form_values_on(np.eye(n, dtype=np.int16), p)
    covered = np.zeros(table.shape[0], dtype=bool)
    for center in span:
        covered |= (coeff_rows != center[None, :]).sum(axis=1) <= 3 * r

    # biased: L1 distance to uniform at least alpha, exact in integers
    biased = []
    for idx in selected:
        A = subsets[idx]
        sub_vals = table[:, A.members()]
        l1 = np.zeros(table.shape[0], dtype=np.int64)
        for v in range(p):
            l1 += np.abs((sub_vals == v).sum(axis=1, dtype=np.int64) * p - A.size)
        biased.append(l1 * alpha.denominator >= alpha.numerator * p * A.size)
    biased_mat = np.stack(biased)

    tuples, _sampled = enumerate_tuples(
        len(selected), m, params.max_tuples, params.sample_size, params.seed
    )
    uncovered = ~covered
    passing = 0
    for row in tuples.tolist():
        hits = biased_mat[row[0]].astype(np.int16)
        for t in row[1:]:
            hits = hits + biased_mat[t]
        passing += not bool(((hits >= 2) & uncovered).any())
    frac_i = Fraction(passing, len(tuples))
    ok_i = frac_i >= 1 - params.epsilon

    # (ii) supports: equality for mode R, pairwise containment for mode Q
    k = report.k_eff
    eta_f = float(params.eta)
    supports = [check_support(members, subsets[i], k, eta_f) for i in selected]
    if report.mode == "R":
        ok_ii = all(sup == report.support for sup in supports)
    else:
        good = 0
        for row in tuples.tolist():
            leak = False
            for f in range(len(members)):
                hits = sum(1 for t in row if f in supports[t])
                if hits >= 2 and f not in report.support:
                    leak = True
                    break
            good += not leak
        ok_ii = Fraction(good, len(tuples)) >= 1 - params.epsilon

    # (iii) diameter of the joint distribution over the common support
    diam = Fraction(0)
    T = sorted(report.support)
    if T:
        for i, a_idx in enumerate(selected):
            for b_idx in selected[i + 1 :]:
                cand = check_tv(members, subsets[a_idx], subsets[b_idx], T)
                if cand > diam:
                    diam = cand
    ok_iii = diam <= params.eta
    return IndependentCheck(frac_i, ok_i, ok_ii, diam, ok_iii)
