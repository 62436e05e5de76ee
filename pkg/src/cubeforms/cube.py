"""Vertices and subsets of {0,1}^n, and mod-p linear forms on them.

Everything here is exact and finite: a subset is an explicit bit-vector
over all 2^n vertices, a form is a reduced coefficient vector over F_p,
and probabilities downstream are integer counts divided by subset sizes.
The hard dimension cap keeps every enumeration decidable at desk scale.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import BudgetExceeded, DimensionMismatch, PreconditionFailed

PRIMES = (2, 3, 5, 7, 11, 13)

MAX_DIMENSION = 24

DEFAULT_FORM_BUDGET = 2_000_000

# joint codomains larger than this are refused rather than materialised
MAX_JOINT_CODOMAIN = 1 << 26


def ensure_prime(p: int) -> int:
    if p not in PRIMES:
        raise PreconditionFailed(f"p must be a prime in {PRIMES}, got {p}")
    return p


def ensure_dimension(n: int) -> int:
    if not 1 <= n <= MAX_DIMENSION:
        raise BudgetExceeded(f"dimension n={n} outside [1, {MAX_DIMENSION}]")
    return n


@dataclass(frozen=True)
class CubeVertex:
    """A vertex of {0,1}^n stored as a bitmask; bit z is coordinate z+1."""

    n: int
    bits: int

    def __post_init__(self):
        ensure_dimension(self.n)
        if not 0 <= self.bits < (1 << self.n):
            raise DimensionMismatch(f"bits {self.bits} out of range for n={self.n}")

    def bit(self, z: int) -> int:
        return (self.bits >> z) & 1

    def coords(self) -> tuple[int, ...]:
        return tuple((self.bits >> z) & 1 for z in range(self.n))


@dataclass(frozen=True)
class ModPForm:
    """A linear form a_1 x_1 + ... + a_n x_n with coefficients in F_p.

    Coefficients are stored reduced into [0, p-1].  The support is the set
    of coordinates with nonzero coefficient; the support distance between
    two forms is the support size of their difference, i.e. the Hamming
    distance of the coefficient vectors.
    """

    p: int
    n: int
    coeffs: tuple[int, ...]

    def __post_init__(self):
        ensure_prime(self.p)
        ensure_dimension(self.n)
        if len(self.coeffs) != self.n:
            raise DimensionMismatch(
                f"coefficient vector of length {len(self.coeffs)} for n={self.n}"
            )
        object.__setattr__(self, "coeffs", tuple(int(c) % self.p for c in self.coeffs))

    @classmethod
    def zero(cls, n: int, p: int) -> "ModPForm":
        return cls(p, n, (0,) * n)

    @classmethod
    def coordinate(cls, n: int, p: int, z: int) -> "ModPForm":
        coeffs = [0] * n
        coeffs[z] = 1
        return cls(p, n, tuple(coeffs))

    def support(self) -> frozenset[int]:
        return frozenset(z for z, c in enumerate(self.coeffs) if c)

    def support_size(self) -> int:
        return sum(1 for c in self.coeffs if c)

    def is_zero(self) -> bool:
        return all(c == 0 for c in self.coeffs)

    def __add__(self, other: "ModPForm") -> "ModPForm":
        _check_compat(self, other)
        return ModPForm(self.p, self.n, tuple((a + b) % self.p for a, b in zip(self.coeffs, other.coeffs)))

    def __sub__(self, other: "ModPForm") -> "ModPForm":
        _check_compat(self, other)
        return ModPForm(self.p, self.n, tuple((a - b) % self.p for a, b in zip(self.coeffs, other.coeffs)))

    def scale(self, a: int) -> "ModPForm":
        return ModPForm(self.p, self.n, tuple((a * c) % self.p for c in self.coeffs))

    def proportional_to(self, other: "ModPForm") -> bool:
        _check_compat(self, other)
        if self.is_zero() or other.is_zero():
            return True
        for a in range(1, self.p):
            if self.scale(a) == other:
                return True
        return False

    def __str__(self) -> str:
        terms = [f"{c if c != 1 else ''}x{z + 1}" for z, c in enumerate(self.coeffs) if c]
        return " + ".join(terms) if terms else "0"


def _check_compat(a: ModPForm, b: ModPForm) -> None:
    if a.n != b.n:
        raise DimensionMismatch(f"forms over n={a.n} and n={b.n}")
    if a.p != b.p:
        raise DimensionMismatch(f"forms over p={a.p} and p={b.p}")


def eval_form(form: ModPForm, x: "CubeVertex | int") -> int:
    """Value of the form at a cube vertex, as a residue in [0, p-1]."""
    bits = x.bits if isinstance(x, CubeVertex) else int(x)
    if isinstance(x, CubeVertex) and x.n != form.n:
        raise DimensionMismatch(f"vertex over n={x.n}, form over n={form.n}")
    if not 0 <= bits < (1 << form.n):
        raise DimensionMismatch(f"vertex index {bits} out of range for n={form.n}")
    total = 0
    for z, c in enumerate(form.coeffs):
        if c and (bits >> z) & 1:
            total += c
    return total % form.p


def support_distance(a: ModPForm, b: ModPForm) -> int:
    """Hamming distance of the coefficient vectors (support of a - b)."""
    _check_compat(a, b)
    return sum(1 for x, y in zip(a.coeffs, b.coeffs) if x != y)


class CubeSubset:
    """An explicit subset of {0,1}^n: a read-only bool vector of length 2^n."""

    __slots__ = ("n", "membership", "size", "_members", "_hash")

    def __init__(self, n: int, membership: np.ndarray):
        ensure_dimension(n)
        arr = np.asarray(membership, dtype=bool)
        if arr.shape != (1 << n,):
            raise DimensionMismatch(
                f"membership vector of length {arr.shape} for n={n} (need 2^n)"
            )
        arr = arr.copy()
        arr.setflags(write=False)
        self.n = n
        self.membership = arr
        self.size = int(arr.sum())
        self._members = None
        self._hash = None

    @classmethod
    def full(cls, n: int) -> "CubeSubset":
        return cls(n, np.ones(1 << n, dtype=bool))

    @classmethod
    def from_indices(cls, n: int, indices: Iterable[int]) -> "CubeSubset":
        arr = np.zeros(1 << n, dtype=bool)
        for v in indices:
            arr[v] = True
        return cls(n, arr)

    def members(self) -> np.ndarray:
        if self._members is None:
            m = np.flatnonzero(self.membership)
            m.setflags(write=False)
            self._members = m
        return self._members

    def density(self) -> Fraction:
        return Fraction(self.size, 1 << self.n)

    def contains(self, v: int) -> bool:
        return bool(self.membership[v])

    def restrict(self, mask: np.ndarray) -> "CubeSubset":
        return CubeSubset(self.n, self.membership & np.asarray(mask, dtype=bool))

    def require_nonempty(self, what: str = "subset") -> "CubeSubset":
        if self.size == 0:
            raise PreconditionFailed(f"{what} is empty")
        return self

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, CubeSubset)
            and self.n == other.n
            and np.array_equal(self.membership, other.membership)
        )

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.n, self.membership.tobytes()))
        return self._hash

    def __repr__(self) -> str:
        return f"CubeSubset(n={self.n}, size={self.size})"


def bits_matrix(indices: np.ndarray, n: int) -> np.ndarray:
    """(len(indices), n) matrix of coordinate bits, column z = bit z."""
    idx = np.asarray(indices, dtype=np.int64)
    return ((idx[:, None] >> np.arange(n)) & 1).astype(np.uint8)


def form_values(form: ModPForm) -> np.ndarray:
    """Values of the form at every vertex index, by doubling over coordinates."""
    vals = np.zeros(1, dtype=np.int16)
    for c in form.coeffs:
        vals = np.concatenate([vals, (vals + c) % form.p])
    return vals.astype(np.int8)


def coordinate_values(n: int, z: int) -> np.ndarray:
    idx = np.arange(1 << n, dtype=np.int64)
    return ((idx >> z) & 1).astype(np.int8)


@dataclass(frozen=True)
class CubeFn:
    """A function on {0,1}^n with a finite codomain {0, ..., cod-1}.

    Coordinate functions have codomain {0,1}; mod-p forms have codomain
    F_p even when p > 2, which matters for every negentropy computation.
    """

    n: int
    cod: int
    values: np.ndarray
    label: str

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.int8)
        if arr.shape != (1 << self.n,):
            raise DimensionMismatch("value table length != 2^n")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def key(self) -> tuple:
        """Identity as a function: codomain plus the full value table."""
        return (self.cod, self.values.tobytes())

    def __eq__(self, other) -> bool:
        return isinstance(other, CubeFn) and self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())


def coordinate_fn(n: int, z: int) -> CubeFn:
    return CubeFn(n, 2, coordinate_values(n, z), f"x{z + 1}")


def form_fn(form: ModPForm, label: str | None = None) -> CubeFn:
    lbl = label if label is not None else str(form)
    return CubeFn(form.n, form.p, form_values(form), lbl)


def joint_codomain(fns: Sequence[CubeFn]) -> int:
    size = 1
    for f in fns:
        size *= f.cod
    return size


def joint_values(fns: Sequence[CubeFn]) -> tuple[np.ndarray, int]:
    """Mixed-radix encoding of the tuple (f_1(x), ..., f_t(x)) per vertex."""
    if not fns:
        raise PreconditionFailed("joint of an empty function tuple")
    cod = joint_codomain(fns)
    if cod > MAX_JOINT_CODOMAIN:
        raise BudgetExceeded(f"joint codomain {cod} exceeds cap {MAX_JOINT_CODOMAIN}")
    vals = np.zeros(1 << fns[0].n, dtype=np.int64)
    for f in fns:
        vals = vals * f.cod + f.values
    return vals, cod


def joint_counts(A: CubeSubset, fns: Sequence[CubeFn]) -> tuple[np.ndarray, int]:
    """Exact integer counts of each joint value over the subset."""
    A.require_nonempty()
    if not fns:
        return np.array([A.size], dtype=np.int64), 1
    vals, cod = joint_values(fns)
    restricted = vals[A.members()]
    return np.bincount(restricted, minlength=cod).astype(np.int64), cod


def fn_counts(A: CubeSubset, fn: CubeFn) -> np.ndarray:
    counts, _ = joint_counts(A, [fn])
    return counts


def subset_from_constraints(
    constraints: Sequence[tuple[ModPForm, int]], n: int, p: int
) -> CubeSubset:
    """The exact set of vertices satisfying every (form, target) constraint."""
    ensure_prime(p)
    mask = np.ones(1 << n, dtype=bool)
    for form, target in constraints:
        if form.n != n or form.p != p:
            raise DimensionMismatch("constraint form has mismatched n or p")
        mask &= form_values(form) == (int(target) % p)
    return CubeSubset(n, mask)


def count_forms(n: int, p: int, max_support: int | None = None) -> int:
    if max_support is None:
        return p**n
    return sum(math.comb(n, j) * (p - 1) ** j for j in range(min(max_support, n) + 1))


def enumerate_forms(
    n: int,
    p: int,
    max_support: int | None = None,
    budget: int = DEFAULT_FORM_BUDGET,
) -> Iterator[ModPForm]:
    """All forms over (n, p) in lexicographic coefficient order.

    Raises BudgetExceeded up front when the count would pass the budget,
    so callers never start an enumeration they cannot finish.
    """
    ensure_prime(p)
    ensure_dimension(n)
    total = count_forms(n, p, max_support)
    if total > budget:
        raise BudgetExceeded(f"{total} forms exceed enumeration budget {budget}")
    for coeffs in itertools.product(range(p), repeat=n):
        if max_support is not None and sum(1 for c in coeffs if c) > max_support:
            continue
        yield ModPForm(p, n, coeffs)


_FORMS_MATRIX_CACHE: dict[tuple[int, int], np.ndarray] = {}


def all_forms_matrix(n: int, p: int, budget: int = DEFAULT_FORM_BUDGET) -> np.ndarray:
    """(p^n, n) int8 matrix of every coefficient vector, lexicographic rows."""
    key = (n, p)
    cached = _FORMS_MATRIX_CACHE.get(key)
    if cached is not None:
        return cached
    total = p**n
    if total > budget:
        raise BudgetExceeded(f"{total} forms exceed enumeration budget {budget}")
    cols = []
    for z in range(n):
        reps = p ** (n - z - 1)
        tiles = p**z
        cols.append(np.tile(np.repeat(np.arange(p, dtype=np.int8), reps), tiles))
    mat = np.stack(cols, axis=1)
    mat.setflags(write=False)
    if total * n <= 8_000_000:
        _FORMS_MATRIX_CACHE[key] = mat
    return mat


def form_from_row(row: np.ndarray, p: int) -> ModPForm:
    return ModPForm(p, len(row), tuple(int(c) for c in row))


def all_form_value_table(n: int, p: int, budget: int = DEFAULT_FORM_BUDGET) -> np.ndarray:
    """(p^n, 2^n) int8 table: value of every form at every vertex."""
    forms = all_forms_matrix(n, p, budget=budget)
    bits = bits_matrix(np.arange(1 << n), n).astype(np.int16)
    out = np.empty((forms.shape[0], 1 << n), dtype=np.int8)
    chunk = max(1, 4_000_000 // (1 << n))
    for lo in range(0, forms.shape[0], chunk):
        hi = min(lo + chunk, forms.shape[0])
        vals = forms[lo:hi].astype(np.int16) @ bits.T
        out[lo:hi] = (vals % p).astype(np.int8)
    return out


def all_form_counts(A: CubeSubset, p: int, budget: int = DEFAULT_FORM_BUDGET) -> np.ndarray:
    """(p^n, p) exact counts of each value of every form over the subset."""
    A.require_nonempty()
    n = A.n
    forms = all_forms_matrix(n, p, budget=budget)
    bits = bits_matrix(A.members(), n).astype(np.int16)
    out = np.empty((forms.shape[0], p), dtype=np.int64)
    chunk = max(1, 4_000_000 // max(1, A.size))
    for lo in range(0, forms.shape[0], chunk):
        hi = min(lo + chunk, forms.shape[0])
        vals = (forms[lo:hi].astype(np.int16) @ bits.T) % p
        for v in range(p):
            out[lo:hi, v] = (vals == v).sum(axis=1)
    return out


def family_form_counts(
    subsets: Sequence[CubeSubset], p: int, budget: int = DEFAULT_FORM_BUDGET
) -> np.ndarray:
    """(s, p^n, p) exact counts of every form value over every subset.

    Counting is done with float64 matrix products (exact for counts below
    2^53) and cast back to integers.
    """
    if not subsets:
        return np.zeros((0, 0, 0), dtype=np.int64)
    n = subsets[0].n
    for A in subsets:
        if A.n != n:
            raise DimensionMismatch("family members over different n")
    table = all_form_value_table(n, p, budget=budget)
    member_mat = np.stack([A.membership for A in subsets], axis=1).astype(np.float64)
    nforms = table.shape[0]
    out = np.empty((len(subsets), nforms, p), dtype=np.int64)
    chunk = max(1, 16_000_000 // (1 << n))
    for lo in range(0, nforms, chunk):
        hi = min(lo + chunk, nforms)
        block = table[lo:hi]
        for v in range(p):
            counts = (block == v).astype(np.float64) @ member_mat
            out[:, lo:hi, v] = np.rint(counts).astype(np.int64).T
    return out
