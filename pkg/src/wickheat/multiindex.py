"""Compactly supported multi-indices and the (2k)^gamma_k weight system.

Everything here is pure and immutable; enumeration is graded by order, then
lexicographic on zero-padded entries, so that a triangular recursion can
consume one order level at a time.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

from .errors import DomainError, SizeError, ValidationError

_LOG2 = math.log(2.0)
# exp() overflows IEEE doubles just above this; weights saturate to +inf there.
_LOG_HUGE = math.log(1.7976931348623157e308)

__all__ = [
    "MultiIndex",
    "TruncationSet",
    "ZERO",
    "unit",
    "weight",
    "log_weight",
    "decompositions",
    "enumerate_truncation",
    "cp_sum",
    "graded_partial_sums",
    "s_for_constant",
    "dp_bound",
]


@dataclass(frozen=True)
class MultiIndex:
    """A finitely supported sequence of non-negative integers.

    Stored in canonical form: trailing zeros dropped, so the empty tuple is
    the zero multi-index.
    """

    entries: tuple[int, ...] = ()

    def __post_init__(self):
        ent = tuple(int(e) for e in self.entries)
        if any(e < 0 for e in ent):
            raise ValidationError(f"multi-index entries must be >= 0, got {ent}")
        while ent and ent[-1] == 0:
            ent = ent[:-1]
        object.__setattr__(self, "entries", ent)

    @property
    def order(self) -> int:
        """|gamma| = sum of entries."""
        return sum(self.entries)

    @property
    def factorial(self) -> int:
        """gamma! = product of entry factorials."""
        out = 1
        for e in self.entries:
            out *= math.factorial(e)
        return out

    @property
    def support_size(self) -> int:
        """Index of the last nonzero entry (0 for the zero multi-index)."""
        return len(self.entries)

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, k: int) -> int:
        """Entry at 0-based position k (0 beyond the stored support)."""
        return self.entries[k] if 0 <= k < len(self.entries) else 0

    def __add__(self, other: "MultiIndex") -> "MultiIndex":
        n = max(len(self.entries), len(other.entries))
        return MultiIndex(tuple(self[k] + other[k] for k in range(n)))

    def __sub__(self, other: "MultiIndex") -> "MultiIndex":
        n = max(len(self.entries), len(other.entries))
        ent = tuple(self[k] - other[k] for k in range(n))
        if any(e < 0 for e in ent):
            raise ValidationError(f"{other} is not componentwise <= {self}")
        return MultiIndex(ent)

    def __le__(self, other: "MultiIndex") -> bool:
        return all(self[k] <= other[k] for k in range(len(self.entries)))

    def __lt__(self, other: "MultiIndex") -> bool:
        return self != other and self <= other

    def padded(self, n: int) -> tuple[int, ...]:
        return tuple(self[k] for k in range(n))

    def __str__(self):
        return "(" + ",".join(str(e) for e in self.entries) + ")"

    @classmethod
    def parse(cls, text: str) -> "MultiIndex":
        """Inverse of str(): "(2,0,1)" -> MultiIndex((2, 0, 1)); "()" is zero."""
        t = text.strip()
        if not (t.startswith("(") and t.endswith(")")):
            raise ValidationError(f"bad multi-index text {text!r}")
        inner = t[1:-1].strip()
        if not inner:
            return cls()
        try:
            return cls(tuple(int(p) for p in inner.split(",")))
        except ValueError as exc:
            raise ValidationError(f"bad multi-index text {text!r}") from exc


ZERO = MultiIndex()


def unit(k: int) -> MultiIndex:
    """The k-th unit multi-index e_k, k >= 1."""
    if k < 1:
        raise ValidationError("unit index must be >= 1")
    return MultiIndex((0,) * (k - 1) + (1,))


def log_weight(gamma: MultiIndex) -> float:
    """log of the weight: sum_k gamma_k * log(2k)."""
    return sum(g * math.log(2.0 * (k + 1)) for k, g in enumerate(gamma.entries) if g)


def weight(gamma: MultiIndex) -> float:
    """The weight prod_k (2k)^{gamma_k}; always >= 1, and 1 at the zero index.

    Computed in log space; saturates to +inf (with a warning) rather than
    raising on overflow.
    """
    lw = log_weight(gamma)
    if lw > _LOG_HUGE:
        warnings.warn(f"weight overflow for {gamma}; saturating to inf", RuntimeWarning)
        return math.inf
    return math.exp(lw)


def decompositions(gamma: MultiIndex) -> list[tuple[MultiIndex, MultiIndex]]:
    """All ordered pairs (alpha, beta) with alpha + beta = gamma componentwise.

    Deterministic odometer order on alpha; the pair count is prod (gamma_k + 1).
    """
    ranges = [range(g + 1) for g in gamma.entries]
    out = []
    for alpha_entries in itertools.product(*ranges):
        alpha = MultiIndex(alpha_entries)
        out.append((alpha, gamma - alpha))
    return out


def _compositions(total: int, parts: int):
    """Weak compositions of `total` into `parts` parts, lexicographically
    ascending; there are binom(total + parts - 1, parts - 1) of them."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def _members_graded_lex(max_vars: int, max_order: int) -> list[MultiIndex]:
    members = []
    for order in range(max_order + 1):
        members.extend(MultiIndex(c) for c in _compositions(order, max_vars))
    return members


@dataclass(frozen=True)
class TruncationSet:
    """Finite surrogate for the full index set: support in the first K
    coordinates and |gamma| <= P, in graded-lexicographic order.

    The member list is materialized lazily so that weight-sum computations on
    very large (K, P) stay cheap; explicit enumeration enforces `cap`.
    """

    max_vars: int
    max_order: int
    cap: int = 200_000
    _members: list = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.max_vars < 1:
            raise ValidationError("max_vars K must be >= 1")
        if self.max_order < 0:
            raise ValidationError("max_order P must be >= 0")

    @property
    def count(self) -> int:
        return math.comb(self.max_vars + self.max_order, self.max_vars)

    def __len__(self):
        return self.count

    def __contains__(self, gamma: MultiIndex) -> bool:
        return gamma.support_size <= self.max_vars and gamma.order <= self.max_order

    @property
    def members(self) -> list[MultiIndex]:
        if self._members is None:
            if self.count > self.cap:
                raise SizeError(
                    f"truncation K={self.max_vars}, P={self.max_order} has "
                    f"{self.count} members, exceeding the cap {self.cap}"
                )
            object.__setattr__(
                self, "_members", _members_graded_lex(self.max_vars, self.max_order)
            )
        return self._members

    def __iter__(self):
        return iter(self.members)

    def levels(self) -> list[list[MultiIndex]]:
        """Members grouped by |gamma|, in enumeration order within each level."""
        out = [[] for _ in range(self.max_order + 1)]
        for g in self.members:
            out[g.order].append(g)
        return out


def enumerate_truncation(max_vars: int, max_order: int, cap: int = 200_000) -> TruncationSet:
    """Build and materialize the truncation; raises SizeError above the cap."""
    ts = TruncationSet(max_vars, max_order, cap)
    ts.members  # force materialization (and the cap check)
    return ts


@lru_cache(maxsize=None)
def graded_partial_sums(p: float, max_vars: int, max_order: int) -> tuple[float, ...]:
    """S_j = sum over members with |gamma| = j of weight(gamma)^{-p}.

    Computed by multiplying truncated geometric series coordinate by
    coordinate, which agrees exactly with summation over the enumerated set
    but costs O(K P^2) instead of the member count.
    """
    poly = [0.0] * (max_order + 1)
    poly[0] = 1.0
    for k in range(1, max_vars + 1):
        w = (2.0 * k) ** (-p)
        new = [0.0] * (max_order + 1)
        for j, cj in enumerate(poly):
            if cj == 0.0:
                continue
            wj = 1.0
            for i in range(j, max_order + 1):
                new[i] += cj * wj
                wj *= w
        poly = new
    return tuple(poly)


def cp_sum(p: float, trunc: TruncationSet) -> float:
    """Partial sum of C_p = sum weight(gamma)^{-p} over the truncation.

    Monotone non-decreasing under truncation refinement; the full series
    converges only for p > 1, so smaller exponents are rejected.
    """
    if p <= 1.0:
        raise DomainError(f"C_p diverges for p <= 1 (got p={p})")
    return math.fsum(graded_partial_sums(p, trunc.max_vars, trunc.max_order))


def s_for_constant(c: float) -> float:
    """Smallest convenient s >= 0 with c^{|gamma|} <= weight(gamma)^s for all gamma."""
    if c <= 0:
        raise DomainError(f"constant must be positive, got {c}")
    return max(0.0, math.log(c) / _LOG2 + 1.0)


def dp_bound(
    p: float, m: int, n: int, d: float, trunc: TruncationSet
) -> tuple[float, float]:
    """Partial sum of |gamma|^m d^{n|gamma|} weight^{-p} and its C-sum bound.

    The bound is cp_sum over the same truncation at the reduced exponent
    p - m - s*n with s = s_for_constant(d^n); the domination is termwise, so
    partial_sum <= bound holds for every truncation.
    """
    if m < 0 or n < 0:
        raise ValidationError("m and n must be non-negative integers")
    if d <= 0:
        raise DomainError("d must be positive")
    s = s_for_constant(d**n) if n > 0 else 0.0
    reduced = p - m - s * n
    if reduced <= 1.0:
        raise DomainError(
            f"need p - m - s*n > 1 for the bound; got {reduced} (s={s})"
        )
    sums = graded_partial_sums(p, trunc.max_vars, trunc.max_order)
    dn = d**n
    partial = math.fsum((j**m) * (dn**j) * sj for j, sj in enumerate(sums))
    return partial, cp_sum(reduced, trunc)
