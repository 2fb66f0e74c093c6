"""Exact enumeration of wave resonances for the dispersion law sqrt(|j|).

A signed n-tuple (j_i, sigma_i) of nonzero integers is a resonance when

    sum_i sigma_i j_i = 0   and   sum_i sigma_i sqrt(|j_i|) = 0.

Writing |j| = a^2 d with d square-free, sqrt(|j|) = a sqrt(d), and the
radicals {sqrt(d)} over distinct square-free d are linearly independent
over Q.  The frequency identity therefore holds iff the signed multiplier
sum vanishes inside every square-free kernel class, which turns resonance
decisions into pure integer arithmetic: no floating point is consulted.

Order 3 admits no resonances at all; at order 4 the non-trivial ones form
the two-parameter family returned by :func:`benjamin_feir`.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from functools import lru_cache


class BoundExceededError(ValueError):
    """Requested enumeration outside the supported complexity envelope."""


class ExhaustionError(RuntimeError):
    """No admissible tangential set exists in the searched range."""


# ----------------------------------------------------------------------
# square-free kernels
# ----------------------------------------------------------------------

@lru_cache(maxsize=None)
def squarefree_decompose(n: int) -> tuple[int, int]:
    """n = a^2 * d with d square-free; returns (a, d).  Requires n >= 1."""
    if n < 1:
        raise ValueError("need a positive integer")
    a, d = 1, 1
    m = n
    p = 2
    while p * p <= m:
        if m % p == 0:
            k = 0
            while m % p == 0:
                m //= p
                k += 1
            a *= p ** (k // 2)
            if k % 2:
                d *= p
        p += 1 if p == 2 else 2
    d *= m
    return a, d


def sqrt_combination_is_zero(js, ells) -> bool:
    """Exact truth of sum_i ell_i sqrt(|j_i|) = 0 (integer arithmetic only)."""
    if len(js) != len(ells):
        raise ValueError("js and ells must have equal length")
    acc: dict[int, int] = defaultdict(int)
    for j, ell in zip(js, ells):
        if j == 0:
            raise ValueError("sites must be nonzero")
        a, d = squarefree_decompose(abs(int(j)))
        acc[d] += int(ell) * a
    return all(v == 0 for v in acc.values())


# ----------------------------------------------------------------------
# resonance tuples
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ResonanceTuple:
    """Verified resonance: construction re-checks both identities exactly."""

    sites: tuple[int, ...]
    signs: tuple[int, ...]

    def __post_init__(self):
        if len(self.sites) != len(self.signs):
            raise ValueError("sites and signs must have equal length")
        if any(j == 0 for j in self.sites):
            raise ValueError("sites must be nonzero")
        if any(s not in (1, -1) for s in self.signs):
            raise ValueError("signs must be +-1")
        if sum(s * j for s, j in zip(self.signs, self.sites)) != 0:
            raise ValueError("momentum identity fails")
        if not sqrt_combination_is_zero(self.sites, self.signs):
            raise ValueError("frequency identity fails")

    @property
    def order(self) -> int:
        return len(self.sites)

    def canonical(self) -> tuple:
        """Permutation- and global-sign-invariant key."""
        fwd = tuple(sorted(zip(self.sites, self.signs)))
        rev = tuple(sorted(zip(self.sites, (-s for s in self.signs))))
        return min(fwd, rev)


def is_trivial(t: ResonanceTuple) -> bool:
    """True iff the tuple pairs equal sites with opposite signs."""
    if t.order % 2:
        return False
    plus = Counter(j for j, s in zip(t.sites, t.signs) if s > 0)
    minus = Counter(j for j, s in zip(t.sites, t.signs) if s < 0)
    return plus == minus


def benjamin_feir(lam: int, b: int) -> ResonanceTuple:
    """Member (lam, b) of the two-parameter 4-wave family.

    Sites (-lam b^2, lam (b+1)^2, lam (b^2+b+1)^2, lam (b+1)^2 b^2) with
    sign pattern (+, -, +, -); both identities are re-verified on
    construction, so a transcription error cannot return silently.
    """
    if lam == 0 or b < 1:
        raise ValueError("need lam != 0 and b >= 1")
    sites = (-lam * b ** 2,
             lam * (b + 1) ** 2,
             lam * (b ** 2 + b + 1) ** 2,
             lam * (b + 1) ** 2 * b ** 2)
    return ResonanceTuple(sites, (1, -1, 1, -1))


def benjamin_feir_canonicals(bound: int) -> set[tuple]:
    """Canonical keys of every family member with all |j_i| <= bound."""
    out = set()
    for lam_abs in range(1, bound + 1):
        for sign in (1, -1):
            lam = sign * lam_abs
            b = 1
            while lam_abs * (b ** 2 + b + 1) ** 2 <= bound:
                out.add(benjamin_feir(lam, b).canonical())
                b += 1
    return out


# ----------------------------------------------------------------------
# enumeration
# ----------------------------------------------------------------------

_MAX_BOUND = 5000


def _squarefree_kernels(bound: int) -> list[int]:
    return [d for d in range(1, bound + 1) if squarefree_decompose(d)[1] == d]


def _class_solutions(size: int, amax: int):
    """Multisets of (a, sigma), a <= amax, with signed multiplier sum zero.

    Slots are produced in nondecreasing (a, sigma) order, which removes
    permutations inside a kernel class.
    """
    out = []
    slots: list[tuple[int, int]] = []

    def rec(start: tuple[int, int], remaining: int, total: int):
        if remaining == 0:
            if total == 0:
                out.append(tuple(slots))
            return
        if abs(total) > remaining * amax:
            return
        for a in range(start[0], amax + 1):
            for sigma in (-1, 1):
                if a == start[0] and sigma < start[1]:
                    continue
                slots.append((a, sigma))
                rec((a, sigma), remaining - 1, total + sigma * a)
                slots.pop()

    rec((1, -1), size, 0)
    return out


def _partitions(n: int, minimum: int = 2):
    """Nonincreasing partitions of n into parts >= minimum."""
    if n == 0:
        yield ()
        return
    for first in range(min(n, n), minimum - 1, -1):
        if n - first == 0:
            yield (first,)
        elif n - first >= minimum:
            for rest in _partitions(n - first, minimum):
                if rest and rest[0] > first:
                    continue
                yield (first,) + rest


def enumerate_resonances(n: int, bound: int, nontrivial_only: bool = False) -> list[ResonanceTuple]:
    """All order-n resonances with |j_i| <= bound, deduplicated.

    Deduplication is under slot permutations and a global sign flip.  The
    full listing of trivial tuples grows like bound^2 at order 4, so the
    complete order-4 enumeration is capped at bound 400 (pass
    ``nontrivial_only=True`` for larger bounds); orders 5 and 6 carry
    tighter caps because the kernel combinatorics explode.
    """
    if n not in (3, 4, 5, 6):
        raise BoundExceededError("order must be one of 3, 4, 5, 6")
    cap = {3: _MAX_BOUND, 4: _MAX_BOUND, 5: 300, 6: 150}[n]
    if bound > cap:
        raise BoundExceededError(f"bound {bound} exceeds the order-{n} guard {cap}")
    if not nontrivial_only and n >= 4 and bound > 400:
        raise BoundExceededError(
            "full listing of trivial tuples above bound 400 is quadratic in the "
            "bound; use nontrivial_only=True")

    kernels = _squarefree_kernels(bound)
    seen: set[tuple] = set()
    results: list[ResonanceTuple] = []

    def emit(slots_with_sites):
        sites = tuple(j for j, _ in slots_with_sites)
        signs = tuple(s for _, s in slots_with_sites)
        t = ResonanceTuple(sites, signs)
        if nontrivial_only and is_trivial(t):
            return
        key = t.canonical()
        if key not in seen:
            seen.add(key)
            results.append(t)

    @lru_cache(maxsize=None)
    def class_table(d: int, size: int):
        """momentum value -> tuples of ((site, sigma), ...) for kernel d."""
        amax = math.isqrt(bound // d)
        table: dict[int, list] = defaultdict(list)
        if amax < 1:
            return table
        for slots in _class_solutions(size, amax):
            for site_signs in itertools.product((1, -1), repeat=size):
                momentum = sum(sg * ss * a * a * d for (a, sg), ss in zip(slots, site_signs))
                pairs = tuple((ss * a * a * d, sg) for (a, sg), ss in zip(slots, site_signs))
                table[momentum].append(pairs)
        return table

    @lru_cache(maxsize=None)
    def final_index(size: int):
        """momentum -> [(kernel index, entries)] over every kernel."""
        index: dict[int, list] = defaultdict(list)
        for ki, d in enumerate(kernels):
            for m, entries in class_table(d, size).items():
                index[m].append((ki, entries))
        return index

    def combine(parts, momentum, acc, used, last_idx, prev_size):
        # kernels must be pairwise distinct across classes; among classes
        # of equal size the kernel index increases, which kills the
        # remaining permutation redundancy.  The last class is resolved by
        # direct momentum lookup.
        size = parts[0]
        if len(parts) == 1:
            for ki, entries in final_index(size).get(-momentum, ()):
                if ki in used or (size == prev_size and ki <= last_idx):
                    continue
                for combo in itertools.product(*acc, entries):
                    emit(tuple(itertools.chain.from_iterable(combo)))
            return
        for ki in range(len(kernels)):
            if ki in used or (size == prev_size and ki <= last_idx):
                continue
            for m, entries in class_table(kernels[ki], size).items():
                combine(parts[1:], momentum + m, acc + [entries], used + (ki,), ki, size)

    for parts in _partitions(n, 2):
        combine(parts, 0, [], (), -1, None)

    results.sort(key=lambda t: t.canonical())
    return results


# ----------------------------------------------------------------------
# tangential sets
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class TangentialSet:
    """The nu distinct signed Fourier sites carrying the bifurcation.

    Stored with positive sites first (ascending), then negative sites by
    ascending modulus; the site list in this order is the velocity vector.
    At least one positive site is required and no site may appear together
    with its negative.
    """

    sites: tuple[int, ...]

    def __init__(self, sites):
        sites = tuple(int(j) for j in sites)
        if any(j == 0 for j in sites):
            raise ValueError("sites must be nonzero")
        if len(set(sites)) != len(sites):
            raise ValueError("sites must be distinct")
        if any(-j in sites for j in sites):
            raise ValueError("a site and its negative cannot both be tangential")
        pos = sorted(j for j in sites if j > 0)
        neg = sorted((j for j in sites if j < 0), key=abs)
        if not pos:
            raise ValueError("at least one positive site is required")
        object.__setattr__(self, "sites", tuple(pos + neg))

    @property
    def nu(self) -> int:
        return len(self.sites)

    @property
    def velocity(self) -> tuple[int, ...]:
        return self.sites

    def frequencies(self):
        import numpy as np
        return np.sqrt(np.abs(np.array(self.sites, dtype=float)))

    def frequency_is_nonresonant(self, ell) -> bool:
        """Exact test of sqrt-frequency independence against one ell."""
        return not sqrt_combination_is_zero(self.sites, ell)


def generic_sites_search(nu: int, site_range, lmax: int):
    """First admissible tangential set in the given candidate site range.

    Admissible means: the linear frequency vector satisfies
    omega_bar . ell != 0 for all 0 < |ell|_inf <= lmax (exact arithmetic)
    and the twist matrix of the quartic normal form is nonsingular (exact
    integer determinant).  Returns (TangentialSet, certificate).
    """
    from .normalform import twist_det_exact  # deferred: normalform builds on this module

    candidates = [int(j) for j in site_range if int(j) != 0]
    boxes = [range(-lmax, lmax + 1)] * nu
    tested = 0
    for combo in itertools.combinations(candidates, nu):
        try:
            ts = TangentialSet(combo)
        except ValueError:
            continue
        tested += 1
        checks = 0
        ok = True
        for ell in itertools.product(*boxes):
            if all(e == 0 for e in ell):
                continue
            checks += 1
            if not ts.frequency_is_nonresonant(ell):
                ok = False
                break
        if not ok:
            continue
        det_num = twist_det_exact(ts)
        if det_num == 0:
            continue
        certificate = {
            "sites": ts.sites,
            "lmax": lmax,
            "frequency_checks": checks,
            "candidates_tested": tested,
            "twist_det_numerator": det_num,
            "twist_det_scale": "value is det(2 pi A), an integer",
        }
        return ts, certificate
    raise ExhaustionError(f"no admissible {nu}-site set in the given range at lmax={lmax}")
