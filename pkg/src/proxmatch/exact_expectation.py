"""Exact expected cost of greedy closest-pair matching on a line.

The object of study is an alternating configuration of n+1 points on a
line, colors R B R B ... R, described by its n successive gaps.  Greedy
matching repeatedly pairs off the closest two adjacent opposite-color
points and removes them; the two gaps flanking a removed interior pair
merge with it into one gap, so the surviving configuration is again
alternating and one pair shorter.  The cost of a run is the sum of the
matched gaps.

For a fixed gap sequence the only randomness is how ties among minimal
gaps are broken; `greedy_cost` averages over it exactly.  When the gaps
are instead a uniformly random permutation of a given multiset, the mean
cost has a closed combinatorial form: a weighted sum, over partitions of
even k <= n into odd parts, of the average minimum group-sum over all
ways to split k of the gaps into groups of those sizes.  That sum is
what `expected_greedy_cost` evaluates; `permutation_oracle` recomputes
it by brute force over all n! orders for cross-checking.

All exact routines work in `fractions.Fraction` and return exact
rationals.  Estimate variants are separate and clearly flagged.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .errors import SizeCapError

GapLike = Union[int, str, Fraction]

EXPECTATION_CAP = 12
ORACLE_CAP = 8
DEFAULT_SPLIT_CAP = 2_000_000


def as_gaps(x: Iterable[GapLike]) -> tuple[Fraction, ...]:
    """Normalize a gap sequence to positive Fractions.

    Strings parse exactly ("1/10" and "0.1" both mean one tenth); floats
    are accepted but convert at their binary value, so prefer strings or
    Fractions when exactness matters.
    """
    gaps = tuple(Fraction(g) for g in x)
    if any(g <= 0 for g in gaps):
        raise ValueError("gaps must be strictly positive")
    return gaps


def _require_even(gaps: Sequence[Fraction]) -> None:
    if len(gaps) % 2 != 0:
        raise ValueError(
            f"gap sequence must have even length, got {len(gaps)}; an "
            "alternating configuration ending in the starting color has "
            "an even number of gaps")


def _scaled_ints(gaps: Sequence[Fraction]) -> tuple[tuple[int, ...], int]:
    # Common-denominator integer view; exact and much faster to compare.
    scale = math.lcm(*(g.denominator for g in gaps)) if gaps else 1
    return tuple(int(g * scale) for g in gaps), scale


# ---------------------------------------------------------------------------
# partitions into odd parts and their weights


def odd_partitions(k: int) -> list[tuple[int, ...]]:
    """All partitions of k into odd parts, each descending, in
    lexicographically descending order."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    out: list[tuple[int, ...]] = []
    acc: list[int] = []

    def rec(remaining: int, max_part: int) -> None:
        if remaining == 0:
            out.append(tuple(acc))
            return
        p = min(max_part, remaining)
        if p % 2 == 0:
            p -= 1
        while p >= 1:
            acc.append(p)
            rec(remaining - p, p)
            acc.pop()
            p -= 2

    rec(k, k)
    return out


def _check_partition(o: Sequence[int]) -> tuple[int, ...]:
    o = tuple(int(v) for v in o)
    if not o:
        raise ValueError("partition must have at least one part")
    if any(v <= 0 or v % 2 == 0 for v in o):
        raise ValueError(f"parts must be positive odd integers, got {o}")
    if any(a < b for a, b in zip(o, o[1:])):
        raise ValueError(f"parts must be descending, got {o}")
    return o


def partition_weight(o: Sequence[int]) -> Fraction:
    """Probability weight of an odd partition: 2^(r-1) over the product,
    across distinct part values v with multiplicity c, of v^c * c!.

    Weights over all of odd_partitions(k) sum to exactly 1 for any k >= 1.
    """
    o = _check_partition(o)
    den = 1
    for v, c in Counter(o).items():
        den *= v ** c * math.factorial(c)
    return Fraction(2 ** (len(o) - 1), den)


def split_count(o: Sequence[int], n: int) -> int:
    """Number of ways to split k = sum(o) out of n labeled gaps into
    unordered groups with the part sizes of o."""
    o = _check_partition(o)
    k = sum(o)
    if k > n:
        raise ValueError(f"partition total {k} exceeds sequence length {n}")
    den = math.factorial(n - k)
    for v in o:
        den *= math.factorial(v)
    for c in Counter(o).values():
        den *= math.factorial(c)
    return math.factorial(n) // den


def enumerate_splits(o: Sequence[int], n: int):
    """Yield each split once as a tuple of index groups.

    Groups appear in o's (descending) size order; runs of equal-sized
    groups are canonicalized by increasing smallest member.
    """
    o = _check_partition(o)
    if sum(o) > n:
        raise ValueError(f"partition total {sum(o)} exceeds sequence length {n}")

    def rec(avail: tuple[int, ...], gi: int, prev_min: int):
        if gi == len(o):
            yield ()
            return
        size = o[gi]
        same = gi > 0 and o[gi - 1] == size
        for comb in itertools.combinations(avail, size):
            if same and comb[0] < prev_min:
                continue
            rest = tuple(a for a in avail if a not in comb)
            for tail in rec(rest, gi + 1, comb[0]):
                yield (comb,) + tail

    yield from rec(tuple(range(n)), 0, -1)


@dataclass(frozen=True)
class SampledValue:
    """Monte Carlo stand-in for an exact quantity; always flagged."""

    value: float
    stderr: float
    n_samples: int
    is_estimate: bool = True


def f_value(o: Sequence[int], x: Iterable[GapLike], *,
            max_splits: int = DEFAULT_SPLIT_CAP,
            sample_splits: Optional[int] = None,
            rng: Optional[np.random.Generator] = None):
    """Average, over all splits of o's sizes from x, of the minimum
    group sum.  Exact Fraction by default.

    If the split count exceeds max_splits, refuses unless sample_splits
    is given, in which case a SampledValue over that many uniformly
    random splits is returned instead.
    """
    o = _check_partition(o)
    gaps = as_gaps(x)
    n = len(gaps)
    scaled, scale = _scaled_ints(gaps)
    count = split_count(o, n)

    if sample_splits is not None:
        if rng is None:
            raise ValueError("sample_splits requires an rng")
        vals = np.empty(sample_splits)
        arr = np.array(scaled, dtype=float) / scale
        for s in range(sample_splits):
            perm = rng.permutation(n)
            pos = 0
            best = math.inf
            for size in o:
                tot = arr[perm[pos:pos + size]].sum()
                pos += size
                best = min(best, tot)
            vals[s] = best
        return SampledValue(float(vals.mean()),
                            float(vals.std(ddof=1) / math.sqrt(sample_splits))
                            if sample_splits > 1 else math.inf,
                            sample_splits)

    if count > max_splits:
        raise SizeCapError(
            f"{count} splits exceeds cap {max_splits}; pass sample_splits "
            "for a flagged estimate")

    total = 0
    for groups in enumerate_splits(o, n):
        best = None
        for grp in groups:
            tot = 0
            for i in grp:
                tot += scaled[i]
            if best is None or tot < best:
                best = tot
        total += best
    return Fraction(total, count * scale)


# ---------------------------------------------------------------------------
# expected greedy cost over a random order of the gaps


def expected_greedy_cost(x: Iterable[GapLike], cap: int = EXPECTATION_CAP) -> Fraction:
    """Exact mean greedy cost when the gaps of x are laid out in a
    uniformly random order (ties also averaged).

    Sum over even k <= n and partitions o of k into odd parts of
    partition_weight(o) * f_value(o, x).  Refuses beyond the cap; use
    estimate_greedy_cost for larger sequences.
    """
    gaps = as_gaps(x)
    _require_even(gaps)
    n = len(gaps)
    if n > cap:
        raise SizeCapError(
            f"exact expectation capped at {cap} gaps, got {n}; use "
            "estimate_greedy_cost for a flagged Monte Carlo estimate")
    total = Fraction(0)
    for k in range(2, n + 1, 2):
        for o in odd_partitions(k):
            total += partition_weight(o) * f_value(o, gaps)
    return total


def expected_greedy_cost_all_ones(n: int) -> Fraction:
    """expected_greedy_cost of n unit gaps, via the shortcut that every
    group of unit gaps sums to its size, so f_value(o, ones) = min(o)."""
    if n < 0 or n % 2 != 0:
        raise ValueError("n must be even and nonnegative")
    total = Fraction(0)
    for k in range(2, n + 1, 2):
        for o in odd_partitions(k):
            total += partition_weight(o) * min(o)
    return total


# ---------------------------------------------------------------------------
# greedy cost of one fixed gap sequence


def _reduce(g: tuple, i: int) -> tuple:
    if i == 0:
        return g[2:]
    if i == len(g) - 1:
        return g[:-2]
    return g[:i - 1] + (g[i - 1] + g[i] + g[i + 1],) + g[i + 2:]


def _greedy_avg(g: tuple, memo: dict):
    # Exact expectation over uniform choices among tied minimal gaps.
    # Values are ints or Fractions; results stay int on tie-free paths.
    if not g:
        return 0
    res = memo.get(g)
    if res is not None:
        return res
    m = min(g)
    idxs = [i for i, v in enumerate(g) if v == m]
    if len(idxs) == 1:
        res = m + _greedy_avg(_reduce(g, idxs[0]), memo)
    else:
        total = Fraction(0)
        for i in idxs:
            total += _greedy_avg(_reduce(g, i), memo)
        res = m + total / len(idxs)
    memo[g] = res
    return res


def _greedy_leftmost(g: list):
    cost = 0
    while g:
        m = min(g)
        i = g.index(m)
        cost += m
        if i == 0:
            del g[:2]
        elif i == len(g) - 1:
            del g[-2:]
        else:
            g[i - 1:i + 2] = [g[i - 1] + m + g[i + 1]]
    return cost


def greedy_cost(x: Iterable[GapLike], tie_policy: str = "average") -> Fraction:
    """Cost of greedy matching on the fixed gap sequence x.

    tie_policy "average" takes the exact expectation over uniformly
    random choices among tied minimal gaps; "leftmost" always matches
    the leftmost minimal gap.
    """
    gaps = as_gaps(x)
    _require_even(gaps)
    scaled, scale = _scaled_ints(gaps)
    if tie_policy == "average":
        res = _greedy_avg(scaled, {})
    elif tie_policy == "leftmost":
        res = _greedy_leftmost(list(scaled))
    else:
        raise ValueError(f"unknown tie_policy {tie_policy!r}")
    return Fraction(res, scale) if isinstance(res, int) else res / scale


def permutation_oracle(x: Iterable[GapLike], cap: int = ORACLE_CAP) -> Fraction:
    """Brute-force mean greedy cost over all n! orders of x, exact.

    Independent of the partition machinery: each permutation is run
    through the greedy reduction directly (with exact tie averaging when
    a permutation hits tied minima).  Capped at 8 gaps.
    """
    gaps = as_gaps(x)
    _require_even(gaps)
    n = len(gaps)
    if n > cap:
        raise SizeCapError(f"permutation oracle capped at {cap} gaps, got {n}")
    if n == 0:
        return Fraction(0)
    scaled, scale = _scaled_ints(gaps)

    int_total = 0
    frac_total = Fraction(0)
    tie_memo: dict = {}
    for perm in itertools.permutations(scaled):
        g = list(perm)
        cost = 0
        while g:
            m = min(g)
            if g.count(m) > 1:
                # rare for generic gaps; redo this order with averaging
                cost = None
                break
            i = g.index(m)
            cost += m
            if i == 0:
                del g[:2]
            elif i == len(g) - 1:
                del g[-2:]
            else:
                g[i - 1:i + 2] = [g[i - 1] + m + g[i + 1]]
        if cost is None:
            frac_total += _greedy_avg(perm, tie_memo)
        else:
            int_total += cost
    total = int_total + frac_total
    return Fraction(total, 1) / (math.factorial(n) * scale)


def estimate_greedy_cost(x: Iterable[GapLike], n_samples: int,
                         rng: np.random.Generator) -> SampledValue:
    """Flagged Monte Carlo estimate of expected_greedy_cost for
    sequences beyond the exact cap.  Samples a uniform order and uniform
    tie choices per trial."""
    gaps = as_gaps(x)
    _require_even(gaps)
    if n_samples < 2:
        raise ValueError("need at least 2 samples for a standard error")
    scaled, _scale = _scaled_ints(gaps)
    vals = np.empty(n_samples)
    base = list(scaled)
    for s in range(n_samples):
        g = list(base)
        rng.shuffle(g)
        cost = 0
        while g:
            m = min(g)
            idxs = [i for i, v in enumerate(g) if v == m]
            i = idxs[int(rng.integers(len(idxs)))] if len(idxs) > 1 else idxs[0]
            cost += m
            if i == 0:
                del g[:2]
            elif i == len(g) - 1:
                del g[-2:]
            else:
                g[i - 1:i + 2] = [g[i - 1] + m + g[i + 1]]
        vals[s] = cost
    vals /= float(_scale)
    return SampledValue(float(vals.mean()),
                        float(vals.std(ddof=1) / math.sqrt(n_samples)),
                        n_samples)


# ---------------------------------------------------------------------------
# bounds used as invariants


def mean_scaling_gap(x: Iterable[GapLike]) -> Fraction:
    """expected_greedy_cost(ones_n) * mean(x) - expected_greedy_cost(x).

    Nonnegative for every positive gap sequence: the all-equal sequence
    is the worst case at fixed mean.
    """
    gaps = as_gaps(x)
    _require_even(gaps)
    n = len(gaps)
    if n == 0:
        return Fraction(0)
    mean = sum(gaps, Fraction(0)) / n
    return expected_greedy_cost_all_ones(n) * mean - expected_greedy_cost(gaps)


def all_ones_log_bound(m: int) -> float:
    """Upper bound m * (1 + ln m) for expected_greedy_cost_all_ones(2m)."""
    if m < 1:
        raise ValueError("m must be at least 1")
    return m * (1.0 + math.log(m))
