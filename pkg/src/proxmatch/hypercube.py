"""Matching markets whose preferences come from hypercube proximity.

Agents answer k binary questions; a profile is the answer vector, and
each agent ranks the opposite side by increasing distance to its own
profile.  Two metrics are supported: plain disagreement count, and a
weighted count where question i carries weight 2^-i, so earlier
questions dominate all later ones combined.  Weighted distances are kept
exact as integer numerators over 2^k: packing question i at bit k-i
makes the numerator just the XOR of the packed profiles.

Ties (frequent for the unweighted metric, vanishing for the weighted
one) are broken by a per-agent uniformly random permutation of the
opposite side, fixed at sampling time.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import match_core
from .errors import UnmatchedAgentError
from .match_core import Agent, Matching, MatchingInstance, MAN, WOMAN
from .rngutil import substream

HAMMING = "hamming"
WEIGHTED = "weighted"


@dataclass(frozen=True)
class DyadicDistance:
    """Exact weighted disagreement: numerator / 2^k."""

    numerator: int
    k: int

    def as_fraction(self) -> Fraction:
        return Fraction(self.numerator, 2 ** self.k)

    def __float__(self) -> float:
        return self.numerator / 2 ** self.k

    def _key(self, other):
        if isinstance(other, DyadicDistance):
            return self.as_fraction(), other.as_fraction()
        return self.as_fraction(), Fraction(other)

    def __lt__(self, other):
        a, b = self._key(other)
        return a < b

    def __le__(self, other):
        a, b = self._key(other)
        return a <= b


@dataclass(frozen=True)
class Metric:
    """Distance rule on profiles: disagreement count or weighted sum.

    Custom strictly decreasing positive weights are allowed for the
    weighted kind; the default dyadic weights 2^-1, ..., 2^-k are the
    prefix-dominant case (each weight beats all later ones combined).
    """

    kind: str
    weights: Optional[tuple[Fraction, ...]] = None

    def __post_init__(self):
        if self.kind not in (HAMMING, WEIGHTED):
            raise ValueError(f"metric kind must be {HAMMING!r} or {WEIGHTED!r}")
        if self.weights is not None:
            if self.kind != WEIGHTED:
                raise ValueError("weights only apply to the weighted kind")
            ws = tuple(Fraction(w) for w in self.weights)
            if any(w <= 0 for w in ws):
                raise ValueError("weights must be positive")
            if any(a <= b for a, b in zip(ws, ws[1:])):
                raise ValueError("weights must be strictly decreasing")
            object.__setattr__(self, "weights", ws)

    @classmethod
    def hamming(cls) -> "Metric":
        return cls(HAMMING)

    @classmethod
    def weighted(cls, weights: Optional[Sequence] = None) -> "Metric":
        return cls(WEIGHTED, None if weights is None else tuple(weights))

    @property
    def is_prefix_dominant(self) -> bool:
        """Every weight exceeds the sum of all weights after it."""
        if self.kind != WEIGHTED:
            return False
        if self.weights is None:
            return True
        tail = Fraction(0)
        for w in reversed(self.weights):
            if w <= tail:
                return False
            tail += w
        return True


def parse_metric(name: str) -> Metric:
    if name == HAMMING:
        return Metric.hamming()
    if name == WEIGHTED:
        return Metric.weighted()
    raise ValueError(f"unknown metric {name!r}")


def _check_bits(a: Sequence[int], b: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    av, bv = np.asarray(a, dtype=np.uint8), np.asarray(b, dtype=np.uint8)
    if av.shape != bv.shape or av.ndim != 1:
        raise ValueError("profiles must be equal-length bit vectors")
    if np.any(av > 1) or np.any(bv > 1):
        raise ValueError("profile entries must be 0 or 1")
    return av, bv


def hamming_distance(a: Sequence[int], b: Sequence[int]) -> int:
    """Number of questions the two profiles answer differently."""
    av, bv = _check_bits(a, b)
    return int(np.count_nonzero(av != bv))


def weighted_hamming_distance(a: Sequence[int], b: Sequence[int],
                              weights: Optional[Sequence] = None):
    """Weighted disagreement; question i (1-based) weighs 2^-i by
    default.  Returns an exact DyadicDistance, or a Fraction when custom
    weights are supplied."""
    av, bv = _check_bits(a, b)
    k = len(av)
    diff = av != bv
    if weights is None:
        num = 0
        for i in np.flatnonzero(diff):
            num += 1 << (k - 1 - int(i))
        return DyadicDistance(num, k)
    ws = tuple(Fraction(w) for w in weights)
    if len(ws) != k:
        raise ValueError(f"expected {k} weights, got {len(ws)}")
    return sum((ws[int(i)] for i in np.flatnonzero(diff)), Fraction(0))


@dataclass(frozen=True)
class Population:
    """Sampled profiles and tie-break orders for both sides.

    Bits are (n_agents, k) arrays of 0/1; tiebreak rows are permutations
    of the opposite side, most favored first among equal distances.
    """

    men_bits: np.ndarray
    women_bits: np.ndarray
    men_tiebreak: np.ndarray
    women_tiebreak: np.ndarray
    seed: Optional[int] = None

    @property
    def n_men(self) -> int:
        return self.men_bits.shape[0]

    @property
    def n_women(self) -> int:
        return self.women_bits.shape[0]

    @property
    def k(self) -> int:
        return self.men_bits.shape[1]

    def profile(self, agent: Agent) -> tuple[int, ...]:
        bits = self.men_bits if agent.side == MAN else self.women_bits
        return tuple(int(b) for b in bits[agent.index])


def sample_population(n: int, k: int, *, seed: Optional[int] = None,
                      rng: Optional[np.random.Generator] = None,
                      n_women: Optional[int] = None) -> Population:
    """Fair-coin profiles and uniform tie-break permutations, i.i.d.

    Deterministic given a seed (an internal substream is derived) or an
    explicit generator.
    """
    if (seed is None) == (rng is None):
        raise ValueError("pass exactly one of seed or rng")
    if rng is None:
        rng = substream(seed, "rpmp", 0)
    if n_women is None:
        n_women = n
    if n < 1 or n_women < 1 or k < 0:
        raise ValueError("need n >= 1 agents per side and k >= 0")
    men_bits = rng.integers(0, 2, size=(n, k), dtype=np.uint8)
    women_bits = rng.integers(0, 2, size=(n_women, k), dtype=np.uint8)
    men_tb = rng.permuted(np.tile(np.arange(n_women, dtype=np.int32), (n, 1)), axis=1)
    women_tb = rng.permuted(np.tile(np.arange(n, dtype=np.int32), (n_women, 1)), axis=1)
    return Population(men_bits, women_bits, men_tb, women_tb, seed=seed)


def _pack_masks(bits: np.ndarray) -> np.ndarray:
    # Question i (0-based) lands at bit k-1-i, so the packed XOR of two
    # profiles is exactly the weighted numerator over 2^k.
    n, k = bits.shape
    if k > 62:
        raise ValueError("fast path supports k <= 62")
    masks = np.zeros(n, dtype=np.int64)
    for i in range(k):
        masks |= bits[:, i].astype(np.int64) << (k - 1 - i)
    return masks


def _distance_matrix(pop: Population, metric: Metric) -> np.ndarray:
    """Integer-valued exact distances men x women (weighted: numerators)."""
    if metric.weights is not None:
        raise ValueError("custom weights have no array fast path")
    xor = np.bitwise_xor.outer(_pack_masks(pop.men_bits), _pack_masks(pop.women_bits))
    if metric.kind == HAMMING:
        return np.bitwise_count(xor).astype(np.int64)
    return xor


def _tie_ranks(tiebreak: np.ndarray) -> np.ndarray:
    ranks = np.empty_like(tiebreak)
    rows = np.arange(tiebreak.shape[0])[:, None]
    ranks[rows, tiebreak] = np.arange(tiebreak.shape[1], dtype=tiebreak.dtype)
    return ranks


def _pref_orders(dist: np.ndarray, tie_rank: np.ndarray) -> np.ndarray:
    # Sort each row by (distance, tie rank).  The combined integer key
    # is safe while max(dist) * width stays below 2^62.
    n_rows, n_cols = dist.shape
    if n_cols == 0:
        return np.empty((n_rows, 0), dtype=np.int64)
    dmax = int(dist.max())
    if dmax < (1 << 62) // (n_cols + 1):
        return np.argsort(dist * np.int64(n_cols) + tie_rank, axis=1, kind="stable")
    out = np.empty((n_rows, n_cols), dtype=np.int64)
    for r in range(n_rows):
        out[r] = np.lexsort((tie_rank[r], dist[r]))
    return out


def _pref_arrays(pop: Population, metric: Metric) -> tuple[np.ndarray, np.ndarray]:
    dist = _distance_matrix(pop, metric)
    men_prefs = _pref_orders(dist, _tie_ranks(pop.men_tiebreak))
    women_prefs = _pref_orders(dist.T, _tie_ranks(pop.women_tiebreak))
    return men_prefs, women_prefs


def _custom_pref_lists(pop: Population, metric: Metric) -> tuple[list, list]:
    # Exact Fraction keys; quadratic and meant for small populations.
    ws = metric.weights
    men_rows, women_rows = [], []
    for m in range(pop.n_men):
        rank = _tie_ranks(pop.men_tiebreak[m:m + 1])[0]
        key = lambda w: (weighted_hamming_distance(pop.men_bits[m], pop.women_bits[w], ws),
                         rank[w])
        men_rows.append(sorted(range(pop.n_women), key=key))
    for w in range(pop.n_women):
        rank = _tie_ranks(pop.women_tiebreak[w:w + 1])[0]
        key = lambda m: (weighted_hamming_distance(pop.men_bits[m], pop.women_bits[w], ws),
                         rank[m])
        women_rows.append(sorted(range(pop.n_men), key=key))
    return men_rows, women_rows


def build_instance(pop: Population, metric: Metric) -> MatchingInstance:
    """Complete preference lists: ascending self-distance, ties in
    tie-break order."""
    if metric.weights is not None:
        men_rows, women_rows = _custom_pref_lists(pop, metric)
        return MatchingInstance(tuple(tuple(r) for r in men_rows),
                                tuple(tuple(r) for r in women_rows))
    men_prefs, women_prefs = _pref_arrays(pop, metric)
    return MatchingInstance(tuple(tuple(r) for r in men_prefs.tolist()),
                            tuple(tuple(r) for r in women_prefs.tolist()))


def pair_distance(pop: Population, metric: Metric, man: int, woman: int):
    """Distance between a specific man's and woman's profiles."""
    if metric.kind == HAMMING:
        return hamming_distance(pop.men_bits[man], pop.women_bits[woman])
    return weighted_hamming_distance(pop.men_bits[man], pop.women_bits[woman],
                                     metric.weights)


def matching_distance(pop: Population, metric: Metric, matching: Matching,
                      agent: Agent):
    """Profile distance between an agent and its partner."""
    partner = matching.partner_of(agent)
    if partner is None:
        raise UnmatchedAgentError(
            f"{agent.side} {agent.index} is unmatched; its pair distance "
            "is undefined")
    if agent.side == MAN:
        return pair_distance(pop, metric, agent.index, partner.index)
    return pair_distance(pop, metric, partner.index, agent.index)


class SideCertificates(NamedTuple):
    """Per-side sufficient conditions for a unique stable matching.

    A side's certificate holds when every agent on that side sees
    pairwise distinct distances to the whole opposite side, so its
    preferences need no tie-breaking.  Either side's certificate alone
    implies the instance has exactly one stable matching independent of
    the tie-break draws.
    """

    women_side: bool
    men_side: bool

    @property
    def both(self) -> bool:
        return self.women_side and self.men_side


def uniqueness_certificate(pop: Population, metric: Metric) -> SideCertificates:
    if metric.weights is not None:
        def distinct(rows_of):
            return all(len({str(d) for d in row}) == len(row) for row in rows_of)
        women_rows = [[pair_distance(pop, metric, m, w) for m in range(pop.n_men)]
                      for w in range(pop.n_women)]
        men_rows = [[pair_distance(pop, metric, m, w) for w in range(pop.n_women)]
                    for m in range(pop.n_men)]
        return SideCertificates(distinct(women_rows), distinct(men_rows))
    dist = _distance_matrix(pop, metric)
    women_ok = all(np.unique(dist[:, w]).size == pop.n_men
                   for w in range(pop.n_women))
    men_ok = all(np.unique(dist[m]).size == pop.n_women
                 for m in range(pop.n_men))
    return SideCertificates(women_ok, men_ok)


# ---------------------------------------------------------------------------
# experiment driver


class RpmpRow(NamedTuple):
    trial: int
    n: int
    k: int
    metric: str
    multiple_partner_count: int
    unique_certificate: bool
    sampled_agent_x: float


RPMP_CSV_HEADER = ("trial", "n", "k", "metric", "multiplePartnerCount",
                   "uniqueCertificate", "sampledAgentX")


@dataclass(frozen=True)
class RpmpConfig:
    """One experiment: `trials` independent populations of n men and
    n + unbalanced_r women on the k-cube."""

    n: int
    k: int
    metric: str = HAMMING
    trials: int = 100
    seed: int = 0
    agent_sample_size: int = 1
    unbalanced_r: int = 0
    collect_groups: bool = False

    def __post_init__(self):
        parse_metric(self.metric)
        if self.n < 1 or self.trials < 1 or self.k < 0:
            raise ValueError("need n >= 1, trials >= 1, k >= 0")
        if self.unbalanced_r < 0:
            raise ValueError("unbalanced_r must be nonnegative")
        if self.agent_sample_size < 1:
            raise ValueError("agent_sample_size must be at least 1")


@dataclass
class RpmpStats:
    config: RpmpConfig
    rows: list[RpmpRow]
    fraction_multiple_partners: float
    fraction_multiple_men: float
    fraction_multiple_women: float
    fraction_nonunique_matching: float
    fraction_cert_both: float
    fraction_cert_women: float
    matching_distance_samples: list[float]
    men_group_sizes: dict[int, int] = field(default_factory=dict)
    women_group_sizes: dict[int, int] = field(default_factory=dict)

    def summary_dict(self) -> dict:
        return {
            "n": self.config.n,
            "k": self.config.k,
            "metric": self.config.metric,
            "trials": self.config.trials,
            "seed": self.config.seed,
            "unbalancedR": self.config.unbalanced_r,
            "fractionMultipleStablePartners": self.fraction_multiple_partners,
            "fractionMultipleMen": self.fraction_multiple_men,
            "fractionMultipleWomen": self.fraction_multiple_women,
            "fractionNonUniqueMatching": self.fraction_nonunique_matching,
            "fractionCertificateBoth": self.fraction_cert_both,
            "fractionCertificateWomen": self.fraction_cert_women,
            "meanSampledX": (float(np.mean(self.matching_distance_samples))
                             if self.matching_distance_samples else None),
        }


class _TrialResult(NamedTuple):
    men_multiple: int
    women_multiple: int
    cert_women: bool
    cert_men: bool
    sampled_x: tuple[float, ...]
    men_groups: Optional[dict[int, int]]
    women_groups: Optional[dict[int, int]]


def _rpmp_trial(config: RpmpConfig, trial: int) -> _TrialResult:
    rng = substream(config.seed, "rpmp", trial)
    metric = parse_metric(config.metric)
    pop = sample_population(config.n, config.k, rng=rng,
                            n_women=config.n + config.unbalanced_r)

    men_prefs, women_prefs = _pref_arrays(pop, metric)
    men_rank = _tie_ranks(men_prefs).tolist()
    women_rank = _tie_ranks(women_prefs).tolist()
    men_lists = men_prefs.tolist()
    women_lists = women_prefs.tolist()
    absent_m = pop.n_men + 1

    # Man-optimal and woman-optimal matchings; an agent has multiple
    # stable partners exactly when its partner differs between the two.
    held_w = match_core._propose_march(men_lists, women_rank, absent_m)
    held_m = match_core._propose_march(women_lists, men_rank, pop.n_women + 1)
    man_opt_of_man = [None] * pop.n_men
    for w, m in enumerate(held_w):
        if m is not None:
            man_opt_of_man[m] = w
    men_multiple = sum(1 for m in range(pop.n_men)
                       if man_opt_of_man[m] != held_m[m])
    woman_opt_of_woman = [None] * pop.n_women
    for m, w in enumerate(held_m):
        if w is not None:
            woman_opt_of_woman[w] = m
    women_multiple = sum(1 for w in range(pop.n_women)
                         if held_w[w] != woman_opt_of_woman[w])

    cert = uniqueness_certificate(pop, metric)

    # X of a uniformly sampled matched pair in the man-optimal matching
    # (pair distances agree across all stable matchings).
    matched_men = [m for m in range(pop.n_men) if man_opt_of_man[m] is not None]
    xs = []
    for _ in range(config.agent_sample_size):
        m = matched_men[int(rng.integers(len(matched_men)))]
        xs.append(float(pair_distance(pop, metric, m, man_opt_of_man[m])))

    men_groups = women_groups = None
    if config.collect_groups:
        men_groups = dict(Counter(Counter(map(int, _pack_masks(pop.men_bits))).values()))
        women_groups = dict(Counter(Counter(map(int, _pack_masks(pop.women_bits))).values()))

    return _TrialResult(men_multiple, women_multiple, cert.women_side,
                        cert.men_side, tuple(xs), men_groups, women_groups)


def rpmp_experiment(config: RpmpConfig, threads: int = 1) -> RpmpStats:
    """Run the trials and aggregate; reductions follow trial order.

    Trial t draws every random quantity from the substream derived from
    (seed, "rpmp", t), so any single trial can be reproduced in
    isolation and results do not depend on `threads`.
    """
    trials = range(config.trials)
    if threads > 1:
        from concurrent.futures import ProcessPoolExecutor
        from functools import partial
        with ProcessPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(partial(_rpmp_trial, config), trials,
                                  chunksize=max(1, config.trials // (threads * 4))))
    else:
        results = [_rpmp_trial(config, t) for t in trials]

    n_w = config.n + config.unbalanced_r
    rows: list[RpmpRow] = []
    samples: list[float] = []
    men_groups: Counter = Counter()
    women_groups: Counter = Counter()
    tot_multiple = tot_men = tot_women = nonunique = cert_both = cert_women = 0
    for t, res in enumerate(results):
        count = res.men_multiple + res.women_multiple
        tot_multiple += count
        tot_men += res.men_multiple
        tot_women += res.women_multiple
        nonunique += bool(count)
        unique_cert = res.cert_women and res.cert_men
        cert_both += unique_cert
        cert_women += res.cert_women
        for x in res.sampled_x:
            rows.append(RpmpRow(t, config.n, config.k, config.metric,
                                count, unique_cert, x))
            samples.append(x)
        if res.men_groups:
            men_groups.update(res.men_groups)
        if res.women_groups:
            women_groups.update(res.women_groups)

    trials_f = float(config.trials)
    return RpmpStats(
        config=config,
        rows=rows,
        fraction_multiple_partners=tot_multiple / (trials_f * (config.n + n_w)),
        fraction_multiple_men=tot_men / (trials_f * config.n),
        fraction_multiple_women=tot_women / (trials_f * n_w),
        fraction_nonunique_matching=nonunique / trials_f,
        fraction_cert_both=cert_both / trials_f,
        fraction_cert_women=cert_women / trials_f,
        matching_distance_samples=samples,
        men_group_sizes=dict(men_groups),
        women_group_sizes=dict(women_groups),
    )


def hamming_tail_stat(samples: Sequence[float], n: int, k: int,
                      beta: float) -> tuple[float, float, float]:
    """Empirical P(X < k/2 - sqrt(beta * k * log2 n)) for sampled
    unweighted pair distances, with the n^(1-beta) reference bound.
    Returns (empirical fraction, bound, threshold)."""
    if not samples:
        raise ValueError("no samples")
    threshold = k / 2.0 - math.sqrt(beta * k * math.log2(n))
    emp = float(np.mean(np.asarray(samples) < threshold))
    return emp, float(n) ** (1.0 - beta), threshold
