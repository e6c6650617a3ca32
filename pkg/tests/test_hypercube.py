from fractions import Fraction as F

import numpy as np
import pytest

from proxmatch import hypercube as hc
from proxmatch import match_core as mc
from proxmatch.errors import UnmatchedAgentError
from proxmatch.rngutil import substream


def pref_order_bruteforce(pop, metric, side):
    """Sort the opposite side by (distance, tie rank), per agent."""
    if side == mc.MAN:
        own, other = pop.men_bits, pop.women_bits
        ties = pop.men_tiebreak
    else:
        own, other = pop.women_bits, pop.men_bits
        ties = pop.women_tiebreak
    orders = []
    for i in range(own.shape[0]):
        # ties[i] lists the opposite side in tie-break order; rank is the
        # position within that permutation.
        rank = {int(j): pos for pos, j in enumerate(ties[i])}

        def key(j):
            if metric.kind == hc.HAMMING:
                d = hc.hamming_distance(own[i], other[j])
                return (d, rank[j])
            d = hc.weighted_hamming_distance(own[i], other[j],
                                             metric.weights)
            return (d.as_fraction() if hasattr(d, "as_fraction") else d,
                    rank[j])
        orders.append(tuple(sorted(range(other.shape[0]), key=key)))
    return tuple(orders)


def test_dyadic_distance_behaviour():
    d = hc.DyadicDistance(3, 3)
    assert d.as_fraction() == F(3, 8)
    assert float(d) == 0.375
    assert hc.DyadicDistance(1, 2) < hc.DyadicDistance(3, 3)
    assert hc.DyadicDistance(2, 2) <= hc.DyadicDistance(4, 3)


def test_metric_validation():
    with pytest.raises(ValueError):
        hc.Metric(kind="weighted", weights=(F(1, 4), F(1, 2)))  # increasing
    with pytest.raises(ValueError):
        hc.Metric(kind="weighted", weights=(F(1, 2), F(0)))  # not positive
    m = hc.Metric.weighted()
    assert m.kind == hc.WEIGHTED and m.weights is None
    assert hc.parse_metric("hamming").kind == hc.HAMMING
    assert hc.parse_metric("weighted").kind == hc.WEIGHTED
    with pytest.raises(ValueError):
        hc.parse_metric("euclidean")


def test_distances_match_bit_counting():
    rng = substream(31, "rpmp", 0)
    k = 9
    a = rng.integers(0, 2, size=k).astype(np.int8)
    b = rng.integers(0, 2, size=k).astype(np.int8)
    assert hc.hamming_distance(a, b) == int(np.sum(a != b))
    w = hc.weighted_hamming_distance(a, b)
    assert w.as_fraction() == sum(
        (F(1, 2 ** (i + 1)) for i in range(k) if a[i] != b[i]), F(0))
    custom = tuple(F(1, 3 ** (i + 1)) for i in range(k))
    wc = hc.weighted_hamming_distance(a, b, custom)
    assert wc == sum((custom[i] for i in range(k) if a[i] != b[i]), F(0))


def test_default_weight_prefix_dominance():
    # Each default weight exceeds the sum of all later ones, so the most
    # significant differing question decides the comparison.
    m = hc.Metric.weighted()
    assert m.is_prefix_dominant
    bad = hc.Metric(kind="weighted", weights=(F(1, 2), F(1, 3), F(1, 4)))
    assert not bad.is_prefix_dominant


@pytest.mark.parametrize("metric", [hc.Metric.hamming(), hc.Metric.weighted()])
def test_build_instance_matches_bruteforce_order(metric):
    rng = substream(31, "rpmp", 1)
    for t in range(25):
        pop = hc.sample_population(int(rng.integers(1, 7)),
                                   int(rng.integers(1, 5)), rng=rng,
                                   n_women=int(rng.integers(1, 7)))
        inst = hc.build_instance(pop, metric)
        assert inst.men_prefs == pref_order_bruteforce(pop, metric, mc.MAN)
        assert inst.women_prefs == pref_order_bruteforce(pop, metric, mc.WOMAN)


def test_custom_weights_order():
    rng = substream(31, "rpmp", 2)
    weights = (F(5, 7), F(1, 5), F(1, 11))
    metric = hc.Metric(kind="weighted", weights=weights)
    for _ in range(10):
        pop = hc.sample_population(5, 3, rng=rng)
        inst = hc.build_instance(pop, metric)
        assert inst.men_prefs == pref_order_bruteforce(pop, metric, mc.MAN)


def test_sample_population_seed_rules():
    pop = hc.sample_population(4, 3, seed=11)
    again = hc.sample_population(4, 3, seed=11)
    assert np.array_equal(pop.men_bits, again.men_bits)
    assert np.array_equal(pop.men_tiebreak, again.men_tiebreak)
    with pytest.raises(ValueError):
        hc.sample_population(4, 3)
    with pytest.raises(ValueError):
        hc.sample_population(4, 3, seed=1, rng=substream(1, "rpmp", 0))


def test_pair_and_matching_distance():
    pop = hc.sample_population(4, 3, seed=12)
    metric = hc.Metric.hamming()
    inst = hc.build_instance(pop, metric)
    got = mc.deferred_acceptance(inst)
    for m, w in got.pairs():
        d = hc.pair_distance(pop, metric, m, w)
        assert d == hc.hamming_distance(pop.men_bits[m], pop.women_bits[w])
        assert hc.matching_distance(pop, metric, got,
                                    mc.Agent(mc.MAN, m)) == d
    lonely = hc.build_instance(hc.sample_population(2, 2, seed=13,
                                                    n_women=4),
                               metric)
    matching = mc.deferred_acceptance(lonely)
    unmatched = next(iter(mc.unmatched_agents(matching)))
    with pytest.raises(UnmatchedAgentError):
        hc.matching_distance(hc.sample_population(2, 2, seed=13, n_women=4),
                             metric, matching, unmatched)


def test_certificate_definition_bruteforce():
    rng = substream(31, "rpmp", 3)
    for t in range(30):
        n = int(rng.integers(2, 6))
        k = int(rng.integers(1, 14))
        metric = hc.Metric.hamming() if t % 2 else hc.Metric.weighted()
        pop = hc.sample_population(n, k, rng=rng)
        cert = hc.uniqueness_certificate(pop, metric)

        def distinct(bits_from, bits_to):
            for i in range(bits_from.shape[0]):
                seen = set()
                for j in range(bits_to.shape[0]):
                    if metric.kind == hc.HAMMING:
                        d = hc.hamming_distance(bits_from[i], bits_to[j])
                    else:
                        d = hc.weighted_hamming_distance(
                            bits_from[i], bits_to[j]).as_fraction()
                    if d in seen:
                        return False
                    seen.add(d)
            return True

        assert cert.women_side == distinct(pop.women_bits, pop.men_bits)
        assert cert.men_side == distinct(pop.men_bits, pop.women_bits)
        assert cert.both == (cert.women_side and cert.men_side)


def test_certificate_implies_unique_stable_matching():
    rng = substream(31, "rpmp", 4)
    seen_cert = 0
    for _ in range(40):
        pop = hc.sample_population(4, 14, rng=rng)
        metric = hc.Metric.weighted()
        if hc.uniqueness_certificate(pop, metric).both:
            seen_cert += 1
            inst = hc.build_instance(pop, metric)
            assert len(mc.enumerate_stable_matchings(inst)) == 1
    assert seen_cert >= 20  # the regime where certificates are common


def test_experiment_reproducible_and_thread_invariant():
    cfg = hc.RpmpConfig(n=16, k=2, metric=hc.HAMMING, trials=6, seed=99,
                        agent_sample_size=2)
    a = hc.rpmp_experiment(cfg)
    b = hc.rpmp_experiment(cfg)
    c = hc.rpmp_experiment(cfg, threads=2)
    assert a.rows == b.rows == c.rows
    assert a.summary_dict() == c.summary_dict()


def test_experiment_rows_against_library_recomputation():
    cfg = hc.RpmpConfig(n=6, k=2, metric=hc.WEIGHTED, trials=5, seed=7,
                        unbalanced_r=2)
    stats = hc.rpmp_experiment(cfg)
    for row in stats.rows:
        pop = hc.sample_population(cfg.n, cfg.k,
                                   rng=substream(cfg.seed, "rpmp", row.trial),
                                   n_women=cfg.n + cfg.unbalanced_r)
        metric = hc.parse_metric(cfg.metric)
        inst = hc.build_instance(pop, metric)
        sets = mc.stable_partners_all(inst)
        assert row.multiple_partner_count == sum(
            len(s) > 1 for s in sets.values())
        assert row.unique_certificate == hc.uniqueness_certificate(
            pop, metric).both
        matchings = mc.enumerate_stable_matchings(inst)
        xs = {float(hc.matching_distance(pop, metric, matchings[0],
                                         mc.Agent(mc.MAN, m)))
              for m, _ in matchings[0].pairs()}
        assert row.sampled_agent_x in xs


def test_unbalanced_leaves_extra_women_single():
    cfg = hc.RpmpConfig(n=6, k=3, metric=hc.HAMMING, trials=4, seed=3,
                        unbalanced_r=3)
    stats = hc.rpmp_experiment(cfg)
    assert all(row.n == 6 for row in stats.rows)


def test_hamming_tail_stat_formula():
    emp, bound, threshold = hc.hamming_tail_stat([10.0, 40.0, 60.0], n=16,
                                                 k=100, beta=0.5)
    assert bound == 16.0 ** 0.5
    assert threshold == pytest.approx(50 - np.sqrt(0.5 * 100 * 4))
    assert emp == pytest.approx(1 / 3)  # only the sample at 10 is below
