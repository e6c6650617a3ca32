import math
from fractions import Fraction as F

import pytest

from proxmatch import exact_expectation as ee
from proxmatch.errors import SizeCapError
from proxmatch.rngutil import substream

WORKED = (F(1, 10), F(2, 10), F(3, 10), F(4, 10))


def random_gaps(rng, n, max_num=20, max_den=12):
    return tuple(F(int(a), int(b))
                 for a, b in zip(rng.integers(1, max_num + 1, n),
                                 rng.integers(1, max_den + 1, n)))


def test_as_gaps_parses_exactly():
    assert ee.as_gaps(["0.1", "3/10", 2, F(1, 3)]) == (
        F(1, 10), F(3, 10), F(2), F(1, 3))
    with pytest.raises(ValueError):
        ee.as_gaps(["0"])
    with pytest.raises(ValueError):
        ee.as_gaps(["-1/2", "1"])


def test_worked_example_values():
    assert ee.expected_greedy_cost(WORKED) == F(11, 30)
    assert ee.greedy_cost(WORKED) == F(2, 5)
    assert ee.permutation_oracle(WORKED) == F(11, 30)


def test_all_ones_small_values():
    assert ee.expected_greedy_cost_all_ones(2) == 1
    assert ee.expected_greedy_cost_all_ones(4) == 2
    for n in (2, 4, 6, 8):
        ones = (F(1),) * n
        assert ee.expected_greedy_cost_all_ones(n) == ee.permutation_oracle(ones)
        assert ee.expected_greedy_cost(ones) == ee.expected_greedy_cost_all_ones(n)


def test_odd_partitions_structure():
    assert ee.odd_partitions(2) == [(1, 1)]
    assert ee.odd_partitions(4) == [(3, 1), (1, 1, 1, 1)]
    assert ee.odd_partitions(6) == [(5, 1), (3, 3), (3, 1, 1, 1),
                                    (1, 1, 1, 1, 1, 1)]
    for k in range(2, 17, 2):
        parts = ee.odd_partitions(k)
        assert parts == sorted(parts, reverse=True)
        for o in parts:
            assert sum(o) == k and all(v % 2 == 1 for v in o)


def test_partition_weights_sum_to_one():
    want6 = {(5, 1): F(2, 5), (3, 3): F(1, 9), (3, 1, 1, 1): F(4, 9),
             (1, 1, 1, 1, 1, 1): F(2, 45)}
    for o, w in want6.items():
        assert ee.partition_weight(o) == w
    for k in range(2, 21, 2):
        assert sum(ee.partition_weight(o) for o in ee.odd_partitions(k)) == 1


def test_split_count_matches_enumeration():
    for k in (4, 6, 8):
        for o in ee.odd_partitions(k):
            for n in range(k, k + 5):
                splits = list(ee.enumerate_splits(o, n))
                assert len(splits) == ee.split_count(o, n)
                assert len(set(splits)) == len(splits)


def test_f_value_known_and_min_shortcut():
    # One odd group of size 3 over gaps (1, 1, 1, 5): the group can sit
    # at four positions contributing 3, 7, 7, 7 -> average 6.
    assert ee.f_value((3,), (F(1), F(1), F(1), F(5))) == 6
    rng = substream(77, "exact", 0)
    for k in (4, 6):
        ones = (F(1),) * (k + 3)
        for o in ee.odd_partitions(k):
            assert ee.f_value(o, ones) == min(o)


def test_f_value_sampling_close_to_exact():
    o = (3, 1)
    gaps = (F(1), F(2), F(3), F(4), F(5), F(6))
    exact = ee.f_value(o, gaps)
    sampled = ee.f_value(o, gaps, sample_splits=4000,
                         rng=substream(77, "exact", 1))
    assert sampled.is_estimate and sampled.n_samples == 4000
    assert abs(float(sampled.value) - float(exact)) <= 5 * sampled.stderr


def test_size_caps():
    with pytest.raises(SizeCapError):
        ee.expected_greedy_cost((F(1),) * 14)
    with pytest.raises(SizeCapError):
        ee.permutation_oracle((F(1),) * 10)


def test_even_length_required():
    with pytest.raises(ValueError):
        ee.expected_greedy_cost((F(1),))
    with pytest.raises(ValueError):
        ee.greedy_cost((F(1), F(2), F(3)))


def test_greedy_tie_policies():
    ties = (F(1), F(1), F(1), F(1))
    assert ee.greedy_cost(ties, tie_policy="leftmost") == 2
    assert ee.greedy_cost(ties, tie_policy="average") == 2
    no_ties = (F(1), F(4), F(2), F(9))
    assert (ee.greedy_cost(no_ties, tie_policy="leftmost")
            == ee.greedy_cost(no_ties, tie_policy="average"))
    with pytest.raises(ValueError):
        ee.greedy_cost(ties, tie_policy="rightmost")


def test_expected_cost_equals_oracle_randomized():
    rng = substream(77, "exact", 2)
    for n in (2, 4, 6):
        for _ in range(40):
            gaps = random_gaps(rng, n)
            assert ee.expected_greedy_cost(gaps) == ee.permutation_oracle(gaps)


def test_mean_scaling_gap_nonnegative():
    rng = substream(77, "exact", 3)
    for n in (2, 4, 6, 8):
        for _ in range(30):
            gaps = random_gaps(rng, n)
            assert ee.mean_scaling_gap(gaps) >= 0


def test_estimate_close_to_exact():
    est = ee.estimate_greedy_cost(WORKED, 20_000, substream(77, "exact", 4))
    assert est.is_estimate
    assert abs(float(est.value) - float(F(11, 30))) <= 5 * est.stderr


def test_log_bound_all_ones():
    for m in range(1, 7):
        e = float(ee.expected_greedy_cost_all_ones(2 * m))
        assert e <= ee.all_ones_log_bound(m) + 1e-12
    assert ee.all_ones_log_bound(1) == 1.0
    assert ee.all_ones_log_bound(4) == pytest.approx(4 * (1 + math.log(4)))
