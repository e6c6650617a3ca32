"""Stable matching under proximity-induced preferences.

Three model families share the core matching machinery:

* hypercube populations whose preferences come from (weighted) answer
  disagreement, with tie-breaking and uniqueness certificates;
* blue and red Poisson points on a segment matched by iterated closest
  pairs or by queue sweeps, with wave decompositions and the busy-cycle
  law of queue distances;
* exact rational expectations for the greedy closest-pair cost of a
  randomly ordered gap sequence.
"""

from .errors import MalformedMatchingError, SizeCapError, UnmatchedAgentError
from .match_core import (
    MAN,
    WOMAN,
    Agent,
    Matching,
    MatchingInstance,
    deferred_acceptance,
    enumerate_stable_matchings,
    find_blocking_pairs,
    is_stable,
    multiple_partner_flags,
    random_instance,
    stable_partners_all,
    unmatched_agents,
)
from .hypercube import (
    DyadicDistance,
    Metric,
    Population,
    RpmpConfig,
    RpmpStats,
    build_instance,
    hamming_distance,
    matching_distance,
    rpmp_experiment,
    sample_population,
    uniqueness_certificate,
    weighted_hamming_distance,
)
from .line_poisson import (
    LineConfiguration,
    LineExperimentConfig,
    LineMatching,
    LineStats,
    Wave,
    WaveSet,
    busy_cycle_cdf,
    busy_cycle_mean,
    busy_cycle_pdf,
    discrepancy,
    is_nested,
    line_experiment,
    mean_distance_linear_bound,
    mean_distance_log_bound,
    potential_waves,
    queue_match,
    sample_configuration,
    stable_match_line,
)
from .exact_expectation import (
    SampledValue,
    enumerate_splits,
    estimate_greedy_cost,
    expected_greedy_cost,
    expected_greedy_cost_all_ones,
    f_value,
    greedy_cost,
    odd_partitions,
    partition_weight,
    permutation_oracle,
    split_count,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
