"""Deterministic random-stream derivation for experiment suites.

Every randomized routine in this package draws from a Generator produced
here.  Streams are keyed by (seed, suite, trial) through SeedSequence
spawn keys, so trial t of a suite yields identical draws no matter how
many other trials ran before it or on which worker it executes.
"""

from __future__ import annotations

import numpy as np

# Stable suite identifiers; never renumber, only append.
SUITE_IDS = {
    "rpmp": 1,
    "line": 2,
    "exact": 3,
    "match": 4,
    "validate": 5,
}

# Recorded in run manifests so outputs can be tied to the bit generator.
RNG_ALGORITHM = "philox4x64-10/seedsequence"


def substream(seed: int, suite: str, trial: int = 0) -> np.random.Generator:
    """Generator for one trial of one suite, independent of all others."""
    if suite not in SUITE_IDS:
        raise ValueError(f"unknown suite {suite!r}; known: {sorted(SUITE_IDS)}")
    if trial < 0:
        raise ValueError("trial index must be nonnegative")
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(SUITE_IDS[suite], trial))
    return np.random.Generator(np.random.Philox(ss))
