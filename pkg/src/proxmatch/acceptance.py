"""The acceptance gate: every release-blocking check, runnable as a
batch.

Each criterion is a function of a shared context (which caches the
expensive sampling runs) and returns a result record with the measured
numbers.  The `validate` CLI subcommand and the acceptance test module
both run exactly these.

Statistical criteria use fixed distribution tests at alpha = 0.01 under
the default seed; by construction roughly one seed in a hundred would
fail a given such check, which is why the gate pins the seed.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np
from scipy import integrate, stats as scipy_stats

from . import exact_expectation as ee
from . import hypercube as hc
from . import line_poisson as lp
from . import match_core as mc
from .rngutil import substream

DEFAULT_SEED = 20250817

# Shared sampling plans; criteria 9-12 all read the first one.
RUN_MAIN = (1.0, 2.0, 250_000.0)
RUN_MU4 = (1.0, 4.0, 100_000.0)
RUN_MU10 = (1.0, 10.0, 100_000.0)
RUN_FAR = (1.0, 100.0, 10_000.0)


@dataclass
class CriterionResult:
    cid: int
    name: str
    passed: bool
    measured: dict = field(default_factory=dict)
    elapsed: float = 0.0
    error: Optional[str] = None

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        detail = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        if self.error:
            detail = f"error: {self.error}" + (f"; {detail}" if detail else "")
        return f"{status}  [{self.cid:2d}] {self.name} ({detail}) [{self.elapsed:.1f}s]"


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, Fraction):
        return str(v)
    return str(v)


class AcceptanceContext:
    """Seeded caches shared between criteria."""

    def __init__(self, seed: int = DEFAULT_SEED, threads: int = 1):
        self.seed = seed
        self.threads = threads
        self._line_cache: dict = {}
        self.oracle_instances: dict[int, list[tuple[Fraction, ...]]] = {}

    def rng(self, offset: int) -> np.random.Generator:
        return substream(self.seed, "validate", offset)

    def line_stats(self, run: tuple[float, float, float]) -> lp.LineStats:
        if run not in self._line_cache:
            lam, mu, window = run
            cfg = lp.LineExperimentConfig(lam=lam, mu=mu, window=window,
                                          trials=1, seed=self.seed)
            self._line_cache[run] = lp.line_experiment(cfg, threads=1)
        return self._line_cache[run]

    def random_gaps(self, n: int, count: int) -> list[tuple[Fraction, ...]]:
        if n not in self.oracle_instances:
            rng = self.rng(30_000 + n)
            out = []
            for _ in range(count):
                nums = rng.integers(1, 21, size=n)
                dens = rng.integers(1, 13, size=n)
                out.append(tuple(Fraction(int(a), int(b))
                                 for a, b in zip(nums, dens)))
            self.oracle_instances[n] = out
        return self.oracle_instances[n]


# ---------------------------------------------------------------------------
# criteria


def _c01_worked_example(ctx: AcceptanceContext) -> CriterionResult:
    t0 = time.monotonic()
    x = (Fraction(1, 10), Fraction(2, 10), Fraction(3, 10), Fraction(4, 10))
    e = ee.expected_greedy_cost(x)
    d = ee.greedy_cost(x)
    elapsed = time.monotonic() - t0
    ok = e == Fraction(11, 30) and d == Fraction(2, 5) and elapsed < 1.0
    return CriterionResult(1, "worked example exact values", ok,
                           {"E": e, "D": d, "budget_s": 1.0}, elapsed)


def _c02_weight_normalization(ctx: AcceptanceContext) -> CriterionResult:
    t0 = time.monotonic()
    bad_k = [k for k in range(2, 25, 2)
             if sum(ee.partition_weight(o) for o in ee.odd_partitions(k)) != 1]
    want = {(5, 1): Fraction(2, 5), (3, 3): Fraction(1, 9),
            (3, 1, 1, 1): Fraction(4, 9), (1, 1, 1, 1, 1, 1): Fraction(2, 45)}
    parts6 = ee.odd_partitions(6)
    spots_ok = (list(want) == parts6
                and all(ee.partition_weight(o) == w for o, w in want.items()))
    elapsed = time.monotonic() - t0
    ok = not bad_k and spots_ok and elapsed < 10.0
    return CriterionResult(2, "partition weight normalization", ok,
                           {"even_k_checked": "2..24", "bad_k": bad_k,
                            "k6_spot_values": spots_ok, "budget_s": 10.0},
                           elapsed)


def _c03_oracle_agreement(ctx: AcceptanceContext) -> CriterionResult:
    t0 = time.monotonic()
    mismatches = 0
    checked = 0
    for n in (2, 4, 6, 8):
        for gaps in ctx.random_gaps(n, 100):
            if ee.expected_greedy_cost(gaps) != ee.permutation_oracle(gaps):
                mismatches += 1
            checked += 1
    elapsed = time.monotonic() - t0
    ok = mismatches == 0 and checked == 400 and elapsed < 300.0
    return CriterionResult(3, "closed form equals permutation oracle", ok,
                           {"instances": checked, "mismatches": mismatches,
                            "budget_s": 300.0}, elapsed)


def _c04_expectation_bounds(ctx: AcceptanceContext) -> CriterionResult:
    t0 = time.monotonic()
    scaling_violations = 0
    checked = 0
    for n in (2, 4, 6, 8):
        ones_e = ee.expected_greedy_cost_all_ones(n)
        for gaps in ctx.random_gaps(n, 100):
            mean = sum(gaps, Fraction(0)) / n
            if ee.expected_greedy_cost(gaps) > ones_e * mean:
                scaling_violations += 1
            checked += 1
    log_bound_ok = True
    worst_slack = math.inf
    for m in range(1, 6):
        e = float(ee.expected_greedy_cost_all_ones(2 * m))
        slack = ee.all_ones_log_bound(m) + 1e-12 - e
        worst_slack = min(worst_slack, slack)
        if slack < 0:
            log_bound_ok = False
    elapsed = time.monotonic() - t0
    ok = scaling_violations == 0 and log_bound_ok
    return CriterionResult(4, "mean scaling and log bounds", ok,
                           {"instances": checked,
                            "scaling_violations": scaling_violations,
                            "log_bound_min_slack": worst_slack}, elapsed)


def _enumeration_partner_sets(inst: mc.MatchingInstance) -> dict:
    sets: dict = {mc.Agent(mc.MAN, m): set() for m in range(inst.n_men)}
    sets.update({mc.Agent(mc.WOMAN, w): set() for w in range(inst.n_women)})
    for matching in mc.enumerate_stable_matchings(inst):
        for m, w in matching.pairs():
            sets[mc.Agent(mc.MAN, m)].add(mc.Agent(mc.WOMAN, w))
            sets[mc.Agent(mc.WOMAN, w)].add(mc.Agent(mc.MAN, m))
    return sets


def _c05_stability_optimality(ctx: AcceptanceContext) -> CriterionResult:
    t0 = time.monotonic()
    rng = ctx.rng(50_000)
    blocking = 0
    optimality_violations = 0
    small_checked = 0
    for t in range(1000):
        n_men = int(rng.integers(1, 33))
        n_women = n_men if t % 2 == 0 else n_men + int(rng.integers(1, 5))
        truncated = t % 10 < 3
        inst = mc.random_instance(rng, n_men, n_women, truncated=truncated)
        man_opt = mc.deferred_acceptance(inst, mc.MAN)
        woman_opt = mc.deferred_acceptance(inst, mc.WOMAN)
        blocking += len(mc.find_blocking_pairs(inst, man_opt))
        blocking += len(mc.find_blocking_pairs(inst, woman_opt))
        if n_men <= 6 and n_women <= 6:
            small_checked += 1
            sets = _enumeration_partner_sets(inst)
            for m in range(n_men):
                mine = {a.index for a in sets[mc.Agent(mc.MAN, m)]}
                got = man_opt.man_to_woman[m]
                best = (min(mine, key=inst.men_prefs[m].index)
                        if mine else None)
                if got != best:
                    optimality_violations += 1
            for w in range(n_women):
                mine = {a.index for a in sets[mc.Agent(mc.WOMAN, w)]}
                got = woman_opt.woman_to_man[w]
                best = (min(mine, key=inst.women_prefs[w].index)
                        if mine else None)
                if got != best:
                    optimality_violations += 1
    elapsed = time.monotonic() - t0
    ok = blocking == 0 and optimality_violations == 0 and small_checked > 0
    return CriterionResult(5, "no blocking pairs; proposer side optimal", ok,
                           {"instances": 1000, "blocking_pairs": blocking,
                            "small_instances": small_checked,
                            "optimality_violations": optimality_violations},
                           elapsed)


def _c06_partner_sets(ctx: AcceptanceContext) -> CriterionResult:
    t0 = time.monotonic()
    rng = ctx.rng(60_000)
    mismatches = 0
    for t in range(200):
        inst = mc.random_instance(rng, int(rng.integers(1, 7)),
                                  int(rng.integers(1, 7)),
                                  truncated=t % 2 == 1)
        if mc.stable_partners_all(inst) != {
                a: frozenset(s) for a, s in _enumeration_partner_sets(inst).items()}:
            mismatches += 1
    elapsed = time.monotonic() - t0
    return CriterionResult(6, "partner sweep equals enumeration", mismatches == 0,
                           {"instances": 200, "mismatches": mismatches}, elapsed)


def _c07_hypercube_invariants(ctx: AcceptanceContext) -> CriterionResult:
    t0 = time.monotonic()
    rng = ctx.rng(70_000)
    unmatched_violations = 0
    distance_violations = 0
    for t in range(200):
        n = int(rng.integers(2, 7))
        r = int(rng.integers(0, 3))
        k = int(rng.integers(1, 4))
        metric = hc.Metric.hamming() if t % 2 == 0 else hc.Metric.weighted()
        pop = hc.sample_population(n, k, rng=rng, n_women=n + r)
        inst = hc.build_instance(pop, metric)
        matchings = mc.enumerate_stable_matchings(inst)
        unmatched = {frozenset(mc.unmatched_agents(m)) for m in matchings}
        if len(unmatched) != 1:
            unmatched_violations += 1
            continue
        per_agent: dict = {}
        for matching in matchings:
            for m, w in matching.pairs():
                d = hc.pair_distance(pop, metric, m, w)
                key = d if isinstance(d, int) else d.as_fraction()
                per_agent.setdefault(mc.Agent(mc.MAN, m), set()).add(key)
                per_agent.setdefault(mc.Agent(mc.WOMAN, w), set()).add(key)
        if any(len(v) != 1 for v in per_agent.values()):
            distance_violations += 1
    elapsed = time.monotonic() - t0
    ok = unmatched_violations == 0 and distance_violations == 0
    return CriterionResult(7, "hypercube unmatched set and distances invariant",
                           ok,
                           {"instances": 200,
                            "unmatched_violations": unmatched_violations,
                            "distance_violations": distance_violations},
                           elapsed)


def _c08_multiple_partner_bound(ctx: AcceptanceContext) -> CriterionResult:
    t0 = time.monotonic()
    rng = ctx.rng(80_000)
    n, r, trials = 20, 5, 2000
    fracs = np.empty(trials)
    for t in range(trials):
        inst = mc.random_instance(rng, n, n + r)
        men_flags, _ = mc.multiple_partner_flags(inst)
        fracs[t] = sum(men_flags) / n
    p_hat = float(fracs.mean())
    sigma = float(fracs.std(ddof=1) / math.sqrt(trials))
    bound = 1.0 / (r + 1)
    elapsed = time.monotonic() - t0
    ok = p_hat <= bound + 3 * sigma
    return CriterionResult(8, "multiple-partner probability bound", ok,
                           {"p_hat": p_hat, "bound": bound, "sigma": sigma,
                            "threshold": bound + 3 * sigma}, elapsed)


def _c09_busy_cycle(ctx: AcceptanceContext) -> CriterionResult:
    t0 = time.monotonic()
    lam, mu = 1.0, 2.0
    integral, _ = integrate.quad(lambda t: lp.busy_cycle_pdf(lam, mu, t),
                                 0, np.inf, limit=400)
    mean, _ = integrate.quad(lambda t: t * lp.busy_cycle_pdf(lam, mu, t),
                             0, np.inf, limit=400)
    want_mean = lp.busy_cycle_mean(lam, mu)

    fq = ctx.line_stats(RUN_MAIN).queue_samples(lp.FQ)
    ks = scipy_stats.ks_1samp(fq, lp.busy_cycle_cdf(lam, mu))
    mean_fq = float(fq.mean())
    elapsed = time.monotonic() - t0
    ok = (abs(integral - 1.0) <= 1e-6
          and abs(mean - want_mean) <= 1e-4
          and fq.size >= 100_000
          and ks.pvalue > 0.01
          and abs(mean_fq - want_mean) <= 0.02 * want_mean)
    return CriterionResult(9, "queue distances follow the busy cycle law", ok,
                           {"integral": integral, "mean": mean,
                            "n_samples": int(fq.size),
                            "ks_p": float(ks.pvalue), "mean_fq": mean_fq},
                           elapsed)


def _c10_wave_statistics(ctx: AcceptanceContext) -> CriterionResult:
    t0 = time.monotonic()
    stats = ctx.line_stats(RUN_MAIN)
    sizes = stats.class_sizes()
    n = sizes.size
    rho = stats.config.lam / stats.config.mu

    k_pool = max(3, int(math.floor(math.log2(n / 5.0))))
    obs = np.array([(sizes == j).sum() for j in range(1, k_pool)]
                   + [(sizes >= k_pool).sum()], dtype=float)
    probs = np.array([(1 - rho) * rho ** (j - 1) for j in range(1, k_pool)]
                     + [rho ** (k_pool - 1)])
    chi = scipy_stats.chisquare(obs, probs * n)

    complete = stats.waves["complete"]
    red_count_violations = int(np.sum(
        stats.waves["n_red"][complete] != stats.waves["n_blue"][complete] + 1))
    m = stats.interior_mask() & ~np.isnan(stats.blue["x_stable"])
    cross_wave = int(np.sum(~stats.blue["stable_same_wave"][m]))
    elapsed = time.monotonic() - t0
    ok = (n >= 100_000 and chi.pvalue > 0.01
          and red_count_violations == 0 and cross_wave == 0)
    return CriterionResult(10, "wave sizes geometric; waves well formed", ok,
                           {"n_waves": int(n), "chi2_p": float(chi.pvalue),
                            "red_count_violations": red_count_violations,
                            "cross_wave_pairs": cross_wave}, elapsed)


def _c11_sandwich(ctx: AcceptanceContext) -> CriterionResult:
    t0 = time.monotonic()
    stats = ctx.line_stats(RUN_MAIN)
    m = stats.interior_mask() & ~np.isnan(stats.blue["x_stable"])
    x = stats.blue["x_stable"][m]
    lo = stats.blue["sand_lo"][m]
    hi = stats.blue["sand_hi"][m]
    violations = int(np.sum((x < lo) | (x > hi)))
    elapsed = time.monotonic() - t0
    ok = x.size >= 100_000 and violations == 0
    return CriterionResult(11, "stable distance sandwiched by wave gaps", ok,
                           {"n_blues": int(x.size), "violations": violations},
                           elapsed)


def _c12_mean_distance_bounds(ctx: AcceptanceContext) -> CriterionResult:
    t0 = time.monotonic()
    measured = {}
    ok = True
    for run in (RUN_MAIN, RUN_MU4, RUN_MU10):
        lam, mu, _ = run
        xs = ctx.line_stats(run).stable_samples()
        mean = float(xs.mean())
        se = float(xs.std(ddof=1) / math.sqrt(xs.size))
        bound = lp.mean_distance_log_bound(lam, mu)
        measured[f"mean_{int(mu)}"] = mean
        measured[f"bound_{int(mu)}"] = bound
        if mean > bound + 3 * se:
            ok = False
    lam, mu, _ = RUN_FAR
    xs = ctx.line_stats(RUN_FAR).stable_samples()
    far_mean = float(xs.mean())
    target = 1.0 / (2 * mu)
    measured["mean_far"] = far_mean
    measured["far_target"] = target
    if abs(far_mean - target) > 0.1 * target:
        ok = False
    elapsed = time.monotonic() - t0
    measured["budget_s"] = 600.0
    ok = ok and elapsed < 600.0
    return CriterionResult(12, "mean distance log bound and sparse limit", ok,
                           measured, elapsed)


def _c13_scaling_trends(ctx: AcceptanceContext) -> CriterionResult:
    t0 = time.monotonic()
    fracs = []
    for n in (64, 256, 1024):
        cfg = hc.RpmpConfig(n=n, k=1, metric=hc.HAMMING, trials=200,
                            seed=ctx.seed + n)
        fracs.append(hc.rpmp_experiment(cfg, threads=ctx.threads)
                     .fraction_multiple_partners)
    decreasing = all(a > b for a, b in zip(fracs, fracs[1:]))

    cert_cfg = hc.RpmpConfig(n=64, k=16, metric=hc.WEIGHTED, trials=1000,
                             seed=ctx.seed + 7)
    cert_stats = hc.rpmp_experiment(cert_cfg, threads=ctx.threads)
    false_frac = 1.0 - cert_stats.fraction_cert_both
    q = 64 ** 2 / 2.0 ** 16
    sigma = math.sqrt(q * (1 - q) / 1000)
    cert_ok = false_frac <= q + 3 * sigma

    med_cfg = hc.RpmpConfig(n=1024, k=30, metric=hc.WEIGHTED, trials=60,
                            seed=ctx.seed + 11)
    med_stats = hc.rpmp_experiment(med_cfg, threads=ctx.threads)
    xs = np.asarray(med_stats.matching_distance_samples)
    ratio = float(np.median(np.log2(xs))) / math.log2(1024)
    ratio_ok = -1.3 < ratio < -0.7
    elapsed = time.monotonic() - t0
    ok = decreasing and cert_ok and ratio_ok
    return CriterionResult(13, "multiple-partner decay, certificates, distance scaling",
                           ok,
                           {"fracs_64_256_1024": tuple(round(f, 5) for f in fracs),
                            "false_cert": false_frac,
                            "cert_threshold": q + 3 * sigma,
                            "median_log_ratio": ratio}, elapsed)


CRITERIA: list[tuple[int, str, Callable[[AcceptanceContext], CriterionResult]]] = [
    (1, "worked example exact values", _c01_worked_example),
    (2, "partition weight normalization", _c02_weight_normalization),
    (3, "closed form equals permutation oracle", _c03_oracle_agreement),
    (4, "mean scaling and log bounds", _c04_expectation_bounds),
    (5, "no blocking pairs; proposer side optimal", _c05_stability_optimality),
    (6, "partner sweep equals enumeration", _c06_partner_sets),
    (7, "hypercube unmatched set and distances invariant", _c07_hypercube_invariants),
    (8, "multiple-partner probability bound", _c08_multiple_partner_bound),
    (9, "queue distances follow the busy cycle law", _c09_busy_cycle),
    (10, "wave sizes geometric; waves well formed", _c10_wave_statistics),
    (11, "stable distance sandwiched by wave gaps", _c11_sandwich),
    (12, "mean distance log bound and sparse limit", _c12_mean_distance_bounds),
    (13, "multiple-partner decay, certificates, distance scaling", _c13_scaling_trends),
]


def run_criterion(ctx: AcceptanceContext, cid: int) -> CriterionResult:
    for num, name, fn in CRITERIA:
        if num == cid:
            t0 = time.monotonic()
            try:
                return fn(ctx)
            except Exception as exc:  # surface, never hide, a broken check
                return CriterionResult(cid, name, False, {},
                                       time.monotonic() - t0,
                                       error=f"{type(exc).__name__}: {exc}")
    raise ValueError(f"no criterion {cid}")


def run_all(seed: int = DEFAULT_SEED, ids: Optional[list[int]] = None,
            threads: int = 1) -> list[CriterionResult]:
    ctx = AcceptanceContext(seed=seed, threads=threads)
    wanted = ids if ids is not None else [cid for cid, _, _ in CRITERIA]
    return [run_criterion(ctx, cid) for cid in wanted]
