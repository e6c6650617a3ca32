"""Stable and queue matchings of two Poisson point colors on a segment.

Blue points (rate lam) are matched to red points (rate mu > lam).  The
unique stable matching pairs, repeatedly, the closest blue-red pair;
that pair is always adjacent in the surviving configuration, which makes
a heap over adjacent opposite-color neighbors exact and near-linear.

Forward queue matching sweeps rightward keeping waiting blues on a
stack; each red grabs the most recently stacked blue, so matched
intervals are nested.  The backward variant mirrors the sweep.

Wave decomposition: scan with the running height (#red - #blue so far).
Each height edge v -> v+1 is crossed upward by reds and downward by
blues, alternating and ending upward because the drift is positive; the
points crossing one edge form a wave, alternating red, blue, ..., red
when complete helps bound every blue's stable matching distance by its
within-wave gap sums.  Waves touching the window boundary can be cut
off mid-pattern and are flagged incomplete; statistics should also drop
waves within `interior_margin` of the ends, where the finite window
distorts the picture.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy import special
from scipy.integrate import cumulative_simpson

from .rngutil import substream

FORWARD = "forward"
BACKWARD = "backward"
STABLE = "stable"
FQ = "fq"
BQ = "bq"


@dataclass(frozen=True)
class LineConfiguration:
    """Sorted blue and red coordinates on the window [0, length]."""

    blue: np.ndarray
    red: np.ndarray
    length: float

    def __post_init__(self):
        object.__setattr__(self, "blue", np.asarray(self.blue, dtype=float))
        object.__setattr__(self, "red", np.asarray(self.red, dtype=float))
        for arr, name in ((self.blue, "blue"), (self.red, "red")):
            if arr.ndim != 1:
                raise ValueError(f"{name} coordinates must be a 1-d array")
            if arr.size and (arr[0] < 0 or arr[-1] > self.length):
                raise ValueError(f"{name} coordinates must lie in [0, length]")
            if np.any(np.diff(arr) <= 0):
                raise ValueError(f"{name} coordinates must be strictly increasing")

    @property
    def n_blue(self) -> int:
        return self.blue.size

    @property
    def n_red(self) -> int:
        return self.red.size


def sample_configuration(lam: float, mu: float, length: float, *,
                         seed: Optional[int] = None,
                         rng: Optional[np.random.Generator] = None) -> LineConfiguration:
    """Independent Poisson processes of rates lam (blue) and mu (red)."""
    if (seed is None) == (rng is None):
        raise ValueError("pass exactly one of seed or rng")
    if rng is None:
        rng = substream(seed, "line", 0)
    if lam <= 0 or mu <= 0 or length <= 0:
        raise ValueError("rates and length must be positive")
    blue = np.sort(rng.uniform(0, length, rng.poisson(lam * length)))
    red = np.sort(rng.uniform(0, length, rng.poisson(mu * length)))
    return LineConfiguration(blue, red, float(length))


@dataclass(frozen=True)
class LineMatching:
    """Partner indices per point; -1 marks unmatched."""

    blue_partner: np.ndarray
    red_partner: np.ndarray

    def __post_init__(self):
        bp = np.asarray(self.blue_partner, dtype=np.int64)
        rp = np.asarray(self.red_partner, dtype=np.int64)
        object.__setattr__(self, "blue_partner", bp)
        object.__setattr__(self, "red_partner", rp)
        matched = np.flatnonzero(bp >= 0)
        if np.any(rp[bp[matched]] != matched):
            raise ValueError("partner arrays are not mutually consistent")
        if np.flatnonzero(rp >= 0).size != matched.size:
            raise ValueError("partner arrays are not mutually consistent")

    def pairs(self) -> np.ndarray:
        """(n_matched, 2) array of (blue index, red index)."""
        blues = np.flatnonzero(self.blue_partner >= 0)
        return np.column_stack([blues, self.blue_partner[blues]])

    def n_matched(self) -> int:
        return int(np.count_nonzero(self.blue_partner >= 0))

    def distances(self, config: LineConfiguration) -> np.ndarray:
        """Per matched pair |red - blue|, aligned with pairs()."""
        p = self.pairs()
        return np.abs(config.red[p[:, 1]] - config.blue[p[:, 0]])


def _merge(config: LineConfiguration):
    # Interleave colors by coordinate: returns positions, colors (0 blue,
    # 1 red), and each merged slot's index within its own color.
    pos = np.concatenate([config.blue, config.red])
    color = np.concatenate([np.zeros(config.n_blue, dtype=np.int8),
                            np.ones(config.n_red, dtype=np.int8)])
    within = np.concatenate([np.arange(config.n_blue), np.arange(config.n_red)])
    order = np.argsort(pos, kind="stable")
    return pos[order], color[order], within[order]


def stable_match_line(config: LineConfiguration) -> LineMatching:
    """The stable matching: iterate matching the closest blue-red pair.

    The globally closest opposite-color pair is always adjacent among
    surviving points, so a heap of adjacent opposite-color neighbors
    with lazy deletion finds each step's pair in O(log n).  Exact ties
    (measure zero under sampling) break toward the leftmost blue, then
    the leftmost red.
    """
    pos, color, within = _merge(config)
    n = pos.size
    blue_partner = np.full(config.n_blue, -1, dtype=np.int64)
    red_partner = np.full(config.n_red, -1, dtype=np.int64)
    if n == 0:
        return LineMatching(blue_partner, red_partner)

    left = list(range(-1, n - 1))
    right = list(range(1, n + 1))
    alive = [True] * n
    pos_l = pos.tolist()
    color_l = color.tolist()

    def entry(i: int, j: int):
        if color_l[i] == 0:
            b, r = pos_l[i], pos_l[j]
        else:
            b, r = pos_l[j], pos_l[i]
        return (r - b if r > b else b - r, b, r, i, j)

    heap = [entry(i, i + 1) for i in range(n - 1) if color_l[i] != color_l[i + 1]]
    heapq.heapify(heap)

    while heap:
        _, _, _, i, j = heapq.heappop(heap)
        if not (alive[i] and alive[j]) or right[i] != j:
            continue
        if color_l[i] == 0:
            blue_partner[within[i]] = within[j]
            red_partner[within[j]] = within[i]
        else:
            blue_partner[within[j]] = within[i]
            red_partner[within[i]] = within[j]
        alive[i] = alive[j] = False
        l, r = left[i], right[j]
        if r < n:
            left[r] = l
        if l >= 0:
            right[l] = r
            if r < n and color_l[l] != color_l[r]:
                heapq.heappush(heap, entry(l, r))
    return LineMatching(blue_partner, red_partner)


def queue_match(config: LineConfiguration, direction: str = FORWARD) -> LineMatching:
    """Stack matching: sweep the window, stack unmatched blues, and let
    each red take the most recently stacked blue.  Blues still on the
    stack at the sweep's end stay unmatched (their pairing would fall
    outside the window).  direction picks the sweep orientation."""
    if direction not in (FORWARD, BACKWARD):
        raise ValueError(f"direction must be {FORWARD!r} or {BACKWARD!r}")
    pos, color, within = _merge(config)
    idx = range(pos.size) if direction == FORWARD else range(pos.size - 1, -1, -1)
    blue_partner = np.full(config.n_blue, -1, dtype=np.int64)
    red_partner = np.full(config.n_red, -1, dtype=np.int64)
    stack: list[int] = []
    for i in idx:
        if color[i] == 0:
            stack.append(i)
        elif stack:
            b = stack.pop()
            blue_partner[within[b]] = within[i]
            red_partner[within[i]] = within[b]
    return LineMatching(blue_partner, red_partner)


def is_nested(config: LineConfiguration, matching: LineMatching) -> bool:
    """No two matched intervals partially overlap (each pair of matched
    intervals is disjoint or contains one another)."""
    events: list[tuple[float, int, int]] = []
    for b, r in matching.pairs():
        lo, hi = sorted((config.blue[b], config.red[r]))
        events.append((lo, 0, b))
        events.append((hi, 1, b))
    events.sort()
    stack: list[int] = []
    for _, kind, ident in events:
        if kind == 0:
            stack.append(ident)
        else:
            if not stack or stack[-1] != ident:
                return False
            stack.pop()
    return True


def discrepancy(config: LineConfiguration, x: float, y: float) -> int:
    """#red minus #blue strictly between x and y."""
    if x > y:
        raise ValueError("need x <= y")
    reds = np.searchsorted(config.red, y, "left") - np.searchsorted(config.red, x, "right")
    blues = np.searchsorted(config.blue, y, "left") - np.searchsorted(config.blue, x, "right")
    return int(reds - blues)


# ---------------------------------------------------------------------------
# waves


@dataclass(frozen=True)
class Wave:
    """Points crossing one height edge, in coordinate order.

    A complete wave alternates red, blue, ..., red; incomplete waves are
    cut off by the window boundary.
    """

    level: int
    positions: np.ndarray
    colors: np.ndarray
    complete: bool

    @property
    def n_blue(self) -> int:
        return int(np.count_nonzero(self.colors == 0))

    @property
    def n_red(self) -> int:
        return int(np.count_nonzero(self.colors == 1))

    def gaps(self) -> np.ndarray:
        return np.diff(self.positions)

    def interior(self, margin: float, length: float) -> bool:
        return bool(self.positions[0] >= margin
                    and self.positions[-1] <= length - margin)


@dataclass(frozen=True)
class WaveSet:
    waves: tuple[Wave, ...]
    blue_level: np.ndarray
    red_level: np.ndarray

    def by_level(self, level: int) -> Wave:
        for w in self.waves:
            if w.level == level:
                return w
        raise KeyError(level)


def potential_waves(config: LineConfiguration) -> WaveSet:
    """Group points into waves by the height edge they cross.

    Height starts at 0 and steps +1 on red, -1 on blue; a red stepping
    v -> v+1 and a blue stepping v+1 -> v both belong to the wave at
    level v.  Crossings of a fixed edge alternate in time starting with
    a red, and end with a red iff the walk never returns below that
    edge, which is how completeness is decided.
    """
    pos, color, within = _merge(config)
    levels: dict[int, list[int]] = {}
    blue_level = np.zeros(config.n_blue, dtype=np.int64)
    red_level = np.zeros(config.n_red, dtype=np.int64)
    h = 0
    for i in range(pos.size):
        if color[i] == 1:
            lvl = h
            h += 1
            red_level[within[i]] = lvl
        else:
            h -= 1
            lvl = h
            blue_level[within[i]] = lvl
        levels.setdefault(lvl, []).append(i)

    waves = []
    for lvl in sorted(levels):
        idx = levels[lvl]
        cols = color[idx]
        complete = bool(cols[0] == 1 and cols[-1] == 1)
        waves.append(Wave(lvl, pos[idx].copy(), cols.copy(), complete))
    return WaveSet(tuple(waves), blue_level, red_level)


def interior_margin(lam: float, mu: float) -> float:
    """Window margin 20/(mu - lam) inside which wave and distance
    statistics are taken; the tail of a wave's extent decays on the
    1/(mu - lam) scale, so 20 of those lengths make boundary effects
    negligible."""
    if mu <= lam:
        raise ValueError("need lam < mu")
    return 20.0 / (mu - lam)


# ---------------------------------------------------------------------------
# busy-cycle distribution


def busy_cycle_pdf(lam: float, mu: float, t):
    """Density of the queue busy cycle at traffic rates (lam, mu):

        f(t) = exp(-(lam + mu) t) * I1(2 t sqrt(lam mu)) / (t sqrt(lam/mu))

    evaluated stably through the scaled Bessel function.  Requires
    0 < lam < mu and t > 0.
    """
    if not 0 < lam < mu:
        raise ValueError("need 0 < lam < mu")
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("busy cycle density is defined for t > 0 only")
    root = math.sqrt(lam * mu)
    decay = (math.sqrt(mu) - math.sqrt(lam)) ** 2
    vals = special.ive(1, 2.0 * t * root) * np.exp(-decay * t) / (t * math.sqrt(lam / mu))
    return vals if vals.ndim else float(vals)


def busy_cycle_mean(lam: float, mu: float) -> float:
    if not 0 < lam < mu:
        raise ValueError("need 0 < lam < mu")
    return 1.0 / (mu - lam)


def mean_distance_linear_bound(lam: float, mu: float) -> float:
    """Upper bound on the mean stable matching distance obtained by
    summing whole-wave extents: (1 + (mu+lam)/(mu-lam)) / (mu-lam)."""
    if not 0 < lam < mu:
        raise ValueError("need 0 < lam < mu")
    return (1.0 + (mu + lam) / (mu - lam)) / (mu - lam)


def mean_distance_log_bound(lam: float, mu: float) -> float:
    """Sharper upper bound on the mean stable matching distance using
    within-wave averaging: (1 + ln((mu+lam)/(mu-lam))) / (mu-lam)."""
    if not 0 < lam < mu:
        raise ValueError("need 0 < lam < mu")
    return (1.0 + math.log((mu + lam) / (mu - lam))) / (mu - lam)


def busy_cycle_cdf(lam: float, mu: float, grid_points: int = 400_001):
    """Numeric CDF as a vectorized callable, accurate to about 1e-6
    (limited by linear interpolation between grid nodes).

    Integrates the density on a fine grid to far past the decay scale;
    plenty for distribution tests, whose own resolution is far coarser.
    """
    if not 0 < lam < mu:
        raise ValueError("need 0 < lam < mu")
    decay = (math.sqrt(mu) - math.sqrt(lam)) ** 2
    t_max = 45.0 / decay
    ts = np.linspace(0.0, t_max, grid_points)
    f = np.empty_like(ts)
    f[0] = mu  # limit of the density at 0+
    f[1:] = busy_cycle_pdf(lam, mu, ts[1:])
    cdf = np.concatenate([[0.0], cumulative_simpson(f, x=ts)])
    cdf = np.minimum(cdf, 1.0)

    def F(x):
        return np.interp(x, ts, cdf, left=0.0, right=cdf[-1])

    return F


# ---------------------------------------------------------------------------
# experiment driver


BlueRecord = dict  # columns -> arrays; see _trial_tables

LINE_CSV_HEADER = ("trial", "waveId", "N_plus", "N_minus", "blueCoord", "X",
                   "matchedRedCoord", "matcher")


@dataclass(frozen=True)
class LineExperimentConfig:
    """Repeated sampling of one window with all three matchers."""

    lam: float
    mu: float
    window: float
    trials: int = 1
    seed: int = 0
    tail_grid: tuple[float, ...] = ()

    def __post_init__(self):
        if self.lam <= 0 or self.mu <= 0:
            raise ValueError("rates must be positive")
        if self.lam >= self.mu:
            raise ValueError(
                f"need lam < mu for a stable system, got lam={self.lam}, "
                f"mu={self.mu}")
        if self.window <= 0 or self.trials < 1:
            raise ValueError("window must be positive and trials >= 1")
        object.__setattr__(self, "tail_grid",
                           tuple(float(r) for r in self.tail_grid))


def _trial_tables(config: LineExperimentConfig, trial: int):
    rng = substream(config.seed, "line", trial)
    sample = sample_configuration(config.lam, config.mu, config.window, rng=rng)
    margin = interior_margin(config.lam, config.mu)
    lo, hi = margin, config.window - margin

    stable = stable_match_line(sample)
    fq = queue_match(sample, FORWARD)
    bq = queue_match(sample, BACKWARD)
    waves = potential_waves(sample)

    nb = sample.n_blue
    blue = {
        "trial": np.full(nb, trial, dtype=np.int64),
        "coord": sample.blue.copy(),
        "wave": waves.blue_level.copy(),
        "nplus": np.full(nb, -1, dtype=np.int64),
        "nminus": np.full(nb, -1, dtype=np.int64),
        "wave_complete": np.zeros(nb, dtype=bool),
        "wave_interior": np.zeros(nb, dtype=bool),
        "sand_lo": np.full(nb, np.nan),
        "sand_hi": np.full(nb, np.nan),
    }
    for name, matching in ((STABLE, stable), (FQ, fq), (BQ, bq)):
        x = np.full(nb, np.nan)
        red_coord = np.full(nb, np.nan)
        matched = np.flatnonzero(matching.blue_partner >= 0)
        red_coord[matched] = sample.red[matching.blue_partner[matched]]
        x[matched] = np.abs(red_coord[matched] - sample.blue[matched])
        blue[f"x_{name}"] = x
        blue[f"red_{name}"] = red_coord
    blue["red_stable_idx"] = stable.blue_partner.copy()

    wave_rows = {key: [] for key in
                 ("trial", "level", "n_blue", "n_red", "complete", "interior",
                  "start", "end")}
    wave_by_level = {}
    for w in waves.waves:
        wave_rows["trial"].append(trial)
        wave_rows["level"].append(w.level)
        wave_rows["n_blue"].append(w.n_blue)
        wave_rows["n_red"].append(w.n_red)
        wave_rows["complete"].append(w.complete)
        wave_rows["interior"].append(w.interior(margin, config.window))
        wave_rows["start"].append(float(w.positions[0]))
        wave_rows["end"].append(float(w.positions[-1]))
        wave_by_level[w.level] = w

    # Per-blue wave placement: ordinal among its wave's blues gives the
    # one-sided pattern counts and the within-wave sandwich bounds.
    by_level: dict[int, list[int]] = {}
    for b in range(nb):
        by_level.setdefault(int(waves.blue_level[b]), []).append(b)
    for lvl, blues_here in by_level.items():
        w = wave_by_level[lvl]
        if not w.complete:
            continue
        n_cls = len(blues_here)
        # blues_here is in coordinate order already (per-color index order)
        for j, b in enumerate(blues_here, start=1):
            blue["nminus"][b] = j
            blue["nplus"][b] = n_cls - j + 1
            pts = w.positions
            bpos = sample.blue[b]
            blue["sand_lo"][b] = min(pts[2 * j] - bpos, bpos - pts[2 * j - 2])
            blue["sand_hi"][b] = max(pts[-1] - bpos, bpos - pts[0])
        interior = w.interior(margin, config.window)
        for b in blues_here:
            blue["wave_complete"][b] = True
            blue["wave_interior"][b] = interior

    wave_arrays = {k: np.asarray(v) for k, v in wave_rows.items()}
    # Stable pair wave agreement, evaluated here where levels are handy.
    matched = np.flatnonzero(stable.blue_partner >= 0)
    same_wave = np.zeros(nb, dtype=bool)
    same_wave[matched] = (waves.red_level[stable.blue_partner[matched]]
                          == waves.blue_level[matched])
    blue["stable_same_wave"] = same_wave
    return blue, wave_arrays


def _concat_tables(parts: list[dict]) -> dict:
    if not parts:
        return {}
    return {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}


@dataclass
class LineStats:
    config: LineExperimentConfig
    blue: dict
    waves: dict
    tail_probabilities: dict[float, float]

    def interior_mask(self) -> np.ndarray:
        return self.blue["wave_interior"]

    def stable_samples(self) -> np.ndarray:
        """Stable matching distances of blues in complete interior waves."""
        m = self.interior_mask() & ~np.isnan(self.blue["x_stable"])
        return self.blue["x_stable"][m]

    def queue_samples(self, which: str = FQ) -> np.ndarray:
        """Matched queue distances away from the truncating boundary."""
        margin = interior_margin(self.config.lam, self.config.mu)
        if which == FQ:
            ok = self.blue["coord"] <= self.config.window - margin
        elif which == BQ:
            ok = self.blue["coord"] >= margin
        else:
            raise ValueError(f"which must be {FQ!r} or {BQ!r}")
        x = self.blue[f"x_{which}"]
        ok &= ~np.isnan(x)
        return x[ok]

    def class_sizes(self) -> np.ndarray:
        """Blue counts of complete interior waves with at least one blue."""
        m = (self.waves["complete"] & self.waves["interior"]
             & (self.waves["n_blue"] > 0))
        return self.waves["n_blue"][m]

    def summary_dict(self) -> dict:
        stable = self.stable_samples()
        fq = self.queue_samples(FQ)
        return {
            "lambda": self.config.lam,
            "mu": self.config.mu,
            "window": self.config.window,
            "trials": self.config.trials,
            "seed": self.config.seed,
            "nBlue": int(self.blue["coord"].size),
            "nWavesCompleteInterior": int(np.count_nonzero(
                self.waves["complete"] & self.waves["interior"])),
            "meanStableX": float(stable.mean()) if stable.size else None,
            "seStableX": (float(stable.std(ddof=1) / math.sqrt(stable.size))
                          if stable.size > 1 else None),
            "meanForwardQueueX": float(fq.mean()) if fq.size else None,
            "tailProbabilities": {str(r): p for r, p in
                                  self.tail_probabilities.items()},
        }

    def csv_rows(self):
        """One row per (blue, matcher) following LINE_CSV_HEADER."""
        b = self.blue
        for i in range(b["coord"].size):
            for name in (STABLE, FQ, BQ):
                x = b[f"x_{name}"][i]
                red = b[f"red_{name}"][i]
                yield (int(b["trial"][i]), int(b["wave"][i]),
                       int(b["nplus"][i]), int(b["nminus"][i]),
                       float(b["coord"][i]),
                       "" if math.isnan(x) else float(x),
                       "" if math.isnan(red) else float(red),
                       name)


def line_experiment(config: LineExperimentConfig, threads: int = 1) -> LineStats:
    """Sample, match, and decompose every trial; aggregate in trial
    order.  Trial t draws from the substream (seed, "line", t)."""
    trials = range(config.trials)
    if threads > 1:
        from concurrent.futures import ProcessPoolExecutor
        from functools import partial
        with ProcessPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(partial(_trial_tables, config), trials))
    else:
        parts = [_trial_tables(config, t) for t in trials]

    blue = _concat_tables([p[0] for p in parts])
    waves = _concat_tables([p[1] for p in parts])
    stats = LineStats(config, blue, waves, {})
    samples = stats.stable_samples()
    tails = {}
    for r in config.tail_grid:
        tails[r] = float(np.mean(samples > r)) if samples.size else math.nan
    stats.tail_probabilities = tails
    return stats
