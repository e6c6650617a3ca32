"""Two-sided stable matching with possibly truncated preference lists.

Conventions used throughout:

* Sides are the strings "man" and "woman"; agents are (side, index) pairs.
* A preference list is a tuple of opposite-side indices, most preferred
  first.  Lists may be truncated: an agent prefers staying unmatched to
  being paired with anyone absent from its list.
* A matching pairs some men with some women; a pair is only ever formed
  between mutually listed agents by the constructors in this module, but
  externally supplied matchings are re-validated before use.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional

import numpy as np

from .errors import MalformedMatchingError, SizeCapError

MAN = "man"
WOMAN = "woman"
SIDES = (MAN, WOMAN)

ENUMERATION_CAP = 8


class Agent(NamedTuple):
    side: str
    index: int


def _as_pref_tuple(prefs, n_opposite: int, label: str) -> tuple[tuple[int, ...], ...]:
    out = []
    for i, lst in enumerate(prefs):
        row = tuple(int(x) for x in lst)
        if len(set(row)) != len(row):
            raise ValueError(f"{label}[{i}] repeats an entry")
        for x in row:
            if not 0 <= x < n_opposite:
                raise ValueError(f"{label}[{i}] lists out-of-range index {x}")
        out.append(row)
    return tuple(out)


@dataclass(frozen=True)
class MatchingInstance:
    """Preference lists for both sides of a two-sided market."""

    men_prefs: tuple[tuple[int, ...], ...]
    women_prefs: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "men_prefs",
                           _as_pref_tuple(self.men_prefs, len(self.women_prefs), "men_prefs"))
        object.__setattr__(self, "women_prefs",
                           _as_pref_tuple(self.women_prefs, len(self.men_prefs), "women_prefs"))

    @property
    def n_men(self) -> int:
        return len(self.men_prefs)

    @property
    def n_women(self) -> int:
        return len(self.women_prefs)

    def prefs_of(self, agent: Agent) -> tuple[int, ...]:
        if agent.side == MAN:
            return self.men_prefs[agent.index]
        return self.women_prefs[agent.index]

    def to_dict(self) -> dict:
        return {
            "nMen": self.n_men,
            "nWomen": self.n_women,
            "menPrefs": [list(p) for p in self.men_prefs],
            "womenPrefs": [list(p) for p in self.women_prefs],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "MatchingInstance":
        try:
            n_men = int(obj["nMen"])
            n_women = int(obj["nWomen"])
            men = obj["menPrefs"]
            women = obj["womenPrefs"]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"instance object missing field: {exc}") from exc
        if len(men) != n_men or len(women) != n_women:
            raise ValueError("nMen/nWomen do not match preference list counts")
        return cls(tuple(tuple(p) for p in men), tuple(tuple(p) for p in women))


@dataclass(frozen=True)
class Matching:
    """An injective pairing between men and women.

    Partner arrays use None for unmatched agents and are kept mutually
    consistent by construction.
    """

    man_to_woman: tuple[Optional[int], ...]
    woman_to_man: tuple[Optional[int], ...] = field(compare=False)

    @classmethod
    def from_man_partners(cls, partners: Iterable[Optional[int]], n_women: int) -> "Matching":
        m2w = tuple(None if w is None else int(w) for w in partners)
        w2m: list[Optional[int]] = [None] * n_women
        for m, w in enumerate(m2w):
            if w is None:
                continue
            if not 0 <= w < n_women:
                raise MalformedMatchingError(f"woman index {w} out of range")
            if w2m[w] is not None:
                raise MalformedMatchingError(f"woman {w} paired with two men")
            w2m[w] = m
        return cls(m2w, tuple(w2m))

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, int]], n_men: int, n_women: int) -> "Matching":
        m2w: list[Optional[int]] = [None] * n_men
        for m, w in pairs:
            if not 0 <= m < n_men:
                raise MalformedMatchingError(f"man index {m} out of range")
            if m2w[m] is not None:
                raise MalformedMatchingError(f"man {m} paired with two women")
            m2w[m] = w
        return cls.from_man_partners(m2w, n_women)

    def __hash__(self):
        return hash(self.man_to_woman)

    @property
    def n_men(self) -> int:
        return len(self.man_to_woman)

    @property
    def n_women(self) -> int:
        return len(self.woman_to_man)

    def pairs(self) -> tuple[tuple[int, int], ...]:
        return tuple((m, w) for m, w in enumerate(self.man_to_woman) if w is not None)

    def partner_of(self, agent: Agent) -> Optional[Agent]:
        if agent.side == MAN:
            w = self.man_to_woman[agent.index]
            return None if w is None else Agent(WOMAN, w)
        m = self.woman_to_man[agent.index]
        return None if m is None else Agent(MAN, m)


def unmatched_agents(matching: Matching) -> set[Agent]:
    """All agents, on either side, left single by the matching."""
    out = {Agent(MAN, m) for m, w in enumerate(matching.man_to_woman) if w is None}
    out |= {Agent(WOMAN, w) for w, m in enumerate(matching.woman_to_man) if m is None}
    return out


def _rank_rows(prefs: tuple[tuple[int, ...], ...], n_opposite: int) -> list[list[int]]:
    # rank[a][b] = position of b in a's list; ABSENT (= n_opposite + 1) when
    # unlisted, which sorts worse than being unmatched (= list length <= n).
    absent = n_opposite + 1
    rows = []
    for lst in prefs:
        row = [absent] * n_opposite
        for pos, b in enumerate(lst):
            row[b] = pos
        rows.append(row)
    return rows


def _check_shape(instance: MatchingInstance, matching: Matching) -> None:
    if matching.n_men != instance.n_men or matching.n_women != instance.n_women:
        raise MalformedMatchingError(
            f"matching is {matching.n_men}x{matching.n_women}, "
            f"instance is {instance.n_men}x{instance.n_women}")


def _propose_march(prop_prefs, rank: list[list[int]], absent: int) -> list[Optional[int]]:
    # Core proposal loop shared by deferred_acceptance and the array fast
    # path in the hypercube experiments.  Returns receiver -> proposer.
    n_prop = len(prop_prefs)
    n_recv = len(rank)
    held: list[Optional[int]] = [None] * n_recv
    next_idx = [0] * n_prop
    free = list(range(n_prop - 1, -1, -1))

    while free:
        p = free.pop()
        prefs = prop_prefs[p]
        i = next_idx[p]
        n_list = len(prefs)
        while i < n_list:
            r = prefs[i]
            i += 1
            row = rank[r]
            pr = row[p]
            if pr == absent:
                continue
            cur = held[r]
            if cur is None:
                held[r] = p
                break
            if pr < row[cur]:
                held[r] = p
                free.append(cur)
                break
        next_idx[p] = i
    return held


def deferred_acceptance(instance: MatchingInstance, proposing_side: str = MAN) -> Matching:
    """Proposer-optimal stable matching via deferred acceptance.

    Proposers walk down their lists; receivers hold the best mutually
    acceptable proposal seen so far.  With truncated lists a proposer who
    exhausts its list stays unmatched.
    """
    if proposing_side not in SIDES:
        raise ValueError(f"proposing_side must be one of {SIDES}")
    if proposing_side == MAN:
        prop_prefs, recv_prefs = instance.men_prefs, instance.women_prefs
    else:
        prop_prefs, recv_prefs = instance.women_prefs, instance.men_prefs
    n_prop = len(prop_prefs)
    held = _propose_march(prop_prefs, _rank_rows(recv_prefs, n_prop), n_prop + 1)

    if proposing_side == MAN:
        return Matching.from_man_partners(
            _invert_partner_list(held, n_prop), len(recv_prefs))
    return Matching.from_man_partners(held, n_prop)


def _invert_partner_list(held: list[Optional[int]], n_other: int) -> list[Optional[int]]:
    inv: list[Optional[int]] = [None] * n_other
    for r, p in enumerate(held):
        if p is not None:
            inv[p] = r
    return inv


def find_blocking_pairs(instance: MatchingInstance, matching: Matching) -> list[tuple[int, int]]:
    """All (man, woman) pairs who mutually prefer each other to their lot.

    A pair blocks when each lists the other and ranks the other above its
    current partner; an unlisted or missing partner loses to every listed
    alternative.  Returned sorted by (man, woman).
    """
    _check_shape(instance, matching)
    n_men = instance.n_men
    wrank = _rank_rows(instance.women_prefs, n_men)
    absent = n_men + 1
    out = []
    for m in range(n_men):
        cur = matching.man_to_woman[m]
        for w in instance.men_prefs[m]:
            if w == cur:
                break
            row = wrank[w]
            pm = row[m]
            if pm == absent:
                continue
            cur_w = matching.woman_to_man[w]
            if cur_w is None or pm < row[cur_w]:
                out.append((m, w))
    return out


def is_stable(instance: MatchingInstance, matching: Matching) -> bool:
    """Individually rational and free of blocking pairs."""
    _check_shape(instance, matching)
    mrank = _rank_rows(instance.men_prefs, instance.n_women)
    wrank = _rank_rows(instance.women_prefs, instance.n_men)
    for m, w in matching.pairs():
        if mrank[m][w] > instance.n_women or wrank[w][m] > instance.n_men:
            return False
    return not find_blocking_pairs(instance, matching)


def enumerate_stable_matchings(instance: MatchingInstance) -> list[Matching]:
    """Every stable matching, by exhaustive search with pruning.

    Hard-capped at 8 agents per side; the search assigns men in index
    order, pruning branches as soon as an already-placed pair blocks.
    Output is sorted lexicographically by the men's partner vector.
    """
    nm, nw = instance.n_men, instance.n_women
    if nm > ENUMERATION_CAP or nw > ENUMERATION_CAP:
        raise SizeCapError(
            f"exhaustive enumeration capped at {ENUMERATION_CAP} per side, "
            f"got {nm}x{nw}")
    mrank = _rank_rows(instance.men_prefs, nw)
    wrank = _rank_rows(instance.women_prefs, nm)
    m_absent, w_absent = nw + 1, nm + 1
    mutual = [
        tuple(w for w in instance.men_prefs[m] if wrank[w][m] != w_absent)
        for m in range(nm)
    ]

    results: list[Matching] = []
    assign: list[Optional[int]] = [None] * nm
    used = [False] * nw

    def blocked_by_placed(m: int, w: Optional[int]) -> bool:
        # Check the candidate pair (m, w) against men already placed.
        rank_w = m_absent if w is None else mrank[m][w]
        for j in range(m):
            wj = assign[j]
            if wj is not None:
                # (m, wj) blocks: m prefers wj to w, wj prefers m to j.
                if mrank[m][wj] < rank_w and wrank[wj][m] < wrank[wj][j]:
                    return True
                # (j, w) blocks: j prefers w to wj, w prefers j to m.
                if w is not None and mrank[j][w] < mrank[j][wj] \
                        and wrank[w][j] < wrank[w][m]:
                    return True
            else:
                # j is single, so any mutually listed woman he likes blocks
                # if she prefers him to her assigned partner.
                if w is not None and mrank[j][w] <= nw \
                        and wrank[w][j] < wrank[w][m]:
                    return True
        return False

    def place(m: int) -> None:
        if m == nm:
            cand = Matching.from_man_partners(assign, nw)
            # Pruning only sees earlier men; a full check closes the gap
            # (single men vs women matched later, and single women).
            if not find_blocking_pairs(instance, cand):
                results.append(cand)
            return
        if not blocked_by_placed(m, None):
            place(m + 1)
        for w in mutual[m]:
            if used[w] or blocked_by_placed(m, w):
                continue
            assign[m] = w
            used[w] = True
            place(m + 1)
            assign[m] = None
            used[w] = False

    place(0)
    key = lambda mt: tuple(nw if w is None else w for w in mt.man_to_woman)
    results.sort(key=key)
    return results


def stable_partners_all(instance: MatchingInstance) -> dict[Agent, frozenset[Agent]]:
    """Stable-partner set of every agent, via breakmarriage sweeps.

    One man-proposing run fixes the base matching; then, for each matched
    woman in turn, her marriage is broken and the displaced man resumes
    proposing down his list.  Each proposal the woman accepts during her
    sweep is one more stable partner (successively better for her), and
    the sweep ends when a proposer runs out of list or would propose to a
    woman single in the base matching.  Men's sets are the transpose of
    the women's.  Agents single in the base matching are single in every
    stable matching and get the empty set.
    """
    nm, nw = instance.n_men, instance.n_women
    base = deferred_acceptance(instance, MAN)
    wrank = _rank_rows(instance.women_prefs, nm)
    absent = nm + 1

    # Proposal pointers as they stand at the end of the base run: each man
    # has proposed to everyone up to and including his base partner.
    base_next = [0] * nm
    mrank = _rank_rows(instance.men_prefs, nw)
    for m in range(nm):
        w = base.man_to_woman[m]
        base_next[m] = len(instance.men_prefs[m]) if w is None else mrank[m][w] + 1

    women_sets: list[set[int]] = [set() for _ in range(nw)]
    for w0 in range(nw):
        u = base.woman_to_man[w0]
        if u is None:
            continue
        women_sets[w0].add(u)
        held = list(base.woman_to_man)
        next_idx = base_next.copy()
        held[w0] = None
        benchmark = u      # w0 only accepts men she ranks above this one
        free = u
        while True:
            prefs = instance.men_prefs[free]
            i = next_idx[free]
            if i >= len(prefs):
                break
            w2 = prefs[i]
            next_idx[free] = i + 1
            row = wrank[w2]
            pf = row[free]
            if pf == absent:
                continue
            # A woman single in the base matching is single in every
            # stable matching; she would accept, ending the chain in an
            # unstable state, so the sweep can stop here.  (If she does
            # not list him it is a plain rejection, handled above.)
            if base.woman_to_man[w2] is None:
                break
            if w2 == w0:
                if pf < row[benchmark]:
                    women_sets[w0].add(free)
                    benchmark = free
                continue
            cur = held[w2]
            if pf < row[cur]:
                held[w2] = free
                free = cur

    out: dict[Agent, frozenset[Agent]] = {}
    men_sets: list[set[int]] = [set() for _ in range(nm)]
    for w, ms in enumerate(women_sets):
        for m in ms:
            men_sets[m].add(w)
    for m in range(nm):
        out[Agent(MAN, m)] = frozenset(Agent(WOMAN, w) for w in men_sets[m])
    for w in range(nw):
        out[Agent(WOMAN, w)] = frozenset(Agent(MAN, m) for m in women_sets[w])
    return out


def multiple_partner_flags(instance: MatchingInstance) -> tuple[list[bool], list[bool]]:
    """Per-agent flags: does this agent have more than one stable partner?

    Uses the lattice extremes: an agent's partners in the man-optimal and
    woman-optimal matchings coincide exactly when its stable partner is
    unique, so two deferred-acceptance runs decide the flag for everyone.
    Cheaper than a full breakmarriage sweep and exact regardless of size.
    """
    man_opt = deferred_acceptance(instance, MAN)
    woman_opt = deferred_acceptance(instance, WOMAN)
    men = [man_opt.man_to_woman[m] != woman_opt.man_to_woman[m]
           for m in range(instance.n_men)]
    women = [man_opt.woman_to_man[w] != woman_opt.woman_to_man[w]
             for w in range(instance.n_women)]
    return men, women


def random_instance(rng: np.random.Generator, n_men: int, n_women: Optional[int] = None,
                    truncated: bool = False) -> MatchingInstance:
    """Instance with i.i.d. uniform preference lists.

    With truncated=True each list is cut at an independent uniform length
    (possibly zero); otherwise lists are complete.
    """
    if n_women is None:
        n_women = n_men

    def side(n_agents: int, n_opposite: int) -> tuple[tuple[int, ...], ...]:
        lists = []
        for _ in range(n_agents):
            perm = rng.permutation(n_opposite)
            if truncated:
                perm = perm[: int(rng.integers(0, n_opposite + 1))]
            lists.append(tuple(int(x) for x in perm))
        return tuple(lists)

    return MatchingInstance(side(n_men, n_women), side(n_women, n_men))
