"""Category induction from relation combinations.

Entities are conceptualized by the sets of relations they interact with.
Frequent relation combinations (up to 3 relations) are mined PrefixSpan
style over per-entity relation sets, enriched by entity-based and
relation-based aggregation, then greedily selected by coverage until
every entity holds at least k categories where achievable.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field

log = logging.getLogger(__name__)

OVERLAP_THRESHOLD = 0.9
AGGREGATION_ROUND_CAP = 20


@dataclass
class Category:
    cid: int
    rels: frozenset
    ents: set
    # categories materialized after the offline build (updater path)
    online: bool = False

    @property
    def n_c(self):
        return len(self.ents)

    def rel_tuple(self):
        return tuple(sorted(self.rels))


def default_min_support(n_entities):
    return max(2, int(0.001 * n_entities))


def mine_frequent_combinations(store, max_size=3, min_support=None):
    """Frequent relation subsets over R(e), PrefixSpan projection style.

    Returns [(rels: frozenset, ents: frozenset)] sorted by support
    descending, ties by lexicographic relation tuple.
    """
    if min_support is None:
        min_support = default_min_support(store.n_entities)
    if min_support < 1:
        raise ValueError("min_support must be >= 1")
    db = {e: sorted(rs) for e, rs in store.rel_of.items()}
    found = []

    def grow(prefix, rows):
        # rows: (entity, resume position in its sorted relation list)
        proj = defaultdict(list)
        for e, i in rows:
            seq = db[e]
            for j in range(i, len(seq)):
                proj[seq[j]].append((e, j + 1))
        for item in sorted(proj):
            rows2 = proj[item]
            if len(rows2) < min_support:
                continue
            pat = prefix + (item,)
            found.append((frozenset(pat), frozenset(e for e, _ in rows2)))
            if len(pat) < max_size:
                grow(pat, rows2)

    grow((), [(e, 0) for e in sorted(db)])
    found.sort(key=lambda c: (-len(c[1]), tuple(sorted(c[0]))))
    return found


def _overlap(a, b):
    if not a or not b:
        return 0.0
    return len(a & b) / min(len(a), len(b))


def aggregate(combinations, threshold=OVERLAP_THRESHOLD, round_cap=AGGREGATION_ROUND_CAP):
    """Entity-based and relation-based aggregation, run to fixpoint.

    Entity overlap >= threshold adds (R_i | R_j, E_i & E_j); relation
    overlap >= threshold adds (R_m & R_n, E_m | E_n). Duplicate relation
    sets keep the larger entity set. Never removes a combination.
    """
    combos = {}
    for rels, ents in combinations:
        cur = combos.get(rels)
        if cur is None or len(ents) > len(cur):
            combos[rels] = frozenset(ents)

    for round_no in range(round_cap):
        items = sorted(combos.items(), key=lambda c: tuple(sorted(c[0])))
        added = {}

        def offer(rels, ents):
            if not rels or not ents:
                return
            cur = combos.get(rels)
            best = added.get(rels)
            if best is not None and len(best) >= len(ents):
                return
            if cur is not None and len(cur) >= len(ents):
                return
            added[rels] = frozenset(ents)

        # pair candidates via shared entities to avoid the full n^2 sweep
        by_ent = defaultdict(list)
        for idx, (rels, ents) in enumerate(items):
            for e in ents:
                by_ent[e].append(idx)
        pairs = set()
        for idxs in by_ent.values():
            for a in range(len(idxs)):
                for b in range(a + 1, len(idxs)):
                    pairs.add((idxs[a], idxs[b]))
        for a, b in sorted(pairs):
            ri, ei = items[a]
            rj, ej = items[b]
            if _overlap(ei, ej) >= threshold:
                offer(ri | rj, ei & ej)
        # relation-based pass: small relation sets, full sweep is fine
        for a in range(len(items)):
            ri, ei = items[a]
            for b in range(a + 1, len(items)):
                rj, ej = items[b]
                if _overlap(ri, rj) >= threshold:
                    offer(ri & rj, ei | ej)

        changed = False
        for rels, ents in added.items():
            cur = combos.get(rels)
            if cur is None or len(ents) > len(cur):
                combos[rels] = ents
                changed = True
        if not changed:
            break
    else:
        log.warning("aggregation did not reach fixpoint in %d rounds", round_cap)

    out = [(rels, ents) for rels, ents in combos.items()]
    out.sort(key=lambda c: (-len(c[1]), tuple(sorted(c[0]))))
    return out


class CategoryFunction:
    """Selected categories plus per-entity assignments C(e)."""

    def __init__(self, k):
        self.k = k
        self.cats: list[Category] = []
        self.of_ent: dict[int, list] = defaultdict(list)
        # frozen mined catalog for online category assignment
        self.catalog: list = []
        self._by_rels: dict[frozenset, int] = {}

    @property
    def n_categories(self):
        return len(self.cats)

    def add_category(self, rels, ents, online=False) -> Category:
        cid = len(self.cats)
        cat = Category(cid, frozenset(rels), set(ents), online=online)
        self.cats.append(cat)
        self._by_rels[cat.rels] = cid
        for e in sorted(cat.ents):
            self.of_ent[e].append(cid)
        return cat

    def category_id(self, rels):
        return self._by_rels.get(frozenset(rels))

    def of(self, e) -> tuple:
        """C(e): category ids for entity e, ascending; empty if unknown."""
        return tuple(self.of_ent.get(e, ()))

    def assign(self, e, cid):
        """Add entity e to an existing category (online growth)."""
        cat = self.cats[cid]
        if e not in cat.ents:
            cat.ents.add(e)
            ids = self.of_ent[e]
            if cid not in ids:
                ids.append(cid)
                ids.sort()

    def dump_lines(self):
        for cat in self.cats:
            yield "%d\t%s\t%d" % (cat.cid, ",".join(str(r) for r in cat.rel_tuple()), cat.n_c)


def select_categories(combinations, store, k) -> CategoryFunction:
    """Greedy coverage selection over aggregated combinations.

    Combinations are ranked by entity coverage descending and picked one
    by one while they still help some entity below k. Entities untouched
    by any combination get singleton fallback categories, one per
    relation they interact with.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    ranked = sorted(combinations, key=lambda c: (-len(c[1]), tuple(sorted(c[0]))))
    cf = CategoryFunction(k)
    cf.catalog = list(ranked)
    count = defaultdict(int)
    covered = set()
    for _, ents in ranked:
        covered |= ents
    needy = set(covered)
    for rels, ents in ranked:
        if not needy:
            break
        if any(count[e] < k for e in ents):
            cf.add_category(rels, ents)
            for e in ents:
                count[e] += 1
                if count[e] >= k:
                    needy.discard(e)

    uncovered = sorted(set(store.rel_of) - covered)
    fallback = defaultdict(set)
    for e in uncovered:
        for r in store.rel_of[e]:
            fallback[r].add(e)
    for r in sorted(fallback):
        cf.add_category(frozenset([r]), fallback[r])
    return cf


def induce(store, k, max_size=3, min_support=None) -> CategoryFunction:
    """Full induction pipeline: mine, aggregate, select."""
    mined = mine_frequent_combinations(store, max_size=max_size, min_support=min_support)
    enriched = aggregate(mined)
    return select_categories(enriched, store, k)
