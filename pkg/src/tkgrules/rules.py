"""Atomic rules, rule edges, candidate generation, and instantiation.

Atomic rules are category-level triples (c_s, r, c_o). Rule edges come in
two kinds: chain (two interactions between the same entity pair in order)
and triadic (two facts sharing an object followed by a closing fact
between their subjects). Candidates are enumerated exhaustively from the
store, with assertion sets materialized and occurrence timespans kept
per edge.
"""

from __future__ import annotations

import bisect
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Optional

CHAIN = "chain"
TRIADIC = "triadic"

DEFAULT_MAX_EDGE_CANDIDATES = 50000


@dataclass
class AtomicRule:
    c_s: int
    r: int
    c_o: int
    facts: list = field(default_factory=list)      # fact keys, sorted
    n_s: Counter = field(default_factory=Counter)  # subject entity counts
    n_o: Counter = field(default_factory=Counter)
    static_eligible: bool = True
    cand_id: int = -1

    @property
    def key(self):
        return (self.c_s, self.r, self.c_o)

    @property
    def assertion_count(self):
        return len(self.facts)


@dataclass
class RuleEdge:
    kind: str
    head: tuple
    tail: tuple
    mid: Optional[tuple] = None
    spans: Counter = field(default_factory=Counter)     # timespan multiset
    cnt_head: Counter = field(default_factory=Counter)  # fact key counts
    cnt_mid: Counter = field(default_factory=Counter)
    cnt_tail: Counter = field(default_factory=Counter)
    n_assert: int = 0
    cand_id: int = -1

    @property
    def key(self):
        return (self.kind, self.head, self.mid or (), self.tail)

    def span_list(self):
        out = []
        for v in sorted(self.spans):
            out.extend([v] * self.spans[v])
        return out


def conceptualize(fact, cf):
    """All (c_s, r, c_o) keys for a fact: cross product of its categories.

    Empty when either endpoint has no categories (new entity online).
    """
    cs = cf.of(fact.s)
    co = cf.of(fact.o)
    return tuple((a, fact.r, b) for a in cs for b in co)


def unknown_endpoints(fact, cf):
    """Endpoints with no categories; nonempty means a new-entity signal."""
    out = []
    if not cf.of(fact.s):
        out.append(fact.s)
    if not cf.of(fact.o) and fact.o != fact.s:
        out.append(fact.o)
    return out


def generate_candidate_rules(store, cf):
    """Candidate atomic rules over all facts, assertion sets materialized."""
    rules = {}
    for f in store.facts:
        for key in conceptualize(f, cf):
            rule = rules.get(key)
            if rule is None:
                rule = rules[key] = AtomicRule(*key)
            rule.facts.append(f.key())
            rule.n_s[f.s] += 1
            rule.n_o[f.o] += 1
    for i, key in enumerate(sorted(rules)):
        rules[key].cand_id = i
        rules[key].facts.sort()
    return rules


def _edge(cands, kind, head, tail, mid=None):
    key = (kind, head, mid or (), tail)
    e = cands.get(key)
    if e is None:
        e = cands[key] = RuleEdge(kind, head, tail, mid=mid)
    return e


def generate_chain_candidates(store, cf, l_chain=None):
    """Chain edges from every interaction sequence, all ordered pairs.

    For S(s,o) positions m < n with t_m < t_n the candidate (c_s, r_m,
    c_o) -> (c_s, r_n, c_o) gains the assertion (fact_m, fact_n) with
    timespan t_n - t_m; same-timestamp pairs are not precursors.
    l_chain, when set, drops pairs with a larger gap.
    """
    cands = {}
    for (s, o) in sorted(store.seq):
        seq = store.seq[(s, o)]
        if len(seq) < 2:
            continue
        pairs = [(a, b) for a in cf.of(s) for b in cf.of(o)]
        if not pairs:
            continue
        for m in range(len(seq) - 1):
            t_m, r_m = seq[m]
            for n in range(m + 1, len(seq)):
                t_n, r_n = seq[n]
                span = t_n - t_m
                if l_chain is not None and span > l_chain:
                    break
                if span == 0:
                    continue
                fm = (s, r_m, o, t_m)
                fn = (s, r_n, o, t_n)
                for a, b in pairs:
                    e = _edge(cands, CHAIN, (a, r_m, b), (a, r_n, b))
                    e.spans[span] += 1
                    e.cnt_head[fm] += 1
                    e.cnt_tail[fn] += 1
                    e.n_assert += 1
    _assign_edge_ids(cands)
    return cands


def generate_triadic_candidates(store, cf, L):
    """Triadic edges: co-occurring facts sharing an object, then a closure.

    For each anchor timestamp t, fact pairs (s,r_m,o), (h,r_n,o) with both
    times within L of t are joined with the earliest fact (s,r_p,h) at
    time >= t+L. Ties on the closing time break by lowest relation id,
    then lowest entity id. Assertions are deduplicated per edge.
    """
    if L <= 0:
        raise ValueError("L must be > 0")
    cands = {}
    seen = defaultdict(set)
    ts = store.timestamps()
    # facts grouped by object for windowed sweeps
    by_obj = defaultdict(list)
    for f in store.facts:
        by_obj[f.o].append((f.t, f.r, f.s))
    for o in by_obj:
        by_obj[o].sort()
    for t in ts:
        lo, hi = t - L, t + L
        for o in sorted(by_obj):
            rows = by_obj[o]
            i = bisect.bisect_left(rows, (lo,))
            j = bisect.bisect_right(rows, (hi, float("inf"), float("inf")))
            window = rows[i:j]
            if len(window) < 2:
                continue
            for x in range(len(window)):
                t1, r1, s1 = window[x]
                for y in range(len(window)):
                    if x == y:
                        continue
                    t2, r2, s2 = window[y]
                    if s1 == s2:
                        continue
                    close = _closing_fact(store, s1, s2, t + L)
                    if close is None:
                        continue
                    tc, rc = close
                    f1 = (s1, r1, o, t1)
                    f2 = (s2, r2, o, t2)
                    fc = (s1, rc, s2, tc)
                    for a in cf.of(s1):
                        for b in cf.of(o):
                            for c in cf.of(s2):
                                head = (a, r1, b)
                                mid = (c, r2, b)
                                tail = (a, rc, c)
                                ekey = (TRIADIC, head, mid, tail)
                                if (f1, f2, fc) in seen[ekey]:
                                    continue
                                seen[ekey].add((f1, f2, fc))
                                e = _edge(cands, TRIADIC, head, tail, mid=mid)
                                e.spans[tc - t1] += 1
                                e.spans[tc - t2] += 1
                                e.cnt_head[f1] += 1
                                e.cnt_mid[f2] += 1
                                e.cnt_tail[fc] += 1
                                e.n_assert += 1
    _assign_edge_ids(cands)
    return cands


def _closing_fact(store, s, h, t_min):
    """Earliest (s, r, h, t) with t >= t_min; ties by lowest relation id."""
    seq = store.seq.get((s, h))
    if not seq:
        return None
    i = bisect.bisect_left(seq, (t_min, -1))
    if i >= len(seq):
        return None
    tc = seq[i][0]
    best_r = seq[i][1]
    for k in range(i + 1, len(seq)):
        if seq[k][0] != tc:
            break
        if seq[k][1] < best_r:
            best_r = seq[k][1]
    return (tc, best_r)


def _assign_edge_ids(cands):
    for i, key in enumerate(sorted(cands)):
        cands[key].cand_id = i


def cap_candidates(cands, max_edges=DEFAULT_MAX_EDGE_CANDIDATES):
    """Keep the max_edges highest-support candidates (deterministic ties)."""
    if max_edges is None or len(cands) <= max_edges:
        return cands
    ranked = sorted(cands.values(), key=lambda e: (-e.n_assert, e.key))
    kept = ranked[:max_edges]
    return {e.key: e for e in kept}


class RuleGraph:
    """A selected model M*: nodes, edges, and adjacency."""

    def __init__(self):
        self.nodes: dict[tuple, AtomicRule] = {}
        self.edges: dict[tuple, RuleEdge] = {}
        self.in_adj: dict[tuple, list] = defaultdict(list)   # tail node -> edges
        self.out_adj: dict[tuple, list] = defaultdict(list)  # head/mid node -> edges

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_edges(self):
        return len(self.edges)

    def add_node(self, rule: AtomicRule):
        self.nodes[rule.key] = rule

    def add_edge(self, edge: RuleEdge):
        if edge.key in self.edges:
            return
        self.edges[edge.key] = edge
        self.in_adj[edge.tail].append(edge)
        self.out_adj[edge.head].append(edge)
        if edge.mid is not None:
            self.out_adj[edge.mid].append(edge)

    def in_edges(self, node_key):
        return self.in_adj.get(node_key, [])

    def out_edges(self, node_key):
        return self.out_adj.get(node_key, [])

    def mapped_nodes(self, fact, cf):
        """Selected nodes the fact conceptualizes into."""
        return [self.nodes[k] for k in conceptualize(fact, cf) if k in self.nodes]


# -- instantiation ----------------------------------------------------

def instantiate(store, cf, node_key, query, direction="in", edge=None, window=None):
    """Find a stored fact in node's assertions forming an occurring
    relationship with the query fact.

    direction "in" wants a strictly earlier fact, "out" a strictly later
    one. For triadic edges the entity binding follows the slot the target
    node occupies relative to the query. Returns (fact_key, gap) or None.
    window, when set, bounds the allowed gap.
    """
    c_s, r, c_o = node_key
    if edge is None or edge.kind == CHAIN:
        if c_s not in cf.of(query.s) or c_o not in cf.of(query.o):
            return None
        return _scan_pair(store, query.s, query.o, r, query.t, direction, window)
    # triadic: work out which slot the query maps and which slot we seek
    if node_key == edge.head:
        # head fact shares the query's subject; object is free
        return _scan_free_object(store, cf, query.s, r, c_o, query.t, direction, window)
    if node_key == edge.mid:
        # mid fact's subject is the query's object (the closing target)
        return _scan_free_object(store, cf, query.o, r, c_o, query.t, direction, window)
    if node_key == edge.tail:
        # query maps head or mid; the closing fact touches the query subject
        if edge.head is not None and edge.head[0] in cf.of(query.s):
            hit = _scan_free_object(store, cf, query.s, r, c_o, query.t, direction, window)
            if hit:
                return hit
        return _scan_free_subject(store, cf, query.s, r, c_s, query.t, direction, window)
    return None


def _scan_pair(store, s, o, r, t, direction, window):
    seq = store.seq.get((s, o))
    if not seq:
        return None
    if direction == "in":
        i = bisect.bisect_left(seq, (t, -1))
        rng = range(i - 1, -1, -1)
    else:
        i = bisect.bisect_right(seq, (t, float("inf")))
        rng = range(i, len(seq))
    for k in rng:
        tk, rk = seq[k]
        if rk != r:
            continue
        gap = abs(t - tk)
        if window is not None and gap > window:
            return None
        return ((s, r, o, tk), gap)
    return None


def _scan_free_object(store, cf, s, r, c_o, t, direction, window):
    rows = store.out_index.get((s, r))
    return _scan_rows(rows, cf, c_o, t, direction, window, subject=s, rel=r, obj_side=True)


def _scan_free_subject(store, cf, o, r, c_s, t, direction, window):
    rows = store.in_index.get((o, r))
    return _scan_rows(rows, cf, c_s, t, direction, window, subject=o, rel=r, obj_side=False)


def _scan_rows(rows, cf, cat, t, direction, window, subject, rel, obj_side):
    if not rows:
        return None
    if direction == "in":
        start = bisect.bisect_left(rows, (t, -1)) - 1
        step, stop = -1, -1
    else:
        start = bisect.bisect_right(rows, (t, float("inf")))
        step, stop = 1, len(rows)
    hit_t = None
    best_other = None
    k = start
    while k != stop:
        tk, other = rows[k]
        if hit_t is not None and tk != hit_t:
            break
        gap = abs(t - tk)
        if window is not None and gap > window:
            break
        if cat in cf.of(other):
            # nearest timestamp wins; within it, the lowest entity id
            if hit_t is None:
                hit_t, best_other = tk, other
            elif other < best_other:
                best_other = other
        k += step
    if hit_t is None:
        return None
    if obj_side:
        return ((subject, rel, best_other, hit_t), abs(t - hit_t))
    return ((best_other, rel, subject, hit_t), abs(t - hit_t))
