"""Brute-force reference implementations used as test oracles.

Everything here recomputes from scratch with the most literal loops
possible: no incremental counters, no indexes, no shared code with the
package beyond reading plain attributes of its data objects. Slow on
purpose.
"""

import math
from collections import Counter

INF = math.inf


def ref_log_binomial(n, k):
    """Exact log2 C(n,k) through arbitrary-precision integers."""
    return math.log2(math.comb(int(n), int(k)))


# -- description length ------------------------------------------------

def _mapped_keys(fact_key, cf):
    s, r, o, t = fact_key
    return [(a, r, b) for a in cf.of(s) for b in cf.of(o)]


def ref_scope(store, l_chain=None, extra_tails=()):
    """Facts with a strictly earlier same-pair fact (closest gap within
    l_chain when set), plus any supplied triadic closing facts."""
    scope = set(extra_tails)
    facts = [f.key() for f in store.facts]
    for (s, r, o, t) in facts:
        earlier = [t2 for (s2, r2, o2, t2) in facts
                   if s2 == s and o2 == o and t2 < t]
        if not earlier:
            continue
        gap = t - max(earlier)
        if l_chain is not None and gap > l_chain:
            continue
        scope.add((s, r, o, t))
    return scope


def ref_total_bits(store, cf, model, l_chain=None, extra_tails=()):
    """From-scratch two-part description length of (model, store).

    Returns a dict with model/assertions/negative/total, matching the
    ledger's breakdown keys.
    """
    n_ent = store.n_entities
    n_rel = store.n_relations
    n_cat = cf.n_categories
    universe = n_ent * n_ent * n_rel

    cap = 2 * n_cat * n_cat * n_rel
    bits_model = 0.0
    if cap > 0:
        bits_model += math.log2(cap) + ref_log_binomial(cap, min(3, cap))
    for key in model.nodes:
        c_s, r, c_o = key
        n_cs = cf.cats[c_s].n_c
        n_co = cf.cats[c_o].n_c
        bits_model += (math.log2(n_cat)
                       + (math.log2(n_ent) - math.log2(n_cs))
                       + (math.log2(n_ent) - math.log2(n_co)))

    edges = list(model.edges.values())
    if edges:
        n_e = len(edges)
        cnt_h = Counter(e.head for e in edges)
        cnt_m = Counter(e.mid for e in edges if e.mid is not None)
        cnt_t = Counter(e.tail for e in edges)
        lg = math.log2(n_e)
        for e in edges:
            bits_model += lg + (lg - math.log2(cnt_h[e.head])) \
                + (lg - math.log2(cnt_t[e.tail])) + 1.0
            if e.mid is not None:
                bits_model += lg - math.log2(cnt_m[e.mid])

    bits_assert = 0.0
    for node in model.nodes.values():
        n = len(node.facts)
        if n == 0:
            continue
        subj = Counter(f[0] for f in node.facts)
        obj = Counter(f[2] for f in node.facts)
        for f in node.facts:
            bits_assert += (math.log2(n) - math.log2(subj[f[0]])) \
                + (math.log2(n) - math.log2(obj[f[2]]))
    for e in edges:
        n = e.n_assert
        if n == 0:
            continue
        for counter in (e.cnt_head, e.cnt_mid, e.cnt_tail):
            for fact, c in counter.items():
                bits_assert += c * (math.log2(n) - math.log2(c))

    mapped = set()
    for f in store.facts:
        if any(k in model.nodes for k in _mapped_keys(f.key(), cf)):
            mapped.add(f.key())
    assoc = set()
    for e in edges:
        assoc.update(e.cnt_tail.keys())
    scope = ref_scope(store, l_chain, extra_tails)

    bits_neg = 0.0
    by_t = {}
    for f in store.facts:
        by_t.setdefault(f.t, []).append(f.key())
    for t, keys in by_t.items():
        n_t = len(keys)
        m1 = sum(1 for k in keys if k in mapped)
        in_sc = [k for k in keys if k in scope]
        m2 = sum(1 for k in in_sc if k in assoc)
        bits_neg += ref_log_binomial(universe - m1, n_t - m1)
        bits_neg += ref_log_binomial(universe - m2, len(in_sc) - m2)

    return {
        "model": bits_model,
        "assertions": bits_assert,
        "negative": bits_neg,
        "total": bits_model + bits_assert + bits_neg,
    }


# -- detector scores ---------------------------------------------------

def ref_static(fact, model, cf):
    total = 0
    for key in _mapped_keys(fact.key(), cf):
        node = model.nodes.get(key)
        if node is not None and node.static_eligible:
            total += len(node.facts)
    return (1.0 / total) if total > 0 else INF


def _ref_theta(spans, gap, L, mode):
    close = sum(c for tau, c in spans.items() if abs(tau - gap) <= L)
    total = sum(spans.values())
    return close if mode == "literal" else total - close


def _ref_instantiate(store, cf, node_key, edge, query):
    """Mirror of the package's precursor choice rules, via full scans."""
    c_s, r, c_o = node_key
    facts = [f.key() for f in store.facts]
    if edge.kind == "chain":
        if c_s not in cf.of(query.s) or c_o not in cf.of(query.o):
            return None
        hits = [t for (s, r2, o, t) in facts
                if s == query.s and o == query.o and r2 == r and t < query.t]
        if not hits:
            return None
        t_hit = max(hits)
        return ((query.s, r, query.o, t_hit), query.t - t_hit)
    if node_key == edge.head:
        rows = [(t, o) for (s, r2, o, t) in facts
                if s == query.s and r2 == r and t < query.t and c_o in cf.of(o)]
        if not rows:
            return None
        t_hit = max(t for t, _ in rows)
        other = min(o for t, o in rows if t == t_hit)
        return ((query.s, r, other, t_hit), query.t - t_hit)
    if node_key == edge.mid:
        rows = [(t, o) for (s, r2, o, t) in facts
                if s == query.o and r2 == r and t < query.t and c_o in cf.of(o)]
        if not rows:
            return None
        t_hit = max(t for t, _ in rows)
        other = min(o for t, o in rows if t == t_hit)
        return ((query.o, r, other, t_hit), query.t - t_hit)
    return None


def ref_temporal(fact, model, store, cf, cfg):
    """Brute-force Eq. 10 walk; returns the score only."""
    mapped = [model.nodes[k] for k in _mapped_keys(fact.key(), cf)
              if k in model.nodes]

    def in_edges(key):
        return sorted((e for e in model.edges.values() if e.tail == key),
                      key=lambda e: e.key)

    def walk(node_key, edge, depth, numer):
        hit = _ref_instantiate(store, cf, node_key, edge, fact)
        if hit:
            theta = _ref_theta(edge.spans, hit[1], cfg.L, cfg.theta)
            return numer / (theta + 1.0)
        if depth >= cfg.K:
            return 0.0
        total = 0.0
        for e2 in in_edges(node_key):
            pres = (e2.head,) if e2.mid is None else (e2.head, e2.mid)
            for pre in pres:
                total += walk(pre, e2, depth + 1, numer)
        return total

    total = 0.0
    for v in mapped:
        numer = len(v.facts)
        for e in in_edges(v.key):
            pres = (e.head,) if e.mid is None else (e.head, e.mid)
            for pre in pres:
                total += walk(pre, e, 1, numer)

    n_out = 0
    if cfg.out_edge_extension:
        seen = set()
        for v in mapped:
            outs = [e for e in model.edges.values()
                    if e.head == v.key or e.mid == v.key]
            for e in sorted(outs, key=lambda e: e.key):
                if e.key in seen:
                    continue
                seen.add(e.key)
                if _chain_like_tail_hit(store, cf, e, fact):
                    n_out += 1
    if total <= 0.0:
        return INF
    return (1.0 + n_out) / total


def _chain_like_tail_hit(store, cf, edge, fact):
    """The out-edge check instantiates the edge tail backward in time."""
    c_s, r, c_o = edge.tail
    if edge.kind == "chain":
        if c_s not in cf.of(fact.s) or c_o not in cf.of(fact.o):
            return False
        return any(f.s == fact.s and f.o == fact.o and f.r == r and f.t < fact.t
                   for f in store.facts)
    # triadic tail: same slot logic as the package's instantiate
    if edge.head[0] in cf.of(fact.s):
        rows = [f for f in store.facts
                if f.s == fact.s and f.r == r and f.t < fact.t
                and c_o in cf.of(f.o)]
        if rows:
            return True
    rows = [f for f in store.facts
            if f.o == fact.s and f.r == r and f.t < fact.t
            and c_s in cf.of(f.s)]
    return bool(rows)


# -- metrics -----------------------------------------------------------

def ref_pr_curve(scores, labels):
    """(precision, recall) points sweeping thresholds high to low, tied
    scores grouped; naive quadratic recomputation at every cut."""
    order = sorted(set(scores), reverse=True)
    pos = sum(labels)
    points = []
    for cut in order:
        tp = sum(1 for s, y in zip(scores, labels) if s >= cut and y)
        fp = sum(1 for s, y in zip(scores, labels) if s >= cut and not y)
        if tp + fp == 0:
            continue
        prec = tp / (tp + fp)
        rec = tp / pos if pos else 0.0
        points.append((rec, prec))
    return points


def ref_pr_auc(scores, labels):
    points = ref_pr_curve(scores, labels)
    if not points:
        return 0.0
    anchored = [(0.0, points[0][1])] + points
    auc = 0.0
    for (r0, p0), (r1, p1) in zip(anchored, anchored[1:]):
        auc += (r1 - r0) * (p1 + p0) / 2.0
    return auc


def ref_fbeta(precision, recall, beta):
    if precision == 0.0 and recall == 0.0:
        return 0.0
    b2 = beta * beta
    return (1 + b2) * precision * recall / (b2 * precision + recall)


def ref_best_fbeta(scores, labels, beta):
    """Best achievable F_beta over all 'score > tau' splits."""
    pos = sum(labels)
    best = 0.0
    cuts = sorted(set(scores))
    for cut in cuts:
        tp = sum(1 for s, y in zip(scores, labels) if s > cut and y)
        fp = sum(1 for s, y in zip(scores, labels) if s > cut and not y)
        if tp + fp == 0:
            continue
        prec = tp / (tp + fp)
        rec = tp / pos if pos else 0.0
        best = max(best, ref_fbeta(prec, rec, beta))
    return best


# -- candidate enumerators (criterion: exact set equality) -------------

def ref_rule_candidates(store, cf):
    """key -> (sorted fact keys) for every conceptualized fact."""
    out = {}
    for f in store.facts:
        for a in cf.of(f.s):
            for b in cf.of(f.o):
                out.setdefault((a, f.r, b), []).append(f.key())
    return {k: sorted(v) for k, v in out.items()}


def ref_chain_candidates(store, cf, l_chain=None):
    """ekey -> dict(n_assert, spans, cnt_head, cnt_tail), brute force."""
    out = {}
    facts = [f.key() for f in store.facts]
    for f1 in facts:
        for f2 in facts:
            if f1[0] != f2[0] or f1[2] != f2[2]:
                continue
            if f2[3] <= f1[3]:
                continue
            span = f2[3] - f1[3]
            if l_chain is not None and span > l_chain:
                continue
            for a in cf.of(f1[0]):
                for b in cf.of(f1[2]):
                    ekey = ("chain", (a, f1[1], b), (), (a, f2[1], b))
                    rec = out.setdefault(ekey, {
                        "n_assert": 0, "spans": Counter(),
                        "cnt_head": Counter(), "cnt_mid": Counter(),
                        "cnt_tail": Counter()})
                    rec["n_assert"] += 1
                    rec["spans"][span] += 1
                    rec["cnt_head"][f1] += 1
                    rec["cnt_tail"][f2] += 1
    return out


def ref_triadic_candidates(store, cf, L):
    """Same shape as ref_chain_candidates for the triadic generator."""
    out = {}
    seen = {}
    facts = [f.key() for f in store.facts]
    anchors = sorted({f[3] for f in facts})
    for t in anchors:
        window = [f for f in facts if t - L <= f[3] <= t + L]
        for i1, f1 in enumerate(window):
            for i2, f2 in enumerate(window):
                if i1 == i2 or f1[2] != f2[2] or f1[0] == f2[0]:
                    continue
                closing = [f for f in facts
                           if f[0] == f1[0] and f[2] == f2[0] and f[3] >= t + L]
                if not closing:
                    continue
                tc = min(f[3] for f in closing)
                rc = min(f[1] for f in closing if f[3] == tc)
                fc = (f1[0], rc, f2[0], tc)
                for a in cf.of(f1[0]):
                    for b in cf.of(f1[2]):
                        for c in cf.of(f2[0]):
                            ekey = ("triadic", (a, f1[1], b), (c, f2[1], b),
                                    (a, rc, c))
                            trip = (f1, f2, fc)
                            if trip in seen.setdefault(ekey, set()):
                                continue
                            seen[ekey].add(trip)
                            rec = out.setdefault(ekey, {
                                "n_assert": 0, "spans": Counter(),
                                "cnt_head": Counter(), "cnt_mid": Counter(),
                                "cnt_tail": Counter()})
                            rec["n_assert"] += 1
                            rec["spans"][tc - f1[3]] += 1
                            rec["spans"][tc - f2[3]] += 1
                            rec["cnt_head"][f1] += 1
                            rec["cnt_mid"][f2] += 1
                            rec["cnt_tail"][fc] += 1
    return out
