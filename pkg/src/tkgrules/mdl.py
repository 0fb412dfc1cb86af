"""Two-part description-length accounting for rule-graph models.

Bit costs, all logs base 2:

  model bits      upper-bound terms + sum of node costs + sum of edge
                  costs, edge frequencies taken against the current
                  model's edge multiset
  assertion bits  per-node entity-frequency codes and per-edge
                  fact-frequency codes over the materialized assertions
  negative bits   per-timestamp position encodings of what the model
                  leaves unexplained

The unexplained mass has two parts, mirroring the two explanation
levels: facts not mapped into any selected node (concept level), and
facts that have an earlier associable fact in the data but are not
covered by any selected edge (temporal level). Each part is encoded as
a draw of the residual positions out of the |E|^2*|R| universe. Keeping
the two parts separate is what lets greedy selection pay for nodes and
edges independently; a single conjunctive term would price one of the
two phases at zero savings.
"""

from __future__ import annotations

import bisect
import math
from collections import Counter, defaultdict

LOG2 = math.log(2.0)


def log_binomial(n, k):
    """log2 C(n, k) via log-gamma; exact enough for n in the 1e10 range."""
    if k < 0 or k > n:
        raise ValueError("need 0 <= k <= n, got n=%s k=%s" % (n, k))
    if k == 0 or k == n:
        return 0.0
    return (math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)) / LOG2


def _xlog2(c):
    return c * math.log2(c) if c > 0 else 0.0


class CostContext:
    """Global counts shared by the per-item cost functions."""

    def __init__(self, store, cf):
        self.store = store
        self.cf = cf

    @property
    def n_categories(self):
        return self.cf.n_categories

    @property
    def n_entities(self):
        return self.store.n_entities

    @property
    def n_relations(self):
        return self.store.n_relations

    @property
    def n_facts(self):
        return len(self.store.facts)

    def n_c(self, cid):
        return self.cf.cats[cid].n_c

    def universe(self):
        return self.n_entities * self.n_entities * self.n_relations

    def upper_bound_bits(self):
        cap = 2 * self.n_categories * self.n_categories * self.n_relations
        if cap <= 0:
            return 0.0
        return math.log2(cap) + log_binomial(cap, min(3, cap))


def cost_rule(rule, ctx, relation_term=False):
    """Node cost: category pointer plus entity-category frequency codes.

    The relation frequency term (plus one direction bit) is kept behind a
    switch; it is constant across model choices so selection ignores it.
    """
    ncs = ctx.n_c(rule.c_s)
    nco = ctx.n_c(rule.c_o)
    if ncs == 0 or nco == 0:
        raise ValueError("rule %r references an empty category" % (rule.key,))
    ne = ctx.n_entities
    bits = math.log2(ctx.n_categories) + (math.log2(ne) - math.log2(ncs)) \
        + (math.log2(ne) - math.log2(nco))
    if relation_term:
        n_r = sum(1 for f in ctx.store.facts if f.r == rule.r)
        bits += (math.log2(ctx.n_facts) - math.log2(n_r)) + 1.0
    return bits


def cost_edge(edge, slot_counts, n_edges):
    """Edge cost against a model edge multiset.

    slot_counts = (head_counter, mid_counter, tail_counter) keyed by node
    key; n_edges is the model's edge count including this edge.
    """
    if n_edges < 1:
        raise ValueError("edge cost needs a model with >= 1 edge")
    lg = math.log2(n_edges)
    cnt_h, cnt_m, cnt_t = slot_counts
    bits = lg + (lg - math.log2(cnt_h[edge.head])) + (lg - math.log2(cnt_t[edge.tail])) + 1.0
    if edge.mid is not None:
        bits += lg - math.log2(cnt_m[edge.mid])
    return bits


def node_assertion_bits(rule):
    """Sum of per-assertion entity-frequency codes for one node."""
    n = rule.assertion_count
    if n == 0:
        return 0.0
    total = 2.0 * n * math.log2(n)
    for c in rule.n_s.values():
        total -= _xlog2(c)
    for c in rule.n_o.values():
        total -= _xlog2(c)
    return total


def edge_assertion_bits(edge):
    """Sum of per-assertion fact-frequency codes for one edge."""
    n = edge.n_assert
    if n == 0:
        return 0.0
    slots = 3 if edge.mid is not None else 2
    total = slots * n * math.log2(n)
    for counter in (edge.cnt_head, edge.cnt_mid, edge.cnt_tail):
        for c in counter.values():
            total -= _xlog2(c)
    return total


def chain_scope(store, l_chain=None):
    """Facts with a strictly earlier fact on the same ordered pair.

    The window, when set, is measured to the closest strictly earlier
    timestamp; same-timestamp entries are not precursors.
    """
    scope = set()
    for (s, o), seq in store.seq.items():
        for i in range(1, len(seq)):
            t, r = seq[i]
            j = i - 1
            while j >= 0 and seq[j][0] == t:
                j -= 1
            if j < 0:
                continue
            if l_chain is not None and t - seq[j][0] > l_chain:
                continue
            scope.add((s, r, o, t))
    return scope


def temporal_scope(store, triadic_cands=None, l_chain=None):
    """Facts that could be temporally associated at all: chain precursors
    in the data, plus closing facts of enumerated triadic candidates."""
    scope = chain_scope(store, l_chain)
    if triadic_cands:
        for e in triadic_cands.values() if isinstance(triadic_cands, dict) else triadic_cands:
            scope.update(e.cnt_tail.keys())
    return scope


class CostLedger:
    """Incremental description-length state for greedy selection.

    Starts at the empty model over the store's horizon. Mutations
    (add_rule / add_edge / register_fact) keep the running bit totals and
    per-timestamp explained counts in sync; eval_* price a candidate
    without mutating.
    """

    def __init__(self, store, cf, scope=None, l_chain=None):
        self.store = store
        self.cf = cf
        self.ctx = CostContext(store, cf)
        self.l_chain = l_chain
        self.scope = set(scope) if scope is not None else chain_scope(store, l_chain)

        self.mapped_count = Counter()
        self.assoc_count = Counter()

        self.universe_t = {}
        self.all_t = Counter()
        self.scope_t = Counter()
        self.m1_t = Counter()
        self.m2_t = Counter()
        u = self.ctx.universe()
        for t, facts in store.by_t.items():
            self.all_t[t] = len(facts)
            self.universe_t[t] = u
        for f in self.scope:
            self.scope_t[f[3]] += 1

        self._t_bits = {}
        self.bits_negative = 0.0
        for t in self.all_t:
            b = self._timestamp_bits(t)
            self._t_bits[t] = b
            self.bits_negative += b

        self.bits_upper = self.ctx.upper_bound_bits()
        self.bits_nodes = 0.0
        self.bits_edges = 0.0
        self.bits_assertions = 0.0

        # edge multiset aggregates for the shared-frequency edge costs
        self.n_edges = 0
        self.n_triadic = 0
        self.cnt_h = Counter()
        self.cnt_m = Counter()
        self.cnt_t = Counter()
        self._h_ent = 0.0   # sum of c*log2(c) over slot counters

    # -- per-timestamp terms ------------------------------------------

    def _timestamp_bits(self, t):
        u = self.universe_t[t]
        m1, r1 = self.m1_t[t], self.all_t[t] - self.m1_t[t]
        m2, r2 = self.m2_t[t], self.scope_t[t] - self.m2_t[t]
        if r1 < 0 or r2 < 0:
            raise RuntimeError("negative residual at t=%d" % t)
        return log_binomial(u - m1, r1) + log_binomial(u - m2, r2)

    def _refresh_t(self, touched):
        delta = 0.0
        for t in touched:
            b = self._timestamp_bits(t)
            delta += b - self._t_bits.get(t, 0.0)
            self._t_bits[t] = b
        self.bits_negative += delta
        return delta

    # -- totals -------------------------------------------------------

    @property
    def bits_model(self):
        return self.bits_upper + self.bits_nodes + self.bits_edges

    def total(self):
        return self.bits_model + self.bits_assertions + self.bits_negative

    def breakdown(self):
        return {
            "model": self.bits_model,
            "assertions": self.bits_assertions,
            "negative": self.bits_negative,
            "total": self.total(),
        }

    def explained_pairs(self):
        """Per-timestamp (|A_t^m|, |A_t^-|) for the concept component."""
        return {t: (self.m1_t[t], self.all_t[t] - self.m1_t[t]) for t in sorted(self.all_t)}

    # -- candidate pricing --------------------------------------------

    def eval_rule(self, rule):
        """(delta_model, delta_assertions, negative_savings) for adding rule."""
        dm = cost_rule(rule, self.ctx)
        da = node_assertion_bits(rule)
        gains = Counter()
        for f in rule.facts:
            if self.mapped_count[f] == 0:
                gains[f[3]] += 1
        dn = 0.0
        for t, g in gains.items():
            u = self.universe_t.get(t)
            if u is None:
                continue
            m1, r1 = self.m1_t[t], self.all_t[t] - self.m1_t[t]
            old = log_binomial(u - m1, r1)
            new = log_binomial(u - m1 - g, r1 - g)
            dn += old - new
        return dm, da, dn

    def _edge_cost_sum(self, extra=None):
        """Sum of edge costs for the current multiset, optionally with one
        more edge, via the aggregate identity."""
        n = self.n_edges
        n_tri = self.n_triadic
        h_ent = self._h_ent
        if extra is not None:
            n += 1
            slots = [(self.cnt_h, extra.head)]
            if extra.mid is not None:
                n_tri += 1
                slots.append((self.cnt_m, extra.mid))
            slots.append((self.cnt_t, extra.tail))
            for counter, key in slots:
                c = counter[key]
                h_ent += _xlog2(c + 1) - _xlog2(c)
        if n == 0:
            return 0.0
        n_chain = n - n_tri
        return (3 * n_chain + 4 * n_tri) * math.log2(n) + n - h_ent

    def eval_edge(self, edge, new_nodes=()):
        """Price adding an edge plus any nodes it pulls in."""
        dm = self._edge_cost_sum(extra=edge) - self._edge_cost_sum()
        da = edge_assertion_bits(edge)
        gains1 = Counter()
        local = Counter()
        for rule in new_nodes:
            dm += cost_rule(rule, self.ctx)
            da += node_assertion_bits(rule)
            for f in rule.facts:
                if self.mapped_count[f] == 0 and local[f] == 0:
                    gains1[f[3]] += 1
                local[f] += 1
        gains2 = Counter()
        seen = set()
        for f in edge.cnt_tail:
            if f in seen:
                continue
            seen.add(f)
            if self.assoc_count[f] == 0 and f in self.scope:
                gains2[f[3]] += 1
        dn = 0.0
        touched = set(gains1) | set(gains2)
        for t in touched:
            u = self.universe_t.get(t)
            if u is None:
                continue
            m1, r1 = self.m1_t[t], self.all_t[t] - self.m1_t[t]
            m2, r2 = self.m2_t[t], self.scope_t[t] - self.m2_t[t]
            old = log_binomial(u - m1, r1) + log_binomial(u - m2, r2)
            g1, g2 = gains1[t], gains2[t]
            new = log_binomial(u - m1 - g1, r1 - g1) + log_binomial(u - m2 - g2, r2 - g2)
            dn += old - new
        return dm, da, dn

    # -- mutation -----------------------------------------------------

    def add_rule(self, rule):
        self.bits_nodes += cost_rule(rule, self.ctx)
        self.bits_assertions += node_assertion_bits(rule)
        touched = set()
        for f in rule.facts:
            if self.mapped_count[f] == 0:
                self.m1_t[f[3]] += 1
                touched.add(f[3])
            self.mapped_count[f] += 1
        self._refresh_t(touched)

    def add_edge(self, edge, new_nodes=()):
        for rule in new_nodes:
            self.add_rule(rule)
        self.bits_edges = self._edge_cost_sum(extra=edge)
        self.n_edges += 1
        if edge.mid is not None:
            self.n_triadic += 1
        for counter, key in ((self.cnt_h, edge.head), (self.cnt_t, edge.tail)):
            c = counter[key]
            self._h_ent += _xlog2(c + 1) - _xlog2(c)
            counter[key] = c + 1
        if edge.mid is not None:
            c = self.cnt_m[edge.mid]
            self._h_ent += _xlog2(c + 1) - _xlog2(c)
            self.cnt_m[edge.mid] = c + 1
        self.bits_assertions += edge_assertion_bits(edge)
        touched = set()
        for f in edge.cnt_tail:
            if f in self.scope and self.assoc_count[f] == 0:
                self.m2_t[f[3]] += 1
                touched.add(f[3])
            self.assoc_count[f] += 1
        self._refresh_t(touched)

    def ensure_scope(self, fact_key):
        """Re-test scope membership; appends can create precursors for
        facts that arrived out of order."""
        if fact_key in self.scope:
            return True
        s, r, o, t = fact_key
        seq = self.store.seq.get((s, o), [])
        i = bisect.bisect_left(seq, (t, -1))
        if i > 0:
            gap = t - seq[i - 1][0]
            if self.l_chain is None or gap <= self.l_chain:
                self.scope.add(fact_key)
                self.scope_t[t] += 1
                self._refresh_t({t})
                return True
        return False

    def mark_mapped(self, fact_key):
        """A registered fact gained a mapped node."""
        if self.mapped_count[fact_key] == 0:
            self.m1_t[fact_key[3]] += 1
            self._refresh_t({fact_key[3]})
        self.mapped_count[fact_key] += 1

    def mark_associated(self, fact_key):
        """A registered fact became the tail of a selected edge."""
        if not self.ensure_scope(fact_key):
            return
        if self.assoc_count[fact_key] == 0:
            self.m2_t[fact_key[3]] += 1
            self._refresh_t({fact_key[3]})
        self.assoc_count[fact_key] += 1

    def resync_model_bits(self, model):
        """Recount node and assertion bits after online mutation; entity
        and category growth shifts every static cost."""
        self.bits_upper = self.ctx.upper_bound_bits()
        self.bits_nodes = sum(cost_rule(r, self.ctx) for r in model.nodes.values())
        self.bits_assertions = (
            sum(node_assertion_bits(r) for r in model.nodes.values())
            + sum(edge_assertion_bits(e) for e in model.edges.values()))

    def register_fact(self, fact_key, mapped, associated):
        """Online append bookkeeping for one new fact.

        Scope membership uses the chain test only; triadic enumeration is
        an offline construct.
        """
        s, r, o, t = fact_key
        if t not in self.universe_t:
            self.universe_t[t] = self.ctx.universe()
            self._t_bits.setdefault(t, 0.0)
        self.all_t[t] += 1
        seq = self.store.seq.get((s, o), [])
        i = bisect.bisect_left(seq, (t, -1))
        in_scope = False
        if i > 0:
            gap = t - seq[i - 1][0]
            if self.l_chain is None or gap <= self.l_chain:
                in_scope = True
        if in_scope:
            self.scope.add(fact_key)
            self.scope_t[t] += 1
        if mapped:
            self.mapped_count[fact_key] += 1
            self.m1_t[t] += 1
        if associated and in_scope:
            self.assoc_count[fact_key] += 1
            self.m2_t[t] += 1
        self._refresh_t({t})


# -- from-scratch evaluation (slow paths, reports and tests) -----------

def model_explanation(model, store, cf):
    """(mapped_counts, assoc_counts) per fact key for a selected model."""
    from .rules import conceptualize
    mapped = Counter()
    for f in store.facts:
        hits = sum(1 for key in conceptualize(f, cf) if key in model.nodes)
        if hits:
            mapped[f.key()] = hits
    assoc = Counter()
    for e in model.edges.values():
        for f in e.cnt_tail:
            assoc[f] += 1
    return mapped, assoc


def cost_model(model, cf, store, relation_term=False):
    ctx = CostContext(store, cf)
    bits = ctx.upper_bound_bits()
    for rule in model.nodes.values():
        bits += cost_rule(rule, ctx, relation_term=relation_term)
    cnt_h, cnt_m, cnt_t = Counter(), Counter(), Counter()
    for e in model.edges.values():
        cnt_h[e.head] += 1
        cnt_t[e.tail] += 1
        if e.mid is not None:
            cnt_m[e.mid] += 1
    n = len(model.edges)
    for e in model.edges.values():
        bits += cost_edge(e, (cnt_h, cnt_m, cnt_t), n)
    return bits


def cost_assertions(model, store):
    bits = 0.0
    for rule in model.nodes.values():
        bits += node_assertion_bits(rule)
    for e in model.edges.values():
        bits += edge_assertion_bits(e)
    return bits


def cost_negative(model, store, cf, scope=None, horizon=None, l_chain=None):
    """Two-component negative bits for a selected model, from scratch."""
    if scope is None:
        scope = chain_scope(store, l_chain)
        for e in model.edges.values():
            if e.mid is not None:
                scope = scope | set(e.cnt_tail)
    mapped, assoc = model_explanation(model, store, cf)
    u = CostContext(store, cf).universe()
    ts = store.timestamps() if horizon is None else [t for t in store.timestamps() if t in horizon]
    scope_t = Counter(f[3] for f in scope)
    bits = 0.0
    for t in ts:
        facts = store.by_t[t]
        m1 = sum(1 for f in facts if mapped[f.key()] > 0)
        r1 = len(facts) - m1
        in_scope = [f for f in facts if f.key() in scope]
        m2 = sum(1 for f in in_scope if assoc[f.key()] > 0)
        r2 = len(in_scope) - m2
        bits += log_binomial(u - m1, r1) + log_binomial(u - m2, r2)
    return bits
