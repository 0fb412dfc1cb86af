"""Fold accepted facts into the store, categories, and rule graph.

Single-writer: one session owns the mutable state. Readers score
against immutable snapshots published by snapshot_swap; the swap is the
only synchronization point. Category growth consults the combination
catalog frozen at build time, never re-mining. Online structure changes
pass the same description-length acceptance test as offline selection;
only chain associations are formed online.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

from .mdl import edge_assertion_bits, node_assertion_bits
from .rules import CHAIN, AtomicRule, RuleEdge, conceptualize
from .store import Fact
from .summarize import ACCEPT_EPS


@dataclass(frozen=True)
class Snapshot:
    model: object
    cf: object
    store: object
    version: int


@dataclass
class UpdaterSession:
    store: object
    cf: object
    model: object
    ledger: object
    L: int
    log: list = field(default_factory=list)
    version: int = 0
    _snap: Snapshot = None
    _dirty: bool = False

    @classmethod
    def from_build(cls, result, store):
        return cls(store=store, cf=result.cf, model=result.model,
                   ledger=result.ledger, L=result.config.L)

    def apply(self, s, r, o, t):
        """One accepted fact; returns this fact's edit log."""
        key = (s, r, o, t)
        if key in self.store:
            edits = [("noop", key)]
            self.log.append(edits)
            return edits
        edits = [("append", key)]
        new_rel = [e for e in dict.fromkeys((s, o))
                   if r not in self.store.rel_of.get(e, ())]
        fact = self.store.append(s, r, o, t)
        self.ledger.register_fact(key, mapped=False, associated=False)
        for e, pos in ((s, 0), (o, 2)):
            if e in new_rel:
                self._ensure_category(e, r, pos, edits)
                if s == o:
                    self._ensure_category(e, r, 2, edits)
        self._fold_rules(fact, edits)
        self._fold_chains(fact, edits)
        self.version += 1
        self._dirty = True
        self.log.append(edits)
        return edits

    # -- categories ---------------------------------------------------

    def _ensure_category(self, e, r, pos, edits):
        """Route e to the concepts the model consults for r in this slot.

        Selected nodes are the authority: an entity that debuts with a
        relation some rule covers must land in that rule's own category
        or the rule can never map its later facts. With no such node
        the best frozen-catalog combination containing r and overlapping
        R(e) stands in, and a singleton category is the last resort.
        """
        used = sorted({k[pos] for k in self.model.nodes if k[1] == r})
        if used:
            for cid in used:
                self.cf.assign(e, cid)
                edits.append(("category", e, cid))
            return
        rel_e = self.store.rel_of.get(e, set())
        chosen = None
        for rels, ents in self.cf.catalog:
            if r in rels and rels & rel_e:
                chosen = rels
                break
        if chosen is None:
            chosen = frozenset([r])
        cid = self.cf.category_id(chosen)
        if cid is None:
            cid = self.cf.add_category(chosen, (), online=True).cid
        self.cf.assign(e, cid)
        edits.append(("category", e, cid))

    # -- atomic rules -------------------------------------------------

    def _fold_rules(self, fact, edits):
        keys = conceptualize(fact, self.cf)
        novel = sorted(k for k in set(keys) if k not in self.model.nodes)
        if novel:
            rules = {k: AtomicRule(*k) for k in novel}
            for f in self.store.facts:
                if f.r != fact.r:
                    continue
                for k in conceptualize(f, self.cf):
                    rule = rules.get(k)
                    if rule is not None:
                        rule.facts.append(f.key())
                        rule.n_s[f.s] += 1
                        rule.n_o[f.o] += 1
            for k in novel:
                rule = rules[k]
                rule.facts.sort()
                dm, da, dn = self.ledger.eval_rule(rule)
                if dn - dm - da > ACCEPT_EPS:
                    self.model.add_node(rule)
                    self.ledger.add_rule(rule)
                    edits.append(("rule", k))
        for k in keys:
            node = self.model.nodes.get(k)
            if node is None:
                continue
            if fact.key() not in node.facts:
                b0 = node_assertion_bits(node)
                node.facts.append(fact.key())
                node.facts.sort()
                node.n_s[fact.s] += 1
                node.n_o[fact.o] += 1
                self.ledger.bits_assertions += node_assertion_bits(node) - b0
                self.ledger.mark_mapped(fact.key())
                edits.append(("assert", k))

    # -- chain edges --------------------------------------------------

    def _fold_chains(self, fact, edits):
        mapped = [n for n in self.model.mapped_nodes(fact, self.cf)]
        if not mapped:
            return
        window = self.L
        if self.ledger.l_chain is not None:
            window = min(window, self.ledger.l_chain)
        for t2, r2 in self.store.interaction_sequence(fact.s, fact.o):
            if t2 == fact.t:
                continue
            if abs(fact.t - t2) > window:
                continue
            other = Fact(fact.s, r2, fact.o, t2)
            for v2 in self.model.mapped_nodes(other, self.cf):
                for v in mapped:
                    if t2 < fact.t:
                        head, tail = v2, v
                        hf, tf = other, fact
                    else:
                        head, tail = v, v2
                        hf, tf = fact, other
                    span = tf.t - hf.t
                    self._add_assertion(head.key, tail.key, hf.key(), tf.key(),
                                        span, edits)

    def _add_assertion(self, hkey, tkey, hfact, tfact, span, edits):
        ekey = (CHAIN, hkey, (), tkey)
        edge = self.model.edges.get(ekey)
        if edge is not None:
            b0 = edge_assertion_bits(edge)
            edge.cnt_head[hfact] += 1
            edge.cnt_tail[tfact] += 1
            edge.spans[span] += 1
            edge.n_assert += 1
            self.ledger.bits_assertions += edge_assertion_bits(edge) - b0
            self.ledger.mark_associated(tfact)
            edits.append(("span", ekey, span))
            return
        cand = RuleEdge(CHAIN, hkey, tkey)
        cand.cnt_head[hfact] += 1
        cand.cnt_tail[tfact] += 1
        cand.spans[span] += 1
        cand.n_assert = 1
        self.ledger.ensure_scope(tfact)
        dm, da, dn = self.ledger.eval_edge(cand)
        if dn - dm - da > ACCEPT_EPS:
            self.model.add_edge(cand)
            self.ledger.add_edge(cand)
            edits.append(("edge", ekey, span))

    # -- snapshots ----------------------------------------------------

    def snapshot_swap(self) -> Snapshot:
        """Publish an immutable copy; unchanged state reuses the last one."""
        if self._snap is not None and not self._dirty:
            return self._snap
        self.ledger.resync_model_bits(self.model)
        self._snap = Snapshot(model=copy.deepcopy(self.model),
                              cf=copy.deepcopy(self.cf),
                              store=self.store,
                              version=self.version)
        self._dirty = False
        return self._snap
