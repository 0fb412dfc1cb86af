"""Greedy rule-graph selection.

Candidates are ranked once against the empty model (length reduction
descending, assertion count descending, candidate id descending), then
accepted greedily: repeated passes over the ranked atomic rules until a
full pass adds nothing, then the same over the ranked edges. A candidate
is accepted only if it strictly decreases the total description length.
Edges may pull in nodes that were not selected on their own; those enter
flagged time-only.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

from . import categories
from .mdl import CostLedger, model_explanation, temporal_scope
from .rules import (
    RuleGraph,
    cap_candidates,
    generate_candidate_rules,
    generate_chain_candidates,
    generate_triadic_candidates,
)

log = logging.getLogger(__name__)

ACCEPT_EPS = 1e-9


@dataclass
class BuildConfig:
    k: int = 3
    L: int = 10
    l_chain: Optional[int] = None
    max_edges: int = 50000
    min_support: Optional[int] = None
    max_combo_size: int = 3


@dataclass
class BuildResult:
    model: RuleGraph
    cf: object
    ledger: CostLedger
    config: BuildConfig
    trace: list = field(default_factory=list)
    empty_total: float = 0.0

    @property
    def baseline_negative_bits(self):
        return self.ledger.bits_negative

    def explained_proportion(self):
        return explained_proportion(self.model, self.ledger.store, self.cf)


def rank(cands, score):
    """Order candidates by (reduction desc, assertions desc, id desc)."""
    rows = []
    for c in cands:
        gain = score(c)
        n = c.assertion_count if hasattr(c, "assertion_count") else c.n_assert
        rows.append((-gain, -n, -c.cand_id, c))
    rows.sort(key=lambda r: r[:3])
    return [r[3] for r in rows]


def _missing_endpoints(edge, model, rule_cands):
    nodes = []
    keys = [edge.head, edge.tail] if edge.mid is None else [edge.head, edge.mid, edge.tail]
    for key in keys:
        if key in model.nodes:
            continue
        rule = rule_cands.get(key)
        if rule is None:
            raise KeyError("edge endpoint %r has no candidate rule" % (key,))
        if rule not in nodes:
            nodes.append(rule)
    return nodes


def select(ranked_rules, ranked_edges, rule_cands, ledger, trace=None, model=None):
    """Greedy acceptance into a RuleGraph; mutates the ledger.

    A caller may pass a pre-populated model (nodes already priced into
    the ledger) and run only the edge phase by leaving ranked_rules
    empty.
    """
    if model is None:
        model = RuleGraph()
    if trace is None:
        trace = []
    trace.append(ledger.total())

    changed = True
    while changed:
        changed = False
        for cand in ranked_rules:
            if cand.key in model.nodes:
                continue
            dm, da, dn = ledger.eval_rule(cand)
            if dn - dm - da > ACCEPT_EPS:
                cand.static_eligible = True
                model.add_node(cand)
                ledger.add_rule(cand)
                trace.append(ledger.total())
                changed = True

    changed = True
    while changed:
        changed = False
        for cand in ranked_edges:
            if cand.key in model.edges:
                continue
            extra = _missing_endpoints(cand, model, rule_cands)
            dm, da, dn = ledger.eval_edge(cand, extra)
            if dn - dm - da > ACCEPT_EPS:
                for rule in extra:
                    rule.static_eligible = False
                    model.add_node(rule)
                model.add_edge(cand)
                ledger.add_edge(cand, extra)
                trace.append(ledger.total())
                changed = True
    return model


def build_model(store, config: BuildConfig, cf=None) -> BuildResult:
    """Full offline pipeline: categories, candidates, ranking, selection."""
    if cf is None:
        cf = categories.induce(store, config.k, max_size=config.max_combo_size,
                              min_support=config.min_support)
    rule_cands = generate_candidate_rules(store, cf)
    chain = generate_chain_candidates(store, cf, l_chain=config.l_chain)
    triadic = generate_triadic_candidates(store, cf, config.L)
    edge_cands = dict(chain)
    edge_cands.update(triadic)
    edge_cands = cap_candidates(edge_cands, config.max_edges)
    scope = temporal_scope(store, triadic_cands=triadic, l_chain=config.l_chain)

    ledger = CostLedger(store, cf, scope=scope, l_chain=config.l_chain)
    empty_total = ledger.total()
    log.info("candidates: %d rules, %d chain, %d triadic (%d after cap)",
             len(rule_cands), len(chain), len(triadic), len(edge_cands))

    ranked_rules = rank(rule_cands.values(),
                        lambda c: _gain(ledger.eval_rule(c)))
    ranked_edges = rank(edge_cands.values(),
                        lambda c: _gain(ledger.eval_edge(c, _all_endpoints(c, rule_cands))))

    trace = []
    model = select(ranked_rules, ranked_edges, rule_cands, ledger, trace)
    log.info("selected %d nodes, %d edges; total %.1f bits (empty %.1f)",
             model.n_nodes, model.n_edges, ledger.total(), empty_total)
    return BuildResult(model, cf, ledger, config, trace, empty_total)


def _gain(parts):
    dm, da, dn = parts
    return dn - dm - da


def _all_endpoints(edge, rule_cands):
    keys = [edge.head, edge.tail] if edge.mid is None else [edge.head, edge.mid, edge.tail]
    out = []
    for key in keys:
        rule = rule_cands[key]
        if rule not in out:
            out.append(rule)
    return out


def explained_proportion(model, store, cf):
    """Fraction of facts both mapped into selected nodes and associated
    via selected edges."""
    if not store.facts:
        return 0.0
    mapped, assoc = model_explanation(model, store, cf)
    n = sum(1 for f in store.facts if mapped[f.key()] > 0 and assoc[f.key()] > 0)
    return n / len(store.facts)
