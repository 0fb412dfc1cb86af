"""Rule graphs over facts with time durations.

A duration fact (s, r, o, t_start, t_end) serves either end of an edge,
so four graphs cover the combinations: both sides on start times
(ST_ST), both on end times (ED_ED), and the two mixed clocks (ST_ED:
heads on start, tails on end; ED_ST: the reverse). Atomic rules carry
no time and are shared: the node set selected on the start-start build
is forced into the other three, whose edge phases then run on their own
candidates. Static scores come from the start-start graph; temporal
scores average the four, and a sentinel in any one dominates the mean.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import categories
from .detect import SENTINEL, static_score, temporal_score
from .mdl import CostLedger, temporal_scope
from .rules import (
    CHAIN,
    RuleEdge,
    RuleGraph,
    cap_candidates,
    generate_candidate_rules,
    generate_chain_candidates,
    generate_triadic_candidates,
)
from .store import Fact, TkgStore
from .summarize import BuildConfig, _all_endpoints, _gain, rank, select

GRAPHS = ("ST_ST", "ED_ED", "ST_ED", "ED_ST")

# per graph: (head clock, tail clock) as DurationFact attribute names
_CLOCKS = {
    "ST_ST": ("t_start", "t_start"),
    "ED_ED": ("t_end", "t_end"),
    "ST_ED": ("t_start", "t_end"),
    "ED_ST": ("t_end", "t_start"),
}


def _project(dstore, attr):
    keys = [(f.s, f.r, f.o, getattr(f, attr)) for f in dstore.duration_rows]
    return TkgStore.from_facts(keys, dstore.entities, dstore.relations, dstore.t_raw)


@dataclass
class DurationGraph:
    name: str
    model: RuleGraph
    head_store: TkgStore   # precursor lookups run on the head clock
    tail_store: TkgStore   # fact arrival and association on the tail clock

    def query_time(self, dfact):
        return getattr(dfact, _CLOCKS[self.name][1])


@dataclass
class DurationAdapter:
    cf: object
    graphs: dict
    config: BuildConfig

    @property
    def static_model(self):
        return self.graphs["ST_ST"].model

    def score(self, dfact, cfg):
        """(static, mean temporal, per-graph temporal scores)."""
        g0 = self.graphs["ST_ST"]
        q0 = Fact(dfact.s, dfact.r, dfact.o, dfact.t_start)
        s, tmp_s = static_score(q0, g0.model, self.cf)
        per = {}
        if tmp_s < cfg.lam:
            for name in GRAPHS:
                per[name] = SENTINEL
            return s, SENTINEL, per
        for name in GRAPHS:
            g = self.graphs[name]
            q = Fact(dfact.s, dfact.r, dfact.o, g.query_time(dfact))
            t, _, _, _ = temporal_score(q, g.model, g.head_store, self.cf, cfg)
            per[name] = t
        mean = sum(per.values()) / len(per)
        return s, mean, per

    def missing_ok(self, per_graph, tau_t):
        """Missing candidates must sit low in all four graphs."""
        return all(v <= tau_t for v in per_graph.values())


def _mixed_chain_candidates(dstore, cf, head_attr, tail_attr, l_chain=None):
    """Chain edges where head and tail facts run on different clocks.

    Same entity pair, head clock strictly before tail clock; both
    directions of every row pair are examined since overlapping
    durations can order either way.
    """
    by_pair = {}
    for f in dstore.duration_rows:
        by_pair.setdefault((f.s, f.o), []).append(f)
    cands = {}
    seen = {}
    for pair in sorted(by_pair):
        rows = by_pair[pair]
        cs_co = [(a, b) for a in cf.of(pair[0]) for b in cf.of(pair[1])]
        if not cs_co:
            continue
        for a in rows:
            th = getattr(a, head_attr)
            hkey = (a.s, a.r, a.o, th)
            for b in rows:
                if b is a:
                    continue
                tt = getattr(b, tail_attr)
                span = tt - th
                if span <= 0:
                    continue
                if l_chain is not None and span > l_chain:
                    continue
                tkey = (b.s, b.r, b.o, tt)
                for c_s, c_o in cs_co:
                    ekey = (CHAIN, (c_s, a.r, c_o), (), (c_s, b.r, c_o))
                    got = seen.setdefault(ekey, set())
                    if (hkey, tkey) in got:
                        continue
                    got.add((hkey, tkey))
                    e = cands.get(ekey)
                    if e is None:
                        e = cands[ekey] = RuleEdge(CHAIN, ekey[1], ekey[3])
                    e.cnt_head[hkey] += 1
                    e.cnt_tail[tkey] += 1
                    e.spans[span] += 1
                    e.n_assert += 1
    _assign_ids(cands)
    return cands


def _mixed_scope(dstore, head_attr, tail_attr, l_chain=None):
    """Tail-clock keys of facts with a head-clock precursor on their pair.

    The precursor must be a different row; closest-first walk so the
    l_chain cutoff tests the nearest gap.
    """
    by_pair = {}
    for f in dstore.duration_rows:
        by_pair.setdefault((f.s, f.o), []).append(f)
    scope = set()
    for pair, rows in by_pair.items():
        heads = sorted((getattr(f, head_attr), i) for i, f in enumerate(rows))
        for j, f in enumerate(rows):
            tt = getattr(f, tail_attr)
            p = len(heads) - 1
            while p >= 0 and heads[p][0] >= tt:
                p -= 1
            while p >= 0:
                th, i = heads[p]
                if l_chain is not None and tt - th > l_chain:
                    break
                if i != j:
                    scope.add((f.s, f.r, f.o, tt))
                    break
                p -= 1
    return scope


def _assign_ids(cands):
    for i, key in enumerate(sorted(cands)):
        cands[key].cand_id = i


def build_four(dstore, config: BuildConfig) -> DurationAdapter:
    if not getattr(dstore, "duration_rows", None):
        raise ValueError("store has no duration facts")
    stores = {attr: _project(dstore, attr) for attr in ("t_start", "t_end")}
    cf = categories.induce(stores["t_start"], config.k,
                           max_size=config.max_combo_size,
                           min_support=config.min_support)

    graphs = {}
    shared = None
    for name in GRAPHS:
        head_attr, tail_attr = _CLOCKS[name]
        head_store = stores[head_attr]
        tail_store = stores[tail_attr]
        rule_cands = generate_candidate_rules(tail_store, cf)
        if head_attr == tail_attr:
            chain = generate_chain_candidates(tail_store, cf, l_chain=config.l_chain)
            triadic = generate_triadic_candidates(tail_store, cf, config.L)
            edge_cands = dict(chain)
            edge_cands.update(triadic)
            scope = temporal_scope(tail_store, triadic_cands=triadic,
                                   l_chain=config.l_chain)
        else:
            edge_cands = _mixed_chain_candidates(dstore, cf, head_attr, tail_attr,
                                                 l_chain=config.l_chain)
            scope = _mixed_scope(dstore, head_attr, tail_attr, config.l_chain)
        edge_cands = cap_candidates(edge_cands, config.max_edges)
        ledger = CostLedger(tail_store, cf, scope=scope, l_chain=config.l_chain)

        model = RuleGraph()
        if name == "ST_ST":
            ranked_rules = rank(rule_cands.values(),
                                lambda c: _gain(ledger.eval_rule(c)))
        else:
            ranked_rules = []
            for key in shared:
                rule = rule_cands.get(key)
                if rule is None:
                    continue
                rule.static_eligible = True
                model.add_node(rule)
                ledger.add_rule(rule)
        ranked_edges = rank(edge_cands.values(),
                            lambda c: _gain(ledger.eval_edge(c, _all_endpoints(c, rule_cands))))
        model = select(ranked_rules, ranked_edges, rule_cands, ledger, model=model)
        if name == "ST_ST":
            shared = sorted(k for k, n in model.nodes.items() if n.static_eligible)
        graphs[name] = DurationGraph(name, model, head_store, tail_store)
    return DurationAdapter(cf=cf, graphs=graphs, config=config)
