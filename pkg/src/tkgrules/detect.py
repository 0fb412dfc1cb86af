"""Online scoring of new facts against a rule-graph model.

Static score: inverse of the assertion mass of the static-eligible
nodes the fact maps into; nothing mapped means a sentinel score and a
conceptual verdict. Temporal score: inverse of the evidence gathered by
a depth-first walk over in-edges, where an instantiable precursor
contributes assertion mass discounted by the timespan mismatch count
and a failed precursor recurses into its own in-neighbors up to K hops.
Instantiable out-edges found in earlier knowledge count against the
fact (the expected successor already happened).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from statistics import median_low
from typing import Optional

from .rules import CHAIN, instantiate
from .store import Fact

SENTINEL = math.inf

VALID = "valid"
CONCEPTUAL = "conceptual"
TIME = "time"
MISSING = "missing-candidate"


@dataclass
class ScoringConfig:
    K: int = 2
    L: int = 10
    lam: float = 1.0
    out_edge_extension: bool = True
    theta: str = "mismatch"   # or "literal"

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.L <= 0:
            raise ValueError("L must be > 0")
        if self.theta not in ("mismatch", "literal"):
            raise ValueError("theta must be mismatch or literal")


@dataclass
class Verdict:
    fact: Fact
    static_score: float
    temporal_score: float
    static_sum: int = 0
    n_mapped: int = 0
    anomaly_class: str = VALID
    evidence: list = field(default_factory=list)       # (node, fact, gap, hop)
    out_evidence: list = field(default_factory=list)   # (node, fact, gap)
    failed: list = field(default_factory=list)         # (node, edge) at hop 1
    prompts: list = field(default_factory=list)
    new_entities: list = field(default_factory=list)
    in_store: bool = False


def theta_count(spans, gap, cfg):
    """Timespan disagreement (default) or agreement (literal) count."""
    close = 0
    total = 0
    for tau, c in spans.items():
        total += c
        if abs(tau - gap) <= cfg.L:
            close += c
    return close if cfg.theta == "literal" else total - close


def static_score(fact, model, cf):
    """(score, evidence mass): inverse assertion mass of mapped nodes."""
    total = 0
    for node in model.mapped_nodes(fact, cf):
        if node.static_eligible:
            total += node.assertion_count
    return (1.0 / total if total > 0 else SENTINEL), total


def _precursors(edge):
    if edge.kind == CHAIN:
        return (edge.head,)
    return (edge.head, edge.mid)


def temporal_score(fact, model, store, cf, cfg):
    """(score, evidence, out_evidence, failed_hop1)."""
    mapped = model.mapped_nodes(fact, cf)
    evidence = []
    failed = []
    total = 0.0
    for v in mapped:
        numer = v.assertion_count
        for edge in sorted(model.in_edges(v.key), key=lambda e: e.key):
            for pre in _precursors(edge):
                total += _walk(pre, edge, fact, 1, numer, model, store, cf, cfg,
                               evidence, failed)
    n_out = 0
    out_evidence = []
    if cfg.out_edge_extension:
        seen = set()
        for v in mapped:
            for edge in sorted(model.out_edges(v.key), key=lambda e: e.key):
                if edge.key in seen:
                    continue
                seen.add(edge.key)
                hit = instantiate(store, cf, edge.tail, fact, direction="in", edge=edge)
                if hit:
                    n_out += 1
                    out_evidence.append((edge.tail, hit[0], hit[1]))
    if total <= 0.0:
        return SENTINEL, evidence, out_evidence, failed
    return (1.0 + n_out) / total, evidence, out_evidence, failed


def _walk(node_key, edge, fact, depth, numer, model, store, cf, cfg, evidence, failed):
    hit = instantiate(store, cf, node_key, fact, direction="in", edge=edge)
    if hit:
        fkey, gap = hit
        theta = theta_count(edge.spans, gap, cfg)
        evidence.append((node_key, fkey, gap, depth))
        return numer / (theta + 1.0)
    if depth == 1:
        failed.append((node_key, edge))
    if depth >= cfg.K:
        return 0.0
    total = 0.0
    for edge2 in sorted(model.in_edges(node_key), key=lambda e: e.key):
        for pre in _precursors(edge2):
            total += _walk(pre, edge2, fact, depth + 1, numer, model, store, cf, cfg,
                           evidence, failed)
    return total


def score_fact(fact, model, store, cf, cfg) -> Verdict:
    """Full scoring of one fact against an immutable snapshot."""
    from .rules import unknown_endpoints
    s, tmp_s = static_score(fact, model, cf)
    v = Verdict(fact, s, SENTINEL, static_sum=tmp_s,
                n_mapped=len(model.mapped_nodes(fact, cf)))
    v.new_entities = unknown_endpoints(fact, cf)
    v.in_store = fact.key() in store
    if tmp_s < cfg.lam:
        return v
    t, ev, out_ev, failed = temporal_score(fact, model, store, cf, cfg)
    v.temporal_score = t
    v.evidence = ev
    v.out_evidence = out_ev
    v.failed = failed
    return v


def classify(verdict, tau_s, tau_t, candidate=False) -> str:
    """Threshold cascade; sentinel scores always clear their threshold.

    `candidate` marks facts under test for missingness (absent tuples
    proposed as queries); a stream arrival that scores low on both
    channels is simply valid.
    """
    if verdict.static_score > tau_s:
        cls = CONCEPTUAL
    elif verdict.temporal_score > tau_t:
        cls = TIME
    elif candidate and not verdict.in_store:
        cls = MISSING
    else:
        cls = VALID
    verdict.anomaly_class = cls
    return cls


def score_batch(facts, model, store, cf, cfg, threads=1):
    """Score many facts; chunked threads, results in submission order."""
    if threads <= 1 or len(facts) < 2:
        return [score_fact(f, model, store, cf, cfg) for f in facts]
    chunk = max(1, (len(facts) + threads - 1) // threads)
    parts = [facts[i:i + chunk] for i in range(0, len(facts), chunk)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        done = pool.map(lambda part: [score_fact(f, model, store, cf, cfg) for f in part], parts)
        out = []
        for part in done:
            out.extend(part)
    return out


def propose_missing(verdict, model, store, cf, cfg, tau_s, tau_t):
    """Ground hop-1 failed chain precursors with the query's entities.

    The candidate time backs off the query time by the edge's median
    preserved timespan. Candidates already stored are excluded; the rest
    are scored (out-edge extension off) and kept when both scores pass.
    """
    fact = verdict.fact
    cands = []
    seen = set()
    quiet = ScoringConfig(K=cfg.K, L=cfg.L, lam=cfg.lam,
                          out_edge_extension=False, theta=cfg.theta)
    for node_key, edge in verdict.failed:
        if edge.kind != CHAIN:
            continue
        c_s, r, c_o = node_key
        if c_s not in cf.of(fact.s) or c_o not in cf.of(fact.o):
            continue
        span = median_low(edge.span_list()) if edge.spans else 0
        t_est = max(0, fact.t - span)
        key = (fact.s, r, fact.o, t_est)
        if key in seen or key in store:
            continue
        seen.add(key)
        cand = Fact(*key)
        cv = score_fact(cand, model, store, cf, quiet)
        if cv.static_score <= tau_s and cv.temporal_score <= tau_t:
            cv.anomaly_class = MISSING
            cands.append(cv)
    return cands


# -- prompts ----------------------------------------------------------

def _render_cat(cf, store, cid):
    rels = sorted(store.relations[r] for r in cf.cats[cid].rels)
    return "{%s}" % ",".join(rels)


def correcting_prompts(verdict, model, store, cf):
    """Human-readable hints for anomalous facts."""
    fact = verdict.fact
    cls = verdict.anomaly_class
    if cls == VALID:
        return []
    out = []
    if cls == CONCEPTUAL:
        rel = store.relations[fact.r]
        obj_cats = set()
        rel_alts = set()
        for (c_s, r, c_o), node in sorted(model.nodes.items()):
            if not node.static_eligible:
                continue
            if r == fact.r and c_s in cf.of(fact.s):
                obj_cats.add(c_o)
            if c_s in cf.of(fact.s) and c_o in cf.of(fact.o):
                rel_alts.add(r)
        for c_o in sorted(obj_cats):
            out.append("relation %s from subject expects object category %s"
                       % (rel, _render_cat(cf, store, c_o)))
        for r in sorted(rel_alts):
            out.append("subject and object categories support relation %s"
                       % store.relations[r])
    elif cls in (TIME, MISSING):
        for node_key, fkey, gap, hop in verdict.evidence:
            spans = _span_range(model, node_key)
            out.append("precursor %s observed %d steps back (hop %d)%s"
                       % (_render_node(cf, store, node_key), gap, hop, spans))
        for node_key, fkey, gap in verdict.out_evidence:
            out.append("expected successor %s already occurred %d steps earlier"
                       % (_render_node(cf, store, node_key), gap))
    return out


def _render_node(cf, store, node_key):
    c_s, r, c_o = node_key
    return "(%s, %s, %s)" % (_render_cat(cf, store, c_s), store.relations[r],
                             _render_cat(cf, store, c_o))


def _span_range(model, node_key):
    spans = []
    for e in model.in_edges(node_key) + model.out_edges(node_key):
        spans.extend(e.spans)
    if not spans:
        return ""
    return ", preserved spans %d..%d" % (min(spans), max(spans))
