"""Rule-graph model files.

One tab-delimited text file holds the category function, the selected
nodes, the selected edges with their timespan multisets, and the
negative-bits baseline for the drift monitor. Node assertion sets are
not written; the loader rebuilds them by scanning the accompanying
store, which must be the one the model was built on (the entity and
relation tables are echoed into the file and checked). Edge assertion
multisets are only needed for description-length accounting, so plain
loads leave them empty and `reconstruct_ledger` regenerates them on
demand. Duration models repeat the node and edge sections once per
graph under G markers. Serialization iterates in sorted order
throughout, so equal models produce byte-identical files.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Optional

from .categories import CategoryFunction
from .rules import AtomicRule, RuleEdge, RuleGraph, conceptualize
from .summarize import BuildConfig

MAGIC = "RG1"


@dataclass
class LoadedModel:
    model: Optional[RuleGraph]
    cf: CategoryFunction
    config: BuildConfig
    baseline_bits: Optional[float] = None
    duration: bool = False
    graphs: dict = None   # name -> DurationGraph in duration mode


def _cat_lines(cf):
    out = []
    for cat in cf.cats:
        out.append("C\t%d\t%s\t%s\t%d" % (
            cat.cid,
            ",".join(str(r) for r in cat.rel_tuple()),
            ",".join(str(e) for e in sorted(cat.ents)),
            1 if cat.online else 0))
    return out


def _cat_hash(cat_lines):
    h = hashlib.sha256("\n".join(cat_lines).encode("utf-8"))
    return h.hexdigest()[:12]


def _fmt_key(key):
    return ",".join(str(x) for x in key)


def _parse_key(text):
    a, b, c = text.split(",")
    return (int(a), int(b), int(c))


def _fmt_spans(spans):
    return ";".join("%d:%d" % (v, spans[v]) for v in sorted(spans))


def _parse_spans(text):
    out = {}
    if text:
        for part in text.split(";"):
            v, c = part.split(":")
            out[int(v)] = int(c)
    return out


def _graph_lines(model):
    out = []
    for key in sorted(model.nodes):
        node = model.nodes[key]
        out.append("V\t%s\t%d" % (_fmt_key(key), 1 if node.static_eligible else 0))
    chain = sorted(k for k in model.edges if model.edges[k].mid is None)
    triadic = sorted(k for k in model.edges if model.edges[k].mid is not None)
    for k in chain:
        e = model.edges[k]
        out.append("EC\t%s\t%s\t%s" % (_fmt_key(e.head), _fmt_key(e.tail),
                                       _fmt_spans(e.spans)))
    for k in triadic:
        e = model.edges[k]
        out.append("ET\t%s\t%s\t%s\t%s" % (_fmt_key(e.head), _fmt_key(e.mid),
                                           _fmt_key(e.tail), _fmt_spans(e.spans)))
    return out


def dump(store, cf, config, model=None, graphs=None, baseline_bits=None):
    """Serialize to a list of lines; pass `graphs` for duration mode."""
    if (model is None) == (graphs is None):
        raise ValueError("exactly one of model/graphs must be given")
    cat_lines = _cat_lines(cf)
    lines = ["%s\tduration=%d\tcat_hash=%s" % (MAGIC, 0 if model is not None else 1,
                                               _cat_hash(cat_lines))]
    lines.append("CFG\tk=%d\tL=%d\tl_chain=%s\tmax_edges=%d\tmin_support=%s\tmax_combo_size=%d"
                 % (config.k, config.L,
                    "-" if config.l_chain is None else config.l_chain,
                    config.max_edges,
                    "-" if config.min_support is None else config.min_support,
                    config.max_combo_size))
    if baseline_bits is not None:
        lines.append("N\t%.17g" % baseline_bits)
    for label in store.entities:
        lines.append("E\t%s" % label)
    for label in store.relations:
        lines.append("R\t%s" % label)
    lines.extend(cat_lines)
    for rels, ents in cf.catalog:
        lines.append("K\t%s\t%s" % (",".join(str(r) for r in sorted(rels)),
                                    ",".join(str(e) for e in sorted(ents))))
    if model is not None:
        lines.extend(_graph_lines(model))
    else:
        for name in sorted(graphs):
            lines.append("G\t%s" % name)
            lines.extend(_graph_lines(graphs[name].model))
    return lines


def save(path, store, cf, config, model=None, graphs=None, baseline_bits=None):
    lines = dump(store, cf, config, model=model, graphs=graphs,
                 baseline_bits=baseline_bits)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_cfg(parts):
    vals = {}
    for part in parts:
        k, _, v = part.partition("=")
        vals[k] = v

    def opt(v):
        return None if v == "-" else int(v)

    return BuildConfig(k=int(vals["k"]), L=int(vals["L"]),
                       l_chain=opt(vals["l_chain"]),
                       max_edges=int(vals["max_edges"]),
                       min_support=opt(vals["min_support"]),
                       max_combo_size=int(vals["max_combo_size"]))


def load(path, store):
    """Parse a model file and rebuild assertion sets from `store`.

    Plain models take the store they were built on (or that store plus
    later appends). Duration models take the duration store; the four
    projections are derived here.
    """
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or not lines[0].startswith(MAGIC + "\t"):
        raise ValueError("not a model file: missing %s header" % MAGIC)
    head = dict(p.partition("=")[::2] for p in lines[0].split("\t")[1:])
    duration = head.get("duration") == "1"
    config = None
    baseline = None
    ents = []
    rels = []
    cat_lines = []
    cats = []
    catalog = []
    sections = {"": ([], [])}   # graph name -> (node lines, edge lines)
    current = None if duration else ""
    for lineno, ln in enumerate(lines[1:], 2):
        tag, _, rest = ln.partition("\t")
        if tag == "CFG":
            config = _parse_cfg(rest.split("\t"))
        elif tag == "N":
            baseline = float(rest)
        elif tag == "E":
            ents.append(rest)
        elif tag == "R":
            rels.append(rest)
        elif tag == "C":
            cat_lines.append(ln)
            cid, rel_s, ent_s, online = rest.split("\t")
            cats.append((int(cid),
                         frozenset(int(x) for x in rel_s.split(",") if x),
                         set(int(x) for x in ent_s.split(",") if x),
                         online == "1"))
        elif tag == "K":
            rel_s, _, ent_s = rest.partition("\t")
            catalog.append((frozenset(int(x) for x in rel_s.split(",") if x),
                            frozenset(int(x) for x in ent_s.split(",") if x)))
        elif tag == "G":
            current = rest
            sections[current] = ([], [])
        elif tag in ("V", "EC", "ET"):
            if current is None:
                raise ValueError("line %d: section before a G marker" % lineno)
            if tag == "V":
                sections[current][0].append(rest)
            else:
                sections[current][1].append((tag, rest))
        elif tag:
            raise ValueError("line %d: unknown section tag %r" % (lineno, tag))
    if config is None:
        raise ValueError("model file has no CFG line")
    if _cat_hash(cat_lines) != head.get("cat_hash"):
        raise ValueError("category hash mismatch; file is corrupt")
    if ents != store.entities[:len(ents)] or rels != store.relations[:len(rels)]:
        raise ValueError("model and store entity/relation tables diverge")

    cf = CategoryFunction(config.k)
    for cid, rset, eset, online in cats:
        cat = cf.add_category(rset, eset, online=online)
        if cat.cid != cid:
            raise ValueError("category ids are not contiguous")
    cf.catalog = catalog

    if duration:
        from .duration import _CLOCKS, DurationGraph, _project
        stores = {attr: _project(store, attr) for attr in ("t_start", "t_end")}
        graphs = {}
        for name, (node_lines, edge_lines) in sections.items():
            if not name:
                continue
            head_attr, tail_attr = _CLOCKS[name]
            g = _build_graph(node_lines, edge_lines, stores[tail_attr], cf)
            graphs[name] = DurationGraph(name, g, stores[head_attr], stores[tail_attr])
        return LoadedModel(model=None, cf=cf, config=config, baseline_bits=baseline,
                           duration=True, graphs=graphs)
    node_lines, edge_lines = sections[""]
    model = _build_graph(node_lines, edge_lines, store, cf)
    return LoadedModel(model=model, cf=cf, config=config, baseline_bits=baseline)


def _build_graph(node_lines, edge_lines, store, cf):
    """Nodes scanned out of the store; edges carry file spans only."""
    model = RuleGraph()
    flags = {}
    for rest in node_lines:
        key_s, _, flag = rest.partition("\t")
        flags[_parse_key(key_s)] = flag == "1"
    rules = {k: AtomicRule(*k, static_eligible=v) for k, v in flags.items()}
    for f in store.facts:
        for k in conceptualize(f, cf):
            rule = rules.get(k)
            if rule is not None:
                rule.facts.append(f.key())
                rule.n_s[f.s] += 1
                rule.n_o[f.o] += 1
    for k in sorted(rules):
        rules[k].facts.sort()
        model.add_node(rules[k])

    for tag, rest in edge_lines:
        parts = rest.split("\t")
        if tag == "EC":
            edge = RuleEdge("chain", _parse_key(parts[0]), _parse_key(parts[1]))
            spans = _parse_spans(parts[2])
        else:
            edge = RuleEdge("triadic", _parse_key(parts[0]), _parse_key(parts[2]),
                            mid=_parse_key(parts[1]))
            spans = _parse_spans(parts[3])
        edge.spans.update(spans)
        total = sum(spans.values())
        edge.n_assert = total // 2 if edge.mid is not None else total
        model.add_edge(edge)
    return model


def reconstruct_ledger(model, store, cf, config):
    """Fresh cost accounting for a loaded model.

    Edge assertion multisets are regenerated from the store, replacing
    whatever the edges carried; nodes replay first, then edges. Needed
    only when a loaded model must keep evolving (stream mode).
    """
    from .mdl import CostLedger, temporal_scope
    from .rules import generate_chain_candidates, generate_triadic_candidates

    chain = generate_chain_candidates(store, cf, l_chain=config.l_chain)
    have_triadic = any(e.mid is not None for e in model.edges.values())
    triadic = (generate_triadic_candidates(store, cf, config.L)
               if have_triadic else {})
    scope = temporal_scope(store, triadic_cands=triadic, l_chain=config.l_chain)
    ledger = CostLedger(store, cf, scope=scope, l_chain=config.l_chain)
    for key in sorted(model.nodes):
        ledger.add_rule(model.nodes[key])
    cands = dict(chain)
    cands.update(triadic)
    for key in sorted(model.edges):
        edge = model.edges[key]
        fresh = cands.get(key)
        if fresh is not None:
            edge.spans = fresh.spans
            edge.cnt_head = fresh.cnt_head
            edge.cnt_mid = fresh.cnt_mid
            edge.cnt_tail = fresh.cnt_tail
            edge.n_assert = fresh.n_assert
        ledger.add_edge(edge)
    return ledger
