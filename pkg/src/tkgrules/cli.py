"""Command line entry point.

Subcommands: build, score, stream, inject, evaluate, dump-rules.
Exit codes: 0 success, 1 usage, 2 data error. Reports start with a
header echoing every effective option so runs can be reproduced from
the report alone; nothing time- or host-dependent is ever printed.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .detect import SENTINEL, ScoringConfig, classify, score_batch
from .monitor import DriftLedger
from .store import ParseError, TkgStore
from .summarize import BuildConfig, build_model

BIG_TAU = 1e308   # default thresholds: only sentinel scores clear them


def _add_common(p):
    p.add_argument("--k", type=int, default=3, help="categories per entity (default 3)")
    p.add_argument("--K", type=int, default=2, dest="hops",
                   help="temporal walk recursion depth (default 2)")
    p.add_argument("--L", type=int, required=True,
                   help="timespan window; dataset-dependent, no universal default")
    p.add_argument("--l-chain", type=int, default=None,
                   help="max chain gap during candidate generation (default unbounded)")
    p.add_argument("--max-edges", type=int, default=50000)
    p.add_argument("--min-support", type=int, default=None)
    p.add_argument("--theta", choices=("mismatch", "literal"), default="mismatch")
    p.add_argument("--lam", type=float, default=1.0,
                   help="static evidence needed before the temporal walk (default 1)")
    p.add_argument("--no-out-edges", action="store_true",
                   help="disable the out-edge numerator extension")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--duration-mode", action="store_true")
    p.add_argument("--report", default=None, help="write the report here instead of stdout")


def _build_config(args):
    return BuildConfig(k=args.k, L=args.L, l_chain=args.l_chain,
                       max_edges=args.max_edges, min_support=args.min_support)


def _scoring_config(args):
    return ScoringConfig(K=args.hops, L=args.L, lam=args.lam,
                         out_edge_extension=not args.no_out_edges,
                         theta=args.theta)


def _header(cmd, args, extra=()):
    keys = ("k", "hops", "L", "l_chain", "max_edges", "min_support", "theta",
            "lam", "seed", "threads", "duration_mode")
    parts = []
    for k in keys:
        if hasattr(args, k):
            v = getattr(args, k)
            parts.append("%s=%s" % (k.replace("hops", "K"), "-" if v is None else v))
    lines = ["# tkgrules %s %s" % (__version__, cmd), "# " + " ".join(parts)]
    lines.extend("# " + e for e in extra)
    return lines


def _emit(args, lines):
    text = "\n".join(lines) + "\n"
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _read_store(path, duration=False):
    with open(path, encoding="utf-8") as fh:
        return TkgStore.from_lines(fh, duration=duration)


def build_parser():
    p = argparse.ArgumentParser(prog="tkgrules",
                                description="rule-graph summarization and anomaly "
                                            "detection for temporal knowledge graphs")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="cmd", required=True)

    b = sub.add_parser("build", help="summarize a TKG into a rule graph")
    b.add_argument("--data", required=True)
    b.add_argument("--model", required=True, help="output model path")
    _add_common(b)

    s = sub.add_parser("score", help="score facts against a model")
    s.add_argument("--data", required=True, help="the store the model was built on")
    s.add_argument("--model", required=True)
    s.add_argument("--input", default=None, help="facts to score (default stdin)")
    s.add_argument("--output", default=None, help="verdict TSV (default stdout)")
    s.add_argument("--prompts", default=None, help="optional prompts file")
    s.add_argument("--tau-s", type=float, default=BIG_TAU)
    s.add_argument("--tau-t", type=float, default=BIG_TAU)
    _add_common(s)

    st = sub.add_parser("stream", help="detector + updater + monitor over a stream")
    st.add_argument("--data", required=True)
    st.add_argument("--model", required=True)
    st.add_argument("--input", default=None)
    st.add_argument("--output", default=None)
    st.add_argument("--tau-s", type=float, default=BIG_TAU)
    st.add_argument("--tau-t", type=float, default=BIG_TAU)
    st.add_argument("--no-updater", action="store_true")
    st.add_argument("--refresh", action="store_true",
                    help="rebuild the model when the monitor fires")
    st.add_argument("--edit-log", default=None)
    _add_common(st)

    i = sub.add_parser("inject", help="perturb a test split into a labeled stream")
    i.add_argument("--data", required=True)
    i.add_argument("--out", required=True)
    i.add_argument("--rate", type=float, default=0.15)
    i.add_argument("--split", default="0.6,0.1,0.3")
    _add_common(i)

    e = sub.add_parser("evaluate", help="full injection/metrics protocol")
    e.add_argument("--data", required=True)
    e.add_argument("--rate", type=float, default=0.15)
    e.add_argument("--beta", type=float, default=0.5)
    e.add_argument("--split", default="0.6,0.1,0.3")
    _add_common(e)

    d = sub.add_parser("dump-rules", help="readable category and rule report")
    d.add_argument("--data", required=True)
    d.add_argument("--model", required=True)
    _add_common(d)
    return p


def _parse_split(text):
    parts = [float(x) for x in text.split(",")]
    if len(parts) != 3:
        raise ValueError("--split needs three comma-separated fractions")
    return tuple(parts)


# -- subcommands ------------------------------------------------------

def cmd_build(args):
    from . import model_io
    config = _build_config(args)
    if args.duration_mode:
        from .duration import build_four
        dstore = _read_store(args.data, duration=True)
        adapter = build_four(dstore, config)
        model_io.save(args.model, dstore, adapter.cf, config, graphs=adapter.graphs)
        extra = ["graphs=%s" % ",".join(sorted(adapter.graphs))]
        for name in sorted(adapter.graphs):
            g = adapter.graphs[name].model
            extra.append("%s nodes=%d edges=%d" % (name, g.n_nodes, g.n_edges))
        _emit(args, _header("build", args, extra))
        return 0
    store = _read_store(args.data)
    result = build_model(store, config)
    model_io.save(args.model, store, result.cf, config, model=result.model,
                  baseline_bits=result.ledger.bits_negative)
    bd = result.ledger.breakdown()
    extra = [store.summary().replace("\n", " "),
             "nodes=%d edges=%d" % (result.model.n_nodes, result.model.n_edges),
             "bits_total=%.3f bits_empty=%.3f" % (bd["total"], result.empty_total),
             "explained_proportion=%.6f" % result.explained_proportion()]
    _emit(args, _header("build", args, extra))
    return 0


def _iter_input(path):
    if path is None:
        yield from sys.stdin
    else:
        with open(path, encoding="utf-8") as fh:
            yield from fh


def _parse_stream_line(store, ln, lineno, width=4):
    parts = ln.rstrip("\n").split("\t")
    if len(parts) < width:
        raise ParseError(lineno, "expected %d fields, got %d" % (width, len(parts)))
    try:
        ts = [int(x) for x in parts[3:width]]
    except ValueError:
        raise ParseError(lineno, "bad timestamp %r" % (parts[3:width],))
    return store.ent(parts[0]), store.rel(parts[1]), store.ent(parts[2]), ts


def _fmt_score(x):
    return "inf" if x == SENTINEL else "%.9g" % x


def cmd_score(args):
    from . import model_io
    from .store import Fact
    duration = args.duration_mode
    store = _read_store(args.data, duration=duration)
    loaded = model_io.load(args.model, store)
    cfg = _scoring_config(args)
    out = open(args.output, "w", encoding="utf-8") if args.output else sys.stdout
    prompts_fh = open(args.prompts, "w", encoding="utf-8") if args.prompts else None
    try:
        if loaded.duration:
            from .duration import DurationAdapter
            adapter = DurationAdapter(cf=loaded.cf, graphs=loaded.graphs,
                                      config=loaded.config)
            from .store import DurationFact
            for lineno, ln in enumerate(_iter_input(args.input), 1):
                if not ln.strip() or ln.lstrip().startswith("#"):
                    continue
                s, r, o, ts = _parse_stream_line(store, ln, lineno, width=5)
                dfact = DurationFact(s, r, o, ts[0], ts[1])
                sc, tc, per = adapter.score(dfact, cfg)
                cls = "conceptual" if sc > args.tau_s else (
                    "time" if tc > args.tau_t else "valid")
                out.write("%s\t%s\t%s\t%d\t%d\t%s\t%s\t%s\n" % (
                    store.entities[s], store.relations[r], store.entities[o],
                    ts[0], ts[1], _fmt_score(sc), _fmt_score(tc), cls))
            return 0
        facts = []
        for lineno, ln in enumerate(_iter_input(args.input), 1):
            if not ln.strip() or ln.lstrip().startswith("#"):
                continue
            s, r, o, ts = _parse_stream_line(store, ln, lineno)
            facts.append(Fact(s, r, o, ts[0]))
        verdicts = score_batch(facts, loaded.model, store, loaded.cf, cfg,
                               threads=args.threads)
        for v in verdicts:
            cls = classify(v, args.tau_s, args.tau_t)
            f = v.fact
            out.write("%s\t%s\t%s\t%d\t%s\t%s\t%s\n" % (
                store.entities[f.s], store.relations[f.r], store.entities[f.o],
                f.t, _fmt_score(v.static_score), _fmt_score(v.temporal_score), cls))
            if prompts_fh is not None and cls != "valid":
                from .detect import correcting_prompts
                for line in correcting_prompts(v, loaded.model, store, loaded.cf):
                    prompts_fh.write("%s\t%s\t%s\t%d\t%s\n" % (
                        store.entities[f.s], store.relations[f.r],
                        store.entities[f.o], f.t, line))
        return 0
    finally:
        if out is not sys.stdout:
            out.close()
        if prompts_fh is not None:
            prompts_fh.close()


def cmd_stream(args):
    from . import model_io
    from .store import Fact
    from .update import UpdaterSession

    if args.duration_mode:
        raise ValueError("stream mode does not support duration stores; "
                         "score them with the score subcommand")
    store = _read_store(args.data)
    loaded = model_io.load(args.model, store)
    cfg = _scoring_config(args)
    config = loaded.config
    model, cf = loaded.model, loaded.cf
    updater_on = not args.no_updater

    ledger = model_io.reconstruct_ledger(model, store, cf, config)
    session = UpdaterSession(store=store, cf=cf, model=model, ledger=ledger,
                             L=config.L)
    baseline = loaded.baseline_bits
    if baseline is None:
        baseline = ledger.bits_negative
    monitor = DriftLedger(baseline, max(1, store.n_entities ** 2 * store.n_relations))

    out = open(args.output, "w", encoding="utf-8") if args.output else sys.stdout
    edit_fh = open(args.edit_log, "w", encoding="utf-8") if args.edit_log else None
    counts = {}   # t -> [mapped, unmapped, assoc, scope_rest]
    report = []
    announced = False
    try:
        from .detect import score_fact
        for lineno, ln in enumerate(_iter_input(args.input), 1):
            if not ln.strip() or ln.lstrip().startswith("#"):
                continue
            s, r, o, ts = _parse_stream_line(store, ln, lineno)
            fact = Fact(s, r, o, ts[0])
            v = score_fact(fact, model, store, cf, cfg)
            cls = classify(v, args.tau_s, args.tau_t)
            out.write("%s\t%s\t%s\t%d\t%s\t%s\t%s\n" % (
                store.entities[s], store.relations[r], store.entities[o], fact.t,
                _fmt_score(v.static_score), _fmt_score(v.temporal_score), cls))
            if cls == "valid" or (updater_on and v.new_entities):
                if updater_on:
                    edits = session.apply(s, r, o, fact.t)
                    if edit_fh is not None:
                        for e in edits:
                            edit_fh.write("%d\t%s\n" % (session.version, e))
                else:
                    store.append(s, r, o, fact.t)
            # every arrival feeds the monitor; quarantining a fact does
            # not explain it away
            row = counts.setdefault(fact.t, [0, 0, 0, 0])
            in_scope = _chain_scope_test(store, fact)
            supported = v.temporal_score < SENTINEL
            if v.n_mapped:
                row[0] += 1
            else:
                row[1] += 1
            if in_scope and supported:
                row[2] += 1
            elif in_scope:
                row[3] += 1
            u = max(1, store.n_entities ** 2 * store.n_relations)
            monitor.observe(fact.t, *row, universe=u)
            if monitor.should_refresh() and not announced:
                announced = True
                snap = monitor.snapshot()
                report.append("REFRESH t=%d online_bits=%.3f baseline_bits=%.3f"
                              % (fact.t, snap["online_bits"], snap["baseline_bits"]))
                if args.refresh:
                    result = build_model(store, config, cf=None)
                    model, cf = result.model, result.cf
                    session.cf, session.model = cf, model
                    session.ledger = ledger = result.ledger
                    monitor.reset(result.ledger.bits_negative)
                    counts.clear()
                    announced = False
        extra = ["baseline_bits=%.3f" % baseline,
                 "online_bits=%.3f" % monitor.online_bits,
                 "refresh=%s" % ("yes" if monitor.should_refresh() else "no")]
        extra.extend(report)
        _emit(args, _header("stream", args, extra))
        return 0
    finally:
        if out is not sys.stdout:
            out.close()
        if edit_fh is not None:
            edit_fh.close()


def _chain_scope_test(store, fact):
    import bisect as _bisect
    seq = store.seq.get((fact.s, fact.o), [])
    i = _bisect.bisect_left(seq, (fact.t, -1))
    return i > 0


def cmd_inject(args):
    from .evaluate import inject
    store = _read_store(args.data)
    train, valid, test = store.split_by_time(_parse_split(args.split))
    stream = inject(test.facts, store, rate=args.rate, seed=args.seed)
    with open(args.out, "w", encoding="utf-8") as fh:
        for line in _header("inject", args,
                            ["items=%d deleted=%d" % (len(stream.items),
                                                      len(stream.deleted))]):
            fh.write(line + "\n")
        for it in stream.items:
            f = it.fact
            fh.write("%s\t%s\t%s\t%d\t%s\n" % (
                store.entities[f.s], store.relations[f.r], store.entities[f.o],
                f.t, it.label))
        for f in stream.deleted:
            fh.write("%s\t%s\t%s\t%d\tmissing\n" % (
                store.entities[f.s], store.relations[f.r], store.entities[f.o], f.t))
    return 0


def cmd_evaluate(args):
    from .evaluate import evaluate_protocol
    if args.duration_mode:
        raise ValueError("evaluate runs on timestamped stores only")
    store = _read_store(args.data)
    fractions = _parse_split(args.split)
    train, valid, test = store.split_by_time(fractions)
    config = _build_config(args)
    result = build_model(train, config)
    cfg = _scoring_config(args)
    report, details = evaluate_protocol(store, result, cfg, seed=args.seed,
                                        rate=args.rate, beta=args.beta,
                                        threads=args.threads, fractions=fractions)
    extra = ["split=%s rate=%s beta=%s" % (args.split, args.rate, args.beta),
             "explained_proportion=%.6f" % result.explained_proportion(),
             "missing queries are synthetic: deleted facts plus matched negatives"]
    lines = _header("evaluate", args, extra)
    lines.extend(report.lines())
    _emit(args, lines)
    return 0


def cmd_dump_rules(args):
    from . import model_io
    duration = args.duration_mode
    store = _read_store(args.data, duration=duration)
    loaded = model_io.load(args.model, store)
    lines = _header("dump-rules", args)
    lines.append("categories\tcat_id\trelations\tentity_count")
    for cat in loaded.cf.cats:
        rels = ",".join(store.relations[r] for r in cat.rel_tuple())
        lines.append("category\t%d\t%s\t%d" % (cat.cid, rels, cat.n_c))
    models = ([("", loaded.model)] if not loaded.duration
              else [(n, g.model) for n, g in sorted(loaded.graphs.items())])
    for name, model in models:
        prefix = ("%s\t" % name) if name else ""
        for key in sorted(model.nodes):
            node = model.nodes[key]
            lines.append("%snode\tc%d\t%s\tc%d\tassertions=%d\tstatic=%d" % (
                prefix, key[0], store.relations[key[1]], key[2],
                node.assertion_count, 1 if node.static_eligible else 0))
        for key in sorted(model.edges):
            e = model.edges[key]
            spans = e.span_list()
            rng = "%d..%d" % (spans[0], spans[-1]) if spans else "-"
            if e.mid is None:
                lines.append("%sedge\tchain\t%s -> %s\tspans=%s" % (
                    prefix, _node_label(store, e.head), _node_label(store, e.tail), rng))
            else:
                lines.append("%sedge\ttriadic\t%s + %s -> %s\tspans=%s" % (
                    prefix, _node_label(store, e.head), _node_label(store, e.mid),
                    _node_label(store, e.tail), rng))
    _emit(args, lines)
    return 0


def _node_label(store, key):
    return "(c%d,%s,c%d)" % (key[0], store.relations[key[1]], key[2])


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code in (0, None) else 1
    handlers = {
        "build": cmd_build,
        "score": cmd_score,
        "stream": cmd_stream,
        "inject": cmd_inject,
        "evaluate": cmd_evaluate,
        "dump-rules": cmd_dump_rules,
    }
    try:
        return handlers[args.cmd](args)
    except ParseError as e:
        sys.stderr.write("error: %s\n" % e)
        return 2
    except (ValueError, OSError, RuntimeError) as e:
        sys.stderr.write("error: %s\n" % e)
        return 2


if __name__ == "__main__":
    sys.exit(main())
