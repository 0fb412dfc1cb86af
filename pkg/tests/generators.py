"""Synthetic dataset builders shared by the test suite.

Three families: small random instances for oracle comparisons, a planted
world with known rules and edges for recovery tests, and streams with a
distribution change at a known point for the monitor tests.
"""

import random

from tkgrules import TkgStore
from tkgrules.categories import induce
from tkgrules.summarize import BuildConfig, build_model


def random_store(rng, n_ent=10, n_rel=5, n_ts=10, n_facts=40):
    """Uniform random quadruples, deduplicated by the store."""
    store = TkgStore()
    for e in range(n_ent):
        store.ent("e%d" % e)
    for r in range(n_rel):
        store.rel("r%d" % r)
    for _ in range(n_facts):
        store.append(rng.randrange(n_ent), rng.randrange(n_rel),
                     rng.randrange(n_ent), rng.randrange(n_ts))
    return store


def random_instance(seed, **kw):
    rng = random.Random(seed)
    store = random_store(rng, **kw)
    cf = induce(store, 3)
    return rng, store, cf


# -- planted world -----------------------------------------------------
#
# Pattern families with known structure:
#   * several relation-groups of entity pairs where meet at t is
#     answered by sign at t+2, period PERIOD; group zero's meet->sign
#     and sign->meet dependencies are the two planted chain edges
#   * one set of pairs running audit at t, report at t+5, renew at t+10
#     with period STAND_PERIOD; those are the three planted atomic rules
#   * a closure family where g and h visit the same k at one timestamp
#     and g closes with h exactly TRI_L later, partners rotating so the
#     closing pairs never repeat; that is the planted triadic edge,
#     confined to the training window because a rotating pair has no
#     chain support to be judged against when held out
#   * one-off noise on never-repeating pairs, training window only
#
# Sizing matters. An edge with n assertions costs about 2*log2(n) bits
# per assertion (3*log2(n) triadic) while each newly associated fact
# saves about log2(universe / scope-per-t) bits, so pattern volume per
# edge stays small while noise blows up the entity count and with it
# the universe. Volume beyond that comes from adding relation-groups,
# which also grows the universe.

GROUP_RELS = ("meet", "sign")
MEET, SIGN = GROUP_RELS
STANDALONE = ("audit", "report", "renew")
TRI_REL, CLOSE = "visit", "close"
NOISE_REL = "chat"

N_GROUPS = 5
PERIOD = 20
LAGS = (0, 2)         # meet and sign offsets within a cycle
SIGN_LAG = LAGS[1]
TRI_L = 10
TRI_PERIOD = 24
STAND_PERIOD = 15
STAND_LAGS = (0, 5, 10)
L_CHAIN = 19          # excludes the meet/sign period itself
HORIZON = 240
TRAIN_END = int(HORIZON * 0.6)  # noise and closures stay below this


def _group_rel(name, g):
    return name if g == 0 else "%s%d" % (name, g)


def planted_world(seed=0, n_pairs=36, n_stand=20, n_tri=6,
                  n_noise_ent=1500, n_noise_facts=1500):
    """Store plus a description of what was planted.

    Returns (store, info) where info holds the entity groups, the split
    point, and the expected dominant span per planted edge.
    """
    rng = random.Random(seed)
    store = TkgStore()
    groups = [(["x%d_%02d" % (g, i) for i in range(n_pairs)],
               ["y%d_%02d" % (g, i) for i in range(n_pairs)])
              for g in range(N_GROUPS)]
    As = ["a%02d" % i for i in range(n_stand)]
    bs = ["b%02d" % i for i in range(n_stand)]
    gs = ["g%02d" % i for i in range(n_tri)]
    hs = ["h%02d" % i for i in range(n_tri)]
    ks = ["k%02d" % i for i in range(n_tri)]
    noise = ["n%04d" % i for i in range(n_noise_ent)]

    def put(s, r, o, t):
        store.append(store.ent(s), store.rel(r), store.ent(o), t)

    for g, (xs, ys) in enumerate(groups):
        rels = [_group_rel(nm, g) for nm in GROUP_RELS]
        for i, (x, y) in enumerate(zip(xs, ys)):
            t = (i * 7 + g * 3) % PERIOD
            while t + LAGS[-1] < HORIZON:
                for rel, lag in zip(rels, LAGS):
                    put(x, rel, y, t + lag)
                t += PERIOD
    for i in range(n_stand):
        t = (i * 4) % STAND_PERIOD
        while t + STAND_LAGS[-1] < HORIZON:
            for rel, lag in zip(STANDALONE, STAND_LAGS):
                put(As[i], rel, bs[i], t + lag)
            t += STAND_PERIOD
    cycle = 0
    t0 = 0
    while t0 + n_tri + TRI_L < TRAIN_END:
        for i in range(n_tri):
            j = (i + cycle) % n_tri
            put(gs[i], TRI_REL, ks[i], t0 + i)
            put(hs[j], TRI_REL, ks[i], t0 + i)
            put(gs[i], CLOSE, hs[j], t0 + i + TRI_L)
        cycle += 1
        t0 += TRI_PERIOD
    seen_pairs = set()
    made = 0
    while made < n_noise_facts:
        s = noise[rng.randrange(n_noise_ent)]
        o = noise[rng.randrange(n_noise_ent)]
        if s == o or (s, o) in seen_pairs:
            continue
        seen_pairs.add((s, o))
        put(s, NOISE_REL, o, rng.randrange(TRAIN_END))
        made += 1

    info = {
        "groups": groups, "xs": groups[0][0], "ys": groups[0][1],
        "As": As, "bs": bs, "gs": gs, "hs": hs, "ks": ks, "noise": noise,
        "train_end": TRAIN_END, "horizon": HORIZON,
        "spans": {"chain_fwd": SIGN_LAG, "chain_back": PERIOD - SIGN_LAG,
                  "triadic": TRI_L},
    }
    return store, info


def planted_build(seed=0, split=False, **kw):
    """Induce and build over the planted world, optionally train-only.

    With split=True the model sees the first 60% of timestamps and the
    returned store is still the full world, mirroring the evaluation
    protocol.
    """
    store, info = planted_world(seed, **kw)
    fit = store.split_by_time((0.6, 0.1, 0.3))[0] if split else store
    cf = induce(fit, 3)
    cfg = BuildConfig(k=3, L=TRI_L, l_chain=L_CHAIN, max_edges=50000)
    res = build_model(fit, cfg, cf)
    return store, cf, cfg, res, info


def _has(cf, cid, store, label):
    e = store._ent_id.get(label)
    return e is not None and e in cf.cats[cid].ents


def find_planted(store, cf, model, info):
    """Map each planted structure to whether the model recovered it.

    Category ids are induction artifacts, so recovery is judged at the
    pattern level: a selected node or edge counts when its categories
    contain the planted entity groups and, for edges, the planted span
    dominates the span multiset.
    """
    rel = {name: store._rel_id.get(name, -1)
           for name in (MEET, SIGN, TRI_REL, CLOSE) + STANDALONE}

    def node_like(key, r_name, s_label, o_label):
        a, r, b = key
        return (r == rel[r_name] and _has(cf, a, store, s_label)
                and _has(cf, b, store, o_label))

    got = {"rule_" + n: False for n in STANDALONE}
    got.update({"chain_fwd": False, "chain_back": False, "triadic": False})
    for key in model.nodes:
        for name in STANDALONE:
            if node_like(key, name, info["As"][0], info["bs"][0]):
                got["rule_" + name] = True
    spans = info["spans"]
    x0, y0 = info["xs"][0], info["ys"][0]
    g0, h0, k0 = info["gs"][0], info["hs"][0], info["ks"][0]
    for e in model.edges.values():
        if not e.spans:
            continue
        top = e.spans.most_common(1)[0][0]
        if e.kind == "chain":
            if (node_like(e.head, MEET, x0, y0)
                    and node_like(e.tail, SIGN, x0, y0)
                    and top == spans["chain_fwd"]):
                got["chain_fwd"] = True
            if (node_like(e.head, SIGN, x0, y0)
                    and node_like(e.tail, MEET, x0, y0)
                    and top == spans["chain_back"]):
                got["chain_back"] = True
        else:
            if (node_like(e.head, TRI_REL, g0, k0)
                    and node_like(e.mid, TRI_REL, h0, k0)
                    and node_like(e.tail, CLOSE, g0, h0)
                    and top == spans["triadic"]):
                got["triadic"] = True
    return got


# -- drift stream ------------------------------------------------------

def drift_world(seed=0, n_pairs=30, n_noise=500, t_stream=144, t_star=168,
                horizon=240):
    """Training store plus two stream variants over [t_stream, horizon).

    Both variants continue the trained meet/sign law up to t_star. The
    drifted one then switches to a fresh relation on never-seen
    entities, which the frozen model can neither map nor associate. The
    training noise is one fact per entity pair, every entity used once,
    so the build explains everything and the baseline is exactly the
    empty negative cost.

    Returns (store, cont_rows, drift_rows, t_stream, t_star).
    """
    rng = random.Random(seed)
    store = TkgStore()
    xs = ["x%02d" % i for i in range(n_pairs)]
    ys = ["y%02d" % i for i in range(n_pairs)]
    zs = ["z%02d" % i for i in range(n_pairs)]
    held = []
    for i in range(n_pairs):
        t = (i * 7) % PERIOD
        while t + SIGN_LAG < horizon:
            for row in ((xs[i], MEET, ys[i], t),
                        (xs[i], SIGN, ys[i], t + SIGN_LAG)):
                if row[3] < t_stream:
                    store.append(store.ent(row[0]), store.rel(row[1]),
                                 store.ent(row[2]), row[3])
                else:
                    held.append(row)
            t += PERIOD
    for i in range(n_noise):
        store.append(store.ent("p%04d" % (2 * i)), store.rel(NOISE_REL),
                     store.ent("p%04d" % (2 * i + 1)),
                     rng.randrange(t_stream))
    held.sort(key=lambda f: f[3])
    cont = list(held)
    drifted = []
    for s, r, o, t in held:
        if t < t_star:
            drifted.append((s, r, o, t))
        else:
            i = xs.index(s)
            drifted.append((zs[i], "void", zs[(i + 1) % n_pairs], t))
    return store, cont, drifted, t_stream, t_star


def fresh_entity_stream(seed=0, n_pairs=30, n_alien=20, t_split=120,
                        horizon=240, n_renamed=6, n_corrupt=25):
    """Training store plus a held-out stream with renamed subjects.

    A handful of subjects change identity at the split: every later fact
    of theirs carries a never-seen name, so a frozen model misreads the
    whole tail while an updating one only misses the debut. A sprinkle
    of genuine concept errors (objects swapped into an unrelated group)
    gives the precision/recall tradeoff something to measure.

    Returns (store, stream, labels) where labels[i] is 1 for corrupted
    stream rows.
    """
    rng = random.Random(seed)
    store = TkgStore()
    aliens = ["c%02d" % i for i in range(n_alien)]
    held = []
    for i in range(n_pairs):
        phase = (i * 5) % PERIOD
        t = phase
        while t + SIGN_LAG < horizon:
            for row in (("x%02d" % i, MEET, "y%02d" % i, t),
                        ("x%02d" % i, SIGN, "y%02d" % i, t + SIGN_LAG)):
                if row[3] < t_split:
                    store.append(store.ent(row[0]), store.rel(row[1]), store.ent(row[2]), row[3])
                else:
                    held.append(row)
            t += PERIOD
    # the alien group only ever chats among itself
    for _ in range(160):
        a, b = rng.sample(aliens, 2)
        store.append(store.ent(a), store.rel("chat"), store.ent(b), rng.randrange(t_split))
    held.sort(key=lambda f: f[3])

    renamed = {"x%02d" % i: "u%02d" % i
               for i in rng.sample(range(n_pairs), n_renamed)}
    stream, labels = [], []
    eligible = [j for j, row in enumerate(held) if row[0] not in renamed]
    corrupt_at = set(rng.sample(eligible, n_corrupt))
    for j, (s, r, o, t) in enumerate(held):
        s = renamed.get(s, s)
        if j in corrupt_at:
            stream.append((s, r, aliens[rng.randrange(n_alien)], t))
            labels.append(1)
        else:
            stream.append((s, r, o, t))
            labels.append(0)
    return store, stream, labels

def tiny_chain_world(with_sign_facts=True):
    """meet -> sign -> pay every 20 steps on one pair, 3 cycles.

    The hand-built model always carries all three nodes and both chain
    edges; the store optionally omits the sign facts so hop-1
    instantiation fails and walks have to recurse. Categories are
    singletons, so entity and category ids coincide.
    """
    from tkgrules.categories import CategoryFunction
    from tkgrules.rules import AtomicRule, RuleEdge, RuleGraph

    store = TkgStore()
    a, b = store.ent("a"), store.ent("b")
    meet, sign, pay = store.rel("meet"), store.rel("sign"), store.rel("pay")
    full = []
    for t in (0, 20, 40):
        full.append((a, meet, b, t))
        full.append((a, sign, b, t + 2))
        full.append((a, pay, b, t + 5))
    for s, r, o, t in full:
        if r == sign and not with_sign_facts:
            continue
        store.append(s, r, o, t)
    cf = CategoryFunction(1)
    cf.add_category(frozenset({meet, sign, pay}), {a})   # cid 0
    cf.add_category(frozenset({meet, sign, pay}), {b})   # cid 1

    model = RuleGraph()
    nodes = {}
    for r in (meet, sign, pay):
        rule = AtomicRule(0, r, 1)
        for s, r2, o, t in full:
            if r2 == r:
                rule.facts.append((s, r2, o, t))
                rule.n_s[s] += 1
                rule.n_o[o] += 1
        nodes[r] = rule
        model.add_node(rule)
    e1 = RuleEdge("chain", nodes[meet].key, nodes[sign].key)
    e2 = RuleEdge("chain", nodes[sign].key, nodes[pay].key)
    for t in (0, 20, 40):
        e1.spans[2] += 1
        e1.cnt_head[(a, meet, b, t)] += 1
        e1.cnt_tail[(a, sign, b, t + 2)] += 1
        e1.n_assert += 1
        e2.spans[3] += 1
        e2.cnt_head[(a, sign, b, t + 2)] += 1
        e2.cnt_tail[(a, pay, b, t + 5)] += 1
        e2.n_assert += 1
    model.add_edge(e1)
    model.add_edge(e2)
    ids = {"a": a, "b": b, "meet": meet, "sign": sign, "pay": pay}
    return store, cf, model, ids


def run_monitor(store, rows, res, cfg):
    """Feed time-ordered rows to a frozen model's drift ledger.

    Every arrival lands in the live store and registers with the
    monitor whether or not the model can explain it. Returns the
    timestamp of the first refresh signal, or None.
    """
    import copy

    from tkgrules.detect import SENTINEL, score_fact
    from tkgrules.monitor import DriftLedger
    from tkgrules.store import Fact

    model, cf = res.model, res.cf
    live = TkgStore.from_facts([f.key() for f in store.facts],
                               store.entities, store.relations, store.t_raw)
    monitor = DriftLedger.from_build(res)
    counts = {}
    for s, r, o, t in rows:
        si, ri, oi = live.ent(s), live.rel(r), live.ent(o)
        fact = Fact(si, ri, oi, t)
        v = score_fact(fact, model, live, cf, cfg)
        live.append(si, ri, oi, t)
        row = counts.setdefault(t, [0, 0, 0, 0])
        seq = live.seq.get((si, oi), [])
        in_scope = bool(seq) and seq[0][0] < t
        if v.n_mapped:
            row[0] += 1
        else:
            row[1] += 1
        if in_scope and v.temporal_score < SENTINEL:
            row[2] += 1
        elif in_scope:
            row[3] += 1
        u = max(1, live.n_entities ** 2 * live.n_relations)
        monitor.observe(t, *row, universe=u)
        if monitor.should_refresh():
            return t
    return None


def updater_runs(seed=0, beta=0.5):
    """Best conceptual F_beta with the updater off and on, same stream."""
    import copy

    from tkgrules.detect import ScoringConfig, score_fact
    from tkgrules.evaluate import best_threshold
    from tkgrules.store import Fact
    from tkgrules.update import UpdaterSession

    store, stream, labels = fresh_entity_stream(seed)
    cf = induce(store, 3)
    res = build_model(store, BuildConfig(k=3, L=TRI_L, l_chain=L_CHAIN,
                                         max_edges=50000), cf)
    cfg = ScoringConfig(K=3, L=10)
    out = {}
    for on in (False, True):
        model, cf2, ledger = copy.deepcopy((res.model, res.cf, res.ledger))
        live = TkgStore.from_facts([f.key() for f in store.facts],
                                   store.entities, store.relations, store.t_raw)
        ledger.store = live
        ledger.ctx.store = live
        session = UpdaterSession(store=live, cf=cf2, model=model,
                                 ledger=ledger, L=TRI_L) if on else None
        scores = []
        for s, r, o, t in stream:
            si, ri, oi = live.ent(s), live.rel(r), live.ent(o)
            v = score_fact(Fact(si, ri, oi, t), model, live, cf2, cfg)
            scores.append(v.static_score)
            if on and v.new_entities:
                session.apply(si, ri, oi, t)
        _, fb = best_threshold(scores, labels, beta=beta)
        out[on] = fb
    return out[False], out[True]
