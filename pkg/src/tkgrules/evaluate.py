"""Anomaly injection, metrics, and the detection protocol.

Injection perturbs a disjoint 15% of test facts per anomaly class:
conceptual errors swap an endpoint so the tuple never occurs, time
errors displace the timestamp far outside its neighborhood, missing
errors delete the fact from the visible stream but keep it as a query.
Metrics are one-vs-rest per class on that class's score channel, with
thresholds picked on validation by best F_beta. The time channel is
swept over facts the static stage let through; a fact flagged
conceptual has left the cascade.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .detect import (
    CONCEPTUAL,
    MISSING,
    SENTINEL,
    TIME,
    VALID,
    classify,
    score_fact,
)
from .store import Fact, TkgStore

INJECT_RETRIES = 200


@dataclass
class LabeledItem:
    fact: Fact
    label: str
    original: tuple = None   # key of the unperturbed fact, if any


@dataclass
class LabeledStream:
    items: list = field(default_factory=list)      # time-ordered
    deleted: list = field(default_factory=list)    # missing originals
    seed: int = 0
    rate: float = 0.15


def inject(test_facts, store, rate=0.15, seed=0, pools=None,
           classes=(CONCEPTUAL, TIME, MISSING)):
    """Perturb a disjoint rate-slice of test facts per anomaly class.

    `store` supplies the ground-truth tuple set and timestamp range.
    `pools` optionally narrows the replacement entities per class, e.g.
    {"conceptual": [...]}; the default draws from all entities. `classes`
    picks which anomaly classes to inject at all.
    """
    if not 0.0 < rate < 1.0:
        raise ValueError("rate must be in (0, 1)")
    classes = tuple(classes)
    for c in classes:
        if c not in (CONCEPTUAL, TIME, MISSING):
            raise ValueError("unknown anomaly class %r" % (c,))
    rng = random.Random(seed)
    facts = sorted(test_facts, key=lambda f: f.key())
    n = len(facts)
    per = int(n * rate)
    if len(classes) * per > n:
        raise ValueError("rate leaves no valid facts")
    picked = rng.sample(range(n), len(classes) * per)
    groups = {c: picked[j * per:(j + 1) * per] for j, c in enumerate(classes)}
    taken = set(picked)

    stream = LabeledStream(seed=seed, rate=rate)
    all_ts = sorted(store.by_t)
    t_lo, t_hi = (all_ts[0], all_ts[-1]) if all_ts else (0, 0)
    spread = max(1, int(math.ceil((t_hi - t_lo) * 0.25)))
    observed = set(all_ts)
    ent_pool = list(range(store.n_entities))

    for i in groups.get(CONCEPTUAL, ()):
        f = facts[i]
        pool = (pools or {}).get(CONCEPTUAL) or ent_pool
        stream.items.append(LabeledItem(_perturb_entity(f, store, pool, rng),
                                        CONCEPTUAL, f.key()))
    for i in groups.get(TIME, ()):
        f = facts[i]
        stream.items.append(LabeledItem(_perturb_time(f, store, observed, spread, rng),
                                        TIME, f.key()))
    for i in groups.get(MISSING, ()):
        stream.deleted.append(facts[i])
    for i in range(n):
        if i not in taken:
            stream.items.append(LabeledItem(facts[i], VALID, None))
    stream.items.sort(key=lambda it: (it.fact.t, it.fact.key()))
    return stream


def _perturb_entity(f, store, pool, rng):
    for _ in range(INJECT_RETRIES):
        e = pool[rng.randrange(len(pool))]
        cand = Fact(f.s, f.r, e, f.t) if rng.random() < 0.5 else Fact(e, f.r, f.o, f.t)
        if cand.key() not in store and cand.key() != f.key():
            return cand
    raise RuntimeError("could not perturb %r into an absent tuple" % (f,))


def _perturb_time(f, store, observed, spread, rng):
    for _ in range(INJECT_RETRIES):
        delta = spread + rng.randrange(spread + 1)
        t2 = f.t + delta if rng.random() < 0.5 else f.t - delta
        if t2 not in observed:
            return Fact(f.s, f.r, f.o, t2)
    raise RuntimeError("could not displace %r out of the observed timestamps" % (f,))


# -- metrics ----------------------------------------------------------

def pr_curve(scores, labels):
    """Sweep thresholds descending; ties grouped. [(recall, precision, tau)]."""
    if len(scores) != len(labels):
        raise ValueError("scores and labels differ in length")
    total_pos = sum(1 for y in labels if y)
    if total_pos == 0:
        return []
    order = sorted(range(len(scores)), key=lambda i: -scores[i])
    curve = []
    tp = fp = 0
    i = 0
    while i < len(order):
        j = i
        tau = scores[order[i]]
        while j < len(order) and scores[order[j]] == tau:
            if labels[order[j]]:
                tp += 1
            else:
                fp += 1
            j += 1
        curve.append((tp / total_pos, tp / (tp + fp), tau))
        i = j
    return curve


def pr_auc(scores, labels):
    """Trapezoid over the sweep, anchored at (0, first precision)."""
    curve = pr_curve(scores, labels)
    if not curve:
        return float("nan")
    pts = [(0.0, curve[0][1])] + [(r, p) for r, p, _ in curve]
    area = 0.0
    for (r0, p0), (r1, p1) in zip(pts, pts[1:]):
        area += (r1 - r0) * (p0 + p1) / 2.0
    return area


def fbeta(precision, recall, beta=0.5):
    if precision == 0.0 and recall == 0.0:
        return 0.0
    b2 = beta * beta
    return (1 + b2) * precision * recall / (b2 * precision + recall)


def fbeta_at(scores, labels, tau, beta=0.5):
    """(precision, recall, f_beta) predicting anomalous when score > tau."""
    tp = fp = fn = 0
    for s, y in zip(scores, labels):
        pred = s > tau
        if pred and y:
            tp += 1
        elif pred:
            fp += 1
        elif y:
            fn += 1
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    return p, r, fbeta(p, r, beta)


def best_threshold(scores, labels, beta=0.5):
    """(tau, f_beta) maximizing F_beta; the cut sits just below the last
    score admitted, so `score > tau` reproduces the sweep prefix."""
    curve = pr_curve(scores, labels)
    if not curve:
        return SENTINEL, 0.0
    uniq = sorted({s for s in scores}, reverse=True)
    best = (SENTINEL, -1.0)
    for k, (r, p, tau) in enumerate(curve):
        f = fbeta(p, r, beta)
        # admit everything >= tau: place the cut at the next lower score
        cut = uniq[k + 1] if k + 1 < len(uniq) else (tau - 1.0 if math.isfinite(tau) else 0.0)
        if f > best[1]:
            best = (cut, f)
    return best


def metrics(scores, labels, beta=0.5, tau=None):
    """(precision, f_beta, pr_auc) for one channel.

    With tau=None the threshold is the channel's own best (validation
    use); otherwise the given one is applied (test use). Empty-positive
    channels report NaN markers.
    """
    if not any(labels):
        return float("nan"), float("nan"), float("nan")
    auc = pr_auc(scores, labels)
    if tau is None:
        tau, _ = best_threshold(scores, labels, beta)
    p, _, f = fbeta_at(scores, labels, tau, beta)
    return p, f, auc


# -- protocol ---------------------------------------------------------

@dataclass
class ChannelReport:
    precision: float
    f_beta: float
    auc: float
    tau: float
    positives: int


def score_stream(stream, model, store, cf, cfg, threads=1):
    """Verdicts for every stream item against a fixed snapshot."""
    facts = [it.fact for it in stream.items]
    if threads > 1:
        from .detect import score_batch
        return score_batch(facts, model, store, cf, cfg, threads=threads)
    return [score_fact(f, model, store, cf, cfg) for f in facts]


def channel_vectors(stream, verdicts, tau_s=None):
    """Per-channel (scores, labels) honoring the cascade order.

    The conceptual channel sees everything. The time channel sees what
    the static stage passed when tau_s is given, everything otherwise.
    """
    conc = ([v.static_score for v in verdicts],
            [it.label == CONCEPTUAL for it in stream.items])
    if tau_s is None:
        keep = list(range(len(verdicts)))
    else:
        keep = [i for i, v in enumerate(verdicts) if v.static_score <= tau_s]
    time_ch = ([verdicts[i].temporal_score for i in keep],
               [stream.items[i].label == TIME for i in keep])
    return conc, time_ch


def pick_thresholds(stream, verdicts, beta=0.5):
    """(tau_s, tau_t) by best F_beta per channel on a validation stream."""
    conc, _ = channel_vectors(stream, verdicts)
    tau_s, _ = best_threshold(*conc, beta=beta)
    _, time_ch = channel_vectors(stream, verdicts, tau_s=tau_s)
    if any(time_ch[1]):
        tau_t, _ = best_threshold(*time_ch, beta=beta)
    else:
        tau_t = SENTINEL
    return tau_s, tau_t


def missing_query_set(stream, store, negatives_per_positive=1, seed=0):
    """Deleted facts plus never-existing tuples at matched timestamps."""
    rng = random.Random(seed)
    queries = [(f, True) for f in stream.deleted]
    n_ent = store.n_entities
    n_rel = store.n_relations
    deleted = {f.key() for f in stream.deleted}
    for f in stream.deleted:
        for _ in range(negatives_per_positive):
            for _ in range(INJECT_RETRIES):
                cand = Fact(rng.randrange(n_ent), rng.randrange(n_rel),
                            rng.randrange(n_ent), f.t)
                if cand.key() not in store and cand.key() not in deleted and cand.s != cand.o:
                    queries.append((cand, False))
                    break
            else:
                raise RuntimeError("could not sample a negative candidate")
    queries.sort(key=lambda q: (q[0].t, q[0].key(), q[1]))
    return queries


def missing_score(verdict):
    """Ranking score: low on both channels means likely missing."""
    s = verdict.static_score + verdict.temporal_score
    return -s


def evaluate_missing(queries, model, store, cf, cfg):
    """(scores, labels) over the candidate query set."""
    scores = []
    labels = []
    for fact, is_deleted in queries:
        v = score_fact(fact, model, store, cf, cfg)
        scores.append(missing_score(v))
        labels.append(is_deleted)
    return scores, labels


def visible_store(base_store, stream, extra_facts=(), include_originals=True):
    """Store the detector consults while scoring a labeled stream.

    Valid items are present and anomalous tuples are absent. The
    originals behind conceptual and time corruptions stay visible: those
    classes model corrupted readings of events that did happen, and
    erasing the true event would strip later valid facts of their own
    precursors. Absence is the missing class's job; its deletions are
    never readded.
    """
    keys = [f.key() for f in base_store.facts]
    keys.extend(f.key() for f in extra_facts)
    for it in stream.items:
        if it.label == VALID:
            keys.append(it.fact.key())
        elif include_originals and it.original is not None:
            keys.append(it.original)
    return TkgStore.from_facts(keys, base_store.entities, base_store.relations,
                               base_store.t_raw)


@dataclass
class EvalReport:
    conceptual: ChannelReport
    time: ChannelReport
    missing: ChannelReport
    tau_s: float
    tau_t: float
    n_items: int

    def lines(self):
        yield "channel\tprecision\tf_beta\tpr_auc\ttau\tpositives"
        for name, ch in (("conceptual", self.conceptual), ("time", self.time),
                         ("missing", self.missing)):
            yield "%s\t%s\t%s\t%s\t%s\t%d" % (
                name, _fmt(ch.precision), _fmt(ch.f_beta), _fmt(ch.auc),
                _fmt(ch.tau), ch.positives)


def _fmt(x):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "undefined"
    if x == SENTINEL:
        return "sentinel"
    return "%.6f" % x


def streaming_protocol(store, build, cfg, seed=0, rate=0.15, beta=0.5,
                       updater_on=True, pools=None):
    """Time-ordered test sweep with optional online folding.

    Valid-classified facts enter the live store; with the updater on
    they also grow categories and the rule graph, and facts carrying
    unseen entities are handed to the updater regardless of their
    conceptual flag (the category path is what makes them scoreable).
    Returns (per-channel metrics dict, verdicts, stream).
    """
    import copy as _copy

    from .update import UpdaterSession

    train, valid, test = store.split_by_time()
    val_stream = inject(valid.facts, store, rate=rate, seed=seed * 2 + 1, pools=pools)
    base = visible_store(train, val_stream)
    val_verdicts = score_stream(val_stream, build.model, base, build.cf, cfg)
    tau_s, tau_t = pick_thresholds(val_stream, val_verdicts, beta=beta)

    # one deepcopy call so ledger.cf and cf stay the same object
    model, cf, ledger = _copy.deepcopy((build.model, build.cf, build.ledger))
    live = TkgStore.from_facts(
        [f.key() for f in train.facts] + [f.key() for f in valid.facts],
        store.entities, store.relations, store.t_raw)
    ledger.store = live
    ledger.ctx.store = live
    session = None
    if updater_on:
        session = UpdaterSession(store=live, cf=cf, model=model,
                                 ledger=ledger, L=build.config.L)

    test_stream = inject(test.facts, store, rate=rate, seed=seed * 2 + 2, pools=pools)
    verdicts = []
    for item in test_stream.items:
        v = score_fact(item.fact, model, live, cf, cfg)
        cls = classify(v, tau_s, tau_t)
        verdicts.append(v)
        if cls == VALID or (updater_on and v.new_entities):
            if updater_on:
                session.apply(*item.fact.key())
            else:
                live.append(*item.fact.key())

    conc, time_ch = channel_vectors(test_stream, verdicts, tau_s=tau_s)
    out = {}
    p, f, auc = metrics(*conc, beta=beta, tau=tau_s)
    out[CONCEPTUAL] = ChannelReport(p, f, auc, tau_s, sum(conc[1]))
    p, f, auc = metrics(*time_ch, beta=beta, tau=tau_t)
    out[TIME] = ChannelReport(p, f, auc, tau_t, sum(time_ch[1]))
    return out, verdicts, test_stream


def evaluate_protocol(store, build, cfg, seed=0, rate=0.15, beta=0.5,
                      pools=None, threads=1, fractions=(0.6, 0.1, 0.3),
                      classes=(CONCEPTUAL, TIME, MISSING)):
    """Full static protocol: split is assumed done by the caller.

    `build` is a finished BuildResult over the train store; `store` is
    the ground-truth store (train + validation + test) used for tuple
    membership and timestamp ranges. Returns (EvalReport, details dict).
    """
    train, valid, test = store.split_by_time(fractions)
    val_stream = inject(valid.facts, store, rate=rate, seed=seed * 2 + 1,
                        pools=pools, classes=classes)
    test_stream = inject(test.facts, store, rate=rate, seed=seed * 2 + 2,
                         pools=pools, classes=classes)

    base = visible_store(train, val_stream, extra_facts=())
    val_verdicts = score_stream(val_stream, build.model, base, build.cf, cfg, threads)
    tau_s, tau_t = pick_thresholds(val_stream, val_verdicts, beta=beta)

    vis = visible_store(train, test_stream, extra_facts=valid.facts)
    verdicts = score_stream(test_stream, build.model, vis, build.cf, cfg, threads)
    conc, time_ch = channel_vectors(test_stream, verdicts, tau_s=tau_s)
    p_c, f_c, auc_c = metrics(*conc, beta=beta, tau=tau_s)
    p_t, f_t, auc_t = metrics(*time_ch, beta=beta, tau=tau_t)

    queries = missing_query_set(test_stream, vis, seed=seed * 2 + 3)
    m_scores, m_labels = evaluate_missing(queries, build.model, vis, build.cf, cfg)
    auc_m = pr_auc(m_scores, m_labels) if any(m_labels) else float("nan")
    tau_m, _ = best_threshold(m_scores, m_labels, beta) if any(m_labels) else (SENTINEL, 0.0)
    p_m, f_m, _ = metrics(m_scores, m_labels, beta=beta, tau=tau_m) if any(m_labels) else (
        float("nan"),) * 3

    report = EvalReport(
        conceptual=ChannelReport(p_c, f_c, auc_c, tau_s, sum(conc[1])),
        time=ChannelReport(p_t, f_t, auc_t, tau_t, sum(time_ch[1])),
        missing=ChannelReport(p_m, f_m, auc_m, tau_m, sum(m_labels)),
        tau_s=tau_s, tau_t=tau_t, n_items=len(test_stream.items))
    details = {
        "val_stream": val_stream, "test_stream": test_stream,
        "verdicts": verdicts, "queries": queries,
        "missing_scores": m_scores, "missing_labels": m_labels,
    }
    return report, details
