"""Temporal knowledge graph storage.

Holds deduplicated quadruples (s, r, o, t) with interned integer ids,
plus the secondary indexes the rest of the pipeline leans on:
per-pair interaction sequences, per-timestamp slices, and per-entity
relation sets.
"""

from __future__ import annotations

import bisect
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Optional


@dataclass(frozen=True)
class Fact:
    s: int
    r: int
    o: int
    t: int

    def key(self):
        return (self.s, self.r, self.o, self.t)


@dataclass(frozen=True)
class DurationFact:
    """A fact valid over [t_start, t_end]."""

    s: int
    r: int
    o: int
    t_start: int
    t_end: int


class ParseError(ValueError):
    def __init__(self, lineno, reason):
        super().__init__("line %d: %s" % (lineno, reason))
        self.lineno = lineno
        self.reason = reason


class TkgStore:
    """Append-only quadruple store with interning and indexes.

    Entity and relation labels are interned to dense ints in first-seen
    order. Timestamps are plain ints used as-is; timespans therefore
    keep the dataset's own units, and stream values never seen before
    (including ones outside the observed range) need no translation.
    """

    def __init__(self):
        self.entities: list[str] = []
        self.relations: list[str] = []
        self._ent_id: dict[str, int] = {}
        self._rel_id: dict[str, int] = {}
        self.t_raw: list = []          # raw timestamp value per dense index
        self._t_id: dict = {}
        self.facts: list[Fact] = []
        self._fact_keys: set = set()
        # (s, o) -> [(t, r), ...] kept sorted; S(s, o) and S(o, s) are distinct
        self.seq: dict[tuple, list] = defaultdict(list)
        self.by_t: dict[int, list] = defaultdict(list)
        # entity -> relations incident in either direction
        self.rel_of: dict[int, set] = defaultdict(set)
        # (entity, r) -> [(t, other)] sorted, for instantiation lookups
        self.out_index: dict[tuple, list] = defaultdict(list)
        self.in_index: dict[tuple, list] = defaultdict(list)

    # -- interning ----------------------------------------------------

    def ent(self, label) -> int:
        i = self._ent_id.get(label)
        if i is None:
            i = len(self.entities)
            self._ent_id[label] = i
            self.entities.append(label)
        return i

    def rel(self, label) -> int:
        i = self._rel_id.get(label)
        if i is None:
            i = len(self.relations)
            self._rel_id[label] = i
            self.relations.append(label)
        return i

    def timestamp(self, raw) -> int:
        """Record a timestamp value; the identity, kept for the range table."""
        raw = int(raw)
        if raw not in self._t_id:
            self._t_id[raw] = raw
            bisect.insort(self.t_raw, raw)
        return raw

    # -- construction -------------------------------------------------

    @classmethod
    def from_lines(cls, lines: Iterable[str], duration: bool = False) -> "TkgStore":
        """Build a store from TSV lines `s r o t [t_end]`.

        Lines starting with `#` and blank lines are skipped. Duplicate
        quadruples are dropped. Malformed lines raise ParseError with the
        line number.
        """
        store = cls()
        rows = []
        want = 5 if duration else 4
        for lineno, ln in enumerate(lines, 1):
            ln = ln.rstrip("\n")
            if not ln.strip() or ln.lstrip().startswith("#"):
                continue
            parts = ln.split("\t")
            if len(parts) < want:
                raise ParseError(lineno, "expected %d tab-separated fields, got %d" % (want, len(parts)))
            try:
                ts = [cls._parse_time(p, lineno) for p in parts[3:want]]
            except ParseError:
                raise
            if duration and ts[1] < ts[0]:
                raise ParseError(lineno, "t_end %r before t_start %r" % (parts[4], parts[3]))
            rows.append((parts[0], parts[1], parts[2], ts))
        for v in sorted({t for row in rows for t in row[3]}):
            store.timestamp(v)
        if duration:
            store.duration_rows = []
            for s, r, o, ts in rows:
                store.duration_rows.append(DurationFact(
                    store.ent(s), store.rel(r), store.ent(o), ts[0], ts[1]))
        else:
            for s, r, o, ts in rows:
                store.append(store.ent(s), store.rel(r), store.ent(o), ts[0])
        return store

    @staticmethod
    def _parse_time(text, lineno):
        try:
            return int(text)
        except ValueError:
            raise ParseError(lineno, "bad timestamp %r" % text)

    @classmethod
    def from_facts(cls, facts: Iterable[tuple], entities, relations, t_raw) -> "TkgStore":
        """Rebuild a store view over existing interning tables."""
        store = cls()
        for e in entities:
            store.ent(e)
        for r in relations:
            store.rel(r)
        for v in t_raw:
            store.timestamp(v)
        for f in facts:
            s, r, o, t = f if isinstance(f, tuple) else f.key()
            store.append(s, r, o, t)
        return store

    # -- mutation -----------------------------------------------------

    def append(self, s: int, r: int, o: int, t: int) -> Optional[Fact]:
        """Add one fact by ids. Returns the Fact, or None if duplicate."""
        key = (s, r, o, t)
        if key in self._fact_keys:
            return None
        self._fact_keys.add(key)
        self.timestamp(t)
        f = Fact(s, r, o, t)
        self.facts.append(f)
        bisect.insort(self.seq[(s, o)], (t, r))
        self.by_t[t].append(f)
        self.rel_of[s].add(r)
        self.rel_of[o].add(r)
        bisect.insort(self.out_index[(s, r)], (t, o))
        bisect.insort(self.in_index[(o, r)], (t, s))
        return f

    # -- queries ------------------------------------------------------

    def __contains__(self, key):
        return key in self._fact_keys

    def __len__(self):
        return len(self.facts)

    def interaction_sequence(self, s: int, o: int) -> list:
        """Ordered [(t, r), ...] between s and o, subject side s only."""
        return self.seq.get((s, o), [])

    @property
    def n_entities(self):
        return len(self.entities)

    @property
    def n_relations(self):
        return len(self.relations)

    @property
    def n_timestamps(self):
        return len(self.t_raw)

    def timestamps(self) -> list:
        return sorted(self.by_t.keys())

    def split_by_time(self, fractions=(0.6, 0.1, 0.3)):
        """Split into (train, valid, test) stores by contiguous timestamp blocks.

        Fractions apply to the list of distinct timestamps present, not to
        fact counts. Interning tables are shared so ids stay comparable.
        """
        if abs(sum(fractions) - 1.0) > 1e-9:
            raise ValueError("fractions must sum to 1")
        ts = self.timestamps()
        n = len(ts)
        a = int(n * fractions[0] + 1e-9)
        b = int(n * (fractions[0] + fractions[1]) + 1e-9)
        blocks = (set(ts[:a]), set(ts[a:b]), set(ts[b:]))
        out = []
        for block in blocks:
            sub = [f for f in self.facts if f.t in block]
            out.append(TkgStore.from_facts(
                [f.key() for f in sub], self.entities, self.relations, self.t_raw))
        return tuple(out)

    def summary(self) -> str:
        lines = [
            "entities\t%d" % self.n_entities,
            "relations\t%d" % self.n_relations,
            "timestamps\t%d" % self.n_timestamps,
            "facts\t%d" % len(self.facts),
            "entity_pairs\t%d" % len(self.seq),
        ]
        return "\n".join(lines) + "\n"
