"""Category mining, aggregation, and greedy selection."""

import itertools
import random

import pytest

from tkgrules.categories import (
    CategoryFunction,
    aggregate,
    default_min_support,
    induce,
    mine_frequent_combinations,
    select_categories,
)

from generators import random_store


def brute_combinations(store, max_size, min_support):
    """Every relation subset with enough supporting entities."""
    out = []
    for size in range(1, max_size + 1):
        for combo in itertools.combinations(range(store.n_relations), size):
            ents = frozenset(e for e, rs in store.rel_of.items()
                             if set(combo) <= rs)
            if len(ents) >= min_support:
                out.append((frozenset(combo), ents))
    out.sort(key=lambda c: (-len(c[1]), tuple(sorted(c[0]))))
    return out


def test_mining_matches_exhaustive_enumeration():
    for seed in range(10):
        store = random_store(random.Random(seed))
        got = mine_frequent_combinations(store, max_size=3, min_support=2)
        assert got == brute_combinations(store, 3, 2)


def test_mining_respects_max_size_and_support():
    store = random_store(random.Random(3), n_facts=60)
    got = mine_frequent_combinations(store, max_size=2, min_support=4)
    assert got == brute_combinations(store, 2, 4)
    assert all(len(rels) <= 2 for rels, _ in got)
    assert all(len(ents) >= 4 for _, ents in got)
    with pytest.raises(ValueError):
        mine_frequent_combinations(store, min_support=0)


def test_default_min_support_floor():
    assert default_min_support(10) == 2
    assert default_min_support(5000) == 5


def test_aggregate_entity_pass_intersects():
    a = (frozenset({0}), frozenset(range(10)))
    b = (frozenset({1}), frozenset(range(9)))   # overlap 9/9
    got = dict(aggregate([a, b]))
    assert got[frozenset({0, 1})] == frozenset(range(9))
    assert got[frozenset({0})] == frozenset(range(10))


def test_aggregate_relation_pass_unions():
    # disjoint entity sets, so only the relation-overlap rule can fire
    a = (frozenset({0, 1}), frozenset({0, 1, 2}))
    b = (frozenset({0, 1, 2}), frozenset({7, 8, 9}))
    got = dict(aggregate([a, b]))
    assert got[frozenset({0, 1})] == frozenset({0, 1, 2, 7, 8, 9})


def test_aggregate_duplicates_keep_larger_entity_set():
    combos = [(frozenset({0}), frozenset({1, 2})),
              (frozenset({0}), frozenset({1, 2, 3}))]
    assert aggregate(combos) == [(frozenset({0}), frozenset({1, 2, 3}))]


def test_aggregate_reaches_fixpoint():
    for seed in range(5):
        store = random_store(random.Random(seed))
        once = aggregate(mine_frequent_combinations(store, min_support=2))
        assert aggregate(once) == once


def test_selection_covers_every_active_entity():
    for seed in range(8):
        store = random_store(random.Random(seed), n_facts=30)
        cf = induce(store, 3)
        for e in range(store.n_entities):
            cids = cf.of(e)
            if not store.rel_of.get(e):
                assert cids == ()
                continue
            assert len(cids) >= 1
            assert list(cids) == sorted(cids)
            for cid in cids:
                assert e in cf.cats[cid].ents
        # both aggregation rules preserve rels <= R(e) for every member
        for cat in cf.cats:
            for e in cat.ents:
                assert cat.rels <= store.rel_of[e]


def test_singleton_fallback_for_rare_entities():
    store = random_store(random.Random(1), n_facts=40)
    # one entity with a relation nothing else uses, below any support
    lone = store.ent("loner")
    other = store.ent("loner_peer")
    rare = store.rel("rare")
    store.append(lone, rare, other, 0)
    cf = induce(store, 3)
    assert cf.of(lone)
    cid = cf.of(lone)[0]
    assert cf.cats[cid].rels == frozenset({rare})
    assert cf.category_id({rare}) is not None


def test_category_function_bookkeeping():
    cf = CategoryFunction(2)
    cat = cf.add_category({1, 2}, {5, 6})
    assert cat.cid == 0 and cat.rel_tuple() == (1, 2) and cat.n_c == 2
    assert cf.category_id({2, 1}) == 0
    assert cf.of(5) == (0,)
    online = cf.add_category({3}, (), online=True)
    assert online.online and online.n_c == 0
    cf.assign(7, 1)
    cf.assign(7, 1)
    cf.assign(7, 0)
    assert cf.of(7) == (0, 1)
    assert 7 in cf.cats[1].ents


def test_catalog_and_dump_are_deterministic():
    lines_a = list(induce(random_store(random.Random(4)), 3).dump_lines())
    cf_b = induce(random_store(random.Random(4)), 3)
    assert lines_a == list(cf_b.dump_lines())
    # catalog keeps the full aggregated ranking in support order
    order = [(-len(e), tuple(sorted(r))) for r, e in cf_b.catalog]
    assert cf_b.catalog and order == sorted(order)


def test_select_rejects_bad_k():
    store = random_store(random.Random(0))
    with pytest.raises(ValueError):
        select_categories([], store, 0)
