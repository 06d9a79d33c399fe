import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radsearch.dataset import Dataset
from radsearch.errors import ConfigError, MemoryBudgetExceeded
from radsearch.score import ScoreContext, ScoreFn, required_spec
from radsearch.search import (
    Rule,
    SearchConfig,
    enumeration_edges,
    hill_climb,
    naive_search,
    nsn_search,
    prune_check,
    radsearch,
    trace_radsearch,
)
from radsearch.synthetic import random_dataset

EXHAUSTIVE = (radsearch, nsn_search, naive_search)


def _cfg(ds, score="mean", k=2, n_support=1, top_n=1, output=None, **kw):
    fn = ScoreFn.named(score)
    target = None if fn.needs_class else "y"
    spec = required_spec(fn, ds, target=target, output_attribute=output)
    return SearchConfig(k=k, n_support=n_support, score=fn, spec=spec, top_n=top_n, **kw)


def _with_class(ds, rng, n_classes=3):
    cls = rng.integers(0, n_classes, ds.n_rows)
    return Dataset(ds.attribute_names + ("cls",), ds.arities + (n_classes,),
                   np.vstack([ds.columns, cls]), ds.targets)


def test_rule_basics(t1_ds):
    r = Rule([(1, 1), (0, 1)])
    assert r.literals == ((0, 1), (1, 1))
    assert r.format(t1_ds) == "A=1 ∧ B=1"
    assert Rule(()).format(t1_ds) == "TRUE"
    assert r.mask(t1_ds).tolist() == [False] * 6 + [True, True]
    with pytest.raises(Exception):
        Rule([(0, 1), (0, 0)])


@pytest.mark.parametrize("search", EXHAUSTIVE)
def test_t1_best_pair(t1_ds, search):
    res = search(t1_ds, _cfg(t1_ds, k=2))
    assert res.best.rule.literals == ((0, 1), (1, 1))
    assert res.best_score == 7.5
    assert res.best.sumstats.tolist() == [2.0, 15.0]


def test_t1_rule_count(t1_ds):
    # 1 empty rule + 6 literals + 12 pairs
    res = naive_search(t1_ds, _cfg(t1_ds, k=2))
    assert res.stats.rules_scored == 19
    everything = naive_search(t1_ds, _cfg(t1_ds, k=2, top_n=100))
    assert len(everything.entries) == 19


@pytest.mark.parametrize("search", EXHAUSTIVE)
def test_t1_full_depth(t1_ds, search):
    res = search(t1_ds, _cfg(t1_ds, k=3))
    assert res.best.rule.literals == ((0, 1), (1, 1), (2, 1))
    assert res.best_score == 8.0


@pytest.mark.parametrize("search", EXHAUSTIVE)
def test_only_empty_rule_meets_support(t1_ds, search):
    # every literal matches 4 rows; the empty rule (8 rows) is still a rule
    res = search(t1_ds, _cfg(t1_ds, k=1, n_support=5, top_n=10))
    assert [e.rule.literals for e in res.entries] == [()]
    assert res.best_score == 4.5


def test_hill_climb_empty_when_no_literal_qualifies(t1_ds):
    assert hill_climb(t1_ds, _cfg(t1_ds, k=1, n_support=5)).entries == []


def test_support_above_row_count_is_config_error(t1_ds):
    with pytest.raises(ConfigError):
        radsearch(t1_ds, _cfg(t1_ds, k=1, n_support=9))


def test_top_n_larger_than_satisfying(t1_ds):
    res = radsearch(t1_ds, _cfg(t1_ds, k=2, n_support=3, top_n=50))
    # 1 empty rule + 6 literals of 4 rows; pairs match 2 rows
    assert len(res.entries) == 7
    scores = [e.score for e in res.entries]
    assert scores == sorted(scores, reverse=True)


def test_ties_ranked_by_length_then_literals(t1_ds):
    res = naive_search(t1_ds, _cfg(t1_ds, k=2, top_n=19))
    keys = [(-e.score, len(e.rule), e.rule.literals) for e in res.entries]
    assert keys == sorted(keys)


def test_config_errors(t1_ds):
    with pytest.raises(ConfigError):
        radsearch(t1_ds, _cfg(t1_ds, k=0))
    with pytest.raises(ConfigError):
        radsearch(t1_ds, _cfg(t1_ds, k=4))
    with pytest.raises(ConfigError):
        radsearch(t1_ds, _cfg(t1_ds, k=1, pruning=True))
    with pytest.raises(ConfigError):
        radsearch(t1_ds, _cfg(t1_ds, k=1, n_support=9))
    with pytest.raises(ConfigError):
        radsearch(t1_ds, _cfg(t1_ds, k=1, top_n=0))


def test_nsn_cube_count(rng):
    ds = random_dataset(rng, 50, (2, 3, 2, 4, 2))
    res = nsn_search(ds, _cfg(ds, k=3))
    assert res.stats.cubes_evaluated == sum(math.comb(5, q) for q in range(4))


def test_rowtree_tweaks_follow_enumeration(rng):
    ds = random_dataset(rng, 60, (2, 3, 2, 4, 2, 3))
    res = radsearch(ds, _cfg(ds, k=3))
    assert res.stats.tweaks_by_level == enumeration_edges(6, 3)


def test_memory_budget_aborts(rng):
    ds = random_dataset(rng, 200, (4,) * 6)
    with pytest.raises(MemoryBudgetExceeded):
        radsearch(ds, _cfg(ds, k=3, max_ad_nodes=10))


def test_hill_climb_t1(t1_ds):
    res = hill_climb(t1_ds, _cfg(t1_ds, k=2, top_n=2))
    assert [(e.rule.literals, e.score) for e in res.entries] == [
        (((0, 1), (1, 1)), 7.5),
        (((0, 1),), 6.5),
    ]


def test_hill_climb_can_be_beaten():
    # the best single literal (a2=1) is not part of the best pair (a0=1 ∧ a1=1)
    cols = np.array([
        [1, 1, 1, 1, 0, 0, 0, 0, 0, 0],
        [1, 1, 0, 0, 1, 1, 0, 0, 0, 0],
        [0, 0, 0, 0, 0, 0, 1, 1, 1, 1],
    ])
    y = np.array([10, 10, 0, 0, 0, 0, 8, 8, 8, 8], dtype=float)
    ds = Dataset(("a0", "a1", "a2"), (2, 2, 2), cols, {"y": y})
    cfg = _cfg(ds, k=2, n_support=2)
    best_single = naive_search(ds, _cfg(ds, k=1, n_support=2)).best
    assert best_single.rule.literals == ((2, 1),)
    assert hill_climb(ds, cfg).best_score < radsearch(ds, cfg).best_score == 10.0


def test_prune_check_semantics(t1_ds):
    cfg = _cfg(t1_ds, score="impact", k=2, pruning=True)
    stats = cfg.spec.matrix(t1_ds)
    ctx = ScoreContext.from_rows(stats, t1_ds.all_rows(), 1, cfg.spec)
    cells = np.array([[2.0, 3.0]])
    assert not prune_check(cfg, cells, 100.0, False, ctx)
    # bound is 2 * (8 - 4.5) = 7
    assert prune_check(cfg, cells, 7.5, True, ctx)
    assert not prune_check(cfg, cells, 7.0, True, ctx)
    ds = _with_class(t1_ds, np.random.default_rng(0), 2)
    scfg = _cfg(ds, score="strength", k=2, n_support=5, output="cls", pruning=True)
    sctx = ScoreContext(5, np.array([4.0, 4.0]), 8.0)
    assert prune_check(scfg, np.array([[2.0, 1.0]]), 0.1, True, sctx)


def test_excluded_and_in_play(t1_ds):
    res = radsearch(t1_ds, _cfg(t1_ds, k=2, excluded_attributes=frozenset({0})))
    assert all(a != 0 for a, _ in res.best.rule)
    res = radsearch(t1_ds, _cfg(t1_ds, k=1, in_play_rows=np.arange(4)))
    assert res.best.rule.literals == ((1, 1),)
    assert res.best.sumstats.tolist() == [2.0, 7.0]


def test_class_scores_exclude_output(rng):
    ds = _with_class(random_dataset(rng, 80, (2, 3, 2)), rng)
    res = radsearch(ds, _cfg(ds, score="ent", k=2, output="cls", top_n=30))
    assert all(a != 3 for e in res.entries for a, _ in e.rule)


def test_threads_match_serial(rng):
    ds = random_dataset(rng, 150, (2, 3, 4, 2, 3))
    serial = radsearch(ds, _cfg(ds, k=3, top_n=10))
    parallel = radsearch(ds, _cfg(ds, k=3, top_n=10, threads=2))
    assert serial.ranked() == parallel.ranked()


def test_trace_yields_every_subset(rng):
    ds = random_dataset(rng, 40, (2, 3, 2, 2))
    seen = [subset for subset, *_ in trace_radsearch(ds, _cfg(ds, k=2))]
    assert seen == [s for q in (1, 2) for s in itertools.combinations(range(4), q)]


SCORES = ("mean", "ent", "var", "strength", "impact", "bgss")


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from(SCORES), st.booleans())
def test_exhaustive_searchers_agree(seed, score, big_support):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(3, 6))
    n = int(rng.integers(20, 120))
    ds = random_dataset(rng, n, rng.integers(2, 5, m))
    output = None
    if ScoreFn.named(score).needs_class:
        ds = _with_class(ds, rng)
        output = "cls"
    k = int(rng.integers(1, 4))
    support = math.ceil(n / 10) if big_support else 1
    cfg = _cfg(ds, score=score, k=k, n_support=support, top_n=10, output=output)
    ranked = [s(ds, cfg).ranked() for s in EXHAUSTIVE]
    assert ranked[0] == ranked[1] == ranked[2]
    hill = hill_climb(ds, cfg)
    if ranked[0]:
        assert hill.best_score <= ranked[0][0][1]
    if ScoreFn.named(score).has_bound:
        pruned = radsearch(ds, _cfg(ds, score=score, k=k, n_support=support, top_n=10,
                                    output=output, pruning=True))
        assert pruned.ranked() == ranked[0]


def test_rules_scored_audit(rng):
    arities = (2, 3, 4, 2)
    ds = random_dataset(rng, 90, arities)
    expected = sum(math.prod(arities[a] for a in s)
                   for q in range(4) for s in itertools.combinations(range(4), q))
    for search in EXHAUSTIVE:
        assert search(ds, _cfg(ds, k=3)).stats.rules_scored == expected


def test_entropy_argmax_independent_of_log_base(rng):
    ds = _with_class(random_dataset(rng, 120, (2, 3, 2, 4)), rng)
    res = naive_search(ds, _cfg(ds, score="ent", k=2, output="cls", n_support=5, top_n=10**6))

    def neg_entropy_log2(counts):
        p = counts[counts > 0] / counts.sum()
        return float((p * np.log2(p)).sum())

    top_log2 = max(neg_entropy_log2(e.sumstats) for e in res.entries)
    assert math.isclose(neg_entropy_log2(res.best.sumstats), top_log2)
