import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radsearch.cube import scan_rule
from radsearch.dataset import ConstantOne, StatVecSpec, Target
from radsearch.errors import ConfigError
from radsearch.score import (
    ScoreContext,
    ScoreFn,
    ScoreKind,
    optimistic_bound,
    required_spec,
    score_between_group_ss,
    score_impact,
    score_mean_target,
    score_neg_entropy,
    score_neg_variance,
    score_strength,
)

NEG_INF = -math.inf


def ctx(n_support=1, gs=(8.0, 36.0), max_target=None):
    gs = np.asarray(gs, dtype=float)
    return ScoreContext(n_support, gs, float(gs[0]), max_target)


def test_mean_on_t1_rule(t1_ds):
    spec = StatVecSpec([ConstantOne(), Target("y")], t1_ds)
    s = scan_rule(t1_ds, spec, [(0, 1)])
    assert s.tolist() == [4.0, 26.0]
    assert score_mean_target(s, ctx()) == 6.5


def test_mean_gates():
    assert score_mean_target([0, 0], ctx()) == NEG_INF
    assert score_mean_target([3, 12], ctx(n_support=5)) == NEG_INF


@pytest.mark.parametrize("s, expected", [
    ((4, 0, 0), 0.0),
    ((2, 2, 0), -math.log(2)),
    ((1, 1, 1), -math.log(3)),
])
def test_neg_entropy_examples(s, expected):
    assert score_neg_entropy(s, ctx()) == pytest.approx(expected, abs=1e-12)


def test_neg_entropy_rejects_fractional_counts():
    with pytest.raises(ConfigError):
        score_neg_entropy((1.5, 2.0), ctx())


@pytest.mark.parametrize("s, expected", [((2, 4, 8), 0.0), ((2, 2, 4), -1.0), ((1, 5, 25), 0.0)])
def test_neg_variance_examples(s, expected):
    assert score_neg_variance(s, ctx()) == expected


@pytest.mark.parametrize("s, expected", [((70, 30), 0.7), ((5, 5), 0.5), ((0, 9), 1.0)])
def test_strength_examples(s, expected):
    assert score_strength(s, ctx()) == pytest.approx(expected)


def test_impact_examples(t1_ds):
    c = ScoreContext(1, np.array([10.0, 30.0]), 10.0)
    assert score_impact([10, 50], c) == 20.0
    assert score_impact([7, 21], c) == 0.0
    spec = StatVecSpec([ConstantOne(), Target("y")], t1_ds)
    s = scan_rule(t1_ds, spec, [(2, 1)])
    assert s.tolist() == [4.0, 20.0]
    assert score_impact(s, ctx()) == 2.0


def _sse_reduction(y, ind):
    # direct least squares: intercept-only vs intercept + indicator
    base = ((y - y.mean()) ** 2).sum()
    x = np.column_stack([np.ones_like(y), ind])
    coef, *_ = np.linalg.lstsq(x, y, rcond=None)
    return base - ((y - x @ coef) ** 2).sum()


def test_bgss_t1_matches_least_squares(t1_ds):
    y = t1_ds.targets["y"]
    ind = (t1_ds.columns[0] == 1).astype(float)
    assert _sse_reduction(y, ind) == pytest.approx(32.0)
    assert score_between_group_ss([4, 26], ctx()) == pytest.approx(32.0)


def test_bgss_degenerate():
    assert score_between_group_ss([4, 18], ctx()) == 0.0
    assert score_between_group_ss([8, 36], ctx()) == NEG_INF
    assert score_between_group_ss([0, 0], ctx()) == NEG_INF


@settings(max_examples=80, deadline=None)
@given(st.lists(st.integers(-20, 20), min_size=3, max_size=30), st.data())
def test_bgss_is_sse_reduction(ys, data):
    y = np.array(ys, dtype=float)
    mask = np.array(data.draw(st.lists(st.booleans(), min_size=len(ys), max_size=len(ys))))
    n = mask.sum()
    c = ScoreContext(1, np.array([len(y), y.sum()]), float(len(y)))
    got = score_between_group_ss([n, y[mask].sum()], c)
    if n in (0, len(y)):
        assert got == NEG_INF
    else:
        assert got == pytest.approx(_sse_reduction(y, mask.astype(float)), rel=1e-9, abs=1e-9)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.integers(0, 50), min_size=1, max_size=6))
def test_entropy_matches_direct_formula(counts):
    n = sum(counts)
    got = score_neg_entropy(counts, ctx())
    if n == 0:
        assert got == NEG_INF
        return
    p = np.array([c / n for c in counts if c])
    assert got == pytest.approx(float((p * np.log(p)).sum()), abs=1e-12)
    assert got <= 1e-15


def test_scores_are_shape_independent():
    cells = np.array([[3, 1, 0], [2, 2, 1], [5, 0, 0], [1, 1, 1]], dtype=float)
    fn = ScoreFn(ScoreKind.NEG_ENTROPY)
    batch = fn.evaluate(cells, ctx())
    singles = [fn(c, ctx()) for c in cells]
    assert batch.tolist() == singles


def test_bounds():
    fn = ScoreFn(ScoreKind.STRENGTH)
    assert optimistic_bound(fn, [70, 30], ctx(n_support=50)) == 1.0
    assert optimistic_bound(fn, [20, 20], ctx(n_support=50)) == NEG_INF
    imp = ScoreFn(ScoreKind.IMPACT)
    c = ScoreContext(1, np.array([10.0, 30.0]), 10.0, max_target=9.0)
    assert optimistic_bound(imp, [10, 50], c) == 60.0
    with pytest.raises(ConfigError):
        ScoreFn(ScoreKind.MEAN_TARGET).bound(np.array([[1.0, 1.0]]), ctx())


def test_impact_bound_dominates_specialisations_on_t1(t1_ds):
    spec = StatVecSpec([ConstantOne(), Target("y")], t1_ds)
    stats = spec.matrix(t1_ds)
    c = ScoreContext.from_rows(stats, t1_ds.all_rows(), 1, spec)
    imp = ScoreFn(ScoreKind.IMPACT)
    literals = [(a, v) for a in range(3) for v in range(2)]
    rules = [()] + [r for q in (1, 2, 3) for r in itertools.combinations(literals, q)
                    if len({a for a, _ in r}) == q]
    for r in rules:
        b = optimistic_bound(imp, scan_rule(t1_ds, stats, r), c)
        for s in rules:
            if set(r) <= set(s):
                assert imp(scan_rule(t1_ds, stats, s), c) <= b


def test_required_spec(t1_ds):
    assert required_spec(ScoreFn.named("var"), t1_ds, target="y").labels == ("1", "y", "y^2")
    assert required_spec(ScoreFn.named("ent"), t1_ds, output_attribute="A").dim == 2
    with pytest.raises(ConfigError):
        required_spec(ScoreFn.named("ent"), t1_ds, target="y", output_attribute="A")
    with pytest.raises(ConfigError):
        required_spec(ScoreFn.named("mean"), t1_ds, output_attribute="A")
    with pytest.raises(ConfigError):
        ScoreFn.named("median")


def test_check_spec_mismatch(t1_ds):
    spec = StatVecSpec([ConstantOne(), Target("y")], t1_ds)
    with pytest.raises(ConfigError):
        ScoreFn.named("var").check_spec(spec)
