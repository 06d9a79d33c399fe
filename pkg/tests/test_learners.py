import math
import warnings

import numpy as np
import pytest

from radsearch.dataset import Dataset, from_columns
from radsearch.errors import ConfigError
from radsearch.learners import (
    RankDeficiencyWarning,
    kfold_eval,
    learn_dlist,
    learn_radreg,
    learn_reglist,
    least_squares_fit,
)
from radsearch.search import hill_climb, radsearch
from radsearch.synthetic import random_dataset


def _entropy(counts):
    counts = np.asarray(counts, dtype=float)
    n = counts.sum()
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum())


def test_dlist_single_pure_rule(rng):
    a = rng.integers(0, 2, 60)
    b = rng.integers(0, 3, 60)
    ds = from_columns({"A": a, "B": b, "cls": a})
    model = learn_dlist(ds, "cls", k=1, n_support=1)
    assert len(model.entries) == 1
    assert model.entries[0].rule.literals in (((0, 0),), ((0, 1),))
    assert model.loss(ds, None) == 0.0


def test_dlist_with_too_few_rows(t1_ds):
    ds = Dataset(t1_ds.attribute_names + ("cls",), (2, 2, 2, 2),
                 np.vstack([t1_ds.columns, [0, 0, 0, 1, 1, 1, 1, 1]]))
    model = learn_dlist(ds, "cls", k=2, n_support=5, rows=[0, 1, 2, 3])
    assert model.entries == []
    assert model.default == 0


def test_dlist_single_level_output():
    ds = from_columns({"A": [0, 1, 0, 1], "cls": [0, 0, 0, 0]})
    model = learn_dlist(ds, "cls", k=1, n_support=1)
    assert model.entries == []
    assert model.to_text(ds) == "predict cls = 0"


def test_dlist_entries_do_not_raise_entropy(rng):
    ds = random_dataset(rng, 300, (2, 3, 2, 3, 2))
    cls = (ds.columns[0] ^ (ds.columns[2] & (rng.random(300) < 0.8))).astype(int)
    ds = Dataset(ds.attribute_names + ("cls",), ds.arities + (2,), np.vstack([ds.columns, cls]))
    model = learn_dlist(ds, "cls", k=2, n_support=5)
    remaining = ds.all_rows()
    for e in model.entries:
        before = _entropy(np.bincount(cls[remaining], minlength=2))
        assert _entropy(e.distribution) <= before + 1e-12
        hit = e.rule.mask(ds, remaining)
        assert np.array_equal(e.distribution, np.bincount(cls[remaining[hit]], minlength=2))
        remaining = remaining[~hit]


def test_dlist_text(t1_ds):
    ds = Dataset(t1_ds.attribute_names + ("cls",), (2, 2, 2, 2),
                 np.vstack([t1_ds.columns, t1_ds.columns[0] & t1_ds.columns[1]]))
    text = learn_dlist(ds, "cls", k=2, n_support=1).to_text(ds)
    assert text.splitlines()[0].startswith("if ")
    assert text.splitlines()[-1].startswith("else predict cls = ")


def test_reglist_t1(t1_ds):
    model = learn_reglist(t1_ds, "y", k=2, n_support=2)
    assert model.entries[0].rule.literals == ((0, 1), (1, 1))
    assert model.entries[0].value == 7.5
    assert model.to_text(t1_ds).splitlines() == [
        "if A=1 ∧ B=1 then predict y=7.50",
        "else if A=1 then predict y=5.50",
        "else if B=1 then predict y=3.50",
        "else predict y=1.50",
    ]
    assert model.loss(t1_ds, None) == pytest.approx(0.25)


def test_reglist_predictions_beat_remaining_mean(rng):
    ds = random_dataset(rng, 200, (2, 3, 2, 4))
    y = ds.targets["y"]
    model = learn_reglist(ds, "y", k=2, n_support=10)
    remaining = ds.all_rows()
    for e in model.entries:
        hit = e.rule.mask(ds, remaining)
        remaining = remaining[~hit]
        if len(remaining):
            assert e.value >= y[remaining].mean()


def test_reglist_constant_target(t1_ds):
    ds = t1_ds.with_target("y", np.full(8, 3.0))
    model = learn_reglist(ds, "y", k=2, n_support=1)
    assert all(e.value == 3.0 for e in model.entries)
    assert model.default == 3.0


def test_radreg_exact_single_term(t1_ds):
    ds = t1_ds.with_target("y", 2.0 + 5.0 * t1_ds.columns[0])
    model = learn_radreg(ds, "y", k=2, n_support=1, max_terms=3)
    assert len(model.terms) == 1
    rule, coef = model.terms[0]
    # the indicator and its complement explain the same variance; both are exact
    if rule.literals == ((0, 1),):
        assert (model.intercept, coef) == pytest.approx((2.0, 5.0), abs=1e-9)
    else:
        assert rule.literals == ((0, 0),)
        assert (model.intercept, coef) == pytest.approx((7.0, -5.0), abs=1e-9)
    assert model.loss(ds, None) == pytest.approx(0.0, abs=1e-18)


def test_radreg_mse_non_increasing(rng):
    ds = random_dataset(rng, 300, (2, 3, 2, 3, 2))
    model = learn_radreg(ds, "y", k=2, n_support=5, max_terms=5)
    h = model.mse_history
    assert all(b <= a + 1e-12 for a, b in zip(h, h[1:]))


def test_radreg_constant_target(t1_ds):
    ds = t1_ds.with_target("y", np.full(8, 4.0))
    model = learn_radreg(ds, "y", k=2, n_support=1, max_terms=1)
    assert model.terms == []
    assert model.intercept == 4.0


def test_radreg_rejects_zero_terms(t1_ds):
    with pytest.raises(ConfigError):
        learn_radreg(t1_ds, "y", k=2, n_support=1, max_terms=0)


def test_least_squares_examples():
    y = np.array([1.0, 2.0, 6.0, 7.0])
    assert least_squares_fit(np.ones((4, 1)), y).coefficients[0] == pytest.approx(4.0)
    ind = np.array([0.0, 0.0, 1.0, 1.0])
    fit = least_squares_fit(np.column_stack([np.ones(4), ind]), y)
    assert fit.coefficients == pytest.approx([1.5, 5.0])
    assert not fit.rank_deficient
    with pytest.warns(RankDeficiencyWarning):
        fit = least_squares_fit(np.column_stack([np.ones(4), ind, ind]), y)
    assert fit.rank_deficient


def test_kfold_majority_learner(rng):
    n = 400
    cls = (rng.random(n) < 0.3).astype(int)
    ds = from_columns({"A": rng.integers(0, 2, n), "cls": cls})

    class Majority:
        def __init__(self, label):
            self.label = label

        def loss(self, data, rows):
            return float(np.mean(data.columns[1, rows] != self.label))

    def fit(data, rows):
        return Majority(int(np.argmax(np.bincount(data.columns[1, rows]))))

    res = kfold_eval(ds, fit, folds=10, seed=3)
    expected = 1 - max(cls.mean(), 1 - cls.mean())
    assert abs(res.mean - expected) <= 3 * max(res.stderr, 1e-12)
    again = kfold_eval(ds, fit, folds=10, seed=3)
    assert again.per_fold == res.per_fold


def test_kfold_guards_and_loo(t1_ds):
    fit = lambda data, rows: learn_reglist(data, "y", k=1, n_support=1, rows=rows)  # noqa: E731
    with pytest.raises(ConfigError):
        kfold_eval(t1_ds, fit, folds=50, seed=0)
    with pytest.raises(ConfigError):
        kfold_eval(t1_ds, fit, folds=4, seed=0, n_support=3)
    res = kfold_eval(t1_ds, fit, folds=8, seed=0)
    assert len(res.per_fold) == 8
    assert all(math.isfinite(x) for x in res.per_fold)


def test_xor_needs_exhaustive_search(rng):
    n = 400
    a = rng.integers(0, 2, n)
    b = rng.integers(0, 2, n)
    ds = from_columns({"a": a, "b": b, "n0": rng.integers(0, 2, n), "n1": rng.integers(0, 3, n),
                       "cls": a ^ b})
    rad = learn_dlist(ds, "cls", k=2, n_support=1, searcher=radsearch)
    assert rad.loss(ds, None) == 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        hill = learn_dlist(ds, "cls", k=2, n_support=1, searcher=hill_climb)
    assert hill.loss(ds, None) >= rad.loss(ds, None)
