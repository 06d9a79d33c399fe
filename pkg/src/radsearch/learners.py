"""Learners that call a rule searcher in a loop.

* :func:`learn_dlist` - decision lists by repeated lowest-entropy rules.
* :func:`learn_reglist` - regression lists by repeated highest-mean rules.
* :func:`learn_radreg` - stepwise additive regression on rule indicators,
  refitting every coefficient by least squares after each new term.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dataset import ConstantOne, Dataset, OneHot, StatVecSpec, Target
from .errors import ConfigError
from .score import ScoreFn, ScoreKind
from .search import Rule, SearchConfig, radsearch

logger = logging.getLogger(__name__)

RESIDUAL = "_residual"


class RankDeficiencyWarning(UserWarning):
    pass


def _rows(ds: Dataset, rows) -> np.ndarray:
    return ds.all_rows() if rows is None else np.unique(np.asarray(rows, dtype=np.int64))


def _fmt(x: float) -> str:
    return f"{x:.2f}"


# ---------------------------------------------------------------------------
# decision lists
# ---------------------------------------------------------------------------


@dataclass
class DecisionRule:
    rule: Rule
    label: int
    distribution: np.ndarray
    score: float

    @property
    def agreement(self) -> float:
        total = self.distribution.sum()
        return float(self.distribution[self.label] / total) if total else 0.0


@dataclass
class DecisionList:
    output_attribute: int
    entries: list
    default: int

    def predict(self, ds: Dataset, rows=None) -> np.ndarray:
        rows = _rows(ds, rows)
        out = np.full(len(rows), self.default, dtype=np.int64)
        done = np.zeros(len(rows), dtype=bool)
        for e in self.entries:
            hit = e.rule.mask(ds, rows) & ~done
            out[hit] = e.label
            done |= hit
        return out

    def loss(self, ds: Dataset, rows) -> float:
        """Misclassification rate on ``rows``."""
        rows = _rows(ds, rows)
        if not len(rows):
            return 0.0
        truth = ds.columns[self.output_attribute, rows]
        return float(np.mean(self.predict(ds, rows) != truth))

    def to_text(self, ds: Dataset) -> str:
        name = ds.attribute_names[self.output_attribute]
        levels = ds.levels[self.output_attribute]
        lines = []
        for i, e in enumerate(self.entries):
            head = "if" if i == 0 else "else if"
            lines.append(f"{head} {e.rule.format(ds)} then predict {name} = {levels[e.label]} "
                         f"({100 * e.agreement:.1f}% training agreement, {int(e.distribution.sum())} rows)")
        lines.append(f"{'else ' if self.entries else ''}predict {name} = {levels[self.default]}")
        return "\n".join(lines)

    def to_dict(self, ds: Dataset) -> dict:
        levels = ds.levels[self.output_attribute]
        return {
            "model": "dlist",
            "output": ds.attribute_names[self.output_attribute],
            "rules": [
                {
                    "rule": _rule_dict(ds, e.rule),
                    "predict": levels[e.label],
                    "distribution": {levels[v]: int(c) for v, c in enumerate(e.distribution)},
                    "score": e.score,
                }
                for e in self.entries
            ],
            "default": levels[self.default],
        }


def _rule_dict(ds: Dataset, rule: Rule) -> list:
    return [[ds.attribute_names[a], ds.levels[a][v]] for a, v in rule]


def learn_dlist(ds: Dataset, output_attribute, k: int, n_support: int, searcher: Callable = radsearch,
                rows=None, excluded=(), threads: int = 1) -> DecisionList:
    """Separate-and-conquer decision list with lowest-entropy rules.

    Each round searches the remaining rows for the rule whose output
    distribution has the highest negative entropy, predicts that rule's
    majority class, and removes its rows.  The loop ends once fewer than
    ``n_support`` rows remain, no rule meets support, or the best rule is
    the empty rule (which would only restate the default).  The default is
    the majority class of the leftover rows, or of all rows if none remain.
    """
    out = ds.attribute_index(output_attribute)
    rows = _rows(ds, rows)
    labels = ds.columns[out]
    arity = ds.arities[out]
    score = ScoreFn(ScoreKind.NEG_ENTROPY)
    spec = StatVecSpec([OneHot(out)], ds)
    remaining = rows
    entries = []
    if arity > 1:
        while len(remaining) >= max(n_support, 1):
            cfg = SearchConfig(k=k, n_support=n_support, score=score, spec=spec, top_n=1,
                               excluded_attributes=frozenset(excluded) | {out},
                               in_play_rows=remaining, threads=threads)
            res = searcher(ds, cfg)
            if not res.entries or len(res.best.rule) == 0:
                break
            best = res.best
            dist = best.sumstats.round().astype(np.int64)
            entries.append(DecisionRule(best.rule, int(np.argmax(dist)), dist, best.score))
            remaining = remaining[~best.rule.mask(ds, remaining)]
    pool = remaining if len(remaining) else rows
    counts = np.bincount(labels[pool], minlength=arity) if len(pool) else np.zeros(arity)
    return DecisionList(out, entries, int(np.argmax(counts)))


# ---------------------------------------------------------------------------
# regression lists
# ---------------------------------------------------------------------------


@dataclass
class RegressionRule:
    rule: Rule
    value: float
    n_rows: int


@dataclass
class RegressionList:
    target: str
    entries: list
    default: float

    def predict(self, ds: Dataset, rows=None) -> np.ndarray:
        rows = _rows(ds, rows)
        out = np.full(len(rows), self.default, dtype=np.float64)
        done = np.zeros(len(rows), dtype=bool)
        for e in self.entries:
            hit = e.rule.mask(ds, rows) & ~done
            out[hit] = e.value
            done |= hit
        return out

    def loss(self, ds: Dataset, rows) -> float:
        rows = _rows(ds, rows)
        if not len(rows):
            return 0.0
        err = self.predict(ds, rows) - ds.targets[self.target][rows]
        return float(np.mean(err * err))

    def to_text(self, ds: Dataset) -> str:
        lines = []
        for i, e in enumerate(self.entries):
            head = "if" if i == 0 else "else if"
            lines.append(f"{head} {e.rule.format(ds)} then predict {self.target}={_fmt(e.value)}")
        lines.append(f"{'else ' if self.entries else ''}predict {self.target}={_fmt(self.default)}")
        return "\n".join(lines)

    def to_dict(self, ds: Dataset) -> dict:
        return {
            "model": "reglist",
            "target": self.target,
            "rules": [{"rule": _rule_dict(ds, e.rule), "predict": e.value, "rows": e.n_rows}
                      for e in self.entries],
            "default": self.default,
        }


def learn_reglist(ds: Dataset, target: str, k: int, n_support: int, searcher: Callable = radsearch,
                  rows=None, excluded=(), threads: int = 1) -> RegressionList:
    """Regression list: repeatedly take the highest-mean rule and remove its rows."""
    if target not in ds.targets:
        raise ConfigError(f"undeclared target {target!r}")
    rows = _rows(ds, rows)
    y = ds.targets[target]
    score = ScoreFn(ScoreKind.MEAN_TARGET)
    spec = StatVecSpec([ConstantOne(), Target(target)], ds)
    remaining = rows
    entries = []
    while len(remaining) >= max(n_support, 1):
        cfg = SearchConfig(k=k, n_support=n_support, score=score, spec=spec, top_n=1,
                           excluded_attributes=frozenset(excluded), in_play_rows=remaining,
                           threads=threads)
        res = searcher(ds, cfg)
        if not res.entries or len(res.best.rule) == 0:
            break
        best = res.best
        entries.append(RegressionRule(best.rule, best.score, int(round(best.sumstats[0]))))
        remaining = remaining[~best.rule.mask(ds, remaining)]
    pool = remaining if len(remaining) else rows
    default = float(y[pool].mean()) if len(pool) else 0.0
    return RegressionList(target, entries, default)


# ---------------------------------------------------------------------------
# RADREG
# ---------------------------------------------------------------------------


@dataclass
class LeastSquaresFit:
    coefficients: np.ndarray
    rank_deficient: bool


def least_squares_fit(design: np.ndarray, target: np.ndarray, rank_tol: float = 1e-10) -> LeastSquaresFit:
    """Least-squares coefficients via the normal equations.

    A design whose Gram matrix has an eigenvalue below ``rank_tol`` times its
    largest diagonal entry is flagged rank deficient; the minimal-norm
    solution is returned with a :class:`RankDeficiencyWarning`.
    """
    x = np.asarray(design, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray(target, dtype=np.float64)
    gram = x.T @ x
    rhs = x.T @ y
    scale = float(np.max(np.diag(gram))) if gram.size else 0.0
    eig_min = float(np.linalg.eigvalsh(gram).min()) if gram.size else 0.0
    if scale <= 0 or eig_min <= rank_tol * scale:
        warnings.warn("rank-deficient design; returning the minimal-norm solution",
                      RankDeficiencyWarning, stacklevel=2)
        coef = np.linalg.lstsq(x, y, rcond=None)[0]
        return LeastSquaresFit(coef, True)
    chol = np.linalg.cholesky(gram)
    z = np.linalg.solve(chol, rhs)
    coef = np.linalg.solve(chol.T, z)
    return LeastSquaresFit(coef, False)


@dataclass
class AdditiveRuleModel:
    target: str
    intercept: float
    terms: list
    mse_history: list = field(default_factory=list)
    stop_reason: str = ""

    def design(self, ds: Dataset, rows) -> np.ndarray:
        cols = [np.ones(len(rows))]
        cols.extend(rule.mask(ds, rows).astype(np.float64) for rule, _ in self.terms)
        return np.column_stack(cols)

    def predict(self, ds: Dataset, rows=None) -> np.ndarray:
        rows = _rows(ds, rows)
        coef = np.array([self.intercept] + [c for _, c in self.terms])
        return self.design(ds, rows) @ coef

    def loss(self, ds: Dataset, rows) -> float:
        rows = _rows(ds, rows)
        if not len(rows):
            return 0.0
        err = self.predict(ds, rows) - ds.targets[self.target][rows]
        return float(np.mean(err * err))

    def to_text(self, ds: Dataset) -> str:
        lines = [f"begin with {self.target} = {_fmt(self.intercept)}"]
        for rule, c in self.terms:
            verb = "add" if c >= 0 else "subtract"
            lines.append(f"if {rule.format(ds)} {verb} {_fmt(abs(c))}")
        return "\n".join(lines)

    def to_dict(self, ds: Dataset) -> dict:
        return {
            "model": "radreg",
            "target": self.target,
            "intercept": self.intercept,
            "terms": [{"rule": _rule_dict(ds, r), "coefficient": c} for r, c in self.terms],
            "mse_history": list(self.mse_history),
            "stop_reason": self.stop_reason,
        }


def learn_radreg(ds: Dataset, target: str, k: int, n_support: int, max_terms: int,
                 searcher: Callable = radsearch, rows=None, excluded=(), threads: int = 1) -> AdditiveRuleModel:
    """Stepwise additive model whose regressors are rule indicators.

    Each round searches for the rule with the largest between-group sum of
    squares over the current residuals, adds its indicator, and refits the
    intercept and all coefficients jointly.  Stops after ``max_terms`` terms,
    when no rule explains any residual variance, or when the new indicator
    is collinear with the existing design.
    """
    if max_terms < 1:
        raise ConfigError("max_terms must be >= 1")
    if target in (RESIDUAL,) or target not in ds.targets:
        raise ConfigError(f"undeclared target {target!r}")
    rows = _rows(ds, rows)
    y_all = ds.targets[target]
    y = y_all[rows]
    intercept = float(y.mean())
    residual = y - intercept
    sst = float(residual @ residual)
    terms = []
    history = [sst / len(y)]
    reason = "max_terms reached"
    score = ScoreFn(ScoreKind.BETWEEN_GROUP_SS)
    design_cols = [np.ones(len(rows))]
    while len(terms) < max_terms:
        full = np.zeros(ds.n_rows)
        full[rows] = residual
        work = ds.with_target(RESIDUAL, full)
        spec = StatVecSpec([ConstantOne(), Target(RESIDUAL)], work)
        cfg = SearchConfig(k=k, n_support=n_support, score=score, spec=spec, top_n=1,
                           excluded_attributes=frozenset(excluded), in_play_rows=rows, threads=threads)
        res = searcher(work, cfg)
        if not res.entries or res.best_score <= 1e-12 * max(sst, 1e-300):
            reason = "no rule explains residual variance"
            break
        rule = res.best.rule
        candidate = design_cols + [rule.mask(ds, rows).astype(np.float64)]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RankDeficiencyWarning)
            fit = least_squares_fit(np.column_stack(candidate), y)
        if fit.rank_deficient:
            reason = f"rule {rule.format(ds)} is collinear with the current design"
            logger.info("radreg stopped: %s", reason)
            break
        design_cols = candidate
        coef = fit.coefficients
        intercept = float(coef[0])
        terms = [(r, float(c)) for r, c in zip([t for t, _ in terms] + [rule], coef[1:])]
        residual = y - np.column_stack(design_cols) @ coef
        history.append(float(residual @ residual) / len(y))
    return AdditiveRuleModel(target, intercept, terms, history, reason)


# ---------------------------------------------------------------------------
# cross-validation
# ---------------------------------------------------------------------------


@dataclass
class KFoldResult:
    per_fold: list
    mean: float
    stderr: float

    def as_dict(self) -> dict:
        return {"per_fold": self.per_fold, "mean": self.mean, "stderr": self.stderr}


def kfold_eval(ds: Dataset, fit: Callable, folds: int, seed: int, n_support: int = 0) -> KFoldResult:
    """K-fold cross-validation of ``fit(ds, train_rows) -> model``.

    Each model's ``loss(ds, test_rows)`` is recorded: misclassification rate
    for decision lists, mean squared error for the regression models.
    """
    n = ds.n_rows
    if folds < 2:
        raise ConfigError("need at least 2 folds")
    if folds > n or n // folds < n_support:
        raise ConfigError(
            f"{folds} folds over {n} rows leaves folds smaller than n_support={n_support}; use fewer folds"
        )
    perm = np.random.default_rng(seed).permutation(n)
    losses = []
    for test in np.array_split(perm, folds):
        test = np.sort(test)
        train = np.setdiff1d(perm, test)
        model = fit(ds, train)
        losses.append(model.loss(ds, test))
    mean = float(np.mean(losses))
    stderr = float(np.std(losses, ddof=1) / math.sqrt(folds))
    return KFoldResult(losses, mean, stderr)
