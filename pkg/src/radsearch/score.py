"""Score functions over summed statistics vectors.

All scorers are vectorised: they take an ``(n, d)`` array of sumstats (one
row per candidate rule) and return ``n`` extended reals, with ``-inf`` for
every rule matching fewer than ``n_support`` rows.  Only IEEE-exact
arithmetic is used on the hot path (logarithms come from a per-integer
lookup table), so identical sumstats always produce bit-identical scores no
matter which searcher produced them.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .dataset import ConstantOne, Dataset, OneHot, StatVecSpec, Target, TargetSquared
from .errors import ConfigError

NEG_INF = -math.inf


class ScoreKind(enum.Enum):
    MEAN_TARGET = "mean"
    NEG_ENTROPY = "ent"
    NEG_VARIANCE = "var"
    STRENGTH = "strength"
    IMPACT = "impact"
    BETWEEN_GROUP_SS = "bgss"


# scores that need a categorical output attribute (ONE_HOT spec); the rest need a target
CLASS_SCORES = frozenset({ScoreKind.NEG_ENTROPY, ScoreKind.STRENGTH})
BOUNDED_SCORES = frozenset({ScoreKind.STRENGTH, ScoreKind.IMPACT})


@dataclass(frozen=True)
class ScoreContext:
    """Everything a score needs besides the rule's own sumstats.

    ``max_target`` is only used by the IMPACT optimistic bound.
    """

    n_support: int
    global_sumstats: np.ndarray
    n_global: float
    max_target: float = None

    @classmethod
    def from_rows(cls, stats: np.ndarray, rows: np.ndarray, n_support: int,
                  spec: StatVecSpec = None) -> "ScoreContext":
        sub = stats[rows]
        total = sub.sum(axis=0) if len(rows) else np.zeros(stats.shape[1])
        leading = spec.leading_constant if spec is not None else False
        n_global = float(total[0]) if leading else float(len(rows))
        max_target = None
        if spec is not None and spec.dim > 1 and spec.target_name(1) is not None and len(rows):
            max_target = float(sub[:, 1].max())
        return cls(int(n_support), total, n_global, max_target)

    @property
    def global_mean(self) -> float:
        return float(self.global_sumstats[1] / self.global_sumstats[0])


class _XLogX:
    """Grow-on-demand table of ``c * ln(c)`` for integer ``c`` (``0 ln 0 = 0``).

    Entries come from :func:`math.log` one at a time, so a value never
    depends on the array length it was computed in.
    """

    def __init__(self):
        self.table = np.zeros(1)

    def __call__(self, counts: np.ndarray) -> np.ndarray:
        idx = np.rint(counts)
        if counts.size and not np.array_equal(idx, counts):
            raise ConfigError("entropy-style scores need integer class counts")
        top = int(idx.max()) if idx.size else 0
        if top >= len(self.table):
            start = len(self.table)
            stop = max(top + 1, 2 * start)
            extra = np.array([c * math.log(c) for c in range(start, stop)])
            self.table = np.concatenate([self.table, extra])
        return self.table[idx.astype(np.int64)]


xlogx = _XLogX()


def _row_sum(cells: np.ndarray) -> np.ndarray:
    # fixed left-to-right order so the sum is independent of array shape
    acc = cells[:, 0].copy()
    for j in range(1, cells.shape[1]):
        acc += cells[:, j]
    return acc


def _gate(score: np.ndarray, count: np.ndarray, ctx: ScoreContext) -> np.ndarray:
    score[(count < ctx.n_support) | (count <= 0)] = NEG_INF
    return score


def _mean(cells, ctx):
    n = cells[:, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        score = cells[:, 1] / n
    return _gate(score, n, ctx)


def _neg_entropy(cells, ctx):
    n = _row_sum(cells)
    acc = xlogx(cells[:, 0])
    for j in range(1, cells.shape[1]):
        acc = acc + xlogx(cells[:, j])
    with np.errstate(divide="ignore", invalid="ignore"):
        score = (acc - xlogx(n)) / n
    return _gate(score, n, ctx)


def _neg_variance(cells, ctx):
    n, s1, s2 = cells[:, 0], cells[:, 1], cells[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        score = -np.maximum(n * s2 - s1 * s1, 0.0) / (n * n)
    return _gate(score, n, ctx)


def _strength(cells, ctx):
    n = _row_sum(cells)
    with np.errstate(divide="ignore", invalid="ignore"):
        score = cells.max(axis=1) / n
    return _gate(score, n, ctx)


def _impact(cells, ctx):
    n = cells[:, 0]
    score = cells[:, 1] - n * ctx.global_mean
    return _gate(score, n, ctx)


def _between_group_ss(cells, ctx):
    n, s1 = cells[:, 0], cells[:, 1]
    big_n = ctx.n_global
    with np.errstate(divide="ignore", invalid="ignore"):
        diff = s1 / n - ctx.global_mean
        score = n * big_n / (big_n - n) * (diff * diff)
    score[n >= big_n] = NEG_INF
    return _gate(score, n, ctx)


def _strength_bound(cells, ctx):
    n = _row_sum(cells)
    return np.where((n >= ctx.n_support) & (n > 0), 1.0, NEG_INF)


def _impact_bound(cells, ctx):
    if ctx.max_target is None:
        raise ConfigError("IMPACT bound needs the maximum target in the score context")
    n = cells[:, 0]
    lift = max(ctx.max_target - ctx.global_mean, 0.0)
    return np.where((n >= ctx.n_support) & (n > 0), n * lift, NEG_INF)


_EVAL = {
    ScoreKind.MEAN_TARGET: _mean,
    ScoreKind.NEG_ENTROPY: _neg_entropy,
    ScoreKind.NEG_VARIANCE: _neg_variance,
    ScoreKind.STRENGTH: _strength,
    ScoreKind.IMPACT: _impact,
    ScoreKind.BETWEEN_GROUP_SS: _between_group_ss,
}

_BOUND = {ScoreKind.STRENGTH: _strength_bound, ScoreKind.IMPACT: _impact_bound}


@dataclass(frozen=True)
class ScoreFn:
    """A named score with its statistics-vector requirement."""

    kind: ScoreKind

    @classmethod
    def named(cls, name: str) -> "ScoreFn":
        try:
            return cls(ScoreKind(name))
        except ValueError:
            choices = ", ".join(k.value for k in ScoreKind)
            raise ConfigError(f"unknown score {name!r}; choose one of {choices}") from None

    @property
    def name(self) -> str:
        return self.kind.value

    @property
    def needs_class(self) -> bool:
        return self.kind in CLASS_SCORES

    @property
    def has_bound(self) -> bool:
        return self.kind in BOUNDED_SCORES

    def check_spec(self, spec: StatVecSpec) -> None:
        """Raise :class:`ConfigError` unless ``spec`` has the shape this score reads."""
        labels = spec.labels
        ok = True
        if self.kind in CLASS_SCORES:
            ok = len(spec.components) == 1 and isinstance(spec.components[0], OneHot)
        elif self.kind == ScoreKind.NEG_VARIANCE:
            c = spec.components
            ok = (len(c) == 3 and isinstance(c[0], ConstantOne) and isinstance(c[1], Target)
                  and isinstance(c[2], TargetSquared) and c[1].name == c[2].name)
        else:
            c = spec.components
            ok = len(c) == 2 and isinstance(c[0], ConstantOne) and isinstance(c[1], Target)
        if not ok:
            raise ConfigError(f"score {self.name!r} cannot read statistics {list(labels)}")

    def evaluate(self, cells: np.ndarray, ctx: ScoreContext) -> np.ndarray:
        cells = np.asarray(cells, dtype=np.float64)
        if cells.ndim == 1:
            cells = cells[None, :]
        return _EVAL[self.kind](cells, ctx)

    def __call__(self, sumstats, ctx: ScoreContext) -> float:
        return float(self.evaluate(sumstats, ctx)[0])

    def bound(self, cells: np.ndarray, ctx: ScoreContext) -> np.ndarray:
        """Upper bound on the score of any specialisation of each rule."""
        if not self.has_bound:
            raise ConfigError(f"score {self.name!r} has no optimistic bound")
        cells = np.asarray(cells, dtype=np.float64)
        if cells.ndim == 1:
            cells = cells[None, :]
        return _BOUND[self.kind](cells, ctx)


def required_spec(score: ScoreFn, ds: Dataset, target: str = None, output_attribute=None) -> StatVecSpec:
    """Build the statistics vector ``score`` reads, from a target or an output attribute."""
    if score.needs_class:
        if output_attribute is None:
            raise ConfigError(f"score {score.name!r} needs an output attribute")
        if target is not None:
            raise ConfigError(f"score {score.name!r} takes an output attribute, not a target")
        return StatVecSpec([OneHot(output_attribute)], ds)
    if target is None:
        raise ConfigError(f"score {score.name!r} needs a real-valued target")
    if output_attribute is not None:
        raise ConfigError(f"score {score.name!r} takes a target, not an output attribute")
    if score.kind == ScoreKind.NEG_VARIANCE:
        return StatVecSpec([ConstantOne(), Target(target), TargetSquared(target)], ds)
    return StatVecSpec([ConstantOne(), Target(target)], ds)


# scalar conveniences -------------------------------------------------------


def score_mean_target(s, ctx: ScoreContext) -> float:
    return ScoreFn(ScoreKind.MEAN_TARGET)(s, ctx)


def score_neg_entropy(s, ctx: ScoreContext) -> float:
    return ScoreFn(ScoreKind.NEG_ENTROPY)(s, ctx)


def score_neg_variance(s, ctx: ScoreContext) -> float:
    return ScoreFn(ScoreKind.NEG_VARIANCE)(s, ctx)


def score_strength(s, ctx: ScoreContext) -> float:
    return ScoreFn(ScoreKind.STRENGTH)(s, ctx)


def score_impact(s, ctx: ScoreContext) -> float:
    return ScoreFn(ScoreKind.IMPACT)(s, ctx)


def score_between_group_ss(s, ctx: ScoreContext) -> float:
    return ScoreFn(ScoreKind.BETWEEN_GROUP_SS)(s, ctx)


def optimistic_bound(fn: ScoreFn, s, ctx: ScoreContext) -> float:
    return float(fn.bound(s, ctx)[0])
