"""Rule searchers: RADSEARCH, the naive and not-so-naive baselines, hill climbing.

Every searcher returns the ``top_n`` best rules of length ``<= k`` ranked by
score, ties broken by rule length and then by the literal list, so the three
exhaustive searchers return identical lists on every input.
"""

from __future__ import annotations

import bisect
import itertools
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .adtree import ADTree, insert_from_rowtree
from .cube import CubeScanner, DataCube, build_dc
from .dataset import Dataset, StatVecSpec
from .errors import ConfigError
from .rowtree import RowTree
from .score import NEG_INF, ScoreContext, ScoreFn

logger = logging.getLogger(__name__)

DEFAULT_MAX_AD_NODES = 20_000_000


@dataclass(frozen=True)
class Rule:
    """Conjunction of ``(attribute, value)`` literals with strictly increasing attributes."""

    literals: tuple = ()

    def __post_init__(self):
        lits = tuple(sorted((int(a), int(v)) for a, v in self.literals))
        attrs = [a for a, _ in lits]
        if len(set(attrs)) != len(attrs):
            raise ConfigError(f"rule {lits} mentions an attribute twice")
        object.__setattr__(self, "literals", lits)

    def __len__(self):
        return len(self.literals)

    def __iter__(self):
        return iter(self.literals)

    def sort_key(self):
        return (len(self.literals), self.literals)

    def mask(self, ds: Dataset, rows=None) -> np.ndarray:
        """Boolean mask over ``rows`` (all rows by default) of rows matching the rule."""
        cols = ds.columns if rows is None else ds.columns[:, rows]
        out = np.ones(cols.shape[1], dtype=bool)
        for a, v in self.literals:
            out &= cols[a] == v
        return out

    def format(self, ds: Dataset = None, conj: str = " ∧ ") -> str:
        if not self.literals:
            return "TRUE"
        if ds is None:
            return conj.join(f"x{a}={v}" for a, v in self.literals)
        return conj.join(f"{ds.attribute_names[a]}={ds.levels[a][v]}" for a, v in self.literals)

    def is_valid_for(self, ds: Dataset) -> bool:
        return all(0 <= a < ds.n_attributes and 0 <= v < ds.arities[a] for a, v in self.literals)


@dataclass(frozen=True)
class RuleScore:
    rule: Rule
    sumstats: np.ndarray
    score: float


@dataclass
class SearchStats:
    algorithm: str = ""
    tweaks_by_level: dict = field(default_factory=dict)
    ad_nodes: int = 0
    ad_nodes_by_depth: dict = field(default_factory=dict)
    cubes_evaluated: int = 0
    cubes_pruned: int = 0
    rules_scored: int = 0
    elapsed: float = 0.0

    @property
    def rowtrees_built(self) -> int:
        return sum(self.tweaks_by_level.values())

    def absorb(self, other: "SearchStats") -> None:
        for d, n in other.tweaks_by_level.items():
            self.tweaks_by_level[d] = self.tweaks_by_level.get(d, 0) + n
        for d, n in other.ad_nodes_by_depth.items():
            self.ad_nodes_by_depth[d] = self.ad_nodes_by_depth.get(d, 0) + n
        self.ad_nodes += other.ad_nodes
        self.cubes_evaluated += other.cubes_evaluated
        self.cubes_pruned += other.cubes_pruned
        self.rules_scored += other.rules_scored

    def as_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "rowtrees_built": self.rowtrees_built,
            "tweaks_by_level": {str(k): v for k, v in sorted(self.tweaks_by_level.items())},
            "ad_nodes": self.ad_nodes,
            "ad_nodes_by_depth": {str(k): v for k, v in sorted(self.ad_nodes_by_depth.items())},
            "cubes_evaluated": self.cubes_evaluated,
            "cubes_pruned": self.cubes_pruned,
            "rules_scored": self.rules_scored,
            "elapsed_seconds": self.elapsed,
        }


@dataclass
class SearchResult:
    entries: list
    stats: SearchStats
    labels: tuple = ()

    @property
    def best(self):
        return self.entries[0] if self.entries else None

    @property
    def best_score(self) -> float:
        return self.entries[0].score if self.entries else NEG_INF

    def ranked(self) -> list:
        """``(literals, score)`` pairs, convenient for equality checks."""
        return [(e.rule.literals, e.score) for e in self.entries]


@dataclass
class SearchConfig:
    """Parameters of one search.

    ``in_play_rows`` restricts the search to a row subset (all rows when
    ``None``); the score context is computed over exactly those rows.
    Attributes read by a ``ONE_HOT`` statistics component are always
    excluded from rules.
    """

    k: int
    n_support: int
    score: ScoreFn
    spec: StatVecSpec
    top_n: int = 1
    excluded_attributes: frozenset = frozenset()
    pruning: bool = False
    in_play_rows: np.ndarray = None
    threads: int = 1
    max_ad_nodes: int = DEFAULT_MAX_AD_NODES

    def eligible_attributes(self, ds: Dataset) -> list:
        excluded = {ds.attribute_index(a) for a in self.excluded_attributes}
        for kind in self.spec._resolved:
            if kind[0] == "ind" and self.score.needs_class:
                excluded.add(kind[1])
        return [m for m in range(ds.n_attributes) if m not in excluded]

    def rows(self, ds: Dataset) -> np.ndarray:
        if self.in_play_rows is None:
            return ds.all_rows()
        return np.unique(np.asarray(self.in_play_rows, dtype=np.int64))

    def validate(self, ds: Dataset) -> None:
        if self.k < 1:
            raise ConfigError(f"rule length k must be >= 1, got {self.k}")
        if self.top_n < 1:
            raise ConfigError(f"top_n must be >= 1, got {self.top_n}")
        if self.n_support < 0:
            raise ConfigError("n_support must be non-negative")
        n_eligible = len(self.eligible_attributes(ds))
        if self.k > n_eligible:
            raise ConfigError(f"k={self.k} exceeds the {n_eligible} eligible attributes")
        self.score.check_spec(self.spec)
        if self.pruning and not self.score.has_bound:
            raise ConfigError(f"pruning needs a bounded score (strength or impact), not {self.score.name!r}")
        n_rows = len(self.rows(ds))
        if n_rows == 0 or n_rows < self.n_support:
            raise ConfigError(f"{n_rows} rows in play, fewer than n_support={self.n_support}")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")


class TopN:
    """Bounded best-first store keyed by ``(-score, len(rule), literals)``."""

    def __init__(self, n: int):
        self.n = n
        self.keys = []
        self.items = []

    @property
    def full(self) -> bool:
        return len(self.keys) >= self.n

    @property
    def worst_score(self) -> float:
        return -self.keys[-1][0] if self.keys else NEG_INF

    def push(self, literals, sumstats, score) -> None:
        if score == NEG_INF:
            return
        key = (-score, len(literals), literals)
        if self.full and key >= self.keys[-1]:
            return
        pos = bisect.bisect(self.keys, key)
        self.keys.insert(pos, key)
        self.items.insert(pos, (literals, sumstats, score))
        if len(self.keys) > self.n:
            self.keys.pop()
            self.items.pop()

    def offer_cube(self, cube: DataCube, scores: np.ndarray) -> None:
        ok = scores > NEG_INF
        if self.full:
            ok &= scores >= self.worst_score
        idx = np.flatnonzero(ok)
        if len(idx) > self.n:
            # keep everything tied with the n-th best so the tie-break stays exact
            cut = np.partition(scores[idx], len(idx) - self.n)[len(idx) - self.n]
            idx = idx[scores[idx] >= cut]
        for i in idx:
            self.push(cube.rule_of(int(i)), cube.cells[i].copy(), float(scores[i]))

    def merge(self, other: "TopN") -> None:
        for literals, sumstats, score in other.items:
            self.push(literals, sumstats, score)

    def result(self, stats: SearchStats, labels) -> SearchResult:
        entries = [RuleScore(Rule(lits), s, sc) for lits, s, sc in self.items]
        return SearchResult(entries, stats, tuple(labels))


def _prepare(ds: Dataset, cfg: SearchConfig):
    cfg.validate(ds)
    stats = cfg.spec.matrix(ds)
    rows = cfg.rows(ds)
    ctx = ScoreContext.from_rows(stats, rows, cfg.n_support, cfg.spec)
    return stats, rows, ctx, cfg.eligible_attributes(ds)


# ---------------------------------------------------------------------------
# RADSEARCH
# ---------------------------------------------------------------------------


def _rad_worker(ds, stats, rows, ctx, cfg, domain, first):
    """Search every subset of ``domain`` (restricted to ones starting with ``first``
    when given), building AD-tree content for all of ``domain``."""
    st = SearchStats("rad")
    top = TopN(cfg.top_n)
    for _ in _rad_walk(ds, stats, rows, ctx, cfg, domain, first, top, st):
        pass
    return top, st


def _rad_walk(ds, stats, rows, ctx, cfg, domain, first, top, st):
    # yields (subset, rowtree, adtree, cube) after every scored cube
    k = cfg.k
    score = cfg.score
    rt = RowTree(ds, stats, rows)
    ad = ADTree(ds.arities, k - 1, stats.shape[1], cfg.max_ad_nodes)
    bounds = {}
    pruned = set()

    root_cells = rt.root.sumstats[None, :]
    root_cube = DataCube((), (), root_cells)
    if first is None or first == domain[0]:
        top.offer_cube(root_cube, score.evaluate(root_cells, ctx))
        st.cubes_evaluated += 1
        st.rules_scored += 1
    if cfg.pruning:
        bounds[()] = float(score.bound(root_cells, ctx).max())

    for q in range(1, k + 1):
        for subset in itertools.combinations(domain, q):
            scored = first is None or subset[0] == first
            for_ad = q <= k - 1
            if not scored and not for_ad:
                continue
            skip = False
            if scored and cfg.pruning:
                parent = subset[:-1]
                if parent in pruned or (top.full and bounds.get(parent, math.inf) < top.worst_score):
                    pruned.add(subset)
                    skip = True
                    st.cubes_pruned += 1
            if skip and not for_ad:
                continue
            current = rt.attributes
            d = 0
            while d < min(len(current), q) and current[d] == subset[d]:
                d += 1
            if d < q or len(current) != q:
                for j in range(d, q):
                    rt.set_attribute(j, subset[j])
            if for_ad:
                insert_from_rowtree(ad, rt, start_level=min(d, q - 1))
            if not scored or skip:
                continue
            cube = build_dc(subset, ad, rt.root)
            scores = score.evaluate(cube.cells, ctx)
            top.offer_cube(cube, scores)
            st.cubes_evaluated += 1
            st.rules_scored += cube.n_cells
            if cfg.pruning and q < k:
                bounds[subset] = float(score.bound(cube.cells, ctx).max())
            yield subset, rt, ad, cube
    st.tweaks_by_level = dict(rt.tweak_counts)
    st.ad_nodes = ad.node_count
    st.ad_nodes_by_depth = dict(ad.nodes_by_depth)


def _rad_task(args):
    return _rad_worker(*args)


def radsearch(ds: Dataset, cfg: SearchConfig) -> SearchResult:
    """Exhaustive search over all rules of length ``<= k`` via row trees and an AD-tree.

    Attribute subsets are enumerated in passes of increasing size; within a
    pass consecutive subsets share row-tree levels and only the levels that
    change are re-split.  Row trees of size ``< k`` feed the AD-tree that
    later passes read.  With ``threads > 1`` the subsets are partitioned by
    their first attribute over worker processes, each with a private row
    tree and AD-tree.
    """
    t0 = time.perf_counter()
    stats, rows, ctx, eligible = _prepare(ds, cfg)
    if cfg.threads > 1 and len(eligible) > 1:
        tasks = [(ds, stats, rows, ctx, cfg, eligible[i:], eligible[i]) for i in range(len(eligible))]
        top = TopN(cfg.top_n)
        st = SearchStats("rad")
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            for part_top, part_st in pool.map(_rad_task, tasks):
                top.merge(part_top)
                st.absorb(part_st)
    else:
        top, st = _rad_worker(ds, stats, rows, ctx, cfg, eligible, None)
    st.elapsed = time.perf_counter() - t0
    return top.result(st, cfg.spec.labels)


def trace_radsearch(ds: Dataset, cfg: SearchConfig):
    """Single-process RADSEARCH that yields ``(subset, rowtree, adtree, cube)`` per scored cube.

    The row tree and AD-tree are live objects and change after the next
    step, so inspect them before advancing.  Intended for checking
    internals; :func:`radsearch` is the normal entry point.
    """
    stats, rows, ctx, eligible = _prepare(ds, cfg)
    yield from _rad_walk(ds, stats, rows, ctx, cfg, eligible, None, TopN(cfg.top_n), SearchStats("rad"))


# ---------------------------------------------------------------------------
# baselines
# ---------------------------------------------------------------------------


def nsn_search(ds: Dataset, cfg: SearchConfig) -> SearchResult:
    """Not-so-naive search: one full data pass per attribute subset."""
    t0 = time.perf_counter()
    stats, rows, ctx, eligible = _prepare(ds, cfg)
    scanner = CubeScanner(ds, stats, rows)
    top = TopN(cfg.top_n)
    st = SearchStats("nsn")
    for q in range(cfg.k + 1):
        for subset in itertools.combinations(eligible, q):
            cube = scanner.cube(subset)
            top.offer_cube(cube, cfg.score.evaluate(cube.cells, ctx))
            st.cubes_evaluated += 1
            st.rules_scored += cube.n_cells
    st.elapsed = time.perf_counter() - t0
    return top.result(st, cfg.spec.labels)


def naive_search(ds: Dataset, cfg: SearchConfig) -> SearchResult:
    """Ground-truth oracle: every rule's sumstats by its own pass over the rows."""
    t0 = time.perf_counter()
    stats, rows, ctx, eligible = _prepare(ds, cfg)
    sub = stats[rows]
    cols = ds.columns[:, rows]
    literal_masks = {(a, v): cols[a] == v for a in eligible for v in range(ds.arities[a])}
    everything = np.ones(len(rows), dtype=bool)
    top = TopN(cfg.top_n)
    st = SearchStats("naive")
    for q in range(cfg.k + 1):
        for subset in itertools.combinations(eligible, q):
            shape = tuple(ds.arities[a] for a in subset)
            cells = []
            for values in itertools.product(*(range(s) for s in shape)):
                mask = everything
                for a, v in zip(subset, values):
                    mask = mask & literal_masks[(a, v)]
                cells.append(sub[mask].sum(axis=0))
            cube = DataCube(subset, shape, np.array(cells).reshape(len(cells), -1))
            top.offer_cube(cube, cfg.score.evaluate(cube.cells, ctx))
            st.cubes_evaluated += 1
            st.rules_scored += cube.n_cells
    st.elapsed = time.perf_counter() - t0
    return top.result(st, cfg.spec.labels)


def hill_climb(ds: Dataset, cfg: SearchConfig) -> SearchResult:
    """Greedy search: best single literal, then best one-literal extension, and so on.

    Stops at length ``k`` or when no extension beats the current rule.  The
    result ranks the rules along the trajectory (best first).
    """
    t0 = time.perf_counter()
    stats, rows, ctx, eligible = _prepare(ds, cfg)
    st = SearchStats("hill")
    trajectory = TopN(cfg.top_n)
    rule = ()
    current = NEG_INF
    matched = rows
    while len(rule) < cfg.k:
        used = {a for a, _ in rule}
        best = None
        scanner = CubeScanner(ds, stats, matched)
        for a in eligible:
            if a in used:
                continue
            cube = scanner.cube((a,))
            scores = cfg.score.evaluate(cube.cells, ctx)
            st.cubes_evaluated += 1
            st.rules_scored += cube.n_cells
            for v in range(cube.n_cells):
                cand = tuple(sorted(rule + ((a, v),)))
                key = (-float(scores[v]), cand)
                if best is None or key < best[0]:
                    best = (key, cand, cube.cells[v].copy(), float(scores[v]))
        if best is None or best[3] == NEG_INF or (rule and best[3] <= current):
            break
        _, rule, sumstats, current = best
        trajectory.push(rule, sumstats, current)
        matched = matched[Rule(rule).mask(ds, matched)]
    st.elapsed = time.perf_counter() - t0
    return trajectory.result(st, cfg.spec.labels)


SEARCHERS = {
    "rad": radsearch,
    "nsn": nsn_search,
    "naive": naive_search,
    "hill": hill_climb,
}


def prune_check(cfg: SearchConfig, parent_cube_stats, worst_kept_score: float, collector_full: bool,
                ctx: ScoreContext) -> bool:
    """True when no rule specialising any cell of ``parent_cube_stats`` can enter the top-N.

    Uses a strict comparison against the worst kept score, since a tied
    rule could still displace a kept one through the tie-break order.
    """
    if not cfg.pruning or not collector_full:
        return False
    cells = np.atleast_2d(np.asarray(parent_cube_stats, dtype=np.float64))
    return bool(cfg.score.bound(cells, ctx).max() < worst_kept_score)


def enumeration_edges(n_eligible: int, k: int) -> dict:
    """Expected re-splits per row-tree level over a full unpruned RADSEARCH run."""
    out = {}
    for q in range(1, k + 1):
        for d in range(q):
            # distinct length-(d+1) prefixes among the q-subsets
            n = sum(1 for p in itertools.combinations(range(n_eligible), d + 1)
                    if n_eligible - 1 - p[-1] >= q - d - 1)
            out[d] = out.get(d, 0) + n
    return out
