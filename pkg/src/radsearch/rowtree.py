"""Row trees: per-attribute-set sparse row indexes with MCV elision.

A row tree over attributes ``(a_0, ..., a_{q-1})`` has one node per rule
``a_0=v_0 ∧ ... ∧ a_{d-1}=v_{d-1}`` reachable without ever taking the most
common value (MCV) branch.  Each node stores its sorted matching rows and
their summed statistics; the MCV child is only tagged, never stored.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset, as_stat_matrix
from .errors import ContractViolation


@dataclass(eq=False)
class RowTreeNode:
    depth: int
    rule: tuple
    rows: np.ndarray
    sumstats: np.ndarray
    split_attribute: int = None
    mcv: int = None
    children: dict = field(default_factory=dict)

    def iter_nodes(self):
        yield self
        for v in sorted(self.children):
            yield from self.children[v].iter_nodes()


class RowTree:
    """Row tree over a sorted attribute list, rebuilt level by level by :func:`tweak_rowtree`.

    ``levels[d]`` lists the nodes at depth ``d``; ``tweak_counts[d]`` counts
    how many times level ``d`` has been re-split.
    """

    def __init__(self, ds: Dataset, stats: np.ndarray, rows: np.ndarray):
        self.ds = ds
        self.stats = stats
        self.in_play_rows = rows
        self.attributes: list = []
        total = stats[rows].sum(axis=0) if len(rows) else np.zeros(stats.shape[1])
        self.root = RowTreeNode(0, (), rows, total)
        self.levels: list = [[self.root]]
        self.tweak_counts: dict = {}

    @property
    def attribute_list(self) -> tuple:
        return tuple(self.attributes)

    def nodes(self):
        return self.root.iter_nodes()

    def stored_row_count(self) -> int:
        return sum(len(node.rows) for level in self.levels for node in level)

    def _split_level(self, d: int, attribute: int) -> None:
        column = self.ds.columns[attribute]
        arity = self.ds.arities[attribute]
        stats = self.stats
        nxt = []
        for node in self.levels[d]:
            rows = node.rows
            vals = column[rows]
            counts = np.bincount(vals, minlength=arity)
            mcv = int(np.argmax(counts))  # lowest code wins ties
            children = {}
            for v in np.flatnonzero(counts):
                v = int(v)
                if v == mcv:
                    continue
                crows = rows[vals == v]
                children[v] = RowTreeNode(d + 1, node.rule + ((attribute, v),), crows,
                                          stats[crows].sum(axis=0))
            node.split_attribute = attribute
            node.mcv = mcv
            node.children = children
            nxt.extend(children[v] for v in sorted(children))
        del self.levels[d + 1:]
        self.levels.append(nxt)
        self.tweak_counts[d] = self.tweak_counts.get(d, 0) + 1

    def _truncate(self, depth: int) -> None:
        for node in self.levels[depth]:
            node.split_attribute = None
            node.mcv = None
            node.children = {}
        del self.levels[depth + 1:]
        del self.attributes[depth:]

    def set_attribute(self, level: int, attribute: int) -> None:
        """Make ``attribute`` the split at ``level``, dropping every deeper level."""
        if not 0 <= level <= len(self.attributes):
            raise ContractViolation(f"cannot tweak level {level} of a depth-{len(self.attributes)} tree")
        if level == len(self.attributes) - 1 and self.attributes[level] == attribute:
            return
        new = self.attributes[:level] + [attribute]
        if any(a >= b for a, b in zip(new, new[1:])):
            raise ContractViolation(f"attribute list {new} is not strictly increasing")
        if not 0 <= attribute < self.ds.n_attributes:
            raise ContractViolation(f"attribute {attribute} out of range")
        self._truncate(level)
        self.attributes.append(attribute)
        self._split_level(level, attribute)


def build_rowtree(ds: Dataset, stats, attributes, rows=None) -> RowTree:
    """Build the row tree for ``attributes`` over ``rows`` (all rows by default).

    ``stats`` is a :class:`~radsearch.dataset.StatVecSpec` or a precomputed
    ``(R, d)`` statistics matrix.
    """
    stats = as_stat_matrix(ds, stats)
    rows = ds.all_rows() if rows is None else np.asarray(rows, dtype=np.int64)
    attributes = [int(a) for a in attributes]
    if any(a >= b for a, b in zip(attributes, attributes[1:])):
        raise ContractViolation(f"attributes {attributes} must be sorted and distinct")
    rt = RowTree(ds, stats, rows)
    for d, a in enumerate(attributes):
        rt.set_attribute(d, a)
    rt.tweak_counts.clear()
    return rt


def tweak_rowtree(rt: RowTree, level: int, new_attribute: int) -> RowTree:
    """Replace ``attribute_list[level]`` by ``new_attribute``, truncating deeper levels.

    Levels above ``level`` are reused as-is; only the nodes at depth
    ``level`` are re-split.  ``level == len(attribute_list)`` appends a level.
    The tree is modified in place and returned.
    """
    rt.set_attribute(level, int(new_attribute))
    return rt


def measure_lambda(rt: RowTree):
    """Row-weighted fraction of rows surviving MCV elision, or ``None`` if not measurable."""
    parent_rows = 0
    survivors = 0
    for d in range(len(rt.attributes)):
        for node in rt.levels[d]:
            parent_rows += len(node.rows)
            survivors += sum(len(c.rows) for c in node.children.values())
    if parent_rows == 0:
        return None
    return survivors / parent_rows


def trees_equal(a: RowTree, b: RowTree) -> bool:
    """Node-for-node structural equality (rows, sumstats, splits, MCVs, children)."""
    if a.attribute_list != b.attribute_list:
        return False
    return _nodes_equal(a.root, b.root)


def _nodes_equal(x: RowTreeNode, y: RowTreeNode) -> bool:
    if (x.depth, x.rule, x.split_attribute, x.mcv) != (y.depth, y.rule, y.split_attribute, y.mcv):
        return False
    if not np.array_equal(x.rows, y.rows) or not np.array_equal(x.sumstats, y.sumstats):
        return False
    if x.children.keys() != y.children.keys():
        return False
    return all(_nodes_equal(x.children[v], y.children[v]) for v in x.children)
