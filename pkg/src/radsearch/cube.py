"""Dense datacubes of sumstats and the three ways to obtain them.

* :func:`scan_rule` sums one rule's statistics by a pass over the rows.
* :func:`scan_cube` fills a whole cube in one pass over the rows.
* :func:`build_dc` assembles a cube from a row-tree node and an AD-tree
  without touching the rows at all.

Cells are stored row-major over the cube's attributes (last attribute
fastest) as an ``(n_cells, d)`` array.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, as_stat_matrix
from .errors import CacheMiss, ContractViolation


@dataclass(eq=False)
class DataCube:
    attributes: tuple
    shape: tuple
    cells: np.ndarray

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    def cell(self, values) -> np.ndarray:
        return self.cells[np.ravel_multi_index(tuple(values), self.shape) if self.shape else 0]

    def rule_of(self, index: int) -> tuple:
        """Literal tuple ``((attribute, value), ...)`` of flat cell ``index``."""
        if not self.attributes:
            return ()
        values = np.unravel_index(index, self.shape)
        return tuple(zip(self.attributes, (int(v) for v in values)))

    def marginalize(self, attribute: int) -> "DataCube":
        """Sum out ``attribute``."""
        axis = self.attributes.index(attribute)
        full = self.cells.reshape(self.shape + (self.cells.shape[1],))
        summed = full.sum(axis=axis)
        attrs = self.attributes[:axis] + self.attributes[axis + 1:]
        shape = self.shape[:axis] + self.shape[axis + 1:]
        return DataCube(attrs, shape, summed.reshape(-1, self.cells.shape[1]))

    def total(self) -> np.ndarray:
        return self.cells.sum(axis=0)


def _check_sorted(attributes):
    if any(a >= b for a, b in zip(attributes, attributes[1:])):
        raise ContractViolation(f"attributes {list(attributes)} must be sorted and distinct")


def scan_cube(ds: Dataset, stats, attributes, rows=None) -> DataCube:
    """Datacube over ``attributes`` by one pass over ``rows`` (all rows by default)."""
    stats = as_stat_matrix(ds, stats)
    attributes = tuple(int(a) for a in attributes)
    _check_sorted(attributes)
    shape = tuple(ds.arities[a] for a in attributes)
    n_cells = int(np.prod(shape, dtype=np.int64)) if shape else 1
    if rows is not None and len(rows) != ds.n_rows:
        rows = np.asarray(rows, dtype=np.int64)
        cols = ds.columns[:, rows] if attributes else None
        sub = stats[rows]
    else:
        cols = ds.columns
        sub = stats
    return DataCube(attributes, shape, _scan_cells(cols, shape, attributes, sub, n_cells))


def _scan_cells(cols, shape, attributes, stats, n_cells):
    n = stats.shape[0]
    if not attributes:
        return stats.sum(axis=0)[None, :] if n else np.zeros((1, stats.shape[1]))
    idx = cols[attributes[0]].astype(np.int64, copy=True)
    for a, arity in zip(attributes[1:], shape[1:]):
        idx *= arity
        idx += cols[a]
    out = np.empty((n_cells, stats.shape[1]))
    for j in range(stats.shape[1]):
        out[:, j] = np.bincount(idx, weights=stats[:, j], minlength=n_cells)
    return out


class CubeScanner:
    """Repeated :func:`scan_cube` calls over one fixed row set, with the gathers done once."""

    def __init__(self, ds: Dataset, stats: np.ndarray, rows: np.ndarray):
        self.arities = ds.arities
        if len(rows) == ds.n_rows:
            self.cols = ds.columns
            self.stats = np.ascontiguousarray(stats.T)
        else:
            self.cols = np.ascontiguousarray(ds.columns[:, rows])
            self.stats = np.ascontiguousarray(stats[rows].T)

    def cube(self, attributes) -> DataCube:
        attributes = tuple(attributes)
        shape = tuple(self.arities[a] for a in attributes)
        n_cells = int(np.prod(shape, dtype=np.int64)) if shape else 1
        if not attributes:
            cells = self.stats.sum(axis=1)[None, :]
        else:
            idx = self.cols[attributes[0]].astype(np.int64, copy=True)
            for a, arity in zip(attributes[1:], shape[1:]):
                idx *= arity
                idx += self.cols[a]
            cells = np.empty((n_cells, self.stats.shape[0]))
            for j, w in enumerate(self.stats):
                cells[:, j] = np.bincount(idx, weights=w, minlength=n_cells)
        return DataCube(attributes, shape, cells)


def scan_rule(ds: Dataset, stats, rule, rows=None) -> np.ndarray:
    """Sumstats of the rows (among ``rows``) satisfying every literal of ``rule``."""
    stats = as_stat_matrix(ds, stats)
    rows = ds.all_rows() if rows is None else np.asarray(rows, dtype=np.int64)
    attrs = [a for a, _ in rule]
    if len(set(attrs)) != len(attrs):
        raise ContractViolation(f"rule {list(rule)} repeats an attribute")
    mask = np.ones(len(rows), dtype=bool)
    for a, v in rule:
        mask &= ds.columns[a, rows] == v
    return stats[rows[mask]].sum(axis=0)


def build_dc(attributes, ad, rt_node) -> DataCube:
    """``DC(attributes | rt_node.rule)`` from a row-tree node and an AD-tree.

    The row tree below ``rt_node`` must split on ``attributes`` in order.
    Non-MCV slices recurse into stored children; the MCV slice is the
    AD-tree's ``DC(attributes[1:] | rule)`` minus those slices.  When only
    one attribute is left the AD-tree lookup is the node's own sumstats, so
    the node supplies it directly.
    """
    attributes = tuple(int(a) for a in attributes)
    _check_sorted(attributes)
    cells = _build(attributes, ad, rt_node)
    shape = tuple(ad.arities[a] for a in attributes)
    return DataCube(attributes, shape, cells)


def _build(attributes, ad, node) -> np.ndarray:
    if not attributes:
        return node.sumstats[None, :]
    a = attributes[0]
    if node.split_attribute != a:
        raise ContractViolation(
            f"row-tree node {list(node.rule)} splits on {node.split_attribute}, expected {a}"
        )
    rest = attributes[1:]
    arity = ad.arities[a]
    parts = [None] * arity
    others = None
    for v, child in node.children.items():
        part = _build(rest, ad, child)
        parts[v] = part
        others = part.copy() if others is None else others + part
    if rest:
        if ad.root is None:
            raise CacheMiss(node.rule, rest[0])
        items = node.rule + tuple((b, None) for b in rest)
        whole = ad._query(ad.root, items, node.rule)
    else:
        whole = node.sumstats[None, :]
    parts[node.mcv] = whole if others is None else whole - others
    if len(node.children) < arity - 1:
        n = len(whole)
        for v in range(arity):
            if parts[v] is None:
                parts[v] = np.zeros((n, whole.shape[1]))
    return np.concatenate(parts, axis=0)
