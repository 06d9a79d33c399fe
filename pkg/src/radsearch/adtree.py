"""A shallow AD-tree of conditional sumstats, fed from row trees.

The tree is capped at depth ``k - 1``.  Under every node (a conjunctive
condition) there is one vary node per attribute larger than the
condition's attributes; a vary node keeps the conditional MCV as a tag and
stores children only for the other values.  An MCV child is recovered on
demand as ``parent - sum(stored siblings)``.
"""

from __future__ import annotations

import numpy as np

from .cube import DataCube
from .errors import CacheMiss, ContractViolation, MemoryBudgetExceeded


class ADNode:
    __slots__ = ("sumstats", "vary")

    def __init__(self, sumstats):
        self.sumstats = sumstats
        self.vary = {}


class VaryNode:
    __slots__ = ("attribute", "mcv", "children")

    def __init__(self, attribute, mcv, children):
        self.attribute = attribute
        self.mcv = mcv
        self.children = children


class ADTree:
    """Depth-capped AD-tree grown lazily by :func:`insert_from_rowtree`.

    Parameters
    ----------
    arities : sequence of int
        Arity of every attribute of the dataset.
    max_depth : int
        Longest condition (number of literals) the tree may hold, ``k - 1``.
    dim : int
        Length of the sumstats vectors.
    max_nodes : int, optional
        Abort with :class:`MemoryBudgetExceeded` once more nodes are stored.
    """

    def __init__(self, arities, max_depth: int, dim: int, max_nodes: int = None):
        self.arities = tuple(arities)
        self.max_depth = int(max_depth)
        self.dim = int(dim)
        self.max_nodes = max_nodes
        self.root = None
        self.nodes_by_depth = {}

    @property
    def node_count(self) -> int:
        return sum(self.nodes_by_depth.values())

    def _new_node(self, sumstats, depth):
        self.nodes_by_depth[depth] = self.nodes_by_depth.get(depth, 0) + 1
        if self.max_nodes is not None and self.node_count > self.max_nodes:
            raise MemoryBudgetExceeded(
                f"AD-tree exceeded its budget of {self.max_nodes} nodes; "
                "try a smaller rule length k or raise the budget"
            )
        return ADNode(sumstats)

    def memory_estimate(self) -> int:
        """Rough byte count: one sumstats vector plus bookkeeping per node."""
        return self.node_count * (8 * self.dim + 200)

    def locate(self, rule) -> ADNode:
        """Node for ``rule``; every literal must be a stored (non-MCV) branch."""
        if self.root is None:
            raise CacheMiss((), None)
        node = self.root
        for depth, (a, v) in enumerate(rule):
            vary = node.vary.get(a)
            if vary is None:
                raise CacheMiss(rule[:depth], a)
            child = vary.children.get(v)
            if child is None:
                raise ContractViolation(f"condition {list(rule)} leaves the stored branches")
            node = child
        return node

    def _query(self, node: ADNode, items, cond) -> np.ndarray:
        # items: sorted (attribute, value-or-None); None marks a cube dimension
        if not items:
            return node.sumstats[None, :]
        a, v = items[0]
        rest = items[1:]
        vary = node.vary.get(a)
        if vary is None:
            raise CacheMiss(cond, a)
        if v is None:
            parts = [None] * self.arities[a]
            others = None
            for u, child in vary.children.items():
                parts[u] = self._query(child, rest, cond + ((a, u),))
                others = parts[u].copy() if others is None else others + parts[u]
            for u in range(self.arities[a]):
                if parts[u] is None and u != vary.mcv:
                    parts[u] = self._zeros(rest)
            whole = self._query(node, rest, cond)
            parts[vary.mcv] = whole if others is None else whole - others
            return np.concatenate(parts, axis=0)
        if v != vary.mcv:
            child = vary.children.get(v)
            return self._query(child, rest, cond + ((a, v),)) if child is not None else self._zeros(rest)
        whole = self._query(node, rest, cond)
        for u, child in vary.children.items():
            whole = whole - self._query(child, rest, cond + ((a, u),))
        return whole

    def _zeros(self, items) -> np.ndarray:
        n = 1
        for a, v in items:
            if v is None:
                n *= self.arities[a]
        return np.zeros((n, self.dim))

    def iter_vary(self):
        """Yield ``(condition, node, vary_node)`` for every stored vary node."""
        if self.root is None:
            return
        stack = [((), self.root)]
        while stack:
            cond, node = stack.pop()
            for a in sorted(node.vary):
                vary = node.vary[a]
                yield cond, node, vary
                for u in sorted(vary.children):
                    stack.append((cond + ((a, u),), vary.children[u]))


def insert_from_rowtree(ad: ADTree, rt, start_level: int = 0) -> ADTree:
    """Record every node of ``rt`` (sumstats and MCV tags) in ``ad``.

    Only row-tree levels ``>= start_level`` are visited, which is enough
    after a tweak at that level.  Re-inserting identical content is a no-op.
    """
    attrs = rt.attribute_list
    if len(attrs) > ad.max_depth:
        raise ContractViolation(
            f"row tree of depth {len(attrs)} exceeds AD-tree depth {ad.max_depth}"
        )
    if ad.root is None:
        ad.root = ad._new_node(rt.root.sumstats, 0)
    for d in range(start_level, len(attrs)):
        a = attrs[d]
        for node in rt.levels[d]:
            adnode = ad.locate(node.rule)
            vary = adnode.vary.get(a)
            if vary is None:
                vary = VaryNode(a, node.mcv, {})
                adnode.vary[a] = vary
            elif vary.mcv != node.mcv:
                raise ContractViolation(
                    f"MCV mismatch for attribute {a} under {list(node.rule)}: "
                    f"{vary.mcv} stored, {node.mcv} inserted"
                )
            for v, child in node.children.items():
                if v not in vary.children:
                    vary.children[v] = ad._new_node(child.sumstats, d + 1)
    return ad


def query_cube(ad: ADTree, cube_attributes, condition=()) -> DataCube:
    """Conditional datacube ``DC(cube_attributes | condition)`` from cached content."""
    cube_attributes = tuple(int(a) for a in cube_attributes)
    condition = tuple((int(a), int(v)) for a, v in condition)
    if len(cube_attributes) + len(condition) > ad.max_depth:
        raise ContractViolation(
            f"query needs {len(cube_attributes) + len(condition)} attributes; "
            f"AD-tree depth is {ad.max_depth}"
        )
    cond_attrs = [a for a, _ in condition]
    if set(cond_attrs) & set(cube_attributes) or len(set(cond_attrs)) != len(cond_attrs):
        raise ContractViolation("condition and cube attributes must be disjoint")
    if ad.root is None:
        raise CacheMiss((), cube_attributes[0] if cube_attributes else None)
    items = sorted([(a, None) for a in cube_attributes] + list(condition))
    cells = ad._query(ad.root, tuple(items), ())
    shape = tuple(ad.arities[a] for a in sorted(cube_attributes))
    return DataCube(tuple(sorted(cube_attributes)), shape, cells)
