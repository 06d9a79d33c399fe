"""Categorical datasets, CSV ingestion and per-row statistics vectors.

A :class:`Dataset` holds ``M`` categorical attributes as dense integer codes
(column-major, shape ``(M, R)``) plus any number of named real-valued target
columns.  A :class:`StatVecSpec` declares the per-row statistics vector whose
sum over a rule's matching rows is the only thing a score function ever sees.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import ConfigError, DataError

NA_LEVEL = "<NA>"


@dataclass(frozen=True, eq=False)
class Dataset:
    """Column-major categorical table with optional real-valued targets.

    Parameters
    ----------
    attribute_names : tuple of str
        One label per attribute.
    arities : tuple of int
        Number of distinct codes per attribute.
    columns : ndarray of shape (M, R)
        ``columns[m, i]`` is the code of attribute ``m`` in row ``i``.
    targets : dict of str to ndarray of shape (R,)
        Real-valued columns usable by ``TARGET`` components.
    levels : tuple of tuple of str, optional
        Printable label for every code; defaults to the code itself.
    """

    attribute_names: tuple
    arities: tuple
    columns: np.ndarray
    targets: Mapping[str, np.ndarray] = field(default_factory=dict)
    levels: tuple = None

    def __post_init__(self):
        names = tuple(self.attribute_names)
        arities = tuple(int(a) for a in self.arities)
        columns = np.asarray(self.columns, dtype=np.int64)
        if columns.ndim == 1 and columns.size == 0:
            columns = columns.reshape(len(names), 0)
        if columns.ndim != 2 or columns.shape[0] != len(names):
            raise DataError(f"columns must have shape (M, R) with M={len(names)}")
        if len(arities) != len(names):
            raise DataError("one arity per attribute required")
        if len(set(names)) != len(names):
            raise DataError("attribute names must be unique")
        for m, a in enumerate(arities):
            if a < 1:
                raise DataError(f"attribute {names[m]!r} has arity {a} < 1")
            col = columns[m]
            if col.size and (col.min() < 0 or col.max() >= a):
                raise DataError(f"attribute {names[m]!r} has codes outside [0, {a})")
        n_rows = columns.shape[1]
        targets = {}
        for name, values in dict(self.targets).items():
            if name in names:
                raise DataError(f"target {name!r} clashes with an attribute name")
            arr = np.asarray(values, dtype=np.float64)
            if arr.shape != (n_rows,):
                raise DataError(f"target {name!r} has length {arr.shape} != {n_rows}")
            arr.setflags(write=False)
            targets[name] = arr
        if self.levels is None:
            levels = tuple(tuple(str(v) for v in range(a)) for a in arities)
        else:
            levels = tuple(tuple(str(s) for s in lv) for lv in self.levels)
            if [len(lv) for lv in levels] != list(arities):
                raise DataError("levels must list exactly arity labels per attribute")
        columns.setflags(write=False)
        object.__setattr__(self, "attribute_names", names)
        object.__setattr__(self, "arities", arities)
        object.__setattr__(self, "columns", columns)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "levels", levels)

    @property
    def n_rows(self) -> int:
        return self.columns.shape[1]

    @property
    def n_attributes(self) -> int:
        return self.columns.shape[0]

    def attribute_index(self, name: Union[str, int]) -> int:
        if isinstance(name, (int, np.integer)):
            if not 0 <= name < self.n_attributes:
                raise ConfigError(f"attribute index {name} out of range")
            return int(name)
        try:
            return self.attribute_names.index(name)
        except ValueError:
            raise ConfigError(f"unknown attribute {name!r}") from None

    def level_code(self, attribute: Union[str, int], level: str) -> int:
        m = self.attribute_index(attribute)
        try:
            return self.levels[m].index(str(level))
        except ValueError:
            raise ConfigError(f"attribute {self.attribute_names[m]!r} has no level {level!r}") from None

    def with_target(self, name: str, values) -> "Dataset":
        """Return a copy with target ``name`` added or replaced."""
        targets = dict(self.targets)
        targets[name] = np.asarray(values, dtype=np.float64)
        return Dataset(self.attribute_names, self.arities, self.columns, targets, self.levels)

    def take(self, rows) -> "Dataset":
        """Return the sub-dataset made of ``rows`` (arities and levels kept)."""
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(
            self.attribute_names,
            self.arities,
            self.columns[:, rows],
            {k: v[rows] for k, v in self.targets.items()},
            self.levels,
        )

    def all_rows(self) -> np.ndarray:
        return np.arange(self.n_rows, dtype=np.int64)


# ---------------------------------------------------------------------------
# statistics vectors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstantOne:
    pass


@dataclass(frozen=True)
class Indicator:
    attribute: Union[str, int]
    value: Union[str, int]


@dataclass(frozen=True)
class OneHot:
    attribute: Union[str, int]


@dataclass(frozen=True)
class Target:
    name: str


@dataclass(frozen=True)
class TargetSquared:
    name: str


Component = Union[ConstantOne, Indicator, OneHot, Target, TargetSquared]


class StatVecSpec:
    """Declarative per-row statistics vector, validated against a dataset.

    Every component name is resolved at construction time, so a bad
    ``Target`` raises :class:`ConfigError` here and never during evaluation.
    ``Indicator`` values may be given as a code or as a level string.
    """

    def __init__(self, components: Sequence[Component], dataset: Dataset):
        if not components:
            raise ConfigError("a statistics vector needs at least one component")
        resolved = []
        labels = []
        for comp in components:
            if isinstance(comp, ConstantOne):
                resolved.append(("one",))
                labels.append("1")
            elif isinstance(comp, Indicator):
                m = dataset.attribute_index(comp.attribute)
                v = comp.value
                if isinstance(v, str):
                    v = dataset.level_code(m, v)
                if not 0 <= int(v) < dataset.arities[m]:
                    raise ConfigError(f"indicator value {comp.value!r} out of range")
                resolved.append(("ind", m, int(v)))
                labels.append(f"[{dataset.attribute_names[m]}={dataset.levels[m][int(v)]}]")
            elif isinstance(comp, OneHot):
                m = dataset.attribute_index(comp.attribute)
                for v in range(dataset.arities[m]):
                    resolved.append(("ind", m, v))
                    labels.append(f"[{dataset.attribute_names[m]}={dataset.levels[m][v]}]")
            elif isinstance(comp, (Target, TargetSquared)):
                if comp.name not in dataset.targets:
                    raise ConfigError(f"undeclared target {comp.name!r}")
                sq = isinstance(comp, TargetSquared)
                resolved.append(("tsq" if sq else "t", comp.name))
                labels.append(f"{comp.name}^2" if sq else comp.name)
            else:
                raise ConfigError(f"unknown statistics component {comp!r}")
        self.components = tuple(components)
        self._resolved = tuple(resolved)
        self.labels = tuple(labels)
        self.dim = len(resolved)

    @property
    def leading_constant(self) -> bool:
        return self._resolved[0] == ("one",)

    def target_name(self, position: int):
        """Name of the target feeding expanded component ``position``, or None."""
        kind = self._resolved[position]
        return kind[1] if kind[0] in ("t", "tsq") else None

    def is_one_hot_of(self, attribute: int) -> bool:
        """True if the statistics vector is exactly ``ONE_HOT(attribute)``."""
        return len(self.components) == 1 and self._resolved == tuple(
            ("ind", attribute, v) for v in range(self.dim)
        )

    def matrix(self, ds: Dataset) -> np.ndarray:
        """Statistics vectors of every row, shape ``(R, d)``, C-contiguous."""
        out = np.empty((ds.n_rows, self.dim), dtype=np.float64)
        for j, kind in enumerate(self._resolved):
            if kind[0] == "one":
                out[:, j] = 1.0
            elif kind[0] == "ind":
                out[:, j] = ds.columns[kind[1]] == kind[2]
            elif kind[0] == "t":
                out[:, j] = _target(ds, kind[1])
            else:
                out[:, j] = _target(ds, kind[1]) ** 2
        return out

    def __repr__(self):
        return f"StatVecSpec({list(self.labels)})"


def _target(ds: Dataset, name: str) -> np.ndarray:
    try:
        return ds.targets[name]
    except KeyError:
        raise ConfigError(f"dataset has no target {name!r}") from None


def eval_statvec(ds: Dataset, spec: StatVecSpec, row: int) -> np.ndarray:
    """Statistics vector of a single row."""
    if not 0 <= row < ds.n_rows:
        raise IndexError(f"row {row} out of range [0, {ds.n_rows})")
    return spec.matrix(ds.take([row]))[0]


def as_stat_matrix(ds: Dataset, stats) -> np.ndarray:
    """Accept either a :class:`StatVecSpec` or a precomputed ``(R, d)`` matrix."""
    if isinstance(stats, StatVecSpec):
        return stats.matrix(ds)
    arr = np.ascontiguousarray(stats, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != ds.n_rows:
        raise ConfigError(f"statistics matrix must have shape ({ds.n_rows}, d)")
    return arr


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ColumnRole:
    """How one CSV column is used.

    ``kind`` is ``"cat"`` (categorical attribute), ``"num"`` (real target),
    ``"bin"`` (numeric attribute discretised into ``bins`` bins with
    ``method`` ``"eqfreq"`` or ``"eqwidth"``) or ``"ignore"``.
    """

    kind: str
    method: str = None
    bins: int = None


_BIN_RE = re.compile(r"^(eqfreq|eqwidth):(\d+)$")


def _parse_binning(text: str) -> ColumnRole:
    m = _BIN_RE.match(text.strip())
    if not m or int(m.group(2)) < 1:
        raise ConfigError(f"bad binning directive {text!r}; expected eqfreq:N or eqwidth:N")
    return ColumnRole("bin", m.group(1), int(m.group(2)))


def parse_schema(text: str) -> dict:
    """Parse a schema string such as ``"A,B,C cat; y num; age eqfreq:4; id ignore"``.

    Roles are ``cat``, ``num`` (real target), ``ignore``, ``bin`` (numeric
    attribute whose directive comes from the ``binning`` argument of
    :func:`load_csv`) or an inline ``eqfreq:N`` / ``eqwidth:N``.
    """
    schema = {}
    for group in text.split(";"):
        group = group.strip()
        if not group:
            continue
        try:
            names, role = group.rsplit(None, 1)
        except ValueError:
            raise ConfigError(f"schema group {group!r} must be '<columns> <role>'") from None
        if role in ("cat", "num", "ignore", "bin"):
            col_role = ColumnRole(role)
        else:
            col_role = _parse_binning(role)
        for name in names.split(","):
            name = name.strip()
            if not name:
                continue
            if name in schema:
                raise ConfigError(f"column {name!r} declared twice in schema")
            schema[name] = col_role
    return schema


def bin_edges(values: np.ndarray, method: str, bins: int) -> np.ndarray:
    """Interior bin edges; a value ``v`` falls in bin ``searchsorted(edges, v, 'right')``."""
    if values.size == 0:
        return np.empty(0)
    if method == "eqwidth":
        lo, hi = float(values.min()), float(values.max())
        return np.linspace(lo, hi, bins + 1)[1:-1]
    if method == "eqfreq":
        qs = np.quantile(values, np.arange(1, bins) / bins)
        return np.unique(qs)
    raise ConfigError(f"unknown binning method {method!r}")


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _bin_labels(edges: np.ndarray, lo: float, hi: float) -> list:
    bounds = [lo, *edges.tolist(), hi]
    labels = []
    for b in range(len(bounds) - 1):
        close = "]" if b == len(bounds) - 2 else ")"
        labels.append(f"[{_fmt(bounds[b])},{_fmt(bounds[b + 1])}{close}")
    return labels


def load_csv(path, schema, binning: Mapping[str, str] = None) -> Dataset:
    """Read a CSV file into a :class:`Dataset`.

    Categorical levels are coded in first-occurrence order; empty categorical
    cells become the level ``"<NA>"``.  Binned numeric columns become
    categorical attributes whose level labels record their bin edges.
    """
    if isinstance(schema, str):
        schema = parse_schema(schema)
    schema = dict(schema)
    for name, directive in (binning or {}).items():
        if name not in schema:
            raise ConfigError(f"binning given for undeclared column {name!r}")
        schema[name] = _parse_binning(directive) if isinstance(directive, str) else directive

    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: missing header row") from None
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise DataError(
                    f"{path}:{lineno}: expected {len(header)} columns, found {len(rec)}"
                )
            rows.append(rec)

    undeclared = [h for h in header if h not in schema]
    if undeclared:
        raise ConfigError(f"columns without a declared role: {undeclared}")
    missing = [s for s in schema if s not in header]
    if missing:
        raise ConfigError(f"schema names columns absent from the header: {missing}")
    for name, role in schema.items():
        if role.kind == "bin" and role.method is None:
            raise ConfigError(f"numeric attribute {name!r} needs a binning directive")

    names, arities, columns, levels, targets = [], [], [], [], {}
    for j, name in enumerate(header):
        role = schema[name]
        raw = [rec[j].strip() for rec in rows]
        if role.kind == "ignore":
            continue
        if role.kind == "cat":
            codes, lv = _encode_levels(raw)
        elif role.kind == "num":
            targets[name] = _parse_numeric(raw, name, path, allow_missing=False)
            continue
        else:
            codes, lv = _encode_binned(raw, name, path, role)
        names.append(name)
        arities.append(max(len(lv), 1))
        levels.append(lv or [NA_LEVEL])
        columns.append(codes)
    cols = np.array(columns, dtype=np.int64).reshape(len(names), len(rows))
    return Dataset(tuple(names), tuple(arities), cols, targets, tuple(tuple(lv) for lv in levels))


def _encode_levels(raw: Sequence[str]):
    index = {}
    codes = np.empty(len(raw), dtype=np.int64)
    for i, s in enumerate(raw):
        key = s if s != "" else NA_LEVEL
        codes[i] = index.setdefault(key, len(index))
    return codes, list(index)


def _parse_numeric(raw, name, path, allow_missing):
    out = np.empty(len(raw), dtype=np.float64)
    for i, s in enumerate(raw):
        if s == "":
            if allow_missing:
                out[i] = math.nan
                continue
            raise DataError(f"{path}: missing value for numeric column {name!r} in data row {i + 1}")
        try:
            out[i] = float(s)
        except ValueError:
            raise DataError(f"{path}: non-numeric value {s!r} in column {name!r}, data row {i + 1}") from None
    return out


def _encode_binned(raw, name, path, role: ColumnRole):
    values = _parse_numeric(raw, name, path, allow_missing=True)
    present = values[~np.isnan(values)]
    edges = bin_edges(present, role.method, role.bins)
    if present.size == 0:
        return np.zeros(len(raw), dtype=np.int64), [NA_LEVEL]
    labels = _bin_labels(edges, float(present.min()), float(present.max()))
    codes = np.searchsorted(edges, np.nan_to_num(values), side="right").astype(np.int64)
    if np.isnan(values).any():
        codes[np.isnan(values)] = len(labels)
        labels.append(NA_LEVEL)
    return codes, labels


def write_csv(ds: Dataset, path) -> None:
    """Write ``ds`` back out; ``"<NA>"`` levels become empty cells."""
    path = Path(path)
    tnames = list(ds.targets)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(list(ds.attribute_names) + tnames)
        for i in range(ds.n_rows):
            rec = []
            for m in range(ds.n_attributes):
                s = ds.levels[m][ds.columns[m, i]]
                rec.append("" if s == NA_LEVEL else s)
            rec.extend(repr(float(ds.targets[t][i])) for t in tnames)
            w.writerow(rec)


def schema_of(ds: Dataset) -> str:
    """Schema string that reloads a file written by :func:`write_csv`."""
    parts = []
    if ds.attribute_names:
        parts.append(",".join(ds.attribute_names) + " cat")
    if ds.targets:
        parts.append(",".join(ds.targets) + " num")
    return "; ".join(parts)


def from_columns(columns: Mapping[str, Iterable[int]], targets: Mapping[str, Iterable[float]] = None,
                 arities: Mapping[str, int] = None) -> Dataset:
    """Build a dataset from already-coded columns (arity defaults to max code + 1)."""
    names = tuple(columns)
    cols = np.array([np.asarray(list(c), dtype=np.int64) for c in columns.values()])
    if cols.size == 0:
        cols = cols.reshape(len(names), -1)
    ar = []
    for m, n in enumerate(names):
        if arities and n in arities:
            ar.append(int(arities[n]))
        else:
            ar.append(int(cols[m].max()) + 1 if cols.shape[1] else 1)
    return Dataset(names, tuple(ar), cols, dict(targets or {}))
