"""Small fixtures and synthetic generators used by tests, ``lambda`` and ``bench``."""

from __future__ import annotations

import numpy as np

from .dataset import Dataset


def t1() -> Dataset:
    """Eight rows, binary A, B, C spelling out 0..7 (A most significant), y = i + 1."""
    i = np.arange(8)
    cols = np.array([(i >> 2) & 1, (i >> 1) & 1, i & 1])
    return Dataset(("A", "B", "C"), (2, 2, 2), cols, {"y": i + 1.0})


def bernoulli(n_rows: int, n_attributes: int, p: float, seed: int = 0) -> Dataset:
    """Independent binary attributes, each equal to 1 with probability ``p``."""
    rng = np.random.default_rng(seed)
    cols = (rng.random((n_attributes, n_rows)) < p).astype(np.int64)
    names = tuple(f"a{m}" for m in range(n_attributes))
    return Dataset(names, (2,) * n_attributes, cols)


def correlated(n_rows: int, n_attributes: int, lam: float, seed: int = 0) -> Dataset:
    """Binary attribute chain aimed at compressibility ``lam``.

    Attribute 0 is Bernoulli(``lam``); attribute ``i`` copies attribute
    ``i - 1`` with probability ``1 - lam`` and otherwise draws a fresh
    Bernoulli(``lam``) value, so every attribute stays sparse and
    neighbours are strongly dependent.  The integer-valued target ``y``
    rewards a handful of attribute combinations plus uniform noise in
    ``0..9``; integer values keep every sum exact in floating point.
    """
    rng = np.random.default_rng(seed)
    cols = np.empty((n_attributes, n_rows), dtype=np.int64)
    cols[0] = rng.random(n_rows) < lam
    for m in range(1, n_attributes):
        fresh = (rng.random(n_rows) < lam).astype(np.int64)
        keep = rng.random(n_rows) < 1.0 - lam
        cols[m] = np.where(keep, cols[m - 1], fresh)
    y = rng.integers(0, 10, n_rows).astype(np.float64)
    y += 10 * cols[0]
    if n_attributes > 7:
        y += 20 * (cols[3] & (1 - cols[7]))
    if n_attributes > 12:
        y += 15 * (cols[5] & cols[12])
    names = tuple(f"a{m}" for m in range(n_attributes))
    return Dataset(names, (2,) * n_attributes, cols, {"y": y})


def random_dataset(rng: np.random.Generator, n_rows: int, arities, target_range: int = 20) -> Dataset:
    """Uniformly random codes with an integer-valued target ``y``.

    Attributes are mildly correlated with their predecessor so that trees
    have uneven MCV splits; the integer target keeps sums exact.
    """
    arities = tuple(int(a) for a in arities)
    cols = np.empty((len(arities), n_rows), dtype=np.int64)
    for m, a in enumerate(arities):
        fresh = rng.integers(0, a, n_rows)
        if m and rng.random() < 0.5:
            copy = rng.random(n_rows) < 0.4
            cols[m] = np.where(copy, cols[m - 1] % a, fresh)
        else:
            cols[m] = fresh
    y = rng.integers(0, target_range + 1, n_rows).astype(np.float64)
    names = tuple(f"x{m}" for m in range(len(arities)))
    return Dataset(names, arities, cols, {"y": y})
