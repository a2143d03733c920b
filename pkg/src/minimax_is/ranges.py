"""Finite spaces, metric tables and set distances.

Everything downstream works with element *indices*. A point set is a sorted,
duplicate-free tuple of indices; that tuple is the identity of a set-valued
state wherever one is needed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

PointSet = tuple  # tuple[int, ...], sorted ascending, unique

REAL_TOL = 1e-9


class MetricError(ValueError):
    """Raised when a distance table or point set cannot be used as given."""


def point_set(items: Iterable[int]) -> PointSet:
    """Canonical form of a collection of indices."""
    return tuple(sorted({int(i) for i in items}))


def encode_point_set(ps: PointSet) -> bytes:
    return np.asarray(ps, dtype="<u4").tobytes()


@dataclass(frozen=True)
class FiniteSpace:
    """Ordered labelled finite set; element ``i`` has label ``labels[i]``."""

    labels: tuple
    coords: Optional[tuple] = None

    def __post_init__(self):
        labels = tuple(str(lab) for lab in self.labels)
        object.__setattr__(self, "labels", labels)
        if len(labels) == 0:
            raise MetricError("a finite space needs at least one element")
        if len(set(labels)) != len(labels):
            raise MetricError("space labels must be unique")
        if self.coords is not None:
            coords = tuple(tuple(c) if isinstance(c, (list, tuple)) else c for c in self.coords)
            if len(coords) != len(labels):
                raise MetricError("coords must have one entry per element")
            object.__setattr__(self, "coords", coords)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def size(self) -> int:
        return len(self.labels)

    def index(self, label) -> int:
        return self.labels.index(str(label))

    @classmethod
    def range(cls, n: int, prefix: str = "") -> "FiniteSpace":
        return cls(tuple(f"{prefix}{i}" for i in range(n)))


class MetricTable:
    """Distances over ``size`` points, addressed by index.

    Subclasses implement :meth:`lookup`, which must broadcast like numpy
    fancy indexing.
    """

    size: int
    is_integer: bool = True

    def lookup(self, i, j) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, i: int, j: int):
        v = self.lookup(np.asarray(i), np.asarray(j))
        return int(v) if self.is_integer else float(v)

    def sub(self, rows: Sequence[int], cols: Sequence[int]) -> np.ndarray:
        r = np.asarray(rows, dtype=np.int64)
        c = np.asarray(cols, dtype=np.int64)
        return self.lookup(r[:, None], c[None, :])

    def dense(self) -> np.ndarray:
        idx = np.arange(self.size)
        return self.sub(idx, idx)


class DenseMetric(MetricTable):
    """A metric given by an explicit symmetric ``n x n`` table."""

    def __init__(self, matrix):
        m = np.asarray(matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise MetricError(f"metric table must be square, got shape {m.shape}")
        if np.issubdtype(m.dtype, np.integer) or (
            np.all(np.isfinite(m)) and np.array_equal(m, np.round(m))
        ):
            m = m.astype(np.int64)
            self.is_integer = True
        else:
            m = m.astype(np.float64)
            self.is_integer = False
        m.setflags(write=False)
        self.matrix = m
        self.size = m.shape[0]

    def lookup(self, i, j):
        return self.matrix[i, j]

    def dense(self):
        return self.matrix

    def __repr__(self):
        return f"DenseMetric(size={self.size})"


class ProductMetric(MetricTable):
    """Sum metric on a product of factor spaces.

    Index ``k`` of the product decomposes row-major over the factors, so for
    two factors of sizes ``(n0, n1)`` the pair ``(a, b)`` has index
    ``a * n1 + b``.
    """

    def __init__(self, factors: Sequence[MetricTable]):
        if not factors:
            raise MetricError("product metric needs at least one factor")
        self.factors = tuple(factors)
        self.shape = tuple(f.size for f in self.factors)
        self.size = int(np.prod(self.shape))
        self.is_integer = all(f.is_integer for f in self.factors)

    def lookup(self, i, j):
        i = np.asarray(i)
        j = np.asarray(j)
        ii = np.unravel_index(i, self.shape)
        jj = np.unravel_index(j, self.shape)
        total = self.factors[0].lookup(ii[0], jj[0])
        for f, a, b in zip(self.factors[1:], ii[1:], jj[1:]):
            total = total + f.lookup(a, b)
        return total

    def __repr__(self):
        return f"ProductMetric(shape={self.shape})"


class AugmentedMetric(MetricTable):
    """``base(index[i], index[j]) + |offset[i] - offset[j]|`` on points that
    pair a base point with a real offset."""

    def __init__(self, base: MetricTable, index: Sequence[int], offsets: Sequence[float]):
        self.base = base
        self.index = np.asarray(index, dtype=np.int64)
        off = np.asarray(offsets, dtype=np.float64)
        self.is_integer = base.is_integer and bool(np.all(off == np.round(off)))
        self.offsets = off.astype(np.int64) if self.is_integer else off
        self.size = len(self.index)

    def lookup(self, i, j):
        i = np.asarray(i)
        j = np.asarray(j)
        return self.base.lookup(self.index[i], self.index[j]) + np.abs(self.offsets[i] - self.offsets[j])

    def __repr__(self):
        return f"AugmentedMetric(size={self.size})"


def discrete_metric(n: int) -> DenseMetric:
    m = np.ones((n, n), dtype=np.int64)
    np.fill_diagonal(m, 0)
    return DenseMetric(m)


def line_metric(positions: Sequence[float]) -> DenseMetric:
    p = np.asarray(positions)
    return DenseMetric(np.abs(p[:, None] - p[None, :]))


def metric_violations(d: MetricTable, max_triangle: int = 600) -> list[str]:
    """Check the metric axioms; an empty list means the table is a metric.

    The triangle inequality is checked exhaustively for tables up to
    ``max_triangle`` points; product metrics are checked factor by factor.
    """
    problems = []
    if isinstance(d, ProductMetric):
        # a sum of metrics is a metric, so the factors decide
        for k, f in enumerate(d.factors):
            problems += [f"factor {k}: {p}" for p in metric_violations(f, max_triangle)]
        return problems
    if isinstance(d, AugmentedMetric):
        # a metric plus |offset difference| stays a metric on distinct pairs
        problems += [f"base: {p}" for p in metric_violations(d.base, max_triangle)]
        if len(set(zip(d.index.tolist(), d.offsets.tolist()))) != d.size:
            problems.append("two points share the same base point and offset")
        return problems
    m = d.dense()
    tol = 0 if d.is_integer else REAL_TOL
    if not np.all(np.isfinite(m)):
        problems.append("non-finite distance")
        return problems
    if np.any(np.abs(np.diag(m)) > tol):
        problems.append("non-zero diagonal")
    if np.any(np.abs(m - m.T) > tol):
        i, j = np.argwhere(np.abs(m - m.T) > tol)[0]
        problems.append(f"asymmetric at ({i},{j})")
    off = ~np.eye(d.size, dtype=bool)
    if np.any(m[off] <= tol):
        i, j = np.argwhere((m <= tol) & off)[0]
        problems.append(f"non-positive distance between distinct points ({i},{j})")
    if d.size <= max_triangle:
        for k in range(d.size):
            # d(i,j) <= d(i,k) + d(k,j) for all i, j at this pivot
            bad = m > m[:, k][:, None] + m[k, :][None, :] + tol
            if bad.any():
                i, j = np.argwhere(bad)[0]
                problems.append(f"triangle inequality fails for ({i},{k},{j})")
                break
    return problems


def hausdorff(a: Sequence[int], b: Sequence[int], d: MetricTable):
    """Hausdorff distance between two non-empty index sets under ``d``."""
    if len(a) == 0 or len(b) == 0:
        raise MetricError("Hausdorff distance is undefined for an empty set")
    D = d.sub(a, b)
    h = max(D.min(axis=1).max(), D.min(axis=0).max())
    return int(h) if d.is_integer else float(h)


class SetMetric(MetricTable):
    """Hausdorff metric induced by ``base`` on a fixed list of point sets.

    Each point set may carry a tag (e.g. a pinned initial observation); when
    ``tag_metric`` is given the distance is ``max(H(A, B), tag_metric(a, b))``.
    """

    def __init__(self, sets: Sequence[Sequence[int]], base: MetricTable,
                 tags: Optional[Sequence[int]] = None,
                 tag_metric: Optional[MetricTable] = None):
        if any(len(s) == 0 for s in sets):
            raise MetricError("Hausdorff distance is undefined for an empty set")
        self.base = base
        self.size = len(sets)
        self.is_integer = base.is_integer and (tag_metric is None or tag_metric.is_integer)
        width = max((len(s) for s in sets), default=1)
        # Pad by repeating the first member; duplicates do not change H.
        padded = np.empty((self.size, width), dtype=np.int64)
        for k, s in enumerate(sets):
            padded[k, :len(s)] = s
            padded[k, len(s):] = s[0]
        self.members = padded
        self.width = width
        self.tags = None if tags is None else np.asarray(tags, dtype=np.int64)
        self.tag_metric = tag_metric

    def lookup(self, i, j):
        i = np.asarray(i)
        j = np.asarray(j)
        A = self.members[i][..., :, None]
        B = self.members[j][..., None, :]
        D = self.base.lookup(A, B)
        h = np.maximum(D.min(axis=-1).max(axis=-1), D.min(axis=-2).max(axis=-1))
        if self.tag_metric is not None and self.tags is not None:
            h = np.maximum(h, self.tag_metric.lookup(self.tags[i], self.tags[j]))
        return h

    def block_rows(self, budget: int = 2_000_000) -> int:
        return max(1, budget // max(1, self.size * self.width * self.width))


def lipschitz_constant(f, d_in: MetricTable, d_out: Optional[MetricTable] = None,
                       block: Optional[int] = None) -> float:
    """Smallest L with ``dist(f(x), f(x')) <= L * d_in(x, x')`` on a finite domain.

    ``f[i]`` is the image of domain point ``i``: an index into ``d_out`` or,
    when ``d_out`` is None, a real number compared by absolute difference.
    A 2-D ``f`` holds one map per column and gives the worst constant among
    them. Singleton domains give 0.
    """
    f = np.asarray(f)
    n = len(f)
    if n != d_in.size:
        raise MetricError(f"map has {n} points but the input metric has {d_in.size}")
    if n < 2:
        return 0.0
    if block is None:
        block = d_in.block_rows() if isinstance(d_in, SetMetric) else max(1, 2_000_000 // n)
        if f.ndim == 2:
            block = max(1, block // f.shape[1])
    best = 0.0
    idx = np.arange(n)
    for start in range(0, n - 1, block):
        rows = idx[start:start + block]
        cols = idx[start + 1:]
        if d_out is None:
            num = np.abs(f[rows][:, None] - f[cols][None, :]).astype(np.float64)
        else:
            num = d_out.lookup(f[rows][:, None], f[cols][None, :]).astype(np.float64)
        if num.ndim == 3:
            num = num.max(axis=2)
        # only pairs i < j; skip zero numerators before touching d_in
        upper = rows[:, None] < cols[None, :]
        live = upper & (num > 0)
        if not live.any():
            continue
        r, c = np.nonzero(live)
        din = d_in.lookup(rows[r], cols[c]).astype(np.float64)
        if np.any(din <= 0):
            raise MetricError("input metric is zero between distinct points")
        best = max(best, float((num[r, c] / din).max()))
    return best


def grid_cells(width: int, height: int) -> list[tuple[int, int]]:
    """Signed ``(col, row)`` coordinates of a grid, sorted lexicographically.

    A width of 9 spans columns -4..4; a width of 4 spans -2..1.
    """
    if width < 1 or height < 1:
        raise MetricError("grid dimensions must be positive")
    xs = range(-(width // 2), width - width // 2)
    ys = range(-(height // 2), height - height // 2)
    return [(x, y) for x in xs for y in ys]


def free_cells(width: int, height: int, obstacles: Iterable[tuple[int, int]] = ()) -> list[tuple[int, int]]:
    blocked = {tuple(o) for o in obstacles}
    return [c for c in grid_cells(width, height) if c not in blocked]


def shortest_path_metric(width: int, height: int,
                         obstacles: Iterable[tuple[int, int]] = ()) -> DenseMetric:
    """Obstacle-avoiding 4-neighbour path lengths between the free cells.

    Rows and columns follow :func:`free_cells` order.
    """
    blocked = {tuple(o) for o in obstacles}
    allc = set(grid_cells(width, height))
    unknown = blocked - allc
    if unknown:
        raise MetricError(f"obstacles outside the grid: {sorted(unknown)}")
    cells = free_cells(width, height, blocked)
    if not cells:
        raise MetricError("grid has no free cells")
    where = {c: k for k, c in enumerate(cells)}
    rows, cols = [], []
    for k, (x, y) in enumerate(cells):
        for dx, dy in ((1, 0), (0, 1)):
            nb = where.get((x + dx, y + dy))
            if nb is not None:
                rows += [k, nb]
                cols += [nb, k]
    n = len(cells)
    adj = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    dist = shortest_path(adj, method="D", unweighted=True)
    if not np.all(np.isfinite(dist)):
        i, j = np.argwhere(~np.isfinite(dist))[0]
        raise MetricError(f"free cells {cells[i]} and {cells[j]} are not connected")
    return DenseMetric(dist.astype(np.int64))
