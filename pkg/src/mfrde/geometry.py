"""Axis-aligned boxes and random midpoint-split tree partitions.

A tree of depth ``p`` is a complete binary tree stored in level order.
Every internal node halves its cell at the midpoint of one randomly
chosen coordinate, so each of the ``2**p`` leaf cells has volume
``box.volume / 2**p`` regardless of which coordinates were split.

Boundary convention: the domain box is closed on all faces.  Interior
cells are half-open, ``[lo, mid)`` on the left and ``[mid, hi)`` on the
right, except that a cell touching the upper face of the domain box is
closed there.  Under this rule every point of the box belongs to exactly
one leaf of every tree.

All types in this module are immutable after construction and safe for
concurrent reads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Box",
    "SplitTree",
    "Forest",
    "build_tree",
    "build_forest",
    "leaf_index",
    "leaf_indices",
    "leaf_cell",
    "cell_contains",
    "count_leaves",
    "path_split_counts",
]


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangular domain with strictly positive volume."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self) -> None:
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if len(lo) == 0 or len(lo) != len(hi):
            raise ValueError("box bounds must be non-empty and of equal length")
        if not all(a < b for a, b in zip(lo, hi)):
            raise ValueError("box must have strictly positive extent on every axis")

    @property
    def d(self) -> int:
        return len(self.lo)

    @property
    def lo_array(self) -> np.ndarray:
        return np.asarray(self.lo, dtype=float)

    @property
    def hi_array(self) -> np.ndarray:
        return np.asarray(self.hi, dtype=float)

    @property
    def volume(self) -> float:
        return float(np.prod(self.hi_array - self.lo_array))

    def contains(self, x) -> bool:
        """Closed-box membership of a single point."""
        x = _as_point(x, self.d)
        return bool(np.all(self.lo_array <= x) and np.all(x <= self.hi_array))

    def contains_batch(self, points) -> np.ndarray:
        """Closed-box membership for an ``(n, d)`` array of points."""
        pts = _as_points(points, self.d)
        return np.all((pts >= self.lo_array) & (pts <= self.hi_array), axis=1)

    @classmethod
    def bounding(cls, points, margin: float = 0.0) -> "Box":
        """Tight bounding box of the points, expanded by a relative margin."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.size == 0:
            raise ValueError("cannot bound an empty point set")
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        ext = hi - lo
        if np.any(ext <= 0) and margin <= 0:
            raise ValueError(
                "degenerate bounding box: a coordinate is constant; "
                "pass an explicit box or a positive margin"
            )
        lo = lo - margin * ext
        hi = hi + margin * ext
        return cls(tuple(lo), tuple(hi))


@dataclass(frozen=True, eq=False)
class SplitTree:
    """Complete binary midpoint-split tree of a fixed depth.

    ``node_dims`` holds the split coordinate of each internal node in
    level order; the node at index ``k`` has children ``2k+1`` and
    ``2k+2``.  A tree of depth ``p`` has ``2**p - 1`` internal nodes and
    ``2**p`` leaves.
    """

    depth: int
    node_dims: np.ndarray

    def __post_init__(self) -> None:
        if self.depth < 0:
            raise ValueError("depth must be non-negative")
        dims = np.asarray(self.node_dims, dtype=np.int64)
        if dims.shape != (2**self.depth - 1,):
            raise ValueError(
                f"expected {2 ** self.depth - 1} node labels for depth "
                f"{self.depth}, got {dims.shape}"
            )
        dims.setflags(write=False)
        object.__setattr__(self, "node_dims", dims)

    @property
    def n_leaves(self) -> int:
        return 2**self.depth


@dataclass(frozen=True, eq=False)
class Forest:
    """Independent random trees of one depth over a shared box.

    Construction is a pure function of ``(seed, depth, n_trees, box.d)``;
    identical seeds reproduce identical forests.
    """

    box: Box
    trees: tuple[SplitTree, ...]
    seed: int | None = None

    def __post_init__(self) -> None:
        if len(self.trees) == 0:
            raise ValueError("forest needs at least one tree")
        depth = self.trees[0].depth
        if any(t.depth != depth for t in self.trees):
            raise ValueError("all trees in a forest must share one depth")
        for t in self.trees:
            if t.node_dims.size and int(t.node_dims.max()) >= self.box.d:
                raise ValueError("tree splits a coordinate outside the box dimension")
            if t.node_dims.size and int(t.node_dims.min()) < 0:
                raise ValueError("negative split coordinate")

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    @property
    def depth(self) -> int:
        return self.trees[0].depth


def build_tree(d: int, p: int, rng: np.random.Generator) -> SplitTree:
    """Draw a random depth-p tree: each node splits a uniform coordinate."""
    if d < 1:
        raise ValueError("dimension must be at least 1")
    if p < 0:
        raise ValueError("depth must be non-negative")
    dims = rng.integers(0, d, size=2**p - 1, dtype=np.int64)
    return SplitTree(depth=p, node_dims=dims)


def build_forest(box: Box, p: int, n_trees: int, seed) -> Forest:
    """Build ``n_trees`` independent random trees from per-tree substreams.

    ``seed`` may be an integer or a ``numpy.random.SeedSequence``.  Each
    tree gets its own spawned stream, so construction may run in parallel
    without changing the result.
    """
    if n_trees < 1:
        raise ValueError("tree count must be at least 1")
    if isinstance(seed, np.random.SeedSequence):
        ss = seed
        stored = None
    else:
        stored = int(seed)
        ss = np.random.SeedSequence(stored)
    streams = ss.spawn(n_trees)
    trees = tuple(build_tree(box.d, p, np.random.default_rng(s)) for s in streams)
    return Forest(box=box, trees=trees, seed=stored)


def leaf_index(tree: SplitTree, box: Box, x) -> int:
    """Leaf id of the cell containing ``x``.

    The id is the root-to-leaf path read as a bit string, left=0 and
    right=1, with the root bit most significant.  A coordinate equal to
    the current midpoint goes right, which makes cells half-open and
    keeps the upper face of the box inside the last cell.
    """
    x = _as_point(x, box.d)
    if not box.contains(x):
        raise ValueError("point outside domain")
    lo = box.lo_array.copy()
    hi = box.hi_array.copy()
    node = 0
    leaf = 0
    for _ in range(tree.depth):
        dim = int(tree.node_dims[node])
        mid = 0.5 * (lo[dim] + hi[dim])
        right = x[dim] >= mid
        if right:
            lo[dim] = mid
        else:
            hi[dim] = mid
        leaf = (leaf << 1) | int(right)
        node = 2 * node + 1 + int(right)
    return leaf


def leaf_indices(tree: SplitTree, box: Box, points) -> np.ndarray:
    """Vectorized ``leaf_index`` for an ``(n, d)`` array of in-box points."""
    pts = _as_points(points, box.d)
    n = pts.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    if not np.all(box.contains_batch(pts)):
        raise ValueError("point outside domain")
    lo = np.broadcast_to(box.lo_array, pts.shape).copy()
    hi = np.broadcast_to(box.hi_array, pts.shape).copy()
    rows = np.arange(n)
    node = np.zeros(n, dtype=np.int64)
    leaf = np.zeros(n, dtype=np.int64)
    for _ in range(tree.depth):
        dims = tree.node_dims[node]
        a = lo[rows, dims]
        b = hi[rows, dims]
        mid = 0.5 * (a + b)
        right = pts[rows, dims] >= mid
        lo[rows, dims] = np.where(right, mid, a)
        hi[rows, dims] = np.where(right, b, mid)
        leaf = (leaf << 1) | right
        node = 2 * node + 1 + right
    return leaf


def leaf_cell(tree: SplitTree, box: Box, leaf: int) -> Box:
    """Reconstruct the cell of a leaf by replaying its midpoint splits."""
    if not 0 <= leaf < tree.n_leaves:
        raise ValueError("leaf id out of range")
    lo = box.lo_array.copy()
    hi = box.hi_array.copy()
    node = 0
    for level in range(tree.depth - 1, -1, -1):
        bit = (leaf >> level) & 1
        dim = int(tree.node_dims[node])
        mid = 0.5 * (lo[dim] + hi[dim])
        if bit:
            lo[dim] = mid
        else:
            hi[dim] = mid
        node = 2 * node + 1 + bit
    return Box(tuple(lo), tuple(hi))


def cell_contains(cell: Box, domain: Box, points) -> np.ndarray:
    """Half-open cell membership relative to the closed domain box.

    A cell face coinciding with the domain's upper face is closed there;
    every other upper face is open.  Accepts a single point or an
    ``(n, d)`` array and returns a boolean scalar or array.
    """
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    pts = _as_points(pts, cell.d)
    lo = cell.lo_array
    hi = cell.hi_array
    closed_hi = hi == domain.hi_array
    ok = (pts >= lo) & ((pts < hi) | (closed_hi & (pts == hi)))
    out = np.all(ok, axis=1)
    return bool(out[0]) if single else out


def count_leaves(tree: SplitTree, box: Box, points) -> tuple[np.ndarray, int]:
    """Per-leaf point counts plus the number of points outside the box.

    Points outside the box are dropped rather than an error: they carry
    no leaf.  ``counts.sum() + dropped == len(points)``.
    """
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        return np.zeros(tree.n_leaves, dtype=np.int64), 0
    pts = _as_points(pts, box.d)
    mask = box.contains_batch(pts)
    ids = leaf_indices(tree, box, pts[mask])
    counts = np.bincount(ids, minlength=tree.n_leaves).astype(np.int64)
    return counts, int(pts.shape[0] - mask.sum())


def path_split_counts(tree: SplitTree, box: Box, x) -> np.ndarray:
    """How many times the root-to-leaf path of ``x`` splits each coordinate."""
    x = _as_point(x, box.d)
    if not box.contains(x):
        raise ValueError("point outside domain")
    lo = box.lo_array.copy()
    hi = box.hi_array.copy()
    counts = np.zeros(box.d, dtype=np.int64)
    node = 0
    for _ in range(tree.depth):
        dim = int(tree.node_dims[node])
        counts[dim] += 1
        mid = 0.5 * (lo[dim] + hi[dim])
        right = x[dim] >= mid
        if right:
            lo[dim] = mid
        else:
            hi[dim] = mid
        node = 2 * node + 1 + int(right)
    return counts


def _as_point(x, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (d,):
        raise ValueError(f"expected a point of dimension {d}, got shape {x.shape}")
    return x


def _as_points(points, d: int) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.ndim != 2 or pts.shape[1] != d:
        raise ValueError(f"expected points of dimension {d}, got shape {pts.shape}")
    return pts
