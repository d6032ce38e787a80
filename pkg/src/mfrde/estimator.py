"""Median-of-forests density estimation.

Fitting splits the sample into disjoint equal-size blocks via a uniform
permutation, counts each block's points in the leaves of one shared
random forest, and normalizes the pointwise lower median of the per-block
forest densities so it integrates to one over the box.

For a block of size ``m`` and a depth-``p`` tree, the tree density at
``x`` is ``count_in_leaf / (m * box.volume * 2**-p)``; the block (forest)
density averages that over the trees; the aggregate takes the k-th
smallest block value with ``k = ceil(S / 2)``, the lower median.  All
evaluation paths accumulate per-tree terms left to right and divide once
by the tree count, so scalar and batched queries are bit-identical.

Fitted models are immutable; evaluation is safe for concurrent readers.
Fitting itself is deterministic given the config seed: trees, the block
permutation and any Monte Carlo quadrature draws come from separate
spawned substreams.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np

from .datasets import Dataset
from .geometry import Box, Forest, SplitTree, build_forest, leaf_index, leaf_indices

__all__ = [
    "Quadrature",
    "EstimatorConfig",
    "BlockAssignment",
    "FittedMFRDE",
    "assign_blocks",
    "stde_at",
    "sfde_at",
    "median_at",
    "fit",
    "evaluate",
    "evaluate_batch",
    "integrate_estimate",
    "save_model",
    "load_model",
]

MODEL_FORMAT_VERSION = 1

# Fixed chunk sizes keep quadrature results independent of available memory.
_QUAD_CHUNK = 1 << 15
_EVAL_TARGET_ELEMS = 4_000_000


@dataclass(frozen=True)
class Quadrature:
    """How to integrate the unnormalized median over the box.

    ``exact-dyadic`` sums the median at the centers of the ``2**(p*d)``
    dyadic cells on which it is piecewise constant, an exact integral up
    to floating-point summation; it refuses to run past ``cell_budget``
    cells.  ``regular-grid`` averages over an inclusive-endpoint lattice
    with ``grid_points`` nodes per axis.  ``monte-carlo`` averages over
    ``mc_draws`` uniform draws.  ``auto`` picks exact-dyadic when within
    budget and the regular grid otherwise.
    """

    method: str = "auto"
    grid_points: int = 100
    mc_draws: int = 100_000
    cell_budget: int = 1 << 24

    def __post_init__(self) -> None:
        if self.method not in ("auto", "exact-dyadic", "regular-grid", "monte-carlo"):
            raise ValueError(f"unknown quadrature method {self.method!r}")
        if self.grid_points < 2:
            raise ValueError("regular grid needs at least 2 points per axis")
        if self.mc_draws < 1:
            raise ValueError("monte-carlo needs at least 1 draw")
        if self.cell_budget < 1:
            raise ValueError("cell budget must be positive")

    @classmethod
    def parse(cls, text: str) -> "Quadrature":
        """Parse a compact spec: ``auto``, ``exact``, ``grid[:G]`` or ``mc[:N]``."""
        name, _, arg = text.partition(":")
        if name == "auto":
            return cls()
        if name in ("exact", "exact-dyadic"):
            return cls(method="exact-dyadic")
        if name in ("grid", "regular-grid"):
            return cls(method="regular-grid", grid_points=int(arg) if arg else 100)
        if name in ("mc", "monte-carlo"):
            return cls(method="monte-carlo", mc_draws=int(arg) if arg else 100_000)
        raise ValueError(f"cannot parse quadrature spec {text!r}")


@dataclass(frozen=True)
class EstimatorConfig:
    """Fit-time choices: block size, forest shape, seed, domain, quadrature.

    Exactly one of ``m`` (absolute block size) and ``m_ratio`` (fraction
    of the sample) must be set.  ``box=None`` means the tight bounding
    box of the data expanded by ``box_margin`` relative to its extent.
    """

    m: int | None = None
    m_ratio: float | None = None
    trees: int = 20
    depth: int = 6
    seed: int = 0
    quadrature: Quadrature = field(default_factory=Quadrature)
    box: Box | None = None
    box_margin: float = 0.0

    def __post_init__(self) -> None:
        if (self.m is None) == (self.m_ratio is None):
            raise ValueError("set exactly one of m and m_ratio")
        if self.m is not None and self.m < 1:
            raise ValueError("block size must be at least 1")
        if self.m_ratio is not None and self.m_ratio <= 0:
            raise ValueError("block-size ratio must be positive")
        if self.trees < 1:
            raise ValueError("tree count must be at least 1")
        if self.depth < 0:
            raise ValueError("depth must be non-negative")
        if self.box_margin < 0:
            raise ValueError("box margin must be non-negative")

    def resolve_m(self, n: int) -> int:
        m = self.m if self.m is not None else int(round(self.m_ratio * n))
        if m < 1:
            raise ValueError("block size must be at least 1")
        if m > n:
            raise ValueError("block size exceeds sample size")
        return m


@dataclass(frozen=True)
class BlockAssignment:
    """Disjoint equal-size index blocks cut from a uniform permutation."""

    n: int
    m: int
    blocks: np.ndarray
    dropped: np.ndarray

    def __post_init__(self) -> None:
        blocks = np.asarray(self.blocks, dtype=np.int64)
        dropped = np.asarray(self.dropped, dtype=np.int64)
        blocks.setflags(write=False)
        dropped.setflags(write=False)
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "dropped", dropped)

    @property
    def n_blocks(self) -> int:
        return int(self.blocks.shape[0])


def assign_blocks(n: int, m: int, rng: np.random.Generator) -> BlockAssignment:
    """Permute ``{0..n-1}`` and cut the head into ``floor(n/m)`` blocks of ``m``.

    The ``n mod m`` tail of the permutation is dropped and reported.
    """
    if m < 1:
        raise ValueError("block size must be at least 1")
    if m > n:
        raise ValueError("block size exceeds sample size")
    perm = rng.permutation(n)
    s = n // m
    return BlockAssignment(
        n=n, m=m, blocks=perm[: s * m].reshape(s, m), dropped=perm[s * m :]
    )


@dataclass(frozen=True, eq=False)
class FittedMFRDE:
    """Fitted model: shared forest, per-block leaf counts, normalizer."""

    config: EstimatorConfig
    forest: Forest
    n: int
    m: int
    dropped: int
    counts: np.ndarray  # (S, T, 2**p) non-negative int64
    normalizer: float
    median_rank: int
    quadrature: Quadrature  # resolved method actually used for the normalizer

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=np.int64)
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        s, t, leaves = counts.shape
        if t != self.forest.n_trees or leaves != 2**self.forest.depth:
            raise ValueError("count array shape does not match the forest")
        if counts.min(initial=0) < 0:
            raise ValueError("leaf counts must be non-negative")
        if counts.size and counts.sum(axis=2).max() > self.m:
            raise ValueError("a block holds more points than its size")
        if not self.normalizer > 0:
            raise ValueError("normalizer must be strictly positive")
        if self.median_rank != (s + 1) // 2:
            raise ValueError("median rank must be ceil(S/2)")

    @property
    def box(self) -> Box:
        return self.forest.box

    @property
    def n_blocks(self) -> int:
        return int(self.counts.shape[0])

    @property
    def n_trees(self) -> int:
        return self.forest.n_trees

    @property
    def depth(self) -> int:
        return self.forest.depth

    @property
    def cell_volume(self) -> float:
        return self.box.volume * 2.0**-self.depth

    def evaluate(self, x, outside: str = "zero") -> float:
        return evaluate(self, x, outside=outside)

    def evaluate_batch(self, points, outside: str = "zero") -> np.ndarray:
        return evaluate_batch(self, points, outside=outside)

    def save(self, path) -> None:
        save_model(self, path)


def stde_at(counts_t: np.ndarray, tree: SplitTree, box: Box, m: int, x) -> float:
    """Single-tree density: leaf count over ``m`` times the leaf volume."""
    denom = m * (box.volume * 2.0**-tree.depth)
    return float(counts_t[leaf_index(tree, box, x)] / denom)


def _block_density_matrix(
    forest: Forest, counts: np.ndarray, m: int, points: np.ndarray
) -> np.ndarray:
    """Per-block forest densities at in-box points, shape ``(S, n)``.

    Sums the integer leaf counts over the trees first (exact), then
    divides once by ``m`` times the leaf volume and once by the tree
    count.  Every query path shares this float expression, so scalar and
    batched evaluation are bit-identical.
    """
    denom = m * (forest.box.volume * 2.0**-forest.depth)
    acc = np.zeros((counts.shape[0], points.shape[0]), dtype=np.int64)
    for t, tree in enumerate(forest.trees):
        ids = leaf_indices(tree, forest.box, points)
        acc += counts[:, t, :][:, ids]
    return acc / denom / forest.n_trees


def _median_values(
    forest: Forest, counts: np.ndarray, m: int, rank: int, points: np.ndarray
) -> np.ndarray:
    """Lower median (k-th smallest, k=rank) of the block densities."""
    dens = _block_density_matrix(forest, counts, m, points)
    return np.partition(dens, rank - 1, axis=0)[rank - 1]


def sfde_at(model: FittedMFRDE, s: int, x) -> float:
    """Block ``s``'s forest density at an in-box point."""
    if not 0 <= s < model.n_blocks:
        raise ValueError("block id out of range")
    x = np.asarray(x, dtype=float)
    if not model.box.contains(x):
        raise ValueError("point outside domain")
    return float(
        _block_density_matrix(model.forest, model.counts, model.m, x[None, :])[s, 0]
    )


def median_at(model: FittedMFRDE, x) -> float:
    """Unnormalized aggregate: lower median of the block densities at ``x``."""
    x = np.asarray(x, dtype=float)
    if not model.box.contains(x):
        raise ValueError("point outside domain")
    return float(
        _median_values(
            model.forest, model.counts, model.m, model.median_rank, x[None, :]
        )[0]
    )


def evaluate(model: FittedMFRDE, x, outside: str = "zero") -> float:
    """Normalized density at one point; zero outside the box by default."""
    x = np.asarray(x, dtype=float)
    return float(evaluate_batch(model, x[None, :], outside=outside)[0])


def evaluate_batch(model: FittedMFRDE, points, outside: str = "zero") -> np.ndarray:
    """Normalized density at each point, preserving input order.

    ``outside`` selects the out-of-box policy: ``"zero"`` (default) or
    ``"error"``.
    """
    if outside not in ("zero", "error"):
        raise ValueError("outside policy must be 'zero' or 'error'")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != model.box.d:
        raise ValueError(f"expected points of dimension {model.box.d}")
    mask = model.box.contains_batch(pts)
    if outside == "error" and not mask.all():
        raise ValueError("point outside domain")
    out = np.zeros(pts.shape[0])
    inside = np.flatnonzero(mask)
    chunk = max(256, _EVAL_TARGET_ELEMS // max(model.n_blocks, 1))
    for start in range(0, inside.size, chunk):
        idx = inside[start : start + chunk]
        med = _median_values(
            model.forest, model.counts, model.m, model.median_rank, pts[idx]
        )
        out[idx] = med / model.normalizer
    return out


def _resolve_quadrature(quad: Quadrature, p: int, d: int) -> Quadrature:
    cells = 2 ** (p * d)
    if quad.method == "auto":
        method = "exact-dyadic" if cells <= quad.cell_budget else "regular-grid"
        return replace(quad, method=method)
    if quad.method == "exact-dyadic" and cells > quad.cell_budget:
        raise ValueError(
            f"exact-dyadic quadrature needs 2**(p*d) = {cells} cells, over the "
            f"budget of {quad.cell_budget}; use regular-grid or monte-carlo"
        )
    return quad


def _quadrature_nodes(
    box: Box, p: int, quad: Quadrature, mc_stream: np.random.SeedSequence | None
) -> tuple[float, Iterator[np.ndarray]]:
    """Node weight and a chunked iterator of quadrature nodes."""
    lo, hi = box.lo_array, box.hi_array
    d = box.d

    if quad.method == "exact-dyadic":
        per_axis = 2**p
        total = per_axis**d
        shape = (per_axis,) * d

        def dyadic_chunks() -> Iterator[np.ndarray]:
            for start in range(0, total, _QUAD_CHUNK):
                flat = np.arange(start, min(start + _QUAD_CHUNK, total))
                multi = np.unravel_index(flat, shape)
                pts = np.empty((flat.size, d))
                for j in range(d):
                    pts[:, j] = lo[j] + (hi[j] - lo[j]) * ((multi[j] + 0.5) / per_axis)
                yield pts

        return box.volume / total, dyadic_chunks()

    if quad.method == "regular-grid":
        g = quad.grid_points
        total = g**d
        shape = (g,) * d
        axes = [np.linspace(lo[j], hi[j], g) for j in range(d)]

        def grid_chunks() -> Iterator[np.ndarray]:
            for start in range(0, total, _QUAD_CHUNK):
                flat = np.arange(start, min(start + _QUAD_CHUNK, total))
                multi = np.unravel_index(flat, shape)
                pts = np.empty((flat.size, d))
                for j in range(d):
                    pts[:, j] = axes[j][multi[j]]
                yield pts

        return box.volume / total, grid_chunks()

    if quad.method == "monte-carlo":
        if mc_stream is None:
            raise ValueError("monte-carlo quadrature needs a random stream")
        rng = np.random.default_rng(mc_stream)
        total = quad.mc_draws

        def mc_chunks() -> Iterator[np.ndarray]:
            for start in range(0, total, _QUAD_CHUNK):
                size = min(_QUAD_CHUNK, total - start)
                yield lo + (hi - lo) * rng.random((size, d))

        return box.volume / total, mc_chunks()

    raise ValueError(f"unresolved quadrature method {quad.method!r}")


def _fit_streams(seed: int) -> tuple[np.random.SeedSequence, ...]:
    """Substreams for tree building, block permutation and MC quadrature."""
    return tuple(np.random.SeedSequence(seed).spawn(3))


def _compute_normalizer(
    forest: Forest,
    counts: np.ndarray,
    m: int,
    rank: int,
    quad: Quadrature,
    seed: int,
) -> float:
    weight, chunks = _quadrature_nodes(forest.box, forest.depth, quad, _fit_streams(seed)[2])
    partials = [float(np.sum(_median_values(forest, counts, m, rank, pts))) for pts in chunks]
    z = weight * math.fsum(partials)
    if not z > 0:
        raise ValueError(
            "degenerate model: median density vanishes everywhere "
            "(all data outside the box, or every block count zero)"
        )
    return z


def integrate_estimate(model: FittedMFRDE) -> float:
    """Integrate the normalized density with the model's own quadrature.

    Returns a value near 1; the gap is pure floating-point summation
    error for the deterministic methods.
    """
    weight, chunks = _quadrature_nodes(
        model.box, model.depth, model.quadrature, _fit_streams(model.config.seed)[2]
    )
    partials = [float(np.sum(evaluate_batch(model, pts))) for pts in chunks]
    return weight * math.fsum(partials)


def fit(data, config: EstimatorConfig) -> FittedMFRDE:
    """Fit the median-of-forests estimator.

    ``data`` is a :class:`~mfrde.datasets.Dataset` or an ``(n, d)`` array.
    Points outside the box are excluded from the leaf counts (each block
    still divides by its nominal size ``m``); their number per block is
    visible as ``m - counts[s, t].sum()``.
    """
    pts = data.points if isinstance(data, Dataset) else np.atleast_2d(
        np.asarray(data, dtype=float)
    )
    n = pts.shape[0]
    m = config.resolve_m(n)
    box = config.box if config.box is not None else Box.bounding(pts, config.box_margin)
    if pts.shape[1] != box.d:
        raise ValueError("data dimension does not match the box")

    forest_stream, perm_stream, _ = _fit_streams(config.seed)
    forest = build_forest(box, config.depth, config.trees, forest_stream)
    assignment = assign_blocks(n, m, np.random.default_rng(perm_stream))

    # One bincount per tree over block-offset leaf ids; same integers as
    # running count_leaves block by block, without the per-block calls.
    s = assignment.n_blocks
    leaves = 2**config.depth
    block_of = np.full(n, -1, dtype=np.int64)
    block_of[assignment.blocks.ravel()] = np.repeat(np.arange(s), m)
    keep = box.contains_batch(pts) & (block_of >= 0)
    kept_pts = pts[keep]
    kept_block = block_of[keep]
    counts = np.zeros((s, config.trees, leaves), dtype=np.int64)
    for t, tree in enumerate(forest.trees):
        ids = leaf_indices(tree, box, kept_pts)
        counts[:, t, :] = np.bincount(
            kept_block * leaves + ids, minlength=s * leaves
        ).reshape(s, leaves)

    quad = _resolve_quadrature(config.quadrature, config.depth, box.d)
    rank = (s + 1) // 2
    z = _compute_normalizer(forest, counts, m, rank, quad, config.seed)
    return FittedMFRDE(
        config=config,
        forest=forest,
        n=n,
        m=m,
        dropped=int(assignment.dropped.size),
        counts=counts,
        normalizer=z,
        median_rank=rank,
        quadrature=quad,
    )


def save_model(model: FittedMFRDE, path) -> None:
    """Write the model as a single JSON document."""
    quad_params: dict = {}
    if model.quadrature.method == "exact-dyadic":
        quad_params["cell_budget"] = model.quadrature.cell_budget
    elif model.quadrature.method == "regular-grid":
        quad_params["points_per_axis"] = model.quadrature.grid_points
    elif model.quadrature.method == "monte-carlo":
        quad_params["draws"] = model.quadrature.mc_draws
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "box": {"lo": list(model.box.lo), "hi": list(model.box.hi)},
        "p": model.depth,
        "T": model.n_trees,
        "m": model.m,
        "S": model.n_blocks,
        "n": model.n,
        "dropped": model.dropped,
        "median_rank": model.median_rank,
        "seed": model.config.seed,
        "trees": [tree.node_dims.tolist() for tree in model.forest.trees],
        "counts": model.counts.tolist(),
        "normalizer": model.normalizer,
        "quadrature": {"method": model.quadrature.method, "params": quad_params},
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, separators=(",", ":"))
        fh.write("\n")


def load_model(path) -> FittedMFRDE:
    """Load and validate a model written by :func:`save_model`."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValueError(f"malformed model file: {exc}") from None
    try:
        version = doc["format_version"]
        if version != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {version!r}")
        box = Box(tuple(doc["box"]["lo"]), tuple(doc["box"]["hi"]))
        p, t, m, s, n = (int(doc[k]) for k in ("p", "T", "m", "S", "n"))
        trees = tuple(
            SplitTree(depth=p, node_dims=np.asarray(node_dims, dtype=np.int64))
            for node_dims in doc["trees"]
        )
        if len(trees) != t:
            raise ValueError("tree count does not match the declared T")
        forest = Forest(box=box, trees=trees, seed=int(doc["seed"]))
        counts = np.asarray(doc["counts"], dtype=np.int64)
        if counts.shape != (s, t, 2**p):
            raise ValueError("count array shape does not match S, T and p")
        method = doc["quadrature"]["method"]
        params = doc["quadrature"].get("params", {})
        quad = Quadrature(
            method=method,
            grid_points=int(params.get("points_per_axis", 100)),
            mc_draws=int(params.get("draws", 100_000)),
            cell_budget=int(params.get("cell_budget", Quadrature().cell_budget)),
        )
        config = EstimatorConfig(
            m=m,
            trees=t,
            depth=p,
            seed=int(doc["seed"]),
            quadrature=quad,
            box=box,
        )
        return FittedMFRDE(
            config=config,
            forest=forest,
            n=n,
            m=m,
            dropped=int(doc["dropped"]),
            counts=counts,
            normalizer=float(doc["normalizer"]),
            median_rank=int(doc["median_rank"]),
            quadrature=quad,
        )
    except KeyError as exc:
        raise ValueError(f"malformed model file: missing field {exc}") from None
