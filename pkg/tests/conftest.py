"""Shared fixtures and the from-scratch oracle used against the estimator.

The naive oracle answers each query by scanning raw block points against
the query's reconstructed leaf cell, with no precomputed counts, using
the same float expressions as the estimator (exact integer count summed
over trees, one division by m times the leaf volume, one by the tree
count).
"""

import numpy as np
import pytest

from mfrde.geometry import Forest, cell_contains, leaf_cell, leaf_index


def naive_sfde_at(block_points: np.ndarray, forest: Forest, m: int, x) -> float:
    box = forest.box
    denom = m * (box.volume * 2.0**-forest.depth)
    total = 0
    for tree in forest.trees:
        cell = leaf_cell(tree, box, leaf_index(tree, box, x))
        if len(block_points):
            total += int(np.sum(cell_contains(cell, box, block_points)))
    return total / denom / forest.n_trees


def naive_median_at(blocks_points: list, forest: Forest, m: int, x) -> float:
    values = sorted(naive_sfde_at(bp, forest, m, x) for bp in blocks_points)
    return values[(len(values) + 1) // 2 - 1]


@pytest.fixture(scope="session")
def rng_factory():
    def make(seed: int) -> np.random.Generator:
        return np.random.default_rng(seed)

    return make
