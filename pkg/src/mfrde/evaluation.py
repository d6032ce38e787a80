"""Evaluation grid, MAE, AUC and the benchmark sweep harness.

The benchmark sweeps contamination schemes, outlier ratios and estimator
parameters on synthetic data, repeating every cell with fresh seeds.  For
each repetition it also fits the single-block (full-sample) forest as the
non-robust baseline.  Per-cell seeds are derived from the master seed and
the cell's position in the grid, so running cells in parallel never
changes the report.
"""

from __future__ import annotations

import csv
import datetime
import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .datasets import DOMAIN, generate, true_density
from .estimator import EstimatorConfig, Quadrature, evaluate_batch, fit
from .geometry import Box

__all__ = [
    "EvalGrid",
    "EvalReport",
    "BenchmarkConfig",
    "make_grid",
    "mae",
    "auc",
    "benchmark",
]


@dataclass(frozen=True)
class EvalGrid:
    """Inclusive-endpoint lattice with ``per_axis`` nodes per coordinate."""

    box: Box
    per_axis: int
    points: np.ndarray

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)


def make_grid(box: Box, per_axis: int) -> EvalGrid:
    """Lattice ``lo[j] + (hi[j]-lo[j]) * i/(G-1)``; both endpoints included."""
    if per_axis < 2:
        raise ValueError("grid needs at least 2 points per axis")
    axes = [np.linspace(box.lo[j], box.hi[j], per_axis) for j in range(box.d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.column_stack([m.ravel() for m in mesh])
    return EvalGrid(box=box, per_axis=per_axis, points=points)


def mae(estimate, grid: EvalGrid, truth) -> float:
    """Mean absolute gap between two densities over the grid.

    ``estimate`` and ``truth`` are callables taking an ``(n, d)`` array of
    points and returning ``n`` values.
    """
    est = np.asarray(estimate(grid.points), dtype=float)
    tru = np.asarray(truth(grid.points), dtype=float)
    if est.shape != (grid.points.shape[0],) or tru.shape != est.shape:
        raise ValueError("estimate and truth must return one value per grid point")
    return float(np.mean(np.abs(est - tru)))


def auc(scores, labels) -> float:
    """Exact Mann-Whitney AUC of anomaly scores against outlier labels.

    Outliers (label 1) are the positive class and should receive high
    scores; rank ties get half credit.
    """
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and labels must be equal-length vectors")
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = int(s.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC undefined: need both classes present")
    ranks = rankdata(s)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass(frozen=True)
class BenchmarkConfig:
    """Sweep definition; see :func:`benchmark`.

    ``m_ratios`` are block-size fractions of the sample (``m`` is the
    rounded product, cells with ``m < 1`` or ``m > n`` are skipped).
    """

    schemes: tuple[str, ...] = ("uniform",)
    ratios: tuple[float, ...] = (0.2,)
    m_ratios: tuple[float, ...] = (0.1,)
    trees: tuple[int, ...] = (20,)
    depths: tuple[int, ...] = (6,)
    repeats: int = 10
    seed: int = 0
    n: int = 500
    box: Box = DOMAIN
    grid_g: int = 100
    quadrature: Quadrature = field(
        default_factory=lambda: Quadrature(method="regular-grid", grid_points=100)
    )

    @classmethod
    def from_dict(cls, doc: dict) -> "BenchmarkConfig":
        kwargs: dict = {}
        for key in ("schemes", "ratios", "m_ratios", "trees", "depths"):
            if key in doc:
                kwargs[key] = tuple(doc[key])
        for key in ("repeats", "seed", "n"):
            if key in doc:
                kwargs[key] = int(doc[key])
        if "grid_G" in doc:
            kwargs["grid_g"] = int(doc["grid_G"])
        if "box" in doc:
            kwargs["box"] = Box(tuple(doc["box"]["lo"]), tuple(doc["box"]["hi"]))
        if "quadrature" in doc:
            kwargs["quadrature"] = Quadrature.parse(doc["quadrature"])
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path) -> "BenchmarkConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "schemes": list(self.schemes),
            "ratios": list(self.ratios),
            "m_ratios": list(self.m_ratios),
            "trees": list(self.trees),
            "depths": list(self.depths),
            "repeats": self.repeats,
            "seed": self.seed,
            "n": self.n,
            "box": {"lo": list(self.box.lo), "hi": list(self.box.hi)},
            "grid_G": self.grid_g,
        }


@dataclass
class EvalReport:
    """Per-run metric rows plus per-cell mean/std summaries."""

    runs: list[dict]
    summary: list[dict]
    meta: dict

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(
                {"meta": self.meta, "runs": self.runs, "summary": self.summary},
                fh,
                indent=1,
            )
            fh.write("\n")

    def summary_to_csv(self, path) -> None:
        if not self.summary:
            raise ValueError("empty summary")
        fields = list(self.summary[0].keys())
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fields)
            writer.writeheader()
            writer.writerows(self.summary)


def _derived_seed(*key: int) -> int:
    return int(np.random.SeedSequence(list(key)).generate_state(1, np.uint64)[0])


def _metrics(model, data, grid, truth_vals) -> tuple[float, float | None]:
    est = evaluate_batch(model, grid.points)
    mae_val = float(np.mean(np.abs(est - truth_vals)))
    auc_val = None
    if data.labels is not None and 0 < data.labels.sum() < data.n:
        auc_val = auc(-evaluate_batch(model, data.points), data.labels)
    return mae_val, auc_val


def benchmark(config: BenchmarkConfig, threads: int = 1) -> EvalReport:
    """Run the sweep and aggregate mean/std per cell.

    Every repetition of a (scheme, ratio) pair reuses one generated
    dataset across the (m_ratio, trees, depth) grid, so parameter cells
    are directly comparable, and the single-block baseline is fitted once
    per (scheme, ratio, trees, depth, repeat).
    """
    grid = make_grid(config.box, config.grid_g)
    truth_vals = np.asarray(true_density(grid.points))

    datasets = {
        (si, ri, rep): generate(
            scheme,
            config.n,
            ratio,
            seed=_derived_seed(config.seed, 101, si, ri, rep),
            box=config.box,
        )
        for (si, scheme), (ri, ratio), rep in itertools.product(
            enumerate(config.schemes), enumerate(config.ratios), range(config.repeats)
        )
    }

    def run_baseline(job) -> tuple:
        si, ri, ti, pi, rep = job
        data = datasets[(si, ri, rep)]
        model = fit(
            data,
            EstimatorConfig(
                m=config.n,
                trees=config.trees[ti],
                depth=config.depths[pi],
                seed=_derived_seed(config.seed, 211, si, ri, ti, pi, rep),
                quadrature=config.quadrature,
                box=config.box,
            ),
        )
        return job, _metrics(model, data, grid, truth_vals)

    def run_cell(job) -> dict:
        si, ri, mi, ti, pi, rep = job
        scheme, ratio = config.schemes[si], config.ratios[ri]
        m_ratio = config.m_ratios[mi]
        row = {
            "scheme": scheme,
            "ratio": ratio,
            "m_ratio": m_ratio,
            "trees": config.trees[ti],
            "depth": config.depths[pi],
            "repeat": rep,
        }
        m = int(round(m_ratio * config.n))
        if m < 1 or m > config.n:
            row.update(m=m, skipped="infeasible block size", mae=None, auc=None)
            return row
        data = datasets[(si, ri, rep)]
        try:
            model = fit(
                data,
                EstimatorConfig(
                    m=m,
                    trees=config.trees[ti],
                    depth=config.depths[pi],
                    seed=_derived_seed(config.seed, 307, si, ri, mi, ti, pi, rep),
                    quadrature=config.quadrature,
                    box=config.box,
                ),
            )
        except ValueError as exc:
            # tiny blocks with deep trees can leave the median at zero
            # everywhere; such cells carry no usable estimate
            if "degenerate model" not in str(exc):
                raise
            row.update(m=m, skipped="degenerate model", mae=None, auc=None)
            return row
        mae_val, auc_val = _metrics(model, data, grid, truth_vals)
        row.update(m=m, mae=mae_val, auc=auc_val)
        return row

    baseline_jobs = list(
        itertools.product(
            range(len(config.schemes)),
            range(len(config.ratios)),
            range(len(config.trees)),
            range(len(config.depths)),
            range(config.repeats),
        )
    )
    cell_jobs = list(
        itertools.product(
            range(len(config.schemes)),
            range(len(config.ratios)),
            range(len(config.m_ratios)),
            range(len(config.trees)),
            range(len(config.depths)),
            range(config.repeats),
        )
    )
    workers = max(1, int(threads))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            baselines = dict(pool.map(run_baseline, baseline_jobs))
            rows = list(pool.map(run_cell, cell_jobs))
    else:
        baselines = dict(map(run_baseline, baseline_jobs))
        rows = list(map(run_cell, cell_jobs))

    for row, job in zip(rows, cell_jobs):
        si, ri, _, ti, pi, rep = job
        base_mae, base_auc = baselines[(si, ri, ti, pi, rep)]
        row["baseline_mae"] = base_mae
        row["baseline_auc"] = base_auc

    summary = _summarize(rows)
    meta = {
        "config": config.to_dict(),
        "generated_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    return EvalReport(runs=rows, summary=summary, meta=meta)


_CELL_KEYS = ("scheme", "ratio", "m_ratio", "trees", "depth")


def _summarize(rows: list[dict]) -> list[dict]:
    cells: dict[tuple, list[dict]] = {}
    for row in rows:
        if row.get("skipped"):
            continue
        cells.setdefault(tuple(row[k] for k in _CELL_KEYS), []).append(row)

    def stats(values: list) -> tuple[float | None, float | None]:
        vals = [v for v in values if v is not None]
        if not vals:
            return None, None
        arr = np.asarray(vals, dtype=float)
        return float(arr.mean()), float(arr.std())

    summary = []
    for key, group in cells.items():
        entry = dict(zip(_CELL_KEYS, key))
        entry["runs"] = len(group)
        for metric in ("mae", "auc", "baseline_mae", "baseline_auc"):
            mean, std = stats([r.get(metric) for r in group])
            entry[f"{metric}_mean"] = mean
            entry[f"{metric}_std"] = std
        summary.append(entry)
    return summary
