"""Seeded k-fold cross-validation and exhaustive grid search."""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .spec import ModelSpec


@dataclass(frozen=True)
class CVResult:
    per_candidate: tuple  # (ModelSpec, mean fold MSE) in enumeration order
    best_spec: ModelSpec
    fold_assignments: np.ndarray


def kfold_indices(n: int, k: int, seed: int):
    """Seeded shuffle split into k folds with sizes differing by at most 1.

    Returns ``(folds, assignments)``: the row indices of each fold and
    the fold index of every row. The first ``n % k`` folds take the
    extra row.
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if n < k:
        raise ValueError(f"need at least k={k} rows, got {n}")
    perm = np.random.default_rng(seed).permutation(n)
    base, extra = divmod(n, k)
    folds = []
    assignments = np.empty(n, dtype=np.int64)
    start = 0
    for f in range(k):
        size = base + (1 if f < extra else 0)
        fold = np.sort(perm[start : start + size])
        assignments[fold] = f
        folds.append(fold)
        start += size
    return folds, assignments


def expand_grid(kind: str, grid: dict, seed: int) -> list[ModelSpec]:
    """Cartesian product of a {hyperparameter: values} grid, in key order."""
    if not grid:
        if kind == "linear":
            return [ModelSpec(kind, {}, seed)]
        raise ValueError("empty hyperparameter grid")
    keys = list(grid)
    combos = itertools.product(*(grid[k] for k in keys))
    return [ModelSpec(kind, dict(zip(keys, combo)), seed) for combo in combos]


def grid_search_cv(
    kind: str,
    grid: dict,
    X: np.ndarray,
    y: np.ndarray,
    k: int,
    seed: int,
    n_workers: int = 1,
) -> CVResult:
    """Pick the candidate with the lowest mean held-out-fold MSE.

    Every candidate sees the same seeded folds. Ties go to the earlier
    candidate in enumeration order.
    """
    from . import fit  # deferred: avoids import cycle with the dispatch module

    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    candidates = expand_grid(kind, grid, seed)
    folds, assignments = kfold_indices(len(y), k, seed)
    all_idx = np.arange(len(y))

    def mean_fold_mse(spec: ModelSpec) -> float:
        mses = []
        for fold in folds:
            train = np.setdiff1d(all_idx, fold, assume_unique=True)
            predictor = fit(spec, X[train], y[train])
            residual = y[fold] - predictor.predict(X[fold])
            mses.append(float(np.mean(residual**2)))
        return float(np.mean(mses))

    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            scores = list(pool.map(mean_fold_mse, candidates))
    else:
        scores = [mean_fold_mse(spec) for spec in candidates]

    best_i = int(np.argmin(scores))
    return CVResult(
        per_candidate=tuple(zip(candidates, scores)),
        best_spec=candidates[best_i],
        fold_assignments=assignments,
    )
