"""Shapley-value feature attribution for any fitted predictor.

The value of a coalition S is the interventional expectation of the
model output with the explained instance's values on S and background
rows everywhere else. Exact mode enumerates all 2^M coalitions once
(memoized across features); sampled mode averages marginal
contributions over seeded uniform feature permutations.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._util import stage_rng
from .dataset import DataTable

MAX_EXACT_FEATURES = 20

# Keep batched predict calls below this many composite rows.
_CHUNK_ROWS = 200_000


@dataclass(frozen=True)
class ShapConfig:
    mode: str = "exact"  # "exact" | "sampled"
    background_size: int = 100
    n_permutations: int = 2000
    seed: int = 0
    baseline: str = "interventional"  # "interventional" | "mean_impute"

    def __post_init__(self):
        if self.mode not in ("exact", "sampled"):
            raise ValueError(f"mode must be 'exact' or 'sampled', got {self.mode!r}")
        if self.baseline not in ("interventional", "mean_impute"):
            raise ValueError(f"unknown baseline {self.baseline!r}")
        if self.background_size < 1:
            raise ValueError("background_size must be >= 1")
        if self.n_permutations < 1:
            raise ValueError("n_permutations must be >= 1")


@dataclass(frozen=True)
class ShapValues:
    """Per-instance attribution vectors plus the shared baseline output."""

    base_value: float
    phi: np.ndarray  # (n_instances, n_features)
    feature_names: tuple[str, ...]


@dataclass(frozen=True)
class GlobalImportance:
    ranking: tuple[str, ...]  # by mean |phi| descending, ties alphabetical
    mean_abs: dict
    points: tuple  # (feature, phi, raw feature value) triples


def draw_background(table: DataTable, feature_columns, size: int, seed: int) -> np.ndarray:
    """Seeded background sample of training rows (without replacement when possible)."""
    X = table.matrix(feature_columns)
    rng = stage_rng(seed, "shap-background")
    n = X.shape[0]
    if size >= n:
        return X
    idx = np.sort(rng.choice(n, size=size, replace=False))
    return X[idx]


def _apply_baseline(background: np.ndarray, config: ShapConfig) -> np.ndarray:
    if config.baseline == "mean_impute":
        return background.mean(axis=0, keepdims=True)
    return background


def value_function(predictor, x: np.ndarray, subset, background: np.ndarray) -> float:
    """Interventional coalition value: mean prediction with x fixed on the subset."""
    x = np.asarray(x, dtype=float)
    background = np.asarray(background, dtype=float)
    if background.shape[0] < 1:
        raise ValueError("background must be non-empty")
    rows = background.copy()
    subset = list(subset)
    if subset:
        rows[:, subset] = x[subset]
    return float(np.mean(predictor.predict(rows)))


def _coalition_values(predict_fn, x, background, n_features):
    """Model output expectation for every one of the 2^M coalition masks."""
    n_masks = 1 << n_features
    n_bg = background.shape[0]
    values = np.empty(n_masks)
    masks_per_chunk = max(1, _CHUNK_ROWS // n_bg)
    bits = np.arange(n_features)
    for start in range(0, n_masks, masks_per_chunk):
        masks = np.arange(start, min(start + masks_per_chunk, n_masks))
        onoff = ((masks[:, None] >> bits[None, :]) & 1).astype(bool)
        rows = np.tile(background, (len(masks), 1))
        take_x = np.repeat(onoff, n_bg, axis=0)
        rows[take_x] = np.broadcast_to(x, rows.shape)[take_x]
        preds = predict_fn(rows)
        values[masks] = preds.reshape(len(masks), n_bg).mean(axis=1)
    return values


def _shapley_weights(n_features: int) -> np.ndarray:
    fact = math.factorial
    denom = fact(n_features)
    return np.array(
        [fact(s) * fact(n_features - s - 1) / denom for s in range(n_features)]
    )


def exact_shapley(predictor, x: np.ndarray, background: np.ndarray, config: ShapConfig) -> np.ndarray:
    """Exact Shapley attribution by full coalition enumeration.

    Every coalition value is computed once and reused for all features.
    Refuses feature counts above MAX_EXACT_FEATURES; use sampled mode
    there instead.
    """
    x = np.asarray(x, dtype=float)
    m = len(x)
    if m > MAX_EXACT_FEATURES:
        raise ValueError(
            f"exact mode enumerates 2^{m} coalitions; limit is M <= {MAX_EXACT_FEATURES}. "
            "Use mode='sampled'."
        )
    background = _apply_baseline(np.asarray(background, dtype=float), config)
    values = _coalition_values(predictor.predict, x, background, m)

    masks = np.arange(1 << m)
    sizes = np.zeros(len(masks), dtype=np.int64)
    for j in range(m):
        sizes += (masks >> j) & 1
    weights = _shapley_weights(m)

    phi = np.empty(m)
    for j in range(m):
        without = masks[((masks >> j) & 1) == 0]
        gain = values[without | (1 << j)] - values[without]
        phi[j] = float(np.sum(weights[sizes[without]] * gain))
    return phi


def shapley_from_permutations(predictor, x, background, permutations, config: ShapConfig | None = None):
    """Average marginal contributions along explicit feature orderings.

    The estimator underneath sampled mode; handing it all M! orderings
    reproduces the exact attribution.
    """
    x = np.asarray(x, dtype=float)
    m = len(x)
    perms = np.asarray(permutations, dtype=np.int64)
    if perms.ndim != 2 or perms.shape[1] != m:
        raise ValueError(f"permutations must be (n, {m}), got {perms.shape}")
    background = np.asarray(background, dtype=float)
    if config is not None:
        background = _apply_baseline(background, config)
    n_bg = background.shape[0]

    v_empty = float(np.mean(predictor.predict(background)))
    phi = np.zeros(m)
    perms_per_chunk = max(1, _CHUNK_ROWS // (m * n_bg))
    steps = np.arange(m)
    for start in range(0, len(perms), perms_per_chunk):
        chunk = perms[start : start + perms_per_chunk]
        p = len(chunk)
        # position[i, f] = step at which permutation i introduces feature f
        position = np.empty((p, m), dtype=np.int64)
        position[np.arange(p)[:, None], chunk] = steps[None, :]
        in_coalition = position[:, None, :] <= steps[None, :, None]  # (p, step, feature)

        take_x = np.repeat(in_coalition.reshape(p * m, m), n_bg, axis=0)
        rows = np.tile(background, (p * m, 1))
        rows[take_x] = np.broadcast_to(x, rows.shape)[take_x]
        v = predictor.predict(rows).reshape(p, m, n_bg).mean(axis=2)

        v_prev = np.concatenate([np.full((p, 1), v_empty), v[:, :-1]], axis=1)
        np.add.at(phi, chunk.ravel(), (v - v_prev).ravel())
    return phi / len(perms)


def sampled_shapley(predictor, x, background, config: ShapConfig) -> np.ndarray:
    """Monte Carlo Shapley estimate over seeded uniform permutations."""
    x = np.asarray(x, dtype=float)
    rng = stage_rng(config.seed, "sampled-shap")
    perms = np.array([rng.permutation(len(x)) for _ in range(config.n_permutations)])
    return shapley_from_permutations(predictor, x, background, perms, config)


def shapley_values(
    predictor,
    X: np.ndarray,
    background: np.ndarray,
    config: ShapConfig,
    n_workers: int = 1,
) -> ShapValues:
    """Attribute every row of X; rows are independent and may run concurrently.

    Sampled mode gives each instance its own seed-derived permutation
    stream, so results do not depend on worker count or ordering.
    """
    X = np.asarray(X, dtype=float)
    background = np.asarray(background, dtype=float)
    base_bg = _apply_baseline(background, config)
    base_value = float(np.mean(predictor.predict(base_bg)))

    def one(i: int) -> np.ndarray:
        x = X[i]
        if config.mode == "exact":
            return exact_shapley(predictor, x, background, config)
        rng = stage_rng(config.seed, "sampled-shap", i)
        perms = np.array([rng.permutation(len(x)) for _ in range(config.n_permutations)])
        return shapley_from_permutations(predictor, x, background, perms, config)

    indices = range(X.shape[0])
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            rows = list(pool.map(one, indices))
    else:
        rows = [one(i) for i in indices]
    phi = np.vstack(rows) if rows else np.empty((0, X.shape[1]))
    return ShapValues(base_value, phi, tuple(predictor.feature_names))


def summarize(values: ShapValues, table: DataTable) -> GlobalImportance:
    """Global importance: mean |phi| ranking plus per-point beeswarm triples."""
    if values.phi.shape[0] != table.n_rows:
        raise ValueError(
            f"phi has {values.phi.shape[0]} rows but the table has {table.n_rows}"
        )
    mean_abs = {
        name: float(np.mean(np.abs(values.phi[:, j])))
        for j, name in enumerate(values.feature_names)
    }
    ranking = tuple(sorted(mean_abs, key=lambda name: (-mean_abs[name], name)))
    points = []
    for j, name in enumerate(values.feature_names):
        raw = table.col(name)
        for i in range(table.n_rows):
            points.append((name, float(values.phi[i, j]), float(raw[i])))
    return GlobalImportance(ranking, mean_abs, tuple(points))
