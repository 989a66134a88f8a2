"""Six next-year-IRI regression models with shared fit/predict/evaluate entry points.

Kinds: linear, ridge, lasso, decision_tree, random_forest,
gradient_boosting. Linear-family models standardize features on the
training set internally; tree-family models consume raw features.
"""

from __future__ import annotations

import numpy as np

from .cv import CVResult, expand_grid, grid_search_cv, kfold_indices
from .io import load_model, model_from_dict, model_to_dict, save_model
from .linear import (
    LinearPredictor,
    fit_linear_family,
    lasso_coordinate_descent,
    least_squares,
    ridge_normal_equations,
)
from .metrics import EvalMetrics, evaluate
from .spec import MODEL_KINDS, ModelSpec, default_grid
from .tree import (
    BoostingPredictor,
    ForestPredictor,
    Tree,
    TreePredictor,
    build_tree,
    fit_decision_tree,
    fit_gradient_boosting,
    fit_random_forest,
)

__all__ = [
    "MODEL_KINDS",
    "ModelSpec",
    "default_grid",
    "fit",
    "predict",
    "evaluate",
    "EvalMetrics",
    "CVResult",
    "kfold_indices",
    "expand_grid",
    "grid_search_cv",
    "save_model",
    "load_model",
    "model_to_dict",
    "model_from_dict",
    "LinearPredictor",
    "TreePredictor",
    "ForestPredictor",
    "BoostingPredictor",
    "Tree",
    "build_tree",
    "least_squares",
    "ridge_normal_equations",
    "lasso_coordinate_descent",
]

_FITTERS = {
    "linear": fit_linear_family,
    "ridge": fit_linear_family,
    "lasso": fit_linear_family,
    "decision_tree": fit_decision_tree,
    "random_forest": fit_random_forest,
    "gradient_boosting": fit_gradient_boosting,
}


def fit(spec: ModelSpec, X: np.ndarray, y: np.ndarray, feature_names=None):
    """Train one model; returns an immutable predictor.

    Rejects empty or NaN-bearing inputs up front so solver internals can
    assume clean matrices.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"X must be 2-d, got shape {X.shape}")
    if X.shape[0] != len(y):
        raise ValueError(f"X has {X.shape[0]} rows but y has {len(y)}")
    if len(y) == 0:
        raise ValueError("cannot fit on empty data")
    if np.isnan(X).any() or np.isnan(y).any():
        raise ValueError("fit input contains missing values; filter rows first")
    if feature_names is None:
        feature_names = tuple(f"x{j}" for j in range(X.shape[1]))
    return _FITTERS[spec.kind](spec, X, y, feature_names)


def predict(predictor, X: np.ndarray) -> np.ndarray:
    """Batch prediction; dimension mismatches raise ValueError."""
    return predictor.predict(np.asarray(X, dtype=float))
