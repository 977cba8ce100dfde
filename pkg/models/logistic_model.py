"""
Logistic Regression
Bias-free binary logistic regression with analytic per-example gradients,
the model trained by the toy DP-SGD runs.
"""

import numpy as np
from scipy import special

from utils.errors import InvalidArgumentError


def _check_shapes(weights: np.ndarray, features: np.ndarray) -> None:
    if features.ndim != 2:
        raise InvalidArgumentError(f"features must be a 2-D matrix, got shape {features.shape}")
    if weights.shape != (features.shape[1],):
        raise InvalidArgumentError(
            f"weights of shape {weights.shape} do not match {features.shape[1]} features"
        )


def predict_proba(weights: np.ndarray, features: np.ndarray) -> np.ndarray:
    """P(y = 1 | x) = sigmoid(<w, x>) for every row of features."""
    _check_shapes(weights, features)
    return special.expit(features @ weights)


def predict(weights: np.ndarray, features: np.ndarray) -> np.ndarray:
    return (predict_proba(weights, features) >= 0.5).astype(np.int64)


def accuracy(weights: np.ndarray, features: np.ndarray, labels: np.ndarray) -> float:
    if len(labels) == 0:
        raise InvalidArgumentError("Cannot score an empty split")
    return float(np.mean(predict(weights, features) == labels))


def per_example_gradients(weights: np.ndarray, features: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """
    Gradients of the log loss, one row per example: (sigmoid(<w, x_i>) - y_i) x_i.

    Args:
        weights: (d,) parameters
        features: (k, d) batch
        labels: (k,) labels in {0, 1}

    Returns:
        (k, d) matrix of gradients
    """
    residual = predict_proba(weights, features) - labels
    return residual[:, None] * features
