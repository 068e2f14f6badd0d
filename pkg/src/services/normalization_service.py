"""
Input normalization with replayable parameters.

    none                        x
    unit_scale                  x / max|X|
    per_feature_standardize     (x - mean_f) / std_f   (zero-variance features pass through unchanged)
    squash_to_activation_range  lo + delta + (x - min X) * (hi - lo - 2 delta) / (max X - min X)
"""
import dataclasses
from typing import Tuple

import numpy as np

from src.data_access.models.dataset_model import Dataset, NormalizationParams
from src.data_access.models.spec_model import ActivationKind, NormalizationMode
from src.services.activation import activation_range
from src.shared.exceptions import ConfigError, DimensionMismatchError
from src.shared.logging import get_logger
from src.shared.numerics import Matrix

logger = get_logger(__name__)

_ZERO_VARIANCE = 1e-12


def fit_normalization(X: Matrix, mode: NormalizationMode, activation: ActivationKind = ActivationKind.TANH,
                      delta: float = 1e-6) -> NormalizationParams:
    mode = NormalizationMode(mode)

    if mode is NormalizationMode.NONE or X.size == 0:
        return NormalizationParams(mode=mode.value)

    if mode is NormalizationMode.UNIT_SCALE:
        peak = float(np.max(np.abs(X)))
        return NormalizationParams(mode=mode.value, scale=peak if peak > 0 else 1.0)

    if mode is NormalizationMode.PER_FEATURE_STANDARDIZE:
        means = X.mean(axis=1)
        stds = X.std(axis=1)
        flat = np.flatnonzero(stds <= _ZERO_VARIANCE)
        means[flat] = 0.0
        stds[flat] = 1.0
        if flat.size:
            logger.info(f"{flat.size} zero-variance features pass through unchanged")
        return NormalizationParams(
            mode=mode.value,
            means=means.tolist(),
            stds=stds.tolist(),
            passthrough_features=flat.tolist(),
        )

    bounds = activation_range(activation)
    if bounds is None:
        raise ConfigError("normalize", f"{mode.value} needs a bounded activation, got {ActivationKind(activation).value}")
    low, high = bounds[0] + delta, bounds[1] - delta
    if low >= high:
        raise ConfigError("delta", f"margin {delta} leaves an empty target range")
    x_min, x_max = float(np.min(X)), float(np.max(X))
    scale = (high - low) / (x_max - x_min) if x_max > x_min else 0.0
    return NormalizationParams(
        mode=mode.value, scale=scale, offset=x_min, target_low=low, target_high=high,
    )


def apply_normalization(X: Matrix, params: NormalizationParams) -> Matrix:
    """Replay a recorded normalization on new data."""
    mode = NormalizationMode(params.mode)
    if mode is NormalizationMode.NONE:
        return np.array(X, dtype=np.float64, copy=True)
    if mode is NormalizationMode.UNIT_SCALE:
        return X / params.scale
    if mode is NormalizationMode.PER_FEATURE_STANDARDIZE:
        means = np.asarray(params.means)
        if means.size != X.shape[0]:
            raise DimensionMismatchError("feature dimension", means.size, X.shape[0])
        return (X - means[:, None]) / np.asarray(params.stds)[:, None]
    return params.target_low + (X - params.offset) * params.scale


def normalize(dataset: Dataset, mode: NormalizationMode, activation: ActivationKind = ActivationKind.TANH,
              delta: float = 1e-6) -> Tuple[Dataset, NormalizationParams]:
    """
    Returns:
        (dataset with transformed X, parameters that reproduce the transform)
    """
    params = fit_normalization(dataset.X, mode, activation, delta)
    return dataclasses.replace(dataset, X=apply_normalization(dataset.X, params)), params
