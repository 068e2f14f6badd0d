"""Element-wise activations, their inverses and the inversion guard."""
from typing import Optional, Tuple

import numpy as np
from scipy import special

from src.data_access.models.spec_model import ActivationKind, InversionGuard
from src.shared.exceptions import ConfigError
from src.shared.numerics import Matrix, make_rng

_RANGES = {
    ActivationKind.TANH: (-1.0, 1.0),
    ActivationKind.SIGMOID: (0.0, 1.0),
}


def activation_range(kind: ActivationKind) -> Optional[Tuple[float, float]]:
    """Open range of the activation; None for identity."""
    return _RANGES.get(ActivationKind(kind))


def apply(kind: ActivationKind, M: Matrix) -> Matrix:
    kind = ActivationKind(kind)
    if kind is ActivationKind.TANH:
        return np.tanh(M)
    if kind is ActivationKind.SIGMOID:
        return special.expit(M)
    return np.array(M, dtype=np.float64, copy=True)


def invert(kind: ActivationKind, M: Matrix, guard: InversionGuard) -> Matrix:
    """
    Noise, then clamp, then closed-form inverse. Never returns NaN or inf.

    Args:
        kind: activation to invert
        M: codes, possibly outside the open range (including +-inf)
        guard: clamp margin, noise level and the seed of the noise stream

    Returns:
        Element-wise inverse of the guarded codes
    """
    kind = ActivationKind(kind)
    values = np.array(M, dtype=np.float64, copy=True)
    if guard.noise_sigma > 0:
        values += guard.noise_sigma * make_rng(guard.seed).standard_normal(values.shape)

    bounds = activation_range(kind)
    if bounds is None:
        return np.nan_to_num(values, nan=0.0)

    low, high = bounds
    if guard.clamp_margin >= (high - low) / 2:
        raise ConfigError("delta", f"clamp margin must be below {(high - low) / 2} for {kind.value}")
    values = np.nan_to_num(values, nan=(low + high) / 2)
    np.clip(values, low + guard.clamp_margin, high - guard.clamp_margin, out=values)

    if kind is ActivationKind.TANH:
        return np.arctanh(values)
    return special.logit(values)


def without_noise(guard: InversionGuard) -> InversionGuard:
    """Test-time guard: same clamp, no noise."""
    return guard.model_copy(update={"noise_sigma": 0.0})
