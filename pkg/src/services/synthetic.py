"""Planted instances with known ground truth."""
from typing import Tuple

import numpy as np

from src.data_access.models.dataset_model import Dataset
from src.shared.exceptions import ConfigError
from src.shared.numerics import Matrix, derive_seed, make_rng, normalize_columns, seeded_gaussian


def planted_factorization(d: int, atoms: int, n: int, seed: int) -> Tuple[Matrix, Matrix, Matrix]:
    """
    X = D* Z* with unit-norm Gaussian atoms and dense Gaussian codes.

    Returns:
        (X, D*, Z*)
    """
    D, _ = normalize_columns(seeded_gaussian(d, atoms, derive_seed(seed, 0)))
    Z = seeded_gaussian(atoms, n, derive_seed(seed, 1))
    return D @ Z, D, Z


def planted_class_data(d: int, n: int, classes: int, subspace_dim: int = 2, noise: float = 1e-2,
                       scale: float = 1.0, seed: int = 0) -> Dataset:
    """
    Samples of class c are scale * U_c |a| + noise * scale * e, with mutually
    orthogonal d x subspace_dim bases U_c and Gaussian a, e.

    Classes are assigned round robin and then shuffled, so each class holds
    n // classes or n // classes + 1 samples.
    """
    if classes * subspace_dim > d:
        raise ConfigError("subspace_dim", f"{classes} classes of dimension {subspace_dim} do not fit in {d}")
    rng = make_rng(seed)
    basis, _ = np.linalg.qr(rng.standard_normal((d, classes * subspace_dim)))
    labels = rng.permutation(np.arange(n) % classes).astype(np.int64)

    coefficients = np.abs(rng.standard_normal((subspace_dim, n)))
    X = np.empty((d, n))
    for c in range(classes):
        members = labels == c
        U = basis[:, c * subspace_dim:(c + 1) * subspace_dim]
        X[:, members] = U @ coefficients[:, members]
    X += noise * rng.standard_normal((d, n))
    X *= scale

    return Dataset(
        X=X,
        labels=labels,
        class_values=tuple(str(c) for c in range(classes)),
        feature_names=[f"f{i}" for i in range(d)],
    )
