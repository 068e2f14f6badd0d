"""Ridge regression on raw features: the reference classifier for deep networks."""
import numpy as np
import numpy.typing as npt

from src.data_access.models.network_model import RidgeBaseline
from src.services.lcksvd_service import build_targets
from src.shared.exceptions import DimensionMismatchError
from src.shared.numerics import Matrix, as_matrix, solve_least_squares


def train_ridge_baseline(X: Matrix, labels: npt.ArrayLike, class_count: int, ridge: float) -> RidgeBaseline:
    """W = argmin ||T - W X||^2 + ridge ||W||^2 for one-hot targets T."""
    X = as_matrix(X, "X")
    T = build_targets(labels, class_count)
    if T.shape[1] != X.shape[1]:
        raise DimensionMismatchError("label count", X.shape[1], T.shape[1])
    W = solve_least_squares(X.T, T.T, ridge).T
    return RidgeBaseline(W=W, ridge=ridge)


def predict_ridge_baseline(model: RidgeBaseline, X: Matrix) -> npt.NDArray[np.int64]:
    if X.shape[0] != model.W.shape[1]:
        raise DimensionMismatchError("feature dimension", model.W.shape[1], X.shape[0])
    return np.argmax(model.W @ X, axis=0).astype(np.int64)
