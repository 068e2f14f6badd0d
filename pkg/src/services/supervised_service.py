"""
Supervised pre-final dictionary layers.

* Binary logistic layer:
    min ||X - DZ||^2 + ridge ||Z||^2 + lam * sum_i log(1 + exp(-y_i (theta^T z_i + b)))
* Class-specific + shared dictionaries with mutual incoherence:
    min ||X - DZ||^2 + sum_i ||X_i - D_i Z_i - D_S Z_iS||^2 + eta * sum_{i!=j} ||D_i^T D_j||^2
  with codes of class-i samples restricted to blocks i and S.
"""
from typing import Callable, List, Tuple

import numpy as np
import numpy.typing as npt
from scipy import special

from src.data_access.models.network_model import ClassDictModel, LayerKind, TrainedLayer
from src.data_access.models.spec_model import ClassDictSpec, LogisticLayerSpec
from src.services.dictionary_service import (
    code_least_squares,
    dictionary_step_mod,
    dictionary_step_mod_scaled,
    initial_dictionary,
    relative_change,
    sign_convention,
)
from src.shared.exceptions import (
    ClassCoverageError,
    DimensionMismatchError,
    LabelDomainError,
)
from src.shared.logging import get_logger
from src.shared.monitoring import track_service_metrics
from src.shared.numerics import Matrix, as_matrix, normalize_columns, solve_least_squares, squared_residual

logger = get_logger(__name__)

Vector = npt.NDArray[np.float64]

_LINEAR_ASYMPTOTE = 30.0
_ARMIJO = 1e-4
_MAX_HALVINGS = 30
INCOHERENCE_STEP = 0.1


# ---------------------------------------------------------------- logistic layer

def _check_binary(y: npt.ArrayLike) -> Vector:
    y = np.asarray(y, dtype=np.float64).ravel()
    bad = y[(y != 1.0) & (y != -1.0)]
    if bad.size:
        raise LabelDomainError(bad[0], "{-1, +1}")
    return y


def _softplus(margins: Vector) -> Vector:
    # log(1 + e^m); the linear asymptote keeps large margins overflow-free
    safe = np.minimum(margins, _LINEAR_ASYMPTOTE)
    return np.where(margins > _LINEAR_ASYMPTOTE, margins, np.log1p(np.exp(safe)))


def logistic_loss(y: npt.ArrayLike, scores: npt.ArrayLike) -> float:
    """Mean of log(1 + exp(-y_i * score_i))."""
    y = _check_binary(y)
    scores = np.asarray(scores, dtype=np.float64).ravel()
    if scores.shape != y.shape:
        raise DimensionMismatchError("score count", y.size, scores.size)
    return float(np.mean(_softplus(-y * scores)))


def supervised_objective(X: Matrix, y: Vector, D: Matrix, Z: Matrix, theta: Vector, b: float,
                         lam: float, ridge: float) -> float:
    scores = theta @ Z + b
    return (
        squared_residual(X, D, Z)
        + ridge * float(np.einsum("ij,ij->", Z, Z))
        + lam * y.size * logistic_loss(y, scores)
    )


def supervised_gradients(X: Matrix, y: Vector, D: Matrix, Z: Matrix, theta: Vector, b: float,
                         lam: float, ridge: float) -> Tuple[Matrix, Vector, float]:
    """Partial derivatives of supervised_objective with respect to Z, theta and b."""
    y = _check_binary(y)
    scores = theta @ Z + b
    # d/ds log(1 + exp(-y s)) = -y * sigmoid(-y s)
    g = -y * special.expit(-y * scores)
    grad_z = -2.0 * D.T @ (X - D @ Z) + 2.0 * ridge * Z + lam * np.outer(theta, g)
    grad_theta = lam * (Z @ g)
    grad_b = lam * float(np.sum(g))
    return grad_z, grad_theta, grad_b


def predict_logistic(theta: Vector, b: float, Z: Matrix) -> npt.NDArray[np.int64]:
    """sign(theta^T z + b), zero mapped to +1."""
    return np.where(theta @ Z + b >= 0, 1, -1).astype(np.int64)


def _backtracking(f: Callable[[np.ndarray], float], x: np.ndarray, grad: np.ndarray,
                  step: float, f0: float) -> Tuple[np.ndarray, float]:
    gnorm2 = float(np.sum(grad * grad))
    if gnorm2 == 0.0:
        return x, f0
    t = step
    for _ in range(_MAX_HALVINGS):
        candidate = x - t * grad
        value = f(candidate)
        if value <= f0 - _ARMIJO * t * gnorm2:
            return candidate, value
        t /= 2
    return x, f0


def _classifier_steps(X: Matrix, y: Vector, D: Matrix, Z: Matrix, theta: Vector, b: float,
                      spec: LogisticLayerSpec) -> Tuple[Vector, float]:
    params = np.append(theta, b)

    def f(p: np.ndarray) -> float:
        return supervised_objective(X, y, D, Z, p[:-1], float(p[-1]), spec.lam, spec.ridge)

    value = f(params)
    for _ in range(spec.inner_iters):
        _, g_theta, g_b = supervised_gradients(X, y, D, Z, params[:-1], float(params[-1]), spec.lam, spec.ridge)
        params, value = _backtracking(f, params, np.append(g_theta, g_b), spec.step, value)
    return params[:-1].copy(), float(params[-1])


def _code_steps(X: Matrix, y: Vector, D: Matrix, Z_prev: Matrix, theta: Vector, b: float,
                spec: LogisticLayerSpec) -> Matrix:
    def f(z: np.ndarray) -> float:
        return supervised_objective(X, y, D, z, theta, b, spec.lam, spec.ridge)

    # warm start from whichever of the previous and the least-squares codes is better
    Z_ls = code_least_squares(D, X, spec.ridge)
    value_ls, value_prev = f(Z_ls), f(Z_prev)
    Z, value = (Z_ls, value_ls) if value_ls <= value_prev else (Z_prev, value_prev)
    for _ in range(spec.inner_iters):
        grad_z, _, _ = supervised_gradients(X, y, D, Z, theta, b, spec.lam, spec.ridge)
        Z, value = _backtracking(f, Z, grad_z, spec.step, value)
    return Z


@track_service_metrics(service="supervised", operation="train_logistic")
def train_supervised_logistic(X: Matrix, y: npt.ArrayLike,
                              spec: LogisticLayerSpec) -> Tuple[TrainedLayer, Vector, float]:
    """
    Block-coordinate descent on the logistic dictionary objective.

    Each outer iteration runs a MOD dictionary step (normalization scale
    folded into the code rows and theta so theta^T z is unchanged), a code
    step and a classifier step. The objective is recorded after every
    outer iteration; an iteration that increases it is discarded.

    Returns:
        (layer, theta, b)
    """
    X = as_matrix(X, "X")
    y = _check_binary(y)
    if y.size != X.shape[1]:
        raise DimensionMismatchError("label count", X.shape[1], y.size)

    D = initial_dictionary(X.shape[0], spec.atoms, spec.seed)
    Z = code_least_squares(D, X, spec.ridge)
    theta, b = _classifier_steps(X, y, D, Z, np.zeros(spec.atoms), 0.0, spec)

    def objective(D_: Matrix, Z_: Matrix, theta_: Vector, b_: float) -> float:
        return supervised_objective(X, y, D_, Z_, theta_, b_, spec.lam, spec.ridge)

    loss = objective(D, Z, theta, b)
    trace = [loss]
    iterations = 0
    stop_reason = "max_iters"

    for iteration in range(spec.max_iters):
        D_new, scales, dead = dictionary_step_mod_scaled(X, D, Z, spec.ridge)
        Z_folded = Z * scales[:, None]
        Z_folded[dead] = 0.0
        theta_new = theta / scales

        Z_new = _code_steps(X, y, D_new, Z_folded, theta_new, b, spec)
        theta_new, b_new = _classifier_steps(X, y, D_new, Z_new, theta_new, b, spec)

        new_loss = objective(D_new, Z_new, theta_new, b_new)
        if new_loss > loss:
            stop_reason = "stalled"
            break

        D, Z, theta, b = D_new, Z_new, theta_new, b_new
        trace.append(new_loss)
        iterations += 1
        logger.debug(f"logistic layer iteration {iteration}: objective={new_loss:.6e}")

        if relative_change(loss, new_loss) < spec.tol:
            stop_reason = "converged"
            break
        loss = new_loss

    layer = TrainedLayer(
        D=D, Z=Z, loss_trace=trace, iterations=iterations, stop_reason=stop_reason,
        kind=LayerKind.LOGISTIC, theta=theta, bias=b,
    )
    return layer, theta, b


# ---------------------------------------------------------------- class dictionaries

def incoherence_penalty(dicts: List[Matrix]) -> Tuple[float, List[Matrix]]:
    """
    sum_{i != j} ||D_i^T D_j||_F^2 and its gradient 4 * sum_{j != i} D_j D_j^T D_i
    for every D_i (ordered pairs, so each unordered pair counts twice).
    """
    if dicts and len({D.shape[0] for D in dicts}) > 1:
        raise DimensionMismatchError("dictionary rows", dicts[0].shape[0],
                                     next(D.shape[0] for D in dicts if D.shape[0] != dicts[0].shape[0]))
    value = 0.0
    grads = [np.zeros_like(D) for D in dicts]
    for i, D_i in enumerate(dicts):
        for j, D_j in enumerate(dicts):
            if i == j:
                continue
            cross = D_j.T @ D_i
            value += float(np.einsum("ij,ij->", cross, cross))
            grads[i] += 4.0 * D_j @ cross
    return value, grads


def _class_layout(spec: ClassDictSpec) -> npt.NDArray[np.int64]:
    layout = [c for c in range(spec.classes) for _ in range(spec.atoms_per_class)]
    layout.extend([-1] * spec.shared_atoms)
    return np.asarray(layout, dtype=np.int64)


def _check_labels(labels: npt.ArrayLike, classes: int, n: int) -> npt.NDArray[np.int64]:
    labels = np.asarray(labels, dtype=np.int64).ravel()
    if labels.size != n:
        raise DimensionMismatchError("label count", n, labels.size)
    bad = labels[(labels < 0) | (labels >= classes)]
    if bad.size:
        raise LabelDomainError(int(bad[0]), f"[0, {classes})")
    missing = [c for c in range(classes) if not np.any(labels == c)]
    if missing:
        raise ClassCoverageError(missing)
    return labels


def _block_codes(X: Matrix, D: Matrix, labels: npt.NDArray[np.int64],
                 layout: npt.NDArray[np.int64], classes: int, ridge: float) -> Matrix:
    # hard support: class-i samples only use blocks i and S
    Z = np.zeros((D.shape[1], X.shape[1]))
    for c in range(classes):
        atoms = np.flatnonzero((layout == c) | (layout == -1))
        samples = np.flatnonzero(labels == c)
        Z[np.ix_(atoms, samples)] = solve_least_squares(D[:, atoms], X[:, samples], ridge)
    return Z


def _class_objective(X: Matrix, D: Matrix, Z: Matrix, labels: npt.NDArray[np.int64],
                     layout: npt.NDArray[np.int64], classes: int, eta: float, ridge: float) -> float:
    fidelity = squared_residual(X, D, Z)
    for c in range(classes):
        samples = np.flatnonzero(labels == c)
        atoms = np.flatnonzero((layout == c) | (layout == -1))
        fidelity += squared_residual(X[:, samples], D[:, atoms], Z[np.ix_(atoms, samples)])
    loss = fidelity + 2.0 * ridge * float(np.einsum("ij,ij->", Z, Z))
    if eta > 0:
        penalty, _ = incoherence_penalty([D[:, layout == c] for c in range(classes)])
        loss += eta * penalty
    return loss


def class_dict_objective(X: Matrix, labels: npt.ArrayLike, model: ClassDictModel,
                         eta: float, ridge: float) -> float:
    """Two fidelity terms, ridge inside each, plus eta times the incoherence penalty."""
    layout = np.asarray(model.class_of_atom, dtype=np.int64)
    classes = len(model.per_class_dicts)
    labels = _check_labels(labels, classes, X.shape[1])
    return _class_objective(X, model.D, model.Z, labels, layout, classes, eta, ridge)


def _incoherence_step(D: Matrix, layout: npt.NDArray[np.int64], classes: int) -> Matrix:
    blocks = [np.flatnonzero(layout == c) for c in range(classes)]
    _, grads = incoherence_penalty([D[:, block] for block in blocks])
    gnorm = float(np.sqrt(sum(np.sum(g * g) for g in grads)))
    if gnorm == 0.0:
        return D
    D = D.copy()
    for block, grad in zip(blocks, grads):
        D[:, block] -= INCOHERENCE_STEP * grad / gnorm
    D, _ = normalize_columns(D)
    D, _ = sign_convention(D)
    return D


@track_service_metrics(service="supervised", operation="train_class_discriminative")
def train_class_discriminative(X: Matrix, labels: npt.ArrayLike, spec: ClassDictSpec) -> ClassDictModel:
    """
    Alternate block-sparse code steps and joint MOD dictionary steps.

    Args:
        X: d x n data
        labels: class index per sample in [0, spec.classes)
        spec: block sizes, incoherence weight and solver settings

    Returns:
        ClassDictModel in block layout (class 0 block, ..., class C-1 block, shared block)
    """
    X = as_matrix(X, "X")
    labels = _check_labels(labels, spec.classes, X.shape[1])
    layout = _class_layout(spec)
    samples_of = {c: np.flatnonzero(labels == c) for c in range(spec.classes)}

    D = initial_dictionary(X.shape[0], spec.total_atoms, spec.seed)
    Z = _block_codes(X, D, labels, layout, spec.classes, spec.ridge)

    def objective(D_: Matrix, Z_: Matrix) -> float:
        return _class_objective(X, D_, Z_, labels, layout, spec.classes, spec.eta, spec.ridge)

    loss = objective(D, Z)
    trace = [loss]
    iterations = 0
    stop_reason = "max_iters"

    for iteration in range(spec.max_iters):
        D_new = dictionary_step_mod(X, D, Z, spec.ridge, atom_groups=layout, group_columns=samples_of)
        if spec.eta > 0:
            D_new = _incoherence_step(D_new, layout, spec.classes)
        Z_new = _block_codes(X, D_new, labels, layout, spec.classes, spec.ridge)

        new_loss = objective(D_new, Z_new)
        if spec.eta == 0 and new_loss > loss:
            stop_reason = "stalled"
            break

        D, Z = D_new, Z_new
        trace.append(new_loss)
        iterations += 1
        logger.debug(f"class dictionary iteration {iteration}: objective={new_loss:.6e}")

        if relative_change(loss, new_loss) < spec.tol:
            stop_reason = "converged"
            break
        loss = new_loss

    return ClassDictModel(
        per_class_dicts=[D[:, layout == c] for c in range(spec.classes)],
        shared_dict=D[:, layout == -1],
        Z=Z,
        loss_trace=trace,
        iterations=iterations,
        stop_reason=stop_reason,
    )


def classify_by_block_residual(model: ClassDictModel, X: Matrix, ridge: float) -> npt.NDArray[np.int64]:
    """Class whose [D_c, D_S] block reconstructs each sample with the smallest residual."""
    D = model.D
    residuals = np.empty((len(model.per_class_dicts), X.shape[1]))
    for c in range(len(model.per_class_dicts)):
        atoms = model.block_columns(c)
        codes = solve_least_squares(D[:, atoms], X, ridge)
        residuals[c] = np.linalg.norm(X - D[:, atoms] @ codes, axis=0)
    return np.argmin(residuals, axis=0)


def layer_from_class_model(model: ClassDictModel) -> TrainedLayer:
    return TrainedLayer(
        D=model.D,
        Z=model.Z,
        loss_trace=list(model.loss_trace),
        iterations=model.iterations,
        stop_reason=model.stop_reason,
        kind=LayerKind.CLASS_DICT,
        class_of_atom=model.class_of_atom,
    )
