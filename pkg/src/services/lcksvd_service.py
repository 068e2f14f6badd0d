"""
Final joint layer: dictionary plus linear classifier (label-consistent K-SVD).

Both variants reduce to plain dictionary learning on stacked data:

    LC-KSVD1:  [V; sqrt(mu) T]             ~ [D_N; sqrt(mu) M] Z
    LC-KSVD2:  [V; sqrt(mu) T; sqrt(mu) H] ~ [D_N; sqrt(mu) M; sqrt(mu) W] Z

After training the data block D_N is renormalized and the column scale is
moved into M, W and the code rows, so D_N Z, M Z and W Z are unchanged.
"""
from dataclasses import replace
from typing import Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from src.data_access.models.network_model import AtomAllocation, FinalLayerModel, TrainedLayer
from src.data_access.models.spec_model import LayerSpec
from src.services.dictionary_service import revive_dead_atoms, train_layer
from src.shared.exceptions import AllocationGapError, DimensionMismatchError, LabelDomainError
from src.shared.logging import get_logger
from src.shared.monitoring import track_service_metrics
from src.shared.numerics import (
    ZERO_COLUMN_TOL,
    Matrix,
    as_matrix,
    derive_seed,
    make_rng,
    normalize_columns,
    seeded_gaussian,
    solve_least_squares,
    squared_residual,
)

logger = get_logger(__name__)


def build_targets(labels: npt.ArrayLike, class_count: int) -> Matrix:
    """One-hot C x n target matrix."""
    labels = np.asarray(labels, dtype=np.int64).ravel()
    bad = labels[(labels < 0) | (labels >= class_count)]
    if bad.size:
        raise LabelDomainError(int(bad[0]), f"[0, {class_count})")
    T = np.zeros((class_count, labels.size))
    T[labels, np.arange(labels.size)] = 1.0
    return T


def uniform_allocation(atoms: int, class_count: int) -> AtomAllocation:
    """Contiguous class blocks whose sizes differ by at most one, larger blocks first."""
    per_class, extra = divmod(atoms, class_count)
    class_of_atom = []
    for c in range(class_count):
        class_of_atom.extend([c] * (per_class + (1 if c < extra else 0)))
    return AtomAllocation(class_of_atom=tuple(class_of_atom))


def build_discriminative_code(labels: npt.ArrayLike, allocation: AtomAllocation) -> Matrix:
    """H[k, i] = 1 iff atom k is allocated to the class of sample i."""
    labels = np.asarray(labels, dtype=np.int64).ravel()
    owners = np.asarray(allocation.class_of_atom, dtype=np.int64)
    for c in np.unique(labels):
        if not np.any(owners == c):
            raise AllocationGapError(int(c))
    return (owners[:, None] == labels[None, :]).astype(np.float64)


def classify(model: FinalLayerModel, Z: Matrix) -> Tuple[npt.NDArray[np.int64], Matrix]:
    """
    Returns:
        (class index per column of Z, score matrix M Z); ties go to the lowest class
    """
    if Z.shape[0] != model.atoms:
        raise DimensionMismatchError("code rows", model.atoms, Z.shape[0])
    scores = model.M @ Z
    return np.argmax(scores, axis=0).astype(np.int64), scores


def lcksvd_objective(V: Matrix, T: Matrix, model: FinalLayerModel, Z: Matrix,
                     H: Optional[Matrix] = None) -> float:
    """||V - D_N Z||^2 + mu (||T - M Z||^2 [+ ||H - W Z||^2])"""
    loss = squared_residual(V, model.D, Z)
    discriminative = squared_residual(T, model.M, Z)
    if H is not None and model.W is not None:
        discriminative += squared_residual(H, model.W, Z)
    return loss + model.mu * discriminative


def _check_columns(V: Matrix, *others: Matrix) -> None:
    for other in others:
        if other.shape[1] != V.shape[1]:
            raise DimensionMismatchError("sample count", V.shape[1], other.shape[1])


def _ridge_map(Z: Matrix, targets: Matrix, ridge: float) -> Matrix:
    # argmin_M ||targets - M Z||^2 + ridge ||M||^2
    return solve_least_squares(Z.T, targets.T, ridge).T


def _unstack(layer: TrainedLayer, V: Matrix, mu: float,
             blocks: Sequence[int]) -> Tuple[Matrix, Sequence[Matrix], Matrix]:
    # split [D_N; sqrt(mu) M; ...] and move the norm of every D_N column into the maps and codes
    d = V.shape[0]
    data = layer.D[:d]
    Z = layer.Z.copy()
    dead = np.linalg.norm(data, axis=0) <= ZERO_COLUMN_TOL
    if np.any(dead):
        # atoms with an empty data part are reseeded from V with zero codes, so D_N Z is unchanged
        logger.warning(f"{int(dead.sum())} final-layer atoms have no data component; reseeding them")
        Z[dead] = 0.0
        data = revive_dead_atoms(data, dead, V, V - data @ Z)

    D_N, norms = normalize_columns(data)
    maps = []
    start = d
    for rows in blocks:
        block = layer.D[start:start + rows] / np.sqrt(mu) / norms
        block[:, dead] = 0.0
        maps.append(block)
        start += rows
    return D_N, maps, Z * norms[:, None]


def refit_classifier(model: FinalLayerModel, Z: Matrix, T: Matrix, H: Optional[Matrix] = None,
                     ridge: float = 0.0) -> FinalLayerModel:
    """
    Ridge-refit M (and W when the model has one) on codes Z computed from D_N
    alone, the codes classify() receives at prediction time.
    D_N, the allocation and the training trace are kept.
    """
    Z = as_matrix(Z, "Z")
    T = as_matrix(T, "T")
    _check_columns(Z, T)
    if Z.shape[0] != model.atoms:
        raise DimensionMismatchError("code rows", model.atoms, Z.shape[0])

    W = model.W
    if W is not None and H is not None:
        H = as_matrix(H, "H")
        _check_columns(Z, H)
        W = _ridge_map(Z, H, ridge)
    return replace(model, M=_ridge_map(Z, T, ridge), W=W)


def _class_aware_dictionary(stacked: Matrix, labels: npt.NDArray[np.int64],
                            allocation: AtomAllocation, seed: int) -> Matrix:
    rng = make_rng(derive_seed(seed, 2))
    owners = np.asarray(allocation.class_of_atom, dtype=np.int64)
    D = np.empty((stacked.shape[0], allocation.atoms))
    for c in range(int(owners.max()) + 1):
        atoms = np.flatnonzero(owners == c)
        if atoms.size == 0:
            continue
        samples = np.flatnonzero(labels == c)
        if samples.size >= atoms.size:
            chosen = np.sort(rng.choice(samples, size=atoms.size, replace=False))
            D[:, atoms] = stacked[:, chosen]
        else:
            D[:, atoms] = seeded_gaussian(stacked.shape[0], atoms.size, derive_seed(seed, 3, c))
    D, _ = normalize_columns(D)
    return D


@track_service_metrics(service="lcksvd", operation="train_lcksvd1")
def train_lcksvd1(V: Matrix, T: Matrix, mu: float, spec: LayerSpec) -> Tuple[FinalLayerModel, Matrix]:
    """
    Args:
        V: d x n layer input
        T: C x n one-hot targets
        mu: weight of the classification term
        spec: dictionary settings of the final layer

    Returns:
        (final layer model, codes Z of the training samples)
    """
    V = as_matrix(V, "V")
    T = as_matrix(T, "T")
    _check_columns(V, T)
    allocation = uniform_allocation(spec.atoms, T.shape[0])

    if mu == 0:
        layer = train_layer(V, spec)
        model = FinalLayerModel(
            D=layer.D, M=_ridge_map(layer.Z, T, spec.ridge), mu=0.0, allocation=allocation,
            loss_trace=list(layer.loss_trace), iterations=layer.iterations, stop_reason=layer.stop_reason,
        )
        return model, layer.Z

    stacked = np.vstack([V, np.sqrt(mu) * T])
    layer = train_layer(stacked, spec)
    D_N, (M,), Z = _unstack(layer, V, mu, [T.shape[0]])
    logger.info(
        f"LC-KSVD1 final layer: {V.shape[0]} -> {spec.atoms}, "
        f"iterations={layer.iterations}, objective={layer.final_objective:.6e}"
    )
    model = FinalLayerModel(
        D=D_N, M=M, mu=mu, allocation=allocation, loss_trace=list(layer.loss_trace),
        iterations=layer.iterations, stop_reason=layer.stop_reason,
    )
    return model, Z


@track_service_metrics(service="lcksvd", operation="train_lcksvd2")
def train_lcksvd2(V: Matrix, T: Matrix, H: Matrix, mu: float, spec: LayerSpec,
                  allocation: Optional[AtomAllocation] = None) -> Tuple[FinalLayerModel, Matrix]:
    """
    LC-KSVD2 with label-consistency map W; starts from a class-aware dictionary.

    Returns:
        (final layer model with W, codes Z of the training samples)
    """
    V = as_matrix(V, "V")
    T = as_matrix(T, "T")
    H = as_matrix(H, "H")
    _check_columns(V, T, H)
    if H.shape[0] != spec.atoms:
        raise DimensionMismatchError("discriminative code rows", spec.atoms, H.shape[0])
    allocation = allocation or uniform_allocation(spec.atoms, T.shape[0])

    if mu == 0:
        layer = train_layer(V, spec)
        model = FinalLayerModel(
            D=layer.D, M=_ridge_map(layer.Z, T, spec.ridge), W=_ridge_map(layer.Z, H, spec.ridge),
            mu=0.0, allocation=allocation, loss_trace=list(layer.loss_trace),
            iterations=layer.iterations, stop_reason=layer.stop_reason,
        )
        return model, layer.Z

    stacked = np.vstack([V, np.sqrt(mu) * T, np.sqrt(mu) * H])
    labels = np.argmax(T, axis=0)
    initial = _class_aware_dictionary(stacked, labels, allocation, spec.seed)
    layer = train_layer(stacked, spec, initial=initial)
    D_N, (M, W), Z = _unstack(layer, V, mu, [T.shape[0], H.shape[0]])
    logger.info(
        f"LC-KSVD2 final layer: {V.shape[0]} -> {spec.atoms}, "
        f"iterations={layer.iterations}, objective={layer.final_objective:.6e}"
    )
    model = FinalLayerModel(
        D=D_N, M=M, W=W, mu=mu, allocation=allocation, loss_trace=list(layer.loss_trace),
        iterations=layer.iterations, stop_reason=layer.stop_reason,
    )
    return model, Z
