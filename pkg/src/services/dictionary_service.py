"""
Unsupervised dictionary layer: min_{D,Z} ||X - DZ||_F^2 by alternating minimization.

The code step is ridge least squares or orthogonal matching pursuit, the
dictionary step is the method of optimal directions (MOD) or the
nonnegative multiplicative update.
"""
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from src.data_access.models.network_model import TrainedLayer
from src.data_access.models.spec_model import CoderKind, LayerSpec, SolverKind
from src.shared.exceptions import DimensionMismatchError, NonnegativityViolationError
from src.shared.logging import get_logger
from src.shared.monitoring import track_service_metrics
from src.shared.numerics import (
    ZERO_COLUMN_TOL,
    Matrix,
    as_matrix,
    derive_seed,
    normalize_columns,
    seeded_gaussian,
    solve_least_squares,
    squared_residual,
)

logger = get_logger(__name__)

MULTIPLICATIVE_EPS = 1e-12


def code_least_squares(D: Matrix, X: Matrix, ridge: float = 0.0) -> Matrix:
    if D.shape[0] != X.shape[0]:
        raise DimensionMismatchError("dictionary rows vs data rows", D.shape[0], X.shape[0])
    return solve_least_squares(D, X, ridge)


def sparse_code_omp(D: Matrix, X: Matrix, s: int) -> Matrix:
    """
    Orthogonal matching pursuit, column by column.

    Each of the s rounds picks the atom with the largest |correlation| with the
    residual (lowest index on ties, selected atoms excluded) and refits the
    coefficients on the whole support by least squares.
    """
    if D.shape[0] != X.shape[0]:
        raise DimensionMismatchError("dictionary rows vs data rows", D.shape[0], X.shape[0])
    if s < 1 or s > D.shape[1]:
        raise DimensionMismatchError("omp sparsity", D.shape[1], s)

    Z = np.zeros((D.shape[1], X.shape[1]))
    for j in range(X.shape[1]):
        x = X[:, j]
        residual = x
        support: list = []
        coef = np.zeros(0)
        for _ in range(s):
            correlation = np.abs(D.T @ residual)
            correlation[support] = -1.0
            support.append(int(np.argmax(correlation)))
            atoms = D[:, support]
            coef, *_ = np.linalg.lstsq(atoms, x, rcond=None)
            residual = x - atoms @ coef
        Z[support, j] = coef
    return Z


def encode_codes(D: Matrix, X: Matrix, coder: CoderKind, sparsity: int, ridge: float) -> Matrix:
    """Code step shared by training and test-time encoding"""
    if CoderKind(coder) is CoderKind.OMP:
        return sparse_code_omp(D, X, sparsity)
    return code_least_squares(D, X, ridge)


def _mod_raw(X: Matrix, Z: Matrix, ridge: float) -> Matrix:
    # D = X Z^T (Z Z^T + ridge I)^-1, solved as a least-squares problem in D^T
    if X.shape[1] != Z.shape[1]:
        raise DimensionMismatchError("sample count of X vs Z", X.shape[1], Z.shape[1])
    return solve_least_squares(Z.T, X.T, ridge).T


def update_dictionary_mod(X: Matrix, Z: Matrix, ridge: float = 0.0) -> Matrix:
    """Method of optimal directions followed by column normalization."""
    D, _ = normalize_columns(_mod_raw(X, Z, ridge))
    return D


def update_dictionary_multiplicative(
    X: Matrix, Z: Matrix, D_prev: Matrix, normalize: bool = True
) -> Matrix:
    """D <- D_prev * (X Z^T) / (D_prev Z Z^T + eps); entries stay nonnegative."""
    for name, value in (("X", X), ("Z", Z), ("D_prev", D_prev)):
        if np.any(value < 0):
            raise NonnegativityViolationError(name)
    D = D_prev * (X @ Z.T) / (D_prev @ (Z @ Z.T) + MULTIPLICATIVE_EPS)
    if normalize:
        D, _ = normalize_columns(D)
    return D


def _multiplicative_codes(X: Matrix, D: Matrix, Z: Matrix) -> Matrix:
    return Z * (D.T @ X) / ((D.T @ D) @ Z + MULTIPLICATIVE_EPS)


def layer_objective(X: Matrix, D: Matrix, Z: Matrix, ridge: float, coder: CoderKind = CoderKind.RIDGE_LS,
                    solver: SolverKind = SolverKind.MOD) -> float:
    """Objective recorded after every code step."""
    loss = squared_residual(X, D, Z)
    if CoderKind(coder) is CoderKind.RIDGE_LS and SolverKind(solver) is SolverKind.MOD:
        loss += ridge * float(np.einsum("ij,ij->", Z, Z))
    return loss


def sign_convention(D: Matrix) -> Tuple[Matrix, npt.NDArray[np.float64]]:
    """Flip atoms so the largest-magnitude entry of each is positive."""
    rows = np.argmax(np.abs(D), axis=0)
    signs = np.sign(D[rows, np.arange(D.shape[1])])
    signs[signs == 0] = 1.0
    return D * signs, signs


def revive_dead_atoms(
    D_raw: Matrix,
    dead: npt.NDArray[np.bool_],
    X: Matrix,
    residual: Matrix,
    columns: Optional[Sequence[int]] = None,
) -> Matrix:
    """
    Replace dead atoms by the worst-reconstructed data columns.

    Candidates are ranked by residual norm, largest first, lowest index on
    ties; each dead atom takes the next distinct candidate.
    """
    D = D_raw.copy()
    candidates = np.arange(X.shape[1]) if columns is None else np.asarray(columns, dtype=np.int64)
    errors = np.linalg.norm(residual[:, candidates], axis=0)
    order = candidates[np.argsort(-errors, kind="stable")]
    order = [int(c) for c in order if np.linalg.norm(X[:, c]) > ZERO_COLUMN_TOL]

    for position, atom in enumerate(np.flatnonzero(dead)):
        if position < len(order):
            D[:, atom] = X[:, order[position]]
        else:
            D[:, atom] = 0.0
            D[atom % D.shape[0], atom] = 1.0
        logger.debug(f"Revived dead atom {atom}")
    return D


def dictionary_step_mod_scaled(
    X: Matrix,
    D: Matrix,
    Z: Matrix,
    ridge: float,
    atom_groups: Optional[Sequence[int]] = None,
    group_columns: Optional[Dict[int, npt.NDArray[np.int64]]] = None,
) -> Tuple[Matrix, npt.NDArray[np.float64], npt.NDArray[np.bool_]]:
    """
    MOD over the atoms with nonzero code rows, dead-atom revival, normalization
    and sign convention. When `atom_groups` is given, a dead atom of group g is
    revived only from `group_columns[g]` (groups without an entry use all columns).

    Returns:
        (D_new, scales, dead) where D_raw = D_new * scales for every live atom,
        so rescaling code rows by `scales` keeps the reconstruction unchanged
    """
    active = np.any(Z != 0, axis=1)
    D_raw = np.zeros_like(D)
    if active.any():
        D_raw[:, active] = _mod_raw(X, Z[active], ridge)

    dead = (~active) | (np.linalg.norm(D_raw, axis=0) <= ZERO_COLUMN_TOL)
    if dead.any():
        residual = X - D @ Z
        if atom_groups is None:
            D_raw = revive_dead_atoms(D_raw, dead, X, residual)
        else:
            groups = np.asarray(atom_groups)
            for group in np.unique(groups[dead]):
                columns = (group_columns or {}).get(int(group))
                D_raw = revive_dead_atoms(D_raw, dead & (groups == group), X, residual, columns)

    D_new, norms = normalize_columns(D_raw)
    D_new, signs = sign_convention(D_new)
    return D_new, norms * signs, dead


def dictionary_step_mod(
    X: Matrix,
    D: Matrix,
    Z: Matrix,
    ridge: float,
    atom_groups: Optional[Sequence[int]] = None,
    group_columns: Optional[Dict[int, npt.NDArray[np.int64]]] = None,
) -> Matrix:
    D_new, _, _ = dictionary_step_mod_scaled(X, D, Z, ridge, atom_groups, group_columns)
    return D_new


def initial_dictionary(d: int, K: int, seed: int, nonnegative: bool = False) -> Matrix:
    D = seeded_gaussian(d, K, seed)
    if nonnegative:
        D = np.abs(D)
    D, _ = normalize_columns(D)
    return D


def relative_change(previous: float, current: float) -> float:
    if previous == 0.0:
        return 0.0
    return abs(previous - current) / abs(previous)


@track_service_metrics(service="dictionary", operation="train_layer")
def train_layer(X: Matrix, spec: LayerSpec, initial: Optional[Matrix] = None) -> TrainedLayer:
    """
    Train one dictionary layer.

    Args:
        X: d x n data, one sample per column
        spec: layer hyperparameters
        initial: optional d x K starting dictionary (unit columns)

    Returns:
        TrainedLayer with the final dictionary, codes and objective trace
    """
    X = as_matrix(X, "X")
    d, n = X.shape
    multiplicative = spec.solver is SolverKind.MULTIPLICATIVE
    if multiplicative and np.any(X < 0):
        raise NonnegativityViolationError("X")

    if initial is not None:
        if initial.shape != (d, spec.atoms):
            raise DimensionMismatchError("initial dictionary atoms", spec.atoms, initial.shape[1])
        D = initial.copy()
    else:
        D = initial_dictionary(d, spec.atoms, spec.seed, nonnegative=multiplicative)

    if multiplicative:
        Z = np.abs(seeded_gaussian(spec.atoms, n, derive_seed(spec.seed, 1)))
        fitted = np.linalg.norm(D @ Z)
        Z *= np.linalg.norm(X) / fitted if fitted > 0 else 1.0
        Z = _multiplicative_codes(X, D, Z)
    else:
        Z = encode_codes(D, X, spec.coder, spec.sparsity, spec.ridge)

    def objective(D_: Matrix, Z_: Matrix) -> float:
        return layer_objective(X, D_, Z_, spec.ridge, spec.coder, spec.solver)

    loss = objective(D, Z)
    trace = [loss]
    iterations = 0
    stop_reason = "max_iters"

    for iteration in range(spec.max_iters):
        if multiplicative:
            D_new, Z_new = _multiplicative_sweep(X, D, Z)
        else:
            D_new = dictionary_step_mod(X, D, Z, spec.ridge)
            Z_new = encode_codes(D_new, X, spec.coder, spec.sparsity, spec.ridge)

        new_loss = objective(D_new, Z_new)
        if new_loss > loss:
            stop_reason = "stalled"
            break

        D, Z = D_new, Z_new
        trace.append(new_loss)
        iterations += 1
        logger.debug(f"train_layer iteration {iteration}: objective={new_loss:.6e}")

        if relative_change(loss, new_loss) < spec.tol:
            stop_reason = "converged"
            break
        loss = new_loss

    return TrainedLayer(D=D, Z=Z, loss_trace=trace, iterations=iterations, stop_reason=stop_reason)


def _multiplicative_sweep(X: Matrix, D: Matrix, Z: Matrix) -> Tuple[Matrix, Matrix]:
    D_raw = update_dictionary_multiplicative(X, Z, D, normalize=False)
    norms = np.linalg.norm(D_raw, axis=0)
    dead = norms <= ZERO_COLUMN_TOL
    Z = Z * norms[:, None]
    if dead.any():
        D_raw = revive_dead_atoms(D_raw, dead, X, X - D @ Z)
        positive = Z[Z > 0]
        Z[dead] = 1e-6 * (positive.mean() if positive.size else 1.0)
        norms = np.linalg.norm(D_raw, axis=0)
        Z[dead] /= norms[dead][:, None]
    D_new = D_raw / norms
    return D_new, _multiplicative_codes(X, D_new, Z)
