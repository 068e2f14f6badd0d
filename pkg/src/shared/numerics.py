"""
Dense matrix primitives shared by every solver.

A Matrix is a 2-D float64 numpy array. All routines are pure: inputs are
never modified and results are fresh arrays.
"""
from typing import Tuple

import numpy as np
import numpy.typing as npt
from scipy import linalg

from src.shared.exceptions import (
    DegenerateAtomError,
    DimensionMismatchError,
    NonFiniteError,
    SolverSingularError,
)

Matrix = npt.NDArray[np.float64]

RNG_ALGORITHM = "numpy.PCG64/SeedSequence"
ZERO_COLUMN_TOL = 1e-12
# Relative pivot size below which an unregularized normal matrix counts as singular
_SINGULAR_PIVOT_TOL = 1e-13


def as_matrix(values: npt.ArrayLike, name: str = "matrix", allow_empty: bool = False) -> Matrix:
    """Validate and copy values into a C-contiguous float64 matrix."""
    m = np.array(values, dtype=np.float64, order="C", copy=True)
    if m.ndim == 1:
        m = m.reshape(-1, 1)
    if m.ndim != 2:
        raise DimensionMismatchError(f"{name} ndim", 2, m.ndim)
    if not allow_empty and (m.shape[0] == 0 or m.shape[1] == 0):
        raise DimensionMismatchError(f"{name} size", 1, 0)
    if not np.all(np.isfinite(m)):
        raise NonFiniteError(name)
    return m


def solve_least_squares(A: Matrix, B: Matrix, ridge: float = 0.0) -> Matrix:
    """
    Solve min_Z ||B - A Z||_F^2 + ridge * ||Z||_F^2 via the normal equations.

    Args:
        A: m x k design matrix
        B: m x n right-hand sides
        ridge: nonnegative Tikhonov weight

    Returns:
        k x n solution

    Raises:
        SolverSingularError: ridge is 0 and A^T A is singular
    """
    if A.shape[0] != B.shape[0]:
        raise DimensionMismatchError("least-squares rows", A.shape[0], B.shape[0])
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")

    k = A.shape[1]
    gram = A.T @ A
    if ridge > 0:
        gram[np.diag_indices_from(gram)] += ridge
    rhs = A.T @ B

    try:
        factor, lower = linalg.cho_factor(gram, lower=False, check_finite=False)
    except linalg.LinAlgError:
        if ridge == 0:
            raise SolverSingularError(k) from None
        return _augmented_lstsq(A, B, ridge)

    pivots = np.abs(np.diag(factor)) ** 2
    scale = max(float(np.max(np.diag(gram))), np.finfo(np.float64).tiny)
    tiny = np.flatnonzero(pivots <= _SINGULAR_PIVOT_TOL * scale)
    if tiny.size:
        if ridge == 0:
            raise SolverSingularError(k, int(tiny[0]))
        return _augmented_lstsq(A, B, ridge)

    return linalg.cho_solve((factor, lower), rhs, check_finite=False)


def _augmented_lstsq(A: Matrix, B: Matrix, ridge: float) -> Matrix:
    # Ridge system written as an ordinary least-squares problem; always solvable
    k = A.shape[1]
    stacked_a = np.vstack([A, np.sqrt(ridge) * np.eye(k)])
    stacked_b = np.vstack([B, np.zeros((k, B.shape[1]))])
    solution, *_ = np.linalg.lstsq(stacked_a, stacked_b, rcond=None)
    return solution


def normalize_columns(M: Matrix) -> Tuple[Matrix, npt.NDArray[np.float64]]:
    """Scale every column to unit Euclidean norm; returns (normalized, original norms)."""
    norms = np.linalg.norm(M, axis=0)
    zero = np.flatnonzero(norms <= ZERO_COLUMN_TOL)
    if zero.size:
        raise DegenerateAtomError(int(zero[0]))
    return M / norms, norms


def frobenius_norm(M: Matrix) -> float:
    return float(np.linalg.norm(M, "fro")) if M.size else 0.0


def squared_residual(X: Matrix, D: Matrix, Z: Matrix) -> float:
    """||X - DZ||_F^2"""
    residual = X - D @ Z
    return float(np.einsum("ij,ij->", residual, residual))


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def derive_seed(seed: int, *path: int) -> int:
    """Deterministic child seed for a named sub-stream (layer, guard, initializer)."""
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=tuple(path))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def seeded_gaussian(rows: int, cols: int, seed: int) -> Matrix:
    """i.i.d. standard-normal matrix, identical for identical (rows, cols, seed)."""
    if rows < 1 or cols < 1:
        raise DimensionMismatchError("gaussian size", 1, min(rows, cols))
    return make_rng(seed).standard_normal((rows, cols))
