"""Generalized symmetric eigensolvers.

Two independent paths solve ``A v = lam M v`` with M positive definite:

- dense: ``scipy.linalg.eigh`` (Cholesky reduction of M), the reference;
- iterative: shift-invert Lanczos (``scipy.sparse.linalg.eigsh``), used past
  ``solver.dense_limit`` or when an operator is only available matrix-free.

Eigenvectors are returned M-orthonormal and eigenvalues ascending. Every
pair is checked against its residual before it is returned.
"""

import time
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, LinearOperator, eigsh

from ..config import DEFAULT_CONFIG, SolverSettings, Tolerances
from ..errors import NumericError
from ..logging import get_logger

logger = get_logger()

Matrix = Union[np.ndarray, sp.spmatrix]


@dataclass(frozen=True)
class EigenResult:
    """Ascending eigenpairs of a symmetric-definite pencil."""

    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    method: str


def _dense(matrix: Matrix) -> np.ndarray:
    return matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix, dtype=float)


def matrix_norm(matrix: Matrix) -> float:
    """Max absolute row sum, an upper bound of the 2-norm for symmetric matrices."""
    if isinstance(matrix, LinearOperator):
        raise TypeError("matrix_norm needs an explicit matrix")
    row_sums = abs(matrix).sum(axis=1)
    return float(np.max(row_sums)) if np.size(row_sums) else 0.0


def _apply(matrix, vectors: np.ndarray) -> np.ndarray:
    if isinstance(matrix, LinearOperator):
        return np.column_stack([matrix.matvec(v) for v in vectors.T]) if vectors.size else vectors
    return np.asarray(matrix @ vectors)


def residual_norms(A, M: Matrix, values: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """Euclidean norms of A v - lam M v, one per column."""
    if vectors.size == 0:
        return np.zeros(0)
    r = _apply(A, vectors) - np.asarray(M @ vectors) * values[None, :]
    return np.linalg.norm(r, axis=0)


def m_normalize(M: Matrix, vectors: np.ndarray) -> np.ndarray:
    norms = np.sqrt(np.einsum("ij,ij->j", vectors, np.asarray(M @ vectors)))
    return vectors / norms[None, :]


def check_residuals(
    result: EigenResult,
    scale: float,
    tolerances: Tolerances,
    module: str = "spectral",
    op: str = "eigensolve",
) -> EigenResult:
    """Raise NumericError if any residual exceeds eigen_residual * scale * |v|."""
    vec_norms = np.linalg.norm(result.vectors, axis=0) if result.vectors.size else np.zeros(0)
    limit = tolerances.eigen_residual * max(scale, 1e-300) * np.maximum(vec_norms, 1.0)
    bad = np.flatnonzero(result.residuals > limit)
    if len(bad):
        raise NumericError(
            f"{result.method} eigensolver residual {result.residuals[bad[0]]:.3e} exceeds "
            f"{limit[bad[0]]:.3e} for pair {int(bad[0])}",
            residuals=result.residuals,
            module=module,
            op=op,
        )
    return result


def dense_eigh(A: Matrix, M: Matrix, lo: int = 0, hi: Optional[int] = None) -> EigenResult:
    """Eigenpairs lo..hi (inclusive, ascending) by dense reduction."""
    a, m = _dense(A), _dense(M)
    n = a.shape[0]
    hi = n - 1 if hi is None else min(hi, n - 1)
    start = time.perf_counter()
    try:
        values, vectors = la.eigh(a, m, subset_by_index=[lo, hi])
    except la.LinAlgError as e:
        raise NumericError(f"dense generalized eigensolve failed: {e}") from e
    logger.debug(f"dense eigh n={n} pairs {lo}..{hi} in {time.perf_counter() - start:.3f}s")
    return EigenResult(values, vectors, residual_norms(a, m, values, vectors), "dense")


def shift_invert_lanczos(
    A,
    M: Matrix,
    k: int,
    sigma: float,
    solver: SolverSettings,
    opinv: Optional[LinearOperator] = None,
) -> EigenResult:
    """The k eigenpairs nearest sigma by shift-invert Lanczos.

    Args:
        A: Sparse matrix or LinearOperator.
        M: Positive definite sparse matrix.
        k: Number of pairs, k < n.
        sigma: Shift, not an eigenvalue.
        solver: Tolerance and iteration limits.
        opinv: Optional operator applying (A - sigma M)^-1; required when A
            is matrix-free.
    """
    n = M.shape[0]
    start = time.perf_counter()
    v0 = np.ones(n) / np.sqrt(n) + np.linspace(0.0, 1e-3, n)
    try:
        values, vectors = eigsh(
            A,
            k=k,
            M=M,
            sigma=sigma,
            which="LM",
            OPinv=opinv,
            tol=solver.lanczos_tol,
            maxiter=solver.max_iterations,
            v0=v0,
        )
    except ArpackNoConvergence as e:
        raise NumericError(
            f"shift-invert Lanczos did not converge ({len(e.eigenvalues)} of {k} pairs)",
            residuals=[],
        ) from e
    except (ArpackError, RuntimeError) as e:
        raise NumericError(f"shift-invert Lanczos failed: {e}") from e
    order = np.argsort(values)
    values, vectors = values[order], m_normalize(M, vectors[:, order])
    logger.debug(f"Lanczos n={n} k={k} sigma={sigma} in {time.perf_counter() - start:.3f}s")
    return EigenResult(values, vectors, residual_norms(A, M, values, vectors), "lanczos")


def largest_eigenvalue(A: Matrix, M: Matrix, solver: SolverSettings) -> float:
    """Largest eigenvalue of (A, M); dense up to dense_limit."""
    n = M.shape[0]
    if n <= solver.dense_limit:
        return float(dense_eigh(A, M, n - 1, n - 1).values[0])
    try:
        values = eigsh(A, k=1, M=M, which="LA", tol=1e-8, maxiter=solver.max_iterations, return_eigenvectors=False)
    except (ArpackNoConvergence, ArpackError) as e:
        raise NumericError(f"largest eigenvalue did not converge: {e}") from e
    return float(values[0])


def smallest_eigenpairs(
    A: Matrix,
    M: Matrix,
    k: int,
    solver: Optional[SolverSettings] = None,
    tolerances: Optional[Tolerances] = None,
    lower_bound: Optional[float] = None,
    op: str = "eigensolve",
) -> EigenResult:
    """The k smallest eigenpairs of (A, M).

    Args:
        A: Symmetric matrix.
        M: Symmetric positive definite matrix.
        k: Number of pairs.
        solver: Solver settings; defaults to the global config.
        tolerances: Residual tolerances; defaults to the global config.
        lower_bound: A value strictly below the spectrum. Needed on the
            iterative path when the spectrum may extend below solver.shift.
        op: Operation name for error reports.
    """
    solver = solver or DEFAULT_CONFIG.solver
    tolerances = tolerances or DEFAULT_CONFIG.tolerances
    n = M.shape[0]
    if not 1 <= k <= n:
        raise NumericError(f"requested {k} eigenpairs of a pencil of size {n}", op=op)
    if n <= solver.dense_limit or k >= n - 1:
        result = dense_eigh(A, M, 0, k - 1)
    else:
        sigma = solver.shift if lower_bound is None else lower_bound
        result = shift_invert_lanczos(A, M, k, sigma, solver)
        if lower_bound is not None:
            # re-centre the shift just below the located bottom of the spectrum
            bottom = float(result.values[0])
            result = shift_invert_lanczos(A, M, k, bottom - 1e-2 * (abs(bottom) + 1.0), solver)
    return check_residuals(result, matrix_norm(A), tolerances, op=op)
