"""Steklov spectra and variational constants.

Every constant is the extreme Rayleigh quotient of a symmetric pencil and is
reported together with the vector attaining it. Constraints (boundary mean
zero, grounded vertices) are imposed by deflation or index reduction.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from ..config import DEFAULT_CONFIG, SolverSettings, Tolerances
from ..errors import FactorizationError, NumericError, ParameterError, RangeError
from ..logging import get_logger
from .assembly import BoundaryMass
from .dtn import DtnOperator
from .eigen import (
    EigenResult,
    check_residuals,
    dense_eigh,
    matrix_norm,
    shift_invert_lanczos,
    smallest_eigenpairs,
)

logger = get_logger()


@dataclass(frozen=True, eq=False)
class SteklovSpectrum:
    """Ascending Steklov eigenpairs, eigenvectors B-orthonormal on the boundary.

    Attributes:
        values: Eigenvalues, ascending.
        vectors: (|boundary|, k) boundary fields.
        residuals: |S v - lam B v| per pair.
        boundary: Boundary vertex indices the fields live on.
        method: "dense" or "lanczos".
        complete: True when every pair of the pencil was computed.
    """

    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    boundary: np.ndarray
    method: str
    complete: bool

    @property
    def k(self) -> int:
        return int(len(self.values))

    @property
    def gap(self) -> float:
        """First nonzero eigenvalue lam_1."""
        if self.k < 2:
            raise RangeError("spectral gap needs at least two eigenvalues", "spectral", "gap")
        return float(self.values[1])

    def rows(self) -> List[Dict[str, float]]:
        return [
            {"index": i, "eigenvalue": float(v), "residual": float(r)}
            for i, (v, r) in enumerate(zip(self.values, self.residuals))
        ]


@dataclass(frozen=True, eq=False)
class ConstantReport:
    """A variational constant with the vector attaining it."""

    value: float
    vector: np.ndarray
    problem: str
    level: int = 0
    extras: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, object]:
        return {"problem": self.problem, "value": self.value, "level": self.level, **self.extras}


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    if vectors.size == 0:
        return vectors
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs[None, :]


def _check_spectrum(spec: SteklovSpectrum, gram, tolerances: Tolerances) -> None:
    lam0 = float(spec.values[0])
    lam1 = float(spec.values[1]) if spec.k > 1 else 1.0
    if abs(lam0) > tolerances.kernel_relative * max(lam1, 1.0):
        raise NumericError(
            f"lowest Steklov eigenvalue {lam0:.3e} is not zero", residuals=spec.residuals, op="steklov_spectrum"
        )
    v0 = spec.vectors[:, 0]
    deviation = float((np.max(v0) - np.min(v0)) / abs(np.mean(v0)))
    if deviation > tolerances.constant_deviation:
        raise NumericError(
            f"ground state deviates from a constant by {deviation:.3e}", residuals=spec.residuals, op="steklov_spectrum"
        )
    gram_matrix = spec.vectors.T @ (gram @ spec.vectors)
    orth = float(np.max(np.abs(gram_matrix - np.eye(spec.k))))
    if orth > tolerances.orthonormality:
        raise NumericError(f"eigenvectors are not B-orthonormal ({orth:.3e})", op="steklov_spectrum")


def steklov_spectrum(
    op: DtnOperator,
    k: int,
    method: str = "auto",
    solver: Optional[SolverSettings] = None,
    tolerances: Optional[Tolerances] = None,
) -> SteklovSpectrum:
    """Lowest k eigenpairs of S v = lam B v.

    Args:
        op: DtN operator.
        k: Number of pairs, 1 <= k <= |boundary|.
        method: "dense", "lanczos" or "auto" (dense when S is formed).
        solver: Solver settings.
        tolerances: Residual and invariant tolerances.

    Raises:
        ParameterError: If k is out of range.
        NumericError: If an eigensolver fails or an invariant is violated.
    """
    solver = solver or DEFAULT_CONFIG.solver
    tolerances = tolerances or DEFAULT_CONFIG.tolerances
    n = op.size
    if not 1 <= k <= n:
        raise ParameterError(f"k must lie in [1, {n}], got {k}", "spectral", "steklov_spectrum")
    if method not in ("auto", "dense", "lanczos"):
        raise ParameterError(f"unknown eigensolver method '{method}'", "spectral", "steklov_spectrum")
    use_dense = method == "dense" or (method == "auto" and op.schur is not None) or k >= n - 1
    if use_dense:
        if op.schur is None:
            raise NumericError("dense eigensolve needs the formed Schur complement", op="steklov_spectrum")
        result = dense_eigh(op.schur, op.boundary_gram, 0, k - 1)
        scale = matrix_norm(op.schur)
    else:
        result = shift_invert_lanczos(
            op.as_operator(), op.boundary_gram, k, solver.shift, solver, opinv=op.shifted_inverse(solver.shift)
        )
        scale = matrix_norm(op.schur) if op.schur is not None else matrix_norm(op.stiffness)
    check_residuals(result, scale, tolerances, op="steklov_spectrum")
    spectrum = SteklovSpectrum(
        values=result.values,
        vectors=_fix_signs(result.vectors),
        residuals=result.residuals,
        boundary=op.boundary,
        method=result.method,
        complete=k == n,
    )
    _check_spectrum(spectrum, op.boundary_gram, tolerances)
    logger.debug(f"Steklov spectrum ({result.method}): {np.array2string(result.values[:8], precision=6)}")
    return spectrum


def kernel_dimension(spectrum: SteklovSpectrum, tolerances: Optional[Tolerances] = None) -> int:
    """Number of eigenvalues that are numerically zero.

    An eigenvalue counts when it is below kernel_relative times the largest
    computed eigenvalue (or 1). A value equal to ``spectrum.k`` means the
    kernel may extend past the computed range.
    """
    tolerances = tolerances or DEFAULT_CONFIG.tolerances
    scale = max(float(spectrum.values[-1]), 1.0)
    return int(np.sum(np.abs(spectrum.values) <= tolerances.kernel_relative * scale))


def spectral_count(spectrum: SteklovSpectrum, threshold: float) -> int:
    """Number of eigenvalues <= threshold.

    Raises:
        RangeError: If the spectrum was truncated before passing the threshold.
    """
    if not spectrum.complete and float(spectrum.values[-1]) <= threshold:
        raise RangeError(
            f"threshold {threshold} is beyond the computed range (largest eigenvalue {spectrum.values[-1]:.6g}); "
            f"request more than {spectrum.k} eigenpairs",
            "spectral",
            "spectral_count",
        )
    return int(np.sum(spectrum.values <= threshold))


def eigensolver_agreement(op: DtnOperator, k: int, solver: Optional[SolverSettings] = None) -> float:
    """Max relative difference between dense and Lanczos eigenvalues (lam_0 compared absolutely)."""
    dense = steklov_spectrum(op, k, method="dense", solver=solver)
    lanczos = steklov_spectrum(op, k, method="lanczos", solver=solver)
    scale = np.maximum(np.abs(dense.values), 1.0)
    return float(np.max(np.abs(dense.values - lanczos.values) / scale))


def rayleigh_quotient(numerator, denominator, u: np.ndarray) -> float:
    return float((u @ (numerator @ u)) / (u @ (denominator @ u)))


def _verify(report: ConstantReport, numerator, denominator, tolerances: Tolerances, inverse: bool = False) -> None:
    q = rayleigh_quotient(numerator, denominator, report.vector)
    q = 1.0 / q if inverse else q
    if abs(q - report.value) > tolerances.rayleigh * abs(report.value):
        raise NumericError(
            f"{report.problem}: constant {report.value!r} differs from the Rayleigh quotient {q!r} of its vector",
            op=report.problem,
        )


def _max_boundary_quotient(A: sp.spmatrix, Bsel: sp.spmatrix, free: np.ndarray, support: np.ndarray, op_name: str):
    """sup of u^T Bsel u / u^T A u over u vanishing off ``free``.

    Free vertices outside ``support`` are eliminated through a Schur
    complement of the SPD matrix A; the remaining dense pencil is solved for
    its largest eigenvalue.
    """
    A = sp.csr_matrix(A)
    others = np.setdiff1d(free, support, assume_unique=True)
    a_ss = A[support][:, support].toarray()
    if len(others):
        try:
            factor = splu(sp.csc_matrix(A[others][:, others]))
        except RuntimeError as e:
            raise FactorizationError(f"eliminated block is singular: {e}", "spectral", op_name) from e
        x = factor.solve(A[others][:, support].toarray())
        schur = a_ss - np.asarray(A[support][:, others] @ x)
    else:
        x = np.zeros((0, len(support)))
        schur = a_ss
    schur = 0.5 * (schur + schur.T)
    b_ss = Bsel[support][:, support].toarray()
    m = len(support)
    try:
        values, vectors = la.eigh(b_ss, schur, subset_by_index=[m - 1, m - 1])
    except la.LinAlgError as e:
        raise NumericError(f"reduced pencil is not definite: {e}", op=op_name) from e
    y = vectors[:, 0]
    u = np.zeros(A.shape[0])
    u[support] = y
    if len(others):
        u[others] = -(x @ y)
    return float(values[0]), u


def trace_constant(
    K: sp.spmatrix, M: sp.spmatrix, B: BoundaryMass, level: int = 0, tolerances: Optional[Tolerances] = None
) -> ConstantReport:
    """Smallest c with |Tr u|^2 <= c (|grad u|^2 + |u|^2): largest eigenvalue of B versus K + M."""
    tolerances = tolerances or DEFAULT_CONFIG.tolerances
    A = (K + M).tocsr()
    free = np.arange(A.shape[0])
    value, u = _max_boundary_quotient(A, B.consistent, free, B.support, "trace_constant")
    report = ConstantReport(value=value, vector=u, problem="trace_constant", level=level)
    _verify(report, B.consistent, A, tolerances)
    return report


def seminorm_trace_constant(
    op: DtnOperator, level: int = 0, tolerances: Optional[Tolerances] = None
) -> ConstantReport:
    """Smallest c with |Tr u|^2 <= c |grad u|^2 for boundary-mean-zero u.

    The constant direction is deflated from the boundary pencil (B, S); the
    value is the reciprocal of the spectral gap.
    """
    tolerances = tolerances or DEFAULT_CONFIG.tolerances
    if op.schur is None:
        raise NumericError("seminorm trace constant needs the formed Schur complement", op="seminorm_trace_constant")
    gram = op.boundary_gram.toarray()
    weights = gram @ np.ones(op.size)
    basis = la.null_space(weights[None, :])
    s_red = basis.T @ op.schur @ basis
    g_red = basis.T @ gram @ basis
    m = basis.shape[1]
    try:
        values, vectors = la.eigh(g_red, 0.5 * (s_red + s_red.T), subset_by_index=[m - 1, m - 1])
    except la.LinAlgError as e:
        raise NumericError(f"deflated Steklov pencil is not definite: {e}", op="seminorm_trace_constant") from e
    phi = basis @ vectors[:, 0]
    u = op.extend(phi)
    report = ConstantReport(value=float(values[0]), vector=u, problem="seminorm_trace_constant", level=level)
    _verify(report, op.bmass.consistent, op.stiffness, tolerances)
    return report


def grounded_trace_quotient(
    K: sp.spmatrix,
    M: sp.spmatrix,
    B_selected: BoundaryMass,
    grounded: Sequence[int],
    level: int = 0,
    tolerances: Optional[Tolerances] = None,
) -> ConstantReport:
    """sup of |Tr u|^2_selected / |u|^2_H1 over u vanishing on the grounded vertices.

    Raises:
        ParameterError: If the grounded set is empty, covers every vertex, or
            leaves no selected boundary vertex free.
    """
    tolerances = tolerances or DEFAULT_CONFIG.tolerances
    n = K.shape[0]
    grounded = np.unique(np.asarray(grounded, dtype=np.int64))
    if len(grounded) == 0 or len(grounded) >= n:
        raise ParameterError("grounded set must be nonempty and proper", "spectral", "grounded_trace_quotient")
    free = np.setdiff1d(np.arange(n), grounded, assume_unique=True)
    support = np.intersect1d(B_selected.support, free, assume_unique=True)
    if len(support) == 0:
        raise ParameterError(
            "reduced space is empty: every selected boundary vertex is grounded", "spectral", "grounded_trace_quotient"
        )
    A = (K + M).tocsr()
    value, u = _max_boundary_quotient(A, B_selected.consistent, free, support, "grounded_trace_quotient")
    report = ConstantReport(value=value, vector=u, problem="grounded_trace_quotient", level=level)
    _verify(report, B_selected.consistent, A, tolerances)
    return report


def poincare_constant(
    K: sp.spmatrix,
    M: sp.spmatrix,
    level: int = 0,
    solver: Optional[SolverSettings] = None,
    tolerances: Optional[Tolerances] = None,
) -> ConstantReport:
    """Smallest c with |u - mean(u)|^2 <= c |grad u|^2: 1 / second eigenvalue of (K, M)."""
    tolerances = tolerances or DEFAULT_CONFIG.tolerances
    result = smallest_eigenpairs(K, M, 2, solver, tolerances, op="poincare_constant")
    mu = float(result.values[1])
    if mu <= 0:
        raise NumericError(f"second Neumann eigenvalue {mu:.3e} is not positive; is the mesh connected?")
    report = ConstantReport(value=1.0 / mu, vector=result.vectors[:, 1], problem="poincare_constant", level=level)
    _verify(report, K, M, tolerances, inverse=True)
    return report


def mazya_constant(
    K: sp.spmatrix,
    M: sp.spmatrix,
    B: BoundaryMass,
    level: int = 0,
    solver: Optional[SolverSettings] = None,
    tolerances: Optional[Tolerances] = None,
) -> ConstantReport:
    """Smallest c_M with |u|^2 <= c_M (|grad u|^2 + |Tr u|^2): 1 / lowest eigenvalue of (K + B, M)."""
    tolerances = tolerances or DEFAULT_CONFIG.tolerances
    A = (K + B.consistent).tocsr()
    result: EigenResult = smallest_eigenpairs(A, M, 1, solver, tolerances, op="mazya_constant")
    mu = float(result.values[0])
    if mu <= 0:
        raise NumericError(f"lowest eigenvalue of (K + B, M) is {mu:.3e}, expected > 0", op="mazya_constant")
    report = ConstantReport(value=1.0 / mu, vector=result.vectors[:, 0], problem="mazya_constant", level=level)
    _verify(report, A, M, tolerances, inverse=True)
    return report
