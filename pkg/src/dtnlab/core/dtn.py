"""Dirichlet-to-Neumann operator as a boundary Schur complement.

Interior unknowns are eliminated from the stiffness matrix once; the sparse
LU factorization of the interior block is kept on the operator and reused
for every harmonic extension and matrix-free application.
"""

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import LinearOperator, splu

from ..config import DEFAULT_CONFIG, SolverSettings, Tolerances
from ..errors import FactorizationError, NumericError, PreconditionError, TopologyError
from ..logging import get_logger
from .assembly import BoundaryMass, symmetry_defect
from .eigen import matrix_norm
from .mesh import Mesh

logger = get_logger()


def _factorize(matrix: sp.spmatrix, what: str, op: str):
    try:
        return splu(sp.csc_matrix(matrix))
    except RuntimeError as e:
        raise FactorizationError(f"{what} is singular: {e}", "dtn", op) from e


@dataclass(frozen=True, eq=False)
class DtnOperator:
    """Discrete DtN operator on the boundary vertices of a mesh.

    Attributes:
        boundary: Sorted boundary vertex indices (the boundary index set).
        interior: Remaining vertex indices.
        schur: Dense Schur complement S, or None in apply-only mode.
        bmass: Boundary mass over all boundary edges.
        stiffness: Full stiffness matrix K.
        interior_factor: SuperLU handle of K_II (None without interior vertices).
    """

    boundary: np.ndarray
    interior: np.ndarray
    schur: Optional[np.ndarray]
    bmass: BoundaryMass
    stiffness: sp.csr_matrix
    interior_factor: object
    boundary_gram: sp.csc_matrix
    boundary_gram_factor: object

    @property
    def size(self) -> int:
        return int(len(self.boundary))

    @property
    def total_measure(self) -> float:
        return self.bmass.total

    @property
    def lumped(self) -> np.ndarray:
        return self.bmass.lumped[self.boundary]

    def _k(self, rows: np.ndarray, cols: np.ndarray) -> sp.csr_matrix:
        return self.stiffness[rows][:, cols]

    def extend(self, phi: np.ndarray) -> np.ndarray:
        """Discrete harmonic extension of boundary values to all vertices."""
        phi = np.asarray(phi, dtype=float)
        u = np.zeros(self.stiffness.shape[0], dtype=float)
        u[self.boundary] = phi
        if len(self.interior):
            rhs = -(self._k(self.interior, self.boundary) @ phi)
            u[self.interior] = self.interior_factor.solve(rhs)
        return u

    def schur_apply(self, phi: np.ndarray) -> np.ndarray:
        """S phi, from the dense matrix when formed, matrix-free otherwise."""
        phi = np.asarray(phi, dtype=float)
        if self.schur is not None:
            return self.schur @ phi
        u = self.extend(phi)
        return np.asarray(self.stiffness[self.boundary] @ u)

    def gram_solve(self, rhs: np.ndarray) -> np.ndarray:
        return self.boundary_gram_factor.solve(np.asarray(rhs, dtype=float))

    def as_operator(self) -> LinearOperator:
        n = self.size
        return LinearOperator((n, n), matvec=self.schur_apply, dtype=float)

    def shifted_inverse(self, sigma: float) -> LinearOperator:
        """Operator applying (S - sigma B)^-1 through one full sparse solve.

        The full system [[K_II, K_IG], [K_GI, K_GG - sigma B_GG]] is
        factorized; its boundary block of the solution is the answer.
        """
        full = (self.stiffness - sigma * self.bmass.consistent).tocsc()
        factor = _factorize(full, f"K - {sigma} B", "shifted_inverse")
        n_full = full.shape[0]
        boundary = self.boundary

        def solve(r: np.ndarray) -> np.ndarray:
            rhs = np.zeros(n_full)
            rhs[boundary] = r
            return factor.solve(rhs)[boundary]

        n = self.size
        return LinearOperator((n, n), matvec=solve, dtype=float)


def check_connected(mesh: Mesh, op: str = "build_dtn") -> None:
    """Raise TopologyError unless the triangles form one connected piece."""
    tri = mesh.triangles
    rows = np.concatenate([tri[:, 0], tri[:, 1], tri[:, 2]])
    cols = np.concatenate([tri[:, 1], tri[:, 2], tri[:, 0]])
    graph = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(mesh.n_vertices, mesh.n_vertices))
    count, _ = connected_components(graph, directed=False)
    if count != 1:
        raise TopologyError(f"mesh has {count} connected components; a connected domain is required", "dtn", op)


def build_dtn(
    mesh: Mesh,
    K: sp.csr_matrix,
    B: BoundaryMass,
    form_schur: Optional[bool] = None,
    solver: Optional[SolverSettings] = None,
    tolerances: Optional[Tolerances] = None,
) -> DtnOperator:
    """Eliminate the interior and build the DtN operator.

    Args:
        mesh: Connected mesh.
        K: Stiffness matrix of ``mesh``.
        B: Boundary mass over all boundary edges.
        form_schur: Form the dense Schur complement. Defaults to True up to
            ``solver.dense_boundary_limit`` boundary vertices.
        solver: Solver settings.
        tolerances: Tolerances for the constant-annihilation check.

    Raises:
        TopologyError: If the mesh is disconnected.
        FactorizationError: If the interior block is singular.
        NumericError: If S 1 is not zero within tolerance.
    """
    solver = solver or DEFAULT_CONFIG.solver
    tolerances = tolerances or DEFAULT_CONFIG.tolerances
    check_connected(mesh)
    K = sp.csr_matrix(K)
    asymmetry = symmetry_defect(K)
    if asymmetry > tolerances.symmetry:
        raise NumericError(
            f"stiffness matrix asymmetry {asymmetry:.3e} exceeds {tolerances.symmetry:.1e}", module="dtn", op="build_dtn"
        )
    boundary = mesh.boundary_vertices
    interior = mesh.interior_vertices
    if not np.array_equal(B.support, boundary):
        raise NumericError("boundary mass must cover every boundary edge", module="dtn", op="build_dtn")
    if form_schur is None:
        form_schur = len(boundary) <= solver.dense_boundary_limit

    start = time.perf_counter()
    factor = _factorize(K[interior][:, interior], "interior stiffness block", "build_dtn") if len(interior) else None
    gram = sp.csc_matrix(B.consistent[boundary][:, boundary])
    gram_factor = _factorize(gram, "boundary Gram matrix", "build_dtn")

    schur = None
    if form_schur:
        k_gg = K[boundary][:, boundary].toarray()
        if factor is not None:
            k_ig = K[interior][:, boundary].toarray()
            x = factor.solve(k_ig)
            schur = k_gg - np.asarray(K[boundary][:, interior] @ x)
        else:
            schur = k_gg
        schur = 0.5 * (schur + schur.T)

    op = DtnOperator(
        boundary=boundary,
        interior=interior,
        schur=schur,
        bmass=B,
        stiffness=K,
        interior_factor=factor,
        boundary_gram=gram,
        boundary_gram_factor=gram_factor,
    )
    ones = np.ones(len(boundary))
    defect = float(np.linalg.norm(op.schur_apply(ones), np.inf))
    scale = matrix_norm(schur) if schur is not None else matrix_norm(K)
    if defect > tolerances.schur_constant * max(scale, 1e-300):
        raise NumericError(
            f"|S 1| = {defect:.3e} exceeds {tolerances.schur_constant:.1e} * |S|", module="dtn", op="build_dtn"
        )
    logger.debug(
        f"DtN operator: |boundary|={len(boundary)}, |interior|={len(interior)}, "
        f"dense={form_schur}, built in {time.perf_counter() - start:.3f}s"
    )
    return op


def harmonic_extension(
    mesh: Mesh,
    K: sp.csr_matrix,
    phi: np.ndarray,
    op: Optional[DtnOperator] = None,
    tolerances: Optional[Tolerances] = None,
) -> np.ndarray:
    """Nodal vector equal to phi on the boundary with (K u)_i = 0 at interior vertices.

    Reuses the factorization of ``op`` when given.

    Raises:
        NumericError: If the interior residual exceeds
            ``harmonic_residual`` relative to |K| |phi|.
    """
    tolerances = tolerances or DEFAULT_CONFIG.tolerances
    phi = np.asarray(phi, dtype=float)
    boundary = mesh.boundary_vertices
    if len(phi) != len(boundary):
        raise NumericError(
            f"boundary field has {len(phi)} values for {len(boundary)} boundary vertices",
            module="dtn",
            op="harmonic_extension",
        )
    interior = mesh.interior_vertices
    K = sp.csr_matrix(K)
    if op is not None:
        u = op.extend(phi)
    else:
        u = np.zeros(mesh.n_vertices)
        u[boundary] = phi
        if len(interior):
            factor = _factorize(K[interior][:, interior], "interior stiffness block", "harmonic_extension")
            u[interior] = factor.solve(-(K[interior][:, boundary] @ phi))
    if len(interior):
        residual = float(np.max(np.abs(K[interior] @ u)))
        scale = matrix_norm(K) * max(float(np.max(np.abs(phi), initial=0.0)), 1e-300)
        if residual > tolerances.harmonic_residual * scale:
            raise NumericError(
                f"harmonic extension residual {residual:.3e} exceeds {tolerances.harmonic_residual:.1e} * |K| |phi|",
                module="dtn",
                op="harmonic_extension",
            )
    return u


def dtn_apply(op: DtnOperator, phi: np.ndarray) -> np.ndarray:
    """B^-1 S phi: the flux of the harmonic extension as an L2 boundary field."""
    return op.gram_solve(op.schur_apply(phi))


def weak_normal_derivative(
    mesh: Mesh,
    K: sp.csr_matrix,
    M: sp.csr_matrix,
    B: BoundaryMass,
    u: np.ndarray,
    f: np.ndarray,
    tolerances: Optional[Tolerances] = None,
) -> np.ndarray:
    """Boundary field psi with (K u - M f) restricted to the boundary = B psi.

    ``f`` is the nodal field of -Laplace(u), so psi satisfies the discrete
    Green identity ``l(u, v) - (f, v) = (psi, v)_boundary`` for every nodal
    test function v.

    Raises:
        PreconditionError: If K u - M f does not vanish at interior vertices.
    """
    tolerances = tolerances or DEFAULT_CONFIG.tolerances
    u = np.asarray(u, dtype=float)
    f = np.asarray(f, dtype=float)
    residual = K @ u - M @ f
    interior = mesh.interior_vertices
    boundary = mesh.boundary_vertices
    scale = matrix_norm(K) * np.max(np.abs(u), initial=0.0) + matrix_norm(M) * np.max(np.abs(f), initial=0.0)
    interior_norm = float(np.max(np.abs(residual[interior]), initial=0.0))
    if interior_norm > tolerances.interior_residual * max(scale, 1e-300):
        raise PreconditionError("interior residual of K u - M f does not vanish", interior_norm)
    gram = sp.csc_matrix(B.consistent[boundary][:, boundary])
    return _factorize(gram, "boundary Gram matrix", "weak_normal_derivative").solve(residual[boundary])
