"""Robin forms a_beta = l - beta (.,.)_boundary and the beta_0 threshold scan.

In finite dimensions every a_beta is bounded below; the threshold only
reappears asymptotically. The gap gamma_h(beta) = max(0, -lowest eigenvalue of
(K - beta B, M)) is therefore tracked along a sequence of meshes (successive
refinements, or combs with more teeth) and classified by the trend tests.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, cg, splu

from ..config import DEFAULT_CONFIG, DtnlabConfig
from ..errors import FactorizationError, NumericError, ParameterError, RobinRefusal
from ..logging import get_logger
from .assembly import BoundaryMass, boundary_mass, mass, stiffness
from .dtn import weak_normal_derivative
from .eigen import largest_eigenvalue, matrix_norm, smallest_eigenpairs
from .mesh import Mesh
from .trend import Trend, classify, is_diverging

logger = get_logger()


@dataclass(frozen=True)
class RobinReport:
    """Lower-bound gap of a_beta on one mesh."""

    beta: float
    gap: float
    lowest: float
    level: int = 0
    domain: str = ""


@dataclass(frozen=True)
class BetaVerdict:
    beta: float
    gaps: List[float]
    verdict: Trend

    def to_dict(self) -> Dict[str, object]:
        return {"beta": self.beta, "gaps": self.gaps, "verdict": self.verdict.value}


@dataclass(frozen=True)
class BetaZeroEstimate:
    """Per-beta verdicts over a mesh sequence and the bracket they give for beta_0.

    ``interval`` is (largest stable beta, smallest diverging beta); the lower
    end is 0.0 when every beta diverges and the upper end is inf when none does.
    """

    domain: str
    grid: List[BetaVerdict]
    interval: Tuple[float, float]

    @property
    def smallest_diverging(self) -> float:
        return self.interval[1]

    def to_dict(self) -> Dict[str, object]:
        return {
            "domain": self.domain,
            "grid": [entry.to_dict() for entry in self.grid],
            "beta0_interval": list(self.interval),
        }


@dataclass(frozen=True, eq=False)
class RobinSolution:
    """Solution of (K - beta B) u = M f_c with its Green-identity check.

    ``f_c`` equals f unless the pencil is singular at zero, in which case the
    component of f along the null vector is removed (``removed_component``)
    and u is the M-orthogonal representative. ``positivity_shift`` is the
    shift that makes K - beta B + shift M positive definite; the singular
    case solves with the null direction lifted by it.
    """

    u: np.ndarray
    beta: float
    positivity_shift: float
    deflated: bool
    removed_component: float
    interior_residual: float
    boundary_defect: float
    report: RobinReport = field(repr=False)


def lower_bound_gap(
    K: sp.spmatrix,
    M: sp.spmatrix,
    B: BoundaryMass,
    beta: float,
    level: int = 0,
    domain: str = "",
    config: Optional[DtnlabConfig] = None,
) -> RobinReport:
    """gamma_h(beta) = max(0, -lowest eigenvalue of (K - beta B, M))."""
    config = config or DEFAULT_CONFIG
    A = (K - beta * B.consistent).tocsr()
    lower = None
    if beta > 0 and M.shape[0] > config.solver.dense_limit:
        lower = -beta * largest_eigenvalue(B.consistent, M, config.solver) - 1.0
    result = smallest_eigenpairs(A, M, 1, config.solver, config.tolerances, lower_bound=lower, op="lower_bound_gap")
    lowest = float(result.values[0])
    gap = 0.0 if beta <= 0 else max(0.0, -lowest)
    return RobinReport(beta=float(beta), gap=gap, lowest=lowest, level=level, domain=domain)


def is_convex(betas: Sequence[float], gaps: Sequence[float], rtol: float = 1e-8) -> bool:
    """Three-point convexity test of gamma_h on an increasing beta grid."""
    for (b0, g0), (b1, g1), (b2, g2) in zip(
        zip(betas, gaps), zip(betas[1:], gaps[1:]), zip(betas[2:], gaps[2:])
    ):
        chord = g0 + (g2 - g0) * (b1 - b0) / (b2 - b0)
        if g1 > chord + rtol * max(abs(g0), abs(g1), abs(g2), 1.0):
            return False
    return True


def beta_zero_scan(
    meshes: Sequence[Mesh],
    beta_grid: Sequence[float],
    domain: str = "",
    config: Optional[DtnlabConfig] = None,
) -> BetaZeroEstimate:
    """Classify each beta by the trend of gamma_h along a mesh sequence.

    Args:
        meshes: At least three meshes (refinements, or combs with more teeth).
        beta_grid: Boundary weights, any order.
        domain: Descriptor echoed into the estimate.
        config: Trend thresholds and solver settings.

    Returns:
        Verdicts per beta, made monotone (once diverging, every larger beta
        diverges), and the resulting beta_0 bracket.
    """
    config = config or DEFAULT_CONFIG
    if len(meshes) < 3:
        raise ParameterError(f"beta_0 scan needs >= 3 meshes, got {len(meshes)}", "robin", "beta_zero_scan")
    betas = sorted(float(b) for b in beta_grid)
    if not betas:
        raise ParameterError("empty beta grid", "robin", "beta_zero_scan")

    gaps: Dict[float, List[float]] = {beta: [] for beta in betas}
    for level, mesh in enumerate(meshes):
        K, M, B = stiffness(mesh), mass(mesh), boundary_mass(mesh)
        for beta in betas:
            gaps[beta].append(lower_bound_gap(K, M, B, beta, level, domain, config).gap)
        if not is_convex(betas, [gaps[b][-1] for b in betas]):
            logger.warning(f"gamma_h is not convex in beta on mesh {level} of {domain}")

    grid: List[BetaVerdict] = []
    diverged = False
    for beta in betas:
        verdict = Trend.DIVERGING if is_diverging(gaps[beta], config.trend) else classify(gaps[beta], config.trend)
        if verdict is Trend.DRIFTING:
            verdict = Trend.STABLE
        if diverged and verdict is not Trend.DIVERGING:
            logger.warning(f"beta={beta} looked {verdict.value} above a diverging beta; marking it diverging")
            verdict = Trend.DIVERGING
        diverged = diverged or verdict is Trend.DIVERGING
        grid.append(BetaVerdict(beta=beta, gaps=gaps[beta], verdict=verdict))

    stable = [v.beta for v in grid if v.verdict is Trend.STABLE]
    diverging = [v.beta for v in grid if v.verdict is Trend.DIVERGING]
    interval = (max(stable) if stable else 0.0, min(diverging) if diverging else float("inf"))
    return BetaZeroEstimate(domain=domain, grid=grid, interval=interval)


def _lifted_solve(
    A: sp.spmatrix, M: sp.spmatrix, v: np.ndarray, shift: float, rhs: np.ndarray, config: DtnlabConfig
) -> np.ndarray:
    """Solve (A + shift (M v)(M v)^T) u = rhs for rhs M-orthogonal to the null vector v.

    The rank-one term lifts the null direction of A to ``shift``. Conjugate
    gradients run preconditioned by the factor of the shifted pencil
    A + shift M, which is positive definite because the shift exceeds the
    lower-bound gap.
    """
    n = A.shape[0]
    mv = np.asarray(M @ v).ravel()
    try:
        factor = splu(sp.csc_matrix(A + shift * M))
    except RuntimeError as e:
        raise FactorizationError(
            f"shifted pencil K - beta B + {shift:g} M is singular: {e}", "robin", "robin_solve"
        ) from e
    lifted = LinearOperator((n, n), matvec=lambda x: A @ np.ravel(x) + shift * mv * (mv @ np.ravel(x)), dtype=float)
    preconditioner = LinearOperator((n, n), matvec=lambda x: factor.solve(np.ravel(x)), dtype=float)
    u, info = cg(lifted, rhs, rtol=1e-13, atol=0.0, maxiter=config.solver.max_iterations, M=preconditioner)
    if info != 0:
        raise NumericError(f"lifted Robin solve did not converge (info={info})", module="robin", op="robin_solve")
    # drop the residual null-vector component
    return u - float(v @ (M @ u)) * v


def robin_solve(
    mesh: Mesh,
    K: sp.spmatrix,
    M: sp.spmatrix,
    B: BoundaryMass,
    beta: float,
    f: np.ndarray,
    scan: Optional[BetaZeroEstimate] = None,
    config: Optional[DtnlabConfig] = None,
) -> RobinSolution:
    """Solve the Robin problem and verify dnu u = beta Tr u weakly.

    Raises:
        RobinRefusal: If ``scan`` flags beta as diverging.
        NumericError: If the Green identity fails beyond tolerance.
    """
    config = config or DEFAULT_CONFIG
    tol = config.tolerances
    report = lower_bound_gap(K, M, B, beta, config=config)
    if scan is not None and beta >= scan.smallest_diverging:
        raise RobinRefusal(
            f"beta={beta} lies in the diverging range (beta_0 <= {scan.smallest_diverging})", report=report
        )
    f = np.asarray(f, dtype=float)
    A = (K - beta * B.consistent).tocsr()
    scale = matrix_norm(A)
    lowest = smallest_eigenpairs(A, M, 1, config.solver, tol, op="robin_solve")
    mu, v = float(lowest.values[0]), lowest.vectors[:, 0]
    deflated = abs(mu) <= tol.robin_singular * scale
    removed = 0.0
    f_c = f
    shift = report.gap + 1.0
    if deflated:
        removed = float(v @ (M @ f))
        f_c = f - removed * v
        logger.debug(f"Robin pencil singular at beta={beta} (mu={mu:.3e}); lifting the null vector by {shift:g}")
        u = _lifted_solve(A, M, v, shift, np.asarray(M @ f_c), config)
    else:
        try:
            u = splu(sp.csc_matrix(A)).solve(np.asarray(M @ f_c))
        except RuntimeError as e:
            raise FactorizationError(f"K - beta B is singular: {e}", "robin", "robin_solve") from e

    residual = A @ u - M @ f_c
    interior = mesh.interior_vertices
    interior_residual = float(np.max(np.abs(residual[interior]), initial=0.0))
    psi = weak_normal_derivative(mesh, K, M, B, u, f_c, tol)
    expected = beta * u[mesh.boundary_vertices]
    denom = max(
        float(np.max(np.abs(expected), initial=0.0)),
        float(np.max(np.abs(psi), initial=0.0)),
        float(np.max(np.abs(u), initial=0.0)),
    )
    defect = float(np.max(np.abs(psi - expected), initial=0.0)) / denom if denom > 0 else 0.0
    if defect > tol.interior_residual:
        raise NumericError(
            f"Robin Green identity defect {defect:.3e} exceeds {tol.interior_residual:.1e}", module="robin", op="robin_solve"
        )
    return RobinSolution(
        u=u,
        beta=float(beta),
        positivity_shift=shift,
        deflated=deflated,
        removed_component=removed,
        interior_residual=interior_residual,
        boundary_defect=defect,
        report=report,
    )


def robin_eigen_check(
    mesh: Mesh, K: sp.spmatrix, M: sp.spmatrix, B: BoundaryMass, beta: float, config: Optional[DtnlabConfig] = None
) -> float:
    """Relative defect of dnu v = beta v on the boundary for the lowest Robin eigenvector v."""
    config = config or DEFAULT_CONFIG
    A = (K - beta * B.consistent).tocsr()
    result = smallest_eigenpairs(A, M, 1, config.solver, config.tolerances, op="robin_eigen_check")
    mu, v = float(result.values[0]), result.vectors[:, 0]
    psi = weak_normal_derivative(mesh, K, M, B, v, mu * v, config.tolerances)
    expected = beta * v[mesh.boundary_vertices]
    scale = float(np.max(np.abs(expected))) if beta != 0 else 1.0
    return float(np.max(np.abs(psi - expected))) / scale
