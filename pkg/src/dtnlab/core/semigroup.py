"""Boundary semigroup S_t = exp(-t D) by spectral calculus.

Two representations are kept:

- the B-orthonormal Steklov decomposition, used for evolution, the
  equilibrium projection and operator-norm gaps;
- the lumped-measure representation, the nodal matrix of exp(-t L^-1 S)
  with L the lumped boundary weights. It is similar to a symmetric matrix
  through L^(1/2) and is the one read entrywise by the Markov, positivity
  and irreducibility probes.

Kernel modes are replaced by exact normalized constants so that S_t 1 = 1
and mass conservation hold to rounding.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from ..config import DEFAULT_CONFIG, SolverSettings, Tolerances
from ..errors import NumericError, ParameterError, TruncationError
from ..logging import get_logger
from .dtn import DtnOperator
from .spectral import SteklovSpectrum, steklov_spectrum

logger = get_logger()


@dataclass(frozen=True)
class EquilibriumProjection:
    """P f = (integral of f over the boundary / total measure) 1."""

    weights: np.ndarray
    total: float

    def apply(self, phi: np.ndarray) -> np.ndarray:
        return np.full(len(self.weights), float(self.weights @ np.asarray(phi, dtype=float)) / self.total)


@dataclass(frozen=True)
class GapReport:
    t: float
    norm: float
    closed_form: float

    @property
    def ratio(self) -> float:
        return self.norm / self.closed_form


@dataclass(frozen=True)
class MarkovReport:
    t: float
    min_entry: float
    max_row_sum_deviation: float
    symmetry_defect: float
    positive: bool


@dataclass(frozen=True)
class IrreducibilityVerdict:
    irreducible: bool
    blocks: List[np.ndarray]
    kernel_dimension: int

    @property
    def consistent(self) -> bool:
        """Irreducible exactly when the generator kernel is one-dimensional."""
        return self.irreducible == (self.kernel_dimension == 1)


@dataclass(frozen=True)
class LpReport:
    """Measure-weighted operator norms of the lumped S_t and of S_t - P."""

    t: float
    norm_1to1: float
    norm_inf_to_inf: float
    gap_1to1: float
    gap_inf_to_inf: float


@dataclass(frozen=True, eq=False)
class SpectralSemigroup:
    """Eigendecomposition-backed semigroup on boundary fields.

    Attributes:
        values: Ascending eigenvalues; kernel values are exact zeros.
        vectors: B-orthonormal eigenvectors as columns.
        gram: Consistent boundary Gram matrix B.
        lumped: Lumped boundary weights (row sums of B).
        generator: Dense Schur complement S, needed for the lumped representation.
        complete: True when every mode is present.
        kernel_size: Number of leading kernel modes.
    """

    values: np.ndarray
    vectors: np.ndarray
    gram: sp.csr_matrix
    lumped: np.ndarray
    generator: Optional[np.ndarray]
    complete: bool
    kernel_size: int
    tolerances: Tolerances = field(default_factory=lambda: DEFAULT_CONFIG.tolerances)

    @property
    def size(self) -> int:
        return int(len(self.lumped))

    @property
    def total(self) -> float:
        return float(np.sum(self.lumped))

    @property
    def gap(self) -> float:
        if self.kernel_size >= len(self.values):
            raise TruncationError("no nonzero eigenvalue in the decomposition", "semigroup", "gap")
        return float(self.values[self.kernel_size])

    @property
    def projection(self) -> EquilibriumProjection:
        return EquilibriumProjection(self.lumped, self.total)

    def b_norm(self, phi: np.ndarray) -> float:
        return float(np.sqrt(max(phi @ (self.gram @ phi), 0.0)))

    @classmethod
    def from_spectrum(
        cls, spectrum: SteklovSpectrum, op: DtnOperator, tolerances: Optional[Tolerances] = None
    ) -> "SpectralSemigroup":
        tolerances = tolerances or DEFAULT_CONFIG.tolerances
        values = np.array(spectrum.values, dtype=float)
        vectors = np.array(spectrum.vectors, dtype=float)
        lumped = op.lumped
        total = float(np.sum(lumped))
        values[0] = 0.0
        vectors[:, 0] = 1.0 / np.sqrt(total)
        return cls(
            values=values,
            vectors=vectors,
            gram=sp.csr_matrix(op.boundary_gram),
            lumped=lumped,
            generator=op.schur,
            complete=spectrum.complete,
            kernel_size=1,
            tolerances=tolerances,
        )

    @classmethod
    def from_operator(
        cls,
        op: DtnOperator,
        solver: Optional[SolverSettings] = None,
        tolerances: Optional[Tolerances] = None,
    ) -> "SpectralSemigroup":
        """Full decomposition up to dense_boundary_limit, truncated beyond."""
        solver = solver or DEFAULT_CONFIG.solver
        k = op.size if op.size <= solver.dense_boundary_limit else min(solver.truncation_modes, op.size - 2)
        spectrum = steklov_spectrum(op, k, solver=solver, tolerances=tolerances)
        return cls.from_spectrum(spectrum, op, tolerances)

    @classmethod
    def direct_sum(cls, a: "SpectralSemigroup", b: "SpectralSemigroup") -> "SpectralSemigroup":
        """Semigroup acting independently on two disjoint boundaries."""
        na, nb = a.size, b.size
        vectors = np.zeros((na + nb, len(a.values) + len(b.values)))
        vectors[:na, : len(a.values)] = a.vectors
        vectors[na:, len(a.values) :] = b.vectors
        values = np.concatenate([a.values, b.values])
        order = np.argsort(values, kind="stable")
        generator = None
        if a.generator is not None and b.generator is not None:
            generator = la.block_diag(a.generator, b.generator)
        return cls(
            values=values[order],
            vectors=vectors[:, order],
            gram=sp.block_diag([a.gram, b.gram], format="csr"),
            lumped=np.concatenate([a.lumped, b.lumped]),
            generator=generator,
            complete=a.complete and b.complete,
            kernel_size=a.kernel_size + b.kernel_size,
            tolerances=a.tolerances,
        )

    def kernel_dimension(self) -> int:
        return self.kernel_size

    def _split(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        ks = self.kernel_size
        return self.vectors[:, :ks], self.vectors[:, ks:], self.values[ks:]

    @cached_property
    def lumped_decomposition(self) -> Tuple[np.ndarray, np.ndarray]:
        """Eigenpairs of L^-1/2 S L^-1/2 with the kernel set exactly."""
        if self.generator is None:
            raise NumericError(
                "lumped representation needs the formed Schur complement", module="semigroup", op="lumped"
            )
        root = np.sqrt(self.lumped)
        sym = self.generator / root[:, None] / root[None, :]
        values, vectors = la.eigh(0.5 * (sym + sym.T))
        ks = self.kernel_size
        values[:ks] = 0.0
        if ks == 1:
            vectors[:, 0] = root / np.sqrt(self.total)
        return values, vectors

    def lumped_matrix(self, t: float) -> np.ndarray:
        """Nodal matrix of S_t in the lumped-measure representation."""
        if t < 0:
            raise ParameterError(f"t must be >= 0, got {t}", "semigroup", "lumped_matrix")
        values, vectors = self.lumped_decomposition
        root = np.sqrt(self.lumped)
        core = (vectors * np.exp(-t * values)[None, :]) @ vectors.T
        return core / root[:, None] * root[None, :]


def evolve(sg: SpectralSemigroup, t: float, phi: np.ndarray) -> np.ndarray:
    """S_t phi = V exp(-t Lambda) V^T B phi.

    Raises:
        ParameterError: If t < 0.
        TruncationError: If the decomposition is truncated and the unresolved
            tail of phi is not damped below the reconstruction tolerance.
    """
    if t < 0:
        raise ParameterError(f"t must be >= 0, got {t}", "semigroup", "evolve")
    phi = np.asarray(phi, dtype=float)
    if len(phi) != sg.size:
        raise ParameterError(f"field has {len(phi)} values, expected {sg.size}", "semigroup", "evolve")
    kernel, modes, values = sg._split()
    resolved = kernel @ (kernel.T @ (sg.gram @ phi))
    rest = phi - resolved
    coeffs = modes.T @ (sg.gram @ rest)
    if not sg.complete:
        tail = rest - modes @ coeffs
        tail_norm = sg.b_norm(tail) * np.exp(-t * float(values[-1]))
        if tail_norm > sg.tolerances.reconstruction * max(sg.b_norm(phi), 1e-300):
            raise TruncationError(
                f"truncated decomposition leaves a tail of B-norm {tail_norm:.3e} at t={t}",
                "semigroup",
                "evolve",
            )
    return resolved + modes @ (np.exp(-t * values) * coeffs)


def equilibrium(projection: EquilibriumProjection, phi: np.ndarray) -> np.ndarray:
    return projection.apply(phi)


def operator_norm_gap(sg: SpectralSemigroup, t: float) -> GapReport:
    """B-operator norm of S_t - P computed from the decomposition.

    The norm is the largest eigenvalue of exp(-t/2 Lambda) W^T B W
    exp(-t/2 Lambda) over the non-kernel modes W, cross-checked against the
    closed form exp(-lam_1 t).

    Raises:
        NumericError: If the two disagree beyond gap_crosscheck.
    """
    if t < 0:
        raise ParameterError(f"t must be >= 0, got {t}", "semigroup", "operator_norm_gap")
    _, modes, values = sg._split()
    if len(values) == 0:
        raise TruncationError("no non-kernel modes available", "semigroup", "operator_norm_gap")
    half = np.exp(-0.5 * t * values)
    overlap = modes.T @ (sg.gram @ modes)
    core = half[:, None] * overlap * half[None, :]
    norm = float(la.eigvalsh(0.5 * (core + core.T))[-1])
    report = GapReport(t=t, norm=norm, closed_form=float(np.exp(-sg.gap * t)))
    if abs(report.ratio - 1.0) > sg.tolerances.gap_crosscheck:
        raise NumericError(
            f"|S_t - P| = {norm!r} disagrees with exp(-lam_1 t) = {report.closed_form!r}",
            module="semigroup",
            op="operator_norm_gap",
        )
    return report


def markov_diagnostics(sg: SpectralSemigroup, t: float) -> MarkovReport:
    """Minimum entry, row-sum defect and symmetry defect of the lumped S_t."""
    matrix = sg.lumped_matrix(t)
    weighted = sg.lumped[:, None] * matrix
    scale = float(np.max(np.abs(weighted))) or 1.0
    report = MarkovReport(
        t=t,
        min_entry=float(np.min(matrix)),
        max_row_sum_deviation=float(np.max(np.abs(matrix.sum(axis=1) - 1.0))),
        symmetry_defect=float(np.max(np.abs(weighted - weighted.T)) / scale),
        positive=bool(np.min(matrix) >= sg.tolerances.markov_min_entry),
    )
    if not report.positive:
        logger.warning(f"lumped S_t has negative entries at t={t}: min {report.min_entry:.3e}")
    if report.max_row_sum_deviation > sg.tolerances.row_sum:
        logger.warning(f"lumped S_t row sums deviate from 1 by {report.max_row_sum_deviation:.3e} at t={t}")
    return report


def irreducibility_probe(sg: SpectralSemigroup, t: float, threshold: Optional[float] = None) -> IrreducibilityVerdict:
    """Strongly connected components of the graph {|S_t[i, j]| > threshold}."""
    threshold = DEFAULT_CONFIG.semigroup.irreducibility_threshold if threshold is None else threshold
    matrix = sg.lumped_matrix(t)
    graph = sp.csr_matrix(np.abs(matrix) > threshold)
    count, labels = connected_components(graph, directed=True, connection="strong")
    blocks = [np.flatnonzero(labels == c) for c in range(count)]
    blocks.sort(key=lambda b: int(b[0]))
    verdict = IrreducibilityVerdict(irreducible=count == 1, blocks=blocks, kernel_dimension=sg.kernel_dimension())
    if not verdict.consistent:
        logger.warning(
            f"irreducibility verdict ({verdict.irreducible}) disagrees with kernel dimension {verdict.kernel_dimension}"
        )
    return verdict


def lp_norms(matrix: np.ndarray, weights: np.ndarray) -> Tuple[float, float]:
    """(1->1, inf->inf) norms of a nodal operator under the measure sum w_i delta_i."""
    absolute = np.abs(matrix)
    one = float(np.max((weights @ absolute) / weights))
    inf = float(np.max(absolute.sum(axis=1)))
    return one, inf


def lp_contractivity_check(sg: SpectralSemigroup, t: float) -> LpReport:
    matrix = sg.lumped_matrix(t)
    one, inf = lp_norms(matrix, sg.lumped)
    projection = np.outer(np.ones(sg.size), sg.lumped) / sg.total
    gap_one, gap_inf = lp_norms(matrix - projection, sg.lumped)
    return LpReport(t=t, norm_1to1=one, norm_inf_to_inf=inf, gap_1to1=gap_one, gap_inf_to_inf=gap_inf)


def decay_curve(sg: SpectralSemigroup, phi: np.ndarray, times: Sequence[float]) -> List[float]:
    """|S_t phi - P phi|_B for each t."""
    target = equilibrium(sg.projection, phi)
    return [sg.b_norm(evolve(sg, t, phi) - target) for t in times]
