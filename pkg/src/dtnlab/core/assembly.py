"""P1 finite element assembly.

Closed-form element integrals for linear triangles: stiffness (the Dirichlet
form), domain mass, edgewise boundary mass in consistent and lumped form,
and the Robin combination ``K - beta * B``. Element blocks are accumulated
into a coordinate buffer and compressed to CSR with sorted indices.
"""

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

from ..errors import AssemblyError
from ..logging import get_logger
from .mesh import Mesh, signed_areas

logger = get_logger()

_MASS_TEMPLATE = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


@dataclass(frozen=True, eq=False)
class BoundaryMass:
    """Gram matrix of the boundary L2 inner product on P1 traces.

    Attributes:
        consistent: (nv, nv) CSR matrix built from edge blocks len/6 [[2,1],[1,2]].
        lumped: (nv,) weights, half the selected incident edge lengths per vertex.
        support: sorted vertex indices touched by the selected edges.
        total: sum of the selected edge lengths.
    """

    consistent: sp.csr_matrix
    lumped: np.ndarray
    support: np.ndarray
    total: float


def _compress(n: int, triangles: np.ndarray, blocks: np.ndarray) -> sp.csr_matrix:
    rows = np.repeat(triangles, triangles.shape[1], axis=1).ravel()
    cols = np.tile(triangles, (1, triangles.shape[1])).ravel()
    matrix = sp.coo_matrix((blocks.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    # duplicate summation order may differ between (i, j) and (j, i)
    matrix = ((matrix + matrix.T) * 0.5).tocsr()
    matrix.sum_duplicates()
    matrix.sort_indices()
    return matrix


def _checked_areas(mesh: Mesh) -> np.ndarray:
    areas = signed_areas(mesh.vertices, mesh.triangles)
    bad = np.flatnonzero(areas <= 0.0)
    if len(bad):
        t = int(bad[0])
        raise AssemblyError(f"triangle {t} is degenerate (signed area {areas[t]!r})", triangle=t)
    return areas


def element_stiffness(points: np.ndarray) -> np.ndarray:
    """Stiffness blocks of triangles given as (m, 3, 2) vertex coordinates."""
    x, y = points[..., 0], points[..., 1]
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    area = 0.5 * (b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0])
    return (np.einsum("ti,tj->tij", b, b) + np.einsum("ti,tj->tij", c, c)) / (4.0 * area)[:, None, None]


def stiffness(mesh: Mesh) -> sp.csr_matrix:
    """Assemble the Dirichlet form K with K_ij = integral of grad phi_i . grad phi_j.

    Raises:
        AssemblyError: If a triangle has non-positive area.
    """
    _checked_areas(mesh)
    blocks = element_stiffness(mesh.vertices[mesh.triangles])
    matrix = _compress(mesh.n_vertices, mesh.triangles, blocks)
    logger.debug(f"Assembled stiffness: n={mesh.n_vertices}, nnz={matrix.nnz}")
    return matrix


def mass(mesh: Mesh) -> sp.csr_matrix:
    """Assemble the consistent domain mass matrix."""
    areas = _checked_areas(mesh)
    blocks = areas[:, None, None] * _MASS_TEMPLATE[None, :, :]
    return _compress(mesh.n_vertices, mesh.triangles, blocks)


def boundary_mass(
    mesh: Mesh, component: Optional[int] = None, segment: Optional[Union[int, Sequence[int]]] = None
) -> BoundaryMass:
    """Assemble the boundary Gram matrix over all or selected boundary edges.

    Args:
        mesh: Source mesh.
        component: Restrict to one boundary loop.
        segment: Restrict to one side label or a list of them (e.g. the two
            slanted sides of a tooth).

    Raises:
        TagError: If a tag does not exist on the mesh.
    """
    mask = np.ones(mesh.n_boundary_edges, dtype=bool)
    if component is not None:
        mesh.component_vertices(component)
        mask &= mesh.component_tags == component
    if segment is not None:
        segments = [segment] if isinstance(segment, (int, np.integer)) else list(segment)
        for tag in segments:
            mesh.segment_vertices(tag)
        mask &= np.isin(mesh.segment_tags, segments)
    edges = mesh.boundary_edges[mask]
    lengths = mesh.edge_lengths()[mask]
    blocks = lengths[:, None, None] * (np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0)[None, :, :]
    consistent = _compress(mesh.n_vertices, edges, blocks)
    lumped = np.zeros(mesh.n_vertices)
    np.add.at(lumped, edges[:, 0], 0.5 * lengths)
    np.add.at(lumped, edges[:, 1], 0.5 * lengths)
    return BoundaryMass(
        consistent=consistent,
        lumped=lumped,
        support=np.unique(edges),
        total=float(np.sum(lengths)),
    )


def robin_form(
    mesh: Mesh,
    beta: float,
    K: Optional[sp.csr_matrix] = None,
    B: Optional[BoundaryMass] = None,
) -> sp.csr_matrix:
    """Matrix of the Robin form a_beta(u, v) = l(u, v) - beta * (u, v)_boundary."""
    K = stiffness(mesh) if K is None else K
    B = boundary_mass(mesh) if B is None else B
    return (K - beta * B.consistent).tocsr()


def quadratic_form(matrix, u: np.ndarray) -> float:
    return float(u @ (matrix @ u))


def symmetry_defect(matrix) -> float:
    """Max |A - A^T| relative to max |A|."""
    dense_max = abs(matrix).max() if matrix.nnz else 0.0
    if dense_max == 0.0:
        return 0.0
    diff = matrix - matrix.T
    return float(abs(diff).max() / dense_max) if diff.nnz else 0.0


def interpolate(mesh: Mesh, func: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> np.ndarray:
    """Nodal interpolant of a function of (x, y)."""
    values = func(mesh.vertices[:, 0], mesh.vertices[:, 1])
    return np.broadcast_to(np.asarray(values, dtype=float), (mesh.n_vertices,)).copy()
