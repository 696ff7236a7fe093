"""Trace-map diagnostics on nodal interpolants."""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .assembly import BoundaryMass, boundary_mass, interpolate, mass, stiffness
from .mesh import Mesh

Field = Callable[[np.ndarray, np.ndarray], np.ndarray]


def nodal_trace(mesh: Mesh, u: np.ndarray) -> np.ndarray:
    return np.asarray(u, dtype=float)[mesh.boundary_vertices]


def h1_sigma_norm_sq(
    mesh: Mesh,
    u: np.ndarray,
    K: Optional[sp.spmatrix] = None,
    M: Optional[sp.spmatrix] = None,
    B: Optional[BoundaryMass] = None,
) -> float:
    """|u|^2_{H1} + |Tr u|^2_{L2(boundary)}."""
    u = np.asarray(u, dtype=float)
    K = stiffness(mesh) if K is None else K
    M = mass(mesh) if M is None else M
    B = boundary_mass(mesh) if B is None else B
    return float(u @ (K @ u) + u @ (M @ u) + u @ (B.consistent @ u))


def _edge_quadrature(mesh: Mesh, order: int):
    """Gauss points on every boundary edge: (points (e, q, 2), weights (e, q), barycentric t (q,))."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    t = 0.5 * (nodes + 1.0)
    edges = mesh.boundary_edges
    a = mesh.vertices[edges[:, 0]]
    b = mesh.vertices[edges[:, 1]]
    points = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
    lengths = mesh.edge_lengths()
    return points, 0.5 * lengths[:, None] * weights[None, :], t


def _edge_values(mesh: Mesh, u: np.ndarray, t: np.ndarray) -> np.ndarray:
    edges = mesh.boundary_edges
    u = np.asarray(u, dtype=float)
    return (1.0 - t)[None, :] * u[edges[:, 0], None] + t[None, :] * u[edges[:, 1], None]


def interpolation_trace_error(mesh: Mesh, func: Field, order: int = 4) -> float:
    """L2(boundary) distance between Tr(I_h f) and f restricted to the boundary."""
    points, weights, t = _edge_quadrature(mesh, order)
    exact = func(points[..., 0], points[..., 1])
    approx = _edge_values(mesh, interpolate(mesh, func), t)
    return float(np.sqrt(np.sum(weights * (approx - exact) ** 2)))


def product_rule_defect(mesh: Mesh, f: Field, g: Field, order: int = 4) -> float:
    """L2(boundary) norm of Tr I_h(fg) - Tr I_h f * Tr I_h g."""
    _, weights, t = _edge_quadrature(mesh, order)
    fg = _edge_values(mesh, interpolate(mesh, lambda x, y: f(x, y) * g(x, y)), t)
    prod = _edge_values(mesh, interpolate(mesh, f), t) * _edge_values(mesh, interpolate(mesh, g), t)
    return float(np.sqrt(np.sum(weights * (fg - prod) ** 2)))


@dataclass(frozen=True)
class LatticeDefects:
    positive_part: float
    min_one: float


def lattice_defects(mesh: Mesh, u: np.ndarray) -> LatticeDefects:
    """Nodal defects of Tr(u+) = (Tr u)+ and Tr(u ^ 1) = (Tr u) ^ 1."""
    u = np.asarray(u, dtype=float)
    tr = nodal_trace(mesh, u)
    return LatticeDefects(
        positive_part=float(np.max(np.abs(nodal_trace(mesh, np.maximum(u, 0.0)) - np.maximum(tr, 0.0)))),
        min_one=float(np.max(np.abs(nodal_trace(mesh, np.minimum(u, 1.0)) - np.minimum(tr, 1.0)))),
    )
