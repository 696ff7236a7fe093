from pathlib import Path
from typing import Tuple

import pytest
import scipy.sparse as sp

from dtnlab.core.assembly import BoundaryMass, boundary_mass, mass, stiffness
from dtnlab.core.dtn import DtnOperator, build_dtn
from dtnlab.core.geometry import Comb, CombLayout, PolygonalAnnulus, PolygonalDisk, Rectangle, Tooth
from dtnlab.core.mesh import Mesh, build_domain

Matrices = Tuple[sp.csr_matrix, sp.csr_matrix, BoundaryMass]


@pytest.fixture
def coarse_square() -> Mesh:
    """Unit square with 2 x 2 cells (9 vertices, 8 triangles)."""
    return build_domain(Rectangle(1.0, 1.0), 0.5)


@pytest.fixture
def unit_square() -> Mesh:
    """Unit square with 4 x 4 cells."""
    return build_domain(Rectangle(1.0, 1.0), 0.25)


@pytest.fixture
def square_matrices(unit_square: Mesh) -> Matrices:
    """Stiffness, mass and boundary mass of the 4 x 4 unit square."""
    return stiffness(unit_square), mass(unit_square), boundary_mass(unit_square)


@pytest.fixture
def square_dtn(unit_square: Mesh, square_matrices: Matrices) -> DtnOperator:
    """DtN operator of the 4 x 4 unit square with the dense Schur complement."""
    K, _, B = square_matrices
    return build_dtn(unit_square, K, B, form_schur=True)


@pytest.fixture
def tooth() -> Mesh:
    """Tooth(a=1/2) with the minimal four intervals per side."""
    return build_domain(Tooth(0.5), 0.5)


@pytest.fixture
def small_disk() -> Mesh:
    """Coarse 32-gon disk."""
    return build_domain(PolygonalDisk(1.0, 32), 0.25)


@pytest.fixture
def annulus() -> Mesh:
    """Coarse polygonal annulus; two boundary components."""
    return build_domain(PolygonalAnnulus(0.5, 1.0, 16), 0.25)


@pytest.fixture
def small_comb() -> Mesh:
    """Geometric comb with two teeth."""
    return build_domain(Comb(2), 0.25)


@pytest.fixture
def uniform_comb() -> Mesh:
    """Uniform comb with four teeth of height 1/4."""
    return build_domain(Comb(4, CombLayout.UNIFORM, 0.25), 0.25)


@pytest.fixture
def temp_workspace(tmp_path: Path) -> Path:
    """Create a temporary workspace directory.

    Returns:
        Path to workspace directory
    """
    workspace = tmp_path / "workspace"
    workspace.mkdir()
    return workspace
