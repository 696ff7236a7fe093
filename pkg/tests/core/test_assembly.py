import numpy as np
import pytest

from dtnlab.core.assembly import (
    boundary_mass,
    element_stiffness,
    interpolate,
    mass,
    quadratic_form,
    robin_form,
    stiffness,
    symmetry_defect,
)
from dtnlab.core.mesh import Mesh
from dtnlab.errors import AssemblyError, TagError


def test_reference_element_stiffness():
    """Test the stiffness block of the right reference triangle."""
    block = element_stiffness(np.array([[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]]))[0]
    expected = 0.5 * np.array([[2.0, -1.0, -1.0], [-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]])
    assert np.allclose(block, expected)


def test_stiffness_annihilates_constants(square_matrices):
    """Test that K is symmetric and has the constants in its kernel."""
    K, _, _ = square_matrices
    assert symmetry_defect(K) <= 1e-14
    assert np.max(np.abs(K @ np.ones(K.shape[0]))) < 1e-12
    assert K.has_sorted_indices


def test_stiffness_of_linear_field(unit_square, square_matrices):
    """Test that l(x, x) equals the area for the coordinate field x."""
    K, _, _ = square_matrices
    x = interpolate(unit_square, lambda x, y: x)
    assert quadratic_form(K, x) == pytest.approx(1.0)


def test_mass_integrates_area(square_matrices):
    """Test that 1^T M 1 is the domain area."""
    _, M, _ = square_matrices
    ones = np.ones(M.shape[0])
    assert ones @ (M @ ones) == pytest.approx(1.0)
    assert symmetry_defect(M) <= 1e-14


def test_boundary_mass_totals(square_matrices):
    """Test consistent and lumped boundary mass against the perimeter."""
    _, _, B = square_matrices
    ones = np.ones(B.consistent.shape[0])
    assert B.total == pytest.approx(4.0)
    assert ones @ (B.consistent @ ones) == pytest.approx(4.0)
    assert np.sum(B.lumped) == pytest.approx(4.0)
    assert np.allclose(B.consistent @ ones, B.lumped)


def test_boundary_mass_of_linear_trace(unit_square, square_matrices):
    """Test the boundary L2 norm of x on the unit square."""
    _, _, B = square_matrices
    x = interpolate(unit_square, lambda x, y: x)
    # bottom and top give 1/3 each, the right side 1, the left side 0
    assert quadratic_form(B.consistent, x) == pytest.approx(5.0 / 3.0)


def test_boundary_mass_selection(tooth):
    """Test restricting the boundary mass to the slanted sides of a tooth."""
    slanted = boundary_mass(tooth, segment=[1, 2])
    assert slanted.total == pytest.approx(tooth.domain_spec.slanted_length())
    base = boundary_mass(tooth, segment=0)
    assert base.total == pytest.approx(2 * tooth.domain_spec.a ** 2)
    assert set(base.support) <= set(tooth.boundary_vertices)


def test_boundary_mass_by_component(annulus):
    """Test restricting the boundary mass to the inner loop."""
    inner = boundary_mass(annulus, component=1)
    assert inner.total == pytest.approx(2 * 16 * 0.5 * np.sin(np.pi / 16))


def test_unknown_tag(unit_square):
    """Test that unknown tags raise TagError."""
    with pytest.raises(TagError):
        boundary_mass(unit_square, component=2)
    with pytest.raises(TagError):
        boundary_mass(unit_square, segment=[0, 9])


def test_robin_form(unit_square, square_matrices):
    """Test that the Robin matrix is K - beta B."""
    K, _, B = square_matrices
    R = robin_form(unit_square, 0.5, K, B)
    assert abs(R - (K - 0.5 * B.consistent)).max() == pytest.approx(0.0)
    ones = np.ones(K.shape[0])
    assert quadratic_form(R, ones) == pytest.approx(-2.0)


def test_degenerate_triangle():
    """Test that a zero-area triangle is reported by index."""
    mesh = Mesh(
        vertices=np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [2.0, 0.0]]),
        triangles=np.array([[0, 1, 2], [0, 1, 3]]),
        boundary_edges=np.zeros((0, 2), dtype=np.int64),
        component_tags=np.zeros(0, dtype=np.int64),
        segment_tags=np.zeros(0, dtype=np.int64),
        domain_spec=None,
        h=2.0,
    )
    with pytest.raises(AssemblyError) as exc:
        stiffness(mesh)
    assert exc.value.triangle == 1
    with pytest.raises(AssemblyError):
        mass(mesh)


def test_interpolate_broadcasts_constants(coarse_square):
    """Test that constant functions interpolate to full nodal vectors."""
    values = interpolate(coarse_square, lambda x, y: 3.0)
    assert values.shape == (9,)
    assert np.all(values == 3.0)
