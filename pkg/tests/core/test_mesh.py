import math

import numpy as np
import pytest

from dtnlab.core.geometry import Cusp, Parallelogram, PolygonalDisk, Rectangle, Tooth
from dtnlab.core.mesh import (
    Mesh,
    boundary_length,
    build_domain,
    cusp_columns,
    refine,
    refine_times,
    validate_mesh,
)
from dtnlab.errors import ParameterError, TagError, TopologyError


def _left_oriented(mesh: Mesh) -> bool:
    """Every boundary edge appears with the same direction in some triangle."""
    tri = mesh.triangles
    directed = set()
    for a, b, c in tri:
        directed.update({(a, b), (b, c), (c, a)})
    return all((int(a), int(b)) in directed for a, b in mesh.boundary_edges)


def test_square_counts(coarse_square):
    """Test vertex and triangle counts of the 2 x 2 unit square."""
    assert coarse_square.n_vertices == 9
    assert coarse_square.n_triangles == 8
    assert coarse_square.n_boundary_edges == 8
    assert boundary_length(coarse_square) == pytest.approx(4.0)
    assert coarse_square.h == pytest.approx(math.sqrt(0.5))


def test_refine_counts(coarse_square):
    """Test that midpoint refinement quadruples the triangles."""
    fine = refine(coarse_square)
    assert (fine.n_vertices, fine.n_triangles) == (25, 32)
    assert fine.n_boundary_edges == 16
    assert fine.level == 1
    assert fine.h == pytest.approx(coarse_square.h / 2)
    assert boundary_length(fine) == pytest.approx(4.0)


def test_refine_keeps_tags(coarse_square):
    """Test that boundary tags carry over to the split edges."""
    fine = refine_times(coarse_square, 2)
    assert fine.segments == coarse_square.segments
    for tag in coarse_square.segments:
        assert np.sum(fine.segment_tags == tag) == 4 * np.sum(coarse_square.segment_tags == tag)
    assert _left_oriented(fine)


def test_square_sides(unit_square):
    """Test that each side of the square has its own segment tag."""
    assert unit_square.segments == [0, 1, 2, 3]
    for tag in range(4):
        assert boundary_length(unit_square, segment=tag) == pytest.approx(1.0)
    bottom = unit_square.segment_vertices(0)
    assert np.allclose(unit_square.vertices[bottom, 1], 0.0)


def test_positive_areas(unit_square):
    """Test that every triangle is counter-clockwise and the areas sum up."""
    areas = unit_square.areas()
    assert np.all(areas > 0)
    assert np.sum(areas) == pytest.approx(1.0)


def test_boundary_orientation(unit_square, annulus, tooth):
    """Test that boundary edges keep the domain on their left."""
    for mesh in (unit_square, annulus, tooth):
        assert _left_oriented(mesh)


def test_annulus_components(annulus):
    """Test that the annulus has an outer and an inner loop."""
    assert annulus.components == [0, 1]
    outer = boundary_length(annulus, component=0)
    inner = boundary_length(annulus, component=1)
    assert outer > inner
    assert outer + inner == pytest.approx(annulus.domain_spec.boundary_length())


def test_tooth_segments(tooth):
    """Test tooth tags: base 0, right side 1, left side 2."""
    spec = tooth.domain_spec
    assert tooth.segments == [0, 1, 2]
    assert boundary_length(tooth, segment=0) == pytest.approx(2 * spec.a**2)
    slanted = boundary_length(tooth, segment=1) + boundary_length(tooth, segment=2)
    assert slanted == pytest.approx(spec.slanted_length())
    assert np.sum(tooth.areas()) == pytest.approx(spec.area())


def test_comb_teeth_tags(small_comb):
    """Test that each comb tooth carries its own segment tag."""
    spec = small_comb.domain_spec
    assert small_comb.segments == [0, 1, 2]
    assert np.sum(small_comb.areas()) == pytest.approx(spec.area())
    assert boundary_length(small_comb) == pytest.approx(spec.boundary_length())
    assert small_comb.components == [0]


def test_uniform_comb(uniform_comb):
    """Test the uniform comb area and tags."""
    assert uniform_comb.segments == [0, 1, 2, 3, 4]
    assert np.sum(uniform_comb.areas()) == pytest.approx(uniform_comb.domain_spec.area())


def test_disk_and_parallelogram():
    """Test that structured templates match the analytic area."""
    disk = build_domain(PolygonalDisk(1.0, 16), 0.5)
    assert np.sum(disk.areas()) == pytest.approx(disk.domain_spec.area())
    assert disk.segments == [0]
    c = math.sqrt(0.5)
    para = build_domain(Parallelogram((1.0, 0.0), (c, c), 1.0, 1.0), 0.25)
    assert np.sum(para.areas()) == pytest.approx(c)
    assert para.segments == [0, 1, 2, 3]


def test_cusp_mesh():
    """Test the graded cusp mesh and its columns."""
    mesh = build_domain(Cusp(0.5), 0.25)
    assert mesh.segments == [0, 1, 2, 3]
    assert np.sum(mesh.areas()) == pytest.approx(mesh.domain_spec.area(), rel=0.05)
    columns = cusp_columns(0.5, 0.25)
    assert columns[0] == 0.5 and columns[-1] == 1.0
    assert all(b > a for a, b in zip(columns, columns[1:]))


@pytest.mark.parametrize("h", [0.0, -1.0, math.nan, math.inf])
def test_invalid_spacing(h):
    """Test that the mesh size must be a positive real."""
    with pytest.raises(ParameterError):
        build_domain(Rectangle(1.0, 1.0), h)


def test_unknown_tags(unit_square):
    """Test that unknown tags raise TagError."""
    with pytest.raises(TagError):
        unit_square.segment_vertices(7)
    with pytest.raises(TagError):
        boundary_length(unit_square, component=3)


def test_mesh_is_immutable(coarse_square):
    """Test that mesh arrays are read-only."""
    with pytest.raises(ValueError):
        coarse_square.vertices[0, 0] = 5.0


def test_transformed_copies(tooth):
    """Test translated and scaled copies."""
    moved = tooth.translated(1.0, 2.0)
    assert moved.domain_spec is None
    assert np.sum(moved.areas()) == pytest.approx(np.sum(tooth.areas()))
    big = tooth.scaled(2.0)
    assert np.sum(big.areas()) == pytest.approx(4 * np.sum(tooth.areas()))
    with pytest.raises(ParameterError):
        tooth.scaled(0.0)


def test_validate_rejects_clockwise_triangle():
    """Test that a clockwise triangle fails validation."""
    mesh = Mesh(
        vertices=np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
        triangles=np.array([[0, 2, 1]]),
        boundary_edges=np.array([[0, 1], [1, 2], [2, 0]]),
        component_tags=np.zeros(3, dtype=np.int64),
        segment_tags=np.zeros(3, dtype=np.int64),
        domain_spec=None,
        h=1.0,
    )
    with pytest.raises(TopologyError):
        validate_mesh(mesh)


def test_deterministic_build():
    """Test that building the same domain twice gives identical meshes."""
    a = build_domain(Tooth(0.5), 0.1)
    b = build_domain(Tooth(0.5), 0.1)
    assert np.array_equal(a.vertices, b.vertices)
    assert np.array_equal(a.triangles, b.triangles)
    assert np.array_equal(a.boundary_edges, b.boundary_edges)
