"""Deterministic triangulations of the bundled planar domains.

Meshes are conforming P1 triangulations built from templates: mapped
structured grids (rectangle, parallelogram, tooth), concentric polygon rings
joined by an angular zipper (disk, annulus), graded columns (cusp) and a
balanced dyadic quadtree with glued tooth patches (comb). Boundary edges are
recovered from the triangles, oriented with the domain on their left, split
into closed loops and tagged.

Example:
    ```python
    mesh = build_domain(Rectangle(1.0, 1.0), 0.5)
    mesh.n_vertices, mesh.n_triangles   # (9, 8)
    fine = refine(mesh)                 # (25, 32)
    boundary_length(fine)               # 4.0
    ```
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable, Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from ..config import DEFAULT_CONFIG, MeshSettings
from ..errors import ParameterError, ResolutionError, TagError, TopologyError
from ..logging import get_logger
from .geometry import (
    Comb,
    Cusp,
    DomainSpec,
    Parallelogram,
    PolygonalAnnulus,
    PolygonalDisk,
    Rectangle,
    Tooth,
)

logger = get_logger()

Classifier = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable triangulation with tagged, loop-ordered boundary edges.

    Attributes:
        vertices: (nv, 2) float array of coordinates.
        triangles: (nt, 3) int array, counter-clockwise.
        boundary_edges: (nb, 2) int array, oriented with the domain on the left,
            grouped by component and ordered along each loop.
        component_tags: (nb,) loop index; 0 is the longest loop.
        segment_tags: (nb,) domain-specific side label.
        domain_spec: the generating domain, None for transformed or loaded meshes.
        h: maximum edge length.
        level: number of midpoint refinements applied after construction.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    component_tags: np.ndarray
    segment_tags: np.ndarray
    domain_spec: Optional[DomainSpec]
    h: float
    level: int = 0
    label: str = field(default="")

    def __post_init__(self):
        for name in ("vertices", "triangles", "boundary_edges", "component_tags", "segment_tags"):
            getattr(self, name).setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def n_triangles(self) -> int:
        return int(self.triangles.shape[0])

    @property
    def n_boundary_edges(self) -> int:
        return int(self.boundary_edges.shape[0])

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        """Sorted indices of vertices on the boundary."""
        return np.unique(self.boundary_edges)

    @cached_property
    def interior_vertices(self) -> np.ndarray:
        mask = np.ones(self.n_vertices, dtype=bool)
        mask[self.boundary_vertices] = False
        return np.flatnonzero(mask)

    @property
    def components(self) -> List[int]:
        return sorted(set(int(t) for t in self.component_tags))

    @property
    def segments(self) -> List[int]:
        return sorted(set(int(t) for t in self.segment_tags))

    def edge_lengths(self) -> np.ndarray:
        """Lengths of the boundary edges."""
        d = self.vertices[self.boundary_edges[:, 1]] - self.vertices[self.boundary_edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    def areas(self) -> np.ndarray:
        return signed_areas(self.vertices, self.triangles)

    def segment_vertices(self, segment: int) -> np.ndarray:
        """Sorted vertex indices touched by boundary edges of one segment."""
        if segment not in self.segments:
            raise TagError(f"unknown segment tag {segment}; known {self.segments}", "mesh", "segment_vertices")
        return np.unique(self.boundary_edges[self.segment_tags == segment])

    def component_vertices(self, component: int) -> np.ndarray:
        if component not in self.components:
            raise TagError(
                f"unknown component tag {component}; known {self.components}", "mesh", "component_vertices"
            )
        return np.unique(self.boundary_edges[self.component_tags == component])

    def translated(self, dx: float, dy: float) -> "Mesh":
        """Rigidly translated copy (domain_spec is dropped)."""
        return _transformed(self, self.vertices + np.array([dx, dy]), self.h, f"{self.label}+({dx},{dy})")

    def scaled(self, factor: float) -> "Mesh":
        """Copy scaled about the origin by a positive factor."""
        if not factor > 0:
            raise ParameterError(f"scale factor must be > 0, got {factor}", "mesh", "scaled")
        return _transformed(self, self.vertices * factor, self.h * factor, f"{self.label}*{factor}")


def _transformed(mesh: Mesh, vertices: np.ndarray, h: float, label: str) -> Mesh:
    return Mesh(
        vertices=np.array(vertices, dtype=float),
        triangles=mesh.triangles.copy(),
        boundary_edges=mesh.boundary_edges.copy(),
        component_tags=mesh.component_tags.copy(),
        segment_tags=mesh.segment_tags.copy(),
        domain_spec=None,
        h=float(h),
        level=mesh.level,
        label=label,
    )


def signed_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Signed triangle areas, positive for counter-clockwise triangles."""
    p = vertices[triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def _edge_keys(edges: np.ndarray, n_vertices: int) -> np.ndarray:
    lo = np.minimum(edges[:, 0], edges[:, 1]).astype(np.int64)
    hi = np.maximum(edges[:, 0], edges[:, 1]).astype(np.int64)
    return lo * n_vertices + hi


def _directed_edges(triangles: np.ndarray) -> np.ndarray:
    return np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])


def max_edge_length(vertices: np.ndarray, triangles: np.ndarray) -> float:
    edges = _directed_edges(triangles)
    d = vertices[edges[:, 1]] - vertices[edges[:, 0]]
    return float(np.max(np.hypot(d[:, 0], d[:, 1])))


def _boundary_loops(vertices: np.ndarray, triangles: np.ndarray) -> List[np.ndarray]:
    """Oriented boundary edges grouped into closed loops, longest first."""
    n = len(vertices)
    directed = _directed_edges(triangles)
    keys = _edge_keys(directed, n)
    unique, inverse, counts = np.unique(keys, return_inverse=True, return_counts=True)
    if np.any(counts > 2):
        raise TopologyError("edge shared by more than two triangles", "mesh", "validate")
    directed_keys = directed[:, 0].astype(np.int64) * n + directed[:, 1]
    if len(np.unique(directed_keys)) != len(directed_keys):
        raise TopologyError("inconsistent triangle orientation across an interior edge", "mesh", "validate")
    boundary = directed[counts[inverse.ravel()] == 1]

    outgoing: Dict[int, int] = {}
    for idx, (a, _) in enumerate(boundary):
        if int(a) in outgoing:
            raise TopologyError(f"boundary pinches at vertex {int(a)}", "mesh", "validate")
        outgoing[int(a)] = idx

    visited = np.zeros(len(boundary), dtype=bool)
    loops: List[np.ndarray] = []
    for start in range(len(boundary)):
        if visited[start]:
            continue
        loop = []
        idx = start
        while not visited[idx]:
            visited[idx] = True
            loop.append(boundary[idx])
            nxt = outgoing.get(int(boundary[idx][1]))
            if nxt is None:
                raise TopologyError("boundary edges do not close into loops", "mesh", "validate")
            idx = nxt
        if idx != start:
            raise TopologyError("boundary loop does not return to its start", "mesh", "validate")
        loops.append(np.array(loop, dtype=np.int64))

    def loop_length(loop: np.ndarray) -> float:
        d = vertices[loop[:, 1]] - vertices[loop[:, 0]]
        return float(np.sum(np.hypot(d[:, 0], d[:, 1])))

    return sorted(loops, key=lambda lp: -loop_length(lp))


def _finalize(
    vertices: np.ndarray,
    triangles: np.ndarray,
    spec: Optional[DomainSpec],
    classify: Classifier,
    area_tol: float = 1e-10,
) -> Mesh:
    vertices = np.ascontiguousarray(vertices, dtype=float)
    triangles = np.array(triangles, dtype=np.int64).reshape(-1, 3)
    if not np.all(np.isfinite(vertices)):
        raise ParameterError("non-finite vertex coordinates", "mesh", "build_domain")

    areas = signed_areas(vertices, triangles)
    flip = areas < 0
    triangles[flip] = triangles[flip][:, [0, 2, 1]]

    loops = _boundary_loops(vertices, triangles)
    edges = np.concatenate(loops)
    components = np.concatenate([np.full(len(lp), tag, dtype=np.int64) for tag, lp in enumerate(loops)])
    midpoints = 0.5 * (vertices[edges[:, 0]] + vertices[edges[:, 1]])
    segments = np.asarray(classify(midpoints), dtype=np.int64)

    mesh = Mesh(
        vertices=vertices,
        triangles=triangles,
        boundary_edges=edges,
        component_tags=components,
        segment_tags=segments,
        domain_spec=spec,
        h=max_edge_length(vertices, triangles),
        label=spec.label() if spec is not None else "",
    )
    validate_mesh(mesh, area_tol=area_tol)
    return mesh


def validate_mesh(mesh: Mesh, area_tol: float = 1e-10) -> None:
    """Check the mesh invariants.

    Args:
        mesh: Mesh to check.
        area_tol: Relative tolerance of the area comparison against the
            analytic area of ``mesh.domain_spec`` (skipped when it is None).

    Raises:
        TopologyError: If an invariant is violated.
    """
    areas = mesh.areas()
    bad = np.flatnonzero(areas <= 0.0)
    if len(bad):
        raise TopologyError(f"triangle {int(bad[0])} has non-positive area {areas[bad[0]]!r}", "mesh", "validate")
    used = np.zeros(mesh.n_vertices, dtype=bool)
    used[mesh.triangles.ravel()] = True
    if not np.all(used):
        raise TopologyError(f"vertex {int(np.flatnonzero(~used)[0])} belongs to no triangle", "mesh", "validate")
    loops = _boundary_loops(mesh.vertices, mesh.triangles)
    if sum(len(lp) for lp in loops) != mesh.n_boundary_edges:
        raise TopologyError("boundary edge list does not match the triangulation", "mesh", "validate")
    if mesh.domain_spec is not None:
        expected = mesh.domain_spec.area()
        total = float(np.sum(areas))
        if abs(total - expected) > area_tol * expected:
            raise TopologyError(
                f"mesh area {total!r} differs from analytic area {expected!r}", "mesh", "validate"
            )


def _grid(nx: int, ny: int, point: Callable[[int, int], Tuple[float, float]]) -> Tuple[np.ndarray, np.ndarray]:
    vertices = np.array([point(i, j) for j in range(ny + 1) for i in range(nx + 1)], dtype=float)
    tris = []
    for j in range(ny):
        for i in range(nx):
            v00 = j * (nx + 1) + i
            v10 = v00 + 1
            v01 = v00 + nx + 1
            v11 = v01 + 1
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    return vertices, np.array(tris, dtype=np.int64)


def _cells(length: float, h: float) -> int:
    return max(1, math.ceil(length / h - 1e-9))


def _build_rectangle(spec: Rectangle, h: float) -> Mesh:
    nx, ny = _cells(spec.width, h), _cells(spec.height, h)
    vertices, tris = _grid(nx, ny, lambda i, j: (spec.width * i / nx, spec.height * j / ny))
    tol = 1e-12 * max(spec.width, spec.height)

    def classify(mid: np.ndarray) -> np.ndarray:
        tags = np.full(len(mid), 3, dtype=np.int64)
        tags[np.abs(mid[:, 1] - spec.height) <= tol] = 2
        tags[np.abs(mid[:, 0] - spec.width) <= tol] = 1
        tags[np.abs(mid[:, 1]) <= tol] = 0
        return tags

    return _finalize(vertices, tris, spec, classify)


def _build_parallelogram(spec: Parallelogram, h: float) -> Mesh:
    nx, ny = _cells(spec.a, h), _cells(spec.b, h)
    e1, e2 = np.array(spec.e1, dtype=float), np.array(spec.e2, dtype=float)

    def point(i: int, j: int) -> Tuple[float, float]:
        s, t = spec.a * i / nx, spec.b * j / ny
        p = s * e1 + t * e2
        return float(p[0]), float(p[1])

    vertices, tris = _grid(nx, ny, point)
    inverse = np.linalg.inv(np.column_stack([e1, e2]))
    tol = 1e-9

    def classify(mid: np.ndarray) -> np.ndarray:
        st = mid @ inverse.T
        tags = np.full(len(mid), 3, dtype=np.int64)
        tags[np.abs(st[:, 1] - spec.b) <= tol * spec.b] = 2
        tags[np.abs(st[:, 0] - spec.a) <= tol * spec.a] = 1
        tags[np.abs(st[:, 1]) <= tol * spec.b] = 0
        return tags

    return _finalize(vertices, tris, spec, classify)


def _tooth_patch(
    n: int,
    position: Callable[[int, int], Tuple[float, float]],
    base: Optional[Sequence[int]] = None,
    offset: int = 0,
) -> Tuple[List[Tuple[float, float]], List[Tuple[int, int, int]]]:
    """Reference-triangle subdivision with n intervals per side.

    Lattice point (p, q) with p + q <= n maps through ``position``. Row q = 0
    reuses ``base`` indices when given; new vertices are numbered from
    ``offset``.
    """
    index: Dict[Tuple[int, int], int] = {}
    coords: List[Tuple[float, float]] = []
    for q in range(n + 1):
        for p in range(n + 1 - q):
            if q == 0 and base is not None:
                index[(p, q)] = base[p]
                continue
            index[(p, q)] = offset + len(coords)
            coords.append(position(p, q))
    tris = []
    for q in range(n):
        for p in range(n - q):
            tris.append((index[(p, q)], index[(p + 1, q)], index[(p, q + 1)]))
            if p + q < n - 1:
                tris.append((index[(p + 1, q)], index[(p + 1, q + 1)], index[(p, q + 1)]))
    return coords, tris


def _build_tooth(spec: Tooth, h: float) -> Mesh:
    a = spec.a
    a2 = a * a
    n = max(4, math.ceil(max(2.0 * a2, a * math.sqrt(1.0 + a2)) / h - 1e-9))

    def position(p: int, q: int) -> Tuple[float, float]:
        return a2 * (-1.0 + (2 * p + q) / n), a * q / n

    coords, tris = _tooth_patch(n, position)

    def classify(mid: np.ndarray) -> np.ndarray:
        tags = np.where(mid[:, 0] > 0, 1, 2).astype(np.int64)
        tags[mid[:, 1] == 0.0] = 0
        return tags

    return _finalize(np.array(coords), tris, spec, classify)


def _ring(radius: float, count: int) -> np.ndarray:
    theta = 2.0 * math.pi * np.arange(count) / count
    return np.column_stack([radius * np.cos(theta), radius * np.sin(theta)])


def _zip_closed(inner: Sequence[int], inner_angle: np.ndarray, outer: Sequence[int], outer_angle: np.ndarray):
    """Triangulate the band between two angularly sorted closed rings."""
    n_in, n_out = len(inner), len(outer)
    ang_in = np.append(inner_angle, 2.0 * math.pi)
    ang_out = np.append(outer_angle, 2.0 * math.pi)
    tris = []
    i = j = 0
    while i < n_in or j < n_out:
        advance_inner = j == n_out or (i < n_in and ang_in[i + 1] <= ang_out[j + 1])
        if advance_inner:
            tris.append((inner[i % n_in], inner[(i + 1) % n_in], outer[j % n_out]))
            i += 1
        else:
            tris.append((inner[i % n_in], outer[(j + 1) % n_out], outer[j % n_out]))
            j += 1
    return tris


def _ring_mesh(radii: Sequence[float], counts: Sequence[int], with_center: bool) -> Tuple[np.ndarray, list]:
    points = [np.zeros((1, 2))] if with_center else []
    offset = 1 if with_center else 0
    rings: List[Tuple[List[int], np.ndarray]] = []
    for radius, count in zip(radii, counts):
        points.append(_ring(radius, count))
        rings.append((list(range(offset, offset + count)), 2.0 * math.pi * np.arange(count) / count))
        offset += count
    tris = []
    if with_center:
        first = rings[0][0]
        tris.extend((0, first[k], first[(k + 1) % len(first)]) for k in range(len(first)))
    for (inner, ang_in), (outer, ang_out) in zip(rings[:-1], rings[1:]):
        tris.extend(_zip_closed(inner, ang_in, outer, ang_out))
    return np.vstack(points), tris


def _interior_count(radius: float, h: float) -> int:
    return max(8, math.ceil(2.0 * math.pi * radius / h - 1e-9))


def _build_disk(spec: PolygonalDisk, h: float) -> Mesh:
    n_rings = _cells(spec.radius, h)
    apothem = spec.radius * math.cos(math.pi / spec.sides)
    radii = [apothem * k / n_rings for k in range(1, n_rings)] + [spec.radius]
    counts = [_interior_count(r, h) for r in radii[:-1]] + [spec.sides]
    vertices, tris = _ring_mesh(radii, counts, with_center=True)
    return _finalize(vertices, tris, spec, lambda mid: np.zeros(len(mid), dtype=np.int64))


def _build_annulus(spec: PolygonalAnnulus, h: float) -> Mesh:
    inner, outer = spec.r_inner, spec.r_outer
    apothem = outer * math.cos(math.pi / spec.sides)
    n_rings = _cells(outer - inner, h) if apothem > inner else 1
    radii = [inner] + [inner + (apothem - inner) * k / n_rings for k in range(1, n_rings)] + [outer]
    counts = [spec.sides] + [_interior_count(r, h) for r in radii[1:-1]] + [spec.sides]
    vertices, tris = _ring_mesh(radii, counts, with_center=False)
    middle = 0.5 * (inner + outer)

    def classify(mid: np.ndarray) -> np.ndarray:
        return np.where(np.hypot(mid[:, 0], mid[:, 1]) > middle, 0, 1).astype(np.int64)

    return _finalize(vertices, tris, spec, classify)


def _zip_open(left: Sequence[int], left_s: np.ndarray, right: Sequence[int], right_s: np.ndarray):
    """Triangulate between two polylines sorted by a shared parameter."""
    tris = []
    i = j = 0
    while i < len(left) - 1 or j < len(right) - 1:
        advance_left = j == len(right) - 1 or (i < len(left) - 1 and left_s[i + 1] <= right_s[j + 1])
        if advance_left:
            tris.append((left[i], left[i + 1], right[j]))
            i += 1
        else:
            tris.append((left[i], right[j + 1], right[j]))
            j += 1
    return tris


def cusp_columns(eps: float, h: float) -> List[float]:
    """Column abscissae graded geometrically from the truncation towards x = 1."""
    xs = [eps]
    while xs[-1] < 1.0:
        step = min(h, h * xs[-1])
        nxt = xs[-1] + step
        if 1.0 - nxt < 0.5 * step:
            nxt = 1.0
        xs.append(nxt)
    return xs


def _build_cusp(spec: Cusp, h: float, settings: MeshSettings) -> Mesh:
    if 2.0 * spec.eps**4 < settings.min_feature:
        raise ResolutionError(
            f"truncation side height {2.0 * spec.eps**4:.3e} is below min_feature {settings.min_feature:.1e}",
            feature="cusp truncation side",
        )
    xs = cusp_columns(spec.eps, h)
    coords: List[Tuple[float, float]] = []
    columns: List[Tuple[List[int], np.ndarray]] = []
    for x in xs:
        count = max(2, math.ceil(2.0 * x**3 / h - 1e-9))
        s = -1.0 + 2.0 * np.arange(count + 1) / count
        s[-1] = 1.0
        start = len(coords)
        coords.extend((x, float(sj) * x**4) for sj in s)
        columns.append((list(range(start, start + count + 1)), s))
    tris = []
    for (left, ls), (right, rs) in zip(columns[:-1], columns[1:]):
        tris.extend(_zip_open(left, ls, right, rs))

    def classify(mid: np.ndarray) -> np.ndarray:
        tags = np.where(mid[:, 1] > 0, 0, 2).astype(np.int64)
        tags[mid[:, 0] == 1.0] = 1
        tags[mid[:, 0] == spec.eps] = 3
        return tags

    dx = np.diff(xs)
    area_err = float(np.sum(2.0 * dx**3 * np.asarray(xs[1:]) ** 2)) + 1e-12
    return _finalize(np.array(coords), tris, spec, classify, area_tol=area_err / spec.area())


class _DyadicQuadtree:
    """Balanced quadtree over (-1,1) x (-1,0) in integer units of 2^-depth."""

    def __init__(self, depth: int):
        self.depth = depth
        self.leaves: Set[Tuple[int, int, int]] = {(0, 0, 0), (0, 1, 0)}
        self.split_nodes: Set[Tuple[int, int, int]] = set()

    def size(self, level: int) -> int:
        return 1 << (self.depth - level)

    @staticmethod
    def in_range(level: int, i: int, j: int) -> bool:
        return 0 <= i < 2 << level and 0 <= j < 1 << level

    def split(self, cell: Tuple[int, int, int]) -> None:
        level, i, j = cell
        self.leaves.remove(cell)
        self.split_nodes.add(cell)
        for dj in (0, 1):
            for di in (0, 1):
                self.leaves.add((level + 1, 2 * i + di, 2 * j + dj))

    def refine_where(self, predicate: Callable[[Tuple[int, int, int]], bool]) -> None:
        while True:
            marked = sorted(cell for cell in self.leaves if predicate(cell))
            if not marked:
                return
            for cell in marked:
                self.split(cell)

    def _violates_balance(self, cell: Tuple[int, int, int]) -> bool:
        level, i, j = cell
        neighbours = (
            ((level, i + 1, j), [(level + 1, 2 * i + 2, 2 * j + d) for d in (0, 1)]),
            ((level, i - 1, j), [(level + 1, 2 * i - 1, 2 * j + d) for d in (0, 1)]),
            ((level, i, j + 1), [(level + 1, 2 * i + d, 2 * j + 2) for d in (0, 1)]),
            ((level, i, j - 1), [(level + 1, 2 * i + d, 2 * j - 1) for d in (0, 1)]),
        )
        for node, children in neighbours:
            if node in self.split_nodes and any(child in self.split_nodes for child in children):
                return True
        return False

    def balance(self) -> None:
        changed = True
        while changed:
            changed = False
            for cell in sorted(self.leaves):
                if cell in self.leaves and self._violates_balance(cell):
                    self.split(cell)
                    changed = True

    def polygons(self):
        """Yield (corner/hanging-node keys in CCW order, centre key) per leaf."""
        for level, i, j in sorted(self.leaves, key=lambda c: (c[2] * self.size(c[0]), c[1] * self.size(c[0]), -c[0])):
            s = self.size(level)
            x0, y0 = i * s, j * s
            half = s // 2
            ring = [(x0, y0)]
            if (level, i, j - 1) in self.split_nodes:
                ring.append((x0 + half, y0))
            ring.append((x0 + s, y0))
            if (level, i + 1, j) in self.split_nodes:
                ring.append((x0 + s, y0 + half))
            ring.append((x0 + s, y0 + s))
            if (level, i, j + 1) in self.split_nodes:
                ring.append((x0 + half, y0 + s))
            ring.append((x0, y0 + s))
            if (level, i - 1, j) in self.split_nodes:
                ring.append((x0, y0 + half))
            yield ring, (x0 + half, y0 + half)


def _pow2_at_least(value: float) -> int:
    n = 1
    while n < value:
        n *= 2
    return n


def _build_comb(spec: Comb, h: float, settings: MeshSettings) -> Mesh:
    teeth = spec.teeth()
    global_level = max(0, math.ceil(math.log2(1.0 / h) - 1e-9))
    leaf = Fraction(1, 2**global_level)

    plans = []
    for number, (centre, a) in enumerate(teeth, start=1):
        width = 2 * a * a
        side = float(a) * math.sqrt(1.0 + float(a) ** 2)
        n_base = _pow2_at_least(max(4.0, side / h, float(width / leaf)))
        spacing = width / n_base
        level = round(math.log2(float(1 / spacing)))
        if float(spacing) < settings.min_feature or level + 1 > settings.max_depth:
            raise ResolutionError(
                f"base spacing {float(spacing):.3e} needs refinement depth {level + 1} "
                f"beyond max_depth {settings.max_depth}",
                feature=f"comb tooth {number}",
            )
        plans.append((number, centre, a, n_base, level))

    depth = max([global_level] + [plan[4] for plan in plans]) + 1
    unit = Fraction(1, 2**depth)
    tree = _DyadicQuadtree(depth)
    tree.refine_where(lambda cell: cell[0] < global_level)

    spans = []
    for number, centre, a, n_base, level in plans:
        lo, hi = (centre - a * a + 1) / unit, (centre + a * a + 1) / unit
        if lo.denominator != 1 or hi.denominator != 1:
            raise ResolutionError("tooth base is not aligned with the dyadic grid", feature=f"comb tooth {number}")
        spans.append((int(lo), int(hi)))

        def touches(cell, lo=int(lo), hi=int(hi), level=level):
            lev, i, j = cell
            s = tree.size(lev)
            return lev < level and j == (1 << lev) - 1 and i * s <= hi and (i + 1) * s >= lo

        tree.refine_where(touches)
    tree.balance()

    index: Dict[Tuple[int, int], int] = {}
    coords: List[Tuple[float, float]] = []

    def vertex(key: Tuple[int, int]) -> int:
        if key not in index:
            index[key] = len(coords)
            coords.append((float(key[0] * unit - 1), float(key[1] * unit - 1)))
        return index[key]

    tris: List[Tuple[int, int, int]] = []
    for ring, centre in tree.polygons():
        ids = [vertex(key) for key in ring]
        if len(ids) == 4:
            tris.append((ids[0], ids[1], ids[2]))
            tris.append((ids[0], ids[2], ids[3]))
        else:
            c = vertex(centre)
            tris.extend((c, ids[k], ids[(k + 1) % len(ids)]) for k in range(len(ids)))

    top = 1 << depth
    for (number, centre, a, n_base, _), (lo, hi) in zip(plans, spans):
        step = (hi - lo) // n_base
        base_keys = [(lo + k * step, top) for k in range(n_base + 1)]
        on_base = [key for key in index if key[1] == top and lo <= key[0] <= hi]
        if len(on_base) != n_base + 1 or any(key not in index for key in base_keys):
            raise ResolutionError("box mesh does not match the tooth base", feature=f"comb tooth {number}")
        base = [index[key] for key in base_keys]

        def position(p: int, q: int, centre=centre, a=a, n=n_base) -> Tuple[float, float]:
            x = centre - a * a + (2 * a * a * p + a * a * q) / n
            return float(x), float(a * q / n)

        patch, patch_tris = _tooth_patch(n_base, position, base=base, offset=len(coords))
        coords.extend(patch)
        tris.extend(patch_tris)

    tooth_bounds = [(float(c), float(a * a)) for c, a in teeth]

    def classify(mid: np.ndarray) -> np.ndarray:
        tags = np.zeros(len(mid), dtype=np.int64)
        for number, (c, half_width) in enumerate(tooth_bounds, start=1):
            tags[(mid[:, 1] > 0) & (np.abs(mid[:, 0] - c) <= half_width)] = number
        return tags

    logger.debug(f"comb quadtree depth {depth}, {len(tree.leaves)} leaves, {len(coords)} vertices")
    return _finalize(np.array(coords), tris, spec, classify)


def build_domain(spec: DomainSpec, h_target: float, settings: Optional[MeshSettings] = None) -> Mesh:
    """Build a validated triangulation of a domain.

    Args:
        spec: Domain variant with validated parameters.
        h_target: Nominal mesh spacing. Structured parts use cells of this
            size; teeth, cusp columns and polygon rings are graded locally.
        settings: Limits for adaptive builders. Defaults to the global config.

    Returns:
        Mesh satisfying all invariants checked by :func:`validate_mesh`.

    Raises:
        ParameterError: If h_target is not positive or the spec is unknown.
        ResolutionError: If a feature of the domain cannot be resolved.
    """
    if not (isinstance(h_target, (int, float)) and math.isfinite(h_target) and h_target > 0):
        raise ParameterError(f"h_target must be a positive real, got {h_target!r}", "mesh", "build_domain")
    settings = settings or DEFAULT_CONFIG.mesh
    h = float(h_target)
    if isinstance(spec, Rectangle):
        mesh = _build_rectangle(spec, h)
    elif isinstance(spec, Parallelogram):
        mesh = _build_parallelogram(spec, h)
    elif isinstance(spec, Tooth):
        mesh = _build_tooth(spec, h)
    elif isinstance(spec, PolygonalDisk):
        mesh = _build_disk(spec, h)
    elif isinstance(spec, PolygonalAnnulus):
        mesh = _build_annulus(spec, h)
    elif isinstance(spec, Cusp):
        mesh = _build_cusp(spec, h, settings)
    elif isinstance(spec, Comb):
        mesh = _build_comb(spec, h, settings)
    else:
        raise ParameterError(f"unsupported domain spec {spec!r}", "mesh", "build_domain")
    logger.debug(f"Built {mesh.label}: {mesh.n_vertices} vertices, {mesh.n_triangles} triangles, h={mesh.h:.4g}")
    return mesh


def refine(mesh: Mesh) -> Mesh:
    """Split every triangle into four through its edge midpoints.

    Boundary edges are split in place along their loop, so tags and loop
    order carry over.
    """
    n = mesh.n_vertices
    tri = mesh.triangles
    keys = _edge_keys(_directed_edges(tri), n)
    unique, inverse = np.unique(keys, return_inverse=True)
    inverse = inverse.reshape(3, -1)
    lo, hi = unique // n, unique % n
    vertices = np.vstack([mesh.vertices, 0.5 * (mesh.vertices[lo] + mesh.vertices[hi])])
    mid = n + np.arange(len(unique))

    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    ab, bc, ca = mid[inverse[0]], mid[inverse[1]], mid[inverse[2]]
    children = np.stack(
        [
            np.column_stack([a, ab, ca]),
            np.column_stack([ab, b, bc]),
            np.column_stack([ca, bc, c]),
            np.column_stack([ab, bc, ca]),
        ],
        axis=1,
    ).reshape(-1, 3)

    edges = mesh.boundary_edges
    m = mid[np.searchsorted(unique, _edge_keys(edges, n))]
    new_edges = np.stack([np.column_stack([edges[:, 0], m]), np.column_stack([m, edges[:, 1]])], axis=1).reshape(-1, 2)

    refined = Mesh(
        vertices=vertices,
        triangles=children.astype(np.int64),
        boundary_edges=new_edges.astype(np.int64),
        component_tags=np.repeat(mesh.component_tags, 2),
        segment_tags=np.repeat(mesh.segment_tags, 2),
        domain_spec=mesh.domain_spec,
        h=max_edge_length(vertices, children),
        level=mesh.level + 1,
        label=mesh.label,
    )
    logger.debug(f"Refined {mesh.label} to level {refined.level}: {refined.n_vertices} vertices")
    return refined


def refine_times(mesh: Mesh, times: int) -> Mesh:
    for _ in range(times):
        mesh = refine(mesh)
    return mesh


def boundary_length(mesh: Mesh, component: Optional[int] = None, segment: Optional[int] = None) -> float:
    """Sum of boundary edge lengths, optionally restricted to one tag.

    Raises:
        TagError: If the component or segment tag does not exist.
    """
    mask = np.ones(mesh.n_boundary_edges, dtype=bool)
    if component is not None:
        if component not in mesh.components:
            raise TagError(f"unknown component tag {component}; known {mesh.components}", "mesh", "boundary_length")
        mask &= mesh.component_tags == component
    if segment is not None:
        if segment not in mesh.segments:
            raise TagError(f"unknown segment tag {segment}; known {mesh.segments}", "mesh", "boundary_length")
        mask &= mesh.segment_tags == segment
    return float(np.sum(mesh.edge_lengths()[mask]))
