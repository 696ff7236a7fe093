"""Text and JSON file formats.

- ``dtnmesh 1``: mesh files (vertices, triangles, tagged boundary edges).
- ``%%sym-coord n nnz``: symmetric matrices, upper triangle only.
- ``dtnfield 1``: nodal or boundary fields, one ``index value`` per line.
- result JSON: ``{"schema": "dtnlab.<kind>", "schema_version": ..., ...}``.

Floats are written with 17 significant digits so every writer round-trips
bit-exactly through its reader.
"""

import hashlib
import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, TextIO, Tuple, Union

import numpy as np
import scipy.sparse as sp
from packaging.version import InvalidVersion, Version

from ..errors import MeshFormatError, SchemaError
from .mesh import Mesh, max_edge_length, validate_mesh

SCHEMA_VERSION = "1.0"
PathLike = Union[str, Path]


def fmt(value: float) -> str:
    """Format a float with 17 significant digits."""
    return f"{float(value):.17g}"


def mesh_to_text(mesh: Mesh) -> str:
    lines = ["dtnmesh 1", f"{mesh.n_vertices} {mesh.n_triangles} {mesh.n_boundary_edges}"]
    lines.extend(f"{fmt(x)} {fmt(y)}" for x, y in mesh.vertices)
    lines.extend(f"{i} {j} {k}" for i, j, k in mesh.triangles)
    lines.extend(
        f"{a} {b} {c} {s}"
        for (a, b), c, s in zip(mesh.boundary_edges, mesh.component_tags, mesh.segment_tags)
    )
    return "\n".join(lines) + "\n"


def mesh_checksum(mesh: Mesh) -> str:
    """sha256 hex digest of the dtnmesh text of a mesh."""
    return hashlib.sha256(mesh_to_text(mesh).encode()).hexdigest()


def write_mesh(mesh: Mesh, path: PathLike) -> Path:
    path = Path(path)
    path.write_text(mesh_to_text(mesh))
    return path


def _ints(tokens: List[str], count: int, line_no: int) -> List[int]:
    if len(tokens) != count:
        raise MeshFormatError(f"line {line_no}: expected {count} integers, got {len(tokens)}", "formats", "read_mesh")
    try:
        return [int(t) for t in tokens]
    except ValueError as e:
        raise MeshFormatError(f"line {line_no}: {e}", "formats", "read_mesh") from e


def mesh_from_text(text: str, label: str = "file") -> Mesh:
    """Parse dtnmesh text.

    The boundary edge list is taken verbatim from the file; the mesh is
    checked with :func:`validate_mesh` (without an analytic area).
    """
    lines = [line.split() for line in text.splitlines()]
    if not lines or lines[0] != ["dtnmesh", "1"]:
        raise MeshFormatError("missing 'dtnmesh 1' header", "formats", "read_mesh")
    if len(lines) < 2:
        raise MeshFormatError("missing size line", "formats", "read_mesh")
    nv, nt, nb = _ints(lines[1], 3, 2)
    if len(lines) < 2 + nv + nt + nb:
        raise MeshFormatError(
            f"expected {2 + nv + nt + nb} lines, found {len(lines)}", "formats", "read_mesh"
        )
    try:
        vertices = np.array([[float(t) for t in lines[2 + k]] for k in range(nv)], dtype=float).reshape(nv, 2)
    except ValueError as e:
        raise MeshFormatError(f"bad vertex line: {e}", "formats", "read_mesh") from e
    base = 2 + nv
    triangles = np.array([_ints(lines[base + k], 3, base + k + 1) for k in range(nt)], dtype=np.int64).reshape(nt, 3)
    base += nt
    edges = np.array([_ints(lines[base + k], 4, base + k + 1) for k in range(nb)], dtype=np.int64).reshape(nb, 4)
    if nv and (triangles.min(initial=0) < 0 or triangles.max(initial=0) >= nv):
        raise MeshFormatError("triangle index out of range", "formats", "read_mesh")

    mesh = Mesh(
        vertices=vertices,
        triangles=triangles,
        boundary_edges=edges[:, :2].copy(),
        component_tags=edges[:, 2].copy(),
        segment_tags=edges[:, 3].copy(),
        domain_spec=None,
        h=max_edge_length(vertices, triangles) if nt else 0.0,
        label=label,
    )
    validate_mesh(mesh)
    return mesh


def read_mesh(path: PathLike) -> Mesh:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise MeshFormatError(f"cannot read {path}: {e}", "formats", "read_mesh") from e
    return mesh_from_text(text, label=path.name)


def write_sym_coord(matrix: Union[sp.spmatrix, np.ndarray], path_or_stream: Union[PathLike, TextIO]) -> None:
    """Write the upper triangle of a symmetric matrix.

    Sparse matrices write their stored upper entries; dense matrices write
    the full upper triangle.
    """
    if sp.issparse(matrix):
        upper = sp.triu(matrix, format="coo")
        order = np.lexsort((upper.col, upper.row))
        rows, cols, vals = upper.row[order], upper.col[order], upper.data[order]
    else:
        dense = np.asarray(matrix, dtype=float)
        rows, cols = np.triu_indices(dense.shape[0])
        vals = dense[rows, cols]
    n = matrix.shape[0]
    body = [f"%%sym-coord {n} {len(vals)}"]
    body.extend(f"{i} {j} {fmt(v)}" for i, j, v in zip(rows, cols, vals))
    text = "\n".join(body) + "\n"
    if hasattr(path_or_stream, "write"):
        path_or_stream.write(text)
    else:
        Path(path_or_stream).write_text(text)


def read_sym_coord(path: PathLike) -> sp.csr_matrix:
    """Read a sym-coord file into a symmetric CSR matrix."""
    lines = Path(path).read_text().splitlines()
    header = lines[0].split() if lines else []
    if len(header) != 3 or header[0] != "%%sym-coord":
        raise MeshFormatError("missing '%%sym-coord n nnz' header", "formats", "read_sym_coord")
    n, nnz = int(header[1]), int(header[2])
    entries = [line.split() for line in lines[1 : 1 + nnz]]
    if len(entries) != nnz:
        raise MeshFormatError(f"expected {nnz} entries, found {len(entries)}", "formats", "read_sym_coord")
    rows = np.array([int(e[0]) for e in entries], dtype=np.int64)
    cols = np.array([int(e[1]) for e in entries], dtype=np.int64)
    vals = np.array([float(e[2]) for e in entries])
    upper = sp.coo_matrix((vals, (rows, cols)), shape=(n, n))
    strict = sp.coo_matrix((vals[rows != cols], (cols[rows != cols], rows[rows != cols])), shape=(n, n))
    return (upper + strict).tocsr()


def write_field(values: np.ndarray, path: PathLike, indices: Optional[Iterable[int]] = None) -> None:
    """Write a ``dtnfield 1`` file; indices default to 0..n-1."""
    values = np.asarray(values, dtype=float)
    idx = np.arange(len(values)) if indices is None else np.asarray(list(indices))
    lines = ["dtnfield 1", str(len(values))]
    lines.extend(f"{int(i)} {fmt(v)}" for i, v in zip(idx, values))
    Path(path).write_text("\n".join(lines) + "\n")


def read_field(path: PathLike) -> Tuple[np.ndarray, np.ndarray]:
    """Read a ``dtnfield 1`` file into (indices, values)."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != "dtnfield 1":
        raise MeshFormatError("missing 'dtnfield 1' header", "formats", "read_field")
    count = int(lines[1])
    rows = [line.split() for line in lines[2 : 2 + count]]
    if len(rows) != count:
        raise MeshFormatError(f"expected {count} values, found {len(rows)}", "formats", "read_field")
    return np.array([int(r[0]) for r in rows], dtype=np.int64), np.array([float(r[1]) for r in rows])


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def result_document(kind: str, payload: Dict[str, Any]) -> Dict[str, Any]:
    """Wrap a payload in the versioned result envelope."""
    return {"schema": f"dtnlab.{kind}", "schema_version": SCHEMA_VERSION, **_jsonable(payload)}


def dumps_result(kind: str, payload: Dict[str, Any]) -> str:
    return json.dumps(result_document(kind, payload), indent=2, allow_nan=False) + "\n"


def check_schema(document: Any, kind: Optional[str] = None) -> str:
    """Validate a result envelope and return its kind.

    Raises:
        SchemaError: If the envelope is missing, names another kind, or has
            a major schema version this build cannot read.
    """
    if not isinstance(document, dict) or not str(document.get("schema", "")).startswith("dtnlab."):
        raise SchemaError("not a dtnlab result document", "report", "check_schema")
    found = document["schema"].split(".", 1)[1]
    if kind is not None and found != kind:
        raise SchemaError(f"expected schema dtnlab.{kind}, got dtnlab.{found}", "report", "check_schema")
    try:
        version = Version(str(document.get("schema_version", "")))
    except InvalidVersion as e:
        raise SchemaError(f"invalid schema_version {document.get('schema_version')!r}", "report", "check_schema") from e
    if version.major != Version(SCHEMA_VERSION).major:
        raise SchemaError(
            f"schema_version {version} is incompatible with {SCHEMA_VERSION}", "report", "check_schema"
        )
    return found


# Body keys the report merger reads, per result kind.
REQUIRED_KEYS: Dict[str, Tuple[Tuple[str, ...], ...]] = {
    "steklov": (("kernel_dimension",), ("count", "threshold"), ("count", "value"), ("mesh", "level")),
    "robin": (("beta0_interval",),),
    "trace_const": (("constants",),),
}
# Domain parameters the report tables read, per domain variant.
REQUIRED_PARAMETERS: Dict[str, Tuple[str, ...]] = {"Comb": ("teeth_count",), "Cusp": ("eps",)}


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _lookup(document: Dict[str, Any], path: Tuple[str, ...], kind: str) -> Any:
    node: Any = document
    for depth, key in enumerate(path):
        if not isinstance(node, dict) or key not in node:
            raise SchemaError(
                f"dtnlab.{kind} document lacks '{'.'.join(path[: depth + 1])}'", "report", "check_body"
            )
        node = node[key]
    return node


def check_body(document: Dict[str, Any], kind: str) -> None:
    """Check that a result body carries the fields the report merger reads.

    Raises:
        SchemaError: If a required field is missing or has the wrong type.
    """

    def fail(message: str) -> None:
        raise SchemaError(f"dtnlab.{kind} document: {message}", "report", "check_body")

    for path in REQUIRED_KEYS.get(kind, ()):
        _lookup(document, path, kind)
    if kind == "steklov":
        if not isinstance(document["kernel_dimension"], int) or isinstance(document["kernel_dimension"], bool):
            fail("kernel_dimension must be an integer")
        if not _is_number(document["count"]["threshold"]):
            fail("count.threshold must be a number")
        value = document["count"]["value"]
        if value is not None and (not isinstance(value, int) or isinstance(value, bool)):
            fail("count.value must be an integer or null")
    elif kind == "robin":
        interval = document["beta0_interval"]
        if not isinstance(interval, list) or len(interval) != 2:
            fail("beta0_interval must be a pair")
    elif kind == "trace_const":
        constants = document["constants"]
        if not isinstance(constants, dict):
            fail("constants must be a table")
        for name, entry in constants.items():
            if not isinstance(entry, dict) or "values" not in entry or "refinement_stable" not in entry:
                fail(f"constant '{name}' needs values and refinement_stable")
            values = entry["values"]
            if not isinstance(values, list) or not values or not all(_is_number(v) for v in values):
                fail(f"constant '{name}' values must be a nonempty list of numbers")
    mesh = document.get("mesh")
    if mesh is None:
        return
    if not isinstance(mesh, dict):
        fail("mesh must be a table")
    if "level" in mesh and not _is_number(mesh["level"]):
        fail("mesh.level must be a number")
    parameters = mesh.get("parameters")
    if parameters is not None:
        if not isinstance(parameters, dict):
            fail("mesh.parameters must be a table")
        variant = parameters.get("variant")
        required = REQUIRED_PARAMETERS.get(variant, ()) if isinstance(variant, str) else ()
        for key in required:
            if not _is_number(parameters.get(key)):
                fail(f"mesh.parameters.{key} must be a number")


def load_result(path: PathLike) -> Dict[str, Any]:
    path = Path(path)
    try:
        document = json.loads(path.read_text())
    except OSError as e:
        raise SchemaError(f"cannot read {path}: {e}", "report", "load_result") from e
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path} is not valid JSON: {e}", "report", "load_result") from e
    check_body(document, check_schema(document))
    return document
