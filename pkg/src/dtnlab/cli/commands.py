"""Command implementations for the dtnlab CLI.

Each function takes parsed arguments, runs the numerical core and returns
plain data (payload dicts or row lists); writing and printing is left to
``main``.
"""

import csv
import math
import time
from dataclasses import asdict, is_dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, TextIO, Tuple

import numpy as np

from .. import __version__
from ..config import DtnlabConfig
from ..core.analytic import forest_norms, mazya_sobolev_sample
from ..core.assembly import boundary_mass, interpolate, mass, robin_form, stiffness
from ..core.dtn import build_dtn
from ..core.formats import check_schema, fmt, load_result, mesh_checksum, read_mesh, write_field, write_mesh, write_sym_coord
from ..core.geometry import Comb, CombLayout, DomainSpec, Tooth
from ..core.mesh import Mesh, build_domain, refine, refine_times
from ..core.robin import beta_zero_scan
from ..core.semigroup import SpectralSemigroup, evolve, markov_diagnostics, operator_norm_gap
from ..core.spectral import (
    grounded_trace_quotient,
    kernel_dimension,
    mazya_constant,
    poincare_constant,
    seminorm_trace_constant,
    spectral_count,
    steklov_spectrum,
    trace_constant,
)
from ..core.trace import h1_sigma_norm_sq, interpolation_trace_error, lattice_defects, product_rule_defect
from ..core.trend import growth_factors, is_refinement_stable
from ..errors import NumericError, ParameterError, RangeError, SchemaError
from ..logging import get_logger
from .utils import InitialField, parse_domain, run_jobs

logger = get_logger()

EVOLVE_COLUMNS = ["t", "distance", "gap_norm", "exp_bound", "min_entry", "row_sum_dev"]
EXAMPLES_COLUMNS = ["m", "h1_sq", "upper_bound", "boundary_sq"]
TRACE_PROBLEMS = ("trace", "seminorm", "poincare", "mazya", "grounded", "sobolev")


def domain_parameters(spec: Optional[DomainSpec]) -> Optional[Dict[str, Any]]:
    if spec is None or not is_dataclass(spec):
        return None
    return {"variant": type(spec).__name__, **asdict(spec)}


def resolve_mesh(
    mesh_path: Optional[Path],
    domain: Optional[str],
    h: Optional[float],
    refinements: int,
    config: DtnlabConfig,
) -> Mesh:
    """Load a mesh file or build one from a domain string."""
    if mesh_path is not None:
        if domain is not None:
            raise ParameterError("give either --mesh or --domain, not both", "cli", "resolve_mesh")
        return refine_times(read_mesh(mesh_path), refinements)
    if domain is None:
        raise ParameterError("a mesh file (--mesh) or a domain (--domain) is required", "cli", "resolve_mesh")
    if h is None:
        raise ParameterError("--h is required with --domain", "cli", "resolve_mesh")
    return refine_times(build_domain(parse_domain(domain), h, config.mesh), refinements)


def mesh_summary(mesh: Mesh) -> Dict[str, Any]:
    return {
        "label": mesh.label,
        "parameters": domain_parameters(mesh.domain_spec),
        "n_vertices": mesh.n_vertices,
        "n_triangles": mesh.n_triangles,
        "n_boundary_edges": mesh.n_boundary_edges,
        "components": list(mesh.components),
        "h": mesh.h,
        "level": mesh.level,
        "checksum": mesh_checksum(mesh),
    }


def provenance(mesh: Optional[Mesh], timings: Dict[str, float]) -> Dict[str, Any]:
    return {
        "version": __version__,
        "mesh_checksum": mesh_checksum(mesh) if mesh is not None else None,
        "timings": timings,
    }


def make_mesh(domain: str, h: float, refinements: int, output: Path, config: DtnlabConfig) -> Tuple[Mesh, Path]:
    mesh = resolve_mesh(None, domain, h, refinements, config)
    path = write_mesh(mesh, output)
    logger.info(f"Wrote {mesh.n_vertices} vertices, {mesh.n_triangles} triangles to {path}")
    return mesh, path


def assemble(
    mesh: Mesh, outdir: Path, beta: Optional[float] = None, schur: bool = False
) -> Dict[str, Dict[str, Any]]:
    """Write K, M, B (and optionally the Robin matrix and S) in sym-coord format."""
    outdir.mkdir(parents=True, exist_ok=True)
    K, M, B = stiffness(mesh), mass(mesh), boundary_mass(mesh)
    matrices: Dict[str, Any] = {"K": K, "M": M, "B": B.consistent}
    if beta is not None:
        matrices["R"] = robin_form(mesh, beta, K, B)
    if schur:
        matrices["S"] = build_dtn(mesh, K, B, form_schur=True).schur
    written = {}
    for name, matrix in matrices.items():
        path = outdir / f"{name}.sym"
        write_sym_coord(matrix, path)
        nnz = int(matrix.nnz) if hasattr(matrix, "nnz") else int(np.count_nonzero(matrix))
        written[name] = {"path": str(path), "n": int(matrix.shape[0]), "nnz": nnz}
    return written


def steklov(
    mesh: Mesh,
    k: int,
    config: DtnlabConfig,
    method: str = "auto",
    check_kernel: bool = False,
    vectors_dir: Optional[Path] = None,
) -> Dict[str, Any]:
    """Steklov spectrum payload; raises NumericError when --check-kernel fails."""
    timings: Dict[str, float] = {}
    start = time.perf_counter()
    K, B = stiffness(mesh), boundary_mass(mesh)
    op = build_dtn(mesh, K, B, solver=config.solver, tolerances=config.tolerances)
    timings["dtn"] = time.perf_counter() - start
    start = time.perf_counter()
    spectrum = steklov_spectrum(op, min(k, op.size), method, config.solver, config.tolerances)
    timings["eigensolve"] = time.perf_counter() - start

    kernel = kernel_dimension(spectrum, config.tolerances)
    if check_kernel and kernel != 1:
        raise NumericError(
            f"kernel dimension is {kernel}, expected 1", residuals=spectrum.residuals, op="check_kernel"
        )
    threshold = config.spectral.count_threshold
    try:
        count: Optional[int] = spectral_count(spectrum, threshold)
    except RangeError as e:
        logger.warning(str(e))
        count = None
    if vectors_dir is not None:
        vectors_dir.mkdir(parents=True, exist_ok=True)
        for i in range(spectrum.k):
            write_field(spectrum.vectors[:, i], vectors_dir / f"mode_{i:03d}.field", indices=spectrum.boundary)
    return {
        "domain": mesh.label,
        "mesh": mesh_summary(mesh),
        "method": spectrum.method,
        "complete": spectrum.complete,
        "eigenvalues": spectrum.rows(),
        "kernel_dimension": kernel,
        "count": {"threshold": threshold, "value": count},
        "tolerances": {
            "eigen_residual": config.tolerances.eigen_residual,
            "kernel_relative": config.tolerances.kernel_relative,
            "orthonormality": config.tolerances.orthonormality,
        },
        "config": config.to_dict(),
        "provenance": provenance(mesh, timings),
    }


def initial_field(mesh: Mesh, init: InitialField) -> np.ndarray:
    boundary = mesh.boundary_vertices
    if init.kind == "constant":
        return np.ones(len(boundary))
    if init.kind in ("x", "y"):
        return np.array(mesh.vertices[boundary, 0 if init.kind == "x" else 1], dtype=float)
    tagged = mesh.component_vertices(init.tag) if init.kind == "component" else mesh.segment_vertices(init.tag)
    return np.isin(boundary, tagged).astype(float)


def evolve_series(
    mesh: Mesh, times: Sequence[float], init: InitialField, config: DtnlabConfig
) -> Tuple[List[Dict[str, float]], np.ndarray]:
    """Rows of the evolve table and the field at the last time."""
    if not times:
        raise ParameterError("time grid is empty", "cli", "evolve")
    if any(t < 0 for t in times):
        raise ParameterError("times must be >= 0", "cli", "evolve")
    K, B = stiffness(mesh), boundary_mass(mesh)
    op = build_dtn(mesh, K, B, solver=config.solver, tolerances=config.tolerances)
    sg = SpectralSemigroup.from_operator(op, config.solver, config.tolerances)
    phi = initial_field(mesh, init)
    target = sg.projection.apply(phi)
    rows = []
    field = phi
    for t in times:
        field = evolve(sg, t, phi)
        gap = operator_norm_gap(sg, t)
        if sg.generator is not None:
            markov = markov_diagnostics(sg, t)
            min_entry, row_sum_dev = markov.min_entry, markov.max_row_sum_deviation
        else:
            min_entry = row_sum_dev = math.nan
        rows.append(
            {
                "t": float(t),
                "distance": sg.b_norm(field - target),
                "gap_norm": gap.norm,
                "exp_bound": gap.closed_form,
                "min_entry": min_entry,
                "row_sum_dev": row_sum_dev,
            }
        )
    return rows, field


def _sobolev_samples(mesh: Mesh) -> List[np.ndarray]:
    return [
        np.ones(mesh.n_vertices),
        interpolate(mesh, lambda x, y: x),
        interpolate(mesh, lambda x, y: y),
        interpolate(mesh, lambda x, y: x * y),
    ]


def _level_constants(mesh: Mesh, problems: Sequence[str], config: DtnlabConfig) -> Dict[str, float]:
    K, M, B = stiffness(mesh), mass(mesh), boundary_mass(mesh)
    solver, tol = config.solver, config.tolerances
    values: Dict[str, float] = {}
    level = mesh.level
    if "trace" in problems:
        values["trace"] = trace_constant(K, M, B, level, tol).value
    if "seminorm" in problems:
        op = build_dtn(mesh, K, B, form_schur=True, solver=solver, tolerances=tol)
        values["seminorm"] = seminorm_trace_constant(op, level, tol).value
    if "poincare" in problems:
        values["poincare"] = poincare_constant(K, M, level, solver, tol).value
    if "mazya" in problems:
        values["mazya"] = mazya_constant(K, M, B, level, solver, tol).value
    if "grounded" in problems and isinstance(mesh.domain_spec, Tooth):
        slanted = boundary_mass(mesh, segment=[1, 2])
        values["grounded"] = grounded_trace_quotient(K, M, slanted, mesh.segment_vertices(0), level, tol).value
    if "sobolev" in problems:
        values["sobolev"] = mazya_sobolev_sample(mesh, _sobolev_samples(mesh), K, B.consistent)
    return values


def _trace_map_row(mesh: Mesh) -> Dict[str, Any]:
    K, M, B = stiffness(mesh), mass(mesh), boundary_mass(mesh)
    lattice = lattice_defects(mesh, interpolate(mesh, lambda x, y: 2.0 * x - y))
    return {
        "level": mesh.level,
        "h": mesh.h,
        "h1_sigma_sq_of_one": h1_sigma_norm_sq(mesh, np.ones(mesh.n_vertices), K, M, B),
        "interpolation_error": interpolation_trace_error(mesh, lambda x, y: x * x + y * y),
        "product_defect": product_rule_defect(mesh, lambda x, y: x, lambda x, y: x),
        "lattice_defect": max(lattice.positive_part, lattice.min_one),
    }


def trace_map_rows(meshes: Sequence[Mesh]) -> List[Dict[str, Any]]:
    """Trace-map diagnostics per refinement level.

    The interpolation error of r^2 should fall like h^2; ``interpolation_order``
    is the observed exponent between successive levels.
    """
    rows = run_jobs(_trace_map_row, meshes)
    for previous, row in zip(rows, rows[1:]):
        ratio = previous["interpolation_error"] / row["interpolation_error"] if row["interpolation_error"] > 0 else 0.0
        row["interpolation_order"] = math.log2(ratio) if ratio > 0 else None
    return rows


def trace_constants(
    mesh: Mesh, problems: Sequence[str], levels: int, config: DtnlabConfig, trace_map: bool = False
) -> Dict[str, Any]:
    """Constants on ``mesh`` and ``levels`` successive refinements, with stability verdicts.

    With ``trace_map`` the payload also carries the trace-map diagnostics of
    every level.
    """
    unknown = sorted(set(problems) - set(TRACE_PROBLEMS))
    if unknown:
        raise ParameterError(f"unknown constant(s) {unknown}; known {list(TRACE_PROBLEMS)}", "cli", "trace_const")
    meshes = [mesh]
    for _ in range(levels):
        meshes.append(refine(meshes[-1]))
    start = time.perf_counter()
    per_level = run_jobs(lambda m: _level_constants(m, problems, config), meshes)
    constants: Dict[str, Any] = {}
    for name in problems:
        values = [entry[name] for entry in per_level if name in entry]
        if not values:
            continue
        stable = is_refinement_stable(values, config.trend) if len(values) > config.trend.consecutive else None
        constants[name] = {"values": values, "refinement_stable": stable}
    payload: Dict[str, Any] = {
        "domain": mesh.label,
        "mesh": mesh_summary(mesh),
        "levels": [m.level for m in meshes],
        "constants": constants,
        "tolerances": {"rayleigh": config.tolerances.rayleigh, "stable_rtol": config.trend.stable_rtol},
        "config": config.to_dict(),
        "provenance": provenance(mesh, {"constants": time.perf_counter() - start}),
    }
    if trace_map:
        payload["trace_map"] = trace_map_rows(meshes)
    return payload


def robin_family(domain: str, h: float, levels: int, config: DtnlabConfig) -> List[Mesh]:
    """Mesh sequence for a beta_0 scan.

    Geometric combs with n >= 3 teeth use the tooth-count sequence n-2, n-1, n
    at fixed h; every other domain uses ``levels`` refinements.
    """
    spec = parse_domain(domain)
    if isinstance(spec, Comb) and spec.layout is CombLayout.GEOMETRIC and spec.teeth_count >= 3:
        specs = [Comb(n) for n in range(spec.teeth_count - 2, spec.teeth_count + 1)]
        return run_jobs(lambda s: build_domain(s, h, config.mesh), specs)
    if levels < 3:
        raise ParameterError(f"beta_0 scan needs >= 3 levels, got {levels}", "robin", "beta_zero_scan")
    base = build_domain(spec, h, config.mesh)
    meshes = [base]
    for _ in range(levels - 1):
        meshes.append(refine(meshes[-1]))
    return meshes


def robin_scan(domain: str, h: float, betas: Sequence[float], levels: int, config: DtnlabConfig) -> Dict[str, Any]:
    start = time.perf_counter()
    meshes = robin_family(domain, h, levels, config)
    estimate = beta_zero_scan(meshes, betas, domain=domain, config=config)
    return {
        **estimate.to_dict(),
        "meshes": [mesh_summary(m) for m in meshes],
        "tolerances": {
            "diverging_factor": config.trend.diverging_factor,
            "consecutive": config.trend.consecutive,
        },
        "config": config.to_dict(),
        "provenance": provenance(meshes[-1], {"scan": time.perf_counter() - start}),
    }


def forest_table(m_from: int, m_to: int) -> List[Dict[str, float]]:
    if m_to < m_from:
        raise ParameterError(f"empty m range {m_from}..{m_to}", "analytic", "forest_norms")
    rows = []
    for m in range(m_from, m_to + 1):
        norms = forest_norms(m)
        rows.append(
            {"m": m, "h1_sq": norms.h1_sq, "upper_bound": norms.upper_bound, "boundary_sq": norms.boundary_sq}
        )
    return rows


def write_csv(rows: Iterable[Dict[str, Any]], columns: Sequence[str], stream: TextIO) -> None:
    """CSV with 17 significant digits; NaN is written as an empty cell."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        cells = []
        for column in columns:
            value = row[column]
            if isinstance(value, float):
                cells.append("" if math.isnan(value) else fmt(value))
            else:
                cells.append(str(value))
        writer.writerow(cells)


# report


def _comb_counts(documents: List[Dict[str, Any]]) -> Tuple[List[Dict[str, Any]], List[Dict[str, Any]]]:
    rows = []
    for doc in documents:
        params = (doc.get("mesh") or {}).get("parameters") or {}
        if doc["schema"] != "dtnlab.steklov" or params.get("variant") != "Comb":
            continue
        rows.append(
            {
                "teeth_count": params["teeth_count"],
                "layout": params.get("layout"),
                "level": doc["mesh"]["level"],
                "threshold": doc["count"]["threshold"],
                "count": doc["count"]["value"],
            }
        )
    rows.sort(key=lambda r: (r["layout"] or "", r["level"], r["teeth_count"]))
    verdicts = []
    known = [r for r in rows if r["count"] is not None]
    if len({r["teeth_count"] for r in known}) >= 2:
        first = min(known, key=lambda r: r["teeth_count"])
        last = max(known, key=lambda r: r["teeth_count"])
        growth = last["count"] - first["count"]
        required = (2.0 / 3.0) * (last["teeth_count"] - first["teeth_count"])
        verdicts.append(
            {
                "criterion": "comb spectral count grows at least linearly in the teeth count",
                "passed": growth >= required,
                "detail": f"count({last['teeth_count']}) - count({first['teeth_count']}) = {growth}, required {required:g}",
            }
        )
    return rows, verdicts


def _cusp_growth(documents: List[Dict[str, Any]]) -> Tuple[List[Dict[str, Any]], List[Dict[str, Any]]]:
    points = []
    for doc in documents:
        params = (doc.get("mesh") or {}).get("parameters") or {}
        if doc["schema"] != "dtnlab.trace_const" or params.get("variant") != "Cusp":
            continue
        trace = doc["constants"].get("trace")
        if trace:
            points.append((params["eps"], trace["values"][-1]))
    points.sort(key=lambda p: -p[0])
    rows = [{"eps": eps, "trace_constant": value} for eps, value in points]
    verdicts = []
    if len(points) >= 2:
        factors = growth_factors([value for _, value in points])
        for row, factor in zip(rows[1:], factors):
            row["growth_factor"] = factor
        overall = points[-1][1] / points[0][1]
        verdicts.append(
            {
                "criterion": "cusp trace constant increases as eps shrinks and grows by >= 1.8 over the sweep",
                "passed": all(f > 1.0 for f in factors) and overall >= 1.8,
                "detail": ", ".join(f"{f:.4g}" for f in factors) + f"; overall {overall:.4g}",
            }
        )
    return rows, verdicts


def _document_verdicts(doc: Dict[str, Any]) -> List[Dict[str, Any]]:
    kind = doc["schema"].split(".", 1)[1]
    domain = doc.get("domain", "?")
    if kind == "steklov":
        return [
            {
                "criterion": f"{domain}: kernel dimension is 1",
                "passed": doc["kernel_dimension"] == 1,
                "detail": f"kernel dimension {doc['kernel_dimension']}",
            }
        ]
    if kind == "robin":
        lo, hi = doc["beta0_interval"]
        return [
            {
                "criterion": f"{domain}: beta_0 bracket",
                "passed": True,
                "detail": f"beta_0 in [{lo}, {'inf' if hi is None else hi}]",
            }
        ]
    if kind == "trace_const":
        return [
            {
                "criterion": f"{domain}: {name} refinement-stable",
                "passed": entry["refinement_stable"],
                "detail": ", ".join(f"{v:.6g}" for v in entry["values"]),
            }
            for name, entry in doc["constants"].items()
            if entry["refinement_stable"] is not None
        ]
    return []


def merge_reports(paths: Sequence[Path]) -> Dict[str, Any]:
    """Merge result documents into one bundle with tables and verdict lines.

    Raises:
        SchemaError: If no input is given or an input is not a readable
            dtnlab result document.
    """
    if not paths:
        raise SchemaError("no result files given", "report", "merge")
    documents = [load_result(path) for path in paths]
    inputs = [{"path": str(path), "kind": check_schema(doc), "domain": doc.get("domain")} for path, doc in zip(paths, documents)]
    comb_rows, comb_verdicts = _comb_counts(documents)
    cusp_rows, cusp_verdicts = _cusp_growth(documents)
    verdicts = [v for doc in documents for v in _document_verdicts(doc)] + comb_verdicts + cusp_verdicts
    return {
        "inputs": inputs,
        "tables": {"comb_counts": comb_rows, "cusp_growth": cusp_rows},
        "verdicts": verdicts,
        "bundles": documents,
        "provenance": {"version": __version__},
    }
