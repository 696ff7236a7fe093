"""CLI entry point for dtnlab."""

import sys
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import typer
from rich.console import Console
from rich.markup import escape
from rich.table import Table

from .. import __version__
from ..config import DtnlabConfig, load_config, save_config
from ..core.formats import dumps_result, mesh_checksum, write_field
from ..errors import EXIT_IO, DtnlabError
from ..logging import get_logger, setup_logging
from . import commands
from .utils import parse_floats, parse_init, parse_overrides

logger = get_logger()

app = typer.Typer(
    help="Dirichlet-to-Neumann operators and Steklov spectra on rough planar domains",
    add_completion=False,
    invoke_without_command=True,
)

console = Console()
err_console = Console(stderr=True)


@dataclass
class State:
    config: DtnlabConfig


def _fail(error: Exception) -> None:
    """Print the one-line error and exit with the matching code."""
    if isinstance(error, DtnlabError):
        err_console.print(error.one_line(), markup=False, highlight=False, soft_wrap=True)
        raise typer.Exit(error.exit_code) from error
    err_console.print(f"ERR cli.io: {error}", markup=False, highlight=False, soft_wrap=True)
    raise typer.Exit(EXIT_IO) from error


def _config(ctx: typer.Context, overrides: Optional[List[str]]) -> DtnlabConfig:
    state: Optional[State] = ctx.obj
    config = state.config if state is not None else load_config()
    return config.with_overrides(parse_overrides(overrides)) if overrides else config


def _emit(text: str, output: Optional[Path]) -> None:
    """Write a machine payload to a file or stdout."""
    if output is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    output.parent.mkdir(parents=True, exist_ok=True)
    output.write_text(text)
    console.print(f"[green]Wrote {output}[/]")


def _version_callback(value: bool) -> None:
    if value:
        console.print(f"dtnlab {__version__}")
        raise typer.Exit()


MESH_OPTION = typer.Option(None, "--mesh", help="dtnmesh file to read", dir_okay=False)
DOMAIN_OPTION = typer.Option(None, "--domain", "-d", help='Domain, e.g. "tooth(a=0.5)"')
H_OPTION = typer.Option(None, "--h", help="Target mesh size")
REFINE_OPTION = typer.Option(0, "--refine", "-r", min=0, help="Midpoint refinements applied after loading")
SET_OPTION = typer.Option(None, "--set", help="Config override key=value (repeatable)")
OUTPUT_OPTION = typer.Option(None, "--output", "-o", help="Output file (stdout when omitted)", dir_okay=False)


@app.callback()
def main(
    ctx: typer.Context,
    version: bool = typer.Option(
        False, "--version", "-v", callback=_version_callback, is_eager=True, help="Show version and exit"
    ),
    config_file: Optional[Path] = typer.Option(None, "--config", "-c", help="Config file (dtnlab.toml or pyproject.toml)"),
    log_level: Optional[str] = typer.Option(None, "--log-level", help="Log level (default WARNING)"),
    save_config_to: Optional[Path] = typer.Option(None, "--save-config", help="Write the effective config and exit"),
) -> None:
    """Dirichlet-to-Neumann operators and Steklov spectra on rough planar domains."""
    setup_logging(log_level.upper() if log_level else None)
    try:
        ctx.obj = State(config=load_config(config_file))
        if save_config_to is not None:
            save_config(ctx.obj.config, save_config_to)
            console.print(f"[green]Saved config to {save_config_to}[/]")
            raise typer.Exit()
    except (DtnlabError, OSError) as e:
        _fail(e)

    if ctx.invoked_subcommand is None:
        console.print(ctx.get_help())
        raise typer.Exit()


@app.command(name="version")
def version_command() -> None:
    """Show dtnlab version and exit."""
    console.print(f"dtnlab {__version__}")


@app.command(name="mesh")
def mesh_command(
    ctx: typer.Context,
    domain: str = typer.Option(..., "--domain", "-d", help='Domain, e.g. "comb(n=3)"'),
    h: float = typer.Option(..., "--h", help="Target mesh size"),
    refine: int = REFINE_OPTION,
    output: Path = typer.Option(..., "--output", "-o", help="dtnmesh file to write", dir_okay=False),
    overrides: Optional[List[str]] = SET_OPTION,
) -> None:
    """Build a mesh and write it in dtnmesh format."""
    try:
        mesh, path = commands.make_mesh(domain, h, refine, output, _config(ctx, overrides))
    except (DtnlabError, OSError) as e:
        _fail(e)
    table = Table(title=mesh.label)
    for column in ("vertices", "triangles", "boundary edges", "components", "h"):
        table.add_column(column)
    table.add_row(
        str(mesh.n_vertices),
        str(mesh.n_triangles),
        str(mesh.n_boundary_edges),
        str(len(mesh.components)),
        f"{mesh.h:.6g}",
    )
    console.print(table)
    console.print(f"[green]Wrote {path}[/] (sha256 {mesh_checksum(mesh)[:12]})")


@app.command(name="assemble")
def assemble_command(
    ctx: typer.Context,
    outdir: Path = typer.Argument(..., help="Directory for the sym-coord matrices", file_okay=False),
    mesh_file: Optional[Path] = MESH_OPTION,
    domain: Optional[str] = DOMAIN_OPTION,
    h: Optional[float] = H_OPTION,
    refine: int = REFINE_OPTION,
    beta: Optional[float] = typer.Option(None, "--beta", help="Also write the Robin matrix K - beta B"),
    schur: bool = typer.Option(False, "--schur", help="Also write the dense Schur complement S"),
) -> None:
    """Assemble K, M and B and write them in sym-coord format."""
    try:
        config = _config(ctx, None)
        mesh = commands.resolve_mesh(mesh_file, domain, h, refine, config)
        written = commands.assemble(mesh, outdir, beta, schur)
    except (DtnlabError, OSError) as e:
        _fail(e)
    table = Table()
    for column in ("matrix", "n", "nnz", "path"):
        table.add_column(column)
    for name, info in written.items():
        table.add_row(name, str(info["n"]), str(info["nnz"]), info["path"])
    console.print(table)


@app.command(name="steklov")
def steklov_command(
    ctx: typer.Context,
    mesh_file: Optional[Path] = MESH_OPTION,
    domain: Optional[str] = DOMAIN_OPTION,
    h: Optional[float] = H_OPTION,
    refine: int = REFINE_OPTION,
    k: int = typer.Option(8, "--k", "-k", min=1, help="Number of eigenpairs"),
    method: str = typer.Option("auto", "--method", help="auto, dense or lanczos"),
    check_kernel: bool = typer.Option(False, "--check-kernel", help="Fail unless the kernel is the constants"),
    vectors: Optional[Path] = typer.Option(None, "--vectors", help="Directory for dtnfield eigenvector files"),
    overrides: Optional[List[str]] = SET_OPTION,
    output: Optional[Path] = OUTPUT_OPTION,
) -> None:
    """Compute the lowest Steklov eigenpairs and write them as JSON."""
    try:
        config = _config(ctx, overrides)
        mesh = commands.resolve_mesh(mesh_file, domain, h, refine, config)
        payload = commands.steklov(mesh, k, config, method, check_kernel, vectors)
        _emit(dumps_result("steklov", payload), output)
    except (DtnlabError, OSError) as e:
        _fail(e)


@app.command(name="evolve")
def evolve_command(
    ctx: typer.Context,
    mesh_file: Optional[Path] = MESH_OPTION,
    domain: Optional[str] = DOMAIN_OPTION,
    h: Optional[float] = H_OPTION,
    refine: int = REFINE_OPTION,
    times: Optional[str] = typer.Option(None, "--times", "-t", help="Comma-separated times (default from config)"),
    init: str = typer.Option("x", "--init", help="constant, x, y, indicator:component=K or indicator:segment=K"),
    field_out: Optional[Path] = typer.Option(None, "--field", help="Write the field at the last time (dtnfield)"),
    overrides: Optional[List[str]] = SET_OPTION,
    output: Optional[Path] = OUTPUT_OPTION,
) -> None:
    """Evolve a boundary field by the DtN semigroup and tabulate the decay (CSV)."""
    try:
        config = _config(ctx, overrides)
        grid = parse_floats(times, "times") if times else list(config.semigroup.times)
        initial = parse_init(init)
        mesh = commands.resolve_mesh(mesh_file, domain, h, refine, config)
        rows, field = commands.evolve_series(mesh, grid, initial, config)
        if field_out is not None:
            write_field(field, field_out, indices=mesh.boundary_vertices)
        if output is None:
            commands.write_csv(rows, commands.EVOLVE_COLUMNS, sys.stdout)
        else:
            output.parent.mkdir(parents=True, exist_ok=True)
            with open(output, "w", newline="") as stream:
                commands.write_csv(rows, commands.EVOLVE_COLUMNS, stream)
            console.print(f"[green]Wrote {output}[/]")
    except (DtnlabError, OSError) as e:
        _fail(e)


@app.command(name="trace-const")
def trace_const_command(
    ctx: typer.Context,
    mesh_file: Optional[Path] = MESH_OPTION,
    domain: Optional[str] = DOMAIN_OPTION,
    h: Optional[float] = H_OPTION,
    refine: int = REFINE_OPTION,
    levels: int = typer.Option(0, "--levels", min=0, help="Additional refinement levels to sweep"),
    problems: str = typer.Option("trace,seminorm,mazya", "--constants", help=f"Any of {','.join(commands.TRACE_PROBLEMS)}"),
    trace_map: bool = typer.Option(False, "--trace-map", help="Add trace-map diagnostics per level"),
    overrides: Optional[List[str]] = SET_OPTION,
    output: Optional[Path] = OUTPUT_OPTION,
) -> None:
    """Trace, Poincare and Maz'ya constants over refinements (JSON)."""
    try:
        config = _config(ctx, overrides)
        mesh = commands.resolve_mesh(mesh_file, domain, h, refine, config)
        names = [p.strip() for p in problems.split(",") if p.strip()]
        payload = commands.trace_constants(mesh, names, levels, config, trace_map)
        _emit(dumps_result("trace_const", payload), output)
    except (DtnlabError, OSError) as e:
        _fail(e)


@app.command(name="robin")
def robin_command(
    ctx: typer.Context,
    domain: str = typer.Option(..., "--domain", "-d", help='Domain, e.g. "comb(n=3)"'),
    h: float = typer.Option(..., "--h", help="Target mesh size of the coarsest mesh"),
    betas: str = typer.Option("0.1,0.5,2", "--betas", help="Comma-separated boundary weights"),
    levels: int = typer.Option(3, "--levels", min=1, help="Refinement levels (non-comb domains)"),
    overrides: Optional[List[str]] = SET_OPTION,
    output: Optional[Path] = OUTPUT_OPTION,
) -> None:
    """Scan Robin lower-bound gaps and bracket beta_0 (JSON)."""
    try:
        config = _config(ctx, overrides)
        payload = commands.robin_scan(domain, h, parse_floats(betas, "betas"), levels, config)
        _emit(dumps_result("robin", payload), output)
    except (DtnlabError, OSError) as e:
        _fail(e)


@app.command(name="examples")
def examples_command(
    m_from: int = typer.Option(3, "--m-from", help="First forest level"),
    m_to: int = typer.Option(10, "--m-to", help="Last forest level"),
    output: Optional[Path] = OUTPUT_OPTION,
) -> None:
    """Tabulate the exact cylinder-forest norms (CSV)."""
    try:
        rows = commands.forest_table(m_from, m_to)
        if output is None:
            commands.write_csv(rows, commands.EXAMPLES_COLUMNS, sys.stdout)
        else:
            with open(output, "w", newline="") as stream:
                commands.write_csv(rows, commands.EXAMPLES_COLUMNS, stream)
            console.print(f"[green]Wrote {output}[/]")
    except (DtnlabError, OSError) as e:
        _fail(e)


@app.command(name="report")
def report_command(
    inputs: Optional[List[Path]] = typer.Argument(None, help="Result JSON files"),
    output: Optional[Path] = OUTPUT_OPTION,
) -> None:
    """Merge result files into one bundle with verdict lines (JSON)."""
    try:
        bundle = commands.merge_reports(inputs or [])
    except (DtnlabError, OSError) as e:
        _fail(e)
    for verdict in bundle["verdicts"]:
        mark = "[green]PASS[/]" if verdict["passed"] else "[red]FAIL[/]"
        err_console.print(
            f"{mark} {escape(verdict['criterion'])}: {escape(verdict['detail'])}", highlight=False, soft_wrap=True
        )
    try:
        _emit(dumps_result("report", bundle), output)
    except OSError as e:
        _fail(e)


def run() -> None:
    """Run the CLI application."""
    app()


if __name__ == "__main__":
    run()
