"""Tolerances, solver settings and trend-test thresholds.

Settings are read from a `dtnlab.toml` file (`[dtnlab]` table) or from the
`[tool.dtnlab]` table of a `pyproject.toml`. CLI flags override file values,
which override the defaults below.

Example:
    ```toml
    [tool.dtnlab.trend]
    stable_rtol = 0.05

    [tool.dtnlab.solver]
    dense_limit = 3000
    ```
"""

import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional

import tomli
import tomli_w

from .errors import ParameterError
from .logging import get_logger

logger = get_logger()

CONFIG_FILENAMES = ("dtnlab.toml", "pyproject.toml")


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances checked by invariants and reports."""

    symmetry: float = 1e-14
    schur_constant: float = 1e-10
    harmonic_residual: float = 1e-10
    interior_residual: float = 1e-8
    eigen_residual: float = 1e-8
    orthonormality: float = 1e-10
    kernel_relative: float = 1e-9
    constant_deviation: float = 1e-6
    reconstruction: float = 1e-8
    rayleigh: float = 1e-10
    row_sum: float = 1e-10
    markov_min_entry: float = -1e-8
    gap_crosscheck: float = 1e-8
    robin_singular: float = 1e-8


@dataclass(frozen=True)
class SolverSettings:
    """Eigensolver selection and iteration limits."""

    dense_limit: int = 2000
    dense_boundary_limit: int = 4000
    lanczos_tol: float = 1e-10
    max_iterations: int = 5000
    shift: float = -1.0
    truncation_modes: int = 200


@dataclass(frozen=True)
class TrendSettings:
    """Thresholds of the refinement trend tests."""

    stable_rtol: float = 0.10
    diverging_factor: float = 1.5
    consecutive: int = 2


@dataclass(frozen=True)
class MeshSettings:
    """Limits of the adaptive mesh builders."""

    max_depth: int = 52
    min_feature: float = 1e-12


@dataclass(frozen=True)
class SpectralSettings:
    """Defaults of spectral counting studies."""

    count_threshold: float = 1.5


@dataclass(frozen=True)
class SemigroupSettings:
    """Defaults of the boundary semigroup diagnostics."""

    irreducibility_threshold: float = 1e-12
    times: tuple = (0.1, 1.0, 10.0)


def _invalid(key: str, value: Any, expected: str) -> ParameterError:
    return ParameterError(f"invalid value for '{key}': {value!r} (expected {expected})", "config", "override")


def _to_float(key: str, value: Any) -> float:
    if isinstance(value, bool):
        raise _invalid(key, value, "a number")
    try:
        return float(value.strip() if isinstance(value, str) else value)
    except (TypeError, ValueError) as e:
        raise _invalid(key, value, "a number") from e


def _to_int(key: str, value: Any) -> int:
    number = _to_float(key, value)
    if not number.is_integer():
        raise _invalid(key, value, "an integer")
    return int(number)


def _coerce(key: str, current: Any, value: Any) -> Any:
    """Convert an override to the type of the setting it replaces.

    Integer settings reject fractional values. Sequence settings take a list
    or a comma-separated string of numbers.
    """
    if isinstance(current, tuple):
        items = value.split(",") if isinstance(value, str) else value
        if not isinstance(items, (list, tuple)) or not items:
            raise _invalid(key, value, "a nonempty list of numbers")
        return tuple(_to_float(key, item) for item in items)
    if isinstance(current, int):
        return _to_int(key, value)
    return _to_float(key, value)


@dataclass(frozen=True)
class DtnlabConfig:
    """Effective configuration of a run."""

    tolerances: Tolerances = field(default_factory=Tolerances)
    solver: SolverSettings = field(default_factory=SolverSettings)
    trend: TrendSettings = field(default_factory=TrendSettings)
    mesh: MeshSettings = field(default_factory=MeshSettings)
    spectral: SpectralSettings = field(default_factory=SpectralSettings)
    semigroup: SemigroupSettings = field(default_factory=SemigroupSettings)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def with_overrides(self, overrides: Dict[str, Any]) -> "DtnlabConfig":
        """Return a copy with dotted-key overrides applied.

        Args:
            overrides: Mapping such as ``{"trend.stable_rtol": 0.05}``. Bare
                keys are looked up in the tolerances section.

        Raises:
            ParameterError: If a key does not name a known setting or a
                value does not fit the type of its setting.
        """
        sections = {f.name: getattr(self, f.name) for f in fields(self)}
        for key, value in overrides.items():
            section_name, _, name = key.rpartition(".")
            section_name = section_name or "tolerances"
            if section_name not in sections:
                raise ParameterError(f"unknown config section '{section_name}'", "config", "override")
            section = sections[section_name]
            known = {f.name: f for f in fields(section)}
            if name not in known:
                raise ParameterError(f"unknown config key '{key}'", "config", "override")
            coerced = _coerce(key, getattr(section, name), value)
            sections[section_name] = replace(section, **{name: coerced})
        return DtnlabConfig(**sections)


DEFAULT_CONFIG = DtnlabConfig()


def read_toml_file(file_path: Path) -> Dict[str, Any]:
    """Read and parse a TOML file, returning an empty mapping if it is missing."""
    if not file_path.is_file():
        logger.debug(f"TOML file not found: {file_path}")
        return {}
    try:
        return tomli.loads(file_path.read_text())
    except tomli.TOMLDecodeError as e:
        raise ParameterError(f"invalid TOML in {file_path}: {e}", "config", "load") from e


def _section(data: Dict[str, Any]) -> Dict[str, Any]:
    if "dtnlab" in data:
        return data["dtnlab"]
    return data.get("tool", {}).get("dtnlab", {})


def _flatten(table: Dict[str, Any], prefix: str = "") -> Dict[str, Any]:
    flat: Dict[str, Any] = {}
    for key, value in table.items():
        dotted = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, f"{dotted}."))
        else:
            flat[dotted] = value
    return flat


def find_config_file(cwd: Optional[Path] = None) -> Optional[Path]:
    """Find a config file carrying a dtnlab table in the given directory."""
    cwd = cwd or Path.cwd()
    for name in CONFIG_FILENAMES:
        candidate = cwd / name
        if candidate.is_file() and _section(read_toml_file(candidate)):
            return candidate
    return None


def load_config(config_file: Optional[Path] = None) -> DtnlabConfig:
    """Load the effective configuration.

    Args:
        config_file: Explicit config file. When omitted, `dtnlab.toml` and
            `pyproject.toml` in the working directory are searched.

    Returns:
        DtnlabConfig with file values applied over the defaults.
    """
    path = config_file or find_config_file()
    if path is None:
        return DEFAULT_CONFIG
    if config_file is not None and not config_file.is_file():
        raise ParameterError(f"config file not found: {config_file}", "config", "load")
    table = _section(read_toml_file(path))
    logger.debug(f"Loaded dtnlab config from {path}: {table}")
    return DEFAULT_CONFIG.with_overrides(_flatten(table))


def save_config(config: DtnlabConfig, path: Path) -> None:
    """Write the configuration as a `[dtnlab]` table."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        tomli_w.dump({"dtnlab": config.to_dict()}, f)


def thread_count() -> int:
    """Worker-thread cap from DTNLAB_THREADS (default 1)."""
    raw = os.environ.get("DTNLAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        logger.warning(f"Ignoring invalid DTNLAB_THREADS={raw!r}")
        return 1
