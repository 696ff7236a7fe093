"""Exception hierarchy shared by the numerical core and the CLI.

Every error knows the module and operation it was raised from, so the CLI can
print a single machine-parsable line::

    ERR spectral.steklov_spectrum: eigensolver did not converge ...

and pick the exit code that matches the failure kind.
"""

from typing import Any, Optional, Sequence

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERIC = 2
EXIT_IO = 3


class DtnlabError(Exception):
    """Base class for all dtnlab failures."""

    exit_code: int = EXIT_NUMERIC

    def __init__(self, message: str, module: str = "dtnlab", op: str = "run"):
        super().__init__(message)
        self.module = module
        self.op = op

    @property
    def prefix(self) -> str:
        return f"ERR {self.module}.{self.op}:"

    def one_line(self) -> str:
        """Render the error as a single line with its machine prefix."""
        text = " ".join(str(self).split())
        return f"{self.prefix} {text}"


class ParameterError(DtnlabError, ValueError):
    """Invalid parameter value or combination."""

    exit_code = EXIT_USAGE


class ParseError(ParameterError):
    """Malformed domain specification or option string."""

    def __init__(self, message: str, position: int, module: str = "cli", op: str = "parse"):
        super().__init__(f"parse error at position {position}: {message}", module, op)
        self.position = position


class ResolutionError(DtnlabError):
    """A geometric feature cannot be resolved by the requested mesh."""

    exit_code = EXIT_USAGE

    def __init__(self, message: str, feature: str, module: str = "mesh", op: str = "build_domain"):
        super().__init__(f"{feature}: {message}", module, op)
        self.feature = feature


class TagError(DtnlabError, KeyError):
    """Unknown boundary component or segment tag."""

    exit_code = EXIT_USAGE

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class RangeError(DtnlabError):
    """A request falls outside the range that was actually computed."""

    exit_code = EXIT_USAGE


class AssemblyError(DtnlabError):
    """Finite element assembly failed, e.g. on a degenerate triangle."""

    def __init__(self, message: str, triangle: int, module: str = "assembly", op: str = "stiffness"):
        super().__init__(message, module, op)
        self.triangle = triangle


class FactorizationError(DtnlabError):
    """A sparse factorization was singular or failed."""


class TopologyError(DtnlabError):
    """The mesh violates a connectivity requirement."""


class PreconditionError(DtnlabError):
    """Input data does not satisfy a documented precondition."""

    def __init__(self, message: str, residual: float, module: str = "dtn", op: str = "weak_normal_derivative"):
        super().__init__(f"{message} (residual {residual:.3e})", module, op)
        self.residual = residual


class NumericError(DtnlabError):
    """An eigensolver or checked numerical identity failed."""

    def __init__(
        self,
        message: str,
        residuals: Optional[Sequence[float]] = None,
        module: str = "spectral",
        op: str = "eigensolve",
    ):
        super().__init__(message, module, op)
        self.residuals = list(residuals) if residuals is not None else []


class TruncationError(DtnlabError):
    """A truncated spectral decomposition cannot honour the request."""


class RobinRefusal(DtnlabError):
    """Robin solve refused because the boundary weight lies in the diverging range."""

    def __init__(self, message: str, report: Any, module: str = "robin", op: str = "robin_solve"):
        super().__init__(message, module, op)
        self.report = report


class MeshFormatError(DtnlabError):
    """A mesh, matrix or field file could not be read."""

    exit_code = EXIT_IO


class SchemaError(DtnlabError):
    """A result file does not match the expected schema."""

    exit_code = EXIT_IO
