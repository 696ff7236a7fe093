"""CLI package for dtnlab."""

from .commands import assemble, merge_reports, resolve_mesh, steklov
from .main import app
from .utils import parse_domain

__all__ = [
    "app",
    "assemble",
    "steklov",
    "merge_reports",
    "resolve_mesh",
    "parse_domain",
]
