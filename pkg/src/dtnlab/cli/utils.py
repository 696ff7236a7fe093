"""Parsing and formatting helpers shared by the CLI commands."""

import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Dict, Iterable, List, Optional, Tuple, TypeVar, Union

from ..config import thread_count
from ..core.geometry import (
    Comb,
    CombLayout,
    Cusp,
    DomainSpec,
    Parallelogram,
    PolygonalAnnulus,
    PolygonalDisk,
    Rectangle,
    Tooth,
)
from ..errors import ParameterError, ParseError
from ..logging import get_logger

logger = get_logger()

T = TypeVar("T")
R = TypeVar("R")

Value = Union[float, Tuple[float, float], str]

_NUMBER = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
NAME_PATTERN = re.compile(r"\s*(?P<name>[A-Za-z_]\w*)\s*\(")
KEY_PATTERN = re.compile(r"\s*(?P<key>[A-Za-z_]\w*)\s*=\s*")
VALUE_PATTERN = re.compile(
    rf"(?P<vector>(?P<vx>{_NUMBER}):(?P<vy>{_NUMBER}))|(?P<number>{_NUMBER})|(?P<ident>[A-Za-z_]\w*)"
)
SEPARATOR_PATTERN = re.compile(r"\s*(?P<sep>[,)])")

# name -> (constructor, {key: default}); keys of int type must be given as integers
DOMAINS: Dict[str, Tuple[Callable[..., DomainSpec], Dict[str, Value]]] = {
    "rectangle": (lambda width, height: Rectangle(width, height), {"width": 1.0, "height": 1.0}),
    "square": (lambda side: Rectangle(side, side), {"side": 1.0}),
    "disk": (lambda radius, sides: PolygonalDisk(radius, sides), {"radius": 1.0, "sides": 64}),
    "annulus": (
        lambda r_inner, r_outer, sides: PolygonalAnnulus(r_inner, r_outer, sides),
        {"r_inner": 0.5, "r_outer": 1.0, "sides": 64},
    ),
    "parallelogram": (
        lambda e1, e2, a, b: Parallelogram(e1, e2, a, b),
        {"e1": (1.0, 0.0), "e2": (0.0, 1.0), "a": 1.0, "b": 1.0},
    ),
    "tooth": (lambda a: Tooth(a), {"a": 1.0}),
    "comb": (
        lambda n, layout, height: Comb(n, CombLayout(layout), height),
        {"n": 4, "layout": "geometric", "height": 0.125},
    ),
    "cusp": (lambda eps: Cusp(eps), {"eps": 0.1}),
}


def _coerce(key: str, default: Value, raw: Value, position: int) -> Value:
    if isinstance(default, tuple):
        if not isinstance(raw, tuple):
            raise ParseError(f"'{key}' expects an x:y vector", position)
        return raw
    if isinstance(default, str):
        if not isinstance(raw, str):
            raise ParseError(f"'{key}' expects an identifier", position)
        if key == "layout" and raw not in {layout.value for layout in CombLayout}:
            raise ParseError(f"unknown comb layout '{raw}'", position)
        return raw
    if not isinstance(raw, float):
        raise ParseError(f"'{key}' expects a number", position)
    if isinstance(default, int):
        if raw != int(raw):
            raise ParseError(f"'{key}' expects an integer, got {raw!r}", position)
        return int(raw)
    return raw


def parse_domain(text: str) -> DomainSpec:
    """Parse ``name(key=value,...)`` into a DomainSpec.

    Values are numbers, ``x:y`` vectors or bare identifiers. Omitted keys
    take their defaults.

    Raises:
        ParseError: On malformed input, with the 0-based character position.
        ParameterError: If the parsed values violate a domain constraint.
    """
    match = NAME_PATTERN.match(text)
    if not match:
        raise ParseError("expected a domain name followed by '('", len(text) - len(text.lstrip()))
    name = match.group("name").lower()
    if name not in DOMAINS:
        raise ParseError(f"unknown domain '{name}'; known: {', '.join(DOMAINS)}", match.start("name"))
    constructor, defaults = DOMAINS[name]
    values: Dict[str, Value] = dict(defaults)
    seen = set()
    pos = match.end()

    closing = SEPARATOR_PATTERN.match(text, pos)
    if closing and closing.group("sep") == ")":
        pos = closing.end()
    else:
        while True:
            key_match = KEY_PATTERN.match(text, pos)
            if not key_match:
                raise ParseError("expected key=value", pos)
            key = key_match.group("key")
            if key not in defaults:
                raise ParseError(f"unknown key '{key}' for {name}; known: {', '.join(defaults)}", key_match.start("key"))
            if key in seen:
                raise ParseError(f"duplicate key '{key}'", key_match.start("key"))
            seen.add(key)
            pos = key_match.end()
            value_match = VALUE_PATTERN.match(text, pos)
            if not value_match:
                raise ParseError(f"expected a value for '{key}'", pos)
            if value_match.group("vector"):
                raw: Value = (float(value_match.group("vx")), float(value_match.group("vy")))
            elif value_match.group("number"):
                raw = float(value_match.group("number"))
            else:
                raw = value_match.group("ident")
            values[key] = _coerce(key, defaults[key], raw, pos)
            pos = value_match.end()
            sep = SEPARATOR_PATTERN.match(text, pos)
            if not sep:
                raise ParseError("expected ',' or ')'", pos)
            pos = sep.end()
            if sep.group("sep") == ")":
                break
    if text[pos:].strip():
        raise ParseError("unexpected trailing input", pos + len(text[pos:]) - len(text[pos:].lstrip()))
    spec = constructor(**values)
    logger.debug(f"Parsed domain {text!r} -> {spec}")
    return spec


def parse_floats(text: str, what: str = "list") -> List[float]:
    """Comma-separated numbers, e.g. ``0.1,1,10``."""
    items = [item.strip() for item in text.split(",")]
    result = []
    offset = 0
    for item in items:
        if not re.fullmatch(_NUMBER, item):
            raise ParseError(f"invalid number {item!r} in {what}", text.find(item, offset), op=what)
        result.append(float(item))
        offset += len(item) + 1
    return result


@dataclass(frozen=True)
class InitialField:
    """Initial boundary field for ``evolve``.

    ``kind`` is one of constant, x, y (coordinates), component or segment
    (indicator of one boundary tag).
    """

    kind: str
    tag: Optional[int] = None


def parse_init(text: str) -> InitialField:
    """Parse ``constant``, ``x``, ``y``, ``indicator:component=K`` or ``indicator:segment=K``."""
    text = text.strip()
    if text in ("constant", "x", "y"):
        return InitialField(text)
    match = re.fullmatch(r"indicator:(?P<kind>component|segment)=(?P<tag>\d+)", text)
    if not match:
        raise ParseError(
            "initial field must be constant, x, y, indicator:component=K or indicator:segment=K", 0, op="init"
        )
    return InitialField(match.group("kind"), int(match.group("tag")))


def parse_overrides(items: Optional[Iterable[str]]) -> Dict[str, Any]:
    """``key=value`` tolerance overrides from repeated ``--set`` options."""
    overrides: Dict[str, Any] = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ParameterError(f"override must look like key=value, got {item!r}", "cli", "override")
        overrides[key.strip()] = float(value) if re.fullmatch(_NUMBER, value.strip()) else value.strip()
    return overrides


def run_jobs(func: Callable[[T], R], items: Iterable[T]) -> List[R]:
    """Map ``func`` over independent jobs, using up to DTNLAB_THREADS workers; order is kept."""
    items = list(items)
    workers = min(thread_count(), len(items)) or 1
    if workers == 1:
        return [func(item) for item in items]
    logger.debug(f"Running {len(items)} jobs on {workers} threads")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))
