"""Trend tests over refinement (or tooth-count) sequences.

A sequence is *refinement-stable* when its last ``consecutive`` relative
changes stay below ``stable_rtol``, and *diverging* when its last
``consecutive`` growth factors reach ``diverging_factor``.
"""

import math
from enum import Enum
from typing import Callable, List, Optional, Sequence, TypeVar

from ..config import DEFAULT_CONFIG, TrendSettings
from ..errors import ParameterError
from .mesh import Mesh, refine

T = TypeVar("T")


class Trend(str, Enum):
    STABLE = "stable"
    DIVERGING = "diverging"
    DRIFTING = "drifting"


def refinement_values(mesh: Mesh, levels: int, measure: Callable[[Mesh], T]) -> List[T]:
    """Evaluate ``measure`` on a mesh and on ``levels`` successive refinements."""
    values = [measure(mesh)]
    for _ in range(levels):
        mesh = refine(mesh)
        values.append(measure(mesh))
    return values


def _require(values: Sequence[float], consecutive: int) -> None:
    if len(values) < consecutive + 1:
        raise ParameterError(
            f"trend test needs at least {consecutive + 1} values, got {len(values)}", "trend", "classify"
        )


def relative_changes(values: Sequence[float]) -> List[float]:
    changes = []
    for prev, cur in zip(values[:-1], values[1:]):
        if prev == cur:
            changes.append(0.0)
        elif prev == 0.0:
            changes.append(math.inf)
        else:
            changes.append(abs(cur - prev) / abs(prev))
    return changes


def growth_factors(values: Sequence[float]) -> List[float]:
    """Successive ratios v[i+1] / v[i]; 1 for 0 -> 0 and inf for 0 -> positive."""
    factors = []
    for prev, cur in zip(values[:-1], values[1:]):
        if prev == 0.0:
            factors.append(1.0 if cur == 0.0 else math.inf)
        else:
            factors.append(cur / prev)
    return factors


def is_refinement_stable(values: Sequence[float], settings: Optional[TrendSettings] = None) -> bool:
    settings = settings or DEFAULT_CONFIG.trend
    _require(values, settings.consecutive)
    return all(c <= settings.stable_rtol for c in relative_changes(values)[-settings.consecutive :])


def is_diverging(values: Sequence[float], settings: Optional[TrendSettings] = None) -> bool:
    settings = settings or DEFAULT_CONFIG.trend
    _require(values, settings.consecutive)
    return all(f >= settings.diverging_factor for f in growth_factors(values)[-settings.consecutive :])


def classify(values: Sequence[float], settings: Optional[TrendSettings] = None) -> Trend:
    if is_diverging(values, settings):
        return Trend.DIVERGING
    if is_refinement_stable(values, settings):
        return Trend.STABLE
    return Trend.DRIFTING
