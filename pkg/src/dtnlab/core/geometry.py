"""Parametric planar domains.

Each domain variant is a frozen dataclass that validates its parameters on
construction and knows its exact area and boundary length. The mesh builders
in :mod:`dtnlab.core.mesh` dispatch on the variant.

Example:
    ```python
    spec = Tooth(a=0.5)
    spec.area()             # a**3
    spec.boundary_length()  # 2a^2 + 2a*sqrt(1 + a^2)
    ```
"""

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import List, Tuple, Union

from ..errors import ParameterError

Point2 = Tuple[float, float]


def _check_finite(name: str, value: float, op: str = "build_domain") -> float:
    if not math.isfinite(value):
        raise ParameterError(f"{name} must be finite, got {value}", "mesh", op)
    return float(value)


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


class CombLayout(str, Enum):
    """Placement rule for comb teeth."""

    GEOMETRIC = "geometric"
    UNIFORM = "uniform"


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned rectangle (0, width) x (0, height)."""

    width: float
    height: float

    def __post_init__(self):
        for name in ("width", "height"):
            if _check_finite(name, getattr(self, name)) <= 0:
                raise ParameterError(f"rectangle {name} must be > 0", "mesh", "build_domain")

    def area(self) -> float:
        return self.width * self.height

    def boundary_length(self) -> float:
        return 2.0 * (self.width + self.height)

    def label(self) -> str:
        return f"rectangle(width={self.width!r},height={self.height!r})"


@dataclass(frozen=True)
class PolygonalDisk:
    """Regular polygon with `sides` vertices inscribed in a circle of `radius`."""

    radius: float
    sides: int

    def __post_init__(self):
        if _check_finite("radius", self.radius) <= 0:
            raise ParameterError("disk radius must be > 0", "mesh", "build_domain")
        if int(self.sides) != self.sides or self.sides < 8:
            raise ParameterError(f"disk sides must be an integer >= 8, got {self.sides}", "mesh", "build_domain")

    def area(self) -> float:
        return 0.5 * self.sides * self.radius**2 * math.sin(2.0 * math.pi / self.sides)

    def boundary_length(self) -> float:
        return 2.0 * self.sides * self.radius * math.sin(math.pi / self.sides)

    def smooth_area_gap(self) -> float:
        """Area missing with respect to the smooth disk."""
        return math.pi * self.radius**2 - self.area()

    def label(self) -> str:
        return f"disk(radius={self.radius!r},sides={self.sides})"


@dataclass(frozen=True)
class PolygonalAnnulus:
    """Region between two concentric regular polygons with equal side counts."""

    r_inner: float
    r_outer: float
    sides: int

    def __post_init__(self):
        _check_finite("r_inner", self.r_inner)
        _check_finite("r_outer", self.r_outer)
        if not 0 < self.r_inner < self.r_outer:
            raise ParameterError(
                f"annulus radii must satisfy 0 < r_inner < r_outer, got {self.r_inner}, {self.r_outer}",
                "mesh",
                "build_domain",
            )
        if int(self.sides) != self.sides or self.sides < 8:
            raise ParameterError(f"annulus sides must be an integer >= 8, got {self.sides}", "mesh", "build_domain")

    def area(self) -> float:
        factor = 0.5 * self.sides * math.sin(2.0 * math.pi / self.sides)
        return factor * (self.r_outer**2 - self.r_inner**2)

    def boundary_length(self) -> float:
        return 2.0 * self.sides * (self.r_outer + self.r_inner) * math.sin(math.pi / self.sides)

    def label(self) -> str:
        return f"annulus(r_inner={self.r_inner!r},r_outer={self.r_outer!r},sides={self.sides})"


@dataclass(frozen=True)
class Parallelogram:
    """Parallelogram {s e1 + t e2 : 0 < s < a, 0 < t < b} with unit vectors e1, e2."""

    e1: Point2
    e2: Point2
    a: float
    b: float

    def __post_init__(self):
        for name in ("e1", "e2"):
            vec = getattr(self, name)
            if len(vec) != 2:
                raise ParameterError(f"{name} must be a 2-vector", "mesh", "build_domain")
            norm = math.hypot(_check_finite(name, vec[0]), _check_finite(name, vec[1]))
            if abs(norm - 1.0) > 1e-9:
                raise ParameterError(f"{name} must be a unit vector, |{name}| = {norm!r}", "mesh", "build_domain")
        if abs(self.cosine()) >= 1.0 - 1e-12:
            raise ParameterError("parallelogram requires |<e1,e2>| < 1", "mesh", "build_domain")
        for name in ("a", "b"):
            if _check_finite(name, getattr(self, name)) <= 0:
                raise ParameterError(f"parallelogram side {name} must be > 0", "mesh", "build_domain")

    def cosine(self) -> float:
        return self.e1[0] * self.e2[0] + self.e1[1] * self.e2[1]

    def determinant(self) -> float:
        return self.e1[0] * self.e2[1] - self.e1[1] * self.e2[0]

    def area(self) -> float:
        return self.a * self.b * abs(self.determinant())

    def boundary_length(self) -> float:
        return 2.0 * (self.a + self.b)

    def label(self) -> str:
        e1 = f"{self.e1[0]!r}:{self.e1[1]!r}"
        e2 = f"{self.e2[0]!r}:{self.e2[1]!r}"
        return f"parallelogram(e1={e1},e2={e2},a={self.a!r},b={self.b!r})"


@dataclass(frozen=True)
class Tooth:
    """Triangle {0 < y < a, |x| < a^2 - a y} standing on the segment [-a^2, a^2] x {0}."""

    a: float

    def __post_init__(self):
        if not 0 < _check_finite("a", self.a) <= 1:
            raise ParameterError(f"tooth parameter a must lie in (0,1], got {self.a}", "mesh", "build_domain")

    def area(self) -> float:
        return self.a**3

    def slanted_length(self) -> float:
        return 2.0 * self.a * math.sqrt(1.0 + self.a**2)

    def boundary_length(self) -> float:
        return 2.0 * self.a**2 + self.slanted_length()

    def label(self) -> str:
        return f"tooth(a={self.a!r})"


@dataclass(frozen=True)
class Comb:
    """Box (-1,1) x (-1,0) with triangular teeth glued along the top side.

    The geometric layout places tooth n at x = 2^-n with height 4^-n. The
    uniform layout places N teeth of equal height at the centres of N equal
    cells of the top side.
    """

    teeth_count: int
    layout: CombLayout = CombLayout.GEOMETRIC
    height: float = 0.125

    def __post_init__(self):
        if int(self.teeth_count) != self.teeth_count or self.teeth_count < 1:
            raise ParameterError(f"comb teeth_count must be an integer >= 1, got {self.teeth_count}", "mesh", "build_domain")
        object.__setattr__(self, "layout", CombLayout(self.layout))
        if self.layout is CombLayout.UNIFORM:
            if not _is_power_of_two(int(self.teeth_count)):
                raise ParameterError("uniform comb teeth_count must be a power of two", "mesh", "build_domain")
            if not 0 < _check_finite("height", self.height) <= 0.5:
                raise ParameterError("uniform comb height must lie in (0, 1/2]", "mesh", "build_domain")
            inverse = Fraction(self.height).limit_denominator(2**60)
            if inverse.numerator != 1 or not _is_power_of_two(inverse.denominator) or float(inverse) != self.height:
                raise ParameterError("uniform comb height must be a power of 1/2", "mesh", "build_domain")
            if self.height**2 * self.teeth_count >= 1.0:
                raise ParameterError("uniform comb teeth overlap: need height^2 * teeth_count < 1", "mesh", "build_domain")

    def teeth(self) -> List[Tuple[Fraction, Fraction]]:
        """Exact (centre, height) pairs of the teeth, tooth 1 first."""
        n_teeth = int(self.teeth_count)
        if self.layout is CombLayout.GEOMETRIC:
            return [(Fraction(1, 2**n), Fraction(1, 4**n)) for n in range(1, n_teeth + 1)]
        height = Fraction(self.height)
        return [(Fraction(-1) + Fraction(2 * n - 1, n_teeth), height) for n in range(1, n_teeth + 1)]

    def area(self) -> float:
        return 2.0 + sum(float(a) ** 3 for _, a in self.teeth())

    def boundary_length(self) -> float:
        total = 6.0
        for _, a in self.teeth():
            af = float(a)
            total += 2.0 * af * math.sqrt(1.0 + af * af) - 2.0 * af * af
        return total

    def label(self) -> str:
        if self.layout is CombLayout.GEOMETRIC:
            return f"comb(n={int(self.teeth_count)})"
        return f"comb(n={int(self.teeth_count)},layout=uniform,height={self.height!r})"


@dataclass(frozen=True)
class Cusp:
    """Outward cusp {eps < x < 1, -x^4 < y < x^4} truncated at x = eps."""

    eps: float

    def __post_init__(self):
        if not 0 < _check_finite("eps", self.eps) < 1:
            raise ParameterError(f"cusp truncation eps must lie in (0,1), got {self.eps}", "mesh", "build_domain")

    def area(self) -> float:
        return 0.4 * (1.0 - self.eps**5)

    def boundary_length(self) -> float:
        """Length of the smooth boundary (two quartic arcs plus two vertical sides)."""
        from .analytic import gauss_legendre

        arc = gauss_legendre(lambda x: (1.0 + 16.0 * x**6) ** 0.5, self.eps, 1.0, panels=64)
        return 2.0 * arc + 2.0 + 2.0 * self.eps**4

    def label(self) -> str:
        return f"cusp(eps={self.eps!r})"


DomainSpec = Union[Rectangle, PolygonalDisk, PolygonalAnnulus, Parallelogram, Tooth, Comb, Cusp]


def unit_square() -> Rectangle:
    return Rectangle(1.0, 1.0)
