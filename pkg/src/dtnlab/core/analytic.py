"""Closed-form and quadrature oracles for the explicit examples.

Covers the cylinder-forest sequence with a degenerate trace (summed as
geometric series), the cusp trace integral, the tooth constants, the strip
trace inequality on a parallelogram and sampled L4 Maz'ya-Sobolev ratios.
"""

import math
from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import numpy.polynomial.polynomial as P
import scipy.sparse as sp
from scipy.integrate import quad

from ..errors import NumericError, ParameterError
from ..logging import get_logger
from .assembly import boundary_mass, stiffness
from .mesh import Mesh

logger = get_logger()

_GAUSS_ORDER = 8


def gauss_legendre(
    f: Callable[[np.ndarray], np.ndarray], a: float, b: float, panels: int = 64, order: int = _GAUSS_ORDER
) -> float:
    """Composite Gauss-Legendre rule with ``panels`` equal panels on [a, b]."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    x = mid[:, None] + half[:, None] * nodes[None, :]
    values = np.asarray(f(x), dtype=float)
    return float(np.sum(half[:, None] * weights[None, :] * values))


# cylinder forest


@dataclass(frozen=True)
class ForestNorms:
    """Exact norms of the m-th function of the cylinder-forest sequence.

    ``boundary_sq`` integrates the square of the limiting trace candidate over
    the accumulation square {0} x [0,1] x [0,1] only.
    """

    m: int
    l2_sq: float
    grad_sq: float
    boundary_sq: float
    upper_bound: float

    @property
    def h1_sq(self) -> float:
        return self.l2_sq + self.grad_sq

    def to_dict(self):
        return {
            "m": self.m,
            "h1_sq": self.h1_sq,
            "grad_sq": self.grad_sq,
            "l2_sq": self.l2_sq,
            "upper_bound": self.upper_bound,
            "boundary_sq": self.boundary_sq,
        }


def _tail_sums(x: float, m: int) -> Tuple[float, float]:
    """(sum_{n>=m} n x^n, sum_{n>=m} x^n) for 0 < x < 1."""
    weighted = x**m * (m - (m - 1) * x) / (1.0 - x) ** 2
    plain = x**m / (1.0 - x)
    return weighted, plain


def forest_norms(m: int) -> ForestNorms:
    """Closed-form norms for level m; the level-n group holds n - 1 cylinders of radius 4^-n.

    Raises:
        ParameterError: For m < 3, where the indicator plane cuts a larger cylinder.
    """
    if isinstance(m, bool) or int(m) != m or m < 3:
        raise ParameterError(
            f"forest level m must be an integer >= 3, got {m}; for m < 3 the cut plane crosses a cylinder",
            "analytic",
            "forest_norms",
        )
    m = int(m)
    weighted, plain = _tail_sums(1.0 / 16.0, m)
    cylinders = math.pi * (weighted - plain)
    clip_sq = 1.0 - (2.0 / 3.0) * 3.0 ** (-m)
    return ForestNorms(
        m=m,
        l2_sq=cylinders * clip_sq,
        grad_sq=cylinders * 3.0**m,
        boundary_sq=clip_sq,
        upper_bound=math.pi * weighted * (1.0 + 9.0**m),
    )


# cusp


@dataclass(frozen=True)
class CuspIntegral:
    eps: float
    value: float
    error: float
    cross_check: float

    @property
    def agreement(self) -> float:
        return abs(self.value - self.cross_check) / abs(self.value)


def cusp_trace_integral(eps: float) -> CuspIntegral:
    """Integral of |u|^2 d sigma along the upper cusp arc for u = 1/x, from eps to 1.

    The adaptive result is cross-checked by a composite Gauss rule in the
    variable log x, where the integrand is smooth and bounded.
    """
    if not (0.0 < eps < 1.0):
        raise ParameterError(f"cusp truncation must lie in (0, 1), got {eps}", "analytic", "cusp_trace_integral")
    value, error = quad(lambda x: math.sqrt(1.0 + 16.0 * x**6) / x**2, eps, 1.0, epsrel=1e-12, epsabs=0.0, limit=200)
    cross = gauss_legendre(lambda s: np.exp(-s) * np.sqrt(1.0 + 16.0 * np.exp(6.0 * s)), math.log(eps), 0.0, panels=128)
    if abs(value - cross) > 1e-9 * abs(value) + error:
        raise NumericError(
            f"cusp integral quadratures disagree: {value!r} vs {cross!r}",
            module="analytic",
            op="cusp_trace_integral",
        )
    return CuspIntegral(eps=float(eps), value=float(value), error=float(error), cross_check=float(cross))


# tooth


@dataclass(frozen=True)
class ToothConstants:
    """Norms of u = y on Tooth{a}."""

    a: float
    l2_sq: float
    grad_sq: float
    boundary_sq: float

    @property
    def quotient(self) -> float:
        return self.boundary_sq / (self.grad_sq + self.l2_sq)


def tooth_exact(a: float) -> ToothConstants:
    if not (0.0 < a <= 1.0):
        raise ParameterError(f"tooth parameter a must lie in (0, 1], got {a}", "analytic", "tooth_exact")
    return ToothConstants(
        a=float(a),
        l2_sq=a**5 / 6.0,
        grad_sq=a**3,
        boundary_sq=(2.0 / 3.0) * a**3 * math.sqrt(1.0 + a * a),
    )


def tooth_rayleigh_limit() -> float:
    """Limit of the tooth quotient as a -> 0."""
    return 2.0 / 3.0


# strip inequality on a parallelogram

# coefficient grids c[i, j] of x^i y^j
STRIP_SAMPLES: List[np.ndarray] = [
    np.array([[1.0]]),
    np.array([[0.0, 0.0], [1.0, 0.0]]),
    np.array([[0.0, 1.0], [0.0, 0.0]]),
    np.array([[1.0, -1.0], [-1.0, 1.0]]),
    np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]),
    np.array([[0.0, 0.0, 0.0, -1.0], [0.0, 0.0, 0.0, 0.0], [0.0, 2.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0]]),
    np.array([[1.0, 0.0, -3.0], [0.0, 0.0, 0.0], [-3.0, 0.0, 0.0]]),
]


@dataclass(frozen=True)
class StripReport:
    cosine: float
    ratios: List[float]

    @property
    def worst_ratio(self) -> float:
        return max(self.ratios)


def _strip_terms(coeffs: np.ndarray, e1: np.ndarray, e2: np.ndarray, a: float, b: float) -> Tuple[float, float, float]:
    """(edge integral, area integral of u^2, area integral of |grad u|^2), exact for degree <= 3."""
    nodes, weights = np.polynomial.legendre.leggauss(4)
    s = 0.5 * a * (nodes + 1.0)
    ws = 0.5 * a * weights
    t = 0.5 * b * (nodes + 1.0)
    wt = 0.5 * b * weights
    jac = abs(e1[0] * e2[1] - e1[1] * e2[0])

    edge = P.polyval2d(s * e1[0], s * e1[1], coeffs)
    edge_integral = float(np.sum(ws * edge**2))

    ss, tt = np.meshgrid(s, t, indexing="ij")
    ww = np.outer(ws, wt) * jac
    x = ss * e1[0] + tt * e2[0]
    y = ss * e1[1] + tt * e2[1]
    u = P.polyval2d(x, y, coeffs)
    ux = P.polyval2d(x, y, P.polyder(coeffs, axis=0))
    uy = P.polyval2d(x, y, P.polyder(coeffs, axis=1))
    return edge_integral, float(np.sum(ww * u**2)), float(np.sum(ww * (ux**2 + uy**2)))


def strip_inequality_check(
    e1: Sequence[float],
    e2: Sequence[float],
    a: float,
    b: float,
    samples: Optional[Sequence[np.ndarray]] = None,
) -> StripReport:
    """Ratios of edge trace energy to the strip bound for polynomial samples.

    The parallelogram is {s e1 + t e2 : 0 < s < a, 0 < t < b}; the edge is
    the segment s e1, s in (0, a). Every ratio must stay <= 1.
    """
    e1 = np.asarray(e1, dtype=float)
    e2 = np.asarray(e2, dtype=float)
    if a <= 0 or b <= 0:
        raise ParameterError(f"strip sides must be positive, got a={a}, b={b}", "analytic", "strip_inequality_check")
    for name, e in (("e1", e1), ("e2", e2)):
        if e.shape != (2,) or abs(float(np.hypot(*e)) - 1.0) > 1e-12:
            raise ParameterError(f"{name} must be a unit vector", "analytic", "strip_inequality_check")
    cosine = float(e1 @ e2)
    if abs(cosine) >= 1.0 - 1e-12:
        raise ParameterError("strip directions are parallel", "analytic", "strip_inequality_check")
    factor = 1.0 / math.sqrt(1.0 - cosine * cosine)

    ratios = []
    for coeffs in samples if samples is not None else STRIP_SAMPLES:
        coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
        edge, l2, grad = _strip_terms(coeffs, e1, e2, a, b)
        bound = factor * ((2.0 / b) * l2 + b * grad)
        if bound == 0.0:
            continue
        ratios.append(edge / bound)
    if not ratios:
        raise ParameterError("strip samples are all zero", "analytic", "strip_inequality_check")
    return StripReport(cosine=cosine, ratios=ratios)


# L4 Maz'ya-Sobolev samples

_QUARTIC_TERMS = list(combinations_with_replacement(range(3), 4))


def quartic_integral(mesh: Mesh, u: np.ndarray) -> float:
    """Exact integral of u^4 for a P1 field: sum over triangles of (A/15) h4(u1, u2, u3)."""
    values = np.asarray(u, dtype=float)[mesh.triangles]
    h4 = np.zeros(len(values))
    for term in _QUARTIC_TERMS:
        h4 += np.prod(values[:, list(term)], axis=1)
    return float(np.sum(mesh.areas() * h4) / 15.0)


def mazya_sobolev_sample(
    mesh: Mesh,
    fields: Sequence[np.ndarray],
    K: Optional[sp.spmatrix] = None,
    B: Optional[sp.spmatrix] = None,
) -> float:
    """Worst ratio (integral of u^4)^(1/2) / (l(u) + boundary L2 norm^2) over nonzero samples."""
    K = stiffness(mesh) if K is None else K
    B = boundary_mass(mesh).consistent if B is None else B
    ratios = []
    for u in fields:
        u = np.asarray(u, dtype=float)
        if not np.any(u):
            continue
        denominator = float(u @ (K @ u) + u @ (B @ u))
        ratios.append(math.sqrt(quartic_integral(mesh, u)) / denominator)
    if not ratios:
        raise ParameterError("no nonzero sample fields", "analytic", "mazya_sobolev_sample")
    logger.debug(f"Maz'ya-Sobolev samples on {mesh.label}: worst ratio {max(ratios):.6g}")
    return max(ratios)
