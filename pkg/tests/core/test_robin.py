import math

import numpy as np
import pytest

from dtnlab.config import DtnlabConfig, SolverSettings
from dtnlab.core.assembly import boundary_mass, interpolate, mass, stiffness
from dtnlab.core.eigen import dense_eigh
from dtnlab.core.geometry import Comb, Rectangle
from dtnlab.core.mesh import build_domain, refine
from dtnlab.core.robin import (
    BetaZeroEstimate,
    beta_zero_scan,
    is_convex,
    lower_bound_gap,
    robin_eigen_check,
    robin_solve,
)
from dtnlab.core.trend import Trend
from dtnlab.errors import ParameterError, RobinRefusal


class TestLowerBoundGap:
    def test_nonpositive_beta_has_no_gap(self, square_matrices):
        """Test that a_beta is nonnegative for beta <= 0."""
        K, M, B = square_matrices
        assert lower_bound_gap(K, M, B, 0.0).gap == 0.0
        report = lower_bound_gap(K, M, B, -1.0)
        assert report.gap == 0.0
        assert report.lowest > 0

    def test_constant_field_bound(self, square_matrices):
        """Test gamma(beta) >= beta |boundary| / |domain| from the constant field."""
        K, M, B = square_matrices
        report = lower_bound_gap(K, M, B, 0.5, level=2, domain="square")
        assert report.gap >= 2.0 * (1 - 1e-12)
        assert report.lowest == pytest.approx(-report.gap)
        assert (report.level, report.domain) == (2, "square")

    def test_iterative_path(self, square_matrices):
        """Test the shift-invert path against the dense one."""
        K, M, B = square_matrices
        config = DtnlabConfig(solver=SolverSettings(dense_limit=10))
        dense = lower_bound_gap(K, M, B, 0.5)
        iterative = lower_bound_gap(K, M, B, 0.5, config=config)
        assert iterative.gap == pytest.approx(dense.gap, rel=1e-6)


def test_convexity():
    """Test the three-point convexity test."""
    assert is_convex([0.0, 1.0, 2.0], [0.0, 1.0, 4.0])
    assert is_convex([0.0, 1.0], [0.0, 5.0])
    assert not is_convex([0.0, 1.0, 2.0], [0.0, 3.0, 4.0])


class TestBetaZeroScan:
    def test_needs_three_meshes(self, coarse_square):
        """Test that a scan needs at least three meshes."""
        with pytest.raises(ParameterError, match=">= 3 meshes"):
            beta_zero_scan([coarse_square, refine(coarse_square)], [0.1])

    def test_empty_grid(self, coarse_square):
        """Test that the beta grid must not be empty."""
        meshes = [coarse_square, refine(coarse_square), refine(refine(coarse_square))]
        with pytest.raises(ParameterError, match="empty beta grid"):
            beta_zero_scan(meshes, [])

    def test_square_is_stable(self, coarse_square):
        """Test that a smooth-enough domain has no diverging beta."""
        meshes = [coarse_square, refine(coarse_square), refine(refine(coarse_square))]
        estimate = beta_zero_scan(meshes, [0.5, 0.1], domain="square")
        assert [entry.beta for entry in estimate.grid] == [0.1, 0.5]
        assert all(entry.verdict is Trend.STABLE for entry in estimate.grid)
        assert estimate.interval == (0.5, math.inf)
        doc = estimate.to_dict()
        assert doc["beta0_interval"] == [0.5, math.inf]
        assert doc["grid"][0]["verdict"] == "stable"
        assert len(doc["grid"][0]["gaps"]) == 3

    @pytest.mark.slow
    def test_geometric_comb_diverges(self):
        """Test that beta = 2 diverges along the tooth-count sequence of a comb."""
        meshes = [build_domain(Comb(n), 0.25) for n in (1, 2, 3)]
        estimate = beta_zero_scan(meshes, [0.1, 2.0], domain="comb(n=3)")
        verdicts = {entry.beta: entry.verdict for entry in estimate.grid}
        assert verdicts == {0.1: Trend.STABLE, 2.0: Trend.DIVERGING}
        assert estimate.interval == (0.1, 2.0)
        gaps = estimate.grid[1].gaps
        assert gaps[2] / gaps[1] > 4.0

    @pytest.mark.slow
    @pytest.mark.parametrize("beta", [1.0, 10.0])
    def test_square_gap_is_refinement_stable(self, beta):
        """Test that gamma_h on the unit square moves <= 10% from h = 1/8 over two refinements."""
        coarse = build_domain(Rectangle(1.0, 1.0), 0.125)
        meshes = [coarse, refine(coarse), refine(refine(coarse))]
        gaps = [lower_bound_gap(stiffness(m), mass(m), boundary_mass(m), beta).gap for m in meshes]
        # u = 1 alone gives gamma_h >= 4 beta
        assert min(gaps) >= 4.0 * beta * (1 - 1e-10)
        assert max(gaps) <= 1.10 * min(gaps)


class TestRobinSolve:
    def test_regular_solve(self, unit_square, square_matrices):
        """Test a nonsingular Robin solve and its Green identity."""
        K, M, B = square_matrices
        f = np.ones(unit_square.n_vertices)
        solution = robin_solve(unit_square, K, M, B, 0.5, f)
        A = K - 0.5 * B.consistent
        assert np.allclose(A @ solution.u, M @ f, atol=1e-10)
        assert not solution.deflated
        assert solution.removed_component == 0.0
        assert solution.boundary_defect < 1e-8
        assert solution.positivity_shift == pytest.approx(solution.report.gap + 1.0)

    def test_singular_pencil_is_deflated(self, unit_square, square_matrices):
        """Test the Neumann case beta = 0, where constants span the kernel."""
        K, M, B = square_matrices
        f = 1.0 + unit_square.vertices[:, 0]
        solution = robin_solve(unit_square, K, M, B, 0.0, f)
        assert solution.deflated
        assert abs(solution.removed_component) == pytest.approx(1.5)
        ones = np.ones(unit_square.n_vertices)
        assert ones @ (M @ solution.u) == pytest.approx(0.0, abs=1e-12)
        assert np.allclose(K @ solution.u, M @ (f - 1.5), atol=1e-10)
        assert solution.positivity_shift == 1.0

    def test_refusal_in_diverging_range(self, unit_square, square_matrices):
        """Test that a beta flagged as diverging is refused."""
        K, M, B = square_matrices
        scan = BetaZeroEstimate(domain="comb(n=3)", grid=[], interval=(0.1, 2.0))
        with pytest.raises(RobinRefusal) as exc:
            robin_solve(unit_square, K, M, B, 2.0, np.ones(unit_square.n_vertices), scan=scan)
        assert exc.value.report.beta == 2.0
        assert "diverging" in exc.value.one_line()

    def test_eigen_check(self, unit_square, square_matrices):
        """Test dnu v = beta v for the lowest Robin eigenvector."""
        K, M, B = square_matrices
        assert robin_eigen_check(unit_square, K, M, B, 0.5) < 1e-8

    def test_singular_solve_on_tooth(self, tooth):
        """Test the lifted solve on a mesh with a nonuniform mass matrix."""
        K, M, B = stiffness(tooth), mass(tooth), boundary_mass(tooth)
        f = interpolate(tooth, lambda x, y: x + 2.0 * y)
        solution = robin_solve(tooth, K, M, B, 0.0, f)
        assert solution.deflated
        ones = np.ones(tooth.n_vertices)
        f_c = f - (ones @ (M @ f)) / (ones @ (M @ ones))
        assert np.allclose(K @ solution.u, M @ f_c, atol=1e-11)
        assert ones @ (M @ solution.u) == pytest.approx(0.0, abs=1e-13)

    def test_shift_makes_pencil_positive(self, square_matrices, unit_square):
        """Test that the declared shift lifts K - beta B above zero."""
        K, M, B = square_matrices
        solution = robin_solve(unit_square, K, M, B, 2.0, np.ones(unit_square.n_vertices))
        assert solution.report.gap > 0
        assert solution.positivity_shift == pytest.approx(solution.report.gap + 1.0)
        shifted = (K - 2.0 * B.consistent + solution.positivity_shift * M).toarray()
        lowest = dense_eigh(shifted, M, 0, 0).values[0]
        assert lowest == pytest.approx(1.0, rel=1e-8)
