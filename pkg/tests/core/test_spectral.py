import math

import numpy as np
import pytest

from dtnlab.config import DEFAULT_CONFIG, SolverSettings
from dtnlab.core.analytic import cusp_trace_integral, mazya_sobolev_sample, tooth_exact
from dtnlab.core.assembly import boundary_mass, interpolate, mass, stiffness
from dtnlab.core.dtn import build_dtn
from dtnlab.core.eigen import dense_eigh, largest_eigenvalue, smallest_eigenpairs
from dtnlab.core.geometry import Comb, CombLayout, Cusp, PolygonalDisk, Rectangle, Tooth
from dtnlab.core.mesh import build_domain, refine
from dtnlab.core.spectral import (
    eigensolver_agreement,
    grounded_trace_quotient,
    kernel_dimension,
    mazya_constant,
    poincare_constant,
    rayleigh_quotient,
    seminorm_trace_constant,
    spectral_count,
    steklov_spectrum,
    trace_constant,
)
from dtnlab.errors import ParameterError, RangeError


@pytest.fixture
def fine_tooth():
    """Tooth(a=1/2) with six intervals per side."""
    return build_domain(Tooth(0.5), 0.1)


@pytest.fixture
def tooth_dtn(fine_tooth):
    return build_dtn(fine_tooth, stiffness(fine_tooth), boundary_mass(fine_tooth))


class TestSteklovSpectrum:
    def test_complete_spectrum(self, square_dtn):
        """Test the full spectrum: zero ground state, ascending, B-orthonormal."""
        spectrum = steklov_spectrum(square_dtn, square_dtn.size)
        assert spectrum.complete
        assert spectrum.method == "dense"
        assert abs(spectrum.values[0]) < 1e-10
        assert np.all(np.diff(spectrum.values) >= 0)
        gram = spectrum.vectors.T @ (square_dtn.boundary_gram @ spectrum.vectors)
        assert np.allclose(gram, np.eye(spectrum.k), atol=1e-10)
        assert np.max(spectrum.residuals) < 1e-8
        assert kernel_dimension(spectrum) == 1

    def test_ground_state_is_constant(self, square_dtn):
        """Test that the first eigenvector is the normalized constant."""
        spectrum = steklov_spectrum(square_dtn, 2)
        v0 = spectrum.vectors[:, 0]
        assert np.allclose(v0, 1.0 / math.sqrt(square_dtn.total_measure))
        assert not spectrum.complete

    def test_gap_and_rows(self, square_dtn):
        """Test the gap accessor and the tabular rows."""
        spectrum = steklov_spectrum(square_dtn, 3)
        assert spectrum.gap == spectrum.values[1] > 0
        rows = spectrum.rows()
        assert [row["index"] for row in rows] == [0, 1, 2]
        with pytest.raises(RangeError):
            _ = steklov_spectrum(square_dtn, 1).gap

    @pytest.mark.parametrize("k", [0, 17])
    def test_k_out_of_range(self, square_dtn, k):
        """Test that k must lie in [1, |boundary|]."""
        with pytest.raises(ParameterError):
            steklov_spectrum(square_dtn, k)

    def test_unknown_method(self, square_dtn):
        """Test that only auto, dense and lanczos are accepted."""
        with pytest.raises(ParameterError, match="unknown eigensolver"):
            steklov_spectrum(square_dtn, 2, method="qr")

    def test_lanczos_agrees_with_dense(self, tooth_dtn):
        """Test the two eigensolvers against each other."""
        assert eigensolver_agreement(tooth_dtn, 4) < 1e-8
        spectrum = steklov_spectrum(tooth_dtn, 4, method="lanczos")
        assert spectrum.method == "lanczos"


class TestSpectralCount:
    def test_count_on_complete_spectrum(self, square_dtn):
        """Test counting eigenvalues below a threshold."""
        spectrum = steklov_spectrum(square_dtn, square_dtn.size)
        assert spectral_count(spectrum, 1e-8) == 1
        assert spectral_count(spectrum, float(spectrum.values[-1])) == square_dtn.size

    def test_count_beyond_range(self, square_dtn):
        """Test that a truncated spectrum refuses thresholds past its top."""
        spectrum = steklov_spectrum(square_dtn, 3)
        with pytest.raises(RangeError, match="request more than 3"):
            spectral_count(spectrum, 1e6)

    def test_count_inside_range(self, square_dtn):
        """Test that thresholds inside the computed range are answered."""
        spectrum = steklov_spectrum(square_dtn, 3)
        assert spectral_count(spectrum, float(spectrum.values[1]) / 2) == 1


class TestConstants:
    def test_trace_constant(self, square_matrices):
        """Test the trace constant and its attaining vector."""
        K, M, B = square_matrices
        report = trace_constant(K, M, B)
        assert report.value > 0
        assert rayleigh_quotient(B.consistent, K + M, report.vector) == pytest.approx(report.value, rel=1e-10)
        # u = 1 gives |Tr u|^2 / |u|^2 = perimeter / area
        assert report.value >= 4.0 * (1 - 1e-12)

    def test_seminorm_trace_is_inverse_gap(self, square_dtn):
        """Test that the seminorm trace constant is 1 / lam_1."""
        report = seminorm_trace_constant(square_dtn)
        spectrum = steklov_spectrum(square_dtn, 2)
        assert report.value == pytest.approx(1.0 / spectrum.gap, rel=1e-8)

    def test_poincare_constant(self, square_matrices):
        """Test that the discrete Poincare constant is below 1/pi^2."""
        K, M, _ = square_matrices
        report = poincare_constant(K, M)
        assert 0.09 < report.value <= 1.0 / math.pi**2 + 1e-12

    def test_mazya_constant(self, square_matrices):
        """Test the Maz'ya constant against the constant test function."""
        K, M, B = square_matrices
        report = mazya_constant(K, M, B)
        assert report.value >= 0.25 * (1 - 1e-12)
        assert report.to_dict()["problem"] == "mazya_constant"

    def test_grounded_tooth_quotient(self, fine_tooth):
        """Test the grounded quotient on a tooth against the exact field u = y."""
        K, M = stiffness(fine_tooth), mass(fine_tooth)
        slanted = boundary_mass(fine_tooth, segment=[1, 2])
        report = grounded_trace_quotient(K, M, slanted, fine_tooth.segment_vertices(0))
        assert report.value >= tooth_exact(0.5).quotient * (1 - 1e-12)
        assert np.allclose(report.vector[fine_tooth.segment_vertices(0)], 0.0)

    def test_grounded_requires_proper_set(self, tooth):
        """Test the grounded-set preconditions."""
        K, M = stiffness(tooth), mass(tooth)
        slanted = boundary_mass(tooth, segment=[1, 2])
        with pytest.raises(ParameterError):
            grounded_trace_quotient(K, M, slanted, [])
        with pytest.raises(ParameterError, match="reduced space is empty"):
            grounded_trace_quotient(K, M, slanted, tooth.boundary_vertices)


class TestEigensolvers:
    def test_lanczos_path(self, square_matrices):
        """Test shift-invert Lanczos against the dense reference."""
        K, M, _ = square_matrices
        dense = dense_eigh(K, M, 0, 2)
        iterative = smallest_eigenpairs(K, M, 3, SolverSettings(dense_limit=10))
        assert iterative.method == "lanczos"
        assert np.allclose(iterative.values, dense.values, atol=1e-8)

    def test_largest_eigenvalue_paths(self, square_matrices):
        """Test the dense and iterative largest eigenvalue."""
        _, M, B = square_matrices
        dense = largest_eigenvalue(B.consistent, M, SolverSettings())
        iterative = largest_eigenvalue(B.consistent, M, SolverSettings(dense_limit=10))
        assert iterative == pytest.approx(dense, rel=1e-6)


def dtn_of(mesh):
    return build_dtn(mesh, stiffness(mesh), boundary_mass(mesh))


def spread(values):
    """Relative spread max/min - 1 of a refinement sweep."""
    return max(values) / min(values) - 1.0


@pytest.mark.slow
def test_disk_oracle():
    """Test the first seven eigenvalues of the unit disk: 0, 1, 1, 2, 2, 3, 3."""
    values = steklov_spectrum(dtn_of(build_domain(PolygonalDisk(1.0, 256), 0.02)), 7).values
    assert abs(values[0]) < 1e-8
    assert list(values[1:]) == pytest.approx([1.0, 1.0, 2.0, 2.0, 3.0, 3.0], rel=0.02)


@pytest.mark.parametrize("domain", ["unit_square", "small_disk", "annulus", "tooth", "small_comb"])
def test_kernel_is_the_constants(request, domain):
    """Test a one-dimensional kernel spanned by the constant on connected domains."""
    op = dtn_of(request.getfixturevalue(domain))
    spectrum = steklov_spectrum(op, 3)
    assert kernel_dimension(spectrum) == 1
    assert abs(spectrum.values[0]) <= 1e-9 * max(spectrum.values[1], 1.0)
    v0 = spectrum.vectors[:, 0]
    assert np.max(np.abs(v0 - v0.mean())) <= 1e-6 * abs(v0.mean())


def test_lanczos_agrees_up_to_twentieth():
    """Test shift-invert Lanczos against dense eigh over twenty eigenvalues."""
    mesh = build_domain(Tooth(0.5), 0.02)
    op = build_dtn(mesh, stiffness(mesh), boundary_mass(mesh), form_schur=True)
    assert op.size > 21
    assert eigensolver_agreement(op, 20) < 1e-8


def test_poincare_constant_converges():
    """Test the discrete Poincare constant of the unit square against 1/pi^2."""
    mesh = build_domain(Rectangle(1.0, 1.0), 0.05)
    report = poincare_constant(stiffness(mesh), mass(mesh))
    assert report.value == pytest.approx(1.0 / math.pi**2, rel=0.01)


@pytest.mark.parametrize("a", [1.0, 0.5, 0.25])
def test_grounded_tooth_quotient_range(a):
    """Test the grounded quotient on Tooth{a} and the quotient of u = y."""
    mesh = build_domain(Tooth(a), 0.1 * a)
    K, M = stiffness(mesh), mass(mesh)
    slanted = boundary_mass(mesh, segment=[1, 2])
    report = grounded_trace_quotient(K, M, slanted, mesh.segment_vertices(0))
    assert 1.0 / 3.0 <= report.value <= 2.0
    u = interpolate(mesh, lambda x, y: y)
    exact = tooth_exact(a).quotient
    assert rayleigh_quotient(slanted.consistent, K + M, u) == pytest.approx(exact, rel=0.01)
    assert report.value >= exact * (1 - 1e-10)


class TestCombCount:
    def test_tooth_fields_bound_the_spectrum(self, uniform_comb):
        """Test that u = max(y, 0) has quotient 3 / (2 sqrt(1 + a^2)) and caps lam_{N-1}."""
        K, B = stiffness(uniform_comb), boundary_mass(uniform_comb)
        u = interpolate(uniform_comb, lambda x, y: np.maximum(y, 0.0))
        bound = 1.5 / math.sqrt(1.0 + 0.25**2)
        assert rayleigh_quotient(K, B.consistent, u) == pytest.approx(bound, rel=1e-10)
        op = build_dtn(uniform_comb, K, B)
        spectrum = steklov_spectrum(op, op.size)
        assert spectrum.values[3] <= bound * (1 + 1e-10)
        assert spectral_count(spectrum, DEFAULT_CONFIG.spectral.count_threshold) >= 4

    @pytest.mark.slow
    @pytest.mark.parametrize("h", [0.1, 0.05])
    def test_count_grows_with_teeth(self, h):
        """Test count(16) >= count(4) + 8 at the configured threshold and no growth at 0.3."""
        threshold = DEFAULT_CONFIG.spectral.count_threshold
        counts, low = {}, {}
        for n in (4, 8, 16):
            op = dtn_of(build_domain(Comb(n, CombLayout.UNIFORM), h))
            spectrum = steklov_spectrum(op, min(48, op.size))
            counts[n] = spectral_count(spectrum, threshold)
            low[n] = spectral_count(spectrum, 0.3)
            assert counts[n] >= n
        assert counts[4] <= counts[8] <= counts[16]
        assert counts[16] >= counts[4] + 8
        # tooth modes sit near 1.45 whatever the tooth height
        assert low[16] - low[4] < 8

    @pytest.mark.slow
    @pytest.mark.parametrize("n", [4, 16])
    def test_trace_constant_is_refinement_stable(self, n):
        """Test that the trace constant of a fixed comb moves <= 10% under refinement."""
        coarse = build_domain(Comb(n, CombLayout.UNIFORM), 0.1)
        values = [trace_constant(stiffness(m), mass(m), boundary_mass(m)).value for m in (coarse, refine(coarse))]
        assert abs(values[1] - values[0]) <= 0.10 * values[0]


class TestCuspBlowUp:
    EPS = (0.2, 0.1, 0.05)

    def test_trace_constant_blows_up(self):
        """Test the trace constant on Cusp{eps} against the witness u = (eps / x)^2."""
        witnesses, constants = [], []
        for eps in self.EPS:
            mesh = build_domain(Cusp(eps), 0.05)
            K, M, B = stiffness(mesh), mass(mesh), boundary_mass(mesh)
            u = interpolate(mesh, lambda x, y, eps=eps: (eps / x) ** 2)
            witnesses.append(rayleigh_quotient(B.consistent, K + M, u))
            constants.append(trace_constant(K, M, B).value)
        # witness ~ 1 / (12 eps^2 (1 - eps))
        assert witnesses[2] == pytest.approx(1.0 / (12 * 0.05**2 * 0.95), rel=0.05)
        assert all(b >= 1.8 * a for a, b in zip(witnesses, witnesses[1:]))
        assert all(c >= w * (1 - 1e-10) for c, w in zip(constants, witnesses))
        assert constants[0] < constants[1] < constants[2]
        assert constants[2] >= 1.8 * constants[0]

    def test_analytic_integral_bound(self):
        """Test that the arc integral of 1/x^2 exceeds 1/eps - 1."""
        for eps in self.EPS:
            assert cusp_trace_integral(eps).value >= 1.0 / eps - 1.0


@pytest.mark.slow
@pytest.mark.parametrize("domain", [Rectangle(1.0, 1.0), Comb(2)])
def test_mazya_constants_are_refinement_stable(domain):
    """Test the Maz'ya constant and Sobolev sample ratios over three refinements."""
    meshes = [build_domain(domain, 0.25)]
    meshes += [refine(meshes[-1]) for _ in range(2)]
    constants, ratios = [], []
    for mesh in meshes:
        K, M, B = stiffness(mesh), mass(mesh), boundary_mass(mesh)
        constants.append(mazya_constant(K, M, B).value)
        fields = [interpolate(mesh, f) for f in (lambda x, y: 1.0, lambda x, y: x, lambda x, y: x * y + 1.0)]
        ratios.append(mazya_sobolev_sample(mesh, fields, K, B.consistent))
    assert spread(constants) <= 0.10
    assert spread(ratios) <= 0.10
