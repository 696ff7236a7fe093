import math

import numpy as np
import pytest

from dtnlab.core.assembly import boundary_mass, stiffness
from dtnlab.core.dtn import build_dtn
from dtnlab.core.semigroup import (
    SpectralSemigroup,
    decay_curve,
    equilibrium,
    evolve,
    irreducibility_probe,
    lp_contractivity_check,
    markov_diagnostics,
    operator_norm_gap,
)
from dtnlab.core.spectral import steklov_spectrum
from dtnlab.errors import ParameterError, TruncationError


@pytest.fixture
def square_semigroup(square_dtn):
    """Full spectral semigroup of the 4 x 4 unit square."""
    return SpectralSemigroup.from_operator(square_dtn)


@pytest.fixture
def x_field(unit_square):
    return np.array(unit_square.vertices[unit_square.boundary_vertices, 0])


def test_identity_at_zero(square_semigroup, x_field):
    """Test that S_0 is the identity."""
    assert np.allclose(evolve(square_semigroup, 0.0, x_field), x_field)


def test_constants_are_invariant(square_semigroup):
    """Test that S_t 1 = 1."""
    ones = np.ones(square_semigroup.size)
    for t in (0.1, 1.0, 10.0):
        assert np.allclose(evolve(square_semigroup, t, ones), ones, atol=1e-12)


def test_mass_conservation(square_semigroup, square_dtn, x_field):
    """Test that the boundary integral of S_t phi does not change."""
    gram = square_dtn.boundary_gram
    ones = np.ones(square_semigroup.size)
    initial = ones @ (gram @ x_field)
    evolved = evolve(square_semigroup, 2.0, x_field)
    assert ones @ (gram @ evolved) == pytest.approx(initial, rel=1e-10)


def test_converges_to_equilibrium(square_semigroup, x_field):
    """Test exponential decay to the boundary mean at rate lam_1."""
    target = equilibrium(square_semigroup.projection, x_field)
    assert np.allclose(target, 0.5)
    start = square_semigroup.b_norm(x_field - target)
    for t in (0.5, 1.0, 4.0):
        distance = square_semigroup.b_norm(evolve(square_semigroup, t, x_field) - target)
        assert distance <= math.exp(-square_semigroup.gap * t) * start * (1 + 1e-8)
    curve = decay_curve(square_semigroup, x_field, [0.0, 1.0, 2.0, 4.0])
    assert all(b < a for a, b in zip(curve, curve[1:]))
    assert curve[0] == pytest.approx(start)


def test_operator_norm_gap(square_semigroup):
    """Test |S_t - P| = exp(-lam_1 t)."""
    report = operator_norm_gap(square_semigroup, 1.5)
    assert report.ratio == pytest.approx(1.0, abs=1e-8)
    assert report.closed_form == pytest.approx(math.exp(-1.5 * square_semigroup.gap))


def test_semigroup_property(square_semigroup, x_field):
    """Test S_s S_t = S_{s+t}."""
    once = evolve(square_semigroup, 0.7, x_field)
    twice = evolve(square_semigroup, 0.3, evolve(square_semigroup, 0.4, x_field))
    assert np.allclose(once, twice, atol=1e-12)


def test_negative_time(square_semigroup, x_field):
    """Test that negative times are rejected."""
    with pytest.raises(ParameterError):
        evolve(square_semigroup, -1.0, x_field)
    with pytest.raises(ParameterError):
        operator_norm_gap(square_semigroup, -0.1)
    with pytest.raises(ParameterError):
        square_semigroup.lumped_matrix(-2.0)


def test_field_length(square_semigroup):
    """Test that the field must live on the boundary vertices."""
    with pytest.raises(ParameterError):
        evolve(square_semigroup, 1.0, np.ones(3))


class TestLumpedRepresentation:
    def test_markov_row_sums(self, square_semigroup):
        """Test that the lumped S_t has unit row sums and is measure-symmetric."""
        report = markov_diagnostics(square_semigroup, 1.0)
        assert report.max_row_sum_deviation < 1e-10
        assert report.symmetry_defect < 1e-10
        assert report.t == 1.0

    def test_identity_at_zero(self, square_semigroup):
        """Test that the lumped matrix at t = 0 is the identity."""
        assert np.allclose(square_semigroup.lumped_matrix(0.0), np.eye(square_semigroup.size), atol=1e-10)

    def test_lp_norms(self, square_semigroup):
        """Test the weighted operator norms of the lumped S_t."""
        report = lp_contractivity_check(square_semigroup, 1.0)
        assert report.norm_inf_to_inf >= 1.0 - 1e-10
        assert report.norm_1to1 >= 1.0 - 1e-10
        assert report.gap_inf_to_inf >= 0.0

    def test_irreducible_on_connected_domain(self, square_semigroup):
        """Test that a connected boundary gives an irreducible semigroup."""
        verdict = irreducibility_probe(square_semigroup, 1.0)
        assert verdict.irreducible
        assert len(verdict.blocks) == 1
        assert verdict.consistent


class TestDirectSum:
    def test_reducible_direct_sum(self, square_semigroup, tooth):
        """Test that a direct sum is reducible with a two-dimensional kernel."""
        other = SpectralSemigroup.from_operator(build_dtn(tooth, stiffness(tooth), boundary_mass(tooth)))
        joined = SpectralSemigroup.direct_sum(square_semigroup, other)
        assert joined.kernel_dimension() == 2
        assert joined.size == square_semigroup.size + other.size
        verdict = irreducibility_probe(joined, 1.0, threshold=1e-8)
        assert not verdict.irreducible
        assert [len(block) for block in verdict.blocks] == [square_semigroup.size, other.size]
        assert verdict.consistent

    def test_direct_sum_keeps_each_mean(self, square_semigroup, tooth):
        """Test that each part relaxes to its own mean."""
        other = SpectralSemigroup.from_operator(build_dtn(tooth, stiffness(tooth), boundary_mass(tooth)))
        joined = SpectralSemigroup.direct_sum(square_semigroup, other)
        phi = np.concatenate([np.zeros(square_semigroup.size), np.ones(other.size)])
        late = evolve(joined, 50.0, phi)
        assert np.allclose(late, phi, atol=1e-10)


def test_truncated_decomposition(square_dtn, x_field):
    """Test that a truncated semigroup refuses to evolve unresolved fields."""
    spectrum = steklov_spectrum(square_dtn, 4)
    sg = SpectralSemigroup.from_spectrum(spectrum, square_dtn)
    assert not sg.complete
    with pytest.raises(TruncationError):
        evolve(sg, 0.0, x_field)
    late = evolve(sg, 40.0, x_field)
    assert np.allclose(late, 0.5, atol=1e-8)


@pytest.mark.parametrize("domain", ["unit_square", "small_disk", "annulus", "tooth", "small_comb"])
def test_norm_gap_on_each_domain(request, domain):
    """Test |S_t - P| = exp(-lam_1 t) at t = 0.1, 1 and 10."""
    mesh = request.getfixturevalue(domain)
    sg = SpectralSemigroup.from_operator(build_dtn(mesh, stiffness(mesh), boundary_mass(mesh)))
    for t in (0.1, 1.0, 10.0):
        assert operator_norm_gap(sg, t).ratio == pytest.approx(1.0, abs=1e-8)


class TestAnnulus:
    @pytest.fixture
    def annulus_semigroup(self, annulus):
        return SpectralSemigroup.from_operator(build_dtn(annulus, stiffness(annulus), boundary_mass(annulus)))

    @pytest.mark.parametrize("t", [0.5, 1.0])
    def test_lumped_matrix_is_markov(self, annulus_semigroup, t):
        """Test nonnegative entries and unit row sums across both boundary components."""
        report = markov_diagnostics(annulus_semigroup, t)
        assert report.min_entry >= -1e-8
        assert report.max_row_sum_deviation < 1e-10
        assert report.positive

    def test_two_components_stay_coupled(self, annulus_semigroup, annulus):
        """Test irreducibility although the boundary has two components."""
        assert len(annulus.components) == 2
        verdict = irreducibility_probe(annulus_semigroup, 1.0)
        assert verdict.irreducible
        assert verdict.kernel_dimension == 1
        assert verdict.consistent
