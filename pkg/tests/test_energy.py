"""Tests for aggmin.energy module."""

import math

import numpy as np
import pytest

from aggmin.energy import (
    PotentialField,
    appendix_identity_check,
    el_residual,
    energy,
    explicit_minimizer,
    field,
    predicted_constant,
)
from aggmin.errors import (
    DegenerateMeasureError,
    DimensionError,
    ParameterError,
    RangeError,
    SingularityError,
)
from aggmin.measure import GridMeasure, ParticleEnsemble, cantor_iterate
from aggmin.potential import CantorPotential, PowerLaw, RepulsivePower, RieszQuad


@pytest.fixture(scope="module")
def newtonian_like():
    """The explicit minimizer for (d, a, b) = (2, 2, 1)."""
    return explicit_minimizer(2, 2, 1.0)


class TestParticleEnergy:
    """Tests for pair-sum energies."""

    def test_pair(self):
        """Test E = w1 w2 W(|x1 - x2|) for two particles."""
        ens = ParticleEnsemble(np.array([[0.0], [3.0]]))
        assert energy(PowerLaw(a=2.0, b=1.0), ens) == pytest.approx(0.375)

    def test_single_particle(self):
        """Test one particle has zero energy."""
        assert energy(PowerLaw(a=2.0, b=1.0), ParticleEnsemble(np.zeros((1, 1)))) == 0.0

    def test_rigid_motion(self):
        """Test energy is invariant under translation, rotation and relabelling."""
        spec = PowerLaw(a=3.0, b=0.5, d=2)
        rng = np.random.default_rng(3)
        ens = ParticleEnsemble(rng.normal(size=(40, 2)))
        base = energy(spec, ens)
        assert energy(spec, ens.translated([2.0, -1.0])) == pytest.approx(base, rel=1e-12)
        assert energy(spec, ens.rotated(1.1)) == pytest.approx(base, rel=1e-12)
        assert energy(spec, ens.permuted(rng.permutation(40))) == pytest.approx(base, rel=1e-12)

    def test_coincident_singular(self):
        """Test coincident particles under a log kernel raise."""
        ens = ParticleEnsemble(np.array([[1.0], [1.0]]))
        with pytest.raises(SingularityError):
            energy(RepulsivePower(b=0.0, d=1), ens)

    def test_dimension_mismatch(self):
        """Test a 2-D kernel on a 1-D ensemble raises."""
        with pytest.raises(DimensionError):
            energy(PowerLaw(a=2.0, b=1.0, d=2), ParticleEnsemble(np.array([[0.0], [1.0]])))


class TestGridEnergy:
    """Tests for FFT grid energies."""

    def test_uniform_interval(self):
        """Test W = -|x| on the uniform grid over [0, 1] gives -1/6 + h^2/24."""
        n = 64
        h = 1 / n
        grid = GridMeasure([0.0], h, np.full(n, h))
        expected = -1 / 6 + h**2 / 24
        assert energy(RepulsivePower(b=1.0, d=1), grid) == pytest.approx(expected, abs=1e-12)

    def test_quadratic(self):
        """Test the scaling E[2 mu] = 4 E[mu]."""
        spec = RieszQuad(d=2, alpha=3.0)
        rng = np.random.default_rng(1)
        grid = GridMeasure([0.0, 0.0], 0.1, rng.uniform(size=(8, 8)))
        assert energy(spec, grid.scaled(2.0)) == pytest.approx(4 * energy(spec, grid), rel=1e-12)

    def test_matches_pair_sum(self):
        """Test the FFT energy against a direct sum with the cell-average diagonal."""
        from aggmin.potential import cell_average

        spec = PowerLaw(a=2.0, b=1.0, d=1)
        rng = np.random.default_rng(5)
        values = rng.normal(size=12)
        h = 0.05
        grid = GridMeasure([0.0], h, values)
        x = grid.centers()[:, 0]
        r = np.abs(x[:, None] - x[None, :])
        kernel = np.where(r > 0, r**2 / 2 - r, 0.0)
        np.fill_diagonal(kernel, cell_average(spec, h, 1))
        assert energy(spec, grid) == pytest.approx(0.5 * values @ kernel @ values, rel=1e-10)


class TestField:
    """Tests for generated potentials and their gradients."""

    def test_particle_potential(self):
        """Test V excludes the self-pair."""
        ens = ParticleEnsemble(np.array([[0.0], [3.0]]))
        values = field(PowerLaw(a=2.0, b=1.0), ens)
        assert np.allclose(values, [0.75, 0.75])

    def test_particle_gradient(self):
        """Test grad V points along the separation."""
        ens = ParticleEnsemble(np.array([[0.0], [3.0]]))
        grad = field(PowerLaw(a=2.0, b=1.0), ens, order=1)
        assert np.allclose(grad, [[-1.0], [1.0]])

    def test_off_support_points(self):
        """Test V at arbitrary points."""
        ens = ParticleEnsemble(np.array([[0.0], [2.0]]))
        value = field(PowerLaw(a=2.0, b=1.0), ens, np.array([[1.0]]))
        assert value[0] == pytest.approx(-0.5)

    def test_cached(self):
        """Test repeated samples come from the cache."""
        handle = PotentialField(PowerLaw(a=2.0, b=1.0), ParticleEnsemble(np.array([[0.0], [1.0]])))
        assert handle.sample() is handle.sample()

    def test_grid_gradient_odd(self):
        """Test a symmetric grid measure has an antisymmetric gradient."""
        spec = PowerLaw(a=2.0, b=1.0, d=1)
        grid = GridMeasure.centered(0.1, [11], np.full(11, 1 / 11))
        grad = field(spec, grid, order=1)[:, 0]
        assert np.allclose(grad, -grad[::-1], atol=1e-12)
        assert grad[5] == pytest.approx(0.0, abs=1e-12)

    def test_grid_gradient_matches_direct(self):
        """Test FFT gradients at cell centres agree with direct sums at the same points."""
        spec = PowerLaw(a=2.0, b=1.0, d=2)
        rng = np.random.default_rng(2)
        grid = GridMeasure([0.0, 0.0], 0.1, rng.uniform(size=(6, 6)))
        fft = field(spec, grid, order=1)
        direct = field(spec, grid, grid.centers(), order=1)
        assert np.allclose(fft, direct, atol=1e-12)

    def test_laplacian_singular(self):
        """Test a Laplacian that is not locally integrable raises."""
        grid = GridMeasure([0.0], 0.1, np.ones(4))
        with pytest.raises(SingularityError):
            field(RepulsivePower(b=-0.5, d=1), grid, order=2)

    def test_bad_order(self):
        """Test orders above 2 are rejected."""
        with pytest.raises(ParameterError):
            field(PowerLaw(a=2.0, b=1.0), ParticleEnsemble(np.zeros((1, 1))), order=3)


class TestELResidual:
    """Tests for Euler-Lagrange residuals."""

    def test_steady_pair(self):
        """Test two particles at the zero of W' are steady."""
        spec = PowerLaw(a=2.0, b=1.0)
        result = el_residual(spec, ParticleEnsemble(np.array([[0.0], [1.0]])))
        assert result.steady_max == pytest.approx(0.0, abs=1e-15)
        assert result.plateau == pytest.approx(-0.25)

    def test_unsteady_pair(self):
        """Test a stretched pair has a nonzero residual."""
        spec = PowerLaw(a=2.0, b=1.0)
        result = el_residual(spec, ParticleEnsemble(np.array([[0.0], [3.0]])), probes=False)
        assert result.steady_max == pytest.approx(1.0)

    def test_cantor(self):
        """Test the Cantor iterate is steady with the matching kernel."""
        spec = CantorPotential(m_ratio=12.0, alpha=5.0, cantor_level=2)
        result = el_residual(spec, cantor_iterate(12, 2))
        assert result.steady_max <= 1e-10
        assert result.resolution > 0


class TestExplicitMinimizer:
    """Tests for the closed-form radial minimizers."""

    def test_radius(self, newtonian_like):
        """Test R = pi/4 and A = 2/pi^2 for (2, 2, 1)."""
        assert newtonian_like.R == pytest.approx(math.pi / 4, abs=1e-6)
        assert newtonian_like.analytic_radius == pytest.approx(math.pi / 4, rel=1e-12)
        assert newtonian_like.A == pytest.approx(2 / math.pi**2, rel=1e-12)

    def test_mass(self, newtonian_like):
        """Test unit mass."""
        assert newtonian_like.mass() == pytest.approx(1.0, abs=1e-8)

    def test_support(self, newtonian_like):
        """Test the density vanishes outside the ball."""
        assert newtonian_like.density(newtonian_like.R * 1.01) == 0.0
        assert newtonian_like.density(0.0) > 0

    def test_steady(self, newtonian_like):
        """Test |grad (W * rho)| <= 1e-3 on |x| <= 0.9 R."""
        r = newtonian_like.R * np.array([0.1, 0.45, 0.9])
        assert np.max(np.abs(newtonian_like.radial_residual(r))) <= 1e-3

    def test_grid_mass(self, newtonian_like):
        """Test exact cell masses sum to one."""
        grid = newtonian_like.to_grid(newtonian_like.R / 64)
        assert grid.total_mass == pytest.approx(1.0, abs=1e-6)
        assert grid.extents == (129, 129)

    def test_perturbations_raise_energy(self, newtonian_like):
        """Test E[rho] <= E[rho + v] for mean-zero, centre-preserving perturbations."""
        spec = PowerLaw(a=2.0, b=1.0, d=2)
        grid = newtonian_like.to_grid(newtonian_like.R / 64)
        base = energy(spec, grid)
        potential = field(spec, grid)
        support = grid.values.ravel() > 0
        pts = grid.centers()[support]
        basis = np.column_stack([np.ones(pts.shape[0]), pts, potential[support]])
        rng = np.random.default_rng(11)
        for _ in range(10):
            freq = rng.normal(scale=3.0 / newtonian_like.R, size=(3, 2))
            phase = rng.uniform(0, 2 * math.pi, size=3)
            amp = rng.normal(size=3)
            smooth = np.cos(pts @ freq.T + phase) @ amp
            coef, *_ = np.linalg.lstsq(basis, smooth, rcond=None)
            v = smooth - basis @ coef
            v *= 1e-2 / np.abs(v).sum()
            values = grid.values.ravel().copy()
            values[support] += v
            perturbed = GridMeasure(grid.origin, grid.h, values.reshape(grid.extents))
            assert energy(spec, perturbed) >= base

    def test_outside_window(self):
        """Test parameters without a closed form raise a range error."""
        with pytest.raises(RangeError):
            explicit_minimizer(2, 2, 3.0)
        with pytest.raises(RangeError):
            explicit_minimizer(2, 3, 1.0)

    @pytest.mark.slow
    def test_quartic(self):
        """Test the a = 4 minimizer has unit mass and is steady."""
        m = explicit_minimizer(2, 4, 0.5)
        assert m.mass() == pytest.approx(1.0, abs=1e-8)
        r = m.R * np.array([0.2, 0.5, 0.8])
        assert np.max(np.abs(m.radial_residual(r))) <= 1e-3


class TestPositivityIdentity:
    """Tests for the positivity identity of -|x|^b/b in one dimension."""

    @pytest.mark.parametrize("b", [0.0, 0.5])
    def test_constant_and_positive(self, b):
        """Test E > 0 and a fitted constant that is the same for random measures."""
        rng = np.random.default_rng(int(10 * b) + 1)
        fitted = []
        for _ in range(5):
            values = rng.normal(size=16)
            values -= values.mean()
            result = appendix_identity_check(b, GridMeasure([0.0], 0.1, values))
            assert result.positive
            assert result.energy > 0
            fitted.append(result.fitted_c)
        assert max(fitted) / min(fitted) - 1 <= 1e-2
        assert np.mean(fitted) == pytest.approx(predicted_constant(b), rel=2e-2)

    def test_predicted_constant(self):
        """Test the b = 0 limit and a regular value."""
        assert predicted_constant(0.0) == 0.5
        expected = math.gamma(0.5) * math.sin(math.pi / 4) / math.pi
        assert predicted_constant(0.5) == pytest.approx(expected)

    def test_requires_mean_zero(self):
        """Test a positive measure is rejected."""
        with pytest.raises(DegenerateMeasureError):
            appendix_identity_check(0.5, GridMeasure([0.0], 0.1, np.ones(4)))

    def test_range(self):
        """Test b outside [0, 1) is rejected."""
        with pytest.raises(ParameterError):
            appendix_identity_check(1.5, GridMeasure([0.0], 0.1, np.array([1.0, -1.0])))
