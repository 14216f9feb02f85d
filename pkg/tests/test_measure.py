"""Tests for aggmin.measure module."""

import math

import numpy as np
import pytest

from aggmin.errors import DegenerateMeasureError, DimensionError, ParameterError
from aggmin.measure import (
    CantorIterate,
    GridMeasure,
    ParticleEnsemble,
    cantor_iterate,
    distance_class,
    mu_hat,
    require_mean_zero,
)


class TestParticleEnsemble:
    """Tests for the ParticleEnsemble class."""

    @pytest.fixture
    def triangle(self):
        """Three unit-weight-sum particles in the plane."""
        return ParticleEnsemble(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]]))

    def test_default_weights(self, triangle):
        """Test weights default to 1/N."""
        assert np.allclose(triangle.weights, 1 / 3)
        assert triangle.is_probability()

    def test_one_dimensional_positions(self):
        """Test a flat position array is read as N points in d = 1."""
        ens = ParticleEnsemble(np.array([0.0, 1.0, 2.0]))
        assert ens.dimension == 1
        assert ens.n == 3

    def test_center_of_mass(self, triangle):
        """Test the weighted mean position."""
        assert np.allclose(triangle.center_of_mass(), [1 / 3, 2 / 3])

    def test_translated(self, triangle):
        """Test translation moves the centre of mass."""
        moved = triangle.translated([1.0, -1.0])
        assert np.allclose(moved.center_of_mass(), [4 / 3, -1 / 3])

    def test_rotated_keeps_distances(self, triangle):
        """Test rotation preserves pairwise distances."""
        turned = triangle.rotated(0.7)
        before = np.linalg.norm(triangle.positions[1] - triangle.positions[2])
        after = np.linalg.norm(turned.positions[1] - turned.positions[2])
        assert after == pytest.approx(before)

    def test_rotation_needs_plane(self):
        """Test rotation is only defined in d = 2."""
        with pytest.raises(DimensionError):
            ParticleEnsemble(np.zeros((2, 3))).rotated(0.1)

    def test_immutable(self, triangle):
        """Test the position array is read-only."""
        with pytest.raises(ValueError):
            triangle.positions[0, 0] = 5.0

    def test_weight_mismatch(self):
        """Test the weight count must match the point count."""
        with pytest.raises(ParameterError):
            ParticleEnsemble(np.zeros((3, 2)), np.ones(2))

    def test_nonfinite(self):
        """Test NaN positions are rejected."""
        with pytest.raises(ParameterError):
            ParticleEnsemble(np.array([[0.0, np.nan]]))

    def test_csv(self, triangle, tmp_path):
        """Test CSV export and import."""
        path = tmp_path / "points.csv"
        triangle.to_csv(path)
        assert path.read_text().splitlines()[0] == "x,y,w"
        back = ParticleEnsemble.from_csv(path)
        assert np.array_equal(back.positions, triangle.positions)
        assert np.array_equal(back.weights, triangle.weights)

    def test_csv_last_time(self, tmp_path):
        """Test a file with a t column keeps only the last snapshot."""
        path = tmp_path / "traj.csv"
        path.write_text("t,x,w\n0,0.0,0.5\n0,1.0,0.5\n1,0.25,0.5\n1,0.75,0.5\n")
        ens = ParticleEnsemble.from_csv(path)
        assert np.allclose(ens.positions[:, 0], [0.25, 0.75])

    def test_csv_bad_header(self, tmp_path):
        """Test a header without a weight column is rejected."""
        path = tmp_path / "bad.csv"
        path.write_text("x,y\n0,0\n")
        with pytest.raises(ParameterError):
            ParticleEnsemble.from_csv(path)


class TestGridMeasure:
    """Tests for the GridMeasure class."""

    def test_centered(self):
        """Test a centred grid puts cell centres symmetrically around 0."""
        grid = GridMeasure.centered(0.5, [3])
        assert np.allclose(grid.axes()[0], [-0.5, 0.0, 0.5])

    def test_from_density(self):
        """Test midpoint masses of a constant density."""
        grid = GridMeasure.from_density(lambda x: np.ones(x.shape[0]), [0.0, 0.0], 0.25, [4, 4])
        assert grid.total_mass == pytest.approx(1.0)
        assert grid.dimension == 2

    def test_mean_defect(self):
        """Test the mean defect of a balanced measure is zero."""
        grid = GridMeasure([0.0], 1.0, np.array([1.0, -1.0]))
        assert grid.mean_defect() == 0.0
        assert grid.abs_mass == 2.0

    def test_diameter(self):
        """Test the diameter bound covers the outer cells."""
        grid = GridMeasure([0.0], 1.0, np.array([1.0, 0.0, -1.0]))
        assert grid.diameter() == pytest.approx(3.0)

    def test_shifted(self):
        """Test shifting by whole cells."""
        grid = GridMeasure([0.0, 0.0], 0.5, np.ones((2, 2))).shifted(2)
        assert np.allclose(grid.origin, [1.0, 1.0])

    def test_shape_mismatch(self):
        """Test origin and value axes must agree."""
        with pytest.raises(ParameterError):
            GridMeasure([0.0, 0.0], 1.0, np.ones(3))

    def test_bad_cell(self):
        """Test the cell size must be positive."""
        with pytest.raises(ParameterError):
            GridMeasure([0.0], 0.0, np.ones(3))

    def test_json(self):
        """Test JSON export and import."""
        grid = GridMeasure([0.0, 1.0], 0.5, np.arange(6.0).reshape(2, 3))
        back = GridMeasure.from_json(grid.to_json())
        assert np.array_equal(back.values, grid.values)
        assert np.array_equal(back.origin, grid.origin)

    def test_json_invalid(self):
        """Test malformed grid JSON raises a parameter error."""
        with pytest.raises(ParameterError):
            GridMeasure.from_json('{"origin": [0], "h": 1}')

    def test_npz(self, tmp_path):
        """Test binary save and load."""
        grid = GridMeasure([0.0], 0.1, np.array([0.5, -0.5]))
        path = tmp_path / "grid.npz"
        grid.save(path)
        back = GridMeasure.load(path)
        assert back.h == grid.h
        assert np.array_equal(back.values, grid.values)


class TestCantorIterate:
    """Tests for the Cantor iterates rho_k."""

    def test_first_level(self):
        """Test rho_1 lives on [0, 1/M] and [1 - 1/M, 1]."""
        rho = cantor_iterate(12, 1)
        assert np.allclose(rho.intervals, [[0.0, 1 / 12], [11 / 12, 1.0]])

    def test_probability(self):
        """Test every level carries unit mass."""
        for k in range(6):
            assert cantor_iterate(12, k).mass == pytest.approx(1.0)

    def test_contains(self):
        """Test the middle gap is outside the support."""
        rho = cantor_iterate(12, 3)
        assert rho.contains(0.0)
        assert rho.contains(1.0)
        assert not rho.contains(0.5)
        assert rho.density(0.5) == 0.0
        assert rho.density(0.0) == pytest.approx(6.0**3)

    def test_locate(self):
        """Test interval lookup returns -1 off the support."""
        rho = cantor_iterate(12, 2)
        assert rho.locate(1.0) == 3
        assert rho.locate(0.5) == -1

    def test_zeroth_moment(self):
        """Test each interval carries mass 2^-k."""
        rho = cantor_iterate(12, 4)
        assert all(rho.moment(0, i) == pytest.approx(1 / 16) for i in range(rho.count))

    def test_boxes(self):
        """Test M^-j boxes meet exactly 2^j intervals."""
        rho = cantor_iterate(12, 4)
        for j in range(5):
            assert rho.boxes(12.0**-j) == 2**j

    def test_noninteger_ratio(self):
        """Test a non-integer ratio is symmetric about 1/2."""
        rho = cantor_iterate(4.5, 3)
        assert np.allclose(rho.lefts + rho.rights[::-1], 1.0)

    def test_bad_ratio(self):
        """Test M <= 3 is rejected."""
        with pytest.raises(ParameterError):
            cantor_iterate(3, 2)

    def test_bad_level(self):
        """Test negative levels are rejected."""
        with pytest.raises(ParameterError):
            cantor_iterate(12, -1)

    def test_type(self):
        """Test the constructor returns a CantorIterate."""
        assert isinstance(cantor_iterate(12, 0), CantorIterate)


class TestDistanceClass:
    """Tests for interval distance classes."""

    def test_same(self):
        """Test identical indices."""
        assert distance_class(12, 3, 2, 2) == "same"

    def test_neighbours(self):
        """Test siblings are separated at the finest scale."""
        assert distance_class(12, 3, 0, 1) == 3

    def test_halves(self):
        """Test the two halves are separated at the coarsest scale."""
        assert distance_class(12, 3, 0, 7) == 1

    def test_gap_bounds(self):
        """Test the class brackets the true gap."""
        M, k = 12, 3
        rho = cantor_iterate(M, k)
        for l1, l2 in [(0, 1), (1, 2), (0, 4), (3, 6)]:
            j = distance_class(M, k, l1, l2)
            gap = rho.lefts[max(l1, l2)] - rho.rights[min(l1, l2)]
            assert (M - 2) * M**-j - 1e-12 <= gap <= M ** (1 - j) + 1e-12

    def test_range(self):
        """Test out-of-range indices are rejected."""
        with pytest.raises(ParameterError):
            distance_class(12, 2, 0, 4)


class TestMuHat:
    """Tests for the Fourier transform of discrete measures."""

    def test_point_mass(self):
        """Test a unit mass at the origin has transform 1."""
        ens = ParticleEnsemble(np.zeros((1, 2)), np.ones(1))
        assert mu_hat(ens, [3.0, -1.0]) == pytest.approx(1.0)

    def test_symmetric_pair(self):
        """Test a symmetric pair has a real transform."""
        ens = ParticleEnsemble(np.array([[-1.0], [1.0]]), np.array([0.5, 0.5]))
        value = mu_hat(ens, [2.0])
        assert value.real == pytest.approx(math.cos(2.0))
        assert value.imag == pytest.approx(0.0, abs=1e-15)

    def test_batch(self):
        """Test an (n, d) batch gives n values."""
        ens = ParticleEnsemble(np.array([[0.0], [1.0]]))
        assert mu_hat(ens, np.linspace(0, 1, 5)[:, None]).shape == (5,)

    def test_dimension(self):
        """Test the frequency must match the measure dimension."""
        ens = ParticleEnsemble(np.zeros((1, 2)))
        with pytest.raises(DimensionError):
            mu_hat(ens, [1.0, 2.0, 3.0])


class TestRequireMeanZero:
    """Tests for the mean-zero precondition."""

    def test_positive(self):
        """Test a probability measure is rejected."""
        with pytest.raises(DegenerateMeasureError):
            require_mean_zero(GridMeasure([0.0], 1.0, np.ones(2)))

    def test_zero(self):
        """Test the zero measure is rejected."""
        with pytest.raises(DegenerateMeasureError):
            require_mean_zero(GridMeasure([0.0], 1.0, np.zeros(2)))

    def test_balanced(self):
        """Test a balanced measure passes."""
        require_mean_zero(GridMeasure([0.0], 1.0, np.array([1.0, -0.5, -0.5])))
