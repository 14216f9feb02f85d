"""Tests for aggmin.fourier module."""

import math

import numpy as np
import pytest

from aggmin.energy import energy
from aggmin.errors import (
    DegenerateMeasureError,
    DimensionError,
    ParameterError,
    WitnessNotFoundError,
)
from aggmin.fourier import (
    WITNESS_CELLS,
    Window,
    build_witness,
    bump,
    bump_transform,
    decay_exponent,
    flic_form,
    scan_windows,
)
from aggmin.measure import GridMeasure, mu_hat
from aggmin.potential import HierGauss, RepulsivePower, RieszQuad

LADDER = HierGauss(d=2, alpha=3.0, lam=0.15, c_w=0.25, k_trunc=7, c2=0.2)


class TestScanWindows:
    """Tests for negative-window scans of W-hat."""

    def test_positive_transform(self):
        """Test a Riesz kernel has no negative windows."""
        scan = scan_windows(RieszQuad(d=2, alpha=3.0), 1e3, samples=10_000)
        assert scan.windows == []
        assert scan.family == "riesz_quad"

    def test_ladder_windows(self):
        """Test the Gaussian ladder has negative windows around its scales."""
        scan = scan_windows(LADDER, 1e3, samples=20_000)
        assert len(scan.windows) >= 1
        for window in scan.windows:
            assert window.lo <= window.argmin <= window.hi
            assert window.depth < 0
            assert window.j is not None
            assert LADDER.fourier_hat(window.argmin) < 0

    def test_one_window_per_level(self):
        """Test exactly one window meets each band (sqrt 3 +- 0.2) lambda^-j for j = 1..4."""
        scan = scan_windows(LADDER, 5e3, samples=100_000)
        for j in range(1, 5):
            lo = (math.sqrt(3) - 0.2) * LADDER.lam**-j
            hi = (math.sqrt(3) + 0.2) * LADDER.lam**-j
            hits = [w for w in scan.windows if w.lo <= hi and w.hi >= lo]
            assert len(hits) == 1
            assert hits[0].j == j

    def test_edges_are_roots(self):
        """Test window edges are zeros of W-hat."""
        scan = scan_windows(LADDER, 1e3, samples=20_000)
        window = scan.windows[0]
        scale = abs(window.depth)
        assert abs(LADDER.fourier_hat(window.lo)) <= 1e-8 * scale
        assert abs(LADDER.fourier_hat(window.hi)) <= 1e-8 * scale

    def test_samples_not_serialised(self):
        """Test the raw samples stay out of the JSON dump."""
        scan = scan_windows(RieszQuad(d=2, alpha=3.0), 10.0, samples=100)
        assert len(scan.xi) == 100
        assert "values" not in scan.model_dump()

    def test_bad_range(self):
        """Test xi_min must lie below xi_max."""
        with pytest.raises(ParameterError):
            scan_windows(LADDER, 1.0, xi_min=2.0)

    def test_decay_exponent(self):
        """Test alpha for Riesz-type kernels and b + d for powers."""
        assert decay_exponent(LADDER) == 3.0
        assert decay_exponent(RepulsivePower(b=0.5, d=1)) == 1.5


class TestBump:
    """Tests for the mollifier and its transform."""

    def test_support(self):
        """Test the bump vanishes for |eta| >= 1/4."""
        values = bump(np.array([0.0, 0.0625, 0.1]))
        assert values[0] == pytest.approx(math.exp(-1))
        assert values[1] == 0.0
        assert values[2] == 0.0

    @pytest.mark.parametrize("d", [1, 2])
    def test_unit_mass(self, d):
        """Test the transform is 1 at the origin with no imaginary part."""
        real, imag = bump_transform(d, [0.0])
        assert real[0] == pytest.approx(1.0)
        assert imag == pytest.approx(0.0, abs=1e-14)

    def test_decays(self):
        """Test the transform decays away from the origin."""
        real, _ = bump_transform(1, [0.0, 10.0, 40.0])
        assert abs(real[1]) < real[0]
        assert abs(real[2]) < abs(real[1])


class TestFlicForm:
    """Tests for the band integral next to the energy."""

    @pytest.fixture
    def dipole(self):
        """A mean-zero grid measure in one dimension."""
        return GridMeasure([0.0], 0.1, np.array([1.0, -2.0, 1.0]))

    def test_quadratic_scaling(self, dipole):
        """Test both sides scale by 4 when mu doubles."""
        spec = RepulsivePower(b=0.5, d=1)
        base = flic_form(spec, dipole, (0.5, 10.0))
        double = flic_form(spec, dipole.scaled(2.0), (0.5, 10.0))
        assert double.band_integral == pytest.approx(4 * base.band_integral, rel=1e-10)
        assert double.energy == pytest.approx(4 * base.energy, rel=1e-10)
        assert double.ratio == pytest.approx(base.ratio, rel=1e-10)

    def test_band_is_positive(self, dipole):
        """Test a nonzero measure has a positive band integral."""
        form = flic_form(RepulsivePower(b=0.5, d=1), dipole, (0.5, 10.0))
        assert form.band_integral > 0

    def test_zero_measure(self):
        """Test the zero measure gives zeros and no ratio."""
        zero = GridMeasure([0.0], 0.1, np.zeros(3))
        form = flic_form(RepulsivePower(b=0.5, d=1), zero, (0.0, 1.0))
        assert form.band_integral == 0.0
        assert form.energy == 0.0
        assert form.ratio is None

    def test_requires_mean_zero(self):
        """Test a positive measure is rejected."""
        with pytest.raises(DegenerateMeasureError):
            flic_form(RepulsivePower(b=0.5, d=1), GridMeasure([0.0], 0.1, np.ones(3)), (0.0, 1.0))

    def test_bad_band(self, dipole):
        """Test the band must satisfy 0 <= r < R."""
        with pytest.raises(ParameterError):
            flic_form(RepulsivePower(b=0.5, d=1), dipole, (2.0, 1.0))


class TestBuildWitness:
    """Tests for concavity witnesses."""

    def test_bad_delta(self):
        """Test delta must be positive."""
        with pytest.raises(ParameterError):
            build_witness(LADDER, 0.0, [])

    def test_dimension_cap(self):
        """Test witnesses are limited to d <= 3."""
        spec = RieszQuad(d=4, alpha=3.0)
        with pytest.raises(DimensionError):
            build_witness(spec, 1.0, [])

    def test_no_windows(self):
        """Test an empty window list raises with nothing tried."""
        with pytest.raises(WitnessNotFoundError) as exc:
            build_witness(LADDER, 1.0, [])
        assert exc.value.tried == []
        assert exc.value.code == 4

    def test_narrow_window_skipped(self):
        """Test a window narrower than 4 pi / delta is not tried on the grid."""
        narrow = Window(lo=10.0, hi=11.0, depth=-1.0, argmin=10.5, c1=0.1)
        with pytest.raises(WitnessNotFoundError) as exc:
            build_witness(LADDER, 1.0, narrow)
        assert exc.value.tried[0].status == "too_narrow"

    @pytest.mark.slow
    @pytest.mark.parametrize("delta", [1.0, 0.25, 0.0625])
    def test_witness(self, delta):
        """Test a mean-zero measure of diameter <= delta with negative energy exists."""
        scan = scan_windows(LADDER, WITNESS_CELLS * math.pi / delta)
        witness = build_witness(LADDER, delta, scan)
        assert witness.energy < 0
        assert witness.diameter <= delta
        assert witness.mean_defect <= 1e-12
        assert witness.accepted
        assert witness.tried[-1].status == "accepted"

    def test_translation_invariant(self):
        """Test shifting the witness leaves its energy and |mu-hat| unchanged."""
        scan = scan_windows(LADDER, WITNESS_CELLS * math.pi)
        witness = build_witness(LADDER, 1.0, scan)
        moved = witness.grid.shifted([3, -5])
        assert energy(LADDER, moved) == pytest.approx(witness.energy, rel=1e-9)
        xi = [witness.xi_center, 0.0]
        assert abs(mu_hat(moved, xi)) == pytest.approx(abs(mu_hat(witness.grid, xi)), rel=1e-9)

    def test_real_transform(self):
        """Test the centred witness has a real Fourier transform within its bound."""
        scan = scan_windows(LADDER, WITNESS_CELLS * math.pi)
        witness = build_witness(LADDER, 1.0, scan)
        assert witness.imag_residue <= 1e-10
        value = mu_hat(witness.grid, [witness.xi_center, 0.0])
        assert abs(value.imag) <= 1e-10 * witness.grid.abs_mass
        assert abs(value.real) > abs(value.imag)
