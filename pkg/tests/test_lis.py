import numpy as np
import pytest

from radioplan.errors import ShapeMismatchError, ZeroFieldError
from radioplan.lis import (
    FREE_SPACE_IMPEDANCE,
    LisConfig,
    average_samples,
    element_positions,
    half_wavelength_spacing,
    noise_sigma_for_snr,
    snr_db,
    synthesize_signal,
    wavelength,
)
from radioplan.propagation import FieldGrid

FREQ = 3.5e9
LAM = wavelength(FREQ)


def _lis(n=100):
    return LisConfig(n, n, half_wavelength_spacing(FREQ), height=8.0)


def _unit_energy_field(n=100):
    # Field with sum |E|^2 = 4*pi*Z0*N / lambda^2, so sigma^2 = 1 at 0 dB.
    total = 4.0 * np.pi * FREE_SPACE_IMPEDANCE * n * n / LAM**2
    values = np.full((n, n), np.sqrt(total / (n * n)), dtype=complex)
    return FieldGrid(values=values, frequency=FREQ)


class TestConfig:
    def test_invariants(self):
        with pytest.raises(ValueError):
            LisConfig(1, 16, 0.04)
        with pytest.raises(ValueError):
            LisConfig(16, 16, 0.0)
        with pytest.raises(ValueError):
            LisConfig(16, 16, 0.04, antenna_impedance=0.0)

    def test_half_wavelength_constants(self):
        assert wavelength(FREQ) == pytest.approx(0.085655, abs=1e-6)
        assert half_wavelength_spacing(FREQ) == pytest.approx(0.042827, abs=1e-6)

    def test_element_positions_centered(self):
        lis = LisConfig(4, 4, 0.5, height=8.0)
        pos = element_positions(lis, (10.0, 10.0, 8.0))
        assert pos.shape == (4, 4, 3)
        assert np.allclose(pos[..., 2], 8.0)
        assert pos[..., 0].mean() == pytest.approx(5.0)
        assert pos[..., 1].mean() == pytest.approx(5.0)
        assert pos[1, 0, 0] - pos[0, 0, 0] == pytest.approx(0.5)


class TestNoiseCalibration:
    def test_zero_db_identity(self):
        assert noise_sigma_for_snr(_unit_energy_field(), 0.0, _lis()) == pytest.approx(1.0)

    def test_minus_ten_db_scales_to_ten(self):
        assert noise_sigma_for_snr(_unit_energy_field(), -10.0, _lis()) == pytest.approx(10.0)

    def test_zero_field_rejected(self):
        field = FieldGrid(values=np.zeros((100, 100), complex), frequency=FREQ)
        with pytest.raises(ZeroFieldError):
            noise_sigma_for_snr(field, 0.0, _lis())

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            noise_sigma_for_snr(_unit_energy_field(50), 0.0, _lis(100))

    def test_snr_round_trip(self):
        # Re-evaluating the SNR definition recovers the request exactly.
        rng = np.random.default_rng(0)
        values = rng.normal(size=(64, 64)) + 1j * rng.normal(size=(64, 64))
        field = FieldGrid(values=values, frequency=FREQ)
        lis = _lis(64)
        for gamma in (-10.0, 0.0, 10.0):
            sigma2 = noise_sigma_for_snr(field, gamma, lis)
            assert abs(snr_db(field, sigma2) - gamma) < 0.1


class TestSynthesize:
    def test_noiseless_is_deterministic_scaling(self):
        field = _unit_energy_field(16)
        lis = _lis(16)
        signal = synthesize_signal(field, lis, 0.0, seed=9)
        scale = np.sqrt(LAM**2 * 1.0 / (4 * np.pi * FREE_SPACE_IMPEDANCE))
        assert np.array_equal(signal.values, scale * field.values)
        assert signal.sigma2 == 0.0 and signal.s_count == 1

    def test_noise_power_concentrates(self):
        # 320^2 > 1e5 elements: mean |n|^2 within 3% of sigma^2 = 1.
        field = FieldGrid(values=np.zeros((320, 320), complex), frequency=FREQ)
        lis = LisConfig(320, 320, half_wavelength_spacing(FREQ))
        signal = synthesize_signal(field, lis, 1.0, seed=4)
        assert np.mean(np.abs(signal.values) ** 2) == pytest.approx(1.0, rel=0.03)

    def test_same_seed_identical(self):
        field = _unit_energy_field(16)
        lis = _lis(16)
        a = synthesize_signal(field, lis, 2.0, seed=5)
        b = synthesize_signal(field, lis, 2.0, seed=5)
        assert np.array_equal(a.values, b.values)

    def test_negative_sigma_rejected(self):
        with pytest.raises(ValueError):
            synthesize_signal(_unit_energy_field(16), _lis(16), -1.0, seed=0)


class TestAveraging:
    def test_s1_identical_to_single_snapshot(self):
        field = _unit_energy_field(16)
        lis = _lis(16)
        single = synthesize_signal(field, lis, 3.0, seed=21)
        averaged = average_samples(field, lis, 3.0, 1, seed=21)
        assert np.array_equal(single.values, averaged.values)
        assert averaged.sigma2 == 3.0 and averaged.s_count == 1

    def test_variance_scales_inverse_s(self):
        field = FieldGrid(values=np.zeros((128, 128), complex), frequency=FREQ)
        lis = LisConfig(128, 128, half_wavelength_spacing(FREQ))
        for s in (1, 10, 100):
            signal = average_samples(field, lis, 1.0, s, seed=31)
            measured = float(np.mean(np.abs(signal.values) ** 2))
            assert measured == pytest.approx(1.0 / s, rel=0.1)
            assert signal.sigma2 == pytest.approx(1.0 / s)

    def test_s_must_be_positive(self):
        with pytest.raises(ValueError):
            average_samples(_unit_energy_field(16), _lis(16), 1.0, 0, seed=0)

    def test_noiseless_magnitude_matches_field(self):
        rng = np.random.default_rng(8)
        values = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
        field = FieldGrid(values=values, frequency=FREQ)
        signal = average_samples(field, _lis(16), 0.0, 5, seed=0)
        expected = np.sqrt(LAM**2 / (4 * np.pi * FREE_SPACE_IMPEDANCE)) * np.abs(values)
        assert np.allclose(np.abs(signal.values), expected, rtol=1e-12)
