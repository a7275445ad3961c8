"""Ceiling aperture: element grid, antenna outputs, noise, and S-averaging.

The antenna output at element n is y_n = sqrt(lambda^2 * Z_n / (4*pi*Z0)) * E_n
plus circular complex Gaussian noise of variance sigma^2 per element. SNR is
defined as gamma = lambda^2 * sum_n |E_n|^2 / (4*pi*Z0*N*sigma^2); note the
sum runs over all N elements while the denominator carries a single N.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatchError, ZeroFieldError
from .propagation import FieldGrid, FREE_SPACE_IMPEDANCE, SPEED_OF_LIGHT


@dataclass(frozen=True)
class LisConfig:
    """Rectangular grid of isotropic elements mounted at the ceiling plane."""

    n_x: int
    n_y: int
    spacing: float  # m
    antenna_impedance: float = 1.0  # ohm; the usual normalized convention
    height: float = 8.0  # m above the floor

    def __post_init__(self) -> None:
        if self.n_x < 2 or self.n_y < 2:
            raise ValueError("element counts must be >= 2")
        if self.spacing <= 0:
            raise ValueError("element spacing must be > 0")
        if self.antenna_impedance <= 0:
            raise ValueError("antenna impedance must be > 0")


@dataclass(frozen=True)
class ReceivedSignal:
    """Complex antenna outputs plus the noise/averaging metadata behind them.

    `sigma2` is the effective per-element noise variance of `values`, i.e.
    already divided by the averaging count `s_count`.
    """

    values: np.ndarray
    sigma2: float
    s_count: int
    frequency: float
    spacing: float | None = None

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.values)):
            raise ValueError("signal values must be finite")
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be >= 0")
        if self.s_count < 1:
            raise ValueError("s_count must be >= 1")


def half_wavelength_spacing(frequency: float) -> float:
    return 0.5 * SPEED_OF_LIGHT / frequency


def wavelength(frequency: float) -> float:
    return SPEED_OF_LIGHT / frequency


def element_positions(lis: LisConfig, room_extent: tuple[float, float, float]) -> np.ndarray:
    """Element centers (nx, ny, 3), grid centered over the room footprint."""
    lx, ly, _ = room_extent
    xs = lx / 2 + (np.arange(lis.n_x) - (lis.n_x - 1) / 2.0) * lis.spacing
    ys = ly / 2 + (np.arange(lis.n_y) - (lis.n_y - 1) / 2.0) * lis.spacing
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    gz = np.full_like(gx, lis.height)
    return np.stack([gx, gy, gz], axis=-1)


def snr_db(field: FieldGrid, sigma2: float) -> float:
    """Evaluate the SNR definition for a field and noise variance, in dB."""
    lam = wavelength(field.frequency)
    energy = float(np.sum(np.abs(field.values) ** 2))
    n = field.values.size
    gamma = lam**2 * energy / (4.0 * np.pi * FREE_SPACE_IMPEDANCE * n * sigma2)
    return 10.0 * np.log10(gamma)


def noise_sigma_for_snr(field: FieldGrid, gamma_db: float, lis: LisConfig) -> float:
    """Per-element noise variance that realizes the requested SNR."""
    _check_field_shape(field, lis)
    lam = wavelength(field.frequency)
    energy = float(np.sum(np.abs(field.values) ** 2))
    if energy == 0.0:
        raise ZeroFieldError("cannot calibrate noise against a zero field")
    n = field.values.size
    gamma = 10.0 ** (gamma_db / 10.0)
    return lam**2 * energy / (4.0 * np.pi * FREE_SPACE_IMPEDANCE * n * gamma)


def _check_field_shape(field: FieldGrid, lis: LisConfig) -> None:
    if field.values.shape != (lis.n_x, lis.n_y):
        raise ShapeMismatchError(
            f"field grid {field.values.shape} does not match LIS ({lis.n_x}, {lis.n_y})"
        )


def _field_scale(field: FieldGrid, lis: LisConfig) -> float:
    lam = wavelength(field.frequency)
    return float(np.sqrt(lam**2 * lis.antenna_impedance / (4.0 * np.pi * FREE_SPACE_IMPEDANCE)))


def _noise_draw(shape: tuple[int, int], sigma2: float, seed: int, index: int) -> np.ndarray:
    # One stream per (seed, sample index): parallel S-sample generation stays
    # independent of scheduling, and index 0 reproduces the single-shot draw.
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))
    if sigma2 == 0.0:
        return np.zeros(shape, dtype=complex)
    scale = np.sqrt(sigma2 / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def synthesize_signal(field: FieldGrid, lis: LisConfig, sigma2: float, seed: int) -> ReceivedSignal:
    """Antenna outputs for one snapshot: scaled field plus one noise draw."""
    if sigma2 < 0:
        raise ValueError("sigma2 must be >= 0")
    _check_field_shape(field, lis)
    values = _field_scale(field, lis) * field.values + _noise_draw(
        field.values.shape, sigma2, seed, 0
    )
    return ReceivedSignal(values=values, sigma2=sigma2, s_count=1,
                          frequency=field.frequency, spacing=lis.spacing)


def average_samples(field: FieldGrid, lis: LisConfig, sigma2: float, s: int,
                    seed: int) -> ReceivedSignal:
    """Mean of s independent snapshots sharing one field realization.

    The field term is common to every snapshot, so the average equals the
    scaled field plus the mean of s noise draws; the effective noise variance
    sigma2/s is recorded on the result.
    """
    if s < 1:
        raise ValueError("s must be >= 1")
    if sigma2 < 0:
        raise ValueError("sigma2 must be >= 0")
    _check_field_shape(field, lis)
    shape = field.values.shape
    noise_sum = np.zeros(shape, dtype=complex)
    for k in range(s):
        noise_sum += _noise_draw(shape, sigma2, seed, k)
    values = _field_scale(field, lis) * field.values + noise_sum / s
    return ReceivedSignal(values=values, sigma2=sigma2 / s, s_count=s,
                          frequency=field.frequency, spacing=lis.spacing)
