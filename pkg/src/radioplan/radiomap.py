"""Matched-filter radio maps from aperture signals.

The filter taps replicate the spherical-wave pattern of a point source at a
fixed design depth below the aperture: tap(u, v) = exp(-j*2*pi*d/lambda)/d
with d = sqrt(depth^2 + (u*spacing)^2 + (v*spacing)^2) on a centered offset
grid. Filtering correlates the received grid with the conjugated taps (zero
padding keeps the output size), which coherently focuses energy at source
locations; the magnitude is then normalized per map and rendered through a
256-entry RGB lookup table.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

import numpy as np
from scipy.signal import fftconvolve

from .errors import SpacingMismatchError
from .lis import ReceivedSignal, half_wavelength_spacing
from .propagation import SPEED_OF_LIGHT


@dataclass(frozen=True)
class MfKernel:
    """Spherical-wave taps on a centered grid, plus the design parameters."""

    taps: np.ndarray
    design_frequency: float
    design_depth: float
    spacing: float


@dataclass(frozen=True)
class RadioMap:
    """Magnitude of the filtered output and its RGB rendering."""

    magnitude: np.ndarray
    rgb: np.ndarray


def build_mf_kernel(frequency: float, depth: float, k_side: int,
                    spacing: float | None = None) -> MfKernel:
    """Create the filter taps; spacing defaults to half a wavelength."""
    if depth <= 0:
        raise ValueError("design depth must be > 0")
    if k_side < 1:
        raise ValueError("kernel side must be >= 1")
    if frequency <= 0:
        raise ValueError("frequency must be > 0")
    if spacing is None:
        spacing = half_wavelength_spacing(frequency)
    offsets = (np.arange(k_side) - (k_side - 1) / 2.0) * spacing
    du, dv = np.meshgrid(offsets, offsets, indexing="ij")
    d = np.sqrt(depth**2 + du**2 + dv**2)
    lam = SPEED_OF_LIGHT / frequency
    taps = np.exp(-2j * np.pi * d / lam) / d
    return MfKernel(taps=taps, design_frequency=frequency,
                    design_depth=depth, spacing=spacing)


def matched_filter(signal: ReceivedSignal, kernel: MfKernel,
                   method: str = "fft") -> np.ndarray:
    """Correlate the received grid with the conjugated kernel taps.

    Output keeps the input dimensions: out[n] = sum_m conj(k[m]) * padded[n+m]
    with the signal zero-padded and the kernel anchored at its center. The
    "fft" method is the production path; "direct" is the slow summation kept
    as an independent oracle.
    """
    if signal.spacing is not None and not np.isclose(
        signal.spacing, kernel.spacing, rtol=1e-9, atol=0.0
    ):
        raise SpacingMismatchError(
            f"kernel spacing {kernel.spacing} != signal spacing {signal.spacing}"
        )
    values = np.asarray(signal.values, dtype=complex)
    if method == "fft":
        flipped = np.conj(kernel.taps[::-1, ::-1])
        return fftconvolve(values, flipped, mode="same")
    if method == "direct":
        return _correlate_same_direct(values, kernel.taps)
    raise ValueError(f"unknown method {method!r}")


def _correlate_same_direct(values: np.ndarray, taps: np.ndarray) -> np.ndarray:
    nx, ny = values.shape
    ku, kv = taps.shape
    cu = int(np.ceil((ku - 1) / 2))
    cv = int(np.ceil((kv - 1) / 2))
    padded = np.zeros((nx + ku - 1, ny + kv - 1), dtype=complex)
    padded[cu:cu + nx, cv:cv + ny] = values
    out = np.zeros((nx, ny), dtype=complex)
    conj_taps = np.conj(taps)
    for u in range(ku):
        for v in range(kv):
            out += conj_taps[u, v] * padded[u:u + nx, v:v + ny]
    return out


def anchor_offset(kernel: MfKernel) -> float:
    """Spatial offset (m) of the correlation anchor from the taps' radial center.

    Even-sided kernels center between taps, so the same-size correlation
    anchors half a pitch past the pattern center on each axis; odd sides
    anchor exactly on it.
    """
    k_side = kernel.taps.shape[0]
    anchor_index = np.ceil((k_side - 1) / 2)
    return float((anchor_index - (k_side - 1) / 2) * kernel.spacing)


def locate_peak(magnitude: np.ndarray, element_positions: np.ndarray,
                kernel: MfKernel) -> tuple[float, float]:
    """Source (x, y) estimate: the argmax element, anchor-corrected."""
    i, j = np.unravel_index(int(np.argmax(magnitude)), magnitude.shape)
    offset = anchor_offset(kernel)
    return (float(element_positions[i, j, 0] - offset),
            float(element_positions[i, j, 1] - offset))


def default_lut() -> np.ndarray:
    """The LUT shipped with the package: a 256-entry grayscale ramp."""
    ref = resources.files("radioplan").joinpath("data/lut_gray.npy")
    with resources.as_file(ref) as path:
        lut = np.load(path)
    return _check_lut(lut)


def load_lut(path) -> np.ndarray:
    return _check_lut(np.load(path))


def _check_lut(lut: np.ndarray) -> np.ndarray:
    lut = np.asarray(lut)
    if lut.shape != (256, 3) or lut.dtype != np.uint8:
        raise ValueError("LUT must be a (256, 3) uint8 table")
    return lut


def to_rgb(magnitude: np.ndarray, lut: np.ndarray | None = None) -> np.ndarray:
    """Min-max normalize per map, then index the LUT with round-half-up.

    A constant map normalizes to zero everywhere and renders as LUT[0].
    """
    if lut is None:
        lut = default_lut()
    else:
        lut = _check_lut(lut)
    m = np.asarray(magnitude, dtype=float)
    if not np.all(np.isfinite(m)) or np.any(m < 0):
        raise ValueError("magnitudes must be finite and nonnegative")
    lo = float(m.min())
    hi = float(m.max())
    if hi == lo:
        norm = np.zeros_like(m)
    else:
        norm = (m - lo) / (hi - lo)
    idx = np.clip(np.floor(norm * 255.0 + 0.5).astype(int), 0, 255)
    return lut[idx]


def form_radio_map(signal: ReceivedSignal, kernel: MfKernel,
                   lut: np.ndarray | None = None) -> RadioMap:
    """Full map pipeline: filter, take magnitudes, render to RGB."""
    mf = matched_filter(signal, kernel)
    magnitude = np.abs(mf)
    return RadioMap(magnitude=magnitude, rgb=to_rgb(magnitude, lut))
