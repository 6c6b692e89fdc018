"""Band quantization and bit-plane extraction.

Levels come from {0, 2, 4, ..., 128}; level 0 skips the band (the decoder
substitutes the SI band). The DC band covers [0, 4] (the DC range of a 4×4
orthonormal DCT of [0,1] pixels); AC bands cover [-r, r] with r the band's
largest magnitude, transmitted as float32.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ddvc.codec.classic.dct import BAND_COUNT
from ddvc.codec.errors import ParameterError


LEVELS = frozenset({0, *(2 ** m for m in range(1, 8))})
DC_RANGE = (0.0, 4.0)
MIN_RANGE = 1e-6

QI_PRESETS: dict[int, tuple[tuple[int, ...], ...]] = {
    1: ((16, 8, 0, 0), (8, 0, 0, 0), (0, 0, 0, 0), (0, 0, 0, 0)),
    2: ((32, 8, 0, 0), (8, 0, 0, 0), (0, 0, 0, 0), (0, 0, 0, 0)),
    3: ((32, 8, 4, 0), (8, 4, 0, 0), (4, 0, 0, 0), (0, 0, 0, 0)),
    4: ((32, 16, 8, 4), (16, 8, 4, 0), (8, 4, 0, 0), (4, 0, 0, 0)),
    5: ((32, 16, 8, 4), (16, 8, 4, 4), (8, 4, 4, 0), (4, 4, 0, 0)),
    6: ((64, 16, 8, 8), (16, 8, 8, 4), (8, 8, 4, 4), (8, 4, 4, 0)),
    7: ((64, 32, 16, 8), (32, 16, 8, 4), (16, 8, 4, 4), (8, 4, 4, 0)),
    8: ((128, 64, 32, 16), (64, 32, 16, 8), (32, 16, 8, 4), (16, 8, 4, 0)),
}


def qi_levels(qi: int) -> np.ndarray:
    """Per-band levels (16,) of quality index `qi` in [1, 8]."""
    if qi not in QI_PRESETS:
        raise ParameterError(f"qi must be in [1, 8], got {qi}")
    return np.asarray(QI_PRESETS[qi], dtype=np.int64).reshape(BAND_COUNT)


def plane_count(level: int) -> int:
    return int(level).bit_length() - 1 if level else 0


def _check_levels(levels: np.ndarray) -> np.ndarray:
    levels = np.asarray(levels, dtype=np.int64).reshape(-1)
    if levels.size != BAND_COUNT:
        raise ParameterError(f"expected {BAND_COUNT} band levels, got {levels.size}")
    invalid = sorted({int(level) for level in levels} - LEVELS)
    if invalid:
        raise ParameterError(f"quantization levels {invalid} are not in {sorted(LEVELS)}")
    return levels


def float32_ceil(value: float) -> float:
    """Smallest float32 >= value."""
    rounded = np.float32(value)
    if float(rounded) < value:
        rounded = np.nextafter(rounded, np.float32(np.inf))
    return float(rounded)


@dataclass
class QuantizedBands:
    """Symbols of coded bands (None where skipped) with each band's quantizer range."""
    symbols: list[np.ndarray | None]
    levels: np.ndarray
    low: np.ndarray
    high: np.ndarray

    @property
    def skipped(self) -> np.ndarray:
        return self.levels == 0

    def cell_width(self, band: int) -> float:
        return (self.high[band] - self.low[band]) / self.levels[band]


def band_ranges(bands: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    low = np.empty(BAND_COUNT)
    high = np.empty(BAND_COUNT)
    low[0], high[0] = DC_RANGE
    for band in range(1, BAND_COUNT):
        radius = float32_ceil(max(float(np.abs(bands[band]).max(initial=0.0)), MIN_RANGE))
        low[band], high[band] = -radius, radius
    return low, high


def quantize_bands(bands: np.ndarray, levels: np.ndarray) -> QuantizedBands:
    """Uniform quantization of each band into `level` cells over its range."""
    levels = _check_levels(levels)
    if bands.shape[0] != BAND_COUNT:
        raise ParameterError(f"expected {BAND_COUNT} bands, got {bands.shape[0]}")
    low, high = band_ranges(bands)
    symbols: list[np.ndarray | None] = []
    for band in range(BAND_COUNT):
        level = int(levels[band])
        if level == 0:
            symbols.append(None)
            continue
        width = (high[band] - low[band]) / level
        cells = np.floor((bands[band] - low[band]) / width)
        symbols.append(np.clip(cells, 0, level - 1).astype(np.int64))
    return QuantizedBands(symbols=symbols, levels=levels, low=low, high=high)


def dequantize(symbols: np.ndarray, low: float, high: float, level: int) -> np.ndarray:
    """Cell midpoints of `symbols`."""
    width = (high - low) / level
    return low + (symbols + 0.5) * width


def to_bit_planes(symbols: np.ndarray, level: int) -> np.ndarray:
    """(planes, N) uint8 array, most significant plane first."""
    count = plane_count(level)
    flat = np.asarray(symbols, dtype=np.int64).reshape(-1)
    shifts = np.arange(count - 1, -1, -1, dtype=np.int64)
    return ((flat[None, :] >> shifts[:, None]) & 1).astype(np.uint8)


def from_bit_planes(planes: np.ndarray) -> np.ndarray:
    symbols = np.zeros(planes.shape[1], dtype=np.int64)
    for plane in planes:
        symbols = (symbols << 1) | plane.astype(np.int64)
    return symbols
