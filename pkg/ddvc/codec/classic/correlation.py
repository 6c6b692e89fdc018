"""Laplacian correlation-noise model between WZ coefficients and their side information.

Density f(x) = (α/2)·exp(-α|x - si|). Soft inputs are log-likelihood ratios
ln(P0 / P1) of each bit given the SI, the noise model and the already
decoded more-significant bit planes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ddvc.codec.classic.quantizer import QuantizedBands
from ddvc.codec.errors import ContractError, ParameterError
from ddvc.codec.classic.ldpca import LLR_CLIP


ALPHA_MIN = 1e-3
ALPHA_MAX = 1e4
CENTROID_POINTS = 33


@dataclass(frozen=True)
class LaplacianModel:
    alpha: float

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise ParameterError(f"Laplacian alpha must be positive, got {self.alpha}")


def laplacian_fit(residuals: np.ndarray) -> LaplacianModel:
    """Maximum-likelihood α = 1 / mean|r|, kept inside [1e-3, 1e4]."""
    residuals = np.asarray(residuals, dtype=np.float64).reshape(-1)
    if residuals.size == 0:
        raise ParameterError("cannot fit a Laplacian to an empty residual set")
    spread = float(np.mean(np.abs(residuals)))
    if spread == 0.0:
        return LaplacianModel(ALPHA_MAX)
    return LaplacianModel(float(np.clip(1.0 / spread, ALPHA_MIN, ALPHA_MAX)))


def laplace_mass(low: np.ndarray, high: np.ndarray, center: np.ndarray, alpha: np.ndarray | float) -> np.ndarray:
    """Probability of [low, high] under the Laplacian centred at `center`; infinite edges allowed."""
    low = np.asarray(low, dtype=np.float64)
    high = np.asarray(high, dtype=np.float64)
    a = np.clip(alpha * (low - center), -745.0, 745.0)
    b = np.clip(alpha * (high - center), -745.0, 745.0)
    below = 0.5 * (np.exp(np.minimum(b, 0.0)) - np.exp(np.minimum(a, 0.0)))
    above = 0.5 * (np.exp(-np.maximum(a, 0.0)) - np.exp(-np.maximum(b, 0.0)))
    straddle = 1.0 - 0.5 * np.exp(np.minimum(a, 0.0)) - 0.5 * np.exp(-np.maximum(b, 0.0))
    mass = np.where(b <= 0.0, below, np.where(a >= 0.0, above, straddle))
    return np.clip(mass, 0.0, 1.0)


def soft_input(si_value: float, model: LaplacianModel, cells: Sequence[tuple[float, float, int]]) -> float:
    """LLR ln(P0/P1) of a bit given candidate cells (low, high, bit) still consistent with decoded planes.

    Raises:
        ContractError: `cells` is empty.
    """
    if not cells:
        raise ContractError("soft input needs at least one candidate cell")
    lows = np.array([cell[0] for cell in cells], dtype=np.float64)
    highs = np.array([cell[1] for cell in cells], dtype=np.float64)
    bits = np.array([cell[2] for cell in cells], dtype=np.int64)
    mass = laplace_mass(lows, highs, si_value, model.alpha)
    zero, one = float(mass[bits == 0].sum()), float(mass[bits == 1].sum())
    if zero + one <= 0.0:
        distance = np.maximum(lows - si_value, 0.0) + np.maximum(si_value - highs, 0.0)
        return LLR_CLIP if bits[int(np.argmin(distance))] == 0 else -LLR_CLIP
    if one == 0.0:
        return LLR_CLIP
    if zero == 0.0:
        return -LLR_CLIP
    return float(np.clip(np.log(zero / one), -LLR_CLIP, LLR_CLIP))


def bit_probability(llr: np.ndarray | float) -> np.ndarray | float:
    """P(bit = 1) from ln(P0/P1)."""
    return 1.0 / (1.0 + np.exp(np.clip(llr, -LLR_CLIP, LLR_CLIP)))


def plane_llr(
    si_values: np.ndarray,
    alpha: float,
    prefix: np.ndarray,
    plane_index: int,
    planes: int,
    low: float,
    high: float,
    level: int,
) -> np.ndarray:
    """Vectorized soft input for bit plane `plane_index` (0 = MSB) of one band.

    `prefix` holds the symbol bits already decoded above this plane. The
    candidate block of each coefficient is split into the half where the
    current bit is 0 and the half where it is 1; the outermost cells extend
    to infinity because the quantizer clips into them.
    """
    remaining = planes - plane_index
    block = 1 << remaining
    half = block >> 1
    width = (high - low) / level
    first = np.asarray(prefix, dtype=np.int64) * block
    edge0 = low + first * width
    edge_mid = low + (first + half) * width
    edge1 = low + (first + block) * width
    edge0 = np.where(first == 0, -np.inf, edge0)
    edge1 = np.where(first + block >= level, np.inf, edge1)
    si_values = np.asarray(si_values, dtype=np.float64)
    zero = laplace_mass(edge0, edge_mid, si_values, alpha)
    one = laplace_mass(edge_mid, edge1, si_values, alpha)
    with np.errstate(divide="ignore"):
        llr = np.log(zero) - np.log(one)
    underflow = (zero <= 0.0) & (one <= 0.0)
    nearest_zero = si_values < edge_mid
    llr = np.where(underflow, np.where(nearest_zero, LLR_CLIP, -LLR_CLIP), llr)
    return np.clip(np.nan_to_num(llr, nan=0.0, posinf=LLR_CLIP, neginf=-LLR_CLIP), -LLR_CLIP, LLR_CLIP)


def _centroid(si: np.ndarray, low: np.ndarray, high: np.ndarray, alpha: float) -> np.ndarray:
    steps = np.linspace(0.0, 1.0, CENTROID_POINTS)
    points = low[..., None] + (high - low)[..., None] * steps
    log_weight = -alpha * np.abs(points - si[..., None])
    log_weight -= log_weight.max(axis=-1, keepdims=True)
    weights = np.exp(log_weight)
    return (points * weights).sum(axis=-1) / weights.sum(axis=-1)


def reconstruct_bands(
    decoded: Sequence[np.ndarray | None],
    si_bands: np.ndarray,
    quantized: QuantizedBands,
    alphas: Sequence[float],
    mode: str = "clamp",
) -> np.ndarray:
    """Combine decoded cells with SI bands.

    Skipped bands are copied from the SI. Coded bands take the SI value
    clamped into the decoded cell (`clamp`) or the Laplacian conditional mean
    over the cell (`centroid`).
    """
    if mode not in ("clamp", "centroid"):
        raise ParameterError(f"reconstruction mode must be clamp or centroid, got {mode!r}")
    output = np.array(si_bands, dtype=np.float64, copy=True)
    for band, symbols in enumerate(decoded):
        level = int(quantized.levels[band])
        if level == 0 or symbols is None:
            continue
        width = quantized.cell_width(band)
        cell_low = quantized.low[band] + symbols * width
        cell_high = cell_low + width
        si = output[band]
        if mode == "clamp":
            output[band] = np.clip(si, cell_low, cell_high)
        else:
            output[band] = _centroid(si, cell_low, cell_high, float(alphas[band]))
    return output
