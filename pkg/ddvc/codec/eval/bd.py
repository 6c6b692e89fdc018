"""Bjøntegaard delta metrics from cubic fits, integrated in closed form."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ddvc.codec.errors import ParameterError


MIN_POINTS = 4


def _prepare(rates: Sequence[float], quality: Sequence[float], label: str) -> tuple[np.ndarray, np.ndarray]:
    rates = np.asarray(rates, dtype=np.float64)
    quality = np.asarray(quality, dtype=np.float64)
    if rates.ndim != 1 or rates.shape != quality.shape:
        raise ParameterError(f"{label}: rate and quality need matching 1-D shapes, got {rates.shape} and {quality.shape}")
    if rates.size < MIN_POINTS:
        raise ParameterError(f"{label}: need at least {MIN_POINTS} RD points, got {rates.size}")
    if bool((rates <= 0).any()):
        raise ParameterError(f"{label}: rates must be positive")
    return np.log10(rates), quality


def _overlap(a: np.ndarray, b: np.ndarray, what: str) -> tuple[float, float]:
    low = max(float(a.min()), float(b.min()))
    high = min(float(a.max()), float(b.max()))
    if high <= low:
        raise ParameterError(
            f"no overlapping {what} range: anchor [{a.min():.4g}, {a.max():.4g}], test [{b.min():.4g}, {b.max():.4g}]"
        )
    return low, high


def _mean_on(coefficients: np.ndarray, low: float, high: float) -> float:
    integral = np.polyint(coefficients)
    return float((np.polyval(integral, high) - np.polyval(integral, low)) / (high - low))


def bd_rate(
    anchor_rates: Sequence[float],
    anchor_quality: Sequence[float],
    test_rates: Sequence[float],
    test_quality: Sequence[float],
) -> float:
    """Average rate difference (%) of test vs anchor at equal quality; negative means savings."""
    anchor_log, anchor_q = _prepare(anchor_rates, anchor_quality, "anchor")
    test_log, test_q = _prepare(test_rates, test_quality, "test")
    if np.array_equal(anchor_log, test_log) and np.array_equal(anchor_q, test_q):
        return 0.0
    low, high = _overlap(anchor_q, test_q, "quality")
    anchor_fit = np.polyfit(anchor_q, anchor_log, 3)
    test_fit = np.polyfit(test_q, test_log, 3)
    delta = _mean_on(test_fit, low, high) - _mean_on(anchor_fit, low, high)
    return (10.0 ** delta - 1.0) * 100.0


def bd_quality(
    anchor_rates: Sequence[float],
    anchor_quality: Sequence[float],
    test_rates: Sequence[float],
    test_quality: Sequence[float],
) -> float:
    """Average quality difference (dB) of test vs anchor at equal rate."""
    anchor_log, anchor_q = _prepare(anchor_rates, anchor_quality, "anchor")
    test_log, test_q = _prepare(test_rates, test_quality, "test")
    if np.array_equal(anchor_log, test_log) and np.array_equal(anchor_q, test_q):
        return 0.0
    low, high = _overlap(anchor_log, test_log, "log-rate")
    anchor_fit = np.polyfit(anchor_log, anchor_q, 3)
    test_fit = np.polyfit(test_log, test_q, 3)
    return _mean_on(test_fit, low, high) - _mean_on(anchor_fit, low, high)
