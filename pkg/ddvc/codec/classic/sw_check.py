"""Empirical Slepian-Wolf rate check for the LDPCA code on a binary symmetric channel."""

from __future__ import annotations

import math

import numpy as np
from pydantic import BaseModel, Field

from ddvc.codec.classic.ldpca import LLR_CLIP, LdpcaCode, binary_entropy, crc8, default_code
from ddvc.codec.errors import ParameterError
from ddvc.codec.utils.logging import get_logger


logger = get_logger("ddvc")


class SWRateReport(BaseModel):
    p: float = Field(..., ge=0.0, le=0.5)
    blocklen: int
    trials: int
    achieved_rate: float
    entropy: float
    success_rate: float
    rates: list[float]


def bsc_llr(side_info: np.ndarray, p: float) -> np.ndarray:
    """ln(P0/P1) of each source bit given its BSC-corrupted copy."""
    if p <= 0.0:
        magnitude = LLR_CLIP
    elif p >= 0.5:
        magnitude = 0.0
    else:
        magnitude = min(LLR_CLIP, math.log((1.0 - p) / p))
    return (1.0 - 2.0 * np.asarray(side_info, dtype=np.float64)) * magnitude


def sw_rate_check(p: float, blocklen: int = 1024, trials: int = 50, seed: int = 0, code: LdpcaCode | None = None) -> SWRateReport:
    """Mean syndrome rate (bits per source bit) needed to decode A from B = A ⊕ Bernoulli(p)."""
    if not 0.0 <= p <= 0.5:
        raise ParameterError(f"crossover probability must be in [0, 0.5], got {p}")
    if trials <= 0:
        raise ParameterError(f"trials must be positive, got {trials}")
    code = code or default_code(blocklen)
    if code.n != blocklen:
        raise ParameterError(f"code length {code.n} does not match blocklen {blocklen}")
    rng = np.random.default_rng(seed)
    rates: list[float] = []
    successes = 0
    for trial in range(trials):
        source = rng.integers(0, 2, blocklen, dtype=np.uint8)
        noise = (rng.random(blocklen) < p).astype(np.uint8)
        side_info = source ^ noise
        accumulated = code.encode(source)
        decoded, transcript = code.decode(
            bsc_llr(side_info, p),
            lambda chunk: code.chunk(accumulated, chunk),
            crc8(source),
        )
        ok = transcript.success and bool(np.array_equal(decoded, source))
        successes += int(ok)
        rates.append(transcript.syndrome_bits / blocklen)
        logger.debug(f"event=sw_trial p={p} trial={trial} rate={rates[-1]:.4f} success={ok}")
    report = SWRateReport(
        p=p,
        blocklen=blocklen,
        trials=trials,
        achieved_rate=float(np.mean(rates)),
        entropy=float(binary_entropy(p)),
        success_rate=successes / trials,
        rates=rates,
    )
    logger.info(
        f"event=sw_rate_check p={p} rate={report.achieved_rate:.4f} entropy={report.entropy:.4f} "
        f"success={report.success_rate:.2f}"
    )
    return report
