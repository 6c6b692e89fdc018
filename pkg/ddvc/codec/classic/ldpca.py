"""LDPC-accumulate (LDPCA) Slepian-Wolf coding with rate-adaptive syndrome release.

The encoder computes s = H·x over GF(2) for a seed-fixed parity matrix with
column degree 3 and balanced row degrees, and accumulates a_i = s_1 ⊕ … ⊕ s_i.
Accumulated syndromes are released in chunks; chunk j reveals the indices
g·C + (C - 1 - bitrev(j)) for every group g, so every prefix of chunks splits
the syndrome range into nearly even segments. Each segment (p, q] between two
revealed indices is one merged check with value a_q ⊕ a_p.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from pydantic import BaseModel, Field
from scipy import sparse

from ddvc.codec.errors import ParameterError
from ddvc.codec.utils.logging import get_logger


logger = get_logger("ddvc")

LLR_CLIP = 50.0
DEFAULT_BLOCK = 1024
DEFAULT_CHUNKS = 64
DEFAULT_SEED = 2024

ChunkProvider = Callable[[int], np.ndarray]


def _crc8_table(poly: int = 0x07) -> list[int]:
    table = []
    for byte in range(256):
        crc = byte
        for _ in range(8):
            crc = ((crc << 1) ^ poly) & 0xFF if crc & 0x80 else (crc << 1) & 0xFF
        table.append(crc)
    return table


_CRC8_TABLE = _crc8_table()


def crc8(bits: np.ndarray) -> int:
    """CRC-8 (polynomial 0x07, init 0) of a bit array packed MSB-first."""
    crc = 0
    for byte in np.packbits(np.asarray(bits, dtype=np.uint8).reshape(-1)).tolist():
        crc = _CRC8_TABLE[crc ^ byte]
    return crc


def binary_entropy(p: np.ndarray | float) -> np.ndarray | float:
    p = np.clip(np.asarray(p, dtype=np.float64), 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -p * np.log2(p) - (1.0 - p) * np.log2(1.0 - p)
    h = np.nan_to_num(h, nan=0.0)
    return float(h) if h.ndim == 0 else h


def _bit_reverse(value: int, width: int) -> int:
    result = 0
    for _ in range(width):
        result = (result << 1) | (value & 1)
        value >>= 1
    return result


class PlaneTranscript(BaseModel):
    """Feedback exchange for one coded block."""
    chunks_requested: int = Field(..., ge=0)
    syndrome_bits: int = Field(..., ge=0)
    success: bool
    bp_iterations: int = Field(..., ge=0)
    requests: list[int] = Field(default_factory=list)
    frame: int | None = None
    color: int | None = None
    band: int | None = None
    bitplane: int | None = None
    block: int | None = None


@dataclass(frozen=True)
class MergedChecks:
    rows: np.ndarray
    cols: np.ndarray
    count: int
    known: np.ndarray


def belief_propagation(
    rows: np.ndarray,
    cols: np.ndarray,
    check_count: int,
    syndrome: np.ndarray,
    llr: np.ndarray,
    max_iterations: int = 100,
) -> tuple[np.ndarray, int, bool]:
    """Sum-product decoding in the log-tanh domain.

    Returns (hard decision, iterations used, syndrome satisfied).
    """
    n = llr.size
    llr = np.clip(llr, -LLR_CLIP, LLR_CLIP)
    syndrome = np.asarray(syndrome, dtype=np.int64)

    def satisfied(hard: np.ndarray) -> bool:
        parity = np.bincount(rows, weights=hard[cols], minlength=check_count).astype(np.int64) % 2
        return bool(np.array_equal(parity, syndrome))

    hard = (llr < 0).astype(np.uint8)
    if satisfied(hard):
        return hard, 0, True
    check_sign = 1.0 - 2.0 * syndrome[rows]
    to_check = llr[cols]
    for iteration in range(1, max_iterations + 1):
        t = np.tanh(to_check / 2.0)
        log_mag = np.log(np.clip(np.abs(t), 1e-15, None))
        negative = (t < 0).astype(np.int64)
        row_log = np.bincount(rows, weights=log_mag, minlength=check_count)
        row_negative = np.bincount(rows, weights=negative, minlength=check_count).astype(np.int64)
        extrinsic = np.minimum(np.exp(row_log[rows] - log_mag), 1.0 - 1e-15)
        sign = 1.0 - 2.0 * ((row_negative[rows] - negative) % 2)
        to_var = np.clip(check_sign * sign * 2.0 * np.arctanh(extrinsic), -LLR_CLIP, LLR_CLIP)
        total = llr + np.bincount(cols, weights=to_var, minlength=n)
        to_check = np.clip(total[cols] - to_var, -LLR_CLIP, LLR_CLIP)
        hard = (total < 0).astype(np.uint8)
        if satisfied(hard):
            return hard, iteration, True
    return hard, max_iterations, False


class LdpcaCode:
    """Rate-adaptive LDPCA code of block length `n` released in `chunks` chunks."""

    def __init__(
        self,
        n: int = DEFAULT_BLOCK,
        seed: int = DEFAULT_SEED,
        chunks: int = DEFAULT_CHUNKS,
        column_degree: int = 3,
        max_iterations: int = 100,
    ):
        if chunks <= 0 or chunks & (chunks - 1):
            raise ParameterError(f"chunk count must be a power of two, got {chunks}")
        if n <= 0 or n % chunks:
            raise ParameterError(f"block length {n} must be a positive multiple of {chunks}")
        if not 1 <= column_degree <= n:
            raise ParameterError(f"column degree {column_degree} outside [1, {n}]")
        self.n = n
        self.seed = seed
        self.chunks = chunks
        self.chunk_size = n // chunks
        self.max_iterations = max_iterations
        self.H = self._build_matrix(n, seed, column_degree)
        width = chunks.bit_length() - 1
        groups = np.arange(self.chunk_size) * chunks
        self._chunk_indices = [groups + (chunks - 1 - _bit_reverse(j, width)) for j in range(chunks)]
        self._merged: dict[int, MergedChecks] = {}

    @staticmethod
    def _build_matrix(n: int, seed: int, column_degree: int) -> sparse.csr_matrix:
        rng = np.random.default_rng(seed)
        degrees = np.zeros(n)
        rows = np.empty(n * column_degree, dtype=np.int64)
        for column in range(n):
            keys = degrees + 0.5 * rng.random(n)
            chosen = np.argpartition(keys, column_degree - 1)[:column_degree]
            rows[column * column_degree:(column + 1) * column_degree] = chosen
            degrees[chosen] += 1
        cols = np.repeat(np.arange(n, dtype=np.int64), column_degree)
        data = np.ones(rows.size, dtype=np.int64)
        return sparse.csr_matrix((data, (rows, cols)), shape=(n, n))

    def chunk_indices(self, chunk: int) -> np.ndarray:
        if not 0 <= chunk < self.chunks:
            raise ParameterError(f"chunk {chunk} outside [0, {self.chunks})")
        return self._chunk_indices[chunk]

    def encode(self, bits: np.ndarray) -> np.ndarray:
        """Accumulated syndromes (n,) of one block."""
        bits = np.asarray(bits, dtype=np.int64).reshape(-1)
        if bits.size != self.n:
            raise ParameterError(f"block holds {bits.size} bits, code length is {self.n}")
        syndrome = np.asarray(self.H @ bits).reshape(-1) % 2
        return (np.cumsum(syndrome) % 2).astype(np.uint8)

    def chunk(self, accumulated: np.ndarray, chunk: int) -> np.ndarray:
        return np.asarray(accumulated, dtype=np.uint8)[self.chunk_indices(chunk)]

    def merged_checks(self, revealed: int) -> MergedChecks:
        """Merged parity checks available after the first `revealed` chunks."""
        cached = self._merged.get(revealed)
        if cached is not None:
            return cached
        known = np.sort(np.concatenate([self._chunk_indices[j] for j in range(revealed)]))
        syndrome_rows = np.arange(self.n)
        inside = syndrome_rows <= known[-1]
        segment = np.searchsorted(known, syndrome_rows[inside], side="left")
        selector = sparse.csr_matrix(
            (np.ones(segment.size, dtype=np.int64), (segment, syndrome_rows[inside])),
            shape=(known.size, self.n),
        )
        merged = (selector @ self.H).tocoo()
        keep = merged.data % 2 == 1
        checks = MergedChecks(rows=merged.row[keep].astype(np.int64), cols=merged.col[keep].astype(np.int64), count=known.size, known=known)
        self._merged[revealed] = checks
        return checks

    def start_chunks(self, llr: np.ndarray) -> int:
        """Initial request size estimated from the conditional entropy implied by `llr`."""
        minority = 1.0 / (1.0 + np.exp(np.clip(np.abs(llr), 0.0, LLR_CLIP)))
        estimate = float(np.mean(binary_entropy(minority)))
        return int(min(self.chunks, max(1, math.floor(self.chunks * estimate) - 2)))

    def decode(
        self,
        llr: np.ndarray,
        request: ChunkProvider,
        crc: int,
        start_chunks: int | None = None,
        max_chunks: int | None = None,
    ) -> tuple[np.ndarray, PlaneTranscript]:
        """Request chunks until BP satisfies every merged check and the CRC matches.

        After the last available chunk the BP hard decision is returned with
        `success=False`.
        """
        llr = np.asarray(llr, dtype=np.float64).reshape(-1)
        if llr.size != self.n:
            raise ParameterError(f"{llr.size} LLRs for code length {self.n}")
        limit = self.chunks if max_chunks is None else min(self.chunks, max_chunks)
        revealed = min(limit, start_chunks if start_chunks is not None else self.start_chunks(llr))
        revealed = max(revealed, min(1, limit))
        accumulated = np.zeros(self.n, dtype=np.int64)
        requests: list[int] = []
        for chunk in range(revealed):
            accumulated[self.chunk_indices(chunk)] = request(chunk)
        requests.append(revealed * self.chunk_size)
        total_iterations = 0
        while True:
            checks = self.merged_checks(revealed)
            values = accumulated[checks.known]
            previous = np.concatenate([[0], values[:-1]])
            syndrome = values ^ previous
            bits, iterations, satisfied = belief_propagation(
                checks.rows, checks.cols, checks.count, syndrome, llr, self.max_iterations
            )
            total_iterations += iterations
            if satisfied and crc8(bits) == crc:
                return bits, PlaneTranscript(
                    chunks_requested=revealed,
                    syndrome_bits=revealed * self.chunk_size,
                    success=True,
                    bp_iterations=total_iterations,
                    requests=requests,
                )
            if revealed >= limit:
                logger.debug(f"event=ldpca_failed chunks={revealed} satisfied={satisfied}")
                return bits, PlaneTranscript(
                    chunks_requested=revealed,
                    syndrome_bits=revealed * self.chunk_size,
                    success=False,
                    bp_iterations=total_iterations,
                    requests=requests,
                )
            accumulated[self.chunk_indices(revealed)] = request(revealed)
            revealed += 1
            requests.append(revealed * self.chunk_size)
            logger.debug(f"event=chunk_requested chunks={revealed} bits={revealed * self.chunk_size}")


@lru_cache(maxsize=4)
def default_code(n: int = DEFAULT_BLOCK, seed: int = DEFAULT_SEED) -> LdpcaCode:
    return LdpcaCode(n=n, seed=seed)


def ldpca_encode(bits: np.ndarray, code: LdpcaCode | None = None) -> np.ndarray:
    return (code or default_code()).encode(bits)


def ldpca_decode(
    llr: np.ndarray,
    request: ChunkProvider,
    crc: int,
    code: LdpcaCode | None = None,
) -> tuple[np.ndarray, PlaneTranscript]:
    return (code or default_code()).decode(llr, request, crc)
