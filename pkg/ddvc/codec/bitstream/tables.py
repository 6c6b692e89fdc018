"""Quantized CDF tables for the rANS coder.

Every context covers the alphabet [-q_max, q_max] plus one escape symbol;
frequencies are integers >= 1 summing to 2^16.
"""

from __future__ import annotations

import bisect
import math
import zlib
from typing import Sequence

import numpy as np
import torch
from scipy.special import ndtr, ndtri

from ddvc.codec.errors import InvariantViolation, ParameterError


PRECISION = 16
TOTAL = 1 << PRECISION
TAIL_MASS = 1e-6


def pmf_to_freqs(pmf: np.ndarray) -> np.ndarray:
    """Quantize a pmf (escape last) to integer frequencies >= 1 with total 2^16."""
    pmf = np.asarray(pmf, dtype=np.float64)
    count = pmf.size
    if count == 0 or count > TOTAL:
        raise ParameterError(f"alphabet size {count} outside [1, {TOTAL}]")
    pmf = np.clip(pmf, 0.0, None)
    mass = pmf.sum()
    if not np.isfinite(mass) or mass <= 0:
        pmf = np.full(count, 1.0 / count)
        mass = 1.0
    freqs = np.floor(pmf / mass * (TOTAL - count)).astype(np.int64) + 1
    freqs[int(np.argmax(pmf))] += TOTAL - int(freqs.sum())
    return freqs


class CdfTable:
    """A set of per-context frequency tables.

    Context c holds `2 * q_max[c] + 2` frequencies: symbols -q_max..q_max in
    order followed by the escape symbol.
    """

    def __init__(self, freqs: Sequence[np.ndarray], q_max: Sequence[int]):
        if len(freqs) != len(q_max):
            raise ParameterError("one q_max per context is required")
        self.freqs = [np.asarray(f, dtype=np.int64) for f in freqs]
        self.q_max = [int(q) for q in q_max]
        self.cumulative: list[list[int]] = []
        for context, (table, q) in enumerate(zip(self.freqs, self.q_max)):
            if table.size != 2 * q + 2:
                raise InvariantViolation(f"context {context}: {table.size} frequencies for q_max={q}")
            if int(table.min()) < 1:
                raise InvariantViolation(f"context {context}: every symbol needs frequency >= 1")
            if int(table.sum()) != TOTAL:
                raise InvariantViolation(f"context {context}: frequencies sum to {int(table.sum())}, expected {TOTAL}")
            self.cumulative.append([0, *np.cumsum(table).tolist()])
        self._freq_lists = [table.tolist() for table in self.freqs]

    def __len__(self) -> int:
        return len(self.freqs)

    @property
    def version(self) -> int:
        """One-byte digest of all frequencies; guards encoder/decoder table mismatches."""
        digest = 0
        for table in self.freqs:
            digest = zlib.crc32(table.astype("<u4").tobytes(), digest)
        return digest & 0xFF

    def escape_index(self, context: int) -> int:
        return 2 * self.q_max[context] + 1

    def index_of(self, context: int, value: int) -> int:
        """Table index of `value`, or the escape index when it is out of range."""
        q = self.q_max[context]
        if -q <= value <= q:
            return value + q
        return 2 * q + 1

    def start_freq(self, context: int, index: int) -> tuple[int, int]:
        return self.cumulative[context][index], self._freq_lists[context][index]

    def lookup(self, context: int, slot: int) -> int:
        """Symbol index whose cumulative interval contains `slot`."""
        return bisect.bisect_right(self.cumulative[context], slot) - 1

    @classmethod
    def from_pmfs(cls, pmfs: Sequence[np.ndarray], q_max: Sequence[int]) -> CdfTable:
        return cls([pmf_to_freqs(pmf) for pmf in pmfs], q_max)

    @classmethod
    def uniform(cls, size: int) -> CdfTable:
        """Single context, symbols 0..size-1 equiprobable (q_max chosen to cover them)."""
        q = size - 1
        pmf = np.zeros(2 * q + 2)
        pmf[q:q + size] = 1.0
        return cls.from_pmfs([pmf], [q])


def gaussian_tables(scale_table: torch.Tensor | Sequence[float], tail_mass: float = TAIL_MASS) -> CdfTable:
    """One context per scale: zero-mean Gaussian bins over [-q_max, q_max] + escape."""
    scales = np.asarray(scale_table, dtype=np.float64)
    z = float(ndtri(1.0 - tail_mass / 2.0))
    pmfs, q_max = [], []
    for sigma in scales:
        q = max(1, int(math.ceil(sigma * z)))
        values = np.arange(-q, q + 1, dtype=np.float64)
        magnitude = np.abs(values)
        pmf = ndtr((0.5 - magnitude) / sigma) - ndtr((-0.5 - magnitude) / sigma)
        escape = 2.0 * ndtr(-(q + 0.5) / sigma)
        pmfs.append(np.append(pmf, escape))
        q_max.append(q)
    return CdfTable.from_pmfs(pmfs, q_max)


@torch.no_grad()
def factorized_tables(prior, channels: int, tail_mass: float = TAIL_MASS, search_range: int = 256) -> CdfTable:
    """One context per channel of a factorized prior, support trimmed to the tail mass."""
    grid = torch.arange(-search_range, search_range + 1, dtype=torch.float32)
    samples = grid.view(-1, 1, 1, 1).expand(-1, channels, 1, 1).contiguous()
    likelihood = prior.likelihood(samples).view(-1, channels).double().numpy()
    pmfs, q_max = [], []
    for channel in range(channels):
        pmf = np.clip(likelihood[:, channel], 0.0, None)
        q = 1
        while q < search_range:
            inside = pmf[search_range - q:search_range + q + 1].sum()
            if 1.0 - inside < tail_mass:
                break
            q += 1
        inside_pmf = pmf[search_range - q:search_range + q + 1]
        escape = max(1.0 - float(inside_pmf.sum()), 0.0)
        pmfs.append(np.append(inside_pmf, escape))
        q_max.append(q)
    return CdfTable.from_pmfs(pmfs, q_max)
