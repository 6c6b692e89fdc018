"""Byte-oriented rANS with a 32-bit state and 16-bit frequency precision.

The encoder starts from state 0, so no bytes are spent until the state grows
into the normal [RANS_L, 256·RANS_L) range. Stream layout: the significant
bytes of the final state, most significant first, followed by the
renormalisation bytes in decoding order. The decoder loads the state with its
ordinary renormalisation loop and reads bytes only while the state is below
RANS_L and input remains, so the state length needs no header. An empty
symbol list produces an empty stream. Out-of-range values are sent as the
escape symbol followed by the raw 32-bit value as two uniform 16-bit symbols.
"""

from __future__ import annotations

from typing import Sequence

from ddvc.codec.bitstream.tables import PRECISION, TOTAL, CdfTable
from ddvc.codec.errors import BitstreamError, ChecksumError, InvariantViolation, ParameterError


RANS_L = 1 << 23
INITIAL_STATE = 0
_MASK = TOTAL - 1
_INT32_MIN = -(1 << 31)
_INT32_MAX = (1 << 31) - 1


class RansEncoder:
    """Collects (start, freq) pairs in decoding order and emits them LIFO on flush."""

    def __init__(self) -> None:
        self._ops: list[tuple[int, int]] = []

    def put(self, start: int, freq: int) -> None:
        if freq <= 0:
            raise InvariantViolation(f"cannot code a symbol with frequency {freq}")
        self._ops.append((start, freq))

    def put_raw32(self, value: int) -> None:
        raw = value & 0xFFFFFFFF
        self.put(raw >> 16, 1)
        self.put(raw & 0xFFFF, 1)

    def flush(self) -> bytes:
        state = INITIAL_STATE
        emitted = bytearray()
        for start, freq in reversed(self._ops):
            x_max = ((RANS_L >> PRECISION) << 8) * freq
            while state >= x_max:
                emitted.append(state & 0xFF)
                state >>= 8
            state = ((state // freq) << PRECISION) + (state % freq) + start
        emitted.reverse()
        # state < 256·RANS_L, so every proper prefix of these bytes reads below RANS_L.
        head = state.to_bytes((state.bit_length() + 7) // 8, "big")
        return head + bytes(emitted)


class RansDecoder:
    def __init__(self, data: bytes) -> None:
        self._data = data
        self._pos = 0
        self._state = self._refill(INITIAL_STATE)

    def _refill(self, state: int) -> int:
        while state < RANS_L and self._pos < len(self._data):
            state = (state << 8) | self._data[self._pos]
            self._pos += 1
        return state

    def peek(self) -> int:
        return self._state & _MASK

    def advance(self, start: int, freq: int) -> None:
        state = freq * (self._state >> PRECISION) + (self._state & _MASK) - start
        self._state = self._refill(state)

    def get_raw32(self) -> int:
        high = self.peek()
        self.advance(high, 1)
        low = self.peek()
        self.advance(low, 1)
        raw = (high << 16) | low
        return raw - (1 << 32) if raw & 0x80000000 else raw

    def finish(self) -> None:
        if self._state != INITIAL_STATE or self._pos != len(self._data):
            raise ChecksumError(
                f"rANS stream check failed (state={self._state:#x}, consumed {self._pos}/{len(self._data)} bytes)"
            )


def rans_encode(symbols: Sequence[int], contexts: Sequence[int], tables: CdfTable) -> bytes:
    """Encode integer symbols, each with the table context at the same position."""
    if len(symbols) != len(contexts):
        raise ParameterError(f"{len(symbols)} symbols but {len(contexts)} contexts")
    encoder = RansEncoder()
    for value, context in zip(symbols, contexts):
        value, context = int(value), int(context)
        index = tables.index_of(context, value)
        start, freq = tables.start_freq(context, index)
        encoder.put(start, freq)
        if index == tables.escape_index(context):
            if not _INT32_MIN <= value <= _INT32_MAX:
                raise ParameterError(f"escaped value {value} does not fit in 32 bits")
            encoder.put_raw32(value)
    return encoder.flush()


def rans_decode(
    data: bytes,
    contexts: Sequence[int],
    tables: CdfTable,
    n: int | None = None,
    table_version: int | None = None,
) -> list[int]:
    """Decode `n` symbols (default: one per context) and verify the stream was consumed exactly.

    Raises:
        BitstreamError: `table_version` does not match `tables` (checked before reading).
        ChecksumError: The stream is corrupted.
    """
    if table_version is not None and table_version != tables.version:
        raise BitstreamError(
            f"table version mismatch: stream expects {table_version}, tables are {tables.version}"
        )
    count = len(contexts) if n is None else n
    if count > len(contexts):
        raise ParameterError(f"{count} symbols requested with {len(contexts)} contexts")
    decoder = RansDecoder(data)
    symbols: list[int] = []
    for position in range(count):
        context = int(contexts[position])
        index = tables.lookup(context, decoder.peek())
        start, freq = tables.start_freq(context, index)
        decoder.advance(start, freq)
        if index == tables.escape_index(context):
            symbols.append(decoder.get_raw32())
        else:
            symbols.append(index - tables.q_max[context])
    decoder.finish()
    return symbols
