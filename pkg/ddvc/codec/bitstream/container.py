"""The `.ddvc` container: fixed header followed by one record per frame.

Header (big-endian, 16 bytes):
    magic "DDVC" | version u8 | codec_id u8 | width u16 | height u16 |
    gop u8 | frame_count u32 | lambda_id u8 | table_version u8
Frame record:
    role u8 | stream_count u16 | stream lengths u32 × count | crc32 u32 | payloads
The CRC covers the concatenated payloads of the frame.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

from pydantic import BaseModel, Field

from ddvc.codec.errors import BitstreamError, ChecksumError
from ddvc.codec.types import CodecId, EncodedFrame, FrameRole
from ddvc.codec.utils.logging import get_logger


logger = get_logger("ddvc")

MAGIC = b"DDVC"
FORMAT_VERSION = 1
_HEADER = struct.Struct(">4sBBHHBIBB")
_RECORD = struct.Struct(">BH")
_U32 = struct.Struct(">I")


class ContainerHeader(BaseModel):
    version: int = Field(default=FORMAT_VERSION, ge=0, le=255)
    codec: CodecId
    width: int = Field(..., ge=1, le=65535)
    height: int = Field(..., ge=1, le=65535)
    gop: int = Field(..., ge=2, le=255)
    frame_count: int = Field(..., ge=0, le=0xFFFFFFFF)
    lambda_id: int = Field(default=0, ge=0, le=255)
    table_version: int = Field(default=0, ge=0, le=255)


@dataclass
class Container:
    header: ContainerHeader
    frames: list[EncodedFrame] = field(default_factory=list)


def pack_container(frames: list[EncodedFrame], header: ContainerHeader, path: str | Path | None = None) -> bytes:
    """Serialize header and frames; also write them to `path` when given."""
    if header.frame_count != len(frames):
        raise BitstreamError(f"header announces {header.frame_count} frames, got {len(frames)}")
    out = bytearray(
        _HEADER.pack(
            MAGIC,
            header.version,
            header.codec.code,
            header.width,
            header.height,
            header.gop,
            header.frame_count,
            header.lambda_id,
            header.table_version,
        )
    )
    for frame in frames:
        if len(frame.streams) > 0xFFFF:
            raise BitstreamError(f"frame {frame.index}: too many sub-streams ({len(frame.streams)})", frame=frame.index)
        out += _RECORD.pack(frame.role.code, len(frame.streams))
        for stream in frame.streams:
            out += _U32.pack(len(stream))
        payload = b"".join(frame.streams)
        out += _U32.pack(zlib.crc32(payload))
        out += payload
    data = bytes(out)
    if path is not None:
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(data)
        logger.info(f"container={target} event=written bytes={len(data)} frames={len(frames)}")
    return data


def _take(data: bytes, offset: int, size: int, frame: int, what: str) -> bytes:
    if offset + size > len(data):
        raise BitstreamError(
            f"frame {frame}: truncated while reading {what} (need {size} bytes at offset {offset}, "
            f"file has {len(data)})",
            frame=frame,
        )
    return data[offset:offset + size]


def parse_container(source: bytes | str | Path) -> Container:
    """Parse and validate a container from bytes or a file path.

    Raises:
        BitstreamError: Bad magic/version, truncation (naming the frame) or length overflow.
        ChecksumError: A frame payload does not match its CRC.
    """
    if isinstance(source, (str, Path)):
        try:
            data = Path(source).read_bytes()
        except OSError as exc:
            raise BitstreamError(f"cannot read container {source}: {exc}") from exc
    else:
        data = bytes(source)
    if len(data) < _HEADER.size:
        raise BitstreamError(f"truncated header: {len(data)} of {_HEADER.size} bytes")
    magic, version, codec_code, width, height, gop, frame_count, lambda_id, table_version = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BitstreamError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise BitstreamError(f"unsupported container version {version}")
    try:
        codec = CodecId.from_code(codec_code)
    except ValueError as exc:
        raise BitstreamError(str(exc)) from exc
    header = ContainerHeader(
        version=version,
        codec=codec,
        width=width,
        height=height,
        gop=gop,
        frame_count=frame_count,
        lambda_id=lambda_id,
        table_version=table_version,
    )

    offset = _HEADER.size
    frames: list[EncodedFrame] = []
    for position in range(frame_count):
        index = position + 1
        role_code, count = _RECORD.unpack(_take(data, offset, _RECORD.size, index, "record header"))
        offset += _RECORD.size
        try:
            role = FrameRole.from_code(role_code)
        except ValueError as exc:
            raise BitstreamError(f"frame {index}: {exc}", frame=index) from exc
        lengths_raw = _take(data, offset, 4 * count, index, "stream lengths")
        lengths = list(struct.unpack(f">{count}I", lengths_raw))
        offset += 4 * count
        (crc,) = _U32.unpack(_take(data, offset, 4, index, "checksum"))
        offset += 4
        declared = sum(lengths)
        remaining = len(data) - offset
        if declared > remaining:
            raise BitstreamError(
                f"frame {index}: declared payload of {declared} bytes exceeds the {remaining} bytes left "
                "(truncated file or length overflow)",
                frame=index,
            )
        payload = data[offset:offset + declared]
        offset += declared
        if zlib.crc32(payload) != crc:
            raise ChecksumError(f"frame {index}: payload checksum mismatch", frame=index)
        streams, cursor = [], 0
        for length in lengths:
            streams.append(payload[cursor:cursor + length])
            cursor += length
        frames.append(EncodedFrame(index=index, role=role, streams=streams))

    if offset != len(data):
        raise BitstreamError(f"{len(data) - offset} trailing bytes after frame {frame_count}")
    return Container(header=header, frames=frames)


class FrameBits(BaseModel):
    index: int
    role: FrameRole
    stream_bits: list[int]
    total_bits: int
    bpp: float


class BitAccounting(BaseModel):
    """Per-frame and per-stream bit usage of a container."""
    width: int
    height: int
    frame_count: int
    header_bits: int
    payload_bits: int
    total_bits: int
    bpp: float
    stream_bpp: dict[str, float]
    frames: list[FrameBits]


def record_overhead_bits(frame: EncodedFrame) -> int:
    return 8 * (_RECORD.size + 4 * len(frame.streams) + 4)


def bit_accounting(container: Container, stream_names: list[str] | None = None) -> BitAccounting:
    """Payload bits per stream and frame; bpp = payload bits / (W·H·frames)."""
    header = container.header
    pixels = header.width * header.height
    frame_count = max(len(container.frames), 1)
    per_stream: dict[str, int] = {}
    frames = []
    header_bits = 8 * _HEADER.size
    for frame in container.frames:
        bits = [8 * len(stream) for stream in frame.streams]
        for slot, value in enumerate(bits):
            name = stream_names[slot] if stream_names and slot < len(stream_names) else f"stream{slot}"
            per_stream[name] = per_stream.get(name, 0) + value
        header_bits += record_overhead_bits(frame)
        frames.append(
            FrameBits(index=frame.index, role=frame.role, stream_bits=bits, total_bits=sum(bits), bpp=sum(bits) / pixels)
        )
    payload_bits = sum(f.total_bits for f in frames)
    return BitAccounting(
        width=header.width,
        height=header.height,
        frame_count=len(container.frames),
        header_bits=header_bits,
        payload_bits=payload_bits,
        total_bits=payload_bits + header_bits,
        bpp=payload_bits / (pixels * frame_count),
        stream_bpp={name: bits / (pixels * frame_count) for name, bits in per_stream.items()},
        frames=frames,
    )
