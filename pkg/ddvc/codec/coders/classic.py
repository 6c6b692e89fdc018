"""Classic Wyner-Ziv codec: DCT bands, bit planes, LDPCA syndromes and a simulated feedback channel.

Key frames reuse the deep intra codec. For every WZ frame the encoder runs
the decoder's side of the feedback loop in-process (SI generation, soft
inputs, belief propagation) and stores exactly the syndrome chunks the
decoder asked for, so decoding replays the same session without feedback.

WZ frame streams:
    meta: qi u8 | mode u8 | 16 × f32 band alphas | 3 × 15 × f32 AC radii
    one stream per (colour plane, coded band), holding for each bit plane
    (MSB first) and block: crc8 u8 | chunk count u8 | packed syndrome bits
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np
import torch
from pydantic import BaseModel, Field

from ddvc.codec.bitstream.container import ContainerHeader, pack_container, parse_container
from ddvc.codec.classic.correlation import laplacian_fit, plane_llr, reconstruct_bands
from ddvc.codec.classic.dct import BAND_COUNT, dct4
from ddvc.codec.classic.ldpca import LLR_CLIP, LdpcaCode, PlaneTranscript, crc8, default_code
from ddvc.codec.classic.quantizer import QuantizedBands, band_ranges, plane_count, qi_levels, quantize_bands, to_bit_planes
from ddvc.codec.coders.base import SequenceCodec
from ddvc.codec.coders.deep import DeepCodec, StageFactory, _no_stage, padded_size
from ddvc.codec.errors import BitstreamError, ParameterError
from ddvc.codec.interpolation import gop_schedule
from ddvc.codec.model import DistributedVideoCodec
from ddvc.codec.types import CodecId, EncodedFrame, Frame, FrameRole, ScheduleEntry, VideoSequence
from ddvc.codec.utils.logging import get_logger
from ddvc.codec.video_io import pad_to_multiple, split_gops


logger = get_logger("ddvc")

DEFAULT_ALPHA = 20.0
MODES = ("clamp", "centroid")
_META = struct.Struct(f">BB{BAND_COUNT}f{3 * (BAND_COUNT - 1)}f")
_BLOCK_HEADER = struct.Struct(">BB")


class FeedbackTranscript(BaseModel):
    """All feedback exchanges of one encode run."""
    blocks: list[PlaneTranscript] = Field(default_factory=list)
    total_chunks: int = 0
    total_syndrome_bits: int = 0
    failures: int = 0

    def add(self, transcript: PlaneTranscript) -> None:
        self.blocks.append(transcript)
        self.total_chunks += transcript.chunks_requested
        self.total_syndrome_bits += transcript.syndrome_bits
        self.failures += int(not transcript.success)


@dataclass
class ClassicDecodeTrace:
    frames: list[Frame]
    si_frames: dict[int, Frame] = field(default_factory=dict)


@dataclass
class FrameMeta:
    qi: int
    mode: str
    alphas: np.ndarray
    radii: np.ndarray

    def pack(self) -> bytes:
        return _META.pack(self.qi, MODES.index(self.mode), *self.alphas.tolist(), *self.radii.reshape(-1).tolist())

    @classmethod
    def unpack(cls, data: bytes, frame: int) -> FrameMeta:
        if len(data) != _META.size:
            raise BitstreamError(f"frame {frame}: meta stream has {len(data)} bytes, expected {_META.size}", frame=frame)
        values = _META.unpack(data)
        qi, mode = values[0], values[1]
        if mode >= len(MODES):
            raise BitstreamError(f"frame {frame}: unknown reconstruction mode {mode}", frame=frame)
        alphas = np.asarray(values[2:2 + BAND_COUNT], dtype=np.float64)
        radii = np.asarray(values[2 + BAND_COUNT:], dtype=np.float64).reshape(3, BAND_COUNT - 1)
        return cls(qi=qi, mode=MODES[mode], alphas=alphas, radii=radii)

    def quantizer(self, color: int) -> QuantizedBands:
        levels = qi_levels(self.qi)
        low = np.concatenate([[0.0], -self.radii[color]])
        high = np.concatenate([[4.0], self.radii[color]])
        return QuantizedBands(symbols=[None] * BAND_COUNT, levels=levels, low=low, high=high)


class _Channel(Protocol):
    def block(self, llr: np.ndarray, length: int, label: dict[str, int]) -> np.ndarray: ...


class _EncoderChannel:
    """Feedback simulation with the true bits; records the requested chunks."""

    def __init__(self, code: LdpcaCode, planes: np.ndarray, transcript: FeedbackTranscript):
        self.code = code
        self.planes = planes
        self.transcript = transcript
        self.stream = bytearray()

    def block(self, llr: np.ndarray, length: int, label: dict[str, int]) -> np.ndarray:
        start = label["block"] * self.code.n
        bits = np.zeros(self.code.n, dtype=np.uint8)
        bits[:length] = self.planes[label["bitplane"], start:start + length]
        accumulated = self.code.encode(bits)
        crc = crc8(bits)
        decoded, record = self.code.decode(llr, lambda chunk: self.code.chunk(accumulated, chunk), crc)
        revealed = [self.code.chunk(accumulated, j) for j in range(record.chunks_requested)]
        self.stream += _BLOCK_HEADER.pack(crc, record.chunks_requested)
        self.stream += np.packbits(np.concatenate(revealed)).tobytes() if revealed else b""
        self.transcript.add(record.model_copy(update=label))
        return decoded


class _DecoderChannel:
    """Replays the chunks stored by the encoder."""

    def __init__(self, code: LdpcaCode, data: bytes, frame: int):
        self.code = code
        self.data = data
        self.offset = 0
        self.frame = frame

    def block(self, llr: np.ndarray, length: int, label: dict[str, int]) -> np.ndarray:
        if self.offset + _BLOCK_HEADER.size > len(self.data):
            raise BitstreamError(f"frame {self.frame}: syndrome stream truncated", frame=self.frame)
        crc, chunks = _BLOCK_HEADER.unpack_from(self.data, self.offset)
        self.offset += _BLOCK_HEADER.size
        size = (chunks * self.code.chunk_size + 7) // 8
        if self.offset + size > len(self.data) or chunks > self.code.chunks:
            raise BitstreamError(f"frame {self.frame}: syndrome stream truncated", frame=self.frame)
        packed = np.frombuffer(self.data, dtype=np.uint8, count=size, offset=self.offset)
        self.offset += size
        values = np.unpackbits(packed)[: chunks * self.code.chunk_size].reshape(max(chunks, 0), self.code.chunk_size)
        decoded, _ = self.code.decode(llr, lambda chunk: values[chunk], crc, max_chunks=chunks)
        return decoded

    def finish(self) -> None:
        if self.offset != len(self.data):
            raise BitstreamError(f"frame {self.frame}: {len(self.data) - self.offset} unused syndrome bytes", frame=self.frame)


def _decode_band(
    code: LdpcaCode,
    channel: _Channel,
    si_band: np.ndarray,
    alpha: float,
    level: int,
    low: float,
    high: float,
    label: dict[str, int],
) -> np.ndarray:
    """Decode the symbols of one band plane by plane; returns them shaped like `si_band`."""
    planes = plane_count(level)
    si_values = si_band.reshape(-1)
    count = si_values.size
    prefix = np.zeros(count, dtype=np.int64)
    for bitplane in range(planes):
        llr = plane_llr(si_values, alpha, prefix, bitplane, planes, low, high, level)
        decoded = np.empty(count, dtype=np.int64)
        for block, start in enumerate(range(0, count, code.n)):
            length = min(code.n, count - start)
            block_llr = np.full(code.n, LLR_CLIP)
            block_llr[:length] = llr[start:start + length]
            bits = channel.block(block_llr, length, {**label, "bitplane": bitplane, "block": block})
            decoded[start:start + length] = bits[:length]
        prefix = (prefix << 1) | decoded
    return prefix.reshape(si_band.shape)


def _to_planes(tensor: torch.Tensor, size: tuple[int, int]) -> np.ndarray:
    return tensor[0, :, : size[0], : size[1]].detach().cpu().numpy().astype(np.float64)


def _to_padded(planes: np.ndarray) -> torch.Tensor:
    tensor = torch.from_numpy(np.clip(planes, 0.0, 1.0)).float().unsqueeze(0)
    return pad_to_multiple(tensor)[0]


class ClassicCodec(SequenceCodec):
    """Wyner-Ziv codec with DCT bands and LDPCA syndromes; keys and SI come from a deep model."""

    codec_id = CodecId.CLASSIC

    def __init__(
        self,
        model: DistributedVideoCodec,
        qi: int = 4,
        alphas: np.ndarray | None = None,
        reconstruction: str = "clamp",
        code: LdpcaCode | None = None,
        stage: StageFactory | None = None,
    ):
        if reconstruction not in MODES:
            raise ParameterError(f"reconstruction must be one of {MODES}, got {reconstruction!r}")
        self.model = model.eval()
        self.deep = DeepCodec(model, stage)
        self.stage = stage or _no_stage
        self.qi = qi
        self.levels = qi_levels(qi)
        self.alphas = np.full(BAND_COUNT, DEFAULT_ALPHA) if alphas is None else np.asarray(alphas, dtype=np.float64)
        if self.alphas.shape != (BAND_COUNT,) or bool((self.alphas <= 0).any()):
            raise ParameterError(f"need {BAND_COUNT} positive band alphas")
        # The decoder only sees the float32 copies in the meta stream.
        self.stored_alphas = self.alphas.astype(np.float32).astype(np.float64)
        self.reconstruction = reconstruction
        self.code = code or default_code()
        self.transcript = FeedbackTranscript()
        coded = [band for band in range(BAND_COUNT) if self.levels[band] > 0]
        self.stream_names = ["meta"] + [f"c{color}_band{band}" for color in range(3) for band in coded]

    def _coding_size(self, height: int, width: int) -> tuple[int, int]:
        return (height + 3) // 4 * 4, (width + 3) // 4 * 4

    def _code_wz(
        self,
        entry: ScheduleEntry,
        si_frame: torch.Tensor,
        size: tuple[int, int],
        meta: FrameMeta,
        channels: list[_Channel],
    ) -> np.ndarray:
        """Run the WZ decoding procedure for one frame; returns 3×H×W reconstructed planes."""
        si_planes = _to_planes(si_frame, size)
        levels = qi_levels(meta.qi)
        reconstructed = np.empty_like(si_planes)
        channel_iter = iter(channels)
        for color in range(3):
            si_bands = dct4(si_planes[color])
            quantizer = meta.quantizer(color)
            decoded: list[np.ndarray | None] = [None] * BAND_COUNT
            for band in range(BAND_COUNT):
                level = int(levels[band])
                if level == 0:
                    continue
                channel = next(channel_iter)
                with self.stage("sw_decoding"):
                    decoded[band] = _decode_band(
                        self.code,
                        channel,
                        si_bands[band],
                        float(meta.alphas[band]),
                        level,
                        float(quantizer.low[band]),
                        float(quantizer.high[band]),
                        {"frame": entry.target, "color": color, "band": band},
                    )
            bands = reconstruct_bands(decoded, si_bands, quantizer, meta.alphas, meta.mode)
            reconstructed[color] = dct4(bands, inverse=True)
        return np.clip(reconstructed, 0.0, 1.0)

    def encode_sequence(self, sequence: VideoSequence, gop: int, path: str | Path | None = None) -> bytes:
        self.transcript = FeedbackTranscript()
        keys = sorted({view.key_index for view in split_gops(sequence, gop)})
        size = self._coding_size(sequence.height, sequence.width)
        encoded: dict[int, EncodedFrame] = {}
        decoded: dict[int, torch.Tensor] = {}

        for index in keys:
            frame = sequence.frame(index)
            x, _ = pad_to_multiple(frame.to_tensor())
            with torch.no_grad():
                with self.stage("analysis"):
                    y = self.model.intra_encode(x)
                with self.stage("entropy_coding"):
                    streams, y_hat = self.deep.intra_coder.encode(y)
                with self.stage("synthesis"):
                    decoded[index] = self.model.intra_decode(y_hat)
            encoded[index] = EncodedFrame(index=index, role=FrameRole.KEY, streams=streams)

        for key0, key1 in zip(keys, keys[1:]):
            for entry in gop_schedule(key0, key1):
                original = _to_planes(pad_to_multiple(sequence.frame(entry.target).to_tensor())[0], size)
                radii = np.empty((3, BAND_COUNT - 1))
                band_planes = []
                for color in range(3):
                    bands = dct4(original[color])
                    quantized = quantize_bands(bands, self.levels)
                    _, high = band_ranges(bands)
                    radii[color] = high[1:]
                    band_planes.extend(
                        to_bit_planes(quantized.symbols[band], int(self.levels[band]))
                        for band in range(BAND_COUNT)
                        if self.levels[band] > 0
                    )
                meta = FrameMeta(qi=self.qi, mode=self.reconstruction, alphas=self.stored_alphas, radii=radii)
                channels = [_EncoderChannel(self.code, planes, self.transcript) for planes in band_planes]
                with torch.no_grad(), self.stage("side_information"):
                    side = self.model.interpolator.for_entry(decoded, entry)
                planes = self._code_wz(entry, side.frame, size, meta, channels)
                decoded[entry.target] = _to_padded(planes)
                encoded[entry.target] = EncodedFrame(
                    index=entry.target,
                    role=FrameRole.WZ,
                    streams=[meta.pack()] + [bytes(channel.stream) for channel in channels],
                )
                logger.debug(f"frame={entry.target} role=wz event=encoded bytes={encoded[entry.target].payload_bytes}")

        frames = [encoded[index] for index in sorted(encoded)]
        header = ContainerHeader(
            codec=self.codec_id,
            width=sequence.width,
            height=sequence.height,
            gop=gop,
            frame_count=len(frames),
            lambda_id=self.model.config.lambda_id,
            table_version=self.deep.table_version,
        )
        data = pack_container(frames, header, path)
        pixels = max(1, sequence.width * sequence.height * len(frames))
        logger.info(
            f"codec=classic event=sequence_encoded frames={len(frames)} qi={self.qi} "
            f"bpp={8 * sum(f.payload_bytes for f in frames) / pixels:.4f} failures={self.transcript.failures}"
        )
        return data

    def decode_sequence(self, data: bytes | str | Path) -> list[Frame]:
        return self.decode_trace(data).frames

    def decode_trace(self, data: bytes | str | Path) -> ClassicDecodeTrace:
        container = parse_container(data)
        header = container.header
        if header.codec is not self.codec_id:
            raise BitstreamError(f"container holds a {header.codec.value} stream, not classic")
        if header.table_version != self.deep.table_version:
            raise BitstreamError(
                f"table version mismatch: stream expects {header.table_version}, model tables are {self.deep.table_version}"
            )
        output_size = (header.height, header.width)
        size = self._coding_size(*output_size)
        padded = padded_size(*output_size)
        latent_size = (padded[0] // 16, padded[1] // 16)
        by_index = {frame.index: frame for frame in container.frames}
        decoded: dict[int, torch.Tensor] = {}
        trace = ClassicDecodeTrace(frames=[])

        keys = sorted(index for index, frame in by_index.items() if frame.role is FrameRole.KEY)
        with torch.no_grad():
            for index in keys:
                with self.stage("entropy_decoding"):
                    y_hat = self.deep.intra_coder.decode(by_index[index].streams, latent_size, frame=index)
                with self.stage("synthesis"):
                    decoded[index] = self.model.intra_decode(y_hat)

        for key0, key1 in zip(keys, keys[1:]):
            for entry in gop_schedule(key0, key1):
                encoded = by_index.get(entry.target)
                if encoded is None or encoded.role is not FrameRole.WZ:
                    continue
                if not encoded.streams:
                    raise BitstreamError(f"frame {entry.target}: missing meta stream", frame=entry.target)
                meta = FrameMeta.unpack(encoded.streams[0], entry.target)
                channels = [_DecoderChannel(self.code, stream, entry.target) for stream in encoded.streams[1:]]
                coded = int((qi_levels(meta.qi) > 0).sum()) * 3
                if len(channels) != coded:
                    raise BitstreamError(
                        f"frame {entry.target}: {len(channels)} syndrome streams, expected {coded}", frame=entry.target
                    )
                with torch.no_grad(), self.stage("side_information"):
                    side = self.model.interpolator.for_entry(decoded, entry)
                planes = self._code_wz(entry, side.frame, size, meta, channels)
                for channel in channels:
                    channel.finish()
                decoded[entry.target] = _to_padded(planes)
                trace.si_frames[entry.target] = Frame.from_tensor(
                    side.frame[..., : output_size[0], : output_size[1]], index=entry.target
                )

        missing = sorted(set(by_index) - set(decoded))
        if missing:
            raise BitstreamError(f"frames {missing} are not reachable from any key frame pair", frame=missing[0])
        trace.frames = [
            Frame.from_tensor(decoded[index][..., : output_size[0], : output_size[1]], index=index)
            for index in sorted(decoded)
        ]
        logger.info(f"codec=classic event=sequence_decoded frames={len(trace.frames)}")
        return trace


def calibrate_alphas(model: DistributedVideoCodec, sequence: VideoSequence, gop: int) -> np.ndarray:
    """Offline per-band α from residuals between original WZ bands and SI built from original references."""
    model.eval()
    keys = sorted({view.key_index for view in split_gops(sequence, gop)})
    references = {index: pad_to_multiple(frame.to_tensor())[0] for index, frame in enumerate(sequence.frames, start=1)}
    residuals: list[list[np.ndarray]] = [[] for _ in range(BAND_COUNT)]
    size = ((sequence.height + 3) // 4 * 4, (sequence.width + 3) // 4 * 4)
    with torch.no_grad():
        for key0, key1 in zip(keys, keys[1:]):
            for entry in gop_schedule(key0, key1):
                side = model.interpolator.for_entry(references, entry)
                si = _to_planes(side.frame, size)
                original = _to_planes(references[entry.target], size)
                for color in range(3):
                    difference = dct4(original[color]) - dct4(si[color])
                    for band in range(BAND_COUNT):
                        residuals[band].append(difference[band].reshape(-1))
    if not residuals[0]:
        return np.full(BAND_COUNT, DEFAULT_ALPHA)
    alphas = np.array([laplacian_fit(np.concatenate(values)).alpha for values in residuals])
    logger.info(f"event=alphas_calibrated dc={alphas[0]:.3f} mean={alphas.mean():.3f}")
    return alphas
