"""Deep distributed codec: rANS-coded latents, decoder-side SI.

Every frame carries 1 + S sub-streams: the hyper latent ẑ (one context per
channel) followed by one stream per channel slice of y, each symbol coded
with the scale-table context of its σ.
"""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, ContextManager

import torch

from ddvc.codec.bitstream.container import ContainerHeader, pack_container, parse_container
from ddvc.codec.bitstream.rans import rans_decode, rans_encode
from ddvc.codec.bitstream.tables import CdfTable
from ddvc.codec.coders.base import SequenceCodec
from ddvc.codec.entropy import ConditionalEntropyModel, SliceState, scale_indexes
from ddvc.codec.errors import BitstreamError
from ddvc.codec.interpolation import SideInformation, gop_schedule
from ddvc.codec.model import DistributedVideoCodec
from ddvc.codec.types import CodecId, EncodedFrame, Frame, FrameRole, VideoSequence
from ddvc.codec.utils.logging import get_logger
from ddvc.codec.video_io import PAD_MULTIPLE, pad_to_multiple, split_gops


logger = get_logger("ddvc")

StageFactory = Callable[[str], ContextManager]


def _no_stage(_name: str) -> ContextManager:
    return contextlib.nullcontext()


def padded_size(height: int, width: int, multiple: int = PAD_MULTIPLE) -> tuple[int, int]:
    return math.ceil(height / multiple) * multiple, math.ceil(width / multiple) * multiple


@dataclass
class DecodeTrace:
    """Decoded frames plus the decoder-side intermediates of every WZ frame."""
    frames: list[Frame]
    side_info: dict[int, SideInformation] = field(default_factory=dict)
    wz_latents: dict[int, torch.Tensor] = field(default_factory=dict)
    si_latents: dict[int, torch.Tensor] = field(default_factory=dict)


class LatentCoder:
    """Codes one latent y with an entropy model and its hyper table."""

    def __init__(self, entropy: ConditionalEntropyModel, hyper_table: CdfTable, gaussian_table: CdfTable, scale_table: torch.Tensor):
        self.entropy = entropy
        self.hyper_table = hyper_table
        self.gaussian_table = gaussian_table
        self.scale_table = scale_table

    def _hyper_contexts(self, channels: int, spatial: int) -> list[int]:
        return torch.arange(channels).repeat_interleave(spatial).tolist()

    @torch.no_grad()
    def encode(self, y: torch.Tensor) -> tuple[list[bytes], torch.Tensor]:
        """Return the 1 + S streams of y and the ŷ the decoder will reproduce."""
        entropy = self.entropy
        z_hat = torch.round(entropy.hyper_encode(y))
        channels, hz, wz = z_hat.shape[1:]
        streams = [
            rans_encode(
                z_hat[0].flatten().to(torch.int64).tolist(),
                self._hyper_contexts(channels, hz * wz),
                self.hyper_table,
            )
        ]
        features = entropy.hyper_decode(z_hat)
        decoded: list[torch.Tensor] = []
        for index, y_slice in enumerate(y.chunk(entropy.char.s_slices, dim=1)):
            state = SliceState(index=index, decoded_slices=list(decoded), hyper_features=features)
            params = entropy.char.slice_params(state)
            symbols = torch.round(y_slice - params.mu)
            contexts = scale_indexes(params.sigma, self.scale_table)
            streams.append(
                rans_encode(symbols.flatten().to(torch.int64).tolist(), contexts.flatten().tolist(), self.gaussian_table)
            )
            decoded.append(entropy.char.lrp_apply(state, params.mu, symbols + params.mu))
        return streams, torch.cat(decoded, dim=1)

    @torch.no_grad()
    def decode(self, streams: list[bytes], latent_size: tuple[int, int], frame: int | None = None) -> torch.Tensor:
        entropy = self.entropy
        expected = 1 + entropy.char.s_slices
        if len(streams) != expected:
            raise BitstreamError(f"frame {frame}: expected {expected} sub-streams, found {len(streams)}", frame=frame)
        height, width = latent_size
        hz, wz = height // 4, width // 4
        channels = entropy.n_filters
        z_symbols = rans_decode(streams[0], self._hyper_contexts(channels, hz * wz), self.hyper_table)
        z_hat = torch.tensor(z_symbols, dtype=torch.float32).view(1, channels, hz, wz)
        features = entropy.hyper_decode(z_hat)
        decoded: list[torch.Tensor] = []
        for index in range(entropy.char.s_slices):
            state = SliceState(index=index, decoded_slices=list(decoded), hyper_features=features)
            params = entropy.char.slice_params(state)
            contexts = scale_indexes(params.sigma, self.scale_table).flatten().tolist()
            symbols = rans_decode(streams[1 + index], contexts, self.gaussian_table)
            q_slice = torch.tensor(symbols, dtype=torch.float32).view_as(params.mu) + params.mu
            decoded.append(entropy.char.lrp_apply(state, params.mu, q_slice))
        return torch.cat(decoded, dim=1)


class DeepCodec(SequenceCodec):
    """Sequence codec around a trained `DistributedVideoCodec`."""

    codec_id = CodecId.DEEP

    def __init__(self, model: DistributedVideoCodec, stage: StageFactory | None = None):
        self.model = model.eval()
        self.stage = stage or _no_stage
        tables = model.tables
        self.table_version = tables.version
        self.wz_coder = LatentCoder(model.wz_entropy, tables.wz_hyper, tables.gaussian, model.scale_table)
        self.intra_coder = LatentCoder(model.intra_entropy, tables.intra_hyper, tables.gaussian, model.scale_table)
        self.stream_names = ["hyper"] + [f"slice{j}" for j in range(model.config.s_slices)]

    @torch.no_grad()
    def encode_frame(self, frame: Frame, role: FrameRole) -> EncodedFrame:
        """Encode a single frame on its own; no other frame is read."""
        x, _ = pad_to_multiple(frame.to_tensor())
        if role is FrameRole.KEY:
            with self.stage("analysis"):
                y = self.model.intra_encode(x)
            with self.stage("entropy_coding"):
                streams, _ = self.intra_coder.encode(y)
        else:
            with self.stage("analysis"):
                y = self.model.wz_encode(x)
            with self.stage("entropy_coding"):
                streams, _ = self.wz_coder.encode(y)
        encoded = EncodedFrame(index=frame.index, role=role, streams=streams)
        logger.debug(f"frame={frame.index} role={role.value} event=encoded bytes={encoded.payload_bytes}")
        return encoded

    def encode_sequence(self, sequence: VideoSequence, gop: int, path: str | Path | None = None) -> bytes:
        keys = {view.key_index for view in split_gops(sequence, gop)}
        frames = [
            self.encode_frame(frame, FrameRole.KEY if frame.index in keys else FrameRole.WZ)
            for frame in sequence.frames
        ]
        header = ContainerHeader(
            codec=self.codec_id,
            width=sequence.width,
            height=sequence.height,
            gop=gop,
            frame_count=len(frames),
            lambda_id=self.model.config.lambda_id,
            table_version=self.table_version,
        )
        data = pack_container(frames, header, path)
        bpp = 8 * sum(f.payload_bytes for f in frames) / max(1, sequence.width * sequence.height * len(frames))
        logger.info(f"codec=deep event=sequence_encoded frames={len(frames)} gop={gop} bpp={bpp:.4f}")
        return data

    def decode_sequence(self, data: bytes | str | Path) -> list[Frame]:
        return self.decode_trace(data).frames

    @torch.no_grad()
    def decode_trace(self, data: bytes | str | Path) -> DecodeTrace:
        """Decode keys first, then WZ frames in hierarchical order with decoder-side SI."""
        container = parse_container(data)
        header = container.header
        if header.codec is not self.codec_id:
            raise BitstreamError(f"container holds a {header.codec.value} stream, not deep")
        if header.table_version != self.table_version:
            raise BitstreamError(
                f"table version mismatch: stream expects {header.table_version}, model tables are {self.table_version}"
            )
        size = (header.height, header.width)
        padded = padded_size(*size)
        latent_size = (padded[0] // 16, padded[1] // 16)
        by_index = {frame.index: frame for frame in container.frames}
        decoded: dict[int, torch.Tensor] = {}
        trace = DecodeTrace(frames=[])

        key_indices = sorted(index for index, frame in by_index.items() if frame.role is FrameRole.KEY)
        for index in key_indices:
            with self.stage("entropy_decoding"):
                y_hat = self.intra_coder.decode(by_index[index].streams, latent_size, frame=index)
            with self.stage("synthesis"):
                decoded[index] = self.model.intra_decode(y_hat)

        for key0, key1 in zip(key_indices, key_indices[1:]):
            for entry in gop_schedule(key0, key1):
                encoded = by_index.get(entry.target)
                if encoded is None or encoded.role is not FrameRole.WZ:
                    continue
                with self.stage("entropy_decoding"):
                    y_hat = self.wz_coder.decode(encoded.streams, latent_size, frame=entry.target)
                with self.stage("side_information"):
                    side = self.model.interpolator.for_entry(decoded, entry)
                with self.stage("si_encoder"):
                    si_latent = self.model.si_encode(side.frame, side.ref0, side.ref1)
                with self.stage("synthesis"):
                    decoded[entry.target] = self.model.wz_decode(y_hat, si_latent, si_frame=side.frame)
                trace.side_info[entry.target] = side
                trace.wz_latents[entry.target] = y_hat
                trace.si_latents[entry.target] = si_latent
                logger.debug(f"frame={entry.target} role=wz event=decoded ref0={entry.ref0} ref1={entry.ref1}")

        missing = sorted(set(by_index) - set(decoded))
        if missing:
            raise BitstreamError(f"frames {missing} are not reachable from any key frame pair", frame=missing[0])
        trace.frames = [
            Frame.from_tensor(decoded[index][..., : size[0], : size[1]], index=index) for index in sorted(decoded)
        ]
        logger.info(f"codec=deep event=sequence_decoded frames={len(trace.frames)}")
        return trace
