"""encode, decode and inspect subcommands."""

from __future__ import annotations

from pathlib import Path
from typing import Any, Literal

import numpy as np
import torch
from pydantic import Field

from ddvc.codec.bitstream.container import bit_accounting, parse_container
from ddvc.codec.classic.dct import BAND_COUNT
from ddvc.codec.coders.base import SequenceCodec
from ddvc.codec.coders.classic import ClassicCodec, calibrate_alphas
from ddvc.codec.coders.deep import DeepCodec
from ddvc.codec.commands.base import Command, CommonArgs, SequenceArgs
from ddvc.codec.config import RunConfig
from ddvc.codec.model import DistributedVideoCodec
from ddvc.codec.types import CodecId
from ddvc.codec.utils.logging import get_logger
from ddvc.codec.video_io import write_png_dir, write_yuv420p


logger = get_logger("ddvc")


def build_codec(config: RunConfig, model: DistributedVideoCodec, codec: str | None = None, alphas: np.ndarray | None = None) -> SequenceCodec:
    """Deep or classic codec around `model`, configured from `config`."""
    if (codec or config.codec) == "deep":
        return DeepCodec(model)
    if alphas is None:
        alphas = np.full(BAND_COUNT, config.default_alpha)
    return ClassicCodec(
        model,
        qi=config.qi,
        alphas=alphas,
        reconstruction=config.reconstruction,
        code=Command.ldpca_code(config),
    )


class EncodeArgs(SequenceArgs):
    out: str = Field(..., description="Container file to write.")
    ckpt: str | None = Field(default=None, description="Model checkpoint.")
    codec: Literal["deep", "classic"] | None = Field(default=None, description="Codec path.")
    gop: int | None = Field(default=None, ge=2, description="GOP size N.")
    qi: int | None = Field(default=None, ge=1, le=8, description="Classic quality index.")
    reconstruction: Literal["clamp", "centroid"] | None = Field(default=None, description="Classic reconstruction.")
    seed: int | None = Field(default=None, description="Global seed.")
    calibrate: bool = Field(default=False, description="Fit classic band alphas on this sequence.")


class EncodeCommand(Command):
    name = "encode"
    description = "Encode a YUV/PNG sequence into a .ddvc container and report its bpp."
    ArgsModel = EncodeArgs

    def run(self, args: EncodeArgs) -> dict[str, Any]:
        config = self.run_config(args)
        torch.manual_seed(config.seed)
        model = self.load_model(args.ckpt)
        sequence = self.read_input(args)
        alphas = None
        if config.codec == "classic" and args.calibrate:
            alphas = calibrate_alphas(model, sequence, config.gop)
        codec = build_codec(config, model, alphas=alphas)
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        data = codec.encode_sequence(sequence, config.gop, out)
        accounting = bit_accounting(parse_container(data), codec.stream_names)
        result: dict[str, Any] = {
            "container": str(out),
            "codec": config.codec,
            "frames": len(sequence),
            "bytes": len(data),
            "bpp": accounting.bpp,
        }
        if isinstance(codec, ClassicCodec):
            result["syndrome_bits"] = codec.transcript.total_syndrome_bits
            result["sw_failures"] = codec.transcript.failures
        return result


class DecodeArgs(CommonArgs):
    input: str = Field(..., description="Container file.", json_schema_extra={"flag": "--in"})
    out: str = Field(..., description="Output PNG directory, or YUV file with --yuv.")
    ckpt: str | None = Field(default=None, description="Model checkpoint.")
    yuv: bool = Field(default=False, description="Write a raw yuv420p file instead of PNGs.")


class DecodeCommand(Command):
    name = "decode"
    description = "Decode a .ddvc container into PNG frames (or a yuv420p file)."
    ArgsModel = DecodeArgs

    def run(self, args: DecodeArgs) -> dict[str, Any]:
        config = self.run_config(args)
        model = self.load_model(args.ckpt)
        container = parse_container(args.input)
        data = Path(args.input).read_bytes()
        codec = build_codec(config, model, codec=container.header.codec.value)
        frames = codec.decode_sequence(data)
        if args.yuv:
            written = [write_yuv420p(frames, args.out)]
        else:
            written = write_png_dir(frames, args.out)
        logger.info(f"command=decode event=written frames={len(frames)} out={args.out}")
        return {
            "codec": container.header.codec.value,
            "frames": len(frames),
            "width": container.header.width,
            "height": container.header.height,
            "out": args.out,
            "files": len(written),
        }


class InspectArgs(CommonArgs):
    input: str = Field(..., description="Container file.", json_schema_extra={"flag": "--in"})


class InspectCommand(Command):
    name = "inspect"
    description = "Print the container header and per-frame bit accounting."
    ArgsModel = InspectArgs

    def run(self, args: InspectArgs) -> dict[str, Any]:
        container = parse_container(args.input)
        names = None
        if container.header.codec is CodecId.DEEP:
            streams = max((len(frame.streams) for frame in container.frames), default=1)
            names = ["hyper"] + [f"slice{j}" for j in range(streams - 1)]
        return {
            "header": container.header.model_dump(mode="json"),
            "accounting": bit_accounting(container, names).model_dump(mode="json"),
        }
