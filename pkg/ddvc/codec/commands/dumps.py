"""si-dump and visualize subcommands: decoder-side intermediates as images."""

from __future__ import annotations

from typing import Any

import numpy as np
from PIL import Image
from pydantic import Field

from ddvc.codec.coders.deep import DeepCodec
from ddvc.codec.commands.base import Command, SequenceArgs
from ddvc.codec.errors import ParameterError
from ddvc.codec.eval.visualize import visualize_latents
from ddvc.codec.types import Frame, LatentOrigin, LatentTensor
from ddvc.codec.utils.logging import get_logger
from ddvc.codec.video_io import to_uint8


logger = get_logger("ddvc")


class DumpArgs(SequenceArgs):
    ckpt: str | None = Field(default=None, description="Model checkpoint.")
    gop: int | None = Field(default=None, ge=2, description="GOP size N.")
    out: str | None = Field(default=None, description="Output directory.")


class SIDumpCommand(Command):
    name = "si-dump"
    description = "Write the decoder's interpolated SI frames and fusion maps as PNGs."
    ArgsModel = DumpArgs

    def run(self, args: DumpArgs) -> dict[str, Any]:
        config = self.run_config(args)
        out = self.run_dir(args.out, self.name, config)
        codec = DeepCodec(self.load_model(args.ckpt))
        sequence = self.read_input(args)
        trace = codec.decode_trace(codec.encode_sequence(sequence, config.gop))
        height, width = sequence.height, sequence.width
        for index, side in sorted(trace.side_info.items()):
            frame = Frame.from_tensor(side.frame[..., :height, :width], index=index)
            Image.fromarray(to_uint8(frame.pixels)).save(out / f"si_{index:06d}.png")
            fusion = side.interp.fusion[0, 0, :height, :width].detach().cpu().numpy()
            Image.fromarray(to_uint8(np.clip(fusion, 0.0, 1.0))).save(out / f"fusion_{index:06d}.png")
        logger.info(f"command=si-dump event=written frames={len(trace.side_info)} out={out}")
        return {"out": str(out), "frames": sorted(trace.side_info)}


class VisualizeArgs(DumpArgs):
    frame: int = Field(..., ge=1, description="Display index of a WZ frame.")


class VisualizeCommand(Command):
    name = "visualize"
    description = "Write per-channel PNGs of the WZ latent and SI latent of one WZ frame."
    ArgsModel = VisualizeArgs

    def run(self, args: VisualizeArgs) -> dict[str, Any]:
        config = self.run_config(args)
        out = self.run_dir(args.out, self.name, config)
        codec = DeepCodec(self.load_model(args.ckpt))
        sequence = self.read_input(args)
        trace = codec.decode_trace(codec.encode_sequence(sequence, config.gop))
        if args.frame not in trace.wz_latents:
            raise ParameterError(f"frame {args.frame} is not a WZ frame (WZ frames: {sorted(trace.wz_latents)})")
        wz = visualize_latents(LatentTensor(trace.wz_latents[args.frame], LatentOrigin.WZ), out, prefix=f"wz_{args.frame:06d}")
        si = visualize_latents(LatentTensor(trace.si_latents[args.frame], LatentOrigin.SI), out, prefix=f"si_{args.frame:06d}")
        return {"out": str(out), "frame": args.frame, "wz_images": len(wz), "si_images": len(si)}
