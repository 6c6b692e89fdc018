from __future__ import annotations

import shutil
import subprocess
from pathlib import Path
from typing import Any, Literal

from pydantic import Field

from ddvc.codec.commands.base import Command, CommonArgs
from ddvc.codec.errors import ConfigError, FormatError
from ddvc.codec.utils.logging import get_logger


logger = get_logger("ddvc")

ENCODERS = {"h264": "libx264", "h265": "libx265"}


def ffmpeg_command(
    codec: str, source: str, output: str, width: int, height: int, crf: int, gop: int, fps: int = 30, frames: int | None = None
) -> list[str]:
    """Low-delay ffmpeg command line for an 8-bit yuv420p input."""
    command = [
        "ffmpeg", "-y",
        "-pix_fmt", "yuv420p", "-s", f"{width}x{height}", "-r", str(fps), "-f", "rawvideo", "-i", source,
    ]
    if frames is not None:
        command += ["-frames:v", str(frames)]
    command += [
        "-c:v", ENCODERS[codec],
        "-preset", "veryslow", "-tune", "zerolatency",
        "-crf", str(crf), "-g", str(gop), "-bf", "2", "-b_strategy", "0", "-sc_threshold", "0",
        "-pix_fmt", "yuv420p",
    ]
    if codec == "h265":
        command += ["-x265-params", f"crf={crf}:keyint={gop}"]
    return command + [output]


class ExternBaselineArgs(CommonArgs):
    codec: Literal["h264", "h265"] = Field(default="h264", description="External codec.")
    input: str = Field(..., description="yuv420p source file.", json_schema_extra={"flag": "--in"})
    width: int = Field(..., gt=0, description="Luma width.")
    height: int = Field(..., gt=0, description="Luma height.")
    crf: int = Field(default=23, ge=0, le=51, description="Constant rate factor.")
    gop: int | None = Field(default=None, ge=2, description="GOP size N.")
    fps: int = Field(default=30, gt=0, description="Frame rate.")
    frames: int | None = Field(default=None, gt=0, description="Encode at most this many frames.")
    out: str = Field(..., description="Output bitstream (.mkv/.mp4).")
    dry_run: bool = Field(default=False, description="Print the command without running it.")


class ExternBaselineCommand(Command):
    name = "extern-baseline"
    description = "Encode with ffmpeg's H.264/H.265 in low-delay mode when ffmpeg is installed."
    ArgsModel = ExternBaselineArgs

    def run(self, args: ExternBaselineArgs) -> dict[str, Any]:
        # `codec` names the external encoder here, not the RunConfig codec path.
        overrides = args.model_copy(update={"codec": None})
        config = self.run_config(overrides)
        command = ffmpeg_command(args.codec, args.input, args.out, args.width, args.height, args.crf, config.gop, args.fps, args.frames)
        if args.dry_run:
            return {"command": command, "ran": False}
        if shutil.which("ffmpeg") is None:
            raise ConfigError("ffmpeg is not on PATH; use --dry-run to print the command")
        if not Path(args.input).is_file():
            raise FormatError(f"input not found: {args.input}")
        logger.info(f"command=extern-baseline event=run codec={args.codec} crf={args.crf} gop={config.gop}")
        completed = subprocess.run(command, capture_output=True, text=True, check=False)
        if completed.returncode != 0:
            raise FormatError(f"ffmpeg failed ({completed.returncode}): {completed.stderr.strip()[-400:]}")
        size = Path(args.out).stat().st_size
        return {"command": command, "ran": True, "bytes": size, "bits": 8 * size}
