from __future__ import annotations

import json
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Literal, Type

from pydantic import BaseModel, ConfigDict, Field

from ddvc.codec.classic.ldpca import LdpcaCode
from ddvc.codec.config import FIELD_TYPES, RunConfig, load_config
from ddvc.codec.errors import ConfigError
from ddvc.codec.model import DistributedVideoCodec, load_checkpoint
from ddvc.codec.types import VideoSequence
from ddvc.codec.utils.helpers import environment_fingerprint, prepare_output_dir
from ddvc.codec.utils.logging import get_logger
from ddvc.codec.video_io import read_sequence


logger = get_logger("ddvc")


class CommonArgs(BaseModel):
    """Options shared by every subcommand.

    Fields named like RunConfig keys are forwarded to `load_config` as
    command-line overrides; None leaves the lower-precedence value in place.
    """

    model_config = ConfigDict(extra="forbid")

    config: str | None = Field(default=None, description="Flat key = value config file.")
    debug: bool | None = Field(default=None, description="Enable DEBUG logging.")


class SequenceArgs(CommonArgs):
    """Options of commands that read a raw sequence."""

    input: str = Field(..., description="PNG directory or yuv420p file.", json_schema_extra={"flag": "--in"})
    fmt: Literal["png-dir", "yuv420p"] = Field(default="png-dir", description="Input format.")
    width: int | None = Field(default=None, gt=0, description="Luma width (yuv420p).")
    height: int | None = Field(default=None, gt=0, description="Luma height (yuv420p).")
    max_frames: int | None = Field(default=None, gt=0, description="Read at most this many frames.")


class Command(ABC):
    """Abstract base class for all subcommands.

    Subclasses must define:
    - name: subcommand name on the command line (str)
    - description: help text (str)
    - ArgsModel: Pydantic model for validated arguments (Type[BaseModel])
    """

    name: str
    description: str
    ArgsModel: Type[BaseModel]

    @abstractmethod
    def run(self, args: BaseModel) -> dict[str, Any]:
        """Run the command with validated arguments and return a JSON-ready result."""
        raise NotImplementedError

    @staticmethod
    def run_config(args: CommonArgs) -> RunConfig:
        overrides = {key: value for key, value in args.model_dump().items() if key in FIELD_TYPES}
        return load_config(args.config, overrides)

    @staticmethod
    def run_dir(out: str | None, command: str, config: RunConfig) -> Path:
        """Create the output directory and record the effective config and environment."""
        path = prepare_output_dir(out, command)
        (path / "config.toml").write_text(config.to_toml(), encoding="utf-8")
        (path / "environment.json").write_text(json.dumps(environment_fingerprint(), indent=2), encoding="utf-8")
        logger.debug(f"command={command} event=run_dir path={path}")
        return path

    @staticmethod
    def load_model(ckpt: str | None) -> DistributedVideoCodec:
        if not ckpt:
            raise ConfigError("a model checkpoint is required (--ckpt)")
        model, _ = load_checkpoint(ckpt)
        return model

    @staticmethod
    def read_input(args: SequenceArgs) -> VideoSequence:
        return read_sequence(args.input, args.fmt, args.width, args.height, args.max_frames)

    @staticmethod
    def ldpca_code(config: RunConfig) -> LdpcaCode:
        return LdpcaCode(n=config.ldpca_blocklen, seed=config.ldpca_seed, max_iterations=config.bp_iterations)
