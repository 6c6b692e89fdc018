from __future__ import annotations

import threading
from typing import Any, Literal

from pydantic import Field

from ddvc.codec.commands.base import Command, CommonArgs
from ddvc.codec.model import DistributedVideoCodec
from ddvc.codec.training.dataset import FolderTripletDataset, make_synthetic_dataset
from ddvc.codec.training.trainer import train_stage
from ddvc.codec.utils.logging import run_log


class TrainArgs(CommonArgs):
    out: str | None = Field(default=None, description="Run directory (default: a new timestamped one).")
    stage: int | None = Field(default=None, ge=1, le=2, description="Training stage.")
    metric: Literal["mse", "msssim"] | None = Field(default=None, description="Distortion metric.")
    lambda_id: int | None = Field(default=None, ge=0, le=4, description="Index into the lambda grid.")
    lambda_value: float | None = Field(default=None, ge=0.0, description="Custom lambda (> 0 overrides the grid).")
    variant: str | None = Field(default=None, description="Network variant.")
    n_filters: int | None = Field(default=None, gt=0, description="Hidden channels.")
    m_latent: int | None = Field(default=None, gt=0, description="Latent channels.")
    s_slices: int | None = Field(default=None, gt=0, description="Entropy slices.")
    ifnet_channels: int | None = Field(default=None, gt=0, description="Interpolation block width.")
    max_steps: int | None = Field(default=None, gt=0, description="Step cap.")
    batch: int | None = Field(default=None, gt=0, description="Batch size.")
    crop: int | None = Field(default=None, gt=0, description="Crop size (multiple of 64).")
    dataset_size: int | None = Field(default=None, gt=1, description="Synthetic triplet count.")
    motion: Literal["translate", "rotate", "zoom"] | None = Field(default=None, description="Synthetic motion.")
    dataset_dir: str | None = Field(default=None, description="Triplet folder (sequences/<clip>/<n>/im1..3.png).")
    stage1_ckpt: str | None = Field(default=None, description="Stage-1 checkpoint (required for stage 2).")
    init_ckpt: str | None = Field(default=None, description="Initial weights, e.g. the MSE model for MS-SSIM.")
    seed: int | None = Field(default=None, description="Global seed.")


class TrainCommand(Command):
    name = "train"
    description = "Run training stage 1 or 2 and write the best checkpoint plus loss.csv."
    ArgsModel = TrainArgs

    def __init__(self, stop_event: threading.Event | None = None):
        self.stop_event = stop_event

    def run(self, args: TrainArgs) -> dict[str, Any]:
        config = self.run_config(args)
        run_dir = self.run_dir(args.out, self.name, config)
        if config.dataset_dir:
            data = FolderTripletDataset(config.dataset_dir, crop=config.crop, seed=config.seed)
        else:
            data = make_synthetic_dataset(config.dataset_size, config.crop, config.motion, config.seed, config.shift)
        model = DistributedVideoCodec(config.codec_config())
        with run_log(run_dir) as log_path:
            result = train_stage(
                model,
                data,
                config.train_config(),
                run_dir,
                val_fraction=config.val_fraction,
                stage1_ckpt=config.stage1_ckpt or None,
                init_ckpt=config.init_ckpt or None,
                stop_event=self.stop_event,
            )
        return {
            "run_dir": str(run_dir),
            "checkpoint": str(result.checkpoint),
            "loss_csv": str(result.loss_csv),
            "log": str(log_path),
            "stage": config.stage,
            "lambda": config.lam,
            "custom_lambda": config.custom_lambda,
            "steps": result.steps,
            "best_val_loss": result.best_val_loss,
        }
