"""Per-channel grayscale dumps of latent tensors."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from PIL import Image

from ddvc.codec.types import LatentTensor
from ddvc.codec.utils.logging import get_logger


logger = get_logger("ddvc")

MID_GRAY = 128


def channel_image(channel: np.ndarray) -> np.ndarray:
    """Min-max normalize one channel to uint8; a constant channel becomes mid-gray."""
    channel = np.asarray(channel, dtype=np.float64)
    low, high = float(channel.min()), float(channel.max())
    if high - low <= 0.0:
        return np.full(channel.shape, MID_GRAY, dtype=np.uint8)
    return np.round((channel - low) / (high - low) * 255.0).astype(np.uint8)


def visualize_latents(latent: LatentTensor | torch.Tensor, out_dir: str | Path, prefix: str | None = None) -> list[Path]:
    """Write `<prefix>_chNNN.png` for every channel of `latent`."""
    if isinstance(latent, LatentTensor):
        values, prefix = latent.values, prefix or latent.origin.value
    else:
        values, prefix = latent, prefix or "latent"
    values = values.detach().cpu()
    if values.dim() == 4:
        values = values[0]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for index, channel in enumerate(values.numpy()):
        path = out / f"{prefix}_ch{index:03d}.png"
        Image.fromarray(channel_image(channel)).save(path)
        paths.append(path)
    logger.info(f"event=latents_written dir={out} prefix={prefix} channels={len(paths)}")
    return paths
