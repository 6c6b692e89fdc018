"""Quality metrics: PSNR, MS-SSIM and MS-SSIM in dB.

MS-SSIM uses an 11-tap Gaussian window (σ = 1.5), K1 = 0.01, K2 = 0.03, the
standard five scale weights and valid (unpadded) filtering. Frames too small
for five scales use the largest feasible number of scales with renormalized
weights.
"""

from __future__ import annotations

import math

import numpy as np
import torch
import torch.nn.functional as F

from ddvc.codec.errors import ParameterError
from ddvc.codec.types import Frame


DB_CAP = 100.0
WINDOW_SIZE = 11
WINDOW_SIGMA = 1.5
K1, K2 = 0.01, 0.03
MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)

ImageLike = Frame | np.ndarray | torch.Tensor


def _as_batch(image: ImageLike) -> torch.Tensor:
    """B×C×H×W float tensor; Frames and H×W×3 arrays are converted."""
    if isinstance(image, Frame):
        return image.to_tensor().double()
    if isinstance(image, np.ndarray):
        if image.ndim == 3 and image.shape[-1] in (1, 3):
            image = image.transpose(2, 0, 1)
        tensor = torch.from_numpy(np.ascontiguousarray(image)).double()
    else:
        tensor = image
    while tensor.dim() < 4:
        tensor = tensor.unsqueeze(0)
    return tensor


def _check_pair(a: torch.Tensor, b: torch.Tensor) -> None:
    if a.shape != b.shape:
        raise ParameterError(f"image sizes differ: {tuple(a.shape)} vs {tuple(b.shape)}")


def mse(a: ImageLike, b: ImageLike) -> float:
    x, y = _as_batch(a), _as_batch(b)
    _check_pair(x, y)
    return float(((x.double() - y.double()) ** 2).mean())


def psnr_from_mse(value: float) -> float:
    if value <= 0.0:
        return DB_CAP
    return min(DB_CAP, 10.0 * math.log10(1.0 / value))


def psnr(a: ImageLike, b: ImageLike) -> float:
    """10·log10(1/MSE) on [0,1] signals, capped at 100 dB."""
    return psnr_from_mse(mse(a, b))


def msssim_db(value: float) -> float:
    """-10·log10(1 - MS-SSIM), capped at 100 dB."""
    if value >= 1.0:
        return DB_CAP
    return min(DB_CAP, -10.0 * math.log10(1.0 - value))


def _window(dtype: torch.dtype, device) -> torch.Tensor:
    coords = torch.arange(WINDOW_SIZE, dtype=dtype, device=device) - WINDOW_SIZE // 2
    g = torch.exp(-(coords ** 2) / (2 * WINDOW_SIGMA ** 2))
    return g / g.sum()


def _filter(x: torch.Tensor, window: torch.Tensor) -> torch.Tensor:
    channels = x.shape[1]
    horizontal = window.view(1, 1, 1, -1).repeat(channels, 1, 1, 1)
    vertical = window.view(1, 1, -1, 1).repeat(channels, 1, 1, 1)
    return F.conv2d(F.conv2d(x, horizontal, groups=channels), vertical, groups=channels)


def _ssim_terms(x: torch.Tensor, y: torch.Tensor, data_range: float) -> tuple[torch.Tensor, torch.Tensor]:
    window = _window(x.dtype, x.device)
    c1 = (K1 * data_range) ** 2
    c2 = (K2 * data_range) ** 2
    mu_x, mu_y = _filter(x, window), _filter(y, window)
    sigma_x = _filter(x * x, window) - mu_x ** 2
    sigma_y = _filter(y * y, window) - mu_y ** 2
    sigma_xy = _filter(x * y, window) - mu_x * mu_y
    cs_map = (2 * sigma_xy + c2) / (sigma_x + sigma_y + c2)
    ssim_map = (2 * mu_x * mu_y + c1) / (mu_x ** 2 + mu_y ** 2 + c1) * cs_map
    return ssim_map.flatten(2).mean(-1), cs_map.flatten(2).mean(-1)


def ms_ssim_scales(height: int, width: int) -> int:
    """Largest scale count (≤ 5) whose coarsest image still exceeds the window support."""
    side = min(height, width)
    if side <= WINDOW_SIZE - 1:
        raise ParameterError(f"image side {side} is too small for MS-SSIM (needs > {WINDOW_SIZE - 1})")
    scales = len(MS_SSIM_WEIGHTS)
    while scales > 1 and side <= (WINDOW_SIZE - 1) * 2 ** (scales - 1):
        scales -= 1
    return scales


def ms_ssim_tensor(x: torch.Tensor, y: torch.Tensor, data_range: float = 1.0) -> torch.Tensor:
    """Differentiable MS-SSIM of B×C×H×W tensors, averaged over batch and channels."""
    _check_pair(x, y)
    scales = ms_ssim_scales(x.shape[-2], x.shape[-1])
    weights = torch.tensor(MS_SSIM_WEIGHTS[:scales], dtype=x.dtype, device=x.device)
    weights = weights / weights.sum()
    contrast: list[torch.Tensor] = []
    ssim_per_channel = None
    for level in range(scales):
        ssim_per_channel, cs = _ssim_terms(x, y, data_range)
        if level < scales - 1:
            contrast.append(torch.relu(cs))
            padding = [size % 2 for size in x.shape[2:]]
            x = F.avg_pool2d(x, kernel_size=2, padding=padding)
            y = F.avg_pool2d(y, kernel_size=2, padding=padding)
    stacked = torch.stack(contrast + [torch.relu(ssim_per_channel)], dim=0)
    value = torch.prod(stacked ** weights.view(-1, 1, 1), dim=0)
    return value.mean()


def ms_ssim(a: ImageLike, b: ImageLike) -> float:
    x, y = _as_batch(a).double(), _as_batch(b).double()
    return float(ms_ssim_tensor(x, y))
