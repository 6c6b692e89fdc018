"""Differentiable primitives shared by the codec networks.

GDN/IGDN, bilinear backward warping, and the two quantizer surrogates of
mixed quantization (additive uniform noise for rates, straight-through
rounding for reconstructions).
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from ddvc.codec.errors import InvariantViolation, ParameterError


BETA_MIN = 1e-6


class _LowerBoundFunction(torch.autograd.Function):
    """max(x, bound) whose gradient still flows when it pushes x upwards."""

    @staticmethod
    def forward(ctx, inputs: torch.Tensor, bound: torch.Tensor) -> torch.Tensor:
        ctx.save_for_backward(inputs, bound)
        return torch.max(inputs, bound)

    @staticmethod
    def backward(ctx, grad_output: torch.Tensor):
        inputs, bound = ctx.saved_tensors
        pass_through = (inputs >= bound) | (grad_output < 0)
        return pass_through.type(grad_output.dtype) * grad_output, None


def lower_bound(x: torch.Tensor, bound: float) -> torch.Tensor:
    return _LowerBoundFunction.apply(x, torch.tensor(bound, dtype=x.dtype, device=x.device))


@dataclass(frozen=True)
class GDNParams:
    """Effective GDN parameters: beta (C,), gamma (C, C)."""
    beta: torch.Tensor
    gamma: torch.Tensor

    def __post_init__(self) -> None:
        channels = self.beta.shape[0]
        if self.beta.dim() != 1 or self.gamma.shape != (channels, channels):
            raise ParameterError(f"beta {tuple(self.beta.shape)} / gamma {tuple(self.gamma.shape)} mismatch")


def gdn(x: torch.Tensor, params: GDNParams, inverse: bool = False) -> torch.Tensor:
    """Apply GDN (or IGDN) to a C×H×W or B×C×H×W tensor.

    forward: z_i = x_i / sqrt(beta_i + sum_j gamma_ij x_j^2); inverse multiplies instead.
    """
    if float(params.beta.min()) <= 0.0:
        raise InvariantViolation(f"GDN beta must be positive, got min {float(params.beta.min())}")
    batched = x.dim() == 4
    if not batched:
        if x.dim() != 3:
            raise ParameterError(f"gdn expects C×H×W or B×C×H×W, got {tuple(x.shape)}")
        x = x.unsqueeze(0)
    channels = x.shape[1]
    if params.beta.shape[0] != channels:
        raise ParameterError(f"GDN has {params.beta.shape[0]} channels, input has {channels}")
    norm = F.conv2d(x * x, params.gamma.view(channels, channels, 1, 1), params.beta)
    norm = torch.sqrt(norm)
    out = x * norm if inverse else x / norm
    return out if batched else out.squeeze(0)


class GDN(nn.Module):
    """Learnable GDN layer; beta and gamma are stored as square roots.

    beta = max(beta_raw^2, beta_min), gamma = gamma_raw^2.
    """

    def __init__(self, channels: int, inverse: bool = False, beta_min: float = BETA_MIN, gamma_init: float = 0.1):
        super().__init__()
        self.inverse = inverse
        self.beta_min = beta_min
        self.beta_raw = nn.Parameter(torch.ones(channels))
        self.gamma_raw = nn.Parameter(torch.sqrt(gamma_init * torch.eye(channels)))

    def params(self) -> GDNParams:
        beta = lower_bound(self.beta_raw.pow(2), self.beta_min)
        gamma = self.gamma_raw.pow(2)
        return GDNParams(beta=beta, gamma=gamma)

    @torch.no_grad()
    def set_params(self, beta: torch.Tensor, gamma: torch.Tensor) -> None:
        if float(beta.min()) < self.beta_min or float(gamma.min()) < 0.0:
            raise ParameterError("beta must be >= beta_min and gamma >= 0")
        self.beta_raw.copy_(beta.sqrt())
        self.gamma_raw.copy_(gamma.sqrt())

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return gdn(x, self.params(), inverse=self.inverse)


def base_grid(height: int, width: int, device=None, dtype=torch.float32) -> torch.Tensor:
    """Pixel-coordinate grid of shape 1×2×H×W (x first, then y)."""
    ys, xs = torch.meshgrid(
        torch.arange(height, device=device, dtype=dtype),
        torch.arange(width, device=device, dtype=dtype),
        indexing="ij",
    )
    return torch.stack([xs, ys], dim=0).unsqueeze(0)


def backward_warp(image: torch.Tensor, flow: torch.Tensor) -> torch.Tensor:
    """Sample `image` at p + flow(p) with bilinear interpolation and border clamping.

    image: C×H×W or B×C×H×W; flow: 2×H×W or B×2×H×W in pixels (x, y).
    """
    batched = image.dim() == 4
    if not batched:
        image, flow = image.unsqueeze(0), flow.unsqueeze(0)
    if flow.shape[1] != 2 or flow.shape[-2:] != image.shape[-2:]:
        raise ParameterError(f"flow {tuple(flow.shape)} does not match image {tuple(image.shape)}")
    height, width = image.shape[-2:]
    coords = base_grid(height, width, device=image.device, dtype=flow.dtype) + flow
    grid_x = 2.0 * coords[:, 0] / max(width - 1, 1) - 1.0
    grid_y = 2.0 * coords[:, 1] / max(height - 1, 1) - 1.0
    grid = torch.stack([grid_x, grid_y], dim=-1)
    warped = F.grid_sample(image, grid, mode="bilinear", padding_mode="border", align_corners=True)
    return warped if batched else warped.squeeze(0)


def ste_round(y: torch.Tensor, mean: torch.Tensor | float = 0.0) -> torch.Tensor:
    """Round(y - mean) + mean with identity gradient in y and zero net gradient in mean."""
    if isinstance(mean, torch.Tensor) and mean.shape != y.shape:
        mean = mean.expand_as(y)
    quantized = torch.round(y - mean) + mean
    return quantized.detach() + (y - y.detach())


def noise_quantize(y: torch.Tensor, generator: torch.Generator | None = None) -> torch.Tensor:
    """y + u with u ~ Uniform[-0.5, 0.5)."""
    noise = torch.rand(y.shape, generator=generator, dtype=y.dtype, device=y.device) - 0.5
    return y + noise


def conv(in_channels: int, out_channels: int, kernel_size: int = 5, stride: int = 2) -> nn.Conv2d:
    return nn.Conv2d(in_channels, out_channels, kernel_size, stride=stride, padding=kernel_size // 2)


def deconv(in_channels: int, out_channels: int, kernel_size: int = 5, stride: int = 2) -> nn.ConvTranspose2d:
    return nn.ConvTranspose2d(
        in_channels,
        out_channels,
        kernel_size,
        stride=stride,
        output_padding=stride - 1,
        padding=kernel_size // 2,
    )
