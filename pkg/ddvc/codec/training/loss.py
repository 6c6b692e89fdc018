"""Rate-distortion objective L = λ·d(x, x̂) + R(ŷ) + R(ẑ)."""

from __future__ import annotations

from dataclasses import dataclass

import torch

from ddvc.codec.errors import InvariantViolation, ParameterError
from ddvc.codec.eval.metrics import ms_ssim_tensor


@dataclass
class LossTerms:
    loss: torch.Tensor
    distortion: torch.Tensor
    bpp: torch.Tensor


def distortion(x: torch.Tensor, x_hat: torch.Tensor, metric: str = "mse") -> torch.Tensor:
    """MSE in the [0,1] domain, or 1 - MS-SSIM."""
    if x.shape != x_hat.shape:
        raise ParameterError(f"x {tuple(x.shape)} and x_hat {tuple(x_hat.shape)} differ")
    if metric == "mse":
        return torch.mean((x - x_hat) ** 2)
    if metric == "msssim":
        return 1.0 - ms_ssim_tensor(x, x_hat)
    raise ParameterError(f"metric must be mse or msssim, got {metric!r}")


def bits_per_pixel(bits: torch.Tensor, x: torch.Tensor) -> torch.Tensor:
    """Normalize a batch bit total by the B·H·W pixels of `x`."""
    return bits / (x.shape[0] * x.shape[-2] * x.shape[-1])


def rd_loss(
    x: torch.Tensor,
    x_hat: torch.Tensor,
    bits_y: torch.Tensor | float,
    bits_z: torch.Tensor | float,
    lam: float,
    metric: str = "mse",
) -> LossTerms:
    """λ·d + bpp_y + bpp_z; rates must already be per-pixel.

    Raises:
        InvariantViolation: A rate term is negative.
    """
    bits_y = torch.as_tensor(bits_y, dtype=x.dtype)
    bits_z = torch.as_tensor(bits_z, dtype=x.dtype)
    if float(bits_y.detach()) < 0 or float(bits_z.detach()) < 0:
        raise InvariantViolation(f"negative rate: bits_y={float(bits_y):.6g} bits_z={float(bits_z):.6g}")
    d = distortion(x, x_hat, metric)
    bpp = bits_y + bits_z
    return LossTerms(loss=lam * d + bpp, distortion=d, bpp=bpp)
