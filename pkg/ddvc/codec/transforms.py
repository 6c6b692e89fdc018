"""Analysis and synthesis transforms of the WZ autoencoder and the intra codec."""

from __future__ import annotations

import torch
import torch.nn as nn

from ddvc.codec.errors import ParameterError
from ddvc.codec.layers import GDN, conv, deconv


class AnalysisTransform(nn.Module):
    """Four stride-2 convolutions with GDN between stages: 3×H×W -> M×H/16×W/16."""

    def __init__(self, n_filters: int, m_latent: int, kernel: int = 5, in_channels: int = 3):
        super().__init__()
        self.in_channels = in_channels
        self.net = nn.Sequential(
            conv(in_channels, n_filters, kernel),
            GDN(n_filters),
            conv(n_filters, n_filters, kernel),
            GDN(n_filters),
            conv(n_filters, n_filters, kernel),
            GDN(n_filters),
            conv(n_filters, m_latent, kernel),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() != 4 or x.shape[1] != self.in_channels:
            raise ParameterError(f"expected B×{self.in_channels}×H×W input, got {tuple(x.shape)}")
        if x.shape[-1] % 16 or x.shape[-2] % 16:
            raise ParameterError(f"input size {tuple(x.shape[-2:])} must be divisible by 16")
        return self.net(x)


class SynthesisTransform(nn.Module):
    """Four stride-2 transposed convolutions with IGDN between stages."""

    def __init__(self, in_channels: int, n_filters: int, kernel: int = 5, out_channels: int = 3):
        super().__init__()
        self.in_channels = in_channels
        self.net = nn.Sequential(
            deconv(in_channels, n_filters, kernel),
            GDN(n_filters, inverse=True),
            deconv(n_filters, n_filters, kernel),
            GDN(n_filters, inverse=True),
            deconv(n_filters, n_filters, kernel),
            GDN(n_filters, inverse=True),
            deconv(n_filters, out_channels, kernel),
        )

    def forward(self, y: torch.Tensor) -> torch.Tensor:
        if y.dim() != 4 or y.shape[1] != self.in_channels:
            raise ParameterError(f"expected B×{self.in_channels}×h×w latent, got {tuple(y.shape)}")
        return self.net(y)


class PixelFusion(nn.Module):
    """Residual merge of a decoded frame with the SI frame in pixel space."""

    def __init__(self, channels: int = 32):
        super().__init__()
        self.net = nn.Sequential(
            nn.Conv2d(6, channels, 3, padding=1),
            nn.LeakyReLU(0.1),
            nn.Conv2d(channels, channels, 3, padding=1),
            nn.LeakyReLU(0.1),
            nn.Conv2d(channels, 3, 3, padding=1),
        )
        nn.init.zeros_(self.net[-1].weight)
        nn.init.zeros_(self.net[-1].bias)

    def forward(self, decoded: torch.Tensor, si_frame: torch.Tensor) -> torch.Tensor:
        return decoded + self.net(torch.cat([decoded, si_frame], dim=1))
