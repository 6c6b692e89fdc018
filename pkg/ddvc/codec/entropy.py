"""Probability models for latents: hyperprior, channel-autoregressive slices and rate terms.

Rates are returned in bits. During training the rate of y uses the noisy
residual y + u - mu and the reconstruction path uses straight-through
rounding; the same mixed scheme is applied to the hyper latent z.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ddvc.codec.errors import ContractError, InvariantViolation, ParameterError
from ddvc.codec.layers import conv, deconv, lower_bound, noise_quantize, ste_round
from ddvc.codec.types import GaussianParams


SIGMA_MIN = 0.11
SCALE_MAX = 256.0
SCALE_LEVELS = 64
LIKELIHOOD_BOUND = 1e-9


def build_scale_table(levels: int = SCALE_LEVELS, sigma_min: float = SIGMA_MIN, sigma_max: float = SCALE_MAX) -> torch.Tensor:
    """Log-spaced scales used to pick a CDF table per element when coding."""
    return torch.exp(torch.linspace(math.log(sigma_min), math.log(sigma_max), levels, dtype=torch.float64)).float()


def scale_indexes(sigma: torch.Tensor, table: torch.Tensor) -> torch.Tensor:
    """Index of the smallest table scale >= sigma (clamped to the last entry)."""
    index = torch.bucketize(sigma.detach().float(), table.to(sigma.device), right=False)
    return index.clamp_(0, table.numel() - 1)


def standard_normal_cdf(x: torch.Tensor) -> torch.Tensor:
    return 0.5 * torch.erfc(-(2 ** -0.5) * x)


def gaussian_likelihood(values: torch.Tensor, sigma: torch.Tensor) -> torch.Tensor:
    """P(value) for an integer bin centred on `values` under N(0, sigma)."""
    magnitude = values.abs()
    upper = standard_normal_cdf((0.5 - magnitude) / sigma)
    lower = standard_normal_cdf((-0.5 - magnitude) / sigma)
    return upper - lower


def gaussian_rate(symbols: torch.Tensor, params: GaussianParams) -> torch.Tensor:
    """Bits of mean-removed symbols s = Round(y - mu) (or the noisy surrogate) under N(0, sigma)."""
    if symbols.shape != params.sigma.shape:
        raise ParameterError(f"symbols {tuple(symbols.shape)} and sigma {tuple(params.sigma.shape)} differ")
    likelihood = gaussian_likelihood(symbols, params.sigma).clamp_min(LIKELIHOOD_BOUND)
    return -torch.log2(likelihood).sum()


class MonotonePrior(nn.Module):
    """Per-channel CDF over the real line; subclasses provide `cdf`."""

    def cdf(self, x: torch.Tensor) -> torch.Tensor:
        raise NotImplementedError

    def likelihood(self, symbols: torch.Tensor) -> torch.Tensor:
        return self.cdf(symbols + 0.5) - self.cdf(symbols - 0.5)


def factorized_rate(z_symbols: torch.Tensor, prior: MonotonePrior) -> torch.Tensor:
    """Bits of B×C×h×w symbols under a per-channel factorized prior."""
    likelihood = prior.likelihood(z_symbols)
    if not torch.isfinite(likelihood).all() or bool((likelihood < 0).any()):
        raise InvariantViolation("factorized prior produced a negative or non-finite probability")
    return -torch.log2(likelihood.clamp_min(LIKELIHOOD_BOUND)).sum()


def check_monotone(prior: MonotonePrior, channels: int, low: float = -64.0, high: float = 64.0, points: int = 257) -> None:
    """Raise InvariantViolation unless every channel CDF is nondecreasing with limits 0 and 1."""
    grid = torch.linspace(low, high, points)
    samples = grid.view(points, 1, 1, 1).expand(points, channels, 1, 1).contiguous()
    with torch.no_grad():
        values = prior.cdf(samples).view(points, channels)
    if bool((values[1:] < values[:-1] - 1e-6).any()):
        raise InvariantViolation("factorized prior CDF is decreasing somewhere")
    if float(values[0].max()) > 1e-3 or float(values[-1].min()) < 1 - 1e-3:
        raise InvariantViolation("factorized prior CDF does not reach its 0/1 limits on the probed range")


class FactorizeCell(nn.Module):
    """One per-channel monotone layer: softplus(W) @ x + b, optionally + tanh(a)·tanh(.)."""

    def __init__(self, channels: int, in_width: int, out_width: int, scale: float, factor: bool = True):
        super().__init__()
        init = float(np.log(np.expm1(1.0 / scale / out_width)))
        self.weight = nn.Parameter(torch.full((channels, out_width, in_width), init))
        self.bias = nn.Parameter(torch.empty(channels, out_width, 1).uniform_(-0.5, 0.5))
        self.factor = nn.Parameter(torch.zeros(channels, out_width, 1)) if factor else None

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out = F.softplus(self.weight) @ x + self.bias
        if self.factor is not None:
            out = out + torch.tanh(self.factor) * torch.tanh(out)
        return out


class FactorizedPrior(MonotonePrior):
    """Learned per-channel CDF built from four monotone cells (widths 1-3-3-3-1)."""

    def __init__(self, channels: int, init_scale: float = 10.0, filters: tuple[int, ...] = (3, 3, 3)):
        super().__init__()
        self.channels = channels
        widths = (1,) + tuple(filters) + (1,)
        scale = init_scale ** (1.0 / (len(widths) - 1))
        self.cells = nn.ModuleList(
            FactorizeCell(channels, widths[i], widths[i + 1], scale, factor=i < len(filters))
            for i in range(len(widths) - 1)
        )

    def logits_cumulative(self, x: torch.Tensor) -> torch.Tensor:
        transposed = x.transpose(0, 1)
        flat = transposed.reshape(self.channels, 1, -1)
        for cell in self.cells:
            flat = cell(flat)
        return flat.reshape_as(transposed).transpose(0, 1)

    def cdf(self, x: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.logits_cumulative(x))

    def likelihood(self, symbols: torch.Tensor) -> torch.Tensor:
        upper = self.logits_cumulative(symbols + 0.5)
        lower = self.logits_cumulative(symbols - 0.5)
        # Differences are taken in the left tail of the sigmoid where they are precise.
        sign = -torch.sign(upper + lower).detach()
        return torch.abs(torch.sigmoid(sign * upper) - torch.sigmoid(sign * lower))


@dataclass(frozen=True)
class HyperFeatures:
    """Hyper-synthesis output split into the mean and scale halves."""
    means: torch.Tensor
    scales: torch.Tensor


@dataclass
class SliceState:
    index: int
    decoded_slices: list[torch.Tensor]
    hyper_features: HyperFeatures


@dataclass
class EntropyOutput:
    y_hat: torch.Tensor
    z_hat: torch.Tensor
    bits_y: torch.Tensor
    bits_z: torch.Tensor
    params: list[GaussianParams] = field(default_factory=list)


class HyperAnalysis(nn.Sequential):
    def __init__(self, m_latent: int, n_filters: int):
        super().__init__(
            conv(m_latent, n_filters, 3, stride=1),
            nn.LeakyReLU(inplace=True),
            conv(n_filters, n_filters, 5),
            nn.LeakyReLU(inplace=True),
            conv(n_filters, n_filters, 5),
        )


class HyperSynthesis(nn.Sequential):
    def __init__(self, m_latent: int, n_filters: int):
        super().__init__(
            deconv(n_filters, m_latent, 5),
            nn.LeakyReLU(inplace=True),
            deconv(m_latent, m_latent * 3 // 2, 5),
            nn.LeakyReLU(inplace=True),
            conv(m_latent * 3 // 2, 2 * m_latent, 3, stride=1),
        )


def _slice_transform(in_channels: int, hidden: int, out_channels: int) -> nn.Sequential:
    return nn.Sequential(
        conv(in_channels, hidden, 3, stride=1),
        nn.GELU(),
        conv(hidden, hidden // 2, 3, stride=1),
        nn.GELU(),
        conv(hidden // 2, out_channels, 3, stride=1),
    )


class ChannelAutoregressiveModel(nn.Module):
    """Slice-wise Gaussian parameters conditioned on hyper features and earlier slices.

    Each slice j gets a mean transform, a scale transform and a latent residual
    predictor fed with (hyper means, decoded slices < j, mu_j, quantized slice).
    """

    def __init__(self, m_latent: int, s_slices: int, sigma_min: float = SIGMA_MIN):
        super().__init__()
        if m_latent % s_slices:
            raise ParameterError(f"m_latent ({m_latent}) must be divisible by s_slices ({s_slices})")
        self.m_latent = m_latent
        self.s_slices = s_slices
        self.slice_channels = m_latent // s_slices
        self.sigma_min = sigma_min
        hidden = min(224, max(32, m_latent))
        sl = self.slice_channels
        self.mean_transforms = nn.ModuleList(
            _slice_transform(m_latent + sl * j, hidden, sl) for j in range(s_slices)
        )
        self.scale_transforms = nn.ModuleList(
            _slice_transform(m_latent + sl * j, hidden, sl) for j in range(s_slices)
        )
        self.lrp_transforms = nn.ModuleList(
            _slice_transform(m_latent + sl * (j + 2), hidden, sl) for j in range(s_slices)
        )

    def _check_state(self, state: SliceState) -> None:
        if not 0 <= state.index < self.s_slices:
            raise ContractError(f"slice index {state.index} outside [0, {self.s_slices})")
        if len(state.decoded_slices) != state.index:
            raise ContractError(
                f"slice {state.index} requested with {len(state.decoded_slices)} decoded slices; "
                "slices must be processed strictly in order"
            )

    def slice_params(self, state: SliceState) -> GaussianParams:
        """Gaussian parameters of slice `state.index`."""
        self._check_state(state)
        features = state.hyper_features
        mean_support = torch.cat([features.means, *state.decoded_slices], dim=1)
        scale_support = torch.cat([features.scales, *state.decoded_slices], dim=1)
        mu = self.mean_transforms[state.index](mean_support)
        sigma = lower_bound(self.scale_transforms[state.index](scale_support), self.sigma_min)
        return GaussianParams(mu=mu, sigma=sigma, sigma_min=self.sigma_min)

    def lrp_apply(self, state: SliceState, mu: torch.Tensor, q_slice: torch.Tensor) -> torch.Tensor:
        """Add the bounded residual prediction 0.5·tanh(.) to the quantized slice."""
        self._check_state(state)
        support = torch.cat([state.hyper_features.means, *state.decoded_slices, mu, q_slice], dim=1)
        residual = 0.5 * torch.tanh(self.lrp_transforms[state.index](support))
        return q_slice + residual

    def forward(self, y: torch.Tensor, features: HyperFeatures) -> tuple[torch.Tensor, torch.Tensor, list[GaussianParams]]:
        decoded: list[torch.Tensor] = []
        all_params: list[GaussianParams] = []
        bits = y.new_zeros(())
        for index, y_slice in enumerate(y.chunk(self.s_slices, dim=1)):
            state = SliceState(index=index, decoded_slices=list(decoded), hyper_features=features)
            params = self.slice_params(state)
            if self.training:
                residual = noise_quantize(y_slice) - params.mu
            else:
                residual = torch.round(y_slice - params.mu)
            bits = bits + gaussian_rate(residual, params)
            q_slice = ste_round(y_slice, params.mu)
            decoded.append(self.lrp_apply(state, params.mu, q_slice))
            all_params.append(params)
        return torch.cat(decoded, dim=1), bits, all_params


class ConditionalEntropyModel(nn.Module):
    """Hyperprior + factorized prior on z + channel-autoregressive Gaussian model on y."""

    def __init__(self, m_latent: int, n_filters: int, s_slices: int, sigma_min: float = SIGMA_MIN):
        super().__init__()
        self.m_latent = m_latent
        self.n_filters = n_filters
        self.hyper_analysis = HyperAnalysis(m_latent, n_filters)
        self.hyper_synthesis = HyperSynthesis(m_latent, n_filters)
        self.prior = FactorizedPrior(n_filters)
        self.char = ChannelAutoregressiveModel(m_latent, s_slices, sigma_min)

    def hyper_encode(self, y: torch.Tensor) -> torch.Tensor:
        if y.dim() != 4 or y.shape[1] != self.m_latent:
            raise ParameterError(f"expected B×{self.m_latent}×h×w latent, got {tuple(y.shape)}")
        if y.shape[-1] % 4 or y.shape[-2] % 4:
            raise ParameterError(f"latent size {tuple(y.shape[-2:])} must be divisible by 4")
        return self.hyper_analysis(y)

    def hyper_decode(self, z_hat: torch.Tensor) -> HyperFeatures:
        features = self.hyper_synthesis(z_hat)
        means, scales = features.chunk(2, dim=1)
        return HyperFeatures(means=means, scales=scales)

    def forward(self, y: torch.Tensor) -> EntropyOutput:
        z = self.hyper_encode(y)
        if self.training:
            bits_z = factorized_rate(noise_quantize(z), self.prior)
            z_hat = ste_round(z)
        else:
            z_hat = torch.round(z)
            bits_z = factorized_rate(z_hat, self.prior)
        features = self.hyper_decode(z_hat)
        y_hat, bits_y, params = self.char(y, features)
        return EntropyOutput(y_hat=y_hat, z_hat=z_hat, bits_y=bits_y, bits_z=bits_z, params=params)
