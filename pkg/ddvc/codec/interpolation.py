"""Decoder-side side information: hierarchical GOP schedule and two-reference interpolation.

The interpolation network estimates flows F_{t->0}, F_{t->1} and a fusion map M
with three coarse-to-fine blocks, merges the backward-warped references as
M * warp(I0, F_{t->0}) + (1 - M) * warp(I1, F_{t->1}) and adds a bounded
residual from a context-aware U-Net.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from ddvc.codec.errors import ParameterError
from ddvc.codec.layers import backward_warp
from ddvc.codec.types import ScheduleEntry
from ddvc.codec.utils.logging import get_logger


logger = get_logger("ddvc")

BLOCK_SCALES = (4, 2, 1)


def gop_schedule(key0: int, key1: int) -> list[ScheduleEntry]:
    """Hierarchical midpoint order between two decoded key frames.

    Midpoints use floor((a + b) / 2); intervals are expanded breadth-first so
    every entry's references are decoded before it is reached.
    """
    entries: list[ScheduleEntry] = []
    pending = deque([(key0, key1)])
    while pending:
        low, high = pending.popleft()
        if high <= low + 1:
            continue
        middle = (low + high) // 2
        entries.append(ScheduleEntry(target=middle, ref0=low, ref1=high))
        pending.append((low, middle))
        pending.append((middle, high))
    return entries


def schedule_depths(entries: list[ScheduleEntry]) -> list[list[ScheduleEntry]]:
    """Group entries into barriers: entries of one group depend only on earlier groups."""
    decoded_at: dict[int, int] = {}
    groups: list[list[ScheduleEntry]] = []
    for entry in entries:
        depth = max(decoded_at.get(entry.ref0, -1), decoded_at.get(entry.ref1, -1)) + 1
        decoded_at[entry.target] = depth
        while len(groups) <= depth:
            groups.append([])
        groups[depth].append(entry)
    return groups


def fuse_warped(
    image0: torch.Tensor,
    image1: torch.Tensor,
    flow_t0: torch.Tensor,
    flow_t1: torch.Tensor,
    fusion: torch.Tensor,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Blend the two backward-warped references with fusion map `fusion` in [0,1].

    Returns (merged, warped0, warped1).
    """
    warped0 = backward_warp(image0, flow_t0)
    warped1 = backward_warp(image1, flow_t1)
    merged = fusion * warped0 + (1.0 - fusion) * warped1
    return merged, warped0, warped1


def _resize(x: torch.Tensor, size: tuple[int, int]) -> torch.Tensor:
    if tuple(x.shape[-2:]) == tuple(size):
        return x
    return F.interpolate(x, size=size, mode="bilinear", align_corners=False)


def _conv_act(in_channels: int, out_channels: int, stride: int = 1) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(in_channels, out_channels, 3, stride=stride, padding=1),
        nn.PReLU(out_channels),
    )


class IFBlock(nn.Module):
    """One flow/fusion refinement step working at 1/scale resolution.

    Outputs 5 channels (flow_t0, flow_t1, fusion logit) at full resolution;
    flows are expressed in full-resolution pixels.
    """

    def __init__(self, in_channels: int, channels: int, scale: int):
        super().__init__()
        self.scale = scale
        self.encode = nn.Sequential(
            _conv_act(in_channels, channels // 2, stride=2),
            _conv_act(channels // 2, channels),
        )
        self.body = nn.Sequential(*(_conv_act(channels, channels) for _ in range(4)))
        self.head = nn.ConvTranspose2d(channels, 5, 4, stride=2, padding=1)
        nn.init.zeros_(self.head.weight)
        nn.init.zeros_(self.head.bias)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        size = tuple(x.shape[-2:])
        low = (max(1, size[0] // self.scale), max(1, size[1] // self.scale))
        features = self.encode(_resize(x, low))
        features = features + self.body(features)
        out = _resize(self.head(features), size)
        return out[:, :4] * self.scale, out[:, 4:5]


@dataclass
class InterpolationOutput:
    """Flows, fusion map and the merged frame of one interpolation call."""
    flow_t0: torch.Tensor
    flow_t1: torch.Tensor
    fusion: torch.Tensor
    merged: torch.Tensor
    warped0: torch.Tensor
    warped1: torch.Tensor


def _time_map(t: float | torch.Tensor, like: torch.Tensor) -> torch.Tensor:
    batch, _, height, width = like.shape
    t = torch.as_tensor(t, dtype=like.dtype, device=like.device)
    if t.dim() == 0:
        t = t.expand(batch)
    if t.numel() != batch:
        raise ParameterError(f"{t.numel()} time steps for a batch of {batch}")
    if float(t.min()) < 0.0 or float(t.max()) > 1.0:
        raise ParameterError(f"time step must lie in [0, 1], got {t.tolist()}")
    return t.view(batch, 1, 1, 1).expand(batch, 1, height, width)


class IFNet(nn.Module):
    """Coarse-to-fine flow estimation with blocks at downsample factors 4, 2, 1."""

    def __init__(self, channels: int = 64, scales: tuple[int, ...] = BLOCK_SCALES):
        super().__init__()
        first = 3 + 3 + 1
        refine = 3 + 3 + 3 + 3 + 1 + 1 + 4
        self.blocks = nn.ModuleList(
            IFBlock(first if i == 0 else refine, channels, scale) for i, scale in enumerate(scales)
        )

    def forward(self, image0: torch.Tensor, image1: torch.Tensor, t: float | torch.Tensor) -> InterpolationOutput:
        if image0.shape != image1.shape or image0.dim() != 4 or image0.shape[1] != 3:
            raise ParameterError(f"references must be B×3×H×W and equal, got {tuple(image0.shape)}, {tuple(image1.shape)}")
        time = _time_map(t, image0)
        flow = None
        logit = None
        warped0, warped1 = image0, image1
        for index, block in enumerate(self.blocks):
            if index == 0:
                delta_flow, delta_logit = block(torch.cat([image0, image1, time], dim=1))
                flow, logit = delta_flow, delta_logit
            else:
                block_input = torch.cat([image0, image1, warped0, warped1, time, logit, flow], dim=1)
                delta_flow, delta_logit = block(block_input)
                flow, logit = flow + delta_flow, logit + delta_logit
            warped0 = backward_warp(image0, flow[:, :2])
            warped1 = backward_warp(image1, flow[:, 2:4])
        fusion = torch.sigmoid(logit)
        merged, warped0, warped1 = fuse_warped(image0, image1, flow[:, :2], flow[:, 2:4], fusion)
        return InterpolationOutput(
            flow_t0=flow[:, :2],
            flow_t1=flow[:, 2:4],
            fusion=fusion,
            merged=merged,
            warped0=warped0,
            warped1=warped1,
        )


class ContextPyramid(nn.Module):
    """Four stride-2 feature levels of one reference, each warped by the matching flow."""

    def __init__(self, channels: int):
        super().__init__()
        widths = (channels, 2 * channels, 4 * channels, 8 * channels)
        self.levels = nn.ModuleList(
            nn.Sequential(_conv_act(3 if i == 0 else widths[i - 1], widths[i], stride=2), _conv_act(widths[i], widths[i]))
            for i in range(len(widths))
        )

    def forward(self, image: torch.Tensor, flow: torch.Tensor) -> list[torch.Tensor]:
        features = []
        x = image
        for level in self.levels:
            x = level(x)
            ratio = x.shape[-1] / flow.shape[-1]
            level_flow = _resize(flow, tuple(x.shape[-2:])) * ratio
            features.append(backward_warp(x, level_flow))
        return features


class RefineNet(nn.Module):
    """U-Net predicting the residual Delta in [-1, 1] from references, warps and context."""

    def __init__(self, channels: int = 16):
        super().__init__()
        c = channels
        self.context0 = ContextPyramid(c)
        self.context1 = ContextPyramid(c)
        inputs = 3 * 4 + 1 + 4
        self.down0 = _conv_act(inputs, 2 * c, stride=2)
        self.down1 = _conv_act(2 * c + 2 * c, 4 * c, stride=2)
        self.down2 = _conv_act(4 * c + 4 * c, 8 * c, stride=2)
        self.down3 = _conv_act(8 * c + 8 * c, 16 * c, stride=2)
        self.up0 = nn.ConvTranspose2d(16 * c + 16 * c, 8 * c, 4, stride=2, padding=1)
        self.up1 = nn.ConvTranspose2d(8 * c + 8 * c, 4 * c, 4, stride=2, padding=1)
        self.up2 = nn.ConvTranspose2d(4 * c + 4 * c, 2 * c, 4, stride=2, padding=1)
        self.up3 = nn.ConvTranspose2d(2 * c + 2 * c, c, 4, stride=2, padding=1)
        self.head = nn.Conv2d(c, 3, 3, padding=1)
        nn.init.zeros_(self.head.weight)
        nn.init.zeros_(self.head.bias)

    def residual(self, image0: torch.Tensor, image1: torch.Tensor, interp: InterpolationOutput) -> torch.Tensor:
        height, width = image0.shape[-2:]
        if height % 16 or width % 16:
            raise ParameterError(f"refinement needs sizes divisible by 16, got {height}×{width}")
        ctx0 = self.context0(image0, interp.flow_t0)
        ctx1 = self.context1(image1, interp.flow_t1)
        x = torch.cat(
            [image0, image1, interp.warped0, interp.warped1, interp.fusion, interp.flow_t0, interp.flow_t1],
            dim=1,
        )
        s0 = self.down0(x)
        s1 = self.down1(torch.cat([s0, ctx0[0], ctx1[0]], dim=1))
        s2 = self.down2(torch.cat([s1, ctx0[1], ctx1[1]], dim=1))
        s3 = self.down3(torch.cat([s2, ctx0[2], ctx1[2]], dim=1))
        x = self.up0(torch.cat([s3, ctx0[3], ctx1[3]], dim=1))
        x = self.up1(torch.cat([x, s2], dim=1))
        x = self.up2(torch.cat([x, s1], dim=1))
        x = self.up3(torch.cat([x, s0], dim=1))
        return torch.tanh(self.head(x))

    def forward(self, image0: torch.Tensor, image1: torch.Tensor, interp: InterpolationOutput) -> torch.Tensor:
        return torch.clamp(interp.merged + self.residual(image0, image1, interp), 0.0, 1.0)


@dataclass
class SideInformation:
    frame: torch.Tensor
    interp: InterpolationOutput
    ref0: torch.Tensor
    ref1: torch.Tensor


class SideInfoGenerator(nn.Module):
    """IFNet + RefineNet producing the SI frame x̄ for a target between two references."""

    def __init__(self, channels: int = 64):
        super().__init__()
        self.ifnet = IFNet(channels)
        self.refine = RefineNet(max(8, channels // 4))

    def forward(self, image0: torch.Tensor, image1: torch.Tensor, t: float | torch.Tensor) -> SideInformation:
        interp = self.ifnet(image0, image1, t)
        return SideInformation(frame=self.refine(image0, image1, interp), interp=interp, ref0=image0, ref1=image1)

    def for_entry(self, decoded: dict[int, torch.Tensor], entry: ScheduleEntry) -> SideInformation:
        """SI for one schedule entry, falling back to the nearest decoded frame for missing references."""
        image0 = decoded.get(entry.ref0)
        image1 = decoded.get(entry.ref1)
        t: float | torch.Tensor = entry.t
        if image0 is None or image1 is None:
            if not decoded:
                raise ParameterError(f"frame {entry.target}: no decoded frame available for side information")
            nearest = min(decoded, key=lambda index: (abs(index - entry.target), index))
            logger.warning(
                f"frame={entry.target} event=si_fallback ref0={entry.ref0} ref1={entry.ref1} nearest={nearest}"
            )
            image0 = image1 = decoded[nearest]
        return self(image0, image1, t)
