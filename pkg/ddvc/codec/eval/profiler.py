"""Per-stage FLOPs and latency of codec runs.

Convolution FLOPs are counted analytically through forward hooks:
2·k²·(C_in/groups)·C_out·H_out·W_out per sample for Conv2d, and the same
count taken over the input grid for ConvTranspose2d. Work that runs
outside any tagged stage is booked under "other".
"""

from __future__ import annotations

import contextlib
import statistics
import time
from collections import defaultdict
from typing import Callable, Iterator

import torch.nn as nn
from pydantic import BaseModel, Field

from ddvc.codec.errors import ParameterError
from ddvc.codec.model import DistributedVideoCodec
from ddvc.codec.types import VideoSequence
from ddvc.codec.utils.logging import get_logger


logger = get_logger("ddvc")

MOTION_STAGES = ("motion_estimation", "motion_compensation", "motion_compression")
UNTAGGED = "other"
MIN_RUNS = 5


def conv_flops(module: nn.Module, input_shape: tuple[int, ...], output_shape: tuple[int, ...]) -> int:
    """Analytic FLOPs of one conv call (multiply and add counted separately)."""
    kh, kw = module.kernel_size
    batch = int(output_shape[0])
    if isinstance(module, nn.ConvTranspose2d):
        h, w = input_shape[-2:]
    else:
        h, w = output_shape[-2:]
    per_sample = 2 * kh * kw * (module.in_channels // module.groups) * module.out_channels * int(h) * int(w)
    return batch * per_sample


class StageCost(BaseModel):
    name: str
    flops: int = Field(..., ge=0)
    latency_ms: float = Field(..., ge=0.0)


class ComplexityReport(BaseModel):
    """Per-stage cost of one side (encoder or decoder) of a codec."""
    codec: str
    side: str
    runs: int
    frames: int
    stages: list[StageCost]
    total_flops: int
    total_latency_ms: float

    def stage(self, name: str) -> StageCost:
        for entry in self.stages:
            if entry.name == name:
                return entry
        raise KeyError(name)


class Profiler:
    """Collects FLOPs and wall-clock time per named stage."""

    def __init__(self) -> None:
        self.flops: dict[str, int] = defaultdict(int)
        self.seconds: dict[str, float] = defaultdict(float)
        self._stack: list[str] = []
        self._handles: list = []

    @property
    def current(self) -> str:
        return self._stack[-1] if self._stack else UNTAGGED

    @contextlib.contextmanager
    def stage(self, name: str) -> Iterator[None]:
        self._stack.append(name)
        start = time.perf_counter()
        try:
            yield
        finally:
            self.seconds[name] += time.perf_counter() - start
            self._stack.pop()

    def _hook(self, module: nn.Module, inputs: tuple, output) -> None:
        self.flops[self.current] += conv_flops(module, tuple(inputs[0].shape), tuple(output.shape))

    @contextlib.contextmanager
    def attached(self, model: nn.Module) -> Iterator[Profiler]:
        """Count conv FLOPs of `model` while the block runs."""
        for module in model.modules():
            if isinstance(module, (nn.Conv2d, nn.ConvTranspose2d)):
                self._handles.append(module.register_forward_hook(self._hook))
        try:
            yield self
        finally:
            for handle in self._handles:
                handle.remove()
            self._handles.clear()

    def reset(self) -> None:
        self.flops.clear()
        self.seconds.clear()


def build_report(codec: str, side: str, flops: dict[str, int], latencies: list[dict[str, float]], frames: int) -> ComplexityReport:
    """Merge FLOPs of one run with median stage latencies over all runs."""
    names = list(MOTION_STAGES)
    for name in list(flops) + [key for run in latencies for key in run]:
        if name not in names:
            names.append(name)
    stages = []
    for name in names:
        samples = [run.get(name, 0.0) for run in latencies] or [0.0]
        stages.append(StageCost(name=name, flops=int(flops.get(name, 0)), latency_ms=1000.0 * statistics.median(samples)))
    return ComplexityReport(
        codec=codec,
        side=side,
        runs=len(latencies),
        frames=frames,
        stages=stages,
        total_flops=sum(stage.flops for stage in stages),
        total_latency_ms=sum(stage.latency_ms for stage in stages),
    )


def profile_runs(
    model: nn.Module,
    action: Callable[[Profiler], object],
    codec: str,
    side: str,
    frames: int,
    runs: int = MIN_RUNS,
) -> ComplexityReport:
    """Run `action` `runs` times; FLOPs come from the first run, latency is the per-stage median."""
    if runs < 1:
        raise ParameterError(f"runs must be positive, got {runs}")
    profiler = Profiler()
    flops: dict[str, int] = {}
    latencies: list[dict[str, float]] = []
    for run in range(runs):
        profiler.reset()
        start = time.perf_counter()
        with profiler.attached(model):
            action(profiler)
        elapsed = time.perf_counter() - start
        tagged = sum(profiler.seconds.values())
        seconds = dict(profiler.seconds)
        seconds[UNTAGGED] = seconds.get(UNTAGGED, 0.0) + max(0.0, elapsed - tagged)
        latencies.append(seconds)
        if run == 0:
            flops = dict(profiler.flops)
    report = build_report(codec, side, flops, latencies, frames)
    logger.info(
        f"codec={codec} side={side} event=profiled runs={runs} flops={report.total_flops} "
        f"latency_ms={report.total_latency_ms:.2f}"
    )
    return report


def profile_deep(model: DistributedVideoCodec, sequence: VideoSequence, gop: int, runs: int = MIN_RUNS) -> tuple[ComplexityReport, ComplexityReport]:
    """Encoder and decoder ComplexityReports of the deep codec on `sequence`."""
    from ddvc.codec.coders.deep import DeepCodec

    data = DeepCodec(model).encode_sequence(sequence, gop)

    def encode(profiler: Profiler) -> None:
        DeepCodec(model, stage=profiler.stage).encode_sequence(sequence, gop)

    def decode(profiler: Profiler) -> None:
        DeepCodec(model, stage=profiler.stage).decode_sequence(data)

    frames = len(sequence)
    return (
        profile_runs(model, encode, "deep", "encoder", frames, runs),
        profile_runs(model, decode, "deep", "decoder", frames, runs),
    )


def profile_classic(model: DistributedVideoCodec, sequence: VideoSequence, gop: int, qi: int = 4, runs: int = MIN_RUNS, **options):
    """Encoder and decoder ComplexityReports of the classic codec plus the feedback transcript of one encode."""
    from ddvc.codec.coders.classic import ClassicCodec

    reference = ClassicCodec(model, qi=qi, **options)
    data = reference.encode_sequence(sequence, gop)

    def encode(profiler: Profiler) -> None:
        ClassicCodec(model, qi=qi, stage=profiler.stage, **options).encode_sequence(sequence, gop)

    def decode(profiler: Profiler) -> None:
        ClassicCodec(model, qi=qi, stage=profiler.stage, **options).decode_sequence(data)

    frames = len(sequence)
    return (
        profile_runs(model, encode, "classic", "encoder", frames, runs),
        profile_runs(model, decode, "classic", "decoder", frames, runs),
        reference.transcript,
    )
