from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

import numpy as np
import torch

from ddvc.codec.errors import InvariantViolation, ParameterError


class FrameRole(str, Enum):
    """Coding role of a frame inside its GOP."""
    KEY = "key"
    WZ = "wz"

    @property
    def code(self) -> int:
        return 0 if self is FrameRole.KEY else 1

    @classmethod
    def from_code(cls, code: int) -> FrameRole:
        if code == 0:
            return cls.KEY
        if code == 1:
            return cls.WZ
        raise ParameterError(f"unknown frame role code {code}")


class CodecId(str, Enum):
    """Codec identifier stored in the container header."""
    DEEP = "deep"
    CLASSIC = "classic"

    @property
    def code(self) -> int:
        return 0 if self is CodecId.DEEP else 1

    @classmethod
    def from_code(cls, code: int) -> CodecId:
        if code == 0:
            return cls.DEEP
        if code == 1:
            return cls.CLASSIC
        raise ParameterError(f"unknown codec id {code}")


class LatentOrigin(str, Enum):
    WZ = "wz"
    SI = "si"
    HYPER = "hyper"


@dataclass(frozen=True)
class Frame:
    """One RGB picture with values in [0,1], stored H×W×3 float32.

    `index` is the 1-based display number inside its sequence.
    """
    pixels: np.ndarray
    index: int = 1

    def __post_init__(self) -> None:
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise ParameterError(f"frame pixels must be H×W×3, got {self.pixels.shape}")
        if not np.isfinite(self.pixels).all():
            raise ParameterError("frame pixels must be finite")
        if self.pixels.size and (self.pixels.min() < 0.0 or self.pixels.max() > 1.0):
            raise ParameterError(
                f"frame values must lie in [0,1], got [{self.pixels.min()}, {self.pixels.max()}]"
            )

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    def to_tensor(self) -> torch.Tensor:
        """Return a 1×3×H×W float32 tensor."""
        return torch.from_numpy(np.ascontiguousarray(self.pixels.transpose(2, 0, 1))).float().unsqueeze(0)

    @classmethod
    def from_tensor(cls, tensor: torch.Tensor, index: int = 1) -> Frame:
        """Build a frame from a 3×H×W or 1×3×H×W tensor, clamping to [0,1]."""
        if tensor.dim() == 4:
            if tensor.shape[0] != 1:
                raise ParameterError(f"expected a single frame, got batch of {tensor.shape[0]}")
            tensor = tensor[0]
        array = tensor.detach().clamp(0.0, 1.0).cpu().numpy().transpose(1, 2, 0)
        return cls(pixels=np.ascontiguousarray(array, dtype=np.float32), index=index)


@dataclass
class VideoSequence:
    """Frames in display order plus the source they were read from."""
    frames: list[Frame]
    source: str = ""

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def width(self) -> int:
        return self.frames[0].width if self.frames else 0

    @property
    def height(self) -> int:
        return self.frames[0].height if self.frames else 0

    def frame(self, index: int) -> Frame:
        """Return the frame with 1-based display number `index`."""
        return self.frames[index - 1]


@dataclass(frozen=True)
class GOPView:
    key_index: int
    wz_indices: tuple[int, ...]
    next_key_index: int | None


@dataclass(frozen=True)
class LatentTensor:
    """C×h×w latent (a leading batch axis of 1 is allowed) tagged with its origin."""
    values: torch.Tensor
    origin: LatentOrigin

    @property
    def channels(self) -> int:
        return int(self.values.shape[-3])

    @property
    def spatial(self) -> tuple[int, int]:
        return int(self.values.shape[-2]), int(self.values.shape[-1])


@dataclass(frozen=True)
class GaussianParams:
    """Per-element mean and scale of the conditional Gaussian model."""
    mu: torch.Tensor
    sigma: torch.Tensor
    sigma_min: float = 0.11

    def __post_init__(self) -> None:
        if self.mu.shape != self.sigma.shape:
            raise ParameterError(f"mu {tuple(self.mu.shape)} and sigma {tuple(self.sigma.shape)} differ")
        if self.sigma.numel() and float(self.sigma.min()) < self.sigma_min - 1e-6:
            raise InvariantViolation(
                f"sigma {float(self.sigma.min()):.4g} below sigma_min {self.sigma_min}"
            )


@dataclass(frozen=True)
class ScheduleEntry:
    """One interpolation step: decode `target` from `ref0` and `ref1`."""
    target: int
    ref0: int
    ref1: int

    def __post_init__(self) -> None:
        if not self.ref0 < self.target < self.ref1:
            raise ParameterError(f"need ref0 < target < ref1, got {self.ref0}, {self.target}, {self.ref1}")

    @property
    def t_exact(self) -> Fraction:
        return Fraction(self.target - self.ref0, self.ref1 - self.ref0)

    @property
    def t(self) -> float:
        return float(self.t_exact)


@dataclass
class EncodedFrame:
    """Coded form of one frame: its role and the ordered sub-stream payloads."""
    index: int
    role: FrameRole
    streams: list[bytes] = field(default_factory=list)

    @property
    def payload_bytes(self) -> int:
        return sum(len(stream) for stream in self.streams)
