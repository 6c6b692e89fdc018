"""Training triplets: procedurally textured synthetic motion and Vimeo-style folders."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image
from scipy import ndimage
from torch.utils.data import Dataset, Subset, random_split

from ddvc.codec.config import MOTIONS
from ddvc.codec.errors import FormatError, ParameterError
from ddvc.codec.utils.logging import get_logger


logger = get_logger("ddvc")

Triplet = tuple[torch.Tensor, torch.Tensor, torch.Tensor]

ROTATE_DEGREES = 3.0
ZOOM_STEP = 0.04
_DIRECTIONS = ((0, 1), (1, 0), (1, 1), (0, -1), (-1, 0), (-1, -1), (1, -1), (-1, 1))


def _texture(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    """3×H×W texture: smooth noise at two scales plus a few flat rectangles."""
    coarse = ndimage.gaussian_filter(rng.random((3, height, width)), sigma=(0, 6, 6))
    fine = ndimage.gaussian_filter(rng.random((3, height, width)), sigma=(0, 1.5, 1.5))
    texture = coarse + 0.5 * fine
    for _ in range(int(rng.integers(3, 7))):
        h, w = int(rng.integers(height // 10, height // 3)), int(rng.integers(width // 10, width // 3))
        top, left = int(rng.integers(0, height - h)), int(rng.integers(0, width - w))
        texture[:, top:top + h, left:left + w] = rng.random((3, 1, 1)) * texture.max()
    texture -= texture.min(axis=(1, 2), keepdims=True)
    texture /= np.maximum(texture.max(axis=(1, 2), keepdims=True), 1e-8)
    return texture.astype(np.float32)


def _affine_frames(canvas: torch.Tensor, size: int, angles: list[float], scales: list[float]) -> torch.Tensor:
    """Centre crops of `canvas` after rotating/zooming it about its centre."""
    frames = []
    for angle, scale in zip(angles, scales):
        radians = math.radians(angle)
        cos, sin = math.cos(radians) / scale, math.sin(radians) / scale
        theta = torch.tensor([[cos, -sin, 0.0], [sin, cos, 0.0]], dtype=torch.float32).unsqueeze(0)
        grid = F.affine_grid(theta, list(canvas.shape), align_corners=False)
        warped = F.grid_sample(canvas, grid, mode="bilinear", padding_mode="reflection", align_corners=False)
        top = (canvas.shape[-2] - size) // 2
        left = (canvas.shape[-1] - size) // 2
        frames.append(warped[0, :, top:top + size, left:left + size])
    return torch.stack(frames).clamp(0.0, 1.0)


class SyntheticTriplets(Dataset):
    """In-memory (ref0, target, ref1) triplets; `motions[i]` is the per-frame motion of triplet i."""

    def __init__(self, frames: torch.Tensor, motions: list[tuple[float, ...]], motion: str):
        self.frames = frames
        self.motions = motions
        self.motion = motion

    def __len__(self) -> int:
        return int(self.frames.shape[0])

    def __getitem__(self, index: int) -> Triplet:
        ref0, target, ref1 = self.frames[index]
        return ref0, target, ref1


def make_synthetic_dataset(n: int, size: int = 64, motion: str = "translate", seed: int = 0, shift: int = 2) -> SyntheticTriplets:
    """Generate `n` seed-fixed triplets of size×size frames.

    translate: frame k is the window displaced by k·shift pixels along a
    random direction, so the target is the exact midpoint. rotate and zoom
    apply ∓ROTATE_DEGREES / ∓ZOOM_STEP around the target.
    """
    if size % 64 != 0 or size <= 0:
        raise ParameterError(f"size must be a positive multiple of 64, got {size}")
    if motion not in MOTIONS:
        raise ParameterError(f"motion must be one of {MOTIONS}, got {motion!r}")
    if n <= 0:
        raise ParameterError(f"triplet count must be positive, got {n}")
    rng = np.random.default_rng(seed)
    margin = 2 * abs(shift) if motion == "translate" else size // 2
    frames = torch.empty(n, 3, 3, size, size)
    motions: list[tuple[float, ...]] = []
    for index in range(n):
        canvas = _texture(rng, size + 2 * margin, size + 2 * margin)
        if motion == "translate":
            dy, dx = _DIRECTIONS[int(rng.integers(len(_DIRECTIONS)))]
            dy, dx = dy * shift, dx * shift
            for k in range(3):
                top, left = margin + (k - 1) * dy, margin + (k - 1) * dx
                frames[index, k] = torch.from_numpy(canvas[:, top:top + size, left:left + size])
            motions.append((float(dy), float(dx)))
        else:
            tensor = torch.from_numpy(canvas).unsqueeze(0)
            if motion == "rotate":
                step = float(rng.uniform(0.5, 1.0)) * ROTATE_DEGREES * float(rng.choice([-1.0, 1.0]))
                frames[index] = _affine_frames(tensor, size, [-step, 0.0, step], [1.0, 1.0, 1.0])
            else:
                step = float(rng.uniform(0.5, 1.0)) * ZOOM_STEP
                frames[index] = _affine_frames(tensor, size, [0.0, 0.0, 0.0], [1.0 - step, 1.0, 1.0 + step])
            motions.append((step,))
    logger.info(f"event=synthetic_dataset n={n} size={size} motion={motion} seed={seed}")
    return SyntheticTriplets(frames, motions, motion)


class FolderTripletDataset(Dataset):
    """Triplets laid out as `<root>/sequences/<clip>/<n>/im{1,2,3}.png`, randomly cropped."""

    def __init__(self, root: str | Path, crop: int = 256, seed: int = 0):
        self.root = Path(root)
        self.crop = crop
        self.seed = seed
        self.items = sorted(path for path in (self.root / "sequences").glob("*/*") if (path / "im3.png").is_file())
        if not self.items:
            raise FormatError(f"no triplets found under {self.root / 'sequences'}")
        self._epoch = 0

    def __len__(self) -> int:
        return len(self.items)

    def set_epoch(self, epoch: int) -> None:
        self._epoch = epoch

    def _load(self, path: Path) -> np.ndarray:
        with Image.open(path) as image:
            return np.asarray(image.convert("RGB"), dtype=np.float32).transpose(2, 0, 1) / 255.0

    def __getitem__(self, index: int) -> Triplet:
        folder = self.items[index]
        images = [self._load(folder / f"im{k}.png") for k in (1, 2, 3)]
        height, width = images[0].shape[1:]
        if any(image.shape != images[0].shape for image in images):
            raise FormatError(f"triplet {folder} mixes frame sizes")
        if height < self.crop or width < self.crop:
            raise FormatError(f"triplet {folder} is {width}x{height}, smaller than crop {self.crop}")
        rng = np.random.default_rng([self.seed, self._epoch, index])
        top = int(rng.integers(0, height - self.crop + 1))
        left = int(rng.integers(0, width - self.crop + 1))
        ref0, target, ref1 = (
            torch.from_numpy(np.ascontiguousarray(image[:, top:top + self.crop, left:left + self.crop]))
            for image in images
        )
        return ref0, target, ref1


def split_dataset(dataset: Dataset, val_fraction: float = 0.1, seed: int = 0) -> tuple[Subset, Subset]:
    """Seed-fixed train/validation split with at least one triplet on each side."""
    total = len(dataset)
    if total < 2:
        raise ParameterError(f"need at least 2 triplets to split, got {total}")
    val = min(total - 1, max(1, round(total * val_fraction)))
    generator = torch.Generator().manual_seed(seed)
    train_part, val_part = random_split(dataset, [total - val, val], generator=generator)
    return train_part, val_part
