"""Raw video ingestion, BT.601 colour conversion and GOP splitting.

Internal representation: `Frame.pixels` is an H×W×3 float32 RGB array in
[0,1]. YUV420p input is 8-bit full-range BT.601; chroma is upsampled by
pixel replication and downsampled by 2×2 averaging.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from PIL import Image

from ddvc.codec.errors import FormatError, ParameterError
from ddvc.codec.types import Frame, GOPView, VideoSequence
from ddvc.codec.utils.logging import get_logger


logger = get_logger("ddvc")

PAD_MULTIPLE = 64

# Full-range BT.601 RGB -> YCbCr (offsets of 0.5 applied to the chroma rows).
RGB_TO_YCBCR = np.array(
    [
        [0.299, 0.587, 0.114],
        [-0.168736, -0.331264, 0.5],
        [0.5, -0.418688, -0.081312],
    ],
    dtype=np.float64,
)
YCBCR_TO_RGB = np.linalg.inv(RGB_TO_YCBCR)


def yuv420_to_rgb(y: np.ndarray, u: np.ndarray, v: np.ndarray, index: int = 1) -> Frame:
    """Convert full-range YUV420 planes in [0,1] to an RGB frame."""
    if y.ndim != 2 or u.ndim != 2 or v.ndim != 2:
        raise ParameterError("planes must be 2-D")
    height, width = y.shape
    if height % 2 or width % 2:
        raise ParameterError(f"YUV420 needs even dimensions, got {width}x{height}")
    if u.shape != (height // 2, width // 2) or v.shape != u.shape:
        raise ParameterError(
            f"chroma planes must be {(height // 2, width // 2)}, got {u.shape} and {v.shape}"
        )
    cb = np.repeat(np.repeat(u.astype(np.float64), 2, axis=0), 2, axis=1)
    cr = np.repeat(np.repeat(v.astype(np.float64), 2, axis=0), 2, axis=1)
    ycc = np.stack([y.astype(np.float64), cb - 0.5, cr - 0.5], axis=-1)
    rgb = ycc @ YCBCR_TO_RGB.T
    return Frame(pixels=np.clip(rgb, 0.0, 1.0).astype(np.float32), index=index)


def rgb_to_yuv420(frame: Frame) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Convert an RGB frame to full-range YUV420 planes in [0,1]."""
    if frame.height % 2 or frame.width % 2:
        raise ParameterError(f"YUV420 needs even dimensions, got {frame.width}x{frame.height}")
    ycc = frame.pixels.astype(np.float64) @ RGB_TO_YCBCR.T
    y = ycc[..., 0]
    chroma = ycc[..., 1:] + 0.5
    h2, w2 = frame.height // 2, frame.width // 2
    chroma = chroma.reshape(h2, 2, w2, 2, 2).mean(axis=(1, 3))
    return (
        np.clip(y, 0.0, 1.0),
        np.clip(chroma[..., 0], 0.0, 1.0),
        np.clip(chroma[..., 1], 0.0, 1.0),
    )


def _read_yuv420p(path: Path, width: int, height: int, max_frames: int | None) -> list[Frame]:
    if width <= 0 or height <= 0 or width % 2 or height % 2:
        raise ParameterError(f"yuv420p needs positive even width/height, got {width}x{height}")
    data = np.fromfile(path, dtype=np.uint8)
    frame_size = width * height * 3 // 2
    if data.size == 0:
        raise FormatError(f"no frames in {path}")
    if data.size % frame_size != 0:
        raise FormatError(
            f"truncated yuv420p file {path}: {data.size} bytes is not a multiple of "
            f"{frame_size} ({width}x{height})"
        )
    available = data.size // frame_size
    count = available if max_frames is None else min(available, max_frames)
    luma = width * height
    quarter = luma // 4
    frames = []
    for i in range(count):
        chunk = data[i * frame_size:(i + 1) * frame_size].astype(np.float64) / 255.0
        y = chunk[:luma].reshape(height, width)
        u = chunk[luma:luma + quarter].reshape(height // 2, width // 2)
        v = chunk[luma + quarter:].reshape(height // 2, width // 2)
        frames.append(yuv420_to_rgb(y, u, v, index=i + 1))
    return frames


def _read_png_dir(path: Path, max_frames: int | None) -> list[Frame]:
    files = sorted(path.glob("*.png"))
    if not files:
        raise FormatError(f"no frames in {path}")
    if max_frames is not None:
        files = files[:max_frames]
    frames = []
    size = None
    for i, file in enumerate(files):
        with Image.open(file) as image:
            rgb = np.asarray(image.convert("RGB"), dtype=np.float32) / 255.0
        if size is None:
            size = rgb.shape
        elif rgb.shape != size:
            raise FormatError(
                f"mixed-resolution PNG sequence: {file.name} is {rgb.shape[1]}x{rgb.shape[0]}, "
                f"expected {size[1]}x{size[0]}"
            )
        frames.append(Frame(pixels=rgb, index=i + 1))
    return frames


def read_sequence(
    path: str | Path,
    fmt: str = "png-dir",
    width: int | None = None,
    height: int | None = None,
    max_frames: int | None = None,
) -> VideoSequence:
    """Read a yuv420p file or a directory of PNG frames in display order.

    Args:
        path: File (yuv420p) or directory (png-dir).
        fmt: "yuv420p" or "png-dir".
        width: Luma width, required for yuv420p.
        height: Luma height, required for yuv420p.
        max_frames: Read at most this many frames.

    Raises:
        FormatError: Missing input, truncated YUV, no frames, mixed PNG sizes.
    """
    path = Path(path)
    if not path.exists():
        raise FormatError(f"input not found: {path}")
    if max_frames is not None and max_frames <= 0:
        raise ParameterError(f"max_frames must be positive, got {max_frames}")

    if fmt == "yuv420p":
        if width is None or height is None:
            raise ParameterError("yuv420p input needs width and height")
        frames = _read_yuv420p(path, width, height, max_frames)
    elif fmt == "png-dir":
        if not path.is_dir():
            raise FormatError(f"png-dir input must be a directory: {path}")
        frames = _read_png_dir(path, max_frames)
    else:
        raise ParameterError(f"unknown input format {fmt!r}")

    logger.info(f"source={path} event=sequence_loaded frames={len(frames)} size={frames[0].width}x{frames[0].height}")
    return VideoSequence(frames=frames, source=str(path))


def write_png_dir(frames: list[Frame], out_dir: str | Path) -> list[Path]:
    """Write frames as `%06d.png` (display index) into `out_dir`."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for frame in frames:
        target = out_dir / f"{frame.index:06d}.png"
        Image.fromarray(to_uint8(frame.pixels)).save(target)
        written.append(target)
    return written


def write_yuv420p(frames: list[Frame], path: str | Path) -> Path:
    """Write frames as a raw 8-bit yuv420p file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as handle:
        for frame in frames:
            for plane in rgb_to_yuv420(frame):
                handle.write(to_uint8(plane).tobytes())
    return path


def to_uint8(values: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(values * 255.0), 0, 255).astype(np.uint8)


def split_gops(seq: VideoSequence | int, n: int) -> list[GOPView]:
    """Split a sequence into GOPs with keys at 1, N+1, 2N+1, ...

    When the tail GOP has no following key frame, the last frame becomes a key
    so every WZ frame is interpolated between two references.
    """
    if n < 2:
        raise ParameterError(f"GOP size must be at least 2, got {n}")
    count = seq if isinstance(seq, int) else len(seq)
    if count <= 0:
        return []

    keys = list(range(1, count + 1, n))
    if keys[-1] != count:
        keys.append(count)

    views = []
    for position, key in enumerate(keys):
        next_key = keys[position + 1] if position + 1 < len(keys) else None
        upper = next_key if next_key is not None else key + 1
        views.append(GOPView(key_index=key, wz_indices=tuple(range(key + 1, upper)), next_key_index=next_key))
    return views


def key_indices(count: int, n: int) -> list[int]:
    return [view.key_index for view in split_gops(count, n)]


def pad_to_multiple(x: torch.Tensor, multiple: int = PAD_MULTIPLE) -> tuple[torch.Tensor, tuple[int, int]]:
    """Reflect-pad a B×C×H×W tensor on the bottom/right to a multiple of `multiple`.

    Returns the padded tensor and the original (H, W).
    """
    height, width = int(x.shape[-2]), int(x.shape[-1])
    pad_h = (-height) % multiple
    pad_w = (-width) % multiple
    if pad_h == 0 and pad_w == 0:
        return x, (height, width)
    array = np.pad(
        x.detach().cpu().numpy(),
        ((0, 0), (0, 0), (0, pad_h), (0, pad_w)),
        mode="reflect" if min(height, width) > 1 else "edge",
    )
    return torch.from_numpy(array).to(x.dtype), (height, width)


def crop_to(x: torch.Tensor, size: tuple[int, int]) -> torch.Tensor:
    height, width = size
    return x[..., :height, :width]
