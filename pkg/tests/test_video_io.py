import tempfile
import unittest
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from ddvc.codec.errors import FormatError, ParameterError
from ddvc.codec.types import Frame, VideoSequence
from ddvc.codec.video_io import (
    crop_to,
    key_indices,
    pad_to_multiple,
    read_sequence,
    rgb_to_yuv420,
    split_gops,
    write_png_dir,
    write_yuv420p,
    yuv420_to_rgb,
)


def _write_pngs(directory: Path, count: int, size: tuple[int, int] = (32, 32)) -> None:
    rng = np.random.default_rng(0)
    for index in range(count):
        pixels = rng.integers(0, 256, (size[1], size[0], 3), dtype=np.uint8)
        Image.fromarray(pixels).save(directory / f"{index + 1:06d}.png")


class TestColorConversion(unittest.TestCase):
    def test_neutral_chroma_is_gray(self):
        # Verifies Y=0.5 with neutral chroma maps to mid gray.
        y = np.full((4, 4), 0.5)
        u = np.full((2, 2), 0.5)
        frame = yuv420_to_rgb(y, u, u.copy())
        np.testing.assert_allclose(frame.pixels, 0.5, atol=1e-6)

    def test_black_planes_give_zero_frame(self):
        # Verifies all-zero luma with neutral chroma yields an all-zero frame.
        frame = yuv420_to_rgb(np.zeros((2, 2)), np.full((1, 1), 0.5), np.full((1, 1), 0.5))
        np.testing.assert_allclose(frame.pixels, 0.0, atol=1e-6)

    def test_known_sample_matches_bt601(self):
        # Verifies a 2×2 sample against the full-range BT.601 inverse matrix applied by hand.
        y = np.full((2, 2), 0.5)
        u = np.full((1, 1), 0.5)
        v = np.full((1, 1), 0.75)
        frame = yuv420_to_rgb(y, u, v)
        expected = np.array([0.5 + 1.402 * 0.25, 0.5 - 0.714136 * 0.25, 0.5])
        np.testing.assert_allclose(frame.pixels[0, 0], expected, atol=1e-4)

    def test_round_trip_within_one_code(self):
        # Verifies yuv -> rgb -> yuv stays within 1/255 per sample.
        rng = np.random.default_rng(1)
        y = rng.uniform(0.3, 0.7, (8, 8))
        u = rng.uniform(0.4, 0.6, (4, 4))
        v = rng.uniform(0.4, 0.6, (4, 4))
        y2, u2, v2 = rgb_to_yuv420(yuv420_to_rgb(y, u, v))
        for before, after in ((y, y2), (u, u2), (v, v2)):
            self.assertLessEqual(float(np.abs(before - after).max()), 1.0 / 255.0)

    def test_odd_dimensions_rejected(self):
        # Verifies YUV420 conversion needs even dimensions.
        with self.assertRaises(ParameterError):
            yuv420_to_rgb(np.zeros((3, 4)), np.zeros((1, 2)), np.zeros((1, 2)))


class TestReadSequence(unittest.TestCase):
    def test_yuv_file_frame_count(self):
        # Verifies an 8-frame 64×64 yuv420p file reads as 8 frames of 64×64.
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "clip.yuv"
            path.write_bytes(bytes(8 * 64 * 64 * 3 // 2))
            seq = read_sequence(path, fmt="yuv420p", width=64, height=64)
        self.assertEqual(len(seq), 8)
        self.assertEqual((seq.width, seq.height), (64, 64))
        self.assertEqual([frame.index for frame in seq.frames], list(range(1, 9)))

    def test_truncated_yuv_raises(self):
        # Verifies a yuv file that is not a whole number of frames is a format error.
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "clip.yuv"
            path.write_bytes(bytes(64 * 64 * 3 // 2 + 10))
            with self.assertRaises(FormatError):
                read_sequence(path, fmt="yuv420p", width=64, height=64)

    def test_empty_directory_raises(self):
        # Verifies an empty PNG directory reports that there are no frames.
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(FormatError) as ctx:
                read_sequence(tmp)
        self.assertIn("no frames", str(ctx.exception))

    def test_png_dir_respects_max_frames(self):
        # Verifies a 3-frame PNG directory read with max_frames=2 returns 2 frames.
        with tempfile.TemporaryDirectory() as tmp:
            _write_pngs(Path(tmp), 3)
            seq = read_sequence(tmp, max_frames=2)
        self.assertEqual(len(seq), 2)

    def test_mixed_resolution_raises(self):
        # Verifies PNG sequences with differing frame sizes are refused.
        with tempfile.TemporaryDirectory() as tmp:
            directory = Path(tmp)
            _write_pngs(directory, 2)
            Image.fromarray(np.zeros((16, 16, 3), dtype=np.uint8)).save(directory / "000003.png")
            with self.assertRaises(FormatError):
                read_sequence(directory)

    def test_missing_input_raises(self):
        # Verifies a path that does not exist is a format error.
        with self.assertRaises(FormatError):
            read_sequence("/nonexistent/ddvc/input")

    def test_png_write_read_is_lossless(self):
        # Verifies 8-bit frames survive a PNG write and read unchanged.
        with tempfile.TemporaryDirectory() as tmp:
            source = Path(tmp) / "src"
            source.mkdir()
            _write_pngs(source, 2)
            seq = read_sequence(source)
            write_png_dir(seq.frames, Path(tmp) / "out")
            again = read_sequence(Path(tmp) / "out")
        for a, b in zip(seq.frames, again.frames):
            np.testing.assert_array_equal(a.pixels, b.pixels)

    def test_yuv_write_read_shape(self):
        # Verifies frames written as yuv420p read back with the same count and size.
        frames = [Frame(pixels=np.full((16, 32, 3), 0.25, dtype=np.float32), index=i + 1) for i in range(3)]
        with tempfile.TemporaryDirectory() as tmp:
            path = write_yuv420p(frames, Path(tmp) / "out.yuv")
            seq = read_sequence(path, fmt="yuv420p", width=32, height=16)
        self.assertEqual(len(seq), 3)
        np.testing.assert_allclose(seq.frames[0].pixels, 0.25, atol=2.0 / 255.0)


class TestSplitGops(unittest.TestCase):
    def _roles(self, count: int, n: int) -> tuple[set[int], set[int]]:
        views = split_gops(count, n)
        keys = {view.key_index for view in views}
        wz = {index for view in views for index in view.wz_indices}
        return keys, wz

    def test_seventeen_frames(self):
        # Verifies 17 frames with N=8 give keys 1, 9 and 17.
        keys, wz = self._roles(17, 8)
        self.assertEqual(keys, {1, 9, 17})
        self.assertEqual(wz, set(range(2, 9)) | set(range(10, 17)))

    def test_nine_frames(self):
        # Verifies 9 frames with N=8 give keys 1 and 9.
        keys, wz = self._roles(9, 8)
        self.assertEqual(keys, {1, 9})
        self.assertEqual(wz, set(range(2, 9)))

    def test_tail_gop_forces_last_key(self):
        # Verifies the final frame becomes a key when the tail GOP has no next key.
        keys, wz = self._roles(12, 8)
        self.assertEqual(keys, {1, 9, 12})
        self.assertEqual(wz, set(range(2, 9)) | {10, 11})

    def test_every_frame_has_one_role(self):
        # Verifies keys and WZ frames partition the sequence for a range of sizes.
        for count in range(1, 30):
            for n in (2, 3, 4, 8):
                with self.subTest(count=count, n=n):
                    keys, wz = self._roles(count, n)
                    self.assertFalse(keys & wz)
                    self.assertEqual(keys | wz, set(range(1, count + 1)))

    def test_accepts_sequence(self):
        # Verifies split_gops works on a VideoSequence as well as a count.
        frames = [Frame(pixels=np.zeros((4, 4, 3), dtype=np.float32), index=i + 1) for i in range(5)]
        self.assertEqual(key_indices(5, 4), [view.key_index for view in split_gops(VideoSequence(frames), 4)])

    def test_small_gop_rejected(self):
        # Verifies N < 2 is a parameter error.
        with self.assertRaises(ParameterError):
            split_gops(8, 1)


class TestPadding(unittest.TestCase):
    def test_pad_then_crop_is_identity(self):
        # Verifies reflective padding to 64 is removed exactly by cropping.
        x = torch.rand(1, 3, 50, 70)
        padded, size = pad_to_multiple(x)
        self.assertEqual(tuple(padded.shape[-2:]), (64, 128))
        self.assertTrue(torch.equal(crop_to(padded, size), x))

    def test_padding_reflects(self):
        # Verifies the padded rows mirror the rows above the bottom edge.
        x = torch.rand(1, 1, 62, 64)
        padded, _ = pad_to_multiple(x)
        self.assertTrue(torch.equal(padded[..., 62, :], x[..., 60, :]))

    def test_aligned_input_untouched(self):
        # Verifies an input already at a multiple of 64 is returned as is.
        x = torch.rand(1, 3, 64, 64)
        padded, size = pad_to_multiple(x)
        self.assertIs(padded, x)
        self.assertEqual(size, (64, 64))
