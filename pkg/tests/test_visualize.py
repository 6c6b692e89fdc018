import tempfile
import unittest
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from ddvc.codec.eval.visualize import MID_GRAY, channel_image, visualize_latents
from ddvc.codec.types import LatentOrigin, LatentTensor


class TestChannelImage(unittest.TestCase):
    def test_min_max_normalization(self):
        # Verifies the minimum maps to 0 and the maximum to 255.
        image = channel_image(np.array([[-2.0, 0.0], [1.0, 2.0]]))
        self.assertEqual(image.dtype, np.uint8)
        self.assertEqual(image.tolist(), [[0, 128], [191, 255]])

    def test_constant_channel(self):
        # Verifies a constant channel becomes mid-gray.
        self.assertTrue(np.all(channel_image(np.full((3, 3), 7.5)) == MID_GRAY))


class TestVisualizeLatents(unittest.TestCase):
    def test_one_png_per_channel(self):
        # Verifies a 64-channel latent writes 64 grayscale PNGs named after its origin.
        latent = LatentTensor(values=torch.randn(1, 64, 4, 4), origin=LatentOrigin.WZ)
        with tempfile.TemporaryDirectory() as tmp:
            paths = visualize_latents(latent, tmp)
            self.assertEqual(len(paths), 64)
            self.assertEqual(paths[0].name, "wz_ch000.png")
            with Image.open(paths[5]) as image:
                self.assertEqual(image.mode, "L")
                self.assertEqual(image.size, (4, 4))

    def test_constant_channel_file(self):
        # Verifies a zero channel is stored as a uniform 128 image.
        values = torch.randn(2, 4, 4)
        values[1] = 0.0
        with tempfile.TemporaryDirectory() as tmp:
            paths = visualize_latents(values, tmp, prefix="si")
            pixels = np.asarray(Image.open(paths[1]))
        self.assertTrue(np.all(pixels == 128))

    def test_deterministic_output(self):
        # Verifies the same latent writes byte-identical files.
        values = torch.randn(3, 4, 4)
        with tempfile.TemporaryDirectory() as first, tempfile.TemporaryDirectory() as second:
            a = [p.read_bytes() for p in visualize_latents(values, first)]
            b = [p.read_bytes() for p in visualize_latents(values, Path(second))]
        self.assertEqual(a, b)
