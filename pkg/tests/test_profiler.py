import unittest

import numpy as np
import torch
import torch.nn as nn

from ddvc.codec.config import CodecConfig
from ddvc.codec.errors import ParameterError
from ddvc.codec.eval.profiler import MOTION_STAGES, UNTAGGED, Profiler, build_report, conv_flops, profile_deep, profile_runs
from ddvc.codec.model import DistributedVideoCodec
from ddvc.codec.types import Frame, VideoSequence


class TestConvFlops(unittest.TestCase):
    def test_three_by_three_single_channel(self):
        # Verifies a 3×3 1→1 conv with an 8×8 output costs 1152 FLOPs.
        self.assertEqual(conv_flops(nn.Conv2d(1, 1, 3), (1, 1, 10, 10), (1, 1, 8, 8)), 1152)

    def test_batch_and_groups(self):
        # Verifies FLOPs scale with batch size and divide by the group count.
        conv = nn.Conv2d(4, 4, 3, groups=2)
        self.assertEqual(conv_flops(conv, (2, 4, 10, 10), (2, 4, 8, 8)), 2 * 2 * 9 * 2 * 4 * 64)

    def test_transposed_counts_input_grid(self):
        # Verifies a transposed conv is counted over its input positions.
        conv = nn.ConvTranspose2d(1, 1, 3, stride=2)
        self.assertEqual(conv_flops(conv, (1, 1, 8, 8), (1, 1, 17, 17)), 1152)


class TestProfiler(unittest.TestCase):
    def test_hooks_book_flops_per_stage(self):
        # Verifies conv calls are booked to the active stage and untagged calls to "other".
        model = nn.Conv2d(1, 1, 3)
        profiler = Profiler()
        x = torch.zeros(1, 1, 10, 10)
        with profiler.attached(model):
            with profiler.stage("analysis"):
                model(x)
            model(x)
        model(x)
        self.assertEqual(profiler.flops["analysis"], 1152)
        self.assertEqual(profiler.flops[UNTAGGED], 1152)
        self.assertGreaterEqual(profiler.seconds["analysis"], 0.0)

    def test_report_contains_motion_stages(self):
        # Verifies motion stages are always listed, at zero, and totals equal the stage sums.
        report = build_report("deep", "encoder", {"analysis": 100, "other": 5}, [{"analysis": 0.002}], frames=1)
        for name in MOTION_STAGES:
            self.assertEqual(report.stage(name).flops, 0)
        self.assertEqual(report.total_flops, 105)
        self.assertEqual(report.total_flops, sum(stage.flops for stage in report.stages))
        self.assertAlmostEqual(report.stage("analysis").latency_ms, 2.0)

    def test_latency_is_median(self):
        # Verifies per-stage latency is the median over runs.
        runs = [{"analysis": 0.001}, {"analysis": 0.010}, {"analysis": 0.002}]
        report = build_report("deep", "encoder", {}, runs, frames=1)
        self.assertAlmostEqual(report.stage("analysis").latency_ms, 2.0)

    def test_runs_must_be_positive(self):
        # Verifies zero runs are refused.
        with self.assertRaises(ParameterError):
            profile_runs(nn.Conv2d(1, 1, 3), lambda profiler: None, "deep", "encoder", 1, runs=0)

    def test_flops_from_first_run(self):
        # Verifies FLOPs are counted once even over several runs.
        model = nn.Conv2d(1, 1, 3)
        x = torch.zeros(1, 1, 10, 10)

        def action(profiler):
            with profiler.stage("analysis"):
                model(x)

        report = profile_runs(model, action, "deep", "encoder", 1, runs=3)
        self.assertEqual(report.stage("analysis").flops, 1152)
        self.assertEqual(report.runs, 3)


class TestDeepComplexity(unittest.TestCase):
    def test_motion_free_encoder(self):
        # Verifies the deep encoder spends nothing on motion and less than its decoder.
        torch.manual_seed(0)
        model = DistributedVideoCodec(CodecConfig(n_filters=32, m_latent=64, s_slices=8, ifnet_channels=16))
        rng = np.random.default_rng(0)
        frames = [Frame(pixels=rng.random((64, 64, 3)).astype(np.float32), index=i) for i in range(1, 4)]
        encoder, decoder = profile_deep(model, VideoSequence(frames=frames), gop=2, runs=1)
        for name in MOTION_STAGES:
            self.assertEqual(encoder.stage(name).flops, 0)
        self.assertNotIn("side_information", [stage.name for stage in encoder.stages])
        self.assertGreater(decoder.stage("side_information").flops, 0)
        self.assertLess(encoder.total_flops, decoder.total_flops)
        self.assertEqual(encoder.total_flops, sum(stage.flops for stage in encoder.stages))
