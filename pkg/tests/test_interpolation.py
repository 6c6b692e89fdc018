import unittest
from fractions import Fraction

import torch

from ddvc.codec.errors import ParameterError
from ddvc.codec.interpolation import IFNet, SideInfoGenerator, fuse_warped, gop_schedule, schedule_depths
from ddvc.codec.layers import backward_warp
from ddvc.codec.types import ScheduleEntry


class TestGopSchedule(unittest.TestCase):
    def test_gop_eight_order(self):
        # Verifies keys (1, 9) give the dyadic order 5, 3, 7, 2, 4, 6, 8 with matching references.
        entries = gop_schedule(1, 9)
        self.assertEqual(
            [(e.target, e.ref0, e.ref1) for e in entries],
            [(5, 1, 9), (3, 1, 5), (7, 5, 9), (2, 1, 3), (4, 3, 5), (6, 5, 7), (8, 7, 9)],
        )
        self.assertTrue(all(e.t == 0.5 for e in entries))

    def test_single_entry(self):
        # Verifies keys (1, 3) give one entry at t=0.5.
        self.assertEqual(gop_schedule(1, 3), [ScheduleEntry(target=2, ref0=1, ref1=3)])

    def test_odd_span(self):
        # Verifies keys (1, 4) use floor midpoints with exact t values.
        entries = gop_schedule(1, 4)
        self.assertEqual([(e.target, e.ref0, e.ref1) for e in entries], [(2, 1, 4), (3, 2, 4)])
        self.assertEqual(entries[0].t_exact, Fraction(1, 3))
        self.assertEqual(entries[1].t, 0.5)

    def test_adjacent_keys_empty(self):
        # Verifies adjacent or reversed keys give an empty schedule.
        self.assertEqual(gop_schedule(1, 2), [])
        self.assertEqual(gop_schedule(5, 5), [])

    def test_schedule_validity_for_all_gops(self):
        # Verifies completeness, uniqueness and reference order for GOP sizes 2..16.
        for n in range(2, 17):
            with self.subTest(n=n):
                entries = gop_schedule(1, 1 + n)
                targets = [e.target for e in entries]
                self.assertEqual(sorted(targets), list(range(2, 1 + n)))
                decoded = {1, 1 + n}
                for entry in entries:
                    self.assertIn(entry.ref0, decoded)
                    self.assertIn(entry.ref1, decoded)
                    decoded.add(entry.target)

    def test_depth_groups(self):
        # Verifies entries are grouped into depth barriers 1, 2 and 4 wide for GOP 8.
        groups = schedule_depths(gop_schedule(1, 9))
        self.assertEqual([[e.target for e in group] for group in groups], [[5], [3, 7], [2, 4, 6, 8]])

    def test_entry_order_checked(self):
        # Verifies an entry whose target is outside its references is refused.
        with self.assertRaises(ParameterError):
            ScheduleEntry(target=1, ref0=1, ref1=3)


class TestFusion(unittest.TestCase):
    def test_equal_references_half_fusion(self):
        # Verifies M=0.5 with equal references and zero flow returns the reference exactly.
        x = torch.rand(1, 3, 8, 8)
        zero = torch.zeros(1, 2, 8, 8)
        merged, _, _ = fuse_warped(x, x.clone(), zero, zero, torch.full((1, 1, 8, 8), 0.5))
        self.assertTrue(torch.allclose(merged, x, atol=1e-6))

    def test_full_fusion_selects_first_warp(self):
        # Verifies M=1 returns the backward warp of the first reference exactly.
        image0, image1 = torch.rand(1, 3, 8, 8), torch.rand(1, 3, 8, 8)
        flow0 = torch.randn(1, 2, 8, 8)
        flow1 = torch.randn(1, 2, 8, 8)
        merged, warped0, _ = fuse_warped(image0, image1, flow0, flow1, torch.ones(1, 1, 8, 8))
        self.assertTrue(torch.equal(merged, warped0))
        self.assertTrue(torch.equal(warped0, backward_warp(image0, flow0)))


class TestSideInfoGenerator(unittest.TestCase):
    def setUp(self):
        torch.manual_seed(0)
        self.generator = SideInfoGenerator(channels=16).eval()

    def test_zero_initialized_heads(self):
        # Verifies fresh networks give zero flow, M=0.5 and x̄ = clamp of the blended references.
        image0, image1 = torch.rand(1, 3, 64, 64), torch.rand(1, 3, 64, 64)
        with torch.no_grad():
            side = self.generator(image0, image1, 0.0)
        self.assertTrue(torch.equal(side.interp.flow_t0, torch.zeros_like(side.interp.flow_t0)))
        self.assertTrue(torch.allclose(side.interp.fusion, torch.full_like(side.interp.fusion, 0.5)))
        self.assertTrue(torch.allclose(side.frame, 0.5 * (image0 + image1), atol=1e-5))

    def test_constant_references(self):
        # Verifies equal constant references interpolate to that constant.
        image = torch.full((1, 3, 64, 64), 0.3)
        with torch.no_grad():
            interp = self.generator.ifnet(image, image.clone(), 0.25)
        self.assertTrue(torch.allclose(interp.merged, image, atol=1e-5))

    def test_output_range(self):
        # Verifies the SI frame stays in [0, 1] with perturbed residual weights.
        with torch.no_grad():
            for parameter in self.generator.refine.head.parameters():
                parameter.normal_(0.0, 1.0)
            side = self.generator(torch.rand(1, 3, 64, 64), torch.rand(1, 3, 64, 64), 0.5)
        self.assertGreaterEqual(float(side.frame.min()), 0.0)
        self.assertLessEqual(float(side.frame.max()), 1.0)

    def test_missing_reference_falls_back(self):
        # Verifies a missing reference is replaced by the nearest decoded frame.
        decoded = {1: torch.rand(1, 3, 64, 64), 9: torch.rand(1, 3, 64, 64)}
        with torch.no_grad():
            side = self.generator.for_entry(decoded, ScheduleEntry(target=7, ref0=5, ref1=9))
        self.assertIs(side.ref0, decoded[9])
        self.assertIs(side.ref1, decoded[9])

    def test_no_decoded_frames(self):
        # Verifies side information without any decoded frame is a parameter error.
        with self.assertRaises(ParameterError):
            self.generator.for_entry({}, ScheduleEntry(target=2, ref0=1, ref1=3))

    def test_time_step_range(self):
        # Verifies time steps outside [0, 1] are refused.
        net = IFNet(16)
        with self.assertRaises(ParameterError):
            net(torch.rand(1, 3, 16, 16), torch.rand(1, 3, 16, 16), 1.5)
