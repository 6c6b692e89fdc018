import math
import unittest

import torch

from ddvc.codec.errors import InvariantViolation, ParameterError
from ddvc.codec.layers import GDN, GDNParams, backward_warp, gdn, noise_quantize, ste_round


class TestGdn(unittest.TestCase):
    def test_identity_denominator(self):
        # Verifies beta=1 and gamma=0 leave the input unchanged.
        params = GDNParams(beta=torch.ones(1), gamma=torch.zeros(1, 1))
        out = gdn(torch.full((1, 2, 2), 3.0), params)
        self.assertTrue(torch.allclose(out, torch.full((1, 2, 2), 3.0)))

    def test_zero_input(self):
        # Verifies zero input maps to zero in both directions.
        params = GDNParams(beta=torch.full((3,), 0.5), gamma=torch.rand(3, 3))
        for inverse in (False, True):
            self.assertTrue(torch.equal(gdn(torch.zeros(3, 4, 4), params, inverse=inverse), torch.zeros(3, 4, 4)))

    def test_two_channel_hand_value(self):
        # Verifies beta=(1,1), gamma=ones and x=(1,1) give 1/sqrt(3) per channel.
        params = GDNParams(beta=torch.ones(2), gamma=torch.ones(2, 2))
        out = gdn(torch.ones(2, 1, 1), params)
        self.assertTrue(torch.allclose(out, torch.full((2, 1, 1), 1.0 / math.sqrt(3.0))))
        inverse = gdn(torch.ones(2, 1, 1), params, inverse=True)
        self.assertTrue(torch.allclose(inverse, torch.full((2, 1, 1), math.sqrt(3.0))))

    def test_monotone_in_own_channel(self):
        # Verifies the forward map is increasing in x_i for a small self-coupling.
        params = GDNParams(beta=torch.ones(2), gamma=torch.tensor([[0.01, 0.1], [0.1, 0.01]]))
        xs = torch.linspace(-3.0, 3.0, 61)
        x = torch.stack([xs, torch.full_like(xs, 0.7)]).view(2, 1, 61)
        out = gdn(x, params)[0, 0]
        self.assertTrue(bool((out[1:] > out[:-1]).all()))

    def test_non_positive_beta_rejected(self):
        # Verifies a non-positive beta is an invariant violation.
        params = GDNParams(beta=torch.tensor([0.0]), gamma=torch.zeros(1, 1))
        with self.assertRaises(InvariantViolation):
            gdn(torch.ones(1, 2, 2), params)

    def test_layer_floors_beta(self):
        # Verifies the learnable layer keeps beta at or above beta_min and gamma non-negative.
        layer = GDN(4)
        with torch.no_grad():
            layer.beta_raw.zero_()
            layer.gamma_raw.fill_(-0.5)
        params = layer.params()
        self.assertGreaterEqual(float(params.beta.min()), layer.beta_min)
        self.assertGreaterEqual(float(params.gamma.min()), 0.0)
        self.assertTrue(torch.isfinite(layer(torch.rand(1, 4, 8, 8))).all())

    def test_channel_mismatch_rejected(self):
        # Verifies inputs whose channel count differs from the parameters are refused.
        params = GDNParams(beta=torch.ones(2), gamma=torch.zeros(2, 2))
        with self.assertRaises(ParameterError):
            gdn(torch.ones(3, 2, 2), params)


class TestBackwardWarp(unittest.TestCase):
    def test_zero_flow_is_identity(self):
        # Verifies zero flow returns the image unchanged.
        image = torch.rand(3, 8, 8)
        out = backward_warp(image, torch.zeros(2, 8, 8))
        self.assertTrue(torch.allclose(out, image, atol=1e-6))

    def test_constant_image(self):
        # Verifies a constant image stays constant under any flow.
        image = torch.full((1, 6, 6), 0.4)
        out = backward_warp(image, torch.randn(2, 6, 6) * 3.0)
        self.assertTrue(torch.allclose(out, image, atol=1e-6))

    def test_ramp_shift(self):
        # Verifies flow (+1, 0) shifts a horizontal ramp by one pixel with a clamped border column.
        ramp = torch.arange(8, dtype=torch.float32).repeat(8, 1).unsqueeze(0) / 8.0
        flow = torch.zeros(2, 8, 8)
        flow[0] = 1.0
        out = backward_warp(ramp, flow)
        self.assertTrue(torch.allclose(out[..., :-1], ramp[..., 1:], atol=1e-5))
        self.assertTrue(torch.allclose(out[..., -1], ramp[..., -1], atol=1e-5))

    def test_gradients_match_finite_differences(self):
        # Verifies analytic gradients in image and flow against central differences.
        torch.manual_seed(0)
        image = torch.rand(1, 1, 8, 8, dtype=torch.float64, requires_grad=True)
        flow = (0.2 + 0.25 * torch.rand(1, 2, 8, 8, dtype=torch.float64)).requires_grad_(True)
        self.assertTrue(torch.autograd.gradcheck(backward_warp, (image, flow), eps=1e-6, atol=1e-5, rtol=1e-3))

    def test_flow_shape_mismatch(self):
        # Verifies a flow field of the wrong size is refused.
        with self.assertRaises(ParameterError):
            backward_warp(torch.rand(3, 8, 8), torch.zeros(2, 4, 4))


class TestQuantizers(unittest.TestCase):
    def test_ste_round_values(self):
        # Verifies Round(y - mu) + mu on hand-picked values.
        self.assertAlmostEqual(float(ste_round(torch.tensor(1.3), torch.tensor(0.5))), 1.5, places=6)
        self.assertEqual(float(ste_round(torch.tensor(-0.2))), 0.0)
        y = torch.tensor([0.75, -1.25])
        self.assertTrue(torch.equal(ste_round(y, y), y))

    def test_ste_round_bound_and_gradient(self):
        # Verifies |out - y| <= 0.5, integral offsets from mu and identity gradient in y.
        y = (torch.randn(100) * 4.0).requires_grad_(True)
        mu = torch.randn(100)
        out = ste_round(y, mu)
        self.assertLessEqual(float((out - y).abs().max()), 0.5 + 1e-6)
        offset = (out - mu).detach()
        self.assertTrue(torch.allclose(offset, offset.round(), atol=1e-5))
        out.sum().backward()
        self.assertTrue(torch.equal(y.grad, torch.ones(100)))

    def test_noise_quantize_seeded(self):
        # Verifies the same generator seed gives the same noisy output.
        y = torch.zeros(50)
        a = noise_quantize(y, torch.Generator().manual_seed(3))
        b = noise_quantize(y, torch.Generator().manual_seed(3))
        self.assertTrue(torch.equal(a, b))

    def test_noise_quantize_range_and_mean(self):
        # Verifies noise lies in [-0.5, 0.5) and averages to zero over many draws.
        y = torch.zeros(100_000)
        noise = noise_quantize(y, torch.Generator().manual_seed(0)) - y
        self.assertGreaterEqual(float(noise.min()), -0.5)
        self.assertLess(float(noise.max()), 0.5)
        self.assertLess(abs(float(noise.mean())), 0.01)
