import unittest

from ddvc.codec.errors import ParameterError
from ddvc.codec.eval.bd import bd_quality, bd_rate


RATES = [0.05, 0.1, 0.2, 0.4, 0.8]
PSNR = [28.0, 30.5, 33.0, 35.2, 37.1]


class TestBdRate(unittest.TestCase):
    def test_identical_curves(self):
        # Verifies a curve compared with itself gives exactly zero.
        self.assertEqual(bd_rate(RATES, PSNR, RATES, PSNR), 0.0)
        self.assertEqual(bd_quality(RATES, PSNR, RATES, PSNR), 0.0)

    def test_doubled_rates(self):
        # Verifies doubling every rate at equal quality costs +100%.
        doubled = [2 * r for r in RATES]
        self.assertAlmostEqual(bd_rate(RATES, PSNR, doubled, PSNR), 100.0, places=6)

    def test_reciprocity(self):
        # Verifies swapping anchor and test gives the reciprocal rate ratio.
        test_rates = [0.7 * r for r in RATES]
        forward = bd_rate(RATES, PSNR, test_rates, PSNR)
        backward = bd_rate(test_rates, PSNR, RATES, PSNR)
        self.assertAlmostEqual((1 + forward / 100) * (1 + backward / 100), 1.0, places=9)
        self.assertAlmostEqual(forward, -30.0, places=6)

    def test_quality_offset(self):
        # Verifies a uniform +1 dB shift at equal rates reads as +1 dB BD quality.
        better = [q + 1.0 for q in PSNR]
        self.assertAlmostEqual(bd_quality(RATES, PSNR, RATES, better), 1.0, places=9)

    def test_no_overlap(self):
        # Verifies disjoint quality ranges are refused.
        higher = [q + 20.0 for q in PSNR]
        with self.assertRaises(ParameterError):
            bd_rate(RATES, PSNR, RATES, higher)

    def test_too_few_points(self):
        # Verifies curves with fewer than four points are refused.
        with self.assertRaises(ParameterError):
            bd_rate(RATES[:3], PSNR[:3], RATES, PSNR)

    def test_non_positive_rate(self):
        # Verifies a zero rate is refused before taking logarithms.
        with self.assertRaises(ParameterError):
            bd_rate([0.0] + RATES[1:], PSNR, RATES, PSNR)
