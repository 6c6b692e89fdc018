import json
import tempfile
import unittest
from pathlib import Path

import numpy as np

from ddvc.codec.errors import FormatError, ParameterError
from ddvc.codec.eval.report import (
    RDCurve,
    RDPoint,
    build_report,
    evaluate_frames,
    load_report,
    per_video_report,
    write_report,
)
from ddvc.codec.types import Frame


def _points(scale: float = 1.0, offset: float = 0.0) -> list[RDPoint]:
    rates = [0.05, 0.1, 0.2, 0.4]
    psnrs = [29.0, 31.0, 33.5, 35.5]
    ssims = [0.90, 0.93, 0.95, 0.97]
    return [
        RDPoint(bpp=rate * scale, psnr=value + offset, msssim=ssim, label=f"q{index}")
        for index, (rate, value, ssim) in enumerate(zip(rates, psnrs, ssims))
    ]


class TestRDReport(unittest.TestCase):
    def test_bd_against_anchor(self):
        # Verifies every non-anchor curve gets one BD entry per quality metric.
        curves = [RDCurve(name="classic", points=_points()), RDCurve(name="deep", points=_points(scale=0.5))]
        report = build_report(curves, anchor="classic")
        self.assertEqual([(entry.test, entry.metric) for entry in report.bd], [("deep", "psnr"), ("deep", "msssim_db")])
        self.assertAlmostEqual(report.bd[0].bd_rate, -50.0, places=6)

    def test_short_curve_skipped(self):
        # Verifies curves with too few points are left out of the BD table.
        curves = [RDCurve(name="a", points=_points()), RDCurve(name="b", points=_points()[:2])]
        self.assertEqual(build_report(curves, anchor="a").bd, [])

    def test_missing_anchor(self):
        # Verifies an unknown anchor run is a parameter error naming the available runs.
        with self.assertRaises(ParameterError) as ctx:
            build_report([RDCurve(name="deep", points=_points())], anchor="hevc")
        self.assertIn("deep", str(ctx.exception))

    def test_write_and_load(self):
        # Verifies the JSON report, CSV and both SVG plots are written and the JSON reloads.
        curves = [RDCurve(name="classic", points=_points()), RDCurve(name="deep", points=_points(offset=1.0))]
        report = build_report(curves, anchor="classic")
        with tempfile.TemporaryDirectory() as tmp:
            paths = write_report(report, tmp)
            for key in ("json", "csv", "psnr", "msssim_db"):
                self.assertTrue(paths[key].is_file(), key)
            loaded = load_report(paths["json"])
            raw = json.loads(paths["json"].read_text(encoding="utf-8"))
            rows = paths["csv"].read_text(encoding="utf-8").splitlines()
        self.assertEqual(loaded, report)
        self.assertEqual(raw["schema_version"], 1)
        self.assertEqual(len(rows), 1 + 8)
        self.assertAlmostEqual(raw["curves"][0]["points"][0]["msssim_db"], 10.0, places=6)

    def test_schema_mismatch(self):
        # Verifies a report with another schema version is refused.
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "report.json"
            path.write_text(json.dumps({"schema_version": 99, "anchor": "a", "curves": []}), encoding="utf-8")
            with self.assertRaises(FormatError):
                load_report(path)


class TestPerVideo(unittest.TestCase):
    def test_anchor_bars_at_hundred(self):
        # Verifies the anchor's own bars read 100% and a codec at half the rate reads 50%.
        runs = {
            "hevc": {"seqA": _points(), "seqB": _points()},
            "deep": {"seqA": _points(scale=0.5), "seqB": _points()},
        }
        with tempfile.TemporaryDirectory() as tmp:
            report = per_video_report(runs, anchor="hevc", out_dir=tmp)
            self.assertTrue((Path(tmp) / "per_video.svg").is_file())
            self.assertTrue((Path(tmp) / "per_video.json").is_file())
        bars = {(bar.codec, bar.sequence): bar.relative_size for bar in report.bars}
        self.assertEqual(bars[("hevc", "seqA")], 100.0)
        self.assertEqual(bars[("deep", "seqB")], 100.0)
        self.assertAlmostEqual(bars[("deep", "seqA")], 50.0, places=6)

    def test_missing_anchor_run(self):
        # Verifies a missing anchor codec is refused.
        with self.assertRaises(ParameterError):
            per_video_report({"deep": {"seqA": _points()}}, anchor="hevc")

    def test_missing_anchor_sequence(self):
        # Verifies a sequence the anchor never coded is refused.
        runs = {"hevc": {"seqA": _points()}, "deep": {"seqB": _points()}}
        with self.assertRaises(ParameterError):
            per_video_report(runs, anchor="hevc")


class TestEvaluateFrames(unittest.TestCase):
    def test_identical_sequence(self):
        # Verifies identical sequences reach the caps and keep the supplied rate.
        rng = np.random.default_rng(0)
        frames = [Frame(pixels=rng.random((64, 64, 3)).astype(np.float32), index=i) for i in (1, 2)]
        quality = evaluate_frames(frames, frames, bpp=0.25)
        self.assertEqual(quality.psnr, 100.0)
        self.assertAlmostEqual(quality.msssim, 1.0, places=9)
        self.assertEqual(quality.rd_point("x").bpp, 0.25)

    def test_length_mismatch_and_missing_rate(self):
        # Verifies unequal frame counts are refused and a rate-less result has no RD point.
        frame = Frame(pixels=np.zeros((16, 16, 3), dtype=np.float32))
        with self.assertRaises(ParameterError):
            evaluate_frames([frame], [])
        with self.assertRaises(ParameterError):
            evaluate_frames([frame], [frame]).rd_point()
