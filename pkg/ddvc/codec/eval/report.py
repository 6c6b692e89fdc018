"""RD reports: versioned JSON, CSV of RD points, SVG RD curves and per-video BDBR bars."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Literal

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from pydantic import BaseModel, Field, computed_field  # noqa: E402

from ddvc.codec.errors import ParameterError  # noqa: E402
from ddvc.codec.eval.bd import MIN_POINTS, bd_quality, bd_rate  # noqa: E402
from ddvc.codec.eval.metrics import ms_ssim, msssim_db, psnr  # noqa: E402
from ddvc.codec.types import Frame  # noqa: E402
from ddvc.codec.utils.json_utils import read_model_json, write_model_json  # noqa: E402
from ddvc.codec.utils.logging import get_logger  # noqa: E402


logger = get_logger("ddvc")

REPORT_SCHEMA_VERSION = 1
QUALITY_METRICS = ("psnr", "msssim_db")


class RDPoint(BaseModel):
    bpp: float = Field(..., ge=0.0)
    psnr: float
    msssim: float = Field(..., ge=0.0, le=1.0)
    label: str = ""

    @computed_field
    @property
    def msssim_db(self) -> float:
        return msssim_db(self.msssim)

    def quality(self, metric: str) -> float:
        if metric not in QUALITY_METRICS:
            raise ParameterError(f"quality metric must be one of {QUALITY_METRICS}, got {metric!r}")
        return self.psnr if metric == "psnr" else self.msssim_db


class RDCurve(BaseModel):
    """RD points of one codec configuration, in increasing rate order."""
    name: str
    points: list[RDPoint]

    def sorted_points(self) -> list[RDPoint]:
        return sorted(self.points, key=lambda point: point.bpp)

    def rates(self) -> list[float]:
        return [point.bpp for point in self.sorted_points()]

    def qualities(self, metric: str) -> list[float]:
        return [point.quality(metric) for point in self.sorted_points()]


class BDEntry(BaseModel):
    test: str
    anchor: str
    metric: str
    bd_rate: float
    bd_quality: float


class RDReport(BaseModel):
    schema_version: Literal[1] = REPORT_SCHEMA_VERSION
    anchor: str
    curves: list[RDCurve]
    bd: list[BDEntry] = Field(default_factory=list)


class VideoBar(BaseModel):
    sequence: str
    codec: str
    bd_rate: float

    @computed_field
    @property
    def relative_size(self) -> float:
        return 100.0 + self.bd_rate


class RunResult(BaseModel):
    """RD results of one codec run: an aggregate curve and optional per-sequence curves."""
    name: str
    points: list[RDPoint] = Field(default_factory=list)
    sequences: dict[str, list[RDPoint]] = Field(default_factory=dict)

    def curve(self) -> RDCurve:
        return RDCurve(name=self.name, points=self.points)


class PerVideoReport(BaseModel):
    schema_version: Literal[1] = REPORT_SCHEMA_VERSION
    anchor: str
    metric: str
    bars: list[VideoBar]


class SequenceQuality(BaseModel):
    """Quality and rate of one decoded sequence."""
    frames: int
    psnr: float
    msssim: float
    msssim_db: float
    bpp: float | None = None
    per_frame_psnr: list[float]
    per_frame_msssim: list[float]

    def rd_point(self, label: str = "") -> RDPoint:
        if self.bpp is None:
            raise ParameterError("sequence quality has no rate; pass the bitstream")
        return RDPoint(bpp=self.bpp, psnr=self.psnr, msssim=self.msssim, label=label)


def evaluate_frames(reference: list[Frame], reconstruction: list[Frame], bpp: float | None = None) -> SequenceQuality:
    if len(reference) != len(reconstruction):
        raise ParameterError(f"{len(reference)} reference frames vs {len(reconstruction)} reconstructed frames")
    if not reference:
        raise ParameterError("no frames to evaluate")
    psnrs = [psnr(a, b) for a, b in zip(reference, reconstruction)]
    ssims = [ms_ssim(a, b) for a, b in zip(reference, reconstruction)]
    mean_ssim = sum(ssims) / len(ssims)
    return SequenceQuality(
        frames=len(reference),
        psnr=sum(psnrs) / len(psnrs),
        msssim=mean_ssim,
        msssim_db=msssim_db(mean_ssim),
        bpp=bpp,
        per_frame_psnr=psnrs,
        per_frame_msssim=ssims,
    )


def _find_anchor(curves: list[RDCurve], anchor: str) -> RDCurve:
    for curve in curves:
        if curve.name == anchor:
            return curve
    names = ", ".join(curve.name for curve in curves) or "none"
    raise ParameterError(f"anchor run '{anchor}' not found (available: {names})")


def build_report(curves: list[RDCurve], anchor: str) -> RDReport:
    """BD metrics of every curve against `anchor` for PSNR and MS-SSIM dB."""
    base = _find_anchor(curves, anchor)
    entries: list[BDEntry] = []
    for curve in curves:
        if curve.name == anchor:
            continue
        if len(curve.points) < MIN_POINTS or len(base.points) < MIN_POINTS:
            logger.warning(f"event=bd_skipped test={curve.name} anchor={anchor} reason=too_few_points")
            continue
        for metric in QUALITY_METRICS:
            args = (base.rates(), base.qualities(metric), curve.rates(), curve.qualities(metric))
            entries.append(
                BDEntry(test=curve.name, anchor=anchor, metric=metric, bd_rate=bd_rate(*args), bd_quality=bd_quality(*args))
            )
    return RDReport(anchor=anchor, curves=curves, bd=entries)


def rd_series(curves: list[RDCurve], metric: str) -> dict[str, tuple[list[float], list[float]]]:
    """(bpp, quality) series per curve, as drawn in the RD plot."""
    return {curve.name: (curve.rates(), curve.qualities(metric)) for curve in curves}


def plot_rd(curves: list[RDCurve], metric: str, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4.5), constrained_layout=True)
    for name, (rates, quality) in rd_series(curves, metric).items():
        ax.plot(rates, quality, marker="o", label=name)
    ax.set_xlabel("bpp")
    ax.set_ylabel("PSNR (dB)" if metric == "psnr" else "MS-SSIM (dB)")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower right", fontsize=8)
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path


def write_report(report: RDReport, out_dir: str | Path) -> dict[str, Path]:
    """Write report.json, rd_points.csv and one SVG RD plot per quality metric."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"json": write_model_json(out / "report.json", report)}
    csv_path = out / "rd_points.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["curve", "label", "bpp", "psnr", "msssim", "msssim_db"])
        for curve in report.curves:
            for point in curve.sorted_points():
                writer.writerow([curve.name, point.label, point.bpp, point.psnr, point.msssim, point.msssim_db])
    paths["csv"] = csv_path
    for metric in QUALITY_METRICS:
        paths[metric] = plot_rd(report.curves, metric, out / f"rd_{metric}.svg")
    logger.info(f"event=report_written dir={out} curves={len(report.curves)} bd_entries={len(report.bd)}")
    return paths


def load_report(path: str | Path) -> RDReport:
    return read_model_json(Path(path), RDReport)


def per_video_report(
    runs: dict[str, dict[str, list[RDPoint]]],
    anchor: str,
    out_dir: str | Path | None = None,
    metric: str = "psnr",
) -> PerVideoReport:
    """Per-sequence BDBR of every codec against `anchor`, drawn as relative-size bars (100% + BDBR).

    `runs` maps codec name to {sequence name: RD points}.
    """
    if anchor not in runs:
        raise ParameterError(f"anchor run '{anchor}' not found (available: {', '.join(runs) or 'none'})")
    bars: list[VideoBar] = []
    for codec, sequences in runs.items():
        for sequence, points in sorted(sequences.items()):
            if sequence not in runs[anchor]:
                raise ParameterError(f"anchor '{anchor}' has no results for sequence '{sequence}'")
            base = RDCurve(name=anchor, points=runs[anchor][sequence])
            test = RDCurve(name=codec, points=points)
            value = bd_rate(base.rates(), base.qualities(metric), test.rates(), test.qualities(metric))
            bars.append(VideoBar(sequence=sequence, codec=codec, bd_rate=value))
    report = PerVideoReport(anchor=anchor, metric=metric, bars=bars)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_model_json(out / "per_video.json", report)
        _plot_bars(report, out / "per_video.svg")
    return report


def _plot_bars(report: PerVideoReport, path: Path) -> Path:
    codecs = sorted({bar.codec for bar in report.bars})
    sequences = sorted({bar.sequence for bar in report.bars})
    width = 0.8 / max(1, len(codecs))
    fig, ax = plt.subplots(figsize=(max(6, 0.8 * len(sequences) + 2), 4), constrained_layout=True)
    for offset, codec in enumerate(codecs):
        values = {bar.sequence: bar.relative_size for bar in report.bars if bar.codec == codec}
        xs = [position + offset * width for position in range(len(sequences))]
        ax.bar(xs, [values.get(sequence, 0.0) for sequence in sequences], width=width, label=codec)
    ax.axhline(100.0, color="black", linewidth=0.8)
    ax.set_xticks([position + 0.4 - width / 2 for position in range(len(sequences))])
    ax.set_xticklabels(sequences, rotation=30, ha="right")
    ax.set_ylabel(f"relative size vs {report.anchor} (%)")
    ax.legend(fontsize=8)
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path


def load_run(path: str | Path) -> RunResult:
    return read_model_json(Path(path), RunResult)
