"""eval and bench subcommands."""

from __future__ import annotations

from typing import Any, Literal

from pydantic import Field

from ddvc.codec.bitstream.container import bit_accounting, parse_container
from ddvc.codec.commands.base import Command, CommonArgs, SequenceArgs
from ddvc.codec.errors import ParameterError
from ddvc.codec.eval.profiler import MIN_RUNS, profile_classic, profile_deep
from ddvc.codec.eval.report import build_report, evaluate_frames, load_run, per_video_report, write_report
from ddvc.codec.utils.json_utils import to_jsonable, write_model_json
from ddvc.codec.video_io import read_sequence


class EvalArgs(CommonArgs):
    ref: str | None = Field(default=None, description="Reference sequence.")
    rec: str | None = Field(default=None, description="Reconstructed sequence.")
    bitstream: str | None = Field(default=None, description="Container of the reconstruction, for bpp.")
    fmt: Literal["png-dir", "yuv420p"] = Field(default="png-dir", description="Format of --ref/--rec.")
    width: int | None = Field(default=None, gt=0, description="Luma width (yuv420p).")
    height: int | None = Field(default=None, gt=0, description="Luma height (yuv420p).")
    runs: list[str] = Field(default_factory=list, description="Run result JSON files to compare.")
    anchor: str | None = Field(default=None, description="Name of the BD anchor run.")
    per_video: bool = Field(default=False, description="Also write per-sequence BDBR bars.")
    label: str = Field(default="", description="Label stored with the RD point.")
    out: str | None = Field(default=None, description="Output directory.")


class EvalCommand(Command):
    name = "eval"
    description = "Measure PSNR/MS-SSIM/bpp of a reconstruction, or build an RD report from run files."
    ArgsModel = EvalArgs

    def run(self, args: EvalArgs) -> dict[str, Any]:
        config = self.run_config(args)
        out = self.run_dir(args.out, self.name, config)
        if args.runs:
            return self._report(args, out)
        if not args.ref or not args.rec:
            raise ParameterError("eval needs --ref and --rec, or --runs with --anchor")
        reference = read_sequence(args.ref, args.fmt, args.width, args.height)
        reconstruction = read_sequence(args.rec, args.fmt, args.width, args.height)
        bpp = None
        if args.bitstream:
            bpp = bit_accounting(parse_container(args.bitstream)).bpp
        quality = evaluate_frames(reference.frames, reconstruction.frames, bpp)
        write_model_json(out / "eval.json", quality)
        result = quality.model_dump(mode="json")
        if bpp is not None:
            write_model_json(out / "rd_point.json", quality.rd_point(args.label))
        result["out"] = str(out)
        return result

    def _report(self, args: EvalArgs, out) -> dict[str, Any]:
        if not args.anchor:
            raise ParameterError("--runs needs --anchor naming the BD anchor run")
        runs = [load_run(path) for path in args.runs]
        report = build_report([run.curve() for run in runs if run.points], args.anchor)
        paths = write_report(report, out)
        result: dict[str, Any] = {"bd": to_jsonable(report.bd), "files": to_jsonable(paths)}
        if args.per_video:
            videos = per_video_report({run.name: run.sequences for run in runs}, args.anchor, out)
            result["per_video"] = to_jsonable(videos.bars)
        return result


class BenchArgs(SequenceArgs):
    ckpt: str | None = Field(default=None, description="Model checkpoint.")
    codec: Literal["deep", "classic"] | None = Field(default=None, description="Codec path.")
    gop: int | None = Field(default=None, ge=2, description="GOP size N.")
    qi: int | None = Field(default=None, ge=1, le=8, description="Classic quality index.")
    runs: int = Field(default=MIN_RUNS, ge=1, description="Timed repetitions (median latency).")
    out: str | None = Field(default=None, description="Output directory.")


class BenchCommand(Command):
    name = "bench"
    description = "Per-stage FLOPs and latency (plus the feedback transcript for the classic codec)."
    ArgsModel = BenchArgs

    def run(self, args: BenchArgs) -> dict[str, Any]:
        config = self.run_config(args)
        out = self.run_dir(args.out, self.name, config)
        model = self.load_model(args.ckpt)
        sequence = self.read_input(args)
        result: dict[str, Any] = {"out": str(out)}
        if config.codec == "deep":
            encoder, decoder = profile_deep(model, sequence, config.gop, args.runs)
        else:
            encoder, decoder, transcript = profile_classic(
                model,
                sequence,
                config.gop,
                qi=config.qi,
                runs=args.runs,
                reconstruction=config.reconstruction,
                code=self.ldpca_code(config),
            )
            write_model_json(out / "feedback.json", transcript)
            result["feedback"] = {
                "total_chunks": transcript.total_chunks,
                "total_syndrome_bits": transcript.total_syndrome_bits,
                "failures": transcript.failures,
                "blocks": len(transcript.blocks),
            }
        write_model_json(out / "complexity_encoder.json", encoder)
        write_model_json(out / "complexity_decoder.json", decoder)
        result["encoder"] = encoder.model_dump(mode="json")
        result["decoder"] = decoder.model_dump(mode="json")
        return result
