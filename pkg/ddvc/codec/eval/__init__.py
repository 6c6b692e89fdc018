from ddvc.codec.eval.bd import bd_quality, bd_rate
from ddvc.codec.eval.metrics import ms_ssim, ms_ssim_tensor, msssim_db, psnr
from ddvc.codec.eval.profiler import ComplexityReport, Profiler, profile_classic, profile_deep
from ddvc.codec.eval.report import RDCurve, RDPoint, RDReport, build_report, per_video_report, write_report
from ddvc.codec.eval.visualize import visualize_latents

__all__ = [
    "ComplexityReport",
    "Profiler",
    "RDCurve",
    "RDPoint",
    "RDReport",
    "bd_quality",
    "bd_rate",
    "build_report",
    "ms_ssim",
    "ms_ssim_tensor",
    "msssim_db",
    "per_video_report",
    "profile_classic",
    "profile_deep",
    "psnr",
    "visualize_latents",
    "write_report",
]
