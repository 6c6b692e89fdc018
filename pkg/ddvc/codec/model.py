"""The assembled distributed codec network and its checkpoint format.

Checkpoint layout (torch.save of a dict):
    format_version  int, currently 1
    config          CodecConfig fields
    state_dict      named weight tensors
    slice_channels  channels per entropy slice
    scale_table     list of the Gaussian scale levels
    extra           free-form metadata (stage, lambda, metric, ...)
"""

from __future__ import annotations

import zlib
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any

import torch
import torch.nn as nn

from ddvc.codec.bitstream.tables import CdfTable, factorized_tables, gaussian_tables
from ddvc.codec.config import CodecConfig
from ddvc.codec.entropy import ConditionalEntropyModel, EntropyOutput, build_scale_table
from ddvc.codec.errors import FormatError, ParameterError
from ddvc.codec.interpolation import SideInfoGenerator, SideInformation
from ddvc.codec.transforms import AnalysisTransform, PixelFusion, SynthesisTransform
from ddvc.codec.utils.logging import get_logger


logger = get_logger("ddvc")

CHECKPOINT_VERSION = 1


@dataclass
class CodingTables:
    gaussian: CdfTable
    wz_hyper: CdfTable
    intra_hyper: CdfTable

    @property
    def version(self) -> int:
        digest = bytes([self.gaussian.version, self.wz_hyper.version, self.intra_hyper.version])
        return zlib.crc32(digest) & 0xFF


@dataclass
class TripletOutput:
    """Training-time outputs for one batch of (ref0, target, ref1)."""
    x_hat: torch.Tensor
    si_frame: torch.Tensor
    bits_y: torch.Tensor
    bits_z: torch.Tensor
    entropy: EntropyOutput


@dataclass
class IntraOutput:
    x_hat: torch.Tensor
    bits_y: torch.Tensor
    bits_z: torch.Tensor


class DistributedVideoCodec(nn.Module):
    """WZ autoencoder, SI path, key-frame intra codec and their entropy models.

    The WZ encoder never sees another frame; the SI generator and SI encoder
    are only used on the decoder side.
    """

    def __init__(self, config: CodecConfig | None = None):
        super().__init__()
        self.config = config or CodecConfig()
        cfg = self.config
        self.wz_encoder = AnalysisTransform(cfg.n_filters, cfg.m_latent, cfg.kernel)
        si_inputs = 6 if cfg.variant == "concat_refs" else 3
        self.si_encoder = AnalysisTransform(cfg.n_filters, cfg.m_latent, cfg.kernel, in_channels=si_inputs)
        self.wz_entropy = ConditionalEntropyModel(cfg.m_latent, cfg.n_filters, cfg.s_slices)
        synthesis_inputs = cfg.m_latent if cfg.variant == "pixel_si" else 2 * cfg.m_latent
        self.synthesis = SynthesisTransform(synthesis_inputs, cfg.n_filters, cfg.kernel)
        self.pixel_fusion = PixelFusion() if cfg.variant == "pixel_si" else None
        self.intra_encoder = AnalysisTransform(cfg.n_filters, cfg.m_latent, cfg.kernel)
        self.intra_synthesis = SynthesisTransform(cfg.m_latent, cfg.n_filters, cfg.kernel)
        self.intra_entropy = ConditionalEntropyModel(cfg.m_latent, cfg.n_filters, cfg.s_slices)
        self.interpolator = SideInfoGenerator(cfg.ifnet_channels)
        self.register_buffer("scale_table", build_scale_table(), persistent=False)
        self._tables: CodingTables | None = None

    def parameter_groups(self) -> dict[str, list[nn.Parameter]]:
        """Named parameter groups used for freezing and gradient checks."""
        decoder = list(self.synthesis.parameters())
        if self.pixel_fusion is not None:
            decoder += list(self.pixel_fusion.parameters())
        return {
            "encoder": list(self.wz_encoder.parameters()),
            "entropy": list(self.wz_entropy.parameters()),
            "decoder": decoder,
            "si_encoder": list(self.si_encoder.parameters()),
            "interpolation": list(self.interpolator.parameters()),
            "intra": [
                *self.intra_encoder.parameters(),
                *self.intra_synthesis.parameters(),
                *self.intra_entropy.parameters(),
            ],
        }

    def wz_encode(self, x: torch.Tensor) -> torch.Tensor:
        return self.wz_encoder(x)

    def side_information(self, ref0: torch.Tensor, ref1: torch.Tensor, t: float | torch.Tensor) -> SideInformation:
        return self.interpolator(ref0, ref1, t)

    def si_encode(self, si_frame: torch.Tensor, ref0: torch.Tensor | None = None, ref1: torch.Tensor | None = None) -> torch.Tensor:
        """Latent ȳ of the side information (zeros for the no_si variant)."""
        variant = self.config.variant
        if variant == "concat_refs":
            if ref0 is None or ref1 is None:
                raise ParameterError("the concat_refs variant needs both decoded references")
            latent = self.si_encoder(torch.cat([ref0, ref1], dim=1))
        else:
            latent = self.si_encoder(si_frame)
        if variant == "no_si":
            return torch.zeros_like(latent)
        return latent

    def wz_decode(
        self,
        y_hat: torch.Tensor,
        si_latent: torch.Tensor,
        si_frame: torch.Tensor | None = None,
        size: tuple[int, int] | None = None,
    ) -> torch.Tensor:
        """Reconstruct a WZ frame from ŷ and ȳ, clamped to [0,1] and cropped to `size`."""
        if y_hat.shape[-2:] != si_latent.shape[-2:]:
            raise ParameterError(
                f"WZ latent {tuple(y_hat.shape[-2:])} and SI latent {tuple(si_latent.shape[-2:])} differ spatially"
            )
        if self.pixel_fusion is not None:
            decoded = self.synthesis(y_hat)
            if si_frame is None:
                raise ParameterError("the pixel_si variant needs the SI frame")
            decoded = self.pixel_fusion(decoded, si_frame)
        else:
            decoded = self.synthesis(torch.cat([y_hat, si_latent], dim=1))
        decoded = decoded.clamp(0.0, 1.0)
        if size is not None:
            decoded = decoded[..., : size[0], : size[1]]
        return decoded

    def intra_encode(self, x: torch.Tensor) -> torch.Tensor:
        return self.intra_encoder(x)

    def intra_decode(self, y_hat: torch.Tensor, size: tuple[int, int] | None = None) -> torch.Tensor:
        decoded = self.intra_synthesis(y_hat).clamp(0.0, 1.0)
        if size is not None:
            decoded = decoded[..., : size[0], : size[1]]
        return decoded

    def forward(self, ref0: torch.Tensor, target: torch.Tensor, ref1: torch.Tensor, t: float | torch.Tensor = 0.5) -> TripletOutput:
        y = self.wz_encode(target)
        entropy = self.wz_entropy(y)
        si = self.side_information(ref0, ref1, t)
        si_latent = self.si_encode(si.frame, ref0, ref1)
        x_hat = self.wz_decode(entropy.y_hat, si_latent, si_frame=si.frame)
        return TripletOutput(
            x_hat=x_hat,
            si_frame=si.frame,
            bits_y=entropy.bits_y,
            bits_z=entropy.bits_z,
            entropy=entropy,
        )

    def intra_forward(self, x: torch.Tensor) -> IntraOutput:
        y = self.intra_encode(x)
        entropy = self.intra_entropy(y)
        return IntraOutput(x_hat=self.intra_decode(entropy.y_hat), bits_y=entropy.bits_y, bits_z=entropy.bits_z)

    def update_tables(self) -> CodingTables:
        """Rebuild the quantized CDF tables from the current weights."""
        self._tables = CodingTables(
            gaussian=gaussian_tables(self.scale_table.cpu()),
            wz_hyper=factorized_tables(self.wz_entropy.prior, self.config.n_filters),
            intra_hyper=factorized_tables(self.intra_entropy.prior, self.config.n_filters),
        )
        logger.debug(f"event=tables_updated version={self._tables.version}")
        return self._tables

    @property
    def tables(self) -> CodingTables:
        if self._tables is None:
            return self.update_tables()
        return self._tables

    def train(self, mode: bool = True) -> DistributedVideoCodec:
        # Weights change during training, so cached tables go stale.
        if mode:
            self._tables = None
        return super().train(mode)


def save_checkpoint(model: DistributedVideoCodec, path: str | Path, extra: dict[str, Any] | None = None) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "format_version": CHECKPOINT_VERSION,
            "config": asdict(model.config),
            "state_dict": model.state_dict(),
            "slice_channels": model.config.slice_channels,
            "scale_table": model.scale_table.tolist(),
            "extra": dict(extra or {}),
        },
        target,
    )
    logger.info(f"checkpoint={target} event=saved")
    return target


def load_checkpoint(path: str | Path, map_location: str = "cpu") -> tuple[DistributedVideoCodec, dict[str, Any]]:
    """Load a checkpoint written by `save_checkpoint`; returns the model (eval mode) and its extra metadata.

    Raises:
        FormatError: Missing file, unknown version or mismatched weights.
    """
    source = Path(path)
    if not source.is_file():
        raise FormatError(f"checkpoint {source} does not exist")
    try:
        payload = torch.load(source, map_location=map_location, weights_only=True)
    except Exception as exc:
        raise FormatError(f"checkpoint {source} is not readable: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format_version") != CHECKPOINT_VERSION:
        version = payload.get("format_version") if isinstance(payload, dict) else None
        raise FormatError(f"checkpoint {source} has unsupported format version {version}")
    try:
        config = CodecConfig(**payload["config"])
        model = DistributedVideoCodec(config)
        model.load_state_dict(payload["state_dict"])
    except (KeyError, TypeError, RuntimeError, ParameterError) as exc:
        raise FormatError(f"checkpoint {source} does not match the codec architecture: {exc}") from exc
    model.eval()
    logger.info(f"checkpoint={source} event=loaded variant={config.variant}")
    return model, dict(payload.get("extra", {}))
