"""Two-stage RD training of the distributed codec.

Stage 1 trains the WZ autoencoder, SI encoder, entropy models and the
intra codec with the interpolation network frozen. Stage 2 starts from a
stage-1 checkpoint and fine-tunes everything jointly (minus the groups a
variant keeps frozen).
"""

from __future__ import annotations

import copy
import csv
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path

import torch
from torch.utils.data import DataLoader, Dataset

from ddvc.codec.config import TrainConfig
from ddvc.codec.errors import ContractError, TrainingDiverged
from ddvc.codec.model import DistributedVideoCodec, load_checkpoint, save_checkpoint
from ddvc.codec.training.dataset import Triplet, split_dataset
from ddvc.codec.training.loss import LossTerms, bits_per_pixel, rd_loss
from ddvc.codec.training.prefetch import BatchPrefetcher
from ddvc.codec.utils.logging import get_logger


logger = get_logger("ddvc")

LOSS_COLUMNS = ("step", "epoch", "split", "loss", "bpp", "distortion", "lr")


@dataclass
class StepTerms:
    loss: torch.Tensor
    wz: LossTerms
    intra: LossTerms


@dataclass
class StageResult:
    """Outcome of one training stage.

    Attributes:
        checkpoint: Best-on-validation checkpoint.
        loss_csv: Per-step training and per-epoch validation losses.
        best_val_loss: Validation loss of the retained checkpoint.
        train_losses: Training loss of every step.
        val_losses: Validation loss after every epoch.
        learning_rates: Learning rate after every epoch.
        steps: Optimisation steps taken.
        frozen: Parameter groups kept frozen.
    """
    checkpoint: Path
    loss_csv: Path
    best_val_loss: float
    train_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    learning_rates: list[float] = field(default_factory=list)
    steps: int = 0
    frozen: list[str] = field(default_factory=list)


def frozen_groups(variant: str, stage: int) -> list[str]:
    """Parameter groups held fixed for a variant in a stage."""
    if stage == 1:
        return ["interpolation"]
    if variant == "fixed_interp":
        return ["interpolation"]
    if variant == "no_joint":
        return ["encoder", "entropy"]
    return []


def apply_freeze(model: DistributedVideoCodec, frozen: list[str]) -> list[torch.nn.Parameter]:
    """Set requires_grad per group; returns the trainable parameters."""
    trainable: list[torch.nn.Parameter] = []
    seen: set[int] = set()
    for name, params in model.parameter_groups().items():
        for param in params:
            param.requires_grad_(name not in frozen)
            if name not in frozen and id(param) not in seen:
                trainable.append(param)
                seen.add(id(param))
    return trainable


def group_gradient_norms(model: DistributedVideoCodec) -> dict[str, float]:
    norms = {}
    for name, params in model.parameter_groups().items():
        total = 0.0
        for param in params:
            if param.grad is not None:
                total += float(param.grad.detach().pow(2).sum())
        norms[name] = math.sqrt(total)
    return norms


def make_scheduler(optimizer: torch.optim.Optimizer, cfg: TrainConfig) -> torch.optim.lr_scheduler.ReduceLROnPlateau:
    return torch.optim.lr_scheduler.ReduceLROnPlateau(
        optimizer, mode="min", factor=1.0 / cfg.plateau_factor, patience=cfg.patience
    )


def triplet_loss(model: DistributedVideoCodec, batch: Triplet, cfg: TrainConfig) -> StepTerms:
    """WZ loss on the target plus intra loss on both references."""
    ref0, target, ref1 = batch
    out = model(ref0, target, ref1, t=0.5)
    wz = rd_loss(
        target, out.x_hat, bits_per_pixel(out.bits_y, target), bits_per_pixel(out.bits_z, target), cfg.lam, cfg.metric
    )
    keys = torch.cat([ref0, ref1], dim=0)
    intra_out = model.intra_forward(keys)
    intra = rd_loss(
        keys, intra_out.x_hat, bits_per_pixel(intra_out.bits_y, keys), bits_per_pixel(intra_out.bits_z, keys), cfg.lam, cfg.metric
    )
    return StepTerms(loss=wz.loss + intra.loss, wz=wz, intra=intra)


@torch.no_grad()
def evaluate(model: DistributedVideoCodec, loader: DataLoader, cfg: TrainConfig) -> float:
    """Mean WZ RD loss over `loader` with hard quantization."""
    model.eval()
    total, count = 0.0, 0
    for batch in loader:
        terms = triplet_loss(model, batch, cfg)
        total += float(terms.wz.loss) * batch[1].shape[0]
        count += batch[1].shape[0]
    return total / max(1, count)


def smoothed(values: list[float], window: int = 10) -> list[float]:
    """Trailing moving average."""
    out = []
    for index in range(len(values)):
        chunk = values[max(0, index - window + 1): index + 1]
        out.append(sum(chunk) / len(chunk))
    return out


def _load_stage1(model: DistributedVideoCodec, path: str | Path | None) -> None:
    if not path:
        raise ContractError("stage 2 needs the stage-1 checkpoint (stage1_ckpt)")
    trained, extra = load_checkpoint(path)
    if extra.get("stage") != 1:
        raise ContractError(f"checkpoint {path} is from stage {extra.get('stage')}, not stage 1")
    if trained.config != model.config:
        raise ContractError(f"checkpoint {path} was trained with {trained.config}, model is {model.config}")
    model.load_state_dict(trained.state_dict())


def _diagnostics(step: int, epoch: int, terms: StepTerms, lr: float, model: DistributedVideoCodec) -> dict:
    bad = [name for name, param in model.named_parameters() if not torch.isfinite(param).all()]
    return {
        "step": step,
        "epoch": epoch,
        "lr": lr,
        "wz_distortion": float(terms.wz.distortion.detach()),
        "wz_bpp": float(terms.wz.bpp.detach()),
        "intra_distortion": float(terms.intra.distortion.detach()),
        "intra_bpp": float(terms.intra.bpp.detach()),
        "nonfinite_parameters": bad[:20],
    }


def train_stage(
    model: DistributedVideoCodec,
    data: Dataset,
    cfg: TrainConfig,
    out_dir: str | Path,
    val_fraction: float = 0.1,
    stage1_ckpt: str | Path | None = None,
    init_ckpt: str | Path | None = None,
    stop_event: threading.Event | None = None,
) -> StageResult:
    """Run one training stage and keep the best-on-validation weights.

    Raises:
        ContractError: Stage 2 without a stage-1 checkpoint.
        TrainingDiverged: The loss became NaN or infinite.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.stage == 2:
        _load_stage1(model, stage1_ckpt)
    elif init_ckpt:
        initial, _ = load_checkpoint(init_ckpt)
        model.load_state_dict(initial.state_dict())
        logger.info(f"event=initialised_from checkpoint={init_ckpt}")

    torch.manual_seed(cfg.seed)
    train_part, val_part = split_dataset(data, val_fraction, cfg.seed)
    generator = torch.Generator().manual_seed(cfg.seed)
    train_loader = DataLoader(train_part, batch_size=cfg.batch, shuffle=True, generator=generator)
    val_loader = DataLoader(val_part, batch_size=cfg.batch, shuffle=False)

    variant = model.config.variant
    frozen = frozen_groups(variant, cfg.stage)
    trainable = apply_freeze(model, frozen)
    optimizer = torch.optim.Adam(trainable, lr=cfg.lr)
    scheduler = make_scheduler(optimizer, cfg)

    checkpoint = out / f"stage{cfg.stage}.ckpt"
    loss_csv = out / "loss.csv"
    result = StageResult(checkpoint=checkpoint, loss_csv=loss_csv, best_val_loss=math.inf, frozen=frozen)
    best_state = None
    step = 0
    logger.info(
        f"event=stage_started stage={cfg.stage} lambda={cfg.lam} metric={cfg.metric} variant={variant} "
        f"train={len(train_part)} val={len(val_part)} frozen={','.join(frozen) or 'none'}"
    )

    with open(loss_csv, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(LOSS_COLUMNS)
        for epoch in range(1, cfg.max_epochs + 1):
            if hasattr(data, "set_epoch"):
                data.set_epoch(epoch)
            model.train()
            for batch in BatchPrefetcher(train_loader):
                lr = optimizer.param_groups[0]["lr"]
                optimizer.zero_grad(set_to_none=True)
                terms = triplet_loss(model, batch, cfg)
                if not torch.isfinite(terms.loss):
                    diagnostics = _diagnostics(step, epoch, terms, lr, model)
                    logger.error(f"event=diverged step={step} epoch={epoch} diagnostics={diagnostics}")
                    raise TrainingDiverged(f"non-finite loss at step {step} (epoch {epoch})", diagnostics)
                terms.loss.backward()
                optimizer.step()
                step += 1
                value = float(terms.loss.detach())
                result.train_losses.append(value)
                writer.writerow([step, epoch, "train", value, float(terms.wz.bpp.detach()), float(terms.wz.distortion.detach()), lr])
                if step % cfg.log_every == 0:
                    logger.info(
                        f"step={step} epoch={epoch} event=train loss={value:.5f} "
                        f"bpp={float(terms.wz.bpp.detach()):.4f} distortion={float(terms.wz.distortion.detach()):.6f} lr={lr:.2e}"
                    )
                if step >= cfg.max_steps or (stop_event is not None and stop_event.is_set()):
                    break

            val_loss = evaluate(model, val_loader, cfg)
            scheduler.step(val_loss)
            lr = optimizer.param_groups[0]["lr"]
            result.val_losses.append(val_loss)
            result.learning_rates.append(lr)
            writer.writerow([step, epoch, "val", val_loss, "", "", lr])
            handle.flush()
            logger.info(f"step={step} epoch={epoch} event=validated val_loss={val_loss:.5f} lr={lr:.2e}")
            if val_loss < result.best_val_loss:
                result.best_val_loss = val_loss
                best_state = copy.deepcopy(model.state_dict())
                save_checkpoint(
                    model,
                    checkpoint,
                    {
                        "stage": cfg.stage,
                        "lambda": cfg.lam,
                        "custom_lambda": cfg.custom_lambda,
                        "metric": cfg.metric,
                        "variant": variant,
                        "step": step,
                        "epoch": epoch,
                        "val_loss": val_loss,
                    },
                )
            if step >= cfg.max_steps:
                break
            if stop_event is not None and stop_event.is_set():
                logger.info(f"step={step} event=stop_requested")
                break

    if best_state is not None:
        model.load_state_dict(best_state)
    apply_freeze(model, [])
    model.eval()
    result.steps = step
    logger.info(f"event=stage_finished stage={cfg.stage} steps={step} best_val_loss={result.best_val_loss:.5f}")
    return result
