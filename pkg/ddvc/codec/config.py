"""Typed configuration loader with CLI > env > config file > local.toml > default.toml precedence."""

from __future__ import annotations

import difflib
import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Mapping

from ddvc.codec.errors import ConfigError, ParameterError
from ddvc.codec.utils.logging import get_logger

try:
    import tomllib
except ImportError:
    import tomli as tomllib  # type: ignore


logger = get_logger("ddvc")

MSE_LAMBDAS: tuple[float, ...] = (0.0018, 0.0035, 0.0067, 0.0130, 0.0250)
MSSSIM_LAMBDAS: tuple[float, ...] = (2.40, 4.58, 8.73, 16.64, 31.73)

METRICS = ("mse", "msssim")
CODECS = ("deep", "classic")
VARIANTS = ("full", "no_si", "fixed_interp", "pixel_si", "concat_refs", "no_joint")
MOTIONS = ("translate", "rotate", "zoom")
RECONSTRUCTIONS = ("clamp", "centroid")

ENV_PREFIX = "DDVC_"


def lambda_for(metric: str, lambda_id: int) -> float:
    """Return the grid lambda of `metric` at position `lambda_id`."""
    grid = MSE_LAMBDAS if metric == "mse" else MSSSIM_LAMBDAS
    if not 0 <= lambda_id < len(grid):
        raise ParameterError(f"lambda_id must be in [0, {len(grid) - 1}], got {lambda_id}")
    return grid[lambda_id]


@dataclass(frozen=True)
class CodecConfig:
    """Architecture of the deep codec networks.

    Attributes:
        n_filters: Channels of hidden conv layers and of the hyper latent z.
        m_latent: Channels of the latent y.
        s_slices: Channel-autoregressive slice count; must divide m_latent.
        lambda_id: Index into the lambda grid the weights were trained for.
        kernel: Kernel size of the analysis/synthesis convolutions.
        ifnet_channels: Width of each interpolation flow block.
        variant: Network variant (full or one of the ablations).
    """
    n_filters: int = 128
    m_latent: int = 192
    s_slices: int = 8
    lambda_id: int = 4
    kernel: int = 5
    ifnet_channels: int = 64
    variant: str = "full"

    def __post_init__(self) -> None:
        if self.n_filters <= 0 or self.m_latent <= 0 or self.s_slices <= 0:
            raise ParameterError(
                f"n_filters, m_latent and s_slices must be positive, got "
                f"{self.n_filters}, {self.m_latent}, {self.s_slices}"
            )
        if self.m_latent % self.s_slices != 0:
            raise ParameterError(
                f"m_latent ({self.m_latent}) must be divisible by s_slices ({self.s_slices})"
            )
        if self.kernel % 2 == 0:
            raise ParameterError(f"kernel must be odd, got {self.kernel}")
        if self.variant not in VARIANTS:
            raise ParameterError(f"variant must be one of {VARIANTS}, got {self.variant!r}")

    @property
    def slice_channels(self) -> int:
        return self.m_latent // self.s_slices


@dataclass(frozen=True)
class TrainConfig:
    """Optimisation settings of one training stage.

    Attributes:
        lam: Lagrange multiplier of the RD loss.
        metric: Distortion metric, "mse" or "msssim".
        stage: 1 (interpolation network frozen) or 2 (joint fine-tuning).
        lr: Initial Adam learning rate.
        plateau_factor: LR is divided by this factor on validation plateau.
        patience: Epochs without validation improvement before a decay.
        max_epochs: Upper bound on epochs.
        max_steps: Upper bound on optimisation steps (desk-scale cap).
        batch: Triplets per step.
        crop: Training crop size in pixels.
        custom_lambda: True when `lam` is not taken from the grid.
        log_every: Steps between progress log lines.
        seed: Seed for noise, shuffling and initialisation.
    """
    lam: float
    metric: str = "mse"
    stage: int = 1
    lr: float = 1e-3
    plateau_factor: float = 2.0
    patience: int = 10
    max_epochs: int = 100
    max_steps: int = 2000
    batch: int = 8
    crop: int = 64
    custom_lambda: bool = False
    log_every: int = 20
    seed: int = 0

    def __post_init__(self) -> None:
        if self.stage not in (1, 2):
            raise ParameterError(f"stage must be 1 or 2, got {self.stage}")
        if self.metric not in METRICS:
            raise ParameterError(f"metric must be one of {METRICS}, got {self.metric!r}")
        if self.lam < 0:
            raise ParameterError(f"lambda must be non-negative, got {self.lam}")
        grid = MSE_LAMBDAS if self.metric == "mse" else MSSSIM_LAMBDAS
        if not self.custom_lambda and self.lam not in grid:
            raise ParameterError(
                f"lambda {self.lam} is not on the {self.metric} grid {grid}; flag it as custom"
            )
        if self.plateau_factor <= 1.0:
            raise ParameterError(f"plateau_factor must exceed 1, got {self.plateau_factor}")
        if self.batch <= 0 or self.max_steps <= 0 or self.max_epochs <= 0:
            raise ParameterError("batch, max_steps and max_epochs must be positive")
        if self.crop % 64 != 0:
            raise ParameterError(f"crop must be a multiple of 64, got {self.crop}")


@dataclass(frozen=True)
class RunConfig:
    """Merged view of every configurable value of a ddvc run.

    Attributes:
        codec: Codec path, "deep" or "classic".
        lambda_id: Index into the lambda grid of `metric`.
        lambda_value: Explicit lambda; values > 0 override the grid.
        metric: Distortion metric, "mse" or "msssim".
        gop: GOP size N.
        seed: Global seed.
        n_filters: Hidden channels of the deep codec.
        m_latent: Latent channels of the deep codec.
        s_slices: Channel-autoregressive slices.
        variant: Deep codec variant.
        ifnet_channels: Interpolation flow-block width.
        qi: Classic codec quality index (1..8).
        reconstruction: Classic band reconstruction, "clamp" or "centroid".
        default_alpha: Laplacian alpha used when no calibration is available.
        ldpca_blocklen: LDPCA code block length.
        ldpca_seed: Seed of the LDPCA parity matrix.
        bp_iterations: Belief-propagation iteration cap.
        stage: Training stage.
        lr: Initial learning rate.
        plateau_factor: LR decay factor on plateau.
        patience_stage1: Plateau patience in stage 1 (epochs).
        patience_stage2: Plateau patience in stage 2 (epochs).
        max_epochs_stage1: Epoch cap in stage 1.
        max_epochs_stage2: Epoch cap in stage 2.
        max_steps: Step cap per stage.
        batch: Batch size.
        crop: Crop size.
        dataset_size: Synthetic triplet count.
        motion: Synthetic motion, "translate", "rotate" or "zoom".
        shift: Synthetic translation in pixels per frame.
        val_fraction: Validation share of the dataset.
        log_every: Steps between training log lines.
        dataset_dir: Triplet folder; empty selects the synthetic dataset.
        init_ckpt: Checkpoint to initialise from (MS-SSIM from MSE).
        stage1_ckpt: Stage-1 checkpoint required by stage 2.
        threads: torch worker threads (0 keeps the library default).
        debug: DEBUG-level logging.
    """
    codec: str
    lambda_id: int
    lambda_value: float
    metric: str
    gop: int
    seed: int
    n_filters: int
    m_latent: int
    s_slices: int
    variant: str
    ifnet_channels: int
    qi: int
    reconstruction: str
    default_alpha: float
    ldpca_blocklen: int
    ldpca_seed: int
    bp_iterations: int
    stage: int
    lr: float
    plateau_factor: float
    patience_stage1: int
    patience_stage2: int
    max_epochs_stage1: int
    max_epochs_stage2: int
    max_steps: int
    batch: int
    crop: int
    dataset_size: int
    motion: str
    shift: int
    val_fraction: float
    log_every: int
    dataset_dir: str
    init_ckpt: str
    stage1_ckpt: str
    threads: int
    debug: bool

    @property
    def lam(self) -> float:
        if self.lambda_value > 0:
            return self.lambda_value
        return lambda_for(self.metric, self.lambda_id)

    @property
    def custom_lambda(self) -> bool:
        return self.lambda_value > 0

    def codec_config(self) -> CodecConfig:
        return CodecConfig(
            n_filters=self.n_filters,
            m_latent=self.m_latent,
            s_slices=self.s_slices,
            lambda_id=self.lambda_id,
            ifnet_channels=self.ifnet_channels,
            variant=self.variant,
        )

    def train_config(self, stage: int | None = None) -> TrainConfig:
        stage = self.stage if stage is None else stage
        return TrainConfig(
            lam=self.lam,
            metric=self.metric,
            stage=stage,
            lr=self.lr,
            plateau_factor=self.plateau_factor,
            patience=self.patience_stage1 if stage == 1 else self.patience_stage2,
            max_epochs=self.max_epochs_stage1 if stage == 1 else self.max_epochs_stage2,
            max_steps=self.max_steps,
            batch=self.batch,
            crop=self.crop,
            custom_lambda=self.custom_lambda,
            log_every=self.log_every,
            seed=self.seed,
        )

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def to_toml(self) -> str:
        """Render the effective configuration in the flat grammar it was read from."""
        lines = []
        for key, value in self.to_dict().items():
            lines.append(f"{key} = {_toml_scalar(value)}")
        return "\n".join(lines) + "\n"


def _toml_scalar(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    escaped = str(value).replace("\\", "\\\\").replace('"', '\\"')
    return f'"{escaped}"'


def _parse_bool(value: str) -> bool:
    """Parse common boolean strings."""
    if isinstance(value, bool):
        return value
    if value.lower() in ("true", "1", "yes"):
        return True
    if value.lower() in ("false", "0", "no"):
        return False
    raise ValueError(f"Cannot parse '{value}' as boolean")


def _load_toml(path: Path) -> dict:
    """Load TOML file, returning empty dict when missing."""
    if not path.exists():
        return {}

    try:
        with open(path, "rb") as f:
            return tomllib.load(f)
    except Exception as exc:
        raise ConfigError(f"Failed to load TOML file {path}: {exc}") from exc


def _get_config_dir() -> Path:
    """Return absolute path to project `config/` directory."""
    project_root = Path(__file__).resolve().parents[2]
    config_dir = project_root / "config"

    if not config_dir.exists():
        raise RuntimeError(
            f"Config directory not found. Expected: {config_dir}\n"
            "Please run ddvc from the project root or ensure config/default.toml exists."
        )

    return config_dir


def _int_value(raw_value, field_name: str) -> int:
    if isinstance(raw_value, bool) or (isinstance(raw_value, float) and not raw_value.is_integer()):
        raise ConfigError(f"{field_name} must be an integer. Got: {raw_value!r}")
    try:
        return int(raw_value)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{field_name} must be an integer. Got: {raw_value!r}") from exc


def _float_value(raw_value, field_name: str) -> float:
    if isinstance(raw_value, bool):
        raise ConfigError(f"{field_name} must be a number. Got: {raw_value!r}")
    try:
        return float(raw_value)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{field_name} must be a number. Got: {raw_value!r}") from exc


def _bool_value(raw_value, field_name: str) -> bool:
    if isinstance(raw_value, (int, float)) and not isinstance(raw_value, bool):
        raise ConfigError(f"{field_name} must be a boolean. Got: {raw_value!r}")
    try:
        return _parse_bool(raw_value) if isinstance(raw_value, str) else bool(raw_value)
    except ValueError as exc:
        raise ConfigError(f"Invalid {field_name} value: {raw_value!r}") from exc


def _str_value(raw_value, field_name: str) -> str:
    if not isinstance(raw_value, str):
        raise ConfigError(f"{field_name} must be a string. Got: {raw_value!r}")
    return raw_value


_COERCERS = {"int": _int_value, "float": _float_value, "bool": _bool_value, "str": _str_value}
FIELD_TYPES: dict[str, str] = {f.name: str(f.type) for f in fields(RunConfig)}


def _check_keys(data: Mapping[str, Any], source: str) -> None:
    for key in data:
        if key in FIELD_TYPES:
            continue
        if isinstance(data[key], dict):
            raise ConfigError(f"{source}: sections are not supported (found [{key}])")
        nearest = difflib.get_close_matches(key, FIELD_TYPES.keys(), n=1)
        hint = f"; did you mean '{nearest[0]}'?" if nearest else ""
        raise ConfigError(f"{source}: unknown config key '{key}'{hint}")


def _validate(config: RunConfig) -> None:
    if config.codec not in CODECS:
        raise ConfigError(f"codec must be one of {CODECS}, got {config.codec!r}")
    if config.metric not in METRICS:
        raise ConfigError(f"metric must be one of {METRICS}, got {config.metric!r}")
    if config.motion not in MOTIONS:
        raise ConfigError(f"motion must be one of {MOTIONS}, got {config.motion!r}")
    if config.reconstruction not in RECONSTRUCTIONS:
        raise ConfigError(f"reconstruction must be one of {RECONSTRUCTIONS}, got {config.reconstruction!r}")
    if config.variant not in VARIANTS:
        raise ConfigError(f"variant must be one of {VARIANTS}, got {config.variant!r}")
    if config.gop < 2:
        raise ConfigError(f"gop must be at least 2, got {config.gop}")
    if not 0 <= config.lambda_id < len(MSE_LAMBDAS):
        raise ConfigError(f"lambda_id must be in [0, {len(MSE_LAMBDAS) - 1}], got {config.lambda_id}")
    if not 1 <= config.qi <= 8:
        raise ConfigError(f"qi must be in [1, 8], got {config.qi}")
    if config.m_latent % config.s_slices != 0:
        raise ConfigError(f"m_latent ({config.m_latent}) must be divisible by s_slices ({config.s_slices})")
    if config.stage not in (1, 2):
        raise ConfigError(f"stage must be 1 or 2, got {config.stage}")
    if not 0.0 < config.val_fraction < 1.0:
        raise ConfigError(f"val_fraction must be in (0, 1), got {config.val_fraction}")
    if config.ldpca_blocklen % 64 != 0:
        raise ConfigError(f"ldpca_blocklen must be a multiple of 64, got {config.ldpca_blocklen}")
    if config.default_alpha <= 0:
        raise ConfigError(f"default_alpha must be positive, got {config.default_alpha}")
    if config.threads < 0:
        raise ConfigError(f"threads must be >= 0, got {config.threads}")


def load_config(path: str | Path | None = None, overrides: Mapping[str, Any] | None = None) -> RunConfig:
    """Load and validate the run configuration.

    Precedence, lowest first: config/default.toml, config/local.toml, the file
    at `path`, `DDVC_<KEY>` environment variables, `overrides` (CLI flags).
    Override entries whose value is None are ignored.

    Raises:
        ConfigError: Unknown key (with nearest valid key), type mismatch or invalid value.
    """
    config_dir = _get_config_dir()

    default_path = config_dir / "default.toml"
    if not default_path.exists():
        raise RuntimeError(f"default.toml not found at {default_path}")

    default_data = _load_toml(default_path)
    _check_keys(default_data, str(default_path))
    missing = sorted(set(FIELD_TYPES) - set(default_data))
    if missing:
        raise RuntimeError(f"default.toml is missing keys: {', '.join(missing)}")

    merged: dict[str, Any] = dict(default_data)
    local_path = config_dir / "local.toml"
    local_data = _load_toml(local_path)
    _check_keys(local_data, str(local_path))
    merged.update(local_data)

    if path:
        user_path = Path(path)
        if not user_path.exists():
            raise ConfigError(f"config file not found: {user_path}")
        user_data = _load_toml(user_path)
        _check_keys(user_data, str(user_path))
        merged.update(user_data)

    for key in FIELD_TYPES:
        env_value = os.getenv(f"{ENV_PREFIX}{key.upper()}")
        if env_value is not None and env_value != "":
            merged[key] = env_value

    cli_values = {key: value for key, value in (overrides or {}).items() if value is not None}
    _check_keys(cli_values, "command line")
    merged.update(cli_values)

    values = {key: _COERCERS[FIELD_TYPES[key]](merged[key], key) for key in FIELD_TYPES}
    config = RunConfig(**values)
    _validate(config)

    logger.debug(
        f"Configuration loaded: codec={config.codec}, metric={config.metric}, "
        f"lambda={config.lam}, gop={config.gop}, seed={config.seed}"
    )
    return config
