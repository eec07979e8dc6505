"""Flat key=value pipeline configuration shared by the CLI subcommands."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

from .errors import InvalidArgument


@dataclass(frozen=True)
class PipelineConfig:
    raw_rate_hz: int = 104
    target_rate_hz: int = 26
    decimation_factor: int = 4
    window_len: int = 39
    stride: int = 39
    ma_width: int = 5
    outlier_sigma: float = 4.0
    trim_rms_window_s: float = 0.5
    trim_rms_ratio: float = 0.1
    train_ratio: float = 0.8
    val_ratio: float = 0.1
    test_ratio: float = 0.1
    k_folds: int = 5
    model_kind: str = "mlp"  # mlp | forest
    initial_lr: float = 3e-4
    lr_decay: float = 0.5
    lr_decay_every: int = 50
    batch_size: int = 1024
    patience: int = 30
    dropout: float = 0.2
    max_epochs: int = 400
    n_rounds: int = 25
    max_depth: int = 4
    min_leaf: int = 5
    shrinkage: float = 0.3
    mask_fraction: float = 1.0
    max_stack_bytes: int = 850
    max_program_bytes: int = 32768
    max_data_bytes: int = 8192
    tau: float = 0.15
    merge_policy_path: str = ""
    seed: int = 0

    def __post_init__(self):
        if self.raw_rate_hz != self.target_rate_hz * self.decimation_factor:
            raise InvalidArgument(
                "decimation_factor must map raw_rate_hz onto target_rate_hz"
            )
        if self.ma_width % 2 == 0 or self.ma_width < 1:
            raise InvalidArgument("ma_width must be odd and positive")
        if self.window_len < self.ma_width:
            raise InvalidArgument("window_len must be >= ma_width")
        if self.model_kind not in ("mlp", "forest"):
            raise InvalidArgument(f"unknown model_kind {self.model_kind!r}")


def load_config(path, base: Optional[PipelineConfig] = None) -> PipelineConfig:
    """Parse a `key = value` file; unknown keys are an error."""
    base = base or PipelineConfig()
    typed = {f.name: f.type for f in fields(PipelineConfig)}
    casts = {"int": int, "float": float, "str": str}
    overrides = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidArgument(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in typed:
            raise InvalidArgument(f"{path}:{lineno}: unknown key {key!r}")
        overrides[key] = casts[typed[key]](value)
    return replace(base, **overrides)


def save_config(cfg: PipelineConfig, path) -> None:
    lines = [f"{f.name} = {getattr(cfg, f.name)}" for f in fields(PipelineConfig)]
    Path(path).write_text("\n".join(lines) + "\n")
