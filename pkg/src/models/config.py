"""Run configuration models (TOML or JSON, identical keys)."""

import hashlib
import json
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, Field, ValidationError, model_validator

from src.errors import DataError, UsageError
from .degradation import Profile


Scenario = Literal["lightness", "color", "mixed"]


class LearningRates(BaseModel):
    """Per-group Adam learning rates."""

    colors: float = Field(default=2.5e-3, ge=0)
    opacity: float = Field(default=2.5e-2, ge=0)
    adjust: float = Field(default=1e-3, ge=0, description="Per-Gaussian gain a and offset b")
    curve: float = Field(default=5e-3, ge=0, description="Global tone curve LUT")
    matrix: float = Field(default=1e-3, ge=0)
    networks: float = Field(default=1e-4, ge=0, description="Generators and residual branch")
    geometry: float = Field(default=1.6e-4, ge=0, description="Means, scales, rotations (when enabled)")


class SceneSection(BaseModel):
    """Where the scene comes from and how it is rendered."""

    path: str | None = None
    background: tuple[float, float, float] = (0.0, 0.0, 0.0)


class DegradeSection(BaseModel):
    """Degradation synthesis settings."""

    profile: Profile = Profile.NONE
    seed: int = 0
    brightness_range: tuple[float, float] = (0.8, 1.2)
    contrast_range: tuple[float, float] = (0.7, 1.3)
    temperature: float | None = Field(default=None, description="Fixed temperature for every view")
    exposure: float | None = Field(default=None, gt=0)
    gamma: float | None = Field(default=None, gt=0)
    brightness: float | None = Field(default=None, gt=0)
    contrast: float | None = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _ordered_ranges(self) -> "DegradeSection":
        for name in ("brightness_range", "contrast_range"):
            low, high = getattr(self, name)
            if not 0 < low <= high:
                raise ValueError(f"{name} must satisfy 0 < low <= high")
        return self


class TrainConfig(BaseModel):
    """Joint optimization settings."""

    iterations: int = Field(default=5000, ge=1)
    seed: int = 0
    scenario: Scenario = "lightness"
    method: Literal["full", "baseline"] = "full"
    dssim_weight: float = Field(default=0.2, ge=0, le=1, description="Lambda of the mixed reconstruction loss")
    eta: float | None = Field(default=None, ge=0, description="Colour-loss weight; derived from scenario when unset")
    curve_switch_iteration: int = Field(default=3000, ge=0)
    lr: LearningRates = Field(default_factory=LearningRates)
    optimize_geometry: bool = False
    output_updates_base: bool = Field(
        default=False,
        description="Let the losses on the adjusted render also update base colours, opacity and geometry",
    )
    residual_clip: float | None = Field(default=None, gt=0)
    residual_block: Literal["convnext", "resnet"] = "convnext"
    dtype: Literal["float32", "float64"] = "float32"
    log_every: int = Field(default=250, ge=1)

    # Ablation switches.
    use_global_curve: bool = True
    use_curve_bias: bool = True
    use_matrix: bool = True
    use_residual: bool = True
    use_spa: bool = True
    use_curve: bool = True
    use_cc: bool = True

    @property
    def effective_eta(self) -> float:
        if self.eta is not None:
            return self.eta
        return 0.1 if self.scenario in ("color", "mixed") else 0.005

    @property
    def effective_clip(self) -> float:
        if self.residual_clip is not None:
            return self.residual_clip
        return 0.1 if self.scenario == "lightness" else 0.5

    def config_hash(self) -> str:
        """Stable SHA-256 of the settings."""
        payload = json.dumps(self.model_dump(mode="json"), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()


class EvalSection(BaseModel):
    """Held-out split and evaluation settings."""

    holdout_every: int = Field(default=5, ge=2)
    holdout_views: list[str] | None = None

    def split(self, view_ids: list[str]) -> tuple[list[str], list[str]]:
        """Return (train, held_out) view ids, preserving order."""
        if self.holdout_views is not None:
            held = [v for v in view_ids if v in set(self.holdout_views)]
        else:
            k = self.holdout_every
            held = [v for i, v in enumerate(view_ids) if i % k == k - 1]
        train = [v for v in view_ids if v not in held]
        return train, held


class RunConfig(BaseModel):
    """Root configuration with one section per pipeline stage."""

    scene: SceneSection = Field(default_factory=SceneSection)
    degrade: DegradeSection = Field(default_factory=DegradeSection)
    train: TrainConfig = Field(default_factory=TrainConfig)
    eval: EvalSection = Field(default_factory=EvalSection)

    def with_overrides(self, overrides: dict[str, dict[str, Any]]) -> "RunConfig":
        """Apply CLI flag overrides (section -> key -> value); None values are ignored."""
        data = self.model_dump(mode="json")
        for section, values in overrides.items():
            for key, value in values.items():
                if value is not None:
                    data[section][key] = value
        return validate_run_config(data)


def _format_validation_error(error: ValidationError) -> str:
    lines = []
    for item in error.errors():
        path = ".".join(str(p) for p in item["loc"])
        lines.append(f"{path}: {item['msg']}")
    return "; ".join(lines)


def validate_run_config(data: dict[str, Any]) -> RunConfig:
    """Validate a raw mapping, reporting failures with dotted key paths."""
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise UsageError(f"invalid configuration: {_format_validation_error(e)}") from e


def load_run_config(path: Path | str | None) -> RunConfig:
    """Load a TOML or JSON config file; None gives the defaults."""
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.exists():
        raise DataError(f"config file not found: {path}")

    text = path.read_text()
    try:
        if path.suffix.lower() == ".toml":
            data = tomllib.loads(text)
        else:
            data = json.loads(text)
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as e:
        raise UsageError(f"malformed config {path}: {e}") from e

    return validate_run_config(data)
