"""Result models: gradient reports, loss records, metrics, manifests."""

from datetime import datetime

from pydantic import BaseModel, Field


class GradReport(BaseModel):
    """Analytic-versus-numeric gradient comparison for one op."""

    op: str
    max_rel_err: float
    errors: list[float] = Field(default_factory=list, description="Per-entry relative errors")
    tolerance: float
    passed: bool


class LossRecord(BaseModel):
    """Loss components of one training iteration."""

    iteration: int
    view_id: str = ""
    reg: float = 0.0
    spa: float = 0.0
    tv: float = 0.0
    curve: float = 0.0
    cc: float = 0.0
    total: float = 0.0


class ChromaStats(BaseModel):
    """CIELab chromaticity spread over a set of images."""

    std_a: float
    std_b: float
    pooled: float = Field(description="sqrt(var_a + var_b) over all pooled pixels")
    view_mean_spread: float = Field(description="Pooled std of per-image mean (a*, b*) across images")


class MetricsRow(BaseModel):
    """Per-view image quality."""

    view_id: str
    psnr: float
    ssim: float


class EvalReport(BaseModel):
    """Per-view metrics plus the mean row and cross-view colour statistics."""

    rows: list[MetricsRow] = Field(default_factory=list)
    mean: MetricsRow
    chroma: ChromaStats | None = None
    channel_imbalance: float | None = None


class ComparisonRow(BaseModel):
    """Seed-averaged held-out quality for one training variant."""

    variant: str
    seeds: list[int]
    psnr: float
    ssim: float
    chroma_pooled: float
    channel_imbalance: float


class RunManifest(BaseModel):
    """Provenance record written next to every command's outputs."""

    command: str
    config_path: str | None = None
    seed: int | None = None
    inputs: dict[str, str] = Field(default_factory=dict)
    outputs: dict[str, str] = Field(default_factory=dict)
    tool_version: str
    started_at: datetime = Field(default_factory=datetime.now)
    duration_s: float = 0.0
