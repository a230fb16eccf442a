"""Desk-scale experiments: degraded datasets, ablation variants and the seed-averaged comparison."""

import logging
from dataclasses import dataclass

import numpy as np
import torch
from rich.console import Console

from src.errors import UsageError
from src.models import ComparisonRow, DegradationManifest, DegradeSection, EvalReport, RunConfig, SceneFile, TrainConfig
from src.services.degrade import synthesize_views
from src.services.imaging import Image
from .splat import Camera, GaussianCloud
from .trainer import Trainer, build_trainer, evaluate, render_novel, torch_dtype


logger = logging.getLogger(__name__)


# Overrides applied on top of the run's TrainConfig.
VARIANTS: dict[str, dict] = {
    "full": {},
    "baseline": {"method": "baseline"},
    "no-cc": {"use_cc": False},
    "no-residual": {"use_residual": False},
    "no-matrix": {"use_matrix": False},
    "no-bias": {"use_curve_bias": False},
    "no-spa": {"use_spa": False},
    "no-curve-loss": {"use_curve": False},
}


@dataclass
class Dataset:
    """Clean ground truth and the degraded training inputs of one scene."""

    clean: dict[str, Image]
    degraded: dict[str, Image]
    manifest: DegradationManifest


def render_clean_views(scene: SceneFile, background: tuple[float, float, float] = (0.0, 0.0, 0.0)) -> dict[str, Image]:
    """Ground truth: every camera rendered with the stored base colours."""
    cloud = GaussianCloud.from_records(scene.gaussians, torch.float64)
    cameras = [Camera.from_record(c, torch.float64) for c in scene.cameras]
    return render_novel(cloud, cameras, background)


def prepare_dataset(
    scene: SceneFile,
    section: DegradeSection,
    background: tuple[float, float, float] = (0.0, 0.0, 0.0),
) -> Dataset:
    clean = render_clean_views(scene, background)
    degraded, manifest = synthesize_views(clean, section)
    return Dataset(clean=clean, degraded=degraded, manifest=manifest)


def variant_config(base: TrainConfig, variant: str, seed: int | None = None) -> TrainConfig:
    if variant not in VARIANTS:
        raise UsageError(f"unknown variant: {variant} (choose from {', '.join(VARIANTS)})")
    updates = dict(VARIANTS[variant])
    if seed is not None:
        updates["seed"] = seed
    return TrainConfig.model_validate({**base.model_dump(), **updates})


def held_out_renders(
    trainer: Trainer, scene: SceneFile, view_ids: list[str], background: tuple[float, float, float]
) -> dict[str, Image]:
    dtype = torch_dtype(trainer.config.dtype)
    cameras = [Camera.from_record(scene.camera(v), dtype) for v in view_ids]
    return render_novel(trainer.cloud, cameras, background)


def train_and_evaluate(
    scene: SceneFile,
    dataset: Dataset,
    run_config: RunConfig,
    variant: str = "full",
    seed: int | None = None,
    console: Console | None = None,
) -> EvalReport:
    """Train one variant on the non-held-out views and score held-out renders against clean ground truth."""
    config = variant_config(run_config.train, variant, seed)
    background = run_config.scene.background
    train_ids, held_ids = run_config.eval.split([c.view_id for c in scene.cameras])
    if not held_ids:
        raise UsageError("the evaluation split holds out no views")

    trainer = build_trainer(scene, dataset.degraded, config, train_ids, background)
    trainer.train(console=console)

    renders = held_out_renders(trainer, scene, held_ids, background)
    return evaluate([renders[v] for v in held_ids], [dataset.clean[v] for v in held_ids], held_ids)


def run_comparison(
    scene: SceneFile,
    dataset: Dataset,
    variants: list[str],
    seeds: list[int],
    run_config: RunConfig,
    console: Console | None = None,
) -> list[ComparisonRow]:
    """Seed-averaged held-out PSNR, SSIM, chroma dispersion and channel imbalance per variant."""
    for variant in variants:
        variant_config(run_config.train, variant)
    if not seeds:
        raise UsageError("at least one seed is required")

    reports: dict[str, list[EvalReport]] = {v: [] for v in variants}
    for seed in seeds:
        for variant in variants:
            if console is not None:
                console.print(f"[cyan]{variant}[/cyan] seed {seed}")
            report = train_and_evaluate(scene, dataset, run_config, variant, seed, console)
            reports[variant].append(report)
            logger.info("%s seed %d: held-out PSNR %.2f dB", variant, seed, report.mean.psnr)

    rows = []
    for variant in variants:
        runs = reports[variant]
        chroma = [r.chroma.pooled for r in runs if r.chroma is not None]
        rows.append(
            ComparisonRow(
                variant=variant,
                seeds=list(seeds),
                psnr=float(np.mean([r.mean.psnr for r in runs])),
                ssim=float(np.mean([r.mean.ssim for r in runs])),
                chroma_pooled=float(np.mean(chroma)) if chroma else float("nan"),
                channel_imbalance=float(np.mean([r.channel_imbalance for r in runs])),
            )
        )
    return rows
