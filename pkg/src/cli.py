"""CLI entry point for tonesplat."""

import logging
import os
import time
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import torch
import typer
from rich.console import Console
from rich.table import Table

from src import __version__
from src.errors import DataError, TonesplatError, UsageError
from src.logging_setup import configure_logging
from src.models import Profile, RunConfig, RunManifest, SceneFile, TrainConfig, load_run_config
from src.services import make_synthetic_scene, save_contact_sheet, synthesize_views
from src.services.imaging import Image
from src.storage import RunStore, load_checkpoint, load_image_folder, load_scene, save_checkpoint


app = typer.Typer(name="tonesplat", help="Curve-based photometric and colour correction for Gaussian splatting")

console = Console()
logger = logging.getLogger("tonesplat")

THREADS_ENV = "TONESPLAT_THREADS"
CHECKPOINT_FILE = "checkpoint.pt"


@app.callback()
def main(verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging")):
    """Synthesize degraded views, train, render and evaluate."""
    configure_logging(console, verbose)
    threads = os.environ.get(THREADS_ENV)
    if threads:
        try:
            torch.set_num_threads(int(threads))
        except ValueError:
            console.print(f"[red]Error: {THREADS_ENV} must be an integer, got {threads!r}[/red]")
            raise typer.Exit(UsageError.exit_code)


@contextmanager
def command_errors() -> Iterator[None]:
    """Report library errors on the console and exit with their code."""
    try:
        yield
    except TonesplatError as e:
        console.print(f"[red]Error: {e}[/red]")
        raise typer.Exit(e.exit_code)


class Manifest:
    """Collects inputs and outputs of one command and writes run_manifest.json."""

    def __init__(self, command: str, config_path: Path | None = None, seed: int | None = None):
        self.record = RunManifest(
            command=command,
            config_path=str(config_path) if config_path else None,
            seed=seed,
            tool_version=__version__,
        )
        self.start = time.perf_counter()

    def input(self, name: str, path: Path | str) -> None:
        self.record.inputs[name] = str(path)

    def output(self, name: str, path: Path | str) -> None:
        self.record.outputs[name] = str(path)

    def write(self, store: RunStore) -> None:
        self.record.duration_s = time.perf_counter() - self.start
        store.save_manifest(self.record)


def _parse_list(value: str | None) -> list[str] | None:
    if value is None:
        return None
    items = [v.strip() for v in value.split(",") if v.strip()]
    return items or None


def _load_config(config: Path | None, overrides: dict[str, dict]) -> RunConfig:
    return load_run_config(config).with_overrides(overrides)


def _scene_for(scene_path: Path | None, run_config: RunConfig) -> tuple[SceneFile, Path]:
    path = scene_path or (Path(run_config.scene.path) if run_config.scene.path else None)
    if path is None:
        raise UsageError("no scene given (use --scene or scene.path in the config)")
    return load_scene(path), path


# Scene and dataset commands


@app.command("make-scene")
def make_scene(
    out: Path = typer.Option(..., "--out", "-o", help="Output directory for scene.json"),
    gaussians: int = typer.Option(30, "--gaussians", "-g", min=1, help="Number of Gaussians"),
    views: int = typer.Option(10, "--views", "-n", min=1, help="Number of ring cameras"),
    size: int = typer.Option(64, "--size", min=8, help="Image width and height in pixels"),
    seed: int = typer.Option(0, "--seed", "-s", help="Random seed"),
):
    """Write a deterministic synthetic scene (Gaussians in a ball, cameras on a ring)."""
    with command_errors():
        manifest = Manifest("make-scene", seed=seed)
        scene = make_synthetic_scene(gaussians, views, size, seed)
        store = RunStore(out)
        manifest.output("scene", store.save_scene(scene))
        manifest.write(store)
        console.print(f"[green]✓ Scene written: {len(scene.gaussians)} Gaussians, {len(scene.cameras)} cameras[/green]")


@app.command("synth")
def synth(
    out: Path = typer.Option(..., "--out", "-o", help="Output directory"),
    scene: Path = typer.Option(None, "--scene", help="Scene file (JSON)"),
    profile: str = typer.Option(None, "--profile", "-p", help=f"Degradation profile: {', '.join(p.value for p in Profile)}"),
    seed: int = typer.Option(None, "--seed", "-s", help="Degradation seed"),
    clean_dir: Path = typer.Option(None, "--clean", help="Use these clean PNGs instead of rendering the scene"),
    config: Path = typer.Option(None, "--config", "-c", help="TOML or JSON run configuration"),
):
    """Render clean views, degrade them per profile and write clean/, degraded/ and degradations.json."""
    with command_errors():
        if profile is not None and profile not in {p.value for p in Profile}:
            raise DataError(f"unknown profile: {profile}")
        run_config = _load_config(config, {"degrade": {"profile": profile, "seed": seed}})
        section = run_config.degrade
        manifest = Manifest("synth", config, section.seed)
        scene_file, scene_path = _scene_for(scene, run_config)
        manifest.input("scene", scene_path)

        if clean_dir is not None:
            manifest.input("clean", clean_dir)
            provided = load_image_folder(clean_dir)
            clean = {}
            for camera in scene_file.cameras:
                if camera.view_id not in provided:
                    raise DataError(f"no clean image for view {camera.view_id} in {clean_dir}")
                clean[camera.view_id] = provided[camera.view_id]
        else:
            from src.pipeline.experiments import render_clean_views

            clean = render_clean_views(scene_file, run_config.scene.background)

        degraded, degradations = synthesize_views(clean, section)
        store = RunStore(out)
        manifest.output("clean", store.save_images("clean", clean))
        manifest.output("degraded", store.save_images("degraded", degraded))
        manifest.output("degradations", store.save_model("degradations.json", degradations))
        manifest.output("scene", store.save_scene(scene_file))
        manifest.write(store)
        console.print(f"[green]✓ {len(degraded)} views degraded with profile '{section.profile.value}'[/green]")


# Training and inference


@app.command("train")
def train(
    out: Path = typer.Option(..., "--out", "-o", help="Output directory"),
    scene: Path = typer.Option(None, "--scene", help="Scene file (JSON)"),
    images: Path = typer.Option(None, "--images", "-i", help="Folder of degraded training PNGs named <view_id>.png"),
    config: Path = typer.Option(None, "--config", "-c", help="TOML or JSON run configuration"),
    iterations: int = typer.Option(None, "--iterations", "-n", min=1, help="Total training iterations"),
    seed: int = typer.Option(None, "--seed", "-s", help="Training seed"),
    scenario: str = typer.Option(None, "--scenario", help="lightness, color or mixed"),
    method: str = typer.Option(None, "--method", help="full or baseline"),
    all_views: bool = typer.Option(False, "--all-views", help="Train on held-out views too"),
    resume: Path = typer.Option(None, "--resume", help="Continue from a checkpoint"),
):
    """Jointly optimize the scene and the enhancement modules; writes checkpoint.pt, loss.csv and config.json."""
    from src.pipeline.trainer import Trainer, build_trainer

    with command_errors():
        store = RunStore(out)
        if resume is not None:
            trainer = Trainer.from_state(load_checkpoint(resume))
            if iterations is not None:
                trainer.config = trainer.config.model_copy(update={"iterations": iterations})
            manifest = Manifest("train", config, trainer.config.seed)
            manifest.input("checkpoint", resume)
        else:
            run_config = _load_config(
                config,
                {"train": {"iterations": iterations, "seed": seed, "scenario": scenario, "method": method}},
            )
            manifest = Manifest("train", config, run_config.train.seed)
            scene_file, scene_path = _scene_for(scene, run_config)
            if images is None:
                raise UsageError("--images is required unless resuming")
            manifest.input("scene", scene_path)
            manifest.input("images", images)

            inputs = load_image_folder(images)
            view_ids = [c.view_id for c in scene_file.cameras if c.view_id in inputs]
            if not all_views:
                view_ids, held = run_config.eval.split(view_ids)
                logger.info("training on %d views, holding out %s", len(view_ids), ", ".join(held) or "none")
            trainer = build_trainer(scene_file, inputs, run_config.train, view_ids, run_config.scene.background)

        trainer.train(console=console)

        manifest.output("checkpoint", save_checkpoint(trainer.state(), store.path(CHECKPOINT_FILE)))
        rows = [[r.iteration, r.reg, r.spa, r.tv, r.curve, r.cc, r.total] for r in trainer.log]
        manifest.output("loss", store.save_csv("loss.csv", ["iter", "reg", "spa", "tv", "curve", "cc", "total"], rows))
        manifest.output("config", store.save_model("config.json", trainer.config))
        manifest.write(store)

        last = trainer.log[-1] if trainer.log else None
        summary = f" (final loss {last.total:.5f})" if last else ""
        console.print(f"[green]✓ Trained {trainer.iteration} iterations{summary}[/green]")


@app.command("render")
def render(
    checkpoint: Path = typer.Option(..., "--checkpoint", help="Checkpoint written by train"),
    out: Path = typer.Option(..., "--out", "-o", help="Output directory"),
    scene: Path = typer.Option(None, "--scene", help="Render this scene's cameras (default: the training cameras)"),
    views: str = typer.Option(None, "--views", help="Comma-separated view ids to render"),
    bits: int = typer.Option(8, "--bits", help="PNG bit depth (8 or 16)"),
    dump_residual: bool = typer.Option(False, "--dump-residual", help="Also write residual maps offset to mid-gray"),
    contact_sheet: bool = typer.Option(False, "--contact-sheet", help="Compose all renders into one grid PNG"),
):
    """Render adjusted-colour images; per-view enhancement modules are not applied."""
    from src.pipeline.splat import Camera
    from src.pipeline.trainer import Trainer, render_novel

    with command_errors():
        manifest = Manifest("render")
        manifest.input("checkpoint", checkpoint)
        trainer = Trainer.from_state(load_checkpoint(checkpoint))
        manifest.record.seed = trainer.config.seed

        if scene is not None:
            manifest.input("scene", scene)
            cameras = [Camera.from_record(c, trainer.dtype) for c in load_scene(scene).cameras]
        else:
            cameras = [v.camera for v in trainer.views]
        wanted = _parse_list(views)
        if wanted is not None:
            known = {c.view_id for c in cameras}
            missing = [v for v in wanted if v not in known]
            if missing:
                raise DataError(f"unknown view(s): {', '.join(missing)}")
            cameras = [c for c in cameras if c.view_id in wanted]

        renders = render_novel(trainer.cloud, cameras, trainer.background)
        store = RunStore(out)
        manifest.output("renders", store.save_images("renders", renders, bits))

        if dump_residual:
            residuals = {
                view_id: Image.from_tensor(0.5 + r) for view_id, r in trainer.residual_maps().items()
            }
            manifest.output("residuals", store.save_images("residuals", residuals, bits))
        if contact_sheet:
            manifest.output("contact_sheet", save_contact_sheet(list(renders.values()), store.path("contact_sheet.png")))

        manifest.write(store)
        console.print(f"[green]✓ Rendered {len(renders)} views[/green]")


# Evaluation and diagnostics


@app.command("eval")
def eval_cmd(
    renders: Path = typer.Option(..., "--renders", help="Folder of rendered PNGs"),
    truth: Path = typer.Option(..., "--truth", help="Folder of ground-truth PNGs with matching names"),
    out: Path = typer.Option(..., "--out", "-o", help="Output directory"),
):
    """PSNR and SSIM per view, their mean, and cross-view colour statistics."""
    from src.pipeline.trainer import evaluate

    with command_errors():
        manifest = Manifest("eval")
        manifest.input("renders", renders)
        manifest.input("truth", truth)
        rendered = load_image_folder(renders)
        truths = load_image_folder(truth)
        missing = [v for v in rendered if v not in truths]
        if missing:
            raise DataError(f"no ground truth for: {', '.join(missing)}")

        view_ids = list(rendered)
        report = evaluate([rendered[v] for v in view_ids], [truths[v] for v in view_ids], view_ids)

        store = RunStore(out)
        rows = [[r.view_id, f"{r.psnr:.6f}", f"{r.ssim:.6f}"] for r in [*report.rows, report.mean]]
        manifest.output("metrics", store.save_csv("metrics.csv", ["view_id", "psnr", "ssim"], rows))
        manifest.output("report", store.save_model("eval_report.json", report))
        manifest.write(store)

        table = Table(title="Evaluation")
        table.add_column("View", style="cyan")
        table.add_column("PSNR", justify="right")
        table.add_column("SSIM", justify="right")
        for r in report.rows:
            table.add_row(r.view_id, f"{r.psnr:.2f}", f"{r.ssim:.4f}")
        table.add_row("[bold]mean[/bold]", f"[bold]{report.mean.psnr:.2f}[/bold]", f"[bold]{report.mean.ssim:.4f}[/bold]")
        console.print(table)
        console.print(f"mean PSNR {report.mean.psnr:.1f} dB")
        if report.chroma is not None:
            console.print(f"[dim]chroma dispersion {report.chroma.pooled:.3f}, channel imbalance {report.channel_imbalance:.3f}[/dim]")


@app.command("gradcheck")
def gradcheck(
    out: Path = typer.Option(..., "--out", "-o", help="Output directory"),
    seed: int = typer.Option(0, "--seed", "-s", help="Input seed"),
    tolerance: float = typer.Option(1e-4, "--tolerance", help="Maximum relative error"),
    step: float = typer.Option(1e-5, "--step", help="Central-difference step"),
    ops: str = typer.Option(None, "--ops", help="Comma-separated subset of ops"),
):
    """Check every differentiable op against central differences; exits 0 only if all pass."""
    from src.pipeline.gradsuite import run_gradient_suite

    with command_errors():
        if step <= 0 or tolerance <= 0:
            raise UsageError("--step and --tolerance must be positive")
        manifest = Manifest("gradcheck", seed=seed)
        reports = run_gradient_suite(seed, tolerance, step, _parse_list(ops))
        if not reports:
            raise UsageError(f"no ops matched: {ops}")

        store = RunStore(out)
        rows = [[r.op, f"{r.max_rel_err:.3e}", str(r.passed).lower()] for r in reports]
        manifest.output("gradcheck", store.save_csv("gradcheck.csv", ["op", "max_rel_err", "pass"], rows))
        manifest.write(store)

        table = Table(title="Gradient check")
        table.add_column("Op", style="cyan")
        table.add_column("Max rel err", justify="right")
        table.add_column("Pass", justify="center")
        for r in reports:
            table.add_row(r.op, f"{r.max_rel_err:.2e}", "[green]✓[/green]" if r.passed else "[red]✗[/red]")
        console.print(table)

        failed = [r.op for r in reports if not r.passed]
        if failed:
            console.print(f"[red]Error: {len(failed)} op(s) failed: {', '.join(failed)}[/red]")
            raise typer.Exit(3)
        console.print(f"[green]✓ All {len(reports)} ops pass[/green]")


@app.command("export-curves")
def export_curves(
    checkpoint: Path = typer.Option(..., "--checkpoint", help="Checkpoint written by train"),
    out: Path = typer.Option(..., "--out", "-o", help="Output directory"),
):
    """Write each view's global curve, view bias and composed curve as curves.csv."""
    from src.pipeline.trainer import Trainer

    with command_errors():
        manifest = Manifest("export-curves")
        manifest.input("checkpoint", checkpoint)
        trainer = Trainer.from_state(load_checkpoint(checkpoint))
        manifest.record.seed = trainer.config.seed

        rows = []
        for view_id, curves in trainer.curves().items():
            for index in range(len(curves["curve"])):
                rows.append(
                    [
                        view_id,
                        index,
                        f"{curves['global'][index]:.8f}",
                        f"{curves['bias'][index]:.8f}",
                        f"{curves['curve'][index]:.8f}",
                    ]
                )
        store = RunStore(out)
        manifest.output(
            "curves", store.save_csv("curves.csv", ["view_id", "index", "global", "bias", "curve"], rows)
        )
        manifest.write(store)
        console.print(f"[green]✓ Exported curves for {len(trainer.views)} views[/green]")


@app.command("compare")
def compare(
    out: Path = typer.Option(..., "--out", "-o", help="Output directory"),
    scene: Path = typer.Option(None, "--scene", help="Scene file (JSON)"),
    config: Path = typer.Option(None, "--config", "-c", help="TOML or JSON run configuration"),
    profile: str = typer.Option(None, "--profile", "-p", help="Degradation profile"),
    variants: str = typer.Option("full,baseline", "--variants", help="Comma-separated variants"),
    seeds: str = typer.Option("0,1,2", "--seeds", help="Comma-separated training seeds"),
    iterations: int = typer.Option(None, "--iterations", "-n", min=1, help="Iterations per run"),
):
    """Train each variant for each seed and compare held-out quality against clean ground truth."""
    from src.pipeline.experiments import VARIANTS, prepare_dataset, run_comparison

    with command_errors():
        if profile is not None and profile not in {p.value for p in Profile}:
            raise DataError(f"unknown profile: {profile}")
        try:
            seed_list = [int(s) for s in _parse_list(seeds) or []]
        except ValueError as e:
            raise UsageError(f"--seeds must be integers: {seeds}") from e
        variant_list = _parse_list(variants) or []
        unknown = [v for v in variant_list if v not in VARIANTS]
        if unknown:
            raise UsageError(f"unknown variant(s): {', '.join(unknown)}")

        run_config = _load_config(config, {"degrade": {"profile": profile}, "train": {"iterations": iterations}})
        manifest = Manifest("compare", config, run_config.degrade.seed)
        scene_file, scene_path = _scene_for(scene, run_config)
        manifest.input("scene", scene_path)

        dataset = prepare_dataset(scene_file, run_config.degrade, run_config.scene.background)
        rows = run_comparison(scene_file, dataset, variant_list, seed_list, run_config, console)

        store = RunStore(out)
        csv_rows = [
            [r.variant, f"{r.psnr:.4f}", f"{r.ssim:.4f}", f"{r.chroma_pooled:.4f}", f"{r.channel_imbalance:.4f}"]
            for r in rows
        ]
        manifest.output(
            "comparison",
            store.save_csv("comparison.csv", ["variant", "psnr", "ssim", "chroma_pooled", "channel_imbalance"], csv_rows),
        )
        manifest.write(store)

        table = Table(title=f"Held-out comparison ({len(seed_list)} seeds)")
        table.add_column("Variant", style="cyan")
        table.add_column("PSNR", justify="right")
        table.add_column("SSIM", justify="right")
        table.add_column("Chroma", justify="right")
        table.add_column("Imbalance", justify="right")
        for r in rows:
            chroma = "-" if np.isnan(r.chroma_pooled) else f"{r.chroma_pooled:.3f}"
            table.add_row(r.variant, f"{r.psnr:.2f}", f"{r.ssim:.4f}", chroma, f"{r.channel_imbalance:.3f}")
        console.print(table)


if __name__ == "__main__":
    app()
