"""Joint optimization of the splat scene and the pseudo-enhancement modules."""

import logging
from dataclasses import dataclass
from typing import Any

import numpy as np
import torch
import torch.nn as nn
from rich.console import Console
from rich.progress import BarColumn, Progress, SpinnerColumn, TextColumn

from src.errors import DataError, SceneError, SingularMatrixError
from src.models import CameraRecord, EvalReport, LossRecord, MetricsRow, SceneFile, TrainConfig
from src.services.imaging import Image, channel_imbalance, psnr, ssim
from src.services.lab import chroma_dispersion
from .colorxform import SINGULAR_DET, cdf_curve, compose_curve, identity_curve, power_curve, s_curve
from .diffcore import backward
from .losses import LossTerms, curve_weight, loss_3dgs, loss_cc, loss_curve, loss_reg, loss_spa, loss_total, loss_tv
from .refine import ResidualBranch, pseudo_enhance
from .splat import Camera, GaussianCloud, render_dual
from .viewadapt import CurveBiasGenerator, ScalarGenerator, ViewScalars, generate_view_scalars


logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = 1


def torch_dtype(name: str) -> torch.dtype:
    return torch.float64 if name == "float64" else torch.float32


@dataclass
class TrainingView:
    """One training view: degraded input, camera, colour matrix and cached CDF curve."""

    view_id: str
    camera: Camera
    image: torch.Tensor
    cdf: torch.Tensor
    matrix: nn.Parameter

    @classmethod
    def create(cls, camera: Camera, image: Image, dtype: torch.dtype, matrix_trainable: bool = True) -> "TrainingView":
        if image.shape != (camera.height, camera.width):
            raise DataError(
                f"view {camera.view_id}: image is {image.shape}, camera expects {(camera.height, camera.width)}"
            )
        return cls(
            view_id=camera.view_id,
            camera=camera,
            image=image.to_tensor(dtype),
            cdf=cdf_curve(image, dtype),
            matrix=nn.Parameter(torch.eye(3, dtype=dtype), requires_grad=matrix_trainable),
        )

    @property
    def input_mean(self) -> float:
        return float(self.image.mean())


@dataclass
class PseudoLabel:
    target: torch.Tensor
    curve: torch.Tensor
    scalars: ViewScalars


class Trainer:
    """Round-robin, one view per iteration, single Adam optimizer with per-group learning rates."""

    def __init__(
        self,
        cloud: GaussianCloud,
        views: list[TrainingView],
        config: TrainConfig,
        background: tuple[float, float, float] = (0.0, 0.0, 0.0),
    ):
        if not views:
            raise SceneError("training needs at least one view")
        if len(cloud) == 0:
            raise SceneError("scene has no Gaussians")

        self.config = config
        self.dtype = torch_dtype(config.dtype)
        self.background = torch.tensor(background, dtype=self.dtype)
        self.views = views
        self.iteration = 0
        self.log: list[LossRecord] = []

        torch.manual_seed(config.seed)
        self.cloud = cloud.to(self.dtype)
        self.cloud.set_geometry_trainable(config.optimize_geometry)
        self.global_curve = nn.Parameter(identity_curve(self.dtype), requires_grad=config.use_global_curve)
        self.curve_generator = CurveBiasGenerator().to(self.dtype)
        self.scalar_generator = ScalarGenerator().to(self.dtype)
        self.residual = ResidualBranch(config.effective_clip, config.residual_block).to(self.dtype)
        for view in views:
            view.matrix.requires_grad_(config.use_matrix)

        self.optimizer = torch.optim.Adam(self._param_groups(), betas=(0.9, 0.999), eps=1e-8)

    @property
    def is_baseline(self) -> bool:
        return self.config.method == "baseline"

    def _param_groups(self) -> list[dict[str, Any]]:
        lr = self.config.lr
        cloud = self.cloud
        groups = [
            ("colors", [cloud.colors], lr.colors),
            ("opacity", [cloud.opacity_logits], lr.opacity),
        ]
        if self.config.optimize_geometry:
            groups.append(("geometry", cloud.geometry_parameters(), lr.geometry))
        if not self.is_baseline:
            groups.append(("adjust", [cloud.a, cloud.b], lr.adjust))
            if self.config.use_global_curve:
                groups.append(("curve", [self.global_curve], lr.curve))
            if self.config.use_matrix:
                groups.append(("matrix", [v.matrix for v in self.views], lr.matrix))
            networks = list(self.scalar_generator.parameters())
            if self.config.use_curve_bias:
                networks += list(self.curve_generator.parameters())
            if self.config.use_residual:
                networks += list(self.residual.parameters())
            groups.append(("networks", networks, lr.networks))
        return [{"name": name, "params": params, "lr": rate} for name, params, rate in groups]

    # Forward pieces

    def pseudo_label(self, view: TrainingView) -> PseudoLabel:
        """C_out = clamp(L_k(C_in M_k) M_k^-1 + R(C_in)), with L_k = L^g + L_k^b."""
        w2c = view.camera.world_to_camera.to(self.dtype)
        if self.config.use_curve_bias:
            bias = self.curve_generator(view.image, w2c)
        else:
            bias = torch.zeros_like(self.global_curve)
        curve = compose_curve(self.global_curve, bias)
        scalars = generate_view_scalars(view.image, w2c, self.scalar_generator)
        branch = self.residual if self.config.use_residual else None
        return PseudoLabel(target=pseudo_enhance(view.image, view.matrix, curve, branch), curve=curve, scalars=scalars)

    def compute_terms(self, view: TrainingView, iteration: int) -> LossTerms:
        cfg = self.config
        pair = render_dual(
            self.cloud, view.camera, self.background, isolate_output=not cfg.output_updates_base
        )
        zero = pair.image_in.new_zeros(())

        if self.is_baseline:
            reg = loss_3dgs(pair.image_in, view.image, cfg.dssim_weight)
            return LossTerms(reg=reg, spa=zero, tv=zero, curve=zero, cc=zero)

        label = self.pseudo_label(view)
        s = label.scalars
        reg = loss_reg(pair.image_in, view.image, pair.image_out, label.target, cfg.dssim_weight)
        spa = loss_spa(pair.image_out, view.image) if cfg.use_spa else zero
        tv = loss_tv(label.curve)
        if cfg.use_curve:
            omega = curve_weight(iteration, cfg.curve_switch_iteration)
            curve = loss_curve(
                label.curve, view.cdf, power_curve(s.G, self.dtype), s_curve(s.A, s.B, self.dtype), omega
            )
        else:
            curve = zero
        cc = loss_cc([pair.image_out], [s.S]) if cfg.use_cc else zero
        return LossTerms(reg=reg, spa=spa, tv=tv, curve=curve, cc=cc)

    def objective(self, view: TrainingView, iteration: int) -> tuple[torch.Tensor, LossTerms]:
        terms = self.compute_terms(view, iteration)
        return loss_total(terms, self.config.effective_eta), terms

    # Optimization

    def step(self) -> LossRecord:
        view = self.views[self.iteration % len(self.views)]
        self.optimizer.zero_grad(set_to_none=True)
        total, terms = self.objective(view, self.iteration)
        backward(total)

        previous = view.matrix.detach().clone()
        self.optimizer.step()
        self._guard_matrix(view, previous)

        record = LossRecord(iteration=self.iteration, view_id=view.view_id, total=float(total.detach()), **terms.as_floats())
        self.log.append(record)
        self.iteration += 1
        return record

    def _guard_matrix(self, view: TrainingView, previous: torch.Tensor) -> None:
        """Undo a matrix update that would make the matrix singular."""
        det = float(torch.linalg.det(view.matrix.detach()))
        if not np.isfinite(det) or abs(det) < SINGULAR_DET:
            with torch.no_grad():
                view.matrix.copy_(previous)
            logger.warning("skipped singular matrix update for view %s (det %.2e)", view.view_id, det)

    def train(self, iterations: int | None = None, console: Console | None = None) -> list[LossRecord]:
        """Run until `iterations` total steps (default config.iterations) have been taken."""
        target = self.config.iterations if iterations is None else iterations
        remaining = max(0, target - self.iteration)
        if remaining == 0:
            return self.log

        if console is None:
            for _ in range(remaining):
                self._step_and_log()
            return self.log

        with Progress(
            SpinnerColumn(),
            TextColumn("[progress.description]{task.description}"),
            BarColumn(),
            TextColumn("{task.completed}/{task.total}"),
            console=console,
        ) as progress:
            task = progress.add_task("Training...", total=target, completed=self.iteration)
            for _ in range(remaining):
                record = self._step_and_log()
                progress.update(task, advance=1, description=f"Training (loss {record.total:.4f})")
            progress.update(task, description="[green]✓ Training complete")
        return self.log

    def _step_and_log(self) -> LossRecord:
        record = self.step()
        if record.iteration % self.config.log_every == 0 or self.iteration == self.config.iterations:
            logger.info(
                "iter %d view %s: total %.5f reg %.5f spa %.5f tv %.2e curve %.5f cc %.5f",
                record.iteration, record.view_id, record.total, record.reg, record.spa, record.tv,
                record.curve, record.cc,
            )
        return record

    # Inspection

    def view(self, view_id: str) -> TrainingView:
        for v in self.views:
            if v.view_id == view_id:
                return v
        raise DataError(f"unknown training view: {view_id}")

    def curves(self) -> dict[str, dict[str, np.ndarray]]:
        """Per view: global curve, view bias and the composed curve."""
        out = {}
        with torch.no_grad():
            g = self.global_curve.detach()
            for v in self.views:
                if self.config.use_curve_bias and not self.is_baseline:
                    bias = self.curve_generator(v.image, v.camera.world_to_camera.to(self.dtype))
                else:
                    bias = torch.zeros_like(g)
                out[v.view_id] = {
                    "global": g.cpu().numpy(),
                    "bias": bias.cpu().numpy(),
                    "curve": compose_curve(g, bias).cpu().numpy(),
                }
        return out

    def residual_maps(self) -> dict[str, torch.Tensor]:
        with torch.no_grad():
            return {v.view_id: self.residual(v.image) for v in self.views}

    # Checkpoint state

    def state(self) -> dict[str, Any]:
        return {
            "format_version": CHECKPOINT_FORMAT,
            "iteration": self.iteration,
            "config": self.config.model_dump(mode="json"),
            "config_hash": self.config.config_hash(),
            "background": self.background.tolist(),
            "cloud": {k: v.detach().clone() for k, v in self.cloud.state_dict().items()},
            "global_curve": self.global_curve.detach().clone(),
            "curve_generator": self.curve_generator.state_dict(),
            "scalar_generator": self.scalar_generator.state_dict(),
            "residual": self.residual.state_dict(),
            "optimizer": self.optimizer.state_dict(),
            "views": [
                {
                    "camera": v.camera.to_record().model_dump(mode="json"),
                    "image": v.image.detach().clone(),
                    "matrix": v.matrix.detach().clone(),
                    "cdf": v.cdf.clone(),
                }
                for v in self.views
            ],
            "log": [r.model_dump(mode="json") for r in self.log],
        }

    @classmethod
    def from_state(cls, state: dict[str, Any]) -> "Trainer":
        if state.get("format_version") != CHECKPOINT_FORMAT:
            raise DataError(f"unsupported checkpoint format: {state.get('format_version')}")
        config = TrainConfig.model_validate(state["config"])
        dtype = torch_dtype(config.dtype)

        views = []
        for entry in state["views"]:
            camera = Camera.from_record(CameraRecord.model_validate(entry["camera"]), dtype)
            view = TrainingView.create(camera, Image.from_tensor(entry["image"]), dtype)
            views.append(view)

        trainer = cls(cloud_from_state(state["cloud"]), views, config, tuple(state["background"]))
        with torch.no_grad():
            trainer.global_curve.copy_(state["global_curve"])
            for view, entry in zip(trainer.views, state["views"]):
                view.matrix.copy_(entry["matrix"])
                view.cdf = entry["cdf"].to(dtype)
        trainer.curve_generator.load_state_dict(state["curve_generator"])
        trainer.scalar_generator.load_state_dict(state["scalar_generator"])
        trainer.residual.load_state_dict(state["residual"])
        trainer.optimizer.load_state_dict(state["optimizer"])
        trainer.iteration = state["iteration"]
        trainer.log = [LossRecord.model_validate(r) for r in state["log"]]
        return trainer


def cloud_from_state(cloud_state: dict[str, torch.Tensor]) -> GaussianCloud:
    return GaussianCloud(
        means=cloud_state["means"],
        log_scales=cloud_state["log_scales"],
        quats=cloud_state["quats"],
        opacity_logits=cloud_state["opacity_logits"],
        colors=cloud_state["colors"],
        a=cloud_state["a"],
        b=cloud_state["b"],
        ids=cloud_state["ids"],
    )


def build_trainer(
    scene: SceneFile,
    images: dict[str, Image],
    config: TrainConfig,
    view_ids: list[str] | None = None,
    background: tuple[float, float, float] = (0.0, 0.0, 0.0),
) -> Trainer:
    """Trainer over the scene's Gaussians and the given input images (all cameras with an image by default)."""
    dtype = torch_dtype(config.dtype)
    ids = view_ids if view_ids is not None else [c.view_id for c in scene.cameras if c.view_id in images]
    views = []
    for view_id in ids:
        record = scene.camera(view_id)
        if record is None:
            raise SceneError(f"no camera for view {view_id}")
        if view_id not in images:
            raise DataError(f"no input image for view {view_id}")
        views.append(TrainingView.create(Camera.from_record(record, dtype), images[view_id], dtype, config.use_matrix))

    cloud = GaussianCloud.from_records(scene.gaussians, dtype, config.optimize_geometry)
    return Trainer(cloud, views, config, background)


def render_novel(
    cloud: GaussianCloud,
    cameras: list[Camera],
    background: tuple[float, float, float] | torch.Tensor = (0.0, 0.0, 0.0),
) -> dict[str, Image]:
    """Render only the adjusted-colour image for each camera; no per-view modules are applied."""
    renders = {}
    with torch.no_grad():
        for camera in cameras:
            if camera.width < 1 or camera.height < 1:
                raise SceneError(f"invalid camera {camera.view_id}")
            pair = render_dual(cloud, camera, background)
            renders[camera.view_id] = Image.from_tensor(pair.image_out)
    return renders


def evaluate(renders: list[Image], truths: list[Image], view_ids: list[str] | None = None) -> EvalReport:
    """Per-view PSNR/SSIM, their mean, chroma dispersion and channel imbalance of the renders."""
    if len(renders) != len(truths):
        raise DataError(f"{len(renders)} renders vs {len(truths)} ground-truth images")
    if not renders:
        raise DataError("nothing to evaluate")
    view_ids = view_ids or [str(i) for i in range(len(renders))]

    rows = [
        MetricsRow(view_id=vid, psnr=psnr(r, t), ssim=ssim(r, t))
        for vid, r, t in zip(view_ids, renders, truths)
    ]
    mean = MetricsRow(
        view_id="mean",
        psnr=float(np.mean([r.psnr for r in rows])),
        ssim=float(np.mean([r.ssim for r in rows])),
    )
    chroma = chroma_dispersion(renders) if len(renders) >= 2 else None
    return EvalReport(rows=rows, mean=mean, chroma=chroma, channel_imbalance=channel_imbalance(renders))
