"""Finite-difference checks for every differentiable op, on small float64 inputs.

Inputs are placed away from clamp boundaries and LUT knots so central
differences see a single smooth piece.
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn as nn

from src.models import CameraRecord, DegradationMode, DegradationParams, GaussianRecord, GradReport, SceneFile, TrainConfig
from src.services.degrade import degrade
from . import colorxform as cx
from .diffcore import Parameter, finite_diff_check
from .losses import loss_3dgs, loss_cc, loss_curve, loss_reg, loss_spa, loss_tv
from .refine import ResidualBranch, pseudo_enhance, residual_map
from .splat import Camera, GaussianCloud, adjusted_color, composite, render_dual
from .trainer import build_trainer, render_novel
from .viewadapt import CurveBiasGenerator, ScalarGenerator, generate_curve_bias, generate_view_scalars


logger = logging.getLogger(__name__)

DTYPE = torch.float64


@dataclass
class GradCase:
    op: str
    closure: Callable[[], torch.Tensor]
    params: list[Parameter]
    entries: int | None = None
    indices: dict[str, list[int]] = field(default_factory=dict)


class _Inputs:
    """Seeded float64 tensors."""

    def __init__(self, seed: int):
        self.rng = np.random.default_rng(seed)

    def uniform(self, shape, low: float, high: float) -> torch.Tensor:
        return torch.tensor(self.rng.uniform(low, high, size=shape), dtype=DTYPE)

    def normal(self, shape, scale: float = 1.0) -> torch.Tensor:
        return torch.tensor(self.rng.normal(0.0, scale, size=shape), dtype=DTYPE)

    def mid_knot(self, shape) -> torch.Tensor:
        """Values halfway between LUT knots, jittered by a tenth of a bin."""
        k = self.rng.integers(20, 230, size=shape)
        jitter = self.rng.uniform(-0.1, 0.1, size=shape)
        return torch.tensor((k + 0.5 + jitter) / 255.0, dtype=DTYPE)


def _affine_curve(inputs: _Inputs) -> torch.Tensor:
    """A LUT with no kinks: offset plus slope on the knot grid."""
    return 0.05 + 0.9 * cx.curve_grid(DTYPE) + inputs.normal((), 0.01)


def _randomize_head(layer: nn.Module, inputs: _Inputs, scale: float = 0.05) -> None:
    with torch.no_grad():
        layer.weight.copy_(inputs.normal(tuple(layer.weight.shape), scale))
        layer.bias.copy_(inputs.normal(tuple(layer.bias.shape), scale))


def _near_identity(inputs: _Inputs, scale: float = 0.03) -> torch.Tensor:
    return torch.eye(3, dtype=DTYPE) + inputs.normal((3, 3), scale)


def _colorxform_cases(inputs: _Inputs) -> list[GradCase]:
    cases = []

    img = Parameter.create("image", inputs.uniform((4, 4, 3), 0.2, 0.8))
    M = Parameter.create("matrix", _near_identity(inputs, 0.05))
    w = inputs.normal((4, 4, 3))
    cases.append(GradCase("apply_matrix", lambda: (cx.apply_matrix(img.tensor, M.tensor) * w).sum(), [img, M]))

    Minv = Parameter.create("matrix", torch.diag(torch.tensor([1.0, 2.0, 4.0], dtype=DTYPE)) + inputs.normal((3, 3), 0.05))
    w33 = inputs.normal((3, 3))
    cases.append(GradCase("invert_matrix", lambda: (cx.invert_matrix(Minv.tensor) * w33).sum(), [Minv]))

    values = Parameter.create("values", inputs.mid_knot((4, 4, 3)))
    lut = Parameter.create("curve", cx.power_curve(0.7, DTYPE))
    wv = inputs.normal((4, 4, 3))
    cases.append(
        GradCase("apply_curve", lambda: (cx.apply_curve(values.tensor, lut.tensor) * wv).sum(), [values, lut])
    )

    g = Parameter.create("global", inputs.uniform(256, 0.0, 1.0))
    b = Parameter.create("bias", inputs.normal(256, 0.05))
    w256 = inputs.normal(256)
    cases.append(
        GradCase("compose_curve", lambda: (cx.compose_curve(g.tensor, b.tensor) * w256).sum(), [g, b], entries=16)
    )

    G = Parameter.create("G", 1.3)
    A = Parameter.create("A", 0.37)
    B = Parameter.create("B", 1.7)
    wp = inputs.normal(256)
    cases.append(
        GradCase(
            "curve_priors",
            lambda: ((cx.power_curve(G.tensor) * cx.s_curve(A.tensor, B.tensor)) * wp).sum(),
            [G, A, B],
        )
    )

    gimg = Parameter.create("image", inputs.uniform((4, 4, 3), 0.25, 0.75))
    gM = Parameter.create("matrix", _near_identity(inputs))
    gL = Parameter.create("curve", _affine_curve(inputs))
    wg = inputs.normal((4, 4, 3))
    cases.append(
        GradCase(
            "global_adjust",
            lambda: (cx.global_adjust(gimg.tensor, gM.tensor, gL.tensor) * wg).sum(),
            [gimg, gM, gL],
            entries=24,
        )
    )
    return cases


def _network_cases(inputs: _Inputs) -> list[GradCase]:
    cases = []
    img = inputs.uniform((8, 8, 3), 0.25, 0.75)

    branch = ResidualBranch(clip=0.5).to(DTYPE)
    _randomize_head(branch.head, inputs)
    dw = Parameter("dwconv", branch.blocks[0].dwconv.weight)
    cases.append(GradCase("residual_map", lambda: residual_map(img, branch).mean(), [dw], entries=12))

    pe_branch = ResidualBranch(clip=0.5).to(DTYPE)
    _randomize_head(pe_branch.head, inputs, 0.02)
    pM = Parameter.create("matrix", _near_identity(inputs))
    pL = Parameter.create("curve", _affine_curve(inputs))
    stem = Parameter("stem", pe_branch.stem.weight)
    wp = inputs.normal((8, 8, 3))
    cases.append(
        GradCase(
            "pseudo_enhance",
            lambda: (pseudo_enhance(img, pM.tensor, pL.tensor, pe_branch) * wp).sum(),
            [pM, pL, stem],
            entries=12,
        )
    )

    w2c = torch.eye(4, dtype=DTYPE)
    w2c[2, 3] = 2.5
    bias_gen = CurveBiasGenerator().to(DTYPE)
    _randomize_head(bias_gen.ffn[-1], inputs)
    query = Parameter("to_query", bias_gen.to_query.weight)
    cases.append(
        GradCase("generate_curve_bias", lambda: generate_curve_bias(img, w2c, bias_gen).sum(), [query], entries=12)
    )

    scalar_gen = ScalarGenerator().to(DTYPE)
    _randomize_head(scalar_gen.ffn[-1], inputs)
    trunk = Parameter("encoder", scalar_gen.encoder[0].weight)

    def scalars_sum() -> torch.Tensor:
        s = generate_view_scalars(img, w2c, scalar_gen)
        return s.S + s.G + s.A + s.B

    cases.append(GradCase("generate_view_scalars", scalars_sum, [trunk], entries=12))
    return cases


def _tiny_camera(view_id: str, size: int, tx: float = 0.0) -> CameraRecord:
    m = np.eye(4)
    m[0, 3] = tx
    return CameraRecord(
        view_id=view_id,
        fx=float(size),
        fy=float(size),
        cx=(size - 1) / 2.0,
        cy=(size - 1) / 2.0,
        width=size,
        height=size,
        world_to_camera=m.reshape(-1).tolist(),
    )


def _tiny_gaussians(inputs: _Inputs, n: int) -> list[GaussianRecord]:
    rng = inputs.rng
    records = []
    for _ in range(n):
        q = rng.normal(size=4)
        records.append(
            GaussianRecord(
                mu=[float(rng.uniform(-0.3, 0.3)), float(rng.uniform(-0.3, 0.3)), float(rng.uniform(2.0, 3.0))],
                log_scales=np.log(rng.uniform(0.2, 0.35, size=3)).tolist(),
                quat=(q / np.linalg.norm(q)).tolist(),
                opacity_logit=float(rng.uniform(-0.5, 0.8)),
                color=rng.uniform(0.3, 0.7, size=3).tolist(),
            )
        )
    return records


def _splat_cases(inputs: _Inputs) -> list[GradCase]:
    cases = []

    c = Parameter.create("c", inputs.uniform((5, 3), 0.2, 0.8))
    a = Parameter.create("a", inputs.uniform((5, 3), 0.8, 1.2))
    b = Parameter.create("b", inputs.uniform((5, 3), -0.1, 0.1))
    w = inputs.normal((5, 3))
    cases.append(GradCase("adjusted_color", lambda: (adjusted_color(c.tensor, a.tensor, b.tensor) * w).sum(), [c, a, b]))

    colors = Parameter.create("colors", inputs.uniform((4, 3), 0.2, 0.8))
    alphas = Parameter.create("alphas", inputs.uniform(4, 0.2, 0.6))
    bg = torch.tensor([0.1, 0.2, 0.3], dtype=DTYPE)
    w3 = inputs.normal(3)
    cases.append(
        GradCase("composite", lambda: composite(colors.tensor, alphas.tensor, bg) @ w3, [colors, alphas])
    )

    cloud = GaussianCloud.from_records(_tiny_gaussians(inputs, 5), DTYPE)
    with torch.no_grad():
        cloud.a.copy_(inputs.uniform((5, 3), 0.95, 1.05))
        cloud.b.copy_(inputs.uniform((5, 3), -0.05, 0.05))
    camera = Camera.from_record(_tiny_camera("cam", 12), DTYPE)
    w_in = inputs.normal((12, 12, 3))
    w_out = inputs.normal((12, 12, 3))

    def render_objective() -> torch.Tensor:
        pair = render_dual(cloud, camera)
        return (pair.image_in * w_in).sum() + (pair.image_out * w_out).sum()

    params = [
        Parameter("colors", cloud.colors),
        Parameter("opacity_logits", cloud.opacity_logits),
        Parameter("a", cloud.a),
        Parameter("b", cloud.b),
    ]
    cases.append(GradCase("render_dual", render_objective, params, entries=8))
    return cases


def _loss_cases(inputs: _Inputs) -> list[GradCase]:
    cases = []

    rendered = Parameter.create("rendered", inputs.uniform((12, 12, 3), 0.1, 0.9))
    target = inputs.uniform((12, 12, 3), 0.1, 0.9)
    cases.append(GradCase("loss_3dgs", lambda: loss_3dgs(rendered.tensor, target, 0.2), [rendered], entries=24))

    r_in = inputs.uniform((12, 12, 3), 0.1, 0.9)
    c_in = inputs.uniform((12, 12, 3), 0.1, 0.9)
    r_out = Parameter.create("rendered_out", inputs.uniform((12, 12, 3), 0.1, 0.9))
    c_out = inputs.uniform((12, 12, 3), 0.1, 0.9)
    cases.append(
        GradCase("loss_reg", lambda: loss_reg(r_in, c_in, r_out.tensor, c_out, 0.2), [r_out], entries=24)
    )

    spa_out = Parameter.create("rendered_out", inputs.uniform((8, 8, 3), 0.1, 0.9))
    spa_in = inputs.uniform((8, 8, 3), 0.1, 0.9)
    cases.append(GradCase("loss_spa", lambda: loss_spa(spa_out.tensor, spa_in), [spa_out], entries=24))

    cc_img = Parameter.create("image", inputs.uniform((6, 6, 3), 0.1, 0.9))
    S = Parameter.create("S", 3.0)
    cases.append(GradCase("loss_cc", lambda: loss_cc([cc_img.tensor], [S.tensor]), [cc_img, S], entries=24))

    L = Parameter.create("curve", cx.curve_grid(DTYPE) + inputs.normal(256, 0.02))
    cdf = cx.curve_grid(DTYPE) ** 0.8
    po = cx.power_curve(1.2, DTYPE)
    sc = cx.s_curve(0.45, 1.5, DTYPE)
    cases.append(GradCase("loss_curve", lambda: loss_curve(L.tensor, cdf, po, sc, 1.0), [L], entries=16))
    cases.append(GradCase("loss_tv", lambda: loss_tv(L.tensor), [L], entries=16))
    return cases


def _total_case(inputs: _Inputs) -> GradCase:
    """Full objective over a two-view 8x8 scene, with respect to two global LUT entries."""
    size = 8
    scene = SceneFile(
        gaussians=_tiny_gaussians(inputs, 4),
        cameras=[_tiny_camera("left", size, 0.1), _tiny_camera("right", size, -0.1)],
    )
    clean = render_novel(
        GaussianCloud.from_records(scene.gaussians, DTYPE),
        [Camera.from_record(c, DTYPE) for c in scene.cameras],
    )
    params = DegradationParams(mode=DegradationMode.LIGHTNESS, K=0.6, gamma=1.2)
    degraded = {k: degrade(v, params) for k, v in clean.items()}
    trainer = build_trainer(scene, degraded, TrainConfig(dtype="float64", dssim_weight=0.0, scenario="color"))

    def objective() -> torch.Tensor:
        return torch.stack([trainer.objective(view, 0)[0] for view in trainer.views]).sum()

    lut = Parameter("global_curve", trainer.global_curve)
    return GradCase("loss_total", objective, [lut], indices={"global_curve": [100, 128]})


def build_cases(seed: int = 0) -> list[GradCase]:
    torch.manual_seed(seed)
    inputs = _Inputs(seed)
    return [
        *_colorxform_cases(inputs),
        *_network_cases(inputs),
        *_splat_cases(inputs),
        *_loss_cases(inputs),
        _total_case(inputs),
    ]


def run_gradient_suite(
    seed: int = 0,
    tolerance: float = 1e-4,
    step: float = 1e-5,
    ops: list[str] | None = None,
) -> list[GradReport]:
    """One GradReport per op, in suite order."""
    reports = []
    for case in build_cases(seed):
        if ops and case.op not in ops:
            continue
        report = finite_diff_check(
            case.closure,
            case.params,
            tolerance=tolerance,
            step=step,
            entries=case.entries,
            indices=case.indices,
            seed=seed,
            op=case.op,
        )
        reports.append(report)
    failed = [r.op for r in reports if not r.passed]
    logger.info("gradient suite: %d/%d ops pass", len(reports) - len(failed), len(reports))
    if failed:
        logger.warning("gradient check failed for: %s", ", ".join(failed))
    return reports

