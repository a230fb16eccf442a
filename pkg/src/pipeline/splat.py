"""Differentiable Gaussian splat renderer with dual colour attributes.

Cameras look along +z. A Gaussian at camera-space (x, y, z) projects to
u = fx x / z + cx, v = fy y / z + cy, and pixel (row i, column j) has its
centre at (u, v) = (j, i).
"""

import logging
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from src.models import CameraRecord, GaussianRecord


logger = logging.getLogger(__name__)

LOW_PASS = 0.3
TRANSMITTANCE_FLOOR = 1e-4
FOOTPRINT_SIGMAS = 3.0


def quaternion_to_rotation(q: torch.Tensor) -> torch.Tensor:
    """(..., 4) quaternions (w, x, y, z) to (..., 3, 3) rotations; normalizes first."""
    q = F.normalize(q, dim=-1)
    w, x, y, z = q.unbind(-1)
    R = torch.stack(
        [
            1 - 2 * y * y - 2 * z * z, 2 * x * y - 2 * w * z, 2 * x * z + 2 * w * y,
            2 * x * y + 2 * w * z, 1 - 2 * x * x - 2 * z * z, 2 * y * z - 2 * w * x,
            2 * x * z - 2 * w * y, 2 * y * z + 2 * w * x, 1 - 2 * x * x - 2 * y * y,
        ],
        dim=-1,
    )
    return R.reshape(*q.shape[:-1], 3, 3)


def adjusted_color(c: torch.Tensor, a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Channel-wise a * c + b."""
    return a * c + b


@dataclass
class Camera:
    view_id: str
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    world_to_camera: torch.Tensor
    near: float = 0.01

    @classmethod
    def from_record(cls, record: CameraRecord, dtype: torch.dtype = torch.float64) -> "Camera":
        return cls(
            view_id=record.view_id,
            fx=record.fx,
            fy=record.fy,
            cx=record.cx,
            cy=record.cy,
            width=record.width,
            height=record.height,
            world_to_camera=torch.tensor(record.matrix(), dtype=dtype),
            near=record.near,
        )

    def to_record(self) -> CameraRecord:
        return CameraRecord(
            view_id=self.view_id,
            fx=self.fx,
            fy=self.fy,
            cx=self.cx,
            cy=self.cy,
            width=self.width,
            height=self.height,
            world_to_camera=[float(v) for v in self.world_to_camera.reshape(-1)],
            near=self.near,
        )

    @property
    def rotation(self) -> torch.Tensor:
        return self.world_to_camera[:3, :3]

    @property
    def translation(self) -> torch.Tensor:
        return self.world_to_camera[:3, 3]


class GaussianCloud(nn.Module):
    """Anisotropic Gaussians with base colours c and per-Gaussian gain a and offset b.

    `ids` tags each Gaussian with its original index so depth ties sort the
    same way whatever the storage order.
    """

    def __init__(
        self,
        means: torch.Tensor,
        log_scales: torch.Tensor,
        quats: torch.Tensor,
        opacity_logits: torch.Tensor,
        colors: torch.Tensor,
        a: torch.Tensor | None = None,
        b: torch.Tensor | None = None,
        ids: torch.Tensor | None = None,
        optimize_geometry: bool = False,
    ):
        super().__init__()
        n = means.shape[0]
        self.means = nn.Parameter(means.clone(), requires_grad=optimize_geometry)
        self.log_scales = nn.Parameter(log_scales.clone(), requires_grad=optimize_geometry)
        self.quats = nn.Parameter(quats.clone(), requires_grad=optimize_geometry)
        self.opacity_logits = nn.Parameter(opacity_logits.clone())
        self.colors = nn.Parameter(colors.clone())
        self.a = nn.Parameter(a.clone() if a is not None else torch.ones_like(colors))
        self.b = nn.Parameter(b.clone() if b is not None else torch.zeros_like(colors))
        self.register_buffer("ids", ids.clone() if ids is not None else torch.arange(n))

    @classmethod
    def from_records(
        cls, records: list[GaussianRecord], dtype: torch.dtype = torch.float64, optimize_geometry: bool = False
    ) -> "GaussianCloud":
        def column(name: str, width: int) -> torch.Tensor:
            if not records:
                return torch.zeros((0, width), dtype=dtype)
            return torch.tensor([getattr(r, name) for r in records], dtype=dtype)

        opacity = torch.tensor([r.opacity_logit for r in records], dtype=dtype)
        return cls(
            means=column("mu", 3),
            log_scales=column("log_scales", 3),
            quats=column("quat", 4),
            opacity_logits=opacity,
            colors=column("color", 3),
            optimize_geometry=optimize_geometry,
        )

    def to_records(self) -> list[GaussianRecord]:
        """Export base attributes; colours are clamped into [0, 1]."""
        colors = self.colors.detach().clamp(0.0, 1.0)
        means, log_scales, quats = (p.detach() for p in self.geometry_parameters())
        return [
            GaussianRecord(
                mu=means[i].tolist(),
                log_scales=log_scales[i].tolist(),
                quat=quats[i].tolist(),
                opacity_logit=float(self.opacity_logits[i].detach()),
                color=colors[i].tolist(),
            )
            for i in range(len(self))
        ]

    def __len__(self) -> int:
        return self.means.shape[0]

    @property
    def dtype(self) -> torch.dtype:
        return self.colors.dtype

    @property
    def opacity(self) -> torch.Tensor:
        return torch.sigmoid(self.opacity_logits)

    def base_colors(self) -> torch.Tensor:
        return self.colors.clamp(0.0, 1.0)

    def output_colors(self, detach_base: bool = False) -> torch.Tensor:
        base = self.base_colors()
        if detach_base:
            base = base.detach()
        return adjusted_color(base, self.a, self.b).clamp(0.0, 1.0)

    def set_geometry_trainable(self, flag: bool) -> None:
        for p in (self.means, self.log_scales, self.quats):
            p.requires_grad_(flag)

    def geometry_parameters(self) -> list[nn.Parameter]:
        return [self.means, self.log_scales, self.quats]

    def permuted(self, order: torch.Tensor) -> "GaussianCloud":
        """Copy with storage reordered; ids travel with their Gaussians."""
        return GaussianCloud(
            means=self.means.detach()[order],
            log_scales=self.log_scales.detach()[order],
            quats=self.quats.detach()[order],
            opacity_logits=self.opacity_logits.detach()[order],
            colors=self.colors.detach()[order],
            a=self.a.detach()[order],
            b=self.b.detach()[order],
            ids=self.ids[order],
        )


@dataclass
class Projection:
    means2d: torch.Tensor  # N x 2
    cov2d: torch.Tensor  # N x 2 x 2
    depth: torch.Tensor  # N
    valid: torch.Tensor  # N, bool: in front of the near plane


@dataclass
class RenderedPair:
    image_in: torch.Tensor  # H x W x 3, base colours
    image_out: torch.Tensor  # H x W x 3, adjusted colours
    transmittance: torch.Tensor  # H x W


def project(cloud: GaussianCloud, camera: Camera) -> Projection:
    """EWA projection: Sigma_2d = J W Sigma W^T J^T + 0.3 I."""
    dtype = cloud.dtype
    W = camera.rotation.to(dtype)
    cam = cloud.means @ W.T + camera.translation.to(dtype)
    x, y, z = cam.unbind(-1)
    valid = z > camera.near
    z_safe = torch.where(valid, z, torch.ones_like(z))

    u = camera.fx * x / z_safe + camera.cx
    v = camera.fy * y / z_safe + camera.cy

    zeros = torch.zeros_like(z)
    J = torch.stack(
        [
            torch.stack([camera.fx / z_safe, zeros, -camera.fx * x / z_safe**2], dim=-1),
            torch.stack([zeros, camera.fy / z_safe, -camera.fy * y / z_safe**2], dim=-1),
        ],
        dim=-2,
    )

    R = quaternion_to_rotation(cloud.quats)
    variances = torch.exp(2.0 * cloud.log_scales)
    cov3d = (R * variances.unsqueeze(-2)) @ R.transpose(-1, -2)
    M = J @ W
    cov2d = M @ cov3d @ M.transpose(-1, -2) + LOW_PASS * torch.eye(2, dtype=dtype)
    return Projection(means2d=torch.stack([u, v], dim=-1), cov2d=cov2d, depth=z, valid=valid)


def compositing_weights(alphas: torch.Tensor, floor: float = TRANSMITTANCE_FLOOR) -> tuple[torch.Tensor, torch.Tensor]:
    """Front-to-back weights for depth-sorted alphas (N x P).

    A contribution is dropped once the transmittance in front of it is
    below `floor`. Returns (weights N x P, final transmittance P).
    """
    n, p = alphas.shape
    if n == 0:
        return alphas, torch.ones(p, dtype=alphas.dtype)
    ones = torch.ones((1, p), dtype=alphas.dtype)

    with torch.no_grad():
        front = torch.cat([ones, torch.cumprod(1.0 - alphas, dim=0)[:-1]], dim=0)
        active = (front >= floor).to(alphas.dtype)

    alphas = alphas * active
    through = torch.cumprod(1.0 - alphas, dim=0)
    front = torch.cat([ones, through[:-1]], dim=0)
    return alphas * front, through[-1]


def composite(
    colors: torch.Tensor,
    alphas: torch.Tensor,
    background: torch.Tensor,
    floor: float = TRANSMITTANCE_FLOOR,
) -> torch.Tensor:
    """Composite one pixel's depth-sorted (colour, alpha) list over the background."""
    weights, remaining = compositing_weights(alphas.reshape(-1, 1), floor)
    return weights[:, 0] @ colors.reshape(-1, 3) + remaining[0] * background


def _largest_eigenvalue(cov2d: torch.Tensor) -> torch.Tensor:
    mid = 0.5 * (cov2d[:, 0, 0] + cov2d[:, 1, 1])
    det = cov2d[:, 0, 0] * cov2d[:, 1, 1] - cov2d[:, 0, 1] * cov2d[:, 1, 0]
    return mid + torch.sqrt(torch.clamp(mid * mid - det, min=0.0))


def pixel_centers(height: int, width: int, dtype: torch.dtype) -> torch.Tensor:
    rows, cols = torch.meshgrid(
        torch.arange(height, dtype=dtype), torch.arange(width, dtype=dtype), indexing="ij"
    )
    return torch.stack([cols, rows], dim=-1).reshape(-1, 2)


def depth_order(depth: np.ndarray, ids: np.ndarray) -> np.ndarray:
    """Indices sorting by increasing depth, ties broken by id."""
    return np.lexsort((ids, depth))


def render_dual(
    cloud: GaussianCloud,
    camera: Camera,
    background: tuple[float, float, float] | torch.Tensor = (0.0, 0.0, 0.0),
    footprint_sigmas: float = FOOTPRINT_SIGMAS,
    transmittance_floor: float = TRANSMITTANCE_FLOOR,
    isolate_output: bool = False,
) -> RenderedPair:
    """Render base and adjusted colours with one shared set of compositing weights.

    With ``isolate_output`` the adjusted image is built from detached weights and
    base colours, so losses on it only reach the per-Gaussian ``a`` and ``b``.
    """
    dtype = cloud.dtype
    h, w = camera.height, camera.width
    bg = torch.as_tensor(background, dtype=dtype)

    def blank() -> RenderedPair:
        img = bg.expand(h, w, 3).clone()
        return RenderedPair(image_in=img, image_out=img.clone(), transmittance=torch.ones((h, w), dtype=dtype))

    if len(cloud) == 0:
        return blank()

    proj = project(cloud, camera)
    visible = torch.nonzero(proj.valid).squeeze(1)
    if visible.numel() == 0:
        return blank()
    if visible.numel() < len(cloud):
        logger.debug("culled %d Gaussians behind %s", len(cloud) - visible.numel(), camera.view_id)

    order_np = depth_order(proj.depth.detach()[visible].cpu().numpy(), cloud.ids[visible].cpu().numpy())
    order = visible[torch.as_tensor(order_np, dtype=torch.long)]

    means2d = proj.means2d[order]
    cov2d = proj.cov2d[order]
    inverse = torch.linalg.inv(cov2d)

    d = pixel_centers(h, w, dtype).unsqueeze(0) - means2d.unsqueeze(1)  # N x P x 2
    mahalanobis = torch.einsum("npi,nij,npj->np", d, inverse, d)
    alphas = cloud.opacity[order].unsqueeze(1) * torch.exp(-0.5 * mahalanobis)

    radius = footprint_sigmas * torch.sqrt(_largest_eigenvalue(cov2d.detach()))
    inside = (d.detach().abs() <= radius[:, None, None]).all(dim=-1)
    alphas = alphas * inside.to(dtype)

    weights, remaining = compositing_weights(alphas, transmittance_floor)
    fill = remaining.unsqueeze(1) * bg
    image_in = weights.T @ cloud.base_colors()[order] + fill
    if isolate_output:
        image_out = weights.detach().T @ cloud.output_colors(detach_base=True)[order] + fill.detach()
    else:
        image_out = weights.T @ cloud.output_colors()[order] + fill

    return RenderedPair(
        image_in=image_in.reshape(h, w, 3),
        image_out=image_out.reshape(h, w, 3),
        transmittance=remaining.reshape(h, w),
    )
