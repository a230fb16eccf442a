"""Training objectives. Every function returns a differentiable scalar tensor.

Images are H x W x 3 tensors; curves are 256-entry tensors.
"""

from dataclasses import dataclass, fields

import torch
import torch.nn.functional as F

from src.errors import ImagingError, NonFiniteError
from src.services.imaging import structural_similarity


REGION = 4
CURVE_WEIGHT = 10.0
COLOR_SATURATION_WEIGHT = 0.1
OMEGA_EARLY = 1.0
OMEGA_LATE = 0.1
MEAN_GUARD = 1e-8


def loss_3dgs(rendered: torch.Tensor, target: torch.Tensor, dssim_weight: float = 0.2) -> torch.Tensor:
    """lambda * (1 - SSIM) / 2 + (1 - lambda) * L1."""
    if rendered.shape != target.shape:
        raise ImagingError(f"dimension mismatch: {tuple(rendered.shape)} vs {tuple(target.shape)}")
    l1 = (rendered - target).abs().mean()
    if dssim_weight == 0:
        return l1
    dssim = (1.0 - structural_similarity(rendered, target)) / 2.0
    return dssim_weight * dssim + (1.0 - dssim_weight) * l1


def loss_reg(
    rendered_in: torch.Tensor,
    target_in: torch.Tensor,
    rendered_out: torch.Tensor,
    target_out: torch.Tensor,
    dssim_weight: float = 0.2,
) -> torch.Tensor:
    return loss_3dgs(rendered_in, target_in, dssim_weight) + loss_3dgs(rendered_out, target_out, dssim_weight)


def _pooled_gray(image: torch.Tensor) -> torch.Tensor:
    gray = image.mean(dim=2)[None, None]
    return F.avg_pool2d(gray, REGION)[0, 0]


def loss_spa(rendered_out: torch.Tensor, target_in: torch.Tensor) -> torch.Tensor:
    """Spatial consistency between neighbouring 4x4 regions, input differences scaled by 0.5 / mean(C_in).

    Each in-bounds 4-neighbour pair is counted from both sides; the sum is
    divided by the number of regions.
    """
    if rendered_out.shape != target_in.shape:
        raise ImagingError("dimension mismatch in spatial loss")
    if min(rendered_out.shape[0], rendered_out.shape[1]) < 2 * REGION:
        raise ImagingError("image too small to pool for the spatial loss")

    scale = 0.5 / target_in.mean().clamp_min(MEAN_GUARD)
    out = _pooled_gray(rendered_out)
    ref = _pooled_gray(target_in)

    total = out.new_zeros(())
    for dim in (0, 1):
        d_out = torch.diff(out, dim=dim).abs()
        d_ref = torch.diff(ref, dim=dim).abs()
        # Each difference appears once per direction (x -> neighbour and neighbour -> x).
        total = total + 2.0 * ((d_out - scale * d_ref) ** 2).sum()
    return total / out.numel()


def _safe_pow(base: torch.Tensor, exponent: torch.Tensor) -> torch.Tensor:
    """base ** exponent with a zero result (and zero gradient) where base == 0."""
    positive = base > 0
    safe = torch.where(positive, base, torch.ones_like(base))
    return torch.where(positive, safe**exponent, torch.zeros_like(base))


CHANNEL_PAIRS = ((0, 1), (1, 2), (0, 2))


def color_constancy_term(image: torch.Tensor, S: torch.Tensor | float) -> torch.Tensor:
    """Minkowski channel-pair distance minus 0.1 times the saturation term for one view."""
    x = image.clamp(0.0, 1.0)
    S = torch.as_tensor(S, dtype=x.dtype)
    powered = _safe_pow(x, S)

    distances = []
    for p, q in CHANNEL_PAIRS:
        m = (powered[..., p] - powered[..., q]).abs().mean()
        distances.append(_safe_pow(m, 1.0 / S))
    minkowski = torch.stack(distances).mean()

    channel_mean = x.mean(dim=2)
    channel_min = x.min(dim=2).values
    lit = channel_mean >= MEAN_GUARD
    ratio = channel_min / torch.where(lit, channel_mean, torch.ones_like(channel_mean))
    delta = torch.where(lit, 1.0 - ratio, torch.zeros_like(ratio)).mean()

    return minkowski - COLOR_SATURATION_WEIGHT * delta


def loss_cc(images: list[torch.Tensor], orders: list[torch.Tensor | float]) -> torch.Tensor:
    """Mean over views of the per-view colour constancy term."""
    if len(images) != len(orders):
        raise ValueError("one Minkowski order per view is required")
    if not images:
        return torch.zeros(())
    return torch.stack([color_constancy_term(img, s) for img, s in zip(images, orders)]).mean()


def curve_weight(iteration: int, switch: int = 3000) -> float:
    """omega: 1.0 before `switch`, 0.1 from it on."""
    return OMEGA_EARLY if iteration < switch else OMEGA_LATE


def loss_curve(
    curve: torch.Tensor,
    cdf: torch.Tensor,
    power_prior: torch.Tensor,
    s_prior: torch.Tensor,
    omega: float,
) -> torch.Tensor:
    """omega * mean((L - L_cdf)^2) + 0.5 * mean((L - L_po * L_s)^2)."""
    return omega * ((curve - cdf) ** 2).mean() + 0.5 * ((curve - power_prior * s_prior) ** 2).mean()


def loss_tv(curve: torch.Tensor) -> torch.Tensor:
    return (torch.diff(curve) ** 2).sum() / 255.0


@dataclass
class LossTerms:
    reg: torch.Tensor
    spa: torch.Tensor
    tv: torch.Tensor
    curve: torch.Tensor
    cc: torch.Tensor

    def as_floats(self) -> dict[str, float]:
        return {f.name: float(getattr(self, f.name).detach()) for f in fields(self)}


def loss_total(terms: LossTerms, eta: float) -> torch.Tensor:
    """L_reg + L_spa + L_tv + 10 L_curve + eta L_cc; raises on the first non-finite component."""
    for f in fields(terms):
        value = getattr(terms, f.name)
        if not torch.isfinite(value).all():
            raise NonFiniteError(f"non-finite loss component: {f.name}")
    return terms.reg + terms.spa + terms.tv + CURVE_WEIGHT * terms.curve + eta * terms.cc
