"""Local pixel-wise residual refinement and the pseudo-enhanced target."""

from typing import Literal

import torch
import torch.nn as nn
import torch.nn.functional as F

from src.errors import NonFiniteError
from .colorxform import global_adjust


WIDTH = 16
EXPANSION = 4


def _pad(x: torch.Tensor, p: int) -> torch.Tensor:
    # Reflect padding needs more than p pixels per side.
    mode = "reflect" if min(x.shape[-2:]) > p else "replicate"
    return F.pad(x, (p, p, p, p), mode=mode)


class ConvNeXtBlock(nn.Module):
    """Depthwise 7x7 (reflect padded) -> channel LayerNorm -> 1x1 expand -> GELU -> 1x1 project, plus skip."""

    def __init__(self, width: int = WIDTH):
        super().__init__()
        self.dwconv = nn.Conv2d(width, width, 7, groups=width)
        self.norm = nn.LayerNorm(width)
        self.expand = nn.Linear(width, width * EXPANSION)
        self.project = nn.Linear(width * EXPANSION, width)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        y = self.dwconv(_pad(x, 3))
        y = y.permute(0, 2, 3, 1)
        y = self.project(F.gelu(self.expand(self.norm(y))))
        return x + y.permute(0, 3, 1, 2)


class ResNetBlock(nn.Module):
    def __init__(self, width: int = WIDTH):
        super().__init__()
        self.conv1 = nn.Conv2d(width, width, 3)
        self.conv2 = nn.Conv2d(width, width, 3)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        y = F.gelu(self.conv1(_pad(x, 1)))
        y = self.conv2(_pad(y, 1))
        return x + y


class ResidualBranch(nn.Module):
    """1x1 stem, three blocks at width 16, zero-initialized 1x1 head, hard clip to [-clip, clip]."""

    def __init__(self, clip: float, block: Literal["convnext", "resnet"] = "convnext", depth: int = 3):
        super().__init__()
        if clip <= 0:
            raise ValueError("residual clip bound must be positive")
        self.clip = clip
        self.block = block
        block_cls = ConvNeXtBlock if block == "convnext" else ResNetBlock
        self.stem = nn.Conv2d(3, WIDTH, 1)
        self.blocks = nn.Sequential(*[block_cls(WIDTH) for _ in range(depth)])
        self.head = nn.Conv2d(WIDTH, 3, 1)
        nn.init.zeros_(self.head.weight)
        nn.init.zeros_(self.head.bias)

    def forward(self, image: torch.Tensor) -> torch.Tensor:
        """image: H x W x 3 -> residual H x W x 3 in [-clip, clip]."""
        x = image.permute(2, 0, 1).unsqueeze(0)
        out = self.head(self.blocks(self.stem(x))).squeeze(0).permute(1, 2, 0)
        if not torch.isfinite(out).all():
            raise NonFiniteError("non-finite activation in residual branch")
        return out.clamp(-self.clip, self.clip)


def residual_map(image: torch.Tensor, branch: ResidualBranch) -> torch.Tensor:
    return branch(image)


def pseudo_enhance_unclamped(
    image: torch.Tensor, M: torch.Tensor, curve: torch.Tensor, branch: ResidualBranch | None
) -> torch.Tensor:
    adjusted = global_adjust(image, M, curve)
    if branch is None:
        return adjusted
    return adjusted + residual_map(image, branch)


def pseudo_enhance(
    image: torch.Tensor, M: torch.Tensor, curve: torch.Tensor, branch: ResidualBranch | None
) -> torch.Tensor:
    """clamp(L(C M) M^-1 + R(C), 0, 1). A None branch means no residual."""
    return pseudo_enhance_unclamped(image, M, curve, branch).clamp(0.0, 1.0)
